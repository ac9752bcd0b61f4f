//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `RPLCKPT\0`, `u32` version, `u64` iteration,
//! σ schedule as `f64 start, f64 end, u64 decay_iters`, `f64` value output
//! scale, `u32` tensor count, then per tensor `u32` name length, UTF-8 name,
//! `u32` rank, `u64` dims and `f64` values. Policy tensors come first.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::policy::{PolicyParams, PolicyShape, SigmaSchedule, TensorSpec, ValueParams};

const MAGIC: &[u8; 8] = b"RPLCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Number of completed training iterations.
    pub iteration: u64,
    pub sigma: SigmaSchedule,
    pub policy: PolicyParams,
    pub value: ValueParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.iteration.to_le_bytes());
        out.extend_from_slice(&self.sigma.start.to_le_bytes());
        out.extend_from_slice(&self.sigma.end.to_le_bytes());
        out.extend_from_slice(&self.sigma.decay_iters.to_le_bytes());
        out.extend_from_slice(&self.value.output_scale().to_le_bytes());
        let tensors: Vec<(&TensorSpec, &[f64])> = self
            .policy
            .tensor_specs()
            .iter()
            .map(|s| (s, self.policy.flat()))
            .chain(self.value.tensor_specs().iter().map(|s| (s, self.value.flat())))
            .collect();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (spec, flat) in tensors {
            out.extend_from_slice(&(spec.name.len() as u32).to_le_bytes());
            out.extend_from_slice(spec.name.as_bytes());
            out.extend_from_slice(&(spec.shape.len() as u32).to_le_bytes());
            for d in &spec.shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for v in &flat[spec.range()] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let raw = RawCheckpoint::parse(bytes)?;
        raw.assemble()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Fails unless the stored networks have exactly the given architecture.
    pub fn validate_shapes(&self, policy: &PolicyShape, value_hidden: &[usize]) -> Result<()> {
        if self.policy.shape() != policy {
            return Err(Error::Checkpoint(format!(
                "policy shape {:?} does not match configured {:?}",
                self.policy.shape(),
                policy
            )));
        }
        if self.value.hidden() != value_hidden || self.value.input() != policy.input {
            return Err(Error::Checkpoint(format!(
                "value network {}→{:?} does not match configured {}→{:?}",
                self.value.input(),
                self.value.hidden(),
                policy.input,
                value_hidden
            )));
        }
        Ok(())
    }

    /// Tensor manifest without building the networks.
    pub fn inspect(bytes: &[u8]) -> Result<(u64, SigmaSchedule, Vec<TensorInfo>)> {
        let raw = RawCheckpoint::parse(bytes)?;
        let infos = raw
            .tensors
            .into_iter()
            .map(|(name, shape, _)| TensorInfo { name, shape })
            .collect();
        Ok((raw.iteration, raw.sigma, infos))
    }
}

struct RawCheckpoint {
    iteration: u64,
    sigma: SigmaSchedule,
    value_scale: f64,
    tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(e) => {
                let s = &self.bytes[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(Error::Checkpoint(format!("truncated at byte {}", self.pos))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl RawCheckpoint {
    fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let iteration = r.u64()?;
        let sigma = SigmaSchedule {
            start: r.f64()?,
            end: r.f64()?,
            decay_iters: r.u64()?,
        };
        let value_scale = r.f64()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|&n| n <= bytes.len() / 8)
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name} has an impossible shape {shape:?}")))?;
            let mut vals = Vec::with_capacity(n);
            for _ in 0..n {
                vals.push(r.f64()?);
            }
            tensors.push((name, shape, vals));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            iteration,
            sigma,
            value_scale,
            tensors,
        })
    }

    fn shape_of(&self, name: &str) -> Result<&[usize]> {
        self.tensors
            .iter()
            .find(|t| t.0 == name)
            .map(|t| t.1.as_slice())
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
    }

    fn assemble(self) -> Result<Checkpoint> {
        let dims2 = |name: &str| -> Result<(usize, usize)> {
            match self.shape_of(name)? {
                [a, b] => Ok((*a, *b)),
                s => Err(Error::Checkpoint(format!("tensor {name} should be 2-D, got {s:?}"))),
            }
        };
        let mut features = Vec::new();
        let mut input = None;
        while let Ok((w, prev)) = dims2(&format!("feature.{}.weight", features.len())) {
            input.get_or_insert(prev);
            features.push(w);
        }
        let (_, h) = dims2("lstm.weight_hh")?;
        let (_, lstm_in) = dims2("lstm.weight_ih")?;
        let input = input.unwrap_or(lstm_in);
        let mut hidden = Vec::new();
        while let Ok((w, _)) = dims2(&format!("value.{}.weight", hidden.len())) {
            hidden.push(w);
        }
        hidden.pop();

        let shape = PolicyShape::new(input, features, h);
        let policy_template = PolicyParams::zeros(shape.clone());
        let value_template = ValueParams::zeros(input, hidden.clone(), self.value_scale);
        let expected: Vec<&TensorSpec> = policy_template
            .tensor_specs()
            .iter()
            .chain(value_template.tensor_specs())
            .collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        let mut theta = Vec::with_capacity(policy_template.num_params());
        let mut zeta = Vec::with_capacity(value_template.num_params());
        let n_policy = policy_template.tensor_specs().len();
        for (k, (spec, (name, dims, vals))) in expected.iter().zip(self.tensors).enumerate() {
            if spec.name != name || spec.shape != dims {
                return Err(Error::Checkpoint(format!(
                    "tensor #{k}: expected {} {:?}, found {name} {dims:?}",
                    spec.name, spec.shape
                )));
            }
            if k < n_policy { &mut theta } else { &mut zeta }.extend(vals);
        }
        Ok(Checkpoint {
            iteration: self.iteration,
            sigma: self.sigma,
            policy: PolicyParams::from_flat(shape, theta)?,
            value: ValueParams::from_flat(input, hidden, self.value_scale, zeta)?,
        })
    }
}
