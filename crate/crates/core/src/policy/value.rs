use rand::Rng;

use super::dense::{gemv_add, gemv_t_add, orthogonal, outer_add, LayoutBuilder, TensorSpec};
use crate::error::{Error, Result};

/// State-value network: tanh MLP with a linear scalar output. The raw output
/// is multiplied by `output_scale` so targets of order ±10⁴ stay in the
/// well-conditioned range of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueParams {
    input: usize,
    hidden: Vec<usize>,
    output_scale: f64,
    specs: Vec<TensorSpec>,
    /// (weight offset, bias offset, in, out) per layer, output layer last.
    layers: Vec<(usize, usize, usize, usize)>,
    zeta: Vec<f64>,
}

impl ValueParams {
    pub fn zeros(input: usize, hidden: Vec<usize>, output_scale: f64) -> Self {
        let mut b = LayoutBuilder::default();
        let mut layers = Vec::new();
        let mut prev = input;
        for (l, &w) in hidden.iter().chain(std::iter::once(&1)).enumerate() {
            let wo = b.push(format!("value.{l}.weight"), vec![w, prev]);
            let bo = b.push(format!("value.{l}.bias"), vec![w]);
            layers.push((wo, bo, prev, w));
            prev = w;
        }
        let (specs, total) = b.finish();
        Self {
            input,
            hidden,
            output_scale,
            specs,
            layers,
            zeta: vec![0.0; total],
        }
    }

    pub fn init<R: Rng + ?Sized>(input: usize, hidden: Vec<usize>, output_scale: f64, rng: &mut R) -> Self {
        let mut v = Self::zeros(input, hidden, output_scale);
        let n = v.layers.len();
        for (l, &(wo, _, i, out)) in v.layers.clone().iter().enumerate() {
            let gain = if l + 1 == n { 0.1 } else { 1.0 };
            let w = orthogonal(out, i, gain, rng);
            v.zeta[wo..wo + w.len()].copy_from_slice(&w);
        }
        v
    }

    pub fn from_flat(input: usize, hidden: Vec<usize>, output_scale: f64, zeta: Vec<f64>) -> Result<Self> {
        let mut v = Self::zeros(input, hidden, output_scale);
        if zeta.len() != v.zeta.len() {
            return Err(Error::Config(format!(
                "value network expects {} parameters, got {}",
                v.zeta.len(),
                zeta.len()
            )));
        }
        v.zeta = zeta;
        Ok(v)
    }

    pub fn input(&self) -> usize {
        self.input
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    pub fn flat(&self) -> &[f64] {
        &self.zeta
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.zeta
    }

    pub fn num_params(&self) -> usize {
        self.zeta.len()
    }

    pub fn tensor_specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn is_finite(&self) -> bool {
        self.zeta.iter().all(|x| x.is_finite())
    }

    fn forward_cached(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) -> f64 {
        acts.clear();
        acts.push(x.to_vec());
        let n = self.layers.len();
        for (l, &(wo, bo, i, out)) in self.layers.iter().enumerate() {
            let mut y = self.zeta[bo..bo + out].to_vec();
            gemv_add(&self.zeta[wo..wo + out * i], acts.last().unwrap(), &mut y);
            if l + 1 < n {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
        }
        acts.last().unwrap()[0] * self.output_scale
    }

    /// `V̂(s)` for a normalized state vector.
    pub fn forward(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.input);
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        self.forward_cached(x, &mut acts)
    }

    /// Accumulates `dout · ∂V̂(x)/∂ζ` into `grad`; returns `V̂(x)`.
    pub fn backward(&self, x: &[f64], dout: f64, grad: &mut [f64]) -> f64 {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let value = self.forward_cached(x, &mut acts);
        let n = self.layers.len();
        let mut upstream = vec![dout * self.output_scale];
        for (l, &(wo, bo, i, out)) in self.layers.iter().enumerate().rev() {
            let y = &acts[l + 1];
            let dpre: Vec<f64> = if l + 1 < n {
                upstream.iter().zip(y).map(|(u, a)| u * (1.0 - a * a)).collect()
            } else {
                upstream
            };
            for (g, d) in grad[bo..bo + out].iter_mut().zip(&dpre) {
                *g += d;
            }
            outer_add(&mut grad[wo..wo + out * i], &dpre, &acts[l]);
            let mut down = vec![0.0; i];
            if l > 0 {
                gemv_t_add(&self.zeta[wo..wo + out * i], &dpre, &mut down);
            }
            upstream = down;
        }
        value
    }
}
