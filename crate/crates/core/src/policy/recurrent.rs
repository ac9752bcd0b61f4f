//! Recurrent policy: tanh feature MLP → LSTM → affine head producing the
//! Gaussian mean. Gradients are exact backpropagation through the full
//! sequence; directional derivatives use forward-mode propagation.

use rand::Rng;

use super::dense::{gemv_add, gemv_t_add, orthogonal, outer_add, sigmoid, LayoutBuilder, TensorSpec};
use super::gaussian::Action;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyShape {
    pub input: usize,
    /// Feature-network hidden widths.
    pub features: Vec<usize>,
    pub lstm: usize,
}

impl PolicyShape {
    pub fn new(input: usize, features: Vec<usize>, lstm: usize) -> Self {
        Self { input, features, lstm }
    }

    fn lstm_input(&self) -> usize {
        *self.features.last().unwrap_or(&self.input)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Offsets {
    /// (weight offset, bias offset, in, out)
    features: Vec<(usize, usize, usize, usize)>,
    wx: usize,
    wh: usize,
    b: usize,
    head_w: usize,
    head_b: usize,
}

/// LSTM hidden and cell vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl RecurrentState {
    pub fn zeros(units: usize) -> Self {
        Self {
            hidden: vec![0.0; units],
            cell: vec![0.0; units],
        }
    }
}

/// Flat parameter vector θ plus the architecture that gives it meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    shape: PolicyShape,
    specs: Vec<TensorSpec>,
    offsets: Offsets,
    theta: Vec<f64>,
}

fn layout(shape: &PolicyShape) -> (Vec<TensorSpec>, Offsets, usize) {
    let mut b = LayoutBuilder::default();
    let mut features = Vec::new();
    let mut prev = shape.input;
    for (l, &w) in shape.features.iter().enumerate() {
        let wo = b.push(format!("feature.{l}.weight"), vec![w, prev]);
        let bo = b.push(format!("feature.{l}.bias"), vec![w]);
        features.push((wo, bo, prev, w));
        prev = w;
    }
    let h = shape.lstm;
    let wx = b.push("lstm.weight_ih".into(), vec![4 * h, prev]);
    let wh = b.push("lstm.weight_hh".into(), vec![4 * h, h]);
    let bb = b.push("lstm.bias".into(), vec![4 * h]);
    let head_w = b.push("head.weight".into(), vec![2, h]);
    let head_b = b.push("head.bias".into(), vec![2]);
    let (specs, total) = b.finish();
    (
        specs,
        Offsets {
            features,
            wx,
            wh,
            b: bb,
            head_w,
            head_b,
        },
        total,
    )
}

/// Cached activations of one forward pass over a sequence.
#[derive(Debug, Clone)]
pub struct SequenceTrace {
    len: usize,
    /// Per layer, post-activation outputs `T × width`; layer 0 is the input.
    acts: Vec<Vec<f64>>,
    /// Post-activation gates `T × 4H` in i, f, g, o order.
    gates: Vec<f64>,
    /// `(T+1) × H`, row 0 is the initial state.
    cells: Vec<f64>,
    hiddens: Vec<f64>,
    /// `T × H` of tanh(c_t).
    cell_tanh: Vec<f64>,
    pub mu: Vec<Action>,
}

impl SequenceTrace {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl PolicyParams {
    pub fn zeros(shape: PolicyShape) -> Self {
        let (specs, offsets, total) = layout(&shape);
        Self {
            shape,
            specs,
            offsets,
            theta: vec![0.0; total],
        }
    }

    /// Orthogonal weights (gain 1, head gain `head_gain`), zero biases.
    pub fn init<R: Rng + ?Sized>(shape: PolicyShape, head_gain: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(shape);
        let o = p.offsets.clone();
        for &(wo, _, i, out) in &o.features {
            let w = orthogonal(out, i, 1.0, rng);
            p.theta[wo..wo + w.len()].copy_from_slice(&w);
        }
        let h = p.shape.lstm;
        let xin = p.shape.lstm_input();
        let wx = orthogonal(4 * h, xin, 1.0, rng);
        p.theta[o.wx..o.wx + wx.len()].copy_from_slice(&wx);
        for g in 0..4 {
            let wh = orthogonal(h, h, 1.0, rng);
            let start = o.wh + g * h * h;
            p.theta[start..start + h * h].copy_from_slice(&wh);
        }
        let head = orthogonal(2, h, head_gain, rng);
        p.theta[o.head_w..o.head_w + head.len()].copy_from_slice(&head);
        p
    }

    pub fn from_flat(shape: PolicyShape, theta: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(shape);
        if theta.len() != p.theta.len() {
            return Err(Error::Config(format!(
                "policy expects {} parameters, got {}",
                p.theta.len(),
                theta.len()
            )));
        }
        p.theta = theta;
        Ok(p)
    }

    pub fn shape(&self) -> &PolicyShape {
        &self.shape
    }

    pub fn flat(&self) -> &[f64] {
        &self.theta
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    pub fn tensor_specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn with_flat(&self, theta: Vec<f64>) -> Self {
        assert_eq!(theta.len(), self.theta.len());
        Self {
            theta,
            ..self.clone()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|x| x.is_finite())
    }

    pub fn initial_state(&self) -> RecurrentState {
        RecurrentState::zeros(self.shape.lstm)
    }

    fn feature_forward(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        let mut input = x.to_vec();
        for &(wo, bo, i, out) in &self.offsets.features {
            let mut y = self.theta[bo..bo + out].to_vec();
            gemv_add(&self.theta[wo..wo + out * i], &input, &mut y);
            y.iter_mut().for_each(|v| *v = v.tanh());
            acts.push(y.clone());
            input = y;
        }
    }

    /// One recurrent step. Returns μ and writes the post-step state into `state`.
    pub fn step(&self, x: &[f64], state: &mut RecurrentState) -> Result<Action> {
        if !self.is_finite() {
            return Err(Error::Numeric("policy parameters are not finite".into()));
        }
        Ok(self.step_unchecked(x, state))
    }

    pub(crate) fn step_unchecked(&self, x: &[f64], state: &mut RecurrentState) -> Action {
        debug_assert_eq!(x.len(), self.shape.input);
        let mut acts = Vec::with_capacity(self.offsets.features.len());
        self.feature_forward(x, &mut acts);
        let xin = acts.last().map(Vec::as_slice).unwrap_or(x);
        let h = self.shape.lstm;
        let o = &self.offsets;
        let mut z = self.theta[o.b..o.b + 4 * h].to_vec();
        gemv_add(&self.theta[o.wx..o.wx + 4 * h * xin.len()], xin, &mut z);
        gemv_add(&self.theta[o.wh..o.wh + 4 * h * h], &state.hidden, &mut z);
        for k in 0..h {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[h + k]);
            let g = z[2 * h + k].tanh();
            let og = sigmoid(z[3 * h + k]);
            let c = f * state.cell[k] + i * g;
            state.cell[k] = c;
            state.hidden[k] = og * c.tanh();
        }
        let mut mu = [self.theta[o.head_b], self.theta[o.head_b + 1]];
        gemv_add(&self.theta[o.head_w..o.head_w + 2 * h], &state.hidden, &mut mu);
        mu
    }

    /// Forward pass over `inputs` (`T × input`, row-major) from a zero state.
    pub fn forward_sequence(&self, inputs: &[f64]) -> SequenceTrace {
        let n_in = self.shape.input;
        assert_eq!(inputs.len() % n_in, 0);
        let t_len = inputs.len() / n_in;
        let h = self.shape.lstm;
        let o = &self.offsets;
        let n_layers = o.features.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        acts.push(inputs.to_vec());
        for &(wo, bo, i, out) in &o.features {
            let prev = acts.last().unwrap();
            let mut layer = Vec::with_capacity(t_len * out);
            for t in 0..t_len {
                let mut y = self.theta[bo..bo + out].to_vec();
                gemv_add(&self.theta[wo..wo + out * i], &prev[t * i..(t + 1) * i], &mut y);
                layer.extend(y.into_iter().map(f64::tanh));
            }
            acts.push(layer);
        }
        let xin_w = self.shape.lstm_input();
        let mut gates = vec![0.0; t_len * 4 * h];
        let mut cells = vec![0.0; (t_len + 1) * h];
        let mut hiddens = vec![0.0; (t_len + 1) * h];
        let mut cell_tanh = vec![0.0; t_len * h];
        let mut mu = Vec::with_capacity(t_len);
        let wx = &self.theta[o.wx..o.wx + 4 * h * xin_w];
        let wh = &self.theta[o.wh..o.wh + 4 * h * h];
        let head = &self.theta[o.head_w..o.head_w + 2 * h];
        let xin_all = acts.last().unwrap();
        for t in 0..t_len {
            let z = &mut gates[t * 4 * h..(t + 1) * 4 * h];
            z.copy_from_slice(&self.theta[o.b..o.b + 4 * h]);
            gemv_add(wx, &xin_all[t * xin_w..(t + 1) * xin_w], z);
            let (h_prev, h_rest) = hiddens.split_at_mut((t + 1) * h);
            let h_prev = &h_prev[t * h..];
            gemv_add(wh, h_prev, z);
            let (c_prev, c_rest) = cells.split_at_mut((t + 1) * h);
            let c_prev = &c_prev[t * h..];
            for k in 0..h {
                z[k] = sigmoid(z[k]);
                z[h + k] = sigmoid(z[h + k]);
                z[2 * h + k] = z[2 * h + k].tanh();
                z[3 * h + k] = sigmoid(z[3 * h + k]);
                let c = z[h + k] * c_prev[k] + z[k] * z[2 * h + k];
                c_rest[k] = c;
                let tc = c.tanh();
                cell_tanh[t * h + k] = tc;
                h_rest[k] = z[3 * h + k] * tc;
            }
            let mut m = [self.theta[o.head_b], self.theta[o.head_b + 1]];
            gemv_add(head, &hiddens[(t + 1) * h..(t + 2) * h], &mut m);
            mu.push(m);
        }
        SequenceTrace {
            len: t_len,
            acts,
            gates,
            cells,
            hiddens,
            cell_tanh,
            mu,
        }
    }

    /// Accumulates `Σ_t (∂μ_t/∂θ)ᵀ dmu[t]` into `grad` (full BPTT).
    pub fn backward(&self, trace: &SequenceTrace, dmu: &[Action], grad: &mut [f64]) {
        assert_eq!(dmu.len(), trace.len);
        assert_eq!(grad.len(), self.theta.len());
        let h = self.shape.lstm;
        let o = &self.offsets;
        let xin_w = self.shape.lstm_input();
        let n_layers = o.features.len();
        let xin_all = &trace.acts[n_layers];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        // gradient wrt the LSTM input, per step, for the feature-net backward pass
        let mut dxin = vec![0.0; trace.len * xin_w];
        for t in (0..trace.len).rev() {
            let h_t = &trace.hiddens[(t + 1) * h..(t + 2) * h];
            let h_prev = &trace.hiddens[t * h..(t + 1) * h];
            let c_prev = &trace.cells[t * h..(t + 1) * h];
            let g = &trace.gates[t * 4 * h..(t + 1) * 4 * h];
            let tc = &trace.cell_tanh[t * h..(t + 1) * h];
            let d = dmu[t];
            grad[o.head_b] += d[0];
            grad[o.head_b + 1] += d[1];
            outer_add(&mut grad[o.head_w..o.head_w + 2 * h], &d, h_t);
            let mut dh = dh_next.clone();
            gemv_t_add(&self.theta[o.head_w..o.head_w + 2 * h], &d, &mut dh);
            for k in 0..h {
                let (i, f, gg, og) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let d_o = dh[k] * tc[k];
                let dc = dh[k] * og * (1.0 - tc[k] * tc[k]) + dc_next[k];
                dz[k] = dc * gg * i * (1.0 - i);
                dz[h + k] = dc * c_prev[k] * f * (1.0 - f);
                dz[2 * h + k] = dc * i * (1.0 - gg * gg);
                dz[3 * h + k] = d_o * og * (1.0 - og);
                dc_next[k] = dc * f;
            }
            for (gb, v) in grad[o.b..o.b + 4 * h].iter_mut().zip(&dz) {
                *gb += v;
            }
            outer_add(&mut grad[o.wx..o.wx + 4 * h * xin_w], &dz, &xin_all[t * xin_w..(t + 1) * xin_w]);
            outer_add(&mut grad[o.wh..o.wh + 4 * h * h], &dz, h_prev);
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            gemv_t_add(&self.theta[o.wh..o.wh + 4 * h * h], &dz, &mut dh_next);
            gemv_t_add(
                &self.theta[o.wx..o.wx + 4 * h * xin_w],
                &dz,
                &mut dxin[t * xin_w..(t + 1) * xin_w],
            );
        }
        // feature network, last layer first
        let mut upstream = dxin;
        for (l, &(wo, bo, i, out)) in o.features.iter().enumerate().rev() {
            let y = &trace.acts[l + 1];
            let x = &trace.acts[l];
            let mut down = if l > 0 { vec![0.0; trace.len * i] } else { Vec::new() };
            let mut dpre = vec![0.0; out];
            for t in 0..trace.len {
                for k in 0..out {
                    let a = y[t * out + k];
                    dpre[k] = upstream[t * out + k] * (1.0 - a * a);
                }
                for (gb, v) in grad[bo..bo + out].iter_mut().zip(&dpre) {
                    *gb += v;
                }
                outer_add(&mut grad[wo..wo + out * i], &dpre, &x[t * i..(t + 1) * i]);
                if l > 0 {
                    gemv_t_add(&self.theta[wo..wo + out * i], &dpre, &mut down[t * i..(t + 1) * i]);
                }
            }
            upstream = down;
        }
    }

    /// Directional derivative `∂μ_t/∂θ · v` for every step of the trace.
    pub fn jvp(&self, trace: &SequenceTrace, v: &[f64]) -> Vec<Action> {
        assert_eq!(v.len(), self.theta.len());
        let h = self.shape.lstm;
        let o = &self.offsets;
        let t_len = trace.len;
        // tangent of each feature layer output
        let mut tangent: Vec<f64> = vec![0.0; t_len * self.shape.input];
        for (l, &(wo, bo, i, out)) in o.features.iter().enumerate() {
            let x = &trace.acts[l];
            let y = &trace.acts[l + 1];
            let mut next = vec![0.0; t_len * out];
            for t in 0..t_len {
                let nt = &mut next[t * out..(t + 1) * out];
                nt.copy_from_slice(&v[bo..bo + out]);
                gemv_add(&v[wo..wo + out * i], &x[t * i..(t + 1) * i], nt);
                if l > 0 {
                    gemv_add(&self.theta[wo..wo + out * i], &tangent[t * i..(t + 1) * i], nt);
                }
                for k in 0..out {
                    let a = y[t * out + k];
                    nt[k] *= 1.0 - a * a;
                }
            }
            tangent = next;
        }
        let xin_w = self.shape.lstm_input();
        let xin_all = &trace.acts[o.features.len()];
        let has_features = !o.features.is_empty();
        let mut dh = vec![0.0; h];
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        let mut out = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let g = &trace.gates[t * 4 * h..(t + 1) * 4 * h];
            let h_prev = &trace.hiddens[t * h..(t + 1) * h];
            let c_prev = &trace.cells[t * h..(t + 1) * h];
            let tc = &trace.cell_tanh[t * h..(t + 1) * h];
            dz.copy_from_slice(&v[o.b..o.b + 4 * h]);
            gemv_add(&v[o.wx..o.wx + 4 * h * xin_w], &xin_all[t * xin_w..(t + 1) * xin_w], &mut dz);
            if has_features {
                gemv_add(
                    &self.theta[o.wx..o.wx + 4 * h * xin_w],
                    &tangent[t * xin_w..(t + 1) * xin_w],
                    &mut dz,
                );
            }
            gemv_add(&v[o.wh..o.wh + 4 * h * h], h_prev, &mut dz);
            gemv_add(&self.theta[o.wh..o.wh + 4 * h * h], &dh, &mut dz);
            for k in 0..h {
                let (i, f, gg, og) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let di = dz[k] * i * (1.0 - i);
                let df = dz[h + k] * f * (1.0 - f);
                let dg = dz[2 * h + k] * (1.0 - gg * gg);
                let d_o = dz[3 * h + k] * og * (1.0 - og);
                let c = df * c_prev[k] + f * dc[k] + di * gg + i * dg;
                dc[k] = c;
                dh[k] = d_o * tc[k] + og * (1.0 - tc[k] * tc[k]) * c;
            }
            let h_t = &trace.hiddens[(t + 1) * h..(t + 2) * h];
            let mut m = [v[o.head_b], v[o.head_b + 1]];
            gemv_add(&v[o.head_w..o.head_w + 2 * h], h_t, &mut m);
            gemv_add(&self.theta[o.head_w..o.head_w + 2 * h], &dh, &mut m);
            out.push(m);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> (PolicyParams, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = PolicyParams::init(PolicyShape::new(4, vec![5, 3], 3), 0.5, &mut rng);
        // non-zero biases exercise every path
        let n = p.num_params();
        for k in 0..n {
            p.flat_mut()[k] += 0.1 * ((k as f64) * 0.7).sin();
        }
        let inputs: Vec<f64> = (0..4 * 6).map(|k| ((k as f64) * 0.37).cos()).collect();
        (p, inputs)
    }

    #[test]
    fn zero_params_give_zero_mean() {
        let p = PolicyParams::zeros(PolicyShape::new(21, vec![8, 4], 3));
        let mut s = p.initial_state();
        assert_eq!(p.step(&[0.3; 21], &mut s).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn hand_computed_unit_network() {
        // one unit everywhere
        let shape = PolicyShape::new(1, vec![1], 1);
        let mut p = PolicyParams::zeros(shape);
        // feature w, b; wx (i,f,g,o); wh; b; head (2x1); head b
        let theta = vec![
            0.5, 0.1, // feature
            0.2, 0.3, 0.4, 0.5, // wx
            0.0, 0.0, 0.0, 0.0, // wh
            0.0, 0.0, 0.0, 0.0, // lstm bias
            2.0, -1.0, // head w
            0.1, 0.2, // head b
        ];
        p.flat_mut().copy_from_slice(&theta);
        let x = 0.8f64;
        let a = (0.5 * x + 0.1).tanh();
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let (i, f, g, o) = (s(0.2 * a), s(0.3 * a), (0.4 * a).tanh(), s(0.5 * a));
        let c = f * 0.0 + i * g;
        let hh = o * c.tanh();
        let mut st = p.initial_state();
        let mu = p.step(&[x], &mut st).unwrap();
        assert!((mu[0] - (2.0 * hh + 0.1)).abs() < 1e-15);
        assert!((mu[1] - (-hh + 0.2)).abs() < 1e-15);
        assert!((st.cell[0] - c).abs() < 1e-15);
    }

    #[test]
    fn recurrence_disabled_repeats_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = PolicyParams::init(PolicyShape::new(3, vec![4], 2), 1.0, &mut rng);
        // zero the recurrent weights and the forget path: state cannot carry over
        let o = p.offsets.clone();
        let h = 2;
        for k in o.wh..o.wh + 4 * h * h {
            p.flat_mut()[k] = 0.0;
        }
        for k in 0..h {
            p.flat_mut()[o.b + h + k] = -1e3;
        }
        let mut st = p.initial_state();
        let a = p.step(&[0.1, 0.2, 0.3], &mut st).unwrap();
        let b = p.step(&[0.1, 0.2, 0.3], &mut st).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sequence_matches_stepping() {
        let (p, inputs) = small();
        let trace = p.forward_sequence(&inputs);
        let mut st = p.initial_state();
        for (t, x) in inputs.chunks(4).enumerate() {
            let mu = p.step(x, &mut st).unwrap();
            assert_eq!(mu, trace.mu[t]);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (p, inputs) = small();
        let w: Vec<Action> = (0..6).map(|t| [(t as f64).sin(), (t as f64 * 0.5).cos()]).collect();
        let objective = |q: &PolicyParams| -> f64 {
            q.forward_sequence(&inputs)
                .mu
                .iter()
                .zip(&w)
                .map(|(m, c)| m[0] * c[0] + m[1] * c[1])
                .sum()
        };
        let trace = p.forward_sequence(&inputs);
        let mut grad = vec![0.0; p.num_params()];
        p.backward(&trace, &w, &mut grad);
        let h = 1e-6;
        for k in 0..p.num_params() {
            let mut plus = p.clone();
            plus.flat_mut()[k] += h;
            let mut minus = p.clone();
            minus.flat_mut()[k] -= h;
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-7 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn jvp_matches_finite_differences_and_adjoint() {
        let (p, inputs) = small();
        let v: Vec<f64> = (0..p.num_params()).map(|k| ((k * 13 % 7) as f64 - 3.0) * 0.1).collect();
        let trace = p.forward_sequence(&inputs);
        let jv = p.jvp(&trace, &v);
        let h = 1e-6;
        let plus = p.with_flat(p.flat().iter().zip(&v).map(|(a, b)| a + h * b).collect());
        let minus = p.with_flat(p.flat().iter().zip(&v).map(|(a, b)| a - h * b).collect());
        let (mp, mm) = (plus.forward_sequence(&inputs).mu, minus.forward_sequence(&inputs).mu);
        for t in 0..trace.len() {
            for d in 0..2 {
                let fd = (mp[t][d] - mm[t][d]) / (2.0 * h);
                assert!((fd - jv[t][d]).abs() < 1e-7, "{fd} {}", jv[t][d]);
            }
        }
        // <J v, u> == <v, Jᵀ u>
        let u: Vec<Action> = (0..trace.len()).map(|t| [1.0 / (t + 1) as f64, -0.5]).collect();
        let mut jtu = vec![0.0; p.num_params()];
        p.backward(&trace, &u, &mut jtu);
        let lhs: f64 = jv.iter().zip(&u).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
        let rhs: f64 = v.iter().zip(&jtu).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn flat_round_trip() {
        let (p, _) = small();
        let q = PolicyParams::from_flat(p.shape().clone(), p.flat().to_vec()).unwrap();
        assert_eq!(p, q);
        assert!(PolicyParams::from_flat(p.shape().clone(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn non_finite_params_fail_fast() {
        let (mut p, _) = small();
        p.flat_mut()[0] = f64::NAN;
        let mut s = p.initial_state();
        assert!(p.step(&[0.0; 4], &mut s).is_err());
    }
}
