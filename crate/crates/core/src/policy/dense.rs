//! Row-major dense kernels and parameter initialization shared by both
//! networks. Weight matrices are `rows × cols` with `w[r * cols + c]`.

use rand::Rng;
use rand_distr::StandardNormal;

/// `out += W x`
#[inline]
pub(crate) fn gemv_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        *o += acc;
    }
}

/// `dx += Wᵀ dy`
#[inline]
pub(crate) fn gemv_t_add(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let cols = dx.len();
    debug_assert_eq!(w.len(), dy.len() * cols);
    for (g, row) in dy.iter().zip(w.chunks_exact(cols)) {
        if *g == 0.0 {
            continue;
        }
        for (d, a) in dx.iter_mut().zip(row) {
            *d += g * a;
        }
    }
}

/// `gw += dy xᵀ`
#[inline]
pub(crate) fn outer_add(gw: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (g, row) in dy.iter().zip(gw.chunks_exact_mut(cols)) {
        if *g == 0.0 {
            continue;
        }
        for (d, a) in row.iter_mut().zip(x) {
            *d += g * a;
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Random matrix with orthonormal rows (or columns, when taller than wide),
/// scaled by `gain`.
pub(crate) fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let transpose = rows > cols;
    let (n, len) = if transpose { (cols, rows) } else { (rows, cols) };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n);
    while vecs.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for u in &vecs {
            let p: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= p * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        vecs.push(v);
    }
    let mut w = vec![0.0; rows * cols];
    for (k, v) in vecs.iter().enumerate() {
        for (m, x) in v.iter().enumerate() {
            let (r, c) = if transpose { (m, k) } else { (k, m) };
            w[r * cols + c] = gain * x;
        }
    }
    w
}

/// A named slice of a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Default)]
pub(crate) struct LayoutBuilder {
    specs: Vec<TensorSpec>,
    next: usize,
}

impl LayoutBuilder {
    pub(crate) fn push(&mut self, name: String, shape: Vec<usize>) -> usize {
        let off = self.next;
        let spec = TensorSpec { name, shape, offset: off };
        self.next += spec.len();
        self.specs.push(spec);
        off
    }

    pub(crate) fn finish(self) -> (Vec<TensorSpec>, usize) {
        (self.specs, self.next)
    }
}
