use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// `y = W x + b` with row-major `W` of shape `out_dim x in_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Affine {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Affine { in_dim, out_dim, weight: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim] }
    }

    /// Orthogonal init (Gram-Schmidt on a Gaussian draw) scaled by `gain`.
    pub fn orthogonal<R: Rng>(in_dim: usize, out_dim: usize, gain: f64, rng: &mut R) -> Self {
        let (rows, cols) = if out_dim <= in_dim { (out_dim, in_dim) } else { (in_dim, out_dim) };
        let mut m: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.sample(StandardNormal)).collect()).collect();
        for i in 0..rows {
            for j in 0..i {
                let dot: f64 = m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = m.split_at_mut(i);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a -= dot * b;
                }
            }
            let norm = m[i].iter().map(|a| a * a).sum::<f64>().sqrt();
            m[i].iter_mut().for_each(|a| *a /= norm);
        }
        let mut weight = vec![0.0; in_dim * out_dim];
        for o in 0..out_dim {
            for i in 0..in_dim {
                let v = if out_dim <= in_dim { m[o][i] } else { m[i][o] };
                weight[o * in_dim + i] = gain * v;
            }
        }
        Affine { in_dim, out_dim, weight, bias: vec![0.0; out_dim] }
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        for (o, (row, b)) in out.iter_mut().zip(self.weight.chunks_exact(self.in_dim).zip(&self.bias)) {
            *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim];
        self.forward(x, &mut out);
        out
    }

    /// Accumulates parameter gradients into `grad` and, when requested, writes
    /// the input gradient.
    pub fn backward(&self, x: &[f64], grad_out: &[f64], grad: &mut Affine, grad_in: Option<&mut [f64]>) {
        let n = self.in_dim;
        for (o, g) in grad_out.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            for (gw, v) in grad.weight[o * n..(o + 1) * n].iter_mut().zip(x) {
                *gw += g * v;
            }
        }
        if let Some(gi) = grad_in {
            gi.iter_mut().for_each(|v| *v = 0.0);
            for (row, g) in self.weight.chunks_exact(n).zip(grad_out) {
                for (acc, w) in gi.iter_mut().zip(row) {
                    *acc += g * w;
                }
            }
        }
    }
}

/// Per-feature normalization with running statistics and a trainable
/// scale/shift.
///
/// The forward pass always uses the running statistics, so it is an
/// elementwise affine map between statistics refreshes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub enabled: bool,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
}

impl Normalizer {
    pub fn new(dim: usize, enabled: bool, shift: Vec<f64>) -> Self {
        debug_assert_eq!(shift.len(), dim);
        Normalizer {
            enabled,
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            scale: vec![1.0; dim],
            shift,
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    #[inline]
    fn inv_std(&self, i: usize) -> f64 {
        1.0 / (self.running_var[i] + self.eps).sqrt()
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        if !self.enabled {
            out.copy_from_slice(x);
            return;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.scale[i] * (x[i] - self.running_mean[i]) * self.inv_std(i) + self.shift[i];
        }
    }

    pub fn backward(&self, x: &[f64], grad_out: &[f64], grad: &mut Normalizer, grad_in: &mut [f64]) {
        if !self.enabled {
            grad_in.copy_from_slice(grad_out);
            return;
        }
        for i in 0..self.dim() {
            let inv = self.inv_std(i);
            grad.scale[i] += grad_out[i] * (x[i] - self.running_mean[i]) * inv;
            grad.shift[i] += grad_out[i];
            grad_in[i] = grad_out[i] * self.scale[i] * inv;
        }
    }

    /// Exponential update of the running statistics from a batch of inputs.
    pub fn update_stats(&mut self, batch: &[Vec<f64>]) {
        self.update_stats_with(batch, self.momentum);
    }

    /// Same as [`Normalizer::update_stats`] with an explicit momentum; a
    /// momentum of 1 replaces the statistics outright.
    pub fn update_stats_with(&mut self, batch: &[Vec<f64>], momentum: f64) {
        if !self.enabled || batch.len() < 2 {
            return;
        }
        let n = batch.len() as f64;
        for i in 0..self.dim() {
            let mean = batch.iter().map(|x| x[i]).sum::<f64>() / n;
            let var = batch.iter().map(|x| (x[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            self.running_mean[i] = (1.0 - momentum) * self.running_mean[i] + momentum * mean;
            self.running_var[i] = (1.0 - momentum) * self.running_var[i] + momentum * var;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Affine::orthogonal(6, 3, 1.0, &mut rng);
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..6).map(|k| a.weight[i * 6 + k] * a.weight[j * 6 + k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
        let tall = Affine::orthogonal(3, 6, 2.0, &mut rng);
        for i in 0..3 {
            let norm: f64 = (0..6).map(|o| tall.weight[o * 3 + i].powi(2)).sum();
            assert!((norm - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalizer_tracks_batch_statistics() {
        let mut n = Normalizer::new(1, true, vec![0.0]);
        n.momentum = 1.0;
        n.update_stats(&[vec![1.0], vec![3.0]]);
        assert_eq!(n.running_mean, vec![2.0]);
        assert_eq!(n.running_var, vec![2.0]);
    }
}
