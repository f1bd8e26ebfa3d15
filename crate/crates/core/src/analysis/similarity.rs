use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::envs::make_env;
use crate::policy::{ActionDistribution, PolicyNet};
use crate::Parallelism;

/// Number of initial states probed per policy.
pub const N_STATES: usize = 64;
/// Auxiliary coordinate appended to one-dimensional continuous outputs.
pub const AUX_COORDINATE: f64 = 0.1;

/// A policy's raw outputs on a fixed set of seeded initial states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionMatrix {
    pub policy_id: String,
    pub rows: usize,
    pub cols: usize,
    /// Row-major values.
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl ActionMatrix {
    /// Builds the matrix from per-state raw outputs. Discrete logits are
    /// centered per state; a one-dimensional continuous output gains the
    /// auxiliary column.
    pub fn from_outputs(policy_id: &str, outputs: &[ActionDistribution]) -> Result<Self, AnalysisError> {
        let mut values = Vec::new();
        let mut cols = None;
        for dist in outputs {
            let row: Vec<f64> = match dist {
                ActionDistribution::Categorical { logits } => {
                    let mean = logits.iter().sum::<f64>() / logits.len() as f64;
                    logits.iter().map(|l| l - mean).collect()
                }
                ActionDistribution::Gaussian { mean, .. } if mean.len() == 1 => vec![mean[0], AUX_COORDINATE],
                ActionDistribution::Gaussian { mean, .. } => mean.clone(),
            };
            if *cols.get_or_insert(row.len()) != row.len() {
                return Err(AnalysisError::Shape("rows of differing width".into()));
            }
            values.extend(row);
        }
        Ok(ActionMatrix { policy_id: policy_id.to_string(), rows: outputs.len(), cols: cols.unwrap_or(0), values, normalized: false })
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scales the flattened matrix to unit ℓ2 norm.
    pub fn normalize(mut self) -> Result<Self, AnalysisError> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(AnalysisError::Degenerate(format!("action matrix of '{}' has norm {n}", self.policy_id)));
        }
        self.values.iter_mut().for_each(|v| *v /= n);
        self.normalized = true;
        Ok(self)
    }
}

/// Normalized action matrix of `policy` on the initial states produced by
/// resetting `env_name` with seeds `base_seed..base_seed + N_STATES`.
pub fn action_matrix(policy_id: &str, policy: &PolicyNet, env_name: &str, base_seed: u64) -> Result<ActionMatrix, AnalysisError> {
    let mut env = make_env(env_name)?;
    let mut outputs = Vec::with_capacity(N_STATES);
    for i in 0..N_STATES as u64 {
        let obs = env.reset(Some(base_seed + i));
        outputs.push(policy.forward_actor(&obs)?);
    }
    ActionMatrix::from_outputs(policy_id, &outputs)?.normalize()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub labels: Vec<String>,
    /// Row-major `labels.len()²` cosine similarities.
    pub values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend((0..self.len()).map(|j| self.get(i, j).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Renders the matrix as a PNG heatmap on a blue (−1) / white (0) /
    /// red (+1) scale, `cell` pixels per entry.
    pub fn write_heatmap(&self, path: &Path, cell: u32) -> Result<(), AnalysisError> {
        let n = self.len() as u32;
        let img = image::RgbImage::from_fn(n.max(1) * cell, n.max(1) * cell, |x, y| {
            if n == 0 {
                return image::Rgb([255, 255, 255]);
            }
            heat_color(self.get((y / cell) as usize, (x / cell) as usize))
        });
        img.save_with_format(path, image::ImageFormat::Png).map_err(|e| AnalysisError::Io(e.to_string()))
    }
}

fn heat_color(v: f64) -> image::Rgb<u8> {
    let v = v.clamp(-1.0, 1.0);
    let fade = |t: f64| (255.0 * (1.0 - t)).round() as u8;
    if v >= 0.0 {
        image::Rgb([255, fade(v), fade(v)])
    } else {
        image::Rgb([fade(-v), fade(-v), 255])
    }
}

/// Pairwise cosine similarities of normalized action matrices.
pub fn similarity_matrix(matrices: &[ActionMatrix], par: Parallelism) -> Result<SimilarityMatrix, AnalysisError> {
    if let Some(first) = matrices.first() {
        for m in matrices {
            if (m.rows, m.cols) != (first.rows, first.cols) {
                return Err(AnalysisError::Shape(format!(
                    "'{}' is {}x{} but '{}' is {}x{}",
                    m.policy_id, m.rows, m.cols, first.policy_id, first.rows, first.cols
                )));
            }
            if !m.normalized {
                return Err(AnalysisError::Shape(format!("'{}' is not normalized", m.policy_id)));
            }
        }
    }
    let n = matrices.len();
    let values = par.map_range(n * n, |k| {
        let (i, j) = (k / n, k % n);
        if i == j {
            return 1.0;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let dot: f64 = matrices[a].values.iter().zip(&matrices[b].values).map(|(x, y)| x * y).sum();
        dot.clamp(-1.0, 1.0)
    });
    Ok(SimilarityMatrix { labels: matrices.iter().map(|m| m.policy_id.clone()).collect(), values })
}

/// Mean of the off-diagonal entries `(i, j)` for which `keep(i, j)` holds.
pub fn mean_off_diagonal(m: &SimilarityMatrix, keep: impl Fn(usize, usize) -> bool) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..m.len() {
        for j in 0..m.len() {
            if i != j && keep(i, j) {
                sum += m.get(i, j);
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(m: f64) -> ActionDistribution {
        ActionDistribution::Gaussian { mean: vec![m], std: vec![1.0] }
    }

    #[test]
    fn logits_are_centered_per_state() {
        let m = ActionMatrix::from_outputs("p", &[ActionDistribution::Categorical { logits: vec![3.0, 1.0, 2.0] }]).unwrap();
        assert_eq!(m.values, vec![1.0, -1.0, 0.0]);
        let shifted = ActionMatrix::from_outputs("p", &[ActionDistribution::Categorical { logits: vec![8.0, 6.0, 7.0] }]).unwrap();
        assert_eq!(m.values, shifted.values);
    }

    #[test]
    fn one_dimensional_outputs_gain_the_auxiliary_column() {
        let outs: Vec<_> = (0..64).map(|i| gaussian(i as f64 * 0.01)).collect();
        let m = ActionMatrix::from_outputs("p", &outs).unwrap();
        assert_eq!((m.rows, m.cols), (64, 2));
        assert!(m.values.chunks(2).all(|r| r[1] == 0.1));
    }

    #[test]
    fn sign_flipped_means_match_the_hand_formula() {
        let a: Vec<f64> = (0..64).map(|i| ((i as f64) * 0.37).sin()).collect();
        let p = ActionMatrix::from_outputs("p", &a.iter().map(|v| gaussian(*v)).collect::<Vec<_>>()).unwrap().normalize().unwrap();
        let q = ActionMatrix::from_outputs("q", &a.iter().map(|v| gaussian(-v)).collect::<Vec<_>>()).unwrap().normalize().unwrap();
        let s = similarity_matrix(&[p.clone(), q], Parallelism::Sequential).unwrap();
        let sa: f64 = a.iter().map(|v| v * v).sum();
        let expected = (-sa + 0.01 * 64.0) / (sa + 0.01 * 64.0);
        assert!((s.get(0, 1) - expected).abs() < 1e-12);
        assert_eq!(s.get(0, 0), 1.0);
        assert_eq!(s.get(0, 1), s.get(1, 0));

        let mut neg = p.clone();
        neg.values.iter_mut().for_each(|v| *v = -*v);
        let s = similarity_matrix(&[p, neg], Parallelism::Sequential).unwrap();
        assert!((s.get(0, 1) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn scale_is_absorbed_by_normalization() {
        let outs: Vec<_> = (0..8).map(|i| ActionDistribution::Categorical { logits: vec![i as f64, 1.0] }).collect();
        let scaled: Vec<_> = (0..8).map(|i| ActionDistribution::Categorical { logits: vec![5.0 * i as f64, 5.0] }).collect();
        let a = ActionMatrix::from_outputs("a", &outs).unwrap().normalize().unwrap();
        let b = ActionMatrix::from_outputs("b", &scaled).unwrap().normalize().unwrap();
        let s = similarity_matrix(&[a, b], Parallelism::Sequential).unwrap();
        assert!((s.get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_and_degenerate_inputs_fail() {
        let a = ActionMatrix::from_outputs("a", &[gaussian(1.0)]).unwrap().normalize().unwrap();
        let b = ActionMatrix::from_outputs("b", &[gaussian(1.0), gaussian(2.0)]).unwrap().normalize().unwrap();
        assert!(similarity_matrix(&[a, b], Parallelism::Sequential).is_err());
        let z = ActionMatrix::from_outputs("z", &[ActionDistribution::Categorical { logits: vec![1.0, 1.0] }]).unwrap();
        assert!(z.normalize().is_err());
    }

    #[test]
    fn heatmap_and_csv_are_written() {
        let m = SimilarityMatrix { labels: vec!["a".into(), "b".into()], values: vec![1.0, -0.5, -0.5, 1.0] };
        let dir = tempfile::tempdir().unwrap();
        m.write_heatmap(&dir.path().join("h.png"), 4).unwrap();
        let img = image::open(dir.path().join("h.png")).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (8, 8));
        assert_eq!(img.get_pixel(0, 0), &image::Rgb([255, 0, 0]));
        m.write_csv(&dir.path().join("s.csv")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
        assert_eq!(text.lines().next(), Some(",a,b"));
    }
}
