use serde::{Deserialize, Serialize};

use super::TrainError;

pub const N_BINS: usize = 50;
pub const SMOOTHING_WINDOW: usize = 5;
pub const DELTA_THRESHOLD: f64 = 0.01;
/// ⌈0.15 · 50⌉ consecutive quiet deltas.
pub const PATIENCE: usize = 8;
pub const RISING_FRACTION: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceStatus {
    Converged,
    StillRising,
    FlatOscillating,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub status: ConvergenceStatus,
    pub convergence_bin: Option<usize>,
    pub convergence_step: Option<u64>,
    /// Smoothed per-bin mean reward.
    pub binned_curve: Vec<f64>,
    pub bin_means: Vec<f64>,
    pub first_step: u64,
    pub bin_width: f64,
}

/// Classifies an episode-reward trace of `(step, reward)` pairs sorted by step.
pub fn detect_convergence(trace: &[(u64, f64)]) -> Result<ConvergenceReport, TrainError> {
    if trace.is_empty() {
        return Err(TrainError::Trace("empty reward trace".into()));
    }
    if trace.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(TrainError::Trace("reward trace is not sorted by step".into()));
    }
    if let Some((s, _)) = trace.iter().find(|(_, r)| !r.is_finite()) {
        return Err(TrainError::Trace(format!("non-finite reward at step {s}")));
    }
    let first = trace[0].0;
    let last = trace[trace.len() - 1].0;
    let width = (last - first) as f64 / N_BINS as f64;

    let mut sums = [0.0; N_BINS];
    let mut counts = [0usize; N_BINS];
    for &(s, r) in trace {
        let b = if width > 0.0 { (((s - first) as f64 / width) as usize).min(N_BINS - 1) } else { 0 };
        sums[b] += r;
        counts[b] += 1;
    }
    let mut bin_means = Vec::with_capacity(N_BINS);
    for b in 0..N_BINS {
        let v = if counts[b] > 0 { sums[b] / counts[b] as f64 } else { bin_means.last().copied().unwrap_or(0.0) };
        bin_means.push(v);
    }
    let curve = moving_average(&bin_means, SMOOTHING_WINDOW);
    let r_max = curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let r_min = curve.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = r_max - r_min;
    let step_at = |b: usize| first + (b as f64 * width).round() as u64;
    let report = |status, bin: Option<usize>| ConvergenceReport {
        status,
        convergence_bin: bin,
        convergence_step: bin.map(step_at),
        binned_curve: curve.clone(),
        bin_means: bin_means.clone(),
        first_step: first,
        bin_width: width,
    };
    if range <= 0.0 {
        return Ok(report(ConvergenceStatus::Converged, Some(0)));
    }
    let deltas: Vec<f64> = curve.windows(2).map(|w| (w[1] - w[0]).abs() / range).collect();
    if let Some(i) = (0..=deltas.len() - PATIENCE).find(|&i| deltas[i..i + PATIENCE].iter().all(|d| *d < DELTA_THRESHOLD)) {
        return Ok(report(ConvergenceStatus::Converged, Some(i)));
    }
    let q3 = mean(&curve[N_BINS / 2..3 * N_BINS / 4]);
    let q4 = mean(&curve[3 * N_BINS / 4..]);
    if q4 - q3 > RISING_FRACTION * range {
        Ok(report(ConvergenceStatus::StillRising, None))
    } else {
        Ok(report(ConvergenceStatus::FlatOscillating, None))
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Centered moving average; windows are truncated at the ends.
fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(xs.len());
            mean(&xs[lo..hi])
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    Up,
    Nearest,
}

/// Turns a calibration report into a training budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetRule {
    pub margin: f64,
    pub granularity: u64,
    pub floor: u64,
    pub rounding: Rounding,
    /// Multiplier on the calibration budget when the trace is still rising.
    pub rising_extension: f64,
}

impl Default for BudgetRule {
    fn default() -> Self {
        BudgetRule { margin: 1.25, granularity: 50_000, floor: 200_000, rounding: Rounding::Nearest, rising_extension: 1.25 }
    }
}

impl BudgetRule {
    pub fn apply(&self, report: &ConvergenceReport, calibration_budget: u64) -> u64 {
        match (report.status, report.convergence_step) {
            (ConvergenceStatus::Converged, Some(step)) => self.from_convergence_step(step),
            (ConvergenceStatus::StillRising, _) => (calibration_budget as f64 * self.rising_extension).round() as u64,
            _ => calibration_budget,
        }
    }

    pub fn from_convergence_step(&self, step: u64) -> u64 {
        let scaled = step as f64 * self.margin / self.granularity as f64;
        let units = match self.rounding {
            Rounding::Up => (scaled - 1e-9).ceil(),
            Rounding::Nearest => (scaled + 1e-9).round(),
        };
        ((units.max(0.0) as u64) * self.granularity).max(self.floor)
    }
}

pub fn assign_budget(report: &ConvergenceReport, calibration_budget: u64) -> u64 {
    BudgetRule::default().apply(report, calibration_budget)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(f: impl Fn(f64) -> f64, n: usize) -> Vec<(u64, f64)> {
        (0..n).map(|i| (i as u64 * 100, f(i as f64 / (n - 1) as f64))).collect()
    }

    #[test]
    fn constant_trace_converges_at_zero() {
        let r = detect_convergence(&trace(|_| 3.0, 500)).unwrap();
        assert_eq!(r.status, ConvergenceStatus::Converged);
        assert_eq!(r.convergence_bin, Some(0));
        assert_eq!(r.convergence_step, Some(0));
    }

    #[test]
    fn linear_trace_is_still_rising() {
        let r = detect_convergence(&trace(|x| x, 5000)).unwrap();
        assert_eq!(r.status, ConvergenceStatus::StillRising);
        assert_eq!(r.convergence_step, None);
    }

    #[test]
    fn noisy_plateau_is_flat() {
        let t: Vec<(u64, f64)> = (0..5000u64).map(|i| (i, ((i / 100) % 2) as f64 - i as f64 * 1e-5)).collect();
        let r = detect_convergence(&t).unwrap();
        assert_eq!(r.status, ConvergenceStatus::FlatOscillating);
    }

    #[test]
    fn invalid_traces_are_rejected() {
        assert!(detect_convergence(&[]).is_err());
        assert!(detect_convergence(&[(5, 1.0), (3, 1.0)]).is_err());
    }

    #[test]
    fn budget_examples() {
        let rule = BudgetRule::default();
        assert_eq!(rule.from_convergence_step(502_000), 650_000);
        assert_eq!(rule.from_convergence_step(107_000), 200_000);
        assert_eq!(rule.from_convergence_step(100_000), 200_000);
        let up = BudgetRule { rounding: Rounding::Up, ..rule };
        assert_eq!(up.from_convergence_step(491_000), 650_000);
        assert_eq!(up.from_convergence_step(480_000), 600_000);
    }

    #[test]
    fn non_converged_budgets() {
        let mut r = detect_convergence(&trace(|x| x, 5000)).unwrap();
        assert_eq!(assign_budget(&r, 400_000), 500_000);
        r.status = ConvergenceStatus::FlatOscillating;
        assert_eq!(assign_budget(&r, 400_000), 400_000);
    }
}
