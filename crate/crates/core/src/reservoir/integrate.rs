use super::{ClampConfig, ReservoirError, ReservoirModel};

/// Fixed-step classical RK4. Returns `steps + 1` states starting with `x0`.
///
/// Positive-orthant models have every stage point and every post-step state
/// clamped into `[epsilon, max_val]`.
pub fn integrate_trajectory(
    model: &ReservoirModel,
    x0: &[f64],
    dt: f64,
    steps: usize,
    clamp: &ClampConfig,
) -> Result<Vec<Vec<f64>>, ReservoirError> {
    model.check_input(x0)?;
    let d = model.dim();
    let project = |v: &mut [f64]| {
        if model.positive_orthant() {
            v.iter_mut().for_each(|c| *c = clamp.clamp(*c));
        }
    };
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    project(&mut x);
    out.push(x.clone());

    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut stage = vec![0.0; d];
    for step in 1..=steps {
        model.eval_into(&x, &mut k1);
        for i in 0..d {
            stage[i] = x[i] + 0.5 * dt * k1[i];
        }
        project(&mut stage);
        model.eval_into(&stage, &mut k2);
        for i in 0..d {
            stage[i] = x[i] + 0.5 * dt * k2[i];
        }
        project(&mut stage);
        model.eval_into(&stage, &mut k3);
        for i in 0..d {
            stage[i] = x[i] + dt * k3[i];
        }
        project(&mut stage);
        model.eval_into(&stage, &mut k4);
        for i in 0..d {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ReservoirError::NonFinite { step });
        }
        project(&mut x);
        out.push(x.clone());
    }
    Ok(out)
}
