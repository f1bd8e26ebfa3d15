//! Declarative right-hand sides built from kinetic primitives.
//!
//! Every equation `dx_i/dt` is a sum of [`Term`]s. The same representation
//! backs the built-in gene-circuit models and externally sourced model files,
//! so all of them get exact analytic derivatives.

use serde::{Deserialize, Serialize};

use super::model::{Category, JacobianMode, PropertyTag};
use super::ReservoirError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    /// Constant production `value`.
    Constant { value: f64 },
    /// `coef * x[var]`.
    Linear { coef: f64, var: usize },
    /// `-rate * x[var]`.
    Decay { rate: f64, var: usize },
    /// `vmax * x^n / (k^n + x^n)`.
    HillActivation { vmax: f64, k: f64, n: f64, var: usize },
    /// `vmax * k^n / (k^n + x^n)`.
    HillRepression { vmax: f64, k: f64, n: f64, var: usize },
    /// `vmax * m * s / (km + s)` with substrate `s = x[var]`, or
    /// `s = max(total - x[var], 0)` when `total` is set, and `m = x[modifier]`
    /// (1 when absent).
    MichaelisMenten {
        vmax: f64,
        km: f64,
        var: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modifier: Option<usize>,
    },
    /// `k * prod(x[v] for v in vars)`.
    MassAction { k: f64, vars: Vec<usize> },
}

impl Term {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Term::Constant { value } => value,
            Term::Linear { coef, var } => coef * x[var],
            Term::Decay { rate, var } => -rate * x[var],
            Term::HillActivation { vmax, k, n, var } => {
                let xn = x[var].powf(n);
                vmax * xn / (k.powf(n) + xn)
            }
            Term::HillRepression { vmax, k, n, var } => {
                let kn = k.powf(n);
                vmax * kn / (kn + x[var].powf(n))
            }
            Term::MichaelisMenten { vmax, km, var, total, modifier } => {
                let s = substrate(x[var], total);
                let m = modifier.map_or(1.0, |j| x[j]);
                vmax * m * s / (km + s)
            }
            Term::MassAction { k, ref vars } => vars.iter().fold(k, |acc, &v| acc * x[v]),
        }
    }

    /// Calls `emit(j, d term / d x[j])` for every variable the term reads.
    pub fn partials(&self, x: &[f64], mut emit: impl FnMut(usize, f64)) {
        match *self {
            Term::Constant { .. } => {}
            Term::Linear { coef, var } => emit(var, coef),
            Term::Decay { rate, var } => emit(var, -rate),
            Term::HillActivation { vmax, k, n, var } => emit(var, hill_slope(vmax, k, n, x[var])),
            Term::HillRepression { vmax, k, n, var } => emit(var, -hill_slope(vmax, k, n, x[var])),
            Term::MichaelisMenten { vmax, km, var, total, modifier } => {
                let s = substrate(x[var], total);
                let m = modifier.map_or(1.0, |j| x[j]);
                let ds_dx = match total {
                    None => 1.0,
                    Some(t) if t - x[var] > 0.0 => -1.0,
                    Some(_) => 0.0,
                };
                emit(var, vmax * m * km / ((km + s) * (km + s)) * ds_dx);
                if let Some(j) = modifier {
                    emit(j, vmax * s / (km + s));
                }
            }
            Term::MassAction { k, ref vars } => {
                for (i, &v) in vars.iter().enumerate() {
                    let others = vars.iter().enumerate().filter(|&(o, _)| o != i).fold(k, |acc, (_, &w)| acc * x[w]);
                    emit(v, others);
                }
            }
        }
    }

    fn push_params(&self, out: &mut Vec<f64>) {
        match *self {
            Term::Constant { value } => out.push(value),
            Term::Linear { coef, .. } => out.push(coef),
            Term::Decay { rate, .. } => out.push(rate),
            Term::HillActivation { vmax, k, n, .. } | Term::HillRepression { vmax, k, n, .. } => out.extend([vmax, k, n]),
            Term::MichaelisMenten { vmax, km, total, .. } => {
                out.extend([vmax, km]);
                out.extend(total);
            }
            Term::MassAction { k, .. } => out.push(k),
        }
    }

    fn vars(&self) -> Vec<usize> {
        match self {
            Term::Constant { .. } => vec![],
            Term::Linear { var, .. } | Term::Decay { var, .. } | Term::HillActivation { var, .. } | Term::HillRepression { var, .. } => {
                vec![*var]
            }
            Term::MichaelisMenten { var, modifier, .. } => {
                let mut v = vec![*var];
                v.extend(modifier);
                v
            }
            Term::MassAction { vars, .. } => vars.clone(),
        }
    }

    fn needs_positive_orthant(&self) -> bool {
        matches!(self, Term::HillActivation { .. } | Term::HillRepression { .. } | Term::MichaelisMenten { .. })
    }

    fn check_constants(&self) -> Result<(), String> {
        let mut ps = Vec::new();
        self.push_params(&mut ps);
        if ps.iter().any(|p| !p.is_finite()) {
            return Err(format!("non-finite constant in {self:?}"));
        }
        match *self {
            Term::HillActivation { k, n, .. } | Term::HillRepression { k, n, .. } if k <= 0.0 || n <= 0.0 => {
                Err(format!("Hill term needs k > 0 and n > 0: {self:?}"))
            }
            Term::MichaelisMenten { km, .. } if km <= 0.0 => Err(format!("Michaelis-Menten term needs km > 0: {self:?}")),
            _ => Ok(()),
        }
    }
}

#[inline]
fn substrate(x: f64, total: Option<f64>) -> f64 {
    match total {
        None => x,
        Some(t) => (t - x).max(0.0),
    }
}

#[inline]
fn hill_slope(vmax: f64, k: f64, n: f64, x: f64) -> f64 {
    let kn = k.powf(n);
    let xn = x.powf(n);
    let denom = kn + xn;
    vmax * n * kn * x.powf(n - 1.0) / (denom * denom)
}

/// A system of summed-term equations, one per state variable.
#[derive(Clone, Debug, PartialEq)]
pub struct TermSystem {
    equations: Vec<Vec<Term>>,
}

impl TermSystem {
    pub fn new(equations: Vec<Vec<Term>>) -> Self {
        TermSystem { equations }
    }

    pub fn equations(&self) -> &[Vec<Term>] {
        &self.equations
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, eq) in out.iter_mut().zip(&self.equations) {
            *o = eq.iter().map(|t| t.value(x)).sum();
        }
    }

    /// `out = J(x)^T upstream`.
    pub fn vjp_into(&self, x: &[f64], upstream: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (g, eq) in upstream.iter().zip(&self.equations) {
            if *g == 0.0 {
                continue;
            }
            for t in eq {
                t.partials(x, |j, d| out[j] += g * d);
            }
        }
    }

    /// Row-major `dim x dim` Jacobian.
    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.equations.len();
        let mut jac = vec![0.0; d * d];
        for (i, eq) in self.equations.iter().enumerate() {
            for t in eq {
                t.partials(x, |j, v| jac[i * d + j] += v);
            }
        }
        jac
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for t in self.equations.iter().flatten() {
            t.push_params(&mut out);
        }
        out
    }

    pub(crate) fn validate(&self, dim: usize, positive_orthant: bool) -> Result<(), String> {
        if self.equations.len() != dim {
            return Err(format!("{} equations for dim {dim}", self.equations.len()));
        }
        for (i, t) in self.equations.iter().flatten().enumerate() {
            t.check_constants()?;
            if let Some(v) = t.vars().into_iter().find(|&v| v >= dim) {
                return Err(format!("term {i} reads variable {v} but dim is {dim}"));
            }
            if t.needs_positive_orthant() && !positive_orthant {
                return Err(format!("term {i} ({t:?}) is only defined on the positive orthant"));
            }
        }
        Ok(())
    }
}

/// On-disk model definition (TOML).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub id: String,
    pub dim: usize,
    pub positive_orthant: bool,
    pub category: Category,
    pub properties: Vec<PropertyTag>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub state_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_state: Option<Vec<f64>>,
    #[serde(default)]
    pub jacobian: JacobianMode,
    pub equations: Vec<Equation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub terms: Vec<Term>,
}

impl ModelFile {
    pub fn from_toml(text: &str) -> Result<Self, ReservoirError> {
        toml::from_str(text).map_err(|e| ReservoirError::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, ReservoirError> {
        toml::to_string(self).map_err(|e| ReservoirError::Format(e.to_string()))
    }

    pub fn system(&self) -> TermSystem {
        TermSystem::new(self.equations.iter().map(|e| e.terms.clone()).collect())
    }
}
