use std::collections::BTreeSet;
use std::hash::{DefaultHasher, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::terms::{Equation, ModelFile, TermSystem};
use super::ReservoirError;

/// The thirteen binary reservoir properties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyTag {
    Oscillatory,
    Bistable,
    NegativeFeedback,
    Ultrasensitivity,
    NonOscillatory,
    Circadian,
    CellCycle,
    CellFate,
    SignalTransduction,
    Transcriptional,
    Phosphorylation,
    ComplexFormation,
    Conservation,
}

impl PropertyTag {
    pub const ALL: [PropertyTag; 13] = [
        PropertyTag::Oscillatory,
        PropertyTag::Bistable,
        PropertyTag::NegativeFeedback,
        PropertyTag::Ultrasensitivity,
        PropertyTag::NonOscillatory,
        PropertyTag::Circadian,
        PropertyTag::CellCycle,
        PropertyTag::CellFate,
        PropertyTag::SignalTransduction,
        PropertyTag::Transcriptional,
        PropertyTag::Phosphorylation,
        PropertyTag::ComplexFormation,
        PropertyTag::Conservation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PropertyTag::Oscillatory => "oscillatory",
            PropertyTag::Bistable => "bistable",
            PropertyTag::NegativeFeedback => "negative_feedback",
            PropertyTag::Ultrasensitivity => "ultrasensitivity",
            PropertyTag::NonOscillatory => "non_oscillatory",
            PropertyTag::Circadian => "circadian",
            PropertyTag::CellCycle => "cell_cycle",
            PropertyTag::CellFate => "cell_fate",
            PropertyTag::SignalTransduction => "signal_transduction",
            PropertyTag::Transcriptional => "transcriptional",
            PropertyTag::Phosphorylation => "phosphorylation",
            PropertyTag::ComplexFormation => "complex_formation",
            PropertyTag::Conservation => "conservation",
        }
    }

    pub fn parse(s: &str) -> Option<PropertyTag> {
        PropertyTag::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

impl std::fmt::Display for PropertyTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Baseline,
    Circadian,
    CellCycle,
    CellFate,
    SignalTransduction,
    P53,
    Synthetic,
}

/// How the vector-Jacobian product through `f` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    #[default]
    Analytic,
    /// Central differences with step [`ReservoirModel::FD_STEP`].
    FiniteDifference,
}

/// Two affine layers with a tanh in between, randomly drawn once and frozen.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenMlp {
    dim: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl FrozenMlp {
    /// Uniform `(-1/sqrt(d), 1/sqrt(d))` init for weights and biases.
    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (dim as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..bound)).collect() };
        let w1 = draw(dim * dim);
        let b1 = draw(dim);
        let w2 = draw(dim * dim);
        let b2 = draw(dim);
        FrozenMlp { dim, w1, b1, w2, b2 }
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| {
                let row = &self.w1[i * d..(i + 1) * d];
                (self.b1[i] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).tanh()
            })
            .collect()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let h = self.hidden(x);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.w2[i * d..(i + 1) * d];
            *o = self.b2[i] + row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    fn vjp_into(&self, x: &[f64], upstream: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let h = self.hidden(x);
        // g_h = W2^T upstream, scaled by tanh'
        let mut gh = vec![0.0; d];
        for (i, g) in upstream.iter().enumerate() {
            let row = &self.w2[i * d..(i + 1) * d];
            for (acc, w) in gh.iter_mut().zip(row) {
                *acc += g * w;
            }
        }
        for (g, hv) in gh.iter_mut().zip(&h) {
            *g *= 1.0 - hv * hv;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, g) in gh.iter().enumerate() {
            let row = &self.w1[i * d..(i + 1) * d];
            for (o, w) in out.iter_mut().zip(row) {
                *o += g * w;
            }
        }
    }

    fn params(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dynamics {
    /// `f(x) = x`.
    Identity,
    Mlp(FrozenMlp),
    Terms(TermSystem),
}

/// A frozen ODE right-hand side with its metadata.
///
/// There are no mutating methods: once built, parameters stay bitwise fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirModel {
    id: String,
    dim: usize,
    positive_orthant: bool,
    category: Category,
    properties: BTreeSet<PropertyTag>,
    dynamics: Dynamics,
    nominal_state: Vec<f64>,
    state_names: Vec<String>,
    jacobian: JacobianMode,
}

impl ReservoirModel {
    pub const FD_STEP: f64 = 1e-5;

    pub fn identity(dim: usize) -> Self {
        ReservoirModel::control("identity", dim, Dynamics::Identity)
    }

    pub fn mlp(dim: usize, seed: u64) -> Self {
        ReservoirModel::control("mlp", dim, Dynamics::Mlp(FrozenMlp::random(dim, seed)))
    }

    fn control(id: &str, dim: usize, dynamics: Dynamics) -> Self {
        ReservoirModel {
            id: id.to_string(),
            dim,
            positive_orthant: false,
            category: Category::Baseline,
            properties: BTreeSet::new(),
            dynamics,
            nominal_state: vec![0.0; dim],
            state_names: Vec::new(),
            jacobian: JacobianMode::Analytic,
        }
    }

    pub fn from_model_file(file: &ModelFile) -> Result<Self, ReservoirError> {
        if file.dim == 0 {
            return Err(ReservoirError::InvalidModel(format!("{}: dim must be positive", file.id)));
        }
        let system = file.system();
        system.validate(file.dim, file.positive_orthant).map_err(|e| ReservoirError::InvalidModel(format!("{}: {e}", file.id)))?;
        let nominal_state = match &file.nominal_state {
            Some(v) if v.len() != file.dim => {
                return Err(ReservoirError::InvalidModel(format!("{}: nominal_state has wrong length", file.id)))
            }
            Some(v) => v.clone(),
            None if file.positive_orthant => vec![1.0; file.dim],
            None => vec![0.0; file.dim],
        };
        Ok(ReservoirModel {
            id: file.id.clone(),
            dim: file.dim,
            positive_orthant: file.positive_orthant,
            category: file.category,
            properties: file.properties.iter().copied().collect(),
            dynamics: Dynamics::Terms(system),
            nominal_state,
            state_names: file.state_names.clone(),
            jacobian: file.jacobian,
        })
    }

    /// Parses a TOML model definition.
    pub fn from_toml(text: &str) -> Result<Self, ReservoirError> {
        ReservoirModel::from_model_file(&ModelFile::from_toml(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ReservoirError> {
        let text = std::fs::read_to_string(path).map_err(|e| ReservoirError::Io(format!("{}: {e}", path.display())))?;
        ReservoirModel::from_toml(&text)
    }

    /// The declarative form, for term-based models only.
    pub fn to_model_file(&self) -> Option<ModelFile> {
        let Dynamics::Terms(sys) = &self.dynamics else { return None };
        Some(ModelFile {
            id: self.id.clone(),
            dim: self.dim,
            positive_orthant: self.positive_orthant,
            category: self.category,
            properties: self.properties.iter().copied().collect(),
            state_names: self.state_names.clone(),
            nominal_state: Some(self.nominal_state.clone()),
            jacobian: self.jacobian,
            equations: sys.equations().iter().map(|t| Equation { name: None, terms: t.clone() }).collect(),
        })
    }

    pub fn with_jacobian_mode(mut self, mode: JacobianMode) -> Self {
        self.jacobian = mode;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positive_orthant(&self) -> bool {
        self.positive_orthant
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn properties(&self) -> &BTreeSet<PropertyTag> {
        &self.properties
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn nominal_state(&self) -> &[f64] {
        &self.nominal_state
    }

    pub fn jacobian_mode(&self) -> JacobianMode {
        self.jacobian
    }

    pub fn params(&self) -> Vec<f64> {
        match &self.dynamics {
            Dynamics::Identity => Vec::new(),
            Dynamics::Mlp(m) => m.params(),
            Dynamics::Terms(t) => t.params(),
        }
    }

    /// Little-endian bytes of every frozen parameter.
    pub fn param_bytes(&self) -> Vec<u8> {
        self.params().iter().flat_map(|p| p.to_le_bytes()).collect()
    }

    pub fn checksum(&self) -> u64 {
        let mut h = DefaultHasher::new();
        h.write(self.id.as_bytes());
        h.write(&self.param_bytes());
        h.finish()
    }

    pub fn check_input(&self, x: &[f64]) -> Result<(), ReservoirError> {
        if x.len() != self.dim {
            return Err(ReservoirError::DimensionMismatch { model: self.id.clone(), expected: self.dim, got: x.len() });
        }
        if self.positive_orthant {
            if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| v.is_nan() || **v <= 0.0) {
                return Err(ReservoirError::DomainViolation { model: self.id.clone(), index, value });
            }
        }
        Ok(())
    }

    /// `f(x) = dx/dt`.
    pub fn eval_gradient(&self, x: &[f64]) -> Result<Vec<f64>, ReservoirError> {
        self.check_input(x)?;
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation for hot loops; callers guarantee the domain.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.dynamics {
            Dynamics::Identity => out.copy_from_slice(x),
            Dynamics::Mlp(m) => m.eval_into(x, out),
            Dynamics::Terms(t) => t.eval_into(x, out),
        }
    }

    /// `out = J_f(x)^T upstream`.
    pub fn vjp_into(&self, x: &[f64], upstream: &[f64], out: &mut [f64]) {
        if self.jacobian == JacobianMode::FiniteDifference {
            let jac = self.fd_jacobian(x);
            let d = self.dim;
            for (j, o) in out.iter_mut().enumerate() {
                *o = (0..d).map(|i| jac[i * d + j] * upstream[i]).sum();
            }
            return;
        }
        match &self.dynamics {
            Dynamics::Identity => out.copy_from_slice(upstream),
            Dynamics::Mlp(m) => m.vjp_into(x, upstream, out),
            Dynamics::Terms(t) => t.vjp_into(x, upstream, out),
        }
    }

    /// Row-major Jacobian at `x` using the configured mode.
    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        match (self.jacobian, &self.dynamics) {
            (JacobianMode::Analytic, Dynamics::Terms(t)) => t.jacobian(x),
            (JacobianMode::Analytic, _) => {
                let d = self.dim;
                let mut jac = vec![0.0; d * d];
                let mut e = vec![0.0; d];
                let mut col = vec![0.0; d];
                // rows of J = J^T e_i
                for i in 0..d {
                    e.iter_mut().for_each(|v| *v = 0.0);
                    e[i] = 1.0;
                    self.vjp_into(x, &e, &mut col);
                    jac[i * d..(i + 1) * d].copy_from_slice(&col);
                }
                jac
            }
            (JacobianMode::FiniteDifference, _) => self.fd_jacobian(x),
        }
    }

    /// Central differences, falling back to forward differences where the
    /// backward probe would leave the positive orthant.
    pub fn fd_jacobian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let h = Self::FD_STEP;
        let mut jac = vec![0.0; d * d];
        let mut fp = vec![0.0; d];
        let mut fm = vec![0.0; d];
        let mut probe = x.to_vec();
        for j in 0..d {
            let central = !self.positive_orthant || x[j] - h > 0.0;
            probe[j] = x[j] + h;
            self.eval_into(&probe, &mut fp);
            probe[j] = if central { x[j] - h } else { x[j] };
            self.eval_into(&probe, &mut fm);
            probe[j] = x[j];
            let width = if central { 2.0 * h } else { h };
            for i in 0..d {
                jac[i * d + j] = (fp[i] - fm[i]) / width;
            }
        }
        jac
    }
}
