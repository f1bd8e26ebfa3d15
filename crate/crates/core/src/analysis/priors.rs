use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{bh_fdr, fisher_exact, median, sign_test_p, wilson_interval, zscores, Table2x2};
use super::AnalysisError;
use crate::policy::Checkpoint;
use crate::reservoir::{PropertyTag, Registry};
use crate::Parallelism;

/// GRN count of the canonical property analysis.
pub const CANONICAL_GRNS: usize = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub reservoir_id: String,
    pub env_name: String,
    pub seed: u64,
    pub final_reward: f64,
}

/// Final rewards of individual training runs, unique per
/// `(reservoir, env, seed)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RewardTable {
    entries: Vec<RewardEntry>,
}

impl RewardTable {
    pub fn new(mut entries: Vec<RewardEntry>) -> Result<Self, AnalysisError> {
        entries.sort_by(|a, b| (&a.reservoir_id, &a.env_name, a.seed).cmp(&(&b.reservoir_id, &b.env_name, b.seed)));
        for w in entries.windows(2) {
            if (&w[0].reservoir_id, &w[0].env_name, w[0].seed) == (&w[1].reservoir_id, &w[1].env_name, w[1].seed) {
                return Err(AnalysisError::Invalid(format!(
                    "duplicate reward entry ({}, {}, {})",
                    w[0].reservoir_id, w[0].env_name, w[0].seed
                )));
            }
        }
        if let Some(e) = entries.iter().find(|e| !e.final_reward.is_finite()) {
            return Err(AnalysisError::Invalid(format!("non-finite reward for ({}, {}, {})", e.reservoir_id, e.env_name, e.seed)));
        }
        Ok(RewardTable { entries })
    }

    pub fn entries(&self) -> &[RewardEntry] {
        &self.entries
    }

    pub fn read_csv(path: &Path) -> Result<Self, AnalysisError> {
        let mut r = csv::Reader::from_path(path)?;
        let entries = r.deserialize().collect::<Result<Vec<RewardEntry>, _>>()?;
        RewardTable::new(entries)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Collects the final checkpoint of every run under
    /// `<runs>/<reservoir>/<env>/seed_<k>/`. Runs without a final reward are
    /// skipped.
    pub fn from_runs(runs: &Path) -> Result<Self, AnalysisError> {
        let mut entries = Vec::new();
        for path in find_checkpoints(runs)? {
            let c = Checkpoint::load(&path)?;
            if let Some(final_reward) = c.final_reward {
                entries.push(RewardEntry { reservoir_id: c.reservoir_id, env_name: c.env_name, seed: c.seed, final_reward });
            }
        }
        RewardTable::new(entries)
    }

    pub fn envs(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.env_name.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Seed-averaged reward per `(env, reservoir)`.
    pub fn seed_means(&self) -> BTreeMap<(String, String), f64> {
        let mut acc: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
        for e in &self.entries {
            let slot = acc.entry((e.env_name.clone(), e.reservoir_id.clone())).or_default();
            slot.0 += e.final_reward;
            slot.1 += 1;
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    /// Seed-averaged rewards of `grns` in `env`, skipping GRNs with no runs.
    fn env_means<'a>(
        &self,
        means: &BTreeMap<(String, String), f64>,
        env: &str,
        grns: impl Iterator<Item = &'a String>,
    ) -> Vec<(String, f64)> {
        grns.filter_map(|g| means.get(&(env.to_string(), g.clone())).map(|v| (g.clone(), *v))).collect()
    }
}

/// Paths of every `checkpoint.json` under a run tree, sorted.
pub fn find_checkpoints(runs: &Path) -> Result<Vec<std::path::PathBuf>, AnalysisError> {
    let mut out = Vec::new();
    let mut stack = vec![runs.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir).map_err(|e| AnalysisError::Io(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry.map_err(|e| AnalysisError::Io(e.to_string()))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == crate::trainer::CHECKPOINT_FILE) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Which GRNs carry which property.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Taxonomy {
    pub grns: BTreeSet<String>,
    pub properties: BTreeMap<PropertyTag, BTreeSet<String>>,
}

#[derive(Serialize, Deserialize)]
struct TaxonomyFile {
    grns: Vec<String>,
    #[serde(default)]
    properties: BTreeMap<String, Vec<String>>,
}

impl Taxonomy {
    /// Every positive-orthant (gene-circuit) model of `registry` with its tags.
    pub fn from_registry(registry: &Registry) -> Self {
        let mut t = Taxonomy::default();
        for m in registry.models().filter(|m| m.positive_orthant()) {
            t.grns.insert(m.id().to_string());
            for p in m.properties() {
                t.properties.entry(*p).or_default().insert(m.id().to_string());
            }
        }
        t
    }

    pub fn members(&self, p: PropertyTag) -> BTreeSet<String> {
        self.properties.get(&p).cloned().unwrap_or_default()
    }

    pub fn from_toml(text: &str) -> Result<Self, AnalysisError> {
        let file: TaxonomyFile = toml::from_str(text).map_err(|e| AnalysisError::Invalid(e.to_string()))?;
        let grns: BTreeSet<String> = file.grns.into_iter().collect();
        let mut properties = BTreeMap::new();
        for (name, ids) in file.properties {
            let tag = PropertyTag::parse(&name).ok_or_else(|| AnalysisError::Invalid(format!("unknown property '{name}'")))?;
            let set: BTreeSet<String> = ids.into_iter().collect();
            if let Some(stray) = set.iter().find(|id| !grns.contains(*id)) {
                return Err(AnalysisError::Invalid(format!("property '{name}' lists '{stray}', which is not in grns")));
            }
            properties.insert(tag, set);
        }
        Ok(Taxonomy { grns, properties })
    }

    pub fn to_toml(&self) -> String {
        let file = TaxonomyFile {
            grns: self.grns.iter().cloned().collect(),
            properties: self.properties.iter().map(|(p, ids)| (p.as_str().to_string(), ids.iter().cloned().collect())).collect(),
        };
        toml::to_string(&file).expect("taxonomy serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignTestResult {
    pub property: PropertyTag,
    /// Environments where GRNs with the property have the higher median.
    pub k: u64,
    /// Environments with a non-zero median difference.
    pub n: u64,
    pub p: f64,
    pub q: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignTestReport {
    pub results: Vec<SignTestResult>,
    /// Properties that could not be tested, with the reason.
    pub skipped: Vec<(PropertyTag, String)>,
}

/// Per-property sign test over environments of
/// `median(with) − median(without)` on seed-averaged GRN rewards.
pub fn sign_test(table: &RewardTable, taxonomy: &Taxonomy) -> Result<SignTestReport, AnalysisError> {
    let means = table.seed_means();
    let envs = table.envs();
    let mut report = SignTestReport::default();
    let mut tested = Vec::new();
    for p in PropertyTag::ALL {
        let with = taxonomy.members(p);
        let without: BTreeSet<String> = taxonomy.grns.difference(&with).cloned().collect();
        if with.is_empty() || without.is_empty() {
            report.skipped.push((p, "one side of the split is empty".into()));
            continue;
        }
        let (mut k, mut n) = (0u64, 0u64);
        for env in &envs {
            let a: Vec<f64> = table.env_means(&means, env, with.iter()).into_iter().map(|(_, v)| v).collect();
            let b: Vec<f64> = table.env_means(&means, env, without.iter()).into_iter().map(|(_, v)| v).collect();
            let (Some(ma), Some(mb)) = (median(&a), median(&b)) else { continue };
            let diff = ma - mb;
            if diff != 0.0 {
                n += 1;
                k += (diff > 0.0) as u64;
            }
        }
        if n == 0 {
            report.skipped.push((p, "no environment separates the two sides".into()));
            continue;
        }
        tested.push((p, k, n, sign_test_p(k, n)?));
    }
    let q = bh_fdr(&tested.iter().map(|t| t.3).collect::<Vec<_>>())?;
    for ((property, k, n, p), q) in tested.into_iter().zip(q) {
        let (wilson_low, wilson_high) = wilson_interval(k, n, 1.96).unwrap_or((0.0, 1.0));
        report.results.push(SignTestResult { property, k, n, p, q, wilson_low, wilson_high });
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContingencyResult {
    pub property: PropertyTag,
    pub env_name: String,
    pub table: Table2x2,
    pub p: f64,
    pub log_or: f64,
    pub q: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    pub cells: Vec<ContingencyResult>,
    /// False when the GRN count differs from the canonical fourteen.
    pub canonical: bool,
}

/// Per `(property, env)` Fisher test of property membership against a
/// top-half / bottom-half reward split, BH-adjusted across all cells.
pub fn fisher_cells(
    table: &RewardTable,
    taxonomy: &Taxonomy,
    allow_non_canonical: bool,
    par: Parallelism,
) -> Result<FisherReport, AnalysisError> {
    let means = table.seed_means();
    let envs = table.envs();
    let mut canonical = true;
    let mut splits = Vec::new();
    for env in &envs {
        let mut ranked = table.env_means(&means, env, taxonomy.grns.iter());
        if ranked.is_empty() {
            continue;
        }
        let g = ranked.len();
        if g != CANONICAL_GRNS {
            if !allow_non_canonical {
                return Err(AnalysisError::Invalid(format!(
                    "{env} has {g} GRNs with rewards; the canonical analysis needs {CANONICAL_GRNS}"
                )));
            }
            canonical = false;
        }
        if g < 2 {
            return Err(AnalysisError::Invalid(format!("{env} needs at least two GRNs")));
        }
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let good: BTreeSet<String> = ranked[..g / 2].iter().map(|(id, _)| id.clone()).collect();
        let present: BTreeSet<String> = ranked.into_iter().map(|(id, _)| id).collect();
        splits.push((env.clone(), good, present));
    }
    let jobs: Vec<(PropertyTag, usize)> = PropertyTag::ALL.iter().flat_map(|p| (0..splits.len()).map(move |e| (*p, e))).collect();
    let cells = par.map(&jobs, |&(property, e)| -> Result<Option<ContingencyResult>, AnalysisError> {
        let (env, good, present) = &splits[e];
        let members = taxonomy.members(property);
        let with: BTreeSet<&String> = present.iter().filter(|id| members.contains(*id)).collect();
        if with.is_empty() || with.len() == present.len() {
            return Ok(None);
        }
        let count = |in_prop: bool, in_good: bool| {
            present.iter().filter(|id| with.contains(id) == in_prop && good.contains(*id) == in_good).count() as u64
        };
        let t = Table2x2::new(count(true, true), count(true, false), count(false, true), count(false, false));
        Ok(Some(ContingencyResult {
            property,
            env_name: env.clone(),
            table: t,
            p: fisher_exact(&t)?,
            log_or: t.haldane_log_odds_ratio(),
            q: 1.0,
        }))
    });
    let mut out: Vec<ContingencyResult> = Vec::new();
    for c in cells {
        if let Some(c) = c? {
            out.push(c);
        }
    }
    let q = bh_fdr(&out.iter().map(|c| c.p).collect::<Vec<_>>())?;
    for (c, q) in out.iter_mut().zip(q) {
        c.q = q;
    }
    Ok(FisherReport { cells: out, canonical })
}

/// `properties × envs` effect sizes in z-score units; `None` where the
/// environment has no reward spread or a side of the split is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectMatrix {
    pub properties: Vec<PropertyTag>,
    pub envs: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn effect_zscores(table: &RewardTable, taxonomy: &Taxonomy) -> Result<EffectMatrix, AnalysisError> {
    let means = table.seed_means();
    let envs = table.envs();
    let mut z_by_env = Vec::new();
    for env in &envs {
        let ranked = table.env_means(&means, env, taxonomy.grns.iter());
        let values: Vec<f64> = ranked.iter().map(|(_, v)| *v).collect();
        let z = zscores(&values).map(|z| ranked.iter().map(|(id, _)| id.clone()).zip(z).collect::<BTreeMap<_, _>>());
        z_by_env.push(z);
    }
    let mut values = Vec::new();
    for p in PropertyTag::ALL {
        let with = taxonomy.members(p);
        let row = z_by_env
            .iter()
            .map(|z| {
                let z = z.as_ref()?;
                let a: Vec<f64> = z.iter().filter(|(id, _)| with.contains(*id)).map(|(_, v)| *v).collect();
                let b: Vec<f64> = z.iter().filter(|(id, _)| !with.contains(*id)).map(|(_, v)| *v).collect();
                Some(median(&a)? - median(&b)?)
            })
            .collect();
        values.push(row);
    }
    Ok(EffectMatrix { properties: PropertyTag::ALL.to_vec(), envs, values })
}

impl SignTestReport {
    pub fn write_csv(&self, path: &Path) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["property", "k", "n", "p", "q", "wilson_low", "wilson_high"])?;
        for r in &self.results {
            w.write_record([
                r.property.as_str().to_string(),
                r.k.to_string(),
                r.n.to_string(),
                r.p.to_string(),
                r.q.to_string(),
                r.wilson_low.to_string(),
                r.wilson_high.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl FisherReport {
    pub fn write_csv(&self, path: &Path) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["property", "env_name", "n11", "n10", "n01", "n00", "p", "log_or", "q", "canonical"])?;
        for c in &self.cells {
            w.write_record([
                c.property.as_str().to_string(),
                c.env_name.clone(),
                c.table.n11.to_string(),
                c.table.n10.to_string(),
                c.table.n01.to_string(),
                c.table.n00.to_string(),
                c.p.to_string(),
                c.log_or.to_string(),
                c.q.to_string(),
                self.canonical.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl EffectMatrix {
    pub fn write_csv(&self, path: &Path) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["property".to_string()];
        header.extend(self.envs.iter().cloned());
        w.write_record(&header)?;
        for (p, row) in self.properties.iter().zip(&self.values) {
            let mut rec = vec![p.as_str().to_string()];
            rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
