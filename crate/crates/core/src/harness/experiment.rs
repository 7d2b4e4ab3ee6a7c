use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generators::{
    bandit, bandit_class, block_mdp, chain, closed_class_instance, random_tabular, ClosedClassSpec,
};
use super::scaling::fit_points;
use super::write_atomic;
use crate::agents::{
    golf_beta, make_offline_dataset, run_golf, run_hybridq, Behavior, FunctionClass, GolfConfig, HybridConfig,
};
use crate::coverage::DataDistribution;
use crate::lsvi::{make_random_linear_mdp, run_lsvi, FeatureStructure, LambdaMode, LsviConfig};
use crate::mdp::{load_mdp, optimal_values, Environment, LinearMdp, TabularMdp};
use crate::rng::stream_seed;
use crate::theory::{verify_phi_bounds, verify_regret_dominance, CheckResult};
use crate::trace::{read_trace_rows, Algorithm, Checkpoints, RegretTrace, TraceRow};
use crate::{LabError, Result};

pub const JOBS_ENV: &str = "COVERAGE_LAB_JOBS";

/// Worker count: the environment variable wins over the flag; the default
/// is the machine's parallelism.
pub fn resolve_jobs(flag: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var(JOBS_ENV) {
        return v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&j| j > 0)
            .ok_or_else(|| LabError::Config(format!("{JOBS_ENV} = `{v}` is not a positive integer")));
    }
    Ok(flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1))
}

/// Either a model file or a named builtin generator with numeric parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSpec {
    File {
        file: PathBuf,
    },
    Generator {
        generator: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

/// Function class used by the finite-class agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassSpec {
    /// Bellman closure of perturbed copies of `Q*`.
    Closure { offsets: Vec<f64> },
    /// Grid of arm values (single-state, single-step models).
    BanditGrid { grid: usize },
}

impl Default for ClassSpec {
    fn default() -> Self {
        ClassSpec::Closure { offsets: ClosedClassSpec::default().offsets }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyper {
    #[serde(default = "one")]
    pub beta_scale: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Offline sample count per step; defaults to `T`.
    #[serde(default)]
    pub n_off: Option<f64>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Overrides `lambda = T^eta`.
    #[serde(default)]
    pub lambda: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.05
}
fn default_eta() -> f64 {
    0.5
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper { beta_scale: 1.0, delta: 0.05, n_off: None, eta: 0.5, lambda: None }
    }
}

impl Hyper {
    fn set(&mut self, key: &str, v: f64) -> Result<()> {
        match key {
            "beta_scale" => self.beta_scale = v,
            "delta" => self.delta = v,
            "n_off" => self.n_off = Some(v),
            "eta" => self.eta = v,
            "lambda" => self.lambda = Some(v),
            other => return Err(LabError::Config(format!("unknown hyperparameter `{other}`"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvSpec,
    pub algorithm: Algorithm,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub hyper: Hyper,
    /// Values to sweep per hyperparameter; cells are the Cartesian product.
    #[serde(default)]
    pub sweep: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub class: ClassSpec,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    pub output_dir: PathBuf,
    /// Smallest episode used by the scaling fit.
    #[serde(default = "default_t_min")]
    pub fit_t_min: usize,
}

fn default_t_min() -> usize {
    10
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| LabError::io(path.as_ref(), e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(LabError::Config("seeds must be nonempty".into()));
        }
        if let Checkpoints::Explicit(ts) = &self.checkpoints {
            if let Some(t) = ts.iter().find(|&&t| t == 0 || t > self.episodes) {
                return Err(LabError::Config(format!("checkpoint {t} outside [1, {}]", self.episodes)));
            }
        }
        if let Checkpoints::Geometric { ratio } = self.checkpoints {
            if !(ratio > 1.0) {
                return Err(LabError::Config(format!("geometric ratio {ratio} must exceed 1")));
            }
        }
        let mut probe = self.hyper.clone();
        for (k, vals) in &self.sweep {
            if vals.is_empty() {
                return Err(LabError::Config(format!("sweep over `{k}` has no values")));
            }
            probe.set(k, vals[0])?;
        }
        Ok(())
    }

    /// Stable 64-bit FNV-1a hash of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config is serializable");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    /// Hyperparameter cells: name and settings.
    pub fn cells(&self) -> Result<Vec<(String, Hyper)>> {
        let mut cells = vec![(String::new(), self.hyper.clone())];
        for (k, vals) in &self.sweep {
            let mut next = Vec::with_capacity(cells.len() * vals.len());
            for (name, hyper) in &cells {
                for &v in vals {
                    let mut h = hyper.clone();
                    h.set(k, v)?;
                    let sep = if name.is_empty() { "" } else { "_" };
                    next.push((format!("{name}{sep}{k}={v}"), h));
                }
            }
            cells = next;
        }
        Ok(cells.into_iter().map(|(n, h)| (if n.is_empty() { "base".to_string() } else { n }, h)).collect())
    }
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: Option<f64>) -> Result<f64> {
    params
        .get(key)
        .copied()
        .or(default)
        .ok_or_else(|| LabError::Config(format!("generator parameter `{key}` is required")))
}

fn param_usize(params: &BTreeMap<String, f64>, key: &str, default: Option<usize>) -> Result<usize> {
    let v = param(params, key, default.map(|d| d as f64))?;
    if v < 0.0 || v.fract() != 0.0 {
        return Err(LabError::Config(format!("generator parameter `{key}` = {v} must be a nonnegative integer")));
    }
    Ok(v as usize)
}

/// Build a builtin environment. Known generators: `random_tabular`
/// (S, A, H, seed), `chain` (A, H, seed), `block` (latents, obs, A, H, seed),
/// `bandit` (means as `mean0`, `mean1`, ...), `closed_class` (S, A, H, seed),
/// `random_linear` (d, S, A, H, seed, structure: 0 generic, 1 low-variance,
/// 2 one-hot).
pub fn generate(name: &str, params: &BTreeMap<String, f64>) -> Result<Environment> {
    let seed = param_usize(params, "seed", Some(0))? as u64;
    let get = |k: &str, d: Option<usize>| param_usize(params, k, d);
    Ok(match name {
        "random_tabular" => {
            Environment::Tabular(random_tabular(get("S", Some(3))?, get("A", Some(2))?, get("H", Some(3))?, seed)?)
        }
        "chain" => Environment::Tabular(chain(get("A", Some(2))?, get("H", Some(5))?, seed)?),
        "block" => Environment::Tabular(block_mdp(
            get("latents", Some(2))?,
            get("obs", Some(4))?,
            get("A", Some(2))?,
            get("H", Some(3))?,
            seed,
        )?),
        "bandit" => {
            let mut means = Vec::new();
            while let Some(m) = params.get(&format!("mean{}", means.len())) {
                means.push(*m);
            }
            if means.is_empty() {
                means = vec![0.4, 0.6];
            }
            Environment::Tabular(bandit(&means)?)
        }
        "closed_class" => {
            let spec = ClosedClassSpec {
                n_states: get("S", Some(3))?,
                n_actions: get("A", Some(2))?,
                horizon: get("H", Some(3))?,
                ..Default::default()
            };
            Environment::Tabular(closed_class_instance(&spec, seed)?.0)
        }
        "random_linear" => {
            let structure = match get("structure", Some(0))? {
                0 => FeatureStructure::Generic,
                1 => FeatureStructure::LowVariance,
                2 => FeatureStructure::OneHot,
                k => return Err(LabError::Config(format!("unknown feature structure code {k}"))),
            };
            Environment::Linear(make_random_linear_mdp(
                get("d", Some(4))?,
                get("S", Some(5))?,
                get("A", Some(2))?,
                get("H", Some(3))?,
                structure,
                seed,
            )?)
        }
        other => return Err(LabError::Config(format!("unknown generator `{other}`"))),
    })
}

pub fn load_environment(spec: &EnvSpec) -> Result<Environment> {
    match spec {
        EnvSpec::File { file } => load_mdp(file),
        EnvSpec::Generator { generator, params } => generate(generator, params),
    }
}

/// The finite class a spec induces on a model.
pub fn build_class(mdp: &TabularMdp, spec: &ClassSpec) -> Result<FunctionClass> {
    match spec {
        ClassSpec::BanditGrid { grid } => bandit_class(mdp, *grid),
        ClassSpec::Closure { offsets } => {
            let opt = optimal_values(mdp);
            let (n, na) = (mdp.n_pairs(), mdp.n_actions());
            let seeds = (0..mdp.horizon())
                .map(|h| {
                    let q = opt.q_step(h, n);
                    let greedy: Vec<usize> =
                        (0..mdp.n_states()).map(|s| crate::mdp::argmax_lowest(&q[s * na..(s + 1) * na])).collect();
                    let mut set = vec![q.to_vec()];
                    for &c in offsets {
                        set.push((0..n).map(|z| q[z] + if z % na == greedy[z / na] { 0.0 } else { c }).collect());
                    }
                    set
                })
                .collect();
            FunctionClass::bellman_closure(mdp, seeds, 1e-12)
        }
    }
}

/// One (hyperparameter cell, seed) run.
pub fn run_cell(env: &Environment, cfg: &ExperimentConfig, hyper: &Hyper, seed: u64) -> Result<RegretTrace> {
    let t = cfg.episodes;
    match cfg.algorithm {
        Algorithm::Golf => {
            let mdp = env.tabular();
            let class = build_class(mdp, &cfg.class)?;
            let beta = golf_beta(class.size(), t, mdp.horizon(), hyper.delta, hyper.beta_scale);
            let mut gc = GolfConfig::new(beta, t);
            gc.checkpoints = cfg.checkpoints.clone();
            Ok(run_golf(mdp, &class, &gc, seed)?.trace)
        }
        Algorithm::Hybridq => {
            let mdp = env.tabular();
            let class = build_class(mdp, &cfg.class)?;
            let n_off = hyper.n_off.map_or(t, |v| v.max(0.0) as usize);
            let nu = DataDistribution::uniform(mdp.horizon(), mdp.n_states(), mdp.n_actions());
            let offline = make_offline_dataset(mdp, Behavior::Distribution(&nu), n_off, stream_seed(seed, 1))?;
            let mut hc = HybridConfig::new(t);
            hc.checkpoints = cfg.checkpoints.clone();
            run_hybridq(mdp, &class, &offline, &hc, seed)
        }
        Algorithm::Lsvi => {
            let owned;
            let lin = match env {
                Environment::Linear(l) => l,
                Environment::Tabular(m) => {
                    owned = LinearMdp::one_hot(m)?;
                    &owned
                }
            };
            let mut lc = LsviConfig::new(t);
            lc.eta = hyper.eta;
            lc.beta_scale = hyper.beta_scale;
            lc.delta = hyper.delta;
            lc.lambda = hyper.lambda;
            lc.lambda_mode = LambdaMode::Fixed;
            lc.checkpoints = cfg.checkpoints.clone();
            Ok(run_lsvi(lin, &lc, seed)?.trace)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub csv: String,
    pub final_regret: f64,
    pub exponent: Option<f64>,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub name: String,
    pub hyper: Hyper,
    pub runs: Vec<SeedSummary>,
    pub median_final_regret: Option<f64>,
    pub median_exponent: Option<f64>,
    pub median_r2: Option<f64>,
    pub checks: Vec<CheckResult>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub fingerprint: String,
    pub algorithm: Algorithm,
    pub episodes: usize,
    pub cells: Vec<CellSummary>,
    /// Runs computed in this invocation (the rest were already on disk).
    #[serde(skip)]
    pub computed: usize,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn csv_name(cell: &str, algorithm: Algorithm, seed: u64) -> String {
    format!("{}_{cell}_seed{seed}.csv", algorithm.name())
}

/// Run every (cell, seed) pair, write one CSV per run and `summary.json`.
///
/// Runs whose CSV already exists are skipped unless `force`. The summary is
/// always recomputed from the CSVs on disk, so reruns reproduce it exactly.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize, force: bool) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| LabError::io(&cfg.output_dir, e))?;
    let env = load_environment(&cfg.environment);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;

    let tasks: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s))).collect();
    let outcomes: Vec<(usize, u64, std::result::Result<bool, String>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, seed)| {
                let path = cfg.output_dir.join(csv_name(&cells[c].0, cfg.algorithm, seed));
                if path.exists() && !force {
                    return (c, seed, Ok(false));
                }
                let res = match &env {
                    Ok(env) => run_cell(env, cfg, &cells[c].1, seed).and_then(|tr| tr.write_csv(&path)),
                    Err(e) => Err(LabError::Config(format!("environment: {e}"))),
                };
                (c, seed, res.map(|_| true).map_err(|e| e.to_string()))
            })
            .collect()
    });

    let mut summary = ExperimentSummary {
        fingerprint: cfg.fingerprint(),
        algorithm: cfg.algorithm,
        episodes: cfg.episodes,
        cells: Vec::new(),
        computed: outcomes.iter().filter(|o| matches!(o.2, Ok(true))).count(),
    };
    for (c, (name, hyper)) in cells.iter().enumerate() {
        let mut cell = CellSummary {
            name: name.clone(),
            hyper: hyper.clone(),
            runs: Vec::new(),
            median_final_regret: None,
            median_exponent: None,
            median_r2: None,
            checks: Vec::new(),
            errors: Vec::new(),
        };
        let mut phi_checks = Vec::new();
        let mut dominance = Vec::new();
        for &seed in &cfg.seeds {
            if let Some((_, _, Err(e))) = outcomes.iter().find(|o| o.0 == c && o.1 == seed) {
                cell.errors.push(format!("seed {seed}: {e}"));
                continue;
            }
            let file = csv_name(name, cfg.algorithm, seed);
            let rows = match read_trace_rows(cfg.output_dir.join(&file)) {
                Ok(r) => r,
                Err(e) => {
                    cell.errors.push(format!("seed {seed}: {e}"));
                    continue;
                }
            };
            let pts: Vec<(usize, f64)> =
                rows.iter().filter(|r| r.t >= cfg.fit_t_min).map(|r| (r.t, r.cum_regret)).collect();
            let fit = fit_points(&pts).ok();
            cell.runs.push(SeedSummary {
                seed,
                csv: file,
                final_regret: rows.last().map_or(0.0, |r: &TraceRow| r.cum_regret),
                exponent: fit.as_ref().map(|f| f.exponent),
                r2: fit.as_ref().map(|f| f.r2),
            });
            if cfg.algorithm == Algorithm::Lsvi {
                let mut tr = RegretTrace::new(Algorithm::Lsvi, seed);
                tr.rows = rows;
                phi_checks.push(verify_phi_bounds(&tr));
                dominance.push(verify_regret_dominance(&tr));
            }
        }
        let finals: Vec<f64> = cell.runs.iter().map(|r| r.final_regret).collect();
        let exps: Vec<f64> = cell.runs.iter().filter_map(|r| r.exponent).collect();
        let r2s: Vec<f64> = cell.runs.iter().filter_map(|r| r.r2).collect();
        cell.median_final_regret = median(&finals);
        cell.median_exponent = median(&exps);
        cell.median_r2 = median(&r2s);
        if cfg.algorithm == Algorithm::Lsvi && !phi_checks.is_empty() {
            cell.checks.push(CheckResult::merge("phi_bounds", 1e-9, phi_checks));
            cell.checks.push(CheckResult::merge("regret_dominance", 1e-9, dominance));
        }
        summary.cells.push(cell);
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary is serializable");
    write_atomic(cfg.output_dir.join("summary.json"), json.as_bytes())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, seeds: Vec<u64>) -> ExperimentConfig {
        ExperimentConfig {
            environment: EnvSpec::Generator { generator: "random_tabular".into(), params: BTreeMap::new() },
            algorithm: Algorithm::Hybridq,
            episodes: 30,
            seeds,
            hyper: Hyper::default(),
            sweep: BTreeMap::new(),
            class: ClassSpec::Closure { offsets: vec![0.1] },
            checkpoints: Checkpoints::default(),
            output_dir: dir.to_path_buf(),
            fit_t_min: 1,
        }
    }

    #[test]
    fn empty_seeds_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(config(dir.path(), vec![]).validate(), Err(LabError::Config(_))));
    }

    #[test]
    fn two_seeds_give_two_csvs_and_a_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), vec![1, 2]);
        run_experiment(&cfg, 2, false).unwrap();
        let mut names: Vec<String> =
            std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        names.sort();
        assert_eq!(names, vec!["hybridq_base_seed1.csv", "hybridq_base_seed2.csv", "summary.json"]);
    }

    #[test]
    fn sweep_makes_product_cells() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), vec![1]);
        cfg.sweep.insert("beta_scale".into(), vec![0.5, 1.0]);
        cfg.sweep.insert("delta".into(), vec![0.1, 0.05]);
        assert_eq!(cfg.cells().unwrap().len(), 4);
        cfg.sweep.insert("bogus".into(), vec![1.0]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
