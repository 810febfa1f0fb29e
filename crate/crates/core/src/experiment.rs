//! Configured experiments: the engine behind `trapk run`.
//!
//! A run takes an [`ExperimentConfig`] (JSON file, flags, or both with flags
//! winning), fills in per-experiment defaults, validates everything, then
//! simulates on a fixed-size worker pool. Replica `i` always draws from
//! stream `(seed, i)`, so reports are identical for any worker count apart
//! from `wall_clock_seconds`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::disorder::{beta_critical, AnnealedHypercube, DisorderKind, DisorderSpec};
use crate::error::{Error, Result};
use crate::kprocess::{choose_truncation, sample_k_process, sample_stable_gamma_seeded, GammaMeasure};
use crate::rng::{fold_replicas, run_replicas, Domain, RngSpec};
use crate::skorohod::{
    build_time_distortion, entrance_exit_times_count, phi, rho_given_lambda, TimeDistortion,
};
use crate::stats::{
    aging_curve, chi_square_gof, compare_distributions, equilibrium_overlap, Bucket, EmpiricalDistribution,
    EstimateWithCI,
};
use crate::trajectory::{State, Trajectory};
use crate::trapmodel::{entrance_hitting_distribution, StartLaw, TrapModelSpec, MAX_HYPERCUBE_DIM};

pub const SCHEMA_VERSION: u32 = 1;

/// Default worker count when `--workers` is absent.
pub const WORKERS_ENV: &str = "TRAPK_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    EntranceLaw,
    Converge,
    Aging,
    Equilibrium,
    SkorohodBound,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EntranceLaw => "entrance-law",
            ExperimentKind::Converge => "converge",
            ExperimentKind::Aging => "aging",
            ExperimentKind::Equilibrium => "equilibrium",
            ExperimentKind::SkorohodBound => "skorohod-bound",
        }
    }
}

/// Dynamics used by the aging experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    RemLike,
    Rem,
    KProcess,
}

/// Time scale of the hypercube aging experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AgingScale {
    /// `c'_d = c_d 2^{d/(2α)}`, between the ergodic and the unscaled clock.
    Short,
    /// The ergodic speed-up `c_d`.
    Ergodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderMode {
    /// A fresh environment per replica.
    Annealed,
    /// One environment for all replicas.
    Quenched,
}

/// Where the weights `γ` come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GammaSpec {
    Weights { weights: Vec<f64> },
    /// `γ_x = ratio^x`.
    Geometric { ratio: f64, count: usize },
    /// Top `count` jumps of an `α`-stable subordinator.
    Stable { alpha: f64, count: usize, seed: u64 },
}

impl GammaSpec {
    pub fn measure(&self) -> Result<GammaMeasure> {
        match self {
            GammaSpec::Weights { weights } => {
                let mut w = weights.clone();
                w.sort_by(|a, b| b.total_cmp(a));
                GammaMeasure::new(w)
            }
            GammaSpec::Geometric { ratio, count } => GammaMeasure::geometric(*ratio, *count),
            GammaSpec::Stable { alpha, count, seed } => {
                sample_stable_gamma_seeded(*alpha, *count, RngSpec::new(*seed, 0))
            }
        }
    }

    /// The first `n` weights in rank order, as hypercube means. Geometric
    /// weights are computed directly and floored at the smallest positive
    /// normal `f64`.
    pub fn means(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            GammaSpec::Geometric { ratio, .. } => Ok((1..=n)
                .map(|x| ratio.powf(x as f64).max(f64::MIN_POSITIVE))
                .collect()),
            _ => {
                let m = self.measure()?;
                if m.len() < n {
                    return Err(config_err("gamma", format!("{} weights, need {n}", m.len())));
                }
                Ok(m.weights()[..n].to_vec())
            }
        }
    }
}

impl FromStr for GammaSpec {
    type Err = String;

    /// `4,2,1` | `geometric:RATIO:COUNT` | `stable:ALPHA:COUNT:SEED`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let int = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("{x:?}: {e}"));
        match parts.as_slice() {
            ["geometric", r, c] => Ok(GammaSpec::Geometric {
                ratio: num(r)?,
                count: int(c)? as usize,
            }),
            ["stable", a, c, seed] => Ok(GammaSpec::Stable {
                alpha: num(a)?,
                count: int(c)? as usize,
                seed: int(seed)?,
            }),
            [list] => Ok(GammaSpec::Weights {
                weights: list.split(',').map(num).collect::<std::result::Result<_, _>>()?,
            }),
            _ => Err(format!(
                "expected w1,w2,... or geometric:RATIO:COUNT or stable:ALPHA:COUNT:SEED, got {s:?}"
            )),
        }
    }
}

impl fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaSpec::Weights { weights } => {
                let s: Vec<String> = weights.iter().map(|w| w.to_string()).collect();
                write!(f, "{}", s.join(","))
            }
            GammaSpec::Geometric { ratio, count } => write!(f, "geometric:{ratio}:{count}"),
            GammaSpec::Stable { alpha, count, seed } => write!(f, "stable:{alpha}:{count}:{seed}"),
        }
    }
}

/// Everything a run needs. Fields an experiment does not use are ignored;
/// missing ones get per-experiment defaults (see [`ExperimentConfig::resolve`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    /// Truncation level (K process) or restriction level (Skorohod runs).
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Number of target ranks for the entrance law.
    #[serde(default, rename = "J", skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaSpec>,
    /// Observation time (converge, equilibrium), base time (aging) or path
    /// horizon (skorohod-bound).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// Truncation tolerance (converge, skorohod-bound) or time scale of the
    /// K process (aging).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<AgingScale>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_values: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    // Neither changes results, so neither is echoed.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment,
            model: None,
            d: None,
            m: None,
            j: None,
            alpha: None,
            beta: None,
            gamma: None,
            t: None,
            theta: None,
            epsilon: None,
            scale: None,
            disorder: None,
            k_values: None,
            start: None,
            display_cap: None,
            replicas: None,
            seed: None,
            workers: None,
            output: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| config_err("config", e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(config_err(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", cfg.schema_version),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fills unset fields with the defaults of this experiment and checks
    /// every precondition, so no simulation starts on a bad config.
    pub fn resolve(mut self) -> Result<Self> {
        use ExperimentKind::*;
        self.replicas.get_or_insert(match self.experiment {
            EntranceLaw | Converge | Equilibrium => 100_000,
            Aging => 10_000,
            SkorohodBound => 200,
        });
        self.seed.get_or_insert(0);
        match self.experiment {
            EntranceLaw => {
                self.d.get_or_insert(12);
                self.j.get_or_insert(5);
                self.alpha.get_or_insert(0.5);
            }
            Converge => {
                self.d.get_or_insert(12);
                self.gamma.get_or_insert(GammaSpec::Geometric { ratio: 0.5, count: 64 });
                self.t.get_or_insert(1.0);
                self.epsilon.get_or_insert(1e-4);
                self.start.get_or_insert(1);
                self.display_cap.get_or_insert(20);
            }
            Aging => {
                let model = *self.model.get_or_insert(ModelKind::RemLike);
                self.t.get_or_insert(1.0);
                self.theta.get_or_insert(vec![0.5, 1.0, 2.0]);
                match model {
                    ModelKind::RemLike => {
                        self.alpha.get_or_insert(0.5);
                    }
                    ModelKind::Rem => {
                        if self.beta.is_none() {
                            let alpha = *self.alpha.get_or_insert(0.5);
                            self.beta = Some(beta_critical() / alpha);
                        }
                        let beta = self.beta.unwrap_or(f64::NAN);
                        DisorderSpec {
                            kind: DisorderKind::RemGaussian { beta },
                            d: 1,
                        }
                        .validate()
                        .map_err(|e| config_err("beta", e.to_string()))?;
                        self.alpha = Some(crate::disorder::rem_alpha(beta));
                    }
                    ModelKind::KProcess => {
                        let alpha = *self.alpha.get_or_insert(0.5);
                        let m = *self.m.get_or_insert(1000);
                        let seed = self.seed.unwrap_or(0);
                        self.gamma.get_or_insert(GammaSpec::Stable { alpha, count: m, seed });
                        self.epsilon.get_or_insert(1e-3);
                    }
                }
                if model != ModelKind::KProcess {
                    self.d.get_or_insert(14);
                    self.scale.get_or_insert(AgingScale::Short);
                    self.disorder.get_or_insert(DisorderMode::Annealed);
                }
            }
            Equilibrium => {
                self.gamma.get_or_insert(GammaSpec::Weights {
                    weights: vec![5.0, 4.0, 3.0, 2.0, 1.0],
                });
                self.start.get_or_insert(1);
            }
            SkorohodBound => {
                self.d.get_or_insert(10);
                self.gamma.get_or_insert(GammaSpec::Geometric { ratio: 0.5, count: 64 });
                self.t.get_or_insert(1.0);
                self.epsilon.get_or_insert(1e-4);
                self.k_values.get_or_insert(vec![1, 2, 4, 8]);
                self.start.get_or_insert(1);
            }
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.replicas == Some(0) {
            return Err(config_err("replicas", "must be at least 1"));
        }
        if let Some(d) = self.d {
            if !(1..=MAX_HYPERCUBE_DIM).contains(&d) {
                return Err(config_err("d", format!("{d} outside [1, {MAX_HYPERCUBE_DIM}]")));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(config_err("alpha", format!("{a} outside (0, 1)")));
            }
        }
        if let Some(t) = self.t {
            if !(t > 0.0 && t.is_finite()) {
                return Err(config_err("t", format!("{t} must be positive")));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(config_err("epsilon", format!("{e} must be positive")));
            }
        }
        if let Some(th) = &self.theta {
            if th.is_empty() || th.iter().any(|&x| !(x > 0.0)) || th.windows(2).any(|w| w[1] <= w[0]) {
                return Err(config_err("theta", "must be a strictly increasing list of positive numbers"));
            }
        }
        if self.start == Some(0) {
            return Err(config_err("start", "ranks start at 1"));
        }
        if self.display_cap == Some(0) {
            return Err(config_err("display_cap", "must be at least 1"));
        }
        if let Some(ks) = &self.k_values {
            if ks.is_empty() || ks.contains(&0) {
                return Err(config_err("k_values", "must be a nonempty list of positive integers"));
            }
        }
        if let Some(g) = &self.gamma {
            g.measure().map_err(|e| config_err("gamma", e.to_string()))?;
        }
        match self.experiment {
            ExperimentKind::EntranceLaw => {
                let n = 1usize << self.d.unwrap_or(1);
                let j = self.j.unwrap_or(0);
                if j == 0 || j >= n {
                    return Err(config_err("J", format!("{j} outside [1, 2^d - 1]")));
                }
            }
            ExperimentKind::Converge | ExperimentKind::SkorohodBound => {
                let gamma = self.gamma_measure()?;
                let m = self.truncation(&gamma)?;
                let n = 1usize << self.d.unwrap_or(1);
                if m > n {
                    return Err(config_err("M", format!("{m} exceeds 2^d = {n}")));
                }
                self.gamma_spec()?.means(n).map_err(|e| config_err("gamma", e.to_string()))?;
                let start = self.start.unwrap_or(1);
                if start > m {
                    return Err(config_err("start", format!("{start} above truncation level {m}")));
                }
                if let Some(ks) = &self.k_values {
                    if let Some(&k) = ks.iter().find(|&&k| k > m) {
                        return Err(config_err("k_values", format!("{k} above restriction level {m}")));
                    }
                }
            }
            ExperimentKind::Aging => match self.model {
                Some(ModelKind::KProcess) => {
                    let gamma = self.gamma_measure()?;
                    let m = self.m.unwrap_or(0);
                    if m == 0 || m > gamma.len() {
                        return Err(config_err("M", format!("{m} outside [1, {}]", gamma.len())));
                    }
                }
                _ => {
                    self.disorder_spec()?.validate().map_err(|e| {
                        config_err(if self.model == Some(ModelKind::Rem) { "beta" } else { "alpha" }, e.to_string())
                    })?;
                }
            },
            ExperimentKind::Equilibrium => {
                let n = self.gamma_measure()?.len();
                let start = self.start.unwrap_or(1);
                if start > n {
                    return Err(config_err("start", format!("{start} above {n} states")));
                }
            }
        }
        Ok(())
    }

    fn gamma_spec(&self) -> Result<&GammaSpec> {
        self.gamma.as_ref().ok_or_else(|| config_err("gamma", "missing"))
    }

    fn gamma_measure(&self) -> Result<GammaMeasure> {
        self.gamma_spec()?.measure().map_err(|e| config_err("gamma", e.to_string()))
    }

    /// `M`, either given or chosen from `epsilon`.
    fn truncation(&self, gamma: &GammaMeasure) -> Result<usize> {
        match (self.m, self.epsilon) {
            (Some(m), _) if m >= 1 && m <= gamma.len() => Ok(m),
            (Some(m), _) => Err(config_err("M", format!("{m} outside [1, {}]", gamma.len()))),
            (None, Some(eps)) => choose_truncation(gamma, eps).map_err(|e| config_err("epsilon", e.to_string())),
            (None, None) => Err(config_err("M", "set M or epsilon")),
        }
    }

    fn disorder_spec(&self) -> Result<DisorderSpec> {
        let d = self.d.ok_or_else(|| config_err("d", "missing"))?;
        let kind = match self.model {
            Some(ModelKind::Rem) => DisorderKind::RemGaussian {
                beta: self.beta.ok_or_else(|| config_err("beta", "missing"))?,
            },
            _ => DisorderKind::RemLikePareto {
                alpha: self.alpha.ok_or_else(|| config_err("alpha", "missing"))?,
            },
        };
        Ok(DisorderSpec { kind, d })
    }

    fn replicas(&self) -> u64 {
        self.replicas.unwrap_or(1)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// Worker count: explicit, else `TRAPK_WORKERS`, else all cores.
pub fn resolve_workers(explicit: Option<usize>) -> Result<usize> {
    if let Some(w) = explicit {
        return if w >= 1 { Ok(w) } else { Err(config_err("workers", "must be at least 1")) };
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&w| w >= 1)
            .ok_or_else(|| config_err("workers", format!("{WORKERS_ENV}={v:?} is not a positive integer")));
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedProvenance {
    pub master_seed: u64,
    pub streams: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: &'static str,
    /// The resolved config; feeding it back reproduces the results.
    pub config: ExperimentConfig,
    pub seeds: SeedProvenance,
    pub results: Value,
    pub wall_clock_seconds: f64,
}

impl Report {
    /// The report as JSON without the wall-clock field.
    pub fn body(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Value::Object(m) = &mut v {
            m.remove("wall_clock_seconds");
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    /// The experiment's table, with header row.
    pub csv: String,
}

impl RunOutput {
    /// Writes `report.json` and `<experiment>.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let report = dir.join("report.json");
        let csv = dir.join(format!("{}.csv", self.report.experiment));
        std::fs::write(&report, serde_json::to_string_pretty(&self.report)? + "\n")?;
        std::fs::write(&csv, &self.csv)?;
        Ok((report, csv))
    }
}

/// Resolves, validates and runs `config` on a pool of `workers` threads.
pub fn run(config: ExperimentConfig) -> Result<RunOutput> {
    let workers = resolve_workers(config.workers)?;
    let config = config.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| config_err("workers", e.to_string()))?;
    let started = Instant::now();
    let (results, csv) = pool.install(|| match config.experiment {
        ExperimentKind::EntranceLaw => run_entrance_law(&config),
        ExperimentKind::Converge => run_converge(&config),
        ExperimentKind::Aging => run_aging(&config),
        ExperimentKind::Equilibrium => run_equilibrium(&config),
        ExperimentKind::SkorohodBound => run_skorohod_bound(&config),
    })?;
    Ok(RunOutput {
        report: Report {
            schema_version: SCHEMA_VERSION,
            experiment: config.experiment.name(),
            seeds: SeedProvenance {
                master_seed: config.seed(),
                streams: "replica i draws from ChaCha8 stream i under keys derived from (master_seed, purpose)",
            },
            config,
            results,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
        csv,
    })
}

fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn run_entrance_law(cfg: &ExperimentConfig) -> Result<(Value, String)> {
    let (d, j, alpha) = (cfg.d.unwrap_or(12), cfg.j.unwrap_or(5), cfg.alpha.unwrap_or(0.5));
    let seed = RngSpec::new(cfg.seed(), 0);
    // The environment only decides where the J deepest traps sit.
    let env = DisorderSpec {
        kind: DisorderKind::RemLikePareto { alpha },
        d,
    }
    .sample(seed.derive(1))?;
    let spec = env.trap_model();
    let targets: Vec<usize> = (1..=j).collect();
    let hits = entrance_hitting_distribution(&spec, &targets, StartLaw::UniformOutsideTarget, cfg.replicas(), seed)?;
    let test = chi_square_gof(&hits.counts, &vec![1.0 / j as f64; j])?;

    #[derive(Serialize)]
    struct Row {
        rank: usize,
        vertex: u32,
        count: u64,
        frequency: f64,
        ci_half_width: f64,
    }
    let estimates: Vec<EstimateWithCI> = hits
        .counts
        .iter()
        .map(|&c| EstimateWithCI::proportion(c, hits.replicas, cfg.seed()))
        .collect();
    let csv = csv_string(hits.targets.iter().zip(&hits.counts).zip(&estimates).map(|((&r, &count), e)| Row {
        rank: r,
        vertex: spec.vertex_of(r).0,
        count,
        frequency: e.point,
        ci_half_width: e.half_width,
    }))?;
    let results = json!({
        "targets": hits.targets,
        "counts": hits.counts,
        "frequencies": estimates,
        "chi_square": test,
        "max_deviation_from_uniform": hits.max_deviation_from_uniform(),
    });
    Ok((results, csv))
}

fn run_converge(cfg: &ExperimentConfig) -> Result<(Value, String)> {
    let d = cfg.d.unwrap_or(12);
    let gamma_spec = cfg.gamma_spec()?;
    let gamma = gamma_spec.measure()?;
    let m = cfg.truncation(&gamma)?;
    let t = cfg.t.unwrap_or(1.0);
    let start = cfg.start.unwrap_or(1);
    let cap = cfg.display_cap.unwrap_or(20);
    let seed = RngSpec::new(cfg.seed(), 0);

    let means = gamma_spec.means(1 << d)?;
    let spec = TrapModelSpec::hypercube_ranked(means, &mut seed.rng_for(Domain::Placement))?;
    let hyper = hypercube_marginal(&spec, start, t, cfg.replicas(), seed.derive(1).master_seed, cap)?;
    let kproc = k_marginal(&gamma, m, State::Site(start), t, cfg.replicas(), seed.derive(2).master_seed, cap)?;
    let cmp = compare_distributions(&hyper, &kproc)?;

    #[derive(Serialize)]
    struct Row {
        state: String,
        hypercube_count: u64,
        k_process_count: u64,
        hypercube_frequency: f64,
        k_process_frequency: f64,
    }
    let buckets: std::collections::BTreeSet<Bucket> = hyper.counts.keys().chain(kproc.counts.keys()).copied().collect();
    let csv = csv_string(buckets.iter().map(|&b| Row {
        state: match b {
            Bucket::Site(x) => x.to_string(),
            Bucket::Overflow => format!(">{cap}"),
        },
        hypercube_count: hyper.count(b),
        k_process_count: kproc.count(b),
        hypercube_frequency: hyper.frequency(b),
        k_process_frequency: kproc.frequency(b),
    }))?;
    let results = json!({
        "truncation_level": m,
        "tail_mass_beyond_truncation": gamma.mass_beyond(m),
        "comparison": cmp,
    });
    Ok((results, csv))
}

/// Marginal at `t` of the hypercube model from rank `start`.
pub fn hypercube_marginal(
    spec: &TrapModelSpec,
    start: usize,
    t: f64,
    replicas: u64,
    master_seed: u64,
    cap: usize,
) -> Result<EmpiricalDistribution> {
    fold_replicas(
        master_seed,
        replicas,
        EmpiricalDistribution::default,
        |acc, rng| {
            let x = spec.state_at(start, t, &mut rng.rng())?;
            acc.add(Bucket::of(State::Site(x), cap));
            Ok(())
        },
        EmpiricalDistribution::merge,
    )
}

/// Marginal at `t` of the level-`m` K process from `y0`.
pub fn k_marginal(
    gamma: &GammaMeasure,
    m: usize,
    y0: State,
    t: f64,
    replicas: u64,
    master_seed: u64,
    cap: usize,
) -> Result<EmpiricalDistribution> {
    fold_replicas(
        master_seed,
        replicas,
        EmpiricalDistribution::default,
        |acc, rng| {
            let s = sample_k_process(gamma, m, y0, t, &mut rng.rng())?;
            acc.add(Bucket::of(s.trajectory.value_at(t), cap));
            Ok(())
        },
        EmpiricalDistribution::merge,
    )
}

fn run_aging(cfg: &ExperimentConfig) -> Result<(Value, String)> {
    let theta = cfg.theta.clone().unwrap_or_default();
    let t = cfg.t.unwrap_or(1.0);
    let alpha = cfg.alpha.unwrap_or(0.5);
    let seed = cfg.seed();
    let (curve, extra) = match cfg.model.unwrap_or(ModelKind::RemLike) {
        ModelKind::KProcess => {
            let gamma = cfg.gamma_measure()?;
            let m = cfg.m.unwrap_or(gamma.len());
            let eps = cfg.epsilon.unwrap_or(1e-3);
            // Start from ∞ means uniform entry into {1, ..., M}.
            let sampler = |rng: RngSpec, horizon: f64| -> Result<Trajectory> {
                let y0 = rand::Rng::random_range(&mut rng.rng_for(Domain::Start), 1..=m);
                Ok(sample_k_process(&gamma, m, State::Site(y0), horizon, &mut rng.rng())?.trajectory)
            };
            let curve = aging_curve(&sampler, alpha, t, &theta, eps, cfg.replicas(), seed)?;
            let extra = json!({
                "truncation_level": m,
                "equilibrium_overlap": equilibrium_overlap(&gamma.weights()[..m]),
            });
            (curve, extra)
        }
        model => {
            let disorder = cfg.disorder_spec()?;
            let d = disorder.d as f64;
            let alpha = disorder.alpha();
            let c_d = disorder.c_d();
            let c_prime = match cfg.scale.unwrap_or(AgingScale::Short) {
                AgingScale::Short => c_d * (d / (2.0 * alpha)).exp2(),
                AgingScale::Ergodic => c_d,
            };
            // Paths run on the ergodic clock (means c_d τ); Y(t/c') is read
            // at ergodic time t c_d / c'.
            let scale = c_d / c_prime;
            let curve = match cfg.disorder.unwrap_or(DisorderMode::Annealed) {
                DisorderMode::Annealed => {
                    let model = AnnealedHypercube::new(disorder, c_d)?;
                    let sampler = |rng: RngSpec, horizon: f64| model.simulate(horizon, rng);
                    aging_curve(&sampler, alpha, t, &theta, scale, cfg.replicas(), seed)?
                }
                DisorderMode::Quenched => {
                    let env = disorder.sample(RngSpec::new(seed, 0).derive(1))?;
                    let spec = env.trap_model();
                    let n = spec.num_states();
                    let sampler = |rng: RngSpec, horizon: f64| {
                        let x0 = rand::Rng::random_range(&mut rng.rng_for(Domain::Start), 1..=n);
                        spec.simulate(x0, horizon, &mut rng.rng())
                    };
                    aging_curve(&sampler, alpha, t, &theta, scale, cfg.replicas(), seed)?
                }
            };
            let extra = json!({
                "model": model,
                "c_d": c_d,
                "c_prime": c_prime,
            });
            (curve, extra)
        }
    };
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    let csv = String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))?;
    let theory = curve.theory()?;
    let results = json!({
        "curve": curve,
        "theory_R": theory,
        "details": extra,
    });
    Ok((results, csv))
}

fn run_equilibrium(cfg: &ExperimentConfig) -> Result<(Value, String)> {
    let gamma = cfg.gamma_measure()?;
    let spec = TrapModelSpec::complete(gamma.weights())?;
    let total: f64 = gamma.weights().iter().sum();
    let t = cfg.t.unwrap_or(100.0 * total);
    let start = cfg.start.unwrap_or(1);
    let n = spec.num_states();
    let counts = fold_replicas(
        cfg.seed(),
        cfg.replicas(),
        || vec![0u64; n],
        |acc, rng| {
            acc[spec.state_at(start, t, &mut rng.rng())? - 1] += 1;
            Ok(())
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    )?;
    let gamma_bar: Vec<f64> = spec.means().iter().map(|m| m / total).collect();
    let test = chi_square_gof(&counts, &gamma_bar)?;

    #[derive(Serialize)]
    struct Row {
        rank: usize,
        mean: f64,
        gamma_bar: f64,
        count: u64,
        frequency: f64,
        ci_half_width: f64,
    }
    let csv = csv_string((1..=n).map(|r| {
        let e = EstimateWithCI::proportion(counts[r - 1], cfg.replicas(), cfg.seed());
        Row {
            rank: r,
            mean: spec.mean_of_rank(r),
            gamma_bar: gamma_bar[r - 1],
            count: counts[r - 1],
            frequency: e.point,
            ci_half_width: e.half_width,
        }
    }))?;
    let results = json!({
        "t": t,
        "counts": counts,
        "gamma_bar": gamma_bar,
        "chi_square": test,
        "equilibrium_overlap": equilibrium_overlap(gamma.weights()),
    });
    Ok((results, csv))
}

/// Time changes tried for a pair: the identity and one matched-visit map
/// per `K`, labelled `"identity"` and `"K=k"`.
pub fn candidate_distortions(f: &Trajectory, g: &Trajectory, k_values: &[usize]) -> Result<Vec<(String, TimeDistortion)>> {
    let mut out = vec![("identity".to_string(), TimeDistortion::identity())];
    for &k in k_values {
        let nf = entrance_exit_times_count(f, k, usize::MAX).visits.len();
        let ng = entrance_exit_times_count(g, k, usize::MAX).visits.len();
        let n = nf.min(ng);
        let source = entrance_exit_times_count(f, k, n);
        let target = entrance_exit_times_count(g, k, n);
        // Zero-length visits on one side only have no piecewise-linear match.
        if let Ok(l) = build_time_distortion(&source, &target) {
            out.push((format!("K={k}"), l));
        }
    }
    Ok(out)
}

fn run_skorohod_bound(cfg: &ExperimentConfig) -> Result<(Value, String)> {
    let d = cfg.d.unwrap_or(10);
    let gamma_spec = cfg.gamma_spec()?;
    let gamma = gamma_spec.measure()?;
    let m = cfg.truncation(&gamma)?;
    let horizon = cfg.t.unwrap_or(1.0);
    let start = cfg.start.unwrap_or(1);
    let ks = cfg.k_values.clone().unwrap_or_default();
    let seed = RngSpec::new(cfg.seed(), 0);
    let spec = TrapModelSpec::hypercube_ranked(gamma_spec.means(1 << d)?, &mut seed.rng_for(Domain::Placement))?;

    #[derive(Serialize)]
    struct Row {
        replica: u64,
        identity_integral: f64,
        best_bound: f64,
        best_candidate: String,
        best_phi: f64,
        best_integral: f64,
    }
    let rows = run_replicas(seed.derive(1).master_seed, cfg.replicas(), |rng| {
        let f = spec.simulate(start, horizon, &mut rng.rng())?;
        let g = f.restrict(m);
        let candidates = candidate_distortions(&f, &g, &ks)?;
        let mut best: Option<(f64, usize, f64, f64)> = None;
        let mut identity = 0.0;
        for (i, (_, l)) in candidates.iter().enumerate() {
            let integral = rho_given_lambda(&f, &g, l)?;
            if i == 0 {
                identity = integral;
            }
            let p = phi(l);
            let v = p.max(integral);
            if best.is_none_or(|b| v < b.0) {
                best = Some((v, i, p, integral));
            }
        }
        let (v, i, p, integral) = best.expect("identity is always a candidate");
        Ok(Row {
            replica: rng.replica_index,
            identity_integral: identity,
            best_bound: v,
            best_candidate: candidates[i].0.clone(),
            best_phi: p,
            best_integral: integral,
        })
    })?;
    let ident: Vec<f64> = rows.iter().map(|r| r.identity_integral).collect();
    let best: Vec<f64> = rows.iter().map(|r| r.best_bound).collect();
    let improved = rows.iter().filter(|r| r.best_candidate != "identity").count();
    let results = json!({
        "restriction_level": m,
        "identity_mean": EstimateWithCI::mean(&ident, cfg.seed()),
        "best_bound_mean": EstimateWithCI::mean(&best, cfg.seed()),
        "fraction_improved_by_matching": improved as f64 / rows.len() as f64,
    });
    Ok((results, csv_string(rows)?))
}

/// Flags of `trapk run`. Each one overrides the same field of `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub experiment: Option<ExperimentKind>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub d: Option<u32>,
    #[arg(long = "M", alias = "m")]
    pub m: Option<usize>,
    #[arg(long = "J", alias = "j")]
    pub j: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// `w1,w2,...`, `geometric:RATIO:COUNT` or `stable:ALPHA:COUNT:SEED`.
    #[arg(long)]
    pub gamma: Option<GammaSpec>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub scale: Option<AgingScale>,
    #[arg(long, value_enum)]
    pub disorder: Option<DisorderMode>,
    #[arg(long, value_delimiter = ',')]
    pub k_values: Option<Vec<usize>>,
    #[arg(long)]
    pub start: Option<usize>,
    #[arg(long)]
    pub display_cap: Option<usize>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to $TRAPK_WORKERS, then to the number of cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Directory for report.json and the CSV table.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl RunArgs {
    /// The config file (if any) with every given flag applied on top.
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.experiment) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(kind)) => ExperimentConfig::new(kind),
            (None, None) => return Err(config_err("experiment", "give --experiment or --config")),
        };
        macro_rules! apply {
            ($($f:ident),*) => { $( if self.$f.is_some() { cfg.$f = self.$f; } )* };
        }
        if let Some(kind) = self.experiment {
            cfg.experiment = kind;
        }
        apply!(
            model, d, m, j, alpha, beta, gamma, t, theta, epsilon, scale, disorder, k_values, start,
            display_cap, replicas, seed, workers, output
        );
        Ok(cfg)
    }
}
