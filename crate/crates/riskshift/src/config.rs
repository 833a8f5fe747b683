//! Flat `key = value` experiment configuration.
//!
//! One key per line; `#` starts a comment; blank lines are ignored. Every
//! key has a default, so an empty file (or no file at all) reproduces the
//! reference setting of each experiment. Keys not listed for a subcommand
//! are rejected, as are duplicates.
//!
//! Keys accepted by every experiment:
//!
//! | key           | default | meaning                                      |
//! |---------------|---------|----------------------------------------------|
//! | `master_seed` | 0       | root of every RNG stream                     |
//! | `trials`      | varies  | independent repetitions                      |
//! | `output_path` | stdout  | CSV destination, relative to the config file |
//!
//! Experiments sweeping `λ` accept either `lambda_grid` (comma-separated,
//! strictly increasing, positive) or `lambda_min`, `lambda_max` and
//! `lambda_points` (log-spaced, default 25 points in `[1e-3, 1e2]`).
//! The per-experiment keys are listed on each config struct.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use riskshift_core::linalg::logspace;
use riskshift_core::subspace::SubspacePairSpec;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    RegressionSweep,
    ClassificationSweep,
    RelationCurves,
    Denoising,
    Counterexample,
    CsValidation,
    SubspaceAnalyze,
}

impl ExperimentKind {
    /// Name used for the subcommand and the optional `kind` key.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RegressionSweep => "regression-sweep",
            ExperimentKind::ClassificationSweep => "classification-sweep",
            ExperimentKind::RelationCurves => "relation-curves",
            ExperimentKind::Denoising => "denoise",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::CsValidation => "cs-validate",
            ExperimentKind::SubspaceAnalyze => "subspace-analyze",
        }
    }
}

/// Raw parsed lines, tracking which keys have been read.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
    used: BTreeSet<String>,
    base_dir: Option<PathBuf>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::config(format!("line {}: expected `key = value`", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(HarnessError::config(format!("line {}: empty key", i + 1)));
            }
            if entries.insert(key.to_string(), (i + 1, value.to_string())).is_some() {
                return Err(HarnessError::config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Self { entries, used: BTreeSet::new(), base_dir: None })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut kv = Self::parse(&text)?;
        kv.base_dir = path.parent().map(Path::to_path_buf);
        Ok(kv)
    }

    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.used.insert(key.to_string());
        self.entries.get(key).cloned()
    }

    pub fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse()
                .map_err(|_| HarnessError::config(format!("line {line}: cannot parse `{key} = {v}`"))),
        }
    }

    pub fn list(&mut self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| HarnessError::config(format!("line {line}: bad number `{s}` in `{key}`")))
                })
                .collect(),
        }
    }

    pub fn usize_list(&mut self, key: &str, default: Vec<usize>) -> Result<Vec<usize>> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| HarnessError::config(format!("line {line}: bad integer `{s}` in `{key}`")))
                })
                .collect(),
        }
    }

    /// Path value resolved against the config file's directory.
    pub fn path(&mut self, key: &str) -> Result<Option<PathBuf>> {
        Ok(self.raw(key).map(|(_, v)| match &self.base_dir {
            Some(dir) if Path::new(&v).is_relative() => dir.join(v),
            _ => PathBuf::from(v),
        }))
    }

    /// Fails on any key that was never read.
    pub fn finish(self) -> Result<()> {
        let unknown: Vec<String> = self
            .entries
            .iter()
            .filter(|(k, _)| !self.used.contains(*k))
            .map(|(k, (line, _))| format!("`{k}` (line {line})"))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::config(format!("unknown keys: {}", unknown.join(", "))))
        }
    }
}

/// Keys shared by every experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Common {
    pub master_seed: u64,
    pub trials: usize,
    pub output_path: Option<PathBuf>,
}

impl Common {
    fn read(kv: &mut KeyValues, kind: ExperimentKind, default_trials: usize) -> Result<Self> {
        let declared: String = kv.get("kind", kind.name().to_string())?;
        if declared != kind.name() {
            return Err(HarnessError::config(format!(
                "config declares kind `{declared}` but was run as `{}`",
                kind.name()
            )));
        }
        let c = Self {
            master_seed: kv.get("master_seed", 0)?,
            trials: kv.get("trials", default_trials)?,
            output_path: kv.path("output_path")?,
        };
        if c.trials == 0 {
            return Err(HarnessError::config("trials must be >= 1"));
        }
        Ok(c)
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(HarnessError::config(format!("{name} must be positive, got {v}")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(HarnessError::config(format!("{name} must be nonnegative, got {v}")))
    }
}

fn increasing_positive(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(HarnessError::config(format!("{name} is empty")));
    }
    if grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::config(format!("{name} must be positive and strictly increasing")));
    }
    Ok(())
}

/// `lambda_grid`, or `lambda_min`/`lambda_max`/`lambda_points`.
fn lambda_grid(kv: &mut KeyValues, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    let explicit = kv.list("lambda_grid", Vec::new())?;
    let lo = kv.get("lambda_min", lo)?;
    let hi = kv.get("lambda_max", hi)?;
    let points = kv.get("lambda_points", points)?;
    let grid = if explicit.is_empty() {
        if points == 0 || !(lo > 0.0 && hi >= lo) {
            return Err(HarnessError::config("need 0 < lambda_min <= lambda_max and lambda_points >= 1"));
        }
        logspace(lo, hi, points)
    } else {
        explicit
    };
    increasing_positive("lambda grid", &grid)?;
    Ok(grid)
}

fn dims(kv: &mut KeyValues, d: usize, d_p: usize, d_q: usize, d_pq: usize) -> Result<SubspacePairSpec> {
    let d = kv.get("d", d)?;
    let d_p = kv.get("d_p", d_p)?;
    let d_q = kv.get("d_q", d_q)?;
    let d_pq = kv.get("d_pq", d_pq)?;
    SubspacePairSpec::new(d, d_p, d_q, d_pq).map_err(|e| HarnessError::config(e.to_string()))
}

/// Shift used by the regression sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftKind {
    /// `Σ_Q = τΠ_Q`.
    Subspace,
    /// `Σ_Q = Σ_P`.
    None,
}

impl FromStr for ShiftKind {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "subspace" => Ok(ShiftKind::Subspace),
            "none" => Ok(ShiftKind::None),
            _ => Err(()),
        }
    }
}

/// Keys: `d n d_p d_q d_pq tau sigma_beta_sq noise_var shift` and the λ grid.
/// Defaults: `800 1000 720 640 560 2 1 0.2 subspace`, 5 trials.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionConfig {
    pub common: Common,
    pub spec: SubspacePairSpec,
    pub n: usize,
    pub tau: f64,
    pub sigma_beta_sq: f64,
    /// Variance of the additive label noise; the labeler uses its square root.
    pub noise_var: f64,
    pub shift: ShiftKind,
    pub lambdas: Vec<f64>,
}

/// Keys: `d n d_p d_q d_pq tau sigma_beta_sq kappa_over_gamma label_p
/// theory_points` and the λ grid. Defaults: `800 1000 720 640 560 2 1 5 0.8
/// 99`, 1 trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationConfig {
    pub common: Common,
    pub spec: SubspacePairSpec,
    pub n: usize,
    pub tau: f64,
    pub sigma_beta_sq: f64,
    pub kappa_over_gamma: f64,
    pub label_p: f64,
    pub theory_points: usize,
    pub lambdas: Vec<f64>,
}

/// Keys: `mu_grid` (default `1,1.2,1.5,2`, at `κ/γ = 1`), `ratio_grid`
/// (default `0.2,0.5,1,2,5`, at `μ = 1`) and `risk_points` (default 99).
#[derive(Debug, Clone, PartialEq)]
pub struct RelationCurvesConfig {
    pub common: Common,
    pub mu_grid: Vec<f64>,
    pub ratio_grid: Vec<f64>,
    pub risk_points: usize,
}

/// Keys: `d d_p d_q` (default `200 40 40`), `overlaps` (default `0,0.5,1`;
/// each is realized as `d_pq = round(a·d_Q)`), `snrs` (default `1,100`) and
/// the λ grid (default 50 points in `[1e-3, 1e2]`).
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseConfig {
    pub common: Common,
    pub d: usize,
    pub d_p: usize,
    pub d_q: usize,
    pub overlaps: Vec<f64>,
    pub snrs: Vec<f64>,
    pub lambdas: Vec<f64>,
}

/// Keys: `r_p sigma_beta_sq gamma kappa mu b c a_min a_max a_points mc_draws`.
/// Defaults: `0.9 1 1 1 1.2 1 1 0.05 50 40 1000000`.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleConfig {
    pub common: Common,
    pub r_p: f64,
    pub sigma_beta_sq: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub mu: f64,
    pub b: f64,
    pub c: f64,
    pub a_grid: Vec<f64>,
    pub mc_draws: usize,
}

/// Keys: `d d_p d_q d_pq snr lambda n_grid`. Defaults:
/// `200 40 40 20 100 10 500,2000,8000`, 20 trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CsConfig {
    pub common: Common,
    pub spec: SubspacePairSpec,
    pub snr: f64,
    pub lambda: f64,
    pub n_grid: Vec<usize>,
}

/// Keys: `input_p input_q` (required numeric matrices, rows = samples) and
/// `k_max` (default: the smaller rank of the two inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceAnalyzeConfig {
    pub common: Common,
    pub input_p: PathBuf,
    pub input_q: PathBuf,
    pub k_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    Regression(RegressionConfig),
    Classification(ClassificationConfig),
    RelationCurves(RelationCurvesConfig),
    Denoise(DenoiseConfig),
    Counterexample(CounterexampleConfig),
    Cs(CsConfig),
    SubspaceAnalyze(SubspaceAnalyzeConfig),
}

impl ExperimentConfig {
    pub fn from_keys(kind: ExperimentKind, mut kv: KeyValues) -> Result<Self> {
        let kv = &mut kv;
        let cfg = match kind {
            ExperimentKind::RegressionSweep => {
                let common = Common::read(kv, kind, 5)?;
                ExperimentConfig::Regression(RegressionConfig {
                    common,
                    spec: dims(kv, 800, 720, 640, 560)?,
                    n: kv.get("n", 1000)?,
                    tau: positive("tau", kv.get("tau", 2.0)?)?,
                    sigma_beta_sq: positive("sigma_beta_sq", kv.get("sigma_beta_sq", 1.0)?)?,
                    noise_var: nonnegative("noise_var", kv.get("noise_var", 0.2)?)?,
                    shift: kv
                        .get::<String>("shift", "subspace".into())?
                        .parse()
                        .map_err(|_| HarnessError::config("shift must be `subspace` or `none`"))?,
                    lambdas: lambda_grid(kv, 1e-3, 1e2, 25)?,
                })
            }
            ExperimentKind::ClassificationSweep => {
                let common = Common::read(kv, kind, 1)?;
                let label_p: f64 = kv.get("label_p", 0.8)?;
                if !(label_p > 0.5 && label_p <= 1.0) {
                    return Err(HarnessError::config("label_p must lie in (1/2, 1]"));
                }
                ExperimentConfig::Classification(ClassificationConfig {
                    common,
                    spec: dims(kv, 800, 720, 640, 560)?,
                    n: kv.get("n", 1000)?,
                    tau: positive("tau", kv.get("tau", 2.0)?)?,
                    sigma_beta_sq: positive("sigma_beta_sq", kv.get("sigma_beta_sq", 1.0)?)?,
                    kappa_over_gamma: positive("kappa_over_gamma", kv.get("kappa_over_gamma", 5.0)?)?,
                    label_p,
                    theory_points: kv.get("theory_points", 99)?,
                    lambdas: lambda_grid(kv, 1e-3, 1e2, 25)?,
                })
            }
            ExperimentKind::RelationCurves => {
                let common = Common::read(kv, kind, 1)?;
                let mu_grid = kv.list("mu_grid", vec![1.0, 1.2, 1.5, 2.0])?;
                let ratio_grid = kv.list("ratio_grid", vec![0.2, 0.5, 1.0, 2.0, 5.0])?;
                if mu_grid.iter().any(|m| !(*m >= 1.0 && m.is_finite())) {
                    return Err(HarnessError::config("mu_grid entries must be >= 1"));
                }
                if ratio_grid.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return Err(HarnessError::config("ratio_grid entries must be positive"));
                }
                ExperimentConfig::RelationCurves(RelationCurvesConfig {
                    common,
                    mu_grid,
                    ratio_grid,
                    risk_points: kv.get("risk_points", 99)?,
                })
            }
            ExperimentKind::Denoising => {
                let common = Common::read(kv, kind, 1)?;
                let (d, d_p, d_q) = (kv.get("d", 200)?, kv.get("d_p", 40)?, kv.get("d_q", 40)?);
                let overlaps = kv.list("overlaps", vec![0.0, 0.5, 1.0])?;
                for a in &overlaps {
                    if !(0.0..=1.0).contains(a) {
                        return Err(HarnessError::config("overlaps must lie in [0, 1]"));
                    }
                    let d_pq = (a * d_q as f64).round() as usize;
                    SubspacePairSpec::new(d, d_p, d_q, d_pq).map_err(|e| HarnessError::config(e.to_string()))?;
                }
                let snrs = kv.list("snrs", vec![1.0, 100.0])?;
                for s in &snrs {
                    positive("snr", *s)?;
                }
                ExperimentConfig::Denoise(DenoiseConfig {
                    common,
                    d,
                    d_p,
                    d_q,
                    overlaps,
                    snrs,
                    lambdas: lambda_grid(kv, 1e-3, 1e2, 50)?,
                })
            }
            ExperimentKind::Counterexample => {
                let common = Common::read(kv, kind, 1)?;
                let lo = positive("a_min", kv.get("a_min", 0.05)?)?;
                let hi = positive("a_max", kv.get("a_max", 50.0)?)?;
                let points: usize = kv.get("a_points", 40)?;
                if hi < lo || points < 2 {
                    return Err(HarnessError::config("need a_min <= a_max and a_points >= 2"));
                }
                let mc_draws = kv.get("mc_draws", 1_000_000)?;
                if mc_draws < 100 {
                    return Err(HarnessError::config("mc_draws must be >= 100"));
                }
                let cfg = CounterexampleConfig {
                    common,
                    r_p: positive("r_p", kv.get("r_p", 0.9)?)?,
                    sigma_beta_sq: positive("sigma_beta_sq", kv.get("sigma_beta_sq", 1.0)?)?,
                    gamma: positive("gamma", kv.get("gamma", 1.0)?)?,
                    kappa: positive("kappa", kv.get("kappa", 1.0)?)?,
                    mu: kv.get("mu", 1.2)?,
                    b: positive("b", kv.get("b", 1.0)?)?,
                    c: positive("c", kv.get("c", 1.0)?)?,
                    a_grid: logspace(lo, hi, points),
                    mc_draws,
                };
                if cfg.r_p > 1.0 || cfg.mu < 1.0 {
                    return Err(HarnessError::config("need r_p <= 1 and mu >= 1"));
                }
                ExperimentConfig::Counterexample(cfg)
            }
            ExperimentKind::CsValidation => {
                let common = Common::read(kv, kind, 20)?;
                let spec = dims(kv, 200, 40, 40, 20)?;
                let n_grid = kv.usize_list("n_grid", vec![500, 2000, 8000])?;
                if n_grid.is_empty() || n_grid.iter().any(|n| *n < spec.d_p.max(spec.d_q)) {
                    return Err(HarnessError::config("every n in n_grid must be >= max(d_p, d_q)"));
                }
                ExperimentConfig::Cs(CsConfig {
                    common,
                    spec,
                    snr: positive("snr", kv.get("snr", 100.0)?)?,
                    lambda: nonnegative("lambda", kv.get("lambda", 10.0)?)?,
                    n_grid,
                })
            }
            ExperimentKind::SubspaceAnalyze => {
                let common = Common::read(kv, kind, 1)?;
                let input_p = kv.path("input_p")?.ok_or_else(|| HarnessError::config("input_p is required"))?;
                let input_q = kv.path("input_q")?.ok_or_else(|| HarnessError::config("input_q is required"))?;
                let k_max: usize = kv.get("k_max", 0)?;
                ExperimentConfig::SubspaceAnalyze(SubspaceAnalyzeConfig {
                    common,
                    input_p,
                    input_q,
                    k_max: (k_max > 0).then_some(k_max),
                })
            }
        };
        std::mem::take(kv).finish()?;
        Ok(cfg)
    }

    /// Defaults for `kind`, as if read from an empty file.
    pub fn defaults(kind: ExperimentKind) -> Result<Self> {
        Self::from_keys(kind, KeyValues::default())
    }

    pub fn common(&self) -> &Common {
        match self {
            ExperimentConfig::Regression(c) => &c.common,
            ExperimentConfig::Classification(c) => &c.common,
            ExperimentConfig::RelationCurves(c) => &c.common,
            ExperimentConfig::Denoise(c) => &c.common,
            ExperimentConfig::Counterexample(c) => &c.common,
            ExperimentConfig::Cs(c) => &c.common,
            ExperimentConfig::SubspaceAnalyze(c) => &c.common,
        }
    }

    pub fn common_mut(&mut self) -> &mut Common {
        match self {
            ExperimentConfig::Regression(c) => &mut c.common,
            ExperimentConfig::Classification(c) => &mut c.common,
            ExperimentConfig::RelationCurves(c) => &mut c.common,
            ExperimentConfig::Denoise(c) => &mut c.common,
            ExperimentConfig::Counterexample(c) => &mut c.common,
            ExperimentConfig::Cs(c) => &mut c.common,
            ExperimentConfig::SubspaceAnalyze(c) => &mut c.common,
        }
    }
}
