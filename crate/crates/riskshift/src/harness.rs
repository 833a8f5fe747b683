//! Experiment runners.
//!
//! RNG streams: with `m = Seed(master_seed)`, grid point `j` of trial `t`
//! draws from `m.derive2(t, j)` and trial-level objects (covariance
//! eigenbasis, `β*`, covariates, labels) draw from
//! `m.derive2(t, TRIAL_COMPONENT_BASE + k)` for a fixed component index `k`.
//! Results are therefore independent of how rayon schedules the work, and
//! rows are sorted by `(trial, model, λ)` before they are written.

use rayon::prelude::*;
use riskshift_core::datagen::{label, sample_beta, sample_covariates, sample_dataset, Dataset, LabelKind};
use riskshift_core::estimators::{erm_path, Loss, RidgePath};
use riskshift_core::inverse::{
    cs_operator, cs_risks, denoise_risks, gaussian_measurement, inner_product_preservation_stats, InverseProblem,
};
use riskshift_core::linalg::{Mat, Vector};
use riskshift_core::risk::{decision_cov, mc_metric_risk, misclassification_risk, squared_risk, DecisionCov, MetricKind};
use riskshift_core::shiftmodel::{
    realized_sigma_beta_sq, shift_parameters, subspace_shift_model, task_dependent_model, Distribution,
    ShiftParameters,
};
use riskshift_core::subspace::{
    overlapping_pair, principal_angles, subspace_similarity, PrincipalComponents, SubspacePairSpec,
};
use riskshift_core::theory::{
    asymptotic_decision_cov, classification_relation, regression_relation_unchecked, AsymParams,
};
use riskshift_core::Seed;

use crate::config::{
    ClassificationConfig, CounterexampleConfig, CsConfig, DenoiseConfig, ExperimentConfig, RegressionConfig,
    RelationCurvesConfig, ShiftKind, SubspaceAnalyzeConfig,
};
use crate::error::{HarnessError, Result};
use crate::table::{read_matrix, Cell, Table};

/// Offset of trial-level component streams; see the module docs.
pub const TRIAL_COMPONENT_BASE: u64 = 1 << 40;

pub fn grid_seed(master: u64, trial: usize, j: usize) -> Seed {
    Seed(master).derive2(trial as u64, j as u64)
}

pub fn trial_component(master: u64, trial: usize, k: u64) -> Seed {
    Seed(master).derive2(trial as u64, TRIAL_COMPONENT_BASE + k)
}

/// One point of a `λ` sweep (or of a theory curve, which has `λ = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub trial: usize,
    pub model: String,
    pub lambda: f64,
    pub risk_p: f64,
    pub risk_q: f64,
    pub risk_q_pred: f64,
    pub extra: Vec<(&'static str, f64)>,
}

fn sort_sweep(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        a.trial
            .cmp(&b.trial)
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.lambda.total_cmp(&b.lambda))
    });
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut header: Vec<String> =
        ["trial", "model", "lambda", "risk_p", "risk_q", "risk_q_pred"].iter().map(|s| s.to_string()).collect();
    if let Some(first) = rows.first() {
        header.extend(first.extra.iter().map(|(k, _)| k.to_string()));
    }
    let mut t = Table::new(header);
    for r in rows {
        let mut cells: Vec<Cell> = vec![
            r.trial.into(),
            r.model.as_str().into(),
            r.lambda.into(),
            r.risk_p.into(),
            r.risk_q.into(),
            r.risk_q_pred.into(),
        ];
        cells.extend(r.extra.iter().map(|(_, v)| Cell::Float(*v)));
        t.push(cells);
    }
    t
}

fn shift_extras(shift: &ShiftParameters) -> Vec<(&'static str, f64)> {
    vec![
        ("gamma", shift.gamma),
        ("mu", shift.mu),
        ("kappa", shift.kappa),
        ("sigma_beta_sq_hat", shift.sigma_beta_sq),
    ]
}

/// Ridge regression on `y = xᵀβ* + σξ` with squared-error risks on `P` and
/// `Q` and the predicted `R_Q` from the affine relation.
pub fn run_regression_sweep(cfg: &RegressionConfig) -> Result<Vec<SweepRow>> {
    let trials: Vec<Vec<SweepRow>> =
        (0..cfg.common.trials).into_par_iter().map(|t| regression_trial(cfg, t)).collect::<Result<_>>()?;
    let mut rows: Vec<SweepRow> = trials.into_iter().flatten().collect();
    sort_sweep(&mut rows);
    Ok(rows)
}

fn regression_trial(cfg: &RegressionConfig, t: usize) -> Result<Vec<SweepRow>> {
    let seed = |k| trial_component(cfg.common.master_seed, t, k);
    let mut pair = subspace_shift_model(cfg.spec, cfg.tau, seed(0))?;
    if cfg.shift == ShiftKind::None {
        pair = pair.without_shift();
    }
    let gt = sample_beta(cfg.spec.d, cfg.sigma_beta_sq, seed(1))?;
    let noise = LabelKind::LinearGaussian(cfg.noise_var.sqrt());
    let data = sample_dataset(&pair, Distribution::P, &gt, noise, cfg.n, seed(2))?;
    let sigma_hat = realized_sigma_beta_sq(&pair, &gt.beta_star)?;
    let shift = shift_parameters(&pair, &gt.beta_star, sigma_hat)?;
    let path = RidgePath::new(&data)?;
    cfg.lambdas
        .iter()
        .map(|&lambda| {
            let fit = path.fit(lambda)?;
            let risk_p = squared_risk(&decision_cov(&gt.beta_star, &fit.beta_hat, &pair, Distribution::P)?);
            let risk_q = squared_risk(&decision_cov(&gt.beta_star, &fit.beta_hat, &pair, Distribution::Q)?);
            Ok(SweepRow {
                trial: t,
                model: "ridge".into(),
                lambda,
                risk_p,
                risk_q,
                risk_q_pred: regression_relation_unchecked(risk_p, &shift)?,
                extra: shift_extras(&shift),
            })
        })
        .collect()
}

/// Ridge on noisy signs, logistic on noisy signs and ridge on noiseless
/// linear labels under a task-dependent shift with the configured `κ/γ`,
/// scored by misclassification risk, plus the predicted curve.
pub fn run_classification_sweep(cfg: &ClassificationConfig) -> Result<Vec<SweepRow>> {
    let trials: Vec<Vec<SweepRow>> = (0..cfg.common.trials)
        .into_par_iter()
        .map(|t| classification_trial(cfg, t))
        .collect::<Result<_>>()?;
    let mut rows: Vec<SweepRow> = trials.into_iter().flatten().collect();
    sort_sweep(&mut rows);
    Ok(rows)
}

/// Model tags emitted by the classification sweep.
pub const CLASSIFICATION_MODELS: [&str; 3] = ["logistic", "ridge", "ridge_noiseless"];

fn classification_trial(cfg: &ClassificationConfig, t: usize) -> Result<Vec<SweepRow>> {
    let seed = |k| trial_component(cfg.common.master_seed, t, k);
    let base = subspace_shift_model(cfg.spec, cfg.tau, seed(0))?;
    let gt = sample_beta(cfg.spec.d, cfg.sigma_beta_sq, seed(1))?;
    let beta = &gt.beta_star;
    let sigma_hat = realized_sigma_beta_sq(&base, beta)?;
    let gamma0 = shift_parameters(&base, beta, sigma_hat)?.gamma;
    let pair = task_dependent_model(&base, beta, cfg.kappa_over_gamma, gamma0)?;
    let shift = shift_parameters(&pair, beta, sigma_hat)?;

    let x = sample_covariates(&pair, Distribution::P, cfg.n, seed(2))?;
    let noisy = Dataset::new(x.clone(), label(&x, &gt, LabelKind::NoisySign(cfg.label_p), seed(3))?)?;
    let clean = Dataset::new(x.clone(), label(&x, &gt, LabelKind::NoiselessLinear, seed(4))?)?;

    let score = |model: &str, lambda: f64, beta_hat: &Vector, iterations: usize, converged: bool| -> Result<SweepRow> {
        let risk_p = misclassification_risk(&decision_cov(beta, beta_hat, &pair, Distribution::P)?)?;
        let risk_q = misclassification_risk(&decision_cov(beta, beta_hat, &pair, Distribution::Q)?)?;
        let mut extra = shift_extras(&shift);
        extra.push(("iterations", iterations as f64));
        extra.push(("converged", if converged { 1.0 } else { 0.0 }));
        Ok(SweepRow {
            trial: t,
            model: model.into(),
            lambda,
            risk_p,
            risk_q,
            risk_q_pred: classification_relation(risk_p, &shift)?,
            extra,
        })
    };

    let ridge_rows = |data: &Dataset, model: &str| -> Result<Vec<SweepRow>> {
        let path = RidgePath::new(data)?;
        cfg.lambdas
            .iter()
            .map(|&lambda| score(model, lambda, &path.fit(lambda)?.beta_hat, 1, true))
            .collect()
    };
    let (logistic, (ridge, ridge_clean)) = rayon::join(
        || -> Result<Vec<SweepRow>> {
            let fits = erm_path(&noisy, Loss::Logistic, &cfg.lambdas)?;
            fits.iter()
                .zip(&cfg.lambdas)
                .map(|(f, &lambda)| score("logistic", lambda, &f.beta_hat, f.iterations, f.converged))
                .collect()
        },
        || rayon::join(|| ridge_rows(&noisy, "ridge"), || ridge_rows(&clean, "ridge_noiseless")),
    );

    let mut rows = Vec::new();
    rows.extend(logistic?);
    rows.extend(ridge?);
    rows.extend(ridge_clean?);
    let points = cfg.theory_points;
    for k in 1..=points {
        let risk_p = k as f64 / (2.0 * (points + 1) as f64);
        let pred = classification_relation(risk_p, &shift)?;
        let mut extra = shift_extras(&shift);
        extra.push(("iterations", 0.0));
        extra.push(("converged", 1.0));
        rows.push(SweepRow { trial: t, model: "theory".into(), lambda: 0.0, risk_p, risk_q: pred, risk_q_pred: pred, extra });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    /// `mu` for curves at `κ/γ = 1`, `ratio` for curves at `μ = 1`.
    pub family: &'static str,
    pub mu: f64,
    pub kappa_over_gamma: f64,
    pub risk_p: f64,
    pub risk_q: f64,
}

pub fn run_relation_curves(cfg: &RelationCurvesConfig) -> Result<Vec<CurveRow>> {
    let mut curves: Vec<(&'static str, f64, f64)> = cfg.mu_grid.iter().map(|&m| ("mu", m, 1.0)).collect();
    curves.extend(cfg.ratio_grid.iter().map(|&r| ("ratio", 1.0, r)));
    let n = cfg.risk_points;
    let mut rows = Vec::new();
    for (family, mu, ratio) in curves {
        let shift = ShiftParameters::new(1.0, mu, ratio, 1.0, 1.0)?;
        for k in 1..=n {
            let risk_p = k as f64 / (2.0 * (n + 1) as f64);
            let risk_q = classification_relation(risk_p, &shift)?;
            rows.push(CurveRow { family, mu, kappa_over_gamma: ratio, risk_p, risk_q });
        }
    }
    Ok(rows)
}

pub fn curves_table(rows: &[CurveRow]) -> Table {
    let mut t = Table::new(["family", "mu", "kappa_over_gamma", "risk_p", "risk_q"]);
    for r in rows {
        t.push(vec![r.family.into(), r.mu.into(), r.kappa_over_gamma.into(), r.risk_p.into(), r.risk_q.into()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseRow {
    pub trial: usize,
    pub a_target: f64,
    pub snr: f64,
    pub lambda: f64,
    pub overlap: f64,
    pub alpha: f64,
    pub risk_p: f64,
    pub risk_q: f64,
    pub residual: f64,
}

pub fn run_denoising(cfg: &DenoiseConfig) -> Result<Vec<DenoiseRow>> {
    let mut rows = Vec::new();
    for t in 0..cfg.common.trials {
        for (ai, &a) in cfg.overlaps.iter().enumerate() {
            let d_pq = (a * cfg.d_q as f64).round() as usize;
            let spec = SubspacePairSpec::new(cfg.d, cfg.d_p, cfg.d_q, d_pq)?;
            let (u_p, u_q) = overlapping_pair(spec, trial_component(cfg.common.master_seed, t, ai as u64))?;
            for &snr in &cfg.snrs {
                for &lambda in &cfg.lambdas {
                    let problem = InverseProblem::new(u_p.clone(), u_q.clone(), 1.0 / snr, 1.0 / snr, lambda)?;
                    let r = denoise_risks(&problem)?;
                    let residual = problem.relation_residual(r.risk_p, r.risk_q, r.overlap);
                    rows.push(DenoiseRow {
                        trial: t,
                        a_target: a,
                        snr,
                        lambda,
                        overlap: r.overlap,
                        alpha: r.alpha,
                        risk_p: r.risk_p,
                        risk_q: r.risk_q,
                        residual,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn denoise_table(rows: &[DenoiseRow]) -> Table {
    let mut t = Table::new(["trial", "a_target", "snr", "lambda", "overlap", "alpha", "risk_p", "risk_q", "residual"]);
    for r in rows {
        t.push(vec![
            r.trial.into(),
            r.a_target.into(),
            r.snr.into(),
            r.lambda.into(),
            r.overlap.into(),
            r.alpha.into(),
            r.risk_p.into(),
            r.risk_q.into(),
            r.residual.into(),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleRow {
    pub trial: usize,
    pub a: f64,
    pub metric: MetricKind,
    pub risk_p: f64,
    pub se_p: f64,
    pub risk_q: f64,
    pub se_q: f64,
    /// Predicted `R_Q` (misclassification rows only).
    pub risk_q_pred: Option<f64>,
}

pub fn metric_name(m: MetricKind) -> &'static str {
    match m {
        MetricKind::SquaredError => "squared_error",
        MetricKind::Misclassification => "misclassification",
        MetricKind::LogisticMetric => "logistic",
        MetricKind::HingeMetric => "hinge",
    }
}

/// Limiting risks along the `a` grid at fixed `(b, c)`: misclassification in
/// closed form, logistic and hinge metrics by Monte Carlo.
pub fn run_counterexample(cfg: &CounterexampleConfig) -> Result<Vec<CounterexampleRow>> {
    let shift = ShiftParameters::new(cfg.gamma, cfg.mu, cfg.kappa, cfg.r_p, cfg.sigma_beta_sq)?;
    let mc_metrics = [MetricKind::LogisticMetric, MetricKind::HingeMetric];
    let mut tasks = Vec::new();
    for t in 0..cfg.common.trials {
        for j in 0..cfg.a_grid.len() {
            for (mi, m) in mc_metrics.iter().enumerate() {
                tasks.push((t, j, mi, *m));
            }
        }
    }
    let covs: Vec<(DecisionCov, DecisionCov)> = cfg
        .a_grid
        .iter()
        .map(|&a| asymptotic_decision_cov(&AsymParams::new(a, cfg.b, cfg.c)?, &shift))
        .collect::<std::result::Result<_, _>>()?;
    let mc: Vec<CounterexampleRow> = tasks
        .into_par_iter()
        .map(|(t, j, mi, metric)| {
            let base = grid_seed(cfg.common.master_seed, t, j).derive(mi as u64);
            let (cp, cq) = &covs[j];
            let p = mc_metric_risk(cp, metric, cfg.mc_draws, base.derive(0))?;
            let q = mc_metric_risk(cq, metric, cfg.mc_draws, base.derive(1))?;
            Ok(CounterexampleRow {
                trial: t,
                a: cfg.a_grid[j],
                metric,
                risk_p: p.estimate,
                se_p: p.std_error,
                risk_q: q.estimate,
                se_q: q.std_error,
                risk_q_pred: None,
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = mc;
    for t in 0..cfg.common.trials {
        for (j, (cp, cq)) in covs.iter().enumerate() {
            let risk_p = misclassification_risk(cp)?;
            rows.push(CounterexampleRow {
                trial: t,
                a: cfg.a_grid[j],
                metric: MetricKind::Misclassification,
                risk_p,
                se_p: 0.0,
                risk_q: misclassification_risk(cq)?,
                se_q: 0.0,
                risk_q_pred: Some(classification_relation(risk_p, &shift)?),
            });
        }
    }
    rows.sort_by(|x, y| {
        x.trial
            .cmp(&y.trial)
            .then_with(|| metric_name(x.metric).cmp(metric_name(y.metric)))
            .then_with(|| x.a.total_cmp(&y.a))
    });
    Ok(rows)
}

pub fn counterexample_table(rows: &[CounterexampleRow]) -> Table {
    let mut t = Table::new(["trial", "a", "metric", "risk_p", "se_p", "risk_q", "se_q", "risk_q_pred"]);
    for r in rows {
        t.push(vec![
            r.trial.into(),
            r.a.into(),
            metric_name(r.metric).into(),
            r.risk_p.into(),
            r.se_p.into(),
            r.risk_q.into(),
            r.se_q.into(),
            r.risk_q_pred.into(),
        ]);
    }
    t
}

/// Pairs `i < j` along a parametric curve where `R_P` and `R_Q` move in
/// opposite directions, each by more than four combined standard errors.
pub fn monotonicity_violations(points: &[(f64, f64, f64, f64)]) -> usize {
    let mut count = 0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let (pi, spi, qi, sqi) = points[i];
            let (pj, spj, qj, sqj) = points[j];
            let (dp, dq) = (pj - pi, qj - qi);
            let tol_p = 4.0 * (spi * spi + spj * spj).sqrt();
            let tol_q = 4.0 * (sqi * sqi + sqj * sqj).sqrt();
            if dp * dq < 0.0 && dp.abs() > tol_p && dq.abs() > tol_q {
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsRow {
    pub trial: usize,
    pub n: usize,
    /// `gaussian`, or `identity` for the `A = I` control.
    pub measurement: &'static str,
    pub overlap: f64,
    pub risk_p: f64,
    pub risk_q: f64,
    pub residual: f64,
    pub ip_deviation: f64,
}

pub fn run_cs_validation(cfg: &CsConfig) -> Result<Vec<CsRow>> {
    let s2 = 1.0 / cfg.snr;
    let trials: Vec<Vec<CsRow>> = (0..cfg.common.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<CsRow>> {
            let (u_p, u_q) = overlapping_pair(cfg.spec, trial_component(cfg.common.master_seed, t, 0))?;
            let problem = InverseProblem::new(u_p.clone(), u_q.clone(), s2, s2, cfg.lambda)?;
            let vectors: Vec<Vector> = u_p
                .columns()
                .column_iter()
                .chain(u_q.columns().column_iter())
                .map(|c| c.into_owned())
                .collect();
            let mut measurements: Vec<(usize, &'static str, Mat)> = Vec::new();
            for (j, &n) in cfg.n_grid.iter().enumerate() {
                let a = gaussian_measurement(n, cfg.spec.d, grid_seed(cfg.common.master_seed, t, j))?;
                measurements.push((n, "gaussian", a));
            }
            measurements.push((cfg.spec.d, "identity", Mat::identity(cfg.spec.d, cfg.spec.d)));
            measurements
                .into_iter()
                .map(|(n, measurement, a)| {
                    let op = cs_operator(&a, &problem)?;
                    let r = cs_risks(&op, &problem)?;
                    let residual = problem.relation_residual(r.risk_p, r.risk_q, r.overlap);
                    Ok(CsRow {
                        trial: t,
                        n,
                        measurement,
                        overlap: r.overlap,
                        risk_p: r.risk_p,
                        risk_q: r.risk_q,
                        residual,
                        ip_deviation: inner_product_preservation_stats(&a, &vectors)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(trials.into_iter().flatten().collect())
}

pub fn cs_table(rows: &[CsRow]) -> Table {
    let mut t = Table::new(["trial", "n", "measurement", "overlap", "risk_p", "risk_q", "residual", "ip_deviation"]);
    for r in rows {
        t.push(vec![
            r.trial.into(),
            r.n.into(),
            r.measurement.into(),
            r.overlap.into(),
            r.risk_p.into(),
            r.risk_q.into(),
            r.residual.into(),
            r.ip_deviation.into(),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceRow {
    pub k: usize,
    pub sv_p: f64,
    pub sv_q: f64,
    pub similarity: f64,
}

pub fn analyze_subspaces(x_p: &Mat, x_q: &Mat, k_max: Option<usize>) -> Result<Vec<SubspaceRow>> {
    if x_p.ncols() != x_q.ncols() {
        return Err(HarnessError::config(format!(
            "inputs have {} and {} features",
            x_p.ncols(),
            x_q.ncols()
        )));
    }
    let pc_p = PrincipalComponents::from_samples(x_p)?;
    let pc_q = PrincipalComponents::from_samples(x_q)?;
    let available = pc_p.singular_values.len().min(pc_q.singular_values.len());
    let k_max = k_max.unwrap_or(available);
    if k_max > available {
        return Err(HarnessError::config(format!("k_max = {k_max} exceeds the {available} available components")));
    }
    (1..=k_max)
        .map(|k| {
            let theta = principal_angles(&pc_p.top(k)?, &pc_q.top(k)?)?;
            Ok(SubspaceRow {
                k,
                sv_p: pc_p.singular_values[k - 1],
                sv_q: pc_q.singular_values[k - 1],
                similarity: subspace_similarity(&theta, k)?,
            })
        })
        .collect()
}

pub fn run_subspace_analyze(cfg: &SubspaceAnalyzeConfig) -> Result<Vec<SubspaceRow>> {
    let x_p = read_matrix(&cfg.input_p)?;
    let x_q = read_matrix(&cfg.input_q)?;
    analyze_subspaces(&x_p, &x_q, cfg.k_max)
}

pub fn subspace_table(rows: &[SubspaceRow]) -> Table {
    let mut t = Table::new(["k", "sv_p", "sv_q", "similarity"]);
    for r in rows {
        t.push(vec![r.k.into(), r.sv_p.into(), r.sv_q.into(), r.similarity.into()]);
    }
    t
}

/// Runs any experiment and renders its CSV table.
pub fn run(cfg: &ExperimentConfig) -> Result<Table> {
    Ok(match cfg {
        ExperimentConfig::Regression(c) => sweep_table(&run_regression_sweep(c)?),
        ExperimentConfig::Classification(c) => sweep_table(&run_classification_sweep(c)?),
        ExperimentConfig::RelationCurves(c) => curves_table(&run_relation_curves(c)?),
        ExperimentConfig::Denoise(c) => denoise_table(&run_denoising(c)?),
        ExperimentConfig::Counterexample(c) => counterexample_table(&run_counterexample(c)?),
        ExperimentConfig::Cs(c) => cs_table(&run_cs_validation(c)?),
        ExperimentConfig::SubspaceAnalyze(c) => subspace_table(&run_subspace_analyze(c)?),
    })
}
