//! Sample, fit and score end to end against the limiting relations.

use riskshift_core::datagen::{sample_beta, sample_dataset, LabelKind};
use riskshift_core::estimators::{erm_path, Loss, RidgePath};
use riskshift_core::risk::{decision_cov, misclassification_risk, population_mc_risk, squared_risk, MetricKind};
use riskshift_core::shiftmodel::{
    realized_sigma_beta_sq, shift_parameters, subspace_shift_model, task_dependent_model, Distribution,
};
use riskshift_core::subspace::SubspacePairSpec;
use riskshift_core::theory::{classification_relation, regression_relation_unchecked};
use riskshift_core::Seed;

#[test]
fn ridge_regression_follows_affine_relation() {
    let spec = SubspacePairSpec::new(400, 360, 320, 280).unwrap();
    let pair = subspace_shift_model(spec, 2.0, Seed(1)).unwrap();
    let gt = sample_beta(400, 1.0, Seed(2)).unwrap();
    let data = sample_dataset(&pair, Distribution::P, &gt, LabelKind::LinearGaussian(0.2f64.sqrt()), 500, Seed(3)).unwrap();
    let shift = shift_parameters(&pair, &gt.beta_star, realized_sigma_beta_sq(&pair, &gt.beta_star).unwrap()).unwrap();
    let path = RidgePath::new(&data).unwrap();
    for lambda in [1e-3, 0.1, 1.0, 10.0, 100.0] {
        let b = path.fit(lambda).unwrap().beta_hat;
        let rp = squared_risk(&decision_cov(&gt.beta_star, &b, &pair, Distribution::P).unwrap());
        let rq = squared_risk(&decision_cov(&gt.beta_star, &b, &pair, Distribution::Q).unwrap());
        assert!((rq - regression_relation_unchecked(rp, &shift).unwrap()).abs() < 0.08, "λ = {lambda}");
    }
}

#[test]
fn classifiers_follow_sec_relation() {
    let spec = SubspacePairSpec::new(300, 270, 240, 210).unwrap();
    let base = subspace_shift_model(spec, 2.0, Seed(4)).unwrap();
    let gt = sample_beta(300, 1.0, Seed(5)).unwrap();
    let sigma = realized_sigma_beta_sq(&base, &gt.beta_star).unwrap();
    let g0 = shift_parameters(&base, &gt.beta_star, sigma).unwrap().gamma;
    let pair = task_dependent_model(&base, &gt.beta_star, 3.0, g0).unwrap();
    let shift = shift_parameters(&pair, &gt.beta_star, sigma).unwrap();
    let data = sample_dataset(&pair, Distribution::P, &gt, LabelKind::NoisySign(0.8), 400, Seed(6)).unwrap();
    let lambdas = [0.01, 0.1, 1.0, 10.0];
    for fit in erm_path(&data, Loss::Logistic, &lambdas).unwrap() {
        assert!(fit.converged);
        let rp = misclassification_risk(&decision_cov(&gt.beta_star, &fit.beta_hat, &pair, Distribution::P).unwrap()).unwrap();
        let rq = misclassification_risk(&decision_cov(&gt.beta_star, &fit.beta_hat, &pair, Distribution::Q).unwrap()).unwrap();
        assert!((rq - classification_relation(rp, &shift).unwrap()).abs() < 0.03, "{rp} {rq}");
    }
}

#[test]
fn closed_form_risk_matches_sampling() {
    let spec = SubspacePairSpec::new(40, 30, 25, 20).unwrap();
    let pair = subspace_shift_model(spec, 1.5, Seed(7)).unwrap();
    let gt = sample_beta(40, 1.0, Seed(8)).unwrap();
    let b_hat = sample_beta(40, 0.5, Seed(9)).unwrap().beta_star + &gt.beta_star;
    for which in [Distribution::P, Distribution::Q] {
        let exact = misclassification_risk(&decision_cov(&gt.beta_star, &b_hat, &pair, which).unwrap()).unwrap();
        let mc = population_mc_risk(&gt.beta_star, &b_hat, &pair, which, MetricKind::Misclassification, 200_000, Seed(10))
            .unwrap();
        assert!((mc.estimate - exact).abs() <= 4.0 * mc.std_error, "{mc:?} vs {exact}");
    }
}
