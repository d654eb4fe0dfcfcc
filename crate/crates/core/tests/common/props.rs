//! Property checks shared by the property suite and the acceptance run.

use iqlearn::conditional_joint::JointSample;
use iqlearn::residual_cdf::{fit_empirical, fit_hetero_scale, fit_normal_scale, ResidualCdf, ScaleContext, ScaleTerm};
use iqlearn::simgen::{default_config, run_experiment, Estimator, ExperimentConfig, Variant};
use iqlearn::tiq::ArmSamples;
use iqlearn::{conditional_joint::McConfig, sgn, EstimatorConfig, QiqConfig, Treatment};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub fn residuals() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 2..120)
}

pub fn probes() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-200.0f64..200.0, 1..40)
}

fn contexts(res: &[f64]) -> Vec<ScaleContext> {
    res.iter()
        .enumerate()
        .map(|(i, e)| ScaleContext {
            m: 0.1 * i as f64 - 2.0,
            c: 0.3 * e.sin(),
            a2: if i % 2 == 0 { Treatment::Plus } else { Treatment::Minus },
        })
        .collect()
}

/// Every variant that fits is a distribution function: values in `[0, 1]`,
/// nondecreasing, with limits 0 and 1.
pub fn cdf_is_valid(res: &[f64], probes: &[f64], ctx: ScaleContext) -> Result<(), TestCaseError> {
    let mut cdfs: Vec<ResidualCdf> = Vec::new();
    cdfs.extend(fit_normal_scale(res).ok());
    cdfs.extend(fit_empirical(res).ok());
    cdfs.extend(fit_hetero_scale(res, &contexts(res), &[ScaleTerm::Intercept, ScaleTerm::FittedMean]).ok());
    cdfs.extend(
        fit_hetero_scale(
            res,
            &contexts(res),
            &[ScaleTerm::Intercept, ScaleTerm::A2, ScaleTerm::C],
        )
        .ok(),
    );
    let varies = res.iter().any(|e| *e != res[0]);
    prop_assert_eq!(fit_normal_scale(res).is_ok(), varies);
    prop_assert!(fit_empirical(res).is_ok());
    let mut zs = probes.to_vec();
    zs.extend_from_slice(res);
    zs.sort_by(f64::total_cmp);
    for cdf in &cdfs {
        let vals: Vec<f64> = zs.iter().map(|&z| cdf.cdf_in(z, &ctx)).collect();
        for v in &vals {
            prop_assert!((0.0..=1.0).contains(v), "{} gave {v}", cdf.variant_name());
        }
        for w in vals.windows(2) {
            prop_assert!(w[0] <= w[1], "{} decreases: {w:?}", cdf.variant_name());
        }
        prop_assert_eq!(cdf.cdf_in(f64::NEG_INFINITY, &ctx), 0.0);
        prop_assert_eq!(cdf.cdf_in(f64::INFINITY, &ctx), 1.0);
    }
    Ok(())
}

/// Identical arms give a zero contrast and the `+1` action; `sgn` maps zero
/// of either sign to `+1`.
pub fn ties_resolve_to_plus(u: Vec<f64>, v: Vec<f64>, sigma: f64, y: f64, x: f64) -> Result<(), TestCaseError> {
    let s = JointSample { u, v };
    let arms = ArmSamples {
        minus: s.clone(),
        plus: s,
    };
    let cdf = ResidualCdf::NormalScale { sigma };
    let a = arms.tiq_contrast(&cdf, y);
    prop_assert_eq!(a.d, 0.0);
    prop_assert_eq!(a.decision(), Treatment::Plus);
    prop_assert_eq!(arms.tiq_contrast(&cdf, y), a);
    prop_assert_eq!(arms.mean_contrast().decision(), Treatment::Plus);
    prop_assert_eq!(sgn(0.0).unwrap(), Treatment::Plus);
    prop_assert_eq!(sgn(-0.0).unwrap(), Treatment::Plus);
    let expect = if x >= 0.0 { Treatment::Plus } else { Treatment::Minus };
    prop_assert_eq!(sgn(x).unwrap(), expect);
    prop_assert!(sgn(f64::NAN).is_err());
    Ok(())
}

pub fn small_experiment(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        generative: default_config(Variant::Gaussian),
        c_values: vec![0.0, 1.0],
        replications: 2,
        n_train: 80,
        n_test: 300,
        estimators: Estimator::ALL.to_vec(),
        lambdas: vec![2.0],
        taus: vec![0.25],
        estimator: EstimatorConfig {
            mc: McConfig { draws: 150, seed: 0 },
            ..EstimatorConfig::default()
        },
        qiq: QiqConfig::default(),
        seed,
    }
}

/// Serialized experiment output under a pool of `threads` workers.
pub fn experiment_bytes(exp: &ExperimentConfig, threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let res = pool.install(|| run_experiment(exp)).unwrap();
    serde_json::to_string(&res).unwrap()
}

/// Reruns match byte for byte on one and several worker threads.
pub fn reruns_identical(seed: u64) -> Result<(), TestCaseError> {
    let exp = small_experiment(seed);
    let one = experiment_bytes(&exp, 1);
    prop_assert_eq!(&one, &experiment_bytes(&exp, 1));
    prop_assert_eq!(&one, &experiment_bytes(&exp, 3));
    Ok(())
}
