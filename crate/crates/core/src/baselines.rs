//! Comparators: mean-optimal Q-learning and IQ-learning, and Q-learning on the
//! binary outcome `1{Y > λ}` with a logistic second stage.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conditional_joint::{check_stage1_design, stage1_matrix};
use crate::domain::{dot, ContrastDesign, Dataset, FeatureMap, History1, History2, Treatment};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::regime::{LinearRegime, LinearRule, Regime};
use crate::stage2::{default_design, design_matrix, fit_stage2, FittedStage2};
use crate::tiq::{fit_components, Components, EstimatorConfig};

const LOGISTIC_MAX_ITERS: usize = 50;
const LOGISTIC_GRADIENT_TOL: f64 = 1e-8;
const SEPARATION_NORM: f64 = 1e3;
const MAX_HALVINGS: usize = 30;
const PERFECT_FIT_TOL: f64 = 1e-6;

/// `(1, x1')'` for both the main effect and the `a1` interaction.
pub fn default_stage1_design(p1: usize) -> ContrastDesign {
    ContrastDesign::symmetric(FeatureMap::baseline(p1))
}

/// Stage-1 least squares of `pseudo` on `main(h1) ++ a1 contrast(h1)`.
fn stage1_regression(data: &Dataset, design: &ContrastDesign, pseudo: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_stage1_design(design, data.p1())?;
    let x = stage1_matrix(data, design);
    let beta = least_squares(&x, pseudo, &design.column_names("a1"))?;
    let (b0, b1) = beta.split_at(design.main.len());
    Ok((b0.to_vec(), b1.to_vec()))
}

/// Mean-optimal Q-learning with linear working models at both stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QLearningModel {
    pub stage2: FittedStage2,
    pub stage1_design: ContrastDesign,
    pub beta10: Vec<f64>,
    pub beta11: Vec<f64>,
}

impl QLearningModel {
    pub fn regime(&self) -> LinearRegime {
        LinearRegime {
            stage1: LinearRule {
                map: self.stage1_design.contrast.clone(),
                coef: self.beta11.clone(),
            },
            stage2: self.stage2.pi2_star(),
        }
    }
}

impl Regime for QLearningModel {
    fn stage1(&self, h1: &History1<'_>) -> Treatment {
        Treatment::from_score(dot(&self.stage1_design.contrast.eval1(h1), &self.beta11))
    }

    fn stage2(&self, h2: &History2<'_>) -> Treatment {
        let (_, c) = self.stage2.predict(h2);
        Treatment::from_score(c)
    }
}

pub fn fit_qlearning(
    data: &Dataset,
    stage2_design: Option<&ContrastDesign>,
    stage1_design: Option<&ContrastDesign>,
) -> Result<QLearningModel> {
    data.require_both_arms()?;
    let d2 = stage2_design.cloned().unwrap_or_else(|| default_design(data.p2()));
    let d1 = stage1_design
        .cloned()
        .unwrap_or_else(|| default_stage1_design(data.p1()));
    let stage2 = fit_stage2(data, &d2)?;
    let (m, c) = stage2.predict_all(data);
    let pseudo: Vec<f64> = m.iter().zip(&c).map(|(m, c)| m + c.abs()).collect();
    let (beta10, beta11) = stage1_regression(data, &d1, &pseudo)?;
    Ok(QLearningModel {
        stage2,
        stage1_design: d1,
        beta10,
        beta11,
    })
}

/// Mean-optimal interactive Q-learning: the first stage minimizes
/// `∫(-u-|v|) dĜ(u, v | h1, a1)`, computed on the shared draws.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IqLearningModel {
    pub components: Arc<Components>,
    pi2: LinearRule,
}

impl IqLearningModel {
    pub fn new(components: Arc<Components>) -> Self {
        let pi2 = components.pi2_star();
        IqLearningModel { components, pi2 }
    }
}

impl Regime for IqLearningModel {
    fn stage1(&self, h1: &History1<'_>) -> Treatment {
        self.components.arm_samples(h1).mean_contrast().decision()
    }

    fn stage2(&self, h2: &History2<'_>) -> Treatment {
        self.pi2.decide2(h2)
    }
}

pub fn fit_iqlearning(data: &Dataset, config: &EstimatorConfig) -> Result<IqLearningModel> {
    Ok(IqLearningModel::new(Arc::new(fit_components(data, config)?)))
}

/// Result of a logistic regression fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coef: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_likelihood(x: &Matrix, z: &[f64], beta: &[f64]) -> f64 {
    (0..x.rows())
        .map(|i| {
            let eta = dot(x.row(i), beta);
            z[i] * eta - softplus(eta)
        })
        .sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton–Raphson (IRLS) for logistic regression with step halving.
/// `z` holds 0/1 responses.
pub fn fit_logistic(x: &Matrix, z: &[f64], names: &[String]) -> Result<LogisticFit> {
    let p = x.cols();
    let mut beta = vec![0.0; p];
    let mut ll = log_likelihood(x, z, &beta);
    for iter in 0..=LOGISTIC_MAX_ITERS {
        let prob: Vec<f64> = (0..x.rows()).map(|i| expit(dot(x.row(i), &beta))).collect();
        let resid: Vec<f64> = z.iter().zip(&prob).map(|(z, p)| z - p).collect();
        let grad = x.tr_mul_vec(&resid);
        let gnorm = norm(&grad);
        if gnorm < LOGISTIC_GRADIENT_TOL {
            // A perfect fit only converges because the likelihood flattens out
            // as the coefficients run off to infinity.
            if resid.iter().all(|r| r.abs() < PERFECT_FIT_TOL) {
                return Err(Error::Separation { norm: norm(&beta) });
            }
            return Ok(LogisticFit {
                coef: beta,
                iterations: iter,
                gradient_norm: gnorm,
            });
        }
        if iter == LOGISTIC_MAX_ITERS {
            return Err(Error::NoConvergence {
                iterations: iter,
                gradient_norm: gnorm,
            });
        }
        // Newton step solves (X'WX) δ = X'(z - p), i.e. weighted least squares
        // of (z - p)/w on X with row weights √w.
        let w: Vec<f64> = prob.iter().map(|p| (p * (1.0 - p)).max(1e-12)).collect();
        let sw: Vec<f64> = w.iter().map(|w| w.sqrt()).collect();
        let xw = x.scale_rows(&sw);
        let target: Vec<f64> = resid.iter().zip(&sw).map(|(r, s)| r / s).collect();
        let step = least_squares(&xw, &target, names)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let cand_ll = log_likelihood(x, z, &cand);
            if cand_ll >= ll - 1e-12 * ll.abs() {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let bnorm = norm(&beta);
        if bnorm > SEPARATION_NORM || !bnorm.is_finite() {
            return Err(Error::Separation { norm: bnorm });
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: iter + 1,
                gradient_norm: gnorm,
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Q-learning on `Z = 1{Y > λ}`: logistic second stage, then least squares of
/// the maximized linear predictor `m* + |c*|` at the first stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryQModel {
    pub lambda: f64,
    pub stage2_design: ContrastDesign,
    /// Logistic coefficients of the main part `m*`.
    pub m_coef: Vec<f64>,
    /// Logistic coefficients of the interaction part `c*`.
    pub c_coef: Vec<f64>,
    pub stage1_design: ContrastDesign,
    pub beta10: Vec<f64>,
    pub beta11: Vec<f64>,
    pub logistic_iterations: usize,
}

impl BinaryQModel {
    pub fn regime(&self) -> LinearRegime {
        LinearRegime {
            stage1: LinearRule {
                map: self.stage1_design.contrast.clone(),
                coef: self.beta11.clone(),
            },
            stage2: LinearRule {
                map: self.stage2_design.contrast.clone(),
                coef: self.c_coef.clone(),
            },
        }
    }
}

impl Regime for BinaryQModel {
    fn stage1(&self, h1: &History1<'_>) -> Treatment {
        Treatment::from_score(dot(&self.stage1_design.contrast.eval1(h1), &self.beta11))
    }

    fn stage2(&self, h2: &History2<'_>) -> Treatment {
        Treatment::from_score(dot(&self.stage2_design.contrast.eval2(h2), &self.c_coef))
    }
}

pub fn fit_binary_q(
    data: &Dataset,
    lambda: f64,
    stage2_design: Option<&ContrastDesign>,
    stage1_design: Option<&ContrastDesign>,
) -> Result<BinaryQModel> {
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "threshold must be finite, got {lambda}"
        )));
    }
    data.require_both_arms()?;
    let z: Vec<f64> = data
        .rows()
        .iter()
        .map(|r| if r.y > lambda { 1.0 } else { 0.0 })
        .collect();
    let ones = z.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == z.len() {
        return Err(Error::SingleClass { threshold: lambda });
    }
    let d2 = stage2_design.cloned().unwrap_or_else(|| default_design(data.p2()));
    d2.main.check_dims(data.p1(), data.p2())?;
    d2.contrast.check_dims(data.p1(), data.p2())?;
    let d1 = stage1_design
        .cloned()
        .unwrap_or_else(|| default_stage1_design(data.p1()));
    let x = design_matrix(data, &d2);
    let fit = fit_logistic(&x, &z, &d2.column_names("a2"))?;
    let (m_coef, c_coef) = fit.coef.split_at(d2.main.len());
    let pseudo: Vec<f64> = data
        .rows()
        .iter()
        .map(|r| {
            let h2 = r.history2();
            dot(&d2.main.eval2(&h2), m_coef) + dot(&d2.contrast.eval2(&h2), c_coef).abs()
        })
        .collect();
    let (beta10, beta11) = stage1_regression(data, &d1, &pseudo)?;
    Ok(BinaryQModel {
        lambda,
        stage2_design: d2,
        m_coef: m_coef.to_vec(),
        c_coef: c_coef.to_vec(),
        stage1_design: d1,
        beta10,
        beta11,
        logistic_iterations: fit.iterations,
    })
}
