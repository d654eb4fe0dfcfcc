//! Quantile interactive Q-learning: the regime maximizing the `τ`-th quantile
//! of the final outcome.
//!
//! The pooled CDF under a regime with first stage `Γ̂(·, y)` is an average of
//! per-patient integrals. Its inverse is found by bracketed bisection, once
//! with the rule moving with `y` (giving `ŷ*`) and once with the rule frozen at
//! `ŷ*`. Agreement of the two selects the rule at `ŷ*`; otherwise the rule at
//! `ŷ* - δ` is used.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, History1, History2, Treatment};
use crate::error::{Error, Result};
use crate::par;
use crate::regime::{LinearRule, Regime};
use crate::tiq::{fit_components, ArmSamples, Components, EstimatorConfig};

const MAX_DOUBLINGS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QiqConfig {
    /// Bisection stops once the bracket is this narrow.
    pub tolerance: f64,
    /// Largest `|f̂ - ŷ*|` accepted as a fixed point.
    pub fixed_point_tolerance: f64,
    pub delta: f64,
}

impl Default for QiqConfig {
    fn default() -> Self {
        QiqConfig {
            tolerance: 1e-4,
            fixed_point_tolerance: 1e-3,
            delta: 1e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QiqBranch {
    /// `f̂(ŷ*) = ŷ*` within tolerance; the rule is `Γ̂(·, ŷ*)`.
    FixedPoint,
    /// The rule is `Γ̂(·, ŷ* - δ)`.
    Perturbed,
}

/// Arm samples frozen for every training patient, so that the pooled CDF can
/// be evaluated at many `y` without redrawing.
pub struct PooledCdf<'a> {
    components: &'a Components,
    arms: Vec<ArmSamples>,
}

impl<'a> PooledCdf<'a> {
    pub fn new(components: &'a Components) -> Self {
        Self::on(components, &components.training_x1)
    }

    /// Pools over the given baseline histories instead of the training set.
    pub fn on(components: &'a Components, x1s: &[Vec<f64>]) -> Self {
        let arms = par::map(x1s, |x1| components.arm_samples(&History1 { x1 }));
        PooledCdf { components, arms }
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    /// `n⁻¹ Σ I_i(y, rule_i)`.
    pub fn pooled_cdf_at(&self, y: f64, rule: &[Treatment]) -> Result<f64> {
        if rule.len() != self.arms.len() {
            return Err(Error::InvalidArgument(format!(
                "rule has {} decisions for {} patients",
                rule.len(),
                self.arms.len()
            )));
        }
        let cdf = &self.components.cdf;
        let vals = par::map_range(self.arms.len(), |i| self.arms[i].integral(cdf, y, rule[i]));
        Ok(vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// `Γ̂(h1_i, y)` for every pooled patient.
    pub fn gamma(&self, y: f64) -> Vec<Treatment> {
        let cdf = &self.components.cdf;
        par::map(&self.arms, |a| a.tiq_contrast(cdf, y).decision())
    }

    /// Pooled CDF with the rule moving with `y`, i.e. `n⁻¹ Σ min_a I_i(y, a)`.
    pub fn pooled_min(&self, y: f64) -> f64 {
        let cdf = &self.components.cdf;
        let vals = par::map(&self.arms, |a| {
            let con = a.tiq_contrast(cdf, y);
            if con.decision() == Treatment::Plus {
                con.i_plus
            } else {
                con.i_minus
            }
        });
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    fn initial_bracket(&self) -> (f64, f64) {
        let (lo, hi) = self.components.fitted_range;
        let s = 5.0 * self.components.cdf.spread().max(f64::EPSILON);
        (lo - s, hi + s)
    }

    /// Smallest `y` (to within `tol`) with `g(y) >= τ`, for nondecreasing `g`.
    fn invert(&self, tau: f64, tol: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quantile level must lie in (0, 1), got {tau}"
            )));
        }
        let (mut lo, mut hi) = self.initial_bracket();
        let mut doublings = 0;
        loop {
            let (glo, ghi) = (g(lo), g(hi));
            if glo < tau && ghi >= tau {
                break;
            }
            if doublings == MAX_DOUBLINGS {
                return Err(Error::BracketFailure { doublings });
            }
            let w = hi - lo;
            if glo >= tau {
                lo -= w;
            }
            if ghi < tau {
                hi += w;
            }
            doublings += 1;
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            // Far from zero the float spacing can exceed `tol`.
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) >= tau {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// `ŷ* = inf{y : n⁻¹ Σ min_a I_i(y, a) >= τ}`.
    pub fn y_star_hat(&self, tau: f64, tol: f64) -> Result<f64> {
        self.invert(tau, tol, |y| self.pooled_min(y))
    }

    /// The `τ`-th quantile of the pooled CDF with the rule frozen at
    /// `Γ̂(·, y_rule)`.
    pub fn f_hat(&self, tau: f64, y_rule: f64, tol: f64) -> Result<f64> {
        let rule = self.gamma(y_rule);
        self.invert(tau, tol, |y| {
            self.pooled_cdf_at(y, &rule).expect("rule length matches pool")
        })
    }
}

/// A fitted quantile-optimal regime.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QiqModel {
    pub components: Arc<Components>,
    pub tau: f64,
    pub y_star: f64,
    /// `f̂(ŷ*)`.
    pub f_at_y_star: f64,
    pub branch: QiqBranch,
    /// The first stage recommends `Γ̂(h1, rule_threshold)`.
    pub rule_threshold: f64,
    /// `f̂` at the rule threshold; the estimated optimal quantile.
    pub quantile_value: f64,
    pub config: QiqConfig,
    pi2: LinearRule,
}

impl QiqModel {
    pub fn from_components(components: Arc<Components>, tau: f64, config: QiqConfig) -> Result<Self> {
        let pool = PooledCdf::new(&components);
        Self::with_pool(components.clone(), &pool, tau, config)
    }

    /// Fits at `tau` reusing an existing pool built from `components`.
    pub fn with_pool(components: Arc<Components>, pool: &PooledCdf<'_>, tau: f64, config: QiqConfig) -> Result<Self> {
        let y_star = pool.y_star_hat(tau, config.tolerance)?;
        let f_at_y_star = pool.f_hat(tau, y_star, config.tolerance)?;
        let (branch, rule_threshold, quantile_value) = if (f_at_y_star - y_star).abs() <= config.fixed_point_tolerance {
            (QiqBranch::FixedPoint, y_star, f_at_y_star)
        } else {
            let t = y_star - config.delta;
            (QiqBranch::Perturbed, t, pool.f_hat(tau, t, config.tolerance)?)
        };
        let pi2 = components.pi2_star();
        Ok(QiqModel {
            components,
            tau,
            y_star,
            f_at_y_star,
            branch,
            rule_threshold,
            quantile_value,
            config,
            pi2,
        })
    }

    pub fn qiq_pi1(&self, h1: &History1<'_>) -> Treatment {
        self.components.gamma(h1, self.rule_threshold)
    }

    pub fn pi2_rule(&self) -> &LinearRule {
        &self.pi2
    }
}

impl Regime for QiqModel {
    fn stage1(&self, h1: &History1<'_>) -> Treatment {
        self.qiq_pi1(h1)
    }

    fn stage2(&self, h2: &History2<'_>) -> Treatment {
        self.pi2.decide2(h2)
    }
}

pub fn fit_qiq(data: &Dataset, tau: f64, estimator: &EstimatorConfig, config: QiqConfig) -> Result<QiqModel> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must lie in (0, 1), got {tau}"
        )));
    }
    QiqModel::from_components(Arc::new(fit_components(data, estimator)?), tau, config)
}
