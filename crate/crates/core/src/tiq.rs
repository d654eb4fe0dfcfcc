//! Threshold interactive Q-learning: the regime maximizing `pr(Y > λ)`.
//!
//! The fitted pieces (second-stage regression, error CDF, conditional joint
//! law and one frozen set of standardized draws) live in [`Components`] and
//! are shared by the threshold, quantile and mean-optimal estimators.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conditional_joint::{
    cdf_at_draw, fit_conditional_joint, transform_draws, ConditionalJoint, DependenceKind, JointConfig, JointSample,
    McConfig, StandardDraws, VarianceFit,
};
use crate::domain::{ContrastDesign, Dataset, History1, History2, Treatment};
use crate::error::{Error, Result};
use crate::par;
use crate::regime::{LinearRule, Regime};
use crate::residual_cdf::{fit_empirical, fit_hetero_scale, fit_normal_scale, ResidualCdf, ScaleContext, ScaleTerm};
use crate::stage2::{default_design, fit_stage2, FittedStage2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CdfKind {
    #[default]
    Normal,
    Empirical,
    Hetero(Vec<ScaleTerm>),
}

/// Model choices shared by every estimator built on [`Components`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Second-stage design; `(1, x2')'` for both parts when absent.
    pub stage2: Option<ContrastDesign>,
    pub cdf: CdfKind,
    /// First-stage mean/variance designs; linear in `(h1, a1 h1)` when absent.
    pub joint: Option<JointConfig>,
    pub dependence: DependenceKind,
    /// Variance objective used when `joint` is absent.
    #[serde(default)]
    pub variance_fit: VarianceFit,
    pub mc: McConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            stage2: None,
            cdf: CdfKind::Normal,
            joint: None,
            dependence: DependenceKind::GaussianCopula,
            variance_fit: VarianceFit::default(),
            mc: McConfig::default(),
        }
    }
}

/// The four fitted pieces plus frozen Monte Carlo draws. Serialized form
/// keeps only the draw count and seed; the draws are regenerated on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "SavedComponents", from = "SavedComponents")]
pub struct Components {
    pub stage2: FittedStage2,
    pub cdf: ResidualCdf,
    pub joint: ConditionalJoint,
    pub draws: StandardDraws,
    pub data_fingerprint: u64,
    /// Range of the training fitted values `m̂ + A2 ĉ`.
    pub fitted_range: (f64, f64),
    pub training_x1: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SavedComponents {
    stage2: FittedStage2,
    cdf: ResidualCdf,
    joint: ConditionalJoint,
    mc: McConfig,
    data_fingerprint: u64,
    fitted_range: (f64, f64),
    training_x1: Vec<Vec<f64>>,
}

impl From<Components> for SavedComponents {
    fn from(c: Components) -> Self {
        SavedComponents {
            mc: McConfig {
                draws: c.draws.pairs.len(),
                seed: c.draws.seed,
            },
            stage2: c.stage2,
            cdf: c.cdf,
            joint: c.joint,
            data_fingerprint: c.data_fingerprint,
            fitted_range: c.fitted_range,
            training_x1: c.training_x1,
        }
    }
}

impl From<SavedComponents> for Components {
    fn from(s: SavedComponents) -> Self {
        Components {
            draws: s.joint.standard_draws(s.mc.draws, s.mc.seed),
            stage2: s.stage2,
            cdf: s.cdf,
            joint: s.joint,
            data_fingerprint: s.data_fingerprint,
            fitted_range: s.fitted_range,
            training_x1: s.training_x1,
        }
    }
}

pub fn fit_components(data: &Dataset, config: &EstimatorConfig) -> Result<Components> {
    data.require_both_arms()?;
    if config.mc.draws == 0 {
        return Err(Error::InvalidArgument("Monte Carlo draws must be at least 1".into()));
    }
    let design = config.stage2.clone().unwrap_or_else(|| default_design(data.p2()));
    let stage2 = fit_stage2(data, &design)?;
    let (m_hat, c_hat) = stage2.predict_all(data);
    let cdf = match &config.cdf {
        CdfKind::Normal => fit_normal_scale(&stage2.residuals)?,
        CdfKind::Empirical => fit_empirical(&stage2.residuals)?,
        CdfKind::Hetero(terms) => {
            let ctx: Vec<ScaleContext> = data
                .rows()
                .iter()
                .zip(m_hat.iter().zip(&c_hat))
                .map(|(r, (&m, &c))| ScaleContext { m, c, a2: r.a2 })
                .collect();
            fit_hetero_scale(&stage2.residuals, &ctx, terms)?
        }
    };
    let joint_cfg = config.joint.clone().unwrap_or_else(|| JointConfig {
        variance_fit: config.variance_fit,
        ..JointConfig::default_for(data.p1(), config.dependence)
    });
    let joint = fit_conditional_joint(data, &stage2, &joint_cfg)?;
    let draws = joint.standard_draws(config.mc.draws, config.mc.seed);
    let fitted = data
        .rows()
        .iter()
        .zip(m_hat.iter().zip(&c_hat))
        .map(|(r, (m, c))| m + r.a2.value() * c);
    let fitted_range = fitted.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f), hi.max(f)));
    Ok(Components {
        stage2,
        cdf,
        joint,
        draws,
        data_fingerprint: data.fingerprint(),
        fitted_range,
        training_x1: data.rows().iter().map(|r| r.x1.clone()).collect(),
    })
}

/// A first-stage comparison between the arms at one history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmContrast {
    /// Integral under `a1 = -1` minus integral under `a1 = +1`.
    pub d: f64,
    /// Monte Carlo standard error of `d` (paired draws).
    pub se: f64,
    pub i_minus: f64,
    pub i_plus: f64,
}

impl ArmContrast {
    pub fn decision(&self) -> Treatment {
        Treatment::from_score(self.d)
    }
}

/// Samples of `Ĝ(·,·|h1,-1)` and `Ĝ(·,·|h1,+1)` built from the same draws.
#[derive(Clone, Debug)]
pub struct ArmSamples {
    pub minus: JointSample,
    pub plus: JointSample,
}

impl ArmSamples {
    pub fn arm(&self, a1: Treatment) -> &JointSample {
        match a1 {
            Treatment::Minus => &self.minus,
            Treatment::Plus => &self.plus,
        }
    }

    /// Paired contrast of `integrand(u, v)` between the arms.
    pub fn contrast_by<F: Fn(f64, f64) -> f64>(&self, integrand: F) -> ArmContrast {
        let m = self.minus.len() as f64;
        let (mut sm, mut sp, mut sd, mut sd2) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..self.minus.len() {
            let fm = integrand(self.minus.u[k], self.minus.v[k]);
            let fp = integrand(self.plus.u[k], self.plus.v[k]);
            sm += fm;
            sp += fp;
            let diff = fm - fp;
            sd += diff;
            sd2 += diff * diff;
        }
        let d = sd / m;
        let var = if m > 1.0 {
            ((sd2 / m - d * d) * m / (m - 1.0)).max(0.0)
        } else {
            0.0
        };
        ArmContrast {
            d,
            se: (var / m).sqrt(),
            i_minus: sm / m,
            i_plus: sp / m,
        }
    }

    /// `d̂(h1, y)`.
    pub fn tiq_contrast(&self, cdf: &ResidualCdf, y: f64) -> ArmContrast {
        self.contrast_by(|u, v| cdf_at_draw(cdf, y, u, v))
    }

    /// `I(y, a1)` for a single arm.
    pub fn integral(&self, cdf: &ResidualCdf, y: f64, a1: Treatment) -> f64 {
        let s = self.arm(a1);
        (0..s.len()).map(|k| cdf_at_draw(cdf, y, s.u[k], s.v[k])).sum::<f64>() / s.len() as f64
    }

    /// Contrast of `∫(-u-|v|) dĜ`, whose sign is the mean-optimal rule.
    pub fn mean_contrast(&self) -> ArmContrast {
        self.contrast_by(|u, v| -u - v.abs())
    }
}

impl Components {
    pub fn arm_samples(&self, h1: &History1<'_>) -> ArmSamples {
        ArmSamples {
            minus: transform_draws(&self.draws, self.joint.loc_scale(h1, Treatment::Minus)),
            plus: transform_draws(&self.draws, self.joint.loc_scale(h1, Treatment::Plus)),
        }
    }

    pub fn d_hat(&self, h1: &History1<'_>, y: f64) -> ArmContrast {
        self.arm_samples(h1).tiq_contrast(&self.cdf, y)
    }

    /// `Γ̂(h1, y) = sgn(d̂(h1, y))`.
    pub fn gamma(&self, h1: &History1<'_>, y: f64) -> Treatment {
        self.d_hat(h1, y).decision()
    }

    /// Contrasts at several thresholds from one pair of samples.
    pub fn d_hat_many(&self, h1: &History1<'_>, ys: &[f64]) -> Vec<ArmContrast> {
        let arms = self.arm_samples(h1);
        ys.iter().map(|&y| arms.tiq_contrast(&self.cdf, y)).collect()
    }

    pub fn pi2_star(&self) -> LinearRule {
        self.stage2.pi2_star()
    }
}

/// A fitted threshold-optimal regime.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TiqModel {
    pub components: Arc<Components>,
    pub lambda: f64,
    pi2: LinearRule,
}

impl TiqModel {
    pub fn new(components: Arc<Components>, lambda: f64) -> Self {
        let pi2 = components.pi2_star();
        TiqModel {
            components,
            lambda,
            pi2,
        }
    }

    pub fn d_hat(&self, h1: &History1<'_>, lambda: f64) -> ArmContrast {
        self.components.d_hat(h1, lambda)
    }

    pub fn tiq_pi1(&self, h1: &History1<'_>) -> Treatment {
        self.d_hat(h1, self.lambda).decision()
    }

    pub fn pi2_rule(&self) -> &LinearRule {
        &self.pi2
    }

    /// Per-patient decisions with their contrasts, for reporting.
    pub fn decisions(&self, x1s: &[Vec<f64>]) -> Vec<ArmContrast> {
        par::map(x1s, |x1| self.d_hat(&History1 { x1 }, self.lambda))
    }

    /// Plug-in estimate of `pr(Y > λ)` over the training histories when the
    /// first stage follows `rule`.
    pub fn estimated_exceedance(&self, rule: impl Fn(&History1<'_>, Treatment) -> Treatment + Sync) -> f64 {
        let c = &self.components;
        let vals = par::map(&c.training_x1, |x1| {
            let h1 = History1 { x1 };
            let arms = c.arm_samples(&h1);
            let con = arms.tiq_contrast(&c.cdf, self.lambda);
            let a1 = rule(&h1, con.decision());
            match a1 {
                Treatment::Minus => con.i_minus,
                Treatment::Plus => con.i_plus,
            }
        });
        1.0 - vals.iter().sum::<f64>() / vals.len() as f64
    }
}

impl Regime for TiqModel {
    fn stage1(&self, h1: &History1<'_>) -> Treatment {
        self.tiq_pi1(h1)
    }

    fn stage2(&self, h2: &History2<'_>) -> Treatment {
        self.pi2.decide2(h2)
    }
}

/// Fits every component and returns the regime at threshold `lambda`.
pub fn fit_tiq(data: &Dataset, lambda: f64, config: &EstimatorConfig) -> Result<TiqModel> {
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "threshold must be finite, got {lambda}"
        )));
    }
    Ok(TiqModel::new(Arc::new(fit_components(data, config)?), lambda))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanTiqComparison {
    pub mean_decision: Treatment,
    pub tiq_decision: Treatment,
    pub disagree: bool,
    pub d_mean: f64,
    pub d_tiq: f64,
}

/// Mean-optimal and threshold-optimal first-stage decisions on the same draws.
pub fn compare_mean_vs_tiq(model: &TiqModel, x1s: &[Vec<f64>], lambda: f64) -> Vec<MeanTiqComparison> {
    let c = &model.components;
    par::map(x1s, |x1| {
        let arms = c.arm_samples(&History1 { x1 });
        let mean = arms.mean_contrast();
        let tiq = arms.tiq_contrast(&c.cdf, lambda);
        MeanTiqComparison {
            mean_decision: mean.decision(),
            tiq_decision: tiq.decision(),
            disagree: mean.decision() != tiq.decision(),
            d_mean: mean.d,
            d_tiq: tiq.d,
        }
    })
}
