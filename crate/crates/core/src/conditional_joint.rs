//! Conditional joint law of `(m(H2), c(H2))` given `(H1, A1)`.
//!
//! Mean and variance of each component are modelled as functions of the
//! baseline history and first treatment; the dependence between the two
//! standardized residuals is captured by a Gaussian copula or a bivariate
//! Gaussian-kernel density. Draws are produced on the standardized scale once
//! and then mapped to any `(h1, a1)` by location and scale, which gives common
//! random numbers across arms and patients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{dot, ContrastDesign, Dataset, FeatureMap, History1, Treatment};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::normal;
use crate::residual_cdf::{ResidualCdf, ScaleContext};
use crate::stage2::FittedStage2;

pub const DEFAULT_DRAWS: usize = 10_000;
const MAX_GAUSS_NEWTON_ITERS: usize = 100;
/// Copula correlations are kept strictly inside (-1, 1).
const MAX_ABS_CORRELATION: f64 = 1.0 - 1e-9;

/// Monte Carlo settings for integrals over the joint law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub draws: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            draws: DEFAULT_DRAWS,
            seed: 0,
        }
    }
}

/// Row of a first-stage design: `main(h1) ++ a1 * contrast(h1)`.
pub fn stage1_row_into(design: &ContrastDesign, h1: &History1<'_>, a1: Treatment, out: &mut Vec<f64>) {
    design.main.eval1_into(h1, out);
    let start = out.len();
    design.contrast.eval1_into(h1, out);
    for v in &mut out[start..] {
        *v *= a1.value();
    }
}

pub fn stage1_matrix(data: &Dataset, design: &ContrastDesign) -> Matrix {
    let mut flat = Vec::with_capacity(data.len() * design.width());
    for r in data.rows() {
        stage1_row_into(design, &r.history1(), r.a1, &mut flat);
    }
    Matrix::from_flat(data.len(), design.width(), flat)
}

pub(crate) fn check_stage1_design(design: &ContrastDesign, p1: usize) -> Result<()> {
    if !design.main.is_baseline_only() || !design.contrast.is_baseline_only() {
        return Err(Error::InvalidArgument(
            "first-stage models may only use baseline covariates".into(),
        ));
    }
    design.main.check_dims(p1, 0)?;
    design.contrast.check_dims(p1, 0)
}

/// Least-squares mean model with residual diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFit {
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
    pub residual_mean: f64,
    /// Set when residuals do not average to zero, which happens when the
    /// design has no intercept.
    pub nonzero_residual_mean: bool,
}

pub fn fit_mean_model(x: &Matrix, names: &[String], targets: &[f64]) -> Result<MeanFit> {
    let coef = least_squares(x, targets, names)?;
    let fitted = x.mul_vec(&coef);
    let residuals: Vec<f64> = targets.iter().zip(&fitted).map(|(t, f)| t - f).collect();
    let residual_mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    let scale = targets.iter().fold(0.0f64, |a, t| a.max(t.abs())).max(1.0);
    Ok(MeanFit {
        coef,
        residual_mean,
        nonzero_residual_mean: residual_mean.abs() > 1e-8 * scale,
        residuals,
    })
}

fn exp_objective(x: &Matrix, sq: &[f64], gamma: &[f64]) -> f64 {
    let mut obj = 0.0;
    for (i, s) in sq.iter().enumerate() {
        let eta = dot(x.row(i), gamma);
        if eta > 700.0 {
            return f64::INFINITY;
        }
        let r = s - eta.exp();
        obj += r * r;
    }
    obj
}

/// Fits `σ²(h1, a1) = exp(x'γ)` by minimising `Σ (s_i - exp(x_i'γ))²` with
/// damped Gauss–Newton. `intercept` names the column initialised at
/// `log(mean s)`.
pub fn fit_var_model(x: &Matrix, names: &[String], squared: &[f64], intercept: Option<usize>) -> Result<Vec<f64>> {
    if squared.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidArgument(
            "squared residuals must be finite and nonnegative".into(),
        ));
    }
    let mean_sq = squared.iter().sum::<f64>() / squared.len() as f64;
    if mean_sq <= 0.0 {
        return Err(Error::Degenerate("all squared residuals are zero".into()));
    }
    let p = x.cols();
    let mut gamma = vec![0.0; p];
    if let Some(k) = intercept {
        gamma[k] = mean_sq.ln();
    }
    let mut obj = exp_objective(x, squared, &gamma);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..MAX_GAUSS_NEWTON_ITERS {
        let mu: Vec<f64> = (0..x.rows()).map(|i| dot(x.row(i), &gamma).exp()).collect();
        let resid: Vec<f64> = squared.iter().zip(&mu).map(|(s, m)| s - m).collect();
        let jac = x.scale_rows(&mu);
        let grad = jac.tr_mul_vec(&resid);
        grad_norm = 2.0 * grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let delta = least_squares(&jac, &resid, names)?;
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-12 {
            let trial: Vec<f64> = gamma.iter().zip(&delta).map(|(g, d)| g + step * d).collect();
            let trial_obj = exp_objective(x, squared, &trial);
            if trial_obj <= obj {
                let moved = delta.iter().fold(0.0f64, |a, d| a.max((step * d).abs()));
                gamma = trial;
                let rel = (obj - trial_obj) / obj.max(f64::MIN_POSITIVE);
                obj = trial_obj;
                improved = true;
                if moved < 1e-9 || rel < 1e-15 {
                    return Ok(gamma);
                }
                break;
            }
            step *= 0.5;
        }
        if !improved {
            // no descent along the Gauss-Newton direction: stationary to
            // working precision
            return Ok(gamma);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_GAUSS_NEWTON_ITERS,
        gradient_norm: grad_norm,
    })
}

fn pseudo_nll(x: &Matrix, sq: &[f64], gamma: &[f64]) -> f64 {
    sq.iter()
        .enumerate()
        .map(|(i, s)| {
            let eta = dot(x.row(i), gamma);
            eta + s * (-eta).exp()
        })
        .sum()
}

/// Fits `σ²(h1, a1) = exp(x'γ)` by minimising the Gaussian pseudo-likelihood
/// `Σ {x_i'γ + s_i exp(-x_i'γ)}` with Fisher scoring. Less sensitive than the
/// squared-error fit to a few very large squared residuals.
pub fn fit_var_model_pseudo(
    x: &Matrix,
    names: &[String],
    squared: &[f64],
    intercept: Option<usize>,
) -> Result<Vec<f64>> {
    if squared.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidArgument(
            "squared residuals must be finite and nonnegative".into(),
        ));
    }
    let mean_sq = squared.iter().sum::<f64>() / squared.len() as f64;
    if mean_sq <= 0.0 {
        return Err(Error::Degenerate("all squared residuals are zero".into()));
    }
    let mut gamma = vec![0.0; x.cols()];
    if let Some(k) = intercept {
        gamma[k] = mean_sq.ln();
    }
    let mut obj = pseudo_nll(x, squared, &gamma);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..MAX_GAUSS_NEWTON_ITERS {
        // Score is X'(s/σ² - 1) and the Hessian is X' diag(s/σ²) X, so the
        // Newton step is a weighted least squares fit. Fisher scoring (unit
        // weights) is the fallback when the weighted design is singular.
        let ratio: Vec<f64> = (0..x.rows())
            .map(|i| squared[i] * (-dot(x.row(i), &gamma)).exp())
            .collect();
        let work: Vec<f64> = ratio.iter().map(|r| r - 1.0).collect();
        let grad = x.tr_mul_vec(&work);
        grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let delta = newton_step(x, &ratio, &work, names).or_else(|_| least_squares(x, &work, names))?;
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-12 {
            let trial: Vec<f64> = gamma.iter().zip(&delta).map(|(g, d)| g + step * d).collect();
            let trial_obj = pseudo_nll(x, squared, &trial);
            if trial_obj <= obj {
                let moved = delta.iter().fold(0.0f64, |a, d| a.max((step * d).abs()));
                gamma = trial;
                let change = obj - trial_obj;
                obj = trial_obj;
                improved = true;
                if moved < 1e-9 || change <= 1e-13 * (1.0 + obj.abs()) {
                    return Ok(gamma);
                }
                break;
            }
            step *= 0.5;
        }
        if !improved {
            return Ok(gamma);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_GAUSS_NEWTON_ITERS,
        gradient_norm: grad_norm,
    })
}

fn newton_step(x: &Matrix, ratio: &[f64], work: &[f64], names: &[String]) -> Result<Vec<f64>> {
    let w: Vec<f64> = ratio.iter().map(|r| r.max(1e-12).sqrt()).collect();
    let z: Vec<f64> = work.iter().zip(&w).map(|(r, w)| r / w).collect();
    least_squares(&x.scale_rows(&w), &z, names)
}

/// Objective used to fit the log-linear variance models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceFit {
    /// `Σ (s_i - σ²_i)²`.
    #[default]
    LeastSquares,
    /// `Σ (log σ²_i + s_i / σ²_i)`.
    PseudoLikelihood,
}

/// Mean and log-linear variance model of one component given `(h1, a1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanVarModel {
    pub mean_design: ContrastDesign,
    pub theta: Vec<f64>,
    pub var_design: ContrastDesign,
    pub gamma: Vec<f64>,
}

impl MeanVarModel {
    pub fn mean(&self, h1: &History1<'_>, a1: Treatment) -> f64 {
        let mut row = Vec::with_capacity(self.mean_design.width());
        stage1_row_into(&self.mean_design, h1, a1, &mut row);
        dot(&row, &self.theta)
    }

    pub fn sd(&self, h1: &History1<'_>, a1: Treatment) -> f64 {
        let mut row = Vec::with_capacity(self.var_design.width());
        stage1_row_into(&self.var_design, h1, a1, &mut row);
        (0.5 * dot(&row, &self.gamma)).exp()
    }
}

/// `(targets - mean) / sd`, elementwise.
pub fn standardized_residuals(raw: &[f64], sd: &[f64]) -> Result<Vec<f64>> {
    raw.iter()
        .zip(sd)
        .map(|(r, s)| {
            if *s > 0.0 && s.is_finite() {
                Ok(r / s)
            } else {
                Err(Error::Degenerate(format!("fitted scale {s} is not positive")))
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    /// Normal-scores correlation.
    pub r: f64,
    pub sorted_m: Vec<f64>,
    pub sorted_c: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    pub bandwidth: [f64; 2],
    pub e_m: Vec<f64>,
    pub e_c: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dependence {
    GaussianCopula(CopulaModel),
    Kde(KdeModel),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceKind {
    #[default]
    GaussianCopula,
    Kde,
}

fn check_pair(e_m: &[f64], e_c: &[f64]) -> Result<()> {
    if e_m.len() != e_c.len() {
        return Err(Error::InvalidArgument("residual vectors differ in length".into()));
    }
    if e_m.len() < 10 {
        return Err(Error::Degenerate(format!(
            "dependence model needs at least 10 residual pairs, got {}",
            e_m.len()
        )));
    }
    for (name, v) in [("m", e_m), ("c", e_c)] {
        let first = v[0];
        if v.iter().all(|x| *x == first) {
            return Err(Error::Degenerate(format!("standardized {name} residuals are constant")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Degenerate(format!("non-finite standardized {name} residual")));
        }
    }
    Ok(())
}

/// Zero-based ranks, ties broken by position.
fn ranks(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut r = vec![0; v.len()];
    for (rank, i) in idx.into_iter().enumerate() {
        r[i] = rank;
    }
    r
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Gaussian copula with empirical marginals; pseudo-observations
/// `rank/(n+1)` and normal-scores Pearson correlation.
pub fn fit_copula(e_m: &[f64], e_c: &[f64]) -> Result<CopulaModel> {
    check_pair(e_m, e_c)?;
    let n = e_m.len() as f64;
    let scores = |v: &[f64]| -> Vec<f64> {
        ranks(v)
            .into_iter()
            .map(|r| normal::quantile((r as f64 + 1.0) / (n + 1.0)))
            .collect()
    };
    let r = pearson(&scores(e_m), &scores(e_c)).clamp(-MAX_ABS_CORRELATION, MAX_ABS_CORRELATION);
    let sort = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s
    };
    Ok(CopulaModel {
        r,
        sorted_m: sort(e_m),
        sorted_c: sort(e_c),
    })
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Bivariate rule-of-thumb bandwidth `1.06 σ̂ n^{-1/6}` per coordinate.
pub fn silverman_bandwidth(v: &[f64]) -> f64 {
    1.06 * sample_sd(v) * (v.len() as f64).powf(-1.0 / 6.0)
}

/// Product Gaussian kernel estimator on the standardized residual pairs.
pub fn fit_kde(e_m: &[f64], e_c: &[f64]) -> Result<KdeModel> {
    check_pair(e_m, e_c)?;
    Ok(KdeModel {
        bandwidth: [silverman_bandwidth(e_m), silverman_bandwidth(e_c)],
        e_m: e_m.to_vec(),
        e_c: e_c.to_vec(),
    })
}

/// Empirical quantile `inf{x : F̂(x) >= u}` from sorted values.
#[inline]
fn inverse_ecdf(sorted: &[f64], u: f64) -> f64 {
    let n = sorted.len();
    let k = (u * n as f64).ceil() as usize;
    sorted[k.clamp(1, n) - 1]
}

impl Dependence {
    fn draw(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        match self {
            Dependence::GaussianCopula(cop) => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let zc = cop.r * z1 + (1.0 - cop.r * cop.r).sqrt() * z2;
                [
                    inverse_ecdf(&cop.sorted_m, normal::cdf(z1)),
                    inverse_ecdf(&cop.sorted_c, normal::cdf(zc)),
                ]
            }
            Dependence::Kde(kde) => {
                let i = rng.random_range(0..kde.e_m.len());
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                [kde.e_m[i] + kde.bandwidth[0] * z1, kde.e_c[i] + kde.bandwidth[1] * z2]
            }
        }
    }

    pub fn kind(&self) -> DependenceKind {
        match self {
            Dependence::GaussianCopula(_) => DependenceKind::GaussianCopula,
            Dependence::Kde(_) => DependenceKind::Kde,
        }
    }
}

/// Draws of the standardized residual pair `(e^m, e^c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardDraws {
    pub pairs: Vec<[f64; 2]>,
    pub seed: u64,
}

/// `M` draws of `(u, v) = (m(H2), c(H2))` for a fixed `(h1, a1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSample {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl JointSample {
    pub fn point_mass(u: f64, v: f64, m: usize) -> Self {
        JointSample {
            u: vec![u; m],
            v: vec![v; m],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// `u + |v|`, the outcome mean under the optimal second-stage action.
    pub fn optimal_means(&self) -> Vec<f64> {
        self.u.iter().zip(&self.v).map(|(u, v)| u + v.abs()).collect()
    }
}

/// Location and scale of `(m, c)` at one `(h1, a1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocScale {
    pub mu_m: f64,
    pub sd_m: f64,
    pub mu_c: f64,
    pub sd_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub mean_design: ContrastDesign,
    pub var_design: ContrastDesign,
    pub dependence: DependenceKind,
    #[serde(default)]
    pub variance_fit: VarianceFit,
}

impl JointConfig {
    /// Mean and log-variance both linear in `(h1, a1 h1)` with
    /// `h1 = (1, x1')'`.
    pub fn default_for(p1: usize, dependence: DependenceKind) -> Self {
        let d = ContrastDesign::symmetric(FeatureMap::baseline(p1));
        JointConfig {
            mean_design: d.clone(),
            var_design: d,
            dependence,
            variance_fit: VarianceFit::default(),
        }
    }

    /// Constant variance for both components.
    pub fn homoskedastic(p1: usize, dependence: DependenceKind) -> Self {
        let mut cfg = Self::default_for(p1, dependence);
        cfg.var_design = ContrastDesign {
            main: FeatureMap::new(vec![crate::domain::Term::plain(crate::domain::Column::Intercept)]),
            contrast: FeatureMap::new(vec![]),
        };
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalJoint {
    pub m_model: MeanVarModel,
    pub c_model: MeanVarModel,
    pub dependence: Dependence,
    /// Diagnostic flags from the two mean fits.
    pub m_mean_flagged: bool,
    pub c_mean_flagged: bool,
    pub correlation_estimator: String,
}

fn intercept_column(design: &ContrastDesign) -> Option<usize> {
    design
        .main
        .terms
        .iter()
        .position(|t| t.column == crate::domain::Column::Intercept && !t.times_a1)
}

fn fit_component(data: &Dataset, targets: &[f64], config: &JointConfig) -> Result<(MeanVarModel, Vec<f64>, bool)> {
    let xm = stage1_matrix(data, &config.mean_design);
    let mean = fit_mean_model(&xm, &config.mean_design.column_names("a1"), targets)?;
    let xv = stage1_matrix(data, &config.var_design);
    let sq: Vec<f64> = mean.residuals.iter().map(|r| r * r).collect();
    let fit = match config.variance_fit {
        VarianceFit::LeastSquares => fit_var_model,
        VarianceFit::PseudoLikelihood => fit_var_model_pseudo,
    };
    let gamma = fit(
        &xv,
        &config.var_design.column_names("a1"),
        &sq,
        intercept_column(&config.var_design),
    )?;
    let model = MeanVarModel {
        mean_design: config.mean_design.clone(),
        theta: mean.coef,
        var_design: config.var_design.clone(),
        gamma,
    };
    let sd: Vec<f64> = data.rows().iter().map(|r| model.sd(&r.history1(), r.a1)).collect();
    let e = standardized_residuals(&mean.residuals, &sd)?;
    Ok((model, e, mean.nonzero_residual_mean))
}

/// Mean/variance modelling of `m̂(H2)` and `ĉ(H2)` followed by a dependence
/// model on the standardized residuals.
pub fn fit_conditional_joint(data: &Dataset, stage2: &FittedStage2, config: &JointConfig) -> Result<ConditionalJoint> {
    check_stage1_design(&config.mean_design, data.p1())?;
    check_stage1_design(&config.var_design, data.p1())?;
    let (m_hat, c_hat) = stage2.predict_all(data);
    let (m_model, e_m, m_flag) = fit_component(data, &m_hat, config)?;
    let (c_model, e_c, c_flag) = fit_component(data, &c_hat, config)?;
    let dependence = match config.dependence {
        DependenceKind::GaussianCopula => Dependence::GaussianCopula(fit_copula(&e_m, &e_c)?),
        DependenceKind::Kde => Dependence::Kde(fit_kde(&e_m, &e_c)?),
    };
    Ok(ConditionalJoint {
        m_model,
        c_model,
        dependence,
        m_mean_flagged: m_flag,
        c_mean_flagged: c_flag,
        correlation_estimator: "normal-scores pearson".into(),
    })
}

impl ConditionalJoint {
    pub fn loc_scale(&self, h1: &History1<'_>, a1: Treatment) -> LocScale {
        LocScale {
            mu_m: self.m_model.mean(h1, a1),
            sd_m: self.m_model.sd(h1, a1),
            mu_c: self.c_model.mean(h1, a1),
            sd_c: self.c_model.sd(h1, a1),
        }
    }

    /// Deterministic given `seed`.
    pub fn standard_draws(&self, count: usize, seed: u64) -> StandardDraws {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        StandardDraws {
            pairs: (0..count).map(|_| self.dependence.draw(&mut rng)).collect(),
            seed,
        }
    }

    pub fn transform(&self, draws: &StandardDraws, h1: &History1<'_>, a1: Treatment) -> JointSample {
        transform_draws(draws, self.loc_scale(h1, a1))
    }

    /// `M` draws from `Ĝ(·,·|h1,a1)`. Using the same seed for both arms gives
    /// common random numbers.
    pub fn sample_joint(&self, h1: &History1<'_>, a1: Treatment, count: usize, seed: u64) -> Result<JointSample> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        Ok(self.transform(&self.standard_draws(count, seed), h1, a1))
    }
}

pub fn transform_draws(draws: &StandardDraws, ls: LocScale) -> JointSample {
    let (u, v) = draws
        .pairs
        .iter()
        .map(|[em, ec]| (ls.mu_m + ls.sd_m * em, ls.mu_c + ls.sd_c * ec))
        .unzip();
    JointSample { u, v }
}

/// `M⁻¹ Σ F̂(y - u_k - |v_k|)` with the second-stage action `sgn(v_k)`
/// supplied as scale context.
pub fn i_integral(y: f64, cdf: &ResidualCdf, sample: &JointSample) -> f64 {
    i_integral_with_se(y, cdf, sample).0
}

/// The integral together with its Monte Carlo standard error.
pub fn i_integral_with_se(y: f64, cdf: &ResidualCdf, sample: &JointSample) -> (f64, f64) {
    let m = sample.len() as f64;
    let (mut s, mut s2) = (0.0, 0.0);
    for (u, v) in sample.u.iter().zip(&sample.v) {
        let f = cdf_at_draw(cdf, y, *u, *v);
        s += f;
        s2 += f * f;
    }
    let mean = s / m;
    let var = if m > 1.0 {
        (s2 / m - mean * mean).max(0.0) * m / (m - 1.0)
    } else {
        0.0
    };
    (mean, (var / m).sqrt())
}

#[inline]
pub(crate) fn cdf_at_draw(cdf: &ResidualCdf, y: f64, u: f64, v: f64) -> f64 {
    let z = y - u - v.abs();
    if cdf.is_homoskedastic() {
        cdf.cdf(z)
    } else {
        cdf.cdf_in(
            z,
            &ScaleContext {
                m: u,
                c: v,
                a2: Treatment::from_score(v),
            },
        )
    }
}
