//! Estimators of the second-stage error distribution.
//!
//! Three variants: a normal scale model `Φ(z/σ̂)`, the empirical CDF of the
//! residuals, and an empirical base distribution of standardized residuals
//! combined with a log-linear scale model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::Treatment;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::normal;

/// `-E[log |Z|]` for standard normal `Z`; converts a fitted mean of
/// `log |e|` into `log σ`.
pub const LOG_ABS_NORMAL_OFFSET: f64 = 0.635_181_422_730_739_1;

/// Where an error-CDF evaluation takes place. Homoskedastic variants ignore it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleContext {
    /// `m̂(h2)`
    pub m: f64,
    /// `ĉ(h2)`
    pub c: f64,
    pub a2: Treatment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleTerm {
    Intercept,
    M,
    C,
    A2,
    /// `m + a2 c`, the second-stage mean.
    FittedMean,
}

impl ScaleTerm {
    fn eval(self, ctx: &ScaleContext) -> f64 {
        match self {
            ScaleTerm::Intercept => 1.0,
            ScaleTerm::M => ctx.m,
            ScaleTerm::C => ctx.c,
            ScaleTerm::A2 => ctx.a2.value(),
            ScaleTerm::FittedMean => ctx.m + ctx.a2.value() * ctx.c,
        }
    }

    fn name(self) -> String {
        format!("{self:?}")
    }
}

/// `log σ(h2, a2) = Σ coef_k · term_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleModel {
    pub terms: Vec<ScaleTerm>,
    pub coef: Vec<f64>,
}

impl ScaleModel {
    pub fn sigma(&self, ctx: &ScaleContext) -> f64 {
        self.terms
            .iter()
            .zip(&self.coef)
            .map(|(t, c)| t.eval(ctx) * c)
            .sum::<f64>()
            .exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ResidualCdf {
    NormalScale {
        sigma: f64,
    },
    Empirical {
        sorted: Vec<f64>,
    },
    HeteroScale {
        scale: ScaleModel,
        /// Sorted `ê_i / σ̂(H2i, A2i)`.
        standardized: Vec<f64>,
    },
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[inline]
fn ecdf(sorted: &[f64], z: f64) -> f64 {
    sorted.partition_point(|&v| v <= z) as f64 / sorted.len() as f64
}

/// `Φ(z/σ̂)` with the divisor-`n` standard deviation of the residuals.
pub fn fit_normal_scale(residuals: &[f64]) -> Result<ResidualCdf> {
    if residuals.len() < 2 {
        return Err(Error::Degenerate(
            "normal scale model needs at least two residuals".into(),
        ));
    }
    if residuals.iter().any(|e| !e.is_finite()) {
        return Err(Error::Degenerate("non-finite residual".into()));
    }
    let (lo, hi) = residuals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
            (lo.min(e), hi.max(e))
        });
    if lo == hi {
        return Err(Error::Degenerate("residuals have zero variance".into()));
    }
    let n = residuals.len() as f64;
    let sigma = (residuals.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    Ok(ResidualCdf::NormalScale { sigma })
}

/// Right-continuous empirical CDF of the residuals.
pub fn fit_empirical(residuals: &[f64]) -> Result<ResidualCdf> {
    if residuals.is_empty() {
        return Err(Error::Degenerate("empirical CDF of zero residuals".into()));
    }
    if residuals.iter().any(|e| !e.is_finite()) {
        return Err(Error::Degenerate("non-finite residual".into()));
    }
    Ok(ResidualCdf::Empirical {
        sorted: sorted(residuals),
    })
}

/// Log-linear scale model fitted by least squares of `log|ê|` on the scale
/// terms, shifted by [`LOG_ABS_NORMAL_OFFSET`]; the base distribution is the
/// empirical CDF of the standardized residuals.
pub fn fit_hetero_scale(residuals: &[f64], contexts: &[ScaleContext], terms: &[ScaleTerm]) -> Result<ResidualCdf> {
    if residuals.len() != contexts.len() {
        return Err(Error::InvalidArgument(format!(
            "{} residuals but {} scale contexts",
            residuals.len(),
            contexts.len()
        )));
    }
    if terms.is_empty() {
        return Err(Error::InvalidArgument("scale model needs at least one term".into()));
    }
    let max_abs = residuals.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    if max_abs == 0.0 || !max_abs.is_finite() {
        return Err(Error::Degenerate("residuals are all zero or non-finite".into()));
    }
    let floor = max_abs * 1e-12;
    let log_abs: Vec<f64> = residuals.iter().map(|e| e.abs().max(floor).ln()).collect();
    let x = Matrix::from_rows(
        &contexts
            .iter()
            .map(|ctx| terms.iter().map(|t| t.eval(ctx)).collect())
            .collect::<Vec<Vec<f64>>>(),
    );
    let names: Vec<String> = terms.iter().map(|t| t.name()).collect();
    let mut coef = least_squares(&x, &log_abs, &names)?;
    let shift = LOG_ABS_NORMAL_OFFSET;
    match terms.iter().position(|t| *t == ScaleTerm::Intercept) {
        Some(k) => coef[k] += shift,
        None => return Err(Error::InvalidArgument("scale model requires an intercept term".into())),
    }
    let scale = ScaleModel {
        terms: terms.to_vec(),
        coef,
    };
    let mut standardized = Vec::with_capacity(residuals.len());
    for (e, ctx) in residuals.iter().zip(contexts) {
        let s = scale.sigma(ctx);
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Degenerate(format!("fitted scale {s} is not positive")));
        }
        standardized.push(e / s);
    }
    standardized.sort_by(f64::total_cmp);
    Ok(ResidualCdf::HeteroScale { scale, standardized })
}

impl ResidualCdf {
    /// CDF for homoskedastic variants. The heteroskedastic variant returns
    /// its base (unit-scale) distribution.
    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            ResidualCdf::NormalScale { sigma } => normal::cdf(z / sigma),
            ResidualCdf::Empirical { sorted } => ecdf(sorted, z),
            ResidualCdf::HeteroScale { standardized, .. } => ecdf(standardized, z),
        }
    }

    /// CDF at `z` for a patient described by `ctx`.
    #[inline]
    pub fn cdf_in(&self, z: f64, ctx: &ScaleContext) -> f64 {
        match self {
            ResidualCdf::HeteroScale { scale, standardized } => {
                ecdf(standardized, z / scale.sigma(ctx).clamp(f64::MIN_POSITIVE, f64::MAX))
            }
            _ => self.cdf(z),
        }
    }

    pub fn is_homoskedastic(&self) -> bool {
        !matches!(self, ResidualCdf::HeteroScale { .. })
    }

    /// Continuous and strictly increasing, the sufficient condition for the
    /// quantile fixed point.
    pub fn is_continuous(&self) -> bool {
        matches!(self, ResidualCdf::NormalScale { .. })
    }

    /// A scale for the error, used to size search brackets.
    pub fn spread(&self) -> f64 {
        match self {
            ResidualCdf::NormalScale { sigma } => *sigma,
            ResidualCdf::Empirical { sorted } => rms(sorted),
            ResidualCdf::HeteroScale { standardized, .. } => rms(standardized),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            ResidualCdf::NormalScale { .. } => "normal",
            ResidualCdf::Empirical { .. } => "empirical",
            ResidualCdf::HeteroScale { .. } => "hetero",
        }
    }
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64).sqrt()
}

/// Normal QQ pairs `(theoretical, sample)` using plotting positions
/// `(i - 0.5)/n`.
pub fn qq_pairs(residuals: &[f64]) -> Vec<(f64, f64)> {
    let s = sorted(residuals);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &e)| (normal::quantile((i as f64 + 0.5) / n), e))
        .collect()
}

fn standardize_sorted(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    sorted(&values.iter().map(|v| (v - mean) / sd).collect::<Vec<_>>())
}

/// Simultaneous band for standardized normal order statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QqBand {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Simulates `sims` standardized normal samples of size `n` and widens the
/// pointwise mean ± k·sd envelope until a fraction `level` of whole samples
/// lies inside it.
pub fn qq_band(n: usize, sims: usize, level: f64, seed: u64) -> Result<QqBand> {
    if n < 3 || sims < 2 {
        return Err(Error::InvalidArgument("need n >= 3 and at least 2 simulations".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "band level must lie in (0, 1), got {level}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<f64>> = (0..sims)
        .map(|_| {
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            standardize_sorted(&z)
        })
        .collect();
    let k = sims as f64;
    let mean: Vec<f64> = (0..n).map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / k).collect();
    let sd: Vec<f64> = (0..n)
        .map(|i| (samples.iter().map(|s| (s[i] - mean[i]).powi(2)).sum::<f64>() / (k - 1.0)).sqrt())
        .collect();
    let mut worst: Vec<f64> = samples
        .iter()
        .map(|s| (0..n).map(|i| (s[i] - mean[i]).abs() / sd[i]).fold(0.0, f64::max))
        .collect();
    worst.sort_by(f64::total_cmp);
    let width = worst[((level * k).ceil() as usize).clamp(1, sims) - 1];
    Ok(QqBand {
        level,
        lower: (0..n).map(|i| mean[i] - width * sd[i]).collect(),
        upper: (0..n).map(|i| mean[i] + width * sd[i]).collect(),
    })
}

/// Standardized QQ points checked against a simulated band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QqCheck {
    /// `(theoretical, standardized sample, lower, upper)` per order statistic.
    pub points: Vec<[f64; 4]>,
    pub outside: usize,
}

impl QqCheck {
    pub fn violates(&self) -> bool {
        self.outside > 0
    }
}

pub fn qq_check(residuals: &[f64], sims: usize, level: f64, seed: u64) -> Result<QqCheck> {
    let band = qq_band(residuals.len(), sims, level, seed)?;
    let z = standardize_sorted(residuals);
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("residuals have zero spread".into()));
    }
    let theo = qq_pairs(residuals);
    let points: Vec<[f64; 4]> = (0..z.len())
        .map(|i| [theo[i].0, z[i], band.lower[i], band.upper[i]])
        .collect();
    let outside = points.iter().filter(|p| p[1] < p[2] || p[1] > p[3]).count();
    Ok(QqCheck { points, outside })
}
