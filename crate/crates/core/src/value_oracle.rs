//! Inverse-probability-weighted value estimates on observed data, and
//! brute-force truths under a known generative model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, History1, History2, Treatment};
use crate::error::{Error, Result};
use crate::normal;
use crate::par;
use crate::regime::Regime;
use crate::simgen::{empirical_quantile, mix_seed, GenerativeConfig};

pub const MIN_ORACLE_DRAWS: usize = 10_000;
pub const MIN_RULE_DRAWS: usize = 100_000;
const NEAR_TIE_SE: f64 = 3.0;
const BISECTION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub value: f64,
    pub n_consistent: usize,
    /// Binomial standard error over the consistent subgroup.
    pub se: f64,
}

/// `Σ 1{Y > λ} 1{A1 = π1} 1{A2 = π2} / Σ 1{A1 = π1} 1{A2 = π2}`.
pub fn ipw_value(data: &Dataset, recs: &[(Treatment, Treatment)], lambda: f64) -> Result<ValueEstimate> {
    if recs.len() != data.len() {
        return Err(Error::InvalidArgument(format!(
            "{} recommendations for {} rows",
            recs.len(),
            data.len()
        )));
    }
    let (mut hits, mut n) = (0usize, 0usize);
    for (r, &(a1, a2)) in data.rows().iter().zip(recs) {
        if r.a1 == a1 && r.a2 == a2 {
            n += 1;
            if r.y > lambda {
                hits += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyConsistentSubgroup);
    }
    let value = hits as f64 / n as f64;
    Ok(ValueEstimate {
        value,
        n_consistent: n,
        se: (value * (1.0 - value) / n as f64).sqrt(),
    })
}

pub fn ipw_value_of(data: &Dataset, regime: &dyn Regime, lambda: f64) -> Result<ValueEstimate> {
    ipw_value(data, &regime.recommendations(data.rows()), lambda)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub se: f64,
    pub n: usize,
}

/// Outcomes of `nbig` patients whose treatments are forced to the regime.
pub fn forced_outcomes(config: &GenerativeConfig, regime: &dyn Regime, nbig: usize, seed: u64) -> Result<Vec<f64>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x1s: Vec<[f64; 2]> = (0..nbig).map(|_| config.draw_x1(&mut rng)).collect();
    let refs: Vec<&[f64]> = x1s.iter().map(|x| x.as_slice()).collect();
    let a1s = regime.stage1_batch(&refs);
    let xi = config.xi_sampler();
    let x2s: Vec<[f64; 2]> = x1s
        .iter()
        .zip(&a1s)
        .map(|(x1, &a1)| config.draw_x2(x1, a1, &xi, &mut rng))
        .collect();
    Ok(x1s
        .iter()
        .zip(&a1s)
        .zip(&x2s)
        .map(|((x1, &a1), x2)| {
            let a2 = regime.stage2(&History2 { x1, a1, x2 });
            let eps: f64 = rng.sample(StandardNormal);
            config.true_m(x2) + a2.value() * config.true_c(x2) + eps
        })
        .collect())
}

/// `pr(Y > λ)` under the regime by forced-arm simulation.
pub fn oracle_true_prob(
    config: &GenerativeConfig,
    regime: &dyn Regime,
    lambda: f64,
    nbig: usize,
    seed: u64,
) -> Result<OracleResult> {
    if nbig < MIN_ORACLE_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "oracle needs at least {MIN_ORACLE_DRAWS} draws"
        )));
    }
    let ys = forced_outcomes(config, regime, nbig, seed)?;
    let p = ys.iter().filter(|&&y| y > lambda).count() as f64 / nbig as f64;
    Ok(OracleResult {
        value: p,
        se: (p * (1.0 - p) / nbig as f64).sqrt(),
        n: nbig,
    })
}

/// The `τ`-quantile of `Y` under the regime by forced-arm simulation. The SE
/// is half the spread of the order statistics one binomial SE either side.
pub fn oracle_true_quantile(
    config: &GenerativeConfig,
    regime: &dyn Regime,
    tau: f64,
    nbig: usize,
    seed: u64,
) -> Result<OracleResult> {
    if nbig < MIN_ORACLE_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "oracle needs at least {MIN_ORACLE_DRAWS} draws"
        )));
    }
    let ys = forced_outcomes(config, regime, nbig, seed)?;
    let q = empirical_quantile(&ys, tau)?;
    let s = (tau * (1.0 - tau) / nbig as f64).sqrt();
    let lo = empirical_quantile(&ys, (tau - s).max(1.0 / nbig as f64))?;
    let hi = empirical_quantile(&ys, (tau + s).min(1.0))?;
    Ok(OracleResult {
        value: q,
        se: 0.5 * (hi - lo),
        n: nbig,
    })
}

/// Conditional means `m + a2 c` of `Y` given `H2` for forced-arm patients;
/// the outcome noise is integrated out exactly.
fn forced_means(config: &GenerativeConfig, regime: &dyn Regime, n: usize, seed: u64) -> Result<Vec<f64>> {
    config.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x1s: Vec<[f64; 2]> = (0..n).map(|_| config.draw_x1(&mut rng)).collect();
    let refs: Vec<&[f64]> = x1s.iter().map(|x| x.as_slice()).collect();
    let a1s = regime.stage1_batch(&refs);
    let xi = config.xi_sampler();
    Ok(x1s
        .iter()
        .zip(&a1s)
        .map(|(x1, &a1)| {
            let x2 = config.draw_x2(x1, a1, &xi, &mut rng);
            let a2 = regime.stage2(&History2 { x1, a1, x2: &x2 });
            config.true_m(&x2) + a2.value() * config.true_c(&x2)
        })
        .collect())
}

/// `pr(Y > λ)` under the regime with `ε` integrated out, which removes the
/// outcome-noise part of the Monte Carlo error.
pub fn true_prob_integrated(
    config: &GenerativeConfig,
    regime: &dyn Regime,
    lambda: f64,
    n: usize,
    seed: u64,
) -> Result<OracleResult> {
    let mus = forced_means(config, regime, n, seed)?;
    let vals: Vec<f64> = mus.iter().map(|mu| 1.0 - normal::cdf(lambda - mu)).collect();
    let (value, se) = mean_se(&vals);
    Ok(OracleResult { value, se, n })
}

/// The `τ`-quantile of `Y` under the regime, inverting the mixture CDF
/// `n⁻¹ Σ Φ(y - μ_i)`.
pub fn true_quantile_integrated(
    config: &GenerativeConfig,
    regime: &dyn Regime,
    tau: f64,
    n: usize,
    seed: u64,
) -> Result<OracleResult> {
    let mus = forced_means(config, regime, n, seed)?;
    let cdf = |y: f64| mus.iter().map(|mu| normal::cdf(y - mu)).sum::<f64>() / mus.len() as f64;
    let q = invert_increasing(&cdf, tau, &mus)?;
    // Delta method: var F̂(q) / f(q)².
    let dens = mus.iter().map(|mu| normal::pdf(q - mu)).sum::<f64>() / mus.len() as f64;
    let phis: Vec<f64> = mus.iter().map(|mu| normal::cdf(q - mu)).collect();
    let (_, se_f) = mean_se(&phis);
    Ok(OracleResult {
        value: q,
        se: se_f / dens.max(f64::MIN_POSITIVE),
        n,
    })
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Smallest `y` with `g(y) >= τ` for a continuous increasing mixture of unit
/// normals centred at `centres`.
fn invert_increasing(g: &dyn Fn(f64) -> f64, tau: f64, centres: &[f64]) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must lie in (0, 1), got {tau}"
        )));
    }
    let lo0 = centres.iter().copied().fold(f64::INFINITY, f64::min);
    let hi0 = centres.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo0 - 10.0, hi0 + 10.0);
    let mut doublings = 0;
    while g(lo) >= tau || g(hi) < tau {
        if doublings == 60 {
            return Err(Error::BracketFailure { doublings });
        }
        let w = hi - lo;
        lo -= w;
        hi += w;
        doublings += 1;
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= tau {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Oracle verdict for one baseline history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleDecision {
    pub action: Treatment,
    pub p_plus: f64,
    pub p_minus: f64,
    /// Standard error of `p_plus - p_minus` (paired draws).
    pub se_diff: f64,
    /// The gap is under three standard errors.
    pub near_tie: bool,
}

/// Per-h1 optimal first-stage action at each threshold, by simulating
/// `(X2, ε)` forward under each arm with the true optimal second stage.
/// Output is indexed `[threshold][h1]`.
pub fn oracle_optimal_rule(
    config: &GenerativeConfig,
    lambdas: &[f64],
    h1s: &[Vec<f64>],
    nbig: usize,
    seed: u64,
) -> Result<Vec<Vec<OracleDecision>>> {
    config.validate()?;
    if nbig < MIN_RULE_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "oracle rule needs at least {MIN_RULE_DRAWS} draws per arm"
        )));
    }
    if let Some(h) = h1s.iter().find(|h| h.len() != 2) {
        return Err(Error::InvalidArgument(format!(
            "baseline history has {} covariates, expected 2",
            h.len()
        )));
    }
    let xi = config.xi_sampler();
    let per_h1: Vec<Vec<OracleDecision>> = par::map_range(h1s.len(), |i| {
        let x1 = &h1s[i];
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
        // counts[l] = (plus hits, minus hits, Σ d, Σ d²) with d = 1{+} - 1{-}
        let mut counts = vec![(0u64, 0u64, 0i64, 0u64); lambdas.len()];
        let bp = config.b(Treatment::Plus);
        let bm = config.b(Treatment::Minus);
        let (eta_p, eta_m) = (config.eta(x1, Treatment::Plus), config.eta(x1, Treatment::Minus));
        let base = |b: &[[f64; 2]; 2]| [b[0][0] * x1[0] + b[0][1] * x1[1], b[1][0] * x1[0] + b[1][1] * x1[1]];
        let (mp, mm) = (base(bp), base(bm));
        for _ in 0..nbig {
            let (e0, e1) = (xi.sample(&mut rng), xi.sample(&mut rng));
            let eps: f64 = rng.sample(StandardNormal);
            let y = |mean: [f64; 2], eta: f64| {
                let x2 = [mean[0] + eta * e0, mean[1] + eta * e1];
                config.true_m(&x2) + config.true_c(&x2).abs() + eps
            };
            let (yp, ym) = (y(mp, eta_p), y(mm, eta_m));
            for (l, &lam) in lambdas.iter().enumerate() {
                let hp = yp > lam;
                let hm = ym > lam;
                let c = &mut counts[l];
                c.0 += hp as u64;
                c.1 += hm as u64;
                let d = hp as i64 - hm as i64;
                c.2 += d;
                c.3 += (d * d) as u64;
            }
        }
        let n = nbig as f64;
        counts
            .iter()
            .map(|&(hp, hm, sd, sd2)| {
                let (p_plus, p_minus) = (hp as f64 / n, hm as f64 / n);
                let md = sd as f64 / n;
                let var = (sd2 as f64 / n - md * md).max(0.0) * n / (n - 1.0);
                let se_diff = (var / n).sqrt();
                OracleDecision {
                    action: Treatment::from_score(p_plus - p_minus),
                    p_plus,
                    p_minus,
                    se_diff,
                    near_tie: (p_plus - p_minus).abs() <= NEAR_TIE_SE * se_diff,
                }
            })
            .collect()
    });
    Ok((0..lambdas.len())
        .map(|l| per_h1.iter().map(|d| d[l]).collect())
        .collect())
}

/// The true optimal regime at a threshold: `sgn(true c)` at stage 2 and, at
/// stage 1, the arm with the larger `pr(Y > threshold | h1, a1)` computed from
/// a frozen set of interim-noise draws with `ε` integrated out.
#[derive(Clone, Debug)]
pub struct OracleRegime {
    pub config: GenerativeConfig,
    pub threshold: f64,
    xi_draws: Vec<[f64; 2]>,
}

impl OracleRegime {
    pub fn new(config: &GenerativeConfig, threshold: f64, draws: usize, seed: u64) -> Self {
        OracleRegime {
            config: config.clone(),
            threshold,
            xi_draws: xi_draws(config, draws, seed),
        }
    }

    /// `pr(Y <= threshold | h1, a1)` for both arms, as `(minus, plus)`.
    pub fn arm_cdfs(&self, x1: &[f64], y: f64) -> (f64, f64) {
        let s = optimal_means(&self.config, x1, &self.xi_draws);
        let k = self.xi_draws.len() as f64;
        (
            s[0].iter().map(|m| normal::cdf(y - m)).sum::<f64>() / k,
            s[1].iter().map(|m| normal::cdf(y - m)).sum::<f64>() / k,
        )
    }
}

impl Regime for OracleRegime {
    fn stage1(&self, h1: &History1<'_>) -> Treatment {
        let (minus, plus) = self.arm_cdfs(h1.x1, self.threshold);
        Treatment::from_score(minus - plus)
    }

    fn stage2(&self, h2: &History2<'_>) -> Treatment {
        self.config.true_pi2(h2.x2)
    }
}

fn xi_draws(config: &GenerativeConfig, k: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi = config.xi_sampler();
    (0..k).map(|_| [xi.sample(&mut rng), xi.sample(&mut rng)]).collect()
}

/// `m + |c|` at each interim draw, for `a1 = -1` and `a1 = +1`.
fn optimal_means(config: &GenerativeConfig, x1: &[f64], draws: &[[f64; 2]]) -> [Vec<f64>; 2] {
    Treatment::BOTH.map(|a1| {
        let b = config.b(a1);
        let eta = config.eta(x1, a1);
        let m0 = b[0][0] * x1[0] + b[0][1] * x1[1];
        let m1 = b[1][0] * x1[0] + b[1][1] * x1[1];
        draws
            .iter()
            .map(|[e0, e1]| {
                let x2 = [m0 + eta * e0, m1 + eta * e1];
                config.true_m(&x2) + config.true_c(&x2).abs()
            })
            .collect()
    })
}

/// Arm-wise outcome means for a sample of histories. The better arm is chosen
/// with one set of draws and scored with an independent set, so the max over
/// arms carries no upward Monte Carlo bias, and the reported SE covers both
/// history sampling and draw noise.
struct Population {
    select: Vec<[Vec<f64>; 2]>,
    score: Vec<[Vec<f64>; 2]>,
}

impl Population {
    fn new(config: &GenerativeConfig, n_h1: usize, draws: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if n_h1 == 0 || draws == 0 {
            return Err(Error::InvalidArgument("need at least one history and one draw".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0));
        let x1s: Vec<[f64; 2]> = (0..n_h1).map(|_| config.draw_x1(&mut rng)).collect();
        // Fresh draws per history so Monte Carlo error averages out over H1.
        let (sel, sco) = (mix_seed(seed, 1), mix_seed(seed, 2));
        let (select, score) = par::map_range(n_h1, |i| {
            let x1 = &x1s[i];
            let a = optimal_means(config, x1, &xi_draws(config, draws, mix_seed(sel, i as u64)));
            let b = optimal_means(config, x1, &xi_draws(config, draws, mix_seed(sco, i as u64)));
            (a, b)
        })
        .into_iter()
        .unzip();
        Ok(Population { select, score })
    }

    fn centres(&self) -> Vec<f64> {
        self.score.iter().flat_map(|a| [a[0][0], a[1][0]]).collect()
    }

    /// Per-history `pr(Y <= y)` under the better arm.
    fn best_cdfs(&self, y: f64) -> Vec<f64> {
        let f = |s: &Vec<f64>| s.iter().map(|m| normal::cdf(y - m)).sum::<f64>() / s.len() as f64;
        par::map_range(self.score.len(), |i| {
            let arm = usize::from(f(&self.select[i][1]) < f(&self.select[i][0]));
            f(&self.score[i][arm])
        })
    }
}

/// `E_{H1} max_{a1} pr(Y > λ | H1, a1)` under the optimal second stage.
pub fn oracle_optimal_value(
    config: &GenerativeConfig,
    lambda: f64,
    n_h1: usize,
    draws: usize,
    seed: u64,
) -> Result<OracleResult> {
    let pop = Population::new(config, n_h1, draws, seed)?;
    let vals: Vec<f64> = pop.best_cdfs(lambda).iter().map(|f| 1.0 - f).collect();
    let (value, se) = mean_se(&vals);
    Ok(OracleResult { value, se, n: n_h1 })
}

/// Largest achievable `τ`-quantile, `inf{y : E_{H1} min_{a1} pr(Y <= y | H1, a1) >= τ}`.
pub fn oracle_optimal_quantile(
    config: &GenerativeConfig,
    tau: f64,
    n_h1: usize,
    draws: usize,
    seed: u64,
) -> Result<OracleResult> {
    let pop = Population::new(config, n_h1, draws, seed)?;
    let centres = pop.centres();
    let g = |y: f64| pop.best_cdfs(y).iter().sum::<f64>() / n_h1 as f64;
    let q = invert_increasing(&g, tau, &centres)?;
    let (_, se_f) = mean_se(&pop.best_cdfs(q));
    // Density of the optimal-regime mixture at q by a central difference.
    let h = 1e-3;
    let dens = (g(q + h) - g(q - h)) / (2.0 * h);
    Ok(OracleResult {
        value: q,
        se: se_f / dens.max(f64::MIN_POSITIVE),
        n: n_h1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{validate_dataset, RawRow};
    use crate::regime::ConstantRegime;
    use crate::simgen::{default_config, generate, Variant};

    fn raw(a1: f64, a2: f64, y: f64) -> RawRow {
        RawRow {
            x1: vec![0.0],
            a1,
            x2: vec![0.0],
            a2,
            y,
        }
    }

    const PP: ConstantRegime = ConstantRegime {
        a1: Treatment::Plus,
        a2: Treatment::Plus,
    };

    #[test]
    fn ipw_direct_ratio() {
        let data = validate_dataset(vec![
            raw(1.0, 1.0, 3.0),
            raw(1.0, 1.0, 0.0),
            raw(-1.0, 1.0, 5.0),
            raw(1.0, -1.0, 5.0),
        ])
        .unwrap();
        let v = ipw_value_of(&data, &PP, 1.0).unwrap();
        assert_eq!(v.value, 0.5);
        assert_eq!(v.n_consistent, 2);
        let v = ipw_value_of(&data, &PP, -1.0).unwrap();
        assert_eq!(v.value, 1.0);
        let none = ConstantRegime {
            a1: Treatment::Minus,
            a2: Treatment::Minus,
        };
        assert!(matches!(
            ipw_value_of(&data, &none, 0.0),
            Err(Error::EmptyConsistentSubgroup)
        ));
    }

    #[test]
    fn true_prob_limits_and_monotone() {
        let g = default_config(Variant::Gaussian);
        assert_eq!(oracle_true_prob(&g, &PP, -1e9, 10_000, 1).unwrap().value, 1.0);
        let p: Vec<f64> = [-2.0, 0.0, 2.0]
            .iter()
            .map(|&l| oracle_true_prob(&g, &PP, l, 10_000, 1).unwrap().value)
            .collect();
        assert!(p[0] >= p[1] && p[1] >= p[2]);
        assert!(oracle_true_prob(&g, &PP, 0.0, 100, 1).is_err());
    }

    #[test]
    fn integrated_and_raw_truths_agree() {
        let g = default_config(Variant::Gaussian).with_c(0.5);
        let raw = oracle_true_prob(&g, &PP, 1.0, 200_000, 2).unwrap();
        let int = true_prob_integrated(&g, &PP, 1.0, 200_000, 3).unwrap();
        let se = (raw.se.powi(2) + int.se.powi(2)).sqrt();
        assert!((raw.value - int.value).abs() < 4.0 * se, "{raw:?} {int:?}");
        let rq = oracle_true_quantile(&g, &PP, 0.3, 200_000, 4).unwrap();
        let iq = true_quantile_integrated(&g, &PP, 0.3, 200_000, 5).unwrap();
        let se = (rq.se.powi(2) + iq.se.powi(2)).sqrt();
        assert!((rq.value - iq.value).abs() < 4.0 * se, "{rq:?} {iq:?}");
    }

    #[test]
    fn forced_arm_matches_consistent_subgroup() {
        let g = default_config(Variant::Gaussian).with_c(1.0);
        let forced = oracle_true_prob(&g, &PP, 0.5, 100_000, 11).unwrap();
        let test = generate(&g, 400_000, 12).unwrap();
        let sub = ipw_value_of(&test, &PP, 0.5).unwrap();
        let se = (forced.se.powi(2) + sub.se.powi(2)).sqrt();
        assert!((forced.value - sub.value).abs() < 3.0 * se, "{forced:?} {sub:?}");
    }

    #[test]
    fn oracle_regime_beats_constant_regimes() {
        let g = default_config(Variant::Gaussian).with_c(0.5);
        let lam = 2.0;
        let opt = OracleRegime::new(&g, lam, 2000, 1);
        let best = true_prob_integrated(&g, &opt, lam, 20_000, 2).unwrap();
        for r in ConstantRegime::all() {
            let v = true_prob_integrated(&g, &r, lam, 20_000, 2).unwrap();
            assert!(best.value >= v.value - 3.0 * (best.se.powi(2) + v.se.powi(2)).sqrt());
        }
        let pop = oracle_optimal_value(&g, lam, 20_000, 2000, 3).unwrap();
        assert!((pop.value - best.value).abs() < 4.0 * (pop.se.powi(2) + best.se.powi(2)).sqrt() + 0.005);
    }

    #[test]
    fn optimal_quantile_dominates_constant_regimes() {
        let g = default_config(Variant::Gaussian).with_c(1.0);
        let q = oracle_optimal_quantile(&g, 0.1, 5000, 500, 4).unwrap();
        for r in ConstantRegime::all() {
            let v = true_quantile_integrated(&g, &r, 0.1, 20_000, 5).unwrap();
            assert!(
                q.value >= v.value - 3.0 * (q.se.powi(2) + v.se.powi(2)).sqrt(),
                "{q:?} {v:?}"
            );
        }
    }

    #[test]
    fn oracle_rule_shape_and_checks() {
        let g = default_config(Variant::Gaussian).with_c(0.5);
        let h1s = vec![vec![1.0, 1.0], vec![-1.0, 2.0]];
        let out = oracle_optimal_rule(&g, &[-4.0, 4.0], &h1s, 100_000, 1).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].len(), 2);
        for d in out.iter().flatten() {
            assert!((0.0..=1.0).contains(&d.p_plus) && (0.0..=1.0).contains(&d.p_minus));
        }
        assert!(oracle_optimal_rule(&g, &[0.0], &h1s, 10, 1).is_err());
        assert!(oracle_optimal_rule(&g, &[0.0], &[vec![1.0]], 100_000, 1).is_err());
    }

    #[test]
    fn symmetric_arms_are_near_ties() {
        let mut g = default_config(Variant::Gaussian);
        g.b_minus = g.b_plus;
        let out = oracle_optimal_rule(&g, &[0.0, 1.0], &[vec![1.0, 1.0], vec![0.0, 2.0]], 100_000, 3).unwrap();
        assert!(out.iter().flatten().all(|d| d.near_tie && d.action == Treatment::Plus));
    }
}
