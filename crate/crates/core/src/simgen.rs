//! Synthetic two-stage trials and the Monte Carlo protocol used to compare
//! estimators on them.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_binary_q, fit_qlearning};
use crate::domain::{Dataset, History1, Trajectory, Treatment};
use crate::error::{Error, Result};
use crate::par;
use crate::qiq::{PooledCdf, QiqConfig, QiqModel};
use crate::regime::Regime;
use crate::tiq::{fit_components, EstimatorConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Normal `ξ` with `C` scaling the arm-dependent heteroskedasticity.
    Gaussian,
    /// Standardized χ² `ξ` with `df = 10C + 1`.
    #[serde(alias = "chisq")]
    ChisqSkew,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Variant::Gaussian),
            "chisq" | "chisq-skew" => Ok(Variant::ChisqSkew),
            other => Err(Error::InvalidArgument(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerativeConfig {
    pub variant: Variant,
    pub c: f64,
    pub rho: f64,
    pub gamma0: [f64; 3],
    pub gamma1: [f64; 3],
    pub beta20: [f64; 3],
    pub beta21: [f64; 3],
    pub b_plus: [[f64; 2]; 2],
    pub b_minus: [[f64; 2]; 2],
    pub seed: u64,
}

pub fn default_config(variant: Variant) -> GenerativeConfig {
    GenerativeConfig {
        variant,
        c: 0.0,
        rho: 0.5,
        gamma0: [1.0, 0.5, 0.0],
        gamma1: [-1.0, -0.5, 0.0],
        beta20: [0.25, -1.0, 0.5],
        beta21: [1.0, -0.5, -0.25],
        b_plus: [[-0.1, -0.1], [0.1, 0.1]],
        b_minus: [[0.5, -0.1], [-0.1, 0.5]],
        seed: 0,
    }
}

fn lin3(coef: &[f64; 3], x: &[f64]) -> f64 {
    coef[0] + coef[1] * x[0] + coef[2] * x[1]
}

impl GenerativeConfig {
    pub fn with_c(&self, c: f64) -> Self {
        GenerativeConfig { c, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.c) {
            return Err(Error::InvalidArgument(format!("C must lie in [0, 1], got {}", self.c)));
        }
        if self.rho.is_nan() || self.rho.abs() >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "correlation {} does not give a positive definite matrix",
                self.rho
            )));
        }
        Ok(())
    }

    /// Degrees of freedom of the χ² noise in the skew variant.
    pub fn chisq_df(&self) -> f64 {
        10.0 * self.c + 1.0
    }

    pub fn draw_x1<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        [1.0 + z0, 1.0 + self.rho * z0 + (1.0 - self.rho * self.rho).sqrt() * z1]
    }

    /// Scale `η` multiplying the interim noise.
    pub fn eta(&self, x1: &[f64], a1: Treatment) -> f64 {
        let k = match self.variant {
            Variant::Gaussian => self.c / 2.0,
            Variant::ChisqSkew => 0.5,
        };
        let a = a1.value();
        (k * (lin3(&self.gamma0, x1) + a * lin3(&self.gamma1, x1))).exp()
    }

    /// Sampler for one standardized noise coordinate.
    pub fn xi_sampler(&self) -> XiSampler {
        match self.variant {
            Variant::Gaussian => XiSampler::Normal,
            Variant::ChisqSkew => {
                let df = self.chisq_df();
                XiSampler::Chisq {
                    dist: ChiSquared::new(df).expect("df is at least 1"),
                    df,
                }
            }
        }
    }

    pub fn b(&self, a1: Treatment) -> &[[f64; 2]; 2] {
        match a1 {
            Treatment::Plus => &self.b_plus,
            Treatment::Minus => &self.b_minus,
        }
    }

    pub fn draw_x2<R: Rng + ?Sized>(&self, x1: &[f64], a1: Treatment, xi: &XiSampler, rng: &mut R) -> [f64; 2] {
        let b = self.b(a1);
        let eta = self.eta(x1, a1);
        let e0 = xi.sample(rng);
        let e1 = xi.sample(rng);
        [
            b[0][0] * x1[0] + b[0][1] * x1[1] + eta * e0,
            b[1][0] * x1[0] + b[1][1] * x1[1] + eta * e1,
        ]
    }

    /// True main effect `m(h2) = h2'β20`.
    pub fn true_m(&self, x2: &[f64]) -> f64 {
        lin3(&self.beta20, x2)
    }

    /// True contrast `c(h2) = h2'β21`.
    pub fn true_c(&self, x2: &[f64]) -> f64 {
        lin3(&self.beta21, x2)
    }

    /// The optimal second-stage rule, which does not depend on the target.
    pub fn true_pi2(&self, x2: &[f64]) -> Treatment {
        Treatment::from_score(self.true_c(x2))
    }
}

#[derive(Clone, Copy, Debug)]
pub enum XiSampler {
    Normal,
    Chisq { dist: ChiSquared<f64>, df: f64 },
}

impl XiSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            XiSampler::Normal => rng.sample(StandardNormal),
            XiSampler::Chisq { dist, df } => (dist.sample(rng) - df) / (2.0 * df).sqrt(),
        }
    }
}

fn random_treatment<R: Rng + ?Sized>(rng: &mut R) -> Treatment {
    if rng.random::<bool>() {
        Treatment::Plus
    } else {
        Treatment::Minus
    }
}

/// `n` randomized trajectories; deterministic given `seed`.
pub fn generate(config: &GenerativeConfig, n: usize, seed: u64) -> Result<Dataset> {
    config.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi = config.xi_sampler();
    let rows = (0..n)
        .map(|_| {
            let x1 = config.draw_x1(&mut rng);
            let a1 = random_treatment(&mut rng);
            let x2 = config.draw_x2(&x1, a1, &xi, &mut rng);
            let a2 = random_treatment(&mut rng);
            let eps: f64 = rng.sample(StandardNormal);
            let y = config.true_m(&x2) + a2.value() * config.true_c(&x2) + eps;
            Trajectory {
                x1: x1.to_vec(),
                a1,
                x2: x2.to_vec(),
                a2,
                y,
            }
        })
        .collect();
    Dataset::from_trajectories(rows)
}

/// Outcomes of the rows whose observed treatments match `recs`.
pub fn consistent_outcomes(data: &Dataset, recs: &[(Treatment, Treatment)]) -> Vec<f64> {
    data.rows()
        .iter()
        .zip(recs)
        .filter(|(r, (a1, a2))| r.a1 == *a1 && r.a2 == *a2)
        .map(|(r, _)| r.y)
        .collect()
}

pub fn exceedance(ys: &[f64], lambda: f64) -> Result<f64> {
    if ys.is_empty() {
        return Err(Error::EmptyConsistentSubgroup);
    }
    Ok(ys.iter().filter(|&&y| y > lambda).count() as f64 / ys.len() as f64)
}

/// `inf{y : F̂(y) >= τ}` for the empirical CDF of `ys`.
pub fn empirical_quantile(ys: &[f64], tau: f64) -> Result<f64> {
    if ys.is_empty() {
        return Err(Error::EmptyConsistentSubgroup);
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must lie in (0, 1], got {tau}"
        )));
    }
    let mut s = ys.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    // Smallest k with k/n >= τ; the product τn can round up past it.
    let mut k = ((tau * n as f64).ceil() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / n as f64 >= tau {
        k -= 1;
    }
    Ok(s[k - 1])
}

/// Fraction of consistent test patients with `Y > λ`.
pub fn evaluate_regime_prob(
    config: &GenerativeConfig,
    regime: &dyn Regime,
    lambda: f64,
    n_test: usize,
    seed: u64,
) -> Result<f64> {
    let test = generate(config, n_test, seed)?;
    exceedance(
        &consistent_outcomes(&test, &regime.recommendations(test.rows())),
        lambda,
    )
}

/// Empirical `τ`-quantile of `Y` among consistent test patients.
pub fn evaluate_regime_quantile(
    config: &GenerativeConfig,
    regime: &dyn Regime,
    tau: f64,
    n_test: usize,
    seed: u64,
) -> Result<f64> {
    let test = generate(config, n_test, seed)?;
    empirical_quantile(&consistent_outcomes(&test, &regime.recommendations(test.rows())), tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Tiq,
    Qiq,
    Q,
    Iq,
    #[serde(rename = "binq")]
    BinaryQ,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Tiq,
        Estimator::Qiq,
        Estimator::Q,
        Estimator::Iq,
        Estimator::BinaryQ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Tiq => "tiq",
            Estimator::Qiq => "qiq",
            Estimator::Q => "q",
            Estimator::Iq => "iq",
            Estimator::BinaryQ => "binq",
        }
    }

    fn handles(self, target: TargetKind) -> bool {
        match self {
            Estimator::Tiq | Estimator::BinaryQ => target == TargetKind::Lambda,
            Estimator::Qiq => target == TargetKind::Tau,
            Estimator::Q | Estimator::Iq => true,
        }
    }

    fn needs_components(self) -> bool {
        matches!(self, Estimator::Tiq | Estimator::Qiq | Estimator::Iq)
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Lambda,
    Tau,
}

impl TargetKind {
    pub fn metric(self) -> &'static str {
        match self {
            TargetKind::Lambda => "prob_exceed",
            TargetKind::Tau => "quantile",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generative: GenerativeConfig,
    pub c_values: Vec<f64>,
    pub replications: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub estimators: Vec<Estimator>,
    pub lambdas: Vec<f64>,
    pub taus: Vec<f64>,
    pub estimator: EstimatorConfig,
    pub qiq: QiqConfig,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 || self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidArgument(
                "replications, n and N must all be at least 1".into(),
            ));
        }
        if self.c_values.is_empty() || self.estimators.is_empty() {
            return Err(Error::InvalidArgument(
                "need at least one C value and one estimator".into(),
            ));
        }
        if self.lambdas.is_empty() && self.taus.is_empty() {
            return Err(Error::InvalidArgument("need at least one λ or τ".into()));
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "quantile level must lie in (0, 1), got {t}"
            )));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !l.is_finite()) {
            return Err(Error::InvalidArgument(format!("threshold must be finite, got {l}")));
        }
        for &c in &self.c_values {
            self.generative.with_c(c).validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub replication: usize,
    pub estimator: Estimator,
    pub c: f64,
    pub target: TargetKind,
    pub level: f64,
    pub value: f64,
    pub n_consistent: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub replication: usize,
    pub estimator: Estimator,
    pub c: f64,
    pub target: TargetKind,
    pub level: f64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub c: f64,
    pub target: TargetKind,
    pub level: f64,
    pub mean: f64,
    pub se: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<FailureRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn summary_for(&self, estimator: Estimator, c: f64, target: TargetKind, level: f64) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.estimator == estimator && s.c == c && s.target == target && s.level == level)
    }

    /// Per-replication values for one cell, in replication order.
    pub fn values_for(&self, estimator: Estimator, c: f64, target: TargetKind, level: f64) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.estimator == estimator && r.c == c && r.target == target && r.level == level)
            .map(|r| (r.replication, r.value))
            .collect()
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeds for replication `j`: training data, test data and Monte Carlo draws.
/// They depend only on `seed + j`, so every `C` shares them.
pub fn replication_seeds(seed: u64, j: usize) -> [u64; 3] {
    let base = seed.wrapping_add(j as u64);
    [mix_seed(base, 1), mix_seed(base, 2), mix_seed(base, 3)]
}

struct Cell {
    estimator: Estimator,
    target: TargetKind,
    level: f64,
}

fn cells(exp: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &e in &exp.estimators {
        for (target, levels) in [(TargetKind::Lambda, &exp.lambdas), (TargetKind::Tau, &exp.taus)] {
            if !e.handles(target) {
                continue;
            }
            for &level in levels {
                out.push(Cell {
                    estimator: e,
                    target,
                    level,
                });
            }
        }
    }
    out
}

fn metric(target: TargetKind, ys: &[f64], level: f64) -> Result<f64> {
    match target {
        TargetKind::Lambda => exceedance(ys, level),
        TargetKind::Tau => empirical_quantile(ys, level),
    }
}

type CellOutcome = std::result::Result<(f64, usize), String>;
/// First-stage actions of one consistent patient: one per threshold, then IQ.
type PatientActions = (Vec<Treatment>, Treatment);

fn evaluate_cell(test: &Dataset, a1: &[Treatment], a2: &[Treatment], target: TargetKind, level: f64) -> CellOutcome {
    let ys: Vec<f64> = test
        .rows()
        .iter()
        .enumerate()
        .filter(|(i, r)| r.a1 == a1[*i] && r.a2 == a2[*i])
        .map(|(_, r)| r.y)
        .collect();
    metric(target, &ys, level)
        .map(|v| (v, ys.len()))
        .map_err(|e| e.to_string())
}

/// One replication at one `C`: fit every estimator on fresh training data and
/// evaluate on a fresh test set.
fn run_cell_group(exp: &ExperimentConfig, j: usize, c: f64) -> Vec<(usize, CellOutcome)> {
    let cells = cells(exp);
    let fail_all = |msg: String| cells.iter().enumerate().map(|(k, _)| (k, Err(msg.clone()))).collect();
    let gen = exp.generative.with_c(c);
    let [s_train, s_test, s_mc] = replication_seeds(exp.seed, j);
    let train = match generate(&gen, exp.n_train, s_train) {
        Ok(d) => d,
        Err(e) => return fail_all(e.to_string()),
    };
    let test = match generate(&gen, exp.n_test, s_test) {
        Ok(d) => d,
        Err(e) => return fail_all(e.to_string()),
    };
    let mut outcomes: Vec<Option<CellOutcome>> = cells.iter().map(|_| None).collect();

    if cells.iter().any(|c| c.estimator.needs_components()) {
        let mut cfg = exp.estimator.clone();
        cfg.mc.seed = s_mc;
        match fit_components(&train, &cfg) {
            Err(e) => {
                for (k, cell) in cells.iter().enumerate() {
                    if cell.estimator.needs_components() {
                        outcomes[k] = Some(Err(e.to_string()));
                    }
                }
            }
            Ok(comp) => {
                let comp = Arc::new(comp);
                // First-stage thresholds: λ for TIQ and the QIQ rule thresholds.
                let mut thresholds: Vec<(usize, f64)> = Vec::new();
                let qiq_cells: Vec<usize> = (0..cells.len())
                    .filter(|&k| cells[k].estimator == Estimator::Qiq)
                    .collect();
                if !qiq_cells.is_empty() {
                    let pool = PooledCdf::new(&comp);
                    for &k in &qiq_cells {
                        match QiqModel::with_pool(comp.clone(), &pool, cells[k].level, exp.qiq) {
                            Ok(m) => thresholds.push((k, m.rule_threshold)),
                            Err(e) => outcomes[k] = Some(Err(e.to_string())),
                        }
                    }
                }
                for (k, cell) in cells.iter().enumerate() {
                    if cell.estimator == Estimator::Tiq {
                        thresholds.push((k, cell.level));
                    }
                }
                let want_iq = cells.iter().any(|c| c.estimator == Estimator::Iq);
                let pi2 = comp.pi2_star();
                let a2: Vec<Treatment> = test.rows().iter().map(|r| pi2.decide2(&r.history2())).collect();
                let ys: Vec<f64> = thresholds.iter().map(|t| t.1).collect();
                // Only stage-2 consistent patients need a first-stage decision.
                let decisions: Vec<Option<PatientActions>> = par::map_range(test.len(), |i| {
                    let r = &test.rows()[i];
                    if r.a2 != a2[i] {
                        return None;
                    }
                    let arms = comp.arm_samples(&History1 { x1: &r.x1 });
                    let by_threshold = ys.iter().map(|&y| arms.tiq_contrast(&comp.cdf, y).decision()).collect();
                    let iq = if want_iq {
                        arms.mean_contrast().decision()
                    } else {
                        Treatment::Plus
                    };
                    Some((by_threshold, iq))
                });
                let first_stage = |pick: &dyn Fn(&PatientActions) -> Treatment| -> Vec<Treatment> {
                    test.rows()
                        .iter()
                        .zip(&decisions)
                        // Rows without a decision are inconsistent at stage 2;
                        // flipping their observed A1 keeps them out.
                        .map(|(r, d)| d.as_ref().map(pick).unwrap_or(r.a1.flip()))
                        .collect()
                };
                for (t, &(k, _)) in thresholds.iter().enumerate() {
                    let a1 = first_stage(&|d| d.0[t]);
                    outcomes[k] = Some(evaluate_cell(&test, &a1, &a2, cells[k].target, cells[k].level));
                }
                if want_iq {
                    let a1 = first_stage(&|d| d.1);
                    for (k, cell) in cells.iter().enumerate() {
                        if cell.estimator == Estimator::Iq {
                            outcomes[k] = Some(evaluate_cell(&test, &a1, &a2, cell.target, cell.level));
                        }
                    }
                }
            }
        }
    }

    if cells.iter().any(|c| c.estimator == Estimator::Q) {
        let res = fit_qlearning(&train, exp.estimator.stage2.as_ref(), None).map(|q| {
            let recs = q.recommendations(test.rows());
            recs.into_iter().unzip::<_, _, Vec<_>, Vec<_>>()
        });
        for (k, cell) in cells.iter().enumerate() {
            if cell.estimator == Estimator::Q {
                outcomes[k] = Some(match &res {
                    Ok((a1, a2)) => evaluate_cell(&test, a1, a2, cell.target, cell.level),
                    Err(e) => Err(e.to_string()),
                });
            }
        }
    }

    for (k, cell) in cells.iter().enumerate() {
        if cell.estimator == Estimator::BinaryQ {
            outcomes[k] = Some(
                match fit_binary_q(&train, cell.level, exp.estimator.stage2.as_ref(), None) {
                    Ok(m) => {
                        let (a1, a2): (Vec<_>, Vec<_>) = m.recommendations(test.rows()).into_iter().unzip();
                        evaluate_cell(&test, &a1, &a2, cell.target, cell.level)
                    }
                    Err(e) => Err(e.to_string()),
                },
            );
        }
    }

    outcomes
        .into_iter()
        .enumerate()
        .map(|(k, o)| (k, o.unwrap_or_else(|| Err("not evaluated".into()))))
        .collect()
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every replication and `C`, returning per-replication rows, failures
/// and per-cell averages with Monte Carlo standard errors.
pub fn run_experiment(exp: &ExperimentConfig) -> Result<ExperimentResult> {
    exp.validate()?;
    let cells = cells(exp);
    let jobs: Vec<(usize, f64)> = (0..exp.replications)
        .flat_map(|j| exp.c_values.iter().map(move |&c| (j, c)))
        .collect();
    let results = par::map(&jobs, |&(j, c)| run_cell_group(exp, j, c));
    let mut out = ExperimentResult::default();
    for (&(j, c), group) in jobs.iter().zip(results) {
        for (k, outcome) in group {
            let cell = &cells[k];
            match outcome {
                Ok((value, n_consistent)) => out.rows.push(ResultRow {
                    replication: j,
                    estimator: cell.estimator,
                    c,
                    target: cell.target,
                    level: cell.level,
                    value,
                    n_consistent,
                }),
                Err(error) => out.failures.push(FailureRecord {
                    replication: j,
                    estimator: cell.estimator,
                    c,
                    target: cell.target,
                    level: cell.level,
                    error,
                }),
            }
        }
    }
    for &c in &exp.c_values {
        for cell in &cells {
            let vals: Vec<f64> = out
                .values_for(cell.estimator, c, cell.target, cell.level)
                .into_iter()
                .map(|v| v.1)
                .collect();
            let n_failed = out
                .failures
                .iter()
                .filter(|f| {
                    f.estimator == cell.estimator && f.c == c && f.target == cell.target && f.level == cell.level
                })
                .count();
            let (mean, se) = mean_se(&vals);
            out.summary.push(SummaryRow {
                estimator: cell.estimator,
                c,
                target: cell.target,
                level: cell.level,
                mean,
                se,
                n_ok: vals.len(),
                n_failed,
            });
        }
    }
    Ok(out)
}
