use std::path::{Path, PathBuf};
use std::sync::Arc;

use iqlearn::baselines::{fit_binary_q, fit_qlearning, BinaryQModel, IqLearningModel, QLearningModel};
use iqlearn::domain::dot;
use iqlearn::io::{read_dataset, write_dataset};
use iqlearn::residual_cdf::qq_check;
use iqlearn::simgen::{default_config, generate, run_experiment, Estimator, ExperimentConfig, TargetKind, Variant};
use iqlearn::stage2::{default_design, fit_stage2, FittedStage2};
use iqlearn::tiq::ArmContrast;
use iqlearn::value_oracle::{
    ipw_value_of, oracle_optimal_quantile, oracle_optimal_rule, oracle_optimal_value, MIN_RULE_DRAWS,
};
use iqlearn::{fit_components, Dataset, History1, QiqModel, Regime, TiqModel, Treatment};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{num, Outputs};
use crate::CliError;

const ORACLE_HISTORIES: usize = 20_000;
const ORACLE_DRAWS: usize = 1_000;
const QQ_LEVEL: f64 = 0.95;

/// What a fit command saves and `value` / `diagnose` load back.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FittedModel {
    Tiq(TiqModel),
    Qiq(QiqModel),
    Q(QLearningModel),
    Iq(IqLearningModel),
    Binq(BinaryQModel),
}

impl FittedModel {
    fn regime(&self) -> &dyn Regime {
        match self {
            FittedModel::Tiq(m) => m,
            FittedModel::Qiq(m) => m,
            FittedModel::Q(m) => m,
            FittedModel::Iq(m) => m,
            FittedModel::Binq(m) => m,
        }
    }

    fn stage2(&self) -> Option<&FittedStage2> {
        match self {
            FittedModel::Tiq(m) => Some(&m.components.stage2),
            FittedModel::Qiq(m) => Some(&m.components.stage2),
            FittedModel::Iq(m) => Some(&m.components.stage2),
            FittedModel::Q(m) => Some(&m.stage2),
            FittedModel::Binq(_) => None,
        }
    }

    fn check_dims(&self, data: &Dataset) -> Result<(), CliError> {
        let ok = match self {
            FittedModel::Binq(m) => {
                m.stage1_design.main.check_dims(data.p1(), data.p2()).is_ok()
                    && m.stage2_design.main.check_dims(data.p1(), data.p2()).is_ok()
                    && m.stage2_design.contrast.check_dims(data.p1(), data.p2()).is_ok()
            }
            _ => {
                let s = self.stage2().expect("non-binary models carry a stage-2 fit");
                s.p1 == data.p1() && s.p2 == data.p2()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(CliError::Data(format!(
                "data has {} baseline and {} interim covariates, which the model does not accept",
                data.p1(),
                data.p2()
            )))
        }
    }
}

pub fn dispatch(name: &str, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Outputs::new(name, cfg)?;
    match name {
        "fit-tiq" | "fit-qiq" | "fit-q" | "fit-iq" | "fit-binq" => fit(name, cfg, &mut out)?,
        "simulate" => simulate(cfg, &mut out)?,
        "value" => value(cfg, &mut out)?,
        "oracle" => oracle(cfg, &mut out)?,
        "diagnose" => diagnose(cfg, &mut out)?,
        other => return Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
    Ok(out.written)
}

fn load_data(cfg: &RunConfig, out: &mut Outputs) -> Result<Dataset, CliError> {
    let data = read_dataset(cfg.require_data()?)?;
    out.meta
        .push("data_fingerprint", format!("{:016x}", data.fingerprint()));
    Ok(data)
}

fn load_model(path: &Path) -> Result<FittedModel, CliError> {
    let bad = |e: &dyn std::fmt::Display| CliError::Data(format!("model file {}: {e}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(&e))?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
    let model = doc
        .get_mut("model")
        .map(Value::take)
        .ok_or_else(|| CliError::Usage(format!("{} holds no fitted model", path.display())))?;
    serde_json::from_value(model).map_err(|e| bad(&e))
}

fn contrast_row(c: &ArmContrast) -> (Treatment, f64, f64) {
    (c.decision(), c.d, c.se)
}

fn fit(name: &str, cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let data = load_data(cfg, out)?;
    let est = cfg.estimator_config();
    let x1s: Vec<Vec<f64>> = data.rows().iter().map(|r| r.x1.clone()).collect();
    // Per patient: (a1, d̂ or score, MC SE).
    let (model, summary, first): (FittedModel, Value, Vec<(Treatment, f64, f64)>) = match name {
        "fit-tiq" => {
            let lambda = cfg.single(&cfg.lambda, "lambda")?;
            let m = iqlearn::fit_tiq(&data, lambda, &est)?;
            let first: Vec<_> = m.decisions(&x1s).iter().map(contrast_row).collect();
            let summary = json!({
                "lambda": lambda,
                "estimated_exceedance": m.estimated_exceedance(|_, a| a),
                "cdf": m.components.cdf.variant_name(),
                "mc_draws": est.mc.draws,
                "stage2": m.components.stage2.summary(),
            });
            (FittedModel::Tiq(m), summary, first)
        }
        "fit-qiq" => {
            let tau = cfg.single(&cfg.tau, "tau")?;
            let m = iqlearn::fit_qiq(&data, tau, &est, cfg.qiq_config())?;
            let c = &m.components;
            let first = x1s
                .par_iter()
                .map(|x1| contrast_row(&c.d_hat(&History1 { x1 }, m.rule_threshold)))
                .collect();
            let summary = json!({
                "tau": tau,
                "y_star": m.y_star,
                "f_at_y_star": m.f_at_y_star,
                "branch": m.branch,
                "rule_threshold": m.rule_threshold,
                "quantile_value": m.quantile_value,
                "cdf": c.cdf.variant_name(),
                "mc_draws": est.mc.draws,
                "stage2": c.stage2.summary(),
            });
            (FittedModel::Qiq(m), summary, first)
        }
        "fit-iq" => {
            let m = IqLearningModel::new(Arc::new(fit_components(&data, &est)?));
            let c = &m.components;
            let first = x1s
                .par_iter()
                .map(|x1| contrast_row(&c.arm_samples(&History1 { x1 }).mean_contrast()))
                .collect();
            let summary = json!({ "mc_draws": est.mc.draws, "stage2": c.stage2.summary() });
            (FittedModel::Iq(m), summary, first)
        }
        "fit-q" => {
            let m = fit_qlearning(&data, None, None)?;
            let first = x1s
                .iter()
                .map(|x1| {
                    let s = dot(&m.stage1_design.contrast.eval1(&History1 { x1 }), &m.beta11);
                    (Treatment::from_score(s), s, 0.0)
                })
                .collect();
            let summary = json!({
                "stage2": m.stage2.summary(),
                "beta10": m.beta10,
                "beta11": m.beta11,
            });
            (FittedModel::Q(m), summary, first)
        }
        "fit-binq" => {
            let lambda = cfg.single(&cfg.lambda, "lambda")?;
            let m = fit_binary_q(&data, lambda, None, None)?;
            let first = x1s
                .iter()
                .map(|x1| {
                    let s = dot(&m.stage1_design.contrast.eval1(&History1 { x1 }), &m.beta11);
                    (Treatment::from_score(s), s, 0.0)
                })
                .collect();
            let summary = json!({
                "lambda": lambda,
                "m_coef": m.m_coef,
                "c_coef": m.c_coef,
                "beta10": m.beta10,
                "beta11": m.beta11,
                "logistic_iterations": m.logistic_iterations,
            });
            (FittedModel::Binq(m), summary, first)
        }
        _ => unreachable!("dispatch passes fit commands only"),
    };

    let regime = model.regime();
    let n_plus = first.iter().filter(|f| f.0 == Treatment::Plus).count();
    let mut header: Vec<String> = (1..=data.p1()).map(|k| format!("x1_{k}")).collect();
    header.extend(["a1", "a2", "d_hat", "mc_se"].map(String::from));
    let rows: Vec<Vec<String>> = data
        .rows()
        .iter()
        .zip(&first)
        .map(|(r, &(a1, d, se))| {
            let mut row: Vec<String> = r.x1.iter().map(|v| num(*v)).collect();
            row.push(a1.code().to_string());
            row.push(regime.stage2(&r.history2()).code().to_string());
            row.push(num(d));
            row.push(num(se));
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv("decisions.csv", &header_refs, &rows)?;

    let body = json!({
        "summary": summary,
        "first_stage_plus_fraction": n_plus as f64 / data.len() as f64,
        "n": data.len(),
    });
    let exact = serde_json::to_value(&model).expect("model serializes");
    out.write_json_with("model.json", body, Some(("model", exact)))
}

fn simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let variant = cfg.variant.unwrap_or(Variant::Gaussian);
    let c_values = cfg.c.clone().unwrap_or_else(|| vec![0.0]);
    let n = cfg.n.unwrap_or(250);
    if cfg.data_only == Some(true) {
        let gen = default_config(variant).with_c(c_values[0]);
        let data = generate(&gen, n, cfg.seed())?;
        let path = out.path("data.csv");
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data, &out.meta)?;
        std::fs::write(&path, buf).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        out.written.push(path);
        return Ok(());
    }
    let lambdas = cfg.lambda.clone().unwrap_or_default();
    let taus = cfg.tau.clone().unwrap_or_default();
    if lambdas.is_empty() && taus.is_empty() {
        return Err(CliError::Usage("simulate needs --lambda or --tau".into()));
    }
    let exp = ExperimentConfig {
        generative: default_config(variant),
        c_values,
        replications: cfg.j.unwrap_or(10),
        n_train: n,
        n_test: cfg.n_test.unwrap_or(10_000),
        estimators: cfg.estimators.clone().unwrap_or_else(|| Estimator::ALL.to_vec()),
        lambdas,
        taus,
        estimator: cfg.estimator_config(),
        qiq: cfg.qiq_config(),
        seed: cfg.seed(),
    };
    let res = run_experiment(&exp)?;

    let target_name = |t: TargetKind| match t {
        TargetKind::Lambda => "lambda",
        TargetKind::Tau => "tau",
    };
    let c_pos = |c: f64| exp.c_values.iter().position(|&x| x == c).unwrap_or(usize::MAX);
    type Key = (usize, usize, Estimator, TargetKind, f64);
    let mut rows: Vec<(Key, Vec<String>)> = Vec::new();
    for r in &res.rows {
        let key = (r.replication, c_pos(r.c), r.estimator, r.target, r.level);
        rows.push((
            key,
            vec![
                r.replication.to_string(),
                r.estimator.name().into(),
                num(r.c),
                target_name(r.target).into(),
                num(r.level),
                r.target.metric().into(),
                num(r.value),
                r.n_consistent.to_string(),
                String::new(),
            ],
        ));
    }
    for f in &res.failures {
        let key = (f.replication, c_pos(f.c), f.estimator, f.target, f.level);
        rows.push((
            key,
            vec![
                f.replication.to_string(),
                f.estimator.name().into(),
                num(f.c),
                target_name(f.target).into(),
                num(f.level),
                f.target.metric().into(),
                "NaN".into(),
                "0".into(),
                f.error.clone(),
            ],
        ));
    }
    rows.sort_by(|a, b| {
        let (x, y) = (&a.0, &b.0);
        (x.0, x.1, x.2, x.3)
            .cmp(&(y.0, y.1, y.2, y.3))
            .then(x.4.total_cmp(&y.4))
    });
    let rows: Vec<Vec<String>> = rows.into_iter().map(|r| r.1).collect();
    out.write_csv(
        "results.csv",
        &[
            "replication",
            "estimator",
            "C",
            "target",
            "level",
            "metric",
            "value",
            "n_consistent",
            "error",
        ],
        &rows,
    )?;

    let summary: Vec<Vec<String>> = res
        .summary
        .iter()
        .map(|s| {
            vec![
                s.estimator.name().into(),
                num(s.c),
                target_name(s.target).into(),
                num(s.level),
                s.target.metric().into(),
                num(s.mean),
                num(s.se),
                s.n_ok.to_string(),
                s.n_failed.to_string(),
            ]
        })
        .collect();
    out.write_csv(
        "summary.csv",
        &[
            "estimator",
            "C",
            "target",
            "level",
            "metric",
            "mean",
            "se",
            "n_ok",
            "n_failed",
        ],
        &summary,
    )
}

fn value(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let path = cfg
        .regime
        .as_deref()
        .ok_or_else(|| CliError::Usage("missing --regime".into()))?;
    let model = load_model(path)?;
    let data = load_data(cfg, out)?;
    model.check_dims(&data)?;
    let lambdas = match (&cfg.lambda, &model) {
        (Some(l), _) if !l.is_empty() => l.clone(),
        (_, FittedModel::Tiq(m)) => vec![m.lambda],
        (_, FittedModel::Binq(m)) => vec![m.lambda],
        _ => return Err(CliError::Usage("missing --lambda".into())),
    };
    let regime = model.regime();
    let mut values = Vec::new();
    for &lambda in &lambdas {
        let v = ipw_value_of(&data, regime, lambda)?;
        values.push(json!({
            "lambda": lambda,
            "value": v.value,
            "se": v.se,
            "n_consistent": v.n_consistent,
        }));
    }
    out.write_json_with("value.json", json!({ "n": data.len(), "values": values }), None)
}

fn read_h1_grid(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let file = iqlearn::io::open(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr.headers().map_err(iqlearn::Error::from)?.clone();
    let idx: Vec<usize> = ["x1_1", "x1_2"]
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| CliError::Data(format!("{}: missing column `{c}`", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let mut grid = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(iqlearn::Error::from)?;
        let h: Vec<f64> = idx
            .iter()
            .map(|&i| {
                let s = rec.get(i).unwrap_or("");
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::Data(format!("{}: bad value `{s}` at row {row}", path.display())))
            })
            .collect::<Result<_, _>>()?;
        grid.push(h);
    }
    Ok(grid)
}

fn oracle(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let variant = cfg.variant.unwrap_or(Variant::Gaussian);
    let c_values = cfg.c.clone().unwrap_or_else(|| vec![0.0]);
    let lambdas = cfg.lambda.clone().unwrap_or_default();
    let taus = cfg.tau.clone().unwrap_or_default();
    if lambdas.is_empty() == taus.is_empty() {
        return Err(CliError::Usage("oracle needs exactly one of --lambda or --tau".into()));
    }
    let grid = cfg.h1_grid.as_deref().map(read_h1_grid).transpose()?;
    let nbig = cfg.nbig.unwrap_or(MIN_RULE_DRAWS);
    let seed = cfg.seed();
    let mut values = Vec::new();
    let mut actions = Vec::new();
    for &c in &c_values {
        let gen = default_config(variant).with_c(c);
        // Thresholds at which the per-history rule is evaluated.
        let mut thresholds = Vec::new();
        for &l in &lambdas {
            let v = oracle_optimal_value(&gen, l, ORACLE_HISTORIES, ORACLE_DRAWS, seed)?;
            values.push(vec![num(c), "lambda".into(), num(l), num(v.value), num(v.se)]);
            thresholds.push(("lambda", l, l));
        }
        for &t in &taus {
            let v = oracle_optimal_quantile(&gen, t, ORACLE_HISTORIES, ORACLE_DRAWS, seed)?;
            values.push(vec![num(c), "tau".into(), num(t), num(v.value), num(v.se)]);
            thresholds.push(("tau", t, v.value));
        }
        if let Some(grid) = &grid {
            let ys: Vec<f64> = thresholds.iter().map(|t| t.2).collect();
            let rule = oracle_optimal_rule(&gen, &ys, grid, nbig, seed)?;
            for (k, per_h1) in rule.iter().enumerate() {
                let (target, level, y) = thresholds[k];
                for (i, d) in per_h1.iter().enumerate() {
                    actions.push(vec![
                        num(c),
                        target.into(),
                        num(level),
                        num(y),
                        i.to_string(),
                        num(grid[i][0]),
                        num(grid[i][1]),
                        d.action.code().to_string(),
                        num(d.p_plus),
                        num(d.p_minus),
                        num(d.se_diff),
                        d.near_tie.to_string(),
                    ]);
                }
            }
        }
    }
    out.write_csv("oracle_values.csv", &["C", "target", "level", "value", "se"], &values)?;
    if grid.is_some() {
        out.write_csv(
            "oracle_actions.csv",
            &[
                "C",
                "target",
                "level",
                "threshold",
                "h1",
                "x1_1",
                "x1_2",
                "action",
                "p_plus",
                "p_minus",
                "se_diff",
                "near_tie",
            ],
            &actions,
        )?;
    }
    Ok(())
}

fn diagnose(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let data = load_data(cfg, out)?;
    let stage2 = match cfg.model.as_deref() {
        Some(path) => {
            let model = load_model(path)?;
            model.check_dims(&data)?;
            model
                .stage2()
                .cloned()
                .ok_or_else(|| CliError::Usage("model has no least-squares second stage to diagnose".into()))?
        }
        None => fit_stage2(&data, &default_design(data.p2()))?,
    };
    let fitted: Vec<f64> = data
        .rows()
        .iter()
        .map(|r| {
            let (m, c) = stage2.predict(&r.history2());
            m + r.a2.value() * c
        })
        .collect();
    let resid: Vec<f64> = data.rows().iter().zip(&fitted).map(|(r, f)| r.y - f).collect();
    let sims = cfg.qq_sims.unwrap_or(1000);
    let qq = qq_check(&resid, sims, QQ_LEVEL, cfg.seed())?;
    let qq_rows: Vec<Vec<String>> = qq
        .points
        .iter()
        .map(|p| {
            let outside = p[1] < p[2] || p[1] > p[3];
            vec![num(p[0]), num(p[1]), num(p[2]), num(p[3]), outside.to_string()]
        })
        .collect();
    out.write_csv(
        "qq.csv",
        &["theoretical", "standardized", "lower", "upper", "outside"],
        &qq_rows,
    )?;
    let resid_rows: Vec<Vec<String>> = data
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), r.a2.code().to_string(), num(fitted[i]), num(resid[i])])
        .collect();
    out.write_csv("residuals.csv", &["row", "a2", "fitted", "residual"], &resid_rows)?;

    let mut spread = Vec::new();
    let mut spread_json = Vec::new();
    for arm in Treatment::BOTH {
        let e: Vec<f64> = data
            .rows()
            .iter()
            .zip(&resid)
            .filter(|(r, _)| r.a2 == arm)
            .map(|(_, e)| *e)
            .collect();
        let k = e.len() as f64;
        let mean = e.iter().sum::<f64>() / k;
        let sd = (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        spread.push(vec![arm.code().to_string(), e.len().to_string(), num(mean), num(sd)]);
        spread_json.push(json!({ "a2": arm.code(), "n": e.len(), "mean": mean, "sd": sd }));
    }
    out.write_csv("spread.csv", &["a2", "n", "mean", "sd"], &spread)?;
    out.write_json_with(
        "diagnose.json",
        json!({
            "n": data.len(),
            "qq_band_level": QQ_LEVEL,
            "qq_sims": sims,
            "qq_outside": qq.outside,
            "qq_band_violated": qq.violates(),
            "spread": spread_json,
            "stage2": stage2.summary(),
        }),
        None,
    )
}
