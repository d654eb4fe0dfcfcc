//! Run configuration assembled from flags, environment and an optional JSON
//! file. The file wins any conflict and a warning names the overridden key.

use std::path::{Path, PathBuf};

use iqlearn::conditional_joint::{DependenceKind, McConfig, VarianceFit, DEFAULT_DRAWS};
use iqlearn::simgen::{Estimator, Variant};
use iqlearn::tiq::CdfKind;
use iqlearn::{EstimatorConfig, QiqConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CdfChoice {
    Normal,
    Empirical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum JointChoice {
    Copula,
    Kde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VarianceChoice {
    LeastSquares,
    PseudoLikelihood,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub regime: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub h1_grid: Option<PathBuf>,
    pub lambda: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
    pub cdf: Option<CdfChoice>,
    pub joint: Option<JointChoice>,
    pub variance_fit: Option<VarianceChoice>,
    pub mc_draws: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub delta: Option<f64>,
    pub tolerance: Option<f64>,
    pub fixed_point_tolerance: Option<f64>,
    pub variant: Option<Variant>,
    pub c: Option<Vec<f64>>,
    pub j: Option<usize>,
    pub n: Option<usize>,
    pub n_test: Option<usize>,
    pub estimators: Option<Vec<Estimator>>,
    pub nbig: Option<usize>,
    pub data_only: Option<bool>,
    pub qq_sims: Option<usize>,
}

fn to_object(cfg: &RunConfig) -> Map<String, Value> {
    match serde_json::to_value(cfg).expect("config serializes") {
        Value::Object(m) => m.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => unreachable!("config is a struct"),
    }
}

pub fn load_file(path: &Path) -> Result<RunConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
}

/// Overlays `file` on `flags`. Returns the merged config and one warning per
/// key set differently in both.
pub fn merge(flags: &RunConfig, file: &RunConfig) -> (RunConfig, Vec<String>) {
    let mut merged = to_object(flags);
    let mut warnings = Vec::new();
    for (key, value) in to_object(file) {
        if let Some(old) = merged.get(&key) {
            if *old != value {
                warnings.push(format!("config file sets `{key}` to {value}, overriding {old}"));
            }
        }
        merged.insert(key, value);
    }
    let cfg = serde_json::from_value(Value::Object(merged)).expect("merged config deserializes");
    (cfg, warnings)
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// The config as echoed into output metadata. Output location and thread
    /// count do not affect results and are left out.
    pub fn echo(&self) -> String {
        let mut m = to_object(self);
        m.remove("out");
        m.remove("threads");
        serde_json::to_string(&Value::Object(m)).expect("config serializes")
    }

    pub fn require_data(&self) -> Result<&Path, CliError> {
        self.data
            .as_deref()
            .ok_or_else(|| CliError::Usage("missing --data".into()))
    }

    pub fn single(&self, values: &Option<Vec<f64>>, flag: &str) -> Result<f64, CliError> {
        match values.as_deref() {
            Some([v]) => Ok(*v),
            Some(_) => Err(CliError::Usage(format!("--{flag} takes exactly one value here"))),
            None => Err(CliError::Usage(format!("missing --{flag}"))),
        }
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            cdf: match self.cdf.unwrap_or(CdfChoice::Normal) {
                CdfChoice::Normal => CdfKind::Normal,
                CdfChoice::Empirical => CdfKind::Empirical,
            },
            dependence: match self.joint.unwrap_or(JointChoice::Copula) {
                JointChoice::Copula => DependenceKind::GaussianCopula,
                JointChoice::Kde => DependenceKind::Kde,
            },
            variance_fit: match self.variance_fit.unwrap_or(VarianceChoice::LeastSquares) {
                VarianceChoice::LeastSquares => VarianceFit::LeastSquares,
                VarianceChoice::PseudoLikelihood => VarianceFit::PseudoLikelihood,
            },
            mc: McConfig {
                draws: self.mc_draws.unwrap_or(DEFAULT_DRAWS),
                seed: self.seed(),
            },
            ..EstimatorConfig::default()
        }
    }

    pub fn qiq_config(&self) -> QiqConfig {
        let d = QiqConfig::default();
        QiqConfig {
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            fixed_point_tolerance: self.fixed_point_tolerance.unwrap_or(d.fixed_point_tolerance),
            delta: self.delta.unwrap_or(d.delta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_wins_with_warning() {
        let flags = RunConfig {
            seed: Some(3),
            lambda: Some(vec![2.0]),
            ..Default::default()
        };
        let file = RunConfig {
            seed: Some(9),
            mc_draws: Some(100),
            lambda: Some(vec![2.0]),
            ..Default::default()
        };
        let (m, w) = merge(&flags, &file);
        assert_eq!(m.seed, Some(9));
        assert_eq!(m.mc_draws, Some(100));
        assert_eq!(m.lambda, Some(vec![2.0]));
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("seed"));
    }

    #[test]
    fn echo_drops_location_and_threads() {
        let cfg = RunConfig {
            out: Some("x".into()),
            threads: Some(4),
            seed: Some(2),
            ..Default::default()
        };
        assert_eq!(cfg.echo(), r#"{"seed":2}"#);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"variant": "chisq", "estimators": ["tiq", "binq"]}"#).unwrap();
        assert_eq!(cfg.variant, Some(Variant::ChisqSkew));
        assert_eq!(cfg.estimators, Some(vec![Estimator::Tiq, Estimator::BinaryQ]));
    }
}
