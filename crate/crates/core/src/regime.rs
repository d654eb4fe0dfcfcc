//! Two-stage treatment regimes.

use serde::{Deserialize, Serialize};

use crate::domain::{dot, FeatureMap, History1, History2, Trajectory, Treatment};
use crate::error::{Error, Result};
use crate::par;

/// A pair of deterministic decision rules.
pub trait Regime: Send + Sync {
    fn stage1(&self, h1: &History1<'_>) -> Treatment;
    fn stage2(&self, h2: &History2<'_>) -> Treatment;

    /// Recommendations for many baseline histories at once.
    fn stage1_batch(&self, x1s: &[&[f64]]) -> Vec<Treatment> {
        par::map(x1s, |x1| self.stage1(&History1 { x1 }))
    }

    /// Recommended `(a1, a2)` for each row, where the second decision uses
    /// the row's observed first treatment.
    fn recommendations(&self, rows: &[Trajectory]) -> Vec<(Treatment, Treatment)> {
        let x1s: Vec<&[f64]> = rows.iter().map(|r| r.x1.as_slice()).collect();
        let first = self.stage1_batch(&x1s);
        rows.iter()
            .zip(first)
            .map(|(r, a1)| (a1, self.stage2(&r.history2())))
            .collect()
    }
}

/// `h -> sgn(map(h)' coef)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRule {
    pub map: FeatureMap,
    pub coef: Vec<f64>,
}

impl LinearRule {
    pub fn score1(&self, h1: &History1<'_>) -> f64 {
        let mut buf = Vec::with_capacity(self.map.len());
        self.map.eval1_into(h1, &mut buf);
        dot(&buf, &self.coef)
    }

    pub fn score2(&self, h2: &History2<'_>) -> f64 {
        let mut buf = Vec::with_capacity(self.map.len());
        self.map.eval2_into(h2, &mut buf);
        dot(&buf, &self.coef)
    }

    pub fn decide1(&self, h1: &History1<'_>) -> Treatment {
        Treatment::from_score(self.score1(h1))
    }

    pub fn decide2(&self, h2: &History2<'_>) -> Treatment {
        Treatment::from_score(self.score2(h2))
    }
}

/// Treats everyone the same way at each stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantRegime {
    pub a1: Treatment,
    pub a2: Treatment,
}

impl ConstantRegime {
    pub fn all() -> [ConstantRegime; 4] {
        let mut out = [ConstantRegime {
            a1: Treatment::Plus,
            a2: Treatment::Plus,
        }; 4];
        let mut k = 0;
        for a1 in [Treatment::Plus, Treatment::Minus] {
            for a2 in [Treatment::Plus, Treatment::Minus] {
                out[k] = ConstantRegime { a1, a2 };
                k += 1;
            }
        }
        out
    }
}

impl Regime for ConstantRegime {
    fn stage1(&self, _: &History1<'_>) -> Treatment {
        self.a1
    }
    fn stage2(&self, _: &History2<'_>) -> Treatment {
        self.a2
    }
}

/// Both stages linear in features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRegime {
    pub stage1: LinearRule,
    pub stage2: LinearRule,
}

impl Regime for LinearRegime {
    fn stage1(&self, h1: &History1<'_>) -> Treatment {
        self.stage1.decide1(h1)
    }
    fn stage2(&self, h2: &History2<'_>) -> Treatment {
        self.stage2.decide2(h2)
    }
}

/// Serializable regime description, as written and read by the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegimeSpec {
    Constant(ConstantRegime),
    Linear(LinearRegime),
    /// First-stage decisions listed per data row, with a linear second stage.
    /// Only meaningful on the dataset the decisions were produced for.
    Tabulated {
        stage1: Vec<Treatment>,
        stage2: LinearRule,
    },
}

impl RegimeSpec {
    /// Recommendations for the rows of a dataset.
    pub fn recommendations(&self, rows: &[Trajectory]) -> Result<Vec<(Treatment, Treatment)>> {
        match self {
            RegimeSpec::Constant(r) => Ok(r.recommendations(rows)),
            RegimeSpec::Linear(r) => Ok(r.recommendations(rows)),
            RegimeSpec::Tabulated { stage1, stage2 } => {
                if stage1.len() != rows.len() {
                    return Err(Error::InvalidArgument(format!(
                        "tabulated regime has {} decisions for {} rows",
                        stage1.len(),
                        rows.len()
                    )));
                }
                Ok(rows
                    .iter()
                    .zip(stage1)
                    .map(|(r, &a1)| (a1, stage2.decide2(&r.history2())))
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Column, Term};

    #[test]
    fn linear_rule_ties_to_plus() {
        let rule = LinearRule {
            map: FeatureMap::new(vec![Term::plain(Column::Intercept), Term::plain(Column::X1(0))]),
            coef: vec![1.0, -1.0],
        };
        assert_eq!(rule.decide1(&History1 { x1: &[1.0] }), Treatment::Plus);
        assert_eq!(rule.decide1(&History1 { x1: &[1.5] }), Treatment::Minus);
        assert_eq!(rule.decide1(&History1 { x1: &[0.5] }), Treatment::Plus);
    }

    #[test]
    fn constant_regimes_cover_all_sequences() {
        let all = ConstantRegime::all();
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn tabulated_length_checked() {
        let spec = RegimeSpec::Tabulated {
            stage1: vec![Treatment::Plus],
            stage2: LinearRule {
                map: FeatureMap::new(vec![Term::plain(Column::Intercept)]),
                coef: vec![1.0],
            },
        };
        assert!(spec.recommendations(&[]).is_err());
    }
}
