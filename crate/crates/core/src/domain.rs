//! Trajectories, datasets, treatment codes and feature maps.
//!
//! Treatments are coded `-1`/`+1`. Every decision rule in the crate resolves
//! ties to `+1` through [`Treatment::from_score`].

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Treatment {
    Minus,
    Plus,
}

impl Treatment {
    pub const BOTH: [Treatment; 2] = [Treatment::Minus, Treatment::Plus];

    /// `+1` when `score >= 0`, `-1` otherwise. NaN maps to `-1`.
    #[inline]
    pub fn from_score(score: f64) -> Self {
        if score >= 0.0 {
            Treatment::Plus
        } else {
            Treatment::Minus
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Treatment::Minus => -1.0,
            Treatment::Plus => 1.0,
        }
    }

    #[inline]
    pub fn code(self) -> i8 {
        match self {
            Treatment::Minus => -1,
            Treatment::Plus => 1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Treatment::Minus => Treatment::Plus,
            Treatment::Plus => Treatment::Minus,
        }
    }

    /// Parses a numeric code; only exactly `-1` and `1` are accepted.
    pub fn from_code(value: f64) -> Option<Self> {
        if value == 1.0 {
            Some(Treatment::Plus)
        } else if value == -1.0 {
            Some(Treatment::Minus)
        } else {
            None
        }
    }
}

impl From<Treatment> for i8 {
    fn from(t: Treatment) -> i8 {
        t.code()
    }
}

impl TryFrom<i8> for Treatment {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        Treatment::from_code(v as f64).ok_or_else(|| format!("invalid treatment code {v}"))
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Sign with the `sgn(0) = +1` convention. Rejects non-finite input.
pub fn sgn(x: f64) -> Result<Treatment> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("sgn of non-finite value {x}")));
    }
    Ok(Treatment::from_score(x))
}

/// One unvalidated record as it comes out of ingestion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub x1: Vec<f64>,
    pub a1: f64,
    pub x2: Vec<f64>,
    pub a2: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub x1: Vec<f64>,
    pub a1: Treatment,
    pub x2: Vec<f64>,
    pub a2: Treatment,
    pub y: f64,
}

impl Trajectory {
    pub fn history1(&self) -> History1<'_> {
        History1 { x1: &self.x1 }
    }

    pub fn history2(&self) -> History2<'_> {
        History2 {
            x1: &self.x1,
            a1: self.a1,
            x2: &self.x2,
        }
    }

    pub fn to_raw(&self) -> RawRow {
        RawRow {
            x1: self.x1.clone(),
            a1: self.a1.value(),
            x2: self.x2.clone(),
            a2: self.a2.value(),
            y: self.y,
        }
    }
}

/// Baseline information available at the first decision.
#[derive(Clone, Copy, Debug)]
pub struct History1<'a> {
    pub x1: &'a [f64],
}

/// Information available at the second decision.
#[derive(Clone, Copy, Debug)]
pub struct History2<'a> {
    pub x1: &'a [f64],
    pub a1: Treatment,
    pub x2: &'a [f64],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<Trajectory>,
    p1: usize,
    p2: usize,
}

impl Dataset {
    pub fn rows(&self) -> &[Trajectory] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y).collect()
    }

    pub fn to_raw(&self) -> Vec<RawRow> {
        self.rows.iter().map(Trajectory::to_raw).collect()
    }

    /// Requires both arms at both stages, as every fit does.
    pub fn require_both_arms(&self) -> Result<()> {
        let both = |pick: fn(&Trajectory) -> Treatment| {
            self.rows.iter().any(|r| pick(r) == Treatment::Plus)
                && self.rows.iter().any(|r| pick(r) == Treatment::Minus)
        };
        if !both(|r| r.a1) {
            return Err(Error::SingleArm { stage: "A1" });
        }
        if !both(|r| r.a2) {
            return Err(Error::SingleArm { stage: "A2" });
        }
        Ok(())
    }

    /// Order-sensitive fingerprint of the exact data contents.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.p1.hash(&mut h);
        self.p2.hash(&mut h);
        for r in &self.rows {
            for v in r.x1.iter().chain(&r.x2) {
                v.to_bits().hash(&mut h);
            }
            r.a1.hash(&mut h);
            r.a2.hash(&mut h);
            r.y.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Builds a dataset from rows that are already typed; dimensions and
    /// finiteness are still checked.
    pub fn from_trajectories(rows: Vec<Trajectory>) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let (p1, p2) = (first.x1.len(), first.x2.len());
        for (i, r) in rows.iter().enumerate() {
            check_row(i, &r.x1, &r.x2, r.y, p1, p2)?;
        }
        Ok(Dataset { rows, p1, p2 })
    }
}

fn check_row(row: usize, x1: &[f64], x2: &[f64], y: f64, p1: usize, p2: usize) -> Result<()> {
    if x1.len() != p1 {
        return Err(Error::DimensionMismatch {
            row,
            what: "x1",
            expected: p1,
            found: x1.len(),
        });
    }
    if x2.len() != p2 {
        return Err(Error::DimensionMismatch {
            row,
            what: "x2",
            expected: p2,
            found: x2.len(),
        });
    }
    for (field, vals) in [("x1", x1), ("x2", x2)] {
        if let Some(j) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row,
                field: format!("{field}_{}", j + 1),
            });
        }
    }
    if !y.is_finite() {
        return Err(Error::NonFinite { row, field: "y".into() });
    }
    Ok(())
}

/// Validates raw rows. Dimensions are taken from the first row; errors carry
/// the zero-based row index.
pub fn validate_dataset(raw: Vec<RawRow>) -> Result<Dataset> {
    let first = raw.first().ok_or(Error::EmptyDataset)?;
    let (p1, p2) = (first.x1.len(), first.x2.len());
    let mut rows = Vec::with_capacity(raw.len());
    for (i, r) in raw.into_iter().enumerate() {
        check_row(i, &r.x1, &r.x2, r.y, p1, p2)?;
        let a1 = Treatment::from_code(r.a1).ok_or(Error::InvalidTreatment { row: i, value: r.a1 })?;
        let a2 = Treatment::from_code(r.a2).ok_or(Error::InvalidTreatment { row: i, value: r.a2 })?;
        rows.push(Trajectory {
            x1: r.x1,
            a1,
            x2: r.x2,
            a2,
            y: r.y,
        });
    }
    Ok(Dataset { rows, p1, p2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Column {
    Intercept,
    /// Zero-based baseline covariate index.
    X1(usize),
    /// Zero-based interim covariate index.
    X2(usize),
    A1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub column: Column,
    /// Multiply the column by the first-stage treatment code.
    #[serde(default)]
    pub times_a1: bool,
}

impl Term {
    pub fn plain(column: Column) -> Self {
        Term {
            column,
            times_a1: false,
        }
    }

    fn name(&self) -> String {
        let base = match self.column {
            Column::Intercept => "1".to_string(),
            Column::X1(j) => format!("x1_{}", j + 1),
            Column::X2(j) => format!("x2_{}", j + 1),
            Column::A1 => "a1".to_string(),
        };
        if self.times_a1 {
            format!("a1*{base}")
        } else {
            base
        }
    }
}

/// An ordered list of columns evaluated on a history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub terms: Vec<Term>,
}

impl FeatureMap {
    pub fn new(terms: Vec<Term>) -> Self {
        FeatureMap { terms }
    }

    /// `(1, x1_1, ..., x1_p1)`.
    pub fn baseline(p1: usize) -> Self {
        let mut terms = vec![Term::plain(Column::Intercept)];
        terms.extend((0..p1).map(|j| Term::plain(Column::X1(j))));
        FeatureMap { terms }
    }

    /// `(1, x2_1, ..., x2_p2)`.
    pub fn interim(p2: usize) -> Self {
        let mut terms = vec![Term::plain(Column::Intercept)];
        terms.extend((0..p2).map(|j| Term::plain(Column::X2(j))));
        FeatureMap { terms }
    }

    /// `(1, x2_1, ..., x2_p2, a1)`, the shape used when the first treatment
    /// enters the second-stage model.
    pub fn interim_with_a1(p2: usize) -> Self {
        let mut map = Self::interim(p2);
        map.terms.push(Term::plain(Column::A1));
        map
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(Term::name).collect()
    }

    pub fn has_intercept(&self) -> bool {
        self.terms.iter().any(|t| t.column == Column::Intercept && !t.times_a1)
    }

    /// True when every term can be evaluated from the baseline history alone.
    pub fn is_baseline_only(&self) -> bool {
        self.terms
            .iter()
            .all(|t| matches!(t.column, Column::Intercept | Column::X1(_)) && !t.times_a1)
    }

    pub fn check_dims(&self, p1: usize, p2: usize) -> Result<()> {
        for t in &self.terms {
            match t.column {
                Column::X1(j) if j >= p1 => {
                    return Err(Error::InvalidArgument(format!(
                        "feature x1_{} requested but p1 = {p1}",
                        j + 1
                    )))
                }
                Column::X2(j) if j >= p2 => {
                    return Err(Error::InvalidArgument(format!(
                        "feature x2_{} requested but p2 = {p2}",
                        j + 1
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Evaluates on a second-stage history, appending to `out`.
    pub fn eval2_into(&self, h: &History2<'_>, out: &mut Vec<f64>) {
        for t in &self.terms {
            let v = match t.column {
                Column::Intercept => 1.0,
                Column::X1(j) => h.x1[j],
                Column::X2(j) => h.x2[j],
                Column::A1 => h.a1.value(),
            };
            out.push(if t.times_a1 { v * h.a1.value() } else { v });
        }
    }

    /// Evaluates on a baseline history. Terms needing interim data panic;
    /// maps are checked with [`FeatureMap::is_baseline_only`] at fit time.
    pub fn eval1_into(&self, h: &History1<'_>, out: &mut Vec<f64>) {
        for t in &self.terms {
            out.push(match t.column {
                Column::Intercept => 1.0,
                Column::X1(j) => h.x1[j],
                Column::X2(_) | Column::A1 => {
                    panic!("baseline feature map references stage-2 information")
                }
            });
        }
    }

    pub fn eval2(&self, h: &History2<'_>) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        self.eval2_into(h, &mut v);
        v
    }

    pub fn eval1(&self, h: &History1<'_>) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        self.eval1_into(h, &mut v);
        v
    }
}

/// A linear model of the form `main(h)'b0 + a * contrast(h)'b1`, used at both
/// stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastDesign {
    pub main: FeatureMap,
    pub contrast: FeatureMap,
}

impl ContrastDesign {
    pub fn symmetric(map: FeatureMap) -> Self {
        ContrastDesign {
            main: map.clone(),
            contrast: map,
        }
    }

    pub fn width(&self) -> usize {
        self.main.len() + self.contrast.len()
    }

    pub fn column_names(&self, treatment: &str) -> Vec<String> {
        let mut names = self.main.names();
        names.extend(self.contrast.names().into_iter().map(|n| format!("{treatment}*{n}")));
        names
    }
}

/// Dot product of equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
