//! Second-stage regression `Y = m(H2) + A2 c(H2) + e` by least squares.

use serde::{Deserialize, Serialize};

use crate::domain::{dot, ContrastDesign, Dataset, FeatureMap, History2};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::regime::LinearRule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedStage2 {
    pub design: ContrastDesign,
    /// Coefficients of the main-effect part `m`.
    pub beta20: Vec<f64>,
    /// Coefficients of the treatment-interaction part `c`.
    pub beta21: Vec<f64>,
    pub residuals: Vec<f64>,
    pub p1: usize,
    pub p2: usize,
    pub data_fingerprint: u64,
}

/// Default second-stage design, `H2 = (1, x2')'` for both parts.
pub fn default_design(p2: usize) -> ContrastDesign {
    ContrastDesign::symmetric(FeatureMap::interim(p2))
}

pub fn design_matrix(data: &Dataset, design: &ContrastDesign) -> Matrix {
    let width = design.width();
    let mut flat = Vec::with_capacity(data.len() * width);
    let mut contrast = Vec::with_capacity(design.contrast.len());
    for r in data.rows() {
        let h2 = r.history2();
        design.main.eval2_into(&h2, &mut flat);
        contrast.clear();
        design.contrast.eval2_into(&h2, &mut contrast);
        flat.extend(contrast.iter().map(|v| v * r.a2.value()));
    }
    Matrix::from_flat(data.len(), width, flat)
}

pub fn fit_stage2(data: &Dataset, design: &ContrastDesign) -> Result<FittedStage2> {
    design.main.check_dims(data.p1(), data.p2())?;
    design.contrast.check_dims(data.p1(), data.p2())?;
    let x = design_matrix(data, design);
    let y = data.outcomes();
    let beta = least_squares(&x, &y, &design.column_names("a2"))?;
    let fitted = x.mul_vec(&beta);
    let residuals = y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let (beta20, beta21) = beta.split_at(design.main.len());
    Ok(FittedStage2 {
        design: design.clone(),
        beta20: beta20.to_vec(),
        beta21: beta21.to_vec(),
        residuals,
        p1: data.p1(),
        p2: data.p2(),
        data_fingerprint: data.fingerprint(),
    })
}

impl FittedStage2 {
    fn check(&self, h2: &History2<'_>) -> Result<()> {
        if h2.x1.len() != self.p1 || h2.x2.len() != self.p2 {
            return Err(Error::InvalidArgument(format!(
                "history dimensions ({}, {}) do not match fit ({}, {})",
                h2.x1.len(),
                h2.x2.len(),
                self.p1,
                self.p2
            )));
        }
        Ok(())
    }

    pub fn m_hat(&self, h2: &History2<'_>) -> Result<f64> {
        self.check(h2)?;
        Ok(dot(&self.design.main.eval2(h2), &self.beta20))
    }

    pub fn c_hat(&self, h2: &History2<'_>) -> Result<f64> {
        self.check(h2)?;
        Ok(dot(&self.design.contrast.eval2(h2), &self.beta21))
    }

    /// `(m̂, ĉ)` without the dimension check.
    pub fn predict(&self, h2: &History2<'_>) -> (f64, f64) {
        (
            dot(&self.design.main.eval2(h2), &self.beta20),
            dot(&self.design.contrast.eval2(h2), &self.beta21),
        )
    }

    /// `(m̂(H2i), ĉ(H2i))` for every row.
    pub fn predict_all(&self, data: &Dataset) -> (Vec<f64>, Vec<f64>) {
        data.rows().iter().map(|r| self.predict(&r.history2())).unzip()
    }

    /// The estimated optimal second-stage rule `sgn(ĉ(h2))`.
    pub fn pi2_star(&self) -> LinearRule {
        LinearRule {
            map: self.design.contrast.clone(),
            coef: self.beta21.clone(),
        }
    }

    pub fn residual_sd(&self) -> f64 {
        let n = self.residuals.len() as f64;
        (self.residuals.iter().map(|e| e * e).sum::<f64>() / n).sqrt()
    }

    pub fn summary(&self) -> Stage2Summary {
        let names = self.design.column_names("a2");
        let values: Vec<f64> = self.beta20.iter().chain(&self.beta21).copied().collect();
        Stage2Summary {
            coefficients: names
                .into_iter()
                .zip(values)
                .map(|(name, value)| Coefficient { name, value })
                .collect(),
            residual_sd: self.residual_sd(),
            n: self.residuals.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage2Summary {
    pub coefficients: Vec<Coefficient>,
    pub residual_sd: f64,
    pub n: usize,
}
