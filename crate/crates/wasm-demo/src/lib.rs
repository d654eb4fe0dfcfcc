//! Browser bindings. A [`Demo`] fits the threshold-optimal model to one
//! simulated trial and then answers three queries: first-stage decisions on
//! a grid of baseline histories, the two arm integrals as a function of the
//! threshold, and the fitted residual CDFs.

use iqlearn::conditional_joint::McConfig;
use iqlearn::residual_cdf::{fit_empirical, ResidualCdf};
use iqlearn::simgen::{default_config, generate, Variant};
use iqlearn::{fit_components, Components, EstimatorConfig, History1, Treatment};
use wasm_bindgen::prelude::*;

/// Points per axis of the decision grid.
pub const GRID: usize = 41;
const GRID_LO: f64 = -1.5;
const GRID_HI: f64 = 3.5;

#[wasm_bindgen]
pub struct Demo {
    comp: Components,
    empirical: ResidualCdf,
}

impl Demo {
    /// Simulates `n` patients at heteroskedasticity `c` and fits every
    /// component with `draws` Monte Carlo draws.
    pub fn fit(c: f64, n: usize, draws: usize, seed: u32) -> iqlearn::Result<Demo> {
        let gen = default_config(Variant::Gaussian).with_c(c);
        let data = generate(&gen, n, u64::from(seed))?;
        let cfg = EstimatorConfig {
            mc: McConfig {
                draws,
                seed: u64::from(seed),
            },
            ..EstimatorConfig::default()
        };
        let comp = fit_components(&data, &cfg)?;
        let empirical = fit_empirical(&comp.stage2.residuals)?;
        Ok(Demo { comp, empirical })
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(c: f64, n: usize, draws: usize, seed: u32) -> Result<Demo, JsError> {
        Demo::fit(c, n, draws, seed).map_err(|e| JsError::new(&e.to_string()))
    }

    /// Coordinates shared by both grid axes.
    pub fn grid_axis(&self) -> Vec<f64> {
        (0..GRID)
            .map(|i| GRID_LO + (GRID_HI - GRID_LO) * i as f64 / (GRID - 1) as f64)
            .collect()
    }

    /// First-stage decisions at threshold `lambda` as `±1`, row-major with
    /// `x1_2` indexing rows and `x1_1` indexing columns.
    pub fn decisions(&self, lambda: f64) -> Vec<i8> {
        let axis = self.grid_axis();
        let mut out = Vec::with_capacity(GRID * GRID);
        for &b in &axis {
            for &a in &axis {
                out.push(self.comp.gamma(&History1 { x1: &[a, b] }, lambda).code());
            }
        }
        out
    }

    /// `I(y, -1)` and `I(y, +1)` at history `(x1_1, x1_2)`, interleaved per
    /// threshold.
    pub fn integrals(&self, x1_1: f64, x1_2: f64, ys: Vec<f64>) -> Vec<f64> {
        let arms = self.comp.arm_samples(&History1 { x1: &[x1_1, x1_2] });
        ys.iter()
            .flat_map(|&y| {
                [
                    arms.integral(&self.comp.cdf, y, Treatment::Minus),
                    arms.integral(&self.comp.cdf, y, Treatment::Plus),
                ]
            })
            .collect()
    }

    /// Normal-scale and empirical residual CDFs, interleaved per point.
    pub fn residual_cdf(&self, zs: Vec<f64>) -> Vec<f64> {
        zs.iter()
            .flat_map(|&z| [self.comp.cdf.cdf(z), self.empirical.cdf(z)])
            .collect()
    }

    /// Fitted residual standard deviation.
    pub fn sigma(&self) -> f64 {
        self.comp.cdf.spread()
    }

    /// Fraction of the grid assigned `+1` at `lambda`.
    pub fn plus_fraction(&self, lambda: f64) -> f64 {
        let d = self.decisions(lambda);
        d.iter().filter(|&&a| a == 1).count() as f64 / d.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> Demo {
        Demo::fit(0.5, 250, 300, 7).unwrap()
    }

    #[test]
    fn decisions_cover_the_grid() {
        let d = demo();
        let dec = d.decisions(0.0);
        assert_eq!(dec.len(), GRID * GRID);
        assert!(dec.iter().all(|a| *a == 1 || *a == -1));
        let axis = d.grid_axis();
        assert_eq!(axis[0], GRID_LO);
        assert!((axis[GRID - 1] - GRID_HI).abs() < 1e-12);
    }

    #[test]
    fn decisions_match_the_sign_of_the_integral_gap() {
        let d = demo();
        let axis = d.grid_axis();
        let dec = d.decisions(2.0);
        for (k, (i, j)) in [(0, 0), (7, 30), (40, 12)].into_iter().enumerate() {
            let v = d.integrals(axis[j], axis[i], vec![2.0]);
            let expect = if v[0] - v[1] >= 0.0 { 1 } else { -1 };
            assert_eq!(dec[i * GRID + j], expect, "point {k}");
        }
    }

    #[test]
    fn integrals_are_cdfs_in_the_threshold() {
        let d = demo();
        let ys: Vec<f64> = (-40..=40).map(|k| k as f64 * 0.25).collect();
        let v = d.integrals(1.0, 1.0, ys);
        for arm in 0..2 {
            let curve: Vec<f64> = v.iter().skip(arm).step_by(2).copied().collect();
            assert!(curve.windows(2).all(|w| w[0] <= w[1]));
            assert!(curve[0] < 0.01 && curve[curve.len() - 1] > 0.99);
        }
    }

    #[test]
    fn residual_cdfs_agree_roughly() {
        let d = demo();
        let zs = [-2.0, -0.5, 0.0, 0.5, 2.0];
        let v = d.residual_cdf(zs.to_vec());
        for pair in v.chunks(2) {
            assert!((pair[0] - pair[1]).abs() < 0.1, "{pair:?}");
        }
        assert!(d.sigma() > 0.5 && d.sigma() < 1.5);
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(Demo::fit(2.0, 100, 100, 1).is_err());
        assert!(Demo::fit(0.5, 100, 0, 1).is_err());
    }
}
