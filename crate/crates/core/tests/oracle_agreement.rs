mod common;

use common::GaussTruth;
use iqlearn::simgen::{default_config, Variant};
use iqlearn::value_oracle::{oracle_optimal_quantile, oracle_optimal_rule, oracle_optimal_value};
use iqlearn::Treatment;

#[test]
fn quadrature_rules_integrate_polynomials() {
    let gl = common::gauss_legendre(10);
    assert!((gl.integrate(0.0, 2.0, |x| x.powi(7)) - 32.0).abs() < 1e-11);
    let gh = common::gauss_hermite(10);
    let m4: f64 = gh.nodes.iter().zip(&gh.weights).map(|(x, w)| w * x.powi(4)).sum();
    assert!((m4 - 3.0).abs() < 1e-11);
    let s = common::adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
    assert!((s - 2.0).abs() < 1e-10);
}

#[test]
fn monte_carlo_value_matches_quadrature() {
    for c in [0.0, 1.0] {
        let g = default_config(Variant::Gaussian).with_c(c);
        let truth = GaussTruth::new(&g);
        for lambda in [-2.0, 2.0, 4.0] {
            let mc = oracle_optimal_value(&g, lambda, 4000, 400, 11).unwrap();
            let q = truth.optimal_value(lambda);
            assert!(
                (mc.value - q).abs() < 4.0 * mc.se + 2e-3,
                "C={c} λ={lambda}: {} vs {q}",
                mc.value
            );
        }
    }
}

#[test]
fn monte_carlo_quantile_matches_quadrature() {
    let g = default_config(Variant::Gaussian).with_c(0.5);
    let truth = GaussTruth::new(&g);
    for tau in [0.1, 0.5] {
        let mc = oracle_optimal_quantile(&g, tau, 3000, 300, 12).unwrap();
        let q = truth.optimal_quantile(tau);
        assert!(
            (mc.value - q).abs() < 4.0 * mc.se + 5e-3,
            "τ={tau}: {} vs {q}",
            mc.value
        );
    }
}

#[test]
fn simulated_actions_match_quadrature_away_from_ties() {
    let g = default_config(Variant::Gaussian).with_c(0.5);
    let truth = GaussTruth::new(&g);
    let h1s: Vec<Vec<f64>> = (0..6)
        .flat_map(|i| (0..6).map(move |j| vec![-1.0 + 0.8 * i as f64, -1.0 + 0.8 * j as f64]))
        .collect();
    let lambdas = [-2.0, 3.0];
    let sim = oracle_optimal_rule(&g, &lambdas, &h1s, 100_000, 3).unwrap();
    for (l, &lambda) in lambdas.iter().enumerate() {
        for (i, h) in h1s.iter().enumerate() {
            let d = sim[l][i];
            if !d.near_tie {
                let x1 = [h[0], h[1]];
                assert_eq!(d.action, truth.optimal_action(x1, lambda), "λ={lambda} h1={h:?}");
                let p_plus = 1.0 - truth.arm_cdf(x1, Treatment::Plus, lambda);
                assert!((d.p_plus - p_plus).abs() < 0.01);
            }
        }
    }
}
