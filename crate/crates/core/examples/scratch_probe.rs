use iqlearn::conditional_joint::{Dependence, McConfig};
use iqlearn::simgen::{default_config, generate, replication_seeds, Variant};
use iqlearn::{fit_components, EstimatorConfig, History1, Treatment};

fn main() {
    for (j, c) in [(6usize, 0.0), (1, 0.0), (0, 0.0)] {
        let g = default_config(Variant::ChisqSkew).with_c(c);
        let [s_train, _, s_mc] = replication_seeds(2026, j);
        let train = generate(&g, 500, s_train).unwrap();
        let cfg = EstimatorConfig {
            mc: McConfig {
                draws: 1000,
                seed: s_mc,
            },
            ..EstimatorConfig::default()
        };
        let comp = fit_components(&train, &cfg).unwrap();
        let jt = &comp.joint;
        println!(
            "j={j} C={c} gamma_m={:?} gamma_c={:?}",
            jt.m_model.gamma, jt.c_model.gamma
        );
        if let Dependence::GaussianCopula(cm) = &jt.dependence {
            let n = cm.sorted_m.len();
            println!(
                "  r={:.3} e_m [{:.3e} .. {:.3e}] e_c [{:.3e} .. {:.3e}]",
                cm.r,
                cm.sorted_m[0],
                cm.sorted_m[n - 1],
                cm.sorted_c[0],
                cm.sorted_c[n - 1]
            );
        }
        for a in [Treatment::Minus, Treatment::Plus] {
            let sds: Vec<f64> = comp
                .training_x1
                .iter()
                .map(|x| jt.m_model.sd(&History1 { x1: x }, a))
                .collect();
            let sdc: Vec<f64> = comp
                .training_x1
                .iter()
                .map(|x| jt.c_model.sd(&History1 { x1: x }, a))
                .collect();
            let mm = |v: &[f64]| {
                (
                    v.iter().cloned().fold(f64::INFINITY, f64::min),
                    v.iter().cloned().fold(0.0, f64::max),
                )
            };
            println!("  a1={a:?} sd_m {:?} sd_c {:?}", mm(&sds), mm(&sdc));
        }
    }
}
