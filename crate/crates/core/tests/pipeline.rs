use hdls_core::fit::{bspline_weights, d_l2, fit_panel, FitConfig};
use hdls_core::model::{JointSpectralGrid, ProcessFamily, StepCdf};
use hdls_core::synth::{simulate_time_domain, Basis, PanelData, SimSpec};

#[test]
fn d_l2_of_hand_built_steps() {
    let f = StepCdf::new([(1.0, 0.5), (2.0, 0.5)]);
    let g = StepCdf::new([(1.0, 1.0)]);
    // the CDFs differ by 1/2 on [1, 2)
    assert!((d_l2(&f, &g) - 0.5).abs() < 1e-15);
    assert_eq!(d_l2(&f, &f), 0.0);
    let h = StepCdf::new([(0.0, 0.25), (3.0, 0.75)]);
    // |F - H| is 1/4 on [0,1), 1/4 on [1,2), 3/4 on [2,3)
    let want = (0.0625f64 + 0.0625 + 0.5625).sqrt();
    assert!((d_l2(&f, &h) - want).abs() < 1e-15);
}

fn ar1_truth() -> JointSpectralGrid {
    JointSpectralGrid::product(
        ProcessFamily::Ar(1),
        vec![vec![0.5], vec![1.0, 2.0]],
        vec![vec![1.0], vec![0.5, 0.5]],
    )
    .unwrap()
}

#[test]
fn simulation_is_reproducible() {
    let spec = SimSpec {
        grid: ar1_truth(),
        p: 10,
        n: 30,
        basis: Basis::RandomOrthogonal,
        burn_in: 100,
        seed: 11,
    };
    let (a, b) = (
        simulate_time_domain(&spec).unwrap(),
        simulate_time_domain(&spec).unwrap(),
    );
    let (PanelData::Real(a), PanelData::Real(b)) = (a, b) else {
        panic!("expected real panels")
    };
    assert_eq!(a, b);
    let other = simulate_time_domain(&SimSpec { seed: 12, ..spec }).unwrap();
    assert_ne!(other.as_real().unwrap(), &a);
}

#[test]
fn fit_concentrates_near_the_truth() {
    let panel = simulate_time_domain(&SimSpec {
        grid: ar1_truth(),
        p: 80,
        n: 320,
        basis: Basis::RandomOrthogonal,
        burn_in: 500,
        seed: 21,
    })
    .unwrap();
    let candidates = JointSpectralGrid::product(
        ProcessFamily::Ar(1),
        vec![vec![0.1, 0.3, 0.5, 0.7, 0.9], vec![0.5, 1.0, 2.0, 3.0]],
        vec![vec![0.2; 5], vec![0.25; 4]],
    )
    .unwrap();
    let mut config = FitConfig::new(candidates, bspline_weights(4, 0.05).unwrap());
    config.optimizer.random_starts = 1;
    let fit = fit_panel(&panel, &config).unwrap();
    assert!((fit.omega_hat.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(fit.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let truth = ar1_truth();
    let da = d_l2(&truth.marginal(0).unwrap(), &fit.grid.marginal(0).unwrap());
    let ds = d_l2(&truth.marginal(1).unwrap(), &fit.grid.marginal(1).unwrap());
    // uniform weights sit at about 0.28 and 0.31
    assert!(da < 0.1 && ds < 0.2, "dA {da}, dS {ds}");
}
