use afm_core::analysis::{
    gap_series, simulate_di, spurious_avoidance_experiment, DiSimConfig, SpuriousConfig,
};
use afm_core::optim::{AfmConfig, Variant};
use afm_core::problems::{build, NoisyLinear, Problem, Quadratic};
use afm_core::{OptimizerState, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sim(dt: f64, horizon: f64) -> DiSimConfig {
    let afm = AfmConfig::new(Variant::Adam)
        .with_taus(1.0, 1.0)
        .with_epsilon(1.0);
    DiSimConfig::new(afm, dt, horizon)
}

fn random_init(p: &dyn Problem, seed: u64) -> OptimizerState {
    OptimizerState::new(p.initial_point(&mut ChaCha8Rng::seed_from_u64(seed)))
}

#[test]
fn lyapunov_decreases_between_snapshots() {
    for id in ["l1_center", "max_affine"] {
        let p = build(id).unwrap();
        for seed in 0..3 {
            let out =
                simulate_di(p.as_ref(), &random_init(p.as_ref(), seed), &sim(1e-3, 60.0)).unwrap();
            let snaps = out.trajectory.snapshots();
            assert!(snaps[0].stationarity().unwrap() >= 1e-3);
            let stop = snaps
                .iter()
                .position(|s| s.stationarity().unwrap() < 1e-3)
                .expect("reaches the stopping gap");
            for w in snaps[..=stop].windows(2) {
                assert!(w[1].phi < w[0].phi, "{id} seed {seed} at t={:?}", w[1].t);
            }
        }
    }
}

#[test]
fn halving_dt_moves_the_endpoint_by_order_dt() {
    let dt = 1e-2;
    let problems: [Box<dyn Problem>; 2] = [
        Box::new(Quadratic::new(Vector::from([0.5, -1.0, 2.0]))),
        Box::new(NoisyLinear::synthetic(5, 40, 0.5, 3).unwrap()),
    ];
    for p in &problems {
        let init = random_init(p.as_ref(), 4);
        let mut coarse = sim(dt, 5.0);
        let mut fine = sim(dt / 2.0, 5.0);
        coarse.stop_tol = 0.0;
        fine.stop_tol = 0.0;
        let a = simulate_di(p.as_ref(), &init, &coarse).unwrap().final_state;
        let b = simulate_di(p.as_ref(), &init, &fine).unwrap().final_state;
        let dev = a.x.sub(&b.x).unwrap().norm_inf();
        assert!(dev <= 20.0 * dt, "{}: {dev}", p.name());
    }
}

#[test]
fn stationary_start_reports_zero_final_gap() {
    let p = Quadratic::new(Vector::from([1.0, 2.0]));
    let init = OptimizerState::new(Vector::from([1.0, 2.0]));
    let mut cfg = sim(1e-3, 1.0);
    cfg.stop_tol = 0.0;
    let out = simulate_di(&p, &init, &cfg).unwrap();
    let summary = gap_series(&out.trajectory).unwrap();
    assert_eq!(summary.final_gap, 0.0);
    assert_eq!(summary.f_spread, 0.0);
}

#[test]
fn random_step_scaling_avoids_the_spurious_point() {
    let report = spurious_avoidance_experiment(&SpuriousConfig::default()).unwrap();
    assert_eq!(report.runs, 100);
    assert_eq!(report.hit_zero, 0);
    assert_eq!(report.converged_to_spurious, 0);
    assert!(report.adversarial_fixed);
}
