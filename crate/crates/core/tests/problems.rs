use afm_core::problems::{
    self, build, finite_diff, gap, kink_margin, subgrad, KinkPolicy, L1Center, MaxAffine,
    NoisyLinear, Problem, CATALOG,
};
use afm_core::Vector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_point(p: &dyn Problem, rng: &mut ChaCha8Rng, scale: f64) -> Vector {
    p.initial_point(rng).map(|v| scale * v)
}

#[test]
fn gradient_consistency_on_every_catalog_problem() {
    let policy = KinkPolicy::default();
    for id in CATALOG {
        let p = build(id).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xFD);
        let mut checked = 0;
        let mut tries = 0;
        while checked < 200 {
            tries += 1;
            assert!(tries < 100_000, "{id}: too few points away from kinks");
            let x = random_point(p.as_ref(), &mut rng, 2.0);
            let i = rng.random_range(0..p.num_components());
            if p.kink_margin(i, &x) <= 1e-3 {
                continue;
            }
            let g = subgrad(p.as_ref(), i, &x, &policy).unwrap();
            let fd = finite_diff(p.as_ref(), i, &x, 1e-6).unwrap();
            let err = g.sub(&fd).unwrap().norm2() / (1.0 + fd.norm2());
            assert!(err <= 1e-5, "{id}: x={x:?} err={err}");
            checked += 1;
        }
    }
}

#[test]
fn subgradient_inequality_on_convex_problems() {
    let policy = KinkPolicy::default();
    let convex: [Box<dyn Problem>; 3] = [
        build("l1_center").unwrap(),
        build("max_affine").unwrap(),
        Box::new(L1Center::synthetic(3, 4, 99)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0);
    for p in &convex {
        for _ in 0..1000 {
            let x = random_point(p.as_ref(), &mut rng, 3.0);
            let y = random_point(p.as_ref(), &mut rng, 3.0);
            let fx = problems::objective(p.as_ref(), &x).unwrap();
            let fy = problems::objective(p.as_ref(), &y).unwrap();
            let g = problems::full_subgrad(p.as_ref(), &x, &policy).unwrap();
            let lin = fx + g.dot(&y.sub(&x).unwrap()).unwrap();
            assert!(
                fy >= lin - 1e-12 * (1.0 + lin.abs()),
                "{} {fy} < {lin}",
                p.name()
            );
        }
    }
}

#[test]
fn l1_gap_vanishes_on_median_box_including_kinks() {
    // Even count: the median box has width, and its ends are kinks.
    let centers = vec![
        Vector::from([0.0, 1.0]),
        Vector::from([1.0, 1.0]),
        Vector::from([2.0, -1.0]),
        Vector::from([3.0, 0.5]),
    ];
    let p = L1Center::new(centers).unwrap();
    for s in 0..=20 {
        for t in -8..=8 {
            let x = [0.25 * s as f64 - 1.0, 0.25 * t as f64];
            let inside = (1.0..=2.0).contains(&x[0]) && (0.5..=1.0).contains(&x[1]);
            let g = gap(&p, &x).unwrap();
            assert_eq!(g == 0.0, inside, "x={x:?} gap={g}");
            assert_eq!(p.stationary_distance(&x).unwrap() == 0.0, inside);
        }
    }
}

#[test]
fn max_affine_gap_vanishes_only_at_center() {
    let p = MaxAffine::default_2d();
    let c = [0.3, -0.2];
    assert_eq!(kink_margin(&p, &c), 0.0);
    for s in -10..=10 {
        for t in -10..=10 {
            let x = [c[0] + 0.1 * s as f64, c[1] + 0.1 * t as f64];
            let zero = s == 0 && t == 0;
            assert_eq!(gap(&p, &x).unwrap() == 0.0, zero, "x={x:?}");
        }
    }
}

#[test]
fn spurious_point_is_stationary_only_for_the_zero_selection() {
    let p = problems::spurious_problem();
    let zero = KinkPolicy::default();
    let half = KinkPolicy::with_relu_at_zero(0.5).unwrap();
    assert_eq!(subgrad(&p, 0, &[0.0], &zero).unwrap()[0], 0.0);
    assert_eq!(subgrad(&p, 0, &[0.0], &half).unwrap()[0], 1.0);
    assert_eq!(subgrad(&p, 0, &[1e-300], &zero).unwrap()[0], 1.0);
    assert_eq!(gap(&p, &[0.0]).unwrap(), 0.0);
    assert_eq!(gap(&p, &[-0.5]).unwrap(), 1.0);
}

#[test]
fn noisy_linear_minimizer_is_stationary() {
    let p = NoisyLinear::synthetic(20, 200, 1.0, 0x11EA).unwrap();
    let g = problems::full_subgrad(&p, p.minimizer(), &KinkPolicy::default()).unwrap();
    assert!(g.norm_inf() < 1e-12, "{g:?}");
    let fx = problems::objective(&p, p.minimizer()).unwrap();
    assert_eq!(fx, p.optimum_value());
}
