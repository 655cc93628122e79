use afm_core::noise::{sample_noise, AlphaStable, NoiseModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

// Gil-Pelaez inversion of the characteristic function of S(1.1, 1, 0.2; 1).
const ORACLE: [(f64, f64); 2] = [(0.5, -1.1611581370033395), (0.9, -0.10425786011487)];

#[test]
fn skewed_quantiles_match_numerical_inversion() {
    let d = AlphaStable::new(1.1, 1.0, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA9);
    // The density near q0.9 is small: at 10^6 draws the sampling error alone
    // is about 3% of the quantile.
    let mut x: Vec<f64> = (0..10_000_000).map(|_| d.sample(&mut rng)).collect();
    for (p, q) in ORACLE {
        let idx = (p * x.len() as f64) as usize;
        let emp = *x.select_nth_unstable_by(idx, f64::total_cmp).1;
        assert!(((emp - q) / q).abs() <= 0.03, "q{p}: {emp} vs {q}");
    }
}

#[test]
fn symmetric_stable_is_symmetric_about_zero() {
    let model = NoiseModel::Stable {
        alpha: 1.5,
        beta: 0.0,
        scale: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = sample_noise(&model, &mut rng, 200_000).unwrap();
    let below = x.iter().filter(|&&v| v < 0.0).count() as f64 / x.len() as f64;
    assert!((below - 0.5).abs() < 0.005, "{below}");
}

#[test]
fn scale_is_a_pure_multiplier() {
    let a = AlphaStable::new(1.3, 0.5, 1.0).unwrap();
    let b = AlphaStable::new(1.3, 0.5, 2.5).unwrap();
    let mut r1 = ChaCha8Rng::seed_from_u64(8);
    let mut r2 = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let (u, v) = (a.sample(&mut r1), b.sample(&mut r2));
        assert!((2.5 * u - v).abs() <= 1e-12 * v.abs().max(1.0));
    }
}
