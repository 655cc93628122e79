use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{KinkPolicy, Problem};
use crate::{Error, Result, Vector};

/// `f(x) = (1/N) Σ_i ‖x − a_i‖₁`.
///
/// Convex, so its conservative field is the Clarke subdifferential. The
/// stationary set is the box of coordinatewise medians of the centers.
#[derive(Debug, Clone)]
pub struct L1Center {
    centers: Vec<Vector>,
    // Per coordinate: [lower median, upper median].
    median_box: Vec<(f64, f64)>,
}

impl L1Center {
    pub fn new(centers: Vec<Vector>) -> Result<Self> {
        let Some(first) = centers.first() else {
            return Err(Error::param("centers", "at least one center is required"));
        };
        let n = first.len();
        if n == 0 || centers.iter().any(|c| c.len() != n) {
            return Err(Error::param(
                "centers",
                "centers must share a positive dimension",
            ));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("centers", "entries must be finite"));
        }
        let count = centers.len();
        let median_box = (0..n)
            .map(|j| {
                let mut col: Vec<f64> = centers.iter().map(|c| c[j]).collect();
                col.sort_by(f64::total_cmp);
                (col[(count - 1) / 2], col[count / 2])
            })
            .collect();
        Ok(L1Center {
            centers,
            median_box,
        })
    }

    /// `count` centers drawn uniformly from `[-1, 1]^n`.
    pub fn synthetic(n: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = (0..count)
            .map(|_| Vector::from_fn(n, |_| rng.random_range(-1.0..1.0)))
            .collect();
        L1Center::new(centers).expect("synthetic centers are valid")
    }

    pub fn centers(&self) -> &[Vector] {
        &self.centers
    }

    /// Lower and upper coordinatewise medians; the minimizers form this box.
    pub fn median_box(&self) -> &[(f64, f64)] {
        &self.median_box
    }

    /// The smallest attainable objective value.
    pub fn optimum_value(&self) -> f64 {
        let x: Vector = self.median_box.iter().map(|&(lo, _)| lo).collect();
        self.centers
            .iter()
            .map(|c| {
                x.iter()
                    .zip(c.iter())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .sum::<f64>()
            / self.centers.len() as f64
    }
}

impl Problem for L1Center {
    fn name(&self) -> &str {
        "l1_center"
    }

    fn dim(&self) -> usize {
        self.median_box.len()
    }

    fn num_components(&self) -> usize {
        self.centers.len()
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.centers[i].iter())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    fn component_subgrad(&self, i: usize, x: &[f64], policy: &KinkPolicy) -> Vector {
        x.iter()
            .zip(self.centers[i].iter())
            .map(|(a, b)| policy.abs_derivative(a - b))
            .collect()
    }

    fn gap(&self, x: &[f64]) -> Result<f64> {
        let count = self.centers.len() as f64;
        let mut sq = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            let mut fixed = 0.0;
            let mut ties = 0.0;
            for c in &self.centers {
                let d = xj - c[j];
                if d == 0.0 {
                    ties += 1.0;
                } else {
                    fixed += d.signum();
                }
            }
            let lo = (fixed - ties) / count;
            let hi = (fixed + ties) / count;
            let dist = if lo > 0.0 {
                lo
            } else if hi < 0.0 {
                -hi
            } else {
                0.0
            };
            sq += dist * dist;
        }
        Ok(libm::sqrt(sq))
    }

    fn stationary_distance(&self, x: &[f64]) -> Result<f64> {
        let sq: f64 = x
            .iter()
            .zip(&self.median_box)
            .map(|(&xj, &(lo, hi))| {
                let d = if xj < lo {
                    lo - xj
                } else if xj > hi {
                    xj - hi
                } else {
                    0.0
                };
                d * d
            })
            .sum();
        Ok(libm::sqrt(sq))
    }

    fn kink_margin(&self, i: usize, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.centers[i].iter())
            .map(|(a, b)| (a - b).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{eval, gap, subgrad};
    use alloc::vec;

    fn single(a: [f64; 2]) -> L1Center {
        L1Center::new(vec![Vector::from(a)]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval(&single([1.0, 1.0]), 0, &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(eval(&single([0.0, 0.0]), 0, &[3.0, -4.0]).unwrap(), 7.0);
    }

    #[test]
    fn subgrad_examples() {
        let p = single([0.0, 0.0]);
        let pol = KinkPolicy::default();
        assert_eq!(
            subgrad(&p, 0, &[2.0, -3.0], &pol).unwrap().as_slice(),
            &[1.0, -1.0]
        );
        assert_eq!(
            subgrad(&p, 0, &[0.0, 1.0], &pol).unwrap().as_slice(),
            &[0.0, 1.0]
        );
    }

    #[test]
    fn gap_examples() {
        assert_eq!(gap(&single([0.5, -2.0]), &[0.5, -2.0]).unwrap(), 0.0);
        let g = gap(&single([0.0, 0.0]), &[3.0, 4.0]).unwrap();
        assert!((g - core::f64::consts::SQRT_2).abs() < 1e-15);
    }

    // Brute-force oracle: minimize the norm of the mean subgradient over a
    // fine grid of selections for every tied term.
    fn brute_force_gap(p: &L1Center, x: &[f64]) -> f64 {
        let count = p.centers().len() as f64;
        // Step 1/60 contains every ratio fixed/ties for up to five terms.
        let grid: Vec<f64> = (0..=120).map(|s| -1.0 + s as f64 / 60.0).collect();
        let mut sq = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            let signs: Vec<Option<f64>> = p
                .centers()
                .iter()
                .map(|c| {
                    let d = xj - c[j];
                    (d != 0.0).then(|| d.signum())
                })
                .collect();
            let fixed: f64 = signs.iter().flatten().sum();
            let ties = signs.iter().filter(|s| s.is_none()).count();
            // With `ties` free terms each in [-1, 1], the reachable sums are
            // exactly the interval [-ties, ties]; scan it on a grid.
            let best = grid
                .iter()
                .map(|&t| ((fixed + t * ties as f64) / count).abs())
                .fold(f64::INFINITY, f64::min);
            sq += best * best;
        }
        libm::sqrt(sq)
    }

    #[test]
    fn gap_matches_brute_force() {
        let p = L1Center::new(vec![
            Vector::from([0.0, 1.0, -1.0]),
            Vector::from([0.0, 2.0, 0.5]),
            Vector::from([1.0, 1.0, 0.5]),
            Vector::from([-1.0, 0.0, 0.5]),
        ])
        .unwrap();
        for x in [
            [0.0, 1.0, 0.5],
            [3.0, 4.0, -2.0],
            [0.0, 0.0, 0.0],
            [1.0, 2.0, -1.0],
            [0.2, 1.5, 0.6],
        ] {
            let exact = gap(&p, &x).unwrap();
            let brute = brute_force_gap(&p, &x);
            assert!((exact - brute).abs() < 1e-12, "x={x:?}: {exact} vs {brute}");
        }
    }

    #[test]
    fn gap_zero_exactly_on_median_box() {
        let p = L1Center::new(vec![
            Vector::from([0.0, 1.0]),
            Vector::from([2.0, -1.0]),
            Vector::from([1.0, 0.0]),
            Vector::from([3.0, 5.0]),
        ])
        .unwrap();
        assert_eq!(p.median_box(), &[(1.0, 2.0), (0.0, 1.0)]);
        for s in 0..=20 {
            for t in 0..=20 {
                let x = [-1.0 + 0.25 * s as f64, -2.0 + 0.25 * t as f64];
                let inside = (1.0..=2.0).contains(&x[0]) && (0.0..=1.0).contains(&x[1]);
                let g = gap(&p, &x).unwrap();
                assert_eq!(g == 0.0, inside, "x={x:?} gap={g}");
                assert_eq!(p.stationary_distance(&x).unwrap() == 0.0, inside);
            }
        }
    }
}
