use alloc::vec::Vec;

use super::{KinkPolicy, MaxTie, Problem};
use crate::linalg::min_norm_in_hull;
use crate::{Error, Result, Vector};

/// `f(x) = max_j ⟨a_j, x − c⟩ + b_j`, a single-component convex problem.
///
/// When every offset `b_j` is zero and `0` lies in the interior of the
/// convex hull of the slopes, `f` is a polyhedral gauge of `x − c` and its
/// only stationary point is `c`; [`MaxAffine::centered`] builds that case.
#[derive(Debug, Clone)]
pub struct MaxAffine {
    slopes: Vec<Vector>,
    offsets: Vec<f64>,
    center: Vector,
    centered: bool,
}

impl MaxAffine {
    pub fn new(slopes: Vec<Vector>, offsets: Vec<f64>) -> Result<Self> {
        let n = slopes.first().map(|s| s.len()).unwrap_or(0);
        if n == 0 || slopes.iter().any(|s| s.len() != n) {
            return Err(Error::param(
                "slopes",
                "need at least one slope, all of one positive dimension",
            ));
        }
        if slopes.len() > 16 {
            return Err(Error::param("slopes", "at most 16 pieces are supported"));
        }
        if offsets.len() != slopes.len() {
            return Err(Error::param("offsets", "one offset per slope"));
        }
        Ok(MaxAffine {
            slopes,
            offsets,
            center: Vector::zeros(n),
            centered: false,
        })
    }

    /// `f(x) = max_j ⟨a_j, x − c⟩`; requires the slopes to positively span
    /// the space so that `c` is the unique minimizer.
    pub fn centered(slopes: Vec<Vector>, center: Vector) -> Result<Self> {
        let k = slopes.len();
        let mut p = MaxAffine::new(slopes, alloc::vec![0.0; k])?;
        if center.len() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                found: center.len(),
            });
        }
        if !p.positively_spans() {
            return Err(Error::param(
                "slopes",
                "slopes must positively span the space",
            ));
        }
        p.center = center;
        p.centered = true;
        Ok(p)
    }

    /// `max{⟨(1, 0.5), x⟩, ⟨(-1, 0.5), x⟩, ⟨(0, -1), x⟩}` centered at `(0.3, -0.2)`.
    pub fn default_2d() -> Self {
        MaxAffine::centered(
            alloc::vec![
                Vector::from([1.0, 0.5]),
                Vector::from([-1.0, 0.5]),
                Vector::from([0.0, -1.0])
            ],
            Vector::from([0.3, -0.2]),
        )
        .expect("default slopes positively span R^2")
    }

    // Checks 0 ∈ conv(slopes) and that f grows along every ±e_j. Enough for
    // the instances built here, not a complete interiority test.
    fn positively_spans(&self) -> bool {
        let pts: Vec<&[f64]> = self.slopes.iter().map(|s| s.as_slice()).collect();
        if min_norm_in_hull(&pts) > 0.0 {
            return false;
        }
        (0..self.dim()).all(|j| {
            let up = self
                .slopes
                .iter()
                .map(|s| s[j])
                .fold(f64::NEG_INFINITY, f64::max);
            let down = self
                .slopes
                .iter()
                .map(|s| -s[j])
                .fold(f64::NEG_INFINITY, f64::max);
            up > 0.0 && down > 0.0
        })
    }

    fn piece_values(&self, x: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = x
            .iter()
            .zip(self.center.iter())
            .map(|(a, c)| a - c)
            .collect();
        self.slopes
            .iter()
            .zip(&self.offsets)
            .map(|(s, b)| s.iter().zip(&shifted).map(|(a, d)| a * d).sum::<f64>() + b)
            .collect()
    }

    fn active(&self, x: &[f64]) -> Vec<usize> {
        let vals = self.piece_values(x);
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..vals.len()).filter(|&j| vals[j] == top).collect()
    }
}

impl Problem for MaxAffine {
    fn name(&self) -> &str {
        "max_affine"
    }

    fn dim(&self) -> usize {
        self.center.len()
    }

    fn num_components(&self) -> usize {
        1
    }

    fn component_value(&self, _i: usize, x: &[f64]) -> f64 {
        self.piece_values(x)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn component_subgrad(&self, _i: usize, x: &[f64], policy: &KinkPolicy) -> Vector {
        let active = self.active(x);
        match policy.max_tie {
            MaxTie::First => self.slopes[active[0]].clone(),
            MaxTie::Mean => {
                let inv = 1.0 / active.len() as f64;
                let mut acc = Vector::zeros(self.dim());
                for &j in &active {
                    for (a, s) in acc.iter_mut().zip(self.slopes[j].iter()) {
                        *a += s;
                    }
                }
                acc.map(|v| v * inv)
            }
        }
    }

    fn gap(&self, x: &[f64]) -> Result<f64> {
        let pts: Vec<&[f64]> = self
            .active(x)
            .into_iter()
            .map(|j| self.slopes[j].as_slice())
            .collect();
        Ok(libm::sqrt(min_norm_in_hull(&pts)))
    }

    fn stationary_distance(&self, x: &[f64]) -> Result<f64> {
        if !self.centered {
            return Err(Error::Unsupported {
                what: "stationary set of a general max-affine function",
            });
        }
        Ok(crate::vector::norm2(
            &x.iter()
                .zip(self.center.iter())
                .map(|(a, c)| a - c)
                .collect::<Vec<_>>(),
        ))
    }

    fn kink_margin(&self, _i: usize, x: &[f64]) -> f64 {
        let mut vals = self.piece_values(x);
        if vals.len() < 2 {
            return f64::INFINITY;
        }
        vals.sort_by(|a, b| b.total_cmp(a));
        vals[0] - vals[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{eval, gap, subgrad};
    use alloc::vec;

    fn abs_1d() -> MaxAffine {
        MaxAffine::centered(
            vec![Vector::from([1.0]), Vector::from([-1.0])],
            Vector::from([0.0]),
        )
        .unwrap()
    }

    #[test]
    fn eval_and_gap_examples() {
        let p = abs_1d();
        assert_eq!(eval(&p, 0, &[2.0]).unwrap(), 2.0);
        assert_eq!(gap(&p, &[0.0]).unwrap(), 0.0);
        assert_eq!(gap(&p, &[2.0]).unwrap(), 1.0);
        assert_eq!(p.stationary_distance(&[-3.0]).unwrap(), 3.0);
    }

    #[test]
    fn tie_policies() {
        let p = abs_1d();
        let first = KinkPolicy::default();
        let mean = KinkPolicy {
            max_tie: MaxTie::Mean,
            ..Default::default()
        };
        assert_eq!(subgrad(&p, 0, &[0.0], &first).unwrap().as_slice(), &[1.0]);
        assert_eq!(subgrad(&p, 0, &[0.0], &mean).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn rejects_degenerate_centered() {
        // |x1| only: the minimizers form a line.
        let r = MaxAffine::centered(
            vec![Vector::from([1.0, 0.0]), Vector::from([-1.0, 0.0])],
            Vector::zeros(2),
        );
        assert!(r.is_err());
    }

    #[test]
    fn gap_zero_only_at_center() {
        let p = MaxAffine::default_2d();
        let c = [0.3, -0.2];
        assert_eq!(gap(&p, &c).unwrap(), 0.0);
        for s in -8..=8 {
            for t in -8..=8 {
                let x = [c[0] + 0.125 * s as f64, c[1] + 0.125 * t as f64];
                let g = gap(&p, &x).unwrap();
                assert_eq!(g == 0.0, s == 0 && t == 0, "x={x:?} gap={g}");
            }
        }
    }

    #[test]
    fn gap_on_a_ridge() {
        // Ridge where pieces (1, .5) and (-1, .5) tie: the hull is the segment
        // between them, closest point (0, .5).
        let p = MaxAffine::default_2d();
        let g = gap(&p, &[0.3, 1.0]).unwrap();
        assert!((g - 0.5).abs() < 1e-14, "{g}");
    }
}
