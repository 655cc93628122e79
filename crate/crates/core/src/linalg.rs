//! Small dense solvers used by problem constructors.

use alloc::vec::Vec;

/// Solves the row-major `n x n` system `a * x = b` in place by Gaussian
/// elimination with partial pivoting. Returns `None` for (numerically)
/// singular matrices.
pub(crate) fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() <= 1e-13 * scale {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / a[col * n + col];
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in row + 1..n {
            acc -= a[row * n + j] * x[j];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

/// Squared Euclidean norm of the minimum-norm point of `conv(points)`.
///
/// Exact enumeration over affine hulls of subsets, so only meant for the
/// handful of active pieces at a point of a max-affine function.
pub(crate) fn min_norm_in_hull(points: &[&[f64]]) -> f64 {
    let k = points.len();
    assert!(k > 0 && k <= 16, "min_norm_in_hull supports 1..=16 points");
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let s = idx.len();
        // KKT system of min |sum l_j p_j|^2 s.t. sum l_j = 1.
        let dim = s + 1;
        let mut a = alloc::vec![0.0; dim * dim];
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                a[r * dim + c] = dot(points[i], points[j]);
            }
            a[r * dim + s] = 1.0;
            a[s * dim + r] = 1.0;
        }
        let mut b = alloc::vec![0.0; dim];
        b[s] = 1.0;
        let Some(sol) = solve(a, b) else { continue };
        if sol[..s].iter().any(|&l| l < -1e-12) {
            continue;
        }
        let n = points[0].len();
        let mut p = alloc::vec![0.0; n];
        for (l, &i) in sol[..s].iter().zip(&idx) {
            for (pj, &qj) in p.iter_mut().zip(points[i]) {
                *pj += l.max(0.0) * qj;
            }
        }
        best = best.min(dot(&p, &p));
    }
    // Rounding residue of an exact zero.
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max);
    if best <= 1e-24 * scale {
        0.0
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let x = solve(alloc::vec![2.0, 1.0, 1.0, 3.0], alloc::vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve(alloc::vec![1.0, 2.0, 2.0, 4.0], alloc::vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn hull_distance() {
        let a = [1.0, 0.0];
        let b = [-1.0, 0.0];
        assert_eq!(min_norm_in_hull(&[&a, &b]), 0.0);
        let c = [1.0, 1.0];
        let d = [1.0, -1.0];
        assert!((min_norm_in_hull(&[&c, &d]) - 1.0).abs() < 1e-15);
        assert!((min_norm_in_hull(&[&c]) - 2.0).abs() < 1e-15);
    }
}
