//! Eigen-decomposition of small dense matrices.

use nalgebra::{Complex, DMatrix, SMatrix, SVector};

/// Cyclic Jacobi for a real symmetric N×N matrix. Eigenvalues ascending,
/// eigenvectors as matching columns.
pub fn jacobi_eigh<const N: usize>(mut a: SMatrix<f64, N, N>) -> (SVector<f64, N>, SMatrix<f64, N, N>) {
    let mut v = SMatrix::<f64, N, N>::identity();
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..N {
            for q in p + 1..N {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..N {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&x, &y| a[(x, x)].total_cmp(&a[(y, y)]));
    let values = SVector::<f64, N>::from_fn(|i, _| a[(order[i], order[i])]);
    let vectors = SMatrix::<f64, N, N>::from_fn(|r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian 2×2 or 3×3 matrix in closed form;
/// larger sizes fall back to a dense solver.
pub fn hermitian_min_eigenvalue<const N: usize>(m: &SMatrix<Complex<f64>, N, N>) -> f64 {
    match N {
        1 => m[(0, 0)].re,
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = m[(0, 1)].norm();
            0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt()
        }
        3 => {
            let q = (m[(0, 0)].re + m[(1, 1)].re + m[(2, 2)].re) / 3.0;
            let b = |r: usize, c: usize| if r == c { m[(r, c)] - q } else { m[(r, c)] };
            let fro: f64 = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).map(|(r, c)| b(r, c).norm_sqr()).sum();
            let p = (fro / 6.0).sqrt();
            if p <= 1e-300 {
                return q;
            }
            let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
                + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
            let r = (det.re / (2.0 * p * p * p)).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            if r <= 0.0 {
                // smallest root is the isolated one
                return q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
            }
            // largest root is isolated; deflate to the remaining 2×2 problem
            let top = q + 2.0 * p * phi.cos();
            let a = |i: usize| m[(i, i)].re;
            let minors = a(0) * a(1) - m[(0, 1)].norm_sqr() + a(0) * a(2) - m[(0, 2)].norm_sqr() + a(1) * a(2)
                - m[(1, 2)].norm_sqr();
            let sum = 3.0 * q - top;
            let prod = minors - top * sum;
            0.5 * sum - (0.25 * sum * sum - prod).max(0.0).sqrt()
        }
        _ => hermitian_eigenvalues(m)[0],
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues<const N: usize>(m: &SMatrix<Complex<f64>, N, N>) -> Vec<f64> {
    let d = DMatrix::from_fn(N, N, |r, c| m[(r, c)]);
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(d).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
