use crate::error::{Error, Result};
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct SymEigResult {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

impl SymEigResult {
    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<SymEigResult> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DomainError(format!("matrix is {}x{}", n, a.ncols())));
    }
    let norm = a.norm();
    let asym = (a - a.transpose()).amax();
    if asym > 1e-12 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym));
    }
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = 1e-14 * norm;

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let eigenvalues = order.iter().map(|&i| m[(i, i)]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEigResult { eigenvalues, eigenvectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        g.qr().q()
    }

    #[test]
    fn diagonal() {
        let r = sym_eig(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0])).unwrap();
        assert_eq!(r.eigenvalues, vec![3.0, 1.0]);
    }

    #[test]
    fn swap_matrix() {
        let r = sym_eig(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-15);
        assert!((r.eigenvalues[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn recovers_constructed_spectrum() {
        let lam = [5.0, 3.5, 2.0, 1.0, 0.0, -0.5, -2.0, -7.0];
        let q = random_orthogonal(8, 7);
        let a = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&lam)) * q.transpose();
        let r = sym_eig(&a).unwrap();
        for (x, y) in r.eigenvalues.iter().zip(lam.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
        let v = &r.eigenvectors;
        let recon = v * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(r.eigenvalues.clone())) * v.transpose();
        assert!((recon - &a).norm() <= 1e-10 * a.norm());
        assert!((v.transpose() * v - DMatrix::identity(8, 8)).norm() <= 1e-10);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&a), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn similarity_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..5 {
            let b = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() - 0.5);
            let a = &b + b.transpose();
            let q = random_orthogonal(6, 100 + trial);
            let e1 = sym_eig(&a).unwrap().eigenvalues;
            let e2 = sym_eig(&(&q * &a * q.transpose())).unwrap().eigenvalues;
            for (x, y) in e1.iter().zip(e2.iter()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
