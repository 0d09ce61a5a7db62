use nalgebra::DMatrix;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn is_diagonal(w: &DMatrix<f64>) -> bool {
    (0..w.nrows()).all(|i| (0..w.ncols()).all(|j| i == j || w[(i, j)] == 0.0))
}

/// `exp(W t)` by scaling and squaring with a degree-13 Pade approximant.
/// Diagonal inputs take the elementwise path.
pub fn mat_exp(w: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = w.nrows();
    assert_eq!(n, w.ncols(), "mat_exp needs a square matrix");
    if is_diagonal(w) {
        return DMatrix::from_fn(n, n, |i, j| if i == j { (w[(i, i)] * t).exp() } else { 0.0 });
    }
    let a = w * t;
    let norm1 = (0..n).map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * 2f64.powi(-s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Pade denominator is nonsingular after scaling");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gives_identity() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(mat_exp(&z, 1.0), DMatrix::identity(3, 3));
    }

    #[test]
    fn diagonal_exact() {
        let w = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[-1.0, -2.0]));
        let e = mat_exp(&w, 1.0);
        assert_eq!(e[(0, 0)], (-1.0f64).exp());
        assert_eq!(e[(1, 1)], (-2.0f64).exp());
    }

    #[test]
    fn nilpotent() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = mat_exp(&w, 1.0);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!((e - expect).amax() < 1e-15);
    }

    #[test]
    fn rotation() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let e = mat_exp(&w, 30.0);
        assert!((e[(0, 0)] - 30f64.cos()).abs() < 1e-12);
        assert!((e[(1, 0)] - 30f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn semigroup_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=8 {
            let w = DMatrix::from_fn(n, n, |i, j| (rng.random::<f64>() - 0.5) - if i == j { 2.0 } else { 0.0 });
            let lhs = mat_exp(&w, 1.7);
            let rhs = mat_exp(&w, 0.6) * mat_exp(&w, 1.1);
            assert!((&lhs - &rhs).norm() <= 1e-10 * lhs.norm());
        }
    }
}
