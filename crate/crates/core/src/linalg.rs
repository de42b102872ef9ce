//! Small dense helpers shared by the numerical modules.

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::Result;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn adjoint(m: &ArrayView2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

pub fn trace(m: &ArrayView2<C64>) -> C64 {
    m.diag().sum()
}

/// Determinant by LU with partial pivoting.
pub fn det(m: &ArrayView2<C64>) -> C64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "determinant of a non-square matrix");
    let mut a = m.to_owned();
    let mut d = C64::new(1.0, 0.0);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[[i, k]].norm().total_cmp(&a[[j, k]].norm()))
            .unwrap();
        if a[[p, k]].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if p != k {
            for j in 0..n {
                a.swap([k, j], [p, j]);
            }
            d = -d;
        }
        let pivot = a[[k, k]];
        d *= pivot;
        for i in k + 1..n {
            let f = a[[i, k]] / pivot;
            if f.norm() == 0.0 {
                continue;
            }
            for j in k + 1..n {
                let t = a[[k, j]];
                a[[i, j]] -= f * t;
            }
        }
    }
    d
}

/// Eigen-decomposition of a Hermitian matrix (eigenvalues ascending).
pub fn eigh(m: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    Ok(m.eigh(UPLO::Lower)?)
}

pub fn eigvalsh(m: &Array2<C64>) -> Result<Array1<f64>> {
    use ndarray_linalg::EigValsh;
    Ok(m.eigvalsh(UPLO::Lower)?)
}

pub fn max_abs_diff(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

pub fn factorial(n: u64) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// (n-1)!! for even n, the n-th moment of a unit-variance Gaussian; zero for odd n.
pub fn gaussian_moment(n: u32, variance: C64) -> C64 {
    if n % 2 == 1 {
        return C64::new(0.0, 0.0);
    }
    let mut dfact = 1.0;
    let mut k = n as i64 - 1;
    while k > 1 {
        dfact *= k as f64;
        k -= 2;
    }
    variance.powu(n / 2) * dfact
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn det_matches_cofactor_expansion() {
        let m = array![
            [c(2.0), C64::new(1.0, 1.0), c(0.5)],
            [C64::new(0.0, -1.0), c(3.0), c(1.0)],
            [c(1.0), c(0.0), C64::new(4.0, 2.0)]
        ];
        let cof = m[[0, 0]] * (m[[1, 1]] * m[[2, 2]] - m[[1, 2]] * m[[2, 1]])
            - m[[0, 1]] * (m[[1, 0]] * m[[2, 2]] - m[[1, 2]] * m[[2, 0]])
            + m[[0, 2]] * (m[[1, 0]] * m[[2, 1]] - m[[1, 1]] * m[[2, 0]]);
        assert!((det(&m.view()) - cof).norm() < 1e-12);
    }

    #[test]
    fn det_of_singular_matrix_is_zero() {
        let m = array![[c(1.0), c(2.0)], [c(2.0), c(4.0)]];
        assert!(det(&m.view()).norm() < 1e-14);
    }

    #[test]
    fn binomials_and_gaussian_moments() {
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(gaussian_moment(4, c(2.0)), c(12.0));
        assert_eq!(gaussian_moment(3, c(2.0)), c(0.0));
    }
}
