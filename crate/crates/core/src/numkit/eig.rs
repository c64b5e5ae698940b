use alloc::vec;
use alloc::vec::Vec;

use super::CMatrix;
use crate::math::{abs, sqrt};
use crate::{Error, Result};

/// Absolute Hermiticity tolerance, scaled by `max(1, max |M_kl|)`.
const HERMITIAN_TOL: f64 = 1e-12;
/// Jacobi sweeps stop once the off-diagonal Frobenius norm drops below this
/// fraction of the full norm.
const OFF_DIAGONAL_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 100;

/// A complex matrix checked to be Hermitian on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.rows(), found: m.cols() });
        }
        let deviation = m.hermitian_deviation();
        if !(deviation <= HERMITIAN_TOL * m.max_abs().max(1.0)) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eig(m: &HermitianMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// All eigenvalues in ascending order.
///
/// Real matrices are diagonalized directly; complex ones through the real
/// symmetric embedding `[[A, -B], [B, A]]` of `A + iB`, whose spectrum is
/// that of the original with every eigenvalue doubled.
pub fn hermitian_eigenvalues(m: &HermitianMatrix) -> Vec<f64> {
    let h = m.matrix();
    let n = h.rows();
    if h.as_slice().iter().all(|z| z.im == 0.0) {
        let mut a: Vec<f64> = h.as_slice().iter().map(|z| z.re).collect();
        return symmetric_eigenvalues(&mut a, n);
    }
    let nn = 2 * n;
    let mut a = vec![0.0; nn * nn];
    for i in 0..n {
        for j in 0..n {
            // symmetrize away the tolerated rounding asymmetry
            let z = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            a[i * nn + j] = z.re;
            a[(i + n) * nn + (j + n)] = z.re;
            a[i * nn + (j + n)] = -z.im;
            a[(i + n) * nn + j] = z.im;
        }
    }
    let all = symmetric_eigenvalues(&mut a, nn);
    all.into_iter().step_by(2).collect()
}

/// Eigenvalues (ascending) of a real symmetric `n × n` row-major matrix by
/// cyclic Jacobi rotations. The input is overwritten.
pub fn symmetric_eigenvalues(a: &mut [f64], n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = s;
            a[j * n + i] = s;
        }
    }
    let total = sqrt(a.iter().map(|x| x * x).sum::<f64>());
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        if sqrt(off) <= OFF_DIAGONAL_TOL * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(a, n, p, q);
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

fn rotate(a: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_finite() {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (abs(theta) + sqrt(theta * theta + 1.0))
    } else {
        0.0
    };
    if t == 0.0 {
        return;
    }
    let c = 1.0 / sqrt(t * t + 1.0);
    let s = t * c;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[k * n + p] = new_kp;
        a[p * n + k] = new_kp;
        a[k * n + q] = new_kq;
        a[q * n + k] = new_kq;
    }
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
}
