use alloc::vec::Vec;

use super::{CMatrix, RMatrix, TimeGrid};
use crate::math::{abs, ceil, log2};
use crate::{Complex64, Error, Result};

/// Kolmogorov checks: off-diagonal entries and column sums, scaled by the
/// largest entry.
const GENERATOR_TOL: f64 = 1e-12;

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "expm of a non-square matrix");
    let n = a.rows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 { ceil(log2(norm1 / 0.5)) as u32 } else { 0 };
    let scaled = a.scale(Complex64::new(libm::ldexp(1.0, -(squarings as i32)), 0.0));

    let mut result = CMatrix::identity(n);
    let mut term = CMatrix::identity(n);
    for k in 1..=40 {
        term = term.matmul(&scaled).scale(Complex64::new(1.0 / k as f64, 0.0));
        result = &result + &term;
        if term.max_abs() <= 1e-18 * result.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

/// `e^{t_n L}` at every node for a classical generator `L` (non-negative
/// off-diagonal entries, zero column sums).
pub fn semigroup_exp(l: &RMatrix, grid: &TimeGrid) -> Result<Vec<RMatrix>> {
    validate_generator(l)?;
    let lc = l.to_complex();
    Ok(grid
        .nodes()
        .map(|t| expm(&lc.scale(Complex64::new(t, 0.0))).re())
        .collect())
}

fn validate_generator(l: &RMatrix) -> Result<()> {
    if !l.is_square() {
        return Err(Error::InvalidGenerator(alloc::format!(
            "generator must be square, got {}x{}",
            l.rows(),
            l.cols()
        )));
    }
    let n = l.rows();
    let tol = GENERATOR_TOL * l.max_abs().max(1.0);
    for j in 0..n {
        let mut sum = 0.0;
        for i in 0..n {
            let x = l[(i, j)];
            if !x.is_finite() {
                return Err(Error::InvalidGenerator(alloc::format!("entry ({i}, {j}) is not finite")));
            }
            if i != j && x < 0.0 {
                return Err(Error::InvalidGenerator(alloc::format!(
                    "off-diagonal entry ({i}, {j}) = {x} is negative"
                )));
            }
            sum += x;
        }
        if abs(sum) > tol {
            return Err(Error::InvalidGenerator(alloc::format!(
                "column {j} sums to {sum:e}, expected 0"
            )));
        }
    }
    Ok(())
}
