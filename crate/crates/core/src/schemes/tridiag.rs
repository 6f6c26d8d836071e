use crate::error::{check_len, Error, Result};
use crate::scalar::{Scalar, C};

/// Solves `A x = rhs` for tridiagonal `A` by forward elimination and back
/// substitution (Thomas algorithm, no pivoting).
///
/// `lower` and `upper` hold the `n - 1` off-diagonal entries: row `i` reads
/// `lower[i-1] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`.
pub fn tridiagonal_solve<T: Scalar>(
    lower: &[C<T>],
    diag: &[C<T>],
    upper: &[C<T>],
    rhs: &[C<T>],
) -> Result<Vec<C<T>>> {
    let n = diag.len();
    check_len(n, rhs.len())?;
    if n == 0 {
        return Ok(Vec::new());
    }
    check_len(n - 1, lower.len())?;
    check_len(n - 1, upper.len())?;

    let mut c_prime = vec![C::new(T::zero(), T::zero()); n];
    let mut x = vec![C::new(T::zero(), T::zero()); n];
    let mut pivot = diag[0];
    check_pivot(pivot, 0)?;
    if n > 1 {
        c_prime[0] = upper[0] / pivot;
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i - 1] * c_prime[i - 1];
        check_pivot(pivot, i)?;
        if i + 1 < n {
            c_prime[i] = upper[i] / pivot;
        }
        x[i] = (rhs[i] - lower[i - 1] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c_prime[i] * next;
    }
    Ok(x)
}

#[inline]
fn check_pivot<T: Scalar>(p: C<T>, row: usize) -> Result<()> {
    let m = p.re.abs().max(p.im.abs());
    if m >= T::min_positive_value() && m.is_finite() {
        Ok(())
    } else {
        Err(Error::Breakdown(format!(
            "zero or non-finite pivot in row {row} of the tridiagonal solve"
        )))
    }
}
