//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the solvers are generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or parameter.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Complex field value.
pub type C<T> = Complex<T>;

/// `x^n` for a non-negative integer exponent.
#[inline]
pub(crate) fn powu<T: Scalar>(x: T, n: u32) -> T {
    x.powi(n as i32)
}

/// Largest modulus of a complex field; zero for an empty slice.
pub fn sup_norm<T: Scalar>(u: &[C<T>]) -> T {
    u.iter().fold(T::zero(), |m, z| m.max(z.norm()))
}

/// Compensated (Kahan–Babuška) running sum, used for the simulation clock so
/// that very small late time steps still advance `t`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new(value: T) -> Self {
        Self {
            sum: value,
            carry: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let s = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - s) + x;
        } else {
            self.carry += (x - s) + self.sum;
        }
        self.sum = s;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}
