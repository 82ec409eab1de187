//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Floating point type the solver can run on: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `x^p` for `x >= 0`.
///
/// `0^p` is `0` for `p > 0` and `1` for `p == 0`; a zero base with a negative
/// exponent and any negative base are domain errors.
pub fn pow_nonneg<T: Scalar>(x: T, p: T, what: &'static str) -> Result<T> {
    if x.is_nan() || p.is_nan() {
        return Err(Error::Domain {
            what,
            detail: "NaN input".into(),
        });
    }
    if x < T::zero() {
        return Err(Error::Domain {
            what,
            detail: format!("negative base {x}"),
        });
    }
    if x == T::zero() {
        return if p > T::zero() {
            Ok(T::zero())
        } else if p == T::zero() {
            Ok(T::one())
        } else {
            Err(Error::Domain {
                what,
                detail: format!("zero raised to negative power {p}"),
            })
        };
    }
    if p == T::one() {
        return Ok(x);
    }
    Ok(x.powf(p))
}

/// Largest absolute relative difference, scaled by `max(|a|, |b|, 1)`.
pub fn rel_diff<T: Scalar>(a: T, b: T) -> T {
    (a - b).abs() / a.abs().max(b.abs()).max(T::one())
}
