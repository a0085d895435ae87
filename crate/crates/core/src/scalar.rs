//! Scalar abstractions.
//!
//! Measures only need ring arithmetic on their weights, so they are generic
//! over [`Scalar`] and work with exact rationals. Everything that touches
//! kernels, exponentials or square roots requires [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};

/// Weight/coordinate type of an occupation measure.
pub trait Scalar: Num + Copy + PartialOrd + ToPrimitive + Debug + Send + Sync + 'static {}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + ToPrimitive + Debug + Send + Sync + 'static {}

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Scalar + Float + FloatConst + FromPrimitive + Sum + Display + Default
{
    /// Lossy conversion from an `f64` literal.
    #[inline(always)]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline(always)]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Squared Euclidean distance between two points of equal dimension.
#[inline]
pub fn dist2<S: Real>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

#[inline]
pub fn norm<S: Real>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |acc, &x| acc + x * x).sqrt()
}
