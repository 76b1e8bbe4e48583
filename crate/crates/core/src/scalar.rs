//! Scalar abstraction shared by every numerical module.
//!
//! All numerics are written against [`Real`]; `f64` is the working precision
//! for experiments and `f32` is available for memory-light exploratory runs.
//! FFT plans are reached through [`Real::plan_fft`] so that generic code does
//! not need to carry `rustfft::FftNum` (whose `Signed` supertrait would make
//! `abs`/`signum` ambiguous next to `Float`).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// A batch of in-place one-dimensional transforms of a fixed length.
pub trait LineFft<T>: Send + Sync {
    fn len(&self) -> usize;
    fn scratch_len(&self) -> usize;
    /// Transforms every consecutive chunk of `len()` elements in `buf`.
    fn process(&self, buf: &mut [Complex<T>], scratch: &mut [Complex<T>]);
}

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Unit roundoff of the type.
    const EPS: Self;

    fn plan_fft(len: usize, inverse: bool) -> Arc<dyn LineFft<Self>>;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

struct RustFftLines<T: rustfft::FftNum>(Arc<dyn rustfft::Fft<T>>);

impl<T: rustfft::FftNum> LineFft<T> for RustFftLines<T> {
    fn len(&self) -> usize {
        self.0.len()
    }

    fn scratch_len(&self) -> usize {
        self.0.get_inplace_scratch_len()
    }

    fn process(&self, buf: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        self.0.process_with_scratch(buf, scratch);
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            const EPS: Self = <$t>::EPSILON;

            fn plan_fft(len: usize, inverse: bool) -> Arc<dyn LineFft<Self>> {
                let mut planner = rustfft::FftPlanner::<$t>::new();
                let plan = if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                };
                Arc::new(RustFftLines(plan))
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Shorthand for [`Real::lit`].
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}
