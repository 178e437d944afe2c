use faer::traits::{ComplexField, RealField};
use num_complex::Complex;
use std::fmt::{Debug, Display};

/// Floating point type the solvers are generic over (`f32` or `f64`).
pub trait Real:
    RealField<Unit: ComplexField>
    + num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + Copy
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn lit(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).unwrap()
    }

    fn from_int(n: i64) -> Self {
        <Self as num_traits::FromPrimitive>::from_i64(n).unwrap()
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type C<T> = Complex<T>;

pub(crate) fn cz<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

pub(crate) fn cr<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// exp(i phi)
pub(crate) fn cis<T: Real>(phi: T) -> Complex<T> {
    Complex::new(phi.cos(), phi.sin())
}

pub(crate) fn vdot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    let mut s = cz::<T>();
    for (x, y) in a.iter().zip(b) {
        s = s + x.conj() * *y;
    }
    s
}

pub(crate) fn vnorm<T: Real>(a: &[Complex<T>]) -> T {
    let mut s = T::zero();
    for x in a {
        s = s + x.norm_sqr();
    }
    s.sqrt()
}
