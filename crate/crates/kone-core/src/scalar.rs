//! Floating-point scalar abstraction: f32 or f64.

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use std::fmt::{Debug, Display, LowerExp};

/// Scalar type the numeric core is generic over.
///
/// Everything the library computes (pairings, energies, metrics, drifts)
/// works for any implementor; the crate root exports `f64`-concrete aliases.
/// Random draws are part of the trait so generic code does not have to
/// thread `rand_distr` bounds through every signature.
pub trait Scalar:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::NumAssign
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + std::iter::Sum
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Standard normal draw.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Uniform draw in the open interval (0, 1).
    fn unit_open<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Uniform draw in `[lo, hi)`.
    fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }
            fn unit_open<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Open01.sample(rng)
            }
            fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self {
                rng.random_range(lo..hi)
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Convert an `f64` constant into the scalar type.
#[inline]
pub fn real<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("constant not representable")
}

/// Convert a `usize` into the scalar type.
#[inline]
pub fn real_of_usize<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("count not representable")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        let x: f64 = real(1.5);
        assert_eq!(x, 1.5);
        let y: f32 = real_of_usize(12);
        assert_eq!(y, 12.0);
    }

    #[test]
    fn draws_in_range() {
        let mut rng = rand::rng();
        for _ in 0..100 {
            let u: f64 = f64::unit_open(&mut rng);
            assert!(u > 0.0 && u < 1.0);
            let v: f64 = f64::uniform(&mut rng, -2.0, 3.0);
            assert!((-2.0..3.0).contains(&v));
        }
    }
}
