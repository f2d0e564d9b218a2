//! The floating-point abstraction shared by the data-side statistics,
//! the closed-form estimators and the simplex minimizer.
//!
//! Quadrature-heavy model quantities (kernel norms, limit-theory oracles)
//! and the FFT simulator always run in `f64`; generic code converts at the
//! boundary through [`Real::to_f64_lossy`] and [`Real::of`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

/// Serde codec writing NaN as `null` and reading `null` back as NaN, so
/// that failed estimates survive a JSON round trip.
pub mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Real;

    pub fn serialize<T: Real + Serialize, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, T: Real + Deserialize<'de>, D: Deserializer<'de>>(
        d: D,
    ) -> Result<T, D::Error> {
        Ok(Option::<T>::deserialize(d)?.unwrap_or_else(T::nan))
    }
}

/// [`nan_as_null`] for coordinate triples.
pub mod nan_as_null_3 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; 3], s: S) -> Result<S::Ok, S::Error> {
        v.map(|x| if x.is_nan() { None } else { Some(x) })
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 3], D::Error> {
        Ok(<[Option<f64>; 3]>::deserialize(d)?.map(|x| x.unwrap_or(f64::NAN)))
    }
}

impl Real for f32 {}
impl Real for f64 {}
