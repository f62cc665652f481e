use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type used for attribute statistics, z-scores, the guard
/// band and evaluation metrics.
///
/// Pattern scores are exact integers regardless of the scalar choice.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + FromStr + Display + Debug + Default + Send + Sync + 'static
{
    /// Tag written into model files so a model is never loaded at a
    /// different width than it was trained with.
    const NAME: &'static str;

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    fn from_score(s: u64) -> Self {
        Self::from_u64(s).expect("score representable as float")
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

/// Population mean and standard deviation. Returns `None` for an empty input.
pub fn mean_std<T: Scalar>(values: &[T]) -> Option<(T, T)> {
    if values.is_empty() {
        return None;
    }
    let n = T::from_count(values.len());
    let mean = values.iter().fold(T::zero(), |acc, &v| acc + v) / n;
    let var = values
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .fold(T::zero(), |acc, d| acc + d)
        / n;
    Some((mean, var.sqrt()))
}
