//! Scalar abstraction for scores, probabilities, and penalties.
//!
//! All discrete machinery (symbols, rules, automaton states, stacks) is
//! integer-typed; the only real-valued quantities in the crate are action
//! log-probabilities and penalty scores. Those are generic over [`Score`]
//! so the pipeline can run on `f32` as well as the default `f64`.

use std::fmt;

/// Scalar type for log-probabilities and penalty scores.
///
/// `f64` is the default everywhere; `f32` is supported for callers that
/// want smaller tables.
pub trait Score:
    num_traits::Float
    + num_traits::NumCast
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Lossless-enough widening for serialization and display.
    fn to_f64_lossy(self) -> f64 {
        num_traits::cast(self).expect("score representable as f64")
    }

    /// Narrow an `f64` constant (weight, threshold, file payload) into `Self`.
    fn from_f64_lossy(v: f64) -> Self {
        num_traits::cast(v).expect("f64 representable as score type")
    }
}

impl Score for f32 {}
impl Score for f64 {}
