//! Emotion classification from noisy speech with from-scratch recurrent
//! networks.
//!
//! The pipeline is: clean corpus ([`corpus`]) → additive environmental
//! noise at a controlled SNR ([`mixer`]) → 13-coefficient MFCC frames
//! ([`dsp`]) → a vanilla RNN, LSTM or GRU sequence classifier trained with
//! BPTT and plain SGD ([`cells`], [`trainer`]). [`harness`] drives the
//! parameter sweeps and the GRU-vs-LSTM accuracy and runtime comparison.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which the gradient checks require.

pub mod cells;
pub mod corpus;
pub mod dsp;
pub mod harness;
pub mod mixer;
pub mod nn;
pub mod scalar;
pub mod seed;
pub mod synth;
pub mod trainer;

pub use scalar::Scalar;

/// Number of emotion classes.
pub const NUM_CLASSES: usize = 7;

pub type Matrix64 = nn::Matrix<f64>;
pub type Vector64 = nn::Vector<f64>;
pub type Network64 = cells::Network<f64>;
pub type Utterance64 = corpus::Utterance<f64>;
pub type FeatureSequence64 = dsp::FeatureSequence<f64>;
pub type Sample64 = trainer::Sample<f64>;
pub type TrainConfig64 = trainer::TrainConfig<f64>;

pub type Matrix32 = nn::Matrix<f32>;
pub type Network32 = cells::Network<f32>;
