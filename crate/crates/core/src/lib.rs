//! Bit-accurate emulation of approximate FP32 multipliers built from a
//! radix-8 Booth significand multiplier with interleaved approximate 4:2
//! compressors, plus a small CNN whose convolution taps can each use a
//! different multiplier and an NSGA-II search over those assignments.

pub mod booth;
pub mod cnn;
pub mod compressor;
pub mod error;
pub mod fp32;
pub mod hw;
pub mod metrics;
pub mod nsga2;
pub mod sequence;

pub use booth::{default_bank, Multiplier, MultiplierBank, MultiplierConfig};
pub use compressor::{CompressorSet, CompressorTable, Polarity};
pub use error::{Error, Result};
pub use fp32::{Fp32Word, Significand24};
pub use sequence::AssignmentSequence;

/// The network the inference engine runs.
pub type Network = cnn::NetworkDef<f32>;

/// Search results over (area, PDP, accuracy loss) in double precision.
pub type Front = nsga2::ParetoFront<f64>;
pub type Individual = nsga2::Individual<f64>;
