//! Probabilistically shaped multi-level coding with polar codes.
//!
//! The crate covers the whole transmission chain used to compare shaped and
//! uniform multi-level coding (MLC) and bit-interleaved coded modulation
//! (BICM) on real-valued Rayleigh fading channels:
//!
//! * [`polar`]: transform, reliability orders, CRC, and a list decoder.
//! * [`shaping`]: shaping-bit generation with a polar decoder as precoder.
//! * [`modem`]: ASK alphabets, labelings, symbol pmfs, and soft demappers.
//! * [`channel`]: Rayleigh/AWGN channel with receiver-side CSI.
//! * [`rates`]: Monte-Carlo achievable-rate estimators and shaping optimizers.
//! * [`transceiver`]: the four scheme chains and the rate-allocation design.
//! * [`sim`]: experiment orchestration used by the command-line tool.

pub mod channel;
pub mod error;
pub mod modem;
pub mod polar;
pub mod rates;
pub mod rng;
pub mod shaping;
pub mod sim;
pub mod transceiver;

pub use error::{Error, Result};
