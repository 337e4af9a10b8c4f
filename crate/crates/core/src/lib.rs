//! OTFS massive-MIMO downlink channel estimation.
//!
//! - [`modem`]: discrete-time OTFS modulation/demodulation and the
//!   delay-Doppler convolution model.
//! - [`channel`]: clustered time-variant MIMO channels and their
//!   delay-Doppler-space / delay-Doppler-angle representations.
//! - [`pilot`]: pilot/guard frame layout and sensing-matrix assembly.
//! - [`estimators`]: impulse+LS, OMP and 3D structured OMP.
//! - [`link`]: multi-antenna transmission through the channel.
//! - [`bench`]: seeded Monte-Carlo experiment harness.
//! - [`validate`]: fast self-checks with pass/fail reporting.

pub mod bench;
pub mod channel;
pub mod dft;
pub mod error;
pub mod estimators;
pub mod link;
pub mod modem;
pub mod pilot;
pub mod rng;
pub mod validate;

pub use error::{OtfsError, Result};
pub use num_complex::Complex64;
