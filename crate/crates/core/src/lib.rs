//! Link-level simulation of an OFDM downlink in which positioning reference
//! signals are power-superposed on PDSCH data.
//!
//! The crate builds the resource grid, passes it through a multi-target
//! bistatic channel, and runs both receivers: periodogram range/Doppler
//! sensing with PRS+DMRS ghost suppression, and DMRS-based data detection
//! with optional PRS interference cancellation.

pub mod comms;
mod dsp;
pub mod error;
pub mod harness;
pub mod ofdm_channel;
pub mod resource_grid;
pub mod sensing;
pub mod sequences;

use ndarray::Array2;
use num_complex::Complex64;

/// M x N matrix indexed as `[m, n]` (subcarrier, symbol).
pub type CMatrix = Array2<Complex64>;

pub use comms::{BerReport, ChannelEstimate, DetectionMode, EstimationMethod, SyncReference};
pub use error::{IsacError, Result};
pub use ofdm_channel::{ChannelConfig, OfdmParams, Target, C0};
pub use resource_grid::{
    build_grid, DmrsConfig, GridDims, GridLayout, PdschConfig, PowerSplit, PrsConfig, ResourceGrid,
};
pub use sensing::{
    AmbiguitySpec, DopplerTimeBase, ProfileKind, RangeProfile, SensingResult, VelocityProfile,
};
pub use sequences::{GoldSeed, RefKind, SymbolSequence};

pub use num_complex;
