//! Modeling and analysis toolkit for a Rydberg-ensemble single-photon source.
//!
//! * [`dynamics`] and [`retrieval`] predict write, storage and retrieval
//!   efficiencies from the atomic parameters.
//! * [`contaminant`] models long-lived contaminant Rydberg states that
//!   blockade later pulses.
//! * [`streamgen`] produces Monte Carlo time-tag streams for HBT and HOM
//!   setups, and [`analysis`] turns tag streams back into g², HOM
//!   visibility and mode overlap.
//! * [`metrics`] reduces (P, V, g²) to single-mode efficiency, fidelity and
//!   brightness.

pub mod analysis;
pub mod config;
pub mod contaminant;
pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod params;
pub mod retrieval;
pub mod streamgen;
pub mod timetag;

pub use config::{load_config, Config};
pub use error::{Error, ErrorKind, Result};
pub use params::{
    path_efficiency, two_pi_khz, two_pi_mhz, BeamSplitterCoeffs, DetectorModel, OpticalPath,
    PhysicalParams, PulseSchedule,
};
pub use timetag::{TimeTag, TimeTagStream};
