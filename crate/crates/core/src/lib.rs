//! Mixing-zone thermal model of a large space, its supply-air and fan-power
//! controllers, and the demand-response event experiments built on them.

pub mod control;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod thermal;
pub mod trace;
pub mod units;

pub use control::{ControlState, ControllerGains, ResetMode};
pub use engine::{EventKind, EventSchedule, Mode, OutdoorProfile, PowerReference, Scenario};
pub use error::{Error, Result};
pub use metrics::{EventMetrics, EventWindow};
pub use thermal::{BuildingParams, Equilibrium, PlantModel, ThermalState};
pub use trace::{Sample, Trace, TraceMeta};
