pub mod adiabatic;
pub mod error;
pub mod estimates;
pub mod fermion;
pub mod harness;
pub mod instanton;
pub mod modes;
pub mod observables;
pub mod ode;
pub mod params;
pub mod pulse;
pub mod quad;

pub use error::{Error, Result};
pub use params::{MaterialParams, PhysicalConstants, SimulationParams};
pub use pulse::{make_pulse, PulseProfile, PulseSample, PulseShape, SampledPulse};
