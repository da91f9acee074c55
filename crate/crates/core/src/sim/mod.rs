//! Simulation harness: phantom, ground-truth scenario, error metric and
//! sub-sampling sweep.

pub mod bundle;
pub mod phantom;
pub mod scenario;
pub mod sweep;

pub use bundle::{read_bundle, write_bundle, Manifest};
pub use phantom::{make_phantom, Phantom};
pub use scenario::{foreground_mean, make_scenario, normalized_error, DvfSpec, Scenario, ScenarioConfig};
pub use sweep::{config_hash, run_sweep, Method, MethodConfig, SweepResult, SweepRow};
