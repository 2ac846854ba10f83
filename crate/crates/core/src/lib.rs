//! Simulation of a single static wireless charger serving mobile agents,
//! with adaptive range policies and offline optimal-charging solvers.

pub mod charging;
pub mod energy;
pub mod engine;
pub mod geom;
pub mod mobility;
pub mod offline;
pub mod policies;
pub mod report;

/// Random generator used throughout the simulator.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub use charging::{ChargerState, RangeBounds};
pub use engine::{run_experiment, run_simulation, Experiment, PolicyEntry, RunResult, ScenarioConfig, Simulation};
pub use policies::{Knowledge, Policy, PolicySpec};
