//! Virtual experiments, their reports, and the CLI.
//!
//! | experiment  | function                          | outputs                                |
//! |-------------|-----------------------------------|----------------------------------------|
//! | `sweep`     | [`sweep::exp_triangular_sweep`]   | summary, static loop, trace            |
//! | `drift`     | [`drift::exp_dc_drift`]           | summary                                |
//! | `hold`      | [`hold::exp_bipolar_hold`]        | summary, snapshots, first-window trace |
//! | `endurance` | [`endurance::exp_endurance`]      | summary, first-cycles trace            |
//!
//! Every report is written as CSV plus a `manifest.json` that embeds the
//! configuration needed to reproduce it.

pub mod cli;
pub mod config;
pub mod drift;
pub mod endurance;
pub mod hold;
pub mod plot;
pub mod report;
pub mod sweep;

pub use config::RunConfig;
pub use drift::{calibrate_injection, exp_dc_drift, DriftSettings};
pub use endurance::{exp_endurance, EnduranceSettings};
pub use hold::{exp_bipolar_hold, HoldSettings};
pub use report::{Cell, ExperimentReport, Table};
pub use sweep::{exp_triangular_sweep, SweepSettings};
