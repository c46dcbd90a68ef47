//! Command-line plumbing for the simulation and certification toolkit:
//! configuration schema, deterministic report rendering, and the five
//! subcommand implementations.
//!
//! The binary (`speqt`) is a thin wrapper over [`commands`]; everything
//! here is callable as a library so the behavior can be tested without
//! spawning processes.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{cmd_bounds, cmd_certify, cmd_estimate, cmd_simulate, cmd_verify, Outcome};
pub use config::{
    settings_to_pairs, DetectorConfig, ResolvedConfig, ResolvedDetector, RunConfig,
    SettingsConfig, StateConfig,
};
pub use report::{render, sidecar_path, to_precise_json, SequenceSidecar, SCHEMA_VERSION};
