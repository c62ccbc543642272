//! Scenario files, `CWF1` snapshots, diagnostics CSV and run manifests.

pub mod output;
pub mod scenario;
pub mod snapshot;

pub use output::{
    read_diagnostics_csv, read_manifest, run_scenario, run_scenario_with_trajectory, write_diagnostics_csv, write_run,
    OutputFile, RunManifest, DIAGNOSTICS_FILE, MANIFEST_FILE,
};
pub use scenario::{
    load_scenario, load_scenario_with_overrides, parse_scenario, parse_scenario_with_overrides, DiagnosticsSpec,
    GridSpec, InitialSpec, ModelSpec, Scenario,
};
pub use snapshot::{decode_snapshot, encode_snapshot, read_snapshot, read_snapshot_on, write_snapshot, Snapshot};
