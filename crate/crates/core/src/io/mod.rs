//! Scenario files, trace emission, summaries and seed sweeps.

pub mod emit;
pub mod scenario;
pub mod summary;
pub mod sweep;

pub use emit::{csv_string, emit_trace, json_meta, svg_heatmap, Format};
pub use scenario::{parse_scenario, to_scenario, ScenarioFile, SCHEMA_VERSION};
pub use summary::{herfindahl, max_share, SummaryStats};
pub use sweep::{parse_seeds, sweep, SeedSummary, SweepReport, CONCENTRATION_THRESHOLD};
