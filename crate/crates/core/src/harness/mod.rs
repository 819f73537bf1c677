//! Benchmark orchestration: scenario configs, per-slot decision loop,
//! Monte Carlo tables, context-budget sweeps, training runs and the repair
//! fuzzer. The `bench` binary is a thin shell over this module.
//!
//! Per slot the generative path serializes the state, asks the backend for
//! `G` candidates, parses and repairs each one and deploys the repaired
//! candidate with the highest sum-rate. Solvers are called directly. Every
//! deployment goes through a feasibility audit.

mod benchmark;
mod config;
mod context;
mod episode;
mod fuzz;
pub mod presets;
mod train;

pub use benchmark::{mean_stderr, run_benchmark, Audit, BenchReport, SummaryRow, CSV_SCHEMA_VERSION};
pub use config::{
    BenchConfig, ConfigError, ContextSection, GenerationConfig, LinkPreset, MethodSpec, ScenarioConfig, SeedSpec,
    TrainSection,
};
pub use context::{compare_context_budgets, context_csv, ContextRow};
pub use episode::{is_valid_candidate, run_episode, BenchRecord, EpisodeSettings, Method, MethodKind, Status};
pub use fuzz::{contention_winners, fuzz_case, repair_fuzz, FuzzReport, RawKind};
pub use train::{run_training, TrainReport, TrainRun, CURVE_WINDOW};
