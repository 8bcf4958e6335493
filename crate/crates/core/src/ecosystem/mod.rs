//! Habitat network driven by a community workload, one round at a time.
//!
//! Each round runs seven phases: request generation, evolution (parallel,
//! on immutable pool snapshots), sequential apply in habitat order,
//! migration feedback, sequence migration, unused-agent escape, and the
//! metrics snapshot.

pub mod events;
pub mod experiment;
pub mod replay;
pub mod sim;
pub mod workload;

pub use events::{parse_event_line, parse_jsonl, Event, EventKind};
pub use experiment::{compare_migration, mean_generations, CompareReport, PairedRun};
pub use replay::{replay, ReplaySummary};
pub use sim::{build_ecosystem, derive_seed, phase, run_simulation, Ecosystem, ExecutionRecord};
pub use workload::{Community, WorkloadModel};
