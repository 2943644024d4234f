//! Discrete-event simulation of sensor-assisted passenger-ship evacuation.
//!
//! Evacuees walk a multi-deck navigation graph following lookup-table advice
//! that keeps them inside a worst-case deadline guarantee while chasing the
//! fastest typical route. Advice may be computed from stale tables (delay
//! probability `pod`, staleness `sod` refresh epochs) and evacuees may ignore
//! it (error probability `poe`). Paired runs that share one traversal-time
//! realization measure how much each imperfection costs.

pub mod error;
pub mod experiment;
pub mod field;
pub mod graph;
pub mod metrics;
pub mod rng;
pub mod routing;
pub mod sim;

pub use error::{ConfigError, Error, GraphError, MetricsError, RingError, SimError};
pub use experiment::{
    parse_config, run_parallel, run_recipe, ExperimentOutput, ExperimentSpec, GraphSource,
    GridPoint, Recipe, Users,
};
pub use field::{FieldSnapshot, SegmentTimes, Speeds, TraversalTimeField, TypicalInit};
pub use graph::{
    generate_synthetic, parse_graph, serialize_graph, EdgeKind, EdgeRecord, GeneratorParams,
    NavGraph, NodeId, NodeRecord,
};
pub use metrics::{average_delta, node_delta, AggregateMetric, NodeMetric, ResultRow};
pub use routing::{
    build_table, next_hop, plan_route, worst_case_distances, Advice, LookupTable, SnapshotRing,
    WorstCaseDistances,
};
pub use sim::{
    compute_deadline, decide, run_paired, run_single, DecisionKind, Evacuee, RunResult,
    ScenarioConfig,
};
