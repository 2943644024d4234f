//! Event-driven evacuation runs with stale advice and behavior errors.
//!
//! Every evacuee starts at time 0 with budget `T_D`. At each node arrival it
//! asks the navigation service for a direction; with probability `pod` the
//! answer is computed from the table `sod` epochs old, and with probability
//! `poe` the evacuee ignores it and takes a uniformly random incident edge.
//! The traversal time of an edge is the field's typical time when the edge
//! is entered. Field resamples and table rebuilds happen together at every
//! multiple of the refresh interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ConfigError, SimError};
use crate::field::{Speeds, TraversalTimeField, TypicalInit};
use crate::graph::{NavGraph, NodeId};
use crate::rng::{self, Stream};
use crate::routing::{build_table, next_hop, LookupTable, SnapshotRing, WorstCaseDistances};

/// Evacuation deadline `T_S - T_A - T_EL`.
pub fn compute_deadline(t_s: f64, t_a: f64, t_el: f64) -> Result<f64, ConfigError> {
    for (name, value) in [("T_S", t_s), ("T_A", t_a), ("T_EL", t_el)] {
        if !value.is_finite() || value < 0.0 {
            return Err(ConfigError::Invalid(format!(
                "{name} must be a non-negative number of seconds, got {value}"
            )));
        }
    }
    let deadline = t_s - t_a - t_el;
    if deadline <= 0.0 {
        return Err(ConfigError::NonPositiveDeadline(deadline));
    }
    Ok(deadline)
}

/// When the stale-table draw is made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayMode {
    /// Fresh Bernoulli draw at every decision.
    #[default]
    PerDecision,
    /// Each node is delayed or not for the whole run, drawn once at start.
    PerNode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub t_s: f64,
    pub t_a: f64,
    pub t_el: f64,
    /// Seconds between field resamples and table rebuilds.
    pub refresh_interval: f64,
    pub pod: f64,
    pub sod: usize,
    pub poe: f64,
    pub speeds: Speeds,
    pub static_field: bool,
    /// Probability that a segment keeps its typical time across a resample.
    pub persistence: f64,
    pub typical_init: TypicalInit,
    pub delay_mode: DelayMode,
    pub master_seed: u64,
    /// A run fails if anyone is still walking after this many deadlines.
    pub time_cap_deadlines: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            t_s: 3600.0,
            t_a: 300.0,
            t_el: 1500.0,
            refresh_interval: 5.0,
            pod: 0.0,
            sod: 0,
            poe: 0.0,
            speeds: Speeds::SHIP,
            static_field: false,
            persistence: DEFAULT_PERSISTENCE,
            typical_init: TypicalInit::Sampled,
            delay_mode: DelayMode::PerDecision,
            master_seed: 0,
            time_cap_deadlines: 100.0,
        }
    }
}

/// Default per-epoch keep probability of a segment's typical time.
pub const DEFAULT_PERSISTENCE: f64 = 0.5;

impl ScenarioConfig {
    pub fn deadline(&self) -> Result<f64, ConfigError> {
        compute_deadline(self.t_s, self.t_a, self.t_el)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.deadline()?;
        for (name, value) in [
            ("pod", self.pod),
            ("poe", self.poe),
            ("persistence", self.persistence),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Probability { name, value });
            }
        }
        for (name, value) in [
            ("refresh_interval", self.refresh_interval),
            ("time_cap_deadlines", self.time_cap_deadlines),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(ConfigError::NonPositive { name, value });
            }
        }
        Speeds::new(self.speeds.worst, self.speeds.nominal)?;
        Ok(())
    }

    /// Same scenario with delays and errors switched off.
    pub fn ideal(&self) -> ScenarioConfig {
        ScenarioConfig {
            pod: 0.0,
            poe: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecisionKind {
    Advised,
    StaleAdvised,
    RandomError,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub node: NodeId,
    pub kind: DecisionKind,
    pub edge: usize,
    pub next: NodeId,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecisionCounts {
    pub advised: u32,
    pub stale: u32,
    pub error: u32,
    pub fallback: u32,
}

impl DecisionCounts {
    fn record(&mut self, kind: DecisionKind) {
        match kind {
            DecisionKind::Advised => self.advised += 1,
            DecisionKind::StaleAdvised => self.stale += 1,
            DecisionKind::RandomError => self.error += 1,
            DecisionKind::Fallback => self.fallback += 1,
        }
    }

    pub fn total(&self) -> u32 {
        self.advised + self.stale + self.error + self.fallback
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evacuee {
    pub start_node: NodeId,
    pub current_node: NodeId,
    pub elapsed: f64,
    pub deadline: f64,
    pub trajectory: Vec<Step>,
}

impl Evacuee {
    pub fn new(start: NodeId, deadline: f64) -> Self {
        Evacuee {
            start_node: start,
            current_node: start,
            elapsed: 0.0,
            deadline,
            trajectory: Vec::new(),
        }
    }

    /// Remaining allowance `T_D - elapsed`.
    pub fn budget(&self) -> f64 {
        self.deadline - self.elapsed
    }

    fn advance(&mut self, step: Step) {
        self.elapsed += step.duration;
        self.current_node = step.next;
        self.trajectory.push(step);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub edge: usize,
    pub next: NodeId,
    pub kind: DecisionKind,
}

/// Chooses the edge an evacuee takes from its current node.
///
/// Draw order is fixed: delay, then error, then the random edge.
pub fn decide(
    g: &NavGraph,
    evacuee: &Evacuee,
    ring: &SnapshotRing,
    rng_delay: &mut ChaCha8Rng,
    rng_error: &mut ChaCha8Rng,
    cfg: &ScenarioConfig,
) -> Decision {
    let delayed = rng_delay.gen_bool(cfg.pod);
    decide_with(g, evacuee, ring, delayed, rng_error, cfg)
}

fn decide_with(
    g: &NavGraph,
    evacuee: &Evacuee,
    ring: &SnapshotRing,
    delayed: bool,
    rng_error: &mut ChaCha8Rng,
    cfg: &ScenarioConfig,
) -> Decision {
    let node = evacuee.current_node;
    let depth = if delayed { cfg.sod } else { 0 };
    let table: &Arc<LookupTable> = ring.read(depth).expect("ring holds the initial table");
    let stale = Some(table.epoch()) != ring.newest_epoch();
    let advice = next_hop(table, node, evacuee.budget())
        .expect("evacuee sits on a graph node")
        .expect("decide is never called at the exit");

    if rng_error.gen_bool(cfg.poe) {
        let incident = g.incident(node);
        let pick = incident[rng_error.gen_range(0..incident.len())];
        return Decision {
            edge: pick.edge,
            next: pick.neighbor,
            kind: DecisionKind::RandomError,
        };
    }
    let kind = if !advice.feasible {
        DecisionKind::Fallback
    } else if stale {
        DecisionKind::StaleAdvised
    } else {
        DecisionKind::Advised
    };
    Decision {
        edge: advice.edge,
        next: advice.neighbor,
        kind,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvacueeOutcome {
    pub start: NodeId,
    pub arrival: f64,
    pub deadline_violated: bool,
    /// `W(start) > T_D`: no route could be guaranteed from the outset.
    pub infeasible_at_start: bool,
    pub counts: DecisionCounts,
    pub trajectory: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run_seed: u64,
    /// Seed of the field stream; equal seeds mean equal field realizations.
    pub field_seed: u64,
    pub config: ScenarioConfig,
    pub deadline: f64,
    pub evacuees: Vec<EvacueeOutcome>,
}

impl RunResult {
    pub fn total_arrival(&self) -> f64 {
        self.evacuees.iter().map(|e| e.arrival).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Refresh { epoch: u64 },
    Arrive { evacuee: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn class(&self) -> u8 {
        match self.kind {
            EventKind::Refresh { .. } => 0,
            EventKind::Arrive { .. } => 1,
        }
    }
}

impl Eq for Event {}

impl Ord for Event {
    // Earliest first; refreshes before arrivals at equal times; then FIFO.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.class().cmp(&self.class()))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Default)]
struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }
}

/// Runs one simulation with the streams of `run_seed`.
pub fn run_seeded(
    g: &NavGraph,
    cfg: &ScenarioConfig,
    starts: &[NodeId],
    run_seed: u64,
) -> Result<RunResult, SimError> {
    cfg.validate()?;
    let deadline = cfg.deadline()?;
    if let Some(&bad) = starts.iter().find(|&&s| !g.contains(s)) {
        return Err(SimError::UnknownStart(bad));
    }

    let mut field = TraversalTimeField::new(
        g,
        cfg.speeds,
        cfg.typical_init,
        rng::stream(run_seed, Stream::Field),
    )?
    .with_change_interval(cfg.refresh_interval)
    .with_persistence(cfg.persistence)
    .with_static(cfg.static_field);
    let worst = WorstCaseDistances::compute(g, &field.worst_times());
    let mut ring = SnapshotRing::new(cfg.sod);
    ring.push(build_table(g, &field.freeze_snapshot(), &worst))
        .expect("first table");

    let mut rng_delay = rng::stream(run_seed, Stream::Delay);
    let mut rng_error = rng::stream(run_seed, Stream::Error);
    let delayed_nodes: Option<Vec<bool>> = match cfg.delay_mode {
        DelayMode::PerDecision => None,
        DelayMode::PerNode => Some(
            (0..g.node_count())
                .map(|_| rng_delay.gen_bool(cfg.pod))
                .collect(),
        ),
    };

    let mut evacuees: Vec<Evacuee> = starts.iter().map(|&s| Evacuee::new(s, deadline)).collect();
    let mut arrivals = vec![0.0; evacuees.len()];
    let mut counts = vec![DecisionCounts::default(); evacuees.len()];
    let mut queue = EventQueue::default();
    let mut active = 0usize;
    for (idx, ev) in evacuees.iter().enumerate() {
        if ev.start_node != g.exit() {
            queue.push(0.0, EventKind::Arrive { evacuee: idx });
            active += 1;
        }
    }
    if active > 0 && !cfg.static_field {
        queue.push(cfg.refresh_interval, EventKind::Refresh { epoch: 1 });
    }

    let cap = cfg.time_cap_deadlines * deadline;
    while let Some(event) = queue.pop() {
        if event.time > cap {
            return Err(SimError::TimeCap {
                cap,
                remaining: active,
            });
        }
        match event.kind {
            EventKind::Refresh { epoch } => {
                field.resample();
                debug_assert_eq!(field.epoch(), epoch);
                ring.push(build_table(g, &field.freeze_snapshot(), &worst))
                    .expect("epochs are consecutive");
                if active > 0 {
                    queue.push(
                        (epoch + 1) as f64 * cfg.refresh_interval,
                        EventKind::Refresh { epoch: epoch + 1 },
                    );
                }
            }
            EventKind::Arrive { evacuee: idx } => {
                let ev = &mut evacuees[idx];
                if ev.current_node == g.exit() {
                    arrivals[idx] = ev.elapsed;
                    active -= 1;
                    continue;
                }
                let delayed = match &delayed_nodes {
                    None => rng_delay.gen_bool(cfg.pod),
                    Some(flags) => flags[ev.current_node],
                };
                let decision = decide_with(g, ev, &ring, delayed, &mut rng_error, cfg);
                let duration = field.typical(decision.edge);
                counts[idx].record(decision.kind);
                ev.advance(Step {
                    node: ev.current_node,
                    kind: decision.kind,
                    edge: decision.edge,
                    next: decision.next,
                    duration,
                });
                // elapsed is the running sum of durations; events use it as the clock
                queue.push(ev.elapsed, EventKind::Arrive { evacuee: idx });
            }
        }
    }

    let evacuees = evacuees
        .into_iter()
        .zip(arrivals)
        .zip(counts)
        .map(|((ev, arrival), counts)| EvacueeOutcome {
            start: ev.start_node,
            arrival,
            deadline_violated: arrival > deadline,
            infeasible_at_start: worst.get(ev.start_node) > deadline,
            counts,
            trajectory: ev.trajectory,
        })
        .collect();

    Ok(RunResult {
        run_seed,
        field_seed: rng::stream_seed(run_seed, Stream::Field),
        config: cfg.clone(),
        deadline,
        evacuees,
    })
}

/// Runs run 0 of `cfg.master_seed`.
pub fn run_single(
    g: &NavGraph,
    cfg: &ScenarioConfig,
    starts: &[NodeId],
) -> Result<RunResult, SimError> {
    run_seeded(g, cfg, starts, rng::run_seed(cfg.master_seed, 0))
}

/// Ideal and perturbed runs sharing one field realization.
pub fn run_paired_seeded(
    g: &NavGraph,
    cfg: &ScenarioConfig,
    starts: &[NodeId],
    run_seed: u64,
) -> Result<(RunResult, RunResult), SimError> {
    let ideal = run_seeded(g, &cfg.ideal(), starts, run_seed)?;
    let perturbed = run_seeded(g, cfg, starts, run_seed)?;
    Ok((ideal, perturbed))
}

pub fn run_paired(
    g: &NavGraph,
    cfg: &ScenarioConfig,
    starts: &[NodeId],
) -> Result<(RunResult, RunResult), SimError> {
    run_paired_seeded(g, cfg, starts, rng::run_seed(cfg.master_seed, 0))
}
