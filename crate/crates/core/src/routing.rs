//! Lookup tables that advise a next hop toward the exit.
//!
//! Two shortest-path sweeps from the exit feed every table: worst-case
//! distances `W` (static, from `t_worst`) and typical distances `D_typ`
//! (per snapshot, from `t_typical`). Advice at a node is the first hop of the
//! fastest typical-time route whose every step keeps the walker inside the
//! worst-case guarantee: after spending `e` seconds on the route, the next
//! edge `(v, u)` is allowed only if `e + t_worst(v, u) + W(u) <= budget`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::sync::Arc;

use crate::error::RingError;
use crate::field::FieldSnapshot;
use crate::graph::{NavGraph, NodeId};

/// Relative slack on budget comparisons, absorbing rounding in `B - t`.
const BUDGET_SLACK: f64 = 1e-12;

fn within_budget(cost: f64, budget: f64) -> bool {
    cost <= budget + BUDGET_SLACK * budget.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    key: f64,
    node: NodeId,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    // Min-heap on key, then node id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest distances with per-edge weights.
pub fn shortest_from(g: &NavGraph, source: NodeId, weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(weights.len(), g.edge_count());
    let mut dist = vec![f64::INFINITY; g.node_count()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem {
        key: 0.0,
        node: source,
    });
    while let Some(HeapItem { key, node }) = heap.pop() {
        if key > dist[node] {
            continue;
        }
        for inc in g.incident(node) {
            let cand = dist[node] + weights[inc.edge];
            if cand < dist[inc.neighbor] {
                dist[inc.neighbor] = cand;
                heap.push(HeapItem {
                    key: cand,
                    node: inc.neighbor,
                });
            }
        }
    }
    dist
}

/// Worst-case shortest time from every node to the exit.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseDistances {
    dist: Vec<f64>,
    edge_worst: Arc<[f64]>,
}

impl WorstCaseDistances {
    pub fn compute(g: &NavGraph, edge_worst: &[f64]) -> Self {
        WorstCaseDistances {
            dist: shortest_from(g, g.exit(), edge_worst),
            edge_worst: edge_worst.into(),
        }
    }

    pub fn get(&self, node: NodeId) -> f64 {
        self.dist[node]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.dist
    }

    pub fn edge_worst(&self, edge: usize) -> f64 {
        self.edge_worst[edge]
    }
}

/// Shorthand for [`WorstCaseDistances::compute`].
pub fn worst_case_distances(g: &NavGraph, edge_worst: &[f64]) -> WorstCaseDistances {
    WorstCaseDistances::compute(g, edge_worst)
}

/// One tuple of a node's lookup table: the view through one incident edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableEntry {
    pub neighbor: NodeId,
    pub edge: usize,
    pub t_typical: f64,
    pub t_worst: f64,
    pub d_typical: f64,
    pub w_worst: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    epoch: u64,
    exit: NodeId,
    d_typical: Vec<f64>,
    entries: Vec<Vec<TableEntry>>,
}

impl LookupTable {
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn exit(&self) -> NodeId {
        self.exit
    }

    pub fn d_typical(&self, node: NodeId) -> f64 {
        self.d_typical[node]
    }

    pub fn entries(&self, node: NodeId) -> &[TableEntry] {
        &self.entries[node]
    }

    pub fn node_count(&self) -> usize {
        self.entries.len()
    }

    /// Adds `offset` to every typical distance. Only used to probe argmin
    /// invariance.
    #[doc(hidden)]
    pub fn shifted(&self, offset: f64) -> LookupTable {
        let mut t = self.clone();
        for d in &mut t.d_typical {
            *d += offset;
        }
        for list in &mut t.entries {
            for e in list {
                e.d_typical += offset;
            }
        }
        t
    }
}

pub fn build_table(g: &NavGraph, snapshot: &FieldSnapshot, w: &WorstCaseDistances) -> LookupTable {
    assert_eq!(snapshot.edge_count(), g.edge_count(), "snapshot must cover every edge");
    let typical = snapshot.typical();
    let d_typical = shortest_from(g, g.exit(), typical);
    let entries = (0..g.node_count())
        .map(|v| {
            g.incident(v)
                .iter()
                .map(|inc| TableEntry {
                    neighbor: inc.neighbor,
                    edge: inc.edge,
                    t_typical: typical[inc.edge],
                    t_worst: w.edge_worst(inc.edge),
                    d_typical: d_typical[inc.neighbor],
                    w_worst: w.get(inc.neighbor),
                })
                .collect()
        })
        .collect();
    LookupTable {
        epoch: snapshot.epoch(),
        exit: g.exit(),
        d_typical,
        entries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advice {
    pub neighbor: NodeId,
    pub edge: usize,
    /// False when no incident edge keeps the worst-case guarantee and the
    /// advice falls back to the shortest worst-case route.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("unknown node id {0}")]
pub struct UnknownNode(pub NodeId);

/// A budget-respecting route from a node to the exit.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePlan {
    pub nodes: Vec<NodeId>,
    pub typical_time: f64,
}

fn fallback(table: &LookupTable, node: NodeId) -> Option<&TableEntry> {
    table.entries(node).iter().min_by(|a, b| {
        (a.t_worst + a.w_worst)
            .total_cmp(&(b.t_worst + b.w_worst))
            .then(a.neighbor.cmp(&b.neighbor))
    })
}

#[derive(Clone, Copy)]
struct Label {
    elapsed: f64,
    first: usize,
    prev: usize,
}

/// Fastest typical route from `node` under the stepwise budget rule.
///
/// Returns `None` when no incident edge is feasible (budget below `W(node)`)
/// or when `node` is the exit. Among equally fast routes the one whose first
/// hop has the smallest neighbor id wins.
pub fn plan_route(table: &LookupTable, node: NodeId, budget: f64) -> Option<RoutePlan> {
    let n = table.node_count();
    if node >= n || node == table.exit {
        return None;
    }
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    for entry in table.entries(node) {
        if !within_budget(entry.t_worst + entry.w_worst, budget) {
            continue;
        }
        let cand = Label {
            elapsed: entry.t_typical,
            first: entry.neighbor,
            prev: node,
        };
        if improves(&labels[entry.neighbor], &cand) {
            labels[entry.neighbor] = Some(cand);
            heap.push(HeapItem {
                key: cand.elapsed + table.d_typical(entry.neighbor),
                node: entry.neighbor,
            });
        }
    }
    if heap.is_empty() {
        return None;
    }

    let exit = table.exit;
    let mut best = f64::INFINITY;
    while let Some(HeapItem { key, node: v }) = heap.pop() {
        if key > best + 1e-9 * best.max(1.0) {
            break;
        }
        let label = labels[v].expect("queued nodes carry a label");
        if key > label.elapsed + table.d_typical(v) {
            continue;
        }
        if v == exit {
            best = best.min(label.elapsed);
            continue;
        }
        for entry in table.entries(v) {
            if entry.neighbor == node {
                continue;
            }
            if !within_budget(label.elapsed + entry.t_worst + entry.w_worst, budget) {
                continue;
            }
            let cand = Label {
                elapsed: label.elapsed + entry.t_typical,
                first: label.first,
                prev: v,
            };
            if improves(&labels[entry.neighbor], &cand) {
                labels[entry.neighbor] = Some(cand);
                heap.push(HeapItem {
                    key: cand.elapsed + table.d_typical(entry.neighbor),
                    node: entry.neighbor,
                });
            }
        }
    }

    let end = labels[exit]?;
    let mut nodes = vec![exit];
    let mut cur = exit;
    while cur != node {
        cur = labels[cur].expect("path labels are connected").prev;
        nodes.push(cur);
        if nodes.len() > n + 1 {
            unreachable!("route reconstruction cycled");
        }
    }
    nodes.reverse();
    Some(RoutePlan {
        nodes,
        typical_time: end.elapsed,
    })
}

fn improves(current: &Option<Label>, cand: &Label) -> bool {
    match current {
        None => true,
        Some(old) => {
            cand.elapsed < old.elapsed || (cand.elapsed == old.elapsed && cand.first < old.first)
        }
    }
}

/// Advised next hop from `node` with `budget` seconds left.
///
/// `Ok(None)` only at the exit.
pub fn next_hop(
    table: &LookupTable,
    node: NodeId,
    budget: f64,
) -> Result<Option<Advice>, UnknownNode> {
    if node >= table.node_count() {
        return Err(UnknownNode(node));
    }
    if node == table.exit {
        return Ok(None);
    }
    let edge_to = |neighbor: NodeId| {
        table
            .entries(node)
            .iter()
            .find(|e| e.neighbor == neighbor)
            .map(|e| e.edge)
            .expect("route starts with an incident edge")
    };
    if let Some(plan) = plan_route(table, node, budget) {
        let neighbor = plan.nodes[1];
        return Ok(Some(Advice {
            neighbor,
            edge: edge_to(neighbor),
            feasible: true,
        }));
    }
    Ok(fallback(table, node).map(|e| Advice {
        neighbor: e.neighbor,
        edge: e.edge,
        feasible: false,
    }))
}

/// Most recent lookup tables, newest last, for stale reads.
#[derive(Debug, Clone)]
pub struct SnapshotRing {
    capacity: usize,
    tables: VecDeque<Arc<LookupTable>>,
}

impl SnapshotRing {
    /// Ring able to serve reads up to `max_depth` epochs back.
    pub fn new(max_depth: usize) -> Self {
        SnapshotRing {
            capacity: max_depth + 1,
            tables: VecDeque::with_capacity(max_depth + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn newest_epoch(&self) -> Option<u64> {
        self.tables.back().map(|t| t.epoch())
    }

    pub fn push(&mut self, table: impl Into<Arc<LookupTable>>) -> Result<(), RingError> {
        let table = table.into();
        if let Some(head) = self.newest_epoch() {
            if table.epoch() != head + 1 {
                return Err(RingError::EpochGap {
                    head,
                    got: table.epoch(),
                });
            }
        }
        if self.tables.len() == self.capacity {
            self.tables.pop_front();
        }
        self.tables.push_back(table);
        Ok(())
    }

    /// Table of epoch `newest - depth`, clamped to the oldest one held.
    pub fn read(&self, depth: usize) -> Result<&Arc<LookupTable>, RingError> {
        if self.tables.is_empty() {
            return Err(RingError::Empty);
        }
        let idx = self.tables.len().saturating_sub(depth + 1);
        Ok(&self.tables[idx])
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::field::{Speeds, TraversalTimeField, TypicalInit};
    use crate::graph::parse_graph;

    fn path3() -> NavGraph {
        // A=0, B=1, exit=2
        parse_graph(
            "nodes 3\nexit 2\nnode 0 0 0 0\nnode 1 0 1 0\nnode 2 0 2 0\n\
             edge 0 1 6.7 passage\nedge 1 2 6.7 passage\n",
        )
        .unwrap()
    }

    fn field(g: &NavGraph, init: TypicalInit) -> TraversalTimeField {
        TraversalTimeField::new(g, Speeds::SHIP, init, ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    fn table_for(g: &NavGraph, f: &TraversalTimeField) -> (WorstCaseDistances, LookupTable) {
        let w = worst_case_distances(g, &f.worst_times());
        let t = build_table(g, &f.freeze_snapshot(), &w);
        (w, t)
    }

    #[test]
    fn worst_case_on_path() {
        let g = path3();
        let f = field(&g, TypicalInit::Nominal);
        let w = worst_case_distances(&g, &f.worst_times());
        assert!((w.get(0) - 200.0).abs() < 1e-9);
        assert!((w.get(1) - 100.0).abs() < 1e-9);
        assert_eq!(w.get(2), 0.0);
    }

    // Diamond: 0 -> {1, 2} -> 3 (exit). Worst times given directly.
    fn diamond() -> (NavGraph, Vec<f64>) {
        let g = parse_graph(
            "nodes 4\nexit 3\nnode 0 0 0 0\nnode 1 0 1 1\nnode 2 0 1 -1\nnode 3 0 2 0\n\
             edge 0 1 1 passage\nedge 1 3 1 passage\nedge 0 2 1 passage\nedge 2 3 1 passage\n",
        )
        .unwrap();
        (g, vec![100.0, 300.0, 150.0, 150.0])
    }

    #[test]
    fn worst_case_picks_smaller_branch() {
        let (g, worst) = diamond();
        let w = worst_case_distances(&g, &worst);
        // branch via 1: 400, via 2: 300
        assert_eq!(w.get(0), 300.0);
        assert_eq!(w.get(1), 300.0);
        assert_eq!(w.get(2), 150.0);
    }

    #[test]
    fn table_on_nominal_path() {
        let g = path3();
        let f = field(&g, TypicalInit::Nominal);
        let (_, t) = table_for(&g, &f);
        assert!((t.d_typical(0) - 20.0).abs() < 1e-9);
        assert_eq!(t.d_typical(2), 0.0);
        assert_eq!(t.entries(0).len(), 1);
        assert_eq!(t.entries(0)[0].neighbor, 1);
        assert_eq!(t.epoch(), 0);
    }

    #[test]
    fn worst_snapshot_gives_worst_distances() {
        let g = path3();
        let f = field(&g, TypicalInit::Worst);
        let (w, t) = table_for(&g, &f);
        for v in 0..3 {
            assert_eq!(t.d_typical(v), w.get(v));
        }
    }

    #[test]
    fn next_hop_on_path() {
        let g = path3();
        let f = field(&g, TypicalInit::Sampled);
        let (_, t) = table_for(&g, &f);
        let a = next_hop(&t, 0, 10_000.0).unwrap().unwrap();
        assert_eq!(a.neighbor, 1);
        assert!(a.feasible);
        assert_eq!(next_hop(&t, 2, 10.0).unwrap(), None);
        assert_eq!(next_hop(&t, 7, 10.0), Err(UnknownNode(7)));
    }

    fn diamond_table(typical: [f64; 4]) -> (NavGraph, WorstCaseDistances, LookupTable) {
        let (g, worst) = diamond();
        let mut f = TraversalTimeField::new(
            &g,
            Speeds { worst: 0.001, nominal: 1.0 },
            TypicalInit::Nominal,
            ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        f.set_typical(&typical);
        let w = worst_case_distances(&g, &worst);
        let t = build_table(&g, &f.freeze_snapshot(), &w);
        (g, w, t)
    }

    #[test]
    fn budget_excludes_fast_branch() {
        // Branch via 1 is fastest typically (20) but worst-case 400.
        let (_, _, t) = diamond_table([10.0, 10.0, 50.0, 50.0]);
        assert_eq!(next_hop(&t, 0, 1000.0).unwrap().unwrap().neighbor, 1);
        let a = next_hop(&t, 0, 350.0).unwrap().unwrap();
        assert_eq!(a.neighbor, 2);
        assert!(a.feasible);
    }

    #[test]
    fn exact_worst_budget_is_feasible() {
        let (_, w, t) = diamond_table([10.0, 10.0, 50.0, 50.0]);
        let a = next_hop(&t, 0, w.get(0)).unwrap().unwrap();
        assert!(a.feasible);
        assert_eq!(a.neighbor, 2);
    }

    #[test]
    fn blown_budget_falls_back() {
        let (_, w, t) = diamond_table([10.0, 10.0, 50.0, 50.0]);
        let a = next_hop(&t, 0, w.get(0) - 1.0).unwrap().unwrap();
        assert!(!a.feasible);
        assert_eq!(a.neighbor, 2);
    }

    #[test]
    fn ties_go_to_smallest_neighbor() {
        let (_, _, t) = diamond_table([10.0, 10.0, 10.0, 10.0]);
        assert_eq!(next_hop(&t, 0, 1000.0).unwrap().unwrap().neighbor, 1);
    }

    #[test]
    fn plan_reports_route_time() {
        let (_, _, t) = diamond_table([10.0, 10.0, 50.0, 50.0]);
        let plan = plan_route(&t, 0, 350.0).unwrap();
        assert_eq!(plan.nodes, vec![0, 2, 3]);
        assert_eq!(plan.typical_time, 100.0);
    }

    fn tagged(epoch: u64) -> LookupTable {
        LookupTable {
            epoch,
            exit: 0,
            d_typical: vec![0.0],
            entries: vec![vec![]],
        }
    }

    #[test]
    fn ring_push_and_evict() {
        let mut ring = SnapshotRing::new(3);
        ring.push(tagged(0)).unwrap();
        assert_eq!(ring.len(), 1);
        for e in 1..=4 {
            ring.push(tagged(e)).unwrap();
        }
        assert_eq!(ring.len(), 4);
        assert_eq!(ring.read(3).unwrap().epoch(), 1);
        assert_eq!(
            ring.push(tagged(6)),
            Err(RingError::EpochGap { head: 4, got: 6 })
        );
    }

    #[test]
    fn ring_reads() {
        let mut ring = SnapshotRing::new(5);
        assert_eq!(ring.read(0).unwrap_err(), RingError::Empty);
        for e in 0..=10 {
            ring.push(tagged(e)).unwrap();
        }
        assert_eq!(ring.read(0).unwrap().epoch(), 10);
        assert_eq!(ring.read(3).unwrap().epoch(), 7);

        let mut young = SnapshotRing::new(5);
        young.push(tagged(0)).unwrap();
        young.push(tagged(1)).unwrap();
        assert_eq!(young.read(5).unwrap().epoch(), 0);
    }
}
