//! Ship navigation graph: nodes on decks joined by passage and stair segments.
//!
//! Graph files are line oriented:
//!
//! ```text
//! # comment
//! nodes <N>
//! exit <id>
//! node <id> <deck> <x> <y>      (N lines)
//! edge <a> <b> <length_m> <passage|stair>
//! ```

use std::collections::{HashSet, VecDeque};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::GraphError;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: NodeId,
    pub deck: u32,
    pub x: f64,
    pub y: f64,
    pub is_exit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Passage,
    Stair,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Passage => "passage",
            EdgeKind::Stair => "stair",
        })
    }
}

impl FromStr for EdgeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "passage" => Ok(EdgeKind::Passage),
            "stair" => Ok(EdgeKind::Stair),
            other => Err(format!("unknown edge kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub a: NodeId,
    pub b: NodeId,
    pub length: f64,
    pub kind: EdgeKind,
}

impl EdgeRecord {
    /// The endpoint opposite to `from`.
    pub fn other(&self, from: NodeId) -> NodeId {
        if from == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// One entry of a node's incidence list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub neighbor: NodeId,
    pub edge: usize,
}

/// Validated, immutable navigation graph.
///
/// Edges are undirected. Incidence lists are sorted by neighbor id, which
/// fixes the order in which routing and random choices see the edges.
#[derive(Debug, Clone, PartialEq)]
pub struct NavGraph {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    adjacency: Vec<Vec<Incidence>>,
    exit: NodeId,
}

impl NavGraph {
    /// Builds a graph and checks every structural invariant.
    pub fn new(mut nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::Empty);
        }
        nodes.sort_by_key(|n| n.id);
        let n = nodes.len();
        for w in nodes.windows(2) {
            if w[0].id == w[1].id {
                return Err(GraphError::DuplicateNode(w[0].id));
            }
        }
        if let Some(bad) = nodes.iter().find(|node| node.id >= n) {
            return Err(GraphError::UnknownNode(bad.id));
        }

        let mut exits = nodes.iter().filter(|node| node.is_exit);
        let exit = exits.next().ok_or(GraphError::NoExit)?.id;
        if exits.next().is_some() {
            return Err(GraphError::MultipleExits);
        }

        let mut seen = HashSet::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for (idx, e) in edges.iter().enumerate() {
            for endpoint in [e.a, e.b] {
                if endpoint >= n {
                    return Err(GraphError::UnknownNode(endpoint));
                }
            }
            if e.a == e.b {
                return Err(GraphError::SelfLoop(e.a));
            }
            if !e.length.is_finite() || e.length <= 0.0 {
                return Err(GraphError::NonPositiveLength {
                    a: e.a,
                    b: e.b,
                    length: e.length,
                });
            }
            let key = (e.a.min(e.b), e.a.max(e.b));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            adjacency[e.a].push(Incidence {
                neighbor: e.b,
                edge: idx,
            });
            adjacency[e.b].push(Incidence {
                neighbor: e.a,
                edge: idx,
            });
        }
        for list in &mut adjacency {
            list.sort_by_key(|inc| inc.neighbor);
        }

        let graph = NavGraph {
            nodes,
            edges,
            adjacency,
            exit,
        };
        let unreachable = graph.unreachable_from_exit();
        if unreachable > 0 {
            return Err(GraphError::Disconnected { unreachable });
        }
        Ok(graph)
    }

    fn unreachable_from_exit(&self) -> usize {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([self.exit]);
        seen[self.exit] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for inc in &self.adjacency[v] {
                if !seen[inc.neighbor] {
                    seen[inc.neighbor] = true;
                    count += 1;
                    queue.push_back(inc.neighbor);
                }
            }
        }
        self.nodes.len() - count
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn exit(&self) -> NodeId {
        self.exit
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> &EdgeRecord {
        &self.edges[idx]
    }

    pub fn incident(&self, node: NodeId) -> &[Incidence] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node].len()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node < self.nodes.len()
    }

    /// Index of the edge joining `a` and `b`, if any.
    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<usize> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|inc| inc.neighbor == b)
            .map(|inc| inc.edge)
    }

    /// All node ids except the exit, ascending.
    pub fn non_exit_nodes(&self) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&v| v != self.exit).collect()
    }

    pub fn count_kind(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }
}

/// Parses and validates a graph file.
pub fn parse_graph(text: &str) -> Result<NavGraph, GraphError> {
    let syntax = |line: usize, msg: String| GraphError::Syntax { line, msg };

    let mut declared: Option<usize> = None;
    let mut exit: Option<(usize, NodeId)> = None;
    let mut nodes = Vec::new();
    let mut edges = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let field = |i: usize| -> Result<&str, GraphError> {
            fields
                .get(i)
                .copied()
                .ok_or_else(|| syntax(line_no, format!("missing field {i} in `{line}`")))
        };
        fn num<T: FromStr>(line: usize, s: &str) -> Result<T, GraphError> {
            s.parse().map_err(|_| GraphError::Syntax {
                line,
                msg: format!("invalid number `{s}`"),
            })
        }
        let expect_len = |len: usize| -> Result<(), GraphError> {
            if fields.len() == len {
                Ok(())
            } else {
                Err(syntax(
                    line_no,
                    format!("expected {len} fields, found {}", fields.len()),
                ))
            }
        };

        match fields[0] {
            "nodes" => {
                expect_len(2)?;
                if declared.is_some() {
                    return Err(syntax(line_no, "repeated `nodes` line".into()));
                }
                declared = Some(num(line_no, field(1)?)?);
            }
            "exit" => {
                expect_len(2)?;
                if declared.is_none() {
                    return Err(syntax(line_no, "`exit` before `nodes`".into()));
                }
                if exit.is_some() {
                    return Err(GraphError::MultipleExits);
                }
                exit = Some((line_no, num(line_no, field(1)?)?));
            }
            "node" => {
                expect_len(5)?;
                if exit.is_none() {
                    return Err(syntax(line_no, "`node` before `nodes`/`exit` header".into()));
                }
                if !edges.is_empty() {
                    return Err(syntax(line_no, "`node` after the first `edge`".into()));
                }
                nodes.push(NodeRecord {
                    id: num(line_no, field(1)?)?,
                    deck: num(line_no, field(2)?)?,
                    x: num(line_no, field(3)?)?,
                    y: num(line_no, field(4)?)?,
                    is_exit: false,
                });
            }
            "edge" => {
                expect_len(5)?;
                if exit.is_none() {
                    return Err(syntax(line_no, "`edge` before `nodes`/`exit` header".into()));
                }
                edges.push(EdgeRecord {
                    a: num(line_no, field(1)?)?,
                    b: num(line_no, field(2)?)?,
                    length: num(line_no, field(3)?)?,
                    kind: field(4)?.parse().map_err(|m| syntax(line_no, m))?,
                });
            }
            other => return Err(syntax(line_no, format!("unknown record `{other}`"))),
        }
    }

    let declared = declared.ok_or_else(|| syntax(1, "missing `nodes` header".into()))?;
    let (_, exit_id) = exit.ok_or(GraphError::NoExit)?;
    if declared == 0 {
        return Err(GraphError::Empty);
    }
    if exit_id >= declared {
        return Err(GraphError::UnknownExit(exit_id));
    }
    let mut ids = HashSet::with_capacity(nodes.len());
    for node in &mut nodes {
        if node.id >= declared {
            return Err(GraphError::UnknownNode(node.id));
        }
        if !ids.insert(node.id) {
            return Err(GraphError::DuplicateNode(node.id));
        }
        node.is_exit = node.id == exit_id;
    }
    if nodes.len() != declared {
        return Err(GraphError::MissingNodes {
            expected: declared,
            found: nodes.len(),
        });
    }
    NavGraph::new(nodes, edges)
}

/// Writes a graph in the file format accepted by [`parse_graph`].
pub fn serialize_graph(g: &NavGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "nodes {}", g.node_count());
    let _ = writeln!(out, "exit {}", g.exit());
    for n in g.nodes() {
        let _ = writeln!(out, "node {} {} {} {}", n.id, n.deck, n.x, n.y);
    }
    for e in g.edges() {
        let _ = writeln!(out, "edge {} {} {} {}", e.a, e.b, e.length, e.kind);
    }
    out
}

/// Parameters of the synthetic multi-deck generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub decks: u32,
    pub nodes_total: usize,
    pub passage_edges: usize,
    pub stair_edges: usize,
    /// Passage lengths are drawn uniformly from this interval (meters).
    pub passage_length: (f64, f64),
    /// Stair lengths are drawn uniformly from this interval (meters).
    pub stair_length: (f64, f64),
    /// Deck footprint used to scatter node coordinates (meters).
    pub deck_extent: (f64, f64),
}

impl GeneratorParams {
    pub fn new(decks: u32, nodes_total: usize, passage_edges: usize, stair_edges: usize) -> Self {
        GeneratorParams {
            decks,
            nodes_total,
            passage_edges,
            stair_edges,
            passage_length: (2.0, 15.0),
            stair_length: (3.0, 6.0),
            deck_extent: (120.0, 24.0),
        }
    }

    /// Three decks, 346 nodes, 600 passages and 5 stairs.
    pub fn ship() -> Self {
        GeneratorParams::new(3, 346, 600, 5)
    }

    fn deck_sizes(&self) -> Vec<usize> {
        let decks = self.decks as usize;
        let base = self.nodes_total / decks;
        let extra = self.nodes_total % decks;
        (0..decks).map(|d| base + usize::from(d < extra)).collect()
    }

    fn check(&self) -> Result<(), GraphError> {
        let bad = |msg: String| Err(GraphError::Infeasible(msg));
        if self.decks == 0 {
            return bad("at least one deck is required".into());
        }
        if self.nodes_total < self.decks as usize {
            return bad(format!(
                "{} nodes cannot populate {} decks",
                self.nodes_total, self.decks
            ));
        }
        if self.stair_edges + 1 < self.decks as usize {
            return bad(format!(
                "{} stair edge(s) cannot join {} decks",
                self.stair_edges, self.decks
            ));
        }
        let sizes = self.deck_sizes();
        let min_passages = self.nodes_total - sizes.len();
        if self.passage_edges < min_passages {
            return bad(format!(
                "{} passage edges cannot connect {} nodes on {} decks (need {min_passages})",
                self.passage_edges, self.nodes_total, self.decks
            ));
        }
        let max_passages: usize = sizes.iter().map(|&s| s * (s.saturating_sub(1)) / 2).sum();
        if self.passage_edges > max_passages {
            return bad(format!(
                "{} passage edges exceed the {max_passages} possible same-deck pairs",
                self.passage_edges
            ));
        }
        let max_stairs: usize = sizes.windows(2).map(|w| w[0] * w[1]).sum();
        if self.stair_edges > max_stairs {
            return bad(format!(
                "{} stair edges exceed the {max_stairs} possible deck-to-deck pairs",
                self.stair_edges
            ));
        }
        for (name, (lo, hi)) in [
            ("passage", self.passage_length),
            ("stair", self.stair_length),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return bad(format!("{name} length interval [{lo}, {hi}] is invalid"));
            }
        }
        Ok(())
    }
}

fn draw_len(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Generates a connected multi-deck graph with exactly the requested counts.
///
/// Each deck gets a random recursive spanning tree, then extra passages
/// between random same-deck pairs. Stairs join consecutive decks, one per
/// deck pair first and the remainder round-robin. The exit is node 0, which
/// lies on deck 0.
pub fn generate_synthetic(params: &GeneratorParams, seed: u64) -> Result<NavGraph, GraphError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = params.deck_sizes();

    let mut nodes = Vec::with_capacity(params.nodes_total);
    let mut deck_members: Vec<Vec<NodeId>> = Vec::with_capacity(sizes.len());
    for (deck, &size) in sizes.iter().enumerate() {
        let mut members = Vec::with_capacity(size);
        for _ in 0..size {
            let id = nodes.len();
            nodes.push(NodeRecord {
                id,
                deck: deck as u32,
                x: rng.gen_range(0.0..params.deck_extent.0),
                y: rng.gen_range(0.0..params.deck_extent.1),
                is_exit: id == 0,
            });
            members.push(id);
        }
        deck_members.push(members);
    }

    let mut used: HashSet<(NodeId, NodeId)> = HashSet::new();
    let key = |a: NodeId, b: NodeId| (a.min(b), a.max(b));
    let mut edges = Vec::with_capacity(params.passage_edges + params.stair_edges);

    for members in &deck_members {
        let mut order = members.clone();
        order.shuffle(&mut rng);
        for i in 1..order.len() {
            let parent = order[rng.gen_range(0..i)];
            used.insert(key(order[i], parent));
            edges.push(EdgeRecord {
                a: parent,
                b: order[i],
                length: draw_len(&mut rng, params.passage_length),
                kind: EdgeKind::Passage,
            });
        }
    }

    let mut remaining = params.passage_edges - edges.len();
    let weights: Vec<usize> = sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).collect();
    let total_weight: usize = weights.iter().sum();
    while remaining > 0 {
        let mut pick = rng.gen_range(0..total_weight);
        let deck = weights
            .iter()
            .position(|&w| {
                if pick < w {
                    true
                } else {
                    pick -= w;
                    false
                }
            })
            .expect("weighted pick lands in some deck");
        let members = &deck_members[deck];
        let a = members[rng.gen_range(0..members.len())];
        let b = members[rng.gen_range(0..members.len())];
        if a == b || !used.insert(key(a, b)) {
            continue;
        }
        edges.push(EdgeRecord {
            a,
            b,
            length: draw_len(&mut rng, params.passage_length),
            kind: EdgeKind::Passage,
        });
        remaining -= 1;
    }

    let pairs = deck_members.len().saturating_sub(1);
    let mut placed = 0;
    let mut attempts = 0usize;
    while placed < params.stair_edges {
        let lower = placed % pairs.max(1);
        let (lo, hi) = (&deck_members[lower], &deck_members[lower + 1]);
        let a = lo[rng.gen_range(0..lo.len())];
        let b = hi[rng.gen_range(0..hi.len())];
        attempts += 1;
        if !used.insert(key(a, b)) {
            if attempts > 1000 * (params.stair_edges + 1) {
                return Err(GraphError::Infeasible(
                    "could not place distinct stair edges".into(),
                ));
            }
            continue;
        }
        edges.push(EdgeRecord {
            a,
            b,
            length: draw_len(&mut rng, params.stair_length),
            kind: EdgeKind::Stair,
        });
        placed += 1;
    }

    NavGraph::new(nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "nodes 2\nexit 1\nnode 0 0 0 0\nnode 1 0 1 0\nedge 0 1 6.7 passage\n";

    #[test]
    fn parses_minimal_file() {
        let g = parse_graph(MINIMAL).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.exit(), 1);
        assert!(g.nodes()[1].is_exit);
        assert_eq!(g.edges()[0].length, 6.7);
    }

    #[test]
    fn rejects_unknown_exit() {
        let text = MINIMAL.replace("exit 1", "exit 5");
        assert_eq!(parse_graph(&text), Err(GraphError::UnknownExit(5)));
    }

    #[test]
    fn rejects_disconnected() {
        let text = "nodes 4\nexit 0\nnode 0 0 0 0\nnode 1 0 1 0\nnode 2 0 2 0\nnode 3 0 3 0\n\
                    edge 0 1 3 passage\nedge 2 3 3 passage\n";
        assert_eq!(
            parse_graph(text),
            Err(GraphError::Disconnected { unreachable: 2 })
        );
    }

    #[test]
    fn reports_syntax_line() {
        let text = "# header\nnodes 2\nexit 1\nnode 0 0 0 0\nnode 1 0 x 0\n";
        match parse_graph(text) {
            Err(GraphError::Syntax { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_and_bad_lengths() {
        let dup_node = MINIMAL.replace("node 1 0 1 0", "node 0 0 1 0");
        assert_eq!(parse_graph(&dup_node), Err(GraphError::DuplicateNode(0)));

        let dup_edge = format!("{MINIMAL}edge 1 0 2 stair\n");
        assert_eq!(parse_graph(&dup_edge), Err(GraphError::DuplicateEdge(0, 1)));

        let zero = MINIMAL.replace("6.7", "0");
        assert!(matches!(
            parse_graph(&zero),
            Err(GraphError::NonPositiveLength { .. })
        ));
        let negative = MINIMAL.replace("6.7", "-1");
        assert!(matches!(
            parse_graph(&negative),
            Err(GraphError::NonPositiveLength { .. })
        ));

        let self_loop = MINIMAL.replace("edge 0 1", "edge 1 1");
        assert_eq!(parse_graph(&self_loop), Err(GraphError::SelfLoop(1)));
    }

    #[test]
    fn rejects_missing_or_extra_exit() {
        assert_eq!(
            parse_graph("nodes 1\nnode 0 0 0 0\n"),
            Err(GraphError::Syntax {
                line: 2,
                msg: "`node` before `nodes`/`exit` header".into()
            })
        );
        let two = MINIMAL.replace("exit 1", "exit 1\nexit 0");
        assert_eq!(parse_graph(&two), Err(GraphError::MultipleExits));
    }

    #[test]
    fn rejects_missing_node_lines() {
        let text = "nodes 3\nexit 0\nnode 0 0 0 0\nnode 1 0 1 0\nedge 0 1 2 passage\n";
        assert_eq!(
            parse_graph(text),
            Err(GraphError::MissingNodes {
                expected: 3,
                found: 2
            })
        );
    }

    #[test]
    fn empty_graph_is_unconstructible() {
        assert_eq!(NavGraph::new(vec![], vec![]), Err(GraphError::Empty));
        assert_eq!(parse_graph("nodes 0\nexit 0\n"), Err(GraphError::Empty));
    }

    #[test]
    fn minimal_round_trip() {
        let g = parse_graph(MINIMAL).unwrap();
        assert_eq!(parse_graph(&serialize_graph(&g)).unwrap(), g);
    }

    #[test]
    fn ship_sized_generation() {
        let g = generate_synthetic(&GeneratorParams::ship(), 42).unwrap();
        assert_eq!(g.node_count(), 346);
        assert_eq!(g.edge_count(), 605);
        assert_eq!(g.count_kind(EdgeKind::Passage), 600);
        assert_eq!(g.count_kind(EdgeKind::Stair), 5);
        assert_eq!(g.nodes()[g.exit()].deck, 0);
        for e in g.edges() {
            let (da, db) = (g.nodes()[e.a].deck, g.nodes()[e.b].deck);
            match e.kind {
                EdgeKind::Passage => {
                    assert_eq!(da, db);
                    assert!((2.0..=15.0).contains(&e.length));
                }
                EdgeKind::Stair => {
                    assert_eq!(da.abs_diff(db), 1);
                    assert!((3.0..=6.0).contains(&e.length));
                }
            }
        }
        assert!((0..g.node_count()).all(|v| g.degree(v) >= 1));
        assert_eq!(parse_graph(&serialize_graph(&g)).unwrap(), g);
    }

    #[test]
    fn smallest_generation_is_a_path() {
        let g = generate_synthetic(&GeneratorParams::new(1, 2, 1, 0), 0).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn generation_is_deterministic() {
        let p = GeneratorParams::ship();
        assert_eq!(
            generate_synthetic(&p, 9).unwrap(),
            generate_synthetic(&p, 9).unwrap()
        );
        assert_ne!(
            generate_synthetic(&p, 9).unwrap(),
            generate_synthetic(&p, 10).unwrap()
        );
    }

    #[test]
    fn infeasible_counts_are_rejected() {
        for p in [
            GeneratorParams::new(3, 2, 10, 2),
            GeneratorParams::new(3, 30, 40, 1),
            GeneratorParams::new(2, 30, 10, 1),
            GeneratorParams::new(1, 3, 4, 0),
            GeneratorParams::new(0, 3, 4, 0),
        ] {
            assert!(
                matches!(generate_synthetic(&p, 1), Err(GraphError::Infeasible(_))),
                "{p:?}"
            );
        }
    }
}
