//! Ancilla transition graphs and the path-independence check.
//!
//! Nodes are ancilla labels (optionally paired with a parity sector), edges
//! carry the logical action of a drive or jump. Loops are checked over a
//! spanning-tree cycle basis; traversing an edge backwards applies the
//! inverse of its action.

use std::collections::{BTreeMap, VecDeque};

use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use crate::codes::logical_z_rotation;
use crate::error::{Error, Result};
use crate::hilbert::{c64, max_abs, CMat};
use crate::units::Angle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Drive,
    Jump,
}

/// Logical action in a graph file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionSpec {
    Identity,
    /// diag(1, e^{iθ}) on the logical qubit.
    STheta { theta: Angle },
    /// Explicit matrix, rows of [re, im] pairs.
    Matrix { rows: Vec<Vec<[f64; 2]>> },
}

impl ActionSpec {
    pub fn matrix(&self) -> Result<CMat> {
        match self {
            ActionSpec::Identity => Ok(CMat::identity(2, 2)),
            ActionSpec::STheta { theta } => Ok(logical_z_rotation(theta.0)),
            ActionSpec::Matrix { rows } => {
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Graph("action matrix must be square and non-empty".into()));
                }
                Ok(CMat::from_fn(n, n, |i, j| c64(rows[i][j][0], rows[i][j][1])))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
    pub action: ActionSpec,
}

/// On-disk graph description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub start: String,
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    pub action: CMat,
}

#[derive(Clone, Debug)]
pub struct TransitionGraph {
    nodes: Vec<String>,
    edges: Vec<Edge>,
    start: usize,
}

fn unitarity_defect(m: &CMat) -> f64 {
    max_abs(&(m.adjoint() * m - CMat::identity(m.nrows(), m.ncols())))
}

/// Scalar c with m ≈ c·I, if m is proportional to the identity within `tol`.
fn identity_up_to_phase(m: &CMat, tol: f64) -> bool {
    let n = m.nrows();
    let c = m.trace() / c64(n as f64, 0.0);
    (c.norm() - 1.0).abs() < tol && max_abs(&(m - CMat::identity(n, n) * c)) < tol
}

impl TransitionGraph {
    pub fn new(nodes: Vec<String>, start: &str) -> Result<Self> {
        let start = nodes
            .iter()
            .position(|n| n == start)
            .ok_or_else(|| Error::Graph(format!("start node {start:?} not in node list")))?;
        for (i, n) in nodes.iter().enumerate() {
            if nodes[..i].contains(n) {
                return Err(Error::Graph(format!("duplicate node {n:?}")));
            }
        }
        Ok(Self { nodes, edges: Vec::new(), start })
    }

    fn node(&self, name: &str) -> Result<usize> {
        self.nodes.iter().position(|n| n == name).ok_or_else(|| Error::Graph(format!("unknown node {name:?}")))
    }

    /// Adds an edge; non-unitary actions are rejected.
    pub fn add_edge(&mut self, from: &str, to: &str, kind: EdgeKind, action: CMat) -> Result<()> {
        if action.nrows() != action.ncols() {
            return Err(Error::Graph(format!("edge {from}→{to}: action is not square")));
        }
        if let Some(e) = self.edges.first() {
            if e.action.nrows() != action.nrows() {
                return Err(Error::Graph(format!("edge {from}→{to}: action dimension differs from other edges")));
            }
        }
        let d = unitarity_defect(&action);
        if d > 1e-10 {
            return Err(Error::Graph(format!("edge {from}→{to}: action is not unitary (defect {d:.2e})")));
        }
        let (f, t) = (self.node(from)?, self.node(to)?);
        self.edges.push(Edge { from: f, to: t, kind, action });
        Ok(())
    }

    pub fn from_spec(spec: &GraphSpec) -> Result<Self> {
        let mut g = Self::new(spec.nodes.clone(), &spec.start)?;
        for e in &spec.edges {
            g.add_edge(&e.from, &e.to, e.kind, e.action.matrix()?)?;
        }
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GraphSpec = serde_json::from_str(text).map_err(|e| Error::Config(format!("graph file: {e}")))?;
        Self::from_spec(&spec)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn start(&self) -> &str {
        &self.nodes[self.start]
    }

    fn dim(&self) -> usize {
        self.edges.first().map_or(2, |e| e.action.nrows())
    }

    /// Drive edges without a matching reverse drive edge carrying the inverse
    /// action.
    pub fn unpaired_drive_edges(&self) -> Vec<(String, String)> {
        self.edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Drive)
            .filter(|e| {
                !self.edges.iter().any(|r| {
                    r.kind == EdgeKind::Drive
                        && r.from == e.to
                        && r.to == e.from
                        && max_abs(&(&r.action * &e.action - CMat::identity(e.action.nrows(), e.action.nrows())))
                            < 1e-10
                })
            })
            .map(|e| (self.nodes[e.from].clone(), self.nodes[e.to].clone()))
            .collect()
    }
}

/// One closed loop that does not act as the identity.
#[derive(Clone, Debug, Serialize)]
pub struct LoopViolation {
    /// Node sequence, first and last equal.
    pub path: Vec<String>,
    #[serde(serialize_with = "serialize_matrix")]
    pub net_action: CMat,
}

fn serialize_matrix<S: serde::Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<[f64; 2]> = (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

#[derive(Clone, Debug, Serialize)]
pub struct PathIndependenceReport {
    pub loops_checked: usize,
    pub violations: Vec<LoopViolation>,
    /// Drive edges lacking an inverse partner (reported, not fatal).
    pub unpaired_drive_edges: Vec<(String, String)>,
}

impl PathIndependenceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that every closed loop composes to the identity up to a global
/// phase (1e−9), using the fundamental cycles of a BFS spanning tree rooted at
/// the start node.
pub fn check_path_independence(graph: &TransitionGraph) -> Result<PathIndependenceReport> {
    let n = graph.nodes.len();
    let d = graph.dim();
    let mut ug: UnGraph<(), usize> = UnGraph::with_capacity(n, graph.edges.len());
    let idx: Vec<NodeIndex> = (0..n).map(|_| ug.add_node(())).collect();
    for (k, e) in graph.edges.iter().enumerate() {
        ug.add_edge(idx[e.from], idx[e.to], k);
    }

    // potentials: U[v] = logical action accumulated along the tree path start → v
    let mut pot: Vec<Option<CMat>> = vec![None; n];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut tree_edge = vec![false; graph.edges.len()];
    pot[graph.start] = Some(CMat::identity(d, d));
    let mut queue = VecDeque::from([graph.start]);
    while let Some(v) = queue.pop_front() {
        // edge order fixed by insertion so the tree is deterministic
        let mut incident: Vec<usize> = ug.edges(idx[v]).map(|er| *er.weight()).collect();
        incident.sort_unstable();
        for k in incident {
            let e = &graph.edges[k];
            let w = if e.from == v { e.to } else { e.from };
            if pot[w].is_some() {
                continue;
            }
            let uv = pot[v].as_ref().expect("visited");
            let uw = if e.from == v { &e.action * uv } else { e.action.adjoint() * uv };
            pot[w] = Some(uw);
            parent[w] = Some((v, k));
            tree_edge[k] = true;
            queue.push_back(w);
        }
    }
    if let Some(missing) = pot.iter().position(Option::is_none) {
        return Err(Error::Graph(format!("node {:?} is not reachable from {:?}", graph.nodes[missing], graph.start())));
    }

    let path_from_start = |mut v: usize| {
        let mut p = vec![v];
        while let Some((u, _)) = parent[v] {
            p.push(u);
            v = u;
        }
        p.reverse();
        p
    };

    let mut violations = Vec::new();
    let mut loops = 0;
    for (k, e) in graph.edges.iter().enumerate() {
        if tree_edge[k] {
            continue;
        }
        loops += 1;
        let ua = pot[e.from].as_ref().expect("connected");
        let ub = pot[e.to].as_ref().expect("connected");
        let net = ub.adjoint() * &e.action * ua;
        if !identity_up_to_phase(&net, 1e-9) {
            let mut path: Vec<String> = path_from_start(e.from).into_iter().map(|i| graph.nodes[i].clone()).collect();
            let mut back: Vec<String> = path_from_start(e.to).into_iter().map(|i| graph.nodes[i].clone()).collect();
            back.reverse();
            path.extend(back);
            violations.push(LoopViolation { path, net_action: net });
        }
    }
    Ok(PathIndependenceReport { loops_checked: loops, violations, unpaired_drive_edges: graph.unpaired_drive_edges() })
}

/// True when `m` equals `target` up to a global phase within `tol`.
pub fn equal_up_to_phase(m: &CMat, target: &CMat, tol: f64) -> bool {
    m.shape() == target.shape() && identity_up_to_phase(&(target.adjoint() * m), tol)
}

/// Bundled graph of the error-corrected gate: drive g↔f with S(±θ), f→e
/// relaxation with identity action, optionally the second-order e→g edge.
pub fn gate_graph(theta: f64, with_eg: bool) -> TransitionGraph {
    let mut g = TransitionGraph::new(vec!["g".into(), "f".into(), "e".into()], "g").expect("static");
    g.add_edge("g", "f", EdgeKind::Drive, logical_z_rotation(theta)).expect("unitary");
    g.add_edge("f", "g", EdgeKind::Drive, logical_z_rotation(-theta)).expect("unitary");
    g.add_edge("f", "f", EdgeKind::Jump, CMat::identity(2, 2)).expect("unitary");
    g.add_edge("f", "e", EdgeKind::Jump, CMat::identity(2, 2)).expect("unitary");
    if with_eg {
        g.add_edge("e", "g", EdgeKind::Jump, CMat::identity(2, 2)).expect("unitary");
    }
    g
}

/// Names of the bundled graph files and their contents.
pub fn bundled_graphs() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("gate_graph.json", include_str!("graphs/gate_graph.json")),
        ("complete_graph.json", include_str!("graphs/complete_graph.json")),
        ("complete_graph_with_eg.json", include_str!("graphs/complete_graph_with_eg.json")),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gate_graph_passes() {
        let r = check_path_independence(&gate_graph(PI / 2.0, false)).unwrap();
        assert!(r.passed());
        assert_eq!(r.loops_checked, 2);
        assert!(r.unpaired_drive_edges.is_empty());
    }

    #[test]
    fn eg_edge_breaks_path_independence() {
        let theta = 0.7;
        let r = check_path_independence(&gate_graph(theta, true)).unwrap();
        assert_eq!(r.violations.len(), 1);
        let v = &r.violations[0];
        assert_eq!(v.path.first(), v.path.last());
        assert!(equal_up_to_phase(&v.net_action, &logical_z_rotation(theta), 1e-12)
            || equal_up_to_phase(&v.net_action, &logical_z_rotation(-theta), 1e-12));
    }

    #[test]
    fn single_node_passes() {
        let g = TransitionGraph::new(vec!["g".into()], "g").unwrap();
        let r = check_path_independence(&g).unwrap();
        assert!(r.passed());
        assert_eq!(r.loops_checked, 0);
    }

    #[test]
    fn rejects_non_unitary_and_disconnected() {
        let mut g = TransitionGraph::new(vec!["g".into(), "f".into()], "g").unwrap();
        let bad = CMat::identity(2, 2) * c64(0.5, 0.0);
        assert!(matches!(g.add_edge("g", "f", EdgeKind::Drive, bad), Err(Error::Graph(_))));
        assert!(check_path_independence(&g).is_err());
    }

    #[test]
    fn bundled_files_parse() {
        let files = bundled_graphs();
        for (name, text) in &files {
            TransitionGraph::from_json(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        let ok = TransitionGraph::from_json(files["gate_graph.json"]).unwrap();
        assert!(check_path_independence(&ok).unwrap().passed());
        let ok = TransitionGraph::from_json(files["complete_graph.json"]).unwrap();
        assert!(check_path_independence(&ok).unwrap().passed());
        let bad = TransitionGraph::from_json(files["complete_graph_with_eg.json"]).unwrap();
        assert!(!check_path_independence(&bad).unwrap().passed());
    }
}
