//! State transition tree runtime.
//!
//! Every instrumented assignment of a named constant to a state variable is
//! reported through [`Stt::on_update`]. The tree keeps one node per distinct
//! prefix of the `(variable, value)` sequence observed in an execution, so a
//! root-to-node path is exactly one (possibly truncated) update sequence.
//! All observed sequences of all variables share the same tree.
//!
//! Mutations are serialized behind a lock; read-only queries may run
//! concurrently with each other.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};

use num_rational::Ratio;
use parking_lot::{RwLock, RwLockReadGuard};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_REPETITION_CAP: u32 = 16;

/// Interned state-variable name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(u32);

/// Handle to a node of one particular tree. Handles stay valid for the life
/// of the tree; nodes are never removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
struct Node {
    // `None` only for the root pseudo-state.
    label: Option<(VarId, i64)>,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    hits: u64,
    terminals: u64,
}

impl Node {
    fn new(label: Option<(VarId, i64)>, parent: Option<NodeId>) -> Self {
        Node {
            label,
            parent,
            children: Vec::new(),
            hits: 0,
            terminals: 0,
        }
    }
}

/// Read-only copy of one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeInfo {
    pub id: NodeId,
    pub variable: Option<String>,
    pub value: Option<i64>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub hit_count: u64,
    pub terminal_count: u64,
}

/// The sequence of `(variable, value)` updates recorded for one execution,
/// after truncation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathId(pub Vec<(String, i64)>);

impl PathId {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, (var, value)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{var}={value}")?;
        }
        f.write_str(">")
    }
}

/// Outcome of one completed execution as seen by the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trace {
    /// Node at which the execution ended. Two executions took the same path
    /// iff they ended at the same node.
    pub terminal: NodeId,
    /// Nodes created during this execution.
    pub new_nodes: usize,
}

#[derive(Debug)]
struct Tree {
    nodes: Vec<Node>,
    vars: Vec<String>,
    var_index: HashMap<String, VarId>,
    blocked: HashSet<String>,
    // Indexed by VarId.
    var_blocked: Vec<bool>,
    repetition_cap: u32,
    cursor: NodeId,
    active: bool,
    truncated: bool,
    repetitions: Vec<(VarId, i64, u32)>,
    new_nodes: usize,
    // Sum of hit counts over non-root nodes.
    hit_sum: u64,
    executions: u64,
}

impl Tree {
    fn new(repetition_cap: u32) -> Self {
        Tree {
            nodes: vec![Node::new(None, None)],
            vars: Vec::new(),
            var_index: HashMap::new(),
            blocked: HashSet::new(),
            var_blocked: Vec::new(),
            repetition_cap: repetition_cap.max(1),
            cursor: NodeId::ROOT,
            active: false,
            truncated: false,
            repetitions: Vec::new(),
            new_nodes: 0,
            hit_sum: 0,
            executions: 0,
        }
    }

    fn intern(&mut self, name: &str) -> VarId {
        if let Some(&id) = self.var_index.get(name) {
            return id;
        }
        let id = VarId(self.vars.len() as u32);
        self.var_blocked.push(self.blocked.contains(name));
        self.vars.push(name.to_owned());
        self.var_index.insert(name.to_owned(), id);
        id
    }

    fn begin(&mut self) -> Result<()> {
        if self.active {
            return Err(Error::ExecutionAlreadyActive);
        }
        self.active = true;
        self.truncated = false;
        self.repetitions.clear();
        self.new_nodes = 0;
        self.cursor = NodeId::ROOT;
        self.nodes[0].hits += 1;
        Ok(())
    }

    fn update(&mut self, var: VarId, value: i64) -> Result<()> {
        if !self.active {
            return Err(Error::NoActiveExecution);
        }
        if self.truncated || self.var_blocked[var.0 as usize] {
            return Ok(());
        }
        let seen = match self
            .repetitions
            .iter_mut()
            .find(|(v, x, _)| *v == var && *x == value)
        {
            Some(entry) => &mut entry.2,
            None => {
                self.repetitions.push((var, value, 0));
                &mut self.repetitions.last_mut().expect("just pushed").2
            }
        };
        if *seen >= self.repetition_cap {
            // The path is cut here; everything after it in this execution is dropped.
            self.truncated = true;
            return Ok(());
        }
        *seen += 1;

        let label = Some((var, value));
        let cursor = self.cursor;
        let existing = self.nodes[cursor.index()]
            .children
            .iter()
            .copied()
            .find(|c| self.nodes[c.index()].label == label);
        let child = match existing {
            Some(c) => c,
            None => {
                let id = NodeId(self.nodes.len() as u32);
                self.nodes.push(Node::new(label, Some(cursor)));
                self.nodes[cursor.index()].children.push(id);
                self.new_nodes += 1;
                id
            }
        };
        self.nodes[child.index()].hits += 1;
        self.hit_sum += 1;
        self.cursor = child;
        Ok(())
    }

    fn end(&mut self) -> Result<Trace> {
        if !self.active {
            return Err(Error::NoActiveExecution);
        }
        let terminal = self.cursor;
        self.nodes[terminal.index()].terminals += 1;
        self.active = false;
        self.cursor = NodeId::ROOT;
        self.executions += 1;
        Ok(Trace {
            terminal,
            new_nodes: self.new_nodes,
        })
    }
}

/// The state transition tree, shared by every execution of a campaign.
#[derive(Debug)]
pub struct Stt {
    tree: RwLock<Tree>,
}

impl Default for Stt {
    fn default() -> Self {
        Stt::new(DEFAULT_REPETITION_CAP)
    }
}

impl Stt {
    /// A tree that ignores updates once a `(variable, value)` pair has been
    /// seen `repetition_cap` times along the current path. A cap of zero is
    /// treated as one.
    pub fn new(repetition_cap: u32) -> Self {
        Stt {
            tree: RwLock::new(Tree::new(repetition_cap)),
        }
    }

    /// Updates to blocked variables are dropped without touching the tree.
    pub fn with_blocklist<I, S>(repetition_cap: u32, blocked: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tree = Tree::new(repetition_cap);
        tree.blocked = blocked.into_iter().map(Into::into).collect();
        Stt {
            tree: RwLock::new(tree),
        }
    }

    pub fn repetition_cap(&self) -> u32 {
        self.tree.read().repetition_cap
    }

    /// Interns a variable name so hot paths can call [`Stt::on_update_id`].
    pub fn variable(&self, name: &str) -> VarId {
        if let Some(&id) = self.tree.read().var_index.get(name) {
            return id;
        }
        self.tree.write().intern(name)
    }

    pub fn begin_execution(&self) -> Result<()> {
        self.tree.write().begin()
    }

    pub fn on_update(&self, variable: &str, value: i64) -> Result<()> {
        let mut tree = self.tree.write();
        let var = tree.intern(variable);
        tree.update(var, value)
    }

    pub fn on_update_id(&self, variable: VarId, value: i64) -> Result<()> {
        self.tree.write().update(variable, value)
    }

    pub fn end_execution(&self) -> Result<Trace> {
        self.tree.write().end()
    }

    pub fn is_active(&self) -> bool {
        self.tree.read().active
    }

    /// Shared read access for a batch of queries.
    pub fn view(&self) -> SttView<'_> {
        SttView {
            tree: self.tree.read(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.view().node_count()
    }

    pub fn transition_coverage(&self) -> usize {
        self.view().transition_coverage()
    }

    pub fn executions(&self) -> u64 {
        self.view().executions()
    }

    pub fn cursor(&self) -> NodeId {
        self.tree.read().cursor
    }

    pub fn node(&self, id: NodeId) -> Option<NodeInfo> {
        self.view().node(id)
    }

    pub fn mean_hits(&self) -> Ratio<u64> {
        self.view().mean_hits()
    }

    pub fn rare(&self, id: NodeId) -> bool {
        self.view().rare(id)
    }

    pub fn path_id(&self, terminal: NodeId) -> PathId {
        self.view().path_id(terminal)
    }

    pub fn compact(&self) -> StateMachineGraph {
        self.view().compact()
    }

    pub fn snapshot(&self) -> SttSnapshot {
        self.view().snapshot()
    }
}

/// A read guard over the tree. Holding it blocks mutations.
pub struct SttView<'a> {
    tree: RwLockReadGuard<'a, Tree>,
}

impl SttView<'_> {
    /// Number of non-root nodes.
    pub fn node_count(&self) -> usize {
        self.tree.nodes.len() - 1
    }

    pub fn executions(&self) -> u64 {
        self.tree.executions
    }

    /// Number of distinct recorded update sequences: nodes at which at least
    /// one execution ended. A sequence that is a strict prefix of another
    /// still counts on its own.
    pub fn transition_coverage(&self) -> usize {
        self.tree.nodes.iter().filter(|n| n.terminals > 0).count()
    }

    pub fn variable_name(&self, var: VarId) -> &str {
        &self.tree.vars[var.0 as usize]
    }

    pub fn node(&self, id: NodeId) -> Option<NodeInfo> {
        let node = self.tree.nodes.get(id.index())?;
        Some(NodeInfo {
            id,
            variable: node.label.map(|(v, _)| self.variable_name(v).to_owned()),
            value: node.label.map(|(_, x)| x),
            parent: node.parent,
            children: node.children.clone(),
            hit_count: node.hits,
            terminal_count: node.terminals,
        })
    }

    pub fn hits(&self, id: NodeId) -> u64 {
        self.tree.nodes[id.index()].hits
    }

    /// Average hit count over the non-root nodes; zero for an empty tree.
    pub fn mean_hits(&self) -> Ratio<u64> {
        match self.node_count() {
            0 => Ratio::from_integer(0),
            n => Ratio::new(self.tree.hit_sum, n as u64),
        }
    }

    /// A node is rare when its hit count is strictly below the mean.
    /// The root carries no value and is never rare.
    pub fn rare(&self, id: NodeId) -> bool {
        if id == NodeId::ROOT {
            return false;
        }
        let n = self.node_count() as u128;
        (self.hits(id) as u128) * n < self.tree.hit_sum as u128
    }

    /// For every node, indexed by [`NodeId::index`]: the length of its
    /// root path (root excluded) and how many nodes on it are rare.
    pub fn path_rarity(&self) -> Vec<(u32, u32)> {
        let mut out: Vec<(u32, u32)> = Vec::with_capacity(self.tree.nodes.len());
        out.push((0, 0));
        for (index, node) in self.tree.nodes.iter().enumerate().skip(1) {
            // Parents are always created before their children.
            let (len, rare) = out[node.parent.expect("non-root node has a parent").index()];
            let here = self.rare(NodeId(index as u32)) as u32;
            out.push((len + 1, rare + here));
        }
        out
    }

    /// Nodes from the first update down to `terminal`, root excluded.
    pub fn path_nodes(&self, terminal: NodeId) -> Vec<NodeId> {
        let mut path = Vec::new();
        let mut at = terminal;
        while at != NodeId::ROOT {
            path.push(at);
            at = self.tree.nodes[at.index()]
                .parent
                .expect("non-root node has a parent");
        }
        path.reverse();
        path
    }

    pub fn path_id(&self, terminal: NodeId) -> PathId {
        PathId(
            self.path_nodes(terminal)
                .into_iter()
                .map(|id| {
                    let (var, value) = self.tree.nodes[id.index()].label.expect("non-root");
                    (self.variable_name(var).to_owned(), value)
                })
                .collect(),
        )
    }

    /// Merges all nodes with equal `(variable, value)` into one state.
    pub fn compact(&self) -> StateMachineGraph {
        let mut graph = StateMachineGraph::default();
        let state_of = |id: NodeId| {
            self.tree.nodes[id.index()].label.map(|(var, value)| State {
                variable: self.variable_name(var).to_owned(),
                value,
            })
        };
        for (index, node) in self.tree.nodes.iter().enumerate().skip(1) {
            let child = state_of(NodeId(index as u32)).expect("non-root");
            graph.states.insert(child.clone());
            let parent = node.parent.expect("non-root node has a parent");
            match state_of(parent) {
                None => *graph.initial.entry(child).or_default() += node.hits,
                Some(from) => *graph.edges.entry((from, child)).or_default() += node.hits,
            }
        }
        graph
    }

    pub fn snapshot(&self) -> SttSnapshot {
        let nodes = self
            .tree
            .nodes
            .iter()
            .enumerate()
            .map(|(index, node)| SnapshotNode {
                id: index as u32,
                parent: node.parent.map(|p| p.0),
                variable: node.label.map(|(v, _)| self.variable_name(v).to_owned()),
                value: node.label.map(|(_, x)| x),
                hits: node.hits,
                terminals: node.terminals,
            })
            .collect();
        let graph = self.compact();
        let mut edges: Vec<SnapshotEdge> = graph
            .initial
            .iter()
            .map(|(to, &count)| SnapshotEdge {
                from: None,
                to: to.clone(),
                count,
            })
            .collect();
        edges.extend(graph.edges.iter().map(|((from, to), &count)| SnapshotEdge {
            from: Some(from.clone()),
            to: to.clone(),
            count,
        }));
        SttSnapshot {
            executions: self.executions(),
            node_count: self.node_count(),
            transition_coverage: self.transition_coverage(),
            nodes,
            edges,
        }
    }
}

/// One `(variable, value)` pair, the unit of the compacted state machine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub variable: String,
    pub value: i64,
}

impl State {
    pub fn new(variable: impl Into<String>, value: i64) -> Self {
        State {
            variable: variable.into(),
            value,
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.variable, self.value)
    }
}

/// Directed graph obtained by merging tree nodes with the same state.
/// Edges from the initial pseudo-state are kept apart from state-to-state
/// edges. Counts are traversal counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateMachineGraph {
    pub states: BTreeSet<State>,
    pub edges: BTreeMap<(State, State), u64>,
    pub initial: BTreeMap<State, u64>,
}

impl StateMachineGraph {
    pub fn edge_set(&self) -> BTreeSet<(State, State)> {
        self.edges.keys().cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Human-readable names for state values, typically the named constants.
#[derive(Debug, Clone, Default)]
pub struct StateLabels(BTreeMap<(String, i64), String>);

impl StateLabels {
    pub fn insert(&mut self, variable: impl Into<String>, value: i64, name: impl Into<String>) {
        self.0.insert((variable.into(), value), name.into());
    }

    fn label(&self, state: &State) -> String {
        match self.0.get(&(state.variable.clone(), state.value)) {
            Some(name) => format!("{}={}", state.variable, name),
            None => state.to_string(),
        }
    }
}

/// Deterministic Graphviz rendering of a compacted graph.
pub fn export_dot(graph: &StateMachineGraph, labels: &StateLabels) -> String {
    let ids: BTreeMap<&State, usize> = graph.states.iter().zip(0..).collect();
    let mut out = String::from("digraph stt {\n  init [shape=point];\n");
    for (state, id) in &ids {
        let label = labels.label(state).replace('"', "\\\"");
        let _ = writeln!(out, "  s{id} [label=\"{label}\"];");
    }
    for (state, count) in &graph.initial {
        let _ = writeln!(out, "  init -> s{} [label=\"{count}\"];", ids[state]);
    }
    for ((from, to), count) in &graph.edges {
        let _ = writeln!(out, "  s{} -> s{} [label=\"{count}\"];", ids[from], ids[to]);
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotNode {
    pub id: u32,
    pub parent: Option<u32>,
    pub variable: Option<String>,
    pub value: Option<i64>,
    pub hits: u64,
    pub terminals: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotEdge {
    /// `None` for edges leaving the initial pseudo-state.
    pub from: Option<State>,
    pub to: State,
    pub count: u64,
}

/// JSON-friendly dump of the tree and its compaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SttSnapshot {
    pub executions: u64,
    pub node_count: usize,
    pub transition_coverage: usize,
    pub nodes: Vec<SnapshotNode>,
    pub edges: Vec<SnapshotEdge>,
}
