//! Directed communication graphs, reduced graphs, source components and the
//! two graph conditions that decide whether trimmed consensus can work.
//!
//! Agents are numbered `0..n`. Sets of agents are bitmasks, so `n` is capped
//! at [`MAX_AGENTS`]. Every check here is exhaustive over faulty sets of size
//! at most `f`; the exponential cost is bounded by explicit per-check limits.

use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph as PetGraph, NodeIndex};
use serde::ser::{SerializeSeq, SerializeStruct};
use serde::{Serialize, Serializer};
use thiserror::Error;

pub const MAX_AGENTS: usize = 64;
/// Largest `n` accepted by [`check_condition1`].
pub const MAX_CONDITION1_AGENTS: usize = 10;
/// Largest `n` accepted by [`check_condition2`] (4^n colorings).
pub const MAX_CONDITION2_AGENTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("agent {agent} out of range for a graph with {n} agents")]
    AgentOutOfRange { agent: usize, n: usize },
    #[error("self-loop at agent {0}")]
    SelfLoop(usize),
    #[error("graph must have between 1 and {MAX_AGENTS} agents, got {0}")]
    BadSize(usize),
    #[error("{members} faulty agents exceed the fault bound {bound}")]
    TooManyFaulty { members: usize, bound: usize },
    #[error("{check} is limited to n <= {limit} (exhaustive enumeration), got n = {n}")]
    TooLarge { check: &'static str, limit: usize, n: usize },
    #[error("sparsity parameter {s} outside 1..={max}")]
    BadSparsity { s: usize, max: usize },
}

/// A set of agent ids, stored as a bitmask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentSet(u64);

impl AgentSet {
    pub const EMPTY: AgentSet = AgentSet(0);

    pub fn from_bits(bits: u64) -> Self {
        AgentSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// `{0, .., n-1}`
    pub fn full(n: usize) -> Self {
        if n >= 64 {
            AgentSet(u64::MAX)
        } else {
            AgentSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        AgentSet(1 << i)
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 & (1 << i) != 0
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn remove(&mut self, i: usize) {
        self.0 &= !(1 << i);
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        AgentSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        AgentSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        AgentSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    /// Ascending iteration over members.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    /// All subsets of `self`, including the empty set and `self`, in
    /// increasing bitmask order.
    pub fn subsets(self) -> impl Iterator<Item = AgentSet> {
        let full = self.0;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let cur = next?;
            // standard "next submask in increasing order" step
            next = if cur == full { None } else { Some(((cur | !full).wrapping_add(1)) & full) };
            Some(AgentSet(cur))
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl FromIterator<usize> for AgentSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = AgentSet::EMPTY;
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl fmt::Debug for AgentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for AgentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for AgentSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.len()))?;
        for i in self.iter() {
            seq.serialize_element(&i)?;
        }
        seq.end()
    }
}

/// Read access shared by full graphs and reduced graphs.
pub trait Topology {
    /// Size of the label space `0..n`.
    fn order(&self) -> usize;
    /// Vertices actually present.
    fn vertices(&self) -> AgentSet;
    /// Incoming neighbors of `i` that are present in this graph.
    fn in_set(&self, i: usize) -> AgentSet;
}

/// Directed graph over agents `0..n` without self-loops. Edge `(i, j)` means
/// `i` can send to `j`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DiGraph {
    n: usize,
    ins: Vec<AgentSet>,
    outs: Vec<AgentSet>,
}

impl DiGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 || n > MAX_AGENTS {
            return Err(GraphError::BadSize(n));
        }
        let mut g = DiGraph { n, ins: vec![AgentSet::EMPTY; n], outs: vec![AgentSet::EMPTY; n] };
        for &(i, j) in edges {
            for a in [i, j] {
                if a >= n {
                    return Err(GraphError::AgentOutOfRange { agent: a, n });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            g.outs[i].insert(j);
            g.ins[j].insert(i);
        }
        Ok(g)
    }

    /// Builds from per-agent outgoing adjacency lists.
    pub fn from_adjacency(out: &[Vec<usize>]) -> Result<Self, GraphError> {
        let edges: Vec<_> =
            out.iter().enumerate().flat_map(|(i, js)| js.iter().map(move |&j| (i, j))).collect();
        Self::new(out.len(), &edges)
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> =
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        Self::new(n, &edges)
    }

    /// Directed ring `0 -> 1 -> .. -> n-1 -> 0`.
    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = if n < 2 { Vec::new() } else { (0..n).map(|i| (i, (i + 1) % n)).collect() };
        Self::new(n, &edges)
    }

    /// Agent 0 sends to every other agent; nothing else.
    pub fn star_out(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..n).map(|j| (0, j)).collect();
        Self::new(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from < self.n && self.outs[from].contains(to)
    }

    /// All edges in lexicographic `(from, to)` order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n).flat_map(|i| self.outs[i].iter().map(move |j| (i, j))).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.outs.iter().map(|s| s.len()).sum()
    }

    /// `{ j : (j, i) ∈ E }`
    pub fn in_neighbors(&self, i: usize) -> Result<AgentSet, GraphError> {
        self.check_agent(i)?;
        Ok(self.ins[i])
    }

    pub fn out_neighbors(&self, i: usize) -> Result<AgentSet, GraphError> {
        self.check_agent(i)?;
        Ok(self.outs[i])
    }

    fn check_agent(&self, i: usize) -> Result<(), GraphError> {
        if i >= self.n {
            Err(GraphError::AgentOutOfRange { agent: i, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Deletes vertex `v` and relabels the remaining agents to `0..n-1`
    /// preserving order.
    pub fn without_vertex(&self, v: usize) -> Result<Self, GraphError> {
        self.check_agent(v)?;
        let relabel = |a: usize| if a > v { a - 1 } else { a };
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .filter(|&(i, j)| i != v && j != v)
            .map(|(i, j)| (relabel(i), relabel(j)))
            .collect();
        Self::new(self.n - 1, &edges)
    }
}

impl Topology for DiGraph {
    fn order(&self) -> usize {
        self.n
    }
    fn vertices(&self) -> AgentSet {
        AgentSet::full(self.n)
    }
    fn in_set(&self, i: usize) -> AgentSet {
        self.ins[i]
    }
}

impl fmt::Debug for DiGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DiGraph(n={}, edges={:?})", self.n, self.edges())
    }
}

impl Serialize for DiGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let out: Vec<Vec<usize>> = self.outs.iter().map(|s| s.to_vec()).collect();
        let mut st = serializer.serialize_struct("DiGraph", 2)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("out", &out)?;
        st.end()
    }
}

/// The faulty agents of one execution together with the tolerated bound `f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FaultySet {
    pub members: AgentSet,
    pub bound: usize,
}

impl FaultySet {
    pub fn new(members: AgentSet, bound: usize, n: usize) -> Result<Self, GraphError> {
        if let Some(bad) = members.iter().find(|&i| i >= n) {
            return Err(GraphError::AgentOutOfRange { agent: bad, n });
        }
        if members.len() > bound {
            return Err(GraphError::TooManyFaulty { members: members.len(), bound });
        }
        Ok(FaultySet { members, bound })
    }

    pub fn none(bound: usize) -> Self {
        FaultySet { members: AgentSet::EMPTY, bound }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.contains(i)
    }

    /// `φ = |F|`
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// A subgraph obtained by deleting the faulty agents and then up to `f`
/// further incoming edges at each remaining agent.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ReducedGraph {
    n: usize,
    faulty: AgentSet,
    /// per agent, the removed incoming neighbors (faulty agents' entries empty)
    removed: Vec<AgentSet>,
    ins: Vec<AgentSet>,
}

impl ReducedGraph {
    /// Builds a reduced graph, checking that at most `f` extra incoming edges
    /// are removed at each non-faulty agent. Removed neighbors that are faulty
    /// or not neighbors at all are rejected.
    pub fn new(
        base: &DiGraph,
        faulty: &FaultySet,
        removed: Vec<AgentSet>,
    ) -> Result<Self, ReducedGraphError> {
        if removed.len() != base.n() {
            return Err(ReducedGraphError::Shape);
        }
        let alive = AgentSet::full(base.n()).difference(faulty.members);
        let mut ins = vec![AgentSet::EMPTY; base.n()];
        for i in 0..base.n() {
            if faulty.contains(i) {
                if !removed[i].is_empty() {
                    return Err(ReducedGraphError::FaultyAgentEdges(i));
                }
                continue;
            }
            let candidates = base.in_set(i).intersection(alive);
            if !removed[i].is_subset(candidates) {
                return Err(ReducedGraphError::NotAnEdge(i));
            }
            if removed[i].len() > faulty.bound {
                return Err(ReducedGraphError::TooManyRemoved { agent: i, removed: removed[i].len() });
            }
            ins[i] = candidates.difference(removed[i]);
        }
        Ok(ReducedGraph { n: base.n(), faulty: faulty.members, removed, ins })
    }

    pub fn faulty(&self) -> AgentSet {
        self.faulty
    }

    pub fn removed_at(&self, i: usize) -> AgentSet {
        self.removed[i]
    }

    /// Edges present, lexicographic `(from, to)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> =
            (0..self.n).flat_map(|j| self.ins[j].iter().map(move |i| (i, j))).collect();
        e.sort_unstable();
        e
    }

    pub fn removed_edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> =
            (0..self.n).flat_map(|j| self.removed[j].iter().map(move |i| (i, j))).collect();
        e.sort_unstable();
        e
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReducedGraphError {
    #[error("removed-edge list must have one entry per agent")]
    Shape,
    #[error("faulty agent {0} cannot have removed edges; all its edges are gone already")]
    FaultyAgentEdges(usize),
    #[error("removed edge into agent {0} is not an edge from a non-faulty agent")]
    NotAnEdge(usize),
    #[error("agent {agent}: {removed} incoming edges removed, more than f")]
    TooManyRemoved { agent: usize, removed: usize },
}

impl Topology for ReducedGraph {
    fn order(&self) -> usize {
        self.n
    }
    fn vertices(&self) -> AgentSet {
        AgentSet::full(self.n).difference(self.faulty)
    }
    fn in_set(&self, i: usize) -> AgentSet {
        self.ins[i]
    }
}

impl fmt::Debug for ReducedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ReducedGraph(faulty={}, removed={:?}, edges={:?})",
            self.faulty,
            self.removed_edges(),
            self.edges()
        )
    }
}

impl Serialize for ReducedGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("ReducedGraph", 3)?;
        st.serialize_field("faulty", &self.faulty)?;
        st.serialize_field("removed_edges", &self.removed_edges())?;
        st.serialize_field("edges", &self.edges())?;
        st.end()
    }
}

fn subsets_up_to(set: AgentSet, max: usize) -> Vec<AgentSet> {
    let mut v: Vec<AgentSet> = set.subsets().filter(|s| s.len() <= max).collect();
    v.sort_by_key(|s| (s.len(), s.bits()));
    v
}

/// Number of reduced graphs for `(G, F)`: the product over non-faulty `i` of
/// `Σ_{m ≤ min(f, deg)} C(deg, m)` with `deg` the non-faulty in-degree.
pub fn reduced_graph_count(g: &DiGraph, faulty: &FaultySet) -> u128 {
    let alive = AgentSet::full(g.n()).difference(faulty.members);
    alive
        .iter()
        .map(|i| {
            let deg = g.in_set(i).intersection(alive).len();
            (0..=faulty.bound.min(deg)).map(|m| binomial(deg, m)).sum::<u128>()
        })
        .product()
}

fn binomial(n: usize, k: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Lazily enumerates every reduced graph in `R_F`, in mixed-radix order
/// (agent 0 varies slowest; per agent, removals by size then bitmask).
pub fn reduced_graphs<'a>(
    g: &'a DiGraph,
    faulty: &'a FaultySet,
) -> impl Iterator<Item = ReducedGraph> + 'a {
    let alive = AgentSet::full(g.n()).difference(faulty.members);
    let options: Vec<(usize, Vec<AgentSet>)> = alive
        .iter()
        .map(|i| (i, subsets_up_to(g.in_set(i).intersection(alive), faulty.bound)))
        .collect();
    let mut digits = vec![0usize; options.len()];
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let mut removed = vec![AgentSet::EMPTY; g.n()];
        for (slot, (agent, opts)) in options.iter().enumerate() {
            removed[*agent] = opts[digits[slot]];
        }
        // advance the mixed-radix counter, last agent fastest
        let mut k = options.len();
        loop {
            if k == 0 {
                done = true;
                break;
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < options[k].1.len() {
                break;
            }
            digits[k] = 0;
        }
        Some(ReducedGraph::new(g, faulty, removed).expect("enumerated reduced graph is valid"))
    })
}

/// All reduced graphs of `g` for faulty set `faulty`.
pub fn enumerate_reduced_graphs(g: &DiGraph, faulty: &FaultySet) -> Vec<ReducedGraph> {
    reduced_graphs(g, faulty).collect()
}

/// The set of vertices that have a directed path to every other vertex.
///
/// Computed on the SCC condensation: the answer is the unique source SCC if
/// the condensation has exactly one, and empty otherwise.
pub fn source_component<G: Topology>(h: &G) -> AgentSet {
    let verts = h.vertices();
    if verts.is_empty() {
        return AgentSet::EMPTY;
    }
    let mut pg: PetGraph<usize, ()> = PetGraph::with_capacity(verts.len(), 0);
    let mut index = vec![NodeIndex::end(); h.order()];
    for v in verts.iter() {
        index[v] = pg.add_node(v);
    }
    for v in verts.iter() {
        for u in h.in_set(v).intersection(verts).iter() {
            pg.add_edge(index[u], index[v], ());
        }
    }
    let sccs = tarjan_scc(&pg);
    let mut comp_of = vec![usize::MAX; h.order()];
    for (c, nodes) in sccs.iter().enumerate() {
        for &nix in nodes {
            comp_of[pg[nix]] = c;
        }
    }
    let mut has_incoming = vec![false; sccs.len()];
    for v in verts.iter() {
        for u in h.in_set(v).intersection(verts).iter() {
            if comp_of[u] != comp_of[v] {
                has_incoming[comp_of[v]] = true;
            }
        }
    }
    let mut sources = has_incoming.iter().enumerate().filter(|(_, &inc)| !inc).map(|(c, _)| c);
    match (sources.next(), sources.next()) {
        (Some(c), None) => sccs[c].iter().map(|&nix| pg[nix]).collect(),
        _ => AgentSet::EMPTY,
    }
}

/// Why a reduced graph violates Condition 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceDeficit {
    /// Two disjoint agent sets with no incoming edges from outside: no
    /// vertex can reach both, so there is no source component.
    NoSource { left: AgentSet, right: AgentSet },
    /// A set smaller than required with no incoming edges from outside;
    /// any source component lies inside it.
    TooSmall { closed: AgentSet },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Condition1Witness {
    pub faulty: AgentSet,
    pub reduced: ReducedGraph,
    pub source: AgentSet,
    pub deficit: SourceDeficit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Condition1Report {
    pub holds: bool,
    /// `max{f + 1, s}`
    pub required: usize,
    pub witness: Option<Condition1Witness>,
}

/// Checks that every reduced graph, over every faulty set with `|F| <= f`,
/// has a source component with at least `max{f + 1, s}` agents.
///
/// Reduced graphs are not enumerated one by one. Removals at different
/// agents are independent, so a reduced graph in which a vertex set `L` has
/// no incoming edges from the rest exists iff every `i ∈ L` has at most `f`
/// non-faulty in-neighbors outside `L` ("`L` can be closed"). A reduced graph
/// violates the size bound iff it closes either one set smaller than
/// `max{f+1, s}` or two disjoint sets, so the check ranges over subsets of
/// `V − F` instead of the (much larger) family `R_F`.
pub fn check_condition1(g: &DiGraph, f: usize, s: usize) -> Result<Condition1Report, GraphError> {
    let n = g.n();
    if n > MAX_CONDITION1_AGENTS {
        return Err(GraphError::TooLarge { check: "condition 1", limit: MAX_CONDITION1_AGENTS, n });
    }
    if s == 0 || s > n + 1 {
        return Err(GraphError::BadSparsity { s, max: n + 1 });
    }
    let required = (f + 1).max(s);
    for faulty in faulty_sets(n, f) {
        let fs = FaultySet { members: faulty, bound: f };
        let alive = AgentSet::full(n).difference(faulty);
        let closable = |l: AgentSet| {
            l.iter().all(|i| g.in_set(i).intersection(alive).difference(l).len() <= f)
        };
        let closed: Vec<AgentSet> =
            alive.subsets().filter(|l| !l.is_empty() && closable(*l)).collect();
        if alive.is_empty() {
            let reduced = ReducedGraph::new(g, &fs, vec![AgentSet::EMPTY; n]).expect("valid");
            return Ok(Condition1Report {
                holds: false,
                required,
                witness: Some(Condition1Witness {
                    faulty,
                    reduced,
                    source: AgentSet::EMPTY,
                    deficit: SourceDeficit::TooSmall { closed: AgentSet::EMPTY },
                }),
            });
        }
        let deficit = closed
            .iter()
            .find(|l| l.len() < required)
            .map(|&l| SourceDeficit::TooSmall { closed: l })
            .or_else(|| {
                closed.iter().enumerate().find_map(|(a, &l)| {
                    closed[a + 1..]
                        .iter()
                        .find(|r| r.is_disjoint(l))
                        .map(|&r| SourceDeficit::NoSource { left: l, right: r })
                })
            });
        if let Some(deficit) = deficit {
            let mut removed = vec![AgentSet::EMPTY; n];
            let close = |set: AgentSet, removed: &mut Vec<AgentSet>| {
                for i in set.iter() {
                    removed[i] = g.in_set(i).intersection(alive).difference(set);
                }
            };
            match deficit {
                SourceDeficit::TooSmall { closed } => close(closed, &mut removed),
                SourceDeficit::NoSource { left, right } => {
                    close(left, &mut removed);
                    close(right, &mut removed);
                }
            }
            let reduced = ReducedGraph::new(g, &fs, removed).expect("closing removals are valid");
            let source = source_component(&reduced);
            debug_assert!(source.len() < required, "witness must violate the size bound");
            return Ok(Condition1Report {
                holds: false,
                required,
                witness: Some(Condition1Witness { faulty, reduced, source, deficit }),
            });
        }
    }
    Ok(Condition1Report { holds: true, required, witness: None })
}

/// All agent sets of size at most `f` within `0..n`, by size then bitmask.
pub fn faulty_sets(n: usize, f: usize) -> Vec<AgentSet> {
    subsets_up_to(AgentSet::full(n), f)
}

/// A node partition `(L, R, C, F)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub left: AgentSet,
    pub right: AgentSet,
    pub center: AgentSet,
    pub faulty: AgentSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Condition2Report {
    pub holds: bool,
    pub witness: Option<Partition>,
}

/// Checks the partition condition: for every partition `(L, R, C, F)` with
/// `L`, `R` nonempty and `|F| <= f`, some node of `L` has at least `f + 1`
/// in-neighbors in `R ∪ C`, or some node of `R` has at least `f + 1`
/// in-neighbors in `L ∪ C`.
///
/// Enumerates all `4^n` colorings; `n` is capped at
/// [`MAX_CONDITION2_AGENTS`].
pub fn check_condition2(g: &DiGraph, f: usize) -> Result<Condition2Report, GraphError> {
    let n = g.n();
    if n > MAX_CONDITION2_AGENTS {
        return Err(GraphError::TooLarge { check: "condition 2", limit: MAX_CONDITION2_AGENTS, n });
    }
    let total = 1usize << (2 * n);
    for code in 0..total {
        let mut part = [AgentSet::EMPTY; 4];
        for v in 0..n {
            part[(code >> (2 * v)) & 3].insert(v);
        }
        let [left, right, center, faulty] = part;
        if left.is_empty() || right.is_empty() || faulty.len() > f {
            continue;
        }
        let heavy = |side: AgentSet, other: AgentSet| {
            side.iter().any(|i| g.in_set(i).intersection(other.union(center)).len() > f)
        };
        if !heavy(left, right) && !heavy(right, left) {
            return Ok(Condition2Report {
                holds: false,
                witness: Some(Partition { left, right, center, faulty }),
            });
        }
    }
    Ok(Condition2Report { holds: true, witness: None })
}
