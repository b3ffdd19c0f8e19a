//! Static network description: clock nodes, directed arcs, standard clocks,
//! and the CEN/SEN coupling classification.
//!
//! A node is a Feynman Detector while in its ground state and a Feynman
//! Clock once excited; there is no separate detector type. Arcs are
//! directed signal channels, so a bidirectional link is two arcs.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{self, TwoLevelSpec, CODATA};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(NodeId);
id_type!(ArcId);
id_type!(
    /// Assigned in engine emission order; strictly increasing along a trace.
    EventId
);
id_type!(PulseId);

pub use crate::quantum::ExcitationId;

/// Default resonance window as a fraction of the node's gap.
pub const DEFAULT_TOLERANCE_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ClockNode {
    pub id: NodeId,
    pub spec: TwoLevelSpec,
    /// Position in m.
    pub position: [f64; 3],
    /// Resonance window in eV.
    pub resonance_tolerance: f64,
    pub can_emit: bool,
    pub can_detect: bool,
}

impl ClockNode {
    /// Node at the origin that can both emit and detect, with the default
    /// resonance window.
    pub fn new(id: NodeId, spec: TwoLevelSpec) -> Self {
        let resonance_tolerance = DEFAULT_TOLERANCE_FRACTION * spec.signal_energy();
        Self {
            id,
            spec,
            position: [0.0; 3],
            resonance_tolerance,
            can_emit: true,
            can_detect: true,
        }
    }

    pub fn with_position(mut self, position: [f64; 3]) -> Self {
        self.position = position;
        self
    }

    pub fn lifetime(&self) -> Option<f64> {
        self.spec.lifetime().ok()
    }
}

/// A cyclic reference clock co-located with the node `id`. Its pulses carry
/// consecutive counter labels starting at `counter_start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardClockSpec {
    pub id: NodeId,
    /// Seconds between pulses.
    pub period: f64,
    /// Engine time of the first pulse.
    pub first_tick: f64,
    pub counter_start: i64,
}

impl StandardClockSpec {
    /// Engine time of the `k`-th pulse (0-based). Computed by
    /// multiplication, never by accumulation, so that pulse `2k` of a clock
    /// with half the period lands on exactly the same value.
    pub fn tick_time(&self, k: u64) -> f64 {
        self.first_tick + (k as f64) * self.period
    }

    /// Time number attached to a counter label.
    pub fn time_for_counter(&self, counter: i64) -> f64 {
        self.first_tick + ((counter - self.counter_start) as f64) * self.period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub id: ArcId,
    pub source: NodeId,
    pub target: NodeId,
    /// Straight-line length in m.
    pub distance: f64,
}

/// Source, signal channel and detector: one node-arc-node step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectorySegment {
    pub source: NodeId,
    pub arc: ArcId,
    pub detector: NodeId,
}

/// Signal transit time along an arc, `distance / c`.
pub fn propagation_delay(arc: &Arc) -> f64 {
    arc.distance / CODATA.c
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub location: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationFailed(pub Vec<ValidationIssue>);

impl fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "network validation failed with {} issue(s)", self.0.len())?;
        for issue in &self.0 {
            write!(f, "\n  {issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("a collective excitation needs at least one member")]
    EmptyCen,
    #[error("node {0} has no decay channel and cannot join a collective excitation")]
    MissingDecayChannel(NodeId),
    #[error(transparent)]
    Quantum(#[from] quantum::QuantumError),
}

/// A network that passed [`validate_network`]. Immutable afterwards.
#[derive(Debug, Clone, Default)]
pub struct Network {
    nodes: BTreeMap<NodeId, ClockNode>,
    arcs: BTreeMap<ArcId, Arc>,
    clocks: BTreeMap<NodeId, StandardClockSpec>,
    outgoing: BTreeMap<NodeId, Vec<ArcId>>,
}

impl Network {
    pub fn node(&self, id: NodeId) -> Option<&ClockNode> {
        self.nodes.get(&id)
    }

    pub fn arc(&self, id: ArcId) -> Option<&Arc> {
        self.arcs.get(&id)
    }

    pub fn clock(&self, id: NodeId) -> Option<&StandardClockSpec> {
        self.clocks.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ClockNode> {
        self.nodes.values()
    }

    pub fn arcs(&self) -> impl Iterator<Item = &Arc> {
        self.arcs.values()
    }

    pub fn clocks(&self) -> impl Iterator<Item = &StandardClockSpec> {
        self.clocks.values()
    }

    /// Outgoing arcs of `node`, in ascending arc id order.
    pub fn outgoing(&self, node: NodeId) -> &[ArcId] {
        self.outgoing.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn segments(&self) -> impl Iterator<Item = TrajectorySegment> + '_ {
        self.arcs.values().map(|a| TrajectorySegment {
            source: a.source,
            arc: a.id,
            detector: a.target,
        })
    }

    /// Total transit time along a sequence of arcs.
    pub fn path_delay(&self, path: &[ArcId]) -> Option<f64> {
        path.iter().map(|id| self.arc(*id).map(propagation_delay)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn finite3(v: &[f64; 3]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Checks every structural invariant and reports all problems at once.
pub fn validate_network(
    nodes: Vec<ClockNode>,
    arcs: Vec<Arc>,
    clocks: Vec<StandardClockSpec>,
) -> Result<Network, ValidationFailed> {
    let mut issues = Vec::new();
    let mut issue = |location: String, message: String| issues.push(ValidationIssue { location, message });

    let mut node_map = BTreeMap::new();
    for (i, n) in nodes.into_iter().enumerate() {
        let loc = format!("nodes[{i}]");
        if !finite3(&n.position) {
            issue(
                format!("{loc}.position_m"),
                format!("non-finite position {:?}", n.position),
            );
        }
        if !(n.resonance_tolerance.is_finite() && n.resonance_tolerance >= 0.0) {
            issue(
                format!("{loc}.resonance_tolerance_ev"),
                format!(
                    "tolerance must be finite and non-negative, got {}",
                    n.resonance_tolerance
                ),
            );
        }
        match node_map.entry(n.id) {
            Entry::Occupied(_) => issue(format!("{loc}.id"), format!("duplicate node id {}", n.id)),
            Entry::Vacant(slot) => {
                slot.insert(n);
            }
        }
    }

    let mut arc_map = BTreeMap::new();
    let mut outgoing: BTreeMap<NodeId, Vec<ArcId>> = BTreeMap::new();
    for (i, a) in arcs.into_iter().enumerate() {
        let loc = format!("arcs[{i}]");
        let mut ok = true;
        for (field, id) in [("source", a.source), ("target", a.target)] {
            match node_map.get(&id) {
                None => {
                    issue(format!("{loc}.{field}"), format!("unknown node {id}"));
                    ok = false;
                }
                Some(n) if field == "source" && !n.can_emit => {
                    issue(format!("{loc}.source"), format!("node {id} cannot emit"));
                }
                Some(n) if field == "target" && !n.can_detect => {
                    issue(format!("{loc}.target"), format!("node {id} cannot detect"));
                }
                Some(_) => {}
            }
        }
        if a.source == a.target {
            issue(loc.clone(), format!("arc {} is a self-loop on node {}", a.id, a.source));
            ok = false;
        }
        if !(a.distance.is_finite() && a.distance >= 0.0) {
            issue(
                format!("{loc}.distance_m"),
                format!("distance must be finite and non-negative, got {}", a.distance),
            );
            ok = false;
        }
        match arc_map.entry(a.id) {
            Entry::Occupied(_) => issue(format!("{loc}.id"), format!("duplicate arc id {}", a.id)),
            Entry::Vacant(slot) if ok => {
                outgoing.entry(a.source).or_default().push(a.id);
                slot.insert(a);
            }
            Entry::Vacant(_) => {}
        }
    }
    for list in outgoing.values_mut() {
        list.sort();
    }

    let mut clock_map = BTreeMap::new();
    for (i, c) in clocks.into_iter().enumerate() {
        let loc = format!("standard_clocks[{i}]");
        if !node_map.contains_key(&c.id) {
            issue(format!("{loc}.id"), format!("unknown node {}", c.id));
        }
        if !(c.period.is_finite() && c.period > 0.0) {
            issue(
                format!("{loc}.period_s"),
                format!("period must be finite and positive, got {}", c.period),
            );
        }
        if !(c.first_tick.is_finite() && c.first_tick >= 0.0) {
            issue(
                format!("{loc}.first_tick_s"),
                format!("first tick must be finite and non-negative, got {}", c.first_tick),
            );
        }
        if clock_map.insert(c.id, c).is_some() {
            issue(
                format!("{loc}.id"),
                format!("duplicate standard clock at node {}", c.id),
            );
        }
    }

    if !issues.is_empty() {
        return Err(ValidationFailed(issues));
    }
    Ok(Network {
        nodes: node_map,
        arcs: arc_map,
        clocks: clock_map,
        outgoing,
    })
}

/// Rule deciding when two arc-joined nodes share a collective excitation:
/// transit delay below `coupling_fraction` of the shorter lifetime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRule {
    pub coupling_fraction: f64,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        Self {
            coupling_fraction: 0.01,
        }
    }
}

impl ThresholdRule {
    /// Nodes without a decay channel never couple.
    pub fn couples(&self, arc: &Arc, a: &ClockNode, b: &ClockNode) -> bool {
        match (a.lifetime(), b.lifetime()) {
            (Some(ta), Some(tb)) => propagation_delay(arc) < self.coupling_fraction * ta.min(tb),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CouplingClass {
    /// Tightly coupled nodes acting as one collective clock.
    Cen(BTreeSet<NodeId>),
    /// A node that only exchanges information step by step.
    Sen(NodeId),
}

impl CouplingClass {
    pub fn contains(&self, id: NodeId) -> bool {
        match self {
            CouplingClass::Cen(m) => m.contains(&id),
            CouplingClass::Sen(n) => *n == id,
        }
    }

    fn first(&self) -> NodeId {
        match self {
            CouplingClass::Cen(m) => *m.iter().next().expect("non-empty CEN"),
            CouplingClass::Sen(n) => *n,
        }
    }
}

/// An arc carrying information sequentially between two different classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SenLink {
    pub arc: ArcId,
    pub from_class: usize,
    pub to_class: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coupling {
    /// Sorted by smallest member id.
    pub classes: Vec<CouplingClass>,
    pub links: Vec<SenLink>,
}

impl Coupling {
    pub fn class_of(&self, id: NodeId) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(id))
    }

    pub fn cens(&self) -> impl Iterator<Item = &BTreeSet<NodeId>> {
        self.classes.iter().filter_map(|c| match c {
            CouplingClass::Cen(m) => Some(m),
            CouplingClass::Sen(_) => None,
        })
    }
}

/// Partitions the nodes into CENs (connected components under the coupling
/// rule, arcs taken as undirected) and singleton SEN nodes. Every arc between
/// two different classes becomes a [`SenLink`].
pub fn classify_coupling(network: &Network, rule: &ThresholdRule) -> Coupling {
    let mut adjacency: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for arc in network.arcs() {
        let (a, b) = (&network.nodes[&arc.source], &network.nodes[&arc.target]);
        if rule.couples(arc, a, b) {
            adjacency.entry(a.id).or_default().insert(b.id);
            adjacency.entry(b.id).or_default().insert(a.id);
        }
    }

    let mut seen = BTreeSet::new();
    let mut classes = Vec::new();
    for &start in network.nodes.keys() {
        if !seen.insert(start) {
            continue;
        }
        let mut members = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for &m in adjacency.get(&n).into_iter().flatten() {
                if seen.insert(m) {
                    members.insert(m);
                    queue.push_back(m);
                }
            }
        }
        classes.push(if members.len() > 1 {
            CouplingClass::Cen(members)
        } else {
            CouplingClass::Sen(start)
        });
    }
    classes.sort_by_key(CouplingClass::first);

    let class_index: BTreeMap<NodeId, usize> = classes
        .iter()
        .enumerate()
        .flat_map(|(i, c)| match c {
            CouplingClass::Cen(m) => m.iter().map(|&n| (n, i)).collect::<Vec<_>>(),
            CouplingClass::Sen(n) => vec![(*n, i)],
        })
        .collect();
    let links = network
        .arcs()
        .filter_map(|arc| {
            let (from_class, to_class) = (class_index[&arc.source], class_index[&arc.target]);
            (from_class != to_class).then_some(SenLink {
                arc: arc.id,
                from_class,
                to_class,
            })
        })
        .collect();

    Coupling { classes, links }
}

/// Collapses a CEN into one effective two-level spec: the largest member
/// gap and the summed decay rate, so the collective decays faster than any
/// member alone. Ties on the gap go to the smallest node id.
pub fn cen_effective_spec(members: &[&ClockNode]) -> Result<TwoLevelSpec, NetworkError> {
    let mut sorted: Vec<&ClockNode> = members.to_vec();
    sorted.sort_by_key(|n| n.id);
    let mut gamma = 0.0;
    for n in &sorted {
        gamma += n.spec.gamma().ok_or(NetworkError::MissingDecayChannel(n.id))?;
    }
    let widest = sorted
        .iter()
        .copied()
        .reduce(|best, n| {
            if n.spec.signal_energy() > best.spec.signal_energy() {
                n
            } else {
                best
            }
        })
        .ok_or(NetworkError::EmptyCen)?;
    Ok(TwoLevelSpec::new(
        widest.spec.ground().clone(),
        widest.spec.excited().clone(),
        Some(gamma),
    )?)
}
