//! Deterministic discrete-event engine.
//!
//! Pending occurrences live in a min-heap ordered by `(engine_time, seq)`,
//! where `seq` is the order in which they were scheduled. Processing one
//! occurrence appends exactly one [`SimEvent`] to the trace. A decay
//! schedules one emission per outgoing arc at the same engine time, each
//! emission schedules an arrival, and each arrival becomes either an
//! absorption or a pass-through at the target node.
//!
//! `engine_time` is the scheduler's ordering parameter only. Observable time
//! numbers come out of the chronology module, never from here.
//!
//! Arrival times are computed as `emitted_at + arc.distance / c` in that
//! order of operations, so a consumer holding the arc can reproduce them
//! bit for bit.
//!
//! Randomness: a stochastic run owns a single `ChaCha8Rng` stream seeded with
//! `seed_from_u64(seed)`. Each decay draws exactly one `u64` from it, in
//! processing order. Runs with different seeds share nothing.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use log::{debug, trace};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{EntropyError, EntropyLedger, EntropyModel};
use crate::network::{
    propagation_delay, ArcId, ClockNode, EventId, ExcitationId, Network, NodeId, PulseId, ThresholdRule,
};
use crate::quantum::{self, AbsorbOutcome, ConfigurationState, ExcitationIds, QuantumError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("no pending occurrences at or before the run horizon")]
    Exhausted,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} can neither emit nor detect and cannot be excited")]
    NotExcitable(NodeId),
    #[error("injection time {at} is invalid (engine is at {now})")]
    InvalidTime { at: f64, now: f64 },
    #[error("run horizon must be finite and positive, got {0}")]
    InvalidHorizon(f64),
    #[error("coupling fraction must be finite and positive, got {0}")]
    InvalidCouplingFraction(f64),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Every decay happens exactly one lifetime after excitation.
    Deterministic,
    /// Decay delays are exponential draws with mean equal to the lifetime.
    Stochastic { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    /// Occurrences with `engine_time <= run_until` are processed.
    pub run_until: f64,
    pub coupling_fraction: f64,
    pub entropy_model: EntropyModel,
}

impl RunConfig {
    pub fn new(mode: Mode, run_until: f64) -> Result<Self, EngineError> {
        if !(run_until.is_finite() && run_until > 0.0) {
            return Err(EngineError::InvalidHorizon(run_until));
        }
        Ok(Self {
            mode,
            run_until,
            coupling_fraction: ThresholdRule::default().coupling_fraction,
            entropy_model: EntropyModel::default(),
        })
    }

    pub fn with_entropy_model(mut self, model: EntropyModel) -> Self {
        self.entropy_model = model;
        self
    }

    pub fn with_coupling_fraction(mut self, fraction: f64) -> Result<Self, EngineError> {
        if !(fraction.is_finite() && fraction > 0.0) {
            return Err(EngineError::InvalidCouplingFraction(fraction));
        }
        self.coupling_fraction = fraction;
        Ok(self)
    }
}

/// Draws a decay delay. Deterministic mode returns the lifetime itself and
/// does not touch `rng`. Stochastic mode consumes exactly one `u64` and maps
/// it through the exponential inverse CDF, `-tau * ln(1 - u)` with `u` in
/// `[0, 1)` built from the top 53 bits. `libm` keeps the logarithm identical
/// across platforms.
pub fn sample_decay_delay<R: RngCore + ?Sized>(gamma: f64, mode: Mode, rng: &mut R) -> Result<f64, QuantumError> {
    let tau = quantum::lifetime(gamma)?;
    match mode {
        Mode::Deterministic => Ok(tau),
        Mode::Stochastic { .. } => {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            Ok(-tau * libm::log1p(-u))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    ExternalExcitation,
    Absorption,
    Decay,
    Emission,
    ClockTick,
    PassThrough,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    ExternalExcitation {
        excitation: ExcitationId,
    },
    Absorption {
        excitation: ExcitationId,
        arc: ArcId,
        energy_ev: f64,
    },
    Decay {
        excitation: ExcitationId,
        energy_ev: f64,
        gamma_ev: f64,
    },
    Emission {
        arc: ArcId,
        energy_ev: f64,
        wavelength_nm: f64,
    },
    ClockTick {
        pulse: PulseId,
        counter: i64,
        period_s: f64,
    },
    /// A signal that was not absorbed (`arc` and `energy_ev` set) or an
    /// injection into an occupied node (both `None`).
    PassThrough {
        arc: Option<ArcId>,
        energy_ev: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub id: EventId,
    pub node: NodeId,
    pub engine_time: f64,
    pub causal_parents: Vec<EventId>,
    pub payload: Payload,
}

impl SimEvent {
    pub fn kind(&self) -> EventKind {
        match self.payload {
            Payload::ExternalExcitation { .. } => EventKind::ExternalExcitation,
            Payload::Absorption { .. } => EventKind::Absorption,
            Payload::Decay { .. } => EventKind::Decay,
            Payload::Emission { .. } => EventKind::Emission,
            Payload::ClockTick { .. } => EventKind::ClockTick,
            Payload::PassThrough { .. } => EventKind::PassThrough,
        }
    }

    pub fn excitation(&self) -> Option<ExcitationId> {
        match self.payload {
            Payload::ExternalExcitation { excitation }
            | Payload::Absorption { excitation, .. }
            | Payload::Decay { excitation, .. } => Some(excitation),
            _ => None,
        }
    }

    pub fn energy_ev(&self) -> Option<f64> {
        match self.payload {
            Payload::Absorption { energy_ev, .. }
            | Payload::Decay { energy_ev, .. }
            | Payload::Emission { energy_ev, .. } => Some(energy_ev),
            Payload::PassThrough { energy_ev, .. } => energy_ev,
            _ => None,
        }
    }

    pub fn arc(&self) -> Option<ArcId> {
        match self.payload {
            Payload::Absorption { arc, .. } | Payload::Emission { arc, .. } => Some(arc),
            Payload::PassThrough { arc, .. } => arc,
            _ => None,
        }
    }
}

/// A free signal travelling along one arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalInFlight {
    pub energy: f64,
    pub wavelength: f64,
    pub arc: ArcId,
    pub emitted_at: f64,
    pub arrives_at: f64,
    pub provenance: EventId,
}

/// Append-only event record, totally ordered by `(engine_time, id)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventTrace {
    events: Vec<SimEvent>,
}

impl EventTrace {
    /// Wraps events already in trace order. Ids must be strictly increasing.
    pub fn from_events(events: Vec<SimEvent>) -> Self {
        debug_assert!(events.windows(2).all(|w| w[0].id < w[1].id));
        Self { events }
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<SimEvent> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, id: EventId) -> Option<&SimEvent> {
        self.events
            .binary_search_by_key(&id, |e| e.id)
            .ok()
            .map(|i| &self.events[i])
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &SimEvent> {
        self.events.iter().filter(move |e| e.kind() == kind)
    }

    /// All transitive causal parents of `id`, excluding `id` itself.
    pub fn ancestors(&self, id: EventId) -> BTreeSet<EventId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<EventId> = self.get(id).map(|e| e.causal_parents.clone()).unwrap_or_default();
        while let Some(p) = stack.pop() {
            if seen.insert(p) {
                if let Some(e) = self.get(p) {
                    stack.extend(e.causal_parents.iter().copied());
                }
            }
        }
        seen
    }
}

#[derive(Debug, Clone, Copy)]
enum Occurrence {
    Injection {
        node: NodeId,
    },
    Decay {
        node: NodeId,
        excitation: ExcitationId,
        parent: EventId,
    },
    Emission {
        node: NodeId,
        arc: ArcId,
        energy: f64,
        parent: EventId,
    },
    Arrival(SignalInFlight),
    Tick {
        clock: NodeId,
        k: u64,
    },
}

#[derive(Debug)]
struct Scheduled {
    time: f64,
    seq: u64,
    occurrence: Occurrence,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: EventTrace,
    pub ledger: EntropyLedger,
}

pub struct Engine {
    network: Network,
    config: RunConfig,
    states: BTreeMap<NodeId, ConfigurationState>,
    queue: BinaryHeap<Scheduled>,
    next_seq: u64,
    next_event: u64,
    next_pulse: u64,
    excitations: ExcitationIds,
    rng: ChaCha8Rng,
    trace: Vec<SimEvent>,
    ledger: EntropyLedger,
    now: f64,
}

impl Engine {
    /// Builds an engine and schedules the first pulse of every standard
    /// clock, in ascending clock id order.
    pub fn new(network: Network, config: RunConfig) -> Self {
        let seed = match config.mode {
            Mode::Deterministic => 0,
            Mode::Stochastic { seed } => seed,
        };
        let states = network.nodes().map(|n| (n.id, ConfigurationState::Ground)).collect();
        let clocks: Vec<_> = network.clocks().copied().collect();
        let mut engine = Self {
            network,
            config,
            states,
            queue: BinaryHeap::new(),
            next_seq: 0,
            next_event: 0,
            next_pulse: 0,
            excitations: ExcitationIds::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            trace: Vec::new(),
            ledger: EntropyLedger::new(),
            now: 0.0,
        };
        for c in clocks {
            engine.schedule(c.first_tick, Occurrence::Tick { clock: c.id, k: 0 });
        }
        engine
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn trace(&self) -> &[SimEvent] {
        &self.trace
    }

    pub fn ledger(&self) -> &EntropyLedger {
        &self.ledger
    }

    pub fn state(&self, node: NodeId) -> Option<ConfigurationState> {
        self.states.get(&node).copied()
    }

    /// Schedules an excitation supplied by the environment. Whether it
    /// excites the node or passes through is decided when it is processed,
    /// against the node's state at that engine time. Returns the scheduling
    /// sequence number.
    pub fn inject_excitation(&mut self, node: NodeId, at: f64) -> Result<u64, EngineError> {
        let n = self.network.node(node).ok_or(EngineError::UnknownNode(node))?;
        if !(n.can_detect || n.can_emit) {
            return Err(EngineError::NotExcitable(node));
        }
        if !(at.is_finite() && at >= 0.0 && at >= self.now) {
            return Err(EngineError::InvalidTime { at, now: self.now });
        }
        Ok(self.schedule(at, Occurrence::Injection { node }))
    }

    fn schedule(&mut self, time: f64, occurrence: Occurrence) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        trace!("schedule #{seq} at {time}: {occurrence:?}");
        self.queue.push(Scheduled { time, seq, occurrence });
        seq
    }

    fn node(&self, id: NodeId) -> &ClockNode {
        self.network.node(id).expect("validated network")
    }

    fn push_event(&mut self, node: NodeId, parents: Vec<EventId>, payload: Payload) -> SimEvent {
        let event = SimEvent {
            id: EventId(self.next_event),
            node,
            engine_time: self.now,
            causal_parents: parents,
            payload,
        };
        self.next_event += 1;
        debug!("event {} {:?} node {} at {}", event.id, event.kind(), node, self.now);
        self.trace.push(event.clone());
        event
    }

    fn schedule_decay(&mut self, node: NodeId, excitation: ExcitationId, parent: EventId) -> Result<(), EngineError> {
        if let Some(gamma) = self.node(node).spec.gamma() {
            let delay = sample_decay_delay(gamma, self.config.mode, &mut self.rng)?;
            self.schedule(
                self.now + delay,
                Occurrence::Decay {
                    node,
                    excitation,
                    parent,
                },
            );
        }
        Ok(())
    }

    /// Processes the earliest pending occurrence.
    pub fn step(&mut self) -> Result<SimEvent, EngineError> {
        match self.queue.peek() {
            Some(s) if s.time <= self.config.run_until => {}
            _ => return Err(EngineError::Exhausted),
        }
        let Scheduled { time, occurrence, .. } = self.queue.pop().expect("peeked");
        self.now = time;

        let event = match occurrence {
            Occurrence::Injection { node } => {
                let state = self.states.get_mut(&node).expect("validated network");
                match quantum::excite(state, &mut self.excitations) {
                    Some(excitation) => {
                        let ev = self.push_event(node, vec![], Payload::ExternalExcitation { excitation });
                        self.schedule_decay(node, excitation, ev.id)?;
                        ev
                    }
                    None => self.push_event(
                        node,
                        vec![],
                        Payload::PassThrough {
                            arc: None,
                            energy_ev: None,
                        },
                    ),
                }
            }
            Occurrence::Decay {
                node,
                excitation,
                parent,
            } => {
                let spec = self.node(node).spec.clone();
                let gamma = spec.gamma().ok_or(QuantumError::StableConfiguration(None))?;
                let state = self.states.get_mut(&node).expect("validated network");
                let decayed = quantum::decay(state, &spec)?;
                debug_assert_eq!(decayed.retired, excitation);
                let ev = self.push_event(
                    node,
                    vec![parent],
                    Payload::Decay {
                        excitation,
                        energy_ev: decayed.emitted_energy,
                        gamma_ev: gamma,
                    },
                );
                self.ledger
                    .record_decay(ev.id, decayed.emitted_energy, gamma, &self.config.entropy_model)?;
                if self.node(node).can_emit {
                    let arcs = self.network.outgoing(node).to_vec();
                    for arc in arcs {
                        self.schedule(
                            self.now,
                            Occurrence::Emission {
                                node,
                                arc,
                                energy: decayed.emitted_energy,
                                parent: ev.id,
                            },
                        );
                    }
                }
                ev
            }
            Occurrence::Emission {
                node,
                arc,
                energy,
                parent,
            } => {
                let wavelength = quantum::wavelength_of(energy)?;
                let ev = self.push_event(
                    node,
                    vec![parent],
                    Payload::Emission {
                        arc,
                        energy_ev: energy,
                        wavelength_nm: wavelength,
                    },
                );
                let a = self.network.arc(arc).expect("validated network");
                let signal = SignalInFlight {
                    energy,
                    wavelength,
                    arc,
                    emitted_at: self.now,
                    arrives_at: self.now + propagation_delay(a),
                    provenance: ev.id,
                };
                self.schedule(signal.arrives_at, Occurrence::Arrival(signal));
                ev
            }
            Occurrence::Arrival(signal) => {
                let target = self.network.arc(signal.arc).expect("validated network").target;
                let (spec, tolerance) = {
                    let n = self.node(target);
                    (n.spec.clone(), n.resonance_tolerance)
                };
                let state = self.states.get_mut(&target).expect("validated network");
                match quantum::absorb(state, &spec, signal.energy, tolerance, &mut self.excitations) {
                    AbsorbOutcome::Excited(excitation) => {
                        let ev = self.push_event(
                            target,
                            vec![signal.provenance],
                            Payload::Absorption {
                                excitation,
                                arc: signal.arc,
                                energy_ev: signal.energy,
                            },
                        );
                        self.schedule_decay(target, excitation, ev.id)?;
                        ev
                    }
                    AbsorbOutcome::PassThrough => self.push_event(
                        target,
                        vec![signal.provenance],
                        Payload::PassThrough {
                            arc: Some(signal.arc),
                            energy_ev: Some(signal.energy),
                        },
                    ),
                }
            }
            Occurrence::Tick { clock, k } => {
                let spec = *self.network.clock(clock).expect("validated network");
                let pulse = PulseId(self.next_pulse);
                self.next_pulse += 1;
                let ev = self.push_event(
                    clock,
                    vec![],
                    Payload::ClockTick {
                        pulse,
                        counter: spec.counter_start + k as i64,
                        period_s: spec.period,
                    },
                );
                let next = spec.tick_time(k + 1);
                if next <= self.config.run_until {
                    self.schedule(next, Occurrence::Tick { clock, k: k + 1 });
                }
                ev
            }
        };
        Ok(event)
    }

    /// Steps until the schedule is exhausted or the horizon is reached.
    pub fn run(mut self) -> Result<RunResult, EngineError> {
        loop {
            match self.step() {
                Ok(_) => {}
                Err(EngineError::Exhausted) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(RunResult {
            trace: EventTrace::from_events(self.trace),
            ledger: self.ledger,
        })
    }
}

/// Builds an engine, schedules `injections` in order and runs it.
pub fn simulate(network: Network, injections: &[(NodeId, f64)], config: RunConfig) -> Result<RunResult, EngineError> {
    let mut engine = Engine::new(network, config);
    for &(node, at) in injections {
        engine.inject_excitation(node, at)?;
    }
    engine.run()
}
