//! File formats: the JSON network document, the JSONL event trace, and the
//! CSV timeline and entropy reports.
//!
//! Field names carry their units (`_ev`, `_s`, `_m`, `_nm`). Floats are
//! written in the shortest form that parses back to the same value.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chronology::{self, ResolutionReport, Timeline};
use crate::engine::{EventKind, EventTrace, Payload, SimEvent};
use crate::entropy::{EntropyError, EntropyLedger, EntropyModel};
use crate::network::{
    validate_network, Arc, ArcId, ClockNode, EventId, ExcitationId, Network, NodeId, PulseId, StandardClockSpec,
    ValidationFailed, ValidationIssue, DEFAULT_TOLERANCE_FRACTION,
};
use crate::quantum::TwoLevelSpec;

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema_version {0:?} (expected {SCHEMA_VERSION:?})")]
    UnsupportedSchema(String),
    #[error(transparent)]
    Validation(#[from] ValidationFailed),
    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: NodeId,
    pub ground_energy_ev: f64,
    pub excited_energy_ev: f64,
    /// Absent for a node that never decays.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_ev: Option<f64>,
    #[serde(default)]
    pub position_m: [f64; 3],
    /// Defaults to 1e-6 of the gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonance_tolerance_ev: Option<f64>,
    #[serde(default = "yes")]
    pub can_emit: bool,
    #[serde(default = "yes")]
    pub can_detect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcDoc {
    pub id: ArcId,
    pub source: NodeId,
    pub target: NodeId,
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockDoc {
    /// The node the clock sits at.
    pub id: NodeId,
    pub period_s: f64,
    #[serde(default)]
    pub first_tick_s: f64,
    #[serde(default)]
    pub counter_start: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionDoc {
    pub node: NodeId,
    pub engine_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub schema_version: String,
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub arcs: Vec<ArcDoc>,
    #[serde(default)]
    pub standard_clocks: Vec<ClockDoc>,
    #[serde(default)]
    pub injections: Vec<InjectionDoc>,
}

impl NetworkDocument {
    /// Converts to a validated network, collecting level errors and
    /// structural errors into one report.
    pub fn to_network(&self) -> Result<Network, ValidationFailed> {
        let mut issues = Vec::new();
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            match TwoLevelSpec::from_energies(n.ground_energy_ev, n.excited_energy_ev, n.gamma_ev) {
                Ok(spec) => {
                    let tolerance = n
                        .resonance_tolerance_ev
                        .unwrap_or(DEFAULT_TOLERANCE_FRACTION * spec.signal_energy());
                    nodes.push(ClockNode {
                        id: n.id,
                        spec,
                        position: n.position_m,
                        resonance_tolerance: tolerance,
                        can_emit: n.can_emit,
                        can_detect: n.can_detect,
                    });
                }
                Err(e) => issues.push(ValidationIssue {
                    location: format!("nodes[{i}]"),
                    message: e.to_string(),
                }),
            }
        }
        let arcs = self
            .arcs
            .iter()
            .map(|a| Arc {
                id: a.id,
                source: a.source,
                target: a.target,
                distance: a.distance_m,
            })
            .collect();
        let clocks = self
            .standard_clocks
            .iter()
            .map(|c| StandardClockSpec {
                id: c.id,
                period: c.period_s,
                first_tick: c.first_tick_s,
                counter_start: c.counter_start,
            })
            .collect();

        // Node-level failures leave gaps that would surface as spurious
        // "unknown node" issues, so report them alone.
        if !issues.is_empty() {
            return Err(ValidationFailed(issues));
        }
        let network = validate_network(nodes, arcs, clocks)?;

        for (i, inj) in self.injections.iter().enumerate() {
            match network.node(inj.node) {
                None => issues.push(ValidationIssue {
                    location: format!("injections[{i}].node"),
                    message: format!("unknown node {}", inj.node),
                }),
                Some(n) if !(n.can_emit || n.can_detect) => issues.push(ValidationIssue {
                    location: format!("injections[{i}].node"),
                    message: format!("node {} can neither emit nor detect", inj.node),
                }),
                Some(_) => {}
            }
            if !(inj.engine_time_s.is_finite() && inj.engine_time_s >= 0.0) {
                issues.push(ValidationIssue {
                    location: format!("injections[{i}].engine_time_s"),
                    message: format!(
                        "injection time must be finite and non-negative, got {}",
                        inj.engine_time_s
                    ),
                });
            }
        }
        if !issues.is_empty() {
            return Err(ValidationFailed(issues));
        }
        Ok(network)
    }

    pub fn injections(&self) -> Vec<(NodeId, f64)> {
        self.injections.iter().map(|i| (i.node, i.engine_time_s)).collect()
    }
}

/// Strict parse plus validation of a network document.
pub fn parse_network(bytes: &[u8]) -> Result<NetworkDocument, IoError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let doc: NetworkDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        IoError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(IoError::UnsupportedSchema(doc.schema_version));
    }
    doc.to_network()?;
    Ok(doc)
}

/// One trace line: a [`SimEvent`] flattened with optional payload fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventTraceRecord {
    pub id: EventId,
    pub kind: EventKind,
    pub node: NodeId,
    pub engine_time: f64,
    pub parents: Vec<EventId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitation: Option<ExcitationId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arc: Option<ArcId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_ev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_ev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counter: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_s: Option<f64>,
}

impl From<&SimEvent> for EventTraceRecord {
    fn from(e: &SimEvent) -> Self {
        let mut r = EventTraceRecord {
            id: e.id,
            kind: e.kind(),
            node: e.node,
            engine_time: e.engine_time,
            parents: e.causal_parents.clone(),
            excitation: None,
            arc: None,
            energy_ev: None,
            gamma_ev: None,
            wavelength_nm: None,
            pulse: None,
            counter: None,
            period_s: None,
        };
        match e.payload {
            Payload::ExternalExcitation { excitation } => r.excitation = Some(excitation),
            Payload::Absorption {
                excitation,
                arc,
                energy_ev,
            } => {
                r.excitation = Some(excitation);
                r.arc = Some(arc);
                r.energy_ev = Some(energy_ev);
            }
            Payload::Decay {
                excitation,
                energy_ev,
                gamma_ev,
            } => {
                r.excitation = Some(excitation);
                r.energy_ev = Some(energy_ev);
                r.gamma_ev = Some(gamma_ev);
            }
            Payload::Emission {
                arc,
                energy_ev,
                wavelength_nm,
            } => {
                r.arc = Some(arc);
                r.energy_ev = Some(energy_ev);
                r.wavelength_nm = Some(wavelength_nm);
            }
            Payload::ClockTick {
                pulse,
                counter,
                period_s,
            } => {
                r.pulse = Some(pulse);
                r.counter = Some(counter);
                r.period_s = Some(period_s);
            }
            Payload::PassThrough { arc, energy_ev } => {
                r.arc = arc;
                r.energy_ev = energy_ev;
            }
        }
        r
    }
}

impl TryFrom<EventTraceRecord> for SimEvent {
    type Error = String;

    fn try_from(r: EventTraceRecord) -> Result<Self, String> {
        fn need<T>(v: Option<T>, field: &str, kind: EventKind) -> Result<T, String> {
            v.ok_or_else(|| format!("{kind:?} event is missing {field}"))
        }
        let k = r.kind;
        let payload = match k {
            EventKind::ExternalExcitation => Payload::ExternalExcitation {
                excitation: need(r.excitation, "excitation", k)?,
            },
            EventKind::Absorption => Payload::Absorption {
                excitation: need(r.excitation, "excitation", k)?,
                arc: need(r.arc, "arc", k)?,
                energy_ev: need(r.energy_ev, "energy_ev", k)?,
            },
            EventKind::Decay => Payload::Decay {
                excitation: need(r.excitation, "excitation", k)?,
                energy_ev: need(r.energy_ev, "energy_ev", k)?,
                gamma_ev: need(r.gamma_ev, "gamma_ev", k)?,
            },
            EventKind::Emission => Payload::Emission {
                arc: need(r.arc, "arc", k)?,
                energy_ev: need(r.energy_ev, "energy_ev", k)?,
                wavelength_nm: need(r.wavelength_nm, "wavelength_nm", k)?,
            },
            EventKind::ClockTick => Payload::ClockTick {
                pulse: need(r.pulse, "pulse", k)?,
                counter: need(r.counter, "counter", k)?,
                period_s: need(r.period_s, "period_s", k)?,
            },
            EventKind::PassThrough => Payload::PassThrough {
                arc: r.arc,
                energy_ev: r.energy_ev,
            },
        };
        Ok(SimEvent {
            id: r.id,
            node: r.node,
            engine_time: r.engine_time,
            causal_parents: r.parents,
            payload,
        })
    }
}

pub fn write_trace<W: Write>(mut out: W, trace: &EventTrace) -> Result<(), IoError> {
    for e in trace.events() {
        serde_json::to_writer(&mut out, &EventTraceRecord::from(e)).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<EventTrace, IoError> {
    let mut events: Vec<SimEvent> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventTraceRecord = serde_json::from_str(&line).map_err(|e| IoError::Trace {
            line: lineno,
            message: e.to_string(),
        })?;
        let ev = SimEvent::try_from(rec).map_err(|message| IoError::Trace { line: lineno, message })?;
        if let Some(prev) = events.last() {
            if ev.id <= prev.id {
                return Err(IoError::Trace {
                    line: lineno,
                    message: format!("event id {} does not increase (previous {})", ev.id, prev.id),
                });
            }
        }
        events.push(ev);
    }
    Ok(EventTrace::from_events(events))
}

#[derive(Debug, Serialize)]
struct TimelineRow {
    observer: NodeId,
    event_id: EventId,
    node: NodeId,
    pulse_id: PulseId,
    label: i64,
    time_number: f64,
}

/// Timeline CSV. Engine times are deliberately not exported.
pub fn write_timeline_csv<W: Write>(out: W, timeline: &Timeline, trace: &EventTrace) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    for e in &timeline.entries {
        let node = trace.get(e.event).map(|ev| ev.node).unwrap_or(timeline.observer);
        w.serialize(TimelineRow {
            observer: timeline.observer,
            event_id: e.event,
            node,
            pulse_id: e.triplet.pulse,
            label: e.triplet.label,
            time_number: e.time_number,
        })?;
    }
    if timeline.entries.is_empty() {
        w.write_record(["observer", "event_id", "node", "pulse_id", "label", "time_number"])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct EntropyRow {
    event_id: EventId,
    ds_internal: f64,
    ds_signal: f64,
    ds_vacuum: f64,
    total: f64,
    production_rate: f64,
    lifetime_s: f64,
}

pub fn write_entropy_csv<W: Write>(out: W, ledger: &EntropyLedger) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    for e in ledger.entries() {
        w.serialize(EntropyRow {
            event_id: e.decay_event_id,
            ds_internal: e.breakdown.ds_internal,
            ds_signal: e.breakdown.ds_signal,
            ds_vacuum: e.breakdown.ds_vacuum,
            total: e.breakdown.total(),
            production_rate: e.production_rate,
            lifetime_s: e.lifetime_s,
        })?;
    }
    if ledger.is_empty() {
        w.write_record([
            "event_id",
            "ds_internal",
            "ds_signal",
            "ds_vacuum",
            "total",
            "production_rate",
            "lifetime_s",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds the entropy ledger from the decay events of a trace.
pub fn entropy_from_trace(trace: &EventTrace, model: &EntropyModel) -> Result<EntropyLedger, IoError> {
    let mut ledger = EntropyLedger::new();
    for e in trace.of_kind(EventKind::Decay) {
        if let Payload::Decay {
            energy_ev, gamma_ev, ..
        } = e.payload
        {
            ledger.record_decay(e.id, energy_ev, gamma_ev, model)?;
        }
    }
    Ok(ledger)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClockSummary {
    pub clock: NodeId,
    pub violations: usize,
    pub resolution: ResolutionReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub events: usize,
    pub by_kind: BTreeMap<EventKind, usize>,
    pub decays: usize,
    pub second_law_violations: usize,
    pub clocks: Vec<ClockSummary>,
}

pub fn summarize(trace: &EventTrace, model: &EntropyModel) -> Result<TraceSummary, IoError> {
    let mut by_kind = BTreeMap::new();
    for e in trace.events() {
        *by_kind.entry(e.kind()).or_insert(0) += 1;
    }
    let ledger = entropy_from_trace(trace, model)?;
    let mut clocks = Vec::new();
    for clock in chronology::clocks_in_trace(trace) {
        let (_, labels) = chronology::label_absorptions(trace, clock, None).expect("clock ticked in trace");
        let (timeline, violations) = chronology::build_timeline(clock, labels, trace);
        clocks.push(ClockSummary {
            clock,
            violations: violations.len(),
            resolution: chronology::resolution_report(&timeline, trace),
        });
    }
    Ok(TraceSummary {
        events: trace.len(),
        by_kind,
        decays: ledger.len(),
        second_law_violations: ledger.violations().count(),
        clocks,
    })
}

impl fmt::Display for TraceSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "events: {}", self.events)?;
        for (kind, n) in &self.by_kind {
            writeln!(f, "  {kind:?}: {n}")?;
        }
        writeln!(f, "decays: {}", self.decays)?;
        writeln!(f, "second-law violations: {}", self.second_law_violations)?;
        for c in &self.clocks {
            let r = &c.resolution;
            writeln!(
                f,
                "clock {}: labels {} distinct {} ordered-pairs {} indistinguishable {} violations {}",
                c.clock,
                r.entries,
                r.distinct_labels,
                r.causally_ordered_pairs,
                r.indistinguishable_pairs,
                c.violations
            )?;
        }
        Ok(())
    }
}
