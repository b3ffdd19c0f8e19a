//! Time numbers from detector records.
//!
//! An absorption (the image state at a detector) is paired with the latest
//! standard-clock pulse at or before it. The pairing, a triplet of signal
//! event, pulse and counter label, is the only place a time number comes
//! from: `time_number = (label - counter_start) * period + first_tick`.
//! Timelines are ordered sets of these labels, checked against the causal
//! links recorded in the trace.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::engine::{EventKind, EventTrace, Payload, SimEvent};
use crate::network::{EventId, NodeId, PulseId, StandardClockSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChronologyError {
    #[error("event {0} is not an absorption")]
    NotAbsorption(EventId),
    #[error("absorption {event} precedes the first pulse of clock {clock}")]
    NoClockPulse { event: EventId, clock: NodeId },
    #[error("empty pulse history")]
    NoPulses,
    #[error("pulse history mixes clocks {0} and {1}")]
    MixedClocks(NodeId, NodeId),
    #[error("triplet was formed with clock {triplet_clock}, not clock {spec_clock}")]
    ClockMismatch { triplet_clock: NodeId, spec_clock: NodeId },
    #[error("no standard clock with id {0} in the trace")]
    UnknownClock(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockPulse {
    pub id: PulseId,
    pub clock: NodeId,
    pub counter: i64,
    pub engine_time: f64,
}

/// Pulses of one clock in trace order.
pub fn pulses_from_trace(trace: &EventTrace, clock: NodeId) -> Vec<ClockPulse> {
    trace
        .events()
        .iter()
        .filter(|e| e.node == clock)
        .filter_map(|e| match e.payload {
            Payload::ClockTick { pulse, counter, .. } => Some(ClockPulse {
                id: pulse,
                clock,
                counter,
                engine_time: e.engine_time,
            }),
            _ => None,
        })
        .collect()
}

/// Recovers a clock's spec from its first recorded pulse.
pub fn clock_spec_from_trace(trace: &EventTrace, clock: NodeId) -> Option<StandardClockSpec> {
    trace
        .events()
        .iter()
        .filter(|e| e.node == clock)
        .find_map(|e| match e.payload {
            Payload::ClockTick { counter, period_s, .. } => Some(StandardClockSpec {
                id: clock,
                period: period_s,
                first_tick: e.engine_time,
                counter_start: counter,
            }),
            _ => None,
        })
}

/// Ids of every clock that ticked in the trace, ascending.
pub fn clocks_in_trace(trace: &EventTrace) -> Vec<NodeId> {
    trace
        .of_kind(EventKind::ClockTick)
        .map(|e| e.node)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripletState {
    /// The absorption that created the image state.
    pub signal_state: EventId,
    pub clock: NodeId,
    pub pulse: PulseId,
    pub label: i64,
}

/// Pairs an absorption with the latest pulse at or before it. An arrival
/// exactly on a tick pairs with that tick.
pub fn form_triplet(absorption: &SimEvent, pulses: &[ClockPulse]) -> Result<TripletState, ChronologyError> {
    if absorption.kind() != EventKind::Absorption {
        return Err(ChronologyError::NotAbsorption(absorption.id));
    }
    let clock = pulses.first().ok_or(ChronologyError::NoPulses)?.clock;
    if let Some(other) = pulses.iter().find(|p| p.clock != clock) {
        return Err(ChronologyError::MixedClocks(clock, other.clock));
    }
    let idx = pulses.partition_point(|p| p.engine_time <= absorption.engine_time);
    let pulse = idx
        .checked_sub(1)
        .map(|i| &pulses[i])
        .ok_or(ChronologyError::NoClockPulse {
            event: absorption.id,
            clock,
        })?;
    Ok(TripletState {
        signal_state: absorption.id,
        clock,
        pulse: pulse.id,
        label: pulse.counter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeLabel {
    pub event: EventId,
    /// Seconds on the standard clock's scale.
    pub time_number: f64,
    pub triplet: TripletState,
}

pub fn extract_time(triplet: &TripletState, clock: &StandardClockSpec) -> Result<TimeLabel, ChronologyError> {
    if triplet.clock != clock.id {
        return Err(ChronologyError::ClockMismatch {
            triplet_clock: triplet.clock,
            spec_clock: clock.id,
        });
    }
    Ok(TimeLabel {
        event: triplet.signal_state,
        time_number: clock.time_for_counter(triplet.label),
        triplet: *triplet,
    })
}

/// Labels absorptions in `trace` with the clock `clock`. With `detector`
/// set, only absorptions at that node are labeled. Absorptions before the
/// first pulse are skipped.
pub fn label_absorptions(
    trace: &EventTrace,
    clock: NodeId,
    detector: Option<NodeId>,
) -> Result<(StandardClockSpec, Vec<TimeLabel>), ChronologyError> {
    let spec = clock_spec_from_trace(trace, clock).ok_or(ChronologyError::UnknownClock(clock))?;
    let pulses = pulses_from_trace(trace, clock);
    let mut labels = Vec::new();
    for ev in trace.of_kind(EventKind::Absorption) {
        if detector.is_some_and(|d| d != ev.node) {
            continue;
        }
        match form_triplet(ev, &pulses) {
            Ok(t) => labels.push(extract_time(&t, &spec)?),
            Err(ChronologyError::NoClockPulse { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok((spec, labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub observer: NodeId,
    /// Ascending by `(time_number, event)`.
    pub entries: Vec<TimeLabel>,
}

/// An ancestor labeled strictly later than one of its descendants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausalViolation {
    pub ancestor: EventId,
    pub descendant: EventId,
    pub ancestor_time: f64,
    pub descendant_time: f64,
}

/// `(ancestor index, descendant index)` pairs among timeline entries.
fn causal_pairs(entries: &[TimeLabel], trace: &EventTrace) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (d, entry) in entries.iter().enumerate() {
        let ancestors = trace.ancestors(entry.event);
        for (a, other) in entries.iter().enumerate() {
            if a != d && ancestors.contains(&other.event) {
                pairs.push((a, d));
            }
        }
    }
    pairs
}

pub fn build_timeline(
    observer: NodeId,
    mut labels: Vec<TimeLabel>,
    trace: &EventTrace,
) -> (Timeline, Vec<CausalViolation>) {
    labels.sort_by(|a, b| a.time_number.total_cmp(&b.time_number).then(a.event.cmp(&b.event)));
    let violations = causal_pairs(&labels, trace)
        .into_iter()
        .filter(|&(a, d)| labels[a].time_number > labels[d].time_number)
        .map(|(a, d)| CausalViolation {
            ancestor: labels[a].event,
            descendant: labels[d].event,
            ancestor_time: labels[a].time_number,
            descendant_time: labels[d].time_number,
        })
        .collect();
    (
        Timeline {
            observer,
            entries: labels,
        },
        violations,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ResolutionReport {
    pub entries: usize,
    pub distinct_labels: usize,
    pub causally_ordered_pairs: usize,
    /// Causally ordered pairs that share one time number.
    pub indistinguishable_pairs: usize,
}

pub fn resolution_report(timeline: &Timeline, trace: &EventTrace) -> ResolutionReport {
    let entries = &timeline.entries;
    let pairs = causal_pairs(entries, trace);
    let mut distinct: Vec<f64> = entries.iter().map(|e| e.time_number).collect();
    distinct.dedup();
    ResolutionReport {
        entries: entries.len(),
        distinct_labels: distinct.len(),
        causally_ordered_pairs: pairs.len(),
        indistinguishable_pairs: pairs
            .iter()
            .filter(|&&(a, d)| entries[a].time_number == entries[d].time_number)
            .count(),
    }
}
