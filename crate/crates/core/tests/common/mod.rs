#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use fcn::engine::Payload;
use fcn::io::{parse_network, NetworkDocument};
use fcn::network::{validate_network, Arc, ArcId, ClockNode, NodeId, StandardClockSpec};
use fcn::quantum::{TwoLevelSpec, CODATA};
use fcn::{EventKind, EventTrace, Network};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn chain_document() -> NetworkDocument {
    parse_network(&std::fs::read(fixture("chain.net.json")).unwrap()).unwrap()
}

/// The chain fixture without its standard clock.
pub fn chain_without_clock() -> (Network, Vec<(NodeId, f64)>) {
    let mut doc = chain_document();
    doc.standard_clocks.clear();
    (doc.to_network().unwrap(), doc.injections())
}

pub struct RandomCase {
    pub network: Network,
    pub injections: Vec<(NodeId, f64)>,
    pub clocks: Vec<StandardClockSpec>,
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    rng.next_u64() % n
}

/// A random network of at most `max_nodes` nodes. Two gap values are mixed
/// so that some signals are off resonance; some nodes are stable.
pub fn random_case(seed: u64, max_nodes: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1 + below(&mut rng, max_nodes);
    let nodes: Vec<ClockNode> = (0..n)
        .map(|i| {
            let gap = if unit(&mut rng) < 0.8 { 1.5 } else { 2.0 };
            let gamma = (unit(&mut rng) < 0.8).then(|| CODATA.hbar / (0.2 + 2.8 * unit(&mut rng)));
            let spec = TwoLevelSpec::from_energies(0.0, gap, gamma).unwrap();
            ClockNode::new(NodeId(i), spec).with_position([unit(&mut rng), 0.0, 0.0])
        })
        .collect();

    let mut arcs = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s != t && unit(&mut rng) < 0.15 {
                let delay = if unit(&mut rng) < 0.1 {
                    0.0
                } else {
                    2.0 * unit(&mut rng)
                };
                arcs.push(Arc {
                    id: ArcId(arcs.len() as u64),
                    source: NodeId(s),
                    target: NodeId(t),
                    distance: delay * CODATA.c,
                });
            }
        }
    }

    let mut clocks = Vec::new();
    let mut used = HashSet::new();
    for _ in 0..below(&mut rng, 3) {
        let at = below(&mut rng, n);
        if used.insert(at) {
            clocks.push(StandardClockSpec {
                id: NodeId(at),
                period: 0.1 + 1.9 * unit(&mut rng),
                first_tick: unit(&mut rng),
                counter_start: below(&mut rng, 10) as i64 - 5,
            });
        }
    }

    let mut injections: Vec<_> = (0..1 + below(&mut rng, 4))
        .map(|_| (NodeId(below(&mut rng, n)), 2.0 * unit(&mut rng)))
        .collect();
    injections.sort_by(|a, b| a.1.total_cmp(&b.1));

    let network = validate_network(nodes, arcs, clocks.clone()).unwrap();
    RandomCase {
        network,
        injections,
        clocks,
    }
}

/// Same network with every standard clock's period scaled.
pub fn with_clock_periods(network: &Network, scale: f64) -> Network {
    let clocks = network
        .clocks()
        .map(|c| StandardClockSpec {
            period: c.period * scale,
            ..*c
        })
        .collect();
    validate_network(
        network.nodes().cloned().collect(),
        network.arcs().copied().collect(),
        clocks,
    )
    .unwrap()
}

/// Checks the structural trace invariants: ordering, decay-once, causal
/// roots, and exact arrival arithmetic and energy conservation.
pub fn check_trace(network: &Network, trace: &EventTrace) -> Result<(), String> {
    let events = trace.events();
    for w in events.windows(2) {
        if !(w[0].id < w[1].id && w[0].engine_time <= w[1].engine_time) {
            return Err(format!("trace not ordered at {:?} / {:?}", w[0].id, w[1].id));
        }
    }

    let mut decayed = HashSet::new();
    let mut origin: BTreeMap<fcn::network::ExcitationId, EventKind> = BTreeMap::new();
    for e in events {
        for p in &e.causal_parents {
            let parent = trace
                .get(*p)
                .ok_or(format!("event {} has unknown parent {}", e.id, p))?;
            if !(parent.engine_time < e.engine_time || (parent.engine_time == e.engine_time && parent.id < e.id)) {
                return Err(format!("parent {} does not precede {}", p, e.id));
            }
        }
        match e.payload {
            Payload::ExternalExcitation { excitation } => {
                if !e.causal_parents.is_empty() {
                    return Err(format!("injection {} has parents", e.id));
                }
                origin.insert(excitation, EventKind::ExternalExcitation);
            }
            Payload::Decay {
                excitation, energy_ev, ..
            } => {
                if !decayed.insert(excitation) {
                    return Err(format!("excitation {excitation} decayed twice"));
                }
                let [p] = e.causal_parents[..] else {
                    return Err(format!("decay {} must have exactly one parent", e.id));
                };
                let parent = trace.get(p).unwrap();
                if !matches!(parent.kind(), EventKind::ExternalExcitation | EventKind::Absorption)
                    || parent.excitation() != Some(excitation)
                    || parent.node != e.node
                {
                    return Err(format!("decay {} has parent {} of the wrong kind or instance", e.id, p));
                }
                if !origin.contains_key(&excitation) {
                    return Err(format!("decay {} of an excitation never created", e.id));
                }
                let spec = &network.node(e.node).unwrap().spec;
                if energy_ev != spec.signal_energy() {
                    return Err(format!("decay {} emitted {} not the gap", e.id, energy_ev));
                }
            }
            Payload::Emission { arc, energy_ev, .. } => {
                let [p] = e.causal_parents[..] else {
                    return Err(format!("emission {} must have exactly one parent", e.id));
                };
                let parent = trace.get(p).unwrap();
                if parent.kind() != EventKind::Decay
                    || parent.engine_time != e.engine_time
                    || parent.energy_ev() != Some(energy_ev)
                    || network.arc(arc).unwrap().source != e.node
                {
                    return Err(format!("emission {} inconsistent with decay {}", e.id, p));
                }
            }
            Payload::Absorption { .. } | Payload::PassThrough { .. } if !e.causal_parents.is_empty() => {
                let [p] = e.causal_parents[..] else {
                    return Err(format!("arrival {} must have exactly one parent", e.id));
                };
                let emission = trace.get(p).unwrap();
                let (Some(arc_id), Some(energy)) = (e.arc(), e.energy_ev()) else {
                    return Err(format!("arrival {} lacks arc or energy", e.id));
                };
                if emission.kind() != EventKind::Emission || emission.arc() != Some(arc_id) {
                    return Err(format!("arrival {} not caused by an emission on its arc", e.id));
                }
                let arc = network.arc(arc_id).unwrap();
                // Same operation order as the engine: emitted_at + distance / c.
                let expected = emission.engine_time + arc.distance / CODATA.c;
                if e.engine_time.to_bits() != expected.to_bits() {
                    return Err(format!(
                        "arrival {} at {} but expected {}",
                        e.id, e.engine_time, expected
                    ));
                }
                if emission.energy_ev() != Some(energy) {
                    return Err(format!("arrival {} energy {} differs from emission", e.id, energy));
                }
                if arc.target != e.node {
                    return Err(format!("arrival {} at wrong node", e.id));
                }
                if let Some(excitation) = e.excitation() {
                    origin.insert(excitation, EventKind::Absorption);
                }
            }
            Payload::Absorption { .. } => return Err(format!("absorption {} has no cause", e.id)),
            _ => {}
        }
    }

    // Every causal chain bottoms out in an environmental injection.
    for e in trace.of_kind(EventKind::Decay) {
        let roots = trace.ancestors(e.id);
        if !roots
            .iter()
            .any(|id| trace.get(*id).unwrap().kind() == EventKind::ExternalExcitation)
        {
            return Err(format!("decay {} has no injection in its causal past", e.id));
        }
    }
    Ok(())
}

/// One-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value, `sqrt(-ln(alpha / 2) / 2) / sqrt(n)`.
pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

fn labels_by_excitation(
    trace: &EventTrace,
    clock: NodeId,
) -> Result<BTreeMap<fcn::network::ExcitationId, (f64, f64)>, String> {
    let (_, labels) = fcn::chronology::label_absorptions(trace, clock, None).map_err(|e| e.to_string())?;
    Ok(labels
        .iter()
        .map(|l| {
            let ev = trace.get(l.event).unwrap();
            (ev.excitation().unwrap(), (ev.engine_time, l.time_number))
        })
        .collect())
}

/// Per-clock label checks on one traced run: causal order embedding,
/// monotonicity in engine order, and determinism of triplet formation.
pub fn check_chronology(network: &Network, trace: &EventTrace) -> Result<(), String> {
    use fcn::chronology::{build_timeline, label_absorptions};
    for clock in network.clocks() {
        for detector in [None, Some(clock.id)] {
            let (_, labels) = label_absorptions(trace, clock.id, detector).map_err(|e| e.to_string())?;
            let (_, again) = label_absorptions(trace, clock.id, detector).map_err(|e| e.to_string())?;
            if labels != again {
                return Err("triplet formation is not deterministic".into());
            }
            let (timeline, violations) = build_timeline(clock.id, labels, trace);
            if !violations.is_empty() {
                return Err(format!("clock {}: causal violations {violations:?}", clock.id));
            }
            let entries = &timeline.entries;
            for a in entries {
                for b in entries {
                    let (ta, tb) = (
                        trace.get(a.event).unwrap().engine_time,
                        trace.get(b.event).unwrap().engine_time,
                    );
                    if ta < tb && a.time_number > b.time_number {
                        return Err(format!("labels invert engine order: {a:?} / {b:?}"));
                    }
                    // One full period apart (with rounding slack) must separate labels.
                    if tb - ta >= clock.period * (1.0 + 1e-9) + 1e-12 && a.time_number >= b.time_number {
                        return Err(format!("labels a period apart coincide: {a:?} / {b:?}"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Reruns `case` with every clock period halved and checks that the
/// indistinguishable-pair count never grows and that distinctly labeled
/// absorptions keep their relative order.
pub fn check_refinement(case: &RandomCase, config: fcn::RunConfig) -> Result<(), String> {
    use fcn::chronology::{build_timeline, label_absorptions, resolution_report};
    let coarse = fcn::simulate(case.network.clone(), &case.injections, config).map_err(|e| e.to_string())?;
    let fine_net = with_clock_periods(&case.network, 0.5);
    let fine = fcn::simulate(fine_net, &case.injections, config).map_err(|e| e.to_string())?;
    for clock in case.network.clocks() {
        let count = |trace: &EventTrace| -> Result<usize, String> {
            let (_, labels) = label_absorptions(trace, clock.id, None).map_err(|e| e.to_string())?;
            let (tl, _) = build_timeline(clock.id, labels, trace);
            Ok(resolution_report(&tl, trace).indistinguishable_pairs)
        };
        let (c, f) = (count(&coarse.trace)?, count(&fine.trace)?);
        if f > c {
            return Err(format!("clock {}: halving the period raised ties {c} -> {f}", clock.id));
        }
        let cl = labels_by_excitation(&coarse.trace, clock.id)?;
        let fl = labels_by_excitation(&fine.trace, clock.id)?;
        for (x, (tx, lx)) in &cl {
            for (y, (ty, ly)) in &cl {
                if lx < ly {
                    let (Some((ftx, flx)), Some((fty, fly))) = (fl.get(x), fl.get(y)) else {
                        return Err("refined run lost an absorption".into());
                    };
                    if ftx != tx || fty != ty || flx >= fly {
                        return Err(format!("refinement reordered {x} and {y}"));
                    }
                }
            }
        }
    }
    Ok(())
}
