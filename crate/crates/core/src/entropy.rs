//! Per-decay entropy bookkeeping.
//!
//! Each decay is split into an internal term (the node loses `delta_e` at
//! the source temperature), a signal term (the environment receives
//! `delta_e` at its own temperature) and a constant vacuum term. Entropies
//! are in units of k_B. The production rate is taken as constant over one
//! decay, so the entropy-production lifetime is `total / rate`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::EventId;
use crate::quantum::{self, QuantumError, CODATA};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntropyError {
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error("temperatures must be finite and positive (source {source_k} K, environment {environment_k} K)")]
    InvalidTemperature { source_k: f64, environment_k: f64 },
    #[error("vacuum term must be finite, got {0}")]
    InvalidVacuumTerm(f64),
    #[error("decay event {0} already recorded")]
    DuplicateEvent(EventId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBreakdown {
    pub ds_internal: f64,
    pub ds_signal: f64,
    pub ds_vacuum: f64,
}

impl EntropyBreakdown {
    pub fn total(&self) -> f64 {
        self.ds_internal + self.ds_signal + self.ds_vacuum
    }

    /// Second-law admissible: total entropy change is non-negative.
    pub fn is_admissible(&self) -> bool {
        self.total() >= 0.0
    }
}

/// Heat-reservoir entropy model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyModel {
    source_temperature: f64,
    environment_temperature: f64,
    vacuum_term: f64,
}

impl EntropyModel {
    pub fn new(source_temperature: f64, environment_temperature: f64, vacuum_term: f64) -> Result<Self, EntropyError> {
        let ok = |t: f64| t.is_finite() && t > 0.0;
        if !ok(source_temperature) || !ok(environment_temperature) {
            return Err(EntropyError::InvalidTemperature {
                source_k: source_temperature,
                environment_k: environment_temperature,
            });
        }
        if !vacuum_term.is_finite() {
            return Err(EntropyError::InvalidVacuumTerm(vacuum_term));
        }
        Ok(Self {
            source_temperature,
            environment_temperature,
            vacuum_term,
        })
    }

    pub fn source_temperature(&self) -> f64 {
        self.source_temperature
    }

    pub fn environment_temperature(&self) -> f64 {
        self.environment_temperature
    }

    pub fn vacuum_term(&self) -> f64 {
        self.vacuum_term
    }
}

impl Default for EntropyModel {
    /// Hot source (5000 K) radiating into a room-temperature (300 K)
    /// environment, no vacuum contribution.
    fn default() -> Self {
        Self {
            source_temperature: 5000.0,
            environment_temperature: 300.0,
            vacuum_term: 0.0,
        }
    }
}

pub fn breakdown_for_decay(delta_e: f64, model: &EntropyModel) -> Result<EntropyBreakdown, EntropyError> {
    if !(delta_e > 0.0) {
        return Err(QuantumError::NonPositiveEnergy(delta_e).into());
    }
    Ok(EntropyBreakdown {
        ds_internal: -delta_e / (CODATA.k_b * model.source_temperature),
        ds_signal: delta_e / (CODATA.k_b * model.environment_temperature),
        ds_vacuum: model.vacuum_term,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateDiagnostic {
    /// Total entropy change is exactly zero; the rate is undefined.
    ZeroEntropyChange,
    /// The rate underflowed to a subnormal or zero value.
    RateUnderflow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyLifetime {
    pub seconds: f64,
    pub production_rate: f64,
    pub diagnostic: Option<RateDiagnostic>,
}

/// Lifetime of the entropy-production process, computed as
/// `total / (total / tau)` through the ledger path. When the rate is not
/// usable the decay lifetime is returned directly with a diagnostic.
pub fn entropy_lifetime(breakdown: &EntropyBreakdown, gamma: f64) -> Result<EntropyLifetime, EntropyError> {
    let tau = quantum::lifetime(gamma)?;
    let total = breakdown.total();
    if total == 0.0 {
        return Ok(EntropyLifetime {
            seconds: tau,
            production_rate: 0.0,
            diagnostic: Some(RateDiagnostic::ZeroEntropyChange),
        });
    }
    let production_rate = total / tau;
    if !production_rate.is_normal() {
        return Ok(EntropyLifetime {
            seconds: tau,
            production_rate,
            diagnostic: Some(RateDiagnostic::RateUnderflow),
        });
    }
    Ok(EntropyLifetime {
        seconds: total / production_rate,
        production_rate,
        diagnostic: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyLedgerEntry {
    pub decay_event_id: EventId,
    pub breakdown: EntropyBreakdown,
    pub lifetime_s: f64,
    pub production_rate: f64,
}

impl EntropyLedgerEntry {
    pub fn is_second_law_violating(&self) -> bool {
        !self.breakdown.is_admissible()
    }
}

/// Append-only ledger keyed by decay event id.
#[derive(Debug, Clone, Default)]
pub struct EntropyLedger {
    entries: Vec<EntropyLedgerEntry>,
    index: HashMap<EventId, usize>,
}

impl EntropyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_decay(
        &mut self,
        event_id: EventId,
        delta_e: f64,
        gamma: f64,
        model: &EntropyModel,
    ) -> Result<&EntropyLedgerEntry, EntropyError> {
        if self.index.contains_key(&event_id) {
            return Err(EntropyError::DuplicateEvent(event_id));
        }
        let breakdown = breakdown_for_decay(delta_e, model)?;
        let lt = entropy_lifetime(&breakdown, gamma)?;
        let entry = EntropyLedgerEntry {
            decay_event_id: event_id,
            breakdown,
            lifetime_s: lt.seconds,
            production_rate: lt.production_rate,
        };
        self.index.insert(event_id, self.entries.len());
        self.entries.push(entry);
        Ok(self.entries.last().expect("just pushed"))
    }

    pub fn get(&self, event_id: EventId) -> Option<&EntropyLedgerEntry> {
        self.index.get(&event_id).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[EntropyLedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn violations(&self) -> impl Iterator<Item = &EntropyLedgerEntry> {
        self.entries.iter().filter(|e| e.is_second_law_violating())
    }
}
