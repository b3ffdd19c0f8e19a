//! Two-level node energetics and the Planck mapping from decay rate to lifetime.
//!
//! Energies are in eV, durations in seconds, wavelengths in nm and distances
//! in m. The decay rate `gamma` is supplied directly as an energy; no
//! Hamiltonian matrix elements are evaluated here.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed physical constants shared by every module for the whole run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, eV·s.
    pub hbar: f64,
    /// Planck constant times the speed of light, eV·nm.
    pub hc: f64,
    /// Speed of light in vacuum, m/s.
    pub c: f64,
    /// Boltzmann constant, eV/K.
    pub k_b: f64,
}

/// CODATA 2018 values.
pub const CODATA: PhysicalConstants = PhysicalConstants {
    hbar: 6.582119569e-16,
    hc: 1239.841984,
    c: 2.99792458e8,
    k_b: 8.617333262e-5,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("excited level ({excited} eV) must lie strictly above ground level ({ground} eV)")]
    DegenerateLevels { ground: f64, excited: f64 },
    #[error("energy level {label:?} must be finite and non-negative, got {energy}")]
    InvalidLevel { label: String, energy: f64 },
    #[error("decay rate must be finite and positive, got {0}")]
    InvalidGamma(f64),
    #[error("energy must be positive, got {0} eV")]
    NonPositiveEnergy(f64),
    #[error("configuration has no decay channel (gamma = {0:?})")]
    StableConfiguration(Option<f64>),
    #[error("node is not excited")]
    NotExcited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel {
    pub label: String,
    pub energy: f64,
}

impl EnergyLevel {
    pub fn new(label: impl Into<String>, energy: f64) -> Result<Self, QuantumError> {
        let label = label.into();
        if !(energy.is_finite() && energy >= 0.0) {
            return Err(QuantumError::InvalidLevel { label, energy });
        }
        Ok(Self { label, energy })
    }
}

/// A ground/excited pair plus an optional decay rate.
///
/// A spec without `gamma` describes a permanently stable node: once excited
/// it never decays.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelSpec {
    ground: EnergyLevel,
    excited: EnergyLevel,
    gamma: Option<f64>,
}

impl TwoLevelSpec {
    pub fn new(ground: EnergyLevel, excited: EnergyLevel, gamma: Option<f64>) -> Result<Self, QuantumError> {
        if excited.energy <= ground.energy {
            return Err(QuantumError::DegenerateLevels {
                ground: ground.energy,
                excited: excited.energy,
            });
        }
        if let Some(g) = gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(QuantumError::InvalidGamma(g));
            }
        }
        Ok(Self { ground, excited, gamma })
    }

    /// Shorthand for a spec with levels labeled `ground` and `excited`.
    pub fn from_energies(ground_ev: f64, excited_ev: f64, gamma: Option<f64>) -> Result<Self, QuantumError> {
        Self::new(
            EnergyLevel::new("ground", ground_ev)?,
            EnergyLevel::new("excited", excited_ev)?,
            gamma,
        )
    }

    pub fn ground(&self) -> &EnergyLevel {
        &self.ground
    }

    pub fn excited(&self) -> &EnergyLevel {
        &self.excited
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn signal_energy(&self) -> f64 {
        signal_energy(self)
    }

    /// Lifetime of the excited level, or `StableConfiguration` when the
    /// spec has no decay channel.
    pub fn lifetime(&self) -> Result<f64, QuantumError> {
        match self.gamma {
            Some(g) => lifetime(g),
            None => Err(QuantumError::StableConfiguration(None)),
        }
    }
}

/// Energy carried by the signal a decay emits: `E* - E0`.
pub fn signal_energy(spec: &TwoLevelSpec) -> f64 {
    spec.excited.energy - spec.ground.energy
}

/// Photon wavelength in nm for a transition energy, `hc / delta_e`.
pub fn wavelength_of(delta_e: f64) -> Result<f64, QuantumError> {
    if !(delta_e > 0.0) {
        return Err(QuantumError::NonPositiveEnergy(delta_e));
    }
    Ok(CODATA.hc / delta_e)
}

/// Decay lifetime `hbar / gamma` in seconds.
pub fn lifetime(gamma: f64) -> Result<f64, QuantumError> {
    if !(gamma > 0.0) {
        return Err(QuantumError::StableConfiguration(Some(gamma)));
    }
    Ok(CODATA.hbar / gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExcitationId(pub u64);

impl std::fmt::Display for ExcitationId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Allocator for excitation instance ids. Every id is handed out once.
#[derive(Debug, Default)]
pub struct ExcitationIds {
    next: u64,
}

impl ExcitationIds {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self) -> ExcitationId {
        let id = ExcitationId(self.next);
        self.next += 1;
        id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfigurationState {
    #[default]
    Ground,
    Excited(ExcitationId),
}

impl ConfigurationState {
    pub fn is_excited(&self) -> bool {
        matches!(self, ConfigurationState::Excited(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbsorbOutcome {
    /// The signal was consumed and the node now holds this excitation.
    Excited(ExcitationId),
    /// Off resonance or already occupied; signal and state are unchanged.
    PassThrough,
}

/// Resonant absorption. A ground-state node whose gap matches the incoming
/// energy within `tolerance` becomes excited with a fresh instance id.
/// Anything else passes through.
pub fn absorb(
    state: &mut ConfigurationState,
    spec: &TwoLevelSpec,
    signal_energy_in: f64,
    tolerance: f64,
    ids: &mut ExcitationIds,
) -> AbsorbOutcome {
    debug_assert!(tolerance >= 0.0);
    if state.is_excited() {
        return AbsorbOutcome::PassThrough;
    }
    if (signal_energy_in - signal_energy(spec)).abs() <= tolerance {
        let id = ids.fresh();
        *state = ConfigurationState::Excited(id);
        AbsorbOutcome::Excited(id)
    } else {
        AbsorbOutcome::PassThrough
    }
}

/// Direct excitation from the environment, bypassing the resonance check.
/// Returns `None` when the node is already occupied.
pub fn excite(state: &mut ConfigurationState, ids: &mut ExcitationIds) -> Option<ExcitationId> {
    if state.is_excited() {
        return None;
    }
    let id = ids.fresh();
    *state = ConfigurationState::Excited(id);
    Some(id)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decayed {
    pub retired: ExcitationId,
    pub emitted_energy: f64,
}

/// Irreversible decay to the ground level. The state is left in `Ground`
/// and the retired instance id cannot decay again.
pub fn decay(state: &mut ConfigurationState, spec: &TwoLevelSpec) -> Result<Decayed, QuantumError> {
    match *state {
        ConfigurationState::Ground => Err(QuantumError::NotExcited),
        ConfigurationState::Excited(id) => {
            *state = ConfigurationState::Ground;
            Ok(Decayed {
                retired: id,
                emitted_energy: signal_energy(spec),
            })
        }
    }
}
