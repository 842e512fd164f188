use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum;
use crate::TOL;

/// Two-state (a spin on S²) or four-state (two entangled bits) systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Two,
    Four,
}

impl Level {
    pub fn hilbert_dim(self) -> usize {
        match self {
            Level::Two => 2,
            Level::Four => 4,
        }
    }

    pub fn bloch_len(self) -> usize {
        match self {
            Level::Two => 3,
            Level::Four => 15,
        }
    }

    /// Largest value of Σρ_k² (reached by pure states).
    pub fn max_purity(self) -> f64 {
        match self {
            Level::Two => 1.0,
            Level::Four => 3.0,
        }
    }

    pub fn from_bloch_len(n: usize) -> Result<Level> {
        match n {
            3 => Ok(Level::Two),
            15 => Ok(Level::Four),
            got => Err(Error::DimensionMismatch { expected: 3, got }),
        }
    }

    pub fn from_hilbert_dim(n: usize) -> Result<Level> {
        match n {
            2 => Ok(Level::Two),
            4 => Ok(Level::Four),
            got => Err(Error::DimensionMismatch { expected: 2, got }),
        }
    }
}

/// The reduced state: expectation values ρ_k of the basis observables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBloch", into = "RawBloch")]
pub struct BlochState {
    level: Level,
    rho: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawBloch {
    rho: Vec<f64>,
}

impl TryFrom<RawBloch> for BlochState {
    type Error = Error;
    fn try_from(raw: RawBloch) -> Result<Self> {
        BlochState::new(raw.rho)
    }
}

impl From<BlochState> for RawBloch {
    fn from(s: BlochState) -> Self {
        RawBloch { rho: s.rho }
    }
}

impl BlochState {
    /// Builds a state from 3 or 15 components, checking the purity bound and,
    /// for four-state systems, positivity of the associated density matrix.
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        let level = Level::from_bloch_len(rho.len())?;
        let state = BlochState { level, rho };
        state.validate()?;
        Ok(state)
    }

    pub fn two(rho: [f64; 3]) -> Result<Self> {
        Self::new(rho.to_vec())
    }

    /// The maximally mixed state.
    pub fn center(level: Level) -> Self {
        BlochState {
            level,
            rho: vec![0.0; level.bloch_len()],
        }
    }

    pub(crate) fn from_parts_unchecked(level: Level, rho: Vec<f64>) -> Self {
        debug_assert_eq!(rho.len(), level.bloch_len());
        BlochState { level, rho }
    }

    fn validate(&self) -> Result<()> {
        if self.rho.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite component".into()));
        }
        let p = self.purity();
        if p > self.level.max_purity() + TOL {
            return Err(Error::ConstraintViolation(format!(
                "purity {p} exceeds {}",
                self.level.max_purity()
            )));
        }
        if self.level == Level::Four {
            let m = quantum::density_matrix_raw(self);
            let (vals, _) = quantum::hermitian_eigen(&m)?;
            for v in vals {
                if !(-TOL..=1.0 + TOL).contains(&v) {
                    return Err(Error::ConstraintViolation(format!(
                        "density matrix eigenvalue {v} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// ρ_k with the usual 1-based label.
    pub fn component(&self, k: usize) -> f64 {
        self.rho[k - 1]
    }

    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|x| x * x).sum()
    }
}

pub fn purity(state: &BlochState) -> f64 {
    state.purity()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
