//! Probabilistic two-level observables and the random observable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Ensemble, MicroState};
use crate::state::{dot, norm, BlochState, Level};
use crate::TOL;

/// Direction e (3 or 15 components) and offset e₀. In micro-state f the mean
/// value is e·f + e₀; with |e| = 1 and e₀ = 0 the outcomes are ±1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawObservable", into = "RawObservable")]
pub struct TwoLevelObservable {
    level: Level,
    e: Vec<f64>,
    e0: f64,
}

#[derive(Serialize, Deserialize)]
struct RawObservable {
    e: Vec<f64>,
    #[serde(default)]
    e0: f64,
}

impl TryFrom<RawObservable> for TwoLevelObservable {
    type Error = Error;
    fn try_from(raw: RawObservable) -> Result<Self> {
        TwoLevelObservable::new(raw.e, raw.e0)
    }
}

impl From<TwoLevelObservable> for RawObservable {
    fn from(a: TwoLevelObservable) -> Self {
        RawObservable { e: a.e, e0: a.e0 }
    }
}

impl TwoLevelObservable {
    pub fn new(e: Vec<f64>, e0: f64) -> Result<Self> {
        let level = Level::from_bloch_len(e.len())?;
        if e.iter().any(|x| !x.is_finite()) || !e0.is_finite() {
            return Err(Error::InvalidParameter("non-finite observable".into()));
        }
        Ok(TwoLevelObservable { level, e, e0 })
    }

    /// Unit direction, zero offset.
    pub fn spin(e: Vec<f64>) -> Result<Self> {
        let a = Self::new(e, 0.0)?;
        if (a.norm() - 1.0).abs() > TOL {
            return Err(Error::NotASpin);
        }
        Ok(a)
    }

    /// A⁽ᵏ⁾ with 1-based index.
    pub fn basis(level: Level, k: usize) -> Self {
        let mut e = vec![0.0; level.bloch_len()];
        e[k - 1] = 1.0;
        TwoLevelObservable { level, e, e0: 0.0 }
    }

    /// Spin in the 1-2 plane at angle φ: e = (cos φ, sin φ, 0).
    pub fn planar(phi: f64) -> Self {
        TwoLevelObservable {
            level: Level::Two,
            e: vec![phi.cos(), phi.sin(), 0.0],
            e0: 0.0,
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.e)
    }

    pub fn is_spin(&self) -> bool {
        self.e0 == 0.0 && (self.norm() - 1.0).abs() <= TOL
    }

    pub(crate) fn require_spin(&self) -> Result<()> {
        if self.is_spin() {
            Ok(())
        } else {
            Err(Error::NotASpin)
        }
    }

    /// (e₀ + |e|, e₀ − |e|).
    pub fn spectrum(&self) -> (f64, f64) {
        let n = self.norm();
        (self.e0 + n, self.e0 - n)
    }

    pub fn scale(&self, lambda: f64) -> Self {
        TwoLevelObservable {
            level: self.level,
            e: self.e.iter().map(|x| lambda * x).collect(),
            e0: lambda * self.e0,
        }
    }

    pub fn shift(&self, s: f64) -> Self {
        TwoLevelObservable {
            level: self.level,
            e: self.e.clone(),
            e0: self.e0 + s,
        }
    }

    /// λ₁A + λ₂B: directions and offsets add linearly.
    pub fn combine(l1: f64, a: &Self, l2: f64, b: &Self) -> Result<Self> {
        check_level(a.level, b.level)?;
        Ok(TwoLevelObservable {
            level: a.level,
            e: a.e.iter().zip(&b.e).map(|(x, y)| l1 * x + l2 * y).collect(),
            e0: l1 * a.e0 + l2 * b.e0,
        })
    }

    pub fn mean_in_state(&self, f: &MicroState) -> Result<f64> {
        check_level(self.level, f.level())?;
        Ok(dot(&self.e, &f.bloch_coords()) + self.e0)
    }

    /// Probability of outcome +1 in micro-state f: ½(1 + e·f).
    pub fn prob_plus(&self, f: &MicroState) -> Result<f64> {
        self.require_spin()?;
        Ok(0.5 * (1.0 + self.mean_in_state(f)?))
    }

    pub fn prob_minus(&self, f: &MicroState) -> Result<f64> {
        self.require_spin()?;
        Ok(0.5 * (1.0 - self.mean_in_state(f)?))
    }

    /// Q-th moment over an ensemble. Outcomes are ±1, so even moments are 1.
    pub fn moment(&self, ensemble: &Ensemble, q: u32) -> Result<f64> {
        self.require_spin()?;
        if q == 0 {
            return Err(Error::InvalidParameter(
                "moment order must be positive".into(),
            ));
        }
        if q.is_multiple_of(2) {
            return Ok(1.0);
        }
        let mut s = 0.0;
        for (m, p) in ensemble.points() {
            s += p * self.mean_in_state(m)?;
        }
        Ok(s)
    }

    /// ⟨A⟩ = e·ρ + e₀.
    pub fn expectation(&self, state: &BlochState) -> Result<f64> {
        check_level(self.level, state.level())?;
        Ok(dot(&self.e, state.rho()) + self.e0)
    }

    /// The state whose Bloch vector is ±e, i.e. the classical eigenstate.
    pub fn eigenstate(&self, sign: i8) -> Result<BlochState> {
        self.require_spin()?;
        if self.level != Level::Two {
            return Err(Error::WrongManifold(
                "unique eigenstates exist for two-state spins only",
            ));
        }
        let s = f64::from(sign.signum());
        Ok(BlochState::from_parts_unchecked(
            self.level,
            self.e.iter().map(|x| s * x).collect(),
        ))
    }
}

pub(crate) fn check_level(a: Level, b: Level) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a.bloch_len(),
            got: b.bloch_len(),
        });
    }
    Ok(())
}

/// R: mean 0 and square 1 in every micro-state; it has no eigenstates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RandomObservable;

impl RandomObservable {
    pub fn mean_in_state(&self, _f: &MicroState) -> f64 {
        0.0
    }

    pub fn second_moment(&self, _f: &MicroState) -> f64 {
        1.0
    }

    pub fn prob_plus(&self, _f: &MicroState) -> f64 {
        0.5
    }
}

/// Anything that can appear as a factor of a conditional product.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    Spin(TwoLevelObservable),
    Random,
    /// The constant 1.
    Unit,
    /// Mean function ½(1 + B̄)·plus − ½(1 − B̄)·minus, where `plus` and
    /// `minus` are the means in the two eigenstates of the condition B.
    Conditional {
        plus: f64,
        minus: f64,
        condition: TwoLevelObservable,
    },
}

impl From<TwoLevelObservable> for Observable {
    fn from(a: TwoLevelObservable) -> Self {
        Observable::Spin(a)
    }
}

impl From<RandomObservable> for Observable {
    fn from(_: RandomObservable) -> Self {
        Observable::Random
    }
}

impl Observable {
    /// Mean value in a two-state reduced state (or any state for spins).
    pub fn mean(&self, state: &BlochState) -> Result<f64> {
        match self {
            Observable::Spin(a) => a.expectation(state),
            Observable::Random => Ok(0.0),
            Observable::Unit => Ok(1.0),
            Observable::Conditional {
                plus,
                minus,
                condition,
            } => {
                let b = condition.expectation(state)?;
                Ok(0.5 * (1.0 + b) * plus - 0.5 * (1.0 - b) * minus)
            }
        }
    }

    pub fn mean_in_state(&self, f: &MicroState) -> Result<f64> {
        match self {
            Observable::Spin(a) => a.mean_in_state(f),
            Observable::Random => Ok(0.0),
            Observable::Unit => Ok(1.0),
            Observable::Conditional {
                plus,
                minus,
                condition,
            } => {
                let b = condition.mean_in_state(f)?;
                Ok(0.5 * (1.0 + b) * plus - 0.5 * (1.0 - b) * minus)
            }
        }
    }

    pub fn as_spin(&self) -> Option<&TwoLevelObservable> {
        match self {
            Observable::Spin(a) => Some(a),
            _ => None,
        }
    }
}

/// ½(1 + γ√P f·e): probability for the basic state γ of a Stern-Gerlach
/// split along e, for a beam with direction f and purity P.
pub fn basic_state_probability(f: [f64; 3], e: [f64; 3], purity: f64, gamma: i8) -> Result<f64> {
    if !(0.0..=1.0).contains(&purity) {
        return Err(Error::InvalidParameter(format!(
            "purity {purity} outside [0, 1]"
        )));
    }
    for v in [&f, &e] {
        if (norm(v) - 1.0).abs() > TOL {
            return Err(Error::NotNormalized {
                what: "|direction|",
                value: norm(v),
                expected: 1.0,
            });
        }
    }
    Ok(0.5 * (1.0 + f64::from(gamma.signum()) * purity.sqrt() * dot(&f, &e)))
}
