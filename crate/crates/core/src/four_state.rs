//! Two bits: entangled states, rotated-spin correlations, Bell's
//! inequality, interference and particle exchange.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::correlations::{classical_correlation_assigned, reduce_on_outcome};
use crate::dynamics::{self, TimeSpan};
use crate::error::{Error, Result};
use crate::manifold::{basis_psi, c64, extend_to_substates, Ensemble, MicroState};
use crate::quantum::{
    bloch_from_density, qm_expectation, CMatrix, CVector, DensityMatrix, LBasis, Operator,
    WaveFunction, C64,
};
use crate::state::{BlochState, Level};
use crate::TOL;

/// T̂_m = L_m.
pub fn bit_observable(m: usize) -> Result<Operator> {
    if !(1..=15).contains(&m) {
        return Err(Error::InvalidParameter(format!("bit observable {m}")));
    }
    Operator::new(LBasis::standard().get(m).clone())
}

/// ⟨T_m⟩ three ways: Σ_f p(f) f_m, the Bloch component ρ_m, and tr(L_m ρ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitExpectation {
    pub ensemble: f64,
    pub bloch: f64,
    pub trace: f64,
}

pub fn bit_expectation(ensemble: &Ensemble, m: usize) -> Result<BitExpectation> {
    if ensemble.level() != Level::Four {
        return Err(Error::WrongManifold(
            "bit observables act on four-state ensembles",
        ));
    }
    let op = bit_observable(m)?;
    let direct = ensemble
        .points()
        .iter()
        .map(|(f, p)| p * f.coords()[m - 1])
        .sum();
    let state = ensemble.reduce()?;
    let rho = crate::quantum::density_from_bloch(&state);
    Ok(BitExpectation {
        ensemble: direct,
        bloch: state.component(m),
        trace: qm_expectation(&op, &rho)?,
    })
}

/// Probabilities of the outcomes (++), (+−), (−+), (−−) of bits 1 and 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    pub pp: f64,
    pub pm: f64,
    pub mp: f64,
    pub mm: f64,
}

impl OutcomeTable {
    /// (⟨T₁⟩, ⟨T₂⟩, ⟨T₃⟩).
    pub fn expectations(&self) -> [f64; 3] {
        let OutcomeTable { pp, pm, mp, mm } = *self;
        [pp + pm - mp - mm, pp - pm + mp - mm, pp - pm - mp + mm]
    }

    pub fn total(&self) -> f64 {
        self.pp + self.pm + self.mp + self.mm
    }
}

/// Inverts the linear relation between (W₊₊, W₊₋, W₋₊, W₋₋) and ⟨T₁,₂,₃⟩.
pub fn outcomes_from_t(t1: f64, t2: f64, t3: f64) -> Result<OutcomeTable> {
    let w = OutcomeTable {
        pp: 0.25 * (1.0 + t1 + t2 + t3),
        pm: 0.25 * (1.0 + t1 - t2 - t3),
        mp: 0.25 * (1.0 - t1 + t2 - t3),
        mm: 0.25 * (1.0 - t1 - t2 + t3),
    };
    for x in [w.pp, w.pm, w.mp, w.mm] {
        if !(x >= -TOL) {
            return Err(Error::ConstraintViolation(format!(
                "({t1}, {t2}, {t3}) implies outcome probability {x}"
            )));
        }
    }
    Ok(w)
}

/// ψ_± = (ψ₂ ± ψ₃)/√2.
pub fn entangled_wavefunction(sign: i8) -> Result<WaveFunction> {
    let s = f64::from(entangled_sign(sign)?);
    WaveFunction::new(CVector::from_vec(vec![
        c64(0.0),
        c64(FRAC_1_SQRT_2),
        c64(s * FRAC_1_SQRT_2),
        c64(0.0),
    ]))
}

/// Built entry by entry: |ψ_±⟩⟨ψ_±| has entries ±½ exactly, which squaring
/// the rounded 1/√2 amplitudes would miss by an ulp.
pub fn entangled_state(sign: i8) -> Result<DensityMatrix> {
    let s = f64::from(entangled_sign(sign)?);
    let mut m = CMatrix::zeros(4, 4);
    m[(1, 1)] = c64(0.5);
    m[(2, 2)] = c64(0.5);
    m[(1, 2)] = c64(0.5 * s);
    m[(2, 1)] = c64(0.5 * s);
    DensityMatrix::new(m)
}

fn entangled_sign(sign: i8) -> Result<i8> {
    match sign {
        1 | -1 => Ok(sign),
        _ => Err(Error::InvalidParameter(format!("sign {sign}"))),
    }
}

pub fn entangled_bloch(sign: i8) -> Result<BlochState> {
    Ok(bloch_from_density(&entangled_state(sign)?))
}

/// ρ_± realized as a point mass on the pure micro-state ψ_±.
pub fn entangled_ensemble(sign: i8) -> Result<Ensemble> {
    Ok(Ensemble::point_mass(MicroState::four_state(
        entangled_wavefunction(sign)?,
    )?))
}

/// Â(θ) = cos θ L₁ + sin θ L₈ and B̂(φ) = cos φ L₂ + sin φ L₄.
pub fn rotated_spins(theta: f64, phi: f64) -> (Operator, Operator) {
    let l = LBasis::standard();
    let a = l.get(1) * c64(theta.cos()) + l.get(8) * c64(theta.sin());
    let b = l.get(2) * c64(phi.cos()) + l.get(4) * c64(phi.sin());
    (
        Operator::new(a).expect("4x4"),
        Operator::new(b).expect("4x4"),
    )
}

/// ½ tr({Â(θ), B̂(φ)} ρ).
pub fn rotated_spin_correlation(theta: f64, phi: f64, state: &BlochState) -> Result<f64> {
    if state.level() != Level::Four {
        return Err(Error::WrongManifold(
            "rotated spins act on four-state systems",
        ));
    }
    let (a, b) = rotated_spins(theta, phi);
    let rho = crate::quantum::density_from_bloch(state);
    let anti = a.anticommutator(&b);
    let half = Operator::new(anti.matrix() * c64(0.5))?;
    qm_expectation(&half, &rho)
}

/// The same correlation from the components: Â and B̂ commute and their
/// product is cc L₃ + cs L₆ + sc L₁₀ + ss L₁₂.
pub fn rotated_spin_correlation_components(
    theta: f64,
    phi: f64,
    state: &BlochState,
) -> Result<f64> {
    if state.level() != Level::Four {
        return Err(Error::WrongManifold(
            "rotated spins act on four-state systems",
        ));
    }
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Ok(ct * cp * state.component(3)
        + ct * sp * state.component(6)
        + st * cp * state.component(10)
        + st * sp * state.component(12))
}

/// Conditional probability that B gives `b` once A has given `a`.
pub fn conditional_outcome(
    a: &Operator,
    b: &Operator,
    rho: &DensityMatrix,
    sa: i8,
    sb: i8,
) -> Result<f64> {
    let (_, reduced) = reduce_on_outcome(a, rho, sa).ok_or(Error::ZeroProbability)?;
    Ok((b.projector(sb) * reduced.matrix()).trace().re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellCheck {
    pub theta1: f64,
    pub theta2: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
}

pub const BELL_TOL: f64 = 1e-12;

/// |C(θ₁) − C(θ₂)| against 1 + C(θ₁ − θ₂).
pub fn bell_check(c: impl Fn(f64) -> f64, theta1: f64, theta2: f64) -> BellCheck {
    let lhs = (c(theta1) - c(theta2)).abs();
    let rhs = 1.0 + c(theta1 - theta2);
    BellCheck {
        theta1,
        theta2,
        lhs,
        rhs,
        violated: lhs > rhs + BELL_TOL,
    }
}

/// Conditional correlation of the rotated spins on ρ₋: −cos θ.
pub fn quantum_correlator(theta: f64) -> f64 {
    -theta.cos()
}

/// Bell check with a hidden-variable correlator. The planar S¹/S² ensemble
/// is refined into substates with sharp signs γ(x) along the directions
/// 0, θ₁, θ₂ in the 1-2 plane; the partner spin takes B(y) = −γ(y), so
/// P(x, y) = −Σ_τ p_τ γ_τ(x) γ_τ(y). The check uses P(0, θ₁), P(0, θ₂) and
/// P(θ₁, θ₂) in place of C(θ₁), C(θ₂) and C(θ₁ − θ₂).
pub fn classical_bell_check(ensemble: &Ensemble, theta1: f64, theta2: f64) -> Result<BellCheck> {
    let angles = [0.0, theta1, theta2];
    let dir = |x: f64| [x.cos(), x.sin(), 0.0];
    let mut unique: Vec<[f64; 3]> = Vec::new();
    for &x in &angles {
        let v = dir(x);
        let parallel = unique
            .iter()
            .any(|u| (u[0] * v[1] - u[1] * v[0]).abs() <= 1e-10);
        if !parallel {
            unique.push(v);
        }
    }
    let subs = extend_to_substates(ensemble, &unique)?;
    let probs = subs.probabilities();
    // An angle parallel to a stored direction reuses its sign, flipped if antipodal.
    let gamma = |x: f64| -> Result<Vec<i8>> {
        let v = dir(x);
        let (u, _) = unique
            .iter()
            .map(|u| (u, (u[0] * v[1] - u[1] * v[0]).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        let s: i8 = if u[0] * v[0] + u[1] * v[1] >= 0.0 {
            1
        } else {
            -1
        };
        Ok(subs.assignment(*u)?.into_iter().map(|g| s * g).collect())
    };
    let pair = |x: f64, y: f64| -> Result<f64> {
        let b: Vec<i8> = gamma(y)?.into_iter().map(|g| -g).collect();
        classical_correlation_assigned(&probs, &gamma(x)?, &b)
    };
    let p1 = pair(0.0, theta1)?;
    let p2 = pair(0.0, theta2)?;
    let p12 = pair(theta1, theta2)?;
    let lhs = (p1 - p2).abs();
    let rhs = 1.0 + p12;
    Ok(BellCheck {
        theta1,
        theta2,
        lhs,
        rhs,
        violated: lhs > rhs + BELL_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interference {
    pub t: f64,
    pub state: BlochState,
    pub t2: f64,
    pub error_estimate: f64,
}

/// Runs ∂f₂ = Δf₅, ∂f₅ = −Δf₂ from f₁ = f₂ = f₃ = 1 with f₃ = f₂, f₇ = f₅.
pub fn interference_evolution(delta: f64, t: f64, dt: f64) -> Result<Interference> {
    if !delta.is_finite() || !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!("delta = {delta}, t = {t}")));
    }
    let f = |_t: f64, y: &Vec<f64>| Ok(vec![delta * y[1], -delta * y[0]]);
    let (y, err) = dynamics::solve_final(f, &[1.0, 0.0], TimeSpan::new(0.0, t), dt)?;
    let mut rho = vec![0.0; 15];
    rho[0] = 1.0;
    rho[1] = y[0];
    rho[2] = y[0];
    rho[4] = y[1];
    rho[6] = y[1];
    let state = BlochState::new(rho)?;
    let op = bit_observable(2)?;
    let t2 = qm_expectation(&op, &crate::quantum::density_from_bloch(&state))?;
    Ok(Interference {
        t,
        state,
        t2,
        error_estimate: err,
    })
}

/// ψ = ½[(ψ₁ + ψ₂)e^{−iω_a t} + (ψ₁ − ψ₂)e^{−iω_b t}].
pub fn interference_wavefunction(omega_a: f64, omega_b: f64, t: f64) -> WaveFunction {
    let ea = C64::from_polar(0.5, -omega_a * t);
    let eb = C64::from_polar(0.5, -omega_b * t);
    WaveFunction::new(CVector::from_vec(vec![
        ea + eb,
        ea - eb,
        c64(0.0),
        c64(0.0),
    ]))
    .expect("unit norm")
}

/// Pairs (1-based) exchanged by swapping the two bits.
pub const EXCHANGE_PAIRS: [(usize, usize); 6] =
    [(1, 2), (4, 8), (5, 9), (6, 10), (7, 11), (13, 15)];

pub fn exchange_index(k: usize) -> usize {
    for (a, b) in EXCHANGE_PAIRS {
        if k == a {
            return b;
        }
        if k == b {
            return a;
        }
    }
    k
}

pub fn exchange_symmetry(f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != 15 {
        return Err(Error::DimensionMismatch {
            expected: 15,
            got: f.len(),
        });
    }
    Ok((1..=15).map(|k| f[exchange_index(k) - 1]).collect())
}

/// The permutation of ψ₂ and ψ₃.
pub fn exchange_operator() -> CMatrix {
    let mut p = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        p[(i, j)] = c64(1.0);
    }
    p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeClass {
    Bosonic,
    Fermionic,
    Forbidden,
}

pub fn classify_exchange(psi: &WaveFunction) -> Result<ExchangeClass> {
    if psi.dim() != 4 {
        return Err(Error::WrongManifold(
            "exchange acts on four-state wave functions",
        ));
    }
    let v = psi.vector();
    let pv = exchange_operator() * v;
    let dist = |w: CVector| w.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dist(&pv - v) <= 1e-12 {
        Ok(ExchangeClass::Bosonic)
    } else if dist(&pv + v) <= 1e-12 {
        Ok(ExchangeClass::Fermionic)
    } else {
        Ok(ExchangeClass::Forbidden)
    }
}

/// Whether the density matrix is invariant under the exchange of the bits.
pub fn is_exchange_symmetric(state: &BlochState) -> Result<bool> {
    let f = state.rho();
    let g = exchange_symmetry(f)?;
    Ok(f.iter().zip(&g).all(|(a, b)| (a - b).abs() <= 1e-12))
}

/// The basis state ψ_j as a pure micro-state.
pub fn basis_micro_state(j: usize) -> Result<MicroState> {
    if !(1..=4).contains(&j) {
        return Err(Error::InvalidParameter(format!("basis state {j}")));
    }
    MicroState::four_state(basis_psi(j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn rho_minus_components() {
        let b = entangled_bloch(-1).unwrap();
        for k in 1..=15 {
            let want = match k {
                3 | 12 => -1.0,
                14 => 1.0,
                _ => 0.0,
            };
            assert!((b.component(k) - want).abs() < 1e-15, "f{k}");
        }
        assert!((b.purity() - 3.0).abs() < 1e-14);
        let p = entangled_bloch(1).unwrap();
        assert!((p.component(12) - 1.0).abs() < 1e-15);
        assert!((p.component(14) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn correlation_examples() {
        let b = entangled_bloch(-1).unwrap();
        let c = rotated_spin_correlation(0.3, 0.3, &b).unwrap();
        assert!((c + 1.0).abs() < 1e-14);
        assert!(rotated_spin_correlation(FRAC_PI_2, 0.0, &b).unwrap().abs() < 1e-14);
        let d = rotated_spin_correlation(FRAC_PI_2, FRAC_PI_4, &b).unwrap();
        assert!((d + FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn bell_examples() {
        let q = bell_check(quantum_correlator, FRAC_PI_2, FRAC_PI_4);
        assert!((q.lhs - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((q.rhs - (1.0 - FRAC_1_SQRT_2)).abs() < 1e-15);
        assert!(q.violated);
        let z = bell_check(|_| 0.0, 1.0, 2.0);
        assert_eq!((z.lhs, z.rhs, z.violated), (0.0, 1.0, false));
    }

    #[test]
    fn outcome_table_examples() {
        let w = outcomes_from_t(0.0, 0.0, -1.0).unwrap();
        assert_eq!((w.pp, w.pm, w.mp, w.mm), (0.0, 0.5, 0.5, 0.0));
        assert_eq!(outcomes_from_t(1.0, 1.0, 1.0).unwrap().pp, 1.0);
        assert!(outcomes_from_t(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn interference_endpoints() {
        for (t, want) in [(0.0, 1.0), (FRAC_PI_2, 0.0), (PI, -1.0)] {
            let r = interference_evolution(1.0, t, 1e-3).unwrap();
            assert!((r.t2 - want).abs() < 1e-8, "t = {t}: {}", r.t2);
        }
    }

    #[test]
    fn exchange_classes() {
        assert_eq!(
            classify_exchange(&entangled_wavefunction(-1).unwrap()).unwrap(),
            ExchangeClass::Fermionic
        );
        assert_eq!(
            classify_exchange(&entangled_wavefunction(1).unwrap()).unwrap(),
            ExchangeClass::Bosonic
        );
        assert_eq!(
            classify_exchange(&basis_psi(2)).unwrap(),
            ExchangeClass::Forbidden
        );
    }
}
