//! Micro-state manifolds, weighted ensembles over them, the reduction to ρ_k
//! and the product-form substate extension.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{self, CVector, WaveFunction, C64};
use crate::state::{dot, BlochState, Level};
use crate::TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    /// Unit circle, embedded in the 1-2 plane of the sphere.
    Circle,
    Sphere,
    /// Pure four-state density matrices, stored through their wave function.
    FourState,
}

impl Manifold {
    pub fn level(self) -> Level {
        match self {
            Manifold::Circle | Manifold::Sphere => Level::Two,
            Manifold::FourState => Level::Four,
        }
    }

    pub fn coord_len(self) -> usize {
        match self {
            Manifold::Circle => 2,
            Manifold::Sphere => 3,
            Manifold::FourState => 15,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MicroState {
    Circle([f64; 2]),
    Sphere([f64; 3]),
    FourState(WaveFunction),
}

fn check_unit(f: &[f64]) -> Result<()> {
    let n = dot(f, f);
    if !n.is_finite() || (n - 1.0).abs() > TOL {
        return Err(Error::NotNormalized {
            what: "sum f_k^2",
            value: n,
            expected: 1.0,
        });
    }
    Ok(())
}

impl MicroState {
    pub fn angle(phi: f64) -> Self {
        MicroState::Circle([phi.cos(), phi.sin()])
    }

    pub fn circle(f: [f64; 2]) -> Result<Self> {
        check_unit(&f)?;
        Ok(MicroState::Circle(f))
    }

    pub fn sphere(f: [f64; 3]) -> Result<Self> {
        check_unit(&f)?;
        Ok(MicroState::Sphere(f))
    }

    pub fn four_state(psi: WaveFunction) -> Result<Self> {
        if psi.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: psi.dim(),
            });
        }
        Ok(MicroState::FourState(psi))
    }

    /// Builds a micro-state from its manifold coordinates. Four-state
    /// coordinates must satisfy Σf_k² = 3 and ρ̃² = ρ̃ for ρ̃ = ¼(1 + f_k L_k).
    pub fn from_coords(manifold: Manifold, f: &[f64]) -> Result<Self> {
        if f.len() != manifold.coord_len() {
            return Err(Error::DimensionMismatch {
                expected: manifold.coord_len(),
                got: f.len(),
            });
        }
        match manifold {
            Manifold::Circle => Self::circle([f[0], f[1]]),
            Manifold::Sphere => Self::sphere([f[0], f[1], f[2]]),
            Manifold::FourState => {
                let n = dot(f, f);
                if (n - 3.0).abs() > TOL {
                    return Err(Error::NotNormalized {
                        what: "sum f_k^2",
                        value: n,
                        expected: 3.0,
                    });
                }
                let m = quantum::density_matrix_raw(&BlochState::from_parts_unchecked(
                    Level::Four,
                    f.to_vec(),
                ));
                if quantum::max_abs(&(&m * &m - &m)) > TOL {
                    return Err(Error::ConstraintViolation("rho^2 != rho".into()));
                }
                let rho = quantum::DensityMatrix::new(m)?;
                Self::four_state(quantum::wavefunction_from_pure(&rho)?)
            }
        }
    }

    pub fn manifold(&self) -> Manifold {
        match self {
            MicroState::Circle(_) => Manifold::Circle,
            MicroState::Sphere(_) => Manifold::Sphere,
            MicroState::FourState(_) => Manifold::FourState,
        }
    }

    pub fn level(&self) -> Level {
        self.manifold().level()
    }

    /// Native coordinates: 2, 3 or 15 numbers.
    pub fn coords(&self) -> Vec<f64> {
        match self {
            MicroState::Circle(f) => f.to_vec(),
            MicroState::Sphere(f) => f.to_vec(),
            MicroState::FourState(psi) => four_state_coords(psi),
        }
    }

    /// Coordinates as mean values of the basis observables: 3 or 15 numbers.
    pub fn bloch_coords(&self) -> Vec<f64> {
        match self {
            MicroState::Circle(f) => vec![f[0], f[1], 0.0],
            _ => self.coords(),
        }
    }

    /// Unit 3-vector for circle and sphere states.
    pub fn direction(&self) -> Option<[f64; 3]> {
        match self {
            MicroState::Circle(f) => Some([f[0], f[1], 0.0]),
            MicroState::Sphere(f) => Some(*f),
            MicroState::FourState(_) => None,
        }
    }
}

/// f_k = ψ† L_k ψ.
pub fn four_state_coords(psi: &WaveFunction) -> Vec<f64> {
    quantum::LBasis::standard()
        .matrices()
        .iter()
        .map(|l| psi.expectation(l).re)
        .collect()
}

/// A finite set of micro-states with probabilities summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble", into = "RawEnsemble")]
pub struct Ensemble {
    manifold: Manifold,
    points: Vec<(MicroState, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    f: Vec<f64>,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct RawEnsemble {
    manifold: Manifold,
    points: Vec<RawPoint>,
}

impl TryFrom<RawEnsemble> for Ensemble {
    type Error = Error;
    fn try_from(raw: RawEnsemble) -> Result<Self> {
        let points = raw
            .points
            .iter()
            .map(|pt| Ok((MicroState::from_coords(raw.manifold, &pt.f)?, pt.p)))
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(points)
    }
}

impl From<Ensemble> for RawEnsemble {
    fn from(e: Ensemble) -> Self {
        RawEnsemble {
            manifold: e.manifold,
            points: e
                .points
                .iter()
                .map(|(m, p)| RawPoint {
                    f: m.coords(),
                    p: *p,
                })
                .collect(),
        }
    }
}

impl Ensemble {
    pub fn new(points: Vec<(MicroState, f64)>) -> Result<Self> {
        let manifold = points.first().ok_or(Error::Empty)?.0.manifold();
        let mut total = 0.0;
        for (m, p) in &points {
            if m.manifold() != manifold {
                return Err(Error::MixedManifolds);
            }
            if !(*p >= 0.0) || !p.is_finite() {
                return Err(Error::NegativeProbability(*p));
            }
            total += p;
        }
        if (total - 1.0).abs() > TOL {
            return Err(Error::ProbabilitySum(total));
        }
        Ok(Ensemble { manifold, points })
    }

    pub fn point_mass(m: MicroState) -> Self {
        Ensemble {
            manifold: m.manifold(),
            points: vec![(m, 1.0)],
        }
    }

    /// α·a ⊕ (1−α)·b on the union of both point sets.
    pub fn mix(alpha: f64, a: &Ensemble, b: &Ensemble) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("mixing weight {alpha}")));
        }
        let points = a
            .points
            .iter()
            .map(|(m, p)| (m.clone(), alpha * p))
            .chain(b.points.iter().map(|(m, p)| (m.clone(), (1.0 - alpha) * p)))
            .collect();
        Ensemble::new(points)
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn level(&self) -> Level {
        self.manifold.level()
    }

    pub fn points(&self) -> &[(MicroState, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.points.iter().map(|(_, p)| *p).collect()
    }

    /// A new ensemble on the same micro-states with other probabilities.
    pub fn with_probabilities(&self, probs: &[f64]) -> Result<Self> {
        if probs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: probs.len(),
            });
        }
        Ensemble::new(
            self.points
                .iter()
                .zip(probs)
                .map(|((m, _), &p)| (m.clone(), p))
                .collect(),
        )
    }

    /// ρ_k = Σ_σ p_σ f_k(σ).
    pub fn reduce(&self) -> Result<BlochState> {
        let level = self.level();
        let mut rho = vec![0.0; level.bloch_len()];
        for (m, p) in &self.points {
            for (r, f) in rho.iter_mut().zip(m.bloch_coords()) {
                *r += p * f;
            }
        }
        BlochState::new(rho)
    }
}

pub fn reduce(ensemble: &Ensemble) -> Result<BlochState> {
    ensemble.reduce()
}

/// Equal-area grid on S²: `resolution` bands of equal height in f₃, each cut
/// into 2·`resolution` cells of equal azimuth, with one point per cell centre.
pub fn grid_ensemble(resolution: usize, density: impl Fn([f64; 3]) -> f64) -> Result<Ensemble> {
    if resolution < 2 {
        return Err(Error::InvalidParameter(format!(
            "resolution {resolution} < 2"
        )));
    }
    let nz = resolution;
    let nphi = 2 * resolution;
    let mut dirs = Vec::with_capacity(nz * nphi);
    let mut weights = Vec::with_capacity(nz * nphi);
    for i in 0..nz {
        let z = -1.0 + (i as f64 + 0.5) * 2.0 / nz as f64;
        let s = (1.0 - z * z).sqrt();
        for j in 0..nphi {
            let phi = (j as f64 + 0.5) * 2.0 * PI / nphi as f64;
            let f = [s * phi.cos(), s * phi.sin(), z];
            let w = density(f);
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!("density {w} at {f:?}")));
            }
            dirs.push(f);
            weights.push(w);
        }
    }
    weighted(dirs.into_iter().map(MicroState::Sphere).collect(), weights)
}

/// Uniform angles 2πj/n on S¹.
pub fn circle_grid(n: usize, density: impl Fn(f64) -> f64) -> Result<Ensemble> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("resolution {n} < 2")));
    }
    let mut states = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for j in 0..n {
        let phi = 2.0 * PI * j as f64 / n as f64;
        let w = density(phi);
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "density {w} at angle {phi}"
            )));
        }
        states.push(MicroState::angle(phi));
        weights.push(w);
    }
    weighted(states, weights)
}

fn weighted(states: Vec<MicroState>, weights: Vec<f64>) -> Result<Ensemble> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroMass);
    }
    Ensemble::new(
        states
            .into_iter()
            .zip(weights.into_iter().map(|w| w / total))
            .collect(),
    )
}

/// Unnormalized von Mises-Fisher density exp(κ(μ·f − 1)).
pub fn von_mises_fisher(mu: [f64; 3], kappa: f64) -> impl Fn([f64; 3]) -> f64 {
    move |f| (kappa * (dot(&mu, &f) - 1.0)).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Substate {
    /// Index of the micro-state in the underlying ensemble.
    pub micro: usize,
    /// γ(g) = ±1 for each canonical direction.
    pub gamma: Vec<i8>,
    pub p: f64,
}

/// Hidden-variable refinement where every listed direction has a sharp sign.
#[derive(Clone, Debug, PartialEq)]
pub struct SubstateEnsemble {
    directions: Vec<[f64; 3]>,
    micro: Vec<(MicroState, f64)>,
    states: Vec<Substate>,
}

const DIRECTION_TOL: f64 = 1e-9;
const MAX_DIRECTIONS: usize = 20;

fn canonical(g: [f64; 3]) -> [f64; 3] {
    match g.iter().find(|x| x.abs() > TOL) {
        Some(&x) if x < 0.0 => g.map(|c| -c),
        _ => g,
    }
}

fn close(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DIRECTION_TOL)
}

/// Refines an S² (or S¹) ensemble into substates with probabilities
/// p(f) Π_g ½(1 + γ(g) f·g).
pub fn extend_to_substates(
    ensemble: &Ensemble,
    directions: &[[f64; 3]],
) -> Result<SubstateEnsemble> {
    if ensemble.manifold() == Manifold::FourState {
        return Err(Error::WrongManifold("substates need an S1 or S2 ensemble"));
    }
    if directions.len() > MAX_DIRECTIONS {
        return Err(Error::InvalidParameter(format!(
            "{} directions (at most {MAX_DIRECTIONS})",
            directions.len()
        )));
    }
    let mut canon: Vec<[f64; 3]> = Vec::with_capacity(directions.len());
    for (i, g) in directions.iter().enumerate() {
        check_unit(g)?;
        let c = canonical(*g);
        if let Some(j) = canon.iter().position(|d| close(d, &c)) {
            return Err(Error::AntipodalDirections(j, i));
        }
        canon.push(c);
    }
    let n = canon.len();
    let mut states = Vec::with_capacity(ensemble.len() << n);
    for (idx, (m, p)) in ensemble.points().iter().enumerate() {
        let f = m.direction().expect("two-state manifold");
        let proj: Vec<f64> = canon.iter().map(|g| dot(&f, g)).collect();
        // First direction is the most significant bit; + before −.
        for bits in 0..(1usize << n) {
            let gamma: Vec<i8> = (0..n)
                .map(|k| if bits >> (n - 1 - k) & 1 == 0 { 1 } else { -1 })
                .collect();
            let w = gamma
                .iter()
                .zip(&proj)
                .fold(*p, |acc, (&s, &x)| acc * 0.5 * (1.0 + f64::from(s) * x));
            states.push(Substate {
                micro: idx,
                gamma,
                p: w,
            });
        }
    }
    Ok(SubstateEnsemble {
        directions: canon,
        micro: ensemble.points().to_vec(),
        states,
    })
}

impl SubstateEnsemble {
    /// Canonical directions, first nonzero coordinate positive.
    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    pub fn states(&self) -> &[Substate] {
        &self.states
    }

    pub fn micro_states(&self) -> &[(MicroState, f64)] {
        &self.micro
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.p).collect()
    }

    /// (index of canonical direction, sign relating e to it).
    fn locate(&self, e: [f64; 3]) -> Result<(usize, i8)> {
        let neg = e.map(|c| -c);
        self.directions
            .iter()
            .enumerate()
            .find_map(|(i, d)| {
                if close(d, &e) {
                    Some((i, 1))
                } else if close(d, &neg) {
                    Some((i, -1))
                } else {
                    None
                }
            })
            .ok_or(Error::UnknownDirection)
    }

    /// Sharp values γ_τ(e) of the classical observable for direction e.
    pub fn assignment(&self, e: [f64; 3]) -> Result<Vec<i8>> {
        let (i, s) = self.locate(e)?;
        Ok(self.states.iter().map(|st| s * st.gamma[i]).collect())
    }

    /// Summing over the signs recovers p(f) for every micro-state.
    pub fn marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.micro.len()];
        for s in &self.states {
            out[s.micro] += s.p;
        }
        out
    }

    /// Mean of γ(e) within micro-state `micro`.
    pub fn mean_gamma(&self, micro: usize, e: [f64; 3]) -> Result<f64> {
        let (i, sign) = self.locate(e)?;
        let (mut num, mut den) = (0.0, 0.0);
        for s in self.states.iter().filter(|s| s.micro == micro) {
            num += s.p * f64::from(sign * s.gamma[i]);
            den += s.p;
        }
        if den == 0.0 {
            return Err(Error::ZeroProbability);
        }
        Ok(num / den)
    }
}

pub(crate) fn c64(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Basis wave function ψ_j (1-based) of the four-state system.
pub fn basis_psi(j: usize) -> WaveFunction {
    let mut v = CVector::zeros(4);
    v[j - 1] = c64(1.0);
    WaveFunction::new(v).expect("unit vector")
}
