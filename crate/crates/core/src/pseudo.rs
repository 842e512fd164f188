//! Finite-N classical spin systems: Z_N point sets, coarse graining to
//! effective (possibly negative) probabilities, realizable regions, and the
//! eight-substate cartesian spin model.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::BlochState;
use crate::TOL;

fn check_probabilities(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(&x) = p.iter().find(|&&x| !(x >= -TOL) || !x.is_finite()) {
        return Err(Error::NegativeProbability(x));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-10 {
        return Err(Error::ProbabilitySum(s));
    }
    Ok(())
}

/// N micro-states with unit vectors f_σ and probabilities p_σ. The mean of
/// the spin A(e) in state σ is f_σ·e.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpinSystem {
    points: Vec<[f64; 3]>,
    probs: Vec<f64>,
    /// Some(N) when the points are the Z_N angles 2πj/N in the 1-2 plane.
    cyclic: Option<usize>,
}

/// Index j (angle jπ/4) of each column of the eight-state table, in the
/// order (0), (π), (π/2), (−π/2), (π/4), (−π/4), (3π/4), (−3π/4).
pub const TABLE_ORDER: [usize; 8] = [0, 4, 2, 6, 1, 7, 3, 5];

impl FiniteSpinSystem {
    pub fn new(points: Vec<[f64; 3]>, probs: Vec<f64>) -> Result<Self> {
        if points.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: probs.len(),
            });
        }
        for f in &points {
            let n2: f64 = f.iter().map(|x| x * x).sum();
            if (n2 - 1.0).abs() > 1e-12 {
                return Err(Error::NotNormalized {
                    what: "micro-state direction",
                    value: n2,
                    expected: 1.0,
                });
            }
        }
        check_probabilities(&probs)?;
        Ok(FiniteSpinSystem {
            points,
            probs,
            cyclic: None,
        })
    }

    /// Z_N states at angles 2πj/N.
    pub fn cyclic(n: usize, probs: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        let points = (0..n)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / n as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect();
        let mut s = Self::new(points, probs)?;
        s.cyclic = Some(n);
        Ok(s)
    }

    pub fn cyclic_pure(n: usize, j: usize) -> Result<Self> {
        if j >= n {
            return Err(Error::InvalidParameter(format!("state {j} of Z_{n}")));
        }
        let mut p = vec![0.0; n];
        p[j] = 1.0;
        Self::cyclic(n, p)
    }

    /// Eight-state system from probabilities given in table order.
    pub fn from_table(p: [f64; 8]) -> Result<Self> {
        let mut probs = vec![0.0; 8];
        for (col, &j) in TABLE_ORDER.iter().enumerate() {
            probs[j] = p[col];
        }
        Self::cyclic(8, probs)
    }

    /// The six states ±e₁, ±e₂, ±e₃.
    pub fn octahedral(probs: Vec<f64>) -> Result<Self> {
        let mut points = Vec::with_capacity(6);
        for k in 0..3 {
            for s in [1.0, -1.0] {
                let mut f = [0.0; 3];
                f[k] = s;
                points.push(f);
            }
        }
        Self::new(points, probs)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn cyclic_order(&self) -> Option<usize> {
        self.cyclic
    }

    pub fn is_planar(&self) -> bool {
        self.points.iter().all(|f| f[2].abs() <= TOL)
    }

    /// Probabilities in table order (eight-state systems only).
    pub fn table_probabilities(&self) -> Result<[f64; 8]> {
        self.require_eight()?;
        Ok(TABLE_ORDER.map(|j| self.probs[j]))
    }

    /// Ā(e)_σ for every micro-state.
    pub fn mean_table(&self, e: [f64; 3]) -> Vec<f64> {
        self.points
            .iter()
            .map(|f| f[0] * e[0] + f[1] * e[1] + f[2] * e[2])
            .collect()
    }

    pub fn expectation(&self, e: [f64; 3]) -> f64 {
        self.mean_table(e)
            .iter()
            .zip(&self.probs)
            .map(|(a, p)| a * p)
            .sum()
    }

    /// Expectation of the planar spin at angle φ.
    pub fn planar_expectation(&self, phi: f64) -> f64 {
        self.expectation([phi.cos(), phi.sin(), 0.0])
    }

    fn require_eight(&self) -> Result<()> {
        if self.cyclic != Some(8) {
            return Err(Error::InvalidParameter("requires the Z_8 system".into()));
        }
        Ok(())
    }
}

/// ρ_k = Σ_σ p_σ f_k(σ).
pub fn reduce_to_rho(system: &FiniteSpinSystem) -> Result<BlochState> {
    let mut rho = [0.0; 3];
    for (f, p) in system.points.iter().zip(&system.probs) {
        for k in 0..3 {
            rho[k] += p * f[k];
        }
    }
    BlochState::two(rho)
}

/// Shifts every probability by `steps` units of 2π/N.
pub fn zn_step_evolution(system: &FiniteSpinSystem, steps: i64) -> Result<FiniteSpinSystem> {
    let n = system
        .cyclic
        .ok_or_else(|| Error::InvalidParameter("Z_N steps need a cyclic system".into()))?;
    let shift = steps.rem_euclid(n as i64) as usize;
    let mut probs = vec![0.0; n];
    for (j, p) in system.probs.iter().enumerate() {
        probs[(j + shift) % n] = *p;
    }
    FiniteSpinSystem::cyclic(n, probs)
}

/// Effective weights on the axis states (0), (π), (π/2), (−π/2) after the
/// diagonal states have been integrated out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSystem {
    pub probs: [f64; 4],
    /// Set when some weight is negative or the weights sum above one, i.e.
    /// these are not probabilities of any ensemble.
    pub signed: bool,
}

impl EffectiveSystem {
    fn new(probs: [f64; 4]) -> Self {
        let signed = probs.iter().any(|&p| p < -TOL) || probs.iter().sum::<f64>() > 1.0 + TOL;
        EffectiveSystem { probs, signed }
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Σ p̃_σ cos(θ_σ − φ) over the four axis states.
    pub fn planar_expectation(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        let p = &self.probs;
        c * (p[0] - p[1]) + s * (p[2] - p[3])
    }

    /// (ρ₁, ρ₂) = (p̃₍₀₎ − p̃₍π₎, p̃₍π/2₎ − p̃₍−π/2₎).
    pub fn reduce_to_rho(&self) -> Result<BlochState> {
        BlochState::two([
            self.probs[0] - self.probs[1],
            self.probs[2] - self.probs[3],
            0.0,
        ])
    }
}

/// Moves the weight of each diagonal state onto the axis states. A diagonal
/// state with component c along an axis adds α|c|p (c > 0) or (α − 1)|c|p
/// (c < 0) to the positive axis state and the remainder needed to keep the
/// difference at cp to the negative one; β plays the same role for axis 2.
pub fn integrate_out(system: &FiniteSpinSystem, alpha: f64, beta: f64) -> Result<EffectiveSystem> {
    system.require_eight()?;
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidParameter(
            "alpha and beta must be finite".into(),
        ));
    }
    let p = &system.probs;
    let mut out = [p[0], p[4], p[2], p[6]];
    for j in [1, 3, 5, 7] {
        let f = system.points[j];
        for (axis, coef) in [(0, alpha), (1, beta)] {
            let c = f[axis];
            let plus = if c > 0.0 { coef } else { coef - 1.0 } * c.abs() * p[j];
            out[2 * axis] += plus;
            out[2 * axis + 1] += plus - c * p[j];
        }
    }
    Ok(EffectiveSystem::new(out))
}

/// Supporting line (planar) or plane: n·x ≤ offset on the region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub normal: [f64; 3],
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionDiagnostics {
    pub n: usize,
    pub planar: bool,
    /// max Σ_k ⟨A⁽ᵏ⁾⟩ over all probability vectors (attained at a vertex).
    pub max_component_sum: f64,
    pub facets: Vec<Facet>,
    /// Hull vertices in counter-clockwise order (planar systems).
    pub polygon: Vec<[f64; 2]>,
    /// Distance from the origin to the nearest facet.
    pub inradius: f64,
    /// Largest purity a rotation-invariant set of mixed states can keep.
    pub rotation_purity_bound: f64,
    pub target: Option<Vec<f64>>,
    pub target_realizable: Option<bool>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Keeps a candidate facet if every point lies on one side of it.
fn push_supporting(
    points: &[[f64; 3]],
    normal: [f64; 3],
    anchor: [f64; 3],
    facets: &mut Vec<Facet>,
) {
    let len = dot3(normal, normal).sqrt();
    if len < 1e-12 {
        return;
    }
    let mut n = normal.map(|x| x / len);
    let mut d = dot3(n, anchor);
    let side: Vec<f64> = points.iter().map(|p| dot3(n, *p) - d).collect();
    let hi = side.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = side.iter().copied().fold(f64::INFINITY, f64::min);
    if hi > 1e-12 {
        if lo < -1e-12 {
            return;
        }
        n = n.map(|x| -x);
        d = -d;
    }
    if facets
        .iter()
        .any(|f| dot3(f.normal, n) > 1.0 - 1e-12 && (f.offset - d).abs() < 1e-12)
    {
        return;
    }
    facets.push(Facet {
        normal: n,
        offset: d,
    });
}

/// Region of reachable ⟨A(e)⟩ vectors: the convex hull of the f_σ, found by
/// testing every pair (planar) or triple of points as a supporting facet.
pub fn realizable_region_check(
    system: &FiniteSpinSystem,
    target: Option<&[f64]>,
) -> Result<RegionDiagnostics> {
    let pts = &system.points;
    let planar = system.is_planar();
    let mut facets = Vec::new();
    let n = pts.len();
    if planar {
        for i in 0..n {
            for j in i + 1..n {
                let e = sub(pts[j], pts[i]);
                push_supporting(pts, [e[1], -e[0], 0.0], pts[i], &mut facets);
            }
        }
    } else {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let normal = cross(sub(pts[j], pts[i]), sub(pts[k], pts[i]));
                    push_supporting(pts, normal, pts[i], &mut facets);
                }
            }
        }
    }
    let dims = if planar { 2 } else { 3 };
    if facets.len() <= dims {
        return Err(Error::InvalidParameter(
            "micro-states do not span the plane or space".into(),
        ));
    }
    let max_component_sum = pts
        .iter()
        .map(|f| f[..dims].iter().sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let inradius = facets
        .iter()
        .map(|f| f.offset)
        .fold(f64::INFINITY, f64::min);
    let polygon = if planar {
        let mut v: Vec<[f64; 3]> = Vec::new();
        for p in pts {
            let on_edge = facets
                .iter()
                .any(|f| (dot3(f.normal, *p) - f.offset).abs() < 1e-12);
            if on_edge && !v.iter().any(|q| dot3(sub(*q, *p), sub(*q, *p)) < 1e-24) {
                v.push(*p);
            }
        }
        let c = v.iter().fold([0.0; 2], |a, p| [a[0] + p[0], a[1] + p[1]]);
        let c = [c[0] / v.len() as f64, c[1] / v.len() as f64];
        v.sort_by(|a, b| {
            let ta = (a[1] - c[1]).atan2(a[0] - c[0]);
            let tb = (b[1] - c[1]).atan2(b[0] - c[0]);
            ta.total_cmp(&tb)
        });
        v.iter().map(|p| [p[0], p[1]]).collect()
    } else {
        Vec::new()
    };
    let target_realizable = match target {
        None => None,
        Some(t) => {
            if t.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: t.len(),
                });
            }
            let x = [t[0], t[1], if dims == 3 { t[2] } else { 0.0 }];
            Some(facets.iter().all(|f| dot3(f.normal, x) <= f.offset + 1e-12))
        }
    };
    Ok(RegionDiagnostics {
        n,
        planar,
        max_component_sum,
        facets,
        polygon,
        inradius,
        rotation_purity_bound: inradius * inradius,
        target: target.map(|t| t.to_vec()),
        target_realizable,
    })
}

/// S_x, S_y, S_z on substates τ = 1…8 ordered (+++), (++−), …, (−−−) with
/// the last sign for S_x and the first for S_z.
fn spin_value(k: usize, tau: usize) -> f64 {
    let bit = match k {
        0 => tau & 1,
        1 => (tau >> 1) & 1,
        _ => (tau >> 2) & 1,
    };
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Observables of the eight-substate system: S₁…S₃ and the environment
/// products E₁ = S₂S₃, E₂ = S₁S₃, E₃ = S₁S₂, E₄ = S₁S₂S₃.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CartesianObservable {
    S(usize),
    E(usize),
}

impl CartesianObservable {
    pub const ALL: [CartesianObservable; 7] = [
        CartesianObservable::S(1),
        CartesianObservable::S(2),
        CartesianObservable::S(3),
        CartesianObservable::E(1),
        CartesianObservable::E(2),
        CartesianObservable::E(3),
        CartesianObservable::E(4),
    ];

    /// Value in substate τ (0-based).
    pub fn value(self, tau: usize) -> Result<f64> {
        let s = |k: usize| spin_value(k - 1, tau);
        match self {
            CartesianObservable::S(k @ 1..=3) => Ok(s(k)),
            CartesianObservable::E(1) => Ok(s(2) * s(3)),
            CartesianObservable::E(2) => Ok(s(1) * s(3)),
            CartesianObservable::E(3) => Ok(s(1) * s(2)),
            CartesianObservable::E(4) => Ok(s(1) * s(2) * s(3)),
            other => Err(Error::InvalidParameter(format!("{other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartesianSpinEnsemble {
    p: [f64; 8],
}

impl CartesianSpinEnsemble {
    pub fn new(p: [f64; 8]) -> Result<Self> {
        check_probabilities(&p)?;
        Ok(CartesianSpinEnsemble { p })
    }

    /// From p₁…p₇ with p₈ = 1 − Σ.
    pub fn from_free(free: [f64; 7]) -> Result<Self> {
        let mut p = [0.0; 8];
        p[..7].copy_from_slice(&free);
        p[7] = 1.0 - free.iter().sum::<f64>();
        Self::new(p)
    }

    /// Inverts the seven expectation values (plus normalization) back to
    /// substate probabilities; the eight sign patterns are orthogonal.
    pub fn from_expectations(spins: [f64; 3], env: [f64; 4]) -> Result<Self> {
        let mut p = [0.0; 8];
        for (tau, pt) in p.iter_mut().enumerate() {
            let mut acc = 1.0;
            for k in 0..3 {
                acc += spins[k] * CartesianObservable::S(k + 1).value(tau)?;
            }
            for i in 0..4 {
                acc += env[i] * CartesianObservable::E(i + 1).value(tau)?;
            }
            *pt = acc / 8.0;
        }
        Self::new(p)
    }

    pub fn probabilities(&self) -> &[f64; 8] {
        &self.p
    }

    pub fn expectation(&self, a: CartesianObservable) -> Result<f64> {
        let mut acc = 0.0;
        for (tau, p) in self.p.iter().enumerate() {
            acc += p * a.value(tau)?;
        }
        Ok(acc)
    }

    /// ρ_k = ⟨S_k⟩.
    pub fn spins(&self) -> [f64; 3] {
        [1, 2, 3].map(|k| {
            self.expectation(CartesianObservable::S(k))
                .expect("valid index")
        })
    }

    pub fn environment(&self) -> [f64; 4] {
        [1, 2, 3, 4].map(|i| {
            self.expectation(CartesianObservable::E(i))
                .expect("valid index")
        })
    }

    /// Σ_k ⟨S_k⟩².
    pub fn purity(&self) -> f64 {
        self.spins().iter().map(|x| x * x).sum()
    }

    /// w[i][j] = probability that a = (+, −)[i] and b = (+, −)[j].
    pub fn joint_probabilities(
        &self,
        a: CartesianObservable,
        b: CartesianObservable,
    ) -> Result<[[f64; 2]; 2]> {
        let mut w = [[0.0; 2]; 2];
        for (tau, p) in self.p.iter().enumerate() {
            let i = usize::from(a.value(tau)? < 0.0);
            let j = usize::from(b.value(tau)? < 0.0);
            w[i][j] += p;
        }
        Ok(w)
    }

    /// The subsystem state, if the purity bound holds.
    pub fn bloch_state(&self) -> Result<BlochState> {
        BlochState::two(self.spins())
    }
}

/// The purity as a polynomial in p₁…p₇ (p₈ eliminated).
pub fn cartesian_purity(p: &[f64; 8]) -> f64 {
    let [p1, p2, p3, p4, p5, p6, p7, _] = *p;
    3.0 - 4.0 * (3.0 * p1 + 2.0 * p2 + 2.0 * p3 + p4 + 2.0 * p5 + p6 + p7)
        + 4.0
            * (3.0 * p1 * p1
                + 2.0 * p2 * p2
                + 2.0 * p3 * p3
                + p4 * p4
                + 2.0 * p5 * p5
                + p6 * p6
                + p7 * p7)
        + 8.0
            * (2.0 * p1 * p2
                + 2.0 * p1 * p3
                + p1 * p4
                + 2.0 * p1 * p5
                + p1 * p6
                + p1 * p7
                + p2 * p3
                + p2 * p4
                + p2 * p5
                + p2 * p6
                + p3 * p4
                + p3 * p5
                + p3 * p7
                + p5 * p6
                + p5 * p7)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum MeasurementRule {
    /// Keep the relative weights of the surviving substates.
    Classical,
    /// ρ = (0, 0, ±1); `p1` is the free environment weight in [0, ½].
    Quantum { p1: f64 },
}

impl MeasurementRule {
    pub fn quantum() -> Self {
        MeasurementRule::Quantum { p1: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SzMeasurement {
    pub outcome: i8,
    pub outcome_probability: f64,
    pub after: CartesianSpinEnsemble,
    pub purity: f64,
    /// Purity after the update exceeds one.
    pub violates_bound: bool,
    /// p₁+p₂, p₁+p₃, p₂+p₄, p₃+p₄ over the four surviving substates.
    pub pair_sums: [f64; 4],
    pub free_parameter: Option<f64>,
}

/// State after finding S_z = `outcome`.
pub fn cartesian_measure_sz(
    ens: &CartesianSpinEnsemble,
    outcome: i8,
    rule: MeasurementRule,
) -> Result<SzMeasurement> {
    let base = match outcome {
        1 => 0,
        -1 => 4,
        _ => return Err(Error::InvalidParameter(format!("outcome {outcome}"))),
    };
    let before = ens.probabilities();
    let weight: f64 = before[base..base + 4].iter().sum();
    if weight <= TOL {
        return Err(Error::ZeroProbability);
    }
    let mut p = [0.0; 8];
    let free = match rule {
        MeasurementRule::Classical => {
            for j in base..base + 4 {
                p[j] = before[j] / weight;
            }
            None
        }
        MeasurementRule::Quantum { p1 } => {
            if !(0.0..=0.5).contains(&p1) {
                return Err(Error::InvalidParameter(format!(
                    "p1 = {p1} outside [0, 1/2]"
                )));
            }
            p[base] = p1;
            p[base + 1] = 0.5 - p1;
            p[base + 2] = 0.5 - p1;
            p[base + 3] = p1;
            Some(p1)
        }
    };
    let after = CartesianSpinEnsemble::new(p)?;
    let q = &p[base..base + 4];
    let purity = after.purity();
    Ok(SzMeasurement {
        outcome,
        outcome_probability: weight,
        violates_bound: purity > 1.0 + TOL,
        purity,
        pair_sums: [q[0] + q[1], q[0] + q[2], q[1] + q[3], q[2] + q[3]],
        free_parameter: free,
        after,
    })
}
