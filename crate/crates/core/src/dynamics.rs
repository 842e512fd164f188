//! Time evolution: rotations of distributions, reduced transition matrices,
//! unitary evolution of ρ, and purity-changing flows.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Ensemble, Manifold, MicroState};
use crate::quantum::{
    self, hermitian_eigen, identity, pauli, CMatrix, DensityMatrix, Operator, C64,
};
use crate::state::{BlochState, Level};
use crate::TOL;

/// S mapping ρ(t₁) to ρ(t₂).
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedTransition {
    pub s: DMatrix<f64>,
}

impl ReducedTransition {
    pub fn apply(&self, state: &BlochState) -> Result<Vec<f64>> {
        if state.rho().len() != self.s.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.s.ncols(),
                got: state.rho().len(),
            });
        }
        Ok(
            (&self.s * nalgebra::DVector::from_column_slice(state.rho()))
                .iter()
                .copied()
                .collect(),
        )
    }

    /// SᵀS = 1, i.e. purity is conserved for every state.
    pub fn is_orthogonal(&self, tol: f64) -> bool {
        let n = self.s.nrows();
        (self.s.transpose() * &self.s - DMatrix::identity(n, n)).amax() <= tol
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    let orth = (r.transpose() * r - Matrix3::identity()).amax();
    if orth > 1e-10 || (r.determinant() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter("not a proper rotation".into()));
    }
    Ok(())
}

/// Moves every micro-state by R, carrying its probability along.
pub fn rotate_distribution(ensemble: &Ensemble, r: &Matrix3<f64>) -> Result<Ensemble> {
    check_rotation(r)?;
    if ensemble.manifold() == Manifold::FourState {
        return Err(Error::WrongManifold("rotations act on S2 ensembles"));
    }
    let points = ensemble
        .points()
        .iter()
        .map(|(m, p)| {
            let f = Vector3::from(m.direction().expect("two-state manifold"));
            let g = r * f;
            Ok((MicroState::sphere([g.x, g.y, g.z])?, *p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(points)
}

/// S_kl = Σ T_στ p_τ p_ρ Ā⁽ᵏ⁾_σ Ā⁽ˡ⁾_ρ / Σρ_m² for a column-stochastic
/// micro-state transition T. The result is tied to this ensemble: it is
/// rank one and only guarantees S·ρ(t′) = ρ(t).
pub fn reduced_from_micro(
    transition: &DMatrix<f64>,
    ensemble: &Ensemble,
) -> Result<ReducedTransition> {
    let n = ensemble.len();
    if transition.nrows() != n || transition.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: transition.nrows(),
        });
    }
    for (j, col) in transition.column_iter().enumerate() {
        if col.iter().any(|&x| x < -TOL) {
            return Err(Error::InvalidParameter(format!(
                "negative entry in column {j}"
            )));
        }
        let s: f64 = col.iter().sum();
        if (s - 1.0).abs() > TOL {
            return Err(Error::InvalidParameter(format!("column {j} sums to {s}")));
        }
    }
    let p = nalgebra::DVector::from_vec(ensemble.probabilities());
    let coords: Vec<Vec<f64>> = ensemble
        .points()
        .iter()
        .map(|(m, _)| m.bloch_coords())
        .collect();
    let k = ensemble.level().bloch_len();
    let a = DMatrix::from_fn(k, n, |row, sigma| coords[sigma][row]);
    let before = &a * &p;
    let norm2 = before.norm_squared();
    if norm2 <= TOL {
        return Err(Error::ZeroPurity);
    }
    let after = &a * (transition * &p);
    Ok(ReducedTransition {
        s: after * before.transpose() / norm2,
    })
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Ŝ(α) = (1 − 2sin²γ)δ + 2sin²γ ββᵀ + 2 sinγ cosγ ε·β with γ = |α|, β = α/γ.
/// This is the Bloch image of ρ ↦ UρU† for U = exp(iα·τ).
pub fn alpha_rotation(alpha: [f64; 3]) -> Matrix3<f64> {
    let a = Vector3::from(alpha);
    let gamma = a.norm();
    if gamma == 0.0 {
        return Matrix3::identity();
    }
    let beta = a / gamma;
    let (s, c) = gamma.sin_cos();
    Matrix3::from_fn(|k, l| {
        let mut v = (1.0 - 2.0 * s * s) * if k == l { 1.0 } else { 0.0 };
        v += 2.0 * s * s * beta[k] * beta[l];
        for m in 0..3 {
            v += 2.0 * s * c * levi_civita(k, l, m) * beta[m];
        }
        v
    })
}

/// exp(iα·τ) = cos γ + i sin γ β·τ.
pub fn unitary_from_alpha(alpha: [f64; 3]) -> CMatrix {
    let gamma = Vector3::from(alpha).norm();
    let mut u = identity(2) * C64::new(gamma.cos(), 0.0);
    if gamma > 0.0 {
        for (k, a) in alpha.iter().enumerate() {
            u += pauli(k + 1) * C64::new(0.0, gamma.sin() * a / gamma);
        }
    }
    u
}

pub fn unitary_step(state: &BlochState, alpha: [f64; 3]) -> Result<BlochState> {
    if state.level() != Level::Two {
        return Err(Error::WrongManifold(
            "unitary_step acts on two-state systems",
        ));
    }
    let r = alpha_rotation(alpha) * Vector3::from_column_slice(state.rho());
    Ok(BlochState::from_parts_unchecked(
        Level::Two,
        r.iter().copied().collect(),
    ))
}

/// Ĥ = H_k τ_k + H₀ for two-state systems, or a Hermitian 4×4 matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Hamiltonian {
    TwoState { h: [f64; 3], h0: f64 },
    Matrix(Operator),
}

impl Hamiltonian {
    pub fn two_state(h: [f64; 3]) -> Self {
        Hamiltonian::TwoState { h, h0: 0.0 }
    }

    pub fn matrix(&self) -> CMatrix {
        match self {
            Hamiltonian::TwoState { h, h0 } => {
                let mut m = identity(2) * C64::new(*h0, 0.0);
                for (k, x) in h.iter().enumerate() {
                    m += pauli(k + 1) * C64::new(*x, 0.0);
                }
                m
            }
            Hamiltonian::Matrix(op) => op.matrix().clone(),
        }
    }

    fn checked(&self, dim: usize) -> Result<CMatrix> {
        let m = self.matrix();
        if m.nrows() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.nrows(),
            });
        }
        if !quantum::is_hermitian(&m, TOL) {
            return Err(Error::NotHermitian);
        }
        Ok(m)
    }
}

/// exp(−iĤt) from the eigen-decomposition of Ĥ.
pub fn propagator(h: &Hamiltonian, t: f64) -> Result<CMatrix> {
    let m = h.matrix();
    let (vals, vecs) = hermitian_eigen(&m)?;
    let d = m.nrows();
    let mut u = CMatrix::zeros(d, d);
    for (l, v) in vals.iter().zip(&vecs) {
        u += v * v.adjoint() * C64::from_polar(1.0, -l * t);
    }
    Ok(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub t0: f64,
    pub t1: f64,
}

impl TimeSpan {
    pub fn new(t0: f64, t1: f64) -> Self {
        TimeSpan { t0, t1 }
    }

    /// Number of steps and the step actually used, so the grid ends on t1.
    fn grid(&self, dt: f64) -> Result<(usize, f64)> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dt = {dt} must be positive"
            )));
        }
        let len = self.t1 - self.t0;
        if !(len >= 0.0) || !len.is_finite() {
            return Err(Error::InvalidParameter(
                "time span must be increasing".into(),
            ));
        }
        let n = (len / dt - 1e-9).ceil().max(0.0) as usize;
        Ok((n, if n == 0 { 0.0 } else { len / n as f64 }))
    }
}

/// Sampled solution of a flow, one row per grid time.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// ρ_k at each time; empty for flows of (P, D) only.
    pub bloch: Vec<Vec<f64>>,
    pub purity: Vec<f64>,
    /// Scaling rate D at each time, for open flows.
    pub rate: Vec<f64>,
    /// max |x(dt) − x(dt/2)| / 15 at the final time.
    pub error_estimate: f64,
}

impl Trajectory {
    pub fn last_bloch(&self) -> Option<&[f64]> {
        self.bloch.last().map(|v| v.as_slice())
    }
}

trait OdeState: Clone {
    fn axpy(&self, a: f64, k: &Self) -> Self;
    fn max_diff(&self, other: &Self) -> f64;
}

impl OdeState for Vec<f64> {
    fn axpy(&self, a: f64, k: &Self) -> Self {
        self.iter().zip(k).map(|(x, y)| x + a * y).collect()
    }
    fn max_diff(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

impl OdeState for CMatrix {
    fn axpy(&self, a: f64, k: &Self) -> Self {
        self + k * C64::new(a, 0.0)
    }
    fn max_diff(&self, other: &Self) -> f64 {
        quantum::max_abs(&(self - other))
    }
}

fn rk4_step<S: OdeState>(f: &impl Fn(f64, &S) -> Result<S>, t: f64, y: &S, h: f64) -> Result<S> {
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &y.axpy(0.5 * h, &k1))?;
    let k3 = f(t + 0.5 * h, &y.axpy(0.5 * h, &k2))?;
    let k4 = f(t + h, &y.axpy(h, &k3))?;
    Ok(y.axpy(h / 6.0, &k1)
        .axpy(h / 3.0, &k2)
        .axpy(h / 3.0, &k3)
        .axpy(h / 6.0, &k4))
}

/// Runs RK4 on the grid, calling `observe` at every grid time (including t0).
/// Returns the final state.
fn integrate<S: OdeState>(
    f: &impl Fn(f64, &S) -> Result<S>,
    y0: &S,
    span: TimeSpan,
    dt: f64,
    mut observe: impl FnMut(f64, &S) -> Result<()>,
) -> Result<S> {
    let (n, h) = span.grid(dt)?;
    let mut y = y0.clone();
    observe(span.t0, &y)?;
    for i in 0..n {
        let t = span.t0 + i as f64 * h;
        y = rk4_step(f, t, &y, h)?;
        observe(span.t0 + (i + 1) as f64 * h, &y)?;
    }
    Ok(y)
}

/// Step-halving check: the same integration at dt/2, compared at the end.
fn halving_error<S: OdeState>(
    f: &impl Fn(f64, &S) -> Result<S>,
    y0: &S,
    span: TimeSpan,
    dt: f64,
    coarse: &S,
) -> Result<f64> {
    let fine = integrate(f, y0, span, 0.5 * dt, |_, _| Ok(()))?;
    Ok(coarse.max_diff(&fine) / 15.0)
}

/// Final state and step-halving error of a plain RK4 run.
pub(crate) fn solve_final(
    f: impl Fn(f64, &Vec<f64>) -> Result<Vec<f64>>,
    y0: &[f64],
    span: TimeSpan,
    dt: f64,
) -> Result<(Vec<f64>, f64)> {
    let y0 = y0.to_vec();
    let last = integrate(&f, &y0, span, dt, |_, _| Ok(()))?;
    let err = halving_error(&f, &y0, span, dt, &last)?;
    Ok((last, err))
}

fn bloch_of(m: &CMatrix) -> Vec<f64> {
    let level = Level::from_hilbert_dim(m.nrows()).expect("2 or 4");
    quantum::generators(level)
        .iter()
        .map(|g| (m * g).trace().re)
        .collect()
}

fn commutator_rhs(h: &CMatrix, rho: &CMatrix) -> CMatrix {
    (h * rho - rho * h) * C64::new(0.0, -1.0)
}

/// ∂ρ/∂t = −i[Ĥ, ρ] by fixed-step RK4.
pub fn integrate_von_neumann(
    rho0: &DensityMatrix,
    h: &Hamiltonian,
    span: TimeSpan,
    dt: f64,
) -> Result<Trajectory> {
    let hm = h.checked(rho0.dim())?;
    let f = |_t: f64, r: &CMatrix| Ok(commutator_rhs(&hm, r));
    let mut traj = Trajectory::default();
    let last = integrate(&f, rho0.matrix(), span, dt, |t, r| {
        let b = bloch_of(r);
        traj.times.push(t);
        traj.purity.push(b.iter().map(|x| x * x).sum());
        traj.bloch.push(b);
        Ok(())
    })?;
    traj.error_estimate = halving_error(&f, rho0.matrix(), span, dt, &last)?;
    Ok(traj)
}

/// ∂ρ_k/∂t = 2 ε_lmk H_l ρ_m, the Bloch form of the von Neumann equation.
pub fn integrate_bloch(
    rho0: &BlochState,
    h: [f64; 3],
    span: TimeSpan,
    dt: f64,
) -> Result<Trajectory> {
    if rho0.level() != Level::Two {
        return Err(Error::WrongManifold("Bloch precession is two-state"));
    }
    let f = |_t: f64, r: &Vec<f64>| {
        Ok(vec![
            2.0 * (h[1] * r[2] - h[2] * r[1]),
            2.0 * (h[2] * r[0] - h[0] * r[2]),
            2.0 * (h[0] * r[1] - h[1] * r[0]),
        ])
    };
    let y0 = rho0.rho().to_vec();
    let mut traj = Trajectory::default();
    let last = integrate(&f, &y0, span, dt, |t, r| {
        traj.times.push(t);
        traj.purity.push(r.iter().map(|x| x * x).sum());
        traj.bloch.push(r.clone());
        Ok(())
    })?;
    traj.error_estimate = halving_error(&f, &y0, span, dt, &last)?;
    Ok(traj)
}

/// H_k = −¼ ∂_tŜ_jl Ŝ⁻¹_lm ε_jmk, with a five-point derivative of step `h`.
pub fn hamiltonian_from_rotation(
    s: impl Fn(f64) -> Matrix3<f64>,
    t: f64,
    h: f64,
) -> Result<[f64; 3]> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(
            "difference step must be positive".into(),
        ));
    }
    let ds = (s(t - 2.0 * h) - s(t - h) * 8.0 + s(t + h) * 8.0 - s(t + 2.0 * h)) / (12.0 * h);
    let inv = s(t)
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("S(t) is singular".into()))?;
    let w = ds * inv;
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..3 {
            for m in 0..3 {
                acc += w[(j, m)] * levi_civita(j, m, k);
            }
        }
        *o = -0.25 * acc;
    }
    Ok(out)
}

/// ∂ρ/∂t = −i[Ĥ, ρ] + D(ρ − 1/d), with D a function of (ρ_k, t).
/// Aborts if Σρ_k² leaves its allowed range by more than 1e-9.
pub fn integrate_open(
    rho0: &DensityMatrix,
    h: &Hamiltonian,
    d: impl Fn(&[f64], f64) -> f64,
    span: TimeSpan,
    dt: f64,
) -> Result<Trajectory> {
    let dim = rho0.dim();
    let hm = h.checked(dim)?;
    let level = rho0.level();
    let mixed = identity(dim) / C64::new(dim as f64, 0.0);
    let f = |t: f64, r: &CMatrix| {
        let rate = d(&bloch_of(r), t);
        if !rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rate D = {rate} at t = {t}"
            )));
        }
        Ok(commutator_rhs(&hm, r) + (r - &mixed) * C64::new(rate, 0.0))
    };
    let limit = level.max_purity() + 1e-9;
    let check = |t: f64, r: &CMatrix| -> Result<(Vec<f64>, f64)> {
        let b = bloch_of(r);
        let p: f64 = b.iter().map(|x| x * x).sum();
        if p > limit {
            return Err(Error::ConstraintViolation(format!(
                "purity {p} exceeds {} at t = {t}",
                level.max_purity()
            )));
        }
        Ok((b, p))
    };
    let mut traj = Trajectory::default();
    let last = integrate(&f, rho0.matrix(), span, dt, |t, r| {
        let (b, p) = check(t, r)?;
        traj.rate.push(d(&b, t));
        traj.times.push(t);
        traj.purity.push(p);
        traj.bloch.push(b);
        Ok(())
    })?;
    traj.error_estimate = halving_error(&f, rho0.matrix(), span, dt, &last)?;
    Ok(traj)
}

/// How the purity responds to the scaling rate in the flow of (P, D).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurityLaw {
    /// ∂_t P = D: the linear system whose solution is the two-exponential
    /// approach to P = 1 with rates ½(a ± √(a² − 4b)).
    #[default]
    Linear,
    /// ∂_t P = 2DP, as for a pure rescaling of ρ_k.
    Scaling,
}

/// β_D = −aD + b(1 − P).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub law: PurityLaw,
}

impl FlowParams {
    pub fn new(a: f64, b: f64) -> Self {
        FlowParams {
            a,
            b,
            law: PurityLaw::Linear,
        }
    }

    /// a > 0 and 0 < b < a²/4: real, distinct, positive decay rates.
    pub fn has_fixed_point(&self) -> bool {
        self.a > 0.0 && self.b > 0.0 && self.b < self.a * self.a / 4.0
    }

    /// (ε₁, ε₂) = ½(a ± √(a² − 4b)).
    pub fn rates(&self) -> Result<(f64, f64)> {
        if !self.has_fixed_point() {
            return Err(Error::InvalidParameter(format!(
                "a = {}, b = {} outside a > 0, 0 < b < a^2/4",
                self.a, self.b
            )));
        }
        let r = (self.a * self.a - 4.0 * self.b).sqrt();
        Ok((0.5 * (self.a + r), 0.5 * (self.a - r)))
    }
}

/// Closed form near the fixed point: 1 − P = x₁e^{−ε₁t} + x₂e^{−ε₂t},
/// D = ε₁x₁e^{−ε₁t} + ε₂x₂e^{−ε₂t}, with x₁, x₂ from (P₀, D₀).
pub fn syncoherence_closed_form(
    p0: f64,
    d0: f64,
    params: &FlowParams,
    t: f64,
) -> Result<(f64, f64)> {
    let (e1, e2) = params.rates()?;
    let u0 = 1.0 - p0;
    let x1 = (d0 - e2 * u0) / (e1 - e2);
    let x2 = u0 - x1;
    let (a, b) = ((-e1 * t).exp(), (-e2 * t).exp());
    Ok((1.0 - x1 * a - x2 * b, e1 * x1 * a + e2 * x2 * b))
}

/// Integrates ∂_t D = −aD + b(1 − P) together with the purity law.
/// Rows of the trajectory have `purity` = P and `rate` = D.
pub fn syncoherence_flow(
    p0: f64,
    d0: f64,
    params: &FlowParams,
    span: TimeSpan,
    dt: f64,
) -> Result<Trajectory> {
    if !(0.0..=1.0).contains(&p0) || !d0.is_finite() {
        return Err(Error::InvalidParameter(format!("P0 = {p0}, D0 = {d0}")));
    }
    let FlowParams { a, b, law } = *params;
    let f = move |_t: f64, y: &Vec<f64>| {
        let (p, d) = (y[0], y[1]);
        let dp = match law {
            PurityLaw::Linear => d,
            PurityLaw::Scaling => 2.0 * d * p,
        };
        Ok(vec![dp, -a * d + b * (1.0 - p)])
    };
    let y0 = vec![p0, d0];
    let mut traj = Trajectory::default();
    let last = integrate(&f, &y0, span, dt, |t, y| {
        if y[0] > 1.0 + 1e-9 {
            return Err(Error::ConstraintViolation(format!(
                "purity {} exceeds 1 at t = {t}",
                y[0]
            )));
        }
        traj.times.push(t);
        traj.purity.push(y[0]);
        traj.rate.push(y[1]);
        Ok(())
    })?;
    traj.error_estimate = halving_error(&f, &y0, span, dt, &last)?;
    Ok(traj)
}
