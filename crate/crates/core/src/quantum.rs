//! Matrix formalism: Pauli and L_k algebra, density matrices, wave functions
//! and operator products. Classical results elsewhere in the crate are
//! checked against the functions here.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::observables::TwoLevelObservable;
use crate::state::{BlochState, Level};
use crate::TOL;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Pauli matrix τ_k, k = 1, 2, 3.
pub fn pauli(k: usize) -> CMatrix {
    match k {
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("pauli index {k} out of range"),
    }
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m.view_mut((0, 0), (2, 2)).copy_from(a);
    m.view_mut((2, 2), (2, 2)).copy_from(b);
    m
}

fn swap_rows_cols(m: &CMatrix, i: usize, j: usize) -> CMatrix {
    let mut out = m.clone();
    out.swap_rows(i, j);
    out.swap_columns(i, j);
    out
}

fn diag(v: [f64; 4]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        4,
        v.iter().map(|&x| C64::new(x, 0.0)),
    ))
}

/// The fifteen 4×4 generators L_1 … L_15.
#[derive(Clone, Debug)]
pub struct LBasis {
    mats: Vec<CMatrix>,
}

impl LBasis {
    /// L_1…L_7 written out, L_8…L_11 from L_4…L_7 by exchanging the second and
    /// third rows and columns, L_12…L_15 by exchanging the second and fourth.
    pub fn construct() -> Self {
        let t1 = pauli(1);
        let t2 = pauli(2);
        let mut mats = vec![
            diag([1.0, 1.0, -1.0, -1.0]),
            diag([1.0, -1.0, 1.0, -1.0]),
            diag([1.0, -1.0, -1.0, 1.0]),
            block_diag(&t1, &t1),
            block_diag(&t2, &t2),
            block_diag(&t1, &(-&t1)),
            block_diag(&t2, &(-&t2)),
        ];
        for (a, b) in [(1, 2), (1, 3)] {
            for k in 3..7 {
                let m = swap_rows_cols(&mats[k], a, b);
                mats.push(m);
            }
        }
        LBasis { mats }
    }

    pub fn standard() -> &'static LBasis {
        static BASIS: OnceLock<LBasis> = OnceLock::new();
        BASIS.get_or_init(LBasis::construct)
    }

    /// Wraps arbitrary matrices without checking them; see [`LBasis::validate`].
    pub fn from_matrices(mats: Vec<CMatrix>) -> Self {
        LBasis { mats }
    }

    /// L_k with 1-based label.
    pub fn get(&self, k: usize) -> &CMatrix {
        &self.mats[k - 1]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.mats
    }

    /// Checks L_k² = 1, tr L_k = 0 and tr(L_k L_l) = 4δ_kl.
    pub fn validate(&self) -> Result<()> {
        if self.mats.len() != 15 {
            return Err(Error::DimensionMismatch {
                expected: 15,
                got: self.mats.len(),
            });
        }
        let id = identity(4);
        for (k, m) in self.mats.iter().enumerate() {
            if m.nrows() != 4 || m.ncols() != 4 {
                return Err(Error::DimensionMismatch {
                    expected: 4,
                    got: m.nrows(),
                });
            }
            if max_abs(&(m * m - &id)) > TOL {
                return Err(Error::ConstraintViolation(format!("L{}^2 != 1", k + 1)));
            }
            if m.trace().norm() > TOL {
                return Err(Error::ConstraintViolation(format!("tr L{} != 0", k + 1)));
            }
            for (l, n) in self.mats.iter().enumerate() {
                let t = (m * n).trace();
                let want = if k == l { 4.0 } else { 0.0 };
                if (t - C64::new(want, 0.0)).norm() > TOL {
                    return Err(Error::ConstraintViolation(format!(
                        "tr(L{} L{}) = {t}, expected {want}",
                        k + 1,
                        l + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Generators for the given level: τ_k for two-state, L_k for four-state.
pub fn generators(level: Level) -> Vec<CMatrix> {
    match level {
        Level::Two => (1..=3).map(pauli).collect(),
        Level::Four => LBasis::standard().matrices().to_vec(),
    }
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.adjoint())) <= tol
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix. The 2×2
/// case is solved in closed form.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, Vec<CVector>)> {
    let scale = max_abs(m).max(1.0);
    if !is_hermitian(m, TOL * scale) {
        return Err(Error::NotHermitian);
    }
    if m.nrows() == 2 {
        return Ok(eigen_2x2(m));
    }
    let eig = m.clone().symmetric_eigen();
    let mut pairs: Vec<(f64, CVector)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, eig.eigenvectors.column(i).into_owned()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

fn eigen_2x2(m: &CMatrix) -> (Vec<f64>, Vec<CVector>) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = (half * half + b.norm_sqr()).sqrt();
    let vals = [mean - r, mean + r];
    let vecs = vals
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            // (A - l) v = 0: take whichever row gives the better-conditioned vector.
            let u = CVector::from_vec(vec![b, C64::new(l - a, 0.0)]);
            let w = CVector::from_vec(vec![C64::new(l - d, 0.0), b.conj()]);
            let v = if u.norm() >= w.norm() { u } else { w };
            let n = v.norm();
            if n < 1e-300 {
                // Multiple of the identity.
                let mut e = CVector::zeros(2);
                e[i] = ONE;
                e
            } else {
                v.map(|z| z / n)
            }
        })
        .collect();
    (vals.to_vec(), vecs)
}

fn fix_phase(mut v: CVector) -> CVector {
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-9).copied() {
        let phase = z.conj() / z.norm();
        v.iter_mut().for_each(|c| *c *= phase);
    }
    v
}

/// Hermitian, unit-trace, positive semidefinite 2×2 or 4×4 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        Level::from_hilbert_dim(m.nrows())?;
        if !is_hermitian(&m, TOL) {
            return Err(Error::NotHermitian);
        }
        let tr = m.trace();
        if (tr - ONE).norm() > TOL {
            return Err(Error::NotNormalized {
                what: "trace",
                value: tr.re,
                expected: 1.0,
            });
        }
        let (vals, _) = hermitian_eigen(&m)?;
        if let Some(&v) = vals.iter().find(|&&v| v < -TOL) {
            return Err(Error::ConstraintViolation(format!(
                "negative eigenvalue {v}"
            )));
        }
        let dm = DensityMatrix(m);
        let p = dm.trace_square();
        if p > 1.0 + TOL {
            return Err(Error::ConstraintViolation(format!("tr rho^2 = {p}")));
        }
        Ok(dm)
    }

    pub(crate) fn new_unchecked(m: CMatrix) -> Self {
        DensityMatrix(m)
    }

    pub fn maximally_mixed(level: Level) -> Self {
        let d = level.hilbert_dim();
        DensityMatrix(identity(d) / C64::new(d as f64, 0.0))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn level(&self) -> Level {
        Level::from_hilbert_dim(self.dim()).expect("validated on construction")
    }

    /// tr ρ².
    pub fn trace_square(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.0).map(|(v, _)| v).unwrap_or_default()
    }
}

/// A 2×2 or 4×4 complex matrix; Hermitian when it represents an observable.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(CMatrix);

impl Operator {
    pub fn new(m: CMatrix) -> Result<Self> {
        Level::from_hilbert_dim(m.nrows())?;
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        Ok(Operator(m))
    }

    /// Â = e_k τ_k + e₀ (two-state) or e_k L_k + e₀ (four-state).
    pub fn from_observable(a: &TwoLevelObservable) -> Self {
        let level = a.level();
        let d = level.hilbert_dim();
        let mut m = identity(d) * C64::new(a.e0(), 0.0);
        for (g, &e) in generators(level).iter().zip(a.e()) {
            m += g * C64::new(e, 0.0);
        }
        Operator(m)
    }

    /// Recovers (e, e₀) through e_k = tr(Â G_k)/d and e₀ = tr(Â)/d.
    pub fn coefficients(&self) -> (Vec<f64>, f64) {
        let level = self.level();
        let d = level.hilbert_dim() as f64;
        let e = generators(level)
            .iter()
            .map(|g| (&self.0 * g).trace().re / d)
            .collect();
        (e, self.0.trace().re / d)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn level(&self) -> Level {
        Level::from_hilbert_dim(self.dim()).expect("validated on construction")
    }

    pub fn is_hermitian(&self) -> bool {
        is_hermitian(&self.0, TOL)
    }

    pub fn anticommutator(&self, other: &Operator) -> Operator {
        Operator(&self.0 * &other.0 + &other.0 * &self.0)
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        Operator(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// ½(1 ± Â): the spectral projector of a ±1 observable.
    pub fn projector(&self, sign: i8) -> CMatrix {
        let s = C64::new(f64::from(sign.signum()), 0.0);
        (identity(self.dim()) + &self.0 * s) * C64::new(0.5, 0.0)
    }
}

/// Normalized complex 2- or 4-vector.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction(CVector);

impl WaveFunction {
    pub fn new(v: CVector) -> Result<Self> {
        Level::from_hilbert_dim(v.len())?;
        let n = v.norm_squared();
        if (n - 1.0).abs() > TOL {
            return Err(Error::NotNormalized {
                what: "psi^dagger psi",
                value: n,
                expected: 1.0,
            });
        }
        Ok(WaveFunction(v))
    }

    /// Normalizes any nonzero vector.
    pub fn normalized(v: CVector) -> Result<Self> {
        let n = v.norm();
        if n < 1e-300 || !n.is_finite() {
            return Err(Error::ZeroMass);
        }
        Self::new(v.map(|z| z / n))
    }

    pub fn from_slice(v: &[C64]) -> Result<Self> {
        Self::normalized(CVector::from_column_slice(v))
    }

    pub fn vector(&self) -> &CVector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// ρ_αβ = ψ_α ψ*_β.
    pub fn density_matrix(&self) -> DensityMatrix {
        DensityMatrix(&self.0 * self.0.adjoint())
    }

    /// ψ† M ψ.
    pub fn expectation(&self, m: &CMatrix) -> C64 {
        (self.0.adjoint() * m * &self.0)[(0, 0)]
    }
}

pub(crate) fn density_matrix_raw(state: &BlochState) -> CMatrix {
    let level = state.level();
    let d = level.hilbert_dim();
    let mut m = identity(d);
    for (g, &r) in generators(level).iter().zip(state.rho()) {
        m += g * C64::new(r, 0.0);
    }
    m / C64::new(d as f64, 0.0)
}

/// ρ = ½(1 + ρ_k τ_k) or ¼(1 + ρ_k L_k).
pub fn density_from_bloch(state: &BlochState) -> DensityMatrix {
    DensityMatrix(density_matrix_raw(state))
}

/// ρ_k = tr(ρ τ_k) or tr(ρ L_k).
pub fn bloch_from_density(rho: &DensityMatrix) -> BlochState {
    let level = rho.level();
    let comps = generators(level)
        .iter()
        .map(|g| (rho.matrix() * g).trace().re)
        .collect();
    BlochState::from_parts_unchecked(level, comps)
}

/// tr(Âρ) for a Hermitian operator.
pub fn qm_expectation(op: &Operator, rho: &DensityMatrix) -> Result<f64> {
    let t = trace_product(op, rho)?;
    if t.im.abs() > TOL * max_abs(op.matrix()).max(1.0) {
        return Err(Error::NotHermitian);
    }
    Ok(t.re)
}

/// tr(Âρ) for any operator.
pub fn trace_product(op: &Operator, rho: &DensityMatrix) -> Result<C64> {
    if op.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: op.dim(),
        });
    }
    Ok((op.matrix() * rho.matrix()).trace())
}

/// The wave function of a pure density matrix. The global phase is chosen
/// so that the first component with modulus above 1e-9 is real and positive.
pub fn wavefunction_from_pure(rho: &DensityMatrix) -> Result<WaveFunction> {
    let p = rho.trace_square();
    if (p - 1.0).abs() > 1e-9 {
        return Err(Error::NotPure(p));
    }
    let m = rho.matrix();
    let j = (0..rho.dim())
        .max_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re))
        .expect("nonempty");
    let col = m.column(j).into_owned();
    let psi = fix_phase(col.map(|z| z / m[(j, j)].re.sqrt()));
    WaveFunction::normalized(psi)
}

/// |⟨a|b⟩|².
pub fn transition_probability(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.0.dotc(&b.0).norm_sqr())
}

/// Eigenvector of a nondegenerate two-state ±1 observable.
pub fn eigenstate(op: &Operator, sign: i8) -> Result<WaveFunction> {
    if op.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: op.dim(),
        });
    }
    let (_, vecs) = hermitian_eigen(op.matrix())?;
    let v = if sign > 0 {
        vecs[1].clone()
    } else {
        vecs[0].clone()
    };
    WaveFunction::normalized(fix_phase(v))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductExpectations {
    pub re_ab: f64,
    pub re_abc: f64,
}

/// Re⟨AB⟩ = ½tr({A,B}ρ) and Re⟨ABC⟩ = ¼tr(({{A,B},C} + [[A,B],C])ρ).
pub fn operator_product_expectations(
    a: &Operator,
    b: &Operator,
    c: &Operator,
    rho: &DensityMatrix,
) -> Result<ProductExpectations> {
    let ab = a.anticommutator(b);
    let re_ab = 0.5 * trace_product(&ab, rho)?.re;
    let sym = ab.anticommutator(c);
    let comm = a.commutator(b).commutator(c);
    let re_abc = 0.25 * (trace_product(&sym, rho)?.re + trace_product(&comm, rho)?.re);
    Ok(ProductExpectations { re_ab, re_abc })
}

/// ¼tr({{A,B},C}ρ): the single-order three-point value.
pub fn ordered_three_point(
    a: &Operator,
    b: &Operator,
    c: &Operator,
    rho: &DensityMatrix,
) -> Result<f64> {
    let m = a.anticommutator(b).anticommutator(c);
    Ok(0.25 * trace_product(&m, rho)?.re)
}

/// ÂB̂ = e₀ + e_k τ_k for two-state spins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantumProduct {
    pub e0: f64,
    pub e: [C64; 3],
}

pub fn quantum_product(a: &TwoLevelObservable, b: &TwoLevelObservable) -> Result<QuantumProduct> {
    if a.level() != Level::Two || b.level() != Level::Two {
        return Err(Error::WrongManifold(
            "quantum product is defined for two-state spins",
        ));
    }
    if a.e0() != 0.0 || b.e0() != 0.0 {
        return Err(Error::NotASpin);
    }
    let (x, y) = (a.e(), b.e());
    let e0 = crate::state::dot(x, y);
    let cross = [
        x[1] * y[2] - x[2] * y[1],
        x[2] * y[0] - x[0] * y[2],
        x[0] * y[1] - x[1] * y[0],
    ];
    Ok(QuantumProduct {
        e0,
        e: cross.map(|c| I * c),
    })
}

/// Row-major `[[re, im], …]` encoding of a square complex matrix.
pub mod matrix_json {
    use super::*;

    pub fn to_pairs(m: &CMatrix) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        out
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<CMatrix> {
        let d = (pairs.len() as f64).sqrt().round() as usize;
        if d * d != pairs.len() {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: pairs.len(),
            });
        }
        let entries: Vec<C64> = pairs.iter().map(|p| C64::new(p[0], p[1])).collect();
        Ok(CMatrix::from_row_slice(d, d, &entries))
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_json::to_pairs(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        let m = matrix_json::from_pairs(&pairs).map_err(serde::de::Error::custom)?;
        DensityMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_json::to_pairs(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        let m = matrix_json::from_pairs(&pairs).map_err(serde::de::Error::custom)?;
        Operator::new(m).map_err(serde::de::Error::custom)
    }
}
