//! Products of observables: pointwise, classical (substate) and conditional,
//! together with sequence probabilities, measurement chains and a Monte Carlo
//! simulator of measurement sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Ensemble, SubstateEnsemble};
use crate::observables::{check_level, Observable, TwoLevelObservable};
use crate::quantum::{self, identity, DensityMatrix, Operator, C64};
use crate::state::{BlochState, Level};
use crate::TOL;

fn two_state_spin(a: &TwoLevelObservable) -> Result<()> {
    a.require_spin()?;
    if a.level() != Level::Two {
        return Err(Error::WrongManifold("expected a two-state spin"));
    }
    Ok(())
}

fn spin_of(o: &Observable) -> Result<&TwoLevelObservable> {
    match o {
        Observable::Spin(a) => {
            two_state_spin(a)?;
            Ok(a)
        }
        _ => Err(Error::NoEigenstate),
    }
}

/// ⟨A⟩ in the eigenstate ρ_{+B}: e_A·e_B.
pub fn conditional_expectation_in_eigenstate(
    a: &TwoLevelObservable,
    b: &TwoLevelObservable,
) -> Result<f64> {
    two_state_spin(a)?;
    two_state_spin(b)?;
    a.expectation(&b.eigenstate(1)?)
}

/// ½(1 + ⟨B⟩)⟨A⟩_{+B} − ½(1 − ⟨B⟩)⟨A⟩_{−B}.
pub fn conditional_correlation_2pt(
    a: &TwoLevelObservable,
    b: &TwoLevelObservable,
    state: &BlochState,
) -> Result<f64> {
    two_state_spin(a)?;
    two_state_spin(b)?;
    let bm = b.expectation(state)?;
    let plus = a.expectation(&b.eigenstate(1)?)?;
    let minus = a.expectation(&b.eigenstate(-1)?)?;
    Ok(0.5 * (1.0 + bm) * plus - 0.5 * (1.0 - bm) * minus)
}

/// ⟨A∘B∘C⟩ from the means of A and B in the eigenstates of B and C.
/// A may be any observable; B and C need eigenstates.
pub fn conditional_correlation_3pt(
    a: &Observable,
    b: &Observable,
    c: &Observable,
    state: &BlochState,
) -> Result<f64> {
    let b = spin_of(b)?;
    let c = spin_of(c)?;
    let bp = b.eigenstate(1)?;
    let bn = b.eigenstate(-1)?;
    let a_pb = a.mean(&bp)?;
    let a_mb = a.mean(&bn)?;
    let b_pc = b.expectation(&c.eigenstate(1)?)?;
    let b_mc = b.expectation(&c.eigenstate(-1)?)?;
    let cm = c.expectation(state)?;
    // Expanded in powers of ⟨C⟩ so that integer conditional means give
    // results without rounding.
    let (sum_a, diff_a) = (a_pb + a_mb, a_pb - a_mb);
    Ok(0.25 * (sum_a * (b_pc - b_mc) + cm * (2.0 * diff_a + sum_a * (b_pc + b_mc))))
}

/// A∘B. The result is characterized by the means of A in the two
/// eigenstates of B; it reduces to 1, R or a spin where possible.
pub fn conditional_product(a: &Observable, b: &Observable) -> Result<Observable> {
    let b = match b {
        Observable::Unit => return Ok(a.clone()),
        other => spin_of(other)?,
    };
    if let Observable::Random = a {
        return Ok(Observable::Random);
    }
    let plus = a.mean(&b.eigenstate(1)?)?;
    let minus = a.mean(&b.eigenstate(-1)?)?;
    let near = |x: f64, y: f64| (x - y).abs() <= TOL;
    Ok(if near(plus, 1.0) && near(minus, -1.0) {
        Observable::Unit
    } else if near(plus, 0.0) && near(minus, 0.0) {
        Observable::Random
    } else if near(plus, 1.0) && near(minus, 1.0) {
        Observable::Spin(b.clone())
    } else if near(plus, -1.0) && near(minus, -1.0) {
        Observable::Spin(b.scale(-1.0))
    } else {
        Observable::Conditional {
            plus,
            minus,
            condition: b.clone(),
        }
    })
}

/// Joint probabilities W^{AB}_{ab} for measuring B first, then A; the first
/// index is the outcome of A.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceProbabilities {
    pub pp: f64,
    pub pm: f64,
    pub mp: f64,
    pub mm: f64,
}

impl SequenceProbabilities {
    pub fn total(&self) -> f64 {
        self.pp + self.pm + self.mp + self.mm
    }

    /// Probability that the two outcomes agree; independent of the order.
    pub fn same_sign(&self) -> f64 {
        self.pp + self.mm
    }
}

pub fn sequence_probabilities(
    a: &TwoLevelObservable,
    b: &TwoLevelObservable,
    state: &BlochState,
) -> Result<SequenceProbabilities> {
    two_state_spin(a)?;
    two_state_spin(b)?;
    let bm = b.expectation(state)?;
    let a_pb = a.expectation(&b.eigenstate(1)?)?;
    let a_mb = a.expectation(&b.eigenstate(-1)?)?;
    let w = |sa: f64, cond: f64, sb: f64| 0.25 * (1.0 + sa * cond) * (1.0 + sb * bm);
    Ok(SequenceProbabilities {
        pp: w(1.0, a_pb, 1.0),
        pm: w(1.0, a_mb, -1.0),
        mp: w(-1.0, a_pb, 1.0),
        mm: w(-1.0, a_mb, -1.0),
    })
}

/// Σ_σ p_σ Ā_σ B̄_σ.
pub fn pointwise_correlation(
    a: &TwoLevelObservable,
    b: &TwoLevelObservable,
    ensemble: &Ensemble,
) -> Result<f64> {
    check_level(a.level(), ensemble.level())?;
    check_level(b.level(), ensemble.level())?;
    let mut s = 0.0;
    for (m, p) in ensemble.points() {
        s += p * a.mean_in_state(m)? * b.mean_in_state(m)?;
    }
    Ok(s)
}

/// Σ_τ p_τ γ_τ(e_A) γ_τ(e_B) over a product-form substate ensemble.
pub fn classical_correlation(
    substates: &SubstateEnsemble,
    e_a: [f64; 3],
    e_b: [f64; 3],
) -> Result<f64> {
    let a = substates.assignment(e_a)?;
    let b = substates.assignment(e_b)?;
    classical_correlation_assigned(&substates.probabilities(), &a, &b)
}

/// Σ_τ p_τ A_τ B_τ for explicit sharp values.
pub fn classical_correlation_assigned(probs: &[f64], a: &[i8], b: &[i8]) -> Result<f64> {
    if a.len() != probs.len() || b.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            got: a.len().min(b.len()),
        });
    }
    Ok(probs
        .iter()
        .zip(a.iter().zip(b))
        .map(|(p, (x, y))| p * f64::from(x * y))
        .sum())
}

/// Signed combination of reduced density matrices produced by a chain of
/// measurement maps. Its trace is the running correlation.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedEigenstateSum {
    pub terms: Vec<(f64, DensityMatrix)>,
}

impl WeightedEigenstateSum {
    pub fn trace(&self) -> f64 {
        self.terms
            .iter()
            .map(|(w, r)| w * r.matrix().trace().re)
            .sum()
    }

    fn push_merged(&mut self, w: f64, rho: DensityMatrix) {
        if let Some(t) = self
            .terms
            .iter_mut()
            .find(|(_, r)| quantum::max_abs(&(r.matrix() - rho.matrix())) <= TOL)
        {
            t.0 += w;
        } else {
            self.terms.push((w, rho));
        }
    }
}

enum Step {
    /// A ±1 observable with its operator.
    Measure(Operator),
    /// Outcome probability fixed by a mean value that needs no state
    /// reduction: R (mean 0) or a conditional mean function.
    Final(Observable),
    Skip,
}

fn steps(observables: &[Observable], level: Level) -> Result<Vec<Step>> {
    observables
        .iter()
        .enumerate()
        .map(|(i, o)| match o {
            Observable::Unit => Ok(Step::Skip),
            Observable::Spin(a) => {
                check_level(a.level(), level)?;
                let op = Operator::from_observable(a);
                let sq = op.matrix() * op.matrix() - identity(op.dim());
                if a.e0() != 0.0 || quantum::max_abs(&sq) > TOL {
                    return Err(Error::NotASpin);
                }
                Ok(Step::Measure(op))
            }
            Observable::Random | Observable::Conditional { .. } if i == 0 => {
                if level != Level::Two && !matches!(o, Observable::Random) {
                    return Err(Error::WrongManifold(
                        "conditional mean functions are two-state",
                    ));
                }
                Ok(Step::Final(o.clone()))
            }
            _ => Err(Error::NoEigenstate),
        })
        .collect()
}

/// Probability of outcome `sign` and the reduced state. Two-state spins
/// reduce to ½(1 ± Â); four-state observables reduce projectively.
pub fn reduce_on_outcome(
    op: &Operator,
    rho: &DensityMatrix,
    sign: i8,
) -> Option<(f64, DensityMatrix)> {
    let proj = op.projector(sign);
    let p = (&proj * rho.matrix()).trace().re;
    if p <= 0.0 {
        return None;
    }
    let m = if op.dim() == 2 {
        proj
    } else {
        (&proj * rho.matrix() * &proj) / C64::new(p, 0.0)
    };
    Some((p.min(1.0), DensityMatrix::new_unchecked(m)))
}

fn final_prob_plus(o: &Observable, rho: &DensityMatrix) -> Result<f64> {
    match o {
        Observable::Random => Ok(0.5),
        other => {
            let state = quantum::bloch_from_density(rho);
            Ok(0.5 * (1.0 + other.mean(&state)?))
        }
    }
}

/// Applies the measurement maps right to left (the rightmost observable is
/// measured first). Each map sends a term w·ρ to w·(p₊ρ₊ − p₋ρ₋).
pub fn measurement_chain(
    observables: &[Observable],
    rho: &DensityMatrix,
) -> Result<(WeightedEigenstateSum, f64)> {
    let steps = steps(observables, rho.level())?;
    let mut sum = WeightedEigenstateSum {
        terms: vec![(1.0, rho.clone())],
    };
    for step in steps.iter().rev() {
        let mut next = WeightedEigenstateSum { terms: Vec::new() };
        for (w, r) in &sum.terms {
            match step {
                Step::Skip => next.push_merged(*w, r.clone()),
                Step::Final(o) => {
                    let pp = final_prob_plus(o, r)?;
                    next.push_merged(w * (2.0 * pp - 1.0), r.clone());
                }
                Step::Measure(op) => {
                    for sign in [1i8, -1] {
                        if let Some((p, reduced)) = reduce_on_outcome(op, r, sign) {
                            next.push_merged(w * f64::from(sign) * p, reduced);
                        }
                    }
                }
            }
        }
        sum = next;
    }
    let value = sum.trace();
    Ok((sum, value))
}

/// Outcome of one simulated sequence, in measurement order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// (position in the product, outcome).
    pub outcomes: Vec<(usize, i8)>,
}

impl MeasurementRecord {
    pub fn value(&self) -> i8 {
        self.outcomes.iter().map(|(_, s)| *s).product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

const MAX_CHAIN: usize = 20;
/// Samples per RNG stream. Streams are indexed by block, so results do not
/// depend on how blocks are spread over threads.
const BLOCK: u64 = 1 << 16;

/// Probability of + at every node of the outcome tree, in measurement
/// order. Node i has children 2i+1 (+) and 2i+2 (−).
fn outcome_tree(observables: &[Observable], rho: &DensityMatrix) -> Result<Vec<f64>> {
    if observables.len() > MAX_CHAIN {
        return Err(Error::InvalidParameter(format!(
            "chain of {} observables (at most {MAX_CHAIN})",
            observables.len()
        )));
    }
    let steps = steps(observables, rho.level())?;
    let depth = steps.len();
    let mut tree = vec![0.5; (1usize << depth) - 1];
    let mut level_states: Vec<Option<DensityMatrix>> = vec![Some(rho.clone())];
    let mut offset = 0;
    for step in steps.iter().rev() {
        let mut next = Vec::with_capacity(2 * level_states.len());
        for (i, st) in level_states.iter().enumerate() {
            let node = offset + i;
            let (pp, plus, minus) = match (st, step) {
                (None, _) => (0.5, None, None),
                (Some(r), Step::Skip) => (1.0, Some(r.clone()), None),
                (Some(r), Step::Final(o)) => {
                    (final_prob_plus(o, r)?, Some(r.clone()), Some(r.clone()))
                }
                (Some(r), Step::Measure(op)) => {
                    let plus = reduce_on_outcome(op, r, 1);
                    let minus = reduce_on_outcome(op, r, -1);
                    let pp = match (&plus, &minus) {
                        (Some((p, _)), Some((q, _))) => p / (p + q),
                        (Some(_), None) => 1.0,
                        _ => 0.0,
                    };
                    (pp, plus.map(|x| x.1), minus.map(|x| x.1))
                }
            };
            tree[node] = pp;
            next.push(plus);
            next.push(minus);
        }
        offset += level_states.len();
        level_states = next;
    }
    Ok(tree)
}

fn walk(tree: &[f64], depth: usize, rng: &mut ChaCha8Rng, mut record: Option<&mut Vec<i8>>) -> i8 {
    let mut node = 0;
    let mut value = 1i8;
    for _ in 0..depth {
        let u: f64 = rng.gen();
        if u < tree[node] {
            node = 2 * node + 1;
            if let Some(r) = record.as_mut() {
                r.push(1);
            }
        } else {
            node = 2 * node + 2;
            value = -value;
            if let Some(r) = record.as_mut() {
                r.push(-1);
            }
        }
    }
    value
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Monte Carlo estimate of ⟨A∘B∘…⟩: outcomes are drawn one measurement at a
/// time from the reduced state left by the previous outcomes.
pub fn simulate_sequences(
    observables: &[Observable],
    rho: &DensityMatrix,
    n: u64,
    seed: u64,
) -> Result<SimulationResult> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let tree = outcome_tree(observables, rho)?;
    let depth = steps(observables, rho.level())?.len();
    let blocks = n.div_ceil(BLOCK);
    let plus: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b);
            let count = BLOCK.min(n - b * BLOCK);
            (0..count)
                .filter(|_| walk(&tree, depth, &mut rng, None) > 0)
                .count() as u64
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let nf = n as f64;
    let value = (2.0 * plus as f64 - nf) / nf;
    let var = (1.0 - value * value).max(0.0) / (nf - 1.0).max(1.0);
    Ok(SimulationResult {
        value,
        stderr: var.sqrt(),
        n,
        seed,
    })
}

/// The first `count` records of the stream used by [`simulate_sequences`].
pub fn sample_records(
    observables: &[Observable],
    rho: &DensityMatrix,
    count: u64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    let tree = outcome_tree(observables, rho)?;
    let depth = steps(observables, rho.level())?.len();
    let order: Vec<usize> = (0..observables.len()).rev().collect();
    let mut out = Vec::with_capacity(count as usize);
    let mut rng = block_rng(seed, 0);
    for i in 0..count {
        if i > 0 && i % BLOCK == 0 {
            rng = block_rng(seed, i / BLOCK);
        }
        let mut signs = Vec::with_capacity(depth);
        walk(&tree, depth, &mut rng, Some(&mut signs));
        out.push(MeasurementRecord {
            outcomes: order.iter().copied().zip(signs).collect(),
        });
    }
    Ok(out)
}

/// Exact probabilities of every outcome history (measurement order).
pub fn sequence_distribution(
    observables: &[Observable],
    rho: &DensityMatrix,
) -> Result<Vec<(Vec<i8>, f64)>> {
    let tree = outcome_tree(observables, rho)?;
    let depth = steps(observables, rho.level())?.len();
    let mut out = Vec::with_capacity(1 << depth);
    for leaf in 0..(1usize << depth) {
        let mut node = 0;
        let mut p = 1.0;
        let mut signs = Vec::with_capacity(depth);
        for k in (0..depth).rev() {
            if leaf >> k & 1 == 0 {
                p *= tree[node];
                node = 2 * node + 1;
                signs.push(1);
            } else {
                p *= 1.0 - tree[node];
                node = 2 * node + 2;
                signs.push(-1);
            }
        }
        out.push((signs, p));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::density_from_bloch;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn spin(k: usize) -> TwoLevelObservable {
        TwoLevelObservable::basis(Level::Two, k)
    }

    fn rho() -> BlochState {
        BlochState::two([0.3, -0.5, 0.6]).unwrap()
    }

    #[test]
    fn eigenstate_conditionals() {
        assert_eq!(
            conditional_expectation_in_eigenstate(&spin(1), &spin(1)).unwrap(),
            1.0
        );
        assert_eq!(
            conditional_expectation_in_eigenstate(&spin(1), &spin(2)).unwrap(),
            0.0
        );
        let d = TwoLevelObservable::planar(std::f64::consts::FRAC_PI_4);
        let v = conditional_expectation_in_eigenstate(&spin(1), &d).unwrap();
        assert!((v - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn two_point_examples() {
        let r = rho();
        assert_eq!(
            conditional_correlation_2pt(&spin(1), &spin(1), &r).unwrap(),
            1.0
        );
        assert_eq!(
            conditional_correlation_2pt(&spin(1), &spin(2), &r).unwrap(),
            0.0
        );
        let b = TwoLevelObservable::spin(vec![FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2]).unwrap();
        let v = conditional_correlation_2pt(&spin(1), &b, &r).unwrap();
        assert!((v - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn three_point_order() {
        let r = rho();
        let (a1, a3) = (Observable::from(spin(1)), Observable::from(spin(3)));
        let v = conditional_correlation_3pt(&a1, &a1, &a3, &r).unwrap();
        assert!((v - 0.6).abs() < 1e-15);
        let w = conditional_correlation_3pt(&a1, &a3, &a1, &r).unwrap();
        assert_eq!(w, 0.0);
        assert!(matches!(
            conditional_correlation_3pt(&a1, &a1, &Observable::Random, &r),
            Err(Error::NoEigenstate)
        ));
    }

    #[test]
    fn product_table() {
        let (a1, a2) = (Observable::from(spin(1)), Observable::from(spin(2)));
        assert_eq!(conditional_product(&a1, &a1).unwrap(), Observable::Unit);
        assert_eq!(conditional_product(&a1, &a2).unwrap(), Observable::Random);
        assert_eq!(
            conditional_product(&Observable::Random, &a1).unwrap(),
            Observable::Random
        );
        assert!(matches!(
            conditional_product(&a1, &Observable::Random),
            Err(Error::NoEigenstate)
        ));
        assert_eq!(conditional_product(&Observable::Unit, &a2).unwrap(), a2);
    }

    #[test]
    fn sequence_examples() {
        let z = spin(3);
        let x = spin(1);
        let up = BlochState::two([0.0, 0.0, 1.0]).unwrap();
        let w = sequence_probabilities(&z, &x, &up).unwrap();
        assert!((w.pp - 0.25).abs() < 1e-15);
        let w = sequence_probabilities(&x, &z, &up).unwrap();
        assert!((w.pp - 0.5).abs() < 1e-15);
        let w = sequence_probabilities(&z, &z, &up).unwrap();
        assert_eq!((w.pp, w.pm, w.mp, w.mm), (1.0, 0.0, 0.0, 0.0));
        let c = BlochState::center(Level::Two);
        let w = sequence_probabilities(&z, &x, &c).unwrap();
        assert_eq!((w.pp, w.pm, w.mp, w.mm), (0.25, 0.25, 0.25, 0.25));
    }

    #[test]
    fn chain_examples() {
        let r = rho();
        let dm = density_from_bloch(&r);
        let (a1, a3) = (Observable::from(spin(1)), Observable::from(spin(3)));
        let (_, v) = measurement_chain(&[a3.clone()], &dm).unwrap();
        assert!((v - 0.6).abs() < 1e-15);
        let (sum, v) = measurement_chain(&[a1.clone(), a1.clone(), a3.clone()], &dm).unwrap();
        assert!((v - 0.6).abs() < 1e-15);
        assert_eq!(sum.terms.len(), 2);
        assert!(matches!(
            measurement_chain(&[a1.clone(), Observable::Random], &dm),
            Err(Error::NoEigenstate)
        ));
        let (_, v) = measurement_chain(&[Observable::Random, a1], &dm).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn repeated_measurement_is_exact() {
        let dm = density_from_bloch(&rho());
        let a = Observable::from(spin(1));
        let r = simulate_sequences(&[a.clone(), a], &dm, 100_000, 7).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn records_match_simulation() {
        let dm = density_from_bloch(&rho());
        let obs = [Observable::from(spin(1)), Observable::from(spin(3))];
        let n = 70_000;
        let recs = sample_records(&obs, &dm, n, 11).unwrap();
        let sum: i64 = recs.iter().map(|r| i64::from(r.value())).sum();
        let sim = simulate_sequences(&obs, &dm, n, 11).unwrap();
        assert_eq!(sim.value, sum as f64 / n as f64);
        assert_eq!(recs[0].outcomes[0].0, 1);
    }

    #[test]
    fn distribution_sums_to_one() {
        let dm = density_from_bloch(&rho());
        let obs = [
            Observable::from(TwoLevelObservable::planar(0.3)),
            Observable::from(spin(3)),
            Observable::from(spin(2)),
        ];
        let d = sequence_distribution(&obs, &dm).unwrap();
        assert_eq!(d.len(), 8);
        let total: f64 = d.iter().map(|x| x.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }
}
