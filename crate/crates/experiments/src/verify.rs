//! The acceptance suite: one entry per criterion, each a list of checks
//! with pinned tolerances, plus two controls.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use std::time::Instant;

use pobs::correlations::simulate_sequences;
use pobs::four_state::{
    bit_observable, classical_bell_check, classify_exchange, entangled_bloch, entangled_state,
    outcomes_from_t, rotated_spin_correlation, ExchangeClass,
};
use pobs::manifold::reduce;
use pobs::quantum::{density_from_bloch, qm_expectation, C64};
use pobs::{LBasis, Operator, WaveFunction};
use rand::Rng;
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig};
use crate::report::{Check, Comparison};
use crate::run::{mc_cases, mc_check, run, RunError};
use crate::sample;

pub const SEED: u64 = crate::config::DEFAULT_SEED;

#[derive(Clone, Debug)]
pub struct Criterion {
    pub id: String,
    pub name: &'static str,
    pub checks: Vec<Check>,
    pub seconds: f64,
    pub limit: Option<f64>,
    pub error: Option<String>,
}

impl Criterion {
    pub fn pass(&self) -> bool {
        self.error.is_none()
            && !self.checks.is_empty()
            && self.checks.iter().all(|c| c.pass)
            && self.limit.is_none_or(|l| self.seconds < l)
    }

    pub fn line(&self) -> String {
        let mark = if self.pass() { "PASS" } else { "FAIL" };
        let limit = self.limit.map(|l| format!(" < {l} s")).unwrap_or_default();
        let mut s = format!(
            "{mark} [{}] {} ({:.2} s{limit})",
            self.id, self.name, self.seconds
        );
        if let Some(e) = &self.error {
            s.push_str(&format!("\n    error: {e}"));
        }
        for c in &self.checks {
            s.push_str(&format!(
                "\n    {} {}",
                if c.pass { "ok  " } else { "FAIL" },
                describe(c)
            ));
        }
        s
    }
}

pub fn describe(c: &Check) -> String {
    let rel = match c.comparison {
        Comparison::Abs => format!(
            "|{:e} - {:e}| <= {:e}",
            c.measured, c.reference, c.tolerance
        ),
        Comparison::Rel => format!(
            "|{:e} - {:e}| <= {:e} rel",
            c.measured, c.reference, c.tolerance
        ),
        Comparison::AtMost => format!("{:e} <= {:e} + {:e}", c.measured, c.reference, c.tolerance),
        Comparison::AtLeast => format!("{:e} >= {:e} - {:e}", c.measured, c.reference, c.tolerance),
        Comparison::Exact => format!("{:?} == {:?}", c.measured, c.reference),
    };
    format!("{}: {rel}", c.name)
}

fn timed(
    id: impl Into<String>,
    name: &'static str,
    limit: Option<f64>,
    f: impl FnOnce() -> Result<Vec<Check>, RunError>,
) -> Criterion {
    let start = Instant::now();
    let (checks, error) = match f() {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    Criterion {
        id: id.into(),
        name,
        checks,
        seconds: start.elapsed().as_secs_f64(),
        limit,
        error,
    }
}

fn experiment(
    e: Experiment,
    overrides: &[(&str, serde_json::Value)],
    jobs: usize,
) -> Result<Vec<Check>, RunError> {
    let mut c = ExperimentConfig::new(e);
    c.seed = SEED;
    for (k, v) in overrides {
        c = c.with(k, v.clone())?;
    }
    Ok(run(&c, jobs)?.checks)
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m: f64, x| {
        if x.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(x.abs())
        }
    })
}

/// |Σ_σ p_σ e·f_σ − tr(Âρ)| over random grid ensembles of 2048 points.
pub fn expectation_law(ensembles: usize, seed: u64) -> Result<Vec<Check>, RunError> {
    let errs: Vec<f64> = (0..ensembles)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample::stream(seed, i as u64);
            let ens = sample::grid_state(&mut rng, 32, 10.0)?;
            let a = sample::spin(&mut rng);
            let sum = a.moment(&ens, 1)?;
            let tr = qm_expectation(
                &Operator::from_observable(&a),
                &density_from_bloch(&reduce(&ens)?),
            )?;
            Ok((sum - tr).abs())
        })
        .collect::<Result<_, RunError>>()?;
    Ok(vec![Check::max_error(
        format!("ensemble sum equals trace over {ensembles} ensembles"),
        max_abs(errs),
        1e-12,
    )])
}

fn bell_classical_random(n: usize, seed: u64) -> Result<Check, RunError> {
    let violations: usize = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample::stream(seed, i as u64);
            let ens = sample::grid_state(&mut rng, 4, 5.0)?;
            let (t1, t2) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
            Ok(usize::from(classical_bell_check(&ens, t1, t2)?.violated))
        })
        .collect::<Result<Vec<_>, RunError>>()?
        .into_iter()
        .sum();
    Ok(Check::count_zero(
        format!("classical violations over {n} random ensembles and angle pairs"),
        violations,
    ))
}

fn four_state_exact() -> Result<Vec<Check>, RunError> {
    let rho = entangled_state(-1)?;
    let t: Vec<f64> = (1..=3)
        .map(|m| Ok(qm_expectation(&bit_observable(m)?, &rho)?))
        .collect::<Result<_, RunError>>()?;
    let w = outcomes_from_t(t[0], t[1], t[2])?;
    Ok(vec![
        Check::exact("<T1> on rho_minus", t[0], 0.0),
        Check::exact("<T2> on rho_minus", t[1], 0.0),
        Check::exact("<T3> on rho_minus", t[2], -1.0),
        Check::exact("W+- on rho_minus", w.pm, 0.5),
        Check::exact("W-+ on rho_minus", w.mp, 0.5),
        Check::exact("W++ on rho_minus", w.pp, 0.0),
        Check::exact("W-- on rho_minus", w.mm, 0.0),
    ])
}

fn singlet_correlator(n: usize, seed: u64) -> Result<Check, RunError> {
    let b = entangled_bloch(-1)?;
    let mut rng = sample::stream(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (th, ph) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        worst = worst.max((rotated_spin_correlation(th, ph, &b)? + (th - ph).cos()).abs());
    }
    Ok(Check::max_error(
        format!("singlet correlator equals -cos over {n} angle pairs"),
        worst,
        1e-12,
    ))
}

/// The classification table for pure four-state wave functions.
pub const EXCHANGE_TABLE: [([f64; 4], ExchangeClass); 8] = [
    (
        [0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0],
        ExchangeClass::Fermionic,
    ),
    (
        [0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0],
        ExchangeClass::Bosonic,
    ),
    ([1.0, 0.0, 0.0, 0.0], ExchangeClass::Bosonic),
    ([0.0, 0.0, 0.0, 1.0], ExchangeClass::Bosonic),
    ([0.5, 0.5, 0.5, 0.5], ExchangeClass::Bosonic),
    ([0.0, 0.8, 0.6, 0.0], ExchangeClass::Forbidden),
    ([0.5, 0.5, -0.5, 0.5], ExchangeClass::Forbidden),
    ([0.0, 1.0, 0.0, 0.0], ExchangeClass::Forbidden),
];

fn exchange_table() -> Result<Check, RunError> {
    let mut wrong = 0;
    for (v, want) in EXCHANGE_TABLE {
        let psi = WaveFunction::normalized(pobs::quantum::CVector::from_iterator(
            4,
            v.iter().map(|&x| C64::new(x, 0.0)),
        ))?;
        wrong += usize::from(classify_exchange(&psi)? != want);
    }
    Ok(Check::count_zero(
        "exchange classification mismatches",
        wrong,
    ))
}

/// L_k² = 1, tr L_k = 0, tr(L_kL_l) = 4δ_kl.
pub fn l_basis(basis: &LBasis) -> Criterion {
    timed("basis", "generator algebra of the L basis", None, || {
        let ok = basis.validate().is_ok();
        Ok(vec![Check::exact(
            "L basis passes the algebra check",
            f64::from(u8::from(ok)),
            1.0,
        )])
    })
}

/// The standard basis with L5 overwritten by L4.
pub fn corrupted_basis() -> LBasis {
    let mut m = LBasis::standard().matrices().to_vec();
    m[4] = m[3].clone();
    LBasis::from_matrices(m)
}

fn cartesian_scenario() -> Result<Vec<Check>, RunError> {
    let rep = run(&ExperimentConfig::new(Experiment::CartesianSpins), 1)?;
    let col = |name: &str, row: usize| match rep.table.column(name).map(|c| c[row].clone()) {
        Some(crate::report::Cell::F(x)) => x,
        Some(crate::report::Cell::B(b)) => f64::from(u8::from(b)),
        _ => f64::NAN,
    };
    let third = 1.0 / 3.0;
    let mut checks = rep.checks.clone();
    checks.extend([
        Check::abs(
            "P' before measurement",
            col("purity_before", 0),
            third,
            1e-12,
        ),
        Check::abs("classical-rule P", col("purity_after", 0), 3.0, 1e-12),
        Check::exact("classical rule flagged", col("violates_bound", 0), 1.0),
        Check::abs("quantum-rule P", col("purity_after", 1), 1.0, 1e-12),
        Check::exact("quantum rule not flagged", col("violates_bound", 1), 0.0),
    ]);
    for k in ["pair_sum_12", "pair_sum_13", "pair_sum_24", "pair_sum_34"] {
        checks.push(Check::abs(
            format!("quantum-rule {k}"),
            col(k, 1),
            0.5,
            1e-12,
        ));
    }
    Ok(checks)
}

/// Every Monte Carlo case within five standard errors for seeds 1..=10.
pub fn seed_variation(seeds: u64, n: u64) -> Result<Vec<Check>, RunError> {
    let mut checks = Vec::new();
    for seed in 1..=seeds {
        for (k, case) in mc_cases(seed, FRAC_PI_2, FRAC_PI_4)?.iter().enumerate() {
            let r =
                simulate_sequences(&case.observables, &case.rho, n, seed.wrapping_add(k as u64))?;
            let mut c = mc_check(case, &r);
            c.name = format!("seed {seed}: {}", c.name);
            checks.push(c);
        }
    }
    Ok(checks)
}

pub fn run_all(jobs: usize) -> Vec<Criterion> {
    use serde_json::json;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        let corr = || {
            experiment(
                Experiment::CorrelationTable,
                &[("samples", json!(1000)), ("orth_states", json!(100))],
                jobs,
            )
        };
        let mut out = vec![
            timed("1", "expectation-law equivalence", Some(10.0), || {
                expectation_law(1000, SEED)
            }),
            timed("2", "conditional two-point correlation", Some(5.0), || {
                Ok(corr()?.into_iter().take(2).collect())
            }),
            timed("3", "conditional three-point correlation", None, || {
                Ok(corr()?.into_iter().skip(2).collect())
            }),
            timed("4", "Monte Carlo measurement sequences", Some(60.0), || {
                experiment(Experiment::McSequences, &[("n", json!(1_000_000))], jobs)
            }),
            timed("5", "Bell harness", Some(30.0), || {
                let mut c = experiment(Experiment::BellSweep, &[], jobs)?;
                c.push(bell_classical_random(1000, SEED)?);
                Ok(c)
            }),
            timed("6", "unitary dynamics", None, || {
                experiment(Experiment::Precession, &[], jobs)
            }),
            timed("7", "open dynamics", None, || {
                let mut c = experiment(Experiment::Decoherence, &[], jobs)?;
                c.extend(experiment(
                    Experiment::Syncoherence,
                    &[("a", json!(3.0)), ("b", json!(2.0))],
                    jobs,
                )?);
                Ok(c)
            }),
            timed("8", "four-state observables", None, || {
                let mut c = four_state_exact()?;
                c.push(singlet_correlator(100, SEED)?);
                c.extend(experiment(
                    Experiment::Interference,
                    &[("delta", json!(1.0)), ("t_max", json!(2.0 * PI))],
                    jobs,
                )?);
                c.push(exchange_table()?);
                Ok(c)
            }),
            timed("9", "Cartesian spins", None, cartesian_scenario),
            timed("10", "pseudo-quantum system", None, || {
                experiment(Experiment::PseudoQuantumRegion, &[], jobs)
            }),
        ];
        out.push(l_basis(LBasis::standard()));
        let corrupted = l_basis(&corrupted_basis());
        out.push(timed(
            "control",
            "corrupted L basis is rejected",
            None,
            || {
                Ok(vec![Check::exact(
                    "algebra check fails on the corrupted basis",
                    f64::from(u8::from(!corrupted.pass())),
                    1.0,
                )])
            },
        ));
        out.push(timed("control", "Monte Carlo over ten seeds", None, || {
            seed_variation(10, 1_000_000)
        }));
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_basis_fails() {
        assert!(!l_basis(&corrupted_basis()).pass());
        assert!(l_basis(LBasis::standard()).pass());
    }
}
