use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use std::time::Instant;

use pobs::correlations::{
    conditional_correlation_2pt, conditional_correlation_3pt, simulate_sequences,
};
use pobs::dynamics::{
    alpha_rotation, hamiltonian_from_rotation, integrate_bloch, integrate_open,
    integrate_von_neumann, syncoherence_closed_form, syncoherence_flow, FlowParams, Hamiltonian,
    PurityLaw, TimeSpan, Trajectory,
};
use pobs::four_state::{
    bell_check, classical_bell_check, entangled_bloch, entangled_state, interference_evolution,
    interference_wavefunction, rotated_spin_correlation,
};
use pobs::pseudo::{
    cartesian_measure_sz, cartesian_purity, integrate_out, realizable_region_check,
    CartesianSpinEnsemble, FiniteSpinSystem, MeasurementRule,
};
use pobs::quantum::{bloch_from_density, density_from_bloch, qm_expectation};
use pobs::{BlochState, Level, Observable, Operator, TwoLevelObservable};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::report::{Cell, Check, RunReport, Table};
use crate::sample;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("model error: {0}")]
    Model(pobs::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl From<pobs::Error> for RunError {
    /// Precondition failures of the model come from parameter values.
    fn from(e: pobs::Error) -> Self {
        match e {
            pobs::Error::InvalidParameter(reason) => {
                RunError::Config(ConfigError::invalid("params", reason))
            }
            e => RunError::Model(e),
        }
    }
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(c) => c.kind(),
            RunError::Model(_) => "model",
            RunError::Pool(_) => "thread_pool",
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, RunError::Config(_))
    }
}

type Out = Result<RunReport, RunError>;

/// Runs one experiment on `jobs` threads. Points are independent and each
/// draws from its own stream, so the result does not depend on `jobs`.
pub fn run(config: &ExperimentConfig, jobs: usize) -> Out {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let start = Instant::now();
    let mut report = pool.install(|| dispatch(config))?;
    report.wall_time = start.elapsed();
    Ok(report)
}

fn dispatch(c: &ExperimentConfig) -> Out {
    match c.experiment {
        Experiment::BellSweep => bell_sweep(c),
        Experiment::Interference => interference(c),
        Experiment::Decoherence => decoherence(c),
        Experiment::Syncoherence => syncoherence(c),
        Experiment::Precession => precession(c),
        Experiment::CartesianSpins => cartesian_spins(c),
        Experiment::PseudoQuantumRegion => pseudo_quantum_region(c),
        Experiment::CorrelationTable => correlation_table(c),
        Experiment::McSequences => mc_sequences(c),
    }
}

fn points<T: Send>(
    n: usize,
    f: impl Fn(usize) -> Result<T, RunError> + Sync + Send,
) -> Result<Vec<T>, RunError> {
    (0..n).into_par_iter().map(f).collect()
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    // NaN wins so that a broken value cannot hide behind a fold.
    xs.into_iter().fold(0.0, |m: f64, x| {
        if x.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(x)
        }
    })
}

fn reference(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn span(c: &ExperimentConfig) -> Result<(TimeSpan, f64, usize), RunError> {
    let p = &c.params;
    let t_max = p.positive("t_max")?;
    let dt = p.positive("dt")?;
    if t_max / dt > 1e8 {
        return Err(ConfigError::invalid("dt", "more than 1e8 steps").into());
    }
    let every = p.count("output_every", 1, u32::MAX as u64)?;
    Ok((TimeSpan::new(0.0, t_max), dt, every))
}

/// Indices of the rows written out: every `every`-th step and the last.
fn sampled(len: usize, every: usize) -> impl Iterator<Item = usize> {
    (0..len).filter(move |&i| i % every == 0 || i + 1 == len)
}

fn bell_sweep(c: &ExperimentConfig) -> Out {
    let p = &c.params;
    let d = p.count("divisions", 4, 256)?;
    if d % 4 != 0 {
        return Err(ConfigError::invalid(
            "divisions",
            "must be a multiple of 4 to contain pi/4 and pi/2",
        )
        .into());
    }
    let res = p.count("classical_resolution", 2, 32)?;
    let kappa_max = p.f64("kappa_max")?;
    if kappa_max < 0.0 {
        return Err(ConfigError::invalid("kappa_max", "must be nonnegative").into());
    }
    let rho = entangled_bloch(-1)?;
    let angle = |j: usize| j as f64 * PI / d as f64;
    let side = d + 1;
    let rows = points(side * side, |i| {
        let (t1, t2) = (angle(i / side), angle(i % side));
        let q = bell_check(
            |x| rotated_spin_correlation(x, 0.0, &rho).unwrap_or(f64::NAN),
            t1,
            t2,
        );
        let ens = sample::grid_state(&mut sample::stream(c.seed, i as u64), res, kappa_max)?;
        let k = classical_bell_check(&ens, t1, t2)?;
        let lhs_ref = (t2.cos() - t1.cos()).abs();
        let rhs_ref = 1.0 - (t1 - t2).cos();
        Ok((q, lhs_ref, rhs_ref, k))
    })?;
    let mut t = Table::new(&[
        "theta1",
        "theta2",
        "lhs",
        "rhs",
        "violated",
        "lhs_reference",
        "rhs_reference",
        "classical_lhs",
        "classical_rhs",
        "classical_violated",
    ]);
    for (q, lr, rr, k) in &rows {
        t.push(vec![
            q.theta1.into(),
            q.theta2.into(),
            q.lhs.into(),
            q.rhs.into(),
            q.violated.into(),
            (*lr).into(),
            (*rr).into(),
            k.lhs.into(),
            k.rhs.into(),
            k.violated.into(),
        ]);
    }
    let corr_err = max_of(
        rows.iter()
            .map(|(q, lr, rr, _)| (q.lhs - lr).abs().max((q.rhs - rr).abs())),
    );
    let q = &bell_check(
        |x| rotated_spin_correlation(x, 0.0, &rho).unwrap_or(f64::NAN),
        FRAC_PI_2,
        FRAC_PI_4,
    );
    let h = 1.0 / SQRT_2;
    let checks = vec![
        Check::max_error(
            "quantum correlator equals -cos on the grid",
            corr_err,
            1e-12,
        ),
        Check::abs("lhs at (pi/2, pi/4)", q.lhs, h, 1e-12),
        Check::abs("rhs at (pi/2, pi/4)", q.rhs, 1.0 - h, 1e-12),
        Check::new(
            "violation margin at (pi/2, pi/4)",
            crate::report::Comparison::AtLeast,
            q.lhs - q.rhs,
            SQRT_2 - 1.0,
            1e-9,
        ),
        Check::exact(
            "violated at (pi/2, pi/4)",
            f64::from(u8::from(q.violated)),
            1.0,
        ),
        Check::count_zero(
            "classical baseline violations",
            rows.iter().filter(|r| r.3.violated).count(),
        ),
    ];
    let r = reference(&[
        ("correlator", json!("-cos(theta1 - theta2)")),
        ("lhs_at_pi_2_pi_4", json!(h)),
        ("rhs_at_pi_2_pi_4", json!(1.0 - h)),
        ("violation_margin", json!(SQRT_2 - 1.0)),
        (
            "classical_baseline",
            json!("substate extension along 0, theta1, theta2 with B = -gamma"),
        ),
    ]);
    Ok(RunReport::new(c, t, r, checks))
}

fn interference(c: &ExperimentConfig) -> Out {
    let p = &c.params;
    let delta = p.f64("delta")?;
    let t_max = p.f64("t_max")?;
    if t_max < 0.0 {
        return Err(ConfigError::invalid("t_max", "must be nonnegative").into());
    }
    let n = p.count("points", 2, 100_000)?;
    let dt = p.positive("dt")?;
    let rows = points(n, |i| {
        let t = t_max * i as f64 / (n - 1) as f64;
        let r = interference_evolution(delta, t, dt)?;
        let exact = bloch_from_density(&interference_wavefunction(delta, 0.0, t).density_matrix());
        let state_err = max_of(
            r.state
                .rho()
                .iter()
                .zip(exact.rho())
                .map(|(a, b)| (a - b).abs()),
        );
        Ok((t, r.t2, state_err, r.error_estimate))
    })?;
    let mut t = Table::new(&[
        "t",
        "t2",
        "t2_reference",
        "t2_error",
        "state_error",
        "error_estimate",
    ]);
    for &(time, t2, se, ee) in &rows {
        let want = (delta * time).cos();
        t.push(vec![
            time.into(),
            t2.into(),
            want.into(),
            (t2 - want).abs().into(),
            se.into(),
            ee.into(),
        ]);
    }
    let checks = vec![
        Check::max_error(
            "<T2> equals cos(delta t)",
            max_of(rows.iter().map(|r| (r.1 - (delta * r.0).cos()).abs())),
            1e-6,
        ),
        Check::max_error(
            "state equals the superposed wave function",
            max_of(rows.iter().map(|r| r.2)),
            1e-6,
        ),
    ];
    let r = reference(&[
        ("t2", json!("cos(delta t)")),
        (
            "state",
            json!("psi = ((psi1 + psi2) e^{-i delta t} + (psi1 - psi2)) / 2"),
        ),
        (
            "period",
            json!(if delta == 0.0 {
                Value::Null
            } else {
                json!(2.0 * PI / delta.abs())
            }),
        ),
    ]);
    Ok(RunReport::new(c, t, r, checks))
}

/// Rotation of `v` about `axis` by `angle`.
fn rodrigues(v: [f64; 3], axis: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, co) = angle.sin_cos();
    let kxv = [
        axis[1] * v[2] - axis[2] * v[1],
        axis[2] * v[0] - axis[0] * v[2],
        axis[0] * v[1] - axis[1] * v[0],
    ];
    let kv = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
    std::array::from_fn(|i| v[i] * co + kxv[i] * s + axis[i] * kv * (1.0 - co))
}

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn decoherence(c: &ExperimentConfig) -> Out {
    let p = &c.params;
    let rate = p.f64("rate")?;
    let rho0: [f64; 3] = p.fixed("rho")?;
    let omega = p.f64("omega")?;
    let (sp, dt, every) = span(c)?;
    let state = BlochState::two(rho0).map_err(|e| ConfigError::invalid("rho", e.to_string()))?;
    let p0 = state.purity();
    if p0 * (2.0 * rate * sp.t1).exp() > 1.0 {
        return Err(ConfigError::invalid("rate", "purity would exceed one before t_max").into());
    }
    let traj = integrate_open(
        &density_from_bloch(&state),
        &Hamiltonian::two_state([0.0, 0.0, omega]),
        |_, _| rate,
        sp,
        dt,
    )?;
    let exact =
        |t: f64| rodrigues(rho0, [0.0, 0.0, 1.0], 2.0 * omega * t).map(|x| x * (rate * t).exp());
    let mut comp_err = 0.0f64;
    let mut pur_err = 0.0f64;
    for (i, &time) in traj.times.iter().enumerate() {
        let e = exact(time);
        comp_err = comp_err.max(max_of((0..3).map(|k| (traj.bloch[i][k] - e[k]).abs())));
        pur_err = pur_err.max((traj.purity[i] - p0 * (2.0 * rate * time).exp()).abs());
    }
    let mut t = Table::new(&[
        "t",
        "rho1",
        "rho2",
        "rho3",
        "purity",
        "rho1_reference",
        "rho2_reference",
        "rho3_reference",
        "purity_reference",
    ]);
    for i in sampled(traj.times.len(), every) {
        let time = traj.times[i];
        let e = exact(time);
        let b = &traj.bloch[i];
        t.push(vec![
            time.into(),
            b[0].into(),
            b[1].into(),
            b[2].into(),
            traj.purity[i].into(),
            e[0].into(),
            e[1].into(),
            e[2].into(),
            (p0 * (2.0 * rate * time).exp()).into(),
        ]);
    }
    let checks = vec![
        Check::max_error("rho_k(t) equals rho_k(0) e^{Dt} (rotated)", comp_err, 1e-8),
        Check::max_error("P(t) equals P(0) e^{2Dt}", pur_err, 1e-8),
    ];
    let r = reference(&[
        ("rho", json!("R_z(2 omega t) rho(0) e^{D t}")),
        ("purity", json!("P(0) e^{2 D t}")),
        ("initial_purity", json!(p0)),
    ]);
    Ok(RunReport::new(c, t, r, checks))
}

fn syncoherence(c: &ExperimentConfig) -> Out {
    let p = &c.params;
    let (a, b) = (p.f64("a")?, p.f64("b")?);
    let p0 = p.f64("p0")?;
    let d0 = p.f64("d0")?;
    if !(0.0..=1.0).contains(&p0) {
        return Err(ConfigError::invalid("p0", "must lie in [0, 1]").into());
    }
    let law: PurityLaw = serde_json::from_value(Value::from(p.str("law")?))
        .map_err(|_| ConfigError::invalid("law", "expected `linear` or `scaling`"))?;
    let (sp, dt, every) = span(c)?;
    let params = FlowParams { a, b, law };
    if law == PurityLaw::Linear {
        params
            .rates()
            .map_err(|e| ConfigError::invalid("b", e.to_string()))?;
    }
    let traj = syncoherence_flow(p0, d0, &params, sp, dt)?;
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-9);
    let closed = |t: f64| -> Result<Option<(f64, f64)>, RunError> {
        Ok(match law {
            PurityLaw::Linear => Some(syncoherence_closed_form(p0, d0, &params, t)?),
            PurityLaw::Scaling => None,
        })
    };
    let mut t = Table::new(&["t", "purity", "rate", "purity_reference", "rate_reference"]);
    let (mut ep, mut ed) = (0.0f64, 0.0f64);
    for (i, &time) in traj.times.iter().enumerate() {
        if let Some((pc, dc)) = closed(time)? {
            ep = ep.max(rel(traj.purity[i], pc));
            ed = ed.max(rel(traj.rate[i], dc));
        }
    }
    for i in sampled(traj.times.len(), every) {
        let time = traj.times[i];
        let (pc, dc) = closed(time)?.unwrap_or((f64::NAN, f64::NAN));
        t.push(vec![
            time.into(),
            traj.purity[i].into(),
            traj.rate[i].into(),
            pc.into(),
            dc.into(),
        ]);
    }
    let max_p = max_of(traj.purity.iter().copied());
    let (checks, r) = match law {
        PurityLaw::Linear => {
            let (e1, e2) = params.rates()?;
            (
                vec![
                    Check::max_error("P matches the closed form (relative)", ep, 1e-6),
                    Check::max_error("D matches the closed form (relative)", ed, 1e-6),
                ],
                reference(&[
                    ("epsilon1", json!(e1)),
                    ("epsilon2", json!(e2)),
                    (
                        "purity",
                        json!("1 - x1 e^{-epsilon1 t} - x2 e^{-epsilon2 t}"),
                    ),
                    ("fixed_point", json!({"purity": 1.0, "rate": 0.0})),
                ]),
            )
        }
        PurityLaw::Scaling => (
            vec![Check::new(
                "P stays at or below one",
                crate::report::Comparison::AtMost,
                max_p,
                1.0,
                1e-9,
            )],
            reference(&[
                ("closed_form", Value::Null),
                ("fixed_point", json!({"purity": 1.0, "rate": 0.0})),
            ]),
        ),
    };
    Ok(RunReport::new(c, t, r, checks))
}

fn purity_drift(traj: &Trajectory) -> f64 {
    let p0 = traj.purity.first().copied().unwrap_or(0.0);
    max_of(traj.purity.iter().map(|p| (p - p0).abs()))
}

fn precession(c: &ExperimentConfig) -> Out {
    let p = &c.params;
    let h: [f64; 3] = p.fixed("h")?;
    let rho0: [f64; 3] = p.fixed("rho")?;
    let (sp, dt, every) = span(c)?;
    let state = BlochState::two(rho0).map_err(|e| ConfigError::invalid("rho", e.to_string()))?;
    let tb = integrate_bloch(&state, h, sp, dt)?;
    let tv = integrate_von_neumann(
        &density_from_bloch(&state),
        &Hamiltonian::two_state(h),
        sp,
        dt,
    )?;
    let hn = norm(h);
    let axis = if hn > 0.0 {
        h.map(|x| x / hn)
    } else {
        [0.0, 0.0, 1.0]
    };
    let exact = |t: f64| rodrigues(rho0, axis, 2.0 * hn * t);
    let err = |tr: &Trajectory| {
        max_of(tr.times.iter().zip(&tr.bloch).map(|(&t, b)| {
            let e = exact(t);
            max_of((0..3).map(|k| (b[k] - e[k]).abs()))
        }))
    };
    let t_mid = 0.5 * sp.t1;
    let hx = hamiltonian_from_rotation(|t| alpha_rotation(h.map(|x| -x * t)), t_mid, 1e-3)?;
    let h_err = max_of((0..3).map(|k| (hx[k] - h[k]).abs()));
    let mut t = Table::new(&[
        "t",
        "bloch1",
        "bloch2",
        "bloch3",
        "von_neumann1",
        "von_neumann2",
        "von_neumann3",
        "reference1",
        "reference2",
        "reference3",
        "purity_bloch",
        "purity_von_neumann",
    ]);
    for i in sampled(tb.times.len(), every) {
        let time = tb.times[i];
        let e = exact(time);
        let (b, v) = (&tb.bloch[i], &tv.bloch[i]);
        t.push(vec![
            time.into(),
            b[0].into(),
            b[1].into(),
            b[2].into(),
            v[0].into(),
            v[1].into(),
            v[2].into(),
            e[0].into(),
            e[1].into(),
            e[2].into(),
            tb.purity[i].into(),
            tv.purity[i].into(),
        ]);
    }
    let checks = vec![
        Check::max_error("Bloch integrator matches the rotation", err(&tb), 1e-8),
        Check::max_error(
            "von Neumann integrator matches the rotation",
            err(&tv),
            1e-8,
        ),
        Check::max_error("purity drift (Bloch)", purity_drift(&tb), 1e-10),
        Check::max_error("purity drift (von Neumann)", purity_drift(&tv), 1e-10),
        Check::max_error("Hamiltonian recovered from S(t)", h_err, 1e-8),
    ];
    let r = reference(&[
        ("rho", json!("rotation of rho(0) about h by 2|h|t")),
        ("h", json!(h)),
        ("h_extracted", json!(hx)),
        ("extraction_time", json!(t_mid)),
    ]);
    Ok(RunReport::new(c, t, r, checks))
}

const SAMPLE_CHUNK: usize = 1000;

/// Largest |S2 − Σ⟨S_k⟩²| over `samples` random distributions.
fn purity_identity_error(seed: u64, samples: usize) -> Result<f64, RunError> {
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    let errs = points(chunks, |k| {
        let mut rng = sample::stream(seed, k as u64);
        let m = SAMPLE_CHUNK.min(samples - k * SAMPLE_CHUNK);
        let mut worst = 0.0f64;
        for _ in 0..m {
            let p: [f64; 8] = sample::simplex(&mut rng, 8).try_into().expect("eight");
            let e = CartesianSpinEnsemble::new(p)?;
            worst = worst.max((cartesian_purity(&p) - e.purity()).abs());
        }
        Ok(worst)
    })?;
    Ok(max_of(errs))
}

fn cartesian_spins(c: &ExperimentConfig) -> Out {
    let p = &c.params;
    let probs: [f64; 8] = p.fixed("p")?;
    let p1 = p.f64("p1")?;
    if !(0.0..=0.5).contains(&p1) {
        return Err(ConfigError::invalid("p1", "must lie in [0, 1/2]").into());
    }
    let outcome = match p.i64("outcome")? {
        1 => 1i8,
        -1 => -1i8,
        _ => return Err(ConfigError::invalid("outcome", "must be 1 or -1").into()),
    };
    let samples = p.count("samples", 1, 100_000_000)?;
    let ens =
        CartesianSpinEnsemble::new(probs).map_err(|e| ConfigError::invalid("p", e.to_string()))?;
    let classical = cartesian_measure_sz(&ens, outcome, MeasurementRule::Classical)
        .map_err(|e| ConfigError::invalid("outcome", e.to_string()))?;
    let quantum = cartesian_measure_sz(&ens, outcome, MeasurementRule::Quantum { p1 })?;
    // The classical rule renormalizes the surviving substates.
    let base = if outcome == 1 { 0 } else { 4 };
    let w: f64 = probs[base..base + 4].iter().sum();
    let mut cond = [0.0; 8];
    for i in base..base + 4 {
        cond[i] = probs[i] / w;
    }
    let before_ref = cartesian_purity(&probs);
    let classical_ref = cartesian_purity(&cond);
    let mut t = Table::new(&[
        "rule",
        "outcome",
        "outcome_probability",
        "purity_before",
        "purity_after",
        "purity_after_reference",
        "violates_bound",
        "pair_sum_12",
        "pair_sum_13",
        "pair_sum_24",
        "pair_sum_34",
    ]);
    for (name, m, want) in [
        ("classical", &classical, classical_ref),
        ("quantum", &quantum, 1.0),
    ] {
        let mut row: Vec<Cell> = vec![
            name.into(),
            i64::from(m.outcome).into(),
            m.outcome_probability.into(),
            ens.purity().into(),
            m.purity.into(),
            want.into(),
            m.violates_bound.into(),
        ];
        row.extend(m.pair_sums.iter().map(|&x| Cell::F(x)));
        t.push(row);
    }
    let flag_ok = classical.violates_bound == (classical.purity > 1.0 + pobs::TOL);
    let checks = vec![
        Check::max_error(
            "S2 polynomial equals sum of squared spins",
            purity_identity_error(c.seed, samples)?,
            1e-12,
        ),
        Check::abs("purity before measurement", ens.purity(), before_ref, 1e-12),
        Check::abs(
            "classical-rule purity",
            classical.purity,
            classical_ref,
            1e-12,
        ),
        Check::exact(
            "classical-rule bound flag is consistent",
            f64::from(u8::from(flag_ok)),
            1.0,
        ),
        Check::abs("quantum-rule purity", quantum.purity, 1.0, 1e-12),
        Check::max_error(
            "quantum-rule pair sums equal 1/2",
            max_of(quantum.pair_sums.iter().map(|x| (x - 0.5).abs())),
            1e-12,
        ),
    ];
    let r = reference(&[
        ("purity_before", json!(before_ref)),
        ("classical_purity_after", json!(classical_ref)),
        ("classical_violates_bound", json!(classical_ref > 1.0)),
        ("quantum_purity_after", json!(1.0)),
        ("quantum_pair_sums", json!([0.5, 0.5, 0.5, 0.5])),
    ]);
    Ok(RunReport::new(c, t, r, checks))
}

/// The four planar expectations kept by the coarse graining.
const AXES: [f64; 4] = [0.0, PI, FRAC_PI_2, -FRAC_PI_2];

fn pseudo_quantum_region(c: &ExperimentConfig) -> Out {
    let p = &c.params;
    let ns = p.counts("ns")?;
    if ns.is_empty() || ns.iter().any(|&n| !(3..=4096).contains(&n)) {
        return Err(ConfigError::invalid("ns", "each N must lie in 3..=4096").into());
    }
    let grid = p.count("grid", 2, 2001)?;
    let samples = p.count("samples", 1, 10_000_000)?;
    let target = [FRAC_PI_4.cos(), FRAC_PI_4.sin()];
    let regions = points(ns.len(), |i| {
        let n = ns[i] as usize;
        let s = FiniteSpinSystem::cyclic(n, vec![1.0 / n as f64; n])?;
        Ok((n, realizable_region_check(&s, Some(&target))?))
    })?;
    let mut t = Table::new(&[
        "n",
        "inradius",
        "inradius_reference",
        "rotation_purity_bound",
        "max_component_sum",
        "vertices",
        "target_realizable",
    ]);
    for (n, d) in &regions {
        t.push(vec![
            (*n).into(),
            d.inradius.into(),
            (PI / *n as f64).cos().into(),
            d.rotation_purity_bound.into(),
            d.max_component_sum.into(),
            d.polygon.len().into(),
            d.target_realizable.unwrap_or(false).into(),
        ]);
    }
    let inradius_err = max_of(
        regions
            .iter()
            .map(|(n, d)| (d.inradius - (PI / *n as f64).cos()).abs()),
    );
    let pure = FiniteSpinSystem::cyclic_pure(8, 1)?;
    let half = integrate_out(&pure, 0.5, 0.5)?;
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    let preserve_err = max_of(points(chunks, |k| {
        let mut rng = sample::stream(c.seed, k as u64);
        let mut worst = 0.0f64;
        for _ in 0..SAMPLE_CHUNK.min(samples - k * SAMPLE_CHUNK) {
            let s = FiniteSpinSystem::cyclic(8, sample::simplex(&mut rng, 8))?;
            let (alpha, beta) = (
                rand::Rng::gen_range(&mut rng, -3.0..3.0),
                rand::Rng::gen_range(&mut rng, -3.0..3.0),
            );
            let e = integrate_out(&s, alpha, beta)?;
            for phi in AXES {
                worst = worst.max((e.planar_expectation(phi) - s.planar_expectation(phi)).abs());
            }
        }
        Ok(worst)
    })?);
    // Every (α, β) on the grid whose coarse graining of the pure π/4 state
    // keeps all four probabilities nonnegative.
    let lo = -1.0;
    let step = 3.0 / (grid - 1) as f64;
    let sums = points(grid * grid, |i| {
        let (a, b) = (lo + step * (i / grid) as f64, lo + step * (i % grid) as f64);
        let e = integrate_out(&pure, a, b)?;
        Ok((e.min() >= 0.0).then(|| e.sum()))
    })?;
    let nonneg: Vec<f64> = sums.into_iter().flatten().collect();
    let min_sum = nonneg.iter().copied().fold(f64::NAN, f64::min);
    let mut checks = vec![
        Check::max_error("inradius equals cos(pi/N)", inradius_err, 1e-12),
        Check::abs(
            "negative probability on the pure pi/4 state",
            half.min(),
            -1.0 / (2.0 * SQRT_2),
            1e-15,
        ),
        Check::max_error(
            "coarse graining preserves the four expectations",
            preserve_err,
            1e-15,
        ),
        Check::new(
            "nonnegative coarse grainings have total weight at least sqrt 2",
            crate::report::Comparison::AtLeast,
            min_sum,
            SQRT_2,
            1e-12,
        ),
    ];
    if let Some((_, d)) = regions.iter().find(|(n, _)| *n == 4) {
        checks.insert(
            1,
            Check::abs(
                "N = 4 bound on the component sum",
                d.max_component_sum,
                1.0,
                1e-12,
            ),
        );
    }
    let r = reference(&[
        ("inradius", json!("cos(pi/N)")),
        ("n4_max_component_sum", json!(1.0)),
        ("pure_pi_4_min_probability", json!(-1.0 / (2.0 * SQRT_2))),
        ("witness_bound", json!(SQRT_2)),
        ("witness_points", json!(nonneg.len())),
        (
            "witness_grid",
            json!({"min": lo, "max": lo + 3.0, "points": grid}),
        ),
    ]);
    Ok(RunReport::new(c, t, r, checks))
}

/// ½tr({Â, B̂}ρ).
pub fn anticommutator_2pt(
    a: &TwoLevelObservable,
    b: &TwoLevelObservable,
    s: &BlochState,
) -> pobs::Result<f64> {
    let (oa, ob) = (Operator::from_observable(a), Operator::from_observable(b));
    Ok(0.5 * qm_expectation(&oa.anticommutator(&ob), &density_from_bloch(s))?)
}

/// ¼tr({{Â, B̂}, Ĉ}ρ).
pub fn anticommutator_3pt(
    a: &TwoLevelObservable,
    b: &TwoLevelObservable,
    cc: &TwoLevelObservable,
    s: &BlochState,
) -> pobs::Result<f64> {
    let op = Operator::from_observable;
    let nested = op(a).anticommutator(&op(b)).anticommutator(&op(cc));
    Ok(0.25 * qm_expectation(&nested, &density_from_bloch(s))?)
}

/// Count of (k, l, m, state) where ⟨A⁽ᵏ⁾∘A⁽ˡ⁾∘A⁽ᵐ⁾⟩ ≠ δ_kl ρ_m exactly.
pub fn orthogonal_identity_mismatches(seed: u64, states: usize) -> Result<usize, RunError> {
    let basis: Vec<Observable> = (1..=3)
        .map(|k| TwoLevelObservable::basis(Level::Two, k).into())
        .collect();
    let counts = points(states, |j| {
        let s = sample::state(&mut sample::stream(seed, (1 << 32) + j as u64));
        let mut bad = 0;
        for k in 0..3 {
            for l in 0..3 {
                for m in 0..3 {
                    let v = conditional_correlation_3pt(&basis[k], &basis[l], &basis[m], &s)?;
                    let want = if k == l { s.rho()[m] } else { 0.0 };
                    bad += usize::from(v != want);
                }
            }
        }
        Ok(bad)
    })?;
    Ok(counts.into_iter().sum())
}

fn correlation_table(c: &ExperimentConfig) -> Out {
    let p = &c.params;
    let n = p.count("samples", 1, 10_000_000)?;
    let orth = p.count("orth_states", 1, 10_000_000)?;
    let rows = points(n, |i| {
        let mut rng = sample::stream(c.seed, i as u64);
        let s = sample::state(&mut rng);
        let (a, b, cc) = (
            sample::spin(&mut rng),
            sample::spin(&mut rng),
            sample::spin(&mut rng),
        );
        let c2 = conditional_correlation_2pt(&a, &b, &s)?;
        let c2s = conditional_correlation_2pt(&b, &a, &s)?;
        let c2r = anticommutator_2pt(&a, &b, &s)?;
        let c3 = conditional_correlation_3pt(
            &a.clone().into(),
            &b.clone().into(),
            &cc.clone().into(),
            &s,
        )?;
        let c3r = anticommutator_3pt(&a, &b, &cc, &s)?;
        Ok([c2, c2r, c2s, c3, c3r])
    })?;
    let mut t = Table::new(&[
        "index",
        "c2",
        "c2_reference",
        "c2_swapped",
        "c3",
        "c3_reference",
    ]);
    for (i, r) in rows.iter().enumerate() {
        let mut row: Vec<Cell> = vec![i.into()];
        row.extend(r.iter().map(|&x| Cell::F(x)));
        t.push(row);
    }
    let checks = vec![
        Check::max_error(
            "two-point equals the anticommutator trace",
            max_of(rows.iter().map(|r| (r[0] - r[1]).abs())),
            1e-12,
        ),
        Check::max_error(
            "two-point is symmetric",
            max_of(rows.iter().map(|r| (r[0] - r[2]).abs())),
            1e-12,
        ),
        Check::max_error(
            "three-point equals the nested anticommutator trace",
            max_of(rows.iter().map(|r| (r[3] - r[4]).abs())),
            1e-12,
        ),
        Check::count_zero(
            "orthogonal-spin identity mismatches",
            orthogonal_identity_mismatches(c.seed, orth)?,
        ),
    ];
    let r = reference(&[
        ("c2", json!("tr({A,B} rho) / 2")),
        ("c3", json!("tr({{A,B},C} rho) / 4")),
        ("orthogonal_identity", json!("delta_kl rho_m, exact")),
        ("orthogonal_cases", json!(27 * orth)),
    ]);
    Ok(RunReport::new(c, t, r, checks))
}

pub struct McCase {
    pub name: &'static str,
    pub observables: Vec<Observable>,
    pub rho: pobs::DensityMatrix,
    pub exact: f64,
    /// The estimate must equal `exact` bit for bit.
    pub deterministic: bool,
}

/// Two-point, three-point, repeated and singlet sequences; the random
/// observables and state come from stream 0 of `seed`.
pub fn mc_cases(seed: u64, theta: f64, phi: f64) -> Result<Vec<McCase>, RunError> {
    let mut rng = sample::stream(seed, 0);
    let s = sample::state(&mut rng);
    let (a, b, cc) = (
        sample::spin(&mut rng),
        sample::spin(&mut rng),
        sample::spin(&mut rng),
    );
    let rho = density_from_bloch(&s);
    let obs = |v: &[&TwoLevelObservable]| {
        v.iter()
            .map(|&x| Observable::from(x.clone()))
            .collect::<Vec<_>>()
    };
    let abc = obs(&[&a, &b, &cc]);
    let mut ea = vec![0.0; 15];
    ea[0] = theta.cos();
    ea[7] = theta.sin();
    let mut eb = vec![0.0; 15];
    eb[1] = phi.cos();
    eb[3] = phi.sin();
    let singlet = vec![
        TwoLevelObservable::spin(ea)?.into(),
        TwoLevelObservable::spin(eb)?.into(),
    ];
    Ok(vec![
        McCase {
            name: "two-point",
            exact: conditional_correlation_2pt(&a, &b, &s)?,
            observables: obs(&[&a, &b]),
            rho: rho.clone(),
            deterministic: false,
        },
        McCase {
            name: "three-point",
            exact: conditional_correlation_3pt(&abc[0], &abc[1], &abc[2], &s)?,
            observables: abc,
            rho: rho.clone(),
            deterministic: false,
        },
        McCase {
            name: "repeated",
            exact: 1.0,
            observables: obs(&[&a, &a]),
            rho,
            deterministic: true,
        },
        McCase {
            name: "singlet",
            exact: -(theta - phi).cos(),
            observables: singlet,
            rho: entangled_state(-1)?,
            deterministic: false,
        },
    ])
}

pub const MC_SIGMAS: f64 = 5.0;

pub fn mc_check(case: &McCase, r: &pobs::correlations::SimulationResult) -> Check {
    let name = format!("{} sequence estimate", case.name);
    if case.deterministic {
        Check::exact(name, r.value, case.exact)
    } else {
        Check::abs(name, r.value, case.exact, MC_SIGMAS * r.stderr)
    }
}

fn mc_sequences(c: &ExperimentConfig) -> Out {
    let p = &c.params;
    let n = p.count("n", 2, 1_000_000_000)? as u64;
    let (theta, phi) = (p.f64("theta")?, p.f64("phi")?);
    let cases = mc_cases(c.seed, theta, phi)?;
    let mut t = Table::new(&["case", "value", "stderr", "exact", "z"]);
    let mut checks = Vec::new();
    for (k, case) in cases.iter().enumerate() {
        let r = simulate_sequences(
            &case.observables,
            &case.rho,
            n,
            c.seed.wrapping_add(k as u64),
        )?;
        let z = if r.stderr > 0.0 {
            (r.value - case.exact) / r.stderr
        } else {
            0.0
        };
        t.push(vec![
            case.name.into(),
            r.value.into(),
            r.stderr.into(),
            case.exact.into(),
            z.into(),
        ]);
        checks.push(mc_check(case, &r));
    }
    let r = reference(&[
        ("two_point", json!(cases[0].exact)),
        ("three_point", json!(cases[1].exact)),
        ("repeated", json!(1.0)),
        ("singlet", json!(cases[3].exact)),
        ("tolerance", json!(format!("{MC_SIGMAS} standard errors"))),
    ]);
    Ok(RunReport::new(c, t, r, checks))
}
