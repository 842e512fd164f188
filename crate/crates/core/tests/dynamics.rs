mod common;

use common::*;
use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64 as C;
use pobs::dynamics::*;
use pobs::manifold::{grid_ensemble, von_mises_fisher};
use pobs::quantum::{density_from_bloch, CMatrix};
use pobs::{BlochState, DensityMatrix, Ensemble, Error, Level, MicroState};
use proptest::prelude::*;

/// exp(θ[n]×) by Rodrigues' formula.
fn rodrigues(n: [f64; 3], theta: f64) -> Matrix3<f64> {
    let k = Matrix3::new(0.0, -n[2], n[1], n[2], 0.0, -n[0], -n[1], n[0], 0.0);
    Matrix3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
}

fn to_m2(m: &CMatrix) -> M2 {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

fn bloch2(m: &M2) -> [f64; 3] {
    [1, 2, 3].map(|k| trace(&mul(&pauli(k), m)).re)
}

#[test]
fn precession_matches_closed_form() {
    let omega = 0.7;
    let rho0 = BlochState::two([1.0, 0.0, 0.0]).unwrap();
    let span = TimeSpan::new(0.0, 10.0);
    for traj in [
        integrate_bloch(&rho0, [0.0, 0.0, omega], span, 1e-3).unwrap(),
        integrate_von_neumann(
            &density_from_bloch(&rho0),
            &Hamiltonian::two_state([0.0, 0.0, omega]),
            span,
            1e-3,
        )
        .unwrap(),
    ] {
        assert_eq!(traj.times.len(), 10_001);
        for (t, r) in traj.times.iter().zip(&traj.bloch) {
            let want = [(2.0 * omega * t).cos(), (2.0 * omega * t).sin(), 0.0];
            for k in 0..3 {
                assert!((r[k] - want[k]).abs() <= 1e-8, "t = {t}");
            }
        }
        let p0 = traj.purity[0];
        assert!(traj.purity.iter().all(|p| (p - p0).abs() <= 1e-10));
        assert!(traj.error_estimate < 1e-10);
    }
}

#[test]
fn hamiltonian_is_recovered_from_rotation() {
    let h: [f64; 3] = [0.3, -0.2, 0.5];
    let n = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
    let dir = h.map(|x| x / n);
    let s = |t: f64| rodrigues(dir, 2.0 * n * t);
    for t in [0.0, 0.4, 1.7] {
        let got = hamiltonian_from_rotation(s, t, 1e-3).unwrap();
        for k in 0..3 {
            assert!((got[k] - h[k]).abs() <= 1e-8, "{got:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn alpha_rotation_is_u_conjugation(a in prop::array::uniform3(-2.0..2.0f64), r in prop::array::uniform3(-0.57..0.57f64)) {
        let state = BlochState::two(r).unwrap();
        let got = unitary_step(&state, a).unwrap();
        let u = to_m2(&unitary_from_alpha(a));
        let conj = mul(&mul(&u, &rho2(&r)), &dagger(&u));
        let want = bloch2(&conj);
        for k in 0..3 {
            prop_assert!((got.rho()[k] - want[k]).abs() <= 1e-12);
        }
        let s = alpha_rotation(a);
        prop_assert!((s.transpose() * s - Matrix3::identity()).amax() <= 1e-12);
        prop_assert!((s.determinant() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn von_neumann_matches_exact_propagation(h in prop::array::uniform3(-1.0..1.0f64), r in prop::array::uniform3(-0.57..0.57f64)) {
        let t = 2.0;
        let state = BlochState::two(r).unwrap();
        let ham = Hamiltonian::two_state(h);
        let traj = integrate_von_neumann(&density_from_bloch(&state), &ham, TimeSpan::new(0.0, t), 1e-3).unwrap();
        // exp(−iH·τ t) = cos(|h|t) − i sin(|h|t) ĥ·τ.
        let n = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
        let mut u = scale(&identity::<2>(), C::new((n * t).cos(), 0.0));
        if n > 0.0 {
            u = add(&u, &scale(&op2(&h, 0.0), C::new(0.0, -(n * t).sin() / n)));
        }
        let want = bloch2(&mul(&mul(&u, &rho2(&r)), &dagger(&u)));
        let got = traj.last_bloch().unwrap();
        for k in 0..3 {
            prop_assert!((got[k] - want[k]).abs() <= 1e-9);
        }
        let exact = to_m2(&propagator(&ham, t).unwrap());
        prop_assert!(max_diff(&exact, &u) <= 1e-12);
    }

    #[test]
    fn rotating_the_distribution_rotates_rho(mt in 0.0..3.1f64, mp in 0.0..6.2f64, kappa in 0.0..5.0f64,
                                             at in 0.0..3.1f64, ap in 0.0..6.2f64, angle in -3.0..3.0f64) {
        let ens = grid_ensemble(6, von_mises_fisher(polar(mt, mp), kappa)).unwrap();
        let r = rodrigues(polar(at, ap), angle);
        let rotated = rotate_distribution(&ens, &r).unwrap().reduce().unwrap();
        let before = ens.reduce().unwrap();
        let want = r * nalgebra::Vector3::from_column_slice(before.rho());
        for k in 0..3 {
            prop_assert!((rotated.rho()[k] - want[k]).abs() <= 1e-12);
        }
        prop_assert!((rotated.purity() - before.purity()).abs() <= 1e-12);
    }

    #[test]
    fn reduced_transition_maps_rho(seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 5;
        let ens = Ensemble::new(
            (0..n).map(|_| (MicroState::sphere(unit3(&mut rng)).unwrap(), 1.0 / n as f64)).collect(),
        )
        .unwrap();
        let mut t = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.0..1.0));
        for mut col in t.column_iter_mut() {
            let s: f64 = col.iter().sum();
            col /= s;
        }
        let s = match reduced_from_micro(&t, &ens) {
            Ok(s) => s,
            Err(Error::ZeroPurity) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let before = ens.reduce().unwrap();
        let probs = &t * nalgebra::DVector::from_vec(ens.probabilities());
        let after = ens.with_probabilities(probs.as_slice()).unwrap().reduce().unwrap();
        let got = s.apply(&before).unwrap();
        for k in 0..3 {
            prop_assert!((got[k] - after.rho()[k]).abs() <= 1e-12);
        }
    }
}

#[test]
fn constant_rate_decay() {
    let r0 = [0.4, -0.3, 0.5];
    let state = BlochState::two(r0).unwrap();
    let d = -0.3;
    let traj = integrate_open(
        &density_from_bloch(&state),
        &Hamiltonian::two_state([0.0; 3]),
        |_, _| d,
        TimeSpan::new(0.0, 5.0),
        1e-3,
    )
    .unwrap();
    let p0 = state.purity();
    for ((t, r), p) in traj.times.iter().zip(&traj.bloch).zip(&traj.purity) {
        for k in 0..3 {
            assert!((r[k] - r0[k] * (d * t).exp()).abs() <= 1e-8);
        }
        assert!((p - p0 * (2.0 * d * t).exp()).abs() <= 1e-8);
    }
}

#[test]
fn purity_dependent_rate_rises_toward_one() {
    let state = BlochState::two([0.2, 0.1, 0.0]).unwrap();
    let kappa = 0.8;
    let traj = integrate_open(
        &density_from_bloch(&state),
        &Hamiltonian::two_state([0.0, 0.0, 1.0]),
        |r, _| kappa * (1.0 - r.iter().map(|x| x * x).sum::<f64>()),
        TimeSpan::new(0.0, 20.0),
        1e-3,
    )
    .unwrap();
    assert!(traj.purity.windows(2).all(|w| w[1] >= w[0] - 1e-15));
    assert!(traj.purity.last().unwrap() > &0.999);
    assert!(traj.purity.iter().all(|p| *p <= 1.0 + 1e-9));
}

#[test]
fn four_state_open_evolution_keeps_trace() {
    let rho = DensityMatrix::maximally_mixed(Level::Four);
    let lb = pobs::LBasis::standard();
    let h =
        pobs::Operator::new(lb.get(4) * C::new(0.3, 0.0) + lb.get(12) * C::new(0.2, 0.0)).unwrap();
    let traj = integrate_open(
        &rho,
        &Hamiltonian::Matrix(h),
        |_, _| -0.1,
        TimeSpan::new(0.0, 1.0),
        1e-2,
    )
    .unwrap();
    assert!(traj.purity.iter().all(|p| *p == 0.0));
}

#[test]
fn syncoherence_matches_closed_form() {
    let params = FlowParams::new(3.0, 2.0);
    let (p0, d0) = (0.4, 0.5);
    let traj = syncoherence_flow(p0, d0, &params, TimeSpan::new(0.0, 10.0), 1e-3).unwrap();
    for ((t, p), d) in traj.times.iter().zip(&traj.purity).zip(&traj.rate) {
        let (pc, dc) = syncoherence_closed_form(p0, d0, &params, *t).unwrap();
        assert!((p - pc).abs() <= 1e-6 * pc.abs(), "P at {t}");
        assert!((d - dc).abs() <= 1e-6 * dc.abs(), "D at {t}");
    }
    assert!((traj.purity.last().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn syncoherence_requires_real_rates() {
    assert!(FlowParams::new(1.0, 1.0).rates().is_err());
    assert!(syncoherence_closed_form(0.5, 0.0, &FlowParams::new(-1.0, 0.1), 1.0).is_err());
}
