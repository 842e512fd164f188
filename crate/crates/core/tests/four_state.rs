mod common;

use common::*;
use num_complex::Complex64 as C;
use pobs::correlations::simulate_sequences;
use pobs::four_state::*;
use pobs::manifold::{circle_grid, grid_ensemble, von_mises_fisher};
use pobs::quantum::{density_from_bloch, CVector};
use pobs::{
    BlochState, Ensemble, LBasis, MicroState, Observable, TwoLevelObservable, WaveFunction,
};
use proptest::prelude::*;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

fn psi(v: [f64; 4]) -> WaveFunction {
    WaveFunction::normalized(CVector::from_vec(
        v.iter().map(|x| C::new(*x, 0.0)).collect(),
    ))
    .unwrap()
}

fn mixed_four_state(seed: u64) -> BlochState {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<_> = (0..3)
        .map(|_| {
            let v = random_psi(&mut rng);
            let w = WaveFunction::new(CVector::from_column_slice(&v)).unwrap();
            (MicroState::four_state(w).unwrap(), rng.gen_range(0.1..1.0))
        })
        .collect();
    let total: f64 = pts.iter().map(|p| p.1).sum();
    Ensemble::new(pts.into_iter().map(|(m, w)| (m, w / total)).collect())
        .unwrap()
        .reduce()
        .unwrap()
}

#[test]
fn generators_are_pauli_products() {
    let lb = LBasis::standard();
    for k in 1..=15 {
        let m = lb.get(k);
        let o = l(k);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[(i, j)], o[i][j], "L{k}");
            }
        }
    }
}

#[test]
fn singlet_observables() {
    let b = entangled_bloch(-1).unwrap();
    assert_eq!(
        [b.component(1), b.component(2), b.component(3)],
        [0.0, 0.0, -1.0]
    );
    let w = outcomes_from_t(b.component(1), b.component(2), b.component(3)).unwrap();
    assert_eq!((w.pp, w.pm, w.mp, w.mm), (0.0, 0.5, 0.5, 0.0));
    assert_eq!(w.expectations(), [0.0, 0.0, -1.0]);
    let oracle = projector4(&[
        C::new(0.0, 0.0),
        C::new(FRAC_1_SQRT_2, 0.0),
        C::new(-FRAC_1_SQRT_2, 0.0),
        C::new(0.0, 0.0),
    ]);
    // ¼(1 − τ₁⊗τ₁ − τ₂⊗τ₂ − τ₃⊗τ₃).
    let mut m = identity::<4>();
    for a in 1..=3 {
        m = add(&m, &scale(&kron(&pauli(a), &pauli(a)), C::new(-1.0, 0.0)));
    }
    assert!(max_diff(&scale(&m, C::new(0.25, 0.0)), &oracle) < 1e-15);
    assert!(max_diff(&rho4(b.rho()), &oracle) < 1e-15);
}

#[test]
fn singlet_is_anticorrelated() {
    let rho = entangled_state(-1).unwrap();
    let (a, b) = rotated_spins(0.0, 0.0);
    assert!(conditional_outcome(&a, &b, &rho, 1, 1).unwrap().abs() < 1e-15);
    assert!(conditional_outcome(&a, &b, &rho, -1, -1).unwrap().abs() < 1e-15);
    assert!((conditional_outcome(&a, &b, &rho, 1, -1).unwrap() - 1.0).abs() < 1e-15);
    assert!((conditional_outcome(&a, &b, &rho, -1, 1).unwrap() - 1.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn singlet_correlation_is_minus_cosine(theta in -PI..PI, phi in -PI..PI) {
        let b = entangled_bloch(-1).unwrap();
        let want = -(theta - phi).cos();
        prop_assert!((rotated_spin_correlation(theta, phi, &b).unwrap() - want).abs() <= 1e-12);
        prop_assert!((rotated_spin_correlation_components(theta, phi, &b).unwrap() - want).abs() <= 1e-12);
    }

    #[test]
    fn component_formula_matches_anticommutator(theta in -PI..PI, phi in -PI..PI, seed in any::<u64>()) {
        let state = mixed_four_state(seed);
        let (ct, st, cp, sp) = (theta.cos(), theta.sin(), phi.cos(), phi.sin());
        let a = add(&scale(&l(1), C::new(ct, 0.0)), &scale(&l(8), C::new(st, 0.0)));
        let b = add(&scale(&l(2), C::new(cp, 0.0)), &scale(&l(4), C::new(sp, 0.0)));
        let oracle = 0.5 * trace(&mul(&anti(&a, &b), &rho4(state.rho()))).re;
        prop_assert!((rotated_spin_correlation(theta, phi, &state).unwrap() - oracle).abs() <= 1e-12);
        prop_assert!((rotated_spin_correlation_components(theta, phi, &state).unwrap() - oracle).abs() <= 1e-12);
    }

    #[test]
    fn classical_correlators_obey_bell(mt in 0.0..PI, mp in 0.0..6.3f64, kappa in 0.0..10.0f64,
                                       t1 in -PI..PI, t2 in -PI..PI) {
        let ens = grid_ensemble(4, von_mises_fisher(polar(mt, mp), kappa)).unwrap();
        let c = classical_bell_check(&ens, t1, t2).unwrap();
        prop_assert!(!c.violated, "{c:?}");
    }

    #[test]
    fn exchange_map_conjugates_generators(k in 1usize..=15) {
        let p = exchange_operator();
        let lk = LBasis::standard().get(k);
        let conj = &p * lk * &p;
        prop_assert_eq!(&conj, LBasis::standard().get(exchange_index(k)));
    }
}

#[test]
fn classical_bell_handles_parallel_angles() {
    let ens = circle_grid(16, |a| 1.0 + 0.5 * a.cos()).unwrap();
    for (t1, t2) in [
        (0.0, 0.0),
        (PI, 0.3),
        (0.4, 0.4 + PI),
        (FRAC_PI_2, FRAC_PI_4),
    ] {
        assert!(!classical_bell_check(&ens, t1, t2).unwrap().violated);
    }
}

#[test]
fn singlet_violates_bell() {
    let c = bell_check(quantum_correlator, FRAC_PI_2, FRAC_PI_4);
    assert!((c.lhs - c.rhs - (2f64.sqrt() - 1.0)).abs() < 1e-15);
    let b = entangled_bloch(-1).unwrap();
    let m = bell_check(
        |t| rotated_spin_correlation(t, 0.0, &b).unwrap(),
        FRAC_PI_2,
        FRAC_PI_4,
    );
    assert!(m.violated && m.lhs - m.rhs > 0.414 - 1e-9);
}

#[test]
fn interference_matches_superposition() {
    let (wa, wb) = (1.7, 0.7);
    for t in [0.0, 0.3, 1.0, 2.5, 2.0 * PI] {
        let r = interference_evolution(wa - wb, t, 1e-3).unwrap();
        assert!((r.t2 - ((wa - wb) * t).cos()).abs() <= 1e-8);
        let v = interference_wavefunction(wa, wb, t);
        let arr: [C; 4] = std::array::from_fn(|i| v.vector()[i]);
        assert!(
            max_diff(&rho4(r.state.rho()), &projector4(&arr)) <= 1e-8,
            "t = {t}"
        );
    }
}

#[test]
fn exchange_classification_table() {
    let h = FRAC_1_SQRT_2;
    let cases = [
        ([0.0, h, -h, 0.0], ExchangeClass::Fermionic),
        ([0.0, h, h, 0.0], ExchangeClass::Bosonic),
        ([1.0, 0.0, 0.0, 0.0], ExchangeClass::Bosonic),
        ([0.0, 0.0, 0.0, 1.0], ExchangeClass::Bosonic),
        ([0.5, 0.3, 0.3, -0.2], ExchangeClass::Bosonic),
        ([0.0, 0.6, 0.2, 0.0], ExchangeClass::Forbidden),
        ([0.3, 0.5, -0.5, 0.1], ExchangeClass::Forbidden),
        ([0.0, 1.0, 0.0, 0.0], ExchangeClass::Forbidden),
    ];
    for (v, want) in cases {
        let w = psi(v);
        assert_eq!(classify_exchange(&w).unwrap(), want, "{v:?}");
        let sym =
            is_exchange_symmetric(&pobs::quantum::bloch_from_density(&w.density_matrix())).unwrap();
        assert_eq!(sym, want != ExchangeClass::Forbidden, "{v:?}");
    }
}

#[test]
fn singlet_sequences_reproduce_cosine() {
    let rho = density_from_bloch(&entangled_bloch(-1).unwrap());
    for (theta, phi) in [(0.3, 1.1), (FRAC_PI_2, FRAC_PI_4)] {
        let mut ea = vec![0.0; 15];
        ea[0] = f64::cos(theta);
        ea[7] = f64::sin(theta);
        let mut eb = vec![0.0; 15];
        eb[1] = f64::cos(phi);
        eb[3] = f64::sin(phi);
        let obs: Vec<Observable> = vec![
            TwoLevelObservable::spin(ea).unwrap().into(),
            TwoLevelObservable::spin(eb).unwrap().into(),
        ];
        let r = simulate_sequences(&obs, &rho, 200_000, 5).unwrap();
        let want = -(theta - phi).cos();
        assert!(
            (r.value - want).abs() <= 5.0 * r.stderr,
            "{} vs {want}",
            r.value
        );
    }
}

#[test]
fn outcome_table_round_trip() {
    for t in [[0.2, -0.1, 0.3], [1.0, -1.0, -1.0], [0.0, 0.0, 0.0]] {
        let w = outcomes_from_t(t[0], t[1], t[2]).unwrap();
        assert!((w.total() - 1.0).abs() < 1e-15);
        let back = w.expectations();
        for k in 0..3 {
            assert!((back[k] - t[k]).abs() < 1e-15);
        }
    }
}
