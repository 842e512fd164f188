mod common;

use common::*;
use pobs::correlations::{
    conditional_correlation_2pt, conditional_correlation_3pt, conditional_product,
    measurement_chain, sample_records, sequence_distribution, sequence_probabilities,
    simulate_sequences,
};
use pobs::quantum::{density_from_bloch, ordered_three_point};
use pobs::{BlochState, Level, Observable, Operator, TwoLevelObservable};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spin(e: [f64; 3]) -> TwoLevelObservable {
    TwoLevelObservable::spin(e.to_vec()).unwrap()
}

fn angles() -> impl Strategy<Value = [f64; 3]> {
    (0.0..std::f64::consts::PI, 0.0..6.3f64).prop_map(|(t, p)| polar(t, p))
}

fn state() -> impl Strategy<Value = BlochState> {
    (angles(), 0.0..=1.0f64).prop_map(|(d, r)| BlochState::two(d.map(|x| x * r)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn two_point_is_anticommutator(a in angles(), b in angles(), rho in state()) {
        let oracle = 0.5 * trace(&mul(&anti(&op2(&a, 0.0), &op2(&b, 0.0)), &rho2(rho.rho()))).re;
        let ab = conditional_correlation_2pt(&spin(a), &spin(b), &rho).unwrap();
        let ba = conditional_correlation_2pt(&spin(b), &spin(a), &rho).unwrap();
        prop_assert!((ab - oracle).abs() <= 1e-12);
        prop_assert!((ab - ba).abs() <= 1e-12);
    }

    #[test]
    fn three_point_is_nested_anticommutator(a in angles(), b in angles(), c in angles(), rho in state()) {
        let (sa, sb, sc) = (op2(&a, 0.0), op2(&b, 0.0), op2(&c, 0.0));
        let oracle = 0.25 * trace(&mul(&anti(&anti(&sa, &sb), &sc), &rho2(rho.rho()))).re;
        let v = conditional_correlation_3pt(&spin(a).into(), &spin(b).into(), &spin(c).into(), &rho).unwrap();
        prop_assert!((v - oracle).abs() <= 1e-12);
        let op = |e: [f64; 3]| Operator::from_observable(&spin(e));
        let lib = ordered_three_point(&op(a), &op(b), &op(c), &density_from_bloch(&rho)).unwrap();
        prop_assert!((lib - oracle).abs() <= 1e-12);
    }

    #[test]
    fn chain_matches_closed_forms(a in angles(), b in angles(), c in angles(), rho in state()) {
        let dm = density_from_bloch(&rho);
        let (_, v2) = measurement_chain(&[spin(a).into(), spin(b).into()], &dm).unwrap();
        let want2 = conditional_correlation_2pt(&spin(a), &spin(b), &rho).unwrap();
        prop_assert!((v2 - want2).abs() <= 1e-12);
        let obs: Vec<Observable> = vec![spin(a).into(), spin(b).into(), spin(c).into()];
        let (_, v3) = measurement_chain(&obs, &dm).unwrap();
        let want3 = conditional_correlation_3pt(&obs[0], &obs[1], &obs[2], &rho).unwrap();
        prop_assert!((v3 - want3).abs() <= 1e-12);
    }

    #[test]
    fn sequence_probabilities_are_complete(a in angles(), b in angles(), rho in state()) {
        let w = sequence_probabilities(&spin(a), &spin(b), &rho).unwrap();
        prop_assert!((w.total() - 1.0).abs() <= 1e-12);
        for x in [w.pp, w.pm, w.mp, w.mm] {
            prop_assert!(x >= -1e-15);
        }
        let v = sequence_probabilities(&spin(b), &spin(a), &rho).unwrap();
        prop_assert!((w.same_sign() - v.same_sign()).abs() <= 1e-12);
        let dist = sequence_distribution(&[spin(a).into(), spin(b).into()], &density_from_bloch(&rho)).unwrap();
        let total: f64 = dist.iter().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn conditional_product_reproduces_correlation(a in angles(), b in angles(), rho in state()) {
        let prod = conditional_product(&spin(a).into(), &spin(b).into()).unwrap();
        let want = conditional_correlation_2pt(&spin(a), &spin(b), &rho).unwrap();
        prop_assert!((prod.mean(&rho).unwrap() - want).abs() <= 1e-12);
    }
}

#[test]
fn orthogonal_spin_identity_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(39);
    let mut states = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.3, -0.4, 0.5]];
    for _ in 0..100 {
        let r: f64 = rng.gen_range(0.0..=1.0);
        states.push(unit3(&mut rng).map(|x| x * r));
    }
    for r in states {
        let rho = BlochState::two(r).unwrap();
        for k in 1..=3 {
            for l in 1..=3 {
                for m in 1..=3 {
                    let v = conditional_correlation_3pt(
                        &TwoLevelObservable::basis(Level::Two, k).into(),
                        &TwoLevelObservable::basis(Level::Two, l).into(),
                        &TwoLevelObservable::basis(Level::Two, m).into(),
                        &rho,
                    )
                    .unwrap();
                    let want = if k == l { rho.rho()[m - 1] } else { 0.0 };
                    assert_eq!(v, want, "({k},{l},{m}) on {r:?}");
                }
            }
        }
    }
}

#[test]
fn repeated_measurement_is_certain() {
    let a = spin(polar(1.1, 0.4));
    let rho = density_from_bloch(&BlochState::two([0.2, 0.1, -0.3]).unwrap());
    let obs: Vec<Observable> = vec![a.clone().into(), a.into()];
    let r = simulate_sequences(&obs, &rho, 100_000, 3).unwrap();
    assert_eq!(r.value, 1.0);
    let (_, v) = measurement_chain(&obs, &rho).unwrap();
    assert!((v - 1.0).abs() < 1e-14);
}

#[test]
fn simulation_is_reproducible_and_unbiased() {
    let (a, b, c) = (
        spin(polar(0.3, 0.0)),
        spin(polar(1.2, 2.0)),
        spin(polar(2.0, 4.0)),
    );
    let state = BlochState::two([0.3, 0.5, -0.2]).unwrap();
    let rho = density_from_bloch(&state);
    let obs: Vec<Observable> = vec![a.into(), b.into(), c.into()];
    let want = conditional_correlation_3pt(&obs[0], &obs[1], &obs[2], &state).unwrap();
    let r1 = simulate_sequences(&obs, &rho, 200_000, 11).unwrap();
    let r2 = simulate_sequences(&obs, &rho, 200_000, 11).unwrap();
    assert_eq!(r1, r2);
    assert!(
        (r1.value - want).abs() <= 5.0 * r1.stderr,
        "{} vs {want}",
        r1.value
    );
    let recs = sample_records(&obs, &rho, 10, 11).unwrap();
    assert_eq!(recs.len(), 10);
    assert!(recs
        .iter()
        .all(|r| r.outcomes.iter().map(|o| o.0).collect::<Vec<_>>() == vec![2, 1, 0]));
}

#[test]
fn random_observable_has_no_eigenstates() {
    let a = spin([1.0, 0.0, 0.0]);
    let rho = BlochState::two([0.0, 0.0, 0.5]).unwrap();
    assert!(
        conditional_correlation_3pt(&a.clone().into(), &Observable::Random, &a.into(), &rho)
            .is_err()
    );
}
