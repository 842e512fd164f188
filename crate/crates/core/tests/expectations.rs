mod common;

use common::*;
use num_complex::Complex64 as C;
use pobs::four_state::bit_expectation;
use pobs::manifold::{grid_ensemble, von_mises_fisher};
use pobs::quantum::{density_from_bloch, qm_expectation, CVector};
use pobs::{Ensemble, MicroState, Operator, TwoLevelObservable, WaveFunction};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sphere_ensemble(seed: u64, n: usize) -> Ensemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<_> = (0..n)
        .map(|_| (unit3(&mut rng), rng.gen_range(0.0..1.0)))
        .collect();
    let total: f64 = pts.iter().map(|p| p.1).sum();
    Ensemble::new(
        pts.into_iter()
            .map(|(f, w)| (MicroState::sphere(f).unwrap(), w / total))
            .collect(),
    )
    .unwrap()
}

fn four_state_ensemble(seed: u64, n: usize) -> (Ensemble, Vec<([C; 4], f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<_> = (0..n)
        .map(|_| (random_psi(&mut rng), rng.gen_range(0.1..1.0)))
        .collect();
    let total: f64 = raw.iter().map(|p| p.1).sum();
    let raw: Vec<_> = raw.into_iter().map(|(v, w)| (v, w / total)).collect();
    let ens = Ensemble::new(
        raw.iter()
            .map(|(v, w)| {
                let psi = WaveFunction::new(CVector::from_column_slice(v)).unwrap();
                (MicroState::four_state(psi).unwrap(), *w)
            })
            .collect(),
    )
    .unwrap();
    (ens, raw)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ensemble_sum_matches_trace(seed in any::<u64>(), theta in 0.0..std::f64::consts::PI, phi in 0.0..6.3f64) {
        let ens = sphere_ensemble(seed, 40);
        let e = polar(theta, phi);
        let direct: f64 = ens
            .points()
            .iter()
            .map(|(m, p)| {
                let f = m.direction().unwrap();
                p * (f[0] * e[0] + f[1] * e[1] + f[2] * e[2])
            })
            .sum();
        let rho = ens.reduce().unwrap();
        let oracle = trace(&mul(&op2(&e, 0.0), &rho2(rho.rho()))).re;
        let a = TwoLevelObservable::spin(e.to_vec()).unwrap();
        prop_assert!((direct - oracle).abs() <= 1e-12);
        prop_assert!((a.expectation(&rho).unwrap() - oracle).abs() <= 1e-12);
        prop_assert!(rho.purity() <= 1.0 + 1e-12);
    }

    #[test]
    fn grid_ensembles_obey_expectation_law(
        theta in 0.0..std::f64::consts::PI, phi in 0.0..6.3f64,
        mt in 0.0..std::f64::consts::PI, mp in 0.0..6.3f64, kappa in 0.0..20.0f64,
    ) {
        let ens = grid_ensemble(32, von_mises_fisher(polar(mt, mp), kappa)).unwrap();
        prop_assert!(ens.len() >= 2048);
        let e = polar(theta, phi);
        let direct: f64 = ens
            .points()
            .iter()
            .map(|(m, p)| {
                let f = m.direction().unwrap();
                p * (f[0] * e[0] + f[1] * e[1] + f[2] * e[2])
            })
            .sum();
        let rho = ens.reduce().unwrap();
        let oracle = trace(&mul(&op2(&e, 0.0), &rho2(rho.rho()))).re;
        prop_assert!((direct - oracle).abs() <= 1e-12);
    }

    #[test]
    fn general_observable_trace(seed in any::<u64>(), e in prop::array::uniform3(-2.0..2.0f64), e0 in -1.0..1.0f64) {
        let ens = sphere_ensemble(seed, 10);
        let rho = ens.reduce().unwrap();
        let a = TwoLevelObservable::new(e.to_vec(), e0).unwrap();
        let oracle = trace(&mul(&op2(&e, e0), &rho2(rho.rho()))).re;
        let op = Operator::from_observable(&a);
        prop_assert!((qm_expectation(&op, &density_from_bloch(&rho)).unwrap() - oracle).abs() <= 1e-12);
        prop_assert!((a.expectation(&rho).unwrap() - oracle).abs() <= 1e-12);
    }

    #[test]
    fn bit_observables_three_ways(seed in any::<u64>(), m in 1usize..=15) {
        let (ens, raw) = four_state_ensemble(seed, 6);
        let oracle: f64 = raw
            .iter()
            .map(|(v, w)| w * trace(&mul(&l(m), &projector4(v))).re)
            .sum();
        let b = bit_expectation(&ens, m).unwrap();
        prop_assert!((b.ensemble - oracle).abs() <= 1e-12);
        prop_assert!((b.bloch - oracle).abs() <= 1e-12);
        prop_assert!((b.trace - oracle).abs() <= 1e-12);
    }

    #[test]
    fn mixing_is_linear(s1 in any::<u64>(), s2 in any::<u64>(), alpha in 0.0..=1.0f64) {
        let a = sphere_ensemble(s1, 8);
        let b = sphere_ensemble(s2, 8);
        let m = Ensemble::mix(alpha, &a, &b).unwrap().reduce().unwrap();
        let (ra, rb) = (a.reduce().unwrap(), b.reduce().unwrap());
        for k in 0..3 {
            let want = alpha * ra.rho()[k] + (1.0 - alpha) * rb.rho()[k];
            prop_assert!((m.rho()[k] - want).abs() <= 1e-14);
        }
    }
}

#[test]
fn pure_micro_state_reduces_to_itself() {
    let (ens, raw) = four_state_ensemble(7, 1);
    let rho = ens.reduce().unwrap();
    let want = projector4(&raw[0].0);
    assert!(max_diff(&rho4(rho.rho()), &want) < 1e-12);
    assert!((rho.purity() - 3.0).abs() < 1e-12);
}
