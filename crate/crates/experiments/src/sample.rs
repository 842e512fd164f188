//! Seeded random inputs. Every parameter point draws from its own ChaCha
//! stream, so results do not depend on how points are spread over threads.

use pobs::manifold::{grid_ensemble, von_mises_fisher};
use pobs::{BlochState, Ensemble, TwoLevelObservable};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution, UnitBall, UnitSphere};

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn unit(rng: &mut impl Rng) -> [f64; 3] {
    UnitSphere.sample(rng)
}

pub fn spin(rng: &mut impl Rng) -> TwoLevelObservable {
    TwoLevelObservable::spin(unit(rng).to_vec()).expect("unit vector")
}

/// A two-state Bloch vector, uniform in the ball.
pub fn state(rng: &mut impl Rng) -> BlochState {
    BlochState::two(UnitBall.sample(rng)).expect("inside the ball")
}

/// Uniform on the probability simplex.
pub fn simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let d = Dirichlet::new_with_size(1.0, n).expect("n >= 2");
    d.sample(rng)
}

/// A von Mises-Fisher density with random mean and concentration on an
/// equal-area grid.
pub fn grid_state(rng: &mut impl Rng, resolution: usize, kappa_max: f64) -> pobs::Result<Ensemble> {
    let mu = unit(rng);
    let kappa = rng.gen_range(0.0..=kappa_max);
    grid_ensemble(resolution, von_mises_fisher(mu, kappa))
}
