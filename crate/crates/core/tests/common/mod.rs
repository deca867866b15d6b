//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrirl_core::{
    Activation, Approximator, FeatureMatrix, Mdp, NetworkConfig, TrajectorySet, TransitionModel,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Each `(s, a)` gets one to three distinct successors.
pub fn random_transitions(rng: &mut ChaCha8Rng, n: usize, na: usize) -> TransitionModel {
    let mut entries = Vec::new();
    for s in 0..n {
        for a in 0..na {
            let m = rng.random_range(1..=3.min(n));
            let succ = rand::seq::index::sample(rng, n, m).into_vec();
            let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            for (i, (&s2, wi)) in succ.iter().zip(&w).enumerate() {
                let p = if i + 1 == m { 1.0 - acc } else { wi / total };
                acc += p;
                entries.push((s, a, s2, p));
            }
        }
    }
    TransitionModel::from_entries(n, na, entries).unwrap()
}

pub fn random_mdp(rng: &mut ChaCha8Rng, n: usize, na: usize, gamma: f64) -> Mdp {
    let tm = random_transitions(rng, n, na);
    let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Mdp::new(tm, Some(r), gamma).unwrap()
}

pub fn random_features(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let data = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    FeatureMatrix::new(n, d, data).unwrap()
}

/// Network with `depth` hidden layers of random width and random parameters.
pub fn random_net(rng: &mut ChaCha8Rng, d: usize, depth: usize, act: Activation) -> Approximator {
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=6)).collect();
    let mut cfg = NetworkConfig::mlp(d, &hidden, rng.random());
    cfg.activation = act;
    let params = (0..cfg.num_params())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Approximator::with_params(cfg, params).unwrap()
}

pub fn random_trajs(
    rng: &mut ChaCha8Rng,
    n: usize,
    na: usize,
    count: usize,
    len: usize,
) -> TrajectorySet {
    let seqs: Vec<Vec<(usize, usize)>> = (0..count)
        .map(|_| {
            (0..len)
                .map(|_| (rng.random_range(0..n), rng.random_range(0..na)))
                .collect()
        })
        .collect();
    TrajectorySet::from_indices(&seqs)
}

/// Central differences of `obj` with respect to each parameter.
pub fn finite_diff(approx: &Approximator, h: f64, obj: impl Fn(&Approximator) -> f64) -> Vec<f64> {
    let mut probe = approx.clone();
    (0..approx.num_params())
        .map(|i| {
            let p0 = approx.params()[i];
            probe.params_mut()[i] = p0 + h;
            let up = obj(&probe);
            probe.params_mut()[i] = p0 - h;
            let down = obj(&probe);
            probe.params_mut()[i] = p0;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
