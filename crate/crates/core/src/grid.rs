//! Procedural N-dimensional gridworlds with reward-emitting objects.
//!
//! States enumerate cells row-major (first dimension most significant).
//! Actions enumerate `{-1, 0, +1}^dims` as ternary numbers, digit `0`
//! meaning `-1`, again with the first dimension most significant; the action
//! whose digits are all `1` stays put. Moves are clamped at the border.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::FeatureMatrix;
use crate::error::{Error, Result};
use crate::mdp::{scaled_softmax_into, ActionId, Mdp, QTable, StateId, TransitionModel};
use crate::trajectory::{Trajectory, TrajectorySet};

pub const DEFAULT_GAMMA: f64 = 0.95;
pub const DEFAULT_STATE_CAP: usize = 1_000_000;
/// Default confidence of the demonstration sampler.
pub const DEFAULT_SAMPLE_B: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GridObject {
    pub position: Vec<usize>,
    /// Positive attracts, negative repels.
    pub magnitude: f64,
    pub decay_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GridSpec {
    pub dims: usize,
    pub size_per_dim: usize,
    pub objects: Vec<GridObject>,
    pub gamma: f64,
    pub seed: u64,
}

impl GridSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GridSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 || self.size_per_dim == 0 {
            return Err(Error::pre("dims and sizePerDim must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::pre(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        for (j, o) in self.objects.iter().enumerate() {
            if o.position.len() != self.dims || o.position.iter().any(|&c| c >= self.size_per_dim) {
                return Err(Error::pre(format!("object {j} lies outside the grid")));
            }
            if !(o.decay_scale > 0.0 && o.decay_scale.is_finite()) {
                return Err(Error::pre(format!(
                    "object {j} needs a positive decay scale"
                )));
            }
            if !o.magnitude.is_finite() {
                return Err(Error::pre(format!("object {j} has a non-finite magnitude")));
            }
        }
        Ok(())
    }
}

/// Index ↔ coordinate conversion for a `size^dims` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoordCodec {
    pub dims: usize,
    pub size: usize,
}

impl CoordCodec {
    pub fn num_cells(&self) -> usize {
        self.size.pow(self.dims as u32)
    }

    pub fn encode(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.size + c)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims];
        for c in out.iter_mut().rev() {
            *c = index % self.size;
            index /= self.size;
        }
        out
    }

    /// Per-dimension displacement of an action index.
    pub fn action_delta(&self, mut action: usize) -> Vec<i64> {
        let mut out = vec![0; self.dims];
        for d in out.iter_mut().rev() {
            *d = (action % 3) as i64 - 1;
            action /= 3;
        }
        out
    }

    pub fn num_actions(&self) -> usize {
        3usize.pow(self.dims as u32)
    }

    /// The action that leaves every coordinate unchanged.
    pub fn stay_action(&self) -> usize {
        (self.num_actions() - 1) / 2
    }

    pub fn step(&self, coords: &[usize], delta: &[i64]) -> Vec<usize> {
        coords
            .iter()
            .zip(delta)
            .map(|(&c, &d)| (c as i64 + d).clamp(0, self.size as i64 - 1) as usize)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    pub mdp: Mdp,
    pub features: FeatureMatrix,
    pub spec: GridSpec,
    pub codec: CoordCodec,
}

impl GridWorld {
    /// True rewards (always present for generated worlds).
    pub fn rewards(&self) -> &[f64] {
        self.mdp.rewards().expect("generated grids carry rewards")
    }
}

fn euclid(a: &[usize], b: &[usize]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

pub fn build_grid(spec: &GridSpec) -> Result<GridWorld> {
    build_grid_capped(spec, DEFAULT_STATE_CAP)
}

pub fn build_grid_capped(spec: &GridSpec, cap: usize) -> Result<GridWorld> {
    spec.validate()?;
    let states = (spec.size_per_dim as u128).checked_pow(spec.dims as u32);
    match states {
        Some(n) if n <= cap as u128 => {}
        _ => {
            return Err(Error::TooLarge {
                states: states.unwrap_or(u128::MAX),
                cap,
            })
        }
    }
    if spec.dims > 12 {
        return Err(Error::pre("too many dimensions for the action set"));
    }
    let codec = CoordCodec {
        dims: spec.dims,
        size: spec.size_per_dim,
    };
    let n = codec.num_cells();
    let na = codec.num_actions();
    let deltas: Vec<Vec<i64>> = (0..na).map(|a| codec.action_delta(a)).collect();

    let mut successor = vec![0usize; n * na];
    successor
        .par_chunks_mut(na)
        .enumerate()
        .for_each(|(s, row)| {
            let c = codec.decode(s);
            for (out, d) in row.iter_mut().zip(&deltas) {
                *out = codec.encode(&codec.step(&c, d));
            }
        });
    let tm = TransitionModel::deterministic(n, na, successor)?;

    let m = spec.objects.len();
    let mut feats = vec![0.0; n * m];
    let mut rewards = vec![0.0; n];
    feats
        .par_chunks_mut(m.max(1))
        .zip(rewards.par_iter_mut())
        .enumerate()
        .for_each(|(s, (frow, r))| {
            let c = codec.decode(s);
            let mut total = 0.0;
            for (j, o) in spec.objects.iter().enumerate() {
                let d = euclid(&c, &o.position);
                if m > 0 {
                    frow[j] = d;
                }
                total += o.magnitude * (-d / o.decay_scale).exp();
            }
            *r = total;
        });
    if m == 0 {
        feats.clear();
    }
    let features = FeatureMatrix::new(n, m, feats)?;
    let mdp = Mdp::new(tm, Some(rewards), spec.gamma)?;
    Ok(GridWorld {
        mdp,
        features,
        spec: spec.clone(),
        codec,
    })
}

/// Objects at uniform cells with magnitudes in `[-1, 1]` and decay scales in
/// `[1, max(1, size/2)]`.
pub fn random_spec(
    dims: usize,
    size_per_dim: usize,
    num_objects: usize,
    seed: u64,
) -> Result<GridSpec> {
    if num_objects == 0 {
        return Err(Error::pre("at least one object is required"));
    }
    if dims == 0 || size_per_dim == 0 {
        return Err(Error::pre("dims and sizePerDim must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi = (size_per_dim as f64 / 2.0).max(1.0);
    let objects = (0..num_objects)
        .map(|_| {
            let position = (0..dims)
                .map(|_| rng.random_range(0..size_per_dim))
                .collect();
            let magnitude = rng.random_range(-1.0..=1.0);
            let decay_scale = if hi > 1.0 {
                rng.random_range(1.0..=hi)
            } else {
                1.0
            };
            GridObject {
                position,
                magnitude,
                decay_scale,
            }
        })
        .collect();
    Ok(GridSpec {
        dims,
        size_per_dim,
        objects,
        gamma: DEFAULT_GAMMA,
        seed,
    })
}

/// How demonstrators pick actions from a Q table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum SamplePolicy {
    Boltzmann {
        b: f64,
    },
    /// Limit `b → ∞`: always the lowest-index maximizing action.
    Greedy,
}

pub fn sample_trajectories(
    gw: &GridWorld,
    q: &QTable,
    count: usize,
    length: usize,
    policy: SamplePolicy,
    seed: u64,
) -> Result<TrajectorySet> {
    sample_from_mdp(&gw.mdp, q, count, length, policy, seed)
}

/// Rolls out `count` trajectories of exactly `length` pairs from uniform
/// random start states. Trajectory `i` draws from its own stream of the
/// seeded generator, so output does not depend on scheduling.
pub fn sample_from_mdp(
    mdp: &Mdp,
    q: &QTable,
    count: usize,
    length: usize,
    policy: SamplePolicy,
    seed: u64,
) -> Result<TrajectorySet> {
    let n = mdp.num_states();
    let na = mdp.num_actions();
    if q.num_states() != n || q.num_actions() != na {
        return Err(Error::Dimension {
            what: "Q table size",
            expected: n * na,
            actual: q.num_states() * q.num_actions(),
        });
    }
    // cumulative action distribution per state
    let mut cdf = vec![0.0; n * na];
    match policy {
        SamplePolicy::Boltzmann { b } => {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::pre(format!(
                    "sampler confidence must be finite and >= 0, got {b}"
                )));
            }
            cdf.par_chunks_mut(na).enumerate().for_each(|(s, row)| {
                scaled_softmax_into(q.row(s), b, row);
                let mut acc = 0.0;
                for p in row.iter_mut() {
                    acc += *p;
                    *p = acc;
                }
            });
        }
        SamplePolicy::Greedy => {
            for s in 0..n {
                let best = crate::mdp::argmax(q.row(s));
                for a in best..na {
                    cdf[s * na + a] = 1.0;
                }
            }
        }
    }
    let tm = mdp.transitions();
    let trajectories = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut s = rng.random_range(0..n);
            let mut steps = Vec::with_capacity(length);
            for _ in 0..length {
                let a = draw(&cdf[s * na..(s + 1) * na], rng.random::<f64>());
                steps.push((StateId(s), ActionId(a)));
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut next = None;
                for (s2, p) in tm.successors(s, a) {
                    acc += p;
                    next = Some(s2);
                    if u < acc {
                        break;
                    }
                }
                s = next.expect("rows are nonempty");
            }
            Trajectory::new(steps)
        })
        .collect();
    Ok(TrajectorySet::new(trajectories))
}

#[inline]
fn draw(cdf: &[f64], u: f64) -> usize {
    let idx = cdf.partition_point(|&c| c <= u);
    // rounding can leave the last cumulative value just below u
    idx.min(cdf.len() - 1)
}
