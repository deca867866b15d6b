//! Fitting the VR function to observed per-state rewards.
//!
//! The loss is `LSE(θ) = Σ_s (R̂_s - r(s))²` over observed states, with `r`
//! rebuilt from `f` under the softmax backup so it is differentiable. Its
//! gradient is
//!
//! ```text
//! ∇LSE = Σ_s 2 (r(s) - R̂_s) [∇f(s) - γ Σ_a w_a(s) Σ_{s'} P(s'|s,a) ∇f(s')]
//! ```
//!
//! where `w(s)` are the softmax weights of the Q row. The bracket is folded
//! into per-state weights so the whole gradient is a single weighted-sum
//! backpropagation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approx::{Approximator, FeatureMatrix, NetworkConfig};
use crate::error::{Error, Result};
use crate::eval::mean_q_error;
use crate::history::EpochRecord;
use crate::mdp::{scaled_softmax_into, soft_max_unchecked, Mdp, QTable};
use crate::vr::{check_features, local_f, q_row_into, solve_vr, BackupKind, VrSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RlTrainConfig {
    /// Softmax approximation level.
    pub k: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for RlTrainConfig {
    fn default() -> Self {
        Self {
            k: 50.0,
            learning_rate: 1e-5,
            batch_size: 50,
            epochs: 100,
            seed: 0,
        }
    }
}

impl RlTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::pre("k must be finite and > 0"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::pre("learning rate must be finite and > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::pre("batch size must be positive"));
        }
        Ok(())
    }
}

/// Observed rewards `R̂_s` on the states where `mask` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedRewards {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl ObservedRewards {
    /// Every state observed.
    pub fn full(values: Vec<f64>) -> Self {
        let mask = vec![true; values.len()];
        Self { values, mask }
    }

    pub fn new(values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::Dimension {
                what: "observation mask",
                expected: values.len(),
                actual: mask.len(),
            });
        }
        if values.iter().zip(&mask).any(|(v, &m)| m && !v.is_finite()) {
            return Err(Error::pre("observed rewards must be finite"));
        }
        Ok(Self { values, mask })
    }

    fn observed_states(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&s| self.mask[s]).collect()
    }

    fn check(&self, mdp: &Mdp) -> Result<Vec<usize>> {
        if self.values.len() != mdp.num_states() {
            return Err(Error::Dimension {
                what: "observed rewards",
                expected: mdp.num_states(),
                actual: self.values.len(),
            });
        }
        let states = self.observed_states();
        if states.is_empty() {
            return Err(Error::pre("no observed states"));
        }
        Ok(states)
    }
}

/// Loss and (optionally) gradient restricted to `states`.
fn lse_on_states(
    approx: &Approximator,
    features: &FeatureMatrix,
    mdp: &Mdp,
    observed: &ObservedRewards,
    k: f64,
    states: &[usize],
    with_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    let f = local_f(approx, features, mdp, states, true)?;
    let na = mdp.num_actions();
    let gamma = mdp.gamma();
    let tm = mdp.transitions();
    let mut row = vec![0.0; na];
    let mut soft = vec![0.0; na];
    let mut weights = if with_grad {
        vec![0.0; mdp.num_states()]
    } else {
        Vec::new()
    };
    let mut loss = 0.0;
    for &s in states {
        q_row_into(mdp, &f, s, &mut row);
        let v = soft_max_unchecked(&row, k);
        let residual = f[s] - gamma * v - observed.values[s];
        loss += residual * residual;
        if with_grad {
            let c = 2.0 * residual;
            weights[s] += c;
            scaled_softmax_into(&row, k, &mut soft);
            for (a, &wa) in soft.iter().enumerate() {
                for (s2, p) in tm.successors(s, a) {
                    weights[s2] -= c * gamma * wa * p;
                }
            }
        }
    }
    let grad = if with_grad {
        Some(approx.gradient(features, &weights)?)
    } else {
        None
    };
    Ok((loss, grad))
}

pub fn lse_objective(
    approx: &Approximator,
    features: &FeatureMatrix,
    mdp: &Mdp,
    observed: &ObservedRewards,
    k: f64,
) -> Result<f64> {
    check_features(features, mdp)?;
    let states = observed.check(mdp)?;
    Ok(lse_on_states(approx, features, mdp, observed, k, &states, false)?.0)
}

pub fn lse_gradient(
    approx: &Approximator,
    features: &FeatureMatrix,
    mdp: &Mdp,
    observed: &ObservedRewards,
    k: f64,
) -> Result<Vec<f64>> {
    check_features(features, mdp)?;
    let states = observed.check(mdp)?;
    Ok(
        lse_on_states(approx, features, mdp, observed, k, &states, true)?
            .1
            .expect("gradient requested"),
    )
}

#[derive(Debug, Clone)]
pub struct RlOutcome {
    pub approx: Approximator,
    pub solution: VrSolution,
    /// Row 0 is the initial model; row `e` follows epoch `e`.
    pub history: Vec<EpochRecord>,
}

/// Minibatch gradient descent on the least-squares loss from a fresh
/// network. `oracle`, when given, adds the mean absolute Q error to each
/// history row.
pub fn train_rl(
    mdp: &Mdp,
    features: &FeatureMatrix,
    observed: &ObservedRewards,
    net: &NetworkConfig,
    cfg: &RlTrainConfig,
    oracle: Option<&QTable>,
) -> Result<RlOutcome> {
    let approx = Approximator::new(net.clone())?;
    train_rl_from(approx, mdp, features, observed, cfg, oracle)
}

/// As [`train_rl`], continuing from an existing network.
pub fn train_rl_from(
    mut approx: Approximator,
    mdp: &Mdp,
    features: &FeatureMatrix,
    observed: &ObservedRewards,
    cfg: &RlTrainConfig,
    oracle: Option<&QTable>,
) -> Result<RlOutcome> {
    cfg.validate()?;
    check_features(features, mdp)?;
    let all_states = observed.check(mdp)?;
    let mut order = all_states.clone();
    let backup = BackupKind::Softmax { k: cfg.k };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let record =
        |approx: &Approximator, epoch: usize, history: &[EpochRecord]| -> Result<EpochRecord> {
            let loss = lse_on_states(approx, features, mdp, observed, cfg.k, &all_states, false)?.0;
            if !loss.is_finite() || approx.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    history: history.to_vec(),
                });
            }
            let metric = match oracle {
                Some(q_star) => {
                    let sol = solve_vr(approx, features, mdp, backup)?;
                    Some(mean_q_error(&sol.q, q_star)?)
                }
                None => None,
            };
            Ok(EpochRecord {
                epoch,
                objective: loss,
                metric,
            })
        };

    let mut history = Vec::with_capacity(cfg.epochs + 1);
    history.push(record(&approx, 0, &history)?);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (_, grad) = lse_on_states(&approx, features, mdp, observed, cfg.k, batch, true)?;
            let grad = grad.expect("gradient requested");
            for (p, g) in approx.params_mut().iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
        }
        let rec = record(&approx, epoch, &history)?;
        history.push(rec);
    }
    let solution = solve_vr(&approx, features, mdp, backup)?;
    Ok(RlOutcome {
        approx,
        solution,
        history,
    })
}
