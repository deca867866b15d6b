//! Maximum-likelihood estimation of the VR function from demonstrations.
//!
//! Actions follow a Boltzmann model on `Q(s,a) = Σ_{s'} P(s'|s,a) f(s')`:
//! `P(a|s) ∝ exp(b·Q(s,a))`. The log-likelihood of the observed pairs is
//!
//! ```text
//! L(θ) = Σ_{(s,a)} [ b·Q(s,a) - ln Σ_â exp(b·Q(s,â)) ]
//! ∇L   = Σ_{(s,a)} b [ ∇Q(s,a) - Σ_â P(â|s) ∇Q(s,â) ],   ∇Q(s,â) = Σ_{s'} P(s'|s,â) ∇f(s')
//! ```
//!
//! Pairs sharing a state share a Q row, so both are evaluated per distinct
//! state with action counts.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{Approximator, FeatureMatrix, NetworkConfig};
use crate::error::{Error, Result};
use crate::eval::reward_correlation;
use crate::history::EpochRecord;
use crate::mdp::{scaled_log_sum_exp, scaled_softmax_into, Mdp};
use crate::trajectory::TrajectorySet;
use crate::vr::{check_features, local_f, q_row_into, solve_vr, BackupKind, VrSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IrlTrainConfig {
    /// Boltzmann confidence.
    pub b: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for IrlTrainConfig {
    fn default() -> Self {
        Self {
            b: 1.0,
            learning_rate: 1e-5,
            batch_size: 50,
            epochs: 100,
            seed: 0,
        }
    }
}

impl IrlTrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_confidence(self.b)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::pre("learning rate must be finite and > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::pre("batch size must be positive"));
        }
        Ok(())
    }
}

fn check_confidence(b: f64) -> Result<()> {
    if b >= 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(Error::pre(format!(
            "confidence b must be finite and >= 0, got {b}"
        )))
    }
}

/// Demonstrated actions at one state, as `(action, count)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct StateCounts {
    pub state: usize,
    pub actions: Vec<(usize, f64)>,
}

/// Groups pairs by state (ascending) and action (ascending).
pub(crate) fn group_pairs(mut pairs: Vec<(usize, usize)>) -> Vec<StateCounts> {
    pairs.sort_unstable();
    let mut out: Vec<StateCounts> = Vec::new();
    for (s, a) in pairs {
        match out.last_mut() {
            Some(sc) if sc.state == s => match sc.actions.last_mut() {
                Some((last, n)) if *last == a => *n += 1.0,
                _ => sc.actions.push((a, 1.0)),
            },
            _ => out.push(StateCounts {
                state: s,
                actions: vec![(a, 1.0)],
            }),
        }
    }
    out
}

fn check_inputs(features: &FeatureMatrix, mdp: &Mdp, trajs: &TrajectorySet, b: f64) -> Result<()> {
    check_features(features, mdp)?;
    check_confidence(b)?;
    if trajs.num_pairs() == 0 {
        return Err(Error::pre("no state-action pairs"));
    }
    trajs.check_bounds(mdp.num_states(), mdp.num_actions())
}

/// Log-likelihood and optional gradient over grouped pairs.
pub(crate) fn likelihood_on_groups(
    approx: &Approximator,
    features: &FeatureMatrix,
    mdp: &Mdp,
    groups: &[StateCounts],
    b: f64,
    with_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    let states: Vec<usize> = groups.iter().map(|g| g.state).collect();
    let f = local_f(approx, features, mdp, &states, false)?;
    let na = mdp.num_actions();

    let per_state: Vec<f64> = groups
        .par_iter()
        .map_init(
            || vec![0.0; na],
            |row, g| {
                q_row_into(mdp, &f, g.state, row);
                let lse = scaled_log_sum_exp(row, b);
                g.actions
                    .iter()
                    .map(|&(a, n)| n * (b * row[a] - lse))
                    .sum::<f64>()
            },
        )
        .collect();
    let ll: f64 = per_state.iter().sum();

    if !with_grad {
        return Ok((ll, None));
    }
    let tm = mdp.transitions();
    let mut weights = vec![0.0; mdp.num_states()];
    let mut row = vec![0.0; na];
    let mut probs = vec![0.0; na];
    for g in groups {
        let s = g.state;
        q_row_into(mdp, &f, s, &mut row);
        scaled_softmax_into(&row, b, &mut probs);
        let total: f64 = g.actions.iter().map(|&(_, n)| n).sum();
        for &(a, n) in &g.actions {
            for (s2, p) in tm.successors(s, a) {
                weights[s2] += b * n * p;
            }
        }
        for (a, &pa) in probs.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (s2, p) in tm.successors(s, a) {
                weights[s2] -= b * total * pa * p;
            }
        }
    }
    Ok((ll, Some(approx.gradient(features, &weights)?)))
}

pub fn log_likelihood(
    approx: &Approximator,
    features: &FeatureMatrix,
    mdp: &Mdp,
    trajs: &TrajectorySet,
    b: f64,
) -> Result<f64> {
    check_inputs(features, mdp, trajs, b)?;
    let groups = group_pairs(trajs.pairs().collect());
    Ok(likelihood_on_groups(approx, features, mdp, &groups, b, false)?.0)
}

pub fn log_likelihood_gradient(
    approx: &Approximator,
    features: &FeatureMatrix,
    mdp: &Mdp,
    trajs: &TrajectorySet,
    b: f64,
) -> Result<Vec<f64>> {
    check_inputs(features, mdp, trajs, b)?;
    let groups = group_pairs(trajs.pairs().collect());
    Ok(
        likelihood_on_groups(approx, features, mdp, &groups, b, true)?
            .1
            .expect("gradient requested"),
    )
}

/// Ground truth used to annotate IRL history with reward correlation.
#[derive(Debug, Clone, Copy)]
pub struct RewardTruth<'a> {
    pub rewards: &'a [f64],
    /// States included in the correlation; `None` means all states.
    pub mask: Option<&'a [bool]>,
}

#[derive(Debug, Clone)]
pub struct IrlOutcome {
    pub approx: Approximator,
    /// Solution under the hard max backup.
    pub solution: VrSolution,
    /// Row 0 is the initial model; row `e` follows epoch `e`.
    pub history: Vec<EpochRecord>,
}

/// Minibatch gradient ascent on the log-likelihood from a fresh network.
pub fn train_irl(
    mdp: &Mdp,
    features: &FeatureMatrix,
    trajs: &TrajectorySet,
    net: &NetworkConfig,
    cfg: &IrlTrainConfig,
    truth: Option<RewardTruth<'_>>,
) -> Result<IrlOutcome> {
    let approx = Approximator::new(net.clone())?;
    train_irl_from(approx, mdp, features, trajs, cfg, truth)
}

/// As [`train_irl`], continuing from an existing network.
pub fn train_irl_from(
    mut approx: Approximator,
    mdp: &Mdp,
    features: &FeatureMatrix,
    trajs: &TrajectorySet,
    cfg: &IrlTrainConfig,
    truth: Option<RewardTruth<'_>>,
) -> Result<IrlOutcome> {
    cfg.validate()?;
    check_inputs(features, mdp, trajs, cfg.b)?;
    if let Some(t) = truth {
        if t.rewards.len() != mdp.num_states() {
            return Err(Error::Dimension {
                what: "true rewards",
                expected: mdp.num_states(),
                actual: t.rewards.len(),
            });
        }
    }
    let mut pairs: Vec<(usize, usize)> = trajs.pairs().collect();
    let all_groups = group_pairs(pairs.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let record =
        |approx: &Approximator, epoch: usize, history: &[EpochRecord]| -> Result<EpochRecord> {
            let ll = likelihood_on_groups(approx, features, mdp, &all_groups, cfg.b, false)?.0;
            if !ll.is_finite() || approx.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    history: history.to_vec(),
                });
            }
            let metric = match truth {
                Some(t) => {
                    let sol = solve_vr(approx, features, mdp, BackupKind::HardMax)?;
                    // a constant learned reward has no defined correlation
                    reward_correlation(&sol.r, t.rewards, t.mask).ok()
                }
                None => None,
            };
            Ok(EpochRecord {
                epoch,
                objective: ll,
                metric,
            })
        };

    let mut history = Vec::with_capacity(cfg.epochs + 1);
    history.push(record(&approx, 0, &history)?);
    for epoch in 1..=cfg.epochs {
        pairs.shuffle(&mut rng);
        for batch in pairs.chunks(cfg.batch_size) {
            let groups = group_pairs(batch.to_vec());
            let (_, grad) = likelihood_on_groups(&approx, features, mdp, &groups, cfg.b, true)?;
            let grad = grad.expect("gradient requested");
            for (p, g) in approx.params_mut().iter_mut().zip(&grad) {
                *p += cfg.learning_rate * g;
            }
        }
        let rec = record(&approx, epoch, &history)?;
        history.push(rec);
    }
    let solution = solve_vr(&approx, features, mdp, BackupKind::HardMax)?;
    Ok(IrlOutcome {
        approx,
        solution,
        history,
    })
}
