//! Accuracy and proficiency metrics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::approx::{Approximator, FeatureMatrix};
use crate::error::{Error, Result};
use crate::grid::{sample_trajectories, GridWorld, SamplePolicy, DEFAULT_SAMPLE_B};
use crate::history::fmt_f64;
use crate::irl::log_likelihood;
use crate::mdp::{argmax, Mdp, QTable};
use crate::trajectory::TrajectorySet;
use crate::vr::{check_features, q_from_f};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_q_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward_correlation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_nll: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disagreement_rate: Option<f64>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Header plus one row; absent metrics are empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "meanQError",
            "rewardCorrelation",
            "meanNll",
            "disagreementRate",
        ])?;
        let cell = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        w.write_record([
            cell(self.mean_q_error),
            cell(self.reward_correlation),
            cell(self.mean_nll),
            cell(self.disagreement_rate),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Mean absolute difference over all `(s, a)`.
pub fn mean_q_error(learned: &QTable, oracle: &QTable) -> Result<f64> {
    if learned.num_states() != oracle.num_states() || learned.num_actions() != oracle.num_actions()
    {
        return Err(Error::Dimension {
            what: "Q table shape",
            expected: oracle.num_states() * oracle.num_actions(),
            actual: learned.num_states() * learned.num_actions(),
        });
    }
    let n = learned.as_slice().len();
    if n == 0 {
        return Err(Error::pre("empty Q tables"));
    }
    let total: f64 = learned
        .as_slice()
        .iter()
        .zip(oracle.as_slice())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / n as f64)
}

/// Pearson correlation over the masked states (all states when `mask` is
/// `None`).
pub fn reward_correlation(learned: &[f64], truth: &[f64], mask: Option<&[bool]>) -> Result<f64> {
    if learned.len() != truth.len() {
        return Err(Error::Dimension {
            what: "reward vector",
            expected: truth.len(),
            actual: learned.len(),
        });
    }
    if let Some(m) = mask {
        if m.len() != truth.len() {
            return Err(Error::Dimension {
                what: "correlation mask",
                expected: truth.len(),
                actual: m.len(),
            });
        }
    }
    let keep = |i: usize| mask.is_none_or(|m| m[i]);
    let idx: Vec<usize> = (0..truth.len()).filter(|&i| keep(i)).collect();
    if idx.len() < 2 {
        return Err(Error::Degenerate(
            "correlation needs at least two states".into(),
        ));
    }
    let n = idx.len() as f64;
    let mx = idx.iter().map(|&i| learned[i]).sum::<f64>() / n;
    let my = idx.iter().map(|&i| truth[i]).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &i in &idx {
        let dx = learned[i] - mx;
        let dy = truth[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean per-decision negative log-likelihood under the Boltzmann model.
pub fn trajectory_nll(
    approx: &Approximator,
    features: &FeatureMatrix,
    mdp: &Mdp,
    trajs: &TrajectorySet,
    b: f64,
) -> Result<f64> {
    let ll = log_likelihood(approx, features, mdp, trajs, b)?;
    Ok(-ll / trajs.num_pairs() as f64)
}

/// Fraction of pairs whose action differs from the model's greedy action.
pub fn disagreement_rate(
    approx: &Approximator,
    features: &FeatureMatrix,
    mdp: &Mdp,
    trajs: &TrajectorySet,
) -> Result<f64> {
    check_features(features, mdp)?;
    if trajs.num_pairs() == 0 {
        return Err(Error::pre("no state-action pairs"));
    }
    trajs.check_bounds(mdp.num_states(), mdp.num_actions())?;
    let f = approx.forward(features)?;
    let q = q_from_f(&f, mdp)?;
    let mismatches = trajs
        .pairs()
        .filter(|&(s, a)| argmax(q.row(s)) != a)
        .count();
    Ok(mismatches as f64 / trajs.num_pairs() as f64)
}

/// Synthetic operator: Boltzmann demonstrations at `skill · b_expert`, so
/// skill 1 reproduces the expert sampler and skill 0 is uniform.
pub fn synth_operator(
    gw: &GridWorld,
    q_oracle: &QTable,
    skill: f64,
    count: usize,
    length: usize,
    seed: u64,
    b_expert: f64,
) -> Result<TrajectorySet> {
    if !(0.0..=1.0).contains(&skill) {
        return Err(Error::pre(format!("skill must lie in [0, 1], got {skill}")));
    }
    sample_trajectories(
        gw,
        q_oracle,
        count,
        length,
        SamplePolicy::Boltzmann {
            b: skill * b_expert,
        },
        seed,
    )
}

/// [`synth_operator`] with the default expert confidence.
pub fn synth_operator_default(
    gw: &GridWorld,
    q_oracle: &QTable,
    skill: f64,
    count: usize,
    length: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    synth_operator(gw, q_oracle, skill, count, length, seed, DEFAULT_SAMPLE_B)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn q_error() {
        let a = QTable::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(mean_q_error(&a, &a).unwrap(), 0.0);
        let b = QTable::from_rows(&[vec![-0.5, 0.5], vec![1.5, 2.5]]).unwrap();
        assert_abs_diff_eq!(mean_q_error(&a, &b).unwrap(), 1.5, epsilon = 1e-15);
        let c = QTable::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(mean_q_error(&a, &c).is_err());
    }

    #[test]
    fn correlation_basics() {
        let x = [1.0, 2.0, 4.0, -1.0];
        assert_abs_diff_eq!(
            reward_correlation(&x, &x, None).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(
            reward_correlation(&neg, &x, None).unwrap(),
            -1.0,
            epsilon = 1e-15
        );
        assert!(matches!(
            reward_correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], None),
            Err(Error::Degenerate(_))
        ));
        let mask = [true, false, false, false];
        assert!(reward_correlation(&x, &x, Some(&mask)).is_err());
        // masked-out entries are ignored entirely
        let y = [1.0, 2.0, 4.0, 100.0];
        let mask = [true, true, true, false];
        assert_abs_diff_eq!(
            reward_correlation(&x, &y, Some(&mask)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn report_csv() {
        let rep = MetricsReport {
            mean_q_error: Some(0.5),
            mean_nll: Some(2.0),
            ..Default::default()
        };
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "meanQError,rewardCorrelation,meanNll,disagreementRate\n0.5,,2.0,\n"
        );
        let back: MetricsReport = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(back, rep);
    }
}
