//! Finite MDPs with sparse transitions, the value-iteration oracle and the
//! Bellman backup operators.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::fmt_f64;

/// Probability rows must sum to one within this tolerance.
pub const PROB_SUM_TOL: f64 = 1e-12;

pub const DEFAULT_VI_TOL: f64 = 1e-10;
pub const DEFAULT_VI_MAX_ITERS: usize = 100_000;

/// Below this many states a sweep runs sequentially.
const PAR_MIN_STATES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// Sparse transition model `P(s' | s, a)`, stored as one successor list per
/// `(s, a)` pair in state-major order. Successors within a row are sorted by
/// state index so sums over a row always run in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    num_states: usize,
    num_actions: usize,
    offsets: Vec<usize>,
    next: Vec<u32>,
    prob: Vec<f64>,
}

impl TransitionModel {
    /// Builds a model from `(s, a, s', p)` entries in any order.
    pub fn from_entries<I>(num_states: usize, num_actions: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize, f64)>,
    {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidTransitions(
                "state and action sets must be nonempty".into(),
            ));
        }
        if num_states > u32::MAX as usize {
            return Err(Error::InvalidTransitions("too many states".into()));
        }
        let pairs = num_states * num_actions;
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); pairs];
        for (s, a, s2, p) in entries {
            if s >= num_states || s2 >= num_states || a >= num_actions {
                return Err(Error::InvalidTransitions(format!(
                    "entry ({s}, {a}, {s2}) out of bounds"
                )));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidTransitions(format!(
                    "probability {p} for ({s}, {a}, {s2}) not in (0, 1]"
                )));
            }
            rows[s * num_actions + a].push((s2 as u32, p));
        }

        let mut offsets = Vec::with_capacity(pairs + 1);
        let mut next = Vec::new();
        let mut prob = Vec::new();
        offsets.push(0);
        for (idx, mut row) in rows.into_iter().enumerate() {
            let (s, a) = (idx / num_actions, idx % num_actions);
            if row.is_empty() {
                return Err(Error::InvalidTransitions(format!(
                    "({s}, {a}) has no successors"
                )));
            }
            row.sort_by_key(|&(s2, _)| s2);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidTransitions(format!(
                    "({s}, {a}) lists a successor twice"
                )));
            }
            let total: f64 = row.iter().map(|&(_, p)| p).sum();
            if (total - 1.0).abs() > PROB_SUM_TOL {
                return Err(Error::InvalidTransitions(format!(
                    "({s}, {a}) probabilities sum to {total}"
                )));
            }
            for (s2, p) in row {
                next.push(s2);
                prob.push(p);
            }
            offsets.push(next.len());
        }
        Ok(Self {
            num_states,
            num_actions,
            offsets,
            next,
            prob,
        })
    }

    /// Deterministic model: `successor[s * num_actions + a]` is reached with
    /// probability one.
    pub fn deterministic(
        num_states: usize,
        num_actions: usize,
        successor: Vec<usize>,
    ) -> Result<Self> {
        if successor.len() != num_states * num_actions {
            return Err(Error::Dimension {
                what: "successor table",
                expected: num_states * num_actions,
                actual: successor.len(),
            });
        }
        if let Some(&bad) = successor.iter().find(|&&s2| s2 >= num_states) {
            return Err(Error::InvalidTransitions(format!(
                "successor {bad} out of bounds"
            )));
        }
        let pairs = successor.len();
        Ok(Self {
            num_states,
            num_actions,
            offsets: (0..=pairs).collect(),
            next: successor.into_iter().map(|s| s as u32).collect(),
            prob: vec![1.0; pairs],
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Successors of `(s, a)` as `(s', p)` in ascending `s'`.
    #[inline]
    pub fn successors(&self, s: usize, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let idx = s * self.num_actions + a;
        let range = self.offsets[idx]..self.offsets[idx + 1];
        self.next[range.clone()]
            .iter()
            .zip(&self.prob[range])
            .map(|(&s2, &p)| (s2 as usize, p))
    }

    /// `Σ_{s'} P(s'|s,a) · values[s']`.
    #[inline]
    pub fn expect(&self, s: usize, a: usize, values: &[f64]) -> f64 {
        self.successors(s, a).map(|(s2, p)| p * values[s2]).sum()
    }

    /// All `(s, a, s', p)` entries in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        (0..self.num_states).flat_map(move |s| {
            (0..self.num_actions)
                .flat_map(move |a| self.successors(s, a).map(move |(s2, p)| (s, a, s2, p)))
        })
    }

    pub fn num_entries(&self) -> usize {
        self.next.len()
    }
}

/// A finite discounted MDP. Rewards are optional: IRL inputs carry only the
/// dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct Mdp {
    transitions: TransitionModel,
    rewards: Option<Vec<f64>>,
    gamma: f64,
}

impl Mdp {
    pub fn new(
        transitions: TransitionModel,
        rewards: Option<Vec<f64>>,
        gamma: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::pre(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if let Some(r) = &rewards {
            if r.len() != transitions.num_states() {
                return Err(Error::Dimension {
                    what: "reward vector",
                    expected: transitions.num_states(),
                    actual: r.len(),
                });
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::pre("rewards must be finite"));
            }
        }
        Ok(Self {
            transitions,
            rewards,
            gamma,
        })
    }

    pub fn num_states(&self) -> usize {
        self.transitions.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.transitions.num_actions()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn transitions(&self) -> &TransitionModel {
        &self.transitions
    }

    pub fn rewards(&self) -> Option<&[f64]> {
        self.rewards.as_deref()
    }

    pub fn with_rewards(mut self, rewards: Option<Vec<f64>>) -> Result<Self> {
        self.rewards = None;
        Mdp::new(self.transitions, rewards, self.gamma)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// On-disk MDP layout: transitions are `[s, a, s', p]` quadruples.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct MdpDocument {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    transitions: Vec<(usize, usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rewards: Option<Vec<f64>>,
}

impl TryFrom<MdpDocument> for Mdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let tm = TransitionModel::from_entries(doc.num_states, doc.num_actions, doc.transitions)?;
        Mdp::new(tm, doc.rewards, doc.gamma)
    }
}

impl From<Mdp> for MdpDocument {
    fn from(m: Mdp) -> Self {
        MdpDocument {
            num_states: m.num_states(),
            num_actions: m.num_actions(),
            gamma: m.gamma,
            transitions: m.transitions.entries().collect(),
            rewards: m.rewards,
        }
    }
}

/// Dense `|S| × |A|` table of action values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    data: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            data: vec![0.0; num_states * num_actions],
        }
    }

    pub fn from_vec(num_states: usize, num_actions: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != num_states * num_actions {
            return Err(Error::Dimension {
                what: "Q table",
                expected: num_states * num_actions,
                actual: data.len(),
            });
        }
        Ok(Self {
            num_states,
            num_actions,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_actions) {
            return Err(Error::pre("ragged Q rows"));
        }
        Ok(Self {
            num_states: rows.len(),
            num_actions,
            data: rows.concat(),
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.num_actions..(s + 1) * self.num_actions]
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.data[s * self.num_actions + a]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.num_actions.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// CSV with columns `state, action, q`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "action", "q"])?;
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                w.write_record([s.to_string(), a.to_string(), fmt_f64(self.get(s, a))])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `state, action, q` layout written by [`QTable::write_csv`].
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut cells: Vec<(usize, usize, f64)> = Vec::new();
        for rec in rdr.deserialize() {
            let (s, a, q): (usize, usize, f64) = rec?;
            cells.push((s, a, q));
        }
        let num_states = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
        let num_actions = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
        if cells.len() != num_states * num_actions {
            return Err(Error::Parse("Q table CSV is not a complete grid".into()));
        }
        let mut data = vec![f64::NAN; cells.len()];
        for (s, a, q) in cells {
            data[s * num_actions + a] = q;
        }
        if data.iter().any(|x| x.is_nan()) {
            return Err(Error::Parse("Q table CSV has duplicate cells".into()));
        }
        QTable::from_vec(num_states, num_actions, data)
    }
}

/// Writes a per-state vector as CSV with columns `state, <name>`.
pub fn write_state_csv<W: Write>(out: W, name: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", name])?;
    for (s, v) in values.iter().enumerate() {
        w.write_record([s.to_string(), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

fn check_row(row: &[f64]) -> Result<()> {
    if row.is_empty() {
        Err(Error::pre("empty action row"))
    } else {
        Ok(())
    }
}

/// Largest entry of a nonempty row.
pub fn backup_max(row: &[f64]) -> Result<f64> {
    check_row(row)?;
    Ok(row_max(row))
}

/// Generalized softmax backup `(1/k)·ln Σ_a exp(k·q_a)`.
pub fn backup_softmax(row: &[f64], k: f64) -> Result<f64> {
    check_row(row)?;
    check_sharpness(k)?;
    Ok(soft_max_unchecked(row, k))
}

/// Normalized `exp(k·q_a)` weights, the derivative of [`backup_softmax`].
pub fn softmax_weights(row: &[f64], k: f64) -> Result<Vec<f64>> {
    check_row(row)?;
    check_sharpness(k)?;
    let mut out = vec![0.0; row.len()];
    scaled_softmax_into(row, k, &mut out);
    Ok(out)
}

/// Boltzmann action distribution with confidence `b ≥ 0`.
pub fn boltzmann_probs(row: &[f64], b: f64) -> Result<Vec<f64>> {
    check_row(row)?;
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::pre(format!(
            "confidence b must be finite and >= 0, got {b}"
        )));
    }
    let mut out = vec![0.0; row.len()];
    scaled_softmax_into(row, b, &mut out);
    Ok(out)
}

/// Lowest-index maximizing action per state.
pub fn greedy_policy(q: &QTable) -> Vec<ActionId> {
    q.rows().map(|row| ActionId(argmax(row))).collect()
}

fn check_sharpness(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::pre(format!(
            "approximation level k must be finite and > 0, got {k}"
        )))
    }
}

#[inline]
pub(crate) fn row_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[inline]
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// `ln Σ exp(scale·q)` evaluated around the row maximum.
#[inline]
pub(crate) fn scaled_log_sum_exp(row: &[f64], scale: f64) -> f64 {
    let m = row_max(row);
    let sum: f64 = row.iter().map(|&q| (scale * (q - m)).exp()).sum();
    scale * m + sum.ln()
}

#[inline]
pub(crate) fn soft_max_unchecked(row: &[f64], k: f64) -> f64 {
    let m = row_max(row);
    let sum: f64 = row.iter().map(|&q| (k * (q - m)).exp()).sum();
    m + sum.ln() / k
}

#[inline]
pub(crate) fn scaled_softmax_into(row: &[f64], scale: f64, out: &mut [f64]) {
    let m = row_max(row);
    let mut sum = 0.0;
    for (o, &q) in out.iter_mut().zip(row) {
        *o = (scale * (q - m)).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Solves the Bellman optimality equations by Jacobi value iteration with a
/// hard max backup, stopping once the sup-norm change of a sweep is at most
/// `tol`. Returns the final values and the action values they induce.
pub fn value_iteration(mdp: &Mdp, tol: f64, max_iters: usize) -> Result<(Vec<f64>, QTable)> {
    let rewards = mdp
        .rewards()
        .ok_or_else(|| Error::pre("value iteration needs rewards"))?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::pre(format!("tol must be > 0, got {tol}")));
    }
    let n = mdp.num_states();
    let na = mdp.num_actions();
    let tm = mdp.transitions();
    let gamma = mdp.gamma();

    let mut v = vec![0.0; n];
    let mut target = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let sweep = |s: usize, target: &[f64]| -> f64 {
        (0..na)
            .map(|a| tm.expect(s, a, target))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    for _ in 0..max_iters {
        for ((t, &r), &vs) in target.iter_mut().zip(rewards).zip(&v) {
            *t = r + gamma * vs;
        }
        if n >= PAR_MIN_STATES {
            next.par_iter_mut()
                .enumerate()
                .for_each(|(s, out)| *out = sweep(s, &target));
        } else {
            for (s, out) in next.iter_mut().enumerate() {
                *out = sweep(s, &target);
            }
        }
        residual = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if residual <= tol {
            for ((t, &r), &vs) in target.iter_mut().zip(rewards).zip(&v) {
                *t = r + gamma * vs;
            }
            let mut q = vec![0.0; n * na];
            q.par_chunks_mut(na).enumerate().for_each(|(s, row)| {
                for (a, out) in row.iter_mut().enumerate() {
                    *out = tm.expect(s, a, &target);
                }
            });
            return Ok((v, QTable::from_vec(n, na, q)?));
        }
    }
    Err(Error::NonConvergence {
        iters: max_iters,
        residual,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn self_loop(r: f64, gamma: f64) -> Mdp {
        let tm = TransitionModel::deterministic(1, 1, vec![0]).unwrap();
        Mdp::new(tm, Some(vec![r]), gamma).unwrap()
    }

    #[test]
    fn geometric_self_loop() {
        let (v, q) = value_iteration(&self_loop(1.0, 0.9), 1e-12, 10_000).unwrap();
        assert_abs_diff_eq!(v[0], 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q.get(0, 0), 10.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_discount_is_one_step_lookahead() {
        let tm = TransitionModel::from_entries(
            3,
            2,
            [
                (0, 0, 1, 0.5),
                (0, 0, 2, 0.5),
                (0, 1, 0, 1.0),
                (1, 0, 2, 1.0),
                (1, 1, 1, 0.25),
                (1, 1, 0, 0.75),
                (2, 0, 2, 1.0),
                (2, 1, 1, 1.0),
            ],
        )
        .unwrap();
        let r = vec![1.0, -2.0, 4.0];
        let mdp = Mdp::new(tm.clone(), Some(r.clone()), 0.0).unwrap();
        let (_, q) = value_iteration(&mdp, 1e-12, 10).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                let want: f64 = tm.successors(s, a).map(|(s2, p)| p * r[s2]).sum();
                assert_abs_diff_eq!(q.get(s, a), want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn two_state_chain_matches_unrolled_program() {
        // action 0 stays, action 1 toggles
        let tm = TransitionModel::deterministic(2, 2, vec![0, 1, 1, 0]).unwrap();
        let r = [0.0, 1.0];
        let gamma = 0.5;
        let mdp = Mdp::new(tm, Some(r.to_vec()), gamma).unwrap();
        let (v, q) = value_iteration(&mdp, 1e-14, 1000).unwrap();

        // finite-horizon dynamic program, 50 steps
        let mut vh = [0.0f64; 2];
        for _ in 0..50 {
            let stay = [r[0] + gamma * vh[0], r[1] + gamma * vh[1]];
            let toggle = [r[1] + gamma * vh[1], r[0] + gamma * vh[0]];
            vh = [stay[0].max(toggle[0]), stay[1].max(toggle[1])];
        }
        assert_abs_diff_eq!(v[0], vh[0], epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], vh[1], epsilon = 1e-12);
        // both states can reach state 1 forever: V = 1/(1-γ) = 2
        assert_abs_diff_eq!(v[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.get(0, 0), gamma * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn value_iteration_errors() {
        let tm = TransitionModel::deterministic(1, 1, vec![0]).unwrap();
        let no_r = Mdp::new(tm, None, 0.9).unwrap();
        assert!(matches!(
            value_iteration(&no_r, 1e-10, 10),
            Err(Error::Precondition(_))
        ));
        match value_iteration(&self_loop(1.0, 0.99), 1e-10, 3) {
            Err(Error::NonConvergence { iters, residual }) => {
                assert_eq!(iters, 3);
                assert!(residual > 0.9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn backups() {
        assert_eq!(backup_max(&[1.0, 3.0, 2.0]).unwrap(), 3.0);
        assert_eq!(backup_max(&[-7.5]).unwrap(), -7.5);
        assert!(backup_max(&[]).is_err());
        assert!(backup_softmax(&[], 1.0).is_err());
        assert!(backup_softmax(&[1.0], 0.0).is_err());

        let m = 5;
        let k = 3.0;
        let got = backup_softmax(&vec![2.0; m], k).unwrap();
        assert_abs_diff_eq!(got, 2.0 + (m as f64).ln() / k, epsilon = 1e-14);
        assert_abs_diff_eq!(
            backup_softmax(&[0.0, 1.0], 1.0).unwrap(),
            (1.0 + std::f64::consts::E).ln(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            backup_softmax(&[0.0, 1.0], 1.0).unwrap(),
            1.31326,
            epsilon = 1e-5
        );
        // no overflow at the extremes of the supported range
        let v = backup_softmax(&[1e6, -1e6, 1e6 - 1.0], 1e4).unwrap();
        assert!(v.is_finite());
        assert_abs_diff_eq!(v, 1e6, epsilon = 1e-9);
    }

    #[test]
    fn weights_and_probs() {
        let w = softmax_weights(&[4.0; 4], 10.0).unwrap();
        assert!(w.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let w = softmax_weights(&[0.0, 100.0], 1.0).unwrap();
        assert!(w[0] < 1e-40);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-40);

        let p = boltzmann_probs(&[3.0, -1.0, 8.0], 0.0).unwrap();
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(boltzmann_probs(&[0.0, 0.0], 2.0).unwrap(), vec![0.5, 0.5]);
        assert!(boltzmann_probs(&[0.0], -1.0).is_err());

        // exp(1), exp(2), exp(3) normalized; reference values from 50-digit arithmetic
        let p = boltzmann_probs(&[1.0, 2.0, 3.0], 1.0).unwrap();
        let want = [
            0.090_030_573_170_380_458,
            0.244_728_471_054_797_65,
            0.665_240_955_774_821_9,
        ];
        for (g, w) in p.iter().zip(want) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-15);
        }
    }

    #[test]
    fn greedy_tie_breaks_low() {
        let q = QTable::from_rows(&[vec![1.0, 3.0, 2.0], vec![5.0, 5.0, 1.0]]).unwrap();
        assert_eq!(greedy_policy(&q), vec![ActionId(1), ActionId(0)]);
    }

    #[test]
    fn transition_validation() {
        assert!(TransitionModel::from_entries(2, 1, [(0, 0, 1, 1.0)]).is_err());
        assert!(TransitionModel::from_entries(1, 1, [(0, 0, 0, 0.5), (0, 0, 0, 0.5)]).is_err());
        assert!(TransitionModel::from_entries(
            2,
            1,
            [(0, 0, 1, 0.6), (0, 0, 0, 0.5), (1, 0, 1, 1.0)]
        )
        .is_err());
        assert!(TransitionModel::from_entries(1, 1, [(0, 0, 0, 1.5)]).is_err());
        assert!(TransitionModel::from_entries(1, 1, [(0, 0, 3, 1.0)]).is_err());
        let ok =
            TransitionModel::from_entries(2, 1, [(0, 0, 1, 0.3), (0, 0, 0, 0.7), (1, 0, 1, 1.0)])
                .unwrap();
        let row: Vec<_> = ok.successors(0, 0).collect();
        assert_eq!(row, vec![(0, 0.7), (1, 0.3)]);
    }

    #[test]
    fn mdp_json_round_trip() {
        let tm =
            TransitionModel::from_entries(2, 1, [(0, 0, 1, 0.3), (0, 0, 0, 0.7), (1, 0, 1, 1.0)])
                .unwrap();
        let mdp = Mdp::new(tm, Some(vec![0.5, -1.0]), 0.9).unwrap();
        let text = mdp.to_json().unwrap();
        assert_eq!(Mdp::from_json(&text).unwrap(), mdp);

        let bad = r#"{"numStates":1,"numActions":1,"gamma":0.9,"transitions":[[0,0,0,0.9]]}"#;
        assert!(Mdp::from_json(bad).is_err());
        let no_r = r#"{"numStates":1,"numActions":1,"gamma":0.9,"transitions":[[0,0,0,1.0]]}"#;
        assert!(Mdp::from_json(no_r).unwrap().rewards().is_none());
        let bad_gamma = r#"{"numStates":1,"numActions":1,"gamma":1.0,"transitions":[[0,0,0,1.0]]}"#;
        assert!(Mdp::from_json(bad_gamma).is_err());
    }

    #[test]
    fn q_csv_round_trip() {
        let q = QTable::from_rows(&[vec![1.0, -0.1], vec![1e-300, 7.25]]).unwrap();
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        assert_eq!(QTable::read_csv(buf.as_slice()).unwrap(), q);
    }
}
