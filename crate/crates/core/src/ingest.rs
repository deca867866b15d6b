//! Turning continuous state-action logs into tabular trajectories: k-means
//! codebooks, nearest-centroid quantization and empirical transitions.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, TransitionModel};
use crate::trajectory::{Trajectory, TrajectorySet};

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub traj: String,
    pub step: usize,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContinuousLog {
    pub records: Vec<LogRecord>,
}

impl ContinuousLog {
    /// Parses `traj, step, s0..s{d-1}, a0..a{k-1}`. Column roles come from
    /// the header names.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "traj" || &headers[1] != "step" {
            return Err(Error::Parse("log header must start with traj,step".into()));
        }
        let mut state_cols = Vec::new();
        let mut action_cols = Vec::new();
        for (i, h) in headers.iter().enumerate().skip(2) {
            if let Some(rest) = h.strip_prefix('s') {
                if rest.parse::<usize>() == Ok(state_cols.len()) {
                    state_cols.push(i);
                    continue;
                }
            }
            if let Some(rest) = h.strip_prefix('a') {
                if rest.parse::<usize>() == Ok(action_cols.len()) {
                    action_cols.push(i);
                    continue;
                }
            }
            return Err(Error::Parse(format!("unexpected log column {h:?}")));
        }
        let parse = |rec: &csv::StringRecord, i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad value {:?}", &rec[i])))
        };
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let step = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad step {:?}", &rec[1])))?;
            records.push(LogRecord {
                traj: rec[0].to_string(),
                step,
                state: state_cols
                    .iter()
                    .map(|&i| parse(&rec, i))
                    .collect::<Result<_>>()?,
                action: action_cols
                    .iter()
                    .map(|&i| parse(&rec, i))
                    .collect::<Result<_>>()?,
            });
        }
        Ok(Self { records })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebookKind {
    State,
    Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub kind: CodebookKind,
    pub centroids: Vec<Vec<f64>>,
}

impl Codebook {
    pub fn new(kind: CodebookKind, centroids: Vec<Vec<f64>>) -> Result<Self> {
        let dim = centroids
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::pre("empty codebook"))?;
        if centroids.iter().any(|c| c.len() != dim) {
            return Err(Error::pre("codebook centroids differ in dimension"));
        }
        Ok(Self { kind, centroids })
    }

    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// Index of the nearest centroid, lowest index on ties.
    pub fn nearest(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x).0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Codebook = serde_json::from_str(text)?;
        Codebook::new(raw.kind, raw.centroids)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Result of Lloyd's algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to the assigned centroid after each
    /// assignment step.
    pub inertia_history: Vec<f64>,
}

impl KMeans {
    pub fn inertia(&self) -> f64 {
        *self
            .inertia_history
            .last()
            .expect("at least one assignment step")
    }

    pub fn into_codebook(self, kind: CodebookKind) -> Codebook {
        Codebook {
            kind,
            centroids: self.centroids,
        }
    }
}

/// Up to `max_iters` Lloyd updates from `num_clusters` distinct seeded
/// sample points. A cluster that loses all its points keeps its previous
/// centroid.
pub fn kmeans_fit(
    vectors: &[Vec<f64>],
    num_clusters: usize,
    max_iters: usize,
    seed: u64,
) -> Result<KMeans> {
    let dim = vectors
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::pre("k-means needs at least one vector"))?;
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::pre("vectors differ in dimension"));
    }
    if num_clusters == 0 {
        return Err(Error::pre("need at least one cluster"));
    }
    // distinct points, first occurrence order
    let mut seen = HashSet::new();
    let distinct: Vec<&Vec<f64>> = vectors
        .iter()
        .filter(|v| seen.insert(v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>()))
        .collect();
    if num_clusters > distinct.len() {
        return Err(Error::pre(format!(
            "{num_clusters} clusters requested but only {} distinct vectors",
            distinct.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, distinct.len(), num_clusters).into_vec();
    picks.sort_unstable();
    let mut centroids: Vec<Vec<f64>> = picks.into_iter().map(|i| distinct[i].clone()).collect();

    let mut assignments = vec![usize::MAX; vectors.len()];
    let mut inertia_history = Vec::new();
    let mut iters = 0;
    loop {
        let assigned: Vec<(usize, f64)> =
            vectors.par_iter().map(|v| nearest(&centroids, v)).collect();
        let changed = assigned
            .iter()
            .zip(&assignments)
            .any(|(&(new, _), &old)| new != old);
        inertia_history.push(assigned.iter().map(|&(_, d)| d).sum());
        for (slot, (c, _)) in assignments.iter_mut().zip(&assigned) {
            *slot = *c;
        }
        if !changed || iters == max_iters {
            break;
        }
        iters += 1;
        let mut sums = vec![vec![0.0; dim]; num_clusters];
        let mut counts = vec![0usize; num_clusters];
        for (v, &c) in vectors.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(v) {
                *s += x;
            }
        }
        for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
            if n > 0 {
                *c = s.into_iter().map(|x| x / n as f64).collect();
            }
        }
    }
    Ok(KMeans {
        centroids,
        assignments,
        inertia_history,
    })
}

/// Quantizes every record to `(nearest state centroid, nearest action
/// centroid)`. Records are grouped by trajectory id in order of first
/// appearance and sorted by step.
pub fn discretize(
    log: &ContinuousLog,
    state_book: &Codebook,
    action_book: &Codebook,
) -> Result<TrajectorySet> {
    for rec in &log.records {
        if rec.state.len() != state_book.dim() {
            return Err(Error::Dimension {
                what: "state vector",
                expected: state_book.dim(),
                actual: rec.state.len(),
            });
        }
        if rec.action.len() != action_book.dim() {
            return Err(Error::Dimension {
                what: "action vector",
                expected: action_book.dim(),
                actual: rec.action.len(),
            });
        }
    }
    let mapped: Vec<(usize, usize)> = log
        .records
        .par_iter()
        .map(|rec| {
            (
                state_book.nearest(&rec.state),
                action_book.nearest(&rec.action),
            )
        })
        .collect();

    let mut order: Vec<&str> = Vec::new();
    let mut groups: Vec<Vec<(usize, (usize, usize))>> = Vec::new();
    for (rec, &pair) in log.records.iter().zip(&mapped) {
        let idx = match order.iter().position(|&t| t == rec.traj) {
            Some(i) => i,
            None => {
                order.push(&rec.traj);
                groups.push(Vec::new());
                order.len() - 1
            }
        };
        groups[idx].push((rec.step, pair));
    }
    let trajectories = groups
        .into_iter()
        .map(|mut g| {
            g.sort_by_key(|&(step, _)| step);
            Trajectory::new(
                g.into_iter()
                    .map(|(_, (s, a))| (StateId(s), ActionId(a)))
                    .collect(),
            )
        })
        .collect();
    Ok(TrajectorySet::new(trajectories))
}

/// Counts transitions between consecutive pairs of each trajectory.
/// Observed `(s, a)` rows get `(count + smoothing) / (total + smoothing·|S|)`;
/// unobserved rows become self-loops.
pub fn empirical_transitions(
    trajs: &TrajectorySet,
    num_states: usize,
    num_actions: usize,
    smoothing: f64,
) -> Result<TransitionModel> {
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::pre("smoothing must be finite and >= 0"));
    }
    trajs.check_bounds(num_states, num_actions)?;
    let mut counts: Vec<BTreeMap<usize, f64>> = vec![Default::default(); num_states * num_actions];
    for t in &trajs.trajectories {
        for w in t.steps.windows(2) {
            let (s, a) = (w[0].0 .0, w[0].1 .0);
            *counts[s * num_actions + a].entry(w[1].0 .0).or_insert(0.0) += 1.0;
        }
    }
    let mut entries = Vec::new();
    for (idx, row) in counts.iter().enumerate() {
        let (s, a) = (idx / num_actions, idx % num_actions);
        let total: f64 = row.values().sum();
        if total == 0.0 {
            entries.push((s, a, s, 1.0));
            continue;
        }
        let denom = total + smoothing * num_states as f64;
        if smoothing > 0.0 {
            let mut probs: Vec<f64> = (0..num_states)
                .map(|s2| (row.get(&s2).copied().unwrap_or(0.0) + smoothing) / denom)
                .collect();
            fix_sum(&mut probs);
            entries.extend(probs.into_iter().enumerate().map(|(s2, p)| (s, a, s2, p)));
        } else {
            let mut probs: Vec<f64> = row.values().map(|c| c / denom).collect();
            fix_sum(&mut probs);
            entries.extend(row.keys().zip(probs).map(|(&s2, p)| (s, a, s2, p)));
        }
    }
    TransitionModel::from_entries(num_states, num_actions, entries)
}

/// Renormalizes so the row sums to one to within rounding of the largest
/// entry.
fn fix_sum(probs: &mut [f64]) {
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    let residual = 1.0 - probs.iter().sum::<f64>();
    if let Some(max) = probs
        .iter_mut()
        .max_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
    {
        *max += residual;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kmeans_on_distinct_points_is_exact() {
        let pts = vec![vec![0.0, 0.0], vec![5.0, 1.0], vec![-2.0, 3.0]];
        let km = kmeans_fit(&pts, 3, 10, 1).unwrap();
        assert_eq!(km.inertia(), 0.0);
        let mut c = km.centroids.clone();
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = pts.clone();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(c, want);
    }

    #[test]
    fn kmeans_errors() {
        assert!(kmeans_fit(&[], 1, 10, 0).is_err());
        let dup = vec![vec![1.0], vec![1.0], vec![2.0]];
        assert!(kmeans_fit(&dup, 3, 10, 0).is_err());
        assert!(kmeans_fit(&dup, 2, 10, 0).is_ok());
    }

    #[test]
    fn empirical_counts() {
        let single = TrajectorySet::from_indices(&[vec![(0, 1), (2, 0)]]);
        let tm = empirical_transitions(&single, 3, 2, 0.0).unwrap();
        assert_eq!(tm.successors(0, 1).collect::<Vec<_>>(), vec![(2, 1.0)]);
        // unobserved pairs loop in place
        assert_eq!(tm.successors(1, 0).collect::<Vec<_>>(), vec![(1, 1.0)]);

        let split = TrajectorySet::from_indices(&[vec![(0, 0), (1, 0)], vec![(0, 0), (2, 0)]]);
        let tm = empirical_transitions(&split, 3, 1, 0.0).unwrap();
        assert_eq!(
            tm.successors(0, 0).collect::<Vec<_>>(),
            vec![(1, 0.5), (2, 0.5)]
        );

        let tm = empirical_transitions(&single, 3, 2, 1.0).unwrap();
        let row: Vec<_> = tm.successors(0, 1).collect();
        assert_eq!(row.len(), 3);
        assert!((row[2].1 - 2.0 / 4.0).abs() < 1e-15);
        assert!((row[0].1 - 1.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn log_csv_and_discretize() {
        let text = "traj,step,s0,s1,a0\nA,1,1.0,1.0,0.9\nA,0,0.0,0.1,-1.0\nB,0,0.9,1.2,1.1\n";
        let log = ContinuousLog::read_csv(text.as_bytes()).unwrap();
        assert_eq!(log.records.len(), 3);
        let sb = Codebook::new(CodebookKind::State, vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let ab = Codebook::new(CodebookKind::Action, vec![vec![-1.0], vec![1.0]]).unwrap();
        let set = discretize(&log, &sb, &ab).unwrap();
        assert_eq!(
            set,
            TrajectorySet::from_indices(&[vec![(0, 0), (1, 1)], vec![(1, 1)]])
        );

        let empty = discretize(&ContinuousLog::default(), &sb, &ab).unwrap();
        assert!(empty.is_empty());

        let wrong = Codebook::new(CodebookKind::Action, vec![vec![0.0, 0.0]]).unwrap();
        assert!(discretize(&log, &sb, &wrong).is_err());
        assert!(ContinuousLog::read_csv("traj,step,x\n".as_bytes()).is_err());
    }

    #[test]
    fn codebook_json() {
        let cb = Codebook::new(CodebookKind::Action, vec![vec![0.5, 1.0]]).unwrap();
        let text = cb.to_json().unwrap();
        assert!(text.contains("\"kind\": \"action\""));
        assert_eq!(Codebook::from_json(&text).unwrap(), cb);
        assert!(Codebook::from_json(r#"{"kind":"state","centroids":[]}"#).is_err());
    }
}
