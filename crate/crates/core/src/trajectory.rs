//! Observed state-action sequences.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<(StateId, ActionId)>,
}

impl Trajectory {
    pub fn new(steps: Vec<(StateId, ActionId)>) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn new(trajectories: Vec<Trajectory>) -> Self {
        Self { trajectories }
    }

    /// Builds a set from raw `(state, action)` index sequences.
    pub fn from_indices(seqs: &[Vec<(usize, usize)>]) -> Self {
        Self::new(
            seqs.iter()
                .map(|t| {
                    Trajectory::new(t.iter().map(|&(s, a)| (StateId(s), ActionId(a))).collect())
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Total number of state-action pairs.
    pub fn num_pairs(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// All pairs in trajectory order, as raw indices.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.trajectories
            .iter()
            .flat_map(|t| t.steps.iter().map(|&(s, a)| (s.0, a.0)))
    }

    pub fn check_bounds(&self, num_states: usize, num_actions: usize) -> Result<()> {
        match self
            .pairs()
            .find(|&(s, a)| s >= num_states || a >= num_actions)
        {
            Some((s, a)) => Err(Error::pre(format!(
                "pair ({s}, {a}) out of bounds for {num_states} states and {num_actions} actions"
            ))),
            None => Ok(()),
        }
    }

    /// Per-state flag: does any pair start in that state?
    pub fn visited_mask(&self, num_states: usize) -> Vec<bool> {
        let mut mask = vec![false; num_states];
        for (s, _) in self.pairs() {
            mask[s] = true;
        }
        mask
    }

    /// CSV with columns `traj, step, state, action`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["traj", "step", "state", "action"])?;
        for (t, traj) in self.trajectories.iter().enumerate() {
            for (i, &(s, a)) in traj.steps.iter().enumerate() {
                w.write_record([
                    t.to_string(),
                    i.to_string(),
                    s.0.to_string(),
                    a.0.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`TrajectorySet::write_csv`]. Rows of one
    /// trajectory must be contiguous with consecutive steps starting at 0.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut out: Vec<Trajectory> = Vec::new();
        let mut current: Option<usize> = None;
        for rec in rdr.deserialize() {
            let (traj, step, s, a): (usize, usize, usize, usize) = rec?;
            if current != Some(traj) {
                if step != 0 {
                    return Err(Error::Parse(format!(
                        "trajectory {traj} does not start at step 0"
                    )));
                }
                current = Some(traj);
                out.push(Trajectory::default());
            }
            let t = out.last_mut().expect("pushed above");
            if step != t.len() {
                return Err(Error::Parse(format!(
                    "trajectory {traj}: expected step {}, found {step}",
                    t.len()
                )));
            }
            t.steps.push((StateId(s), ActionId(a)));
        }
        Ok(Self::new(out))
    }
}
