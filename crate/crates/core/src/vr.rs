//! Reconstruction of `Q*`, `V*` and `r` from the VR function
//! `f(s) = r(s) + γ·V*(s)`.
//!
//! Given any finite `f`, the tables built here satisfy the Bellman optimality
//! equation exactly (up to rounding) under the chosen backup:
//!
//! ```text
//! Q(s,a) = Σ_{s'} P(s'|s,a) f(s')
//! V(s)   = backup_a Q(s,a)
//! r(s)   = f(s) - γ V(s)
//! ```

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{Approximator, FeatureMatrix};
use crate::error::{Error, Result};
use crate::history::fmt_f64;
use crate::mdp::{row_max, soft_max_unchecked, Mdp, QTable};

/// Aggregation over actions that turns a Q row into a state value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum BackupKind {
    HardMax,
    Softmax { k: f64 },
}

impl BackupKind {
    #[inline]
    pub(crate) fn apply(self, row: &[f64]) -> f64 {
        match self {
            BackupKind::HardMax => row_max(row),
            BackupKind::Softmax { k } => soft_max_unchecked(row, k),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            BackupKind::Softmax { k } if !(k > 0.0 && k.is_finite()) => Err(Error::pre(format!(
                "softmax backup needs finite k > 0, got {k}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VrSolution {
    pub f_values: Vec<f64>,
    pub q: QTable,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub backup: BackupKind,
}

impl VrSolution {
    /// CSV with columns `state, f, v, r`.
    pub fn write_states_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "f", "v", "r"])?;
        for s in 0..self.f_values.len() {
            w.write_record([
                s.to_string(),
                fmt_f64(self.f_values[s]),
                fmt_f64(self.v[s]),
                fmt_f64(self.r[s]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `state, action, q`.
    pub fn write_q_csv<W: Write>(&self, out: W) -> Result<()> {
        self.q.write_csv(out)
    }
}

pub fn q_from_f(f_values: &[f64], mdp: &Mdp) -> Result<QTable> {
    let n = mdp.num_states();
    if f_values.len() != n {
        return Err(Error::Dimension {
            what: "VR values",
            expected: n,
            actual: f_values.len(),
        });
    }
    if f_values.iter().any(|x| !x.is_finite()) {
        return Err(Error::pre("VR values must be finite"));
    }
    let na = mdp.num_actions();
    let tm = mdp.transitions();
    let mut q = vec![0.0; n * na];
    q.par_chunks_mut(na).enumerate().for_each(|(s, row)| {
        for (a, out) in row.iter_mut().enumerate() {
            *out = tm.expect(s, a, f_values);
        }
    });
    QTable::from_vec(n, na, q)
}

pub fn v_from_q(q: &QTable, backup: BackupKind) -> Result<Vec<f64>> {
    backup.validate()?;
    Ok(q.rows().map(|row| backup.apply(row)).collect())
}

pub fn r_from_f(f_values: &[f64], v: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if f_values.len() != v.len() {
        return Err(Error::Dimension {
            what: "value vector",
            expected: f_values.len(),
            actual: v.len(),
        });
    }
    Ok(f_values.iter().zip(v).map(|(f, v)| f - gamma * v).collect())
}

/// Assembles the full solution from precomputed VR values.
pub fn solve_from_f(f_values: Vec<f64>, mdp: &Mdp, backup: BackupKind) -> Result<VrSolution> {
    let q = q_from_f(&f_values, mdp)?;
    let v = v_from_q(&q, backup)?;
    let r = r_from_f(&f_values, &v, mdp.gamma())?;
    Ok(VrSolution {
        f_values,
        q,
        v,
        r,
        backup,
    })
}

pub fn solve_vr(
    approx: &Approximator,
    features: &FeatureMatrix,
    mdp: &Mdp,
    backup: BackupKind,
) -> Result<VrSolution> {
    check_features(features, mdp)?;
    let f = approx.forward(features)?;
    solve_from_f(f, mdp, backup)
}

pub(crate) fn check_features(features: &FeatureMatrix, mdp: &Mdp) -> Result<()> {
    if features.num_rows() != mdp.num_states() {
        return Err(Error::Dimension {
            what: "feature rows",
            expected: mdp.num_states(),
            actual: features.num_rows(),
        });
    }
    Ok(())
}

/// VR values on the states needed to build Q rows (and optionally `f`
/// itself) at `query`. Entries outside that set are NaN.
pub(crate) fn local_f(
    approx: &Approximator,
    features: &FeatureMatrix,
    mdp: &Mdp,
    query: &[usize],
    include_query: bool,
) -> Result<Vec<f64>> {
    let n = mdp.num_states();
    let tm = mdp.transitions();
    let mut needed = vec![false; n];
    for &s in query {
        if include_query {
            needed[s] = true;
        }
        for a in 0..mdp.num_actions() {
            for (s2, _) in tm.successors(s, a) {
                needed[s2] = true;
            }
        }
    }
    let rows: Vec<usize> = (0..n).filter(|&s| needed[s]).collect();
    let vals = approx.forward_rows(features, &rows)?;
    let mut f = vec![f64::NAN; n];
    for (s, v) in rows.into_iter().zip(vals) {
        f[s] = v;
    }
    Ok(f)
}

/// One Q row from (possibly partial) VR values.
#[inline]
pub(crate) fn q_row_into(mdp: &Mdp, f: &[f64], s: usize, out: &mut [f64]) {
    let tm = mdp.transitions();
    for (a, o) in out.iter_mut().enumerate() {
        *o = tm.expect(s, a, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::NetworkConfig;
    use crate::mdp::TransitionModel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn q_is_expected_successor_value() {
        let tm = TransitionModel::from_entries(
            3,
            2,
            [
                (0, 0, 1, 1.0),
                (0, 1, 1, 0.5),
                (0, 1, 2, 0.5),
                (1, 0, 1, 1.0),
                (1, 1, 1, 1.0),
                (2, 0, 2, 1.0),
                (2, 1, 2, 1.0),
            ],
        )
        .unwrap();
        let mdp = Mdp::new(tm, None, 0.9).unwrap();
        let q = q_from_f(&[0.0, 1.0, 3.0], &mdp).unwrap();
        assert_eq!(q.get(0, 1), 2.0);
        let q = q_from_f(&[0.0, 2.0, 0.0], &mdp).unwrap();
        assert_eq!(q.get(0, 0), 2.0);
        assert!(q_from_f(&[0.0, 1.0], &mdp).is_err());
        assert!(q_from_f(&[0.0, f64::NAN, 1.0], &mdp).is_err());
    }

    #[test]
    fn v_and_r() {
        let q = QTable::from_rows(&[vec![1.0, 3.0]]).unwrap();
        assert_eq!(v_from_q(&q, BackupKind::HardMax).unwrap(), vec![3.0]);
        let single = QTable::from_rows(&[vec![4.0], vec![-2.0]]).unwrap();
        assert_eq!(
            v_from_q(&single, BackupKind::HardMax).unwrap(),
            vec![4.0, -2.0]
        );
        assert!(v_from_q(&q, BackupKind::Softmax { k: 0.0 }).is_err());

        assert_eq!(
            r_from_f(&[1.5, -2.0], &[9.0, 9.0], 0.0).unwrap(),
            vec![1.5, -2.0]
        );
        assert!(r_from_f(&[1.0], &[1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn constant_vr_values() {
        let tm = TransitionModel::deterministic(3, 2, vec![1, 2, 0, 2, 1, 0]).unwrap();
        let mdp = Mdp::new(tm, None, 0.8).unwrap();
        let sol = solve_from_f(vec![2.5; 3], &mdp, BackupKind::HardMax).unwrap();
        for s in 0..3 {
            assert_abs_diff_eq!(sol.v[s], 2.5, epsilon = 1e-15);
            assert_abs_diff_eq!(sol.r[s], 0.2 * 2.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn self_loop_solution() {
        let tm = TransitionModel::deterministic(1, 1, vec![0]).unwrap();
        let mdp = Mdp::new(tm, None, 0.9).unwrap();
        let net = Approximator::with_params(NetworkConfig::linear(1, 0), vec![0.0, 10.0]).unwrap();
        let fm = FeatureMatrix::from_rows(&[vec![3.0]]).unwrap();
        let sol = solve_vr(&net, &fm, &mdp, BackupKind::HardMax).unwrap();
        assert_eq!(sol.q.get(0, 0), 10.0);
        assert_eq!(sol.v, vec![10.0]);
        assert_abs_diff_eq!(sol.r[0], 1.0, epsilon = 1e-14);

        let zero = Approximator::with_params(NetworkConfig::linear(1, 0), vec![0.0, 0.0]).unwrap();
        let sol = solve_vr(&zero, &fm, &mdp, BackupKind::Softmax { k: 5.0 }).unwrap();
        assert_eq!(sol.q.get(0, 0), 0.0);
        assert_eq!(sol.r, vec![0.0]);
    }

    #[test]
    fn export_csvs() {
        let tm = TransitionModel::deterministic(2, 1, vec![1, 0]).unwrap();
        let mdp = Mdp::new(tm, None, 0.5).unwrap();
        let sol = solve_from_f(vec![1.0, 2.0], &mdp, BackupKind::HardMax).unwrap();
        let mut buf = Vec::new();
        sol.write_states_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "state,f,v,r\n0,1.0,2.0,0.0\n1,2.0,1.0,1.5\n"
        );
    }
}
