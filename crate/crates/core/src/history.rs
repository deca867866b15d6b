//! Per-epoch training history shared by the RL and IRL trainers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One row of a training history. `objective` is the least-squares loss for
/// RL runs and the log-likelihood for IRL runs; `metric` is the optional
/// ground-truth comparison (mean Q error or reward correlation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub metric: Option<f64>,
}

/// Writes a history as CSV with the given column names for the objective and
/// metric. Missing metrics are written as empty fields.
pub fn write_history_csv<W: Write>(
    out: W,
    objective_name: &str,
    metric_name: &str,
    history: &[EpochRecord],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", objective_name, metric_name])?;
    for rec in history {
        w.write_record([
            rec.epoch.to_string(),
            fmt_f64(rec.objective),
            rec.metric.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip decimal representation.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}
