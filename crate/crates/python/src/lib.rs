//! Python bindings: gridworlds, value iteration, the VR-function model and
//! its trainers, and evaluation metrics.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use vrirl_core as core;
use vrirl_core::{
    Activation, Approximator, BackupKind, Checkpoint, InputNorm, NetworkConfig, QTable,
    SamplePolicy, TrajectorySet,
};

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Divergence { .. }
        | core::Error::NonConvergence { .. }
        | core::Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

type Traj = Vec<Vec<(usize, usize)>>;

fn to_trajs(t: &Traj) -> TrajectorySet {
    TrajectorySet::from_indices(t)
}

fn from_trajs(t: &TrajectorySet) -> Traj {
    t.trajectories
        .iter()
        .map(|tr| {
            tr.steps
                .iter()
                .map(|(s, a)| (s.index(), a.index()))
                .collect()
        })
        .collect()
}

fn to_q(rows: &[Vec<f64>]) -> PyResult<QTable> {
    QTable::from_rows(rows).map_err(to_py)
}

fn from_q(q: &QTable) -> Vec<Vec<f64>> {
    q.rows().map(|r| r.to_vec()).collect()
}

fn backup_kind(k: Option<f64>) -> BackupKind {
    k.map_or(BackupKind::HardMax, |k| BackupKind::Softmax { k })
}

/// Gridworld with distance features and object rewards.
#[pyclass(frozen)]
struct GridWorld {
    inner: core::GridWorld,
}

#[pymethods]
impl GridWorld {
    /// Random world with `objects` reward emitters.
    #[staticmethod]
    #[pyo3(signature = (dims, size, objects, seed, gamma = None))]
    fn random(
        dims: usize,
        size: usize,
        objects: usize,
        seed: u64,
        gamma: Option<f64>,
    ) -> PyResult<Self> {
        let mut spec = core::random_spec(dims, size, objects, seed).map_err(to_py)?;
        if let Some(g) = gamma {
            spec.gamma = g;
        }
        Self::from_spec(spec)
    }

    #[staticmethod]
    fn from_spec_json(text: &str) -> PyResult<Self> {
        Self::from_spec(core::GridSpec::from_json(text).map_err(to_py)?)
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.mdp.num_states()
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.inner.mdp.num_actions()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.mdp.gamma()
    }

    fn rewards(&self) -> Vec<f64> {
        self.inner.rewards().to_vec()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        let f = &self.inner.features;
        (0..f.num_rows()).map(|s| f.row(s).to_vec()).collect()
    }

    fn spec_json(&self) -> PyResult<String> {
        self.inner.spec.to_json().map_err(to_py)
    }

    fn mdp_json(&self) -> PyResult<String> {
        self.inner.mdp.to_json().map_err(to_py)
    }

    /// Optimal `(V, Q)` by value iteration.
    #[pyo3(signature = (tol = 1e-10, max_iters = 100_000))]
    fn value_iteration(&self, tol: f64, max_iters: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let (v, q) = core::value_iteration(&self.inner.mdp, tol, max_iters).map_err(to_py)?;
        Ok((v, from_q(&q)))
    }

    /// Trajectories of `(state, action)` pairs; Boltzmann at `b`, or greedy.
    #[pyo3(signature = (q, count, length, b = 5.0, greedy = false, seed = 0))]
    fn sample(
        &self,
        q: Vec<Vec<f64>>,
        count: usize,
        length: usize,
        b: f64,
        greedy: bool,
        seed: u64,
    ) -> PyResult<Traj> {
        let policy = if greedy {
            SamplePolicy::Greedy
        } else {
            SamplePolicy::Boltzmann { b }
        };
        let t = core::sample_trajectories(&self.inner, &to_q(&q)?, count, length, policy, seed)
            .map_err(to_py)?;
        Ok(from_trajs(&t))
    }
}

impl GridWorld {
    fn from_spec(spec: core::GridSpec) -> PyResult<Self> {
        Ok(Self {
            inner: core::build_grid(&spec).map_err(to_py)?,
        })
    }
}

/// Feedforward VR-function approximator.
#[pyclass]
struct Model {
    inner: Approximator,
}

#[pymethods]
impl Model {
    /// `input_dim → hidden… → 1`; pass `features` to standardize inputs.
    #[new]
    #[pyo3(signature = (input_dim, hidden, seed = 0, activation = "tanh", features = None))]
    fn new(
        input_dim: usize,
        hidden: Vec<usize>,
        seed: u64,
        activation: &str,
        features: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let mut cfg = NetworkConfig::mlp(input_dim, &hidden, seed);
        cfg.activation = match activation {
            "tanh" => Activation::Tanh,
            "identity" => Activation::Identity,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown activation `{other}`"
                )))
            }
        };
        if let Some(rows) = features {
            let fm = core::FeatureMatrix::from_rows(&rows).map_err(to_py)?;
            cfg = cfg.with_input_norm(InputNorm::fit(&fm));
        }
        Ok(Self {
            inner: Approximator::new(cfg).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_checkpoint(text: &str) -> PyResult<Self> {
        let (_, inner) = Checkpoint::from_json(text).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (gamma, b = None, k = None))]
    fn checkpoint_json(&self, gamma: f64, b: Option<f64>, k: Option<f64>) -> PyResult<String> {
        Checkpoint::new(&self.inner, gamma, b, k)
            .to_json()
            .map_err(to_py)
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.params().to_vec()
    }

    #[setter]
    fn set_params(&mut self, params: Vec<f64>) -> PyResult<()> {
        self.inner =
            Approximator::with_params(self.inner.config().clone(), params).map_err(to_py)?;
        Ok(())
    }

    fn forward(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let fm = core::FeatureMatrix::from_rows(&features).map_err(to_py)?;
        self.inner.forward(&fm).map_err(to_py)
    }

    /// `Σ_s weights[s] · ∂f(s)/∂θ`.
    fn gradient(&self, features: Vec<Vec<f64>>, weights: Vec<f64>) -> PyResult<Vec<f64>> {
        let fm = core::FeatureMatrix::from_rows(&features).map_err(to_py)?;
        self.inner.gradient(&fm, &weights).map_err(to_py)
    }
}

/// `{"f", "q", "v", "r"}` for a model on a world; `k` selects the softmax
/// backup, otherwise the hard max.
#[pyfunction]
#[pyo3(signature = (model, world, k = None))]
fn solve_vr(
    py: Python<'_>,
    model: &Model,
    world: &GridWorld,
    k: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let sol = core::solve_vr(
        &model.inner,
        &world.inner.features,
        &world.inner.mdp,
        backup_kind(k),
    )
    .map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("f", sol.f_values)?;
    d.set_item("q", from_q(&sol.q))?;
    d.set_item("v", sol.v)?;
    d.set_item("r", sol.r)?;
    Ok(d.into_any().unbind())
}

type History = Vec<(usize, f64, Option<f64>)>;

fn history(h: &[core::EpochRecord]) -> History {
    h.iter().map(|r| (r.epoch, r.objective, r.metric)).collect()
}

/// Fits a model to the world's rewards. Returns `(model, history)` with
/// rows `(epoch, loss, mean Q error or None)`.
#[pyfunction]
#[pyo3(signature = (world, model, learning_rate = 1e-5, epochs = 100, batch_size = 50, k = 50.0, seed = 0, oracle_q = None))]
#[allow(clippy::too_many_arguments)]
fn train_rl(
    py: Python<'_>,
    world: &GridWorld,
    model: &Model,
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    k: f64,
    seed: u64,
    oracle_q: Option<Vec<Vec<f64>>>,
) -> PyResult<(Model, History)> {
    let oracle = oracle_q.as_deref().map(to_q).transpose()?;
    let cfg = core::RlTrainConfig {
        k,
        learning_rate,
        batch_size,
        epochs,
        seed,
    };
    let obs = core::ObservedRewards::full(world.inner.rewards().to_vec());
    let start = model.inner.clone();
    let w = &world.inner;
    let out = py
        .detach(|| core::rl::train_rl_from(start, &w.mdp, &w.features, &obs, &cfg, oracle.as_ref()))
        .map_err(to_py)?;
    Ok((Model { inner: out.approx }, history(&out.history)))
}

/// Fits a model to demonstrations. Returns `(model, history)` with rows
/// `(epoch, log-likelihood, visited-state reward correlation or None)`.
#[pyfunction]
#[pyo3(signature = (world, model, trajectories, b = 1.0, learning_rate = 1e-5, epochs = 100, batch_size = 50, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn train_irl(
    py: Python<'_>,
    world: &GridWorld,
    model: &Model,
    trajectories: Traj,
    b: f64,
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> PyResult<(Model, History)> {
    let trajs = to_trajs(&trajectories);
    let w = &world.inner;
    let mask = trajs.visited_mask(w.mdp.num_states());
    let truth = core::RewardTruth {
        rewards: w.rewards(),
        mask: Some(&mask),
    };
    let cfg = core::IrlTrainConfig {
        b,
        learning_rate,
        batch_size,
        epochs,
        seed,
    };
    let start = model.inner.clone();
    let out = py
        .detach(|| core::irl::train_irl_from(start, &w.mdp, &w.features, &trajs, &cfg, Some(truth)))
        .map_err(to_py)?;
    Ok((Model { inner: out.approx }, history(&out.history)))
}

#[pyfunction]
fn mean_q_error(learned: Vec<Vec<f64>>, oracle: Vec<Vec<f64>>) -> PyResult<f64> {
    core::mean_q_error(&to_q(&learned)?, &to_q(&oracle)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (learned, truth, mask = None))]
fn reward_correlation(
    learned: Vec<f64>,
    truth: Vec<f64>,
    mask: Option<Vec<bool>>,
) -> PyResult<f64> {
    core::reward_correlation(&learned, &truth, mask.as_deref()).map_err(to_py)
}

#[pyfunction]
fn trajectory_nll(model: &Model, world: &GridWorld, trajectories: Traj, b: f64) -> PyResult<f64> {
    let w = &world.inner;
    core::trajectory_nll(
        &model.inner,
        &w.features,
        &w.mdp,
        &to_trajs(&trajectories),
        b,
    )
    .map_err(to_py)
}

#[pyfunction]
fn disagreement_rate(model: &Model, world: &GridWorld, trajectories: Traj) -> PyResult<f64> {
    let w = &world.inner;
    core::disagreement_rate(&model.inner, &w.features, &w.mdp, &to_trajs(&trajectories))
        .map_err(to_py)
}

#[pyfunction]
fn backup_max(row: Vec<f64>) -> PyResult<f64> {
    core::backup_max(&row).map_err(to_py)
}

#[pyfunction]
fn backup_softmax(row: Vec<f64>, k: f64) -> PyResult<f64> {
    core::backup_softmax(&row, k).map_err(to_py)
}

#[pyfunction]
fn boltzmann_probs(row: Vec<f64>, b: f64) -> PyResult<Vec<f64>> {
    core::boltzmann_probs(&row, b).map_err(to_py)
}

#[pymodule]
fn vrirl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<GridWorld>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(solve_vr, m)?)?;
    m.add_function(wrap_pyfunction!(train_rl, m)?)?;
    m.add_function(wrap_pyfunction!(train_irl, m)?)?;
    m.add_function(wrap_pyfunction!(mean_q_error, m)?)?;
    m.add_function(wrap_pyfunction!(reward_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory_nll, m)?)?;
    m.add_function(wrap_pyfunction!(disagreement_rate, m)?)?;
    m.add_function(wrap_pyfunction!(backup_max, m)?)?;
    m.add_function(wrap_pyfunction!(backup_softmax, m)?)?;
    m.add_function(wrap_pyfunction!(boltzmann_probs, m)?)?;
    Ok(())
}
