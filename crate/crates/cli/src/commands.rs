//! Subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vrirl_core::grid::{build_grid_capped, DEFAULT_GAMMA, DEFAULT_SAMPLE_B, DEFAULT_STATE_CAP};
use vrirl_core::history::write_history_csv;
use vrirl_core::mdp::{write_state_csv, DEFAULT_VI_MAX_ITERS, DEFAULT_VI_TOL};
use vrirl_core::{
    build_grid, disagreement_rate, mean_q_error, random_spec, reward_correlation,
    sample_trajectories, solve_vr, trajectory_nll, value_iteration, Activation, Approximator,
    BackupKind, Checkpoint, EpochRecord, Error as CoreError, FeatureMatrix, GridSpec, InputNorm,
    IrlTrainConfig, Mdp, MetricsReport, NetworkConfig, ObservedRewards, QTable, RewardTruth,
    RlTrainConfig, SamplePolicy, TrajectorySet, VrSolution,
};

use crate::config::{
    check_inputs, create_output, open_input, prepare_out, read_text, required, resolve,
    write_sidecar, write_text, CliError, CliResult,
};
use crate::{EvalArgs, GenEnvArgs, IrlArgs, OracleArgs, RlArgs, SampleArgs, ScoreArgs, SweepArgs};

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GenEnvConfig {
    pub dims: usize,
    pub size: usize,
    pub objects: usize,
    pub gamma: f64,
    pub seed: u64,
    pub state_cap: usize,
    pub out: Option<PathBuf>,
}

impl Default for GenEnvConfig {
    fn default() -> Self {
        Self {
            dims: 2,
            size: 8,
            objects: 3,
            gamma: DEFAULT_GAMMA,
            seed: 0,
            state_cap: DEFAULT_STATE_CAP,
            out: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct OracleConfig {
    pub mdp: Option<PathBuf>,
    pub tol: f64,
    pub max_iters: usize,
    pub out: Option<PathBuf>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            mdp: None,
            tol: DEFAULT_VI_TOL,
            max_iters: DEFAULT_VI_MAX_ITERS,
            out: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SampleConfig {
    pub spec: Option<PathBuf>,
    pub q: Option<PathBuf>,
    pub count: usize,
    pub length: usize,
    pub b: f64,
    pub greedy: bool,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            spec: None,
            q: None,
            count: 1000,
            length: 10,
            b: DEFAULT_SAMPLE_B,
            greedy: false,
            seed: 0,
            out: None,
        }
    }
}

/// Network and optimizer settings shared by the trainers.
#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct NetSettings {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub net_seed: u64,
    pub input_norm: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for NetSettings {
    fn default() -> Self {
        Self {
            hidden: vec![50],
            activation: Activation::Tanh,
            net_seed: 0,
            input_norm: true,
            learning_rate: 1e-5,
            batch_size: 50,
            epochs: 100,
            seed: 0,
        }
    }
}

impl NetSettings {
    fn network(&self, features: &FeatureMatrix) -> NetworkConfig {
        let mut net = NetworkConfig::mlp(features.num_cols(), &self.hidden, self.net_seed);
        net.activation = self.activation;
        if self.input_norm {
            net = net.with_input_norm(InputNorm::fit(features));
        }
        net
    }
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RlConfig {
    pub mdp: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub oracle_q: Option<PathBuf>,
    pub k: f64,
    #[serde(flatten)]
    pub net: NetSettings,
    pub out: Option<PathBuf>,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            mdp: None,
            features: None,
            oracle_q: None,
            k: 50.0,
            net: NetSettings::default(),
            out: None,
        }
    }
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct IrlConfig {
    pub mdp: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub b: f64,
    pub full_state: bool,
    #[serde(flatten)]
    pub net: NetSettings,
    pub out: Option<PathBuf>,
}

impl Default for IrlConfig {
    fn default() -> Self {
        Self {
            mdp: None,
            features: None,
            trajectories: None,
            b: 1.0,
            full_state: false,
            net: NetSettings::default(),
            out: None,
        }
    }
}

#[derive(Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct EvalConfig {
    pub checkpoint: Option<PathBuf>,
    pub mdp: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub oracle_q: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub full_state: bool,
    pub out: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ScoreConfig {
    pub checkpoint: Option<PathBuf>,
    pub mdp: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub b: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SweepConfig {
    pub mode: String,
    pub widths: Vec<usize>,
    pub mdp: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub oracle_q: Option<PathBuf>,
    pub b: f64,
    pub k: f64,
    pub full_state: bool,
    #[serde(flatten)]
    pub net: NetSettings,
    pub out: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            mode: "irl".into(),
            widths: vec![10, 20, 30, 40, 50],
            mdp: None,
            features: None,
            trajectories: None,
            oracle_q: None,
            b: 1.0,
            k: 50.0,
            full_state: false,
            net: NetSettings::default(),
            out: None,
        }
    }
}

fn load_mdp(path: &Path) -> CliResult<Mdp> {
    Mdp::from_json(&read_text(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_features(path: &Path) -> CliResult<FeatureMatrix> {
    FeatureMatrix::read_csv(open_input(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_q(path: &Path) -> CliResult<QTable> {
    QTable::read_csv(open_input(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_trajectories(path: &Path) -> CliResult<TrajectorySet> {
    TrajectorySet::read_csv(open_input(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_checkpoint(path: &Path) -> CliResult<(Checkpoint, Approximator)> {
    Checkpoint::from_json(&read_text(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_metrics(dir: &Path, report: &MetricsReport) -> CliResult<()> {
    let json = report.to_json()? + "\n";
    write_text(dir, "metrics.json", &json)?;
    report.write_csv(create_output(dir, "metrics.csv")?)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(json.as_bytes());
    let _ = stdout.write_all(&csv);
    Ok(())
}

/// Checkpoint, history and final solution of one training run.
fn write_training(
    dir: &Path,
    ck: &Checkpoint,
    columns: (&str, &str),
    history: &[EpochRecord],
    solution: &VrSolution,
) -> CliResult<()> {
    write_text(dir, "checkpoint.json", &(ck.to_json()? + "\n"))?;
    write_history_csv(
        create_output(dir, "history.csv")?,
        columns.0,
        columns.1,
        history,
    )?;
    solution.write_states_csv(create_output(dir, "states.csv")?)?;
    solution.write_q_csv(create_output(dir, "q.csv")?)?;
    Ok(())
}

/// Keeps the partial history of a diverged run before reporting failure.
fn handle_divergence(dir: &Path, columns: (&str, &str), err: CoreError) -> CliError {
    if let CoreError::Divergence { history, .. } = &err {
        if let Ok(file) = create_output(dir, "history.csv") {
            let _ = write_history_csv(file, columns.0, columns.1, history);
        }
    }
    err.into()
}

const RL_COLUMNS: (&str, &str) = ("lse", "meanQError");
const IRL_COLUMNS: (&str, &str) = ("logLikelihood", "rewardCorrelation");

pub fn gen_env(args: &GenEnvArgs, config: Option<&Path>) -> CliResult<()> {
    let cfg: GenEnvConfig = resolve(args, config)?;
    let out = required(cfg.out.as_ref(), "out")?;
    let mut spec = random_spec(cfg.dims, cfg.size, cfg.objects, cfg.seed)?;
    spec.gamma = cfg.gamma;
    let gw = build_grid_capped(&spec, cfg.state_cap)?;
    prepare_out(&out)?;
    let spec_json = gw.spec.to_json()? + "\n";
    write_text(&out, "spec.json", &spec_json)?;
    write_text(&out, "mdp.json", &(gw.mdp.to_json()? + "\n"))?;
    gw.features
        .write_csv(create_output(&out, "features.csv")?)?;
    write_sidecar(&out, "gen-env", &cfg)?;
    println!(
        "states {} actions {}",
        gw.mdp.num_states(),
        gw.mdp.num_actions()
    );
    Ok(())
}

pub fn oracle(args: &OracleArgs, config: Option<&Path>) -> CliResult<()> {
    let cfg: OracleConfig = resolve(args, config)?;
    let mdp_path = required(cfg.mdp.as_ref(), "mdp")?;
    let out = required(cfg.out.as_ref(), "out")?;
    check_inputs(&[&mdp_path])?;
    let mdp = load_mdp(&mdp_path)?;
    let (v, q) = value_iteration(&mdp, cfg.tol, cfg.max_iters)?;
    prepare_out(&out)?;
    write_state_csv(create_output(&out, "v.csv")?, "v", &v)?;
    q.write_csv(create_output(&out, "q.csv")?)?;
    write_sidecar(&out, "oracle", &cfg)
}

pub fn sample(args: &SampleArgs, config: Option<&Path>) -> CliResult<()> {
    let cfg: SampleConfig = resolve(args, config)?;
    let spec_path = required(cfg.spec.as_ref(), "spec")?;
    let q_path = required(cfg.q.as_ref(), "q")?;
    let out = required(cfg.out.as_ref(), "out")?;
    check_inputs(&[&spec_path, &q_path])?;
    let spec: GridSpec = serde_json::from_str(&read_text(&spec_path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", spec_path.display())))?;
    let gw = build_grid(&spec)?;
    let q = load_q(&q_path)?;
    let policy = if cfg.greedy {
        SamplePolicy::Greedy
    } else {
        SamplePolicy::Boltzmann { b: cfg.b }
    };
    let trajs = sample_trajectories(&gw, &q, cfg.count, cfg.length, policy, cfg.seed)?;
    prepare_out(&out)?;
    trajs.write_csv(create_output(&out, "trajectories.csv")?)?;
    write_sidecar(&out, "sample", &cfg)
}

/// Trains and writes one RL run; returns the final history row.
fn run_rl(cfg: &RlConfig, out: &Path) -> CliResult<EpochRecord> {
    let mdp_path = required(cfg.mdp.as_ref(), "mdp")?;
    let feat_path = required(cfg.features.as_ref(), "features")?;
    let mut inputs = vec![mdp_path.as_path(), feat_path.as_path()];
    if let Some(p) = &cfg.oracle_q {
        inputs.push(p);
    }
    check_inputs(&inputs)?;
    let mdp = load_mdp(&mdp_path)?;
    let features = load_features(&feat_path)?;
    let oracle = cfg.oracle_q.as_deref().map(load_q).transpose()?;
    let rewards = mdp
        .rewards()
        .ok_or_else(|| CliError::Usage("train-rl needs an MDP with rewards".into()))?;
    let observed = ObservedRewards::full(rewards.to_vec());
    let net = cfg.net.network(&features);
    let train = RlTrainConfig {
        k: cfg.k,
        learning_rate: cfg.net.learning_rate,
        batch_size: cfg.net.batch_size,
        epochs: cfg.net.epochs,
        seed: cfg.net.seed,
    };
    prepare_out(out)?;
    let outcome = vrirl_core::train_rl(&mdp, &features, &observed, &net, &train, oracle.as_ref())
        .map_err(|e| handle_divergence(out, RL_COLUMNS, e))?;
    let ck = Checkpoint::new(&outcome.approx, mdp.gamma(), None, Some(cfg.k));
    write_training(out, &ck, RL_COLUMNS, &outcome.history, &outcome.solution)?;
    write_sidecar(out, "train-rl", cfg)?;
    Ok(outcome
        .history
        .last()
        .cloned()
        .expect("history has the initial row"))
}

/// Trains and writes one IRL run; returns the final history row.
fn run_irl(cfg: &IrlConfig, out: &Path) -> CliResult<EpochRecord> {
    let mdp_path = required(cfg.mdp.as_ref(), "mdp")?;
    let feat_path = required(cfg.features.as_ref(), "features")?;
    let traj_path = required(cfg.trajectories.as_ref(), "trajectories")?;
    check_inputs(&[&mdp_path, &feat_path, &traj_path])?;
    let mdp = load_mdp(&mdp_path)?;
    let features = load_features(&feat_path)?;
    let trajs = load_trajectories(&traj_path)?;
    let mask = (!cfg.full_state).then(|| trajs.visited_mask(mdp.num_states()));
    let truth = mdp.rewards().map(|rewards| RewardTruth {
        rewards,
        mask: mask.as_deref(),
    });
    let net = cfg.net.network(&features);
    let train = IrlTrainConfig {
        b: cfg.b,
        learning_rate: cfg.net.learning_rate,
        batch_size: cfg.net.batch_size,
        epochs: cfg.net.epochs,
        seed: cfg.net.seed,
    };
    prepare_out(out)?;
    let outcome = vrirl_core::train_irl(&mdp, &features, &trajs, &net, &train, truth)
        .map_err(|e| handle_divergence(out, IRL_COLUMNS, e))?;
    let ck = Checkpoint::new(&outcome.approx, mdp.gamma(), Some(cfg.b), None);
    write_training(out, &ck, IRL_COLUMNS, &outcome.history, &outcome.solution)?;
    write_sidecar(out, "train-irl", cfg)?;
    Ok(outcome
        .history
        .last()
        .cloned()
        .expect("history has the initial row"))
}

pub fn train_rl(args: &RlArgs, config: Option<&Path>) -> CliResult<()> {
    let cfg: RlConfig = resolve(args, config)?;
    let out = required(cfg.out.as_ref(), "out")?;
    run_rl(&cfg, &out).map(|_| ())
}

pub fn train_irl(args: &IrlArgs, config: Option<&Path>) -> CliResult<()> {
    let cfg: IrlConfig = resolve(args, config)?;
    let out = required(cfg.out.as_ref(), "out")?;
    run_irl(&cfg, &out).map(|_| ())
}

/// Loads a checkpoint with the MDP and features it is evaluated on.
fn load_model(
    ck_path: &Path,
    mdp_path: &Path,
    feat_path: &Path,
) -> CliResult<(Checkpoint, Approximator, Mdp, FeatureMatrix)> {
    let (ck, approx) = load_checkpoint(ck_path)?;
    let mdp = load_mdp(mdp_path)?;
    let features = load_features(feat_path)?;
    if ck.gamma != mdp.gamma() {
        return Err(CliError::Usage(format!(
            "checkpoint discount {} differs from the MDP's {}",
            ck.gamma,
            mdp.gamma()
        )));
    }
    Ok((ck, approx, mdp, features))
}

pub fn eval(args: &EvalArgs, config: Option<&Path>) -> CliResult<()> {
    let cfg: EvalConfig = resolve(args, config)?;
    let ck_path = required(cfg.checkpoint.as_ref(), "checkpoint")?;
    let mdp_path = required(cfg.mdp.as_ref(), "mdp")?;
    let feat_path = required(cfg.features.as_ref(), "features")?;
    let out = required(cfg.out.as_ref(), "out")?;
    let mut inputs = vec![ck_path.as_path(), mdp_path.as_path(), feat_path.as_path()];
    inputs.extend(cfg.oracle_q.as_deref());
    inputs.extend(cfg.trajectories.as_deref());
    check_inputs(&inputs)?;
    let (ck, approx, mdp, features) = load_model(&ck_path, &mdp_path, &feat_path)?;
    if cfg.oracle_q.is_none() && mdp.rewards().is_none() {
        return Err(CliError::Usage(
            "eval needs --oracle-q or an MDP with rewards".into(),
        ));
    }
    let backup =
        ck.k.map_or(BackupKind::HardMax, |k| BackupKind::Softmax { k });
    let sol = solve_vr(&approx, &features, &mdp, backup)?;
    let mut report = MetricsReport::default();
    if let Some(p) = &cfg.oracle_q {
        report.mean_q_error = Some(mean_q_error(&sol.q, &load_q(p)?)?);
    }
    if let Some(truth) = mdp.rewards() {
        let mask = match (&cfg.trajectories, cfg.full_state) {
            (Some(p), false) => Some(load_trajectories(p)?.visited_mask(mdp.num_states())),
            _ => None,
        };
        report.reward_correlation = Some(reward_correlation(&sol.r, truth, mask.as_deref())?);
    }
    prepare_out(&out)?;
    write_metrics(&out, &report)?;
    write_sidecar(&out, "eval", &cfg)
}

pub fn score(args: &ScoreArgs, config: Option<&Path>) -> CliResult<()> {
    let cfg: ScoreConfig = resolve(args, config)?;
    let ck_path = required(cfg.checkpoint.as_ref(), "checkpoint")?;
    let mdp_path = required(cfg.mdp.as_ref(), "mdp")?;
    let feat_path = required(cfg.features.as_ref(), "features")?;
    let traj_path = required(cfg.trajectories.as_ref(), "trajectories")?;
    let out = required(cfg.out.as_ref(), "out")?;
    check_inputs(&[&ck_path, &mdp_path, &feat_path, &traj_path])?;
    let (ck, approx, mdp, features) = load_model(&ck_path, &mdp_path, &feat_path)?;
    let trajs = load_trajectories(&traj_path)?;
    let b = cfg.b.or(ck.b).unwrap_or(1.0);
    let report = MetricsReport {
        mean_nll: Some(trajectory_nll(&approx, &features, &mdp, &trajs, b)?),
        disagreement_rate: Some(disagreement_rate(&approx, &features, &mdp, &trajs)?),
        ..Default::default()
    };
    prepare_out(&out)?;
    write_metrics(&out, &report)?;
    write_sidecar(&out, "score", &cfg)
}

pub fn sweep(args: &SweepArgs, config: Option<&Path>) -> CliResult<()> {
    let cfg: SweepConfig = resolve(args, config)?;
    let out = required(cfg.out.as_ref(), "out")?;
    if cfg.widths.is_empty() {
        return Err(CliError::Usage(
            "--widths must list at least one width".into(),
        ));
    }
    let columns = match cfg.mode.as_str() {
        "irl" => IRL_COLUMNS,
        "rl" => RL_COLUMNS,
        m => {
            return Err(CliError::Usage(format!(
                "--mode must be irl or rl, got `{m}`"
            )))
        }
    };
    prepare_out(&out)?;
    let mut rows = Vec::with_capacity(cfg.widths.len());
    for &w in &cfg.widths {
        let dir = out.join(format!("width-{w}"));
        let mut net = cfg.net.clone();
        net.hidden = vec![w];
        let last = if cfg.mode == "irl" {
            let run = IrlConfig {
                mdp: cfg.mdp.clone(),
                features: cfg.features.clone(),
                trajectories: cfg.trajectories.clone(),
                b: cfg.b,
                full_state: cfg.full_state,
                net,
                out: Some(dir.clone()),
            };
            run_irl(&run, &dir)?
        } else {
            let run = RlConfig {
                mdp: cfg.mdp.clone(),
                features: cfg.features.clone(),
                oracle_q: cfg.oracle_q.clone(),
                k: cfg.k,
                net,
                out: Some(dir.clone()),
            };
            run_rl(&run, &dir)?
        };
        rows.push((w, last));
    }
    let mut summary = format!("width,epoch,{},{}\n", columns.0, columns.1);
    for (w, rec) in rows {
        let metric = rec.metric.map(|m| format!("{m:?}")).unwrap_or_default();
        summary.push_str(&format!("{w},{},{:?},{metric}\n", rec.epoch, rec.objective));
    }
    write_text(&out, "summary.csv", &summary)?;
    write_sidecar(&out, "sweep", &cfg)
}
