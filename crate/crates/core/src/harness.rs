//! Experiment driver: train, evaluate best-of-N, export CSV and JSON.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{select_action, train, AgentCheckpoint, QNetwork, TrainOptions, Variant};
use crate::checker::{check_plan, check_state};
use crate::config::{DonorConfig, ExperimentConfig};
use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::greedy::greedy_plan;
use crate::mdp_env::{reward_of, IabEnv, RewardConfig};
use crate::network_state::{DeploymentPlan, NetworkState};
use crate::scenario::{build_scenario, LayoutPattern, Scenario};

pub use crate::metrics::moving_average;

/// A trained agent variant or the greedy baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Agent(Variant),
    Greedy,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Self::Agent(Variant::Dqn),
        Self::Agent(Variant::Ddqn),
        Self::Agent(Variant::Dueling),
        Self::Greedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Agent(v) => v.name(),
            Self::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Self::Greedy),
            other => other.parse().map(Self::Agent),
        }
    }
}

/// Node-count statistics over a batch of evaluation episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n_tests: usize,
    pub full_coverage: usize,
    pub mean_nodes: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Node count of the selected plan, if any episode reached full coverage.
    pub best_nodes: Option<usize>,
    pub best_test: Option<usize>,
    pub mean_reward: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub summary: EvalSummary,
    pub node_counts: Vec<usize>,
    pub best: Option<NetworkState>,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub state: NetworkState,
    pub reward: f64,
}

/// Plays one episode with an epsilon-greedy policy on a fresh copy of `env`.
pub fn play_episode(
    net: &QNetwork,
    env: &IabEnv,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeOutcome> {
    let mut env = env.clone();
    let mut state = env.reset(0);
    let mut reward = 0.0;
    loop {
        let action = select_action(net, &state, env.valid_actions(), epsilon, rng)?;
        let step = env.step(action)?;
        reward += step.reward;
        state = step.state;
        if step.done {
            break;
        }
    }
    Ok(EpisodeOutcome {
        state: env.network().clone(),
        reward,
    })
}

fn test_rng(seed: u64, test: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(test as u64);
    rng
}

/// Runs `n_tests` episodes in parallel, each with its own generator, and
/// keeps the full-coverage plan with the fewest nodes (ties: more donor
/// residual, then the earlier test). Plans failing the checker are never
/// selected.
pub fn evaluate_best_of(
    net: &QNetwork,
    env: &IabEnv,
    n_tests: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Evaluation> {
    let outcomes = par_map(n_tests, |i| {
        play_episode(net, env, epsilon, &mut test_rng(seed, i))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(summarise(outcomes, env))
}

fn summarise(outcomes: Vec<EpisodeOutcome>, env: &IabEnv) -> Evaluation {
    let threshold = env.reward_config().coverage_threshold;
    let scenario = env.scenario();
    let node_counts: Vec<usize> = outcomes.iter().map(|o| o.state.num_nodes()).collect();
    let n = outcomes.len();
    let mut best: Option<(usize, &NetworkState)> = None;
    let mut full_coverage = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.state.coverage_fraction() < threshold {
            continue;
        }
        full_coverage += 1;
        if !check_state(scenario, &o.state).is_empty() {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, b)) => {
                o.state.num_nodes() < b.num_nodes()
                    || (o.state.num_nodes() == b.num_nodes()
                        && o.state.total_donor_residual() > b.total_donor_residual())
            }
        };
        if better {
            best = Some((i, &o.state));
        }
    }
    let summary = EvalSummary {
        n_tests: n,
        full_coverage,
        mean_nodes: if n == 0 {
            0.0
        } else {
            node_counts.iter().sum::<usize>() as f64 / n as f64
        },
        min_nodes: node_counts.iter().copied().min().unwrap_or(0),
        max_nodes: node_counts.iter().copied().max().unwrap_or(0),
        best_nodes: best.map(|(_, s)| s.num_nodes()),
        best_test: best.map(|(i, _)| i),
        mean_reward: if n == 0 {
            0.0
        } else {
            outcomes.iter().map(|o| o.reward).sum::<f64>() / n as f64
        },
    };
    let best = best.map(|(_, s)| s.clone());
    Evaluation {
        summary,
        node_counts,
        best,
    }
}

/// Writes `bytes` unless the file already holds different contents.
pub fn write_guarded(path: &Path, bytes: &[u8]) -> Result<()> {
    match fs::read(path) {
        Ok(existing) if existing == bytes => return Ok(()),
        Ok(_) => return Err(Error::WouldOverwrite(path.to_path_buf())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(e.into()),
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Verifies a plan with the independent checker, then writes it.
pub fn write_plan(
    path: &Path,
    scenario: &Scenario,
    plan: &DeploymentPlan,
    threshold: f64,
) -> Result<()> {
    let violations = check_plan(scenario, plan, threshold);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::Infeasible(format!(
            "plan fails the checker: {}",
            list.join(", ")
        )));
    }
    write_guarded(path, &to_json_bytes(plan)?)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub wall_clock: bool,
}

/// Label for the donor layout of a config: the pattern name or `explicit`.
pub fn layout_label(config: &ExperimentConfig) -> String {
    config
        .donors
        .pattern
        .clone()
        .unwrap_or_else(|| "explicit".to_string())
}

pub fn with_layout(config: &ExperimentConfig, layout: LayoutPattern) -> ExperimentConfig {
    ExperimentConfig {
        donors: DonorConfig::named(layout),
        ..config.clone()
    }
}

/// `<out>/<hash>-seed<seed>`.
pub fn run_root(config: &ExperimentConfig, out: &Path) -> PathBuf {
    out.join(format!("{}-seed{}", config.short_hash(), config.seed))
}

pub fn run_dir(root: &Path, layout: &str, method: Method) -> PathBuf {
    root.join(layout).join(method.name())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub layout: String,
    pub method: Method,
    pub seed: u64,
    pub greedy_nodes: usize,
    pub summary: EvalSummary,
    pub node_counts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub dir: PathBuf,
    pub record: EvaluationRecord,
}

fn environment(config: &ExperimentConfig) -> Result<IabEnv> {
    let scenario = Arc::new(build_scenario(config)?);
    Ok(IabEnv::new(scenario, config.reward.clone(), config.filter))
}

/// Reference node count from the greedy baseline; errors when the baseline
/// cannot reach the coverage target.
pub fn greedy_reference(config: &ExperimentConfig) -> Result<(Scenario, NetworkState)> {
    let scenario = build_scenario(config)?;
    let outcome = greedy_plan(&scenario, &config.filter, config.reward.coverage_threshold);
    if !outcome.complete {
        return Err(Error::Infeasible(format!(
            "greedy baseline stops at coverage {:.4}",
            outcome.state.coverage_fraction()
        )));
    }
    Ok((scenario, outcome.state))
}

/// Trains or plans one (layout, method) cell and writes its artefacts.
pub fn run_one(
    config: &ExperimentConfig,
    root: &Path,
    method: Method,
    opts: &RunOptions,
) -> Result<RunResult> {
    let layout = layout_label(config);
    let dir = run_dir(root, &layout, method);
    let threshold = config.reward.coverage_threshold;
    let (scenario, greedy) = greedy_reference(config)?;
    let greedy_nodes = greedy.num_nodes();
    info!(
        "{layout}/{method}: {} sites, greedy uses {greedy_nodes} nodes",
        scenario.num_sites()
    );

    let (summary, node_counts, best) = match method {
        Method::Greedy => {
            let eval = EvalSummary {
                n_tests: 1,
                full_coverage: 1,
                mean_nodes: greedy_nodes as f64,
                min_nodes: greedy_nodes,
                max_nodes: greedy_nodes,
                best_nodes: Some(greedy_nodes),
                best_test: Some(0),
                mean_reward: reward_of(
                    &greedy,
                    &RewardConfig {
                        n_ref: config.reward.n_ref.or(Some(greedy_nodes)),
                        ..config.reward.clone()
                    },
                ),
            };
            (eval, vec![greedy_nodes], Some(greedy))
        }
        Method::Agent(variant) => {
            let mut train_cfg = config.training.clone();
            train_cfg.variant = variant;
            let mut env = environment(config)?;
            let outcome = train(
                &mut env,
                &train_cfg,
                config.seed,
                TrainOptions {
                    wall_clock: opts.wall_clock,
                },
            )?;
            write_guarded(
                &dir.join("metrics.csv"),
                outcome.metrics.to_csv_string().as_bytes(),
            )?;
            let checkpoint = outcome.agent.checkpoint();
            write_guarded(&dir.join("checkpoint.json"), &to_json_bytes(&checkpoint)?)?;
            let eval = evaluate_best_of(
                &outcome.agent.online,
                &env,
                train_cfg.eval_tests,
                train_cfg.eval_epsilon,
                eval_seed(config.seed),
            )?;
            (eval.summary, eval.node_counts, eval.best)
        }
    };
    if let Some(best) = &best {
        write_plan(
            &dir.join("plan.json"),
            &scenario,
            &best.to_plan(&scenario),
            threshold,
        )?;
    }
    let record = EvaluationRecord {
        layout,
        method,
        seed: config.seed,
        greedy_nodes,
        summary,
        node_counts,
    };
    write_guarded(&dir.join("evaluation.json"), &to_json_bytes(&record)?)?;
    Ok(RunResult { dir, record })
}

fn eval_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_e7a1
}

/// Re-evaluates a stored checkpoint from a previous `run_one`.
pub fn evaluate_checkpoint(
    config: &ExperimentConfig,
    checkpoint_path: &Path,
    n_tests: usize,
) -> Result<Evaluation> {
    let text = fs::read_to_string(checkpoint_path)?;
    let checkpoint: AgentCheckpoint =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let net = checkpoint.q_network()?;
    let env = environment(config)?;
    if net.n_actions() != env.num_actions() {
        return Err(Error::Shape {
            expected: env.num_actions(),
            actual: net.n_actions(),
        });
    }
    evaluate_best_of(
        &net,
        &env,
        n_tests,
        config.training.eval_epsilon,
        eval_seed(config.seed),
    )
}

/// Runs every (config, method) pair in parallel. All configs share one
/// output root derived from `base`.
pub fn run_experiment(
    base: &ExperimentConfig,
    configs: &[ExperimentConfig],
    methods: &[Method],
    opts: &RunOptions,
) -> Result<Vec<RunResult>> {
    let root = run_root(base, &opts.out);
    write_guarded(&root.join("config.json"), base.to_pretty_json().as_bytes())?;
    let jobs: Vec<(&ExperimentConfig, Method)> = configs
        .iter()
        .flat_map(|c| methods.iter().map(move |&m| (c, m)))
        .collect();
    par_map(jobs.len(), |i| run_one(jobs[i].0, &root, jobs[i].1, opts))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub layout: String,
    pub method: String,
    pub mean_nodes: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub best_nodes: Option<usize>,
    pub full_coverage: usize,
    pub n_tests: usize,
}

/// One row per (layout, method), plus per-method averages across layouts
/// under the layout name `mean`.
pub fn compare_table(results: &[RunResult]) -> Vec<CompareRow> {
    let mut rows: Vec<CompareRow> = results
        .iter()
        .map(|r| CompareRow {
            layout: r.record.layout.clone(),
            method: r.record.method.name().to_string(),
            mean_nodes: r.record.summary.mean_nodes,
            min_nodes: r.record.summary.min_nodes,
            max_nodes: r.record.summary.max_nodes,
            best_nodes: r.record.summary.best_nodes,
            full_coverage: r.record.summary.full_coverage,
            n_tests: r.record.summary.n_tests,
        })
        .collect();
    let mut methods: Vec<String> = Vec::new();
    for r in &rows {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    for method in methods {
        let group: Vec<&CompareRow> = rows.iter().filter(|r| r.method == method).collect();
        let n = group.len() as f64;
        let best: Vec<usize> = group.iter().filter_map(|r| r.best_nodes).collect();
        let avg = CompareRow {
            layout: "mean".to_string(),
            method: method.clone(),
            mean_nodes: group.iter().map(|r| r.mean_nodes).sum::<f64>() / n,
            min_nodes: group.iter().map(|r| r.min_nodes).min().unwrap_or(0),
            max_nodes: group.iter().map(|r| r.max_nodes).max().unwrap_or(0),
            best_nodes: (best.len() == group.len())
                .then(|| best.iter().sum::<usize>() / best.len().max(1)),
            full_coverage: group.iter().map(|r| r.full_coverage).sum(),
            n_tests: group.iter().map(|r| r.n_tests).sum(),
        };
        rows.push(avg);
    }
    rows
}

pub fn compare_csv(rows: &[CompareRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
