use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

use iab_core::agents::Variant;
use iab_core::checker::check_plan;
use iab_core::greedy::{brute_force_optimum, Optimum, MAX_EXHAUSTIVE_SITES};
use iab_core::harness::{
    compare_csv, compare_table, evaluate_checkpoint, layout_label, run_dir, run_experiment,
    run_root, with_layout, write_guarded, Method, RunOptions,
};
use iab_core::network_state::DeploymentPlan;
use iab_core::scenario::{build_scenario, LayoutPattern};
use iab_core::{Error, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "iab-plan",
    version,
    about = "Plan multi-hop IAB deployments with DQN agents and a greedy baseline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the selected method(s) and export metrics, checkpoint and best plan.
    Run(CommonArgs),
    /// Re-evaluate a stored checkpoint with best-of-N episodes.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Defaults to the checkpoint written by `run`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        tests: Option<usize>,
    },
    /// Every method on every layout, summarised in compare.csv.
    Compare(CommonArgs),
    /// Greedy baseline only.
    Greedy(CommonArgs),
    /// Exact minimum node count for scenarios with few candidate sites.
    Oracle(CommonArgs),
    /// Validate a deployment plan JSON against the scenario.
    CheckPlan {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        plan: PathBuf,
    },
}

#[derive(Args, Clone)]
struct CommonArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    variant: Vec<VariantArg>,
    #[arg(long, value_enum)]
    layout: Option<LayoutArg>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// 500 m map, 3,000 episodes, small network.
    #[arg(long)]
    desk_scale: bool,
    /// Record elapsed time in the metrics CSV (breaks byte-identical reruns).
    #[arg(long)]
    wall_clock: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Dqn,
    Ddqn,
    Dueling,
    Greedy,
}

impl From<VariantArg> for Method {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Dqn => Method::Agent(Variant::Dqn),
            VariantArg::Ddqn => Method::Agent(Variant::Ddqn),
            VariantArg::Dueling => Method::Agent(Variant::Dueling),
            VariantArg::Greedy => Method::Greedy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    #[value(name = "five_dice")]
    FiveDice,
    Vertical,
    Pentagon,
}

impl From<LayoutArg> for LayoutPattern {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::FiveDice => LayoutPattern::FiveDice,
            LayoutArg::Vertical => LayoutPattern::Vertical,
            LayoutArg::Pentagon => LayoutPattern::Pentagon,
        }
    }
}

impl CommonArgs {
    fn config(&self) -> iab_core::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let mut c = ExperimentConfig::load(path)?;
                if self.desk_scale {
                    c.apply_desk_scale();
                }
                c
            }
            None if self.desk_scale => ExperimentConfig::desk_preset(0),
            None => ExperimentConfig::full_scale(LayoutPattern::FiveDice, 0),
        };
        if let Some(layout) = self.layout {
            config = with_layout(&config, layout.into());
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }

    fn methods(&self, config: &ExperimentConfig) -> Vec<Method> {
        if self.variant.is_empty() {
            vec![Method::Agent(config.training.variant)]
        } else {
            self.variant.iter().map(|&v| v.into()).collect()
        }
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            out: self.out.clone(),
            wall_clock: self.wall_clock,
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> iab_core::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command) -> iab_core::Result<()> {
    match command {
        Command::Run(args) => {
            let config = args.config()?;
            let results = run_experiment(
                &config,
                std::slice::from_ref(&config),
                &args.methods(&config),
                &args.options(),
            )?;
            for r in &results {
                println!("{}", r.dir.display());
                print_json(&r.record.summary)?;
            }
        }
        Command::Greedy(args) => {
            let config = args.config()?;
            let results = run_experiment(
                &config,
                std::slice::from_ref(&config),
                &[Method::Greedy],
                &args.options(),
            )?;
            println!("{}", results[0].dir.join("plan.json").display());
            print_json(&results[0].record.summary)?;
        }
        Command::Compare(args) => {
            let config = args.config()?;
            let layouts: Vec<ExperimentConfig> =
                if args.layout.is_some() || config.donors.pattern.is_none() {
                    vec![config.clone()]
                } else {
                    LayoutPattern::NAMED
                        .iter()
                        .map(|&l| with_layout(&config, l))
                        .collect()
                };
            let methods = if args.variant.is_empty() {
                Method::ALL.to_vec()
            } else {
                args.methods(&config)
            };
            let results = run_experiment(&config, &layouts, &methods, &args.options())?;
            let table = compare_csv(&compare_table(&results))?;
            let path = run_root(&config, &args.out).join("compare.csv");
            write_guarded(&path, table.as_bytes())?;
            print!("{table}");
        }
        Command::Evaluate {
            common,
            checkpoint,
            tests,
        } => {
            let config = common.config()?;
            let method = common.methods(&config)[0];
            if method == Method::Greedy {
                return Err(Error::Config("evaluate needs an agent variant".into()));
            }
            let path = checkpoint.unwrap_or_else(|| {
                run_dir(
                    &run_root(&config, &common.out),
                    &layout_label(&config),
                    method,
                )
                .join("checkpoint.json")
            });
            let eval =
                evaluate_checkpoint(&config, &path, tests.unwrap_or(config.training.eval_tests))?;
            print_json(&eval.summary)?;
        }
        Command::Oracle(args) => {
            let config = args.config()?;
            let scenario = build_scenario(&config)?;
            match brute_force_optimum(
                &scenario,
                config.reward.coverage_threshold,
                MAX_EXHAUSTIVE_SITES,
            ) {
                Ok(Optimum::Feasible(state)) => print_json(&state.to_plan(&scenario))?,
                Ok(Optimum::Infeasible) => {
                    return Err(Error::Infeasible(
                        "no subset of sites reaches the coverage target".into(),
                    ))
                }
                Err(Error::TooManySites { sites, limit }) => {
                    return Err(Error::Config(format!(
                        "oracle needs at most {limit} candidate sites, scenario has {sites}"
                    )))
                }
                Err(e) => return Err(e),
            }
        }
        Command::CheckPlan { common, plan } => {
            let config = common.config()?;
            let scenario = build_scenario(&config)?;
            let plan = read_plan(&plan)?;
            let violations = check_plan(&scenario, &plan, config.reward.coverage_threshold);
            if !violations.is_empty() {
                for v in &violations {
                    println!("{v}");
                }
                return Err(Error::Infeasible(format!(
                    "{} violation(s)",
                    violations.len()
                )));
            }
            println!(
                "ok: {} nodes, coverage {:.4}",
                plan.n_nodes, plan.coverage.fraction
            );
        }
    }
    Ok(())
}

fn read_plan(path: &Path) -> iab_core::Result<DeploymentPlan> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::DimensionMismatch { .. }
        | Error::OutsideMap { .. }
        | Error::UnknownPattern(_)
        | Error::NonPositiveBandwidth(_)
        | Error::TooManySites { .. } => 2,
        Error::Infeasible(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
