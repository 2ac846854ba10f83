use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use wptsim::engine::{run_experiment, Experiment, ScenarioConfig};
use wptsim::offline::{self, KnapsackInstance, Method, OfflineInstance, Problem};
use wptsim::report::{summarize, write_summary_json, write_trace_csv};

#[derive(Parser)]
#[command(name = "wptsim", version, about = "Adaptive wireless charging simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Trace CSV to write; the summary goes next to it as `<stem>.summary.json`.
    #[arg(long)]
    out: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long, env = "WPTSIM_SEED")]
    seed: Option<u64>,
    /// Number of repetitions, overriding the config.
    #[arg(long)]
    reps: Option<u32>,
    /// Also write every repetition's trace, not just the mean.
    #[arg(long)]
    per_rep: bool,
    /// Where to write the JSON summary.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the config's policy and write its averaged trace.
    Simulate(RunArgs),
    /// Run every policy in the config's `policies` list on shared seeds.
    Compare(RunArgs),
    /// Solve an offline instance exactly.
    Offline {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        problem: ProblemArg,
        #[arg(long, value_enum, default_value = "brute")]
        method: MethodArg,
    },
    /// Build an offline instance from a knapsack instance.
    Reduce {
        #[arg(long)]
        kp: PathBuf,
        #[arg(long, value_enum)]
        target: ProblemArg,
        /// Charger range of the construction (default: max sqrt(w/v) for
        /// mnc, 1 for mnl).
        #[arg(long)]
        range: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Mnc,
    Mnl,
}

impl From<ProblemArg> for Problem {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::Mnc => Problem::Mnc,
            ProblemArg::Mnl => Problem::Mnl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dp,
    Brute,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dp => Method::Dp,
            MethodArg::Brute => Method::Brute,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_config(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_json_str(&read(&args.config)?)
        .with_context(|| format!("in {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.repetitions = reps;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summary_path(args: &RunArgs) -> PathBuf {
    args.summary.clone().unwrap_or_else(|| {
        let stem = args.out.file_stem().map_or("trace".into(), |s| s.to_string_lossy().into_owned());
        args.out.with_file_name(format!("{stem}.summary.json"))
    })
}

fn run(cfg: &ScenarioConfig, entries: &[wptsim::PolicyEntry], args: &RunArgs) -> Result<()> {
    let experiments = entries
        .iter()
        .map(|e| run_experiment(cfg, e))
        .collect::<Result<Vec<Experiment>, _>>()?;
    let mut out = create(&args.out)?;
    write_trace_csv(&mut out, &experiments, args.per_rep)?;
    out.flush()?;
    let mut sum = create(&summary_path(args))?;
    write_summary_json(&mut sum, &summarize(cfg, &experiments))?;
    sum.flush()?;
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = load_config(&args)?;
            run(&cfg, &[cfg.primary_policy()], &args)
        }
        Command::Compare(args) => {
            let cfg = load_config(&args)?;
            if cfg.policies.is_empty() {
                bail!("`policies` is empty; compare needs at least one policy");
            }
            run(&cfg, &cfg.policies, &args)
        }
        Command::Offline {
            instance,
            problem,
            method,
        } => {
            let inst = OfflineInstance::from_json_str(&read(&instance)?)
                .with_context(|| format!("in {}", instance.display()))?;
            let sol = offline::solve(&inst, problem.into(), method.into())?;
            println!("{}", serde_json::to_string_pretty(&sol)?);
            Ok(())
        }
        Command::Reduce { kp, target, range, out } => {
            let kp_inst =
                KnapsackInstance::from_json_str(&read(&kp)?).with_context(|| format!("in {}", kp.display()))?;
            let inst = match target {
                ProblemArg::Mnc => {
                    offline::kp_to_mnc(&kp_inst, range.unwrap_or_else(|| offline::default_mnc_range(&kp_inst)))?
                }
                ProblemArg::Mnl => offline::kp_to_mnl(&kp_inst, range.unwrap_or(1.0))?,
            };
            let mut w = create(&out)?;
            serde_json::to_writer_pretty(&mut w, &inst)?;
            w.write_all(b"\n")?;
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
