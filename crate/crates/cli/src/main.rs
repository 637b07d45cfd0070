use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use icsim::harness::{self, seed_vector};
use icsim::{render_patch, scenario, Phase, ScenarioSpec, TrafficLight, WorldConfig};

#[derive(Parser)]
#[command(name = "icsim", version, about = "Cooperative intelligent-car simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key=value config file; omitted keys keep their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 600)]
    steps: u64,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file; a random fleet is generated when omitted
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Fleet size for the generated scenario
    #[arg(long, default_value_t = 20)]
    cars: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its metrics row
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Accuracy against comms rounds per step, paired seeds
    SweepRounds {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        rounds: Vec<u64>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
    },
    /// Accuracy against fleet size, paired seeds
    SweepCars {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "2,5,10,20")]
        counts: Vec<u64>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Generate fleets without traffic lights
        #[arg(long)]
        no_lights: bool,
    },
    /// Non-hold decisions per time interval
    Timeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Bucket width, seconds
        #[arg(long, default_value_t = 1.0)]
        interval: f64,
    },
    /// Dump a rendered camera patch as binary PPM
    Patch {
        #[arg(long, default_value = "red")]
        phase: Phase,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        key: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>, fallback: fn() -> WorldConfig) -> Result<WorldConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            WorldConfig::parse(&text).with_context(|| format!("config {}", p.display()))
        }
        None => Ok(fallback()),
    }
}

fn load_scenario(args: &ScenarioArgs, cfg: &WorldConfig) -> Result<ScenarioSpec> {
    match &args.scenario {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ScenarioSpec::parse(&text).with_context(|| format!("scenario {}", p.display()))
        }
        None => Ok(scenario::generate(cfg, args.cars, cfg.rng_seed, true)?),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes).context("writing stdout")
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, scenario } => {
            let cfg = load_config(common.config.as_deref(), WorldConfig::default)?;
            let spec = load_scenario(&scenario, &cfg)?;
            let report = harness::run_scenario(&cfg, &spec, common.steps)?;
            emit(common.out.as_deref(), harness::report_csv(&cfg, &[report]).as_bytes())
        }
        Command::SweepRounds {
            common,
            scenario,
            rounds,
            seeds,
        } => {
            let cfg = load_config(common.config.as_deref(), harness::degraded_sensing)?;
            let spec = load_scenario(&scenario, &cfg)?;
            let sweep = harness::sweep_decision_time(&cfg, &spec, &rounds, &seed_vector(cfg.rng_seed, seeds), common.steps)?;
            emit(common.out.as_deref(), harness::sweep_csv(&sweep).as_bytes())
        }
        Command::SweepCars {
            common,
            counts,
            seeds,
            no_lights,
        } => {
            let cfg = load_config(common.config.as_deref(), harness::degraded_sensing)?;
            let sweep =
                harness::sweep_car_count(&cfg, &counts, &seed_vector(cfg.rng_seed, seeds), common.steps, !no_lights)?;
            emit(common.out.as_deref(), harness::sweep_csv(&sweep).as_bytes())
        }
        Command::Timeline {
            common,
            scenario,
            interval,
        } => {
            let cfg = load_config(common.config.as_deref(), WorldConfig::default)?;
            let spec = load_scenario(&scenario, &cfg)?;
            let timeline = harness::decisions_timeline(&cfg, &spec, common.steps, interval)?;
            emit(common.out.as_deref(), harness::timeline_csv(&cfg, &timeline).as_bytes())
        }
        Command::Patch { phase, sigma, key, out } => {
            if !(sigma.is_finite() && sigma >= 0.0) {
                bail!("sigma must be >= 0, got {sigma}");
            }
            let light = TrafficLight {
                light_id: 0,
                lane: 0,
                position: 0.0,
                phase,
                remaining: 1.0,
            };
            emit(Some(&out), &render_patch(&light, sigma, key).to_ppm())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
