use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use quadservo_harness::metrics::compare_runs;
use quadservo_harness::output::{read_summary, write_comparison, write_run, COMPARISON_FILE};
use quadservo_harness::{run_scenario, scenario_config, HarnessError, ObserverMode, RunConfig, CATALOG};
use quadservo_sim::Fidelity;

#[derive(Parser)]
#[command(name = "quadservo", version, about = "Visual servoing runs for a quadruped manipulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sto,
    WoSto,
}

impl From<Mode> for ObserverMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Sto => ObserverMode::Sto,
            Mode::WoSto => ObserverMode::WoSto,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Tier {
    Kinematic,
    Dynamic,
}

#[derive(clap::Args, Clone)]
struct Overrides {
    /// Built-in scenario id (see `list-scenarios`).
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Run config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, value_enum)]
    fidelity: Option<Tier>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, or the whole catalog with `--all`.
    Run {
        #[command(flatten)]
        source: Overrides,
        #[arg(long, value_enum)]
        observer: Option<Mode>,
        /// Run every catalog scenario in sequence.
        #[arg(long, conflicts_with_all = ["scenario", "config"])]
        all: bool,
        /// Output directory; each run gets its own subdirectory.
        #[arg(long, default_value = "runs")]
        output: PathBuf,
    },
    /// Run STO and woSTO on the same scenarios, or compare two existing summaries.
    Compare {
        #[command(flatten)]
        source: Overrides,
        #[arg(long, conflicts_with_all = ["scenario", "config", "summaries"])]
        all: bool,
        /// Two `summary.json` files to compare instead of running.
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        summaries: Vec<PathBuf>,
        #[arg(long, default_value = "runs")]
        output: PathBuf,
    },
    /// Print the built-in scenarios.
    ListScenarios,
}

fn base_config(o: &Overrides, mode: ObserverMode) -> Result<RunConfig, HarnessError> {
    let mut cfg = match (&o.scenario, &o.config) {
        (Some(id), _) => scenario_config(id, mode)?,
        (None, Some(path)) => RunConfig::load(path)?,
        (None, None) => return Err(HarnessError::Config("give --scenario, --config or --all".into())),
    };
    apply(&mut cfg, o);
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, o: &Overrides) {
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(d) = o.duration {
        cfg.duration = d;
    }
    if let Some(t) = o.fidelity {
        cfg.plant.fidelity = match t {
            Tier::Kinematic => Fidelity::Kinematic,
            Tier::Dynamic => Fidelity::Dynamic,
        };
    }
}

fn run_dir(root: &std::path::Path, cfg: &RunConfig) -> PathBuf {
    root.join(format!("{}-{}", cfg.scenario, cfg.observer_mode.label()))
}

fn report(cfg: &RunConfig, m: &quadservo_harness::RunMetrics, dir: &std::path::Path) {
    let fmt = |x: Option<f64>| x.map(|t| format!("{t:.2} s")).unwrap_or_else(|| "never".into());
    println!(
        "{} [{}] {}: converged {}, tracking lost {}, rms {:.4} m, max {:.4} m -> {}",
        cfg.scenario,
        cfg.observer_mode.label(),
        if m.success { "ok" } else { "FAILED" },
        fmt(m.convergence_time),
        fmt(m.tracking_lost_at),
        m.tracking_rms,
        m.tracking_max,
        dir.display()
    );
}

fn execute(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::ListScenarios => {
            for s in &CATALOG {
                println!("{:<12} {:>5.0} s  {}", s.id, s.duration, s.description);
            }
            Ok(true)
        }
        Command::Run { source, observer, all, output } => {
            let mode = observer.map(ObserverMode::from);
            let configs = if all {
                CATALOG
                    .iter()
                    .map(|s| {
                        let mut c = scenario_config(s.id, mode.unwrap_or_default())?;
                        apply(&mut c, &source);
                        Ok(c)
                    })
                    .collect::<Result<Vec<_>, HarnessError>>()?
            } else {
                let mut c = base_config(&source, mode.unwrap_or_default())?;
                if let Some(m) = mode {
                    c.observer_mode = m;
                }
                vec![c]
            };
            let mut ok = true;
            for cfg in configs {
                let out = run_scenario(&cfg)?;
                let dir = cfg.output_dir.clone().filter(|_| !all).unwrap_or_else(|| run_dir(&output, &cfg));
                write_run(&dir, &out)?;
                report(&cfg, &out.metrics, &dir);
                ok &= out.metrics.success;
            }
            Ok(ok)
        }
        Command::Compare { source, all, summaries, output } => {
            let mut rows = Vec::new();
            if summaries.len() == 2 {
                rows.push(compare_runs(&read_summary(&summaries[0])?, &read_summary(&summaries[1])?)?);
            } else {
                let bases = if all {
                    CATALOG.iter().map(|s| scenario_config(s.id, ObserverMode::Sto)).collect::<Result<Vec<_>, _>>()?
                } else {
                    vec![base_config(&source, ObserverMode::Sto)?]
                };
                for mut base in bases {
                    apply(&mut base, &source);
                    let mut metrics = Vec::new();
                    for mode in [ObserverMode::Sto, ObserverMode::WoSto] {
                        let cfg = RunConfig { observer_mode: mode, ..base.clone() };
                        let out = run_scenario(&cfg)?;
                        let dir = run_dir(&output, &cfg);
                        write_run(&dir, &out)?;
                        report(&cfg, &out.metrics, &dir);
                        metrics.push(out.metrics);
                    }
                    rows.push(compare_runs(&metrics[0], &metrics[1])?);
                }
            }
            let path = output.join(COMPARISON_FILE);
            write_comparison(&path, &rows)?;
            for c in &rows {
                println!(
                    "{}: steady max {} {:.4} m vs {} {:.4} m (ratio {:.2})",
                    c.scenario,
                    c.mode_a.label(),
                    c.steady_max_a,
                    c.mode_b.label(),
                    c.steady_max_b,
                    c.steady_ratio
                );
            }
            println!("report -> {}", path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
