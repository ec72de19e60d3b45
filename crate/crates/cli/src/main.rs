//! `latsphere`: seeded experiments on unit-sphere maps between finite
//! function lattices, emitting JSON reports and plot-ready CSV.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use latsphere_cli::experiment::{
    parse_vector, ConstantKindSpec, CurveKind, ExperimentConfig, HomeoAction, HomeoMode,
    StageKind, TaskSpec, CONFIG_VERSION,
};
use latsphere_cli::runner::{self, RunError, RunStatus};

#[derive(Parser)]
#[command(name = "latsphere", version, about)]
struct Cli {
    /// Experiment config (TOML) providing the space and named norms.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override (defaults to the config's seed, or 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for report.json and CSV files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Solver tolerance override where the task takes one.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task defined in the config's `[task]` table.
    Run,
    /// Power-map distortion checks.
    Mazur {
        #[command(subcommand)]
        cmd: MazurCmd,
    },
    /// Entropy maximization over the positive unit ball.
    Entropy {
        #[command(subcommand)]
        cmd: EntropyCmd,
    },
    /// Concavity/convexity constant estimation.
    Constants {
        #[command(subcommand)]
        cmd: ConstantsCmd,
    },
    /// Modulus curves and map profiles.
    Modulus {
        #[command(subcommand)]
        cmd: ModulusCmd,
    },
    /// Sphere-map pipelines.
    Homeo {
        #[command(subcommand)]
        cmd: HomeoCmd,
    },
    /// Supporting functionals.
    Dual {
        #[command(subcommand)]
        cmd: DualCmd,
    },
    /// Re-derive the plot CSV from a report.json.
    Emit {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
    },
}

#[derive(Subcommand)]
enum MazurCmd {
    /// Sample sphere pairs and verify the two-sided distortion bounds.
    Verify {
        #[arg(long)]
        norm: String,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
    },
}

#[derive(Subcommand)]
enum EntropyCmd {
    /// Solve one entropy maximization, reading h from a vector file.
    Solve {
        #[arg(long)]
        norm: String,
        #[arg(long, value_name = "FILE")]
        h: PathBuf,
    },
    /// Sample admissible pairs and check the midpoint inequality.
    Midpoint {
        #[arg(long)]
        norm: String,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
    },
}

#[derive(Subcommand)]
enum ConstantsCmd {
    /// Lower-bound a concavity or convexity constant by sampling.
    Estimate {
        #[arg(long)]
        norm: String,
        #[arg(long, value_enum)]
        kind: ConstantArg,
        #[arg(long)]
        exponent: f64,
        #[arg(long, default_value_t = 1_000)]
        tuples: usize,
        #[arg(long, default_value_t = 3)]
        tuple_size: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ConstantArg {
    Concavity,
    Convexity,
}

#[derive(Subcommand)]
enum ModulusCmd {
    /// Uniform convexity modulus estimate on an epsilon grid.
    Ucx {
        #[arg(long)]
        norm: String,
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 2_000)]
        pairs: usize,
    },
    /// Uniform smoothness modulus estimate on a tau grid.
    Smooth {
        #[arg(long)]
        norm: String,
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 2_000)]
        pairs: usize,
    },
    /// Empirical modulus profile of a single stage map.
    Map {
        #[arg(long, value_enum)]
        stage: StageArg,
        #[arg(long)]
        norm: String,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        bins: Vec<f64>,
        #[arg(long, default_value_t = 2_000)]
        pairs: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StageArg {
    Mazur,
    Entropy,
}

#[derive(Subcommand)]
enum HomeoCmd {
    /// Build a pipeline and run a small round-trip self-check.
    Build {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        q2: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Profile a pipeline's modulus of continuity.
    Profile {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        q2: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, default_value_t = 2_000)]
        pairs: usize,
        #[arg(long, value_delimiter = ',')]
        bins: Vec<f64>,
    },
    /// Sup-norm degeneracy probe.
    ProbeLinf {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    ViaL1,
    Direct,
}

#[derive(Subcommand)]
enum DualCmd {
    /// Supporting functional of a sphere point read from a vector file.
    Support {
        #[arg(long)]
        norm: String,
        #[arg(long, value_name = "FILE")]
        x: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                RunError::Config(_) => ExitCode::from(2),
                RunError::Task(latsphere::Error::SolverFailure { .. }) => ExitCode::from(3),
                RunError::Task(_) => ExitCode::from(2),
            }
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))
}

fn load_config(cli_config: &Option<PathBuf>) -> Result<ExperimentConfig, RunError> {
    let path = cli_config
        .as_ref()
        .ok_or_else(|| RunError::Config("this command needs --config".into()))?;
    let text = read_to_string(path)?;
    ExperimentConfig::from_toml_str(&text).map_err(|e| {
        // toml errors render with line/column information.
        RunError::Config(format!("{}: {e}", path.display()))
    })
}

fn load_vector(path: &Path) -> Result<Vec<f64>, RunError> {
    parse_vector(&read_to_string(path)?)
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<ExitCode, RunError> {
    if let Command::Emit { report, out_csv } = &cli.command {
        let text = read_to_string(report)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| RunError::Config(format!("{}: {e}", report.display())))?;
        let rows = runner::emit_plot_data(&value)?;
        write_file(out_csv, &(rows.join("\n") + "\n"))?;
        println!("wrote {}", out_csv.display());
        return Ok(ExitCode::SUCCESS);
    }

    let mut config = build_experiment(&cli)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let output = runner::run(&config)?;

    std::fs::create_dir_all(&cli.out)
        .map_err(|e| RunError::Config(format!("cannot create {}: {e}", cli.out.display())))?;
    let report_path = cli.out.join("report.json");
    let report_text =
        serde_json::to_string_pretty(&output.report).expect("report serializes") + "\n";
    write_file(&report_path, &report_text)?;
    if let Some((name, rows)) = &output.csv {
        let csv_path = cli.out.join(format!("{name}.csv"));
        write_file(&csv_path, &(rows.join("\n") + "\n"))?;
    }

    println!(
        "{}: {} (report: {})",
        output.report.task,
        serde_json::to_string(&output.report.summary).expect("summary serializes"),
        report_path.display()
    );
    Ok(match output.status {
        RunStatus::Ok => ExitCode::SUCCESS,
        RunStatus::Violation => ExitCode::from(1),
        RunStatus::NonConverged => ExitCode::from(3),
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text)
        .map_err(|e| RunError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Assemble the experiment: either the config's own `[task]` (`run`) or a task
/// built from subcommand flags against the config's space and norms.
fn build_experiment(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let task = match &cli.command {
        Command::Run => {
            let config = load_config(&cli.config)?;
            if config.task.is_none() {
                return Err(RunError::Config(
                    "run mode needs a [task] table in the config".into(),
                ));
            }
            return Ok(config);
        }
        Command::Mazur {
            cmd: MazurCmd::Verify { norm, p, pairs },
        } => TaskSpec::MazurVerify {
            norm: norm.clone(),
            p: *p,
            pairs: *pairs,
        },
        Command::Entropy { cmd } => match cmd {
            EntropyCmd::Solve { norm, h } => TaskSpec::EntropySolve {
                norm: norm.clone(),
                h: load_vector(h)?,
                tol: cli.tol.unwrap_or(1e-8),
            },
            EntropyCmd::Midpoint { norm, pairs } => TaskSpec::Midpoint {
                norm: norm.clone(),
                pairs: *pairs,
                tol: cli.tol.unwrap_or(1e-8),
            },
        },
        Command::Constants {
            cmd:
                ConstantsCmd::Estimate {
                    norm,
                    kind,
                    exponent,
                    tuples,
                    tuple_size,
                },
        } => TaskSpec::Constants {
            norm: norm.clone(),
            constant: match kind {
                ConstantArg::Concavity => ConstantKindSpec::Concavity,
                ConstantArg::Convexity => ConstantKindSpec::Convexity,
            },
            exponent: *exponent,
            tuples: *tuples,
            tuple_size: *tuple_size,
        },
        Command::Modulus { cmd } => match cmd {
            ModulusCmd::Ucx { norm, grid, pairs } => TaskSpec::Modulus {
                curve: CurveKind::Ucx,
                norm: norm.clone(),
                grid: grid.clone(),
                pairs: *pairs,
                p: None,
                stage: None,
            },
            ModulusCmd::Smooth { norm, grid, pairs } => TaskSpec::Modulus {
                curve: CurveKind::Smooth,
                norm: norm.clone(),
                grid: grid.clone(),
                pairs: *pairs,
                p: None,
                stage: None,
            },
            ModulusCmd::Map {
                stage,
                norm,
                p,
                bins,
                pairs,
            } => TaskSpec::Modulus {
                curve: CurveKind::Map,
                norm: norm.clone(),
                grid: bins.clone(),
                pairs: *pairs,
                p: *p,
                stage: Some(match stage {
                    StageArg::Mazur => StageKind::Mazur,
                    StageArg::Entropy => StageKind::Entropy,
                }),
            },
        },
        Command::Homeo { cmd } => match cmd {
            HomeoCmd::Build { from, to, q, q2, mode } => TaskSpec::Homeo {
                action: HomeoAction::Build,
                from: from.clone(),
                to: to.clone(),
                q: *q,
                q2: *q2,
                mode: mode.map(|m| match m {
                    ModeArg::ViaL1 => HomeoMode::ViaL1,
                    ModeArg::Direct => HomeoMode::Direct,
                }),
                pairs: 0,
                bins: vec![],
            },
            HomeoCmd::Profile {
                from,
                to,
                q,
                q2,
                mode,
                pairs,
                bins,
            } => TaskSpec::Homeo {
                action: HomeoAction::Profile,
                from: from.clone(),
                to: to.clone(),
                q: *q,
                q2: *q2,
                mode: mode.map(|m| match m {
                    ModeArg::ViaL1 => HomeoMode::ViaL1,
                    ModeArg::Direct => HomeoMode::Direct,
                }),
                pairs: *pairs,
                bins: bins.clone(),
            },
            HomeoCmd::ProbeLinf { n, eps } => {
                // The probe builds its own uniform space; a config is not
                // required.
                let task = TaskSpec::Probe { n: *n, eps: *eps };
                let config = match &cli.config {
                    Some(_) => {
                        let mut c = load_config(&cli.config)?;
                        c.task = Some(task);
                        c
                    }
                    None => ExperimentConfig {
                        version: CONFIG_VERSION,
                        seed: 0,
                        space: latsphere::config::SpaceSpec {
                            atoms: None,
                            weights: vec![1.0],
                        },
                        norms: BTreeMap::new(),
                        task: Some(task),
                    },
                };
                return Ok(config);
            }
        },
        Command::Dual {
            cmd: DualCmd::Support { norm, x },
        } => TaskSpec::DualSupport {
            norm: norm.clone(),
            x: load_vector(x)?,
            tol: cli.tol.unwrap_or(1e-8),
        },
        Command::Emit { .. } => unreachable!("handled above"),
    };

    let mut config = load_config(&cli.config)?;
    config.task = Some(task);
    Ok(config)
}
