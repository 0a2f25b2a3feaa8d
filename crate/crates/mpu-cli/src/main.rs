use clap::{Parser, Subcommand};
use mpu_cli::dataset::TargetKind;
use mpu_cli::fit::{self, FitOptions};
use mpu_cli::reports;
use mpu_core::{ProblemSpec, SolveError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Projection-unit lab: function fitting, solver demos, prox verification.
#[derive(Parser)]
#[command(name = "mpu-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train shallow networks with each activation on a fixed target and
    /// write one CSV row per (activation, width, seed, lr) cell.
    Fit {
        /// Target function: `cone` or `leaky2d`.
        #[arg(long, default_value = "cone")]
        target: String,
        /// Hidden-state widths, comma separated.
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<usize>>,
        /// Training seeds, comma separated.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Learning rates; one CSV row per rate.
        #[arg(long, value_delimiter = ',')]
        lr: Option<Vec<f64>>,
        #[arg(long)]
        batch: Option<usize>,
        /// Directory for the CSV report.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Full experiment sizes (40000/10000 samples, 50 epochs).
        #[arg(long)]
        paper_scale: bool,
        /// Comma-separated subset of activations to run.
        #[arg(long, value_delimiter = ',')]
        activations: Option<Vec<String>>,
    },
    /// Check that unrolled layers replay the solver exactly, on built-in
    /// instances or a problem JSON document.
    PgdDemo {
        /// Problem document `{n, P, q, set, gamma}`.
        #[arg(long)]
        problem: Option<PathBuf>,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the closed-form prox catalog against the brute-force oracle.
    ProxVerify {
        /// Restrict to one catalog entry.
        #[arg(long)]
        entry: Option<String>,
        /// Evaluation points per entry.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cone-projection oracle suite.
    ConeVerify {
        /// Random points per (m, tan_alpha) combination.
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = 1e-6)]
        resolution: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print worst-case operation counts per projection.
    Macs {
        /// Cone dimensions, comma separated (each at least 2).
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<usize>,
    },
}

enum CmdError {
    /// Bad flags or malformed input files: exit code 2.
    Usage(String),
    /// A verification failed or an internal step errored: exit code 1.
    Failed(String),
}

fn emit_report<T: serde::Serialize>(report: &T, out: Option<&PathBuf>) -> Result<(), CmdError> {
    let json = serde_json::to_string_pretty(report).expect("reports serialize");
    println!("{json}");
    if let Some(path) = out {
        std::fs::write(path, &json)
            .map_err(|e| CmdError::Failed(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cmd: Cmd) -> Result<bool, CmdError> {
    match cmd {
        Cmd::Fit {
            target,
            widths,
            seeds,
            epochs,
            lr,
            batch,
            out,
            paper_scale,
            activations,
        } => {
            let kind = TargetKind::parse(&target)
                .ok_or_else(|| CmdError::Usage(format!("unknown target `{target}`")))?;
            let mut opts = if paper_scale {
                FitOptions::paper_scale(kind)
            } else {
                FitOptions::desk(kind)
            };
            if let Some(w) = widths {
                opts.widths = w;
            }
            if let Some(s) = seeds {
                opts.seeds = s;
            }
            if let Some(e) = epochs {
                opts.epochs = e;
            }
            if let Some(l) = lr {
                opts.learning_rates = l;
            }
            if let Some(b) = batch {
                opts.batch = b;
            }
            if let Some(a) = activations {
                opts.activations = a;
            }
            if opts.widths.is_empty() || opts.seeds.is_empty() || opts.learning_rates.is_empty() {
                return Err(CmdError::Usage(
                    "widths, seeds and lr must be nonempty".into(),
                ));
            }
            let records = fit::run_fit(&opts).map_err(|e| match e {
                mpu_core::NetError::BadActivation(msg) => CmdError::Usage(msg),
                other => CmdError::Failed(other.to_string()),
            })?;
            let path = out.join(format!("fit_{}.csv", kind.name()));
            fit::write_csv(&records, &path)
                .map_err(|e| CmdError::Failed(format!("writing {}: {e}", path.display())))?;
            let mut stdout = std::io::stdout().lock();
            fit::print_summary(&records, &mut stdout)
                .map_err(|e| CmdError::Failed(e.to_string()))?;
            println!("wrote {} rows to {}", records.len(), path.display());
            Ok(true)
        }
        Cmd::PgdDemo { problem, out } => {
            let result = match &problem {
                None => reports::pgd_demo_builtin(),
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CmdError::Usage(format!("reading {}: {e}", path.display())))?;
                    let spec: ProblemSpec = serde_json::from_str(&text)
                        .map_err(|e| CmdError::Usage(format!("malformed problem JSON: {e}")))?;
                    reports::pgd_demo_from_spec(&spec)
                }
            };
            match result {
                Ok(report) => {
                    emit_report(&report, out.as_ref())?;
                    Ok(report.pass)
                }
                Err(err @ SolveError::ContractionFailed { .. }) => {
                    let structured = serde_json::json!({
                        "error": { "kind": "contraction", "message": err.to_string() }
                    });
                    emit_report(&structured, out.as_ref())?;
                    Ok(false)
                }
                Err(other) => Err(CmdError::Failed(other.to_string())),
            }
        }
        Cmd::ProxVerify {
            entry,
            samples,
            out,
        } => {
            let report =
                reports::prox_verify(entry.as_deref(), samples).map_err(CmdError::Usage)?;
            emit_report(&report, out.as_ref())?;
            Ok(report.pass)
        }
        Cmd::ConeVerify {
            points,
            resolution,
            out,
        } => {
            if !(resolution.is_finite() && resolution > 0.0) {
                return Err(CmdError::Usage(format!(
                    "resolution {resolution} must be positive"
                )));
            }
            let report = reports::cone_verify(points, resolution);
            emit_report(&report, out.as_ref())?;
            Ok(report.pass)
        }
        Cmd::Macs { m } => {
            if let Some(bad) = m.iter().find(|&&v| v < 2) {
                return Err(CmdError::Usage(format!("dimension {bad} is below 2")));
            }
            let table = reports::macs_table(&m).map_err(CmdError::Usage)?;
            print!("{table}");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CmdError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
