//! `dqscore` command-line front end.
//!
//! Exit codes: 0 on success, 1 when the configuration or arguments are
//! invalid, 2 when a run fails.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dqscore::harness::{bench, emit_report, generate_pump_stream, sensitivity_sweep, ReportFormat, Variant};
use dqscore::mutation::{apply_mutation_plan, write_ledger};
use dqscore::orchestrator::{develop_phase, process_window, store_load, store_save, Mode, PipelineState};
use dqscore::windowing::{flatten, read_stream, segment_stream, write_csv, Reading, StreamFormat};
use dqscore::{EngineConfig, Error};

#[derive(Parser)]
#[command(name = "dqscore", version, about = "Drift-aware data-quality scoring")]
struct Cli {
    /// YAML engine configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact store directory.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Overrides the engine, generator and mutation seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (or directory for `bench`). Standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the first artifact bundle and save it to the store.
    Develop {
        /// Training stream (CSV or JSONL). Without it, the leading
        /// `experiment.train_windows` windows of the synthetic stream are used.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Score a stream with the latest stored bundle, one JSON line per window.
    Run {
        #[arg(long, default_value = "adaptive")]
        mode: Mode,
        /// Stream file, or `-` for standard input.
        #[arg(long, default_value = "-")]
        input: String,
        /// Encoding of standard input.
        #[arg(long, default_value = "csv", value_parser = ["csv", "jsonl"])]
        format: String,
    },
    /// Compare pipeline variants on the synthetic stream.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "adaptive,static,standard,frozen")]
        variants: Vec<String>,
        /// Per-window record format.
        #[arg(long, default_value = "csv", value_parser = ["csv", "jsonl"])]
        format: String,
    },
    /// Count detections on the synthetic stream for several significance levels.
    Sweep {
        /// Defaults to `experiment.taus`.
        #[arg(long, value_delimiter = ',')]
        taus: Vec<f64>,
    },
    /// Apply the configured mutation plan to a stream file.
    Mutate {
        #[arg(long)]
        input: PathBuf,
        /// Where to write the fault ledger (JSONL).
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Write the synthetic pump stream as CSV.
    Gen,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Self { code: 1, message: message.to_string() }
    }

    fn runtime(message: impl ToString) -> Self {
        Self { code: 2, message: message.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Plan(_) => Self::config(e),
            _ => Self::runtime(e),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<EngineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => EngineConfig::load(path).map_err(Failure::config)?,
        None => EngineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.generator.seed = seed;
        cfg.mutation.seed = seed;
    }
    cfg.validate().map_err(Failure::config)?;
    Ok(cfg)
}

fn require_store(cli: &Cli) -> CliResult<&Path> {
    cli.store
        .as_deref()
        .ok_or_else(|| Failure::config("--store is required for this command"))
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::runtime(format!("{}: {e}", p.display())))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_file(path: &Path) -> CliResult<Vec<Reading<f64>>> {
    let file = File::open(path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    Ok(read_stream(BufReader::new(file), StreamFormat::from_path(path))?)
}

fn execute(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Gen => {
            let readings = generate_pump_stream(&cfg.generator)?;
            let mut w = output(out)?;
            write_csv(&readings, &mut w)?;
            w.flush()?;
        }
        Command::Develop { input } => {
            let store = require_store(&cli)?;
            let windows = match input {
                Some(path) => segment_stream(&read_file(path)?, cfg.window_len)?,
                None => {
                    let mut windows = segment_stream(&generate_pump_stream(&cfg.generator)?, cfg.window_len)?;
                    windows.truncate(cfg.experiment.train_windows);
                    windows
                }
            };
            let outcome = develop_phase(&windows, &cfg)?;
            let dir = store_save(&outcome.bundle, store)?;
            let summary = serde_json::json!({
                "version": outcome.bundle.version.version,
                "path": dir,
                "iterations": outcome.iterations,
                "oracle": outcome.oracle,
                "faults": outcome.ledger.len(),
            });
            let mut w = output(out)?;
            writeln!(w, "{}", serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
            w.flush()?;
        }
        Command::Run { mode, input, format } => {
            let store = require_store(&cli)?;
            let readings = if input == "-" {
                let fmt = if format == "jsonl" { StreamFormat::Jsonl } else { StreamFormat::Csv };
                read_stream(io::stdin().lock(), fmt)?
            } else {
                read_file(Path::new(input))?
            };
            let windows = segment_stream(&readings, cfg.window_len)?;
            let bundle = store_load(store, None)?;
            let mut state = PipelineState::new(*mode, bundle, &cfg)?.with_store(store.to_path_buf());
            let mut w = output(out)?;
            let mut failed = 0usize;
            for window in &windows {
                match process_window(&mut state, window) {
                    Ok(scored) => {
                        if let Some(a) = scored.adaptation.as_ref().and_then(|a| a.failure.as_ref()) {
                            eprintln!("window {}: adaptation failed: {a}", window.window_id);
                        }
                        writeln!(w, "{}", serde_json::to_string(&scored.line()).expect("line serializes"))?;
                    }
                    Err(e) => {
                        failed += 1;
                        eprintln!("{e}");
                    }
                }
            }
            w.flush()?;
            if failed > 0 {
                return Err(Failure::runtime(format!("{failed} of {} windows failed", windows.len())));
            }
        }
        Command::Bench { variants, format } => {
            let variants = variants
                .iter()
                .map(|v| parse_variant(v))
                .collect::<CliResult<Vec<_>>>()?;
            let report = bench(&variants, &cfg, &cfg.generator)?;
            let ext = format.as_str();
            let records_format = if ext == "jsonl" { ReportFormat::Jsonl } else { ReportFormat::Csv };
            if let Some(dir) = out {
                for r in &report.reports {
                    let name = variant_name(r.params.variant);
                    emit_report(r, records_format, &dir.join(format!("{name}.{ext}")))?;
                    emit_report(r, ReportFormat::SummaryJson, &dir.join(format!("{name}.summary.json")))?;
                }
            }
            let mut w = io::stdout().lock();
            writeln!(w, "variant\twindows\tfinal_mae\tfinal_r2\ttotal_ms\tretrains\tdetections\tevaluations\tversion")?;
            for r in &report.reports {
                let s = &r.summary;
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{:.1}\t{}\t{}\t{}\t{}",
                    variant_name(s.variant),
                    s.n_windows,
                    fmt_opt(s.final_mae),
                    fmt_opt(s.final_r2),
                    s.total_ns as f64 / 1e6,
                    s.retrain_count,
                    s.detection_count,
                    s.evaluation_count,
                    s.final_version
                )?;
            }
        }
        Command::Sweep { taus } => {
            let taus = if taus.is_empty() { cfg.experiment.taus.clone() } else { taus.clone() };
            let report = sensitivity_sweep(&taus, &cfg, &cfg.generator)?;
            let mut w = output(out)?;
            let summary: Vec<_> = report
                .taus
                .iter()
                .zip(&report.counts)
                .map(|(t, c)| serde_json::json!({ "tau": t, "detections": c }))
                .collect();
            writeln!(w, "{}", serde_json::to_string_pretty(&summary).expect("sweep serializes"))?;
            w.flush()?;
        }
        Command::Mutate { input, ledger } => {
            let windows = segment_stream(&read_file(input)?, cfg.window_len)?;
            let (mutated, records) = apply_mutation_plan(&windows, &cfg.mutation, &cfg.constraints()?)?;
            let mut w = output(out)?;
            write_csv(&flatten(&mutated), &mut w)?;
            w.flush()?;
            if let Some(path) = ledger {
                let mut l = output(Some(path))?;
                write_ledger(&records, &mut l)?;
                l.flush()?;
            }
            eprintln!("mutated {} of {} windows", records.len(), windows.len());
        }
    }
    Ok(())
}

fn parse_variant(s: &str) -> CliResult<Variant> {
    match s.trim() {
        "frozen" => Ok(Variant::Frozen),
        other => other.parse::<Mode>().map(Variant::from).map_err(Failure::config),
    }
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Adaptive => "adaptive",
        Variant::Static => "static",
        Variant::Standard => "standard",
        Variant::Frozen => "frozen",
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}
