//! Command-line runner for the twin-beam modulation scenarios.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 statistical validation
//! failure, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use twinbeam_cli::config::{ScenarioConfig, ScenarioKind};
use twinbeam_cli::report::{RunError, RunReport};
use twinbeam_cli::scenario::run_scenario;
use twinbeam_core::{shot_reference, synthesize_source, SourceSpec, TraceConfig};

#[derive(Parser)]
#[command(
    name = "twinbeam",
    about = "Simulates phase-modulated, multimode two-mode-squeezed twin beams",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the trace seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Produce the shot-noise calibration spectrum for a config's plan.
    ShotCalibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize and export the source quadrature traces of a config.
    ExportTraces {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the materialized default config for a scenario.
    PrintConfig {
        /// One of: fig2_sweep, fig3a_single_eom, fig3b_relative_phase,
        /// fig4_covariance, analytic_table, validate_pipelines.
        #[arg(long)]
        scenario: String,
    },
}

fn load_config(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<ScenarioConfig, i32> {
    let mut cfg = match ScenarioConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return Err(1);
        }
    };
    if let Some(s) = seed {
        cfg.trace.seed = s;
    }
    if let Some(o) = out {
        cfg.outputs = o.display().to_string();
    }
    if let Err(e) = cfg.validate() {
        eprintln!("config error: {e}");
        return Err(1);
    }
    Ok(cfg)
}

fn exit_for(err: &RunError) -> i32 {
    match err {
        RunError::Io(_) => 3,
        RunError::Core(_) | RunError::Other(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, seed, out } => {
            match load_config(&config, seed, out.as_deref()) {
                Err(code) => code,
                Ok(cfg) => {
                    let out_dir = PathBuf::from(&cfg.outputs);
                    match run_scenario(&cfg, &out_dir) {
                        Err(e) => {
                            eprintln!("run error: {e}");
                            exit_for(&e)
                        }
                        Ok(mut report) => match report.finalize() {
                            Err(e) => {
                                eprintln!("run error: {e}");
                                exit_for(&e)
                            }
                            Ok(code) => {
                                for c in &report.checks {
                                    println!(
                                        "[{}] {} - {}",
                                        if c.pass { "PASS" } else { "FAIL" },
                                        c.name,
                                        c.detail
                                    );
                                }
                                println!(
                                    "{}: wrote {} files to {}",
                                    if code == 0 { "ok" } else { "FAILED" },
                                    report.files.len(),
                                    out_dir.display()
                                );
                                code
                            }
                        },
                    }
                }
            }
        }
        Command::Validate { config } => match load_config(&config, None, None) {
            Err(code) => code,
            Ok(cfg) => {
                println!("config ok: scenario {}, hash {}", cfg.scenario.id(), cfg.hash());
                0
            }
        },
        Command::ShotCalibrate { config, out } => match load_config(&config, None, out.as_deref())
        {
            Err(code) => code,
            Ok(cfg) => {
                let shot_cfg = TraceConfig {
                    seed: cfg.trace.seed ^ 0x53484f54,
                    source: SourceSpec { gain: 1.0, eta: 0.0 },
                    ..cfg.trace_config()
                };
                match shot_reference(&shot_cfg, &cfg.plan.to_plan()) {
                    Err(e) => {
                        eprintln!("shot calibration error: {e}");
                        1
                    }
                    Ok(spec) => {
                        let out_dir = PathBuf::from(&cfg.outputs);
                        let mut report =
                            RunReport::new("shot_calibrate", &cfg.hash(), cfg.trace.seed, &out_dir);
                        let flat = spec
                            .psd
                            .iter()
                            .zip(&spec.stderr)
                            .all(|(p, s)| (p - 1.0).abs() < 5.0 * s);
                        let r = report
                            .write_file("shot_reference.csv", &spec.to_csv())
                            .and_then(|_| {
                                report.check(
                                    "shot spectrum flat at 1",
                                    flat,
                                    format!("{} bins", spec.psd.len()),
                                );
                                report.finalize()
                            });
                        match r {
                            Err(e) => {
                                eprintln!("shot calibration error: {e}");
                                exit_for(&e)
                            }
                            Ok(code) => {
                                println!("wrote shot reference to {}", out_dir.display());
                                code
                            }
                        }
                    }
                }
            }
        },
        Command::ExportTraces { config, out } => match load_config(&config, None, None) {
            Err(code) => code,
            Ok(cfg) => {
                let tc = TraceConfig {
                    source: SourceSpec { eta: 0.0, ..cfg.source },
                    ..cfg.trace_config()
                };
                match synthesize_source(&tc)
                    .map_err(RunError::Core)
                    .and_then(|traces| {
                        std::fs::create_dir_all(&out).map_err(RunError::Io)?;
                        twinbeam_core::export_traces(&traces, &out.join("traces"))
                            .map_err(RunError::Core)
                    }) {
                    Err(e) => {
                        eprintln!("trace export error: {e}");
                        exit_for(&e)
                    }
                    Ok(()) => {
                        println!("wrote {}", out.join("traces.f64").display());
                        0
                    }
                }
            }
        },
        Command::PrintConfig { scenario } => match ScenarioKind::from_id(&scenario) {
            None => {
                eprintln!(
                    "unknown scenario `{scenario}`; expected one of: {}",
                    ScenarioKind::ALL
                        .iter()
                        .map(|k| k.id())
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                1
            }
            Some(kind) => {
                println!("{}", ScenarioConfig::default_for(kind).to_json());
                0
            }
        },
    };
    ExitCode::from(code as u8)
}
