use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use soseq::harness::{acceptance, first_problem, preset_toml, properties, run_scenario, write_outputs, Execution, RunOptions, ScenarioConfig, PRESETS};

#[derive(Parser)]
#[command(name = "soseq", version, about = "Global blind equalization by sum-of-squares relaxation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo scenario and write CSV rows plus a JSON summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the SNR in dB (`inf` for noiseless).
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output; the summary goes next to it with a `.json` extension.
        #[arg(long)]
        out: PathBuf,
        /// Write zero wall times so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
        /// Do not spread runs over threads.
        #[arg(long)]
        sequential: bool,
    },
    /// Inspect the built-in channels.
    Preset {
        #[command(subcommand)]
        command: PresetCommand,
    },
    /// Run the property suites; with `--acceptance`, also every acceptance
    /// scenario. Exits nonzero on any failure.
    Verify {
        #[arg(long)]
        acceptance: bool,
    },
    /// Write the relaxation of the first stream of run 0 in sparse text form.
    ExportSdp {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PresetCommand {
    List,
    /// Print a preset as a `[channel]` table.
    Show { name: String },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            snr,
            runs,
            seed,
            out,
            no_timing,
            sequential,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = snr {
                cfg.snr_db = s;
            }
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let opts = RunOptions {
                execution: if sequential {
                    Execution::Sequential
                } else {
                    Execution::Parallel
                },
                timing: !no_timing,
            };
            let result = run_scenario(&cfg, opts)?;
            let json = write_outputs(&out, &result.rows, &result.summary)?;
            for (name, s) in &result.summary.algorithms {
                let isi = s.isi_db.map_or("n/a".to_string(), |x| format!("{:.3} ± {:.3} dB", x.mean, x.stderr));
                let lin = s.isi_db_of_mean.map_or("n/a".to_string(), |x| format!("{x:.3} dB"));
                println!("{name:<20} ISI {isi}, linear mean {lin}  ({} rows, {} failed)", s.rows, s.failed);
            }
            println!("wrote {} and {}", out.display(), json.display());
            Ok(true)
        }
        Command::Preset { command } => {
            match command {
                PresetCommand::List => {
                    for (name, about) in PRESETS {
                        println!("{name:<10} {about}");
                    }
                }
                PresetCommand::Show { name } => print!("{}", preset_toml(&name)?),
            }
            Ok(true)
        }
        Command::Verify { acceptance: full } => {
            let mut ok = true;
            for p in properties::all(7) {
                println!("{}: {}: {}", p.name, if p.passed { "PASS" } else { "FAIL" }, p.detail);
                ok &= p.passed;
            }
            if full {
                for c in acceptance::run_all() {
                    println!("{c}");
                    ok &= c.passed;
                }
            }
            Ok(ok)
        }
        Command::ExportSdp { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let problem = first_problem(&cfg)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            problem.export(BufWriter::new(file))?;
            println!(
                "wrote {} ({} equalities, Gram size {})",
                out.display(),
                problem.equalities.len(),
                problem.dim_g
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
