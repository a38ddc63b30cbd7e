use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use resvr::harness::{self, RunConfig};
use resvr::mc::fmt_fom;
use resvr::{Error, Result};

#[derive(Parser)]
#[command(name = "resvr", about = "Hybrid deterministic/Monte Carlo shielding workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    /// Enable the resonance factor with this exponent.
    #[arg(long = "M")]
    m: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    histories: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the res, dilute and fine libraries.
    Xsgen(Overrides),
    /// Forward deterministic solves.
    DetForward(Overrides),
    /// Adjoint source and adjoint deterministic solve.
    DetAdjoint(Overrides),
    /// Importance map, weight windows and biased source.
    BuildVr(Overrides),
    /// Monte Carlo run and reports.
    McRun(Overrides),
    /// All stages in order.
    Pipeline(Overrides),
    /// Resonance-factor runs over a list of M values.
    SweepM {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated exponents.
        #[arg(long = "M", value_delimiter = ',', required = true)]
        m: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        histories: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Side-by-side report of finished run directories.
    Compare {
        dirs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the built-in benchmark configuration.
    BenchmarkConfig {
        #[arg(long)]
        no_plate: bool,
    },
}

fn load(o: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&o.config)?;
    if let Some(m) = o.m {
        cfg.vr.enabled = true;
        cfg.vr.adjoint.resonance_factor.enabled = true;
        cfg.vr.adjoint.resonance_factor.m = m;
    }
    if let Some(s) = o.seed {
        cfg.mc.seed = s;
    }
    if let Some(n) = o.histories {
        cfg.mc.histories = n;
    }
    if let Some(w) = o.workers {
        cfg.mc.workers = w;
    }
    if let Some(d) = &o.out {
        cfg.output_dir = d.clone();
    }
    Ok(cfg)
}

fn print_hashes(h: &std::collections::BTreeMap<String, String>) {
    for (name, hash) in h {
        println!("{name} {hash}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Xsgen(o) => print_hashes(&harness::stage_xsgen(&load(&o)?)?),
        Command::DetForward(o) => print_hashes(&harness::stage_forward(&load(&o)?)?),
        Command::DetAdjoint(o) => print_hashes(&harness::stage_adjoint(&load(&o)?)?),
        Command::BuildVr(o) => print_hashes(&harness::stage_build_vr(&load(&o)?)?),
        Command::McRun(o) => print_hashes(&harness::stage_mc(&load(&o)?)?),
        Command::Pipeline(o) => {
            let r = harness::run_pipeline(&load(&o)?)?;
            print!("{}", harness::rows_csv(&r.rows));
        }
        Command::SweepM {
            config,
            m,
            seed,
            histories,
            workers,
            out,
        } => {
            let o = Overrides {
                config,
                m: None,
                seed,
                histories,
                workers,
                out,
            };
            let r = harness::sweep_m(&load(&o)?, &m)?;
            print!("{}", harness::rows_csv(&r.rows));
            for f in &r.failures {
                eprintln!("M={} failed: {}", f.m, f.message);
            }
        }
        Command::Compare { dirs, out } => {
            let refs: Vec<&std::path::Path> = dirs.iter().map(|d| d.as_path()).collect();
            let c = harness::compare_cases(&refs)?;
            print!("{}", c.rows_csv());
            if let Some(d) = out {
                std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
                harness::write_text(&d.join("compare.csv"), &c.rows_csv())?;
                harness::write_text(&d.join("centerline_ratio.csv"), &c.ratio_csv())?;
            } else {
                for (cell, r) in &c.ratios {
                    let v: Vec<String> = r.iter().map(|x| fmt_fom(*x)).collect();
                    println!("centerline {cell} {}", v.join(" "));
                }
            }
        }
        Command::BenchmarkConfig { no_plate } => print!("{}", RunConfig::benchmark(!no_plate).to_toml()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
