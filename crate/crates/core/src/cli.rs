//! Command-line interface.
//!
//! ```text
//! apmix run --preset volcano --nx 64 --nv 16 --eps 1e-3 --order 2 --steps 500 --out outdir
//! apmix convergence --preset accuracy --nx-list 16,32,64 --eps-list 1,1e-3,1e-5
//! apmix ap-test --preset volcano --nx 64 --nv 16 --eps-list 1,1e-2,1e-4 --steps 50
//! apmix limit-run --preset dam --nx 32 --nv 16 --steps 10 --out limitdir
//! ```
//!
//! Failures print one line `error kind=<kind> message=<text>` to stderr and
//! exit with status 1 (2 for usage errors).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::Order;
use crate::harness::{ap_csv, ap_test, convergence_csv, convergence_study, limit_run, run};
use crate::limit::LimitFlux;
use crate::output::write_text;
use crate::presets::{EpsProfile, ExperimentPreset};

#[derive(Debug, Parser)]
#[command(name = "apmix", version, about = "AP solver for multi-size particles in an incompressible fluid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a preset or a config file.
    Run(RunArgs),
    /// Grid convergence study; writes the order table as CSV.
    Convergence(ConvergenceArgs),
    /// Twin runs across Stokes numbers; writes Maxwellian-distance series.
    ApTest(ApArgs),
    /// Run the limit system on preset data.
    LimitRun(LimitArgs),
}

/// Flags that override the preset defaults or the config file.
#[derive(Debug, Args, Default)]
struct Overrides {
    /// accuracy, volcano, dam or injection.
    #[arg(long)]
    preset: Option<ExperimentPreset>,
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nv: Option<usize>,
    #[arg(long)]
    re: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// 1 or 2.
    #[arg(long)]
    order: Option<u8>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Worker threads of the cell-parallel kernels.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long)]
    eps: Option<f64>,
    /// constant or ex30.
    #[arg(long)]
    eps_profile: Option<EpsProfile>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    snapshot_every: Option<usize>,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    nx_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,1e-3,1e-5")]
    eps_list: Vec<f64>,
    /// CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ApArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long, value_delimiter = ',', default_value = "1,1e-2,1e-4,1e-5")]
    eps_list: Vec<f64>,
    /// CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LimitArgs {
    #[command(flatten)]
    common: Overrides,
    /// kinetic or upwind.
    #[arg(long)]
    limit_flux: Option<LimitFlux>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    snapshot_every: Option<usize>,
}

impl Overrides {
    /// Config file or preset defaults with the flags applied on top.
    fn config(&self, default_preset: ExperimentPreset) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::for_preset(self.preset.unwrap_or(default_preset)),
        };
        if let Some(p) = self.preset {
            if p != cfg.preset {
                let mut fresh = RunConfig::for_preset(p);
                fresh.nx = cfg.nx;
                fresh.nv = cfg.nv;
                cfg = fresh;
            }
        }
        if let Some(v) = self.nx {
            cfg.nx = v;
        }
        if let Some(v) = self.nv {
            cfg.nv = v;
        }
        if let Some(v) = self.re {
            cfg.re = v;
        }
        if let Some(v) = self.kappa {
            cfg.kappa = v;
        }
        if let Some(v) = self.order {
            cfg.order = Order::from_u8(v)?;
        }
        if let Some(v) = self.tmax {
            cfg.tmax = v;
            cfg.steps = None;
        }
        if let Some(v) = self.steps {
            cfg.steps = Some(v);
        }
        Ok(cfg)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(a) => {
            let mut cfg = a.common.config(ExperimentPreset::Volcano)?;
            if let Some(v) = a.eps {
                cfg.eps = v;
            }
            if let Some(v) = a.eps_profile {
                cfg.eps_profile = v;
            }
            if let Some(v) = a.snapshot_every {
                cfg.snapshot_every = v;
            }
            let out = run(&cfg, a.out.as_deref())?;
            let last = out.rows.last().expect("initial row");
            println!(
                "preset={} steps={} time={:.6e} max_u={:.6e} divergence={:.3e}",
                cfg.preset,
                last.step,
                last.time,
                last.max_u,
                last.divergence
            );
            Ok(())
        }
        Command::Convergence(a) => {
            let cfg = a.common.config(ExperimentPreset::Accuracy)?;
            let rows = convergence_study(&cfg, &a.nx_list, &a.eps_list)?;
            emit(a.out.as_deref(), &convergence_csv(&rows))
        }
        Command::ApTest(a) => {
            let mut cfg = a.common.config(ExperimentPreset::Volcano)?;
            if a.common.steps.is_none() && a.common.tmax.is_none() && a.common.config.is_none() {
                cfg.steps = Some(50);
            }
            let series = ap_test(&cfg, &a.eps_list)?;
            emit(a.out.as_deref(), &ap_csv(&series))
        }
        Command::LimitRun(a) => {
            let mut cfg = a.common.config(ExperimentPreset::Dam)?;
            if let Some(v) = a.limit_flux {
                cfg.limit_flux = v;
            }
            if let Some(v) = a.snapshot_every {
                cfg.snapshot_every = v;
            }
            let (rows, _) = limit_run(&cfg, a.out.as_deref())?;
            let last = rows.last().expect("initial row");
            println!(
                "preset={} steps={} time={:.6e} max_u={:.6e} divergence={:.3e} mass={:.16e}",
                cfg.preset, last.step, last.time, last.max_u, last.divergence, last.mass
            );
            Ok(())
        }
    }
}

fn threads(command: &Command) -> Option<usize> {
    match command {
        Command::Run(a) => a.common.threads,
        Command::Convergence(a) => a.common.threads,
        Command::ApTest(a) => a.common.threads,
        Command::LimitRun(a) => a.common.threads,
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let msg = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error kind=usage message={}", one_line(msg));
            return 2;
        }
    };
    let result = match threads(&cli.command) {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli.command)),
            Err(e) => Err(Error::InvalidParams(format!("cannot build a pool of {n} threads: {e}"))),
        },
        None => execute(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error kind={} message={}", e.kind(), one_line(&e.to_string()));
            1
        }
    }
}
