use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use vortex_tunnel::harness::{self, Scenario};
use vortex_tunnel::Result;

#[derive(Parser)]
#[command(name = "vortun", version, about = "Induced vortex tunneling: simulation and analytic checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (nothing is written when omitted)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Integration tolerance, overriding the config
    #[arg(long, value_name = "X")]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve the mode ensemble through one pulse
    Simulate(Common),
    /// Run every point of the scenario's sweep section
    Sweep(Common),
    /// Film-parameter estimates and operating-window checks
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Print JSON instead of the text table
        #[arg(long)]
        json: bool,
    },
    /// Instanton saddle point
    Instanton(Common),
    /// Core-fermion kinetic solution and momentum transfer
    Fermions(Common),
    /// Run verification suites; exits 1 if any check fails
    Verify {
        #[command(flatten)]
        common: Common,
        /// lattice-sum, materials, fermion, saddle or all
        #[arg(default_value = "all")]
        suite: String,
    },
}

fn load_or_default<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => harness::parse_config(&std::fs::read_to_string(p)?),
        None => Ok(T::default()),
    }
}

fn scenario(c: &Common) -> Result<Scenario> {
    let path = c
        .config
        .as_deref()
        .ok_or_else(|| vortex_tunnel::Error::InvalidParameter("--config is required".into()))?;
    let mut s = Scenario::from_file(path)?;
    if let Some(tol) = c.tol {
        s.sim.tol = tol;
    }
    Ok(s)
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn save_json<T: Serialize>(out: &Option<PathBuf>, name: &str, v: &T) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(Path::new(dir).join(name), serde_json::to_string_pretty(v)? + "\n")?;
    }
    Ok(())
}

fn execute(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Simulate(c) => {
            let s = scenario(&c)?;
            let (_, summary) = harness::with_threads(c.threads, || harness::run_simulate(&s, c.out.as_deref()))??;
            print_json(&summary)?;
        }
        Cmd::Sweep(c) => {
            let s = scenario(&c)?;
            let summary = harness::with_threads(c.threads, || harness::run_sweep(&s, c.out.as_deref()))??;
            print_json(&summary)?;
        }
        Cmd::Estimate { common, json } => {
            let r = harness::run_estimate(&load_or_default(&common.config)?)?;
            save_json(&common.out, "estimate.json", &r)?;
            if json {
                print_json(&r)?;
            } else {
                print!("{}", r.to_text());
            }
        }
        Cmd::Instanton(c) => {
            let r = harness::run_instanton(&load_or_default(&c.config)?)?;
            save_json(&c.out, "instanton.json", &r)?;
            print_json(&r)?;
        }
        Cmd::Fermions(c) => {
            let cfg = load_or_default(&c.config)?;
            let r = harness::with_threads(c.threads, || harness::run_fermions(&cfg, c.out.as_deref()))??;
            print_json(&r)?;
        }
        Cmd::Verify { common, suite } => {
            let r = harness::with_threads(common.threads, || harness::run_verify(&suite))??;
            save_json(&common.out, "verify.json", &r)?;
            for c in &r.checks {
                println!(
                    "{} {:<48} measured {:>12.4e}  tolerance {:.1e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.tolerance
                );
            }
            return Ok(r.pass);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
