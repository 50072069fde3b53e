use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use fwdsmile_cli::commands;
use fwdsmile_cli::runspec::{load_config, RunSpec, SpecDraft};

/// Heston forward-smile toolkit: regime classification, large-maturity
/// price/smile asymptotics, SVI limits and exact Fourier benchmarks.
#[derive(Parser)]
#[command(name = "fwdsmile", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the correlation regime and every derived constant.
    Regime(CommonArgs),
    /// Asymptotic forward-start call prices on a (tau, k) grid (CSV).
    Price(CommonArgs),
    /// Asymptotic forward smile on a (tau, k) grid (CSV).
    Smile(CommonArgs),
    /// Limiting SVI parameters and the identity check against the
    /// zeroth-order smile (CSV).
    Svi(CommonArgs),
    /// Exact Fourier reference vs the asymptotics, with error columns (CSV).
    Compare(CommonArgs),
    /// Re-create the data behind one of the study figures (fig1..fig8).
    Reproduce {
        /// Which figure preset to run (fig1..fig8).
        figure: String,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Model parameters as `v,theta,kappa,xi,rho`.
    #[arg(long)]
    params: Option<String>,
    /// Forward-start date (years).
    #[arg(long)]
    t: Option<f64>,
    /// Maturity; repeat the flag for several maturities.
    #[arg(long = "tau")]
    tau: Vec<f64>,
    #[arg(long = "k-min", allow_hyphen_values = true)]
    k_min: Option<f64>,
    #[arg(long = "k-max", allow_hyphen_values = true)]
    k_max: Option<f64>,
    #[arg(long = "k-count")]
    k_count: Option<usize>,
    /// Expansion order to emit: 0, 1 or 2.
    #[arg(long)]
    order: Option<u8>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key-value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Contour abscissa override for the Fourier pricer.
    #[arg(long, allow_hyphen_values = true)]
    damping: Option<f64>,
    /// Enable the Monte Carlo oracle columns in `compare`.
    #[arg(long = "mc-check")]
    mc_check: bool,
    /// Seed for the Monte Carlo oracle.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_params(text: &str) -> Result<(f64, f64, f64, f64, f64)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err(anyhow!("--params expects v,theta,kappa,xi,rho"));
    }
    let mut vals = [0.0; 5];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part
            .parse::<f64>()
            .with_context(|| format!("bad number `{part}` in --params"))?;
    }
    Ok((vals[0], vals[1], vals[2], vals[3], vals[4]))
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunSpec> {
        let mut draft = SpecDraft {
            t: self.t,
            tau: if self.tau.is_empty() {
                None
            } else {
                Some(self.tau.clone())
            },
            k_min: self.k_min,
            k_max: self.k_max,
            k_count: self.k_count,
            order: self.order,
            out: self.out.clone(),
            damping: self.damping,
            mc_check: if self.mc_check { Some(true) } else { None },
            seed: self.seed,
            ..SpecDraft::default()
        };
        if let Some(text) = &self.params {
            let (v, theta, kappa, xi, rho) = parse_params(text)?;
            draft.v = Some(v);
            draft.theta = Some(theta);
            draft.kappa = Some(kappa);
            draft.xi = Some(xi);
            draft.rho = Some(rho);
        }
        if let Some(path) = &self.config {
            draft = draft.or(load_config(path)?);
        }
        draft.resolve()
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Regime(args) => {
            let spec = args.resolve()?;
            let report = commands::cmd_regime(&spec)?;
            match &spec.out {
                Some(path) => std::fs::write(path, report)?,
                None => print!("{report}"),
            }
            Ok(())
        }
        Command::Price(args) => {
            let spec = args.resolve()?;
            commands::cmd_price(&spec)?.emit(spec.out.as_deref())
        }
        Command::Smile(args) => {
            let spec = args.resolve()?;
            commands::cmd_smile(&spec)?.emit(spec.out.as_deref())
        }
        Command::Svi(args) => {
            let spec = args.resolve()?;
            commands::cmd_svi(&spec)?.emit(spec.out.as_deref())
        }
        Command::Compare(args) => {
            let spec = args.resolve()?;
            commands::cmd_compare(&spec)?.emit(spec.out.as_deref())
        }
        Command::Reproduce { figure, out } => {
            commands::cmd_reproduce(&figure)?.emit(out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code_for(&err))
        }
    }
}
