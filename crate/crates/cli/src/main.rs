use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use concentrator::experiment::{emit_plot_data, fmt_f64, parse_config, run_experiment, RunOptions, Stage};
use concentrator::radial::ProfileSet;

#[derive(Parser)]
#[command(name = "concentrator", version, about = "Lyapunov-Schmidt reduction lab for KGM and SM systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config.
    Run {
        config: PathBuf,
        /// Last stage to run: profiles, geometry-check, sweep, fit or search.
        #[arg(long, default_value = "search")]
        stage: Stage,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the ground-state constants for (lambda, p, q).
    Constants {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
    },
    /// Write plot tables for a finished experiment directory.
    PlotData { dir: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, stage, threads, out } => {
            let cfg = parse_config(&config).with_context(|| format!("reading {}", config.display()))?;
            println!("{}", cfg.to_json());
            let summary = run_experiment(&cfg, &RunOptions { stage, threads, out })?;
            let done: Vec<&str> = summary.completed.iter().map(|s| s.name()).collect();
            println!("completed: {}", done.join(", "));
            if let Some(fit) = &summary.fit {
                println!(
                    "fit ({}): c1 = {}, c2 = {}, c3 = {}, c3/(alpha/6) = {}, below noise = {}",
                    fit.design,
                    fmt_f64(fit.fit.c1),
                    fmt_f64(fit.fit.c2),
                    fmt_f64(fit.fit.c3),
                    fmt_f64(fit.c3_over_alpha_over_6),
                    fit.c3_below_noise
                );
            }
            if let Some(search) = &summary.search {
                println!("search: {} ({} tracks)", search.report.status, search.report.tracks.len());
            }
            println!("output: {}", summary.out_dir.display());
        }
        Command::Constants { lambda, p, q } => {
            let set = ProfileSet::compute(lambda, p, q)?;
            let c = &set.constants;
            for (k, v) in [
                ("C", c.c_energy),
                ("alpha", c.alpha),
                ("alpha/6", c.alpha / 6.0),
                ("beta", c.beta),
                ("beta_gradient", c.beta_gradient),
                ("int_U2", c.mass_u2),
                ("int_gradU2", c.grad_u2),
                ("int_Up", c.power_p),
            ] {
                println!("{k} = {}", fmt_f64(v));
            }
        }
        Command::PlotData { dir } => {
            let data = emit_plot_data(&dir)?;
            for f in &data.files {
                println!("{}", f.display());
            }
            for s in &data.skipped {
                println!("skipped {s}: stage output missing");
            }
        }
    }
    Ok(())
}
