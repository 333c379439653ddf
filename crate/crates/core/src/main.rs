use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qcongest::harness::{
    fit_scaling, means_by_n, plot_svg, read_csv, run_sweep, validate, write_csv, Column, Protocol, RunConfig,
    RunRecord, Scaled, Suite, Sweep,
};
use qcongest::Error;

#[derive(Parser)]
#[command(name = "qcongest", version, about = "Quantum CONGEST protocol simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol at one network size.
    Run {
        #[arg(long)]
        protocol: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Referee count: a number, `n^x` or `auto`.
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        gamma: Option<String>,
        /// Mixing time: a number or `auto`.
        #[arg(long)]
        tau: Option<String>,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<String>,
        /// Record wall-clock time per run.
        #[arg(long)]
        timing: bool,
    },
    /// Run a grid described by a config file.
    Sweep {
        #[arg(long)]
        config: String,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        plot: Option<String>,
    },
    /// Run a validation suite and print a JSON report.
    Validate {
        #[arg(long)]
        suite: String,
    },
    /// Fit a log-log slope to one CSV column.
    Fit {
        #[arg(long)]
        csv: String,
        #[arg(long, default_value = "total_msgs")]
        column: String,
    },
}

fn scaled(v: &Option<String>) -> Result<Scaled, Error> {
    v.as_deref().map_or(Ok(Scaled::Auto), str::parse)
}

fn emit(records: &[RunRecord], out: Option<&str>) -> Result<(), Error> {
    match out {
        Some(path) => write_csv(records, BufWriter::new(File::create(path)?)),
        None => write_csv(records, io::stdout().lock()),
    }
}

fn execute(command: Command) -> Result<bool, Error> {
    match command {
        Command::Run {
            protocol,
            n,
            trials,
            seed,
            k,
            eps,
            gamma,
            tau,
            out,
            timing,
        } => {
            let mut config = RunConfig::new(protocol.parse::<Protocol>()?, vec![n], trials, seed);
            config.k = scaled(&k)?;
            config.eps = scaled(&eps)?;
            config.gamma = scaled(&gamma)?;
            config.tau = scaled(&tau)?;
            config.timing = timing;
            let records: Vec<RunRecord> = run_sweep(&config)?.into_iter().map(|e| e.record).collect();
            emit(&records, out.as_deref())?;
            Ok(true)
        }
        Command::Sweep {
            config,
            trials,
            seed,
            out,
            plot,
        } => {
            let mut sweep = Sweep::parse(&std::fs::read_to_string(&config)?)?;
            if let Some(t) = trials {
                sweep.run.trials = t;
            }
            if let Some(s) = seed {
                sweep.run.seed = s;
            }
            let out = out.or(sweep.out.clone());
            let plot = plot.or(sweep.plot.clone());
            let records: Vec<RunRecord> = run_sweep(&sweep.run)?.into_iter().map(|e| e.record).collect();
            emit(&records, out.as_deref())?;
            if let Some(path) = plot {
                let fit = fit_scaling(&records, sweep.column)?;
                let title = format!("{} {}", sweep.run.protocol, sweep.column.name());
                std::fs::write(path, plot_svg(&means_by_n(&records, sweep.column), &fit, &title))?;
            }
            Ok(true)
        }
        Command::Validate { suite } => {
            let report = validate(suite.parse::<Suite>()?)?;
            let mut stdout = io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &report).map_err(io::Error::from)?;
            writeln!(stdout)?;
            Ok(report.passed)
        }
        Command::Fit { csv, column } => {
            let column: Column = column.parse()?;
            let records = read_csv(File::open(csv)?)?;
            let fit = fit_scaling(&records, column)?;
            let mut stdout = io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &fit).map_err(io::Error::from)?;
            writeln!(stdout)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parameter(_) | Error::Config { .. } | Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
