//! `subspace`: build, query and benchmark subspace indexes.
//!
//! Exit codes: 0 success, 1 bad input, 2 internal invariant violation.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;
use subspace_core::reference::{reference_rows, REFERENCE_DATASETS};
use subspace_core::report::encode_report;
use subspace_core::{
    build_cells, generate, load_auto, load_index, run_bench, save_auto, save_index, BenchConfig, DataSource, Error,
    Execution, QueryReport, Result,
};

#[derive(Parser)]
#[command(name = "subspace", version, about = "Exact l_p range search with cascaded subspace projections")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key = value configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Override one configuration key; repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<BenchConfig> {
        let mut config = match &self.config {
            Some(path) => BenchConfig::from_file(path)?,
            None => BenchConfig::default(),
        };
        for pair in &self.overrides {
            config.set_pair(pair)?;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build one index per (mode, norm) cell and save it under DIR.
    Build {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(short, long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Range-query a saved index with every vector of a file.
    Query {
        /// Index written by `build`.
        #[arg(short, long)]
        index: PathBuf,
        /// Query vectors (.fvecs or CSV).
        #[arg(short, long)]
        queries: PathBuf,
        #[arg(short, long)]
        epsilon: f64,
        /// Write JSON here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the benchmark matrix and emit one report row per cell.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        /// Report path; overrides the `output` key.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the configured synthetic data set (.fvecs or CSV).
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print the effective configuration, seeds included.
    Config {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print the bundled full-scale reference measurements.
    Reference,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match run(cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_invariant_violation() { 2 } else { 1 })
        }
    }
}

fn run(command: Command, exec: Execution) -> Result<()> {
    match command {
        Command::Build { config, out } => cmd_build(&config.resolve()?, &out, exec),
        Command::Query {
            index,
            queries,
            epsilon,
            output,
        } => cmd_query(&index, &queries, epsilon, output.as_deref(), exec),
        Command::Bench { config, output } => {
            let mut config = config.resolve()?;
            if output.is_some() {
                config.output = output;
            }
            cmd_bench(&config, exec)
        }
        Command::Generate { config, out } => match config.resolve()?.source {
            DataSource::Synthetic(spec) => save_auto(out, &generate(&spec)?),
            DataSource::File(_) => Err(Error::InvalidInput("generate needs a synthetic model, not a data file".into())),
        },
        Command::Config { config } => {
            let config = config.resolve()?;
            config.validate()?;
            print!("{config}");
            Ok(())
        }
        Command::Reference => print_reference(&mut io::stdout().lock()),
    }
}

fn cmd_build(config: &BenchConfig, out: &Path, exec: Execution) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "mode\tp\tmax_diversion\tunconverged_blocks\tpath")?;
    for cell in build_cells(config, exec)? {
        let path = out.join(format!("{}-l{}.idx", cell.mode, cell.norm));
        save_index(&path, &cell.index)?;
        let diag = cell.index.diagnostics();
        writeln!(
            stdout,
            "{}\t{}\t{:e}\t{}\t{}",
            cell.mode,
            cell.norm,
            diag.max_diversion(),
            diag.unconverged_blocks,
            path.display()
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct QueryOutput<'a> {
    query: usize,
    #[serde(flatten)]
    report: &'a QueryReport,
}

fn cmd_query(index: &Path, queries: &Path, epsilon: f64, output: Option<&Path>, exec: Execution) -> Result<()> {
    let index = load_index(index)?;
    let queries = load_auto(queries)?;
    info!("{} queries against {} items", queries.len(), index.len());
    let reports = queries
        .rows()
        .map(|y| index.range_query_with(y, epsilon, exec))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<QueryOutput> = reports
        .iter()
        .enumerate()
        .map(|(query, report)| QueryOutput { query, report })
        .collect();
    let mut w: Box<dyn Write> = match output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    serde_json::to_writer_pretty(&mut w, &rows)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_bench(config: &BenchConfig, exec: Execution) -> Result<()> {
    let rows = run_bench(config, exec)?;
    let format = config.report_format();
    match &config.output {
        Some(path) => subspace_core::write_report(&rows, path, format)?,
        None => encode_report(&rows, io::stdout().lock(), format)?,
    }
    let mut err = io::stderr().lock();
    writeln!(err, "{:<11} {:>4} {:>14} {:>16} {:>10}", "mode", "p", "epsilon", "mean cost_s", "ratio")?;
    for r in &rows {
        writeln!(
            err,
            "{:<11} {:>4} {:>14.6} {:>16.1} {:>10.3}",
            r.mode.to_string(),
            r.p.to_string(),
            r.epsilon,
            r.mean_cost_s,
            r.mean_ratio
        )?;
    }
    if matches!(config.source, DataSource::File(_)) {
        writeln!(err)?;
        print_reference(&mut err)?;
    }
    Ok(())
}

fn print_reference(w: &mut dyn Write) -> Result<()> {
    writeln!(w, "published reference (full scale, not reproduced here):")?;
    for &(group, name, s, n) in &REFERENCE_DATASETS {
        writeln!(w, "set {group}: {name}, s = {s}, n = {n}")?;
        writeln!(w, "  {:<11} {:>4} {:>12} {:>12} {:>8}", "mode", "p", "epsilon", "cost", "ratio")?;
        for r in reference_rows(group) {
            writeln!(
                w,
                "  {:<11} {:>4} {:>12} {:>12} {:>8.2}",
                r.mode.to_string(),
                r.p.to_string(),
                r.epsilon,
                r.cost,
                r.ratio
            )?;
        }
    }
    Ok(())
}
