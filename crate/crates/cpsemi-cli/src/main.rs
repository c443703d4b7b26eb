use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use cpsemi::matrixcore::parse_matrix_literal;
use cpsemi_cli::model::GridSpec;
use cpsemi_cli::{exit_code, load_model, run, Command, Options, EXIT_INPUT};

#[derive(Parser)]
#[command(name = "cpsemi", version, about = "Certify Lindblad generators and run dilation / weak-coupling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Output directory for report.json, timing.json and CSV tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance override NAME=VALUE; repeatable.
    #[arg(long, global = true, value_parser = parse_tol)]
    tol: Vec<(String, f64)>,
    /// Comma-separated coupling strengths.
    #[arg(long, global = true, value_delimiter = ',')]
    lambda_list: Option<Vec<f64>>,
    /// Single reservoir grid "r,n".
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<GridSpec>,
    #[arg(long, global = true)]
    nmax: Option<usize>,
    /// Density matrix literal, or @FILE to read one.
    #[arg(long, global = true)]
    rho: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    Validate,
    Canonical,
    Stinespring,
    Dbc,
    Davies,
    WclReduced,
    WclExtended,
    ToyDilation,
    Langevin,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let v: f64 = value.parse().map_err(|e| format!("{value}: {e}"))?;
    if !(v >= 0.0) {
        return Err(format!("tolerance {name} must be nonnegative"));
    }
    Ok((name.to_string(), v))
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let (r, n) = s.split_once(',').ok_or("expected r,n")?;
    Ok(GridSpec {
        r: r.trim().parse().map_err(|e| format!("{r}: {e}"))?,
        n: n.trim().parse().map_err(|e| format!("{n}: {e}"))?,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, String> {
    let start = Instant::now();
    let command = match cli.command {
        Cmd::Validate => Command::Validate,
        Cmd::Canonical => Command::Canonical,
        Cmd::Stinespring => Command::Stinespring,
        Cmd::Dbc => Command::Dbc,
        Cmd::Davies => Command::Davies,
        Cmd::WclReduced => Command::WclReduced,
        Cmd::WclExtended => Command::WclExtended,
        Cmd::ToyDilation => Command::ToyDilation,
        Cmd::Langevin => Command::Langevin,
    };
    let path = cli.model.as_ref().ok_or("--model FILE is required")?;
    let model = load_model(path)?;
    let rho = match &cli.rho {
        None => None,
        Some(s) => {
            let text = match s.strip_prefix('@') {
                Some(file) => std::fs::read_to_string(file).map_err(|e| format!("{file}: {e}"))?,
                None => s.clone(),
            };
            Some(parse_matrix_literal(&text).map_err(|e| format!("--rho: {e}"))?)
        }
    };
    let opts = Options {
        seed: cli.seed,
        tol: cli.tol.iter().cloned().collect::<BTreeMap<_, _>>(),
        lambda_list: cli.lambda_list.clone(),
        grid: cli.grid.clone(),
        nmax: cli.nmax,
        rho,
    };
    let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    let (report, unused) = run(command, &model, &name, &opts).map_err(|e| e.to_string())?;
    for t in unused {
        eprintln!("warning: tolerance `{t}` is not used by `{}`", command.name());
    }
    print!("{}", report.summary());
    if let Some(dir) = &cli.out {
        report
            .write(dir, start.elapsed().as_secs_f64())
            .map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    Ok(exit_code(report.status))
}
