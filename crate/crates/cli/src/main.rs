use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use noc_core::cones::{adjacent_cone_member, second_order_member};
use noc_core::exec::configure_threads;
use noc_core::pipeline::{run, sweep, write_sweep_csv, RunOptions, SweepAxis};
use noc_core::problem::{preset_names, ProblemFile, SetSpec, PRESETS};
use noc_core::report::Report;
use noc_core::{Error, Exec};

/// Exit code for malformed input.
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "noc", version, about = "Check necessary optimality conditions for optimal control problems")]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ProblemArgs {
    /// Problem file, or `preset:<name>`.
    problem: String,
    /// Override the number of grid intervals.
    #[arg(long)]
    grid: Option<usize>,
    /// Override a tolerance, e.g. `--tol refutation_margin=1e-8`.
    #[arg(long = "tol", value_name = "KEY=VAL")]
    tol: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse one problem; exits 0 (consistent), 3 (refuted), 4 (inconclusive) or 2 (input error).
    Check {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Write the JSON report here (`-` for stdout).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Include wall-clock timing in the report.
        #[arg(long)]
        timing: bool,
    },
    /// Run the problem over a grid of parameter values and write a CSV table.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        /// `name=start:stop:count` or `name=a,b,c`; repeat for a product grid.
        #[arg(long = "param", value_name = "SPEC", required = true)]
        params: Vec<String>,
        /// Output CSV (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Standalone queries.
    Oracle {
        #[command(subcommand)]
        query: Oracle,
    },
    /// List the built-in presets, or print one.
    Presets { name: Option<String> },
}

#[derive(Subcommand)]
enum Oracle {
    /// Membership of `v` in the adjacent cone of `set` at `u`, or of `w` in
    /// the second-order set at `(u, v)`. Vectors are comma separated.
    Cone {
        /// Inline TOML table, e.g. `{ kind = "ball", center = [0, 0], radius = 1 }`.
        set: String,
        u: String,
        v: String,
        w: Option<String>,
    },
}

fn load(args: &ProblemArgs) -> noc_core::Result<ProblemFile> {
    let mut file = match args.problem.strip_prefix("preset:") {
        Some(name) => ProblemFile::preset(name)?,
        None => ProblemFile::load(args.problem.as_ref())?,
    };
    if let Some(n) = args.grid {
        file.set_grid(n)?;
    }
    for kv in &args.tol {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::input(format!("--tol {kv}"), "expected key=value"))?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::input(format!("--tol {kv}"), "value is not a number"))?;
        file.tolerances.set(k.trim(), v)?;
    }
    Ok(file)
}

fn vector(s: &str) -> noc_core::Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::input(format!("vector {s:?}"), format!("not a number: {x:?}")))
        })
        .collect()
}

fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        None => Box::new(io::stdout()),
        Some(p) if p.as_os_str() == "-" => Box::new(io::stdout()),
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
    })
}

fn summary(r: &Report) -> String {
    let verdict = format!("{:?}", r.verdict).to_lowercase();
    let mut s = format!("verdict: {verdict}\nreason: {}\n", r.reason);
    if let Some(f) = &r.first_order {
        for m in &f.multipliers {
            let exact: Vec<String> = m
                .rational
                .iter()
                .zip(&m.values)
                .map(|(q, x)| q.clone().unwrap_or_else(|| format!("{x:.6}")))
                .collect();
            s += &format!("multiplier: ({})\n", exact.join(", "));
        }
    }
    if let Some(lhs) = r.lhs() {
        s += &format!("second-order functional: {lhs:.6}\n");
    }
    for n in &r.notes {
        s += &format!("note: {n}\n");
    }
    s
}

fn execute(cli: Cli, exec: Exec) -> anyhow::Result<u8> {
    match cli.command {
        Command::Check {
            problem,
            report,
            timing,
        } => {
            let file = load(&problem)?;
            let r = run(&file, &RunOptions { exec, timing })?;
            let to_stdout = report.as_ref().is_some_and(|p| p.as_os_str() == "-");
            if !to_stdout {
                print!("{}", summary(&r));
            }
            if let Some(path) = &report {
                let mut w = output(Some(path))?;
                writeln!(w, "{}", r.to_json())?;
            }
            Ok(r.exit_code() as u8)
        }
        Command::Sweep { problem, params, out } => {
            let file = load(&problem)?;
            let axes = params
                .iter()
                .map(|p| SweepAxis::parse(p))
                .collect::<noc_core::Result<Vec<_>>>()?;
            let rows = sweep(&file, &axes, exec)?;
            write_sweep_csv(&axes, &rows, output(out.as_ref())?)?;
            Ok(0)
        }
        Command::Oracle {
            query: Oracle::Cone { set, u, v, w },
        } => {
            let set = SetSpec::parse_inline(&set)?.build()?;
            let (u, v) = (vector(&u)?, vector(&v)?);
            let cert = match w {
                None => adjacent_cone_member(&set, &u, &v)?,
                Some(w) => second_order_member(&set, &u, &v, &vector(&w)?)?,
            };
            println!("{}", serde_json::to_string_pretty(&cert)?);
            Ok(0)
        }
        Command::Presets { name: None } => {
            for n in preset_names() {
                println!("{n}");
            }
            Ok(0)
        }
        Command::Presets { name: Some(name) } => match PRESETS.iter().find(|(n, _)| *n == name) {
            Some((_, src)) => {
                print!("{src}");
                Ok(0)
            }
            None => bail!(Error::input("preset", format!("unknown preset {name:?}"))),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("NOC_THREADS").ok();
    let exec = match threads.as_deref().map(str::parse::<usize>) {
        _ if cli.sequential => Exec::Sequential,
        Some(Ok(1)) => Exec::Sequential,
        Some(Ok(n)) if n > 1 => {
            configure_threads(n);
            Exec::Parallel
        }
        Some(_) => {
            eprintln!("noc: input error: NOC_THREADS must be a positive integer");
            return ExitCode::from(EXIT_INPUT);
        }
        None => Exec::Parallel,
    };
    match execute(cli, exec) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let core = e.downcast_ref::<Error>();
            let input = core.is_none_or(Error::is_input_error);
            let kind = if input { "input error" } else { "analysis failed" };
            eprintln!("noc: {kind}: {e:#}");
            // Numerical failures leave the question open.
            ExitCode::from(if input { EXIT_INPUT } else { 4 })
        }
    }
}
