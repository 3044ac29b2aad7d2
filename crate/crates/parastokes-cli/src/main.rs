mod commands;
mod job;

use clap::Parser;
use commands::{Outcome, FORMAT_VERSION};
use job::Command;
use parastokes::Error;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_COLLISION: u8 = 4;

/// Stokes matrices, monodromy and integrability checks for parameterized
/// linear systems dY/dz = A(z, t) Y described in a job file.
#[derive(Parser, Debug)]
#[command(name = "parastokes", version)]
struct Cli {
    /// Command to run; defaults to the job's [commands] list.
    command: Option<Command>,
    #[arg(long)]
    job: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Continue past collisions and degeneracies.
    #[arg(long)]
    force: bool,
    /// Overrides the job's tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Overrides the job's truncation order.
    #[arg(long)]
    order: Option<i64>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Syntax { .. } | Error::UnknownIdent { .. } | Error::Invalid(_) => EXIT_VALIDATION,
        Error::Collision(_) => EXIT_COLLISION,
        Error::Pole { .. } | Error::Numerical(_) => EXIT_NUMERICAL,
    }
}

fn write_outputs(dir: &Path, cmd: Command, job: &job::Job, seed: u64, out: &Outcome) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let doc = json!({
        "format_version": FORMAT_VERSION,
        "command": cmd.name(),
        "system": job.matrix,
        "params": job.grid.names(),
        "grid": job.grid.samples().iter().map(|t| t.iter().map(|z| commands::cjson(*z)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "seed": seed,
        "degeneracy": out.degenerate,
        "result": out.json,
    });
    let name = cmd.name();
    std::fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(&doc)? + "\n")?;
    let mut text = out.text.join("\n");
    text.push('\n');
    std::fs::write(dir.join(format!("{name}.txt")), text)?;
    let mut w = csv::Writer::from_path(dir.join(format!("{name}.csv")))?;
    // header even when there are no rows
    if out.csv.is_empty() {
        w.write_record(["z_re", "z_im", "entry", "side", "value_re", "value_im", "err"])?;
    }
    for row in &out.csv {
        w.serialize(row)?;
    }
    w.flush()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut job = match job::load(&cli.job) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t <= 0.1) {
            eprintln!("error: --tol {t} outside (0, 0.1]");
            return ExitCode::from(EXIT_VALIDATION);
        }
        job.options.tol = t;
    }
    if let Some(o) = cli.order {
        if !(4..=400).contains(&o) {
            eprintln!("error: --order {o} outside [4, 400]");
            return ExitCode::from(EXIT_VALIDATION);
        }
        job.options.order = o;
    }
    if let Some(n) = cli.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: cannot use {n} threads");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    let cmds: Vec<Command> = match cli.command {
        Some(c) => vec![c],
        None if job.commands.is_empty() => {
            eprintln!("error: no command given and the job lists none");
            return ExitCode::from(EXIT_VALIDATION);
        }
        None => job.commands.clone(),
    };
    for cmd in cmds {
        let outcome = match commands::run(cmd, &job, cli.seed) {
            Ok(o) => o,
            Err(e) => {
                eprintln!("{}: {e}", cmd.name());
                return ExitCode::from(exit_code(&e));
            }
        };
        if let Err(e) = write_outputs(&cli.out, cmd, &job, cli.seed, &outcome) {
            eprintln!("error: cannot write to {}: {e}", cli.out.display());
            return ExitCode::from(EXIT_VALIDATION);
        }
        for line in &outcome.text {
            println!("{line}");
        }
        if let Some(why) = &outcome.degenerate {
            if !cli.force {
                eprintln!("{}: {why}; rerun with --force to accept", cmd.name());
                return ExitCode::from(EXIT_COLLISION);
            }
        }
    }
    ExitCode::SUCCESS
}
