mod config;
mod plot;
mod registry;
mod run;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use sgdlab_core::export::write_csv;

use crate::config::ExperimentConfig;
use crate::run::{execute, RunError};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const GIT_DESCRIBE: &str = env!("SGDLAB_GIT_DESCRIBE");

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ASSERTION: u8 = 3;

#[derive(Parser)]
#[command(name = "sgdlab", version, about = "Weak-error experiments for constant-step SGD")]
struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, env = "SGDLAB_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Print the parsed configuration in canonical form and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// Show the registered families, their certificates and the observables.
    ListExamples {
        #[arg(long)]
        json: bool,
    },
    Version,
}

fn diagnostic(level: &str, kind: &str, message: &str) {
    let line = json!({ "level": level, "kind": kind, "message": message });
    eprintln!("{line}");
}

fn fail(kind: &str, code: u8, message: &str) -> ExitCode {
    diagnostic("error", kind, message);
    ExitCode::from(code)
}

/// Relative output paths are taken from the directory holding the config file.
fn output_path(config_path: &Path, output: &str) -> PathBuf {
    let out = PathBuf::from(output);
    if out.is_absolute() {
        out
    } else {
        config_path.parent().map(|d| d.join(&out)).unwrap_or(out)
    }
}

fn run(config_path: &Path, dump_config: bool) -> ExitCode {
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => return fail("config", EXIT_CONFIG, &format!("cannot read {}: {e}", config_path.display())),
    };
    let cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail("config", EXIT_CONFIG, &e.0),
    };
    if dump_config {
        print!("{}", cfg.dump());
        return ExitCode::SUCCESS;
    }
    let out = match execute(&cfg) {
        Ok(o) => o,
        Err(RunError::Config(m)) => return fail("config", EXIT_CONFIG, &m),
        Err(RunError::Runtime(m)) => return fail("runtime", EXIT_RUNTIME, &m),
    };
    for w in &out.warnings {
        diagnostic("warning", "run", w);
    }

    let header = json!({
        "config": &cfg,
        "sgdlab": VERSION,
        "git_describe": GIT_DESCRIBE,
    })
    .to_string();
    let mut csv = Vec::new();
    if let Err(e) = write_csv(&mut csv, Some(&header), &out.table) {
        return fail("runtime", EXIT_RUNTIME, &e.to_string());
    }
    let csv_path = output_path(config_path, &cfg.output);
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        if let Err(e) = fs::create_dir_all(dir) {
            return fail("runtime", EXIT_RUNTIME, &format!("cannot create {}: {e}", dir.display()));
        }
    }
    if let Err(e) = fs::write(&csv_path, &csv) {
        return fail("runtime", EXIT_RUNTIME, &format!("cannot write {}: {e}", csv_path.display()));
    }
    let mut svg_path = None;
    if let Some(mut plot) = out.plot {
        plot.data = String::from_utf8_lossy(&csv).into_owned();
        let path = csv_path.with_extension("svg");
        if let Err(e) = fs::write(&path, plot.render()) {
            return fail("runtime", EXIT_RUNTIME, &format!("cannot write {}: {e}", path.display()));
        }
        svg_path = Some(path);
    }

    let failed: Vec<_> = out.assertions.iter().filter(|a| !a.passed).collect();
    for a in &failed {
        diagnostic("error", "assertion", &format!("{}: {}", a.name, a.detail));
    }
    let summary = json!({
        "experiment": cfg.experiment.as_str(),
        "csv": csv_path.display().to_string(),
        "svg": svg_path.map(|p| p.display().to_string()),
        "rows": out.table.len(),
        "results": out.summary,
        "assertions": out.assertions,
        "warnings": out.warnings,
    });
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ASSERTION)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        diagnostic("warning", "threads", &e.to_string());
    }
    match cli.command {
        Command::Run { config, dump_config } => run(&config, dump_config),
        Command::ListExamples { json } => {
            let reg = registry::registry();
            if json {
                match serde_json::to_string_pretty(&reg) {
                    Ok(s) => println!("{s}"),
                    Err(e) => return fail("runtime", EXIT_RUNTIME, &e.to_string()),
                }
            } else {
                print!("{}", registry::render_text(&reg));
            }
            ExitCode::SUCCESS
        }
        Command::Version => {
            println!("sgdlab {VERSION} ({GIT_DESCRIBE})");
            ExitCode::SUCCESS
        }
    }
}
