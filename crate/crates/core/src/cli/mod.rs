//! Command-line front end: `run`, `verify`, `refine` and `list-scenarios`.

pub mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::registry::global;
use crate::harness::{catalog, refine::refine, run_scenario, Report, Verdict};
use config::{parse_config, ScenarioConfig};

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "GEOFLOW_OUT";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "geoflow", version, about = "Parabolic frequency experiments along Ricci and Ricci-harmonic flows")]
pub struct Cli {
    /// Scenarios run in parallel.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run scenarios and write series.csv and report.json.
    Run {
        /// Config files or bundled scenario names.
        #[arg(required = true)]
        configs: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run checks only and print the reports.
    Verify {
        #[arg(required = true)]
        configs: Vec<String>,
    },
    /// Refinement study of one scenario.
    Refine {
        config: String,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List bundled scenarios.
    ListScenarios,
}

/// Reads a config from a path, falling back to the bundled scenario of that name.
pub fn load_config(arg: &str) -> Result<ScenarioConfig> {
    let path = Path::new(arg);
    let text = if path.exists() {
        fs::read_to_string(path)?
    } else if let Some(t) = catalog::get(arg) {
        t.to_string()
    } else {
        return Err(Error::Io(format!("no config file or bundled scenario named `{arg}`")));
    };
    parse_config(&text, global())
}

/// `--out`, then `GEOFLOW_OUT`, then the config's `output`, then `geoflow-out/<name>`.
/// With several scenarios the first two act as parent directories.
pub fn output_dir(cfg: &ScenarioConfig, flag: Option<&Path>, several: bool) -> PathBuf {
    let base = flag
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from));
    match base {
        Some(b) if several => b.join(&cfg.name),
        Some(b) => b,
        None => cfg
            .output
            .as_ref()
            .map(PathBuf::from)
            .unwrap_or_else(|| Path::new("geoflow-out").join(&cfg.name)),
    }
}

fn summarize(report: &Report) -> String {
    let mut s = format!(
        "{}: {} ({:.2} s)\n",
        report.scenario,
        if report.passed() { "PASS" } else { "FAIL" },
        report.runtime_seconds
    );
    for c in &report.checks {
        let verdict = match c.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::NotAsserted => "not-asserted",
            Verdict::Diagnostic => "diagnostic",
        };
        let slack = c.worst_slack.map_or("-".to_string(), |v| format!("{v:.3e}"));
        s.push_str(&format!("  {:<36} {:<13} slack {:<11} tol {:.1e}\n", c.name, verdict, slack, c.tolerance));
    }
    s
}

fn exit_for(report: &Report) -> i32 {
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

fn run_one(arg: &str, out: Option<&Path>, several: bool, write: bool) -> Result<(Report, String)> {
    let cfg = load_config(arg)?;
    let run = run_scenario(&cfg, global())?;
    let mut text = summarize(&run.report);
    if write {
        let dir = output_dir(&cfg, out, several);
        output::write_outputs(&dir, &run.report, &run.series)?;
        text.push_str(&format!("  wrote {}\n", dir.display()));
    } else {
        text.push_str(&output::report_json(&run.report)?);
        text.push('\n');
    }
    Ok((run.report, text))
}

fn run_many(configs: &[String], jobs: usize, out: Option<&Path>, write: bool) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let several = configs.len() > 1;
    let results: Vec<_> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| run_one(c, out, several, write))
            .collect()
    });
    let mut code = EXIT_PASS;
    for (arg, r) in configs.iter().zip(results) {
        match r {
            Ok((report, text)) => {
                print!("{text}");
                code = code.max(exit_for(&report));
            }
            Err(e) => {
                eprintln!("error: {arg}: {e}");
                code = EXIT_ERROR;
            }
        }
    }
    // execution errors outrank check failures
    if code == EXIT_CHECK_FAILED || code == EXIT_PASS {
        code
    } else {
        EXIT_ERROR
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match cli.command {
        Command::Run { configs, out } => run_many(&configs, cli.jobs, out.as_deref(), true),
        Command::Verify { configs } => run_many(&configs, cli.jobs, None, false),
        Command::Refine { config, levels, out } => {
            let result = load_config(&config).and_then(|cfg| {
                let report = refine(&cfg, global(), levels)?;
                let dir = output_dir(&cfg, out.as_deref(), false);
                fs::create_dir_all(&dir)?;
                let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
                fs::write(dir.join("refinement.json"), &text)?;
                Ok(text)
            });
            match result {
                Ok(text) => {
                    println!("{text}");
                    EXIT_PASS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_ERROR
                }
            }
        }
        Command::ListScenarios => {
            for name in catalog::names() {
                println!("{name}");
            }
            EXIT_PASS
        }
    }
}
