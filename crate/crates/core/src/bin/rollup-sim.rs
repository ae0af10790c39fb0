// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rollup_sim::sim::{
    check_transcript, expectation_mismatches, gallery, resolve_scenario, run_scenario, Scenario, Transcript,
    SCENARIO_DIR_ENV,
};

#[derive(Parser)]
#[command(name = "rollup-sim", version, about = "Deterministic optimistic-rollup protocol simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or bundled scenario name) and print a report.
    Run {
        scenario: String,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the transcript here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory searched for bare scenario names.
        #[arg(long, env = SCENARIO_DIR_ENV)]
        scenario_dir: Option<PathBuf>,
    },
    /// Re-verify a transcript offline.
    Check { transcript: PathBuf },
    /// Run every bundled scenario.
    Demo {
        /// Write one transcript per scenario into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Summarize a transcript.
    Report { transcript: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, seed, out, scenario_dir } => {
            run(&scenario, seed, out.as_deref(), scenario_dir.as_deref())
        }
        Command::Check { transcript } => check(&transcript),
        Command::Demo { out_dir } => demo(out_dir.as_deref()),
        Command::Report { transcript } => report(&transcript),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn load(name: &str, dir: Option<&Path>) -> Result<Scenario, String> {
    if let Some(dir) = dir {
        for candidate in [dir.join(name), dir.join(format!("{name}.toml"))] {
            if candidate.exists() {
                return rollup_sim::sim::load_scenario(&candidate).map_err(|e| e.to_string());
            }
        }
    }
    resolve_scenario(name).map_err(|e| e.to_string())
}

fn write(path: &Path, t: &Transcript) -> Result<(), String> {
    std::fs::write(path, t.to_bytes()).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(name: &str, seed: Option<u64>, out: Option<&Path>, dir: Option<&Path>) -> Result<ExitCode, String> {
    let mut scenario = load(name, dir)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let t = run_scenario(&scenario).map_err(|e| e.to_string())?;
    if let Some(out) = out {
        write(out, &t)?;
    }
    print!("{}", t.report());
    let mismatches = expectation_mismatches(&t);
    if mismatches.is_empty() {
        if scenario.expected.is_some() {
            println!("expectations met");
        }
        Ok(ExitCode::SUCCESS)
    } else {
        for m in &mismatches {
            eprintln!("mismatch: {m}");
        }
        Ok(ExitCode::from(2))
    }
}

fn check(path: &Path) -> Result<ExitCode, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    match check_transcript(&bytes) {
        Ok(r) => {
            println!(
                "ok: {} messages and {} events re-verified, final state {}",
                r.messages, r.events, r.final_state_digest
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("check failed: {e}");
            Ok(ExitCode::FAILURE)
        }
    }
}

fn demo(out_dir: Option<&Path>) -> Result<ExitCode, String> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    let mut failed = 0;
    for (name, text) in gallery() {
        let scenario = Scenario::from_toml(text).map_err(|e| format!("{name}: {e}"))?;
        let t = run_scenario(&scenario).map_err(|e| format!("{name}: {e}"))?;
        if let Some(dir) = out_dir {
            write(&dir.join(format!("{name}.json")), &t)?;
        }
        let mismatches = expectation_mismatches(&t);
        let fraud: Vec<String> = t.summary.fraud_games.iter().map(|g| name_of(&g.verdict)).collect();
        let audits: Vec<String> = t.summary.audits.iter().map(|a| name_of(&a.verdict)).collect();
        let status = if mismatches.is_empty() { "ok" } else { "MISMATCH" };
        println!(
            "{status:<8} {name:<20} slots {} fraud [{}] audits [{}] messages {} final {}",
            t.summary.committed_slots,
            fraud.join(", "),
            audits.join(", "),
            t.summary.messages,
            &t.final_state_digest.to_hex()[..16]
        );
        for m in &mismatches {
            println!("         {m}");
        }
        failed += usize::from(!mismatches.is_empty());
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn report(path: &Path) -> Result<ExitCode, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let t = Transcript::from_bytes(&bytes).map_err(|e| e.to_string())?;
    print!("{}", t.report());
    Ok(ExitCode::SUCCESS)
}

fn name_of<T: serde::Serialize>(v: &Option<T>) -> String {
    match v {
        Some(v) => serde_json::to_value(v).ok().and_then(|j| j.as_str().map(str::to_string)).unwrap_or_default(),
        None => "unresolved".into(),
    }
}
