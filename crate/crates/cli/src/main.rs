//! `newstrad` command-line tool.
//!
//! Exit codes: 0 ok, 1 input error, 2 integrity or invariant failure,
//! 3 allocation infeasible.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use newstrad::ledger::{parse_jsonl, verify_chain};
use newstrad::num::parse_coin;
use newstrad::scenarios;
use newstrad::simnet::{Scenario, SimConfig, Simulation};
use newstrad::storage::{allocate, parse_registry, plan_to_json, AllocationError, AllocationRequest};
use newstrad::{Coin, Tick};

const INPUT_ERROR: u8 = 1;
const INTEGRITY_FAILURE: u8 = 2;
const INFEASIBLE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "newstrad", version, about = "Pseudonymous news marketplace simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write report.json and ledger.jsonl.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        #[arg(long)]
        scenario: String,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "t-r", default_value_t = 100, value_parser = positive_tick)]
        t_r: Tick,
        #[arg(long = "t-d", default_value_t = 1000, value_parser = positive_tick)]
        t_d: Tick,
        #[arg(long, default_value_t = 50, value_parser = positive_tick)]
        deadline_window: Tick,
        #[arg(long, default_value = "2", value_parser = multiplier)]
        penalty_multiplier: Coin,
        /// Output directory, created if missing.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check a ledger dump's hash links and block hashes.
    Verify {
        ledger: PathBuf,
    },
    /// Run the storage allocation pipeline on a miner registry.
    Allocate {
        /// JSON-lines registry: {"miner_id", "fee", "free_space"} per line.
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        size: u64,
        #[arg(long, value_parser = coin_arg)]
        budget: Coin,
        #[arg(long)]
        threshold: usize,
    },
    /// List the bundled scenarios.
    Scenarios,
}

fn positive_tick(s: &str) -> Result<Tick, String> {
    match s.parse::<Tick>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(t) => Ok(t),
        Err(e) => Err(e.to_string()),
    }
}

fn coin_arg(s: &str) -> Result<Coin, String> {
    parse_coin(s).map_err(|e| e.to_string())
}

fn multiplier(s: &str) -> Result<Coin, String> {
    let c = coin_arg(s)?;
    if c < newstrad::num::coin(1) {
        return Err("must be at least 1".into());
    }
    Ok(c)
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn load_scenario(spec: &str) -> Result<Scenario, String> {
    let path = Path::new(spec);
    let text = if path.exists() {
        fs::read_to_string(path).map_err(|e| format!("{spec}: {e}"))?
    } else if let Some(source) = scenarios::source(spec) {
        source.to_string()
    } else {
        return Err(format!("{spec}: no such file or bundled scenario"));
    };
    Scenario::from_json(&text).map_err(|e| format!("{spec}: {e}"))
}

fn cmd_run(scenario: &str, config: SimConfig, out: &Path) -> ExitCode {
    let scenario = match load_scenario(scenario) {
        Ok(s) => s,
        Err(e) => return fail(INPUT_ERROR, e),
    };
    let mut sim = match Simulation::new(&scenario, config) {
        Ok(sim) => sim,
        Err(e) => return fail(INPUT_ERROR, e),
    };
    let report = sim.run_to_end();
    let written = fs::create_dir_all(out)
        .and_then(|_| fs::write(out.join("report.json"), report.to_json() + "\n"))
        .and_then(|_| fs::write(out.join("ledger.jsonl"), sim.chain().to_jsonl()));
    if let Err(e) = written {
        return fail(INPUT_ERROR, format!("{}: {e}", out.display()));
    }
    println!(
        "{}: {} blocks, {} verdicts, {} step errors, final tick {}",
        if report.scenario.is_empty() { "scenario" } else { &report.scenario },
        report.chain.len(),
        report.verdicts.len(),
        report.errors.len(),
        report.final_tick
    );
    for e in &report.errors {
        println!("  step error at tick {} ({}): {}", e.at, e.op, e.message);
    }
    if report.is_clean() {
        ExitCode::SUCCESS
    } else {
        for f in &report.invariant_failures {
            eprintln!("invariant failed: {f}");
        }
        ExitCode::from(INTEGRITY_FAILURE)
    }
}

fn cmd_verify(path: &Path) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(INPUT_ERROR, format!("{}: {e}", path.display())),
    };
    let blocks = match parse_jsonl(&text) {
        Ok(b) => b,
        Err(e) => return fail(INPUT_ERROR, format!("{}: {e}", path.display())),
    };
    let report = verify_chain(&blocks);
    if report.valid {
        println!("valid: {} blocks", blocks.len());
        ExitCode::SUCCESS
    } else {
        let index = report.first_bad_index.unwrap_or(0);
        println!("invalid: first bad block {index}");
        ExitCode::from(INTEGRITY_FAILURE)
    }
}

fn cmd_allocate(registry: &Path, size: u64, budget: Coin, threshold: usize) -> ExitCode {
    let text = match fs::read_to_string(registry) {
        Ok(t) => t,
        Err(e) => return fail(INPUT_ERROR, format!("{}: {e}", registry.display())),
    };
    let miners = match parse_registry(&text) {
        Ok(m) => m,
        Err(e) => return fail(INPUT_ERROR, format!("{}: {e}", registry.display())),
    };
    let request = AllocationRequest {
        file_size: size,
        budget,
        threshold,
    };
    match allocate(&miners, &request) {
        Ok(plan) => {
            println!("{}", serde_json::to_string_pretty(&plan_to_json(&plan)).expect("plain JSON"));
            ExitCode::SUCCESS
        }
        Err(e @ AllocationError::InvalidRequest(_)) => fail(INPUT_ERROR, e),
        Err(e) => {
            println!("{}", e.name());
            eprintln!("error: {e}");
            ExitCode::from(INFEASIBLE)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { INPUT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            seed,
            t_r,
            t_d,
            deadline_window,
            penalty_multiplier,
            out,
        } => {
            let config = SimConfig {
                seed,
                t_r,
                t_d,
                deadline_window,
                penalty_multiplier,
                ..SimConfig::default()
            };
            cmd_run(&scenario, config, &out)
        }
        Command::Verify { ledger } => cmd_verify(&ledger),
        Command::Allocate {
            registry,
            size,
            budget,
            threshold,
        } => cmd_allocate(&registry, size, budget, threshold),
        Command::Scenarios => {
            for name in scenarios::names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}
