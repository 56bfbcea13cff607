// SPDX-License-Identifier: Apache-2.0

//! `spt`: compile access policies to flow tables and replay scenarios.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use spt_core::bench::{bench, BENCH_CSV_HEADER};
use spt_core::scenario::{metrics_to_csv, PolicyLibrary};
use spt_core::transform::RuleStatus;
use spt_core::{
    parse_policy, parse_scenario, parse_topology, pingall, run_scenario, transform_spm,
    verify_reachability, DataPlane, Monitor, RunOptions, SecurityPolicy, Topology, Violation,
};

#[derive(Parser)]
#[command(
    name = "spt",
    version,
    about = "Security policy to flow table compiler and simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a policy and print the route chosen for each rule.
    Transform {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// Write the flow entries as CSV.
        #[arg(long)]
        flows_out: Option<PathBuf>,
    },
    /// Install a policy and probe every ordered host pair.
    Pingall {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// Write the reachability matrix as CSV.
        #[arg(long)]
        matrix_out: Option<PathBuf>,
    },
    /// Replay a scenario and write per-tick flow metrics.
    Run {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        metrics_out: PathBuf,
        /// Packets per tick each directed link can carry.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        link_capacity: Option<u64>,
    },
    /// Time policy compilation on a seeded random instance.
    Bench {
        #[arg(long)]
        switches: u32,
        #[arg(long)]
        rules: u32,
        #[arg(long, default_value_t = 10)]
        trials: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load(topology: &Path, policy: &Path) -> Result<(Topology, SecurityPolicy)> {
    let topo = parse_topology(&read(topology)?)
        .with_context(|| format!("parsing {}", topology.display()))?;
    let spm =
        parse_policy(&read(policy)?).with_context(|| format!("parsing {}", policy.display()))?;
    Ok((topo, spm))
}

fn join_ids<T: ToString>(ids: impl IntoIterator<Item = T>) -> String {
    ids.into_iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn transform(topology: &Path, policy: &Path, flows_out: Option<&Path>) -> Result<ExitCode> {
    let (topo, spm) = load(topology, policy)?;
    let out = transform_spm(&spm, &topo);
    for r in &out.reports {
        let (s, o) = (r.rule.subject, r.rule.object);
        match &r.status {
            RuleStatus::Routed { path, entries } => {
                println!(
                    "PATH {s}->{o} [{}] entries={entries}",
                    join_ids(path.switches())
                )
            }
            RuleStatus::NoPath => println!("NOPATH {s}->{o}"),
            RuleStatus::Unbound(h) => println!("UNBOUND {s}->{o} host={h}"),
            RuleStatus::Failed(e) => println!("FAILED {s}->{o} {e}"),
        }
    }
    println!(
        "DELTA entries={} routed={} unrouted={}",
        out.delta.len(),
        out.routed(),
        out.unrouted()
    );
    if let Some(p) = flows_out {
        write(p, &out.delta.to_csv())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn pingall_cmd(topology: &Path, policy: &Path, matrix_out: Option<&Path>) -> Result<ExitCode> {
    let (topo, mut spm) = load(topology, policy)?;
    let mut plane = DataPlane::new(&topo);
    let report = Monitor::new().on_packet_in(&mut spm, &topo, &mut plane)?;
    println!("{}", report.log_line(0));

    let matrix = pingall(&plane, &topo);
    let reachable = matrix.reachable_pairs();
    for (a, b) in &reachable {
        println!("REACHABLE {a}->{b}");
    }
    println!("reachable={}/{}", reachable.len(), matrix.pairs().count());
    if let Some(p) = matrix_out {
        write(p, &matrix.to_csv())?;
    }

    let violations = verify_reachability(&matrix, &spm)?;
    for v in &violations {
        match v {
            Violation::Missing(s, o) => eprintln!("MISSING {s}->{o}"),
            Violation::Excess(s, o) => eprintln!("EXCESS {s}->{o}"),
        }
    }
    Ok(if violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn run(
    topology: &Path,
    policy: &Path,
    scenario: &Path,
    metrics_out: &Path,
    link_capacity: Option<u64>,
) -> Result<ExitCode> {
    let (topo, spm) = load(topology, policy)?;
    let scn = parse_scenario(&read(scenario)?)
        .with_context(|| format!("parsing {}", scenario.display()))?;
    let base = scenario.parent().unwrap_or(Path::new("."));
    let library = PolicyLibrary::load(&scn, base)?;
    let result = run_scenario(&scn, &topo, &spm, RunOptions { link_capacity }, &library)?;
    for (tick, r) in &result.reconciles {
        println!("{}", r.log_line(*tick));
    }
    write(metrics_out, &metrics_to_csv(&result.metrics))?;
    Ok(ExitCode::SUCCESS)
}

fn bench_cmd(switches: u32, rules: u32, trials: u32, seed: u64) -> Result<ExitCode> {
    let row = match bench(switches, rules, trials, seed) {
        Ok(row) => row,
        Err(e) => Cli::command().error(ErrorKind::ValueValidation, e).exit(),
    };
    println!("{BENCH_CSV_HEADER}");
    println!("{}", row.csv_line());
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    match Cli::parse().cmd {
        Command::Transform {
            topology,
            policy,
            flows_out,
        } => transform(&topology, &policy, flows_out.as_deref()),
        Command::Pingall {
            topology,
            policy,
            matrix_out,
        } => pingall_cmd(&topology, &policy, matrix_out.as_deref()),
        Command::Run {
            topology,
            policy,
            scenario,
            metrics_out,
            link_capacity,
        } => run(&topology, &policy, &scenario, &metrics_out, link_capacity),
        Command::Bench {
            switches,
            rules,
            trials,
            seed,
        } => bench_cmd(switches, rules, trials, seed),
    }
}
