mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pwlmip::approx::{almost_cover, decompose_instance, ApproxParams};
use pwlmip::covering::{self, CoverInstance};
use pwlmip::emip::EmipModel;
use pwlmip::milp::{export_lp, Solver, SolverOptions};
use pwlmip::rational::{format_rational, parse_rational};
use pwlmip::reduction::{lower, solve_emip, EmipStatus};
use pwlmip::voting::{
    self, ApprovalElection, Election, ManipulationResult, OrdinalElection, VotingOptions,
};

use report::{Failure, RunReport};

#[derive(Parser)]
#[command(
    name = "pwlmip",
    version,
    about = "Solve eMIPs, multicover instances and election manipulation problems"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Print the run report as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Return a cheapest solution instead of any solution within budget.
    #[arg(long, global = true)]
    minimize_cost: bool,
    /// Branch-and-bound node limit per MILP solve.
    #[arg(long, global = true, env = "PWLMIP_NODE_LIMIT", value_name = "N")]
    node_limit: Option<u64>,
    /// Include the multiset decomposition in the mmc-approx report.
    #[arg(long, global = true)]
    dump_decomposition: bool,
    /// Seed recorded in the report and used by generators.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Require p to win strictly in election problems.
    #[arg(long, global = true)]
    unique_winner: bool,
    /// Include wall time in the report.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an emip-v1 model.
    SolveEmip { file: PathBuf },
    /// Weighted Set Multicover on a cover-v1 instance.
    Wsm { file: PathBuf },
    /// Uniform Multiset Multicover on a cover-v1 instance.
    Umm { file: PathBuf },
    /// ε-almost-cover of a Multiset Multicover instance.
    MmcApprox {
        file: PathBuf,
        /// Approximation parameter as a rational, e.g. 1/4.
        #[arg(long, value_name = "P/Q")]
        epsilon: String,
    },
    /// Constructive control by deleting voters (priced, or weighted if any weight differs from 1).
    Ccdv { file: PathBuf },
    /// Constructive control by adding voters (priced or weighted).
    Ccav { file: PathBuf },
    /// Priced bribery.
    Bribery { file: PathBuf },
    /// Priced deletion of voters under a scoring rule.
    ScoringCcdv { file: PathBuf },
    /// Write the lowered MILP of an emip-v1 model in LP format.
    ExportLp {
        file: PathBuf,
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    #[cfg(feature = "oracle")]
    #[command(hide = true, subcommand)]
    Oracle(OracleCommand),
}

#[cfg(feature = "oracle")]
#[derive(Subcommand)]
enum OracleCommand {
    /// Cheapest cover by enumeration.
    Cover { file: PathBuf },
    /// Cheapest manipulation by enumeration.
    Manipulate {
        file: PathBuf,
        #[arg(long, value_parser = ["delete", "add", "bribe"])]
        kind: String,
    },
    /// Print a hardness-construction instance (partition-wmm or subsetsum-mmc).
    Gen { kind: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let global = &cli.global;
    match run(&cli.command, global) {
        Ok(Output::Report(mut report)) => {
            report.seed = global.seed;
            if global.timing {
                report.set_wall_time(start.elapsed());
            }
            emit(&report, global.json);
            ExitCode::SUCCESS
        }
        Ok(Output::Text(text)) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            if global.json {
                let mut report = RunReport::new(command_name(&cli.command), failure.status());
                report.message = Some(failure.message().to_string());
                report.seed = global.seed;
                emit(&report, true);
            }
            failure.exit_code()
        }
    }
}

enum Output {
    Report(RunReport),
    Text(String),
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::SolveEmip { .. } => "solve-emip",
        Command::Wsm { .. } => "wsm",
        Command::Umm { .. } => "umm",
        Command::MmcApprox { .. } => "mmc-approx",
        Command::Ccdv { .. } => "ccdv",
        Command::Ccav { .. } => "ccav",
        Command::Bribery { .. } => "bribery",
        Command::ScoringCcdv { .. } => "scoring-ccdv",
        Command::ExportLp { .. } => "export-lp",
        #[cfg(feature = "oracle")]
        Command::Oracle(_) => "oracle",
    }
}

fn emit(report: &RunReport, json: bool) {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(report).expect("report serializes")
        );
        return;
    }
    println!("status: {}", report.status);
    if let Some(cost) = &report.cost {
        println!("cost: {cost}");
    }
    if let Some(message) = &report.message {
        println!("message: {message}");
    }
    if !report.solution.is_null() {
        println!(
            "solution: {}",
            serde_json::to_string_pretty(&report.solution).expect("solution serializes")
        );
    }
    if let Some(s) = &report.stats {
        println!(
            "stats: {} nodes, {} LP pivots, {} MILP solves",
            s.nodes, s.lp_pivots, s.milp_solves
        );
    }
    if let Some(ms) = report.wall_time_ms {
        println!("wall time: {ms:.1} ms");
    }
}

fn read(path: &PathBuf) -> Result<(String, String), Failure> {
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{shown}: {e}")))?;
    Ok((shown, text))
}

fn solver(global: &Global) -> Solver {
    let mut options = SolverOptions::default();
    if let Some(limit) = global.node_limit {
        options.node_limit = limit;
    }
    Solver::new(options)
}

fn voting_options(global: &Global) -> VotingOptions {
    VotingOptions {
        unique_winner: global.unique_winner,
        minimize_cost: global.minimize_cost,
        ..Default::default()
    }
}

fn load_emip(path: &PathBuf) -> Result<EmipModel, Failure> {
    let (shown, text) = read(path)?;
    EmipModel::from_json(&text).map_err(|e| Failure::in_file(&shown, e))
}

fn load_cover(path: &PathBuf) -> Result<CoverInstance, Failure> {
    let (shown, text) = read(path)?;
    CoverInstance::from_json(&text).map_err(|e| Failure::in_file(&shown, e))
}

fn load_election(path: &PathBuf) -> Result<Election, Failure> {
    let (shown, text) = read(path)?;
    Election::from_json(&text).map_err(|e| Failure::in_file(&shown, e))
}

fn load_approval(path: &PathBuf) -> Result<ApprovalElection, Failure> {
    match load_election(path)? {
        Election::Approval(e) => Ok(e),
        Election::Ordinal(_) => Err(Failure::Input(format!(
            "{}: this command needs an approval election (\"rule\": \"approval\")",
            path.display()
        ))),
    }
}

fn load_ordinal(path: &PathBuf) -> Result<OrdinalElection, Failure> {
    match load_election(path)? {
        Election::Ordinal(e) => Ok(e),
        Election::Approval(_) => Err(Failure::Input(format!(
            "{}: this command needs a scoring rule (\"rule\": {{\"scoring\": [...]}})",
            path.display()
        ))),
    }
}

fn run(command: &Command, global: &Global) -> Result<Output, Failure> {
    let solver = solver(global);
    let name = command_name(command);
    let report = match command {
        Command::SolveEmip { file } => {
            let model = load_emip(file)?;
            let solution = solve_emip(&model, &solver)?;
            let milp = json!({
                "variables": solution.milp_vars,
                "integer_variables": solution.milp_integer_vars,
                "rows": solution.milp_rows,
            });
            match &solution.status {
                EmipStatus::Feasible {
                    assignment,
                    objective,
                } => {
                    let values: BTreeMap<&str, String> = model
                        .variables
                        .iter()
                        .zip(assignment)
                        .map(|(v, x)| (v.name.as_str(), format_rational(x)))
                        .collect();
                    let mut payload = json!({ "assignment": values, "milp": milp });
                    if let Some(obj) = objective {
                        payload["objective"] = json!(format_rational(obj));
                    }
                    RunReport::solved(name, true).with_solution(payload)
                }
                EmipStatus::Infeasible => {
                    RunReport::solved(name, false).with_solution(json!({ "milp": milp }))
                }
            }
            .with_stats(&solution.stats)
        }
        Command::Wsm { file } | Command::Umm { file } => {
            let instance = load_cover(file)?;
            let solve = match (command, global.minimize_cost) {
                (Command::Wsm { .. }, false) => covering::solve_wsm,
                (Command::Wsm { .. }, true) => covering::solve_wsm_min_cost,
                (_, false) => covering::solve_umm,
                (_, true) => covering::solve_umm_min_cost,
            };
            let outcome = solve(&instance, &solver)?;
            let report = match &outcome.solution {
                Some(s) => RunReport::solved(name, true)
                    .with_cost(s.cost)
                    .with_solution(s),
                None => RunReport::solved(name, false),
            };
            report.with_stats(&outcome.stats)
        }
        Command::MmcApprox { file, epsilon } => {
            let instance = load_cover(file)?;
            let eps = parse_rational(epsilon)
                .map_err(|e| Failure::Input(format!("--epsilon {epsilon}: {e}")))?;
            let outcome = almost_cover(&instance, &eps, &solver)?;
            let mut payload = match &outcome.solution {
                Some(s) => serde_json::to_value(s).expect("solution serializes"),
                None => {
                    json!({ "bound": format_rational(&(&eps * pwlmip::rational::int(instance.total_requirement()))) })
                }
            };
            if global.dump_decomposition {
                let params = ApproxParams::new(eps.clone(), instance.universe_size)?;
                payload["decomposition"] = json!({
                    "z": params.z,
                    "y": params.y,
                    "vectors": decompose_instance(&instance, &params),
                });
            }
            let report = match &outcome.solution {
                Some(s) => RunReport::solved(name, true).with_cost(s.chosen.len()),
                None => RunReport::solved(name, false),
            };
            report.with_solution(payload).with_stats(&outcome.stats)
        }
        Command::Ccdv { file } | Command::Ccav { file } | Command::Bribery { file } => {
            let e = load_approval(file)?;
            let options = voting_options(global);
            let weighted = e.is_weighted();
            let result = match (command, weighted) {
                (Command::Ccdv { .. }, false) => voting::solve_ccdv_priced(&e, &options, &solver),
                (Command::Ccdv { .. }, true) => voting::solve_ccdv_weighted(&e, &options, &solver),
                (Command::Ccav { .. }, false) => voting::solve_ccav_priced(&e, &options, &solver),
                (Command::Ccav { .. }, true) => voting::solve_ccav_weighted(&e, &options, &solver),
                _ => voting::solve_bribery_priced(&e, &options, &solver),
            }?;
            manipulation_report(name, if weighted { "weighted" } else { "priced" }, &result)
        }
        Command::ScoringCcdv { file } => {
            let e = load_ordinal(file)?;
            let result = voting::solve_scoring_ccdv(&e, &voting_options(global), &solver)?;
            manipulation_report(name, "priced", &result)
        }
        Command::ExportLp { file, output } => {
            let model = load_emip(file)?;
            let violations = model.validate();
            if !violations.is_empty() {
                return Err(pwlmip::reduction::ReductionError::Invalid(violations).into());
            }
            let (milp, _) = lower(&model.normalize())?;
            fs::write(output, export_lp(&milp))
                .map_err(|e| Failure::Input(format!("{}: {e}", output.display())))?;
            let summary = json!({
                "command": name,
                "output": output.display().to_string(),
                "variables": milp.num_vars(),
                "integer_variables": milp.num_integer_vars(),
                "rows": milp.rows().len(),
            });
            return Ok(Output::Text(if global.json {
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            } else {
                format!(
                    "wrote {} ({} variables, {} integer, {} rows)",
                    output.display(),
                    milp.num_vars(),
                    milp.num_integer_vars(),
                    milp.rows().len()
                )
            }));
        }
        #[cfg(feature = "oracle")]
        Command::Oracle(sub) => return oracle::run(sub, global),
    };
    Ok(Output::Report(report))
}

fn manipulation_report(name: &'static str, mode: &str, result: &ManipulationResult) -> RunReport {
    let report = if result.feasible {
        let mut payload = serde_json::to_value(&result.action).expect("action serializes");
        payload["mode"] = json!(mode);
        RunReport::solved(name, true)
            .with_cost(result.cost)
            .with_solution(payload)
    } else {
        RunReport::solved(name, false).with_solution(json!({ "mode": mode }))
    };
    report.with_stats(&result.stats)
}

#[cfg(feature = "oracle")]
mod oracle {
    use super::*;
    use pwlmip::oracle::{
        brute_cover, brute_manipulate, gen_hard_instances, HardKind, ManipulationKind, OracleBudget,
    };

    pub(super) fn run(command: &OracleCommand, global: &Global) -> Result<Output, Failure> {
        let budget = OracleBudget::default();
        let internal = |e: pwlmip::oracle::OracleError| Failure::Input(e.to_string());
        let report = match command {
            OracleCommand::Cover { file } => {
                let instance = load_cover(file)?;
                match brute_cover(&instance, &budget).map_err(internal)? {
                    Some((cost, chosen)) => RunReport::solved("oracle", true)
                        .with_cost(cost)
                        .with_solution(json!({ "chosen": chosen })),
                    None => RunReport::solved("oracle", false),
                }
            }
            OracleCommand::Manipulate { file, kind } => {
                let e = load_approval(file)?;
                let kind = match kind.as_str() {
                    "delete" => ManipulationKind::Delete,
                    "add" => ManipulationKind::Add,
                    _ => ManipulationKind::Bribe,
                };
                match brute_manipulate(&e, kind, global.unique_winner, &budget).map_err(internal)? {
                    Some((cost, voters)) => RunReport::solved("oracle", true)
                        .with_cost(cost)
                        .with_solution(json!({ "voters": voters })),
                    None => RunReport::solved("oracle", false),
                }
            }
            OracleCommand::Gen { kind } => {
                let kind: HardKind = kind.parse().map_err(Failure::Input)?;
                return Ok(Output::Text(
                    gen_hard_instances(kind, global.seed.unwrap_or(0)).to_json(),
                ));
            }
        };
        Ok(Output::Report(report))
    }
}
