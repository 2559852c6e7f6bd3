use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Arg, ArgAction, ArgMatches, Command};
use sbh_core::baselines::{bfs_oracle, grid_resolution_slack, run_scheme, GridSpec, SchemeId};
use sbh_core::cccp::solve_problem;
use sbh_core::model::{build_effective_gains, drop_topology};
use sbh_core::problem::PowerProblem;
use sbh_sim::config::{ScenarioConfig, KEYS};
use sbh_sim::harness::{dropping_seed, run_sweep, summarize};
use sbh_sim::output::emit_outputs;
use sbh_sim::selftest::{run_all, Scale};

const EXIT_FAILED_ROWS: u8 = 2;
const EXIT_CONFIG: u8 = 1;

fn scenario_args(cmd: Command) -> Command {
    let cmd = cmd.arg(Arg::new("config").long("config").value_name("FILE").help("flat key = value file"));
    KEYS.iter().fold(cmd, |c, &k| c.arg(Arg::new(k).long(k).value_name("VALUE")))
}

fn cli() -> Command {
    Command::new("sbh")
        .about("Power allocation for full-duplex self-backhauled small cells: sweeps, single runs and oracle checks")
        .subcommand_required(true)
        .subcommand(scenario_args(
            Command::new("sweep").about("Monte Carlo sweep; writes results.csv, summary.csv, plot scripts and a manifest"),
        ))
        .subcommand(
            scenario_args(Command::new("single").about("one dropping with the full solver trace"))
                .arg(Arg::new("dropping").long("dropping").value_name("INDEX").default_value("0").value_parser(clap::value_parser!(usize))),
        )
        .subcommand(
            scenario_args(Command::new("oracle").about("compares the solver with exhaustive grid search on one dropping"))
                .arg(Arg::new("dropping").long("dropping").value_name("INDEX").default_value("0").value_parser(clap::value_parser!(usize)))
                .arg(
                    Arg::new("grid-points")
                        .long("grid-points")
                        .value_name("N")
                        .default_value("50")
                        .value_parser(clap::value_parser!(usize)),
                ),
        )
        .subcommand(
            Command::new("selftest")
                .about("runs the acceptance checks (reduced sample sizes unless --full)")
                .arg(Arg::new("full").long("full").action(ArgAction::SetTrue)),
        )
}

/// Defaults, then the config file, then the environment, then flags.
fn load_config(m: &ArgMatches) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    if let Some(path) = m.get_one::<String>("config") {
        cfg.apply_file(&PathBuf::from(path))?;
    }
    cfg.apply_env();
    for &k in KEYS {
        if let Some(v) = m.get_one::<String>(k) {
            cfg.set(k, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep(cfg: &ScenarioConfig) -> anyhow::Result<u8> {
    let rows = run_sweep(cfg)?;
    emit_outputs(&rows, cfg).with_context(|| format!("writing to {}", cfg.output_dir.display()))?;
    for s in summarize(&rows) {
        println!(
            "{:<18} {}={:<8} total SE {:>9.4} +- {:.4}  ({}/{} rows ok)",
            s.scheme.name(),
            s.sweep_param,
            s.sweep_value,
            s.total_se.0,
            s.total_se.1,
            s.succeeded,
            s.rows
        );
    }
    let failed = rows.iter().filter(|r| !r.succeeded()).count();
    println!("{} rows, {failed} failed, written to {}", rows.len(), cfg.output_dir.display());
    Ok(if failed > 0 { EXIT_FAILED_ROWS } else { 0 })
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(" ")
}

fn single(cfg: &ScenarioConfig, dropping: usize) -> anyhow::Result<u8> {
    let value = cfg.effective_sweep_values()[0];
    let (topo_cfg, fading) = cfg.at_sweep_value(value);
    let seed = dropping_seed(cfg.seed, dropping);
    let topo = drop_topology(&topo_cfg, seed)?;
    let channel = build_effective_gains(&topo, &fading, seed)?;
    println!("dropping {dropping} (seed {seed}): K={} N={} M={}", topo.num_mus(), topo.num_sbs(), topo.num_antennas);
    let problem = PowerProblem::proposed(&channel.gains, &fading, &cfg.solver.limits);
    let mut failed = false;
    match solve_problem(&problem, &cfg.solver, None) {
        Ok(rep) => {
            println!("feasibility slack per round: {}", fmt_vec(&rep.phase1_slack));
            println!("true objective per outer step: {}", fmt_vec(&rep.outer_trace));
            for (i, run) in rep.inner_runs.iter().enumerate() {
                println!("inner run {i}: {} iterations, converged {}, regressed {}", run.iterations(), run.converged, run.regressed);
                println!("  relaxed objective: {}", fmt_vec(&run.relaxed_trace));
                println!("  max violation: {}", fmt_vec(&run.violations));
            }
            println!("final powers [mu | bh | sbs] (W): {}", fmt_vec(&rep.final_powers));
            println!("final rates [mu | bh | su]: {}", fmt_vec(&rep.final_rates));
            println!("coupling gaps: {}", fmt_vec(&rep.c1_activity));
            println!("objective {:.6}, termination {}", rep.objective, rep.termination.as_str());
        }
        Err(e) => {
            println!("proposed: {e}");
            failed = true;
        }
    }
    for scheme in SchemeId::ALL {
        match run_scheme(scheme, &channel, &fading, &cfg.solver) {
            Ok(o) => println!(
                "{:<18} total {:.4}  mu {:.4}  su {:.4}  backhaul {:.4} W  {}",
                scheme.name(),
                o.total_se,
                o.mu_se,
                o.su_se,
                o.backhaul_power,
                o.termination.as_str()
            ),
            Err(e) => {
                println!("{:<18} {e}", scheme.name());
                failed = true;
            }
        }
    }
    Ok(if failed { EXIT_FAILED_ROWS } else { 0 })
}

fn oracle(cfg: &ScenarioConfig, dropping: usize, points: usize) -> anyhow::Result<u8> {
    let (topo_cfg, fading) = cfg.at_sweep_value(cfg.effective_sweep_values()[0]);
    let seed = dropping_seed(cfg.seed, dropping);
    let channel = build_effective_gains(&drop_topology(&topo_cfg, seed)?, &fading, seed)?;
    let problem = PowerProblem::proposed(&channel.gains, &fading, &cfg.solver.limits);
    let grid = GridSpec::new(points);
    let cccp = solve_problem(&problem, &cfg.solver, None);
    let bfs = bfs_oracle(&problem, &grid);
    match (cccp, bfs) {
        (Ok(c), Ok((p, b))) => {
            let slack = grid_resolution_slack(&problem, &grid, 200, seed)?;
            println!("solver objective {:.6} at {}", c.objective, fmt_vec(&c.final_powers));
            println!("grid objective   {b:.6} at {}", fmt_vec(&p));
            println!("grid resolution slack {slack:.4e}");
            let ok = c.objective >= 0.95 * b && b >= c.objective - slack;
            println!("{}", if ok { "consistent" } else { "INCONSISTENT" });
            Ok(if ok { 0 } else { EXIT_FAILED_ROWS })
        }
        (c, b) => {
            println!("solver: {}", c.map(|r| format!("{:.6}", r.objective)).unwrap_or_else(|e| e.to_string()));
            println!("grid:   {}", b.map(|(_, v)| format!("{v:.6}")).unwrap_or_else(|e| e.to_string()));
            Ok(EXIT_FAILED_ROWS)
        }
    }
}

fn selftest(full: bool) -> u8 {
    let scale = if full { Scale::full() } else { Scale::quick() };
    let results = run_all(&scale, |r| println!("{r}"));
    if results.iter().all(|r| r.passed) {
        0
    } else {
        EXIT_FAILED_ROWS
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    if name == "selftest" {
        return ExitCode::from(selftest(sub.get_flag("full")));
    }
    let cfg = match load_config(sub) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let run = match name {
        "sweep" => sweep(&cfg),
        "single" => single(&cfg, *sub.get_one::<usize>("dropping").expect("defaulted")),
        "oracle" => {
            oracle(&cfg, *sub.get_one::<usize>("dropping").expect("defaulted"), *sub.get_one::<usize>("grid-points").expect("defaulted"))
        }
        _ => unreachable!("clap rejects unknown subcommands"),
    };
    match run {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILED_ROWS)
        }
    }
}
