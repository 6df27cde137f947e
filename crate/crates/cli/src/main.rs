//! `dualoff`: solve, sweep and compare dual-connectivity offloading instances.

mod record;
mod reproduce;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};
use dualoff::scenarios::{self, ScenarioFile, Topology};
use dualoff::{centralized, distributed, NetworkInstance, SolverConfig};
use rayon::prelude::*;
use serde::Serialize;

use record::{RunRecord, Sink, Status, SCHEMA_VERSION};
use reproduce::{ReproduceOptions, Table};
use run::{Algo, InstanceArgs, RunSpec, SolverArgs, BPS_PER_MBPS};

#[derive(Debug, Parser)]
#[command(name = "dualoff", version, about)]
struct Cli {
    /// Worker threads for sweeps and grid scans. Defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for the oracle's multistart and for random placements.
    #[arg(long, global = true, env = "DUALOFF_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Append rows to this CSV file instead of printing them.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fill the wall_time_s column. Output is no longer reproducible.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance. Exits 0 when solved, 2 when infeasible, 3 when
    /// the algorithm's bandwidth assumption fails and 1 on bad input.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Algo::Dis)]
        algo: Algo,
        /// Share of each demand sent to the AP by `--algo fixed`.
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
    },
    /// Solve a uniform-demand sweep, one row per (demand, algorithm).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "dis")]
        algo: Vec<Algo>,
        #[arg(long = "from-mbps")]
        from_mbps: f64,
        #[arg(long = "to-mbps")]
        to_mbps: f64,
        #[arg(long = "step-mbps", default_value_t = 1.0)]
        step_mbps: f64,
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
    },
    /// Solve random placements around each circle center.
    Locations {
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Algo::Dis)]
        algo: Algo,
        /// Circle center x coordinates in meters.
        #[arg(long = "centers-m", value_delimiter = ',', default_value = "170,220,270,320")]
        centers_m: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 4)]
        mus: usize,
        #[arg(long = "demand-mbps", default_value_t = 4.0)]
        demand_mbps: f64,
        #[arg(long = "gain-scale", default_value_t = 100.0)]
        gain_scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Adaptive offloading against zero and fixed offloading.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Solver used for the adaptive scheme.
        #[arg(long, value_enum, default_value_t = Algo::Dis)]
        algo: Algo,
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
    },
    /// Feasible-ratio of the rho0 grid, per demand or per grid point.
    Feasibility {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Algo::Dis)]
        algo: Algo,
        /// Demands to scan in Mbit/s. Defaults to the instance's own.
        #[arg(long = "demands-mbps", value_delimiter = ',')]
        demands_mbps: Vec<f64>,
        /// One row per grid point instead of one per demand.
        #[arg(long)]
        detail: bool,
    },
    /// Regenerate a reference table or figure as `<out>/<table>.csv`.
    Reproduce {
        #[arg(long, value_enum)]
        table: Table,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Solver for the adaptive scheme in fig5, fig8 and locations.
        #[arg(long, value_enum, default_value_t = Algo::Dis)]
        algo: Algo,
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 4)]
        mus: usize,
        #[arg(long = "gain-scale", default_value_t = 100.0)]
        gain_scale: f64,
    },
    /// Print a built-in instance as a scenario file.
    ExportBuiltin {
        name: String,
        #[arg(long = "demand-mbps")]
        demand_mbps: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    let seed = cli.seed;
    match cli.command {
        Command::Solve { common, algo, fraction } => {
            let loaded = run::load(&common.instance)?;
            let cfg = loaded.config(&common.solver)?;
            let spec = RunSpec { algo, cfg, fraction, seed, timing: common.timing };
            let rec = run::execute(&loaded.id, &loaded.inst, &spec)?;
            let code = rec.status.exit_code() as u8;
            Sink::append_or_stdout(common.out.as_deref()).write(&[rec])?;
            Ok(code)
        }
        Command::Sweep { common, algo, from_mbps, to_mbps, step_mbps, fraction } => {
            let loaded = run::load(&common.instance)?;
            let cfg = loaded.config(&common.solver)?;
            let insts = scenarios::demand_sweep(
                &loaded.inst,
                from_mbps * BPS_PER_MBPS,
                to_mbps * BPS_PER_MBPS,
                step_mbps * BPS_PER_MBPS,
            )?;
            let jobs: Vec<(NetworkInstance, Algo)> =
                insts.into_iter().flat_map(|i| algo.iter().map(move |a| (i.clone(), *a))).collect();
            let rows: Vec<RunRecord> = jobs
                .par_iter()
                .map(|(inst, a)| {
                    let spec = RunSpec { algo: *a, cfg, fraction, seed, timing: common.timing };
                    run::execute(&loaded.id, inst, &spec)
                })
                .collect::<anyhow::Result<_>>()?;
            Sink::append_or_stdout(common.out.as_deref()).write(&rows)?;
            Ok(0)
        }
        Command::Locations { solver, algo, centers_m, draws, mus, demand_mbps, gain_scale, out, timing } => {
            let cfg = run::resolve_config(&solver, Default::default())?;
            let base = Topology { seed, gain_scale, ..Topology::default() };
            let centers: Vec<[f64; 2]> = centers_m.iter().map(|x| [*x, 0.0]).collect();
            let sweep = scenarios::location_sweep(&base, &centers, draws, mus, demand_mbps * BPS_PER_MBPS)?;
            let spec = RunSpec { algo, cfg, fraction: 0.5, seed, timing };
            let rows: Vec<RunRecord> = sweep
                .par_iter()
                .map(|d| {
                    let id = format!("loc-x{}-d{}", d.center[0], d.draw);
                    run::execute(&id, &d.instance, &spec)
                })
                .collect::<anyhow::Result<_>>()?;
            Sink::append_or_stdout(out.as_deref()).write(&rows)?;
            Ok(0)
        }
        Command::Compare { common, algo, fraction } => {
            let loaded = run::load(&common.instance)?;
            let cfg = loaded.config(&common.solver)?;
            let rows = run::compare_schemes(&loaded.id, &loaded.inst, algo, cfg, fraction, seed, common.timing)?;
            Sink::append_or_stdout(common.out.as_deref()).write(&rows)?;
            Ok(0)
        }
        Command::Feasibility { common, algo, demands_mbps, detail } => {
            let loaded = run::load(&common.instance)?;
            let cfg = loaded.config(&common.solver)?;
            let insts: Vec<NetworkInstance> = if demands_mbps.is_empty() {
                vec![loaded.inst.clone()]
            } else {
                demands_mbps.iter().map(|r| loaded.inst.with_uniform_demand(r * BPS_PER_MBPS)).collect()
            };
            let sink = Sink::append_or_stdout(common.out.as_deref());
            let mut summary = Vec::new();
            let mut points = Vec::new();
            for inst in &insts {
                let scan = feasibility_scan(&loaded.id, inst, algo, &cfg)?;
                summary.push(scan.summary);
                points.extend(scan.points);
            }
            if detail {
                sink.write(&points)?;
            } else {
                sink.write(&summary)?;
            }
            Ok(0)
        }
        Command::Reproduce { table, out, solver, algo, draws, mus, gain_scale } => {
            let cfg = run::resolve_config(&solver, Default::default())?;
            let opts = ReproduceOptions { cfg, seed, adaptive: algo, draws, location_mus: mus, gain_scale };
            reproduce::reproduce(table, &out, &opts)?;
            Ok(0)
        }
        Command::ExportBuiltin { name, demand_mbps } => {
            let mut inst = scenarios::paper_instance(&name)?;
            if let Some(r) = demand_mbps {
                inst = inst.with_uniform_demand(r * BPS_PER_MBPS);
            }
            println!("{}", ScenarioFile::from_instance(&inst).to_json());
            Ok(0)
        }
    }
}

#[derive(Debug, Serialize)]
struct FeasibilitySummary {
    schema_version: u32,
    instance: String,
    algorithm: &'static str,
    status: Status,
    demand_bps: f64,
    grid_points: usize,
    feasible_points: usize,
    feasible_ratio: f64,
    delta_top: f64,
    delta_sub: f64,
    epsilon_polyblock: f64,
    max_polyblock_iters: usize,
}

#[derive(Debug, Serialize)]
struct FeasibilityPoint {
    schema_version: u32,
    instance: String,
    algorithm: &'static str,
    demand_bps: f64,
    rho0: f64,
    feasible: bool,
    /// Inner objective plus `price_bs * sum(R)`.
    cost_usd_per_s: Option<f64>,
    delta_top: f64,
    delta_sub: f64,
    epsilon_polyblock: f64,
    max_polyblock_iters: usize,
}

struct Scan {
    summary: FeasibilitySummary,
    points: Vec<FeasibilityPoint>,
}

fn feasibility_scan(id: &str, inst: &NetworkInstance, algo: Algo, cfg: &SolverConfig) -> anyhow::Result<Scan> {
    if !matches!(algo, Algo::Cen | Algo::Dis) {
        bail!("feasibility scans need --algo cen or --algo dis");
    }
    let demand = inst.mus.first().map(|m| m.demand).unwrap_or(0.0);
    let grid = cfg.rho0_grid();
    let summary = |status, feasible_points| FeasibilitySummary {
        schema_version: SCHEMA_VERSION,
        instance: id.to_string(),
        algorithm: algo.name(),
        status,
        demand_bps: demand,
        grid_points: grid.len(),
        feasible_points,
        feasible_ratio: feasible_points as f64 / grid.len() as f64,
        delta_top: cfg.delta_top,
        delta_sub: cfg.delta_sub,
        epsilon_polyblock: cfg.epsilon_polyblock,
        max_polyblock_iters: cfg.max_polyblock_iters,
    };
    if algo == Algo::Dis && inst.w_ap < inst.b_bs {
        return Ok(Scan { summary: summary(Status::AssumptionViolated, 0), points: Vec::new() });
    }
    let base = inst.price_bs * inst.total_demand();
    let gp: Vec<_> = grid
        .par_iter()
        .map(|r0| match algo {
            Algo::Cen => centralized::cen_grid_point(*r0, inst, cfg),
            _ => distributed::dis_grid_point(*r0, inst, cfg),
        })
        .collect();
    let points: Vec<FeasibilityPoint> = gp
        .iter()
        .map(|g| FeasibilityPoint {
            schema_version: SCHEMA_VERSION,
            instance: id.to_string(),
            algorithm: algo.name(),
            demand_bps: demand,
            rho0: g.rho0,
            feasible: g.feasible,
            cost_usd_per_s: g.result.as_ref().filter(|r| r.is_feasible()).map(|r| base + r.value),
            delta_top: cfg.delta_top,
            delta_sub: cfg.delta_sub,
            epsilon_polyblock: cfg.epsilon_polyblock,
            max_polyblock_iters: cfg.max_polyblock_iters,
        })
        .collect();
    let feasible = points.iter().filter(|p| p.cost_usd_per_s.is_some()).count();
    let status = if feasible > 0 { Status::Optimal } else { Status::Infeasible };
    Ok(Scan { summary: summary(status, feasible), points })
}
