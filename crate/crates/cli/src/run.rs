//! Instance loading, configuration resolution and algorithm dispatch.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use dualoff::scenarios::{self, ScenarioFile, SolverOverrides};
use dualoff::{centralized, distributed, oracle, Error, NetworkInstance, SolverConfig, SubproblemStatus};

use crate::record::{RunContext, RunRecord, Status};

pub const BPS_PER_MBPS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Cen,
    Dis,
    Oracle,
    Zero,
    Fixed,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Cen => "cen",
            Algo::Dis => "dis",
            Algo::Oracle => "oracle",
            Algo::Zero => "zero",
            Algo::Fixed => "fixed",
        }
    }
}

/// Where the instance comes from.
#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    /// Scenario file (JSON).
    #[arg(value_name = "SCENARIO", conflicts_with = "builtin", required_unless_present = "builtin")]
    pub scenario: Option<PathBuf>,
    /// Built-in instance: mu4, mu8 or mu12.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Gives every user this demand, in Mbit/s.
    #[arg(long = "demand-mbps")]
    pub demand_mbps: Option<f64>,
    /// Overrides the AP bandwidth, in MHz.
    #[arg(long = "w-ap-mhz")]
    pub w_ap_mhz: Option<f64>,
}

/// Solver flags. Anything set here wins over the scenario file's `solver`
/// section, which wins over the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub dtop: Option<f64>,
    #[arg(long)]
    pub dsub: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "bisection-tol")]
    pub bisection_tol: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
}

impl SolverArgs {
    fn overrides(&self) -> SolverOverrides {
        SolverOverrides {
            delta_top: self.dtop,
            delta_sub: self.dsub,
            epsilon_polyblock: self.eps,
            bisection_tol: self.bisection_tol,
            max_polyblock_iters: self.max_iters,
        }
    }
}

pub struct Loaded {
    pub id: String,
    pub inst: NetworkInstance,
    pub file_solver: SolverOverrides,
}

impl Loaded {
    pub fn config(&self, flags: &SolverArgs) -> anyhow::Result<SolverConfig> {
        resolve_config(flags, self.file_solver)
    }
}

pub fn resolve_config(flags: &SolverArgs, file: SolverOverrides) -> anyhow::Result<SolverConfig> {
    let cfg = flags.overrides().over(file).apply(SolverConfig::default());
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(args: &InstanceArgs) -> anyhow::Result<Loaded> {
    let (mut id, mut inst, file_solver) = match (&args.scenario, &args.builtin) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let file = match ScenarioFile::parse(&text) {
                Ok(f) => f,
                Err(Error::ScenarioParse { line, column, message }) => {
                    bail!("{}:{line}:{column}: {message}", path.display())
                }
                Err(e) => return Err(e.into()),
            };
            let inst = file.to_instance().with_context(|| format!("{}", path.display()))?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            (stem, inst, file.solver.unwrap_or_default())
        }
        (None, Some(name)) => (name.clone(), scenarios::paper_instance(name)?, SolverOverrides::default()),
        (None, None) => bail!("either a scenario file or --builtin is required"),
    };
    if let Some(r) = args.demand_mbps {
        inst = inst.with_uniform_demand(r * BPS_PER_MBPS);
    }
    if let Some(w) = args.w_ap_mhz {
        inst.w_ap = w * 1e6;
        id = format!("{id}-w{w}");
    }
    let inst = inst.validated()?;
    Ok(Loaded { id, inst, file_solver })
}

/// Everything needed to run one algorithm on one instance.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub algo: Algo,
    pub cfg: SolverConfig,
    pub fraction: f64,
    pub seed: u64,
    pub timing: bool,
}

pub fn execute(id: &str, inst: &NetworkInstance, spec: &RunSpec) -> anyhow::Result<RunRecord> {
    let ctx = RunContext {
        instance: id.to_string(),
        algorithm: spec.algo.name().to_string(),
        cfg: spec.cfg,
        fixed_fraction: (spec.algo == Algo::Fixed).then_some(spec.fraction),
        seed: spec.seed,
    };
    let start = Instant::now();
    let mut rec = match spec.algo {
        Algo::Cen | Algo::Dis => {
            let outcome = if spec.algo == Algo::Cen {
                centralized::cen_search(inst, &spec.cfg)
            } else {
                distributed::dis_search(inst, &spec.cfg)
            };
            match outcome {
                Ok(o) => {
                    let status = match o.best.status {
                        SubproblemStatus::IterCapReached => Status::IterCapReached,
                        _ => Status::Optimal,
                    };
                    RunRecord::new(&ctx, inst, status, Some(&o.solution), Some(o.feasible_ratio), Some(o.best.rho0))
                }
                Err(e) => RunRecord::new(&ctx, inst, failure_status(e)?, None, None, None),
            }
        }
        Algo::Oracle => {
            let cfg = oracle::OracleConfig { seed: spec.seed, ..Default::default() };
            match oracle::grid_oracle(inst, &cfg) {
                Ok(sol) => RunRecord::new(&ctx, inst, Status::Optimal, Some(&sol), None, None),
                Err(e) => RunRecord::new(&ctx, inst, failure_status(e)?, None, None, None),
            }
        }
        Algo::Zero => baseline(&ctx, inst, oracle::zero_offloading(inst)),
        Algo::Fixed => baseline(&ctx, inst, oracle::fixed_offloading(inst, spec.fraction)?),
    };
    if spec.timing {
        rec.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(rec)
}

/// Rows of `compare`: one per scheme, in a fixed order.
pub fn compare_schemes(
    id: &str,
    inst: &NetworkInstance,
    adaptive: Algo,
    cfg: SolverConfig,
    fraction: f64,
    seed: u64,
    timing: bool,
) -> anyhow::Result<Vec<RunRecord>> {
    [adaptive, Algo::Zero, Algo::Fixed]
        .iter()
        .map(|a| execute(id, inst, &RunSpec { algo: *a, cfg, fraction, seed, timing }))
        .collect()
}

fn baseline(ctx: &RunContext, inst: &NetworkInstance, sol: dualoff::AllocationSolution) -> RunRecord {
    let status = if sol.feasible { Status::Optimal } else { Status::Infeasible };
    RunRecord::new(ctx, inst, status, Some(&sol), None, None)
}

fn failure_status(e: Error) -> anyhow::Result<Status> {
    match e {
        Error::GlobalInfeasible => Ok(Status::Infeasible),
        Error::AssumptionViolated { .. } => Ok(Status::AssumptionViolated),
        other => Err(other.into()),
    }
}
