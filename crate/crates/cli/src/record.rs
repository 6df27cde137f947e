//! Run records and the CSV writers shared by every subcommand.

use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::Path;

use dualoff::{AllocationSolution, SolverConfig};
use serde::Serialize;

/// Bumped whenever a column is added, removed or reinterpreted.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Optimal,
    Infeasible,
    AssumptionViolated,
    IterCapReached,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Optimal | Status::IterCapReached => 0,
            Status::Infeasible => 2,
            Status::AssumptionViolated => 3,
        }
    }
}

/// One solver run, flattened to a CSV row. Per-user vectors are joined
/// with `;`.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub instance: String,
    pub algorithm: String,
    pub status: Status,
    pub n_mus: usize,
    /// Empty when users have different demands.
    pub demand_bps: Option<f64>,
    pub total_demand_bps: f64,
    pub cost_usd_per_s: Option<f64>,
    pub offload_ratio: Option<f64>,
    pub feasible_ratio: Option<f64>,
    pub rho0: Option<f64>,
    pub x_ap_bps: String,
    pub x_bs_bps: String,
    pub p_ap_w: String,
    pub p_bs_w: String,
    pub delta_top: f64,
    pub delta_sub: f64,
    pub epsilon_polyblock: f64,
    pub bisection_tol: f64,
    pub max_polyblock_iters: usize,
    pub fixed_fraction: Option<f64>,
    pub seed: u64,
    /// Left empty unless timing was requested, so reruns stay byte-identical.
    pub wall_time_s: Option<f64>,
}

/// Fields that do not depend on the solver outcome.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub instance: String,
    pub algorithm: String,
    pub cfg: SolverConfig,
    pub fixed_fraction: Option<f64>,
    pub seed: u64,
}

pub fn join(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    parts.join(";")
}

impl RunRecord {
    pub fn new(
        ctx: &RunContext,
        inst: &dualoff::NetworkInstance,
        status: Status,
        solution: Option<&AllocationSolution>,
        feasible_ratio: Option<f64>,
        rho0: Option<f64>,
    ) -> Self {
        let first = inst.mus.first().map(|m| m.demand);
        let uniform = first.filter(|d| inst.mus.iter().all(|m| m.demand == *d));
        // Baselines pass their plan even when it breaks a cap, so its cost
        // stays visible next to an Infeasible status.
        let sol = solution;
        Self {
            schema_version: SCHEMA_VERSION,
            instance: ctx.instance.clone(),
            algorithm: ctx.algorithm.clone(),
            status,
            n_mus: inst.len(),
            demand_bps: uniform,
            total_demand_bps: inst.total_demand(),
            cost_usd_per_s: sol.map(|s| s.total_cost),
            offload_ratio: sol.map(|s| s.offload_ratio),
            feasible_ratio,
            rho0,
            x_ap_bps: sol.map(|s| join(&s.x_ap)).unwrap_or_default(),
            x_bs_bps: sol.map(|s| join(&s.x_bs)).unwrap_or_default(),
            p_ap_w: sol.map(|s| join(&s.p_ap)).unwrap_or_default(),
            p_bs_w: sol.map(|s| join(&s.p_bs)).unwrap_or_default(),
            delta_top: ctx.cfg.delta_top,
            delta_sub: ctx.cfg.delta_sub,
            epsilon_polyblock: ctx.cfg.epsilon_polyblock,
            bisection_tol: ctx.cfg.bisection_tol,
            max_polyblock_iters: ctx.cfg.max_polyblock_iters,
            fixed_fraction: ctx.fixed_fraction,
            seed: ctx.seed,
            wall_time_s: None,
        }
    }
}

/// Destination of a CSV stream: stdout or a file that is appended to.
pub enum Sink {
    Stdout,
    Append(std::path::PathBuf),
}

impl Sink {
    pub fn append_or_stdout(path: Option<&Path>) -> Self {
        match path {
            Some(p) => Sink::Append(p.to_path_buf()),
            None => Sink::Stdout,
        }
    }

    /// Writes `rows`. A header is emitted unless an existing non-empty file
    /// is being appended to.
    pub fn write<T: Serialize>(&self, rows: &[T]) -> anyhow::Result<()> {
        let (out, header): (Box<dyn Write>, bool) = match self {
            Sink::Stdout => (Box::new(io::stdout().lock()), true),
            Sink::Append(p) => {
                let fresh = std::fs::metadata(p).map(|m| m.len() == 0).unwrap_or(true);
                let f = OpenOptions::new().create(true).append(true).open(p)?;
                (Box::new(f), fresh)
            }
        };
        write_rows(out, rows, header)
    }
}

pub fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T], header: bool) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
