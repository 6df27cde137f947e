//! Regeneration of the published result tables and figure data as CSV.

use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use dualoff::scenarios::{self, Topology};
use dualoff::transforms::complete_offloading_check;
use dualoff::{NetworkInstance, SolverConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::record::{Status, SCHEMA_VERSION};
use crate::run::{execute, Algo, RunSpec, BPS_PER_MBPS};

/// Published costs ($/s) for the 8-user built-in, one per demand.
pub mod reference {
    pub const T1_DEMANDS_MBPS: [f64; 7] = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    /// Global solver baseline.
    pub const T1_GLOBAL: [f64; 7] = [0.032, 0.048, 0.073, 0.149, 0.225, 0.303, 0.381];
    pub const T1_CEN: [f64; 7] = [0.033, 0.049, 0.074, 0.152, 0.232, 0.312, 0.393];
    pub const T1_DIS: [f64; 7] = [0.032, 0.049, 0.074, 0.150, 0.226, 0.306, 0.392];

    /// Same users with the AP bandwidth cut to 4 MHz.
    pub const T2_DEMANDS_MBPS: [f64; 7] = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];
    pub const T2_W_AP: f64 = 4e6;
    pub const T2_GLOBAL: [f64; 7] = [0.03, 0.069, 0.107, 0.146, 0.184, 0.225, 0.276];
    pub const T2_CEN: [f64; 7] = [0.031, 0.07, 0.11, 0.15, 0.189, 0.228, 0.267];

    /// Step-size study on the 4-user built-in.
    pub const STEP_DELTAS: [f64; 4] = [0.01, 0.005, 0.0025, 0.001];
    pub const STEP_DEMANDS_MBPS: [f64; 12] = [3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0];
    pub const T3_CEN: [[f64; 12]; 4] = [
        [0.0253, 0.0341, 0.0418, 0.0511, 0.0565, 0.0666, 0.0965, 0.1328, 0.1744, 0.2158, 0.2565, 0.2967],
        [0.0253, 0.0327, 0.0404, 0.0497, 0.0565, 0.0651, 0.0950, 0.1315, 0.1728, 0.2142, 0.2547, 0.2967],
        [0.0246, 0.0327, 0.0404, 0.0490, 0.0565, 0.0643, 0.0950, 0.1315, 0.1728, 0.2142, 0.2547, 0.2959],
        [0.0245, 0.0325, 0.0404, 0.0486, 0.0565, 0.0645, 0.0950, 0.1315, 0.1722, 0.2133, 0.2547, 0.2957],
    ];
    pub const T4_DIS: [[f64; 12]; 4] = [
        [0.0252, 0.0340, 0.0417, 0.0482, 0.0564, 0.0664, 0.0964, 0.1326, 0.1725, 0.2118, 0.2531, 0.2960],
        [0.0252, 0.0327, 0.0403, 0.0482, 0.0564, 0.0649, 0.0950, 0.1313, 0.1710, 0.2104, 0.2516, 0.2960],
        [0.0245, 0.0320, 0.0403, 0.0482, 0.0564, 0.0643, 0.0950, 0.1313, 0.1710, 0.2104, 0.2516, 0.2951],
        [0.0242, 0.0321, 0.0400, 0.0482, 0.0561, 0.0640, 0.0949, 0.1313, 0.1701, 0.2104, 0.2516, 0.2951],
    ];

    /// Circle centers (m) of the location study.
    pub const LOCATION_CENTERS_X_M: [f64; 4] = [170.0, 220.0, 270.0, 320.0];
    pub const LOCATION_DEMANDS_MBPS: [f64; 3] = [4.0, 8.0, 12.0];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    T1,
    T2,
    T3,
    T4,
    Fig5,
    Fig8,
    Locations,
}

impl Table {
    pub fn file_name(self) -> &'static str {
        match self {
            Table::T1 => "t1.csv",
            Table::T2 => "t2.csv",
            Table::T3 => "t3.csv",
            Table::T4 => "t4.csv",
            Table::Fig5 => "fig5.csv",
            Table::Fig8 => "fig8.csv",
            Table::Locations => "locations.csv",
        }
    }
}

pub struct ReproduceOptions {
    pub cfg: SolverConfig,
    pub seed: u64,
    /// Solver standing in for the adaptive scheme in fig5, fig8 and locations.
    pub adaptive: Algo,
    pub draws: usize,
    pub location_mus: usize,
    pub gain_scale: f64,
}

pub fn reproduce(table: Table, out_dir: &Path, opts: &ReproduceOptions) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let path = out_dir.join(table.file_name());
    let file = std::fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    match table {
        Table::T1 => {
            let inst = scenarios::paper_instance("mu8")?;
            let mut t = WideTable::new(&reference::T1_DEMANDS_MBPS);
            t.reference_row("global", &opts.cfg, &reference::T1_GLOBAL);
            for (algo, refs) in [(Algo::Cen, &reference::T1_CEN), (Algo::Dis, &reference::T1_DIS)] {
                t.solver_rows(&inst, algo, opts.cfg, opts.seed, Some(refs))?;
            }
            t.write(file)
        }
        Table::T2 => {
            let mut inst = scenarios::paper_instance("mu8")?;
            inst.w_ap = reference::T2_W_AP;
            let mut t = WideTable::new(&reference::T2_DEMANDS_MBPS);
            t.reference_row("global", &opts.cfg, &reference::T2_GLOBAL);
            t.solver_rows(&inst, Algo::Cen, opts.cfg, opts.seed, Some(&reference::T2_CEN))?;
            t.write(file)
        }
        Table::T3 | Table::T4 => {
            let inst = scenarios::paper_instance("mu4")?;
            let (algo, refs) = if table == Table::T3 {
                (Algo::Cen, &reference::T3_CEN)
            } else {
                (Algo::Dis, &reference::T4_DIS)
            };
            let mut t = WideTable::new(&reference::STEP_DEMANDS_MBPS);
            for (dtop, row) in reference::STEP_DELTAS.iter().zip(refs) {
                let cfg = SolverConfig { delta_top: *dtop, ..opts.cfg };
                t.solver_rows(&inst, algo, cfg, opts.seed, Some(row))?;
            }
            t.write(file)
        }
        Table::Fig5 => {
            let inst = scenarios::paper_instance("mu4")?;
            let demands: Vec<f64> = (1..=14).map(f64::from).collect();
            let rows = offloading_process(&inst, &demands, opts)?;
            crate::record::write_rows(file, &rows, true)
        }
        Table::Fig8 => {
            let mut rows = Vec::new();
            for (name, top) in [("mu4", 14), ("mu8", 8)] {
                let inst = scenarios::paper_instance(name)?;
                let demands: Vec<f64> = (1..=top).map(f64::from).collect();
                rows.extend(scheme_comparison(name, &inst, &demands, opts)?);
            }
            crate::record::write_rows(file, &rows, true)
        }
        Table::Locations => {
            let rows = location_study(opts)?;
            crate::record::write_rows(file, &rows, true)
        }
    }
}

fn spec(algo: Algo, cfg: SolverConfig, seed: u64) -> RunSpec {
    RunSpec { algo, cfg, fraction: 0.5, seed, timing: false }
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn rel_dev(value: Option<f64>, reference: f64) -> Option<f64> {
    value.map(|v| (v - reference) / reference)
}

/// One column per demand, one row per (algorithm, step, quantity).
struct WideTable {
    demands: Vec<f64>,
    rows: Vec<Vec<String>>,
}

impl WideTable {
    fn new(demands: &[f64]) -> Self {
        Self { demands: demands.to_vec(), rows: Vec::new() }
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["schema_version", "algorithm", "delta_top", "delta_sub", "epsilon_polyblock", "max_polyblock_iters", "quantity"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend(self.demands.iter().map(|r| format!("r_{r}_mbps")));
        h
    }

    fn push(&mut self, algorithm: &str, cfg: &SolverConfig, quantity: &str, cells: Vec<String>) {
        let mut row = vec![
            SCHEMA_VERSION.to_string(),
            algorithm.into(),
            cfg.delta_top.to_string(),
            cfg.delta_sub.to_string(),
            cfg.epsilon_polyblock.to_string(),
            cfg.max_polyblock_iters.to_string(),
            quantity.into(),
        ];
        row.extend(cells);
        self.rows.push(row);
    }

    fn reference_row(&mut self, algorithm: &str, cfg: &SolverConfig, refs: &[f64]) {
        self.push(algorithm, cfg, "reference_cost_usd_per_s", refs.iter().map(|v| v.to_string()).collect());
    }

    fn solver_rows(
        &mut self,
        inst: &NetworkInstance,
        algo: Algo,
        cfg: SolverConfig,
        seed: u64,
        refs: Option<&[f64]>,
    ) -> anyhow::Result<()> {
        let s = spec(algo, cfg, seed);
        let records: Vec<_> = self
            .demands
            .par_iter()
            .map(|r| execute("", &inst.with_uniform_demand(r * BPS_PER_MBPS), &s))
            .collect::<anyhow::Result<_>>()?;
        let name = algo.name();
        self.push(name, &cfg, "status", records.iter().map(|r| format!("{:?}", r.status)).collect());
        self.push(name, &cfg, "cost_usd_per_s", records.iter().map(|r| fmt(r.cost_usd_per_s)).collect());
        if let Some(refs) = refs {
            self.reference_row(name, &cfg, refs);
            let devs = records.iter().zip(refs).map(|(r, x)| fmt(rel_dev(r.cost_usd_per_s, *x))).collect();
            self.push(name, &cfg, "rel_dev", devs);
        }
        self.push(name, &cfg, "feasible_ratio", records.iter().map(|r| fmt(r.feasible_ratio)).collect());
        self.push(name, &cfg, "offload_ratio", records.iter().map(|r| fmt(r.offload_ratio)).collect());
        Ok(())
    }

    fn write<W: std::io::Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct ProcessRow {
    schema_version: u32,
    algorithm: &'static str,
    demand_mbps: f64,
    status: Status,
    ap_traffic_bps: Option<f64>,
    bs_traffic_bps: Option<f64>,
    ap_power_w: Option<f64>,
    bs_power_w: Option<f64>,
    offload_ratio: Option<f64>,
    cost_usd_per_s: Option<f64>,
    complete_offloading_predicted: bool,
    x_ap_bps: String,
    p_ap_w: String,
    delta_top: f64,
    delta_sub: f64,
    epsilon_polyblock: f64,
}

fn sum_list(s: &str) -> Option<f64> {
    if s.is_empty() {
        return None;
    }
    Some(s.split(';').map(|v| v.parse::<f64>().unwrap_or(0.0)).sum())
}

fn offloading_process(inst: &NetworkInstance, demands: &[f64], opts: &ReproduceOptions) -> anyhow::Result<Vec<ProcessRow>> {
    let s = spec(opts.adaptive, opts.cfg, opts.seed);
    demands
        .par_iter()
        .map(|r| {
            let at = inst.with_uniform_demand(r * BPS_PER_MBPS);
            let rec = execute("mu4", &at, &s)?;
            Ok(ProcessRow {
                schema_version: SCHEMA_VERSION,
                algorithm: opts.adaptive.name(),
                demand_mbps: *r,
                status: rec.status,
                ap_traffic_bps: sum_list(&rec.x_ap_bps),
                bs_traffic_bps: sum_list(&rec.x_bs_bps),
                ap_power_w: sum_list(&rec.p_ap_w),
                bs_power_w: sum_list(&rec.p_bs_w),
                offload_ratio: rec.offload_ratio,
                cost_usd_per_s: rec.cost_usd_per_s,
                complete_offloading_predicted: complete_offloading_check(&at).holds,
                x_ap_bps: rec.x_ap_bps,
                p_ap_w: rec.p_ap_w,
                delta_top: opts.cfg.delta_top,
                delta_sub: opts.cfg.delta_sub,
                epsilon_polyblock: opts.cfg.epsilon_polyblock,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ComparisonRow {
    schema_version: u32,
    instance: String,
    demand_mbps: f64,
    adaptive_algorithm: &'static str,
    adaptive_cost_usd_per_s: Option<f64>,
    zero_cost_usd_per_s: Option<f64>,
    fixed_cost_usd_per_s: Option<f64>,
    fixed_fraction: f64,
    saving_vs_zero: Option<f64>,
    saving_vs_fixed: Option<f64>,
    delta_top: f64,
    delta_sub: f64,
    epsilon_polyblock: f64,
}

fn saving(adaptive: Option<f64>, other: Option<f64>) -> Option<f64> {
    Some(1.0 - adaptive? / other?)
}

fn scheme_comparison(
    name: &str,
    inst: &NetworkInstance,
    demands: &[f64],
    opts: &ReproduceOptions,
) -> anyhow::Result<Vec<ComparisonRow>> {
    demands
        .par_iter()
        .map(|r| {
            let at = inst.with_uniform_demand(r * BPS_PER_MBPS);
            let cost = |algo| execute(name, &at, &spec(algo, opts.cfg, opts.seed)).map(|rec| rec.cost_usd_per_s.filter(|_| rec.status != Status::Infeasible));
            let adaptive = cost(opts.adaptive)?;
            let zero = cost(Algo::Zero)?;
            let fixed = cost(Algo::Fixed)?;
            Ok(ComparisonRow {
                schema_version: SCHEMA_VERSION,
                instance: name.to_string(),
                demand_mbps: *r,
                adaptive_algorithm: opts.adaptive.name(),
                adaptive_cost_usd_per_s: adaptive,
                zero_cost_usd_per_s: zero,
                fixed_cost_usd_per_s: fixed,
                fixed_fraction: 0.5,
                saving_vs_zero: saving(adaptive, zero),
                saving_vs_fixed: saving(adaptive, fixed),
                delta_top: opts.cfg.delta_top,
                delta_sub: opts.cfg.delta_sub,
                epsilon_polyblock: opts.cfg.epsilon_polyblock,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct LocationRow {
    schema_version: u32,
    algorithm: &'static str,
    center_x_m: f64,
    demand_mbps: f64,
    n_mus: usize,
    draws: usize,
    feasible_draws: usize,
    mean_ap_traffic_bps: Option<f64>,
    mean_bs_traffic_bps: Option<f64>,
    mean_cost_usd_per_s: Option<f64>,
    gain_scale: f64,
    seed: u64,
    delta_top: f64,
    delta_sub: f64,
    epsilon_polyblock: f64,
}

/// Averages over the draws whose instance is feasible.
fn location_study(opts: &ReproduceOptions) -> anyhow::Result<Vec<LocationRow>> {
    let base = Topology { seed: opts.seed, gain_scale: opts.gain_scale, ..Topology::default() };
    let centers: Vec<[f64; 2]> = reference::LOCATION_CENTERS_X_M.iter().map(|x| [*x, 0.0]).collect();
    let draws = scenarios::location_sweep(&base, &centers, opts.draws, opts.location_mus, scenarios::DEFAULT_DEMAND)?;
    let s = spec(opts.adaptive, opts.cfg, opts.seed);
    let mut rows = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        let group = &draws[c * opts.draws..(c + 1) * opts.draws];
        for r in reference::LOCATION_DEMANDS_MBPS {
            let records: Vec<_> = group
                .par_iter()
                .map(|d| execute("", &d.instance.with_uniform_demand(r * BPS_PER_MBPS), &s))
                .collect::<anyhow::Result<_>>()?;
            let ok: Vec<_> = records.iter().filter(|r| r.status != Status::Infeasible && r.cost_usd_per_s.is_some()).collect();
            let mean = |f: &dyn Fn(&crate::record::RunRecord) -> Option<f64>| {
                if ok.is_empty() {
                    None
                } else {
                    Some(ok.iter().filter_map(|r| f(r)).sum::<f64>() / ok.len() as f64)
                }
            };
            rows.push(LocationRow {
                schema_version: SCHEMA_VERSION,
                algorithm: opts.adaptive.name(),
                center_x_m: center[0],
                demand_mbps: r,
                n_mus: opts.location_mus,
                draws: opts.draws,
                feasible_draws: ok.len(),
                mean_ap_traffic_bps: mean(&|r| sum_list(&r.x_ap_bps)),
                mean_bs_traffic_bps: mean(&|r| sum_list(&r.x_bs_bps)),
                mean_cost_usd_per_s: mean(&|r| r.cost_usd_per_s),
                gain_scale: opts.gain_scale,
                seed: opts.seed,
                delta_top: opts.cfg.delta_top,
                delta_sub: opts.cfg.delta_sub,
                epsilon_polyblock: opts.cfg.epsilon_polyblock,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_shapes() {
        assert_eq!(reference::T1_CEN.len(), reference::T1_DEMANDS_MBPS.len());
        assert_eq!(reference::T3_CEN[0].len(), reference::STEP_DEMANDS_MBPS.len());
        for row in reference::T4_DIS {
            assert!(row.windows(2).all(|w| w[0] <= w[1]), "costs rise with demand");
        }
    }

    #[test]
    fn saving_needs_both_costs() {
        assert_eq!(saving(Some(1.0), Some(4.0)), Some(0.75));
        assert_eq!(saving(None, Some(4.0)), None);
        assert_eq!(saving(Some(1.0), None), None);
    }

    #[test]
    fn sum_list_handles_empty() {
        assert_eq!(sum_list(""), None);
        assert_eq!(sum_list("1;2.5"), Some(3.5));
    }
}
