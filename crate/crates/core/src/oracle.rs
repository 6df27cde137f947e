//! Brute-force reference solver and the comparison schemes.
//!
//! The oracle searches `rho` space directly, without the `rho0` split or any
//! structure the solvers rely on: exhaustive grids with nested refinement
//! for up to three users, random multistart with pattern search beyond
//! that.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AllocationSolution, NetworkInstance, RhoProfile};
use crate::transforms::{self, exp2, log2};

/// Largest user count searched exhaustively.
pub const EXHAUSTIVE_MAX_USERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub grid_points_per_dim: usize,
    pub refine_rounds: usize,
    /// Grid spacing shrinks by this factor every refinement round.
    pub refine_factor: usize,
    /// How many of the best cells are refined.
    pub refine_candidates: usize,
    /// Random starts when the instance is too large for a grid.
    pub multistart_count: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_points_per_dim: 200,
            refine_rounds: 3,
            refine_factor: 10,
            refine_candidates: 8,
            multistart_count: 4000,
            seed: 0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points_per_dim < 50 {
            return Err(Error::InvalidConfig(format!(
                "grid_points_per_dim must be >= 50 (got {})",
                self.grid_points_per_dim
            )));
        }
        if self.refine_factor < 2 || self.refine_candidates == 0 || self.multistart_count == 0 {
            return Err(Error::InvalidConfig(
                "refine_factor must be >= 2, refine_candidates and multistart_count > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub solution: AllocationSolution,
    pub rho: Vec<f64>,
    /// False when the multistart heuristic was used.
    pub exhaustive: bool,
}

/// Direct evaluation of the caps at a `rho` point. Returns
/// `sum log2(1 - rho_i)` (the cost up to an affine map) when feasible.
struct Evaluator<'a> {
    inst: &'a NetworkInstance,
    rate_cap: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(inst: &'a NetworkInstance) -> Self {
        let rate_cap = inst.mus.iter().map(|m| transforms::rho_full_offload(m, inst)).collect();
        Self { inst, rate_cap }
    }

    fn value(&self, rho: &[f64]) -> Option<f64> {
        let inst = self.inst;
        let slack = 1.0 - rho.iter().sum::<f64>();
        if slack <= 0.0 {
            return None;
        }
        let ratio = inst.w_ap / inst.b_bs;
        let mut v = 0.0;
        for ((r, m), cap) in rho.iter().zip(&inst.mus).zip(&self.rate_cap) {
            if *r < 0.0 || r > cap {
                return None;
            }
            let p_ap = inst.noise_ap() / m.g_ap * r / slack;
            let p_bs = inst.noise_bs() / m.g_bs * (exp2(m.demand / inst.b_bs) * (1.0 - r).powf(ratio) - 1.0);
            if p_ap > m.p_ap_max || p_bs > m.p_bs_max || p_ap + p_bs > m.p_total_max {
                return None;
            }
            v += log2(1.0 - r);
        }
        Some(v)
    }
}

/// Keeps the `k` lowest-value points.
fn keep_best(mut pts: Vec<(f64, Vec<f64>)>, k: usize) -> Vec<(f64, Vec<f64>)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.partial_cmp(&b.1).unwrap()));
    pts.truncate(k);
    pts
}

/// Every point of the axis-aligned grid `lo + k * step`, `k < counts`.
fn scan_box(
    eval: &Evaluator<'_>,
    lo: &[f64],
    step: &[f64],
    counts: &[usize],
    keep: usize,
) -> Vec<(f64, Vec<f64>)> {
    let n = lo.len();
    let first = counts[0];
    let rest: usize = counts[1..].iter().product();
    let chunks: Vec<Vec<(f64, Vec<f64>)>> = (0..first)
        .into_par_iter()
        .map(|k0| {
            let mut found = Vec::new();
            let mut point = vec![0.0; n];
            point[0] = lo[0] + k0 as f64 * step[0];
            for flat in 0..rest {
                let mut f = flat;
                for d in 1..n {
                    point[d] = lo[d] + (f % counts[d]) as f64 * step[d];
                    f /= counts[d];
                }
                if let Some(v) = eval.value(&point) {
                    found.push((v, point.clone()));
                }
            }
            keep_best(found, keep)
        })
        .collect();
    keep_best(chunks.into_iter().flatten().collect(), keep)
}

fn exhaustive(eval: &Evaluator<'_>, cfg: &OracleConfig) -> Option<(f64, Vec<f64>)> {
    let n = eval.inst.len();
    let g = cfg.grid_points_per_dim;
    let step: Vec<f64> = eval.rate_cap.iter().map(|c| c / (g - 1) as f64).collect();
    let keep = cfg.refine_candidates;
    let mut best = scan_box(eval, &vec![0.0; n], &step, &vec![g; n], keep);
    let mut step = step;
    for _ in 0..cfg.refine_rounds {
        let fine: Vec<f64> = step.iter().map(|s| s / cfg.refine_factor as f64).collect();
        let span = 2 * cfg.refine_factor + 1;
        let mut next = best.clone();
        for (_, centre) in &best {
            let lo: Vec<f64> = centre.iter().zip(&step).map(|(c, s)| (c - s).max(0.0)).collect();
            next.extend(scan_box(eval, &lo, &fine, &vec![span; n], keep));
        }
        best = keep_best(next, keep);
        best.dedup_by(|a, b| a.1 == b.1);
        step = fine;
    }
    best.into_iter().next()
}

/// Compass search from a feasible start with a shrinking step.
fn pattern_search(eval: &Evaluator<'_>, start: Vec<f64>, v0: f64, step0: f64) -> (f64, Vec<f64>) {
    let mut x = start;
    let mut v = v0;
    let mut step = step0;
    while step > 1e-9 {
        let mut improved = false;
        for d in 0..x.len() {
            for sign in [-1.0, 1.0] {
                let mut y = x.clone();
                y[d] += sign * step;
                if let Some(vy) = eval.value(&y) {
                    if vy < v {
                        x = y;
                        v = vy;
                        improved = true;
                    }
                }
            }
        }
        // Pairwise moves that keep sum(rho) fixed walk along the budget face.
        for a in 0..x.len() {
            for b in 0..x.len() {
                if a == b {
                    continue;
                }
                let mut y = x.clone();
                y[a] += step;
                y[b] -= step;
                if let Some(vy) = eval.value(&y) {
                    if vy < v {
                        x = y;
                        v = vy;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (v, x)
}

fn multistart(eval: &Evaluator<'_>, cfg: &OracleConfig) -> Option<(f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = Vec::new();
    let tries = cfg.multistart_count * 50;
    for _ in 0..tries {
        let p: Vec<f64> = eval.rate_cap.iter().map(|c| rng.random::<f64>() * c).collect();
        if let Some(v) = eval.value(&p) {
            starts.push((v, p));
            if starts.len() == cfg.multistart_count {
                break;
            }
        }
    }
    let starts = keep_best(starts, cfg.refine_candidates);
    starts
        .into_par_iter()
        .map(|(v, p)| pattern_search(eval, p, v, 0.01))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Reference optimum. Exhaustive for up to three users.
pub fn grid_oracle_detailed(inst: &NetworkInstance, cfg: &OracleConfig) -> Result<OracleOutcome> {
    cfg.validate()?;
    let eval = Evaluator::new(inst);
    let exhaustive_mode = inst.len() <= EXHAUSTIVE_MAX_USERS;
    let found = if exhaustive_mode { exhaustive(&eval, cfg) } else { multistart(&eval, cfg) };
    let (_, rho) = found.ok_or(Error::GlobalInfeasible)?;
    let solution = transforms::solution_from_rho(&RhoProfile::closed(rho.clone()), inst)?;
    Ok(OracleOutcome { solution, rho, exhaustive: exhaustive_mode })
}

pub fn grid_oracle(inst: &NetworkInstance, cfg: &OracleConfig) -> Result<AllocationSolution> {
    grid_oracle_detailed(inst, cfg).map(|o| o.solution)
}

/// Everything over the BS.
pub fn zero_offloading(inst: &NetworkInstance) -> AllocationSolution {
    transforms::solution_from_rho(&RhoProfile::closed(vec![0.0; inst.len()]), inst)
        .expect("the zero profile is always in the domain")
}

/// Every user sends `fraction` of its demand through the AP.
pub fn fixed_offloading(inst: &NetworkInstance, fraction: f64) -> Result<AllocationSolution> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!("fraction must lie in [0, 1] (got {fraction})")));
    }
    let rho: Vec<f64> = inst.mus.iter().map(|m| 1.0 - exp2(-fraction * m.demand / inst.w_ap)).collect();
    if rho.iter().sum::<f64>() < 1.0 {
        return transforms::solution_from_rho(&RhoProfile::closed(rho), inst);
    }
    // The SINR targets cannot all be met at any power.
    let x_ap: Vec<f64> = inst.mus.iter().map(|m| fraction * m.demand).collect();
    let x_bs: Vec<f64> = inst.mus.iter().map(|m| (1.0 - fraction) * m.demand).collect();
    let p_bs = inst
        .mus
        .iter()
        .zip(&x_bs)
        .map(|(m, x)| transforms::bs_power_for_rate(*x, m, inst))
        .collect();
    let mut sol = AllocationSolution {
        x_ap,
        x_bs,
        p_ap: vec![f64::INFINITY; inst.len()],
        p_bs,
        total_cost: 0.0,
        feasible: false,
        offload_ratio: fraction,
    };
    sol.total_cost = transforms::total_cost(&sol, inst);
    Ok(sol)
}

/// Users whose whole demand fits on the BS within its power cap.
pub fn admission_heuristic(inst: &NetworkInstance) -> Vec<usize> {
    inst.mus
        .iter()
        .enumerate()
        .filter(|(_, m)| transforms::bs_power_for_rate(m.demand, m, inst) <= m.p_bs_max)
        .map(|(i, _)| i)
        .collect()
}
