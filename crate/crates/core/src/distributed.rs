//! Distributed solver for `W >= B`.
//!
//! At a fixed `rho0` every user can compute, from its own channel alone, an
//! interval `[lo, hi]` that its `rho_i` must lie in. The base station then
//! hands out the budget `1 - rho0 - sum(lo)` in quanta of `delta_sub` to
//! whichever user bids highest, where the bid `1 / ((1 - rho_i) ln 2)` is
//! the marginal saving of one more quantum.

use std::f64::consts::LN_2;
use std::fmt;
use std::io;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AllocationSolution, MuParams, NetworkInstance, SolverConfig};
use crate::search::{self, GridPoint, SearchOutcome, SubproblemResult, SubproblemStatus};
use crate::transforms::exp2;

/// Absolute slack when testing `rho_i + delta_sub <= hi`.
const FLAG_TOL: f64 = 1e-12;
/// Relative width under which two bids count as equal.
const BID_RTOL: f64 = 1e-12;

fn bs_coef(mu: &MuParams, inst: &NetworkInstance) -> f64 {
    inst.noise_bs() / mu.g_bs * exp2(mu.demand / inst.b_bs)
}

fn ap_coef(rho0: f64, mu: &MuParams, inst: &NetworkInstance) -> f64 {
    inst.noise_ap() / mu.g_ap / rho0
}

/// `J_i(rho) = (n_B/g_B) 2^(R/B) (1 - rho)^(W/B) + (n_A/g_A) rho / rho0`, W.
///
/// Feasibility of the total power cap is `J_i(rho_i) <= P_i + n_B/g_B`.
pub fn j_function(rho_i: f64, rho0: f64, mu: &MuParams, inst: &NetworkInstance) -> f64 {
    let ratio = inst.w_ap / inst.b_bs;
    bs_coef(mu, inst) * (1.0 - rho_i).powf(ratio) + ap_coef(rho0, mu, inst) * rho_i
}

pub fn j_derivative(rho_i: f64, rho0: f64, mu: &MuParams, inst: &NetworkInstance) -> f64 {
    let ratio = inst.w_ap / inst.b_bs;
    -ratio * bs_coef(mu, inst) * (1.0 - rho_i).powf(ratio - 1.0) + ap_coef(rho0, mu, inst)
}

/// `J_i' (0) > 0`; with `W >= B`, `J_i` is then increasing on `[0, 1]`.
pub fn condition_c3(rho0: f64, mu: &MuParams, inst: &NetworkInstance) -> bool {
    ap_coef(rho0, mu, inst) > bs_coef(mu, inst) * inst.w_ap / inst.b_bs
}

fn chi_unchecked(rho0: f64, mu: &MuParams, inst: &NetworkInstance) -> f64 {
    let (w, b) = (inst.w_ap, inst.b_bs);
    let inner = (inst.noise_ap() / inst.noise_bs()) * (mu.g_bs / mu.g_ap) / rho0 * b
        / (exp2(mu.demand / b) * w);
    1.0 - inner.powf(b / (w - b))
}

/// Stationary point of `J_i` when C3 fails and `W > B`.
pub fn chi_point(rho0: f64, mu: &MuParams, inst: &NetworkInstance) -> Result<f64> {
    if inst.w_ap <= inst.b_bs {
        return Err(Error::Domain("no interior stationary point when w_ap <= b_bs".into()));
    }
    if condition_c3(rho0, mu, inst) {
        return Err(Error::Domain("J is monotone when condition C3 holds".into()));
    }
    Ok(chi_unchecked(rho0, mu, inst))
}

/// Which of the eight shapes of `J_i` against the total-power cap applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subcase {
    /// Increasing, `J(0)` above the cap: empty.
    C3i,
    /// Increasing, crosses the cap: `[0, root]`.
    C3ii,
    /// Increasing, entirely below the cap: `[0, 1]`.
    C3iii,
    /// Convex, minimum above the cap: empty.
    Nc3i,
    /// Convex, both ends within the cap: `[0, 1]`.
    Nc3ii,
    /// Convex, only the right end above the cap: `[0, root]` with root in `[chi, 1]`.
    Nc3iii,
    /// Convex, only the left end above the cap: `[root, 1]` with root in `[0, chi]`.
    Nc3iv,
    /// Convex, both ends above the cap: `[root1, root2]` around `chi`.
    Nc3v,
}

impl Subcase {
    pub fn tag(self) -> &'static str {
        match self {
            Subcase::C3i => "C3-i",
            Subcase::C3ii => "C3-ii",
            Subcase::C3iii => "C3-iii",
            Subcase::Nc3i => "NC3-i",
            Subcase::Nc3ii => "NC3-ii",
            Subcase::Nc3iii => "NC3-iii",
            Subcase::Nc3iv => "NC3-iv",
            Subcase::Nc3v => "NC3-v",
        }
    }

    pub fn is_c3(self) -> bool {
        matches!(self, Subcase::C3i | Subcase::C3ii | Subcase::C3iii)
    }
}

impl fmt::Display for Subcase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Range of `rho_i` that keeps user `i` within every cap at this `rho0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleInterval {
    pub lo: f64,
    pub hi: f64,
    /// The range allowed by the total power cap alone.
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub chi: Option<f64>,
    pub subcase: Subcase,
}

impl FeasibleInterval {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }
}

/// Root of `f` on `[a, b]`, returning the end that keeps `f <= 0`. `f` must
/// change sign on the interval.
fn bisect_root(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let left_ok = f(a) <= 0.0;
    let (mut lo, mut hi) = (a, b);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid) <= 0.0) == left_ok {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if left_ok {
        lo
    } else {
        hi
    }
}

/// Range `(mu_lo, mu_hi)` where the total power cap holds, with its subcase.
fn total_power_range(
    rho0: f64,
    mu: &MuParams,
    inst: &NetworkInstance,
    tol: f64,
) -> (f64, f64, Option<f64>, Subcase) {
    let cap = mu.p_total_max + inst.noise_bs() / mu.g_bs;
    let f = |v: f64| j_function(v, rho0, mu, inst) - cap;
    let (j0, j1) = (f(0.0), f(1.0));
    if condition_c3(rho0, mu, inst) {
        return if j0 > 0.0 {
            (1.0, 0.0, None, Subcase::C3i)
        } else if j1 < 0.0 {
            (0.0, 1.0, None, Subcase::C3iii)
        } else {
            (0.0, bisect_root(f, 0.0, 1.0, tol), None, Subcase::C3ii)
        };
    }
    // With W = B and C3 failing, J is non-increasing and its minimum sits at 1.
    let chi = if inst.w_ap > inst.b_bs { chi_unchecked(rho0, mu, inst).clamp(0.0, 1.0) } else { 1.0 };
    let jc = f(chi);
    if jc > 0.0 {
        (1.0, 0.0, Some(chi), Subcase::Nc3i)
    } else if j0 <= 0.0 && j1 <= 0.0 {
        (0.0, 1.0, Some(chi), Subcase::Nc3ii)
    } else if j0 <= 0.0 {
        (0.0, bisect_root(f, chi, 1.0, tol), Some(chi), Subcase::Nc3iii)
    } else if j1 <= 0.0 {
        (bisect_root(f, 0.0, chi, tol), 1.0, Some(chi), Subcase::Nc3iv)
    } else {
        let left = bisect_root(f, 0.0, chi, tol);
        let right = bisect_root(f, chi, 1.0, tol);
        (left, right, Some(chi), Subcase::Nc3v)
    }
}

/// Decoupled interval for one user. Requires `W >= B`.
pub fn feasible_interval(
    rho0: f64,
    mu: &MuParams,
    inst: &NetworkInstance,
    cfg: &SolverConfig,
) -> FeasibleInterval {
    let (mu_lo, mu_hi, chi, subcase) = total_power_range(rho0, mu, inst, cfg.bisection_tol);
    let nb = inst.noise_bs() / mu.g_bs;
    let bs_floor = 1.0 - ((mu.p_bs_max + nb) / bs_coef(mu, inst)).powf(inst.b_bs / inst.w_ap);
    let lo = bs_floor.max(0.0).max(mu_lo);
    let hi = (1.0 - exp2(-mu.demand / inst.w_ap))
        .min(mu.p_ap_max * mu.g_ap * rho0 / inst.noise_ap())
        .min(1.0 - rho0)
        .min(mu_hi);
    FeasibleInterval { lo, hi, mu_lo, mu_hi, chi, subcase }
}

/// The gate in front of the bid exchange: all intervals non-empty and the
/// budget reachable.
pub fn intervals_admit(rho0: f64, intervals: &[FeasibleInterval]) -> bool {
    let budget = 1.0 - rho0;
    intervals.iter().all(|iv| !iv.is_empty())
        && intervals.iter().map(|iv| iv.lo).sum::<f64>() <= budget
        && intervals.iter().map(|iv| iv.hi).sum::<f64>() >= budget
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidMessage {
    pub mu: usize,
    /// `1 / ((1 - rho_i) ln 2)`.
    pub b: f64,
    /// Whether one more quantum still fits under `hi`.
    pub f: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantMessage {
    pub mu: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetState {
    pub effective: f64,
    pub current: f64,
    pub quantum: f64,
}

/// User side of the exchange. `rho` is tracked as `lo + units * quantum` to
/// avoid drift over thousands of grants.
#[derive(Debug, Clone, PartialEq)]
pub struct MuAgent {
    pub index: usize,
    pub interval: FeasibleInterval,
    quantum: f64,
    units: usize,
}

impl MuAgent {
    pub fn new(index: usize, interval: FeasibleInterval, quantum: f64) -> Self {
        Self { index, interval, quantum, units: 0 }
    }

    pub fn rho(&self) -> f64 {
        self.interval.lo + self.units as f64 * self.quantum
    }

    pub fn headroom(&self) -> f64 {
        self.interval.hi - self.rho()
    }

    pub fn bid(&self) -> BidMessage {
        let next = self.interval.lo + (self.units + 1) as f64 * self.quantum;
        BidMessage {
            mu: self.index,
            b: 1.0 / ((1.0 - self.rho()) * LN_2),
            f: next <= self.interval.hi + FLAG_TOL,
        }
    }

    pub fn receive(&mut self, grant: GrantMessage) {
        debug_assert_eq!(grant.mu, self.index);
        self.units += 1;
    }
}

/// Base-station side: holds the budget and picks the winner of each round.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub budget: BudgetState,
    units_left: usize,
}

impl BaseStation {
    pub fn new(effective: f64, quantum: f64) -> Self {
        let units_left = (effective.max(0.0) / quantum + 1e-9).floor() as usize;
        Self {
            budget: BudgetState { effective, current: effective, quantum },
            units_left,
        }
    }

    pub fn has_budget(&self) -> bool {
        self.units_left > 0
    }

    /// Highest flagged bid; equal bids go to the larger headroom, then the
    /// lower index.
    pub fn select(&self, bids: &[BidMessage], headroom: &[f64]) -> Option<GrantMessage> {
        let mut best: Option<usize> = None;
        for (k, bid) in bids.iter().enumerate() {
            if !bid.f {
                continue;
            }
            let Some(cur) = best else {
                best = Some(k);
                continue;
            };
            let top = bids[cur].b;
            if bid.b > top * (1.0 + BID_RTOL) {
                best = Some(k);
            } else if bid.b >= top * (1.0 - BID_RTOL) && headroom[k] > headroom[cur] + FLAG_TOL {
                best = Some(k);
            }
        }
        best.map(|k| GrantMessage { mu: bids[k].mu })
    }

    pub fn spend(&mut self) {
        self.units_left -= 1;
        self.budget.current = self.units_left as f64 * self.budget.quantum;
    }
}

/// One round of the exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub bids: Vec<BidMessage>,
    pub granted: Option<usize>,
    /// Budget left after this round's grant.
    pub budget: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageLog {
    pub rounds: Vec<RoundRecord>,
}

impl MessageLog {
    /// One row per (round, user): `round,mu,bid,flag,granted,budget`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "mu", "bid", "flag", "granted", "budget"])?;
        for r in &self.rounds {
            for bid in &r.bids {
                let granted = r.granted == Some(bid.mu);
                w.write_record([
                    r.round.to_string(),
                    bid.mu.to_string(),
                    format!("{:.12e}", bid.b),
                    u8::from(bid.f).to_string(),
                    u8::from(granted).to_string(),
                    format!("{:.12e}", r.budget),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn run_exchange(
    rho0: f64,
    intervals: &[FeasibleInterval],
    inst: &NetworkInstance,
    cfg: &SolverConfig,
    mut log: Option<&mut MessageLog>,
) -> Result<SubproblemResult> {
    if intervals.len() != inst.len() {
        return Err(Error::PreconditionViolated(format!(
            "{} intervals for {} users",
            intervals.len(),
            inst.len()
        )));
    }
    if !intervals_admit(rho0, intervals) {
        return Err(Error::PreconditionViolated(format!(
            "intervals at rho0 = {rho0} are empty or cannot meet the budget"
        )));
    }
    let quantum = cfg.delta_sub;
    let mut agents: Vec<MuAgent> =
        intervals.iter().enumerate().map(|(i, iv)| MuAgent::new(i, *iv, quantum)).collect();
    let effective = 1.0 - rho0 - intervals.iter().map(|iv| iv.lo).sum::<f64>();
    let mut bs = BaseStation::new(effective, quantum);
    let mut rounds = 0;
    let mut bids = Vec::with_capacity(agents.len());
    let mut headroom = Vec::with_capacity(agents.len());
    while bs.has_budget() {
        bids.clear();
        headroom.clear();
        for a in &agents {
            bids.push(a.bid());
            headroom.push(a.headroom());
        }
        let grant = bs.select(&bids, &headroom);
        if let Some(g) = grant {
            agents[g.mu].receive(g);
            bs.spend();
            rounds += 1;
        }
        if let Some(log) = log.as_deref_mut() {
            log.rounds.push(RoundRecord {
                round: rounds,
                bids: bids.clone(),
                granted: grant.map(|g| g.mu),
                budget: bs.budget.current,
            });
        }
        if grant.is_none() {
            break;
        }
    }
    let rho: Vec<f64> = agents.iter().map(|a| a.rho()).collect();
    Ok(SubproblemResult {
        rho0,
        value: search::sub_objective(&rho, inst),
        rho,
        status: SubproblemStatus::Optimal,
        iterations: rounds,
    })
}

/// Bid-based allocation of the budget at a fixed `rho0`.
pub fn dis_sub_solve(
    rho0: f64,
    intervals: &[FeasibleInterval],
    inst: &NetworkInstance,
    cfg: &SolverConfig,
) -> Result<SubproblemResult> {
    run_exchange(rho0, intervals, inst, cfg, None)
}

/// [`dis_sub_solve`] that also records every round.
pub fn dis_sub_solve_logged(
    rho0: f64,
    intervals: &[FeasibleInterval],
    inst: &NetworkInstance,
    cfg: &SolverConfig,
) -> Result<(SubproblemResult, MessageLog)> {
    let mut log = MessageLog::default();
    let r = run_exchange(rho0, intervals, inst, cfg, Some(&mut log))?;
    Ok((r, log))
}

pub fn intervals_at(rho0: f64, inst: &NetworkInstance, cfg: &SolverConfig) -> Vec<FeasibleInterval> {
    inst.mus.iter().map(|m| feasible_interval(rho0, m, inst, cfg)).collect()
}

pub fn dis_grid_point(rho0: f64, inst: &NetworkInstance, cfg: &SolverConfig) -> GridPoint {
    let intervals = intervals_at(rho0, inst, cfg);
    if !intervals_admit(rho0, &intervals) {
        return GridPoint { rho0, feasible: false, result: None };
    }
    let result = dis_sub_solve(rho0, &intervals, inst, cfg).ok();
    GridPoint { rho0, feasible: result.is_some(), result }
}

fn check_assumption(inst: &NetworkInstance) -> Result<()> {
    if inst.w_ap < inst.b_bs {
        return Err(Error::AssumptionViolated { w_ap: inst.w_ap, b_bs: inst.b_bs });
    }
    Ok(())
}

/// Linear search over the `rho0` grid with the full bookkeeping.
pub fn dis_search(inst: &NetworkInstance, cfg: &SolverConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    check_assumption(inst)?;
    let grid: Vec<GridPoint> = cfg
        .rho0_grid()
        .into_par_iter()
        .map(|rho0| dis_grid_point(rho0, inst, cfg))
        .collect();
    let grants: usize = grid.iter().filter_map(|p| p.result.as_ref()).map(|r| r.iterations).sum();
    let bound = 0.5 / (cfg.delta_sub * cfg.delta_top);
    assert!(
        grants as f64 <= bound + 1.0,
        "{grants} grants exceed the bound {bound}"
    );
    let out = search::reduce_grid(grid, inst)?;
    debug!(
        "dis: best rho0 = {}, feasible ratio = {:.3}, grants = {}",
        out.best.rho0, out.feasible_ratio, out.total_iterations
    );
    Ok(out)
}

/// Distributed solver: the cheapest allocation over the `rho0` grid.
pub fn dis_solve(inst: &NetworkInstance, cfg: &SolverConfig) -> Result<AllocationSolution> {
    dis_search(inst, cfg).map(|o| o.solution)
}
