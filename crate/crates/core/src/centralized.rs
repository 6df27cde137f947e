//! Centralized solver: poly-block minimization of the inner problem for a
//! fixed slack `rho0`, a poly-block feasibility test, and the linear search
//! over `rho0`.
//!
//! For fixed `rho0` the inner problem is to minimize the increasing function
//! `V(rho) = (price_bs - price_ap) * W * sum_i log2(rho0 + sum_{j != i} rho_j)`
//! over `G ∩ H`, where `G` is a normal (down-closed) set built from the power
//! and demand caps and `H` is the half-space `sum(rho) >= 1 - rho0`.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BinaryHeap, HashSet};
use std::hash::{Hash, Hasher};

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AllocationSolution, NetworkInstance, SolverConfig};
use crate::search::{self, GridPoint, SearchOutcome, SubproblemResult, SubproblemStatus};
use crate::transforms::{exp2, log2};

/// Relative slack on the `G` tests so that points produced by bisection
/// against a constraint are not rejected by rounding.
const MEMBERSHIP_RTOL: f64 = 1e-12;
/// Absolute slack of the box reduction.
const REDUCE_TOL: f64 = 1e-12;

/// The normal set `G` at a fixed `rho0`, with per-user constants cached.
#[derive(Debug, Clone)]
pub struct NormalSet {
    pub rho0: f64,
    /// `1 - 2^(-R/W)`: the AP must not carry more than the demand.
    rate_cap: Vec<f64>,
    /// `rho_i <= ap_cap_i` encodes the AP power cap.
    ap_cap: Vec<f64>,
    /// `sum_{j != i} rho_j <= others_cap_i` encodes the BS power cap.
    others_cap: Vec<f64>,
    /// `(n_B/g_B) 2^(R/B)`.
    bs_coef: Vec<f64>,
    /// `(n_A/g_A) / rho0`.
    ap_coef: Vec<f64>,
    /// `P_i + n_B/g_B`.
    total_cap: Vec<f64>,
    ratio: f64,
    /// `ratio` when it is a small integer, for the faster `powi`.
    int_ratio: Option<i32>,
}

impl NormalSet {
    pub fn new(rho0: f64, inst: &NetworkInstance) -> Self {
        let n = inst.len();
        let ratio = inst.w_ap / inst.b_bs;
        let mut s = Self {
            rho0,
            rate_cap: Vec::with_capacity(n),
            ap_cap: Vec::with_capacity(n),
            others_cap: Vec::with_capacity(n),
            bs_coef: Vec::with_capacity(n),
            ap_coef: Vec::with_capacity(n),
            total_cap: Vec::with_capacity(n),
            ratio,
            int_ratio: (ratio.fract() == 0.0 && ratio <= 64.0).then_some(ratio as i32),
        };
        for mu in &inst.mus {
            let nb = inst.noise_bs() / mu.g_bs;
            let na = inst.noise_ap() / mu.g_ap;
            let bs_coef = nb * exp2(mu.demand / inst.b_bs);
            s.rate_cap.push(1.0 - exp2(-mu.demand / inst.w_ap));
            s.ap_cap.push(mu.p_ap_max * rho0 / na);
            s.others_cap.push(((mu.p_bs_max + nb) / bs_coef).powf(1.0 / ratio) - rho0);
            s.bs_coef.push(bs_coef);
            s.ap_coef.push(na / rho0);
            s.total_cap.push(mu.p_total_max + nb);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.rate_cap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rate_cap.is_empty()
    }

    /// Evaluates all four constraint families of `G`.
    pub fn contains(&self, rho: &[f64]) -> bool {
        let total: f64 = rho.iter().sum();
        rho.iter().enumerate().all(|(i, &r)| {
            let others = (total - r).max(0.0);
            let base = self.rho0 + others;
            let grown = match self.int_ratio {
                Some(k) => base.powi(k),
                None => base.powf(self.ratio),
            };
            let bs_side = self.bs_coef[i] * grown;
            let tol = |v: f64| v.abs() * MEMBERSHIP_RTOL;
            r <= self.rate_cap[i] + tol(self.rate_cap[i])
                && r <= self.ap_cap[i] + tol(self.ap_cap[i])
                && others <= self.others_cap[i] + tol(self.others_cap[i]).max(1e-15)
                && bs_side + self.ap_coef[i] * r <= self.total_cap[i] * (1.0 + MEMBERSHIP_RTOL)
        })
    }

    /// Upper corner `o_i = min{1 - 2^(-R/W), rho0 P_A g_A / n_A, 1 - rho0}`.
    pub fn upper_corner(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.rate_cap[i].min(self.ap_cap[i]).min(1.0 - self.rho0))
            .collect()
    }

    /// Reduction of the box `[lo, hi]`: the least point dominated by every
    /// `x` in `G ∩ [lo, hi]` with `sum(x) = 1 - rho0`, or `None` when no such
    /// `x` exists.
    ///
    /// On the hyperplane the BS cap reads `x_i >= 1 - rho0 - others_cap_i`,
    /// and the box gives `x_i >= 1 - rho0 - sum_{j != i} hi_j`. Since `G` is
    /// down-closed, the corner itself must lie in `G`.
    pub fn reduce_lower(&self, lo: &[f64], hi: &[f64]) -> Option<Vec<f64>> {
        let mut a = lo.to_vec();
        self.reduce_in_place(&mut a, hi, hi.iter().sum()).then_some(a)
    }

    /// [`NormalSet::reduce_lower`] overwriting `x`; `sum_hi` is `sum(hi)`.
    fn reduce_in_place(&self, x: &mut [f64], hi: &[f64], sum_hi: f64) -> bool {
        let target = 1.0 - self.rho0;
        let mut sum = 0.0;
        for i in 0..x.len() {
            let v = x[i]
                .max(target - self.others_cap[i])
                .max(target - (sum_hi - hi[i]))
                .max(0.0);
            if v > hi[i] + REDUCE_TOL {
                return false;
            }
            x[i] = v.min(hi[i]);
            sum += x[i];
        }
        sum <= target + REDUCE_TOL && self.contains(x)
    }
}

/// Whether `rho` lies in `G` at the given `rho0`.
pub fn in_normal_set(rho: &[f64], rho0: f64, inst: &NetworkInstance) -> bool {
    NormalSet::new(rho0, inst).contains(rho)
}

/// `sum(rho) - (1 - rho0)`; non-negative exactly on `H`.
pub fn hyperplane_gap(rho: &[f64], rho0: f64) -> f64 {
    rho.iter().sum::<f64>() - (1.0 - rho0)
}

pub fn upper_corner(rho0: f64, inst: &NetworkInstance) -> Vec<f64> {
    NormalSet::new(rho0, inst).upper_corner()
}

/// Moves from `z` towards `o` until the segment meets `sum(rho) = 1 - rho0`.
///
/// The returned point is the bisection end on the `z` side, so its gap is in
/// `[-tol, 0]` up to rounding.
pub fn project_to_hyperplane(z: &[f64], o: &[f64], rho0: f64, tol: f64) -> Result<Vec<f64>> {
    let gz = hyperplane_gap(z, rho0);
    let go = hyperplane_gap(o, rho0);
    if gz > 0.0 || go < 0.0 {
        return Err(Error::NoCrossing { start: gz, end: go });
    }
    if gz == 0.0 {
        return Ok(z.to_vec());
    }
    let target = 1.0 - rho0;
    let gap_at = |t: f64| z.iter().zip(o).map(|(a, b)| a + t * (b - a)).sum::<f64>() - target;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if gap_at(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    debug_assert!({
        let closed = -gz / (go - gz);
        (closed - lo).abs() <= 2.0 * tol + 1e-12
    });
    Ok(z.iter().zip(o).map(|(a, b)| a + lo * (b - a)).collect())
}

/// `t` at which the segment `z -> o` meets the hyperplane, in closed form.
pub fn hyperplane_crossing(z: &[f64], o: &[f64], rho0: f64) -> f64 {
    let gz = hyperplane_gap(z, rho0);
    let go = hyperplane_gap(o, rho0);
    -gz / (go - gz)
}

/// `V(rho)`: the inner objective written through `1 - rho_i = rho0 + sum_{j != i} rho_j`.
pub fn polyblock_objective(rho: &[f64], rho0: f64, inst: &NetworkInstance) -> f64 {
    let total: f64 = rho.iter().sum();
    inst.price_gap()
        * inst.w_ap
        * rho.iter().map(|r| log2(rho0 + total - r)).sum::<f64>()
}

/// Heap entry ordered by key; `max_first` flips the direction.
#[derive(Debug, Clone)]
struct Vertex {
    key: f64,
    seq: u64,
    point: Vec<f64>,
    max_first: bool,
}

impl PartialEq for Vertex {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Vertex {}

impl PartialOrd for Vertex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Vertex {
    fn cmp(&self, other: &Self) -> Ordering {
        let by_key = self.key.total_cmp(&other.key);
        let by_key = if self.max_first { by_key } else { by_key.reverse() };
        // Older vertices first on ties, for a deterministic pop order.
        by_key.then_with(|| other.seq.cmp(&self.seq))
    }
}

/// The vertex set `T_k` together with the incumbent.
#[derive(Debug, Clone)]
pub struct PolyblockState {
    heap: BinaryHeap<Vertex>,
    /// Hashes of quantized vertex positions.
    seen: HashSet<u64>,
    resolution: f64,
    next_seq: u64,
    max_first: bool,
    /// Best feasible point found so far.
    pub cbs: Option<Vec<f64>>,
    /// Its objective value, `+inf` while `cbs` is unset.
    pub cbv: f64,
    pub iter: usize,
}

impl PolyblockState {
    fn new(resolution: f64, max_first: bool) -> Self {
        Self {
            heap: BinaryHeap::new(),
            seen: HashSet::new(),
            resolution,
            next_seq: 0,
            max_first,
            cbs: None,
            cbv: f64::INFINITY,
            iter: 0,
        }
    }

    /// Adds a vertex unless one at the same quantized position was seen.
    fn push(&mut self, point: Vec<f64>, key: f64) -> bool {
        let mut h = DefaultHasher::new();
        for v in &point {
            ((v / self.resolution).round() as i64).hash(&mut h);
        }
        if !self.seen.insert(h.finish()) {
            return false;
        }
        self.heap.push(Vertex { key, seq: self.next_seq, point, max_first: self.max_first });
        self.next_seq += 1;
        true
    }

    fn pop(&mut self) -> Option<(Vec<f64>, f64)> {
        self.heap.pop().map(|v| (v.point, v.key))
    }

    pub fn vertex_count(&self) -> usize {
        self.heap.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.heap.iter().map(|v| v.point.as_slice())
    }

    fn offer(&mut self, point: &[f64], value: f64) {
        if value < self.cbv {
            self.cbv = value;
            self.cbs = Some(point.to_vec());
        }
    }
}

/// One row of the optional convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub vertices: usize,
    pub cbv: f64,
    /// `cbv` minus the smallest `V` over the vertex set (the optimality gap).
    pub gap: f64,
    /// `||x - z||_inf` at this iteration.
    pub step: f64,
}

fn max_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Local improvement of a feasible point on the hyperplane.
///
/// Moves mass from user `k` to user `j` as far as `G` allows. The objective
/// is concave along such a transfer, so only the far end can beat the start.
/// Repeats over all ordered pairs until no transfer lowers the objective.
fn improve_incumbent(set: &NormalSet, x: &[f64], tol: f64, value: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    let n = x.len();
    let mut cur = x.to_vec();
    let mut v_cur = value(&cur);
    let mut trial = cur.clone();
    for _ in 0..4 * n {
        let mut improved = false;
        for k in 0..n {
            for j in 0..n {
                if j == k || cur[k] <= tol {
                    continue;
                }
                let shift = |t: f64, out: &mut Vec<f64>| {
                    out.copy_from_slice(&cur);
                    out[j] += t;
                    out[k] -= t;
                };
                let full = cur[k];
                shift(full, &mut trial);
                let t = if set.contains(&trial) {
                    full
                } else {
                    let (mut lo, mut hi) = (0.0f64, full);
                    while hi - lo > tol {
                        let mid = 0.5 * (lo + hi);
                        shift(mid, &mut trial);
                        if set.contains(&trial) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    lo
                };
                if t <= tol {
                    continue;
                }
                shift(t, &mut trial);
                let v = value(&trial);
                if v < v_cur - 1e-15 * v_cur.abs() && set.contains(&trial) {
                    std::mem::swap(&mut cur, &mut trial);
                    trial.clone_from(&cur);
                    v_cur = v;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    cur
}

/// Inner problem at a fixed `rho0` by poly-block approximation of the lower
/// boundary of `G ∩ H`.
pub fn cen_sub_solve(rho0: f64, inst: &NetworkInstance, cfg: &SolverConfig) -> SubproblemResult {
    cen_sub_solve_traced(rho0, inst, cfg, None, &mut |_| {})
}

/// [`cen_sub_solve`] with an optional feasible starting incumbent and a
/// per-iteration trace sink.
///
/// A `seed` must lie in `G` on the hyperplane; it is ignored otherwise.
pub fn cen_sub_solve_traced(
    rho0: f64,
    inst: &NetworkInstance,
    cfg: &SolverConfig,
    seed: Option<&[f64]>,
    trace: &mut dyn FnMut(&TraceRecord),
) -> SubproblemResult {
    let n = inst.len();
    let set = NormalSet::new(rho0, inst);
    let o = set.upper_corner();
    if hyperplane_gap(&o, rho0) < 0.0 {
        return SubproblemResult::infeasible(rho0, n, 0);
    }
    let sum_o: f64 = o.iter().sum();
    let Some(root) = set.reduce_lower(&vec![0.0; n], &o) else {
        return SubproblemResult::infeasible(rho0, n, 0);
    };
    let value = |p: &[f64]| polyblock_objective(p, rho0, inst);

    let mut state = PolyblockState::new(cfg.bisection_tol, false);
    if let Some(s) = seed {
        if s.len() == n && set.contains(s) && hyperplane_gap(s, rho0).abs() <= 1e-9 {
            let s = improve_incumbent(&set, s, cfg.bisection_tol, &value);
            state.offer(&s, value(&s));
        }
    }
    let v0 = value(&root);
    state.push(root, v0);

    let mut status = SubproblemStatus::Optimal;
    loop {
        if state.iter >= cfg.max_polyblock_iters {
            status = SubproblemStatus::IterCapReached;
            break;
        }
        let Some((z, vz)) = state.pop() else { break };
        // The smallest V over the vertex set bounds the optimum from below.
        if vz >= state.cbv {
            break;
        }
        state.iter += 1;
        let x = if hyperplane_gap(&z, rho0) >= 0.0 {
            z.clone()
        } else {
            match project_to_hyperplane(&z, &o, rho0, cfg.bisection_tol) {
                Ok(x) => x,
                Err(_) => continue,
            }
        };
        if set.contains(&x) && value(&x) < state.cbv {
            let better = improve_incumbent(&set, &x, cfg.bisection_tol, &value);
            state.offer(&better, value(&better));
        }
        let step = max_norm_diff(&x, &z);
        trace(&TraceRecord {
            iter: state.iter,
            vertices: state.vertex_count(),
            cbv: state.cbv,
            gap: state.cbv - vz,
            step,
        });
        if step < cfg.epsilon_polyblock && state.cbs.is_some() {
            break;
        }
        for i in 0..n {
            if x[i] - z[i] <= cfg.bisection_tol {
                continue;
            }
            let mut child = z.clone();
            child[i] = x[i];
            if !set.reduce_in_place(&mut child, &o, sum_o) {
                continue;
            }
            let vc = value(&child);
            if vc < state.cbv {
                state.push(child, vc);
            }
        }
    }

    match state.cbs {
        Some(rho) => SubproblemResult {
            rho0,
            value: search::sub_objective(&rho, inst),
            rho,
            status,
            iterations: state.iter,
        },
        None => {
            if status == SubproblemStatus::IterCapReached {
                warn!("cen-sub at rho0 = {rho0}: iteration cap reached without a feasible point");
            }
            SubproblemResult::infeasible(rho0, n, state.iter)
        }
    }
}

/// Last point of `G` on the segment `a -> v`, by bisection. `a` must lie in `G`.
fn segment_projection(set: &NormalSet, a: &[f64], v: &[f64], tol: f64) -> Vec<f64> {
    let at = |l: f64| -> Vec<f64> { a.iter().zip(v).map(|(p, q)| p + l * (q - p)).collect() };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if set.contains(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

/// Poly-block maximization of `rho0 + sum(rho)` over `G` inside the box
/// `[0, o]`. Returns a point of `G` with `sum(rho) >= 1 - rho0` if one is
/// found (so the inner problem is feasible), or `None`.
///
/// `o` is the upper corner; its first two terms are constraints of `G`
/// itself, so this box and `[0, 1 - rho0]^I` cut out the same part of `G`.
/// Each vertex `v` is paired with the reduced lower corner of `[0, v]`, and
/// is projected onto the upper boundary of `G` along the segment from that
/// corner (the origin when nothing is reduced).
pub fn feasibility_witness(rho0: f64, inst: &NetworkInstance, cfg: &SolverConfig) -> Option<Vec<f64>> {
    let n = inst.len();
    let set = NormalSet::new(rho0, inst);
    let target = 1.0 - rho0;
    let origin = vec![0.0; n];
    if !set.contains(&origin) {
        return None;
    }
    if target <= 0.0 {
        return Some(origin);
    }
    let o = set.upper_corner();
    let mut state = PolyblockState::new(cfg.bisection_tol, true);
    let so = o.iter().sum::<f64>();
    state.push(o, so);
    while let Some((v, sv)) = state.pop() {
        // Upper bound on the maximum below target: infeasible.
        if sv < target {
            return None;
        }
        if state.iter >= cfg.max_polyblock_iters {
            warn!("feasibility check at rho0 = {rho0}: iteration cap reached, reporting infeasible");
            return None;
        }
        state.iter += 1;
        if set.contains(&v) {
            return Some(v);
        }
        let Some(a) = set.reduce_lower(&origin, &v) else { continue };
        let y = segment_projection(&set, &a, &v, cfg.bisection_tol);
        if y.iter().sum::<f64>() >= target {
            return Some(y);
        }
        if max_norm_diff(&v, &y) < cfg.epsilon_polyblock {
            continue;
        }
        for i in 0..n {
            if v[i] - y[i] <= cfg.bisection_tol {
                continue;
            }
            let mut child = v.clone();
            child[i] = y[i];
            let sc = child.iter().sum::<f64>();
            if sc >= target {
                state.push(child, sc);
            }
        }
    }
    None
}

/// Whether the inner problem at `rho0` has a feasible point.
pub fn cen_sub_feasibility(rho0: f64, inst: &NetworkInstance, cfg: &SolverConfig) -> bool {
    feasibility_witness(rho0, inst, cfg).is_some()
}

/// Scales a witness down onto the hyperplane. `G` is down-closed, so the
/// result stays feasible.
fn witness_on_hyperplane(w: &[f64], rho0: f64) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    let target = 1.0 - rho0;
    if s <= target || s == 0.0 {
        return w.to_vec();
    }
    let scale = target / s;
    w.iter().map(|v| v * scale).collect()
}

/// Feasibility gate plus inner solve at one grid point.
pub fn cen_grid_point(rho0: f64, inst: &NetworkInstance, cfg: &SolverConfig) -> GridPoint {
    match feasibility_witness(rho0, inst, cfg) {
        None => GridPoint { rho0, feasible: false, result: None },
        Some(w) => {
            let seed = witness_on_hyperplane(&w, rho0);
            let result = cen_sub_solve_traced(rho0, inst, cfg, Some(&seed), &mut |_| {});
            GridPoint { rho0, feasible: true, result: Some(result) }
        }
    }
}

/// Linear search over the `rho0` grid with the full bookkeeping.
pub fn cen_search(inst: &NetworkInstance, cfg: &SolverConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let grid: Vec<GridPoint> = cfg
        .rho0_grid()
        .into_par_iter()
        .map(|rho0| cen_grid_point(rho0, inst, cfg))
        .collect();
    let out = search::reduce_grid(grid, inst)?;
    debug!(
        "cen: best rho0 = {}, feasible ratio = {:.3}, iterations = {}, capped = {}",
        out.best.rho0, out.feasible_ratio, out.total_iterations, out.capped_points
    );
    Ok(out)
}

/// Centralized solver: the cheapest allocation over the `rho0` grid.
pub fn cen_solve(inst: &NetworkInstance, cfg: &SolverConfig) -> Result<AllocationSolution> {
    cen_search(inst, cfg).map(|o| o.solution)
}
