//! Closed-form maps between powers, SINRs, `rho` coordinates, rates and cost.
//!
//! Power vectors are plain slices aligned with `NetworkInstance::mus`.
//! `log2` is always evaluated as `ln(x) / ln 2` so golden numbers do not
//! depend on the platform's `log2` implementation.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AllocationSolution, MuParams, NetworkInstance, RhoProfile, SinrProfile};

/// Absolute tolerance on power caps when marking a solution feasible.
pub const POWER_TOL: f64 = 1e-9;

#[inline]
pub fn log2(x: f64) -> f64 {
    x.ln() / LN_2
}

#[inline]
pub fn exp2(x: f64) -> f64 {
    (x * LN_2).exp()
}

/// Received interference-plus-noise at the AP for every user.
fn ap_interference(p_ap: &[f64], inst: &NetworkInstance) -> Vec<f64> {
    let total: f64 = p_ap.iter().zip(&inst.mus).map(|(p, m)| p * m.g_ap).sum();
    p_ap.iter()
        .zip(&inst.mus)
        .map(|(p, m)| total - p * m.g_ap + inst.noise_ap())
        .collect()
}

/// Per-user AP rates under shared-channel interference, bit/s.
pub fn rates_at_ap(p_ap: &[f64], inst: &NetworkInstance) -> Vec<f64> {
    sinr_from_powers(p_ap, inst)
        .theta
        .iter()
        .map(|t| inst.w_ap * log2(1.0 + t))
        .collect()
}

/// Rate on a user's orthogonal BS sub-channel, bit/s.
pub fn rate_at_bs(p_bs: f64, mu: &MuParams, inst: &NetworkInstance) -> f64 {
    inst.b_bs * log2(1.0 + p_bs * mu.g_bs / inst.noise_bs())
}

/// BS power needed to carry `rate` bit/s, the inverse of [`rate_at_bs`].
pub fn bs_power_for_rate(rate: f64, mu: &MuParams, inst: &NetworkInstance) -> f64 {
    (exp2(rate / inst.b_bs) - 1.0) * inst.noise_bs() / mu.g_bs
}

/// BS leg `(x_bs, p_bs)` per user once the AP powers are fixed and each
/// demand is met exactly.
pub fn bs_residuals_from_pap(p_ap: &[f64], inst: &NetworkInstance) -> Result<Vec<(f64, f64)>> {
    let x_ap = rates_at_ap(p_ap, inst);
    inst.mus
        .iter()
        .zip(x_ap)
        .enumerate()
        .map(|(i, (mu, x))| {
            let x_bs = mu.demand - x;
            if x_bs < -1e-12 * mu.demand {
                return Err(Error::OverOffload { mu: i, x_ap: x, demand: mu.demand });
            }
            let x_bs = x_bs.max(0.0);
            Ok((x_bs, bs_power_for_rate(x_bs, mu, inst)))
        })
        .collect()
}

/// Achieved SINR of every user at the AP.
pub fn sinr_from_powers(p_ap: &[f64], inst: &NetworkInstance) -> SinrProfile {
    let interference = ap_interference(p_ap, inst);
    let theta = p_ap
        .iter()
        .zip(&inst.mus)
        .zip(interference)
        .map(|((p, m), d)| p * m.g_ap / d)
        .collect();
    SinrProfile { theta }
}

/// Unique AP powers that realize the target SINRs.
pub fn powers_from_sinr(theta: &SinrProfile, inst: &NetworkInstance) -> Result<Vec<f64>> {
    let load = theta.load();
    if !(load < 1.0) {
        return Err(Error::SinrInfeasible { load });
    }
    let rho: Vec<f64> = theta.theta.iter().map(|t| t / (1.0 + t)).collect();
    Ok(powers_from_rho(&rho, inst))
}

/// AP powers for a `rho` vector with `sum(rho) < 1`.
pub(crate) fn powers_from_rho(rho: &[f64], inst: &NetworkInstance) -> Vec<f64> {
    let slack = 1.0 - rho.iter().sum::<f64>();
    let n_a = inst.noise_ap();
    rho.iter()
        .zip(&inst.mus)
        .map(|(r, m)| n_a / m.g_ap * r / slack)
        .collect()
}

pub fn rho_from_theta(theta: f64) -> Result<f64> {
    if !(theta >= 0.0) || theta.is_nan() {
        return Err(Error::Domain(format!("theta must be >= 0 (got {theta})")));
    }
    if theta.is_infinite() {
        return Ok(1.0);
    }
    Ok(theta / (1.0 + theta))
}

pub fn theta_from_rho(rho: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho must lie in [0, 1) (got {rho})")));
    }
    Ok(rho / (1.0 - rho))
}

/// Outcome of the complete-offloading test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompleteOffloading {
    pub holds: bool,
    /// `sum 2^(-R_i/W) > I - 1`.
    pub c1: bool,
    /// AP power of every user at full offload within its caps. False when c1 fails.
    pub c2: bool,
    pub theta_star: Option<SinrProfile>,
}

/// Tests whether every user can send its whole demand through the AP.
pub fn complete_offloading_check(inst: &NetworkInstance) -> CompleteOffloading {
    let i = inst.len() as f64;
    let shares: Vec<f64> = inst.mus.iter().map(|m| exp2(-m.demand / inst.w_ap)).collect();
    let denom = shares.iter().sum::<f64>() - i + 1.0;
    let c1 = denom > 0.0;
    let c2 = c1
        && inst.mus.iter().zip(&shares).all(|(m, s)| {
            let p = inst.noise_ap() / m.g_ap * (1.0 - s) / denom;
            p <= m.p_total_max.min(m.p_ap_max)
        });
    let theta_star = (c1 && c2).then(|| {
        SinrProfile::new(inst.mus.iter().map(|m| exp2(m.demand / inst.w_ap) - 1.0).collect())
    });
    CompleteOffloading { holds: c1 && c2, c1, c2, theta_star }
}

/// Largest `rho_i` that does not exceed the demand on the AP.
pub fn rho_full_offload(mu: &MuParams, inst: &NetworkInstance) -> f64 {
    1.0 - exp2(-mu.demand / inst.w_ap)
}

/// Recovers rates and powers from a `rho` profile with the demands met exactly.
///
/// Only `profile.rho` is used; the slack in the power formula is `1 - sum(rho)`.
pub fn solution_from_rho(profile: &RhoProfile, inst: &NetworkInstance) -> Result<AllocationSolution> {
    let sum = profile.sum();
    if !(sum < 1.0) {
        return Err(Error::RhoInfeasible { sum });
    }
    if profile.rho.len() != inst.len() {
        return Err(Error::PreconditionViolated(format!(
            "rho has {} entries for {} users",
            profile.rho.len(),
            inst.len()
        )));
    }
    let p_ap = powers_from_rho(&profile.rho, inst);
    let ratio = inst.w_ap / inst.b_bs;
    let mut x_ap = Vec::with_capacity(inst.len());
    let mut x_bs = Vec::with_capacity(inst.len());
    let mut p_bs = Vec::with_capacity(inst.len());
    for (r, mu) in profile.rho.iter().zip(&inst.mus) {
        let xa = -inst.w_ap * log2(1.0 - r);
        x_ap.push(xa);
        x_bs.push(mu.demand - xa);
        let growth = exp2(mu.demand / inst.b_bs) * (1.0 - r).powf(ratio);
        p_bs.push(inst.noise_bs() / mu.g_bs * (growth - 1.0));
    }
    let mut sol = AllocationSolution {
        x_ap,
        x_bs,
        p_ap,
        p_bs,
        total_cost: 0.0,
        feasible: false,
        offload_ratio: 0.0,
    };
    sol.total_cost = total_cost(&sol, inst);
    sol.offload_ratio = sol.x_ap.iter().sum::<f64>() / inst.total_demand();
    sol.feasible = evaluate_constraints(&sol, inst).all_satisfied(POWER_TOL);
    Ok(sol)
}

/// Builds the allocation from explicit AP powers, routing the remainder of
/// each demand over the BS.
pub fn solution_from_pap(p_ap: &[f64], inst: &NetworkInstance) -> Result<AllocationSolution> {
    let x_ap = rates_at_ap(p_ap, inst);
    let legs = bs_residuals_from_pap(p_ap, inst)?;
    let mut sol = AllocationSolution {
        x_ap,
        x_bs: legs.iter().map(|l| l.0).collect(),
        p_ap: p_ap.to_vec(),
        p_bs: legs.iter().map(|l| l.1).collect(),
        total_cost: 0.0,
        feasible: false,
        offload_ratio: 0.0,
    };
    sol.total_cost = total_cost(&sol, inst);
    sol.offload_ratio = sol.x_ap.iter().sum::<f64>() / inst.total_demand();
    sol.feasible = evaluate_constraints(&sol, inst).all_satisfied(POWER_TOL);
    Ok(sol)
}

/// `sum(price_ap * x_ap + price_bs * x_bs)`, $/s.
pub fn total_cost(sol: &AllocationSolution, inst: &NetworkInstance) -> f64 {
    sol.x_ap
        .iter()
        .zip(&sol.x_bs)
        .map(|(a, b)| inst.price_ap * a + inst.price_bs * b)
        .sum()
}

/// Signed per-user slacks; negative means violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSlacks {
    /// `p_ap_max - p_ap`, W.
    pub ap_power: Vec<f64>,
    /// `p_bs_max - p_bs`, W.
    pub bs_power: Vec<f64>,
    /// `p_total_max - p_ap - p_bs`, W.
    pub total_power: Vec<f64>,
    /// `x_bs`, bit/s: the AP must not carry more than the demand.
    pub bs_rate: Vec<f64>,
}

impl ConstraintSlacks {
    pub fn all_satisfied(&self, tol: f64) -> bool {
        self.ap_power
            .iter()
            .chain(&self.bs_power)
            .chain(&self.total_power)
            .all(|s| *s >= -tol)
            && self.bs_rate.iter().all(|s| *s >= -1e-6)
    }

    pub fn worst(&self) -> f64 {
        self.ap_power
            .iter()
            .chain(&self.bs_power)
            .chain(&self.total_power)
            .fold(f64::INFINITY, |a, b| a.min(*b))
    }
}

pub fn evaluate_constraints(sol: &AllocationSolution, inst: &NetworkInstance) -> ConstraintSlacks {
    let n = inst.len();
    let mut s = ConstraintSlacks {
        ap_power: Vec::with_capacity(n),
        bs_power: Vec::with_capacity(n),
        total_power: Vec::with_capacity(n),
        bs_rate: sol.x_bs.clone(),
    };
    for (i, mu) in inst.mus.iter().enumerate() {
        let pa = sol.p_ap.get(i).copied().unwrap_or(0.0);
        let pb = sol.p_bs.get(i).copied().unwrap_or(0.0);
        s.ap_power.push(mu.p_ap_max - pa);
        s.bs_power.push(mu.p_bs_max - pb);
        s.total_power.push(mu.p_total_max - pa - pb);
    }
    s
}
