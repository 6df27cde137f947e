//! Problem parameters, decision variables and solver settings.
//!
//! All quantities use fixed SI units: bandwidths in Hz, rates in bit/s,
//! powers in W, noise density in W/Hz and prices in $/bit.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bits per gigabyte used when converting quoted $/GB prices.
pub const BITS_PER_GB: f64 = 1e9;

/// Converts a price quoted in $/GB into $/bit.
pub fn price_per_bit(price_per_gb: f64) -> f64 {
    price_per_gb / BITS_PER_GB
}

/// Static parameters of one mobile user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuParams {
    /// Channel power gain towards the AP.
    pub g_ap: f64,
    /// Channel power gain towards the BS.
    pub g_bs: f64,
    pub p_ap_max: f64,
    pub p_bs_max: f64,
    /// Cap on the sum of both interface powers. Independent of the other two.
    pub p_total_max: f64,
    /// Traffic demand, bit/s.
    pub demand: f64,
}

/// One BS, one AP and the set of users they serve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    pub mus: Vec<MuParams>,
    /// Bandwidth of the shared AP channel, Hz.
    pub w_ap: f64,
    /// Bandwidth of each user's orthogonal BS sub-channel, Hz.
    pub b_bs: f64,
    /// Noise power spectral density, W/Hz.
    pub n0: f64,
    pub price_ap: f64,
    pub price_bs: f64,
}

impl NetworkInstance {
    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }

    /// Noise power at the AP, `w_ap * n0`.
    pub fn noise_ap(&self) -> f64 {
        self.w_ap * self.n0
    }

    /// Noise power on one BS sub-channel, `b_bs * n0`.
    pub fn noise_bs(&self) -> f64 {
        self.b_bs * self.n0
    }

    pub fn total_demand(&self) -> f64 {
        self.mus.iter().map(|m| m.demand).sum()
    }

    /// Price gap `price_bs - price_ap`, the weight of every offloaded bit.
    pub fn price_gap(&self) -> f64 {
        self.price_bs - self.price_ap
    }

    /// Copy of the instance with every user's demand set to `demand`.
    pub fn with_uniform_demand(&self, demand: f64) -> Self {
        let mut out = self.clone();
        for mu in &mut out.mus {
            mu.demand = demand;
        }
        out
    }

    /// Errors with every violated rule if the instance is malformed.
    pub fn validated(self) -> Result<Self> {
        let violations = validate_instance(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            let joined: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidInstance(joined.join("; ")))
        }
    }
}

/// A broken instance rule: which field, and which rule it breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn positive(out: &mut Vec<Violation>, field: String, value: f64) {
    if !(value.is_finite() && value > 0.0) {
        out.push(Violation {
            field,
            rule: format!("must be finite and > 0 (got {value})"),
        });
    }
}

/// Lists every violated instance rule. An empty list means the instance is
/// well formed.
pub fn validate_instance(inst: &NetworkInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    if inst.mus.is_empty() {
        out.push(Violation {
            field: "mus".into(),
            rule: "at least one user is required".into(),
        });
    }
    for (i, mu) in inst.mus.iter().enumerate() {
        positive(&mut out, format!("mus[{i}].g_ap"), mu.g_ap);
        positive(&mut out, format!("mus[{i}].g_bs"), mu.g_bs);
        positive(&mut out, format!("mus[{i}].p_ap_max"), mu.p_ap_max);
        positive(&mut out, format!("mus[{i}].p_bs_max"), mu.p_bs_max);
        positive(&mut out, format!("mus[{i}].p_total_max"), mu.p_total_max);
        positive(&mut out, format!("mus[{i}].demand"), mu.demand);
    }
    positive(&mut out, "w_ap".into(), inst.w_ap);
    positive(&mut out, "b_bs".into(), inst.b_bs);
    positive(&mut out, "n0".into(), inst.n0);
    positive(&mut out, "price_ap".into(), inst.price_ap);
    if !(inst.price_bs > inst.price_ap) {
        out.push(Violation {
            field: "price_bs".into(),
            rule: format!(
                "must exceed price_ap (got price_bs = {}, price_ap = {})",
                inst.price_bs, inst.price_ap
            ),
        });
    }
    out
}

/// The slack `rho0` and per-user `rho_i = theta_i / (1 + theta_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoProfile {
    pub rho0: f64,
    pub rho: Vec<f64>,
}

impl RhoProfile {
    /// Profile whose slack closes the budget, `rho0 = 1 - sum(rho)`.
    pub fn closed(rho: Vec<f64>) -> Self {
        let rho0 = 1.0 - rho.iter().sum::<f64>();
        Self { rho0, rho }
    }

    pub fn sum(&self) -> f64 {
        self.rho.iter().sum()
    }

    pub fn is_closed(&self, tol: f64) -> bool {
        (self.rho0 + self.sum() - 1.0).abs() <= tol
    }
}

/// Target or achieved SINR of every user at the AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrProfile {
    pub theta: Vec<f64>,
}

impl SinrProfile {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    /// `sum theta_i / (1 + theta_i)`; a profile is realizable iff this is < 1.
    pub fn load(&self) -> f64 {
        self.theta.iter().map(|t| t / (1.0 + t)).sum()
    }

    pub fn is_realizable(&self) -> bool {
        self.load() < 1.0
    }
}

/// Physical allocation: per-user rates and powers on both interfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSolution {
    pub x_ap: Vec<f64>,
    pub x_bs: Vec<f64>,
    pub p_ap: Vec<f64>,
    pub p_bs: Vec<f64>,
    /// $/s.
    pub total_cost: f64,
    pub feasible: bool,
    /// Share of the total demand carried by the AP.
    pub offload_ratio: f64,
}

/// Step sizes and tolerances shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Step of the linear search over `rho0`.
    pub delta_top: f64,
    /// Currency quantum granted per round of the bid exchange.
    pub delta_sub: f64,
    /// Max-norm vertex gap at which the poly-block loops stop.
    pub epsilon_polyblock: f64,
    pub bisection_tol: f64,
    pub max_polyblock_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta_top: 0.005,
            delta_sub: 1e-4,
            epsilon_polyblock: 1e-4,
            bisection_tol: 1e-10,
            max_polyblock_iters: 20_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("delta_top", self.delta_top),
            ("delta_sub", self.delta_sub),
            ("epsilon_polyblock", self.epsilon_polyblock),
            ("bisection_tol", self.bisection_tol),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0 (got {v})")));
            }
        }
        if self.delta_top > 0.5 {
            return Err(Error::InvalidConfig(format!(
                "delta_top must be <= 0.5 (got {})",
                self.delta_top
            )));
        }
        if self.max_polyblock_iters == 0 {
            return Err(Error::InvalidConfig("max_polyblock_iters must be > 0".into()));
        }
        Ok(())
    }

    /// The `rho0` grid `delta_top, 2 delta_top, ...` up to and including 1
    /// when 1 is a grid multiple.
    pub fn rho0_grid(&self) -> Vec<f64> {
        let steps = (1.0 / self.delta_top + 1e-9).floor() as usize;
        (1..=steps).map(|k| (k as f64 * self.delta_top).min(1.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu() -> MuParams {
        MuParams {
            g_ap: 1e-5,
            g_bs: 1e-8,
            p_ap_max: 0.2,
            p_bs_max: 0.25,
            p_total_max: 0.35,
            demand: 2e6,
        }
    }

    fn inst() -> NetworkInstance {
        NetworkInstance {
            mus: vec![mu(), mu()],
            w_ap: 20e6,
            b_bs: 5e6,
            n0: 1e-15,
            price_ap: price_per_bit(2.0),
            price_bs: price_per_bit(10.0),
        }
    }

    #[test]
    fn well_formed_instance_has_no_violations() {
        assert!(validate_instance(&inst()).is_empty());
    }

    #[test]
    fn equal_prices_violate_ordering() {
        let mut i = inst();
        i.price_bs = i.price_ap;
        let v = validate_instance(&i);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "price_bs");
    }

    #[test]
    fn zero_gain_violates_positivity() {
        let mut i = inst();
        i.mus[1].g_ap = 0.0;
        let v = validate_instance(&i);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "mus[1].g_ap");
    }

    #[test]
    fn empty_user_set_is_rejected() {
        let mut i = inst();
        i.mus.clear();
        assert_eq!(validate_instance(&i)[0].field, "mus");
        assert!(i.validated().is_err());
    }

    #[test]
    fn noise_powers_scale_with_bandwidth() {
        let i = inst();
        assert_eq!(i.noise_ap() / i.noise_bs(), i.w_ap / i.b_bs);
        assert!((i.noise_ap() - 2e-8).abs() < 1e-22);
        assert!((i.noise_bs() - 5e-9).abs() < 1e-22);
    }

    #[test]
    fn gb_prices_convert_to_per_bit() {
        assert_eq!(price_per_bit(2.0), 2e-9);
        // 8 users fully offloaded at 2 Mbit/s and $2/GB.
        let cost = 8.0 * 2e6 * price_per_bit(2.0);
        assert!((cost - 0.032).abs() < 1e-15);
    }

    #[test]
    fn config_rules() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { delta_top: 0.6, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { delta_sub: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rho0_grid_covers_unit_interval() {
        let g = SolverConfig::default().rho0_grid();
        assert_eq!(g.len(), 200);
        assert!((g[0] - 0.005).abs() < 1e-15);
        assert_eq!(*g.last().unwrap(), 1.0);
        let g = SolverConfig { delta_top: 0.3, ..Default::default() }.rho0_grid();
        assert_eq!(g.len(), 3);
    }

    #[test]
    fn closed_profile_and_load() {
        let p = RhoProfile::closed(vec![0.2, 0.3]);
        assert!(p.is_closed(1e-15));
        assert!((p.rho0 - 0.5).abs() < 1e-15);
        let s = SinrProfile::new(vec![1.0, 1.0]);
        assert!((s.load() - 1.0).abs() < 1e-15);
        assert!(!s.is_realizable());
    }
}
