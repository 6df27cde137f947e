//! Instance construction: the built-in instances, the channel model, sweeps
//! and the JSON scenario format.
//!
//! Random draws use ChaCha8 (`rand_chacha` 0.9). A topology seeds the
//! generator with `seed_from_u64(seed)` and selects stream `index` with
//! `set_stream`, so draw `k` of a sweep never depends on how many draws came
//! before it. Within a stream each user consumes, in order: one uniform for
//! the radius, one for the angle, then one `Exp(1)` fading sample for the AP
//! link and one for the BS link.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{price_per_bit, MuParams, NetworkInstance, SolverConfig, BITS_PER_GB};

pub const DEFAULT_W_AP: f64 = 20e6;
pub const DEFAULT_B_BS: f64 = 5e6;
pub const DEFAULT_N0: f64 = 1e-15;
pub const DEFAULT_PRICE_AP_PER_GB: f64 = 2.0;
pub const DEFAULT_PRICE_BS_PER_GB: f64 = 10.0;
pub const DEFAULT_P_AP_MAX: f64 = 0.2;
pub const DEFAULT_P_BS_MAX: f64 = 0.25;
pub const DEFAULT_P_TOTAL_MAX: f64 = 0.35;
/// Demand given to every user of a built-in instance, bit/s.
pub const DEFAULT_DEMAND: f64 = 2e6;

pub const BUILTIN_NAMES: [&str; 3] = ["mu4", "mu8", "mu12"];

const MU4_G_AP: [f64; 4] = [1.2709, 0.6407, 0.7771, 0.8638];
const MU4_G_BS: [f64; 4] = [3.3164, 2.8765, 1.4029, 2.7934];
const MU8_G_AP: [f64; 8] = [0.1256, 2.8108, 0.2201, 0.0381, 0.5091, 0.2528, 1.4989, 0.6081];
const MU8_G_BS: [f64; 8] = [2.5279, 0.6211, 1.2604, 0.5815, 2.5812, 1.1777, 2.6028, 2.3551];
const MU12_G_AP: [f64; 12] = [
    0.5126, 0.8072, 2.3568, 5.8244, 0.6845, 7.1370, 1.7175, 0.4732, 6.2617, 6.7279, 6.0522, 0.4312,
];
const MU12_G_BS: [f64; 12] = [
    2.4780, 2.7843, 0.5868, 2.7794, 2.5727, 2.4645, 0.6994, 0.8504, 2.0981, 0.6946, 2.6106, 2.9921,
];

fn default_mu(g_ap: f64, g_bs: f64, demand: f64) -> MuParams {
    MuParams {
        g_ap,
        g_bs,
        p_ap_max: DEFAULT_P_AP_MAX,
        p_bs_max: DEFAULT_P_BS_MAX,
        p_total_max: DEFAULT_P_TOTAL_MAX,
        demand,
    }
}

/// Instance with the default bandwidths, noise and prices.
pub fn default_instance(mus: Vec<MuParams>) -> NetworkInstance {
    NetworkInstance {
        mus,
        w_ap: DEFAULT_W_AP,
        b_bs: DEFAULT_B_BS,
        n0: DEFAULT_N0,
        price_ap: price_per_bit(DEFAULT_PRICE_AP_PER_GB),
        price_bs: price_per_bit(DEFAULT_PRICE_BS_PER_GB),
    }
}

/// One of the built-in instances `mu4`, `mu8` or `mu12`.
pub fn paper_instance(name: &str) -> Result<NetworkInstance> {
    let (g_ap, g_bs, ap_scale): (&[f64], &[f64], f64) = match name {
        "mu4" => (&MU4_G_AP, &MU4_G_BS, 1e-5),
        "mu8" => (&MU8_G_AP, &MU8_G_BS, 1e-4),
        "mu12" => (&MU12_G_AP, &MU12_G_BS, 1e-5),
        other => return Err(Error::UnknownInstance(other.to_string())),
    };
    let mus = g_ap
        .iter()
        .zip(g_bs)
        .map(|(a, b)| default_mu(a * ap_scale, b * 1e-8, DEFAULT_DEMAND))
        .collect();
    Ok(default_instance(mus))
}

/// Copies of `inst` with uniform demand `start, start + step, ...` up to
/// `stop` inclusive.
pub fn demand_sweep(inst: &NetworkInstance, start: f64, stop: f64, step: f64) -> Result<Vec<NetworkInstance>> {
    if !(step > 0.0 && start > 0.0 && stop >= start) {
        return Err(Error::InvalidConfig(format!(
            "demand sweep needs 0 < start <= stop and step > 0 (got {start}..{stop} step {step})"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| inst.with_uniform_demand(start + k as f64 * step)).collect())
}

/// Node placement and channel model, distances in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub bs_pos: [f64; 2],
    pub ap_pos: [f64; 2],
    pub mu_circle_center: [f64; 2],
    pub mu_circle_radius: f64,
    /// Path-loss exponent.
    pub kappa: f64,
    pub seed: u64,
    /// Multiplies every gain. 1 gives `fading / distance^kappa` as is.
    #[serde(default = "unit_scale")]
    pub gain_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            bs_pos: [0.0, 0.0],
            ap_pos: [350.0, 0.0],
            mu_circle_center: [320.0, 0.0],
            mu_circle_radius: 20.0,
            kappa: 4.0,
            seed: 0,
            gain_scale: 1.0,
        }
    }
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_circle_radius >= 0.0) {
            return Err(Error::InvalidConfig("mu_circle_radius must be >= 0".into()));
        }
        if !(self.kappa > 0.0) || !(self.gain_scale > 0.0) {
            return Err(Error::InvalidConfig("kappa and gain_scale must be > 0".into()));
        }
        Ok(())
    }

    fn gain(&self, mu: usize, pos: [f64; 2], node: [f64; 2], fading: f64, name: &'static str) -> Result<f64> {
        let d = ((pos[0] - node[0]).powi(2) + (pos[1] - node[1]).powi(2)).sqrt();
        if d <= 0.0 {
            return Err(Error::DegenerateGeometry { mu, node: name });
        }
        Ok(self.gain_scale * fading / d.powf(self.kappa))
    }

    /// `(g_ap, g_bs)` for a user at `pos` with the given fading samples.
    pub fn link_gains(&self, mu: usize, pos: [f64; 2], fading: (f64, f64)) -> Result<(f64, f64)> {
        Ok((
            self.gain(mu, pos, self.ap_pos, fading.0, "AP")?,
            self.gain(mu, pos, self.bs_pos, fading.1, "BS")?,
        ))
    }
}

/// Generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fading samples `(ap, bs)` for a user placed at a fixed location.
pub fn fading_pair(fading_seed: u64) -> (f64, f64) {
    let mut rng = stream_rng(fading_seed, 0);
    (rng.sample(Exp1), rng.sample(Exp1))
}

/// Positions and gains of `count` users drawn uniformly in the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub positions: Vec<[f64; 2]>,
    pub gains: Vec<(f64, f64)>,
}

/// Draws `count` users from stream `stream` of the topology's seed.
pub fn place_users(top: &Topology, count: usize, stream: u64) -> Result<Placement> {
    top.validate()?;
    let mut rng = stream_rng(top.seed, stream);
    let mut positions = Vec::with_capacity(count);
    let mut gains = Vec::with_capacity(count);
    for mu in 0..count {
        let r = top.mu_circle_radius * rng.random::<f64>().sqrt();
        let a = 2.0 * PI * rng.random::<f64>();
        let pos = [top.mu_circle_center[0] + r * a.cos(), top.mu_circle_center[1] + r * a.sin()];
        let fading = (rng.sample(Exp1), rng.sample(Exp1));
        gains.push(top.link_gains(mu, pos, fading)?);
        positions.push(pos);
    }
    Ok(Placement { positions, gains })
}

/// Per-user `(g_ap, g_bs)` from stream 0 of the topology's seed.
pub fn gains_from_topology(top: &Topology, count: usize) -> Result<Vec<(f64, f64)>> {
    place_users(top, count, 0).map(|p| p.gains)
}

/// One instance of a location sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationDraw {
    pub center: [f64; 2],
    pub draw: usize,
    pub instance: NetworkInstance,
}

/// `draws` random instances around each center. Draw `k` of center `c` uses
/// stream `c * draws + k`.
pub fn location_sweep(
    base: &Topology,
    centers: &[[f64; 2]],
    draws: usize,
    count: usize,
    demand: f64,
) -> Result<Vec<LocationDraw>> {
    let mut out = Vec::with_capacity(centers.len() * draws);
    for (c, center) in centers.iter().enumerate() {
        let top = Topology { mu_circle_center: *center, ..*base };
        for k in 0..draws {
            let stream = (c * draws + k) as u64;
            let placed = place_users(&top, count, stream)?;
            let mus = placed.gains.iter().map(|(a, b)| default_mu(*a, *b, demand)).collect();
            out.push(LocationDraw { center: *center, draw: k, instance: default_instance(mus) });
        }
    }
    Ok(out)
}

/// Gains of one user in a scenario file: given directly, or derived from a
/// location and a fading seed under the file's topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Direct { g_ap: f64, g_bs: f64 },
    Located { location: [f64; 2], fading_seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMu {
    #[serde(flatten)]
    pub gains: GainSpec,
    #[serde(default = "d_p_ap")]
    pub p_ap_max: f64,
    #[serde(default = "d_p_bs")]
    pub p_bs_max: f64,
    #[serde(default = "d_p_total")]
    pub p_total_max: f64,
    /// bit/s.
    pub demand: f64,
}

fn d_p_ap() -> f64 {
    DEFAULT_P_AP_MAX
}
fn d_p_bs() -> f64 {
    DEFAULT_P_BS_MAX
}
fn d_p_total() -> f64 {
    DEFAULT_P_TOTAL_MAX
}
fn d_w() -> f64 {
    DEFAULT_W_AP
}
fn d_b() -> f64 {
    DEFAULT_B_BS
}
fn d_n0() -> f64 {
    DEFAULT_N0
}
fn d_pa() -> f64 {
    DEFAULT_PRICE_AP_PER_GB
}
fn d_pb() -> f64 {
    DEFAULT_PRICE_BS_PER_GB
}

/// Optional solver settings carried by a scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub delta_top: Option<f64>,
    pub delta_sub: Option<f64>,
    pub epsilon_polyblock: Option<f64>,
    pub bisection_tol: Option<f64>,
    pub max_polyblock_iters: Option<usize>,
}

impl SolverOverrides {
    pub fn apply(&self, mut cfg: SolverConfig) -> SolverConfig {
        if let Some(v) = self.delta_top {
            cfg.delta_top = v;
        }
        if let Some(v) = self.delta_sub {
            cfg.delta_sub = v;
        }
        if let Some(v) = self.epsilon_polyblock {
            cfg.epsilon_polyblock = v;
        }
        if let Some(v) = self.bisection_tol {
            cfg.bisection_tol = v;
        }
        if let Some(v) = self.max_polyblock_iters {
            cfg.max_polyblock_iters = v;
        }
        cfg
    }

    /// `self` wins where set, `lower` fills the rest.
    pub fn over(self, lower: SolverOverrides) -> SolverOverrides {
        SolverOverrides {
            delta_top: self.delta_top.or(lower.delta_top),
            delta_sub: self.delta_sub.or(lower.delta_sub),
            epsilon_polyblock: self.epsilon_polyblock.or(lower.epsilon_polyblock),
            bisection_tol: self.bisection_tol.or(lower.bisection_tol),
            max_polyblock_iters: self.max_polyblock_iters.or(lower.max_polyblock_iters),
        }
    }
}

/// On-disk scenario. Prices are quoted in $/GB with 1 GB = 1e9 bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub mus: Vec<ScenarioMu>,
    #[serde(default = "d_w")]
    pub w_ap: f64,
    #[serde(default = "d_b")]
    pub b_bs: f64,
    #[serde(default = "d_n0")]
    pub n0: f64,
    #[serde(default = "d_pa")]
    pub price_ap_per_gb: f64,
    #[serde(default = "d_pb")]
    pub price_bs_per_gb: f64,
    /// Needed only for users given by location.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOverrides>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ScenarioParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    /// Scenario holding the instance's gains directly.
    pub fn from_instance(inst: &NetworkInstance) -> Self {
        Self {
            mus: inst
                .mus
                .iter()
                .map(|m| ScenarioMu {
                    gains: GainSpec::Direct { g_ap: m.g_ap, g_bs: m.g_bs },
                    p_ap_max: m.p_ap_max,
                    p_bs_max: m.p_bs_max,
                    p_total_max: m.p_total_max,
                    demand: m.demand,
                })
                .collect(),
            w_ap: inst.w_ap,
            b_bs: inst.b_bs,
            n0: inst.n0,
            price_ap_per_gb: inst.price_ap * BITS_PER_GB,
            price_bs_per_gb: inst.price_bs * BITS_PER_GB,
            topology: None,
            solver: None,
        }
    }

    /// Resolves gains and validates the result.
    pub fn to_instance(&self) -> Result<NetworkInstance> {
        let top = self.topology.unwrap_or_default();
        let mut mus = Vec::with_capacity(self.mus.len());
        for (i, m) in self.mus.iter().enumerate() {
            let (g_ap, g_bs) = match m.gains {
                GainSpec::Direct { g_ap, g_bs } => (g_ap, g_bs),
                GainSpec::Located { location, fading_seed } => {
                    top.validate()?;
                    top.link_gains(i, location, fading_pair(fading_seed))?
                }
            };
            mus.push(MuParams {
                g_ap,
                g_bs,
                p_ap_max: m.p_ap_max,
                p_bs_max: m.p_bs_max,
                p_total_max: m.p_total_max,
                demand: m.demand,
            });
        }
        NetworkInstance {
            mus,
            w_ap: self.w_ap,
            b_bs: self.b_bs,
            n0: self.n0,
            price_ap: price_per_bit(self.price_ap_per_gb),
            price_bs: price_per_bit(self.price_bs_per_gb),
        }
        .validated()
    }
}
