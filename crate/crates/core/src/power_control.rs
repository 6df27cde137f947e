//! Iterative target-SINR power control on the shared AP channel.
//!
//! Every user scales its power by `theta_i* / SINR_i(p)` each round. The map
//! is a standard interference function, so from the no-interference seed
//! `theta_i* n_A / g_i` the iterates rise monotonically to the unique fixed
//! point given in closed form by [`crate::transforms::powers_from_sinr`].
//!
//! Users either all update at once from the previous round's powers, or one
//! after another from the latest ones. Both reach the same fixed point; the
//! sequential order roughly squares the contraction factor, which matters
//! when the AP is close to fully loaded.

use std::io;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{NetworkInstance, SinrProfile};
use crate::transforms;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UpdateOrder {
    Synchronous,
    /// Round-robin in user order, each update seeing the latest powers.
    #[default]
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerControlConfig {
    pub max_iters: usize,
    pub order: UpdateOrder,
    /// Stop once the largest relative power change falls below this.
    pub rel_tol: f64,
}

impl Default for PowerControlConfig {
    fn default() -> Self {
        Self { max_iters: 10_000, order: UpdateOrder::default(), rel_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerIterationTrace {
    /// Power vector after each round, starting with the seed.
    pub iterations: Vec<Vec<f64>>,
    pub converged: bool,
    /// Largest relative deviation of the last iterate from the closed form.
    pub final_gap: f64,
}

impl PowerIterationTrace {
    pub fn final_powers(&self) -> &[f64] {
        self.iterations.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn rounds(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }

    /// One row per (round, user): `round,mu,power_w,sinr`.
    pub fn write_csv<W: io::Write>(&self, inst: &NetworkInstance, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "mu", "power_w", "sinr"])?;
        for (round, p) in self.iterations.iter().enumerate() {
            let sinr = transforms::sinr_from_powers(p, inst);
            for (i, (pi, ti)) in p.iter().zip(&sinr.theta).enumerate() {
                w.write_record([
                    round.to_string(),
                    i.to_string(),
                    format!("{pi:.12e}"),
                    format!("{ti:.12e}"),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Minimum power control towards `theta_star`. One round updates every user once.
///
/// Errors only if `theta_star` is not realizable.
pub fn min_power_iterate(
    theta_star: &SinrProfile,
    inst: &NetworkInstance,
    cfg: &PowerControlConfig,
) -> Result<PowerIterationTrace> {
    let target = transforms::powers_from_sinr(theta_star, inst)?;
    let n_a = inst.noise_ap();
    let mut p: Vec<f64> = theta_star
        .theta
        .iter()
        .zip(&inst.mus)
        .map(|(t, m)| t * n_a / m.g_ap)
        .collect();
    let mut iterations = vec![p.clone()];
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let mut total: f64 = p.iter().zip(&inst.mus).map(|(x, m)| x * m.g_ap).sum();
        let mut next = p.clone();
        for (i, (m, t)) in inst.mus.iter().zip(&theta_star.theta).enumerate() {
            let own = next[i] * m.g_ap;
            let updated = t * (total - own + n_a) / m.g_ap;
            if cfg.order == UpdateOrder::Sequential {
                total += updated * m.g_ap - own;
            }
            next[i] = updated;
        }
        let change = p.iter().zip(&next).fold(0.0f64, |acc, (a, b)| acc.max(rel_diff(*a, *b)));
        p = next;
        iterations.push(p.clone());
        if change < cfg.rel_tol {
            converged = true;
            break;
        }
    }
    let final_gap = p.iter().zip(&target).fold(0.0f64, |acc, (a, b)| acc.max(rel_diff(*a, *b)));
    Ok(PowerIterationTrace { iterations, converged, final_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{price_per_bit, MuParams};

    fn inst(g: &[f64]) -> NetworkInstance {
        NetworkInstance {
            mus: g
                .iter()
                .map(|&g_ap| MuParams {
                    g_ap,
                    g_bs: 1e-8,
                    p_ap_max: 0.2,
                    p_bs_max: 0.25,
                    p_total_max: 0.35,
                    demand: 1e6,
                })
                .collect(),
            w_ap: 20e6,
            b_bs: 5e6,
            n0: 1e-15,
            price_ap: price_per_bit(2.0),
            price_bs: price_per_bit(10.0),
        }
    }

    #[test]
    fn zero_targets_stay_at_zero() {
        let i = inst(&[1e-5, 2e-5]);
        let t = min_power_iterate(&SinrProfile::new(vec![0.0, 0.0]), &i, &Default::default()).unwrap();
        assert!(t.converged);
        assert_eq!(t.rounds(), 1);
        assert!(t.final_powers().iter().all(|p| *p == 0.0));
    }

    #[test]
    fn single_user_reaches_fixed_point_in_one_update() {
        let i = inst(&[1e-5]);
        let t = min_power_iterate(&SinrProfile::new(vec![1.0]), &i, &Default::default()).unwrap();
        assert!((t.iterations[1][0] - i.noise_ap() / 1e-5).abs() < 1e-15);
        assert!(t.converged);
        assert!(t.final_gap < 1e-12);
    }

    #[test]
    fn iterates_rise_monotonically() {
        let i = inst(&[1.2709e-5, 0.6407e-5, 0.7771e-5]);
        let theta = SinrProfile::new(vec![0.4, 0.3, 0.5]);
        let t = min_power_iterate(&theta, &i, &Default::default()).unwrap();
        assert!(t.converged && t.final_gap < 1e-6);
        for w in t.iterations.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                assert!(b >= a);
            }
        }
        let sinr = transforms::sinr_from_powers(t.final_powers(), &i);
        for (a, b) in sinr.theta.iter().zip(&theta.theta) {
            assert!(rel_diff(*a, *b) < 1e-6);
        }
    }

    #[test]
    fn update_orders_share_the_fixed_point() {
        let i = inst(&[1.2709e-5, 0.6407e-5, 0.7771e-5, 0.9e-5]);
        // Load 0.99: the synchronous map contracts slowly here.
        let rho = [0.3, 0.25, 0.24, 0.2];
        let theta = SinrProfile::new(rho.iter().map(|r| r / (1.0 - r)).collect());
        let seq = min_power_iterate(&theta, &i, &Default::default()).unwrap();
        let sync_cfg = PowerControlConfig { order: UpdateOrder::Synchronous, ..Default::default() };
        let sync = min_power_iterate(&theta, &i, &sync_cfg).unwrap();
        assert!(seq.converged && sync.converged);
        assert!(seq.final_gap < 1e-6 && sync.final_gap < 1e-6);
        assert!(seq.rounds() < sync.rounds());
    }

    #[test]
    fn unrealizable_targets_error() {
        let i = inst(&[1e-5, 1e-5]);
        assert!(min_power_iterate(&SinrProfile::new(vec![1.0, 1.0]), &i, &Default::default()).is_err());
    }

    #[test]
    fn csv_rows() {
        let i = inst(&[1e-5, 2e-5]);
        let t = min_power_iterate(&SinrProfile::new(vec![0.2, 0.2]), &i, &Default::default()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&i, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * t.iterations.len());
    }
}
