//! Result types shared by the centralized and distributed solvers, and the
//! deterministic reduction over the `rho0` grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AllocationSolution, NetworkInstance, RhoProfile};
use crate::transforms;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubproblemStatus {
    Optimal,
    Infeasible,
    /// The iteration cap was hit; `rho` holds the best point found so far.
    IterCapReached,
}

/// Solution of the inner problem at one fixed `rho0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemResult {
    pub rho0: f64,
    pub rho: Vec<f64>,
    /// `(price_bs - price_ap) * W * sum log2(1 - rho_i)`, $/s. Adding
    /// `price_bs * sum(R)` gives the total cost.
    pub value: f64,
    pub status: SubproblemStatus,
    /// Poly-block iterations or granted quanta.
    pub iterations: usize,
}

impl SubproblemResult {
    pub(crate) fn infeasible(rho0: f64, n: usize, iterations: usize) -> Self {
        Self {
            rho0,
            rho: vec![0.0; n],
            value: f64::INFINITY,
            status: SubproblemStatus::Infeasible,
            iterations,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status != SubproblemStatus::Infeasible
    }
}

/// Per-grid-point record of a linear search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub rho0: f64,
    /// Whether the feasibility gate admitted this point.
    pub feasible: bool,
    pub result: Option<SubproblemResult>,
}

/// Everything a top-level solver learned while scanning the `rho0` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub solution: AllocationSolution,
    pub best: SubproblemResult,
    pub grid: Vec<GridPoint>,
    pub feasible_points: usize,
    /// Feasible grid points over all grid points.
    pub feasible_ratio: f64,
    /// Sum of subproblem iterations over the grid.
    pub total_iterations: usize,
    /// Subproblems that stopped on the iteration cap.
    pub capped_points: usize,
}

/// The `F_sub` objective: `(price_bs - price_ap) * W * sum log2(1 - rho_i)`.
pub fn sub_objective(rho: &[f64], inst: &NetworkInstance) -> f64 {
    inst.price_gap() * inst.w_ap * rho.iter().map(|r| transforms::log2(1.0 - r)).sum::<f64>()
}

/// Picks the best subproblem (lowest value, ties to the smaller `rho0`) and
/// recovers the physical allocation.
pub(crate) fn reduce_grid(grid: Vec<GridPoint>, inst: &NetworkInstance) -> Result<SearchOutcome> {
    let mut best: Option<&SubproblemResult> = None;
    let mut feasible_points = 0;
    let mut total_iterations = 0;
    let mut capped_points = 0;
    for point in &grid {
        if point.feasible {
            feasible_points += 1;
        }
        let Some(r) = &point.result else { continue };
        total_iterations += r.iterations;
        if r.status == SubproblemStatus::IterCapReached {
            capped_points += 1;
        }
        if !r.is_feasible() {
            continue;
        }
        if best.is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    let best = best.ok_or(Error::GlobalInfeasible)?.clone();
    let solution = transforms::solution_from_rho(&RhoProfile::closed(best.rho.clone()), inst)?;
    let feasible_ratio = feasible_points as f64 / grid.len() as f64;
    Ok(SearchOutcome {
        solution,
        best,
        grid,
        feasible_points,
        feasible_ratio,
        total_iterations,
        capped_points,
    })
}
