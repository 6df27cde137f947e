//! Joint traffic scheduling and transmit-power allocation for mobile users
//! with dual connectivity: every user splits its uplink demand between an
//! orthogonal macro base-station (BS) channel and a shared small-cell
//! access-point (AP) channel, and the goal is the cheapest split whose
//! powers respect every per-interface and total power cap.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: instance parameters, decision variables and solver settings.
//! - [`transforms`]: closed-form maps between powers, SINRs, the
//!   `rho` coordinates and physical allocations.
//! - [`centralized`]: poly-block monotonic optimization over `rho` for a
//!   fixed slack `rho0`, wrapped in a linear search over `rho0`.
//! - [`distributed`]: per-user feasible intervals and the bid-based
//!   currency allocation, valid when the AP bandwidth is at least the BS
//!   bandwidth.
//! - [`power_control`]: iterative target-SINR power control that reaches
//!   the closed-form AP powers.
//! - [`oracle`]: brute-force global search and the baseline schemes.
//! - [`scenarios`]: channel model, built-in instances, sweeps and the
//!   scenario file format.
//!
//! Units are SI throughout: Hz, bit/s, W, W/Hz and $/bit (prices quoted per
//! GB are converted at 1 GB = 1e9 bit). Costs therefore come out in $/s.

pub mod centralized;
pub mod distributed;
pub mod error;
pub mod model;
pub mod oracle;
pub mod power_control;
pub mod scenarios;
pub mod search;
pub mod transforms;

pub use error::{Error, Result};
pub use model::{
    AllocationSolution, MuParams, NetworkInstance, RhoProfile, SinrProfile, SolverConfig, Violation,
};
pub use search::{SearchOutcome, SubproblemResult, SubproblemStatus};
