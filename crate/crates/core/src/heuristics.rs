//! Closed-form defaults for the clustering hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::local::WeightedCentroid;
use crate::scalar::Scalar;
use crate::topology::radius_heuristic;

/// Lower bound applied to the softening so huge budgets never yield zero.
pub const SOFTENING_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams {
    pub local_k: usize,
    pub softening: f64,
    pub alpha: f64,
    pub radius: f64,
}

/// `round(15 + n / 500)`, halves rounded up.
pub fn heuristic_k(n: usize) -> usize {
    (15.0 + n as f64 / 500.0 + 0.5).floor() as usize
}

/// `500 exp(-5 epsilon)`, floored at [`SOFTENING_FLOOR`].
pub fn heuristic_softening(epsilon: f64) -> f64 {
    (500.0 * (-5.0 * epsilon).exp()).max(SOFTENING_FLOOR)
}

/// `2 + 20 / (epsilon + 1)`.
pub fn heuristic_alpha(epsilon: f64) -> f64 {
    2.0 + 20.0 / (epsilon + 1.0)
}

pub fn heuristic_all<T: Scalar>(
    n: usize,
    epsilon: f64,
    sources: &[WeightedCentroid<T>],
) -> Result<HeuristicParams> {
    Ok(HeuristicParams {
        local_k: heuristic_k(n),
        softening: heuristic_softening(epsilon),
        alpha: heuristic_alpha(epsilon),
        radius: radius_heuristic(sources)?.as_f64(),
    })
}
