//! Factor-sweep transfer evaluation: one trained model, a grid of adjusted
//! kernel-bank factors, one loss per cell.

use alloc::vec::Vec;
use core::fmt;

use crate::image::ImagePair;
use crate::net::{DegradationModel, NetError};
use crate::train::{bicubic_l1, evaluate_l1, TrainError};

#[derive(Clone, Debug, PartialEq)]
pub enum SweepError {
    NoModels,
    NoFactors,
    /// Models must share bank topology (kernel count, angles, aspect, grid).
    TopologyMismatch,
    Train(TrainError),
    Net(NetError),
}

impl fmt::Display for SweepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepError::NoModels => write!(f, "sweep needs at least one model"),
            SweepError::NoFactors => write!(f, "sweep needs at least one adjusted factor"),
            SweepError::TopologyMismatch => {
                write!(f, "models have incompatible kernel bank topologies")
            }
            SweepError::Train(e) => write!(f, "{e}"),
            SweepError::Net(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SweepError {}

impl From<TrainError> for SweepError {
    fn from(e: TrainError) -> Self {
        SweepError::Train(e)
    }
}

impl From<NetError> for SweepError {
    fn from(e: NetError) -> Self {
        SweepError::Net(e)
    }
}

/// Loss grid over (model, adjusted factor) plus the bicubic baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    /// Leading bank factor of each swept model (row labels).
    pub model_factors: Vec<f64>,
    /// Adjusted leading factors (column labels).
    pub adjusted_factors: Vec<f64>,
    /// `losses[row][col]` = L1 of model `row` rescaled to factor `col`.
    pub losses: Vec<Vec<f64>>,
    pub baseline_bicubic: f64,
}

impl SweepReport {
    /// Row and column of the smallest loss (first in row-major order on
    /// ties).
    pub fn argmin(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::INFINITY;
        for (r, row) in self.losses.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v < best_v {
                    best_v = v;
                    best = (r, c);
                }
            }
        }
        best
    }

    pub fn min_loss(&self) -> f64 {
        let (r, c) = self.argmin();
        self.losses[r][c]
    }
}

/// Ratio-preserving factor adjustment: the leading factor becomes
/// `adjusted` and every other factor keeps its ratio to the leader. Exact
/// copy when `adjusted` equals the current leading factor, so a sweep cell
/// at the model's own factor is bit-identical to direct evaluation.
pub fn adjust_factors(original: &[f64], adjusted: f64) -> Vec<f64> {
    if adjusted == original[0] {
        return original.to_vec();
    }
    original.iter().map(|f| adjusted * (f / original[0])).collect()
}

/// Evaluates every model at every adjusted factor on the same pairs.
pub fn factor_sweep(
    models: &[DegradationModel],
    factors: &[f64],
    pairs: &[ImagePair],
) -> Result<SweepReport, SweepError> {
    if models.is_empty() {
        return Err(SweepError::NoModels);
    }
    if factors.is_empty() {
        return Err(SweepError::NoFactors);
    }
    let reference = &models[0].config().bank;
    for m in models {
        if !m.config().bank.same_topology(reference) {
            return Err(SweepError::TopologyMismatch);
        }
    }
    let baseline_bicubic = bicubic_l1(pairs)?;
    let mut losses = Vec::with_capacity(models.len());
    for m in models {
        let original = m.config().bank.factors.clone();
        let mut row = Vec::with_capacity(factors.len());
        for &f in factors {
            let rescaled = m.rescaled(&adjust_factors(&original, f))?;
            row.push(evaluate_l1(&rescaled, pairs)?);
        }
        losses.push(row);
    }
    Ok(SweepReport {
        model_factors: models.iter().map(|m| m.config().bank.factors[0]).collect(),
        adjusted_factors: factors.to_vec(),
        losses,
        baseline_bicubic,
    })
}
