//! Soft-argmin disparity readout.

use sled_tensor::{Tape, Var};

use crate::error::{ModelError, Result};

/// `Σ_d d · softmax_d(−cost)` over axis 2 of a `[N,1,D,H,W]` cost, giving
/// `[N,H,W]` disparities in cost-index units.
pub fn soft_argmin(tape: &mut Tape, cost: Var) -> Result<Var> {
    let shape = tape.shape(cost).to_vec();
    if shape.len() != 5 || shape[1] != 1 {
        return Err(ModelError::Shape(format!("expected [N,1,D,H,W] cost, got {shape:?}")));
    }
    let values: Vec<f64> = (0..shape[2]).map(|d| d as f64).collect();
    let neg = tape.neg(cost)?;
    let prob = tape.softmax(neg, 2)?;
    let disp = tape.expectation(prob, 2, &values)?;
    Ok(tape.reshape(disp, &[shape[0], shape[3], shape[4]])?)
}

/// Upsamples a 1/4-scale `[N,1,D/4,H/4,W/4]` cost ×4 trilinearly and reads
/// out full-resolution `[N,H,W]` disparities in `[0, max_disp − 1]`.
pub fn regress_disparity(tape: &mut Tape, cost: Var, max_disp: usize) -> Result<Var> {
    let shape = tape.shape(cost).to_vec();
    if shape.len() != 5 || 4 * shape[2] != max_disp {
        return Err(ModelError::Shape(format!(
            "cost {shape:?} does not match max_disp {max_disp} (disparity extent must be max_disp/4)"
        )));
    }
    let full = tape.trilinear_upsample(cost, 4)?;
    soft_argmin(tape, full)
}
