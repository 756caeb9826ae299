use sled_tensor::{Tape, Tensor, Var};

use crate::error::{Result, TrainError};

/// `Σ_i weights[i] · smooth_l1(outputs[i], gt, mask)`.
pub fn total_loss(tape: &mut Tape, outputs: &[Var], gt: Var, mask: &Tensor, weights: &[f64]) -> Result<Var> {
    if outputs.is_empty() || outputs.len() != weights.len() {
        return Err(TrainError::Config(format!(
            "{} loss weights for {} supervised outputs",
            weights.len(),
            outputs.len()
        )));
    }
    let mut total: Option<Var> = None;
    for (&out, &w) in outputs.iter().zip(weights) {
        let term = tape.smooth_l1(out, gt, mask)?;
        let term = tape.scale(term, w)?;
        total = Some(match total {
            Some(t) => tape.add(t, term)?,
            None => term,
        });
    }
    Ok(total.expect("non-empty"))
}
