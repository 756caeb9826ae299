//! Central finite-difference checks of tape gradients.

use crate::error::Result;
use crate::rng::XorShift64;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Finite-difference step `h`.
    pub step: f64,
    pub tolerance: f64,
    /// Check at most this many randomly chosen entries per input.
    pub max_entries_per_input: Option<usize>,
    pub seed: u64,
    /// Op name and factor for [`Tape::inject_fault`] on the analytic pass.
    pub fault: Option<(String, f64)>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { step: 1e-4, tolerance: 1e-4, max_entries_per_input: None, seed: 0, fault: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic − numeric| / max(1, |analytic|)` over checked entries.
    pub max_rel_error: f64,
    pub worst_input: usize,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    /// Checked entries whose `±h` evaluations fell on different linear
    /// pieces of some rectifier and were therefore compared at a reduced
    /// step (`h/10`, `h/100`, ...).
    pub refined: usize,
    /// Entries that straddled a kink at every step tried; excluded and,
    /// when sampling, replaced by a fresh draw.
    pub skipped: usize,
    /// Inputs for which no entry could be compared.
    pub unchecked_inputs: Vec<usize>,
}

impl GradCheckReport {
    /// Below `tolerance` with at least one entry compared for every input.
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance && self.unchecked_inputs.is_empty()
    }
}

const MAX_DRAWS_PER_ENTRY: usize = 8;
/// Steps tried per entry: `h`, `h/10`, `h/100`, `h/1000`.
const REFINEMENTS: usize = 4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// Compares the tape gradient of the scalar `f(inputs)` with respect to
/// every input against central differences.
///
/// Central differences across a rectifier kink measure the jump in slope,
/// not the derivative, so an entry is only compared at a step where both
/// perturbed evaluations share the same rectifier sign pattern; see
/// [`GradCheckReport::refined`].
///
/// `f` is re-run on a fresh tape for each perturbation, so it must be a
/// pure function of its inputs.
pub fn check_gradients<F>(inputs: &[Tensor], mut f: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    if let Some((op, factor)) = &opts.fault {
        tape.inject_fault(op, *factor);
    }
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| tape.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape().to_vec())))
        .collect();
    drop(tape);

    let mut eval = |perturbed: &[Tensor]| -> Result<(f64, Vec<bool>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| tape.constant(t.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        Ok((tape.value(loss).item()?, tape.relu_pattern()))
    };

    let mut rng = XorShift64::new(opts.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_input: 0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        refined: 0,
        skipped: 0,
        unchecked_inputs: Vec::new(),
    };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let n = input.numel();
        let sampled = matches!(opts.max_entries_per_input, Some(k) if k < n);
        let target = opts.max_entries_per_input.map_or(n, |k| k.min(n));
        // bounded so an input that always straddles a kink still terminates
        let budget = if sampled { target * MAX_DRAWS_PER_ENTRY } else { n };
        let (mut done, mut drawn) = (0, 0);
        while done < target && drawn < budget {
            let j = if sampled { rng.below(n) } else { drawn };
            drawn += 1;
            let x0 = input.data()[j];
            let mut found = None;
            for k in 0..REFINEMENTS {
                let h = opts.step / 10f64.powi(k as i32);
                work[i].data_mut()[j] = x0 + h;
                let (plus, plus_pattern) = eval(&work)?;
                work[i].data_mut()[j] = x0 - h;
                let (minus, minus_pattern) = eval(&work)?;
                if plus_pattern == minus_pattern {
                    found = Some(((plus - minus) / (2.0 * h), k > 0));
                    break;
                }
            }
            work[i].data_mut()[j] = x0;
            let Some((numeric, refined)) = found else {
                report.skipped += 1;
                continue;
            };
            report.refined += refined as usize;
            done += 1;
            let a = analytic[i].data()[j];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.checked == 1 {
                report = GradCheckReport {
                    max_rel_error: err,
                    worst_input: i,
                    worst_index: j,
                    analytic: a,
                    numeric,
                    unchecked_inputs: std::mem::take(&mut report.unchecked_inputs),
                    ..report
                };
            }
        }
        if done == 0 && n > 0 {
            report.unchecked_inputs.push(i);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_on_correct_gradient() {
        let x = Tensor::new(vec![3], vec![0.3, -1.2, 2.0]).unwrap();
        let report = check_gradients(
            &[x],
            |tape, v| {
                let sq = tape.mul(v[0], v[0])?;
                tape.sum(sq)
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!(report.checked, 3);
        assert!(report.passed(1e-6), "{report:?}");
    }

    #[test]
    fn detects_corrupted_adjoint() {
        let x = Tensor::new(vec![2], vec![0.3, -1.2]).unwrap();
        let opts = GradCheckOptions { fault: Some(("mul".into(), 1.5)), ..Default::default() };
        let report = check_gradients(
            &[x],
            |tape, v| {
                let sq = tape.mul(v[0], v[0])?;
                tape.sum(sq)
            },
            &opts,
        )
        .unwrap();
        assert!(!report.passed(1e-4));
    }

    #[test]
    fn entries_straddling_a_kink_use_a_smaller_step() {
        // 5e-5 lies within one step of the rectifier kink
        let x = Tensor::new(vec![3], vec![5e-6, 1.0, -0.5]).unwrap();
        let report = check_gradients(
            &[x],
            |tape, v| {
                let r = tape.relu(v[0])?;
                tape.sum(r)
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        // h/10 still straddles, h/100 does not
        assert_eq!((report.checked, report.refined, report.skipped), (3, 1, 0));
        assert!(report.passed(1e-9), "{report:?}");
    }
}
