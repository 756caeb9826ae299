//! Finite-difference checks of whole-network gradients.

use sled_tensor::gradcheck::{check_gradients, GradCheckOptions, GradCheckReport};
use sled_tensor::{ConvSpec, NormMode, Tape, Tensor, TensorError, Var, XorShift64, BN_EPS};

use crate::cost_volume::build_cost_volume;
use crate::disparity::regress_disparity;
use crate::error::{ModelError, Result};
use crate::layers::Mode;
use crate::model::StereoModel;

fn to_tensor_error(e: ModelError) -> TensorError {
    match e {
        ModelError::Tensor(t) => t,
        other => TensorError::Usage(other.to_string()),
    }
}

/// Result of a network check, with `worst_input` resolved to a name.
#[derive(Clone, Debug)]
pub struct NetworkCheck {
    pub report: GradCheckReport,
    pub worst_name: String,
    /// Parameter tensors included in the check.
    pub tensors: usize,
}

/// Scalar probe `Σ_i <w_i, out_i>` with fixed random weights.
fn probe(tape: &mut Tape, outs: &[Var], weights: &[Tensor]) -> sled_tensor::Result<Var> {
    let mut total: Option<Var> = None;
    for (&o, w) in outs.iter().zip(weights) {
        let term = tape.weighted_sum(o, w)?;
        total = Some(match total {
            Some(t) => tape.add(t, term)?,
            None => term,
        });
    }
    Ok(total.expect("at least one output"))
}

fn run(
    model: &StereoModel,
    selected: Vec<usize>,
    extra: Vec<(String, Tensor)>,
    opts: &GradCheckOptions,
    forward: impl Fn(&mut Tape, &[Var], &[Var]) -> Result<Vec<Var>>,
) -> Result<NetworkCheck> {
    let store = model.store();
    let mut inputs: Vec<Tensor> = selected.iter().map(|&i| store.params()[i].value.clone()).collect();
    let mut names: Vec<String> = selected.iter().map(|&i| store.params()[i].name.clone()).collect();
    for (name, t) in extra {
        names.push(name);
        inputs.push(t);
    }
    let n_sel = selected.len();

    // output shapes for the probe weights come from one plain forward
    let shapes: Vec<Vec<usize>> = {
        let mut tape = Tape::new();
        let params: Vec<Var> = store.params().iter().map(|p| tape.constant(p.value.clone())).collect();
        let extra_vars: Vec<Var> = inputs[n_sel..].iter().map(|t| tape.constant(t.clone())).collect();
        let outs = forward(&mut tape, &params, &extra_vars)?;
        outs.iter().map(|&o| tape.shape(o).to_vec()).collect()
    };
    let mut rng = XorShift64::new(opts.seed ^ 0x9e37_79b9);
    let weights: Vec<Tensor> = shapes.into_iter().map(|s| rng.uniform_tensor(s, -1.0, 1.0)).collect();

    let report = check_gradients(
        &inputs,
        |tape, vars| {
            let mut params: Vec<Var> = Vec::with_capacity(store.params().len());
            let mut next = 0;
            for (i, p) in store.params().iter().enumerate() {
                if next < n_sel && selected[next] == i {
                    params.push(vars[next]);
                    next += 1;
                } else {
                    params.push(tape.constant(p.value.clone()));
                }
            }
            let outs = forward(tape, &params, &vars[n_sel..]).map_err(to_tensor_error)?;
            probe(tape, &outs, &weights)
        },
        opts,
    )?;
    Ok(NetworkCheck { worst_name: names[report.worst_input].clone(), report, tensors: n_sel })
}

/// Checks every regularizer parameter tensor and the input volume, using
/// train-mode batch statistics.
pub fn check_regularizer(model: &StereoModel, volume: &Tensor, opts: &GradCheckOptions) -> Result<NetworkCheck> {
    let selected: Vec<usize> = (0..model.store().params().len())
        .filter(|&i| !model.store().params()[i].name.starts_with("backbone."))
        .collect();
    run(model, selected, vec![("volume".into(), volume.clone())], opts, |tape, params, extra| {
        Ok(model.regularize(tape, params, extra[0], Mode::Train)?.0)
    })
}

/// Checks every parameter tensor of the full image-to-disparity pipeline.
pub fn check_pipeline(model: &StereoModel, left: &Tensor, right: &Tensor, opts: &GradCheckOptions) -> Result<NetworkCheck> {
    let selected: Vec<usize> = (0..model.store().params().len()).collect();
    let (l, r) = (left.clone(), right.clone());
    run(model, selected, Vec::new(), opts, move |tape, params, _| {
        let (lv, rv) = (tape.constant(l.clone()), tape.constant(r.clone()));
        Ok(model.forward(tape, params, lv, rv, Mode::Train)?.disparities)
    })
}

/// Finite-difference check of one op (or short op chain) on random inputs.
#[derive(Clone, Debug)]
pub struct OpCheck {
    pub name: &'static str,
    pub report: GradCheckReport,
}

type OpCase = (&'static str, Vec<Tensor>, Box<dyn Fn(&mut Tape, &[Var]) -> sled_tensor::Result<Var>>);

/// Reduces an output to a scalar with fixed random weights so every
/// element carries a distinct adjoint.
fn project(tape: &mut Tape, out: Var, seed: u64) -> sled_tensor::Result<Var> {
    let weights = XorShift64::new(seed).uniform_tensor(tape.shape(out).to_vec(), -1.0, 1.0);
    tape.weighted_sum(out, &weights)
}

fn op_cases(seed: u64) -> Vec<OpCase> {
    let mut rng = XorShift64::new(seed);
    let mut u = |shape: &[usize], lo: f64, hi: f64| rng.uniform_tensor(shape.to_vec(), lo, hi);
    let mut cases: Vec<OpCase> = Vec::new();
    for (name, spec) in [
        ("conv3d", ConvSpec::new(1, 1, 1)),
        ("conv3d/stride2", ConvSpec::new(2, 1, 1)),
        ("conv3d/dilation2", ConvSpec::new(1, 2, 2)),
    ] {
        cases.push((
            name,
            vec![u(&[2, 2, 4, 5, 5], -1.0, 1.0), u(&[3, 2, 3, 3, 3], -1.0, 1.0), u(&[3], -1.0, 1.0)],
            Box::new(move |t, v| {
                let y = t.conv(v[0], v[1], Some(v[2]), spec)?;
                project(t, y, 1)
            }),
        ));
    }
    cases.push((
        "conv2d/stride2",
        vec![u(&[2, 3, 6, 7], -1.0, 1.0), u(&[2, 3, 3, 3], -1.0, 1.0)],
        Box::new(|t, v| {
            let y = t.conv(v[0], v[1], None, ConvSpec::new(2, 1, 1))?;
            project(t, y, 2)
        }),
    ));
    cases.push((
        "avg_pool",
        vec![u(&[1, 2, 4, 4, 8], -1.0, 1.0)],
        Box::new(|t, v| {
            let y = t.avg_pool(v[0], 2, 2)?;
            project(t, y, 3)
        }),
    ));
    cases.push((
        "trilinear_upsample",
        vec![u(&[1, 2, 2, 3, 4], -1.0, 1.0)],
        Box::new(|t, v| {
            let y = t.trilinear_upsample(v[0], 2)?;
            project(t, y, 4)
        }),
    ));
    cases.push((
        "batchnorm",
        vec![u(&[2, 3, 2, 3, 3], -2.0, 2.0), u(&[3], 0.5, 1.5), u(&[3], -0.5, 0.5)],
        Box::new(|t, v| {
            let (y, _) = t.batchnorm(v[0], v[1], v[2], NormMode::Train, BN_EPS)?;
            project(t, y, 5)
        }),
    ));
    cases.push((
        "softmax",
        vec![u(&[2, 5, 3], -2.0, 2.0)],
        Box::new(|t, v| {
            let y = t.softmax(v[0], 1)?;
            project(t, y, 6)
        }),
    ));
    cases.push((
        "expectation",
        vec![u(&[2, 5, 3], 0.0, 1.0)],
        Box::new(|t, v| {
            let y = t.expectation(v[0], 1, &[0.0, 1.0, 2.0, 3.0, 4.0])?;
            project(t, y, 7)
        }),
    ));
    let target = u(&[24], -3.0, 3.0);
    // residuals alternate between the quadratic and linear branches
    let pred = Tensor::from_fn(vec![24], |i| target.data()[i] + if i % 2 == 0 { 0.4 } else { -2.2 });
    let mask = Tensor::from_fn(vec![24], |i| f64::from(u8::from(i % 5 != 0)));
    cases.push(("smooth_l1", vec![pred, target], Box::new(move |t, v| t.smooth_l1(v[0], v[1], &mask))));
    cases.push((
        "elementwise",
        vec![u(&[3, 4], -1.0, 1.0), u(&[3, 4], -1.0, 1.0)],
        Box::new(|t, v| {
            let s = t.add(v[0], v[1])?;
            let d = t.sub(s, v[1])?;
            let m = t.mul(d, v[1])?;
            let r = t.relu(m)?;
            let k = t.scale(r, -1.5)?;
            let flat = t.reshape(k, &[12])?;
            t.sum(flat)
        }),
    ));
    cases.push((
        "cost_volume",
        vec![u(&[2, 2, 2, 5], -1.0, 1.0), u(&[2, 2, 2, 5], -1.0, 1.0)],
        Box::new(|t, v| {
            let y = build_cost_volume(t, v[0], v[1], 12).map_err(to_tensor_error)?;
            project(t, y, 8)
        }),
    ));
    cases.push((
        "disparity_regression",
        vec![u(&[1, 1, 3, 2, 2], -2.0, 2.0)],
        Box::new(|t, v| {
            let y = regress_disparity(t, v[0], 12).map_err(to_tensor_error)?;
            project(t, y, 9)
        }),
    ));
    cases
}

/// Checks every differentiable op on small random inputs. Only
/// `opts.step`, `opts.seed` and `opts.fault` are used; every entry is
/// checked.
pub fn check_ops(opts: &GradCheckOptions) -> Result<Vec<OpCheck>> {
    let full = GradCheckOptions { max_entries_per_input: None, ..opts.clone() };
    op_cases(opts.seed)
        .into_iter()
        .map(|(name, inputs, f)| {
            let report = check_gradients(&inputs, |t, v| f(t, v), &full)?;
            Ok(OpCheck { name, report })
        })
        .collect()
}
