//! Analytic gradients of every op against central finite differences
//! (h = 1e-4, relative error normalised by max(1, |analytic|)).

use sled_tensor::gradcheck::{check_gradients, GradCheckOptions};
use sled_tensor::{ConvSpec, NormMode, Tape, Tensor, Var, XorShift64, BN_EPS};

const TOL: f64 = 1e-4;

/// Reduces an arbitrary output to a scalar with fixed random weights so
/// every output element carries a distinct adjoint.
fn project(tape: &mut Tape, out: Var, seed: u64) -> sled_tensor::Result<Var> {
    let weights = XorShift64::new(seed).uniform_tensor(tape.shape(out).to_vec(), -1.0, 1.0);
    tape.weighted_sum(out, &weights)
}

fn assert_passes(name: &str, inputs: &[Tensor], f: impl FnMut(&mut Tape, &[Var]) -> sled_tensor::Result<Var>) {
    let report = check_gradients(inputs, f, &GradCheckOptions::default()).unwrap();
    assert!(report.passed(TOL), "{name}: {report:?}");
}

#[test]
fn conv3d_all_arguments() {
    let mut rng = XorShift64::new(1);
    let x = rng.uniform_tensor(vec![2, 2, 4, 5, 5], -1.0, 1.0);
    let w = rng.uniform_tensor(vec![3, 2, 3, 3, 3], -1.0, 1.0);
    let b = rng.uniform_tensor(vec![3], -1.0, 1.0);
    for spec in [ConvSpec::new(1, 1, 1), ConvSpec::new(2, 1, 1), ConvSpec::new(1, 2, 2), ConvSpec::new(2, 2, 2)] {
        assert_passes("conv3d", &[x.clone(), w.clone(), b.clone()], |t, v| {
            let y = t.conv(v[0], v[1], Some(v[2]), spec)?;
            project(t, y, 9)
        });
    }
}

#[test]
fn conv2d() {
    let mut rng = XorShift64::new(2);
    let x = rng.uniform_tensor(vec![2, 3, 6, 7], -1.0, 1.0);
    let w = rng.uniform_tensor(vec![2, 3, 3, 3], -1.0, 1.0);
    assert_passes("conv2d", &[x, w], |t, v| {
        let y = t.conv(v[0], v[1], None, ConvSpec::new(2, 1, 1))?;
        project(t, y, 10)
    });
}

#[test]
fn avg_pool() {
    let x = XorShift64::new(3).uniform_tensor(vec![1, 2, 4, 4, 8], -1.0, 1.0);
    assert_passes("avg_pool", &[x], |t, v| {
        let y = t.avg_pool(v[0], 2, 2)?;
        project(t, y, 11)
    });
}

#[test]
fn trilinear_upsample() {
    let x = XorShift64::new(4).uniform_tensor(vec![1, 2, 2, 3, 4], -1.0, 1.0);
    assert_passes("trilinear_upsample", &[x], |t, v| {
        let y = t.trilinear_upsample(v[0], 2)?;
        project(t, y, 12)
    });
}

#[test]
fn batchnorm_train_and_eval() {
    let mut rng = XorShift64::new(5);
    let x = rng.uniform_tensor(vec![2, 3, 2, 3, 3], -2.0, 2.0);
    let g = rng.uniform_tensor(vec![3], 0.5, 1.5);
    let b = rng.uniform_tensor(vec![3], -0.5, 0.5);
    assert_passes("batchnorm/train", &[x.clone(), g.clone(), b.clone()], |t, v| {
        let (y, _) = t.batchnorm(v[0], v[1], v[2], NormMode::Train, BN_EPS)?;
        project(t, y, 13)
    });
    let (mean, var) = ([0.1, -0.2, 0.3], [1.5, 0.7, 2.0]);
    assert_passes("batchnorm/eval", &[x, g, b], |t, v| {
        let (y, _) = t.batchnorm(v[0], v[1], v[2], NormMode::Eval { mean: &mean, var: &var }, BN_EPS)?;
        project(t, y, 14)
    });
}

#[test]
fn softmax_and_expectation() {
    let x = XorShift64::new(6).uniform_tensor(vec![2, 5, 3], -2.0, 2.0);
    assert_passes("softmax", std::slice::from_ref(&x), |t, v| {
        let y = t.softmax(v[0], 1)?;
        project(t, y, 15)
    });
    assert_passes("expectation", &[x], |t, v| {
        let p = t.softmax(v[0], 1)?;
        let e = t.expectation(p, 1, &[0.0, 1.0, 2.0, 3.0, 4.0])?;
        project(t, e, 16)
    });
}

#[test]
fn smooth_l1_both_branches() {
    let mut rng = XorShift64::new(7);
    // keep residuals away from the |x| = 1 kink
    let target = rng.uniform_tensor(vec![20], -3.0, 3.0);
    let pred = Tensor::from_fn(vec![20], |i| {
        let r = if i % 2 == 0 { 0.4 } else { 2.2 };
        target.data()[i] + if i % 3 == 0 { -r } else { r }
    });
    let mask = Tensor::from_fn(vec![20], |i| (i % 5 != 0) as u8 as f64);
    assert_passes("smooth_l1", &[pred, target], |t, v| t.smooth_l1(v[0], v[1], &mask));
}

#[test]
fn elementwise_chain() {
    let mut rng = XorShift64::new(8);
    let a = rng.uniform_tensor(vec![3, 4], -1.0, 1.0);
    let b = rng.uniform_tensor(vec![3, 4], -1.0, 1.0);
    assert_passes("elementwise", &[a, b], |t, v| {
        let s = t.add(v[0], v[1])?;
        let d = t.sub(s, v[1])?;
        let m = t.mul(d, v[1])?;
        let r = t.relu(m)?;
        let k = t.scale(r, -1.5)?;
        let reshaped = t.reshape(k, &[12])?;
        let z = t.add(reshaped, reshaped)?;
        t.sum(z)
    });
}
