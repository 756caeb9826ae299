//! Elementwise arithmetic, reductions and reshapes.

use crate::error::{Result, TensorError};
use crate::tape::{BackwardCtx, Function, Tape, Var};
use crate::tensor::Tensor;

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.rank() != b.rank() {
        return Err(TensorError::dim(op, None, format!("rank {} vs {}", a.rank(), b.rank())));
    }
    for (axis, (x, y)) in a.shape().iter().zip(b.shape()).enumerate() {
        if x != y {
            return Err(TensorError::dim(op, Some(axis), format!("extent {x} vs {y}")));
        }
    }
    Ok(())
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shape preserved")
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(a.shape().to_vec(), a.data().iter().map(|&x| f(x)).collect()).expect("shape preserved")
}

struct Add;
impl Function for Add {
    fn name(&self) -> &'static str {
        "add"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(ctx.grad.clone()), Some(ctx.grad.clone())])
    }
}

struct Sub;
impl Function for Sub {
    fn name(&self) -> &'static str {
        "sub"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(ctx.grad.clone()), Some(map(ctx.grad, |g| -g))])
    }
}

struct Mul;
impl Function for Mul {
    fn name(&self) -> &'static str {
        "mul"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let (a, b) = (ctx.inputs[0], ctx.inputs[1]);
        Ok(vec![
            ctx.needs[0].then(|| zip_map(ctx.grad, b, |g, y| g * y)),
            ctx.needs[1].then(|| zip_map(ctx.grad, a, |g, x| g * x)),
        ])
    }
}

struct Scale(f64);
impl Function for Scale {
    fn name(&self) -> &'static str {
        "scale"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let s = self.0;
        Ok(vec![Some(map(ctx.grad, |g| g * s))])
    }
}

struct Relu;
impl Function for Relu {
    fn name(&self) -> &'static str {
        "relu"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(zip_map(ctx.grad, ctx.inputs[0], |g, x| if x > 0.0 { g } else { 0.0 }))])
    }
}

struct Sum;
impl Function for Sum {
    fn name(&self) -> &'static str {
        "sum"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let g = ctx.grad.data()[0];
        Ok(vec![Some(Tensor::full(ctx.inputs[0].shape().to_vec(), g))])
    }
}

/// Dot product with a fixed weight tensor.
struct WeightedSum(Tensor);
impl Function for WeightedSum {
    fn name(&self) -> &'static str {
        "weighted_sum"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let g = ctx.grad.data()[0];
        Ok(vec![Some(map(&self.0, |w| w * g))])
    }
}

struct Reshape;
impl Function for Reshape {
    fn name(&self) -> &'static str {
        "reshape"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(ctx.grad.clone().reshape(ctx.inputs[0].shape().to_vec())?)])
    }
}

impl Tape {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.value(a), self.value(b))?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        self.record(Box::new(Add), vec![a, b], out)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("sub", self.value(a), self.value(b))?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        self.record(Box::new(Sub), vec![a, b], out)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("mul", self.value(a), self.value(b))?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        self.record(Box::new(Mul), vec![a, b], out)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let out = map(self.value(a), |x| x * factor);
        self.record(Box::new(Scale(factor)), vec![a], out)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = map(self.value(a), |x| x.max(0.0));
        self.record(Box::new(Relu), vec![a], out)
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.record(Box::new(Sum), vec![a], Tensor::scalar(s))
    }

    /// `Σ a[i] · weights[i]` for a fixed (non-differentiated) weight tensor.
    pub fn weighted_sum(&mut self, a: Var, weights: &Tensor) -> Result<Var> {
        same_shape("weighted_sum", self.value(a), weights)?;
        let s = self.value(a).data().iter().zip(weights.data()).map(|(x, w)| x * w).sum();
        self.record(Box::new(WeightedSum(weights.clone())), vec![a], Tensor::scalar(s))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape.to_vec())?;
        self.record(Box::new(Reshape), vec![a], out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_checks_shape() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(vec![2, 3]));
        let b = tape.constant(Tensor::zeros(vec![2, 4]));
        match tape.add(a, b) {
            Err(TensorError::Dimension { axis: Some(1), .. }) => {}
            other => panic!("expected axis-1 error, got {other:?}"),
        }
    }

    #[test]
    fn quadratic_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![2], vec![1.0, -2.0]).unwrap(), true);
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2.0, -4.0]);
    }

    #[test]
    fn linear_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_fn(vec![3, 2], |i| i as f64 * 0.3), true);
        let loss = tape.sum(x).unwrap();
        tape.backward(loss).unwrap();
        assert!(tape.grad(x).unwrap().data().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn second_backward_doubles_gradients() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap(), true);
        let y = tape.relu(x).unwrap();
        let z = tape.mul(y, x).unwrap();
        let loss = tape.sum(z).unwrap();
        tape.backward(loss).unwrap();
        let once = tape.grad(x).unwrap().clone();
        tape.backward(loss).unwrap();
        let twice = tape.grad(x).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn non_scalar_backward_is_usage_error() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(vec![2]), true);
        let y = tape.relu(x).unwrap();
        assert!(matches!(tape.backward(y), Err(TensorError::Usage(_))));
    }

    #[test]
    fn non_finite_output_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(vec![2], f64::MAX));
        assert!(matches!(tape.scale(x, 10.0), Err(TensorError::NonFinite { op: "scale" })));
    }
}
