use sled_tensor::Tensor;

use crate::error::{DataError, Result};

/// Per-channel normalisation constants applied to `[0,1]` RGB inputs.
pub const CHANNEL_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const CHANNEL_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// `(x − mean[c]) / std[c]` for a `[3,H,W]` image.
pub fn normalize(image: &Tensor) -> Result<Tensor> {
    let s = image.shape();
    if s.len() != 3 || s[0] != 3 {
        return Err(DataError::Parameter(format!("expected [3,H,W] image, got {s:?}")));
    }
    let plane = s[1] * s[2];
    let mut out = image.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let c = i / plane;
        *v = (*v - CHANNEL_MEAN[c]) / CHANNEL_STD[c];
    }
    Ok(out)
}

/// Stacks equally shaped `[C,H,W]` tensors into `[N,C,H,W]`.
pub fn stack(images: &[&Tensor]) -> Result<Tensor> {
    let first = images.first().ok_or_else(|| DataError::Parameter("cannot stack zero images".into()))?;
    let mut data = Vec::with_capacity(first.numel() * images.len());
    for img in images {
        if img.shape() != first.shape() {
            return Err(DataError::Parameter(format!(
                "cannot stack {:?} with {:?}",
                img.shape(),
                first.shape()
            )));
        }
        data.extend_from_slice(img.data());
    }
    let mut shape = vec![images.len()];
    shape.extend_from_slice(first.shape());
    Ok(Tensor::new(shape, data).expect("sized"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalises_channel_means_to_zero() {
        let img = Tensor::from_fn(vec![3, 1, 2], |i| CHANNEL_MEAN[i / 2]);
        assert!(normalize(&img).unwrap().data().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn stacks_along_new_axis() {
        let a = Tensor::ones(vec![3, 2, 2]);
        let b = Tensor::zeros(vec![3, 2, 2]);
        let s = stack(&[&a, &b]).unwrap();
        assert_eq!(s.shape(), &[2, 3, 2, 2]);
        assert_eq!(s.at(&[1, 0, 0, 0]), 0.0);
        assert!(stack(&[&a, &Tensor::ones(vec![3, 2, 4])]).is_err());
    }
}
