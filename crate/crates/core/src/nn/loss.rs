use super::tensor::{Scalar, Tensor};
use super::NnError;
use crate::filters::{gaussian_kernel, separable_valid};

pub const SSIM_LOSS_RADIUS: usize = 5;
pub const SSIM_LOSS_SIGMA: f64 = 1.5;
pub const DEFAULT_ALPHA: f64 = 0.84;

/// Scalar loss and its gradient w.r.t. the prediction.
#[derive(Clone, Debug)]
pub struct LossOutput<F> {
    pub value: f64,
    pub grad: Tensor<F>,
}

fn same_shape<F: Scalar>(p: &Tensor<F>, p0: &Tensor<F>) -> Result<(), NnError> {
    if p.shape() != p0.shape() {
        return Err(NnError::Shape(format!(
            "loss operands {:?} vs {:?}",
            p.shape(),
            p0.shape()
        )));
    }
    if p.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    Ok(())
}

/// Transpose of [`separable_valid`]: scatter a valid-mode map back onto
/// the `w x h` input grid.
fn separable_valid_adjoint(coef: &[f64], ow: usize, oh: usize, kernel: &[f64]) -> Vec<f64> {
    let n = kernel.len();
    let (w, h) = (ow + n - 1, oh + n - 1);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..oh {
        for (k, &kv) in kernel.iter().enumerate() {
            for x in 0..ow {
                tmp[(y + k) * ow + x] += kv * coef[y * ow + x];
            }
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..ow {
            let v = tmp[y * ow + x];
            for (k, &kv) in kernel.iter().enumerate() {
                out[y * w + x + k] += kv * v;
            }
        }
    }
    out
}

/// `1 - mean SSIM(P0, P)` over every map in the batch, with the Gaussian
/// window of the full-reference metric and constants for a `[0, 1]` range.
pub fn loss_ssim<F: Scalar>(p: &Tensor<F>, p0: &Tensor<F>) -> Result<LossOutput<F>, NnError> {
    same_shape(p, p0)?;
    let (n, c, h, w) = p.dims4()?;
    let win = 2 * SSIM_LOSS_RADIUS + 1;
    if h < win || w < win {
        return Err(NnError::Shape(format!(
            "SSIM loss needs maps of at least {win}x{win}, got {h}x{w}"
        )));
    }
    let k = gaussian_kernel(SSIM_LOSS_SIGMA, SSIM_LOSS_RADIUS);
    let (c1, c2) = (1e-4, 9e-4);
    let hw = h * w;
    let (ow, oh) = (w + 1 - win, h + 1 - win);
    let count = (n * c * ow * oh) as f64;
    let mut total = 0.0;
    let mut grad = vec![F::zero(); p.len()];
    for m in 0..n * c {
        let y: Vec<f64> = p.data()[m * hw..(m + 1) * hw]
            .iter()
            .map(|v| v.f64())
            .collect();
        let x: Vec<f64> = p0.data()[m * hw..(m + 1) * hw]
            .iter()
            .map(|v| v.f64())
            .collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let (mx, _, _) = separable_valid(&x, w, h, &k);
        let (my, _, _) = separable_valid(&y, w, h, &k);
        let (exx, _, _) = separable_valid(&xx, w, h, &k);
        let (eyy, _, _) = separable_valid(&yy, w, h, &k);
        let (exy, _, _) = separable_valid(&xy, w, h, &k);
        let mut d_mu = vec![0.0; ow * oh];
        let mut d_yy = vec![0.0; ow * oh];
        let mut d_xy = vec![0.0; ow * oh];
        for i in 0..ow * oh {
            let (ux, uy) = (mx[i], my[i]);
            let sxx = exx[i] - ux * ux;
            let syy = eyy[i] - uy * uy;
            let sxy = exy[i] - ux * uy;
            let a1 = 2.0 * ux * uy + c1;
            let a2 = 2.0 * sxy + c2;
            let b1 = ux * ux + uy * uy + c1;
            let b2 = sxx + syy + c2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            // derivatives w.r.t. the raw window moments of y
            let ds_dexy = s * 2.0 / a2;
            let ds_deyy = -s / b2;
            let ds_dmu = s * (2.0 * ux / a1 - 2.0 * uy / b1) - ds_dexy * ux - ds_deyy * 2.0 * uy;
            d_mu[i] = ds_dmu;
            d_yy[i] = ds_deyy;
            d_xy[i] = ds_dexy;
        }
        let g_mu = separable_valid_adjoint(&d_mu, ow, oh, &k);
        let g_yy = separable_valid_adjoint(&d_yy, ow, oh, &k);
        let g_xy = separable_valid_adjoint(&d_xy, ow, oh, &k);
        for i in 0..hw {
            let ds_dy = g_mu[i] + 2.0 * y[i] * g_yy[i] + x[i] * g_xy[i];
            grad[m * hw + i] = F::of(-ds_dy / count);
        }
    }
    Ok(LossOutput {
        value: 1.0 - total / count,
        grad: Tensor::new(p.shape().to_vec(), grad)?,
    })
}

/// Mean absolute error; the subgradient at zero difference is 0.
pub fn loss_l1<F: Scalar>(p: &Tensor<F>, p0: &Tensor<F>) -> Result<LossOutput<F>, NnError> {
    same_shape(p, p0)?;
    let inv = 1.0 / p.len() as f64;
    let mut value = 0.0;
    let grad = p
        .data()
        .iter()
        .zip(p0.data())
        .map(|(&a, &b)| {
            let d = a.f64() - b.f64();
            value += d.abs();
            F::of(if d > 0.0 {
                inv
            } else if d < 0.0 {
                -inv
            } else {
                0.0
            })
        })
        .collect();
    Ok(LossOutput {
        value: value * inv,
        grad: Tensor::new(p.shape().to_vec(), grad)?,
    })
}

/// `alpha * L_ssim + (1 - alpha) * L_1`.
pub fn loss_generator<F: Scalar>(
    p: &Tensor<F>,
    p0: &Tensor<F>,
    alpha: f64,
) -> Result<LossOutput<F>, NnError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(NnError::Config(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    let s = loss_ssim(p, p0)?;
    let l = loss_l1(p, p0)?;
    let grad = s
        .grad
        .data()
        .iter()
        .zip(l.grad.data())
        .map(|(&a, &b)| F::of(alpha * a.f64() + (1.0 - alpha) * b.f64()))
        .collect();
    Ok(LossOutput {
        value: alpha * s.value + (1.0 - alpha) * l.value,
        grad: Tensor::new(p.shape().to_vec(), grad)?,
    })
}

/// Mean squared error of predictions against scalar targets.
pub fn loss_mse<F: Scalar>(
    prediction: &Tensor<F>,
    target: &[f64],
) -> Result<LossOutput<F>, NnError> {
    if prediction.len() != target.len() {
        return Err(NnError::Shape(format!(
            "{} predictions for {} targets",
            prediction.len(),
            target.len()
        )));
    }
    if target.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let inv = 1.0 / target.len() as f64;
    let mut value = 0.0;
    let grad = prediction
        .data()
        .iter()
        .zip(target)
        .map(|(&a, &t)| {
            let d = a.f64() - t;
            value += d * d;
            F::of(2.0 * d * inv)
        })
        .collect();
    Ok(LossOutput {
        value: value * inv,
        grad: Tensor::new(prediction.shape().to_vec(), grad)?,
    })
}
