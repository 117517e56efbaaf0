use super::{check_dims, MetricError, MetricKind, QualityMap};
use crate::filters::{gaussian_kernel, separable_valid};
use crate::media::Plane;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VifParams {
    pub radius: usize,
    pub sigma: f64,
    /// Visual noise variance on the 8-bit scale.
    pub noise_var: f64,
    pub eps: f64,
}

impl Default for VifParams {
    fn default() -> Self {
        Self {
            radius: 4,
            sigma: 1.5,
            noise_var: 2.0,
            eps: 1e-10,
        }
    }
}

/// Single-scale pixel-domain VIF map (valid window positions only).
pub fn vif_map(
    reference: &Plane<f32>,
    distorted: &Plane<f32>,
    params: &VifParams,
) -> Result<QualityMap, MetricError> {
    check_dims(reference, distorted)?;
    let n = 2 * params.radius + 1;
    let (w, h) = (reference.width(), reference.height());
    if w < n || h < n {
        return Err(MetricError::Undersized {
            width: w,
            height: h,
            min: n,
        });
    }
    let x = reference.scaled_f64(255.0);
    let y = distorted.scaled_f64(255.0);
    let k = gaussian_kernel(params.sigma, params.radius);
    let (mx, ow, oh) = separable_valid(&x, w, h, &k);
    let (my, _, _) = separable_valid(&y, w, h, &k);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let (exx, _, _) = separable_valid(&xx, w, h, &k);
    let (eyy, _, _) = separable_valid(&yy, w, h, &k);
    let (exy, _, _) = separable_valid(&xy, w, h, &k);
    let values = (0..ow * oh)
        .map(|i| {
            let var_x = (exx[i] - mx[i] * mx[i]).max(0.0);
            let var_y = (eyy[i] - my[i] * my[i]).max(0.0);
            let cov = exy[i] - mx[i] * my[i];
            vif_ratio(var_x, var_y, cov, params) as f32
        })
        .collect();
    Ok(QualityMap {
        width: ow,
        height: oh,
        values,
        metric: MetricKind::Vif,
        normalized: true,
        border: params.radius,
    })
}

fn vif_ratio(var_x: f64, var_y: f64, cov: f64, p: &VifParams) -> f64 {
    if var_x < p.eps {
        return 1.0;
    }
    let g = cov / (var_x + p.eps);
    let sv2 = (var_y - g * cov).max(0.0);
    let num = (1.0 + g * g * var_x / (sv2 + p.noise_var)).ln();
    let den = (1.0 + var_x / p.noise_var).ln();
    (num / den).clamp(0.0, 1.0)
}
