use super::{check_dims, MetricError, MetricKind, QualityMap};
use crate::filters::{gaussian_kernel, separable_valid};
use crate::media::Plane;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub radius: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Sample range the constants refer to; inputs in `[0, 1]` are scaled by it.
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            radius: 5,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

/// Luminance and contrast-structure terms at every fully covered window.
#[derive(Clone, Debug)]
pub struct SsimComponents {
    pub width: usize,
    pub height: usize,
    pub luminance: Vec<f64>,
    pub contrast_structure: Vec<f64>,
}

impl SsimComponents {
    pub fn ssim(&self) -> impl Iterator<Item = f64> + '_ {
        self.luminance
            .iter()
            .zip(&self.contrast_structure)
            .map(|(l, cs)| l * cs)
    }
}

pub fn ssim_components(
    x: &[f64],
    y: &[f64],
    w: usize,
    h: usize,
    params: &SsimParams,
) -> SsimComponents {
    let k = gaussian_kernel(params.sigma, params.radius);
    let (mx, ow, oh) = separable_valid(x, w, h, &k);
    let (my, _, _) = separable_valid(y, w, h, &k);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (exx, _, _) = separable_valid(&xx, w, h, &k);
    let (eyy, _, _) = separable_valid(&yy, w, h, &k);
    let (exy, _, _) = separable_valid(&xy, w, h, &k);
    let (c1, c2) = (params.c1(), params.c2());
    let mut luminance = Vec::with_capacity(ow * oh);
    let mut contrast_structure = Vec::with_capacity(ow * oh);
    for i in 0..ow * oh {
        let (ux, uy) = (mx[i], my[i]);
        let sxx = exx[i] - ux * ux;
        let syy = eyy[i] - uy * uy;
        let sxy = exy[i] - ux * uy;
        luminance.push((2.0 * ux * uy + c1) / (ux * ux + uy * uy + c1));
        contrast_structure.push((2.0 * sxy + c2) / (sxx + syy + c2));
    }
    SsimComponents {
        width: ow,
        height: oh,
        luminance,
        contrast_structure,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SsimOutput {
    pub map: QualityMap,
    /// Mean of the raw (`[-1, 1]`) map.
    pub mean: f64,
}

/// SSIM map of two luma planes with a Gaussian window (valid positions only).
/// With `normalized`, map values are mapped to `[0, 1]` via `(v + 1) / 2`.
pub fn ssim_map(
    reference: &Plane<f32>,
    distorted: &Plane<f32>,
    params: &SsimParams,
    normalized: bool,
) -> Result<SsimOutput, MetricError> {
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
    let x = reference.scaled_f64(params.dynamic_range);
    let y = distorted.scaled_f64(params.dynamic_range);
    let comp = ssim_components(&x, &y, w, h, params);
    let raw: Vec<f64> = comp.ssim().collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let values = raw
        .iter()
        .map(|&v| {
            if normalized {
                ((v + 1.0) * 0.5).clamp(0.0, 1.0) as f32
            } else {
                v as f32
            }
        })
        .collect();
    Ok(SsimOutput {
        map: QualityMap {
            width: comp.width,
            height: comp.height,
            values,
            metric: MetricKind::Ssim,
            normalized,
            border: params.radius,
        },
        mean,
    })
}

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Number of dyadic scales whose smallest side still fits the window.
pub fn ms_ssim_scales(width: usize, height: usize, window: usize) -> usize {
    let mut side = width.min(height);
    let mut scales = 0;
    while scales < MS_SSIM_WEIGHTS.len() && side >= window {
        scales += 1;
        side /= 2;
    }
    scales
}

fn downsample(x: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (ow, oh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for xx in 0..ow {
            let i = 2 * y * w + 2 * xx;
            out.push(0.25 * (x[i] + x[i + 1] + x[i + w] + x[i + w + 1]));
        }
    }
    (out, ow, oh)
}

/// Multi-scale SSIM with 2x2 mean downsampling. When fewer than five scales
/// fit, the leading weights are used and renormalized to sum to one.
/// Negative per-scale terms are clamped to zero before exponentiation.
pub fn ms_ssim(
    reference: &Plane<f32>,
    distorted: &Plane<f32>,
    params: &SsimParams,
) -> Result<f64, MetricError> {
    check_dims(reference, distorted)?;
    let n = 2 * params.radius + 1;
    let (mut w, mut h) = (reference.width(), reference.height());
    let scales = ms_ssim_scales(w, h, n);
    if scales == 0 {
        return Err(MetricError::Undersized {
            width: w,
            height: h,
            min: n,
        });
    }
    let total: f64 = MS_SSIM_WEIGHTS[..scales].iter().sum();
    let mut x = reference.scaled_f64(params.dynamic_range);
    let mut y = distorted.scaled_f64(params.dynamic_range);
    let mut score = 1.0;
    for (s, weight) in MS_SSIM_WEIGHTS[..scales].iter().enumerate() {
        let comp = ssim_components(&x, &y, w, h, params);
        let count = comp.luminance.len() as f64;
        let term = if s + 1 == scales {
            comp.ssim().sum::<f64>() / count
        } else {
            comp.contrast_structure.iter().sum::<f64>() / count
        };
        score *= term.max(0.0).powf(weight / total);
        if s + 1 < scales {
            let (xd, nw, nh) = downsample(&x, w, h);
            let (yd, _, _) = downsample(&y, w, h);
            x = xd;
            y = yd;
            w = nw;
            h = nh;
        }
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Plane<f32> {
        Plane::from_fn(w, h, |_, _| rng.random_range(0u8..=255) as f32 / 255.0)
    }

    #[test]
    fn identical_planes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_plane(&mut rng, 32, 32);
        let out = ssim_map(&a, &a, &SsimParams::default(), false).unwrap();
        assert!((out.mean - 1.0).abs() < 1e-12);
        assert!(out.map.values.iter().all(|&v| (v - 1.0).abs() < 1e-6));
        assert_eq!((out.map.width, out.map.height, out.map.border), (22, 22, 5));
        assert!((ms_ssim(&a, &a, &SsimParams::default()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_offset_uses_luminance_only() {
        let a = Plane::filled(16, 16, 128.0f32 / 255.0);
        let b = Plane::filled(16, 16, 129.0f32 / 255.0);
        let out = ssim_map(&a, &b, &SsimParams::default(), false).unwrap();
        let c1 = (0.01f64 * 255.0).powi(2);
        let expect = (2.0 * 128.0 * 129.0 + c1) / (128.0f64 * 128.0 + 129.0 * 129.0 + c1);
        assert!(expect < 1.0);
        for &v in &out.map.values {
            assert!((v as f64 - expect).abs() < 1e-6);
        }
        assert!((out.mean - expect).abs() < 1e-9);
    }

    #[test]
    fn scale_rule() {
        assert_eq!(ms_ssim_scales(64, 64, 11), 3);
        assert_eq!(ms_ssim_scales(176, 200, 11), 5);
        assert_eq!(ms_ssim_scales(175, 400, 11), 4);
        assert_eq!(ms_ssim_scales(10, 400, 11), 0);
    }

    #[test]
    fn ms_ssim_matches_per_scale_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_plane(&mut rng, 64, 64);
        let b = Plane::from_fn(64, 64, |x, y| {
            (a.get(x, y) + rng.random_range(-0.1f32..0.1)).clamp(0.0, 1.0)
        });
        let p = SsimParams::default();
        // oracle: explicit pyramid via Plane::downsample2 and ssim_components
        let weights = [0.0448, 0.2856, 0.3001];
        let total: f64 = weights.iter().sum();
        let (mut pa, mut pb) = (a.clone(), b.clone());
        let mut expect = 1.0;
        for (s, w) in weights.iter().enumerate() {
            let c = ssim_components(
                &pa.scaled_f64(255.0),
                &pb.scaled_f64(255.0),
                pa.width(),
                pa.height(),
                &p,
            );
            let n = c.luminance.len() as f64;
            let term = if s == 2 {
                c.ssim().sum::<f64>() / n
            } else {
                c.contrast_structure.iter().sum::<f64>() / n
            };
            expect *= term.max(0.0).powf(w / total);
            pa = pa.downsample2();
            pb = pb.downsample2();
        }
        let got = ms_ssim(&a, &b, &p).unwrap();
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
        assert!(got < 1.0);
    }

    #[test]
    fn errors() {
        let a = Plane::filled(10, 10, 0.5f32);
        assert!(matches!(
            ssim_map(&a, &a, &SsimParams::default(), true),
            Err(MetricError::Undersized { .. })
        ));
        let b = Plane::filled(12, 12, 0.5f32);
        assert!(matches!(
            ssim_map(&b, &a, &SsimParams::default(), true),
            Err(MetricError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_plane(&mut rng, 20, 20);
        let b = random_plane(&mut rng, 20, 20);
        let p = SsimParams::default();
        assert!(
            (ssim_map(&a, &b, &p, false).unwrap().mean - ssim_map(&b, &a, &p, false).unwrap().mean)
                .abs()
                < 1e-12
        );
    }

    // Scalar SSIM computed window by window with a 2-D Gaussian.
    fn scalar_ssim_oracle(a: &Plane<f32>, b: &Plane<f32>) -> f64 {
        let mut wts = [[0.0f64; 11]; 11];
        let mut total = 0.0;
        for (j, row) in wts.iter_mut().enumerate() {
            for (i, v) in row.iter_mut().enumerate() {
                let (dx, dy) = (i as f64 - 5.0, j as f64 - 5.0);
                *v = (-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)).exp();
                total += *v;
            }
        }
        let (c1, c2) = (6.5025, 58.5225);
        let mut sum = 0.0;
        let (ow, oh) = (a.width() - 10, a.height() - 10);
        for oy in 0..oh {
            for ox in 0..ow {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for j in 0..11 {
                    for i in 0..11 {
                        let w = wts[j][i] / total;
                        let p = a.get(ox + i, oy + j) as f64 * 255.0;
                        let q = b.get(ox + i, oy + j) as f64 * 255.0;
                        mx += w * p;
                        my += w * q;
                        sxx += w * p * p;
                        syy += w * q * q;
                        sxy += w * p * q;
                    }
                }
                let (vx, vy, c) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                sum += (2.0 * mx * my + c1) * (2.0 * c + c2)
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
        sum / (ow * oh) as f64
    }

    #[test]
    fn mean_matches_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..3 {
            let a = random_plane(&mut rng, 32, 32);
            let b = random_plane(&mut rng, 32, 32);
            let out = ssim_map(&a, &b, &SsimParams::default(), false).unwrap();
            let expect = scalar_ssim_oracle(&a, &b);
            assert!((out.mean - expect).abs() < 1e-9, "{} vs {expect}", out.mean);
            let map_mean =
                out.map.values.iter().map(|&v| v as f64).sum::<f64>() / out.map.values.len() as f64;
            assert!((map_mean - out.mean).abs() < 1e-6);
        }
    }

    #[test]
    fn contrast_structure_ignores_joint_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let a = Plane::from_fn(24, 24, |_, _| rng.random_range(40u8..200) as f32 / 255.0);
        let b = Plane::from_fn(24, 24, |x, y| {
            (a.get(x, y) + rng.random_range(-0.05f32..0.05)).clamp(0.0, 1.0)
        });
        let shift = 30.0 / 255.0;
        let (a2, b2) = (a.map(|v| v + shift), b.map(|v| v + shift));
        let p = SsimParams::default();
        let c = ssim_components(&a.scaled_f64(255.0), &b.scaled_f64(255.0), 24, 24, &p);
        let c2 = ssim_components(&a2.scaled_f64(255.0), &b2.scaled_f64(255.0), 24, 24, &p);
        for (x, y) in c.contrast_structure.iter().zip(&c2.contrast_structure) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}
