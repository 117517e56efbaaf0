//! Synthetic two-stage distortions (noise or blur, then block-DCT
//! compression) and procedural pristine textures.
//!
//! Randomness comes from ChaCha8 seeded with a `u64`; the stream is portable
//! across platforms, so a `(plane, recipe)` pair fixes the output bits.

use crate::filters::{gaussian_kernel, separable_replicate};
use crate::media::Plane;
use crate::quality::{vif_map, MetricError, QualityMap, VifParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DistortError {
    #[error("sigma must be finite and non-negative, got {0}")]
    BadSigma(f64),
    #[error("quality must be in 1..=100, got {0}")]
    BadQuality(u32),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_sigma(sigma: f64) -> Result<(), DistortError> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(DistortError::BadSigma(sigma));
    }
    Ok(())
}

/// Add i.i.d. `N(0, sigma^2)` noise, sigma on the 8-bit scale, and clamp.
pub fn gaussian_noise(
    plane: &Plane<f32>,
    sigma: f64,
    seed: u64,
) -> Result<Plane<f32>, DistortError> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(plane.clone());
    }
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, sigma / 255.0).expect("sigma checked");
    let data = plane
        .data()
        .iter()
        .map(|&v| (v as f64 + normal.sample(&mut rng)).clamp(0.0, 1.0) as f32)
        .collect();
    Ok(Plane::new(plane.width(), plane.height(), data).expect("same size"))
}

/// Separable Gaussian blur, radius `ceil(3 sigma)`, replicated borders.
pub fn gaussian_blur(plane: &Plane<f32>, sigma: f64) -> Result<Plane<f32>, DistortError> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(plane.clone());
    }
    let kernel = gaussian_kernel(sigma, (3.0 * sigma).ceil() as usize);
    let (w, h) = (plane.width(), plane.height());
    let data: Vec<f64> = plane.data().iter().map(|&v| v as f64).collect();
    let out = separable_replicate(&data, w, h, &kernel);
    Ok(Plane::new(w, h, out.into_iter().map(|v| v as f32).collect()).expect("same size"))
}

pub const LUMA_QUANT_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Luminance table scaled by the usual quality rule.
pub fn quant_table(quality: u32) -> Result<[u16; 64], DistortError> {
    if !(1..=100).contains(&quality) {
        return Err(DistortError::BadQuality(quality));
    }
    let scale = if quality < 50 {
        5000 / quality
    } else {
        200 - 2 * quality
    };
    let mut t = [0u16; 64];
    for (o, &b) in t.iter_mut().zip(&LUMA_QUANT_TABLE) {
        *o = ((b as u32 * scale + 50) / 100).clamp(1, 255) as u16;
    }
    Ok(t)
}

fn dct_matrix() -> [[f64; 8]; 8] {
    let mut c = [[0.0; 8]; 8];
    for (u, row) in c.iter_mut().enumerate() {
        let a = if u == 0 {
            (1.0f64 / 8.0).sqrt()
        } else {
            (2.0f64 / 8.0).sqrt()
        };
        for (x, v) in row.iter_mut().enumerate() {
            *v = a * (((2 * x + 1) * u) as f64 * std::f64::consts::PI / 16.0).cos();
        }
    }
    c
}

/// Quantize one level-shifted 8x8 block in place and return the
/// reconstructed samples (still level-shifted, unrounded).
fn code_block(block: &[f64; 64], table: &[u16; 64], c: &[[f64; 8]; 8]) -> [f64; 64] {
    // forward: C * B * C^T
    let mut tmp = [0.0; 64];
    for u in 0..8 {
        for x in 0..8 {
            tmp[u * 8 + x] = (0..8).map(|y| c[u][y] * block[y * 8 + x]).sum();
        }
    }
    let mut coef = [0.0; 64];
    for u in 0..8 {
        for v in 0..8 {
            let f: f64 = (0..8).map(|x| tmp[u * 8 + x] * c[v][x]).sum();
            let q = table[u * 8 + v] as f64;
            coef[u * 8 + v] = (f / q).round() * q;
        }
    }
    // inverse: C^T * F * C
    for y in 0..8 {
        for v in 0..8 {
            tmp[y * 8 + v] = (0..8).map(|u| c[u][y] * coef[u * 8 + v]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| tmp[y * 8 + v] * c[v][x]).sum();
        }
    }
    out
}

/// JPEG-like block-DCT quantization without entropy coding. Samples are
/// taken to 8 bits, partial edge blocks are padded by replication, and the
/// result is rounded back to 8-bit levels.
pub fn block_dct_compress(plane: &Plane<f32>, quality: u32) -> Result<Plane<f32>, DistortError> {
    let table = quant_table(quality)?;
    let c = dct_matrix();
    let (w, h) = (plane.width(), plane.height());
    let src = plane.to_u8();
    let mut out = vec![0.0f32; w * h];
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            let mut block = [0.0; 64];
            for y in 0..8 {
                for x in 0..8 {
                    let v = src.get((bx + x).min(w - 1), (by + y).min(h - 1));
                    block[y * 8 + x] = v as f64 - 128.0;
                }
            }
            let rec = code_block(&block, &table, &c);
            for y in 0..8.min(h - by) {
                for x in 0..8.min(w - bx) {
                    let v = (rec[y * 8 + x] + 128.0).round().clamp(0.0, 255.0);
                    out[(by + y) * w + bx + x] = v as f32 / 255.0;
                }
            }
        }
    }
    Ok(Plane::new(w, h, out).expect("same size"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FirstStage {
    Noise { sigma: f64 },
    Blur { sigma: f64 },
}

pub const NOISE_SIGMA_RANGE: (f64, f64) = (1.0, 30.0);
pub const BLUR_SIGMA_RANGE: (f64, f64) = (0.5, 8.0);
pub const QUALITY_RANGE: (u32, u32) = (5, 80);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionRecipe {
    pub first_stage: FirstStage,
    pub quality: u32,
    pub seed: u64,
}

impl DistortionRecipe {
    /// Draw a recipe uniformly over the sampling ranges.
    pub fn random(seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let first_stage = if rng.random_bool(0.5) {
            FirstStage::Noise {
                sigma: rng.random_range(NOISE_SIGMA_RANGE.0..=NOISE_SIGMA_RANGE.1),
            }
        } else {
            FirstStage::Blur {
                sigma: rng.random_range(BLUR_SIGMA_RANGE.0..=BLUR_SIGMA_RANGE.1),
            }
        };
        let quality = rng.random_range(QUALITY_RANGE.0..=QUALITY_RANGE.1);
        Self {
            first_stage,
            quality,
            seed: rng.random(),
        }
    }

    /// Accepts any sigma >= 0 and quality in 1..=100; the narrower ranges
    /// above only govern random sampling.
    pub fn validate(&self) -> Result<(), DistortError> {
        match self.first_stage {
            FirstStage::Noise { sigma } | FirstStage::Blur { sigma } => check_sigma(sigma)?,
        }
        quant_table(self.quality).map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub recipe: DistortionRecipe,
    pub width: usize,
    pub height: usize,
}

pub fn synthesize(
    plane: &Plane<f32>,
    recipe: &DistortionRecipe,
) -> Result<(Plane<f32>, Provenance), DistortError> {
    recipe.validate()?;
    let first = match recipe.first_stage {
        FirstStage::Noise { sigma } => gaussian_noise(plane, sigma, recipe.seed)?,
        FirstStage::Blur { sigma } => gaussian_blur(plane, sigma)?,
    };
    let out = block_dct_compress(&first, recipe.quality)?;
    Ok((
        out,
        Provenance {
            recipe: *recipe,
            width: plane.width(),
            height: plane.height(),
        },
    ))
}

/// Multi-octave value noise in `[0, 1]`, rescaled to span `[0.1, 0.9]`.
pub fn value_noise_texture(width: usize, height: usize, seed: u64, octaves: u32) -> Plane<f32> {
    let mut rng = rng_from_seed(seed);
    let mut acc = vec![0.0f64; width * height];
    let mut cell = (width.max(height) as f64 / 4.0).max(2.0);
    let mut amp = 1.0;
    for _ in 0..octaves.max(1) {
        let gw = (width as f64 / cell).ceil() as usize + 2;
        let gh = (height as f64 / cell).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random::<f64>()).collect();
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        for y in 0..height {
            let fy = y as f64 / cell;
            let (iy, ty) = (fy.floor() as usize, smooth(fy.fract()));
            for x in 0..width {
                let fx = x as f64 / cell;
                let (ix, tx) = (fx.floor() as usize, smooth(fx.fract()));
                let l = |i: usize, j: usize| lattice[j * gw + i];
                let top = l(ix, iy) * (1.0 - tx) + l(ix + 1, iy) * tx;
                let bottom = l(ix, iy + 1) * (1.0 - tx) + l(ix + 1, iy + 1) * tx;
                acc[y * width + x] += amp * (top * (1.0 - ty) + bottom * ty);
            }
        }
        cell = (cell / 2.0).max(1.0);
        amp *= 0.55;
    }
    let lo = acc.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let data = acc
        .into_iter()
        .map(|v| (0.1 + 0.8 * (v - lo) / span) as f32)
        .collect();
    Plane::new(width, height, data).expect("sizes match")
}

/// One training example: a distorted image and its VIF-map label.
#[derive(Clone, Debug)]
pub struct CorpusItem {
    pub source: usize,
    pub distorted: Plane<f32>,
    pub label: QualityMap,
    pub provenance: Provenance,
}

/// Distort every source with its own random recipe and compute labels.
pub fn build_corpus(sources: &[Plane<f32>], seed: u64) -> Result<Vec<CorpusItem>, DistortError> {
    let mut rng = rng_from_seed(seed);
    sources
        .iter()
        .enumerate()
        .map(|(i, src)| {
            let recipe = DistortionRecipe::random(rng.random());
            let (distorted, provenance) = synthesize(src, &recipe)?;
            let label = vif_map(src, &distorted, &VifParams::default())?;
            Ok(CorpusItem {
                source: i,
                distorted,
                label,
                provenance,
            })
        })
        .collect()
}
