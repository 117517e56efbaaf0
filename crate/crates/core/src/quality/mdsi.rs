use super::{check_dims, MetricError, MetricKind, QualityMap};
use crate::filters::{correlate3x3, PREWITT_X, PREWITT_Y};
use crate::media::Plane;

/// Chroma planes of one frame in `[0, 1]`, at any resolution that divides
/// the luma grid (typically half size). Neutral chroma is 0.5.
#[derive(Clone, Copy, Debug)]
pub struct Chroma<'a> {
    pub u: &'a Plane<f32>,
    pub v: &'a Plane<f32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MdsiParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub alpha: f64,
}

impl Default for MdsiParams {
    fn default() -> Self {
        Self {
            c1: 140.0,
            c2: 55.0,
            c3: 550.0,
            alpha: 0.6,
        }
    }
}

fn gradient_magnitude(x: &[f64], w: usize, h: usize) -> Vec<f64> {
    let gx = correlate3x3(x, w, h, &PREWITT_X);
    let gy = correlate3x3(x, w, h, &PREWITT_Y);
    gx.iter()
        .zip(&gy)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect()
}

fn similarity(a: f64, b: f64, c: f64) -> f64 {
    (2.0 * a * b + c) / (a * a + b * b + c)
}

/// Signed chroma on the 8-bit scale, nearest-upsampled to `w x h`.
fn upsample_signed(p: &Plane<f32>, w: usize, h: usize) -> Vec<f64> {
    let (cw, ch) = (p.width(), p.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let sy = (y * ch / h).min(ch - 1);
        for x in 0..w {
            let sx = (x * cw / w).min(cw - 1);
            out.push((p.get(sx, sy) as f64 - 0.5) * 255.0);
        }
    }
    out
}

/// Gradient and chromaticity similarity map.
///
/// The gradient term compares the reference `R`, the distorted `D` and their
/// average `F` as `GS_RD + GS_DF - GS_RF`. Without chroma the map is the
/// gradient term alone.
pub fn mdsi_map(
    reference: &Plane<f32>,
    distorted: &Plane<f32>,
    reference_chroma: Option<Chroma<'_>>,
    distorted_chroma: Option<Chroma<'_>>,
    params: &MdsiParams,
) -> Result<QualityMap, MetricError> {
    check_dims(reference, distorted)?;
    let (w, h) = (reference.width(), reference.height());
    let r = reference.scaled_f64(255.0);
    let d = distorted.scaled_f64(255.0);
    let f: Vec<f64> = r.iter().zip(&d).map(|(a, b)| 0.5 * (a + b)).collect();
    let gr = gradient_magnitude(&r, w, h);
    let gd = gradient_magnitude(&d, w, h);
    let gf = gradient_magnitude(&f, w, h);
    let gs: Vec<f64> = (0..w * h)
        .map(|i| {
            similarity(gr[i], gd[i], params.c1) + similarity(gd[i], gf[i], params.c2)
                - similarity(gr[i], gf[i], params.c2)
        })
        .collect();
    let combined: Vec<f64> = match (reference_chroma, distorted_chroma) {
        (None, None) => gs,
        (Some(rc), Some(dc)) => {
            let [ru, rv, du, dv] = [rc.u, rc.v, dc.u, dc.v].map(|p| upsample_signed(p, w, h));
            (0..w * h)
                .map(|i| {
                    let cs = (2.0 * (ru[i] * du[i] + rv[i] * dv[i]) + params.c3)
                        / (ru[i] * ru[i]
                            + du[i] * du[i]
                            + rv[i] * rv[i]
                            + dv[i] * dv[i]
                            + params.c3);
                    params.alpha * gs[i] + (1.0 - params.alpha) * cs
                })
                .collect()
        }
        _ => return Err(MetricError::ChromaMismatch),
    };
    Ok(QualityMap {
        width: w,
        height: h,
        values: combined
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0) as f32)
            .collect(),
        metric: MetricKind::Mdsi,
        normalized: true,
        border: 0,
    })
}
