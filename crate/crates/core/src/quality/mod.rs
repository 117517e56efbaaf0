//! Full-reference quality maps between a reference frame and a distorted
//! frame.
//!
//! Inputs are `[0, 1]` luma planes. Every metric rescales internally to the
//! 8-bit range so that the usual constants apply unchanged. Maps computed
//! with a "valid" window are smaller than the frame; the removed border is
//! recorded in [`QualityMap::border`] and [`align_stack`] crops a stack to a
//! common size.

mod mdsi;
mod ssim;
mod vif;

pub use mdsi::{mdsi_map, Chroma, MdsiParams};
pub use ssim::{
    ms_ssim, ms_ssim_scales, ssim_components, ssim_map, SsimComponents, SsimOutput, SsimParams,
    MS_SSIM_WEIGHTS,
};
pub use vif::{vif_map, VifParams};

use crate::media::Plane;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("plane {width}x{height} is smaller than the {min}x{min} window")]
    Undersized {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("chroma must be given for both frames or neither")]
    ChromaMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Ssim,
    Mdsi,
    Vif,
    Motion,
}

/// A per-pixel quality grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
    pub metric: MetricKind,
    pub normalized: bool,
    /// Pixels removed on every side relative to the source frame.
    pub border: usize,
}

impl QualityMap {
    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.values.len() as f64
    }

    pub fn to_plane(&self) -> Plane<f32> {
        Plane::new(self.width, self.height, self.values.clone())
            .expect("map dimensions are consistent")
    }

    /// Remove `extra` more pixels from every side.
    pub fn shrink(&self, extra: usize) -> QualityMap {
        if extra == 0 {
            return self.clone();
        }
        let w = self.width - 2 * extra;
        let h = self.height - 2 * extra;
        let mut values = Vec::with_capacity(w * h);
        for y in extra..extra + h {
            values.extend_from_slice(
                &self.values[y * self.width + extra..y * self.width + extra + w],
            );
        }
        QualityMap {
            width: w,
            height: h,
            values,
            border: self.border + extra,
            ..self.clone()
        }
    }
}

pub(crate) fn check_dims(a: &Plane<f32>, b: &Plane<f32>) -> Result<(), MetricError> {
    if !a.same_dims(b) {
        return Err(MetricError::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    Ok(())
}

pub const DEFAULT_PSNR_CEILING: f64 = 100.0;

/// PSNR in dB on the 8-bit scale; identical planes give `ceiling`.
pub fn psnr(
    reference: &Plane<f32>,
    distorted: &Plane<f32>,
    ceiling: f64,
) -> Result<f64, MetricError> {
    check_dims(reference, distorted)?;
    let mse = reference
        .data()
        .iter()
        .zip(distorted.data())
        .map(|(&a, &b)| {
            let d = (a as f64 - b as f64) * 255.0;
            d * d
        })
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(ceiling);
    }
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(ceiling))
}

/// `|F_n - F_{n-1}|` on the `[0, 1]` scale. Without a previous frame the map
/// is all zeros.
pub fn motion_map(
    frame: &Plane<f32>,
    previous: Option<&Plane<f32>>,
) -> Result<QualityMap, MetricError> {
    let values = match previous {
        Some(prev) => {
            check_dims(frame, prev)?;
            frame
                .data()
                .iter()
                .zip(prev.data())
                .map(|(&a, &b)| (a - b).abs())
                .collect()
        }
        None => vec![0.0; frame.len()],
    };
    Ok(QualityMap {
        width: frame.width(),
        height: frame.height(),
        values,
        metric: MetricKind::Motion,
        normalized: true,
        border: 0,
    })
}

/// Which maps describe a (reference, distorted) frame pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackKind {
    Ssim,
    Vif,
    Mdsi,
    /// VIF map followed by the motion map of the distorted sequence.
    VmafStyle,
}

impl StackKind {
    pub fn channels(self) -> usize {
        match self {
            StackKind::VmafStyle => 2,
            _ => 1,
        }
    }
}

impl std::str::FromStr for StackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ssim" => Ok(StackKind::Ssim),
            "vif" => Ok(StackKind::Vif),
            "mdsi" => Ok(StackKind::Mdsi),
            "vmaf_style" | "vmaf" => Ok(StackKind::VmafStyle),
            other => Err(format!("unknown map stack {other:?}")),
        }
    }
}

/// Normalized maps for one frame pair. `previous_distorted` feeds the motion
/// map of the VMAF-style stack.
pub fn map_stack(
    kind: StackKind,
    reference: &Plane<f32>,
    distorted: &Plane<f32>,
    previous_distorted: Option<&Plane<f32>>,
) -> Result<Vec<QualityMap>, MetricError> {
    Ok(match kind {
        StackKind::Ssim => vec![ssim_map(reference, distorted, &SsimParams::default(), true)?.map],
        StackKind::Vif => vec![vif_map(reference, distorted, &VifParams::default())?],
        StackKind::Mdsi => vec![mdsi_map(
            reference,
            distorted,
            None,
            None,
            &MdsiParams::default(),
        )?],
        StackKind::VmafStyle => vec![
            vif_map(reference, distorted, &VifParams::default())?,
            motion_map(distorted, previous_distorted)?,
        ],
    })
}

/// Crop every map to the largest border in the stack so all share one size.
pub fn align_stack(maps: &[QualityMap]) -> Vec<QualityMap> {
    let border = maps.iter().map(|m| m.border).max().unwrap_or(0);
    maps.iter().map(|m| m.shrink(border - m.border)).collect()
}
