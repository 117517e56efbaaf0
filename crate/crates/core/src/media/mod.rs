//! Ingestion and serialization: Y4M streams, raw I420, binary PGM and the
//! `UVQA` tensor archive.
//!
//! Only 8-bit 4:2:0 video is accepted. Other colorspaces are rejected rather
//! than converted.

mod archive;
mod pgm;
mod plane;
mod y4m;

pub use archive::{TensorArchive, TensorEntry, ARCHIVE_MAGIC, ARCHIVE_VERSION};
pub use pgm::{read_pgm, write_pgm};
pub use plane::Plane;
pub use y4m::{parse_y4m, write_y4m};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("malformed header at byte {offset}: {detail}")]
    MalformedHeader { offset: usize, detail: String },
    #[error("truncated frame at byte {offset}: need {needed} bytes, have {available}")]
    TruncatedFrame {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("unsupported colorspace at byte {offset}: {colorspace}")]
    UnsupportedColorspace { offset: usize, colorspace: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("bad dimensions: {0}")]
    Dimensions(String),
    #[error("bad magic")]
    BadMagic,
    #[error("archive version {found} does not match {expected}")]
    VersionMismatch { found: u8, expected: u8 },
    #[error("archive payload: {0}")]
    Payload(String),
    #[error("cannot sample {count} frames from a clip of {total}")]
    SampleCount { count: usize, total: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Frame rate as an exact ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub const fn new(num: u32, den: u32) -> Self {
        Self { num, den }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Chroma plane size for 4:2:0 subsampling (half, rounded up).
pub fn chroma_dims(width: usize, height: usize) -> (usize, usize) {
    (width.div_ceil(2), height.div_ceil(2))
}

/// A decoded clip. Luma is mandatory; chroma is optional and, when present,
/// 4:2:0 subsampled.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoClip {
    pub id: String,
    pub fps: FrameRate,
    luma: Vec<Plane<u8>>,
    chroma: Option<Vec<(Plane<u8>, Plane<u8>)>>,
}

impl VideoClip {
    pub fn new(
        id: impl Into<String>,
        fps: FrameRate,
        luma: Vec<Plane<u8>>,
        chroma: Option<Vec<(Plane<u8>, Plane<u8>)>>,
    ) -> Result<Self, MediaError> {
        let Some(first) = luma.first() else {
            return Err(MediaError::Dimensions("clip has no frames".into()));
        };
        if fps.num == 0 || fps.den == 0 {
            return Err(MediaError::Dimensions(format!(
                "invalid frame rate {}:{}",
                fps.num, fps.den
            )));
        }
        let (w, h) = (first.width(), first.height());
        if luma.iter().any(|p| p.width() != w || p.height() != h) {
            return Err(MediaError::Dimensions("luma planes differ in size".into()));
        }
        if let Some(c) = &chroma {
            if c.len() != luma.len() {
                return Err(MediaError::Dimensions(
                    "chroma frame count differs from luma".into(),
                ));
            }
            let (cw, ch) = chroma_dims(w, h);
            for (u, v) in c {
                if u.width() != cw || u.height() != ch || v.width() != cw || v.height() != ch {
                    return Err(MediaError::Dimensions(format!(
                        "chroma planes must be {cw}x{ch}"
                    )));
                }
            }
        }
        Ok(Self {
            id: id.into(),
            fps,
            luma,
            chroma,
        })
    }

    /// Luma-only clip built from float frames.
    pub fn from_float_frames(
        id: impl Into<String>,
        fps: FrameRate,
        frames: &[Plane<f32>],
    ) -> Result<Self, MediaError> {
        Self::new(id, fps, frames.iter().map(Plane::to_u8).collect(), None)
    }

    pub fn frame_count(&self) -> usize {
        self.luma.len()
    }

    pub fn width(&self) -> usize {
        self.luma[0].width()
    }

    pub fn height(&self) -> usize {
        self.luma[0].height()
    }

    pub fn duration_secs(&self) -> f64 {
        self.frame_count() as f64 / self.fps.as_f64()
    }

    pub fn luma(&self) -> &[Plane<u8>] {
        &self.luma
    }

    pub fn chroma(&self) -> Option<&[(Plane<u8>, Plane<u8>)]> {
        self.chroma.as_deref()
    }

    pub fn has_chroma(&self) -> bool {
        self.chroma.is_some()
    }

    /// Keep the first `secs` seconds (or the whole clip if shorter).
    pub fn truncated_to(&self, secs: f64) -> VideoClip {
        let keep = ((secs * self.fps.as_f64()).floor() as usize).clamp(1, self.frame_count());
        VideoClip {
            id: self.id.clone(),
            fps: self.fps,
            luma: self.luma[..keep].to_vec(),
            chroma: self.chroma.as_ref().map(|c| c[..keep].to_vec()),
        }
    }
}

/// Read a headerless I420 stream: per frame Y, then U, then V.
pub fn read_raw_i420(
    bytes: &[u8],
    width: usize,
    height: usize,
    fps: FrameRate,
) -> Result<VideoClip, MediaError> {
    if width == 0 || height == 0 {
        return Err(MediaError::Dimensions(format!("{width}x{height}")));
    }
    let (cw, ch) = chroma_dims(width, height);
    let frame_len = width * height + 2 * cw * ch;
    if bytes.is_empty() || !bytes.len().is_multiple_of(frame_len) {
        return Err(MediaError::LengthMismatch(format!(
            "{} bytes is not a multiple of the {frame_len}-byte I420 frame for {width}x{height}",
            bytes.len()
        )));
    }
    let mut luma = Vec::new();
    let mut chroma = Vec::new();
    for frame in bytes.chunks_exact(frame_len) {
        let (y, rest) = frame.split_at(width * height);
        let (u, v) = rest.split_at(cw * ch);
        luma.push(Plane::new(width, height, y.to_vec())?);
        chroma.push((
            Plane::new(cw, ch, u.to_vec())?,
            Plane::new(cw, ch, v.to_vec())?,
        ));
    }
    VideoClip::new("i420", fps, luma, Some(chroma))
}

/// Indices `floor(k * total / count)` for `k = 0..count`.
pub fn sample_frames_uniform(total: usize, count: usize) -> Result<Vec<usize>, MediaError> {
    if count == 0 || count > total {
        return Err(MediaError::SampleCount { count, total });
    }
    Ok((0..count).map(|k| k * total / count).collect())
}
