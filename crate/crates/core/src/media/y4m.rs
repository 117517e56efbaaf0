use super::{chroma_dims, FrameRate, MediaError, Plane, VideoClip};

const SIGNATURE: &[u8] = b"YUV4MPEG2";
const FRAME_TAG: &[u8] = b"FRAME";

/// Colorspace tags accepted as 8-bit 4:2:0. A missing `C` tag means 420jpeg.
const ACCEPTED_COLORSPACES: [&str; 4] = ["420", "420jpeg", "420paldv", "420mpeg2"];

fn line_end(bytes: &[u8], start: usize) -> Option<usize> {
    bytes[start..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|p| start + p)
}

fn header_err(offset: usize, detail: impl Into<String>) -> MediaError {
    MediaError::MalformedHeader {
        offset,
        detail: detail.into(),
    }
}

fn parse_ratio(s: &str, offset: usize) -> Result<(u32, u32), MediaError> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| header_err(offset, format!("bad ratio {s:?}")))?;
    let a = a
        .parse()
        .map_err(|_| header_err(offset, format!("bad ratio {s:?}")))?;
    let b = b
        .parse()
        .map_err(|_| header_err(offset, format!("bad ratio {s:?}")))?;
    Ok((a, b))
}

/// Parse a YUV4MPEG2 stream into a clip with chroma.
pub fn parse_y4m(bytes: &[u8]) -> Result<VideoClip, MediaError> {
    if !bytes.starts_with(SIGNATURE) {
        return Err(header_err(0, "missing YUV4MPEG2 signature"));
    }
    let end =
        line_end(bytes, 0).ok_or_else(|| header_err(bytes.len(), "unterminated stream header"))?;
    let header =
        std::str::from_utf8(&bytes[..end]).map_err(|_| header_err(0, "header is not ASCII"))?;

    let (mut width, mut height, mut fps) = (None, None, None);
    let mut offset = SIGNATURE.len();
    for token in header[SIGNATURE.len()..].split(' ') {
        let at = offset;
        offset += token.len() + 1;
        if token.is_empty() {
            continue;
        }
        let (tag, value) = token.split_at(1);
        match tag {
            "W" => {
                width = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| header_err(at, format!("bad width {value:?}")))?,
                )
            }
            "H" => {
                height = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| header_err(at, format!("bad height {value:?}")))?,
                )
            }
            "F" => {
                let (n, d) = parse_ratio(value, at)?;
                fps = Some(FrameRate::new(n, d));
            }
            "C" => {
                if !ACCEPTED_COLORSPACES.contains(&value) {
                    return Err(MediaError::UnsupportedColorspace {
                        offset: at,
                        colorspace: value.to_string(),
                    });
                }
            }
            "I" | "A" | "X" => {}
            _ => return Err(header_err(at, format!("unknown header tag {token:?}"))),
        }
    }
    let width = width
        .filter(|&w| w > 0)
        .ok_or_else(|| header_err(0, "missing or zero width"))?;
    let height = height
        .filter(|&h| h > 0)
        .ok_or_else(|| header_err(0, "missing or zero height"))?;
    let fps = fps
        .filter(|f| f.num > 0 && f.den > 0)
        .ok_or_else(|| header_err(0, "missing or zero frame rate"))?;

    let (cw, ch) = chroma_dims(width, height);
    let luma_len = width * height;
    let chroma_len = cw * ch;
    let payload = luma_len + 2 * chroma_len;

    let mut luma = Vec::new();
    let mut chroma = Vec::new();
    let mut pos = end + 1;
    while pos < bytes.len() {
        if !bytes[pos..].starts_with(FRAME_TAG) {
            return Err(header_err(pos, "expected FRAME marker"));
        }
        let frame_end =
            line_end(bytes, pos).ok_or_else(|| header_err(pos, "unterminated FRAME header"))?;
        let data = frame_end + 1;
        if bytes.len() - data < payload {
            return Err(MediaError::TruncatedFrame {
                offset: data,
                needed: payload,
                available: bytes.len() - data,
            });
        }
        let y = &bytes[data..data + luma_len];
        let u = &bytes[data + luma_len..data + luma_len + chroma_len];
        let v = &bytes[data + luma_len + chroma_len..data + payload];
        luma.push(Plane::new(width, height, y.to_vec())?);
        chroma.push((
            Plane::new(cw, ch, u.to_vec())?,
            Plane::new(cw, ch, v.to_vec())?,
        ));
        pos = data + payload;
    }
    if luma.is_empty() {
        return Err(header_err(pos, "stream contains no frames"));
    }
    VideoClip::new("y4m", fps, luma, Some(chroma))
}

/// Serialize a clip as YUV4MPEG2 (C420jpeg). Luma-only clips get neutral
/// chroma (128).
pub fn write_y4m(clip: &VideoClip) -> Vec<u8> {
    let (w, h) = (clip.width(), clip.height());
    let (cw, ch) = chroma_dims(w, h);
    let mut out = format!(
        "YUV4MPEG2 W{w} H{h} F{}:{} Ip A1:1 C420jpeg\n",
        clip.fps.num, clip.fps.den
    )
    .into_bytes();
    out.reserve(clip.frame_count() * (6 + w * h + 2 * cw * ch));
    let neutral = vec![128u8; cw * ch];
    for (i, y) in clip.luma().iter().enumerate() {
        out.extend_from_slice(b"FRAME\n");
        out.extend_from_slice(y.data());
        match clip.chroma() {
            Some(c) => {
                out.extend_from_slice(c[i].0.data());
                out.extend_from_slice(c[i].1.data());
            }
            None => {
                out.extend_from_slice(&neutral);
                out.extend_from_slice(&neutral);
            }
        }
    }
    out
}
