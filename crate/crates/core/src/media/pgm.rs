use super::{MediaError, Plane};

/// Read a binary (P5) 8-bit PGM. Comment lines in the header are skipped.
pub fn read_pgm(bytes: &[u8]) -> Result<Plane<u8>, MediaError> {
    if bytes.starts_with(b"P2") {
        return Err(MediaError::UnsupportedFormat(
            "ASCII PGM (P2) is not supported".into(),
        ));
    }
    if !bytes.starts_with(b"P5") {
        return Err(MediaError::UnsupportedFormat("not a binary PGM".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => {
                    return Err(MediaError::MalformedHeader {
                        offset: pos,
                        detail: "header ends early".into(),
                    })
                }
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MediaError::MalformedHeader {
                offset: start,
                detail: "expected a number".into(),
            })?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(MediaError::UnsupportedFormat(format!(
            "maxval {maxval}, only 255 is supported"
        )));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(MediaError::MalformedHeader {
                offset: pos,
                detail: "missing whitespace before raster".into(),
            })
        }
    }
    let need = width * height;
    if bytes.len() - pos < need {
        return Err(MediaError::TruncatedFrame {
            offset: pos,
            needed: need,
            available: bytes.len() - pos,
        });
    }
    Plane::new(width, height, bytes[pos..pos + need].to_vec())
}

pub fn write_pgm(plane: &Plane<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width(), plane.height()).into_bytes();
    out.extend_from_slice(plane.data());
    out
}
