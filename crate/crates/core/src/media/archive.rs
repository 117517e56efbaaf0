//! `UVQA` tensor archive.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "UVQA"            4 bytes
//! version           u8
//! entry count       u64
//! per entry:
//!   name length     u32, then UTF-8 name bytes
//!   rank            u32
//!   dims            rank x u64
//!   payload         product(dims) x f32
//! ```

use super::MediaError;

pub const ARCHIVE_MAGIC: &[u8; 4] = b"UVQA";
pub const ARCHIVE_VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorArchive {
    entries: Vec<TensorEntry>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MediaError> {
        if self.bytes.len() - self.pos < n {
            return Err(MediaError::Payload(format!(
                "need {n} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, MediaError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, MediaError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl TensorArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[TensorEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&TensorEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        data: Vec<f32>,
    ) -> Result<(), MediaError> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(MediaError::Payload(format!(
                "entry {name:?}: shape {shape:?} needs {} values, got {}",
                shape.iter().product::<usize>(),
                data.len()
            )));
        }
        if self.get(&name).is_some() {
            return Err(MediaError::Payload(format!("duplicate entry {name:?}")));
        }
        self.entries.push(TensorEntry { name, shape, data });
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(ARCHIVE_MAGIC);
        out.push(ARCHIVE_VERSION);
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
            out.extend_from_slice(e.name.as_bytes());
            out.extend_from_slice(&(e.shape.len() as u32).to_le_bytes());
            for &d in &e.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in &e.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MediaError> {
        if bytes.len() < 4 || &bytes[..4] != ARCHIVE_MAGIC {
            return Err(MediaError::BadMagic);
        }
        let mut r = Reader { bytes, pos: 4 };
        let version = r.take(1)?[0];
        if version != ARCHIVE_VERSION {
            return Err(MediaError::VersionMismatch {
                found: version,
                expected: ARCHIVE_VERSION,
            });
        }
        let count = r.u64()?;
        let mut archive = TensorArchive::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| MediaError::Payload("entry name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| MediaError::Payload(format!("entry {name:?}: shape overflow")))?;
            let payload = r.take(n)?;
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            archive.insert(name, shape, data)?;
        }
        if r.pos != bytes.len() {
            return Err(MediaError::Payload(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(archive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_archive_is_header_only() {
        let bytes = TensorArchive::new().to_bytes();
        assert_eq!(bytes.len(), 13);
        assert!(TensorArchive::from_bytes(&bytes).unwrap().is_empty());
    }

    #[test]
    fn identity_round_trip() {
        let mut a = TensorArchive::new();
        a.insert("eye", vec![2, 2], vec![1.0, 0.0, 0.0, 1.0])
            .unwrap();
        assert_eq!(TensorArchive::from_bytes(&a.to_bytes()).unwrap(), a);
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = TensorArchive::new().to_bytes();
        bytes[0] = b'X';
        let err = TensorArchive::from_bytes(&bytes).unwrap_err();
        assert_eq!(err.to_string(), "bad magic");
        let mut bytes = TensorArchive::new().to_bytes();
        bytes[4] = 9;
        assert!(matches!(
            TensorArchive::from_bytes(&bytes),
            Err(MediaError::VersionMismatch { found: 9, .. })
        ));
    }

    #[test]
    fn payload_mismatch() {
        let mut a = TensorArchive::new();
        assert!(a.insert("x", vec![3], vec![1.0]).is_err());
        a.insert("x", vec![2], vec![1.0, 2.0]).unwrap();
        assert!(a.insert("x", vec![1], vec![1.0]).is_err());
        let bytes = a.to_bytes();
        assert!(matches!(
            TensorArchive::from_bytes(&bytes[..bytes.len() - 1]),
            Err(MediaError::Payload(_))
        ));
    }

    proptest! {
        #[test]
        fn round_trip(entries in proptest::collection::vec(
            (proptest::collection::vec(1usize..4, 0..4), any::<u32>()), 0..5)) {
            let mut a = TensorArchive::new();
            for (i, (shape, seed)) in entries.into_iter().enumerate() {
                let n: usize = shape.iter().product();
                let data = (0..n).map(|k| f32::from_bits(seed.wrapping_add((k as u32).wrapping_mul(2654435761)) & 0x7f7f_ffff)).collect();
                a.insert(format!("t{i}"), shape, data).unwrap();
            }
            let back = TensorArchive::from_bytes(&a.to_bytes()).unwrap();
            prop_assert_eq!(back.to_bytes(), a.to_bytes());
        }
    }
}
