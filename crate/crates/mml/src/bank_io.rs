//! Reader and writer for the MMLF feature-bank binary format.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! bytes 0..4   magic "MMLF"
//! bytes 4..6   version u16 = 1
//! bytes 6..8   reserved u16 = 0
//! u32 C, u32 H, u32 W, u32 num_classes
//! per class:
//!   u32 class-id
//!   u8  split (0 = train, 1 = val, 2 = test)
//!   u32 num_images
//!   num_images contiguous f32 payloads of length C·H·W
//!   (channel-major, row-major spatial order)
//! ```
//!
//! An optional sidecar JSON manifest maps class ids to human-readable names;
//! it is never authoritative for shapes or splits.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use mml_core::descriptors::FeatureMap;
use mml_core::episodes::{BankClass, FeatureBank, Split};
use mml_core::MmlError;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"MMLF";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum BankError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("magic mismatch: expected \"MMLF\", found {found:?} at byte 0")]
    MagicMismatch { found: [u8; 4] },
    #[error("unsupported bank version {found} (expected {VERSION})")]
    UnsupportedVersion { found: u16 },
    #[error("reserved header bytes must be zero, found {found:#06x}")]
    ReservedNonZero { found: u16 },
    #[error("truncated payload: unexpected end of file at byte {offset}")]
    Truncated { offset: u64 },
    #[error("inconsistent shape in header: {c}x{h}x{w} (all dimensions must be >= 1)")]
    BadShape { c: u32, h: u32, w: u32 },
    #[error("bank declares zero classes")]
    NoClasses,
    #[error("class {class_id}: invalid split tag {tag} at byte {offset}")]
    BadSplit { class_id: u32, tag: u8, offset: u64 },
    #[error("duplicate class id {class_id} across splits")]
    DuplicateClass { class_id: u32 },
    #[error("{what} exceeds the u32 range of the bank format")]
    TooLarge { what: &'static str },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] MmlError),
}

struct CountingReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> CountingReader<R> {
    fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<(), BankError> {
        let start = self.offset;
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                Err(BankError::Truncated { offset: start })
            }
            Err(e) => Err(BankError::Io(e)),
        }
    }

    fn read_u8(&mut self) -> Result<u8, BankError> {
        let mut b = [0u8; 1];
        self.read_exact(&mut b)?;
        Ok(b[0])
    }

    fn read_u16(&mut self) -> Result<u16, BankError> {
        let mut b = [0u8; 2];
        self.read_exact(&mut b)?;
        Ok(u16::from_le_bytes(b))
    }

    fn read_u32(&mut self) -> Result<u32, BankError> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
}

/// Parses a feature bank from a reader.
pub fn load_bank<R: Read>(reader: R) -> Result<FeatureBank, BankError> {
    let mut r = CountingReader::new(reader);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(BankError::MagicMismatch { found: magic });
    }
    let version = r.read_u16()?;
    if version != VERSION {
        return Err(BankError::UnsupportedVersion { found: version });
    }
    let reserved = r.read_u16()?;
    if reserved != 0 {
        return Err(BankError::ReservedNonZero { found: reserved });
    }

    let c = r.read_u32()?;
    let h = r.read_u32()?;
    let w = r.read_u32()?;
    if c == 0 || h == 0 || w == 0 {
        return Err(BankError::BadShape { c, h, w });
    }
    let num_classes = r.read_u32()?;
    if num_classes == 0 {
        return Err(BankError::NoClasses);
    }

    let map_len = c as usize * h as usize * w as usize;
    let mut payload = vec![0u8; map_len * 4];
    let mut seen = HashSet::new();
    let mut classes = Vec::with_capacity(num_classes as usize);
    for _ in 0..num_classes {
        let class_id = r.read_u32()?;
        if !seen.insert(class_id) {
            return Err(BankError::DuplicateClass { class_id });
        }
        let split_offset = r.offset;
        let tag = r.read_u8()?;
        let split = Split::from_u8(tag).ok_or(BankError::BadSplit {
            class_id,
            tag,
            offset: split_offset,
        })?;
        let num_images = r.read_u32()?;
        let mut maps = Vec::with_capacity(num_images as usize);
        for _ in 0..num_images {
            r.read_exact(&mut payload)?;
            let values: Vec<f32> = payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            maps.push(FeatureMap::new(c as usize, h as usize, w as usize, values)?);
        }
        classes.push(BankClass {
            id: class_id,
            split,
            maps,
        });
    }
    Ok(FeatureBank::new(classes)?)
}

/// Serializes a feature bank.
pub fn write_bank<W: Write>(bank: &FeatureBank, mut writer: W) -> Result<(), BankError> {
    let (c, h, w) = bank.shape();
    writer.write_all(&MAGIC)?;
    writer.write_all(&VERSION.to_le_bytes())?;
    writer.write_all(&0u16.to_le_bytes())?;
    for dim in [c, h, w] {
        let v = u32::try_from(dim).map_err(|_| BankError::TooLarge { what: "shape" })?;
        writer.write_all(&v.to_le_bytes())?;
    }
    let n = u32::try_from(bank.classes().len())
        .map_err(|_| BankError::TooLarge { what: "class count" })?;
    writer.write_all(&n.to_le_bytes())?;

    for class in bank.classes() {
        writer.write_all(&class.id.to_le_bytes())?;
        writer.write_all(&[class.split.as_u8()])?;
        let num_images = u32::try_from(class.maps.len())
            .map_err(|_| BankError::TooLarge { what: "image count" })?;
        writer.write_all(&num_images.to_le_bytes())?;
        let mut buf = Vec::with_capacity(c * h * w * 4);
        for map in &class.maps {
            buf.clear();
            for v in map.values() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            writer.write_all(&buf)?;
        }
    }
    Ok(())
}

pub fn load_bank_from_path(path: &Path) -> Result<FeatureBank, BankError> {
    load_bank(BufReader::new(File::open(path)?))
}

pub fn write_bank_to_path(bank: &FeatureBank, path: &Path) -> Result<(), BankError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_bank(bank, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes the optional sidecar manifest mapping class ids to names.
pub fn write_manifest<W: Write>(
    names: &BTreeMap<u32, String>,
    writer: W,
) -> Result<(), BankError> {
    let by_key: BTreeMap<String, &String> =
        names.iter().map(|(id, name)| (id.to_string(), name)).collect();
    serde_json::to_writer_pretty(writer, &by_key)?;
    Ok(())
}

/// Reads a sidecar manifest. Entries with non-numeric keys are rejected.
pub fn read_manifest<R: Read>(reader: R) -> Result<BTreeMap<u32, String>, BankError> {
    let by_key: BTreeMap<String, String> = serde_json::from_reader(reader)?;
    let mut out = BTreeMap::new();
    for (key, name) in by_key {
        let id: u32 = key.parse().map_err(|_| {
            BankError::Manifest(serde::de::Error::custom(format!(
                "manifest key {key:?} is not a class id"
            )))
        })?;
        out.insert(id, name);
    }
    Ok(out)
}
