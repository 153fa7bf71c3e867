//! The on-disk container: an 8-byte magic, a little-endian u32 header
//! length, a JSON header describing kind/dims/dtype, and a raw row-major
//! payload. Complex data is stored as interleaved little-endian f64 pairs,
//! masks as one byte per entry, so write→read round-trips bit-exactly.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use xbcs::{ImageGrid, KSpaceData, SamplingMask, C64};

pub const MAGIC: &[u8; 8] = b"XBCSCPX1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Image,
    KSpace,
    Mask,
    Matrix,
}

impl Kind {
    fn as_str(self) -> &'static str {
        match self {
            Kind::Image => "image",
            Kind::KSpace => "kspace",
            Kind::Mask => "mask",
            Kind::Matrix => "matrix",
        }
    }

    fn parse(s: &str) -> Result<Self, ContainerError> {
        match s {
            "image" => Ok(Kind::Image),
            "kspace" => Ok(Kind::KSpace),
            "mask" => Ok(Kind::Mask),
            "matrix" => Ok(Kind::Matrix),
            other => Err(ContainerError::Malformed(format!("unknown kind {other:?}"))),
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Decoded payload: row-major complex entries or raw mask bytes.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    C128(Vec<C64>),
    U8(Vec<u8>),
}

#[derive(Debug, Clone)]
pub struct Container {
    pub kind: Kind,
    pub dims: (usize, usize),
    pub payload: Payload,
}

#[derive(Debug)]
pub enum ContainerError {
    Io(std::io::Error),
    Malformed(String),
}

impl fmt::Display for ContainerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContainerError::Io(e) => write!(f, "{e}"),
            ContainerError::Malformed(msg) => write!(f, "malformed container: {msg}"),
        }
    }
}

impl std::error::Error for ContainerError {}

impl From<std::io::Error> for ContainerError {
    fn from(e: std::io::Error) -> Self {
        ContainerError::Io(e)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: String,
    dims: Vec<usize>,
    dtype: String,
}

impl Container {
    pub fn image(grid: &ImageGrid) -> Self {
        Container {
            kind: Kind::Image,
            dims: grid.shape(),
            payload: Payload::C128(grid.as_slice().to_vec()),
        }
    }

    pub fn kspace(data: &KSpaceData) -> Self {
        Container {
            kind: Kind::KSpace,
            dims: data.shape(),
            payload: Payload::C128(data.as_slice().to_vec()),
        }
    }

    pub fn mask(mask: &SamplingMask) -> Self {
        Container {
            kind: Kind::Mask,
            dims: mask.shape(),
            payload: Payload::U8(mask.flags().iter().map(|&b| b as u8).collect()),
        }
    }

    /// Row-major serialization of an n×m complex matrix.
    pub fn matrix(rows: usize, cols: usize, row_major: Vec<C64>) -> Self {
        Container { kind: Kind::Matrix, dims: (rows, cols), payload: Payload::C128(row_major) }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (h, w) = self.dims;
        let header = Header {
            kind: self.kind.as_str().to_string(),
            dims: vec![h, w],
            dtype: match self.payload {
                Payload::C128(_) => "c128".to_string(),
                Payload::U8(_) => "u8".to_string(),
            },
        };
        let header_json = serde_json::to_vec(&header).expect("header serialization is infallible");
        let mut out = Vec::with_capacity(12 + header_json.len() + self.payload_len_bytes());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
        out.extend_from_slice(&header_json);
        match &self.payload {
            Payload::C128(values) => {
                for v in values {
                    out.extend_from_slice(&v.re.to_le_bytes());
                    out.extend_from_slice(&v.im.to_le_bytes());
                }
            }
            Payload::U8(values) => out.extend_from_slice(values),
        }
        out
    }

    fn payload_len_bytes(&self) -> usize {
        match &self.payload {
            Payload::C128(v) => 16 * v.len(),
            Payload::U8(v) => v.len(),
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ContainerError> {
        if bytes.len() < 12 {
            return Err(ContainerError::Malformed("file shorter than the fixed preamble".into()));
        }
        if &bytes[..8] != MAGIC {
            return Err(ContainerError::Malformed("bad magic".into()));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let Some(header_bytes) = bytes.get(12..12 + header_len) else {
            return Err(ContainerError::Malformed("header length exceeds file size".into()));
        };
        let header: Header = serde_json::from_slice(header_bytes)
            .map_err(|e| ContainerError::Malformed(format!("header JSON: {e}")))?;
        let kind = Kind::parse(&header.kind)?;
        if header.dims.len() != 2 {
            return Err(ContainerError::Malformed(format!(
                "expected 2 dims, got {}",
                header.dims.len()
            )));
        }
        let dims = (header.dims[0], header.dims[1]);
        let count = dims.0.checked_mul(dims.1).ok_or_else(|| {
            ContainerError::Malformed("dims overflow".into())
        })?;
        let body = &bytes[12 + header_len..];
        let payload = match header.dtype.as_str() {
            "c128" => {
                if body.len() != 16 * count {
                    return Err(ContainerError::Malformed(format!(
                        "c128 payload is {} bytes, dims {}x{} need {}",
                        body.len(),
                        dims.0,
                        dims.1,
                        16 * count
                    )));
                }
                let values = body
                    .chunks_exact(16)
                    .map(|c| {
                        C64::new(
                            f64::from_le_bytes(c[..8].try_into().unwrap()),
                            f64::from_le_bytes(c[8..].try_into().unwrap()),
                        )
                    })
                    .collect();
                Payload::C128(values)
            }
            "u8" => {
                if body.len() != count {
                    return Err(ContainerError::Malformed(format!(
                        "u8 payload is {} bytes, dims {}x{} need {count}",
                        body.len(),
                        dims.0,
                        dims.1,
                    )));
                }
                Payload::U8(body.to_vec())
            }
            other => {
                return Err(ContainerError::Malformed(format!("unknown dtype {other:?}")));
            }
        };
        Ok(Container { kind, dims, payload })
    }

    pub fn write(&self, path: &Path) -> Result<(), ContainerError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, ContainerError> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn expect_kind(&self, kind: Kind) -> Result<(), ContainerError> {
        if self.kind != kind {
            return Err(ContainerError::Malformed(format!(
                "expected a {kind} container, found {}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn into_complex(self) -> Result<Vec<C64>, ContainerError> {
        match self.payload {
            Payload::C128(v) => Ok(v),
            Payload::U8(_) => Err(ContainerError::Malformed("expected complex payload".into())),
        }
    }
}

pub fn read_image(path: &Path) -> Result<ImageGrid, ContainerError> {
    let c = Container::read(path)?;
    c.expect_kind(Kind::Image)?;
    let dims = c.dims;
    let values = c.into_complex()?;
    ImageGrid::new(dims.0, dims.1, values)
        .map_err(|e| ContainerError::Malformed(e.to_string()))
}

pub fn read_kspace(path: &Path) -> Result<KSpaceData, ContainerError> {
    let c = Container::read(path)?;
    c.expect_kind(Kind::KSpace)?;
    let dims = c.dims;
    let values = c.into_complex()?;
    let grid = ImageGrid::new(dims.0, dims.1, values)
        .map_err(|e| ContainerError::Malformed(e.to_string()))?;
    Ok(KSpaceData::from_grid(grid))
}

pub fn read_mask(path: &Path) -> Result<SamplingMask, ContainerError> {
    let c = Container::read(path)?;
    c.expect_kind(Kind::Mask)?;
    let Payload::U8(bytes) = c.payload else {
        return Err(ContainerError::Malformed("mask payload must be u8".into()));
    };
    let mut flags = Vec::with_capacity(bytes.len());
    for b in bytes {
        match b {
            0 => flags.push(false),
            1 => flags.push(true),
            other => {
                return Err(ContainerError::Malformed(format!(
                    "mask bytes must be 0 or 1, found {other}"
                )));
            }
        }
    }
    SamplingMask::new(c.dims.0, c.dims.1, flags)
        .map_err(|e| ContainerError::Malformed(e.to_string()))
}
