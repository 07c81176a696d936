//! On-disk containers.
//!
//! Every array is stored as a pair `<name>.json` (header) + `<name>.raw`
//! (packed little-endian payload, no padding). Graphs use
//! `<name>.graph.json` + `<name>.graph.raw`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeStats, SignedGridGraph};
use crate::volume::{AffinityNeighborhood, Coord3, LabelVolume, Shape};

pub const ORDER: &str = "row-major-x-fastest";
pub const ENDIANNESS: &str = "little";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    U8,
    U32,
    U64,
    F32,
}

impl Dtype {
    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::U8 => "u8",
            Dtype::U32 => "u32",
            Dtype::U64 => "u64",
            Dtype::F32 => "f32",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "u8" => Ok(Dtype::U8),
            "u32" => Ok(Dtype::U32),
            "u64" => Ok(Dtype::U64),
            "f32" => Ok(Dtype::F32),
            other => Err(Error::UnsupportedDtype(other.to_string())),
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U32 | Dtype::F32 => 4,
            Dtype::U64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    U8(Vec<u8>),
    U32(Vec<u32>),
    U64(Vec<u64>),
    F32(Vec<f32>),
}

impl ArrayData {
    pub fn dtype(&self) -> Dtype {
        match self {
            ArrayData::U8(_) => Dtype::U8,
            ArrayData::U32(_) => Dtype::U32,
            ArrayData::U64(_) => Dtype::U64,
            ArrayData::F32(_) => Dtype::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ArrayData::U8(v) => v.len(),
            ArrayData::U32(v) => v.len(),
            ArrayData::U64(v) => v.len(),
            ArrayData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn to_bytes(&self) -> Vec<u8> {
        match self {
            ArrayData::U8(v) => v.clone(),
            ArrayData::U32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            ArrayData::U64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            ArrayData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    fn from_bytes(dtype: Dtype, bytes: &[u8]) -> Self {
        match dtype {
            Dtype::U8 => ArrayData::U8(bytes.to_vec()),
            Dtype::U32 => ArrayData::U32(
                bytes
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            Dtype::U64 => ArrayData::U64(
                bytes
                    .chunks_exact(8)
                    .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            Dtype::F32 => ArrayData::F32(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        }
    }
}

/// JSON header of an array container. Axis lists are slowest-first, so a
/// volume has `shape = [Z, Y, X]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayHeader {
    pub dtype: String,
    pub shape: Vec<usize>,
    pub order: String,
    pub endianness: String,
    /// `[rz, ry, rx]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<[f64; 3]>,
    /// Mask window `[K_z, K_y, K_x]` for mask fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[usize; 3]>,
    /// Mask scale `[s_z, s_y, s_x]` for mask fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<[u32; 3]>,
}

impl ArrayHeader {
    pub fn new(dtype: Dtype, shape: Vec<usize>) -> Self {
        ArrayHeader {
            dtype: dtype.as_str().to_string(),
            shape,
            order: ORDER.to_string(),
            endianness: ENDIANNESS.to_string(),
            resolution: None,
            window: None,
            scale: None,
        }
    }

    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }
}

/// `(<base>.json, <base>.raw)`. A trailing `.json` on `base` is ignored.
pub fn container_paths(base: &Path) -> (PathBuf, PathBuf) {
    let stem = strip_suffix(base, ".json");
    (with_suffix(&stem, ".json"), with_suffix(&stem, ".raw"))
}

/// `(<base>.graph.json, <base>.graph.raw)`.
pub fn graph_paths(base: &Path) -> (PathBuf, PathBuf) {
    let stem = strip_suffix(&strip_suffix(base, ".json"), ".graph");
    (with_suffix(&stem, ".graph.json"), with_suffix(&stem, ".graph.raw"))
}

fn strip_suffix(p: &Path, suffix: &str) -> PathBuf {
    let s = p.as_os_str().to_string_lossy();
    match s.strip_suffix(suffix) {
        Some(stem) => PathBuf::from(stem),
        None => p.to_path_buf(),
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_header<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn read_payload(path: &Path, expected: u64) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() as u64 != expected {
        return Err(Error::LengthMismatch {
            path: path.to_path_buf(),
            expected,
            found: bytes.len() as u64,
        });
    }
    Ok(bytes)
}

/// Writes an array container. The header's dtype and shape must describe
/// `data`.
pub fn write_array(base: &Path, header: &ArrayHeader, data: &ArrayData) -> Result<()> {
    let (json, raw) = container_paths(base);
    if header.dtype != data.dtype().as_str() || header.element_count() != data.len() {
        return Err(Error::InvalidArgument(format!(
            "header ({}, {:?}) does not describe a {} payload of {} elements",
            header.dtype,
            header.shape,
            data.dtype().as_str(),
            data.len()
        )));
    }
    let text = serde_json::to_string_pretty(header).expect("header serializes");
    write_file(&json, text.as_bytes())?;
    write_file(&raw, &data.to_bytes())
}

pub fn read_array(base: &Path) -> Result<(ArrayHeader, ArrayData)> {
    let (json, raw) = container_paths(base);
    let header: ArrayHeader = read_header(&json)?;
    let malformed = |reason: String| Error::MalformedHeader {
        path: json.clone(),
        reason,
    };
    let dtype = Dtype::parse(&header.dtype)?;
    if header.order != ORDER {
        return Err(malformed(format!("unsupported order {:?}", header.order)));
    }
    if header.endianness != ENDIANNESS {
        return Err(malformed(format!("unsupported endianness {:?}", header.endianness)));
    }
    if header.shape.is_empty() || header.shape.contains(&0) {
        return Err(malformed(format!("invalid shape {:?}", header.shape)));
    }
    let expected = header.element_count() as u64 * dtype.size() as u64;
    let bytes = read_payload(&raw, expected)?;
    Ok((header, ArrayData::from_bytes(dtype, &bytes)))
}

/// Writes a label volume as `u64`.
pub fn write_volume(volume: &LabelVolume, base: &Path) -> Result<()> {
    write_volume_as(volume, base, Dtype::U64)
}

/// Writes a label volume with an explicit integer dtype; fails if some
/// label does not fit.
pub fn write_volume_as(volume: &LabelVolume, base: &Path, dtype: Dtype) -> Result<()> {
    let max = volume.max_label();
    let data = match dtype {
        Dtype::U8 if max <= u64::from(u8::MAX) => {
            ArrayData::U8(volume.data().iter().map(|&l| l as u8).collect())
        }
        Dtype::U32 if max <= u64::from(u32::MAX) => {
            ArrayData::U32(volume.data().iter().map(|&l| l as u32).collect())
        }
        Dtype::U64 => ArrayData::U64(volume.data().to_vec()),
        Dtype::F32 => return Err(Error::UnsupportedDtype("f32".into())),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "label {max} does not fit in {}",
                dtype.as_str()
            )))
        }
    };
    let mut header = ArrayHeader::new(dtype, volume.shape().zyx().to_vec());
    header.resolution = volume.resolution.map(|[x, y, z]| [z, y, x]);
    write_array(base, &header, &data)
}

pub fn read_volume(base: &Path) -> Result<LabelVolume> {
    let (header, data) = read_array(base)?;
    let (json, _) = container_paths(base);
    let zyx: [usize; 3] = header.shape.as_slice().try_into().map_err(|_| Error::MalformedHeader {
        path: json.clone(),
        reason: format!("label volume needs a 3-axis shape, found {:?}", header.shape),
    })?;
    let shape = Shape::from_zyx(zyx)?;
    let labels = match data {
        ArrayData::U8(v) => v.into_iter().map(u64::from).collect(),
        ArrayData::U32(v) => v.into_iter().map(u64::from).collect(),
        ArrayData::U64(v) => v,
        ArrayData::F32(_) => return Err(Error::UnsupportedDtype("f32".into())),
    };
    let mut volume = LabelVolume::new(shape, labels)?;
    volume.resolution = header.resolution.map(|[z, y, x]| [x, y, z]);
    Ok(volume)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct GraphHeader {
    /// `[Z, Y, X]`
    shape: [usize; 3],
    /// Offsets as `[dx, dy, dz]`.
    offsets: Vec<[i64; 3]>,
    direct_count: usize,
    edge_count: usize,
}

const GRAPH_RECORD: usize = 13;

/// Writes a graph: per edge `f32 mean, f32 variance, f32 evidence, u8 valid`.
pub fn write_graph(graph: &SignedGridGraph, base: &Path) -> Result<()> {
    let (json, raw) = graph_paths(base);
    let header = GraphHeader {
        shape: graph.shape().zyx(),
        offsets: graph.neighborhood().offsets().iter().map(|o| [o.x, o.y, o.z]).collect(),
        direct_count: graph.neighborhood().direct_count(),
        edge_count: graph.len(),
    };
    let mut bytes = Vec::with_capacity(graph.len() * GRAPH_RECORD);
    for s in graph.stats() {
        bytes.extend_from_slice(&s.mean.to_le_bytes());
        bytes.extend_from_slice(&s.variance.to_le_bytes());
        bytes.extend_from_slice(&s.evidence.to_le_bytes());
        bytes.push(u8::from(s.is_valid()));
    }
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    write_file(&json, text.as_bytes())?;
    write_file(&raw, &bytes)
}

pub fn read_graph(base: &Path) -> Result<SignedGridGraph> {
    let (json, raw) = graph_paths(base);
    let header: GraphHeader = read_header(&json)?;
    let malformed = |reason: String| Error::MalformedHeader {
        path: json.clone(),
        reason,
    };
    let shape = Shape::from_zyx(header.shape).map_err(|e| malformed(e.to_string()))?;
    let neighborhood = AffinityNeighborhood::new(
        header.offsets.iter().map(|&o| Coord3::from(o)).collect(),
        header.direct_count,
    )
    .map_err(|e| malformed(e.to_string()))?;
    let bytes = read_payload(&raw, (header.edge_count * GRAPH_RECORD) as u64)?;
    let f = |c: &[u8]| f32::from_le_bytes(c.try_into().unwrap());
    let mut stats = Vec::with_capacity(header.edge_count);
    for rec in bytes.chunks_exact(GRAPH_RECORD) {
        let s = EdgeStats {
            mean: f(&rec[0..4]),
            variance: f(&rec[4..8]),
            evidence: f(&rec[8..12]),
        };
        if (rec[12] != 0) != s.is_valid() {
            return Err(malformed("valid flag disagrees with evidence".into()));
        }
        stats.push(s);
    }
    SignedGridGraph::new(shape, neighborhood, stats).map_err(|e| malformed(e.to_string()))
}
