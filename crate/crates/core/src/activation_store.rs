//! On-disk activation dumps.
//!
//! A dump is a JSON manifest plus one binary file per layer. Each layer file
//! is laid out as:
//!
//! ```text
//! magic    4 bytes   "ITPA"
//! version  u32 LE    1
//! rank     u32 LE
//! dims     rank x u32 LE   (dims[0] = sample count n)
//! dtype    u8        0 = f32 little-endian
//! payload  row-major f32 LE, prod(dims) values
//! ```
//!
//! The manifest is `{"n": int, "layers": [{"name": str, "file": str, "shape": [int...]}]}`
//! where `shape` excludes the leading sample dimension and `file` is relative
//! to the manifest's directory.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"ITPA";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: bad magic bytes {found:?}, expected \"ITPA\"")]
    MagicMismatch { path: PathBuf, found: [u8; 4] },
    #[error("{path}: unsupported format version {version}")]
    VersionUnsupported { path: PathBuf, version: u32 },
    #[error("{path}: unsupported dtype tag {tag}")]
    DtypeUnsupported { path: PathBuf, tag: u8 },
    #[error("sample count mismatch: layer {layer} has n={found}, expected n={expected}")]
    SampleCountMismatch {
        layer: String,
        expected: usize,
        found: usize,
    },
    #[error("layer {layer}: header shape {found:?} does not match manifest shape {expected:?}")]
    ShapeMismatch {
        layer: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("{path}: payload truncated or oversized")]
    PayloadSize { path: PathBuf },
    #[error("layer {layer}: non-finite value at flat index {index}")]
    NonFiniteData { layer: String, index: usize },
    #[error("layer {0} not found in dump")]
    LayerNotFound(String),
    #[error("duplicate layer name {0}")]
    DuplicateLayer(String),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Keep every (channel, y, x) position as a feature.
    #[default]
    Flatten,
    /// Average each channel over its spatial positions.
    SpatialMean,
}

impl Pooling {
    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::Flatten => "flatten",
            Pooling::SpatialMean => "spatial_mean",
        }
    }
}

impl std::str::FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flatten" => Ok(Pooling::Flatten),
            "spatial_mean" | "mean" => Ok(Pooling::SpatialMean),
            other => Err(format!("unknown pooling {other:?} (expected flatten or spatial_mean)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ManifestLayer {
    pub name: String,
    pub file: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Manifest {
    pub n: usize,
    pub layers: Vec<ManifestLayer>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerEntry {
    pub name: String,
    pub file: PathBuf,
    pub n: usize,
    /// Per-sample shape: `[c, h, w]` or `[features]`.
    pub shape: Vec<usize>,
}

impl LayerEntry {
    pub fn features(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone)]
pub struct ActivationDump {
    pub manifest_path: PathBuf,
    pub n: usize,
    pub layers: Vec<LayerEntry>,
    /// Number of leading samples used by `load_layer`; defaults to `n`.
    samples: usize,
}

/// Header of a single `ITPA` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerHeader {
    pub dims: Vec<usize>,
    pub dtype: u8,
}

impl LayerHeader {
    fn byte_len(&self) -> usize {
        4 + 4 + 4 + 4 * self.dims.len() + 1
    }
}

/// An `n x d` block of one layer's activations.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    pub data: Array2<f32>,
    pub layer_name: String,
    pub centered: bool,
}

impl ActivationMatrix {
    pub fn new(layer_name: impl Into<String>, data: Array2<f32>) -> Self {
        Self {
            data,
            layer_name: layer_name.into(),
            centered: false,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.data.ncols()
    }

    /// Subtracts each column's sample mean. Columns whose entries are all
    /// identical become exact zeros.
    pub fn center(&mut self) {
        center_columns_f32(&mut self.data);
        self.centered = true;
    }

    pub fn centered(mut self) -> Self {
        self.center();
        self
    }

    /// Widened copy for kernel arithmetic.
    pub fn to_f64(&self) -> Array2<f64> {
        self.data.mapv(f64::from)
    }
}

fn center_columns_f32(data: &mut Array2<f32>) {
    let n = data.nrows();
    if n == 0 {
        return;
    }
    for mut col in data.axis_iter_mut(Axis(1)) {
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            col.fill(0.0);
            continue;
        }
        let mean = col.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
        col.mapv_inplace(|v| (f64::from(v) - mean) as f32);
    }
}

/// Column-centers an `f64` matrix in place. Constant columns become exact zeros.
pub fn center_columns(data: &mut Array2<f64>) {
    let n = data.nrows();
    if n == 0 {
        return;
    }
    for mut col in data.axis_iter_mut(Axis(1)) {
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            col.fill(0.0);
            continue;
        }
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
    }
}

fn read_u32(reader: &mut impl Read) -> io::Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_header(reader: &mut impl Read, path: &Path) -> Result<LayerHeader, StoreError> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(io_err(path))?;
    if magic != MAGIC {
        return Err(StoreError::MagicMismatch {
            path: path.to_path_buf(),
            found: magic,
        });
    }
    let version = read_u32(reader).map_err(io_err(path))?;
    if version != FORMAT_VERSION {
        return Err(StoreError::VersionUnsupported {
            path: path.to_path_buf(),
            version,
        });
    }
    let rank = read_u32(reader).map_err(io_err(path))? as usize;
    if rank == 0 || rank > 8 {
        return Err(StoreError::Manifest {
            path: path.to_path_buf(),
            message: format!("unsupported rank {rank}"),
        });
    }
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(read_u32(reader).map_err(io_err(path))? as usize);
    }
    let mut tag = [0u8; 1];
    reader.read_exact(&mut tag).map_err(io_err(path))?;
    if tag[0] != DTYPE_F32 {
        return Err(StoreError::DtypeUnsupported {
            path: path.to_path_buf(),
            tag: tag[0],
        });
    }
    Ok(LayerHeader { dims, dtype: tag[0] })
}

/// Reads only the header of an `ITPA` file.
pub fn read_layer_header(path: &Path) -> Result<LayerHeader, StoreError> {
    let file = open(path)?;
    read_header(&mut BufReader::new(file), path)
}

fn open(path: &Path) -> Result<File, StoreError> {
    File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => StoreError::MissingFile(path.to_path_buf()),
        _ => StoreError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

/// Reads an entire `ITPA` file: its dims and the raw row-major payload.
///
/// `rows` limits how many leading samples are decoded.
pub fn read_layer_file(
    path: &Path,
    layer: &str,
    rows: Option<usize>,
) -> Result<(Vec<usize>, Vec<f32>), StoreError> {
    let file = open(path)?;
    let file_len = file.metadata().map_err(io_err(path))?.len() as usize;
    let mut reader = BufReader::new(file);
    let header = read_header(&mut reader, path)?;
    let total: usize = header.dims.iter().product();
    if file_len != header.byte_len() + 4 * total {
        return Err(StoreError::PayloadSize {
            path: path.to_path_buf(),
        });
    }
    let per_sample = total / header.dims[0].max(1);
    let keep_rows = rows.unwrap_or(header.dims[0]).min(header.dims[0]);
    let count = keep_rows * per_sample;
    let mut bytes = vec![0u8; 4 * count];
    reader.read_exact(&mut bytes).map_err(io_err(path))?;
    let mut values = Vec::with_capacity(count);
    for (index, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(StoreError::NonFiniteData {
                layer: layer.to_string(),
                index,
            });
        }
        values.push(v);
    }
    let mut dims = header.dims;
    dims[0] = keep_rows;
    Ok((dims, values))
}

/// Writes one `ITPA` layer file. `dims[0]` is the sample count.
pub fn write_layer(path: &Path, dims: &[usize], data: &[f32]) -> Result<(), StoreError> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || total != data.len() {
        return Err(StoreError::PayloadSize {
            path: path.to_path_buf(),
        });
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(dims.len() as u32).to_le_bytes())?;
        for &d in dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&[DTYPE_F32])?;
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    };
    write().map_err(io_err(path))
}

/// A layer to be written by [`write_dump`]: per-sample `shape` and `n * prod(shape)` values.
#[derive(Debug, Clone)]
pub struct LayerData {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

/// Writes layer files named `<name>.itpa` plus `manifest.json` into `dir`.
/// Returns the manifest path.
pub fn write_dump(dir: &Path, n: usize, layers: &[LayerData]) -> Result<PathBuf, StoreError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = Manifest {
        n,
        layers: Vec::with_capacity(layers.len()),
    };
    for layer in layers {
        let file = format!("{}.itpa", layer.name.replace(['/', '\\'], "_"));
        let mut dims = vec![n];
        dims.extend_from_slice(&layer.shape);
        write_layer(&dir.join(&file), &dims, &layer.values)?;
        manifest.layers.push(ManifestLayer {
            name: layer.name.clone(),
            file,
            shape: layer.shape.clone(),
        });
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

/// Parses and validates a manifest and every layer file it references.
pub fn read_dump(manifest_path: &Path) -> Result<ActivationDump, StoreError> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => StoreError::MissingFile(manifest_path.to_path_buf()),
        _ => StoreError::Io {
            path: manifest_path.to_path_buf(),
            source: e,
        },
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| StoreError::Manifest {
        path: manifest_path.to_path_buf(),
        message: e.to_string(),
    })?;
    if manifest.n < 2 {
        return Err(StoreError::TooFewSamples(manifest.n));
    }
    if manifest.layers.is_empty() {
        return Err(StoreError::Manifest {
            path: manifest_path.to_path_buf(),
            message: "no layers listed".into(),
        });
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = HashSet::new();
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        if !seen.insert(entry.name.clone()) {
            return Err(StoreError::DuplicateLayer(entry.name.clone()));
        }
        let file = base.join(&entry.file);
        let (dims, _) = read_layer_file(&file, &entry.name, None)?;
        if dims[0] != manifest.n {
            return Err(StoreError::SampleCountMismatch {
                layer: entry.name.clone(),
                expected: manifest.n,
                found: dims[0],
            });
        }
        if dims[1..] != entry.shape[..] {
            return Err(StoreError::ShapeMismatch {
                layer: entry.name.clone(),
                expected: entry.shape.clone(),
                found: dims[1..].to_vec(),
            });
        }
        layers.push(LayerEntry {
            name: entry.name.clone(),
            file,
            n: dims[0],
            shape: entry.shape.clone(),
        });
    }
    Ok(ActivationDump {
        manifest_path: manifest_path.to_path_buf(),
        n: manifest.n,
        layers,
        samples: manifest.n,
    })
}

impl ActivationDump {
    pub fn layer(&self, name: &str) -> Option<&LayerEntry> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.name.clone()).collect()
    }

    /// Samples that `load_layer` will return.
    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Restricts loading to the first `samples` samples.
    pub fn with_samples(mut self, samples: usize) -> Result<Self, StoreError> {
        if samples < 2 {
            return Err(StoreError::TooFewSamples(samples));
        }
        if samples > self.n {
            return Err(StoreError::SampleCountMismatch {
                layer: "<requested>".into(),
                expected: self.n,
                found: samples,
            });
        }
        self.samples = samples;
        Ok(self)
    }

    /// Raw `n x prod(shape)` matrix, before pooling and centering.
    pub fn load_raw(&self, layer_name: &str) -> Result<Array2<f32>, StoreError> {
        let entry = self
            .layer(layer_name)
            .ok_or_else(|| StoreError::LayerNotFound(layer_name.to_string()))?;
        let (dims, values) = read_layer_file(&entry.file, &entry.name, Some(self.samples))?;
        let d = entry.features();
        Array2::from_shape_vec((dims[0], d), values).map_err(|_| StoreError::PayloadSize {
            path: entry.file.clone(),
        })
    }

    /// Loads one layer, pools it, and column-centers it.
    pub fn load_layer(
        &self,
        layer_name: &str,
        pooling: Pooling,
    ) -> Result<ActivationMatrix, StoreError> {
        let raw = self.load_raw(layer_name)?;
        let entry = self.layer(layer_name).expect("checked by load_raw");
        let data = match (pooling, entry.shape.as_slice()) {
            (Pooling::SpatialMean, &[c, h, w]) => spatial_mean(raw.view(), c, h * w),
            _ => raw,
        };
        Ok(ActivationMatrix::new(layer_name, data).centered())
    }
}

fn spatial_mean(raw: ArrayView2<f32>, channels: usize, positions: usize) -> Array2<f32> {
    let n = raw.nrows();
    let mut out = Array2::<f32>::zeros((n, channels));
    for (s, row) in raw.outer_iter().enumerate() {
        for c in 0..channels {
            let block = row.slice(ndarray::s![c * positions..(c + 1) * positions]);
            let mean = block.iter().map(|&v| f64::from(v)).sum::<f64>() / positions as f64;
            out[[s, c]] = mean as f32;
        }
    }
    out
}
