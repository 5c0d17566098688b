//! Synthetic activation dumps with controlled cross-layer dependence, for
//! demos and tests.
//!
//! Every layer reads from one of several independent Gaussian latent sources
//! through its own random projection. Layers that share a source are
//! strongly dependent; layers on different sources are independent.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::activation_store::{write_dump, LayerData, StoreError};
use crate::net_model::{LayerKind, LayerSpec, NetworkDescription};

const LATENT_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLayer {
    pub name: String,
    pub channels: usize,
    /// Output height and width.
    pub spatial: usize,
    /// Latent source index; layers with equal sources are dependent.
    pub source: usize,
    /// Standard deviation of per-entry noise.
    pub noise: f32,
}

impl SyntheticLayer {
    pub fn new(name: impl Into<String>, channels: usize, spatial: usize, source: usize) -> Self {
        Self {
            name: name.into(),
            channels,
            spatial,
            source,
            noise: 0.1,
        }
    }
}

fn randn(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f32> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

/// Activations of shape `n x (c * h * w)` per layer, deterministic in `seed`.
pub fn activations(layers: &[SyntheticLayer], n: usize, seed: u64) -> Vec<LayerData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources = layers.iter().map(|l| l.source).max().map_or(0, |m| m + 1);
    let latents: Vec<Array2<f32>> = (0..sources).map(|_| randn(&mut rng, n, LATENT_DIM)).collect();
    layers
        .iter()
        .map(|l| {
            let d = l.channels * l.spatial * l.spatial;
            let proj = randn(&mut rng, LATENT_DIM, d);
            let noise = randn(&mut rng, n, d) * l.noise;
            let x = latents[l.source].dot(&proj) + noise;
            LayerData {
                name: l.name.clone(),
                shape: vec![l.channels, l.spatial, l.spatial],
                values: x.iter().copied().collect(),
            }
        })
        .collect()
}

/// A plain chain of 3x3 convolutions over the given layers, fed by a
/// 3-channel input and followed by a fixed 10-way classifier.
pub fn chain_topology(layers: &[SyntheticLayer]) -> NetworkDescription {
    let mut specs = Vec::with_capacity(layers.len() + 1);
    let mut prev = 3;
    for (i, l) in layers.iter().enumerate() {
        specs.push(LayerSpec {
            name: l.name.clone(),
            kind: LayerKind::Conv,
            in_channels: prev,
            out_channels: l.channels,
            kernel: 3,
            out_h: l.spatial,
            out_w: l.spatial,
            group: i as i64 + 1,
            input_group: i as i64,
        });
        prev = l.channels;
    }
    specs[0].input_group = -1;
    let classifier = layers.len() as i64 + 1;
    specs.push(LayerSpec {
        name: "classifier".into(),
        kind: LayerKind::Linear,
        in_channels: prev,
        out_channels: 10,
        kernel: 1,
        out_h: 1,
        out_w: 1,
        group: classifier,
        input_group: layers.len() as i64,
    });
    NetworkDescription::new(specs, &[classifier]).expect("chain topology is valid")
}

/// Writes `manifest.json`, layer files and `topology.json` into `dir`.
/// Returns `(manifest, topology)` paths.
pub fn write_chain_fixture(
    dir: &Path,
    layers: &[SyntheticLayer],
    n: usize,
    seed: u64,
) -> Result<(PathBuf, PathBuf), StoreError> {
    let manifest = write_dump(dir, n, &activations(layers, n, seed))?;
    let topology = dir.join("topology.json");
    std::fs::write(&topology, chain_topology(layers).to_json_string()).map_err(|source| {
        StoreError::Io {
            path: topology.clone(),
            source,
        }
    })?;
    Ok((manifest, topology))
}
