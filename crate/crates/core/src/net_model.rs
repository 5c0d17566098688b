//! Network topology and the quadratic resource model.
//!
//! Every prunable channel-sharing group `g` gets one keep ratio `alpha_g`.
//! With the augmented vector `a = (1, alpha_1, ..., alpha_G)` the FLOPs or
//! parameter count of the network is `a^T T a` for a symmetric nonnegative
//! `T`. Index 0 stands for everything that is never pruned: the network
//! input, and any group listed in `non_prunable_groups`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("topology schema violation: {0}")]
    SchemaViolation(String),
    #[error("layer {layer} references group {group} which no layer produces")]
    DanglingGroup { layer: String, group: i64 },
    #[error("depthwise layer {0} must have in == out and group == input_group")]
    DepthwiseGroupMismatch(String),
    #[error("group {group} mixes output widths {first} and {second}")]
    ChannelMismatch { group: i64, first: usize, second: usize },
    #[error("dimension mismatch: expected {expected} ratios, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid constraint matrix: {0}")]
    InvalidMatrix(String),
    #[error("cannot read topology {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    DepthwiseConv,
    Linear,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    #[serde(rename = "in")]
    pub in_channels: usize,
    #[serde(rename = "out")]
    pub out_channels: usize,
    #[serde(rename = "k", default = "one")]
    pub kernel: usize,
    #[serde(default = "one")]
    pub out_h: usize,
    #[serde(default = "one")]
    pub out_w: usize,
    /// Channel-sharing group of this layer's output.
    pub group: i64,
    /// Group feeding this layer, or -1 for the network input.
    pub input_group: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetKind {
    Flops,
    Params,
}

impl BudgetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BudgetKind::Flops => "flops",
            BudgetKind::Params => "params",
        }
    }
}

impl std::str::FromStr for BudgetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flops" => Ok(BudgetKind::Flops),
            "params" => Ok(BudgetKind::Params),
            "latency" => Err(
                "latency budgets are not supported: a lookup-table latency model is not \
                 quadratic in the keep ratios; use flops or params"
                    .into(),
            ),
            other => Err(format!("unknown budget kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    layers: Vec<LayerSpec>,
    #[serde(default)]
    non_prunable_groups: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDescription {
    pub layers: Vec<LayerSpec>,
    pub non_prunable_groups: BTreeSet<i64>,
    /// Prunable group ids in order of first appearance.
    groups: Vec<i64>,
    group_channels: HashMap<i64, usize>,
}

impl NetworkDescription {
    pub fn new(layers: Vec<LayerSpec>, non_prunable_groups: &[i64]) -> Result<Self, NetError> {
        validate(&layers, non_prunable_groups)?;
        let non_prunable: BTreeSet<i64> = non_prunable_groups.iter().copied().collect();
        let mut groups = Vec::new();
        let mut group_channels = HashMap::new();
        for layer in &layers {
            group_channels.entry(layer.group).or_insert(layer.out_channels);
            if !non_prunable.contains(&layer.group) && !groups.contains(&layer.group) {
                groups.push(layer.group);
            }
        }
        Ok(Self {
            layers,
            non_prunable_groups: non_prunable,
            groups,
            group_channels,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, NetError> {
        let topo: TopologyFile =
            serde_json::from_str(text).map_err(|e| NetError::SchemaViolation(e.to_string()))?;
        Self::new(topo.layers, &topo.non_prunable_groups)
    }

    pub fn to_json_string(&self) -> String {
        let topo = TopologyFile {
            layers: self.layers.clone(),
            non_prunable_groups: self.non_prunable_groups.iter().copied().collect(),
        };
        serde_json::to_string_pretty(&topo).expect("topology serializes")
    }

    /// Prunable group ids, in the order used by ratio vectors.
    pub fn groups(&self) -> &[i64] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn is_prunable_group(&self, group: i64) -> bool {
        group >= 0 && !self.non_prunable_groups.contains(&group)
    }

    /// Position of `group` in the augmented ratio vector (0 = fixed at 1).
    pub fn augmented_index(&self, group: i64) -> usize {
        self.groups
            .iter()
            .position(|&g| g == group)
            .map_or(0, |p| p + 1)
    }

    /// Original output width of a group.
    pub fn group_channels(&self, group: i64) -> Option<usize> {
        self.group_channels.get(&group).copied()
    }

    pub fn layers_in_group(&self, group: i64) -> impl Iterator<Item = &LayerSpec> {
        self.layers.iter().filter(move |l| l.group == group)
    }

    pub fn prunable_layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.layers.iter().filter(|l| self.is_prunable_group(l.group))
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Sum of per-layer costs of the unpruned network.
    pub fn full_cost(&self, kind: BudgetKind) -> f64 {
        self.layers.iter().map(|l| layer_cost(l, kind, 1.0, 1.0)).sum()
    }
}

fn validate(layers: &[LayerSpec], non_prunable: &[i64]) -> Result<(), NetError> {
    if layers.is_empty() {
        return Err(NetError::SchemaViolation("no layers".into()));
    }
    let mut names = HashSet::new();
    let mut widths: HashMap<i64, usize> = HashMap::new();
    for l in layers {
        if l.name.is_empty() || !names.insert(l.name.as_str()) {
            return Err(NetError::SchemaViolation(format!(
                "layer names must be unique and non-empty: {:?}",
                l.name
            )));
        }
        if [l.in_channels, l.out_channels, l.kernel, l.out_h, l.out_w].contains(&0) {
            return Err(NetError::SchemaViolation(format!(
                "layer {}: sizes must be positive",
                l.name
            )));
        }
        if l.group < 0 || l.input_group < -1 {
            return Err(NetError::SchemaViolation(format!(
                "layer {}: group must be >= 0 and input_group >= -1",
                l.name
            )));
        }
        if l.kind == LayerKind::DepthwiseConv
            && (l.in_channels != l.out_channels || l.group != l.input_group)
        {
            return Err(NetError::DepthwiseGroupMismatch(l.name.clone()));
        }
        match widths.get(&l.group) {
            Some(&w) if w != l.out_channels => {
                return Err(NetError::ChannelMismatch {
                    group: l.group,
                    first: w,
                    second: l.out_channels,
                })
            }
            Some(_) => {}
            None => {
                widths.insert(l.group, l.out_channels);
            }
        }
    }
    for l in layers {
        if l.input_group >= 0 && !widths.contains_key(&l.input_group) {
            return Err(NetError::DanglingGroup {
                layer: l.name.clone(),
                group: l.input_group,
            });
        }
    }
    for &g in non_prunable {
        if !widths.contains_key(&g) {
            return Err(NetError::DanglingGroup {
                layer: "<non_prunable_groups>".into(),
                group: g,
            });
        }
    }
    Ok(())
}

pub fn parse_network(path: &Path) -> Result<NetworkDescription, NetError> {
    let text = std::fs::read_to_string(path).map_err(|e| NetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    NetworkDescription::from_json_str(&text)
}

/// Weight-tensor cost of one layer when its input and output widths are
/// scaled by `in_ratio` and `out_ratio`. Depthwise layers scale with `out_ratio` only.
pub fn layer_cost(layer: &LayerSpec, kind: BudgetKind, in_ratio: f64, out_ratio: f64) -> f64 {
    let spatial = match kind {
        BudgetKind::Flops => (layer.out_h * layer.out_w) as f64,
        BudgetKind::Params => 1.0,
    };
    let k2 = (layer.kernel * layer.kernel) as f64;
    match layer.kind {
        LayerKind::DepthwiseConv => layer.out_channels as f64 * out_ratio * k2 * spatial,
        LayerKind::Conv | LayerKind::Linear => {
            layer.out_channels as f64 * out_ratio * layer.in_channels as f64 * in_ratio * k2 * spatial
        }
    }
}

/// Exact cost of a network whose groups keep `kept[group]` output channels.
/// Groups missing from `kept` keep their original width.
///
/// A consumer whose `in` is a multiple of the producer's width (e.g. a linear
/// layer over flattened feature maps) keeps `in * kept / width` inputs,
/// rounded up.
pub fn integer_cost(net: &NetworkDescription, kind: BudgetKind, kept: &HashMap<i64, u64>) -> u128 {
    let width = |g: i64| -> u64 {
        kept.get(&g)
            .copied()
            .unwrap_or_else(|| net.group_channels(g).expect("validated group") as u64)
    };
    net.layers
        .iter()
        .map(|l| {
            let spatial = match kind {
                BudgetKind::Flops => (l.out_h * l.out_w) as u128,
                BudgetKind::Params => 1,
            };
            let k2 = (l.kernel * l.kernel) as u128;
            let out = width(l.group) as u128;
            match l.kind {
                LayerKind::DepthwiseConv => out * k2 * spatial,
                LayerKind::Conv | LayerKind::Linear => {
                    let kept_in = if l.input_group < 0 {
                        l.in_channels as u128
                    } else {
                        let orig = net.group_channels(l.input_group).expect("validated") as u128;
                        let k = width(l.input_group) as u128;
                        (l.in_channels as u128 * k).div_ceil(orig)
                    };
                    out * kept_in * k2 * spatial
                }
            }
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintForm {
    /// (G+1) x (G+1) symmetric nonnegative matrix over `(1, alpha)`.
    pub t_matrix: Array2<f64>,
    pub budget_kind: BudgetKind,
    pub full_cost: f64,
    /// Prunable group ids for indices 1..=G.
    pub group_ids: Vec<i64>,
}

impl ConstraintForm {
    /// Wraps an explicit matrix. The matrix is symmetrized; entries must be
    /// finite and nonnegative.
    pub fn from_matrix(t: Array2<f64>, budget_kind: BudgetKind) -> Result<Self, NetError> {
        let (rows, cols) = t.dim();
        if rows != cols || rows < 2 {
            return Err(NetError::InvalidMatrix(format!("shape {rows}x{cols}")));
        }
        if t.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(NetError::InvalidMatrix("entries must be finite and >= 0".into()));
        }
        let sym = (&t + &t.t()) * 0.5;
        let full_cost = sym.sum();
        Ok(Self {
            t_matrix: sym,
            budget_kind,
            full_cost,
            group_ids: (1..rows as i64).collect(),
        })
    }

    pub fn num_groups(&self) -> usize {
        self.t_matrix.nrows() - 1
    }

    fn check(&self, alpha: &[f64]) -> Result<(), NetError> {
        if alpha.len() != self.num_groups() {
            return Err(NetError::DimensionMismatch {
                expected: self.num_groups(),
                found: alpha.len(),
            });
        }
        Ok(())
    }

    /// `(T a)_i` for the augmented vector `a = (1, alpha)`.
    pub fn apply(&self, alpha: &[f64]) -> Vec<f64> {
        let t = &self.t_matrix;
        (0..t.nrows())
            .map(|i| {
                let row = t.row(i);
                row[0] + alpha.iter().enumerate().map(|(j, a)| row[j + 1] * a).sum::<f64>()
            })
            .collect()
    }

    /// `a^T T a` with `a = (1, alpha)`.
    pub fn evaluate(&self, alpha: &[f64]) -> Result<f64, NetError> {
        self.check(alpha)?;
        let ta = self.apply(alpha);
        Ok(ta[0] + alpha.iter().zip(&ta[1..]).map(|(a, v)| a * v).sum::<f64>())
    }

    /// Gradient of the cost with respect to `alpha`.
    pub fn gradient(&self, alpha: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check(alpha)?;
        Ok(self.apply(alpha)[1..].iter().map(|v| 2.0 * v).collect())
    }
}

pub fn evaluate_cost(form: &ConstraintForm, alpha: &[f64]) -> Result<f64, NetError> {
    form.evaluate(alpha)
}

/// Builds `T` so that `a^T T a` equals the network's FLOPs or parameter count.
pub fn constraint_form(net: &NetworkDescription, kind: BudgetKind) -> ConstraintForm {
    let size = net.num_groups() + 1;
    let mut t = Array2::<f64>::zeros((size, size));
    for layer in &net.layers {
        let cost = layer_cost(layer, kind, 1.0, 1.0);
        let out = net.augmented_index(layer.group);
        let input = match layer.kind {
            LayerKind::DepthwiseConv => 0,
            _ => net.augmented_index(layer.input_group),
        };
        if input == out {
            t[[out, out]] += cost;
        } else {
            t[[input, out]] += 0.5 * cost;
            t[[out, input]] += 0.5 * cost;
        }
    }
    ConstraintForm {
        t_matrix: t,
        budget_kind: kind,
        full_cost: net.full_cost(kind),
        group_ids: net.groups().to_vec(),
    }
}
