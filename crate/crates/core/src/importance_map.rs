//! Pairwise layer independence and per-layer importance.
//!
//! Importance of layer `l` is `exp(-beta * sum_{i != l} nHSIC(X_l, X_i))`: a
//! layer that shares little information with the rest of the network scores
//! close to 1.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activation_store::{ActivationDump, Pooling, StoreError};
use crate::hsic_kernel::{gram_f64, nhsic, GramMatrix, Kernel, KernelError, LinearRepr, Nhsic};

#[derive(Debug, Error)]
pub enum ImportanceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("need at least 2 layers, got {0}")]
    TooFewLayers(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceMatrix {
    pub values: Array2<f64>,
    pub layer_names: Vec<String>,
    /// Layers whose centered Gram is zero (constant activations).
    pub degenerate: Vec<bool>,
    /// Number of distinct pairs evaluated.
    pub pairs_evaluated: usize,
}

enum Repr {
    Linear(LinearRepr),
    Gram(GramMatrix),
}

impl Repr {
    fn build(x: ArrayView2<f64>, kernel: Kernel) -> Result<Self, KernelError> {
        Ok(match kernel {
            Kernel::Linear => Repr::Linear(LinearRepr::new(x)?),
            Kernel::Rbf { .. } => Repr::Gram(gram_f64(x, kernel)?),
        })
    }

    fn degenerate(&self) -> bool {
        match self {
            Repr::Linear(r) => r.is_degenerate(),
            Repr::Gram(g) => !(g.self_alignment() > 0.0),
        }
    }

    fn nhsic(&self, other: &Repr) -> Result<Nhsic, KernelError> {
        match (self, other) {
            (Repr::Linear(a), Repr::Linear(b)) => a.nhsic(b),
            (Repr::Gram(a), Repr::Gram(b)) => nhsic(a, b),
            _ => unreachable!("one kernel per matrix"),
        }
    }
}

impl IndependenceMatrix {
    /// Builds the matrix from in-memory `n x d` feature blocks, one per layer.
    pub fn from_features(
        layer_names: Vec<String>,
        features: &[Array2<f64>],
        kernel: Kernel,
    ) -> Result<Self, ImportanceError> {
        let reprs = features
            .par_iter()
            .map(|x| Repr::build(x.view(), kernel))
            .collect::<Result<Vec<_>, _>>()?;
        Self::assemble(layer_names, &reprs)
    }

    fn assemble(layer_names: Vec<String>, reprs: &[Repr]) -> Result<Self, ImportanceError> {
        let l = reprs.len();
        if l < 2 {
            return Err(ImportanceError::TooFewLayers(l));
        }
        let pairs: Vec<(usize, usize)> = (0..l)
            .flat_map(|i| ((i + 1)..l).map(move |j| (i, j)))
            .collect();
        let scores = pairs
            .par_iter()
            .map(|&(i, j)| reprs[i].nhsic(&reprs[j]))
            .collect::<Result<Vec<_>, _>>()?;
        let degenerate: Vec<bool> = reprs.iter().map(Repr::degenerate).collect();
        let mut values = Array2::<f64>::zeros((l, l));
        for i in 0..l {
            values[[i, i]] = if degenerate[i] { 0.0 } else { 1.0 };
        }
        for (&(i, j), s) in pairs.iter().zip(&scores) {
            values[[i, j]] = s.value;
            values[[j, i]] = s.value;
        }
        Ok(Self {
            values,
            layer_names,
            degenerate,
            pairs_evaluated: pairs.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.layer_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layer_names.is_empty()
    }

    /// Sum of row `l` excluding the diagonal.
    pub fn off_diagonal_sum(&self, l: usize) -> f64 {
        self.values
            .row(l)
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != l)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn degenerate_layers(&self) -> Vec<String> {
        self.layer_names
            .iter()
            .zip(&self.degenerate)
            .filter(|(_, &d)| d)
            .map(|(n, _)| n.clone())
            .collect()
    }

    /// CSV with a header row of layer names and one row per layer, 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.layer_names.iter().map(|n| csv_field(n)).collect::<Vec<_>>().join(","));
        out.push('\n');
        for row in self.values.rows() {
            let cells: Vec<String> = row.iter().map(|&v| format_significant(v, 9)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Formats `v` with `digits` significant digits in positional notation.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Loads every layer of the dump and evaluates nHSIC over all layer pairs.
pub fn build_independence_matrix(
    dump: &ActivationDump,
    kernel: Kernel,
    pooling: Pooling,
) -> Result<IndependenceMatrix, ImportanceError> {
    let names = dump.layer_names();
    if names.len() < 2 {
        return Err(ImportanceError::TooFewLayers(names.len()));
    }
    let reprs = names
        .par_iter()
        .map(|name| -> Result<Repr, ImportanceError> {
            let x = dump.load_layer(name, pooling)?;
            Ok(Repr::build(x.to_f64().view(), kernel)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    IndependenceMatrix::assemble(names, &reprs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub values: Vec<f64>,
    pub beta: f64,
    pub layer_names: Vec<String>,
    pub degenerate: Vec<bool>,
}

impl ImportanceVector {
    pub fn get(&self, layer: &str) -> Option<f64> {
        self.layer_names
            .iter()
            .position(|n| n == layer)
            .map(|i| self.values[i])
    }

    pub fn is_degenerate(&self, layer: &str) -> bool {
        self.layer_names
            .iter()
            .position(|n| n == layer)
            .is_some_and(|i| self.degenerate[i])
    }
}

/// `values[l] = exp(-beta * sum_{i != l} h[l][i])`.
///
/// Degenerate layers already contribute zeros to every row; they are carried
/// through as flagged so callers can exclude them.
pub fn importance(h: &IndependenceMatrix, beta: f64) -> ImportanceVector {
    assert!(beta >= 0.0, "beta must be nonnegative");
    let values = (0..h.len())
        .map(|l| (-beta * h.off_diagonal_sum(l)).exp())
        .collect();
    ImportanceVector {
        values,
        beta,
        layer_names: h.layer_names.clone(),
        degenerate: h.degenerate.clone(),
    }
}

/// Importance for each beta in `betas`.
pub fn beta_sweep(h: &IndependenceMatrix, betas: &[f64]) -> Vec<ImportanceVector> {
    betas.iter().map(|&b| importance(h, b)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub layers: Vec<String>,
    pub independence: Vec<Vec<f64>>,
    pub importance: Vec<f64>,
    pub beta: f64,
    pub n: usize,
    pub degenerate: Vec<String>,
}

impl ImportanceReport {
    pub fn new(h: &IndependenceMatrix, imp: &ImportanceVector, n: usize) -> Self {
        Self {
            layers: h.layer_names.clone(),
            independence: h.values.rows().into_iter().map(|r| r.to_vec()).collect(),
            importance: imp.values.clone(),
            beta: imp.beta,
            n,
            degenerate: h.degenerate_layers(),
        }
    }
}
