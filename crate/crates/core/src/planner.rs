//! End-to-end planning: activations -> independence matrix -> importance ->
//! keep ratios -> integer channel counts.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activation_store::{read_dump, Pooling, StoreError};
use crate::hsic_kernel::Kernel;
use crate::importance_map::{
    build_independence_matrix, importance, ImportanceError, ImportanceVector, IndependenceMatrix,
};
use crate::net_model::{
    constraint_form, integer_cost, parse_network, BudgetKind, ConstraintForm, NetError,
    NetworkDescription,
};
use crate::qcqp_solver::{solve, SolverError, SolverResult, SolverStatus};

pub const PLAN_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_SAMPLES: usize = 64;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Importance(#[from] ImportanceError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("prunable layer {0} has no activations in the dump")]
    UnmappedLayer(String),
    #[error("dump layer {0} does not appear in the topology")]
    UnknownDumpLayer(String),
    #[error("cannot meet budget {budget} even with every group at its minimum width (cost {cost})")]
    RepairFailed { budget: f64, cost: u128 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<crate::hsic_kernel::KernelError> for PlanError {
    fn from(e: crate::hsic_kernel::KernelError) -> Self {
        PlanError::Importance(ImportanceError::Kernel(e))
    }
}

impl PlanError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            PlanError::Solver(SolverError::InfeasibleBudget { .. }) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    /// Fraction of the unpruned cost.
    Ratio(f64),
    Absolute(f64),
}

impl Budget {
    pub fn resolve(self, full_cost: f64) -> f64 {
        match self {
            Budget::Ratio(r) => r * full_cost,
            Budget::Absolute(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub budget_kind: BudgetKind,
    pub budget: Budget,
    pub beta: f64,
    pub kernel: Kernel,
    pub pooling: Pooling,
    pub alpha_min: f64,
    pub divisor: u64,
    /// Leading samples to use; `None` uses `min(64, n)`.
    pub samples: Option<usize>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            budget_kind: BudgetKind::Flops,
            budget: Budget::Ratio(0.5),
            beta: 1.0,
            kernel: Kernel::Linear,
            pooling: Pooling::Flatten,
            alpha_min: 0.05,
            divisor: 1,
            samples: None,
        }
    }
}

impl PlanConfig {
    fn validate(&self) -> Result<(), PlanError> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(PlanError::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.divisor == 0 {
            return Err(PlanError::Config("divisor must be >= 1".into()));
        }
        match self.budget {
            Budget::Ratio(r) if !(r > 0.0 && r.is_finite()) => {
                return Err(PlanError::Config(format!("budget ratio must be > 0, got {r}")))
            }
            Budget::Absolute(v) if !(v > 0.0 && v.is_finite()) => {
                return Err(PlanError::Config(format!("absolute budget must be > 0, got {v}")))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Per-group importance in `net.groups()` order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupImportance {
    pub values: Vec<f64>,
    /// Groups whose every member layer is degenerate; their importance is 0.
    pub all_degenerate: Vec<i64>,
}

/// Averages member-layer importances per prunable group, skipping
/// degenerate layers.
pub fn importance_to_groups(
    imp: &ImportanceVector,
    net: &NetworkDescription,
) -> Result<GroupImportance, PlanError> {
    let mut values = Vec::with_capacity(net.num_groups());
    let mut all_degenerate = Vec::new();
    for &g in net.groups() {
        let mut sum = 0.0;
        let mut count = 0usize;
        for layer in net.layers_in_group(g) {
            let v = imp
                .get(&layer.name)
                .ok_or_else(|| PlanError::UnmappedLayer(layer.name.clone()))?;
            if !imp.is_degenerate(&layer.name) {
                sum += v;
                count += 1;
            }
        }
        if count == 0 {
            all_degenerate.push(g);
            values.push(0.0);
        } else {
            values.push(sum / count as f64);
        }
    }
    Ok(GroupImportance {
        values,
        all_degenerate,
    })
}

/// Integer widths per prunable group plus the exact cost they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct Rounded {
    pub group_channels: HashMap<i64, u64>,
    pub cost: u128,
    pub decrements: usize,
}

fn round_width(alpha: f64, width: u64, divisor: u64) -> u64 {
    let steps = (alpha * width as f64 / divisor as f64).round() as u64;
    (divisor * steps).max(divisor).clamp(1, width)
}

/// Rounds ratios to channel counts (multiples of `divisor`) and, while the
/// exact cost exceeds `budget`, removes `divisor` channels from the group
/// that loses the least objective per unit of cost saved.
pub fn round_and_repair(
    alpha: &[f64],
    net: &NetworkDescription,
    form: &ConstraintForm,
    budget: f64,
    divisor: u64,
    group_importance: &[f64],
) -> Result<Rounded, PlanError> {
    let groups = net.groups();
    let kind = form.budget_kind;
    let mut kept: HashMap<i64, u64> = groups
        .iter()
        .zip(alpha)
        .map(|(&g, &a)| {
            let width = net.group_channels(g).expect("group width") as u64;
            (g, round_width(a, width, divisor))
        })
        .collect();
    let limit = if budget >= 0.0 { budget.floor() as u128 } else { 0 };
    let mut cost = integer_cost(net, kind, &kept);
    let mut decrements = 0;
    while cost > limit {
        let mut choice: Option<(f64, i64, u128)> = None;
        for (idx, &g) in groups.iter().enumerate() {
            let current = kept[&g];
            if current < 2 * divisor {
                continue;
            }
            let width = net.group_channels(g).expect("group width") as f64;
            let mut trial = kept.clone();
            trial.insert(g, current - divisor);
            let trial_cost = integer_cost(net, kind, &trial);
            let saved = cost.saturating_sub(trial_cost);
            if saved == 0 {
                continue;
            }
            let lost = group_importance[idx] * divisor as f64 / width;
            let score = lost / saved as f64;
            if choice.is_none_or(|(s, _, _)| score < s) {
                choice = Some((score, g, trial_cost));
            }
        }
        let Some((_, g, new_cost)) = choice else {
            return Err(PlanError::RepairFailed { budget, cost });
        };
        *kept.get_mut(&g).expect("group") -= divisor;
        cost = new_cost;
        decrements += 1;
    }
    Ok(Rounded {
        group_channels: kept,
        cost,
        decrements,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPlan {
    pub name: String,
    pub group: i64,
    pub original: u64,
    pub kept: u64,
    /// Continuous keep ratio of the layer's group (1 for fixed groups).
    pub ratio: f64,
    /// Layer importance, if the layer had activations.
    pub importance: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub planner: String,
    pub format: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMeta {
    pub budget_kind: BudgetKind,
    pub beta: f64,
    pub n: usize,
    pub kernel: String,
    pub pooling: Pooling,
    pub alpha_min: f64,
    pub divisor: u64,
    pub solver_status: SolverStatus,
    pub full_cost: f64,
    pub versions: Versions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningPlan {
    pub ratios: IndexMap<i64, f64>,
    pub channels: IndexMap<String, u64>,
    /// Exact cost of the rounded channel counts.
    pub achieved_cost: f64,
    pub budget: f64,
    pub meta: PlanMeta,
    pub layers: Vec<LayerPlan>,
}

impl PruningPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn kept(&self, layer: &str) -> Option<u64> {
        self.channels.get(layer).copied()
    }
}

/// Everything produced along the way, for reports and diagnostics.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub plan: PruningPlan,
    pub independence: IndependenceMatrix,
    pub importance: ImportanceVector,
    pub group_importance: GroupImportance,
    pub solver: SolverResult,
}

/// Runs the full pipeline from a manifest and topology file.
pub fn plan(manifest: &Path, topology: &Path, config: &PlanConfig) -> Result<PlanOutcome, PlanError> {
    config.validate()?;
    let dump = read_dump(manifest)?;
    let samples = config.samples.unwrap_or(DEFAULT_SAMPLES.min(dump.n));
    let dump = dump.with_samples(samples)?;
    let net = parse_network(topology)?;
    check_alignment(&dump.layer_names(), &net)?;
    let h = build_independence_matrix(&dump, config.kernel, config.pooling)?;
    plan_from_matrix(&net, h, samples, config)
}

fn check_alignment(dump_layers: &[String], net: &NetworkDescription) -> Result<(), PlanError> {
    for name in dump_layers {
        if net.layer(name).is_none() {
            return Err(PlanError::UnknownDumpLayer(name.clone()));
        }
    }
    for layer in net.prunable_layers() {
        if !dump_layers.contains(&layer.name) {
            return Err(PlanError::UnmappedLayer(layer.name.clone()));
        }
    }
    Ok(())
}

/// Plans from an already computed independence matrix.
pub fn plan_from_matrix(
    net: &NetworkDescription,
    h: IndependenceMatrix,
    n_samples: usize,
    config: &PlanConfig,
) -> Result<PlanOutcome, PlanError> {
    config.validate()?;
    check_alignment(&h.layer_names, net)?;
    let imp = importance(&h, config.beta);
    let group_imp = importance_to_groups(&imp, net)?;
    let form = constraint_form(net, config.budget_kind);
    let budget = config.budget.resolve(form.full_cost);
    let solver = solve(&group_imp.values, &form, budget, config.alpha_min)?;
    let rounded = round_and_repair(
        &solver.alpha,
        net,
        &form,
        budget,
        config.divisor,
        &group_imp.values,
    )?;

    let ratio_of = |g: i64| -> f64 {
        net.groups()
            .iter()
            .position(|&x| x == g)
            .map_or(1.0, |p| solver.alpha[p])
    };
    let ratios: IndexMap<i64, f64> = net
        .groups()
        .iter()
        .zip(&solver.alpha)
        .map(|(&g, &a)| (g, a))
        .collect();
    let mut channels = IndexMap::new();
    let mut layers = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let kept = rounded
            .group_channels
            .get(&layer.group)
            .copied()
            .unwrap_or(layer.out_channels as u64);
        channels.insert(layer.name.clone(), kept);
        layers.push(LayerPlan {
            name: layer.name.clone(),
            group: layer.group,
            original: layer.out_channels as u64,
            kept,
            ratio: ratio_of(layer.group),
            importance: imp.get(&layer.name),
            degenerate: imp.is_degenerate(&layer.name),
        });
    }
    let plan = PruningPlan {
        ratios,
        channels,
        achieved_cost: rounded.cost as f64,
        budget,
        meta: PlanMeta {
            budget_kind: config.budget_kind,
            beta: config.beta,
            n: n_samples,
            kernel: config.kernel.name(),
            pooling: config.pooling,
            alpha_min: config.alpha_min,
            divisor: config.divisor,
            solver_status: solver.status,
            full_cost: form.full_cost,
            versions: Versions {
                planner: env!("CARGO_PKG_VERSION").into(),
                format: PLAN_FORMAT_VERSION,
            },
        },
        layers,
    };
    Ok(PlanOutcome {
        plan,
        independence: h,
        importance: imp,
        group_importance: group_imp,
        solver,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

const BAR_WIDTH: usize = 40;

pub fn report(plan: &PruningPlan, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => plan.to_json(),
        ReportFormat::Csv => {
            let mut out = String::from("layer,group,original,kept,ratio,importance\n");
            for l in &plan.layers {
                let imp = l.importance.map(|v| v.to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    l.name, l.group, l.original, l.kept, l.ratio, imp
                );
            }
            out
        }
        ReportFormat::Text => text_report(plan),
    }
}

fn text_report(plan: &PruningPlan) -> String {
    let name_w = plan
        .layers
        .iter()
        .map(|l| l.name.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_w$}  {:>5}  {:>8}  {:>6}  {:>7}  {:>10}",
        "layer", "group", "original", "kept", "alpha", "importance"
    );
    for l in &plan.layers {
        let imp = match (l.importance, l.degenerate) {
            (Some(v), false) => format!("{v:.6}"),
            (Some(_), true) => "degenerate".into(),
            (None, _) => "-".into(),
        };
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>5}  {:>8}  {:>6}  {:>7.4}  {:>10}",
            l.name, l.group, l.original, l.kept, l.ratio, imp
        );
    }
    let full = plan.meta.full_cost;
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "budget ({}): {:.0} of {:.0} ({:.2}%), achieved {:.0} ({:.2}%)",
        plan.meta.budget_kind.as_str(),
        plan.budget,
        full,
        100.0 * plan.budget / full,
        plan.achieved_cost,
        100.0 * plan.achieved_cost / full
    );
    let _ = writeln!(
        out,
        "beta {}  n {}  kernel {}  pooling {}  alpha_min {}  divisor {}  solver {:?}",
        plan.meta.beta,
        plan.meta.n,
        plan.meta.kernel,
        plan.meta.pooling.as_str(),
        plan.meta.alpha_min,
        plan.meta.divisor,
        plan.meta.solver_status
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "kept channels per layer:");
    let peak = plan.layers.iter().map(|l| l.original).max().unwrap_or(1).max(1);
    for l in &plan.layers {
        let bar = ((l.kept as f64 / peak as f64) * BAR_WIDTH as f64).round() as usize;
        let _ = writeln!(
            out,
            "{:<name_w$} |{:<BAR_WIDTH$}| {}/{}",
            l.name,
            "#".repeat(bar),
            l.kept,
            l.original
        );
    }
    out
}
