#![allow(dead_code)]

use hsic_planner::net_model::{
    constraint_form, BudgetKind, ConstraintForm, LayerKind, LayerSpec, NetworkDescription,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn conv(name: &str, cin: usize, cout: usize, k: usize, hw: usize, group: i64, input: i64) -> LayerSpec {
    LayerSpec {
        name: name.into(),
        kind: LayerKind::Conv,
        in_channels: cin,
        out_channels: cout,
        kernel: k,
        out_h: hw,
        out_w: hw,
        group,
        input_group: input,
    }
}

/// Random conv chain with `groups` prunable groups and a fixed classifier.
pub fn random_chain(groups: usize, seed: u64) -> (NetworkDescription, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut prev_c = 3;
    let mut hw = 32;
    for g in 0..groups {
        let c = 8 * rng.random_range(1..=8);
        if g > 0 && rng.random_bool(0.4) {
            hw = (hw / 2).max(1);
        }
        let k = if rng.random_bool(0.7) { 3 } else { 1 };
        let input = if g == 0 { -1 } else { g as i64 };
        layers.push(conv(&format!("conv{}", g + 1), prev_c, c, k, hw, g as i64 + 1, input));
        prev_c = c;
    }
    layers.push(LayerSpec {
        name: "fc".into(),
        kind: LayerKind::Linear,
        in_channels: prev_c,
        out_channels: 10,
        kernel: 1,
        out_h: 1,
        out_w: 1,
        group: 1000,
        input_group: groups as i64,
    });
    let net = NetworkDescription::new(layers, &[1000]).unwrap();
    let imp = (0..groups).map(|_| rng.random_range(0.05..1.0)).collect();
    (net, imp)
}

pub fn random_chain_form(groups: usize, seed: u64) -> (ConstraintForm, Vec<f64>) {
    let (net, imp) = random_chain(groups, seed);
    (constraint_form(&net, BudgetKind::Flops), imp)
}

/// Best objective over the grid {lo, lo+step, ..., 1}^3 restricted to
/// cost <= budget. For each (a1, a2) the best a3 is the largest feasible grid
/// value because cost is nondecreasing and importance is nonnegative.
pub fn grid_oracle_3(form: &ConstraintForm, imp: &[f64], budget: f64, lo_index: usize, steps: usize) -> Option<(f64, [f64; 3])> {
    assert_eq!(form.num_groups(), 3);
    let t = &form.t_matrix;
    let h = 1.0 / steps as f64;
    let grid: Vec<f64> = (lo_index..=steps).map(|k| k as f64 * h).collect();
    let cost = |a: [f64; 3]| -> f64 {
        let v = [1.0, a[0], a[1], a[2]];
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += t[[i, j]] * v[i] * v[j];
            }
        }
        s
    };
    let mut best: Option<(f64, [f64; 3])> = None;
    for &a1 in &grid {
        for &a2 in &grid {
            if cost([a1, a2, grid[0]]) > budget {
                continue;
            }
            let (mut lo, mut hi) = (0usize, grid.len() - 1);
            if cost([a1, a2, grid[hi]]) <= budget {
                lo = hi;
            } else {
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if cost([a1, a2, grid[mid]]) <= budget {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            let a = [a1, a2, grid[lo]];
            let obj = imp[0] * a1 + imp[1] * a2 + imp[2] * a[2];
            if best.is_none_or(|(b, _)| obj > b) {
                best = Some((obj, a));
            }
        }
    }
    best
}
