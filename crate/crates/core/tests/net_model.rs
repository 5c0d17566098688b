mod common;

use std::collections::HashMap;

use common::{conv, random_chain};
use hsic_planner::net_model::{
    constraint_form, integer_cost, layer_cost, BudgetKind, LayerKind, LayerSpec, NetworkDescription,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cost by walking the layers one at a time with the given group ratios.
fn per_layer_cost(net: &NetworkDescription, kind: BudgetKind, ratio: &HashMap<i64, f64>) -> f64 {
    let r = |g: i64| if g < 0 { 1.0 } else { ratio.get(&g).copied().unwrap_or(1.0) };
    net.layers
        .iter()
        .map(|l| layer_cost(l, kind, r(l.input_group), r(l.group)))
        .sum()
}

fn random_alpha(net: &NetworkDescription, seed: u64) -> (Vec<f64>, HashMap<i64, f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha: Vec<f64> = net.groups().iter().map(|_| rng.random_range(0.05..=1.0)).collect();
    let map = net.groups().iter().copied().zip(alpha.iter().copied()).collect();
    (alpha, map)
}

#[test]
fn quadratic_form_matches_layer_walk() {
    for seed in 0..30 {
        let (net, _) = random_chain(2 + seed as usize % 9, seed);
        for kind in [BudgetKind::Flops, BudgetKind::Params] {
            let form = constraint_form(&net, kind);
            let (alpha, map) = random_alpha(&net, seed + 100);
            let q = form.evaluate(&alpha).unwrap();
            let walk = per_layer_cost(&net, kind, &map);
            assert!((q - walk).abs() <= 1e-9 * walk, "seed {seed}: {q} vs {walk}");
            let ones = vec![1.0; form.num_groups()];
            assert!((form.evaluate(&ones).unwrap() - net.full_cost(kind)).abs() <= 1e-9 * form.full_cost);
        }
    }
}

#[test]
fn integer_cost_agrees_with_quadratic_form_on_exact_widths() {
    let (net, _) = random_chain(6, 3);
    let form = constraint_form(&net, BudgetKind::Flops);
    // Halving every group is exact because all widths are multiples of 8.
    let kept: HashMap<i64, u64> = net
        .groups()
        .iter()
        .map(|&g| (g, net.group_channels(g).unwrap() as u64 / 2))
        .collect();
    let exact = integer_cost(&net, BudgetKind::Flops, &kept) as f64;
    let q = form.evaluate(&vec![0.5; 6]).unwrap();
    assert!((exact - q).abs() < 1e-6, "{exact} vs {q}");
    assert_eq!(integer_cost(&net, BudgetKind::Flops, &HashMap::new()) as f64, net.full_cost(BudgetKind::Flops));
}

#[test]
fn integer_cost_is_monotone_in_each_group() {
    let (net, _) = random_chain(5, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let mut kept: HashMap<i64, u64> = net
            .groups()
            .iter()
            .map(|&g| (g, rng.random_range(1..=net.group_channels(g).unwrap() as u64)))
            .collect();
        let before = integer_cost(&net, BudgetKind::Flops, &kept);
        let g = net.groups()[rng.random_range(0..net.num_groups())];
        let k = kept[&g];
        if k > 1 {
            kept.insert(g, k - 1);
            assert!(integer_cost(&net, BudgetKind::Flops, &kept) <= before);
        }
    }
}

#[test]
fn residual_group_shares_one_ratio() {
    // stem -> a -> b, where a and b add onto the stem output and so share its group.
    let net = NetworkDescription::new(
        vec![
            conv("stem", 3, 16, 3, 8, 1, -1),
            conv("a", 16, 32, 3, 8, 2, 1),
            conv("b", 32, 16, 3, 8, 1, 2),
            conv("head", 16, 10, 1, 1, 3, 1),
        ],
        &[3],
    )
    .unwrap();
    assert_eq!(net.groups(), &[1, 2]);
    assert_eq!(net.layers_in_group(1).count(), 2);
    let form = constraint_form(&net, BudgetKind::Flops);
    let map = HashMap::from([(1, 0.25), (2, 0.5)]);
    let q = form.evaluate(&[0.25, 0.5]).unwrap();
    assert!((q - per_layer_cost(&net, BudgetKind::Flops, &map)).abs() < 1e-6);
}

#[test]
fn depthwise_cost_is_linear_in_its_group() {
    let dw = LayerSpec {
        name: "dw".into(),
        kind: LayerKind::DepthwiseConv,
        in_channels: 16,
        out_channels: 16,
        kernel: 3,
        out_h: 4,
        out_w: 4,
        group: 1,
        input_group: 1,
    };
    let net = NetworkDescription::new(vec![conv("pw", 8, 16, 1, 4, 1, -1), dw], &[]).unwrap();
    let form = constraint_form(&net, BudgetKind::Flops);
    let full = net.full_cost(BudgetKind::Flops);
    let half = form.evaluate(&[0.5]).unwrap();
    // pw is linear in alpha (input is fixed), dw is linear too.
    assert!((half - full / 2.0).abs() < 1e-9);
}

#[test]
fn topology_json_round_trips() {
    let (net, _) = random_chain(4, 9);
    let back = NetworkDescription::from_json_str(&net.to_json_string()).unwrap();
    assert_eq!(back, net);
}

#[test]
fn latency_budget_is_rejected() {
    let err = "latency".parse::<BudgetKind>().unwrap_err();
    assert!(err.contains("not quadratic"));
}
