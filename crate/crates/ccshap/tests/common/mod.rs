//! Shared helpers for the integration suites: a seeded random-DAG
//! generator and independent oracles (path-enumeration d-separation,
//! exact rational Shapley values) that deliberately share no code with
//! the production implementations they check.

use std::collections::BTreeSet;

use ccshap::attribution::shapley_weight;
use ccshap::dataset::Dataset;
use ccshap::graph::CausalGraph;
use num_rational::Ratio;
use rand::rngs::StdRng;
use rand::Rng;

/// A random DAG on `n` nodes named `N0..N{n-1}` with edges only from lower
/// to higher index, each present with probability `edge_prob`. The last
/// node is the target.
pub fn random_dag(rng: &mut StdRng, n: usize, edge_prob: f64) -> (CausalGraph, Vec<(usize, usize)>) {
    let nodes: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let mut edges = Vec::new();
    let mut ix_edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(edge_prob) {
                edges.push((nodes[i].clone(), nodes[j].clone()));
                ix_edges.push((i, j));
            }
        }
    }
    let g = CausalGraph::new(&nodes, &edges, &nodes[n - 1]).expect("generated graphs are acyclic");
    (g, ix_edges)
}

fn descendants(edges: &[(usize, usize)], v: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for &(p, c) in edges {
            if p == u && out.insert(c) {
                stack.push(c);
            }
        }
    }
    out
}

/// Oracle d-separation by exhaustive path enumeration: walk every simple
/// undirected path between `a` and `b` and apply the blocking rules to
/// each interior node directly.
pub fn d_separated_oracle(
    n: usize,
    edges: &[(usize, usize)],
    a: usize,
    b: usize,
    z: &BTreeSet<usize>,
) -> bool {
    // Closure of z under "has a descendant in z": a collider on a path is
    // open exactly when it lies in this set.
    let opens_collider: Vec<bool> = (0..n)
        .map(|v| z.contains(&v) || descendants(edges, v).iter().any(|d| z.contains(d)))
        .collect();

    // DFS over undirected simple paths, tracking edge orientation.
    // `trail` holds (node, entered_by_forward_edge) pairs.
    fn dfs(
        edges: &[(usize, usize)],
        b: usize,
        trail: &mut Vec<(usize, bool)>,
        on_path: &mut Vec<bool>,
        z: &BTreeSet<usize>,
        opens_collider: &[bool],
    ) -> bool {
        let (v, _) = *trail.last().unwrap();
        if v == b {
            // Blocked iff some interior node blocks it.
            let blocked = (1..trail.len() - 1).any(|i| {
                let (w, entered_fwd) = trail[i];
                let left_fwd = trail[i + 1].1;
                let is_collider = entered_fwd && !left_fwd;
                if is_collider {
                    !opens_collider[w]
                } else {
                    z.contains(&w)
                }
            });
            if !blocked {
                return true; // found an open path
            }
            return false;
        }
        for &(p, c) in edges {
            let (next, fwd) = if p == v {
                (c, true)
            } else if c == v {
                (p, false)
            } else {
                continue;
            };
            if on_path[next] {
                continue;
            }
            on_path[next] = true;
            trail.push((next, fwd));
            let open = dfs(edges, b, trail, on_path, z, opens_collider);
            trail.pop();
            on_path[next] = false;
            if open {
                return true;
            }
        }
        false
    }

    let mut on_path = vec![false; n];
    on_path[a] = true;
    let mut trail = vec![(a, true)];
    !dfs(edges, b, &mut trail, &mut on_path, z, &opens_collider)
}

/// Exact rational Shapley value of `feature` at evaluation row `row`,
/// computed by brute-force enumeration over the training rows: every
/// conditional mean is the exact ratio of matching-row target sums to
/// matching-row counts, and the context weights stay rational throughout.
/// Requires an integer-valued dataset (so equality matching is exact).
pub fn exact_shapley_oracle(
    d: &Dataset,
    target: &str,
    feature: &str,
    eval: &Dataset,
    row: usize,
) -> Ratio<i128> {
    let features: Vec<&String> = d.names().iter().filter(|n| *n != target).collect();
    let others: Vec<&String> = features.iter().filter(|n| **n != feature).copied().collect();
    let y = d.column(target).unwrap();

    let cond_mean = |inputs: &[&String]| -> Ratio<i128> {
        let mut num = 0i128;
        let mut den = 0i128;
        for t in 0..d.n_rows() {
            let matches = inputs
                .iter()
                .all(|name| d.value(t, name).unwrap() == eval.value(row, name).unwrap());
            if matches {
                num += y[t] as i128;
                den += 1;
            }
        }
        assert!(den > 0, "evaluation row outside the training support");
        Ratio::new(num, den)
    };

    let mut phi = Ratio::new(0, 1);
    for mask in 0u32..(1 << others.len()) {
        let context: Vec<&String> = others
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, n)| *n)
            .collect();
        let gamma = shapley_weight(context.len(), features.len()).unwrap().rational();
        let gamma = Ratio::new(*gamma.numer() as i128, *gamma.denom() as i128);
        let mut with = context.clone();
        with.push(features.iter().find(|n| **n == feature).unwrap());
        phi += gamma * (cond_mean(&with) - cond_mean(&context));
    }
    phi
}
