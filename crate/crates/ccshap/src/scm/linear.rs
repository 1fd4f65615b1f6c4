//! Random linear-Gaussian SCM generator: a strictly upper-triangular
//! Bernoulli edge pattern is permuted over rows and columns, edge weights
//! are drawn standard-normal, and every node follows
//! `V_i = sum_j A_ij * V_j + U_i` with i.i.d. noise `U_i`.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{CausalGraph, WeightedGraph};
use crate::scm::{Expr, Mechanism, NoiseSpec, Scm};
use crate::seed::derive_seed;

/// Name of node `i` in a generated linear SCM: node 0 is the target `Y`,
/// the rest are `X1`, `X2`, ...
pub fn linear_node_name(i: usize) -> String {
    if i == 0 {
        "Y".to_string()
    } else {
        format!("X{i}")
    }
}

/// Draw a random linear SCM with `n_vars` nodes and expected edge density
/// `edge_prob`, sharing one noise distribution across nodes. Returns the
/// model together with its weighted graph (edge `j -> i` carries `A_ij`).
///
/// The construction starts from a strictly upper-triangular i.i.d.
/// Bernoulli(`edge_prob`) pattern (so the result is always acyclic), applies
/// one uniform random permutation to rows and columns jointly, then draws
/// standard-normal weights for the surviving entries.
pub fn random_linear_scm(
    n_vars: usize,
    edge_prob: f64,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<(Scm, WeightedGraph)> {
    if n_vars < 2 {
        return Err(Error::InvalidArgument(
            "a linear SCM needs at least 2 variables".into(),
        ));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidArgument(format!(
            "edge probability {edge_prob} must lie in [0, 1]"
        )));
    }
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "linear-scm", 0));

    // Strictly upper-triangular adjacency pattern: entry (i, j) with j > i
    // marks the edge j -> i before permutation.
    let mut pattern = vec![vec![false; n_vars]; n_vars];
    for i in 0..n_vars {
        for j in (i + 1)..n_vars {
            pattern[i][j] = rng.random::<f64>() < edge_prob;
        }
    }

    let mut perm: Vec<usize> = (0..n_vars).collect();
    perm.shuffle(&mut rng);

    // Permute rows and columns jointly, then weight the surviving entries.
    let mut weights_mat = vec![vec![0.0f64; n_vars]; n_vars];
    for i in 0..n_vars {
        for j in 0..n_vars {
            if pattern[perm[i]][perm[j]] {
                weights_mat[i][j] = <StandardNormal as Distribution<f64>>::sample(
                    &StandardNormal,
                    &mut rng,
                );
            }
        }
    }

    let names: Vec<String> = (0..n_vars).map(linear_node_name).collect();
    let mut edges = Vec::new();
    let mut edge_weights = Vec::new();
    for i in 0..n_vars {
        for j in 0..n_vars {
            if weights_mat[i][j] != 0.0 {
                edges.push((names[j].clone(), names[i].clone()));
                edge_weights.push(((names[j].clone(), names[i].clone()), weights_mat[i][j]));
            }
        }
    }
    let graph = CausalGraph::new(&names, &edges, "Y")?;

    let mut mechanisms = HashMap::new();
    for i in 0..n_vars {
        let parents: Vec<usize> = (0..n_vars).filter(|&j| weights_mat[i][j] != 0.0).collect();
        let m = if parents.is_empty() {
            Mechanism::Exogenous(noise.clone())
        } else {
            let mut expr = Expr::Noise;
            for j in parents {
                let term = Expr::Binary(
                    super::BinOp::Mul,
                    Box::new(Expr::Const(weights_mat[i][j])),
                    Box::new(Expr::Var(names[j].clone())),
                );
                expr = Expr::Binary(super::BinOp::Add, Box::new(expr), Box::new(term));
            }
            Mechanism::Assign {
                expr,
                noise: Some(noise.clone()),
            }
        };
        mechanisms.insert(names[i].clone(), m);
    }
    let scm = Scm::new(graph.clone(), mechanisms)?;
    let weighted = WeightedGraph::new(graph, &edge_weights)?;
    Ok((scm, weighted))
}
