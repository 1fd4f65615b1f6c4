//! TOML description format for declarative SCMs.
//!
//! ```toml
//! target = "Y"
//!
//! [[nodes]]
//! name = "C"
//! mechanism = "exogenous"
//! noise = "normal(60, 25)"
//!
//! [[nodes]]
//! name = "Y"
//! mechanism = "bernoulli(0.15)"
//!
//! [[nodes]]
//! name = "G"
//! parents = ["C", "Y"]
//! mechanism = "85 + 0.4*C + 40*Y + noise"
//! noise = "normal(0, 100)"
//! ```
//!
//! A mechanism string is either `exogenous` (noise required),
//! `bernoulli(<expr>)` with an expression giving P(X = 1), or an
//! expression over the declared parents, optionally referencing `noise`.

use std::collections::HashMap;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::scm::{Expr, Mechanism, NoiseSpec, Scm};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScmFile {
    target: String,
    nodes: Vec<NodeDecl>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDecl {
    name: String,
    #[serde(default)]
    parents: Vec<String>,
    mechanism: String,
    #[serde(default)]
    noise: Option<String>,
}

/// Parse an SCM from its TOML description.
pub fn parse_scm_toml(text: &str) -> Result<Scm> {
    let file: ScmFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let names: Vec<&str> = file.nodes.iter().map(|n| n.name.as_str()).collect();
    let mut edges = Vec::new();
    for node in &file.nodes {
        for p in &node.parents {
            edges.push((p.as_str(), node.name.as_str()));
        }
    }
    let graph = CausalGraph::new(&names, &edges, &file.target)?;

    let mut mechanisms = HashMap::new();
    for node in &file.nodes {
        let noise = node.noise.as_deref().map(NoiseSpec::parse).transpose()?;
        let text = node.mechanism.trim();
        let m = if text.eq_ignore_ascii_case("exogenous") {
            let spec = noise.ok_or_else(|| {
                Error::Parse(format!(
                    "node `{}`: exogenous mechanism requires a noise spec",
                    node.name
                ))
            })?;
            Mechanism::Exogenous(spec)
        } else if let Some(inner) = text
            .strip_prefix("bernoulli(")
            .and_then(|t| t.strip_suffix(')'))
        {
            if noise.is_some() {
                return Err(Error::Parse(format!(
                    "node `{}`: bernoulli mechanisms take no separate noise spec",
                    node.name
                )));
            }
            Mechanism::Bernoulli {
                prob: Expr::parse(inner)?,
            }
        } else {
            Mechanism::Assign {
                expr: Expr::parse(text)?,
                noise,
            }
        };
        mechanisms.insert(node.name.clone(), m);
    }
    Scm::new(graph, mechanisms)
}
