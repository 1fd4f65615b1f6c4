//! Built-in study reproductions: the breakfast suppressor model, the
//! diabetes-risk model, the random linear-SCM sweep, and the discrete
//! pipeline, each with the analytic or oracle checks it owns.

mod breakfast;
mod diabetes;
mod discrete;
mod sweep;

pub use breakfast::{analytic_breakfast_posterior, run_breakfast, BreakfastReport};
pub use diabetes::{run_diabetes_risk, DiabetesReport};
pub use discrete::{
    fig_topology_graph, run_discrete_pipeline, synthetic_discrete_scm, DiscreteReport,
};
pub use sweep::{run_linear_sweep, SweepRecord, SweepReport};

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::attribution::AttributionResult;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scm::{parse_scm_toml, Scm};

/// Identifier of a built-in structural causal model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// Suppressor triple: cycling C, diabetes Y, glucose G = 85 + 0.4 C +
    /// 40 Y + noise. C and Y are independent; G is their common effect.
    Breakfast,
    /// Four-variable model where body weight B drives diabetes risk Y,
    /// insulin resistance H, and glucose G.
    DiabetesRisk,
    /// Two independent fair binary inputs with Y = X1 * X2.
    BinaryProduct,
}

const BREAKFAST_TOML: &str = r#"
target = "Y"

[[nodes]]
name = "C"
mechanism = "exogenous"
noise = "normal(60, 25)"

[[nodes]]
name = "Y"
mechanism = "bernoulli(0.15)"

[[nodes]]
name = "G"
parents = ["C", "Y"]
mechanism = "85 + 0.4*C + 40*Y + noise"
noise = "normal(0, 100)"
"#;

const DIABETES_RISK_TOML: &str = r#"
target = "Y"

[[nodes]]
name = "B"
mechanism = "exogenous"
noise = "normal(25, 5)"

[[nodes]]
name = "Y"
parents = ["B"]
mechanism = "bernoulli(sigmoid(-2 + 0.1*(B - 25)))"

[[nodes]]
name = "H"
parents = ["B", "Y"]
mechanism = "5 + 10*Y + 0.01*square(B) + noise"
noise = "normal(0, 1)"

[[nodes]]
name = "G"
parents = ["B", "H", "Y"]
mechanism = "90 + 20*Y + 30*sigmoid(-0.5*(H - 5)) + B + noise"
noise = "normal(0, 5)"
"#;

const BINARY_PRODUCT_TOML: &str = r#"
target = "Y"

[[nodes]]
name = "X1"
mechanism = "exogenous"
noise = "bernoulli(0.5)"

[[nodes]]
name = "X2"
mechanism = "exogenous"
noise = "bernoulli(0.5)"

[[nodes]]
name = "Y"
parents = ["X1", "X2"]
mechanism = "X1 * X2"
"#;

impl Builtin {
    pub fn parse(name: &str) -> Result<Builtin> {
        match name.trim().to_ascii_lowercase().as_str() {
            "breakfast" => Ok(Builtin::Breakfast),
            "diabetes-risk" | "diabetes_risk" | "diabetes" => Ok(Builtin::DiabetesRisk),
            "binary-product" | "binary_product" => Ok(Builtin::BinaryProduct),
            other => Err(Error::InvalidArgument(format!(
                "unknown builtin model `{other}`; expected breakfast, diabetes-risk, or \
                 binary-product"
            ))),
        }
    }

    /// The model's declarative description.
    pub fn toml(&self) -> &'static str {
        match self {
            Builtin::Breakfast => BREAKFAST_TOML,
            Builtin::DiabetesRisk => DIABETES_RISK_TOML,
            Builtin::BinaryProduct => BINARY_PRODUCT_TOML,
        }
    }

    pub fn scm(&self) -> Scm {
        parse_scm_toml(self.toml()).expect("builtin models parse")
    }
}

/// One pass/fail line of an experiment's self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

impl CheckLine {
    pub fn new(name: &str, detail: String, pass: bool) -> Self {
        CheckLine {
            name: name.to_string(),
            detail,
            pass,
        }
    }

    pub fn render(&self) -> String {
        format!(
            "[{}] {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Write the standard result files for one or two attribution results:
/// `attributions.csv` (long format, both methods), `contexts.csv` (with a
/// leading method column), and `plan.txt`.
pub fn write_results(dir: &Path, results: &[&AttributionResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut attr = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut attr);
        wtr.write_record(["row_id", "feature", "mode", "phi", "feature_value"])?;
        for r in results {
            for row in 0..r.n_rows() {
                for (fi, feature) in r.features.iter().enumerate() {
                    wtr.write_record([
                        row.to_string(),
                        feature.clone(),
                        r.method.to_string(),
                        format!("{}", r.phi[fi][row]),
                        format!("{}", r.eval.value(row, feature)?),
                    ])?;
                }
            }
        }
        wtr.flush()?;
    }
    fs::write(dir.join("attributions.csv"), attr)?;

    let mut ctx = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut ctx);
        wtr.write_record([
            "method", "feature", "context", "mode", "weight", "row_id", "importance",
        ])?;
        for r in results {
            for c in &r.contexts {
                for (row, v) in c.values.iter().enumerate() {
                    wtr.write_record([
                        r.method.to_string(),
                        c.feature.clone(),
                        crate::attribution::context_label(&c.context),
                        c.mode.to_string(),
                        format!("{}", c.weight.value()),
                        row.to_string(),
                        format!("{v}"),
                    ])?;
                }
            }
        }
        wtr.flush()?;
    }
    fs::write(dir.join("contexts.csv"), ctx)?;

    let plan: String = results.iter().map(|r| r.plan_text()).collect();
    write_text(&dir.join("plan.txt"), &plan)?;
    Ok(())
}

/// A rectangular heatmap grid of one importance function over two axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x_name: String,
    pub y_name: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[yi][xi]`.
    pub values: Vec<Vec<f64>>,
}

impl Grid {
    /// Equal-width grid over the central 99% quantile range of each column.
    pub fn from_quantiles(
        d: &Dataset,
        x_name: &str,
        y_name: &str,
        cells: usize,
    ) -> Result<Grid> {
        let (x_lo, x_hi) = central_range(d.column(x_name)?);
        let (y_lo, y_hi) = central_range(d.column(y_name)?);
        let axis = |lo: f64, hi: f64| -> Vec<f64> {
            (0..cells)
                .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / cells as f64)
                .collect()
        };
        Ok(Grid {
            x_name: x_name.to_string(),
            y_name: y_name.to_string(),
            xs: axis(x_lo, x_hi),
            ys: axis(y_lo, y_hi),
            values: vec![vec![0.0; cells]; cells],
        })
    }

    /// Evaluate `f(x, y)` at every grid point.
    pub fn fill<F: FnMut(f64, f64) -> Result<f64>>(&mut self, mut f: F) -> Result<()> {
        for (yi, y) in self.ys.iter().enumerate() {
            for (xi, x) in self.xs.iter().enumerate() {
                self.values[yi][xi] = f(*x, *y)?;
            }
        }
        Ok(())
    }

    /// Largest absolute difference to another grid over the same axes.
    pub fn max_abs_diff(&self, other: &Grid) -> f64 {
        let mut m: f64 = 0.0;
        for (a, b) in self.values.iter().flatten().zip(other.values.iter().flatten()) {
            m = m.max((a - b).abs());
        }
        m
    }

    /// CSV matrix: first row is the x axis, first column the y axis.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("{}\\{}", self.y_name, self.x_name));
        for x in &self.xs {
            out.push_str(&format!(",{x}"));
        }
        out.push('\n');
        for (yi, y) in self.ys.iter().enumerate() {
            out.push_str(&format!("{y}"));
            for v in &self.values[yi] {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        write_text(path, &out)
    }
}

/// 0.5%..99.5% quantile range of a column.
pub(crate) fn central_range(col: &[f64]) -> (f64, f64) {
    let mut sorted = col.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let q = |p: f64| sorted[((p * (n - 1) as f64).round() as usize).min(n - 1)];
    (q(0.005), q(0.995))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_sample() {
        for b in [Builtin::Breakfast, Builtin::DiabetesRisk, Builtin::BinaryProduct] {
            let m = b.scm();
            m.sample(100, 1).unwrap();
        }
        assert_eq!(Builtin::parse("diabetes-risk").unwrap(), Builtin::DiabetesRisk);
        assert!(Builtin::parse("nope").is_err());
    }

    #[test]
    fn breakfast_matches_its_closed_form() {
        let m = Builtin::Breakfast.scm();
        let d = m.sample(50_000, 2).unwrap();
        let c = d.column("C").unwrap();
        let y = d.column("Y").unwrap();
        let g = d.column("G").unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean(c) - 60.0).abs() < 0.2);
        assert!((mean(y) - 0.15).abs() < 0.01);
        // E[G] = 85 + 0.4*60 + 40*0.15 = 115.
        assert!((mean(g) - 115.0).abs() < 0.3);
    }

    #[test]
    fn grid_axes_cover_the_central_range() {
        let mut d = Dataset::new(&["a", "b"]).unwrap();
        for i in 0..1000 {
            d.push_row(&[i as f64, 2.0 * i as f64]).unwrap();
        }
        let g = Grid::from_quantiles(&d, "a", "b", 40).unwrap();
        assert_eq!(g.xs.len(), 40);
        assert!(g.xs[0] > 0.0 && g.xs[39] < 999.0);
    }
}
