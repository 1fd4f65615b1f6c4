//! Noise distributions for exogenous terms. `Normal(mean, variance)` uses
//! variance semantics for its second parameter throughout.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    Normal { mean: f64, variance: f64 },
    Laplace { location: f64, scale: f64 },
    Bernoulli { p: f64 },
    Uniform { lo: f64, hi: f64 },
    Categorical { probs: Vec<f64> },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseSpec::Normal { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() || *variance < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "normal({mean}, {variance}): variance must be finite and >= 0"
                    )));
                }
            }
            NoiseSpec::Laplace { location, scale } => {
                if !location.is_finite() || !scale.is_finite() || *scale <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "laplace({location}, {scale}): scale must be finite and > 0"
                    )));
                }
            }
            NoiseSpec::Bernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidArgument(format!(
                        "bernoulli({p}): p must lie in [0, 1]"
                    )));
                }
            }
            NoiseSpec::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    return Err(Error::InvalidArgument(format!(
                        "uniform({lo}, {hi}): requires lo <= hi"
                    )));
                }
            }
            NoiseSpec::Categorical { probs } => {
                if probs.is_empty() || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::InvalidArgument(
                        "categorical: probabilities must lie in [0, 1]".into(),
                    ));
                }
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "categorical: probabilities sum to {sum}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Draw one value. Bernoulli yields 0/1, categorical the category index.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSpec::Normal { mean, variance } => {
                if *variance == 0.0 {
                    *mean
                } else {
                    Normal::new(*mean, variance.sqrt()).unwrap().sample(rng)
                }
            }
            NoiseSpec::Laplace { location, scale } => {
                // Inverse-CDF transform of a symmetric uniform draw.
                let u: f64 = rng.random::<f64>() - 0.5;
                location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            NoiseSpec::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseSpec::Uniform { lo, hi } => {
                if lo == hi {
                    *lo
                } else {
                    rng.random_range(*lo..*hi)
                }
            }
            NoiseSpec::Categorical { probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i as f64;
                    }
                }
                (probs.len() - 1) as f64
            }
        }
    }

    /// Parse forms like `normal(60, 25)`, `laplace(0, 0.1)`,
    /// `bernoulli(0.15)`, `uniform(0, 1)`, `categorical(0.2, 0.5, 0.3)`.
    pub fn parse(text: &str) -> Result<NoiseSpec> {
        let text = text.trim();
        let open = text
            .find('(')
            .ok_or_else(|| Error::Parse(format!("noise spec `{text}`: expected `name(args)`")))?;
        if !text.ends_with(')') {
            return Err(Error::Parse(format!("noise spec `{text}`: missing `)`")));
        }
        let name = text[..open].trim().to_ascii_lowercase();
        let args: Vec<f64> = text[open + 1..text.len() - 1]
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("noise spec `{text}`: bad number `{a}`")))
            })
            .collect::<Result<_>>()?;
        let argn = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!(
                    "noise spec `{text}`: expected {n} arguments, got {}",
                    args.len()
                )))
            }
        };
        let spec = match name.as_str() {
            "normal" => {
                argn(2)?;
                NoiseSpec::Normal {
                    mean: args[0],
                    variance: args[1],
                }
            }
            "laplace" => {
                argn(2)?;
                NoiseSpec::Laplace {
                    location: args[0],
                    scale: args[1],
                }
            }
            "bernoulli" => {
                argn(1)?;
                NoiseSpec::Bernoulli { p: args[0] }
            }
            "uniform" => {
                argn(2)?;
                NoiseSpec::Uniform {
                    lo: args[0],
                    hi: args[1],
                }
            }
            "categorical" => NoiseSpec::Categorical { probs: args },
            other => {
                return Err(Error::Parse(format!(
                    "unknown noise distribution `{other}`"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Normal { mean, variance } => write!(f, "normal({mean}, {variance})"),
            NoiseSpec::Laplace { location, scale } => write!(f, "laplace({location}, {scale})"),
            NoiseSpec::Bernoulli { p } => write!(f, "bernoulli({p})"),
            NoiseSpec::Uniform { lo, hi } => write!(f, "uniform({lo}, {hi})"),
            NoiseSpec::Categorical { probs } => {
                let parts: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
                write!(f, "categorical({})", parts.join(", "))
            }
        }
    }
}
