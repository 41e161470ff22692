//! JSON scenario files.

use std::path::Path;

use protoline::expr::{self, Expr};
use protoline::fields::{Domain, Metric, ProtoLineField, Rect, Vec2, VectorField};
use protoline::portrait::{PortraitOptions, Seeds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    /// Components of `X`.
    #[serde(default)]
    pub x: Option<[String; 2]>,
    /// Components of `Y`.
    #[serde(default)]
    pub y: Option<[String; 2]>,
    /// Draws `X` and `Y` as random polynomials instead.
    #[serde(default)]
    pub random: Option<RandomPair>,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    pub domain: DomainSpec,
    #[serde(default)]
    pub parameter: Option<Parameter>,
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub portrait: PortraitSpec,
    #[serde(default)]
    pub index: Option<IndexSpec>,
    #[serde(default)]
    pub blowup: BlowupSpec,
    #[serde(default)]
    pub scan: Option<ScanSpec>,
    #[serde(default)]
    pub sample: SampleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub g11: String,
    pub g12: String,
    pub g22: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    /// `[xmin, xmax, ymin, ymax]`.
    Box([f64; 4]),
    Torus {
        origin: [f64; 2],
        periods: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPair {
    pub degree: u32,
    /// Coefficients are uniform in `[-scale, scale]`.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortraitSpec {
    pub step: f64,
    pub max_len: f64,
    pub seed_grid: usize,
    pub seed_points: Option<Vec<[f64; 2]>>,
    pub separation: Option<f64>,
    pub skeleton_r0: f64,
}

impl Default for PortraitSpec {
    fn default() -> Self {
        let d = PortraitOptions::default();
        PortraitSpec {
            step: d.step,
            max_len: d.max_len,
            seed_grid: 20,
            seed_points: None,
            separation: d.separation,
            skeleton_r0: d.skeleton_r0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSpec {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    256
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupSpec {
    pub delta: f64,
    pub radii: usize,
    pub thetas: usize,
}

impl Default for BlowupSpec {
    fn default() -> Self {
        BlowupSpec {
            delta: 0.5,
            radii: 16,
            thetas: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub range: Option<SweepRange>,
    #[serde(default)]
    pub point: [f64; 2],
    /// Radius of the raw coordinate ray map.
    #[serde(default = "default_ray_radius")]
    pub radius: f64,
}

fn default_ray_radius() -> f64 {
    1.0
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSpec {
    /// Metric samples per side.
    pub n: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { n: 20 }
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config(format!("`{name}` must be positive, got {v}")))
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.x, &self.y, &self.random) {
            (Some(_), Some(_), None) => {}
            (None, None, Some(r)) => positive("random.scale", r.scale)?,
            _ => return Err(config("give either both `x` and `y` or `random`")),
        }
        match self.domain {
            DomainSpec::Box([x0, x1, y0, y1]) => {
                if !(x0 < x1 && y0 < y1) {
                    return Err(config("box must be nonempty"));
                }
            }
            DomainSpec::Torus { periods, .. } => {
                positive("torus.periods", periods[0])?;
                positive("torus.periods", periods[1])?;
            }
        }
        if self.grid == Some(0) {
            return Err(config("`grid` must be positive"));
        }
        let p = &self.portrait;
        positive("portrait.step", p.step)?;
        positive("portrait.max_len", p.max_len)?;
        positive("portrait.skeleton_r0", p.skeleton_r0)?;
        if let Some(s) = p.separation {
            positive("portrait.separation", s)?;
        }
        if let Some(ix) = &self.index {
            positive("index.radius", ix.radius)?;
            if ix.samples == 0 {
                return Err(config("`index.samples` must be positive"));
            }
        }
        positive("blowup.delta", self.blowup.delta)?;
        if self.blowup.radii < 2 || self.blowup.thetas < 8 {
            return Err(config("blowup grid too small"));
        }
        if let Some(scan) = &self.scan {
            positive("scan.radius", scan.radius)?;
            if self.parameter.is_none() {
                return Err(config("`scan` needs a `parameter`"));
            }
            if scan.values.is_some() == scan.range.is_some() {
                return Err(config("`scan` needs exactly one of `values` and `range`"));
            }
            if let Some(r) = scan.range {
                if r.count == 0 {
                    return Err(config("`scan.range.count` must be positive"));
                }
            }
        }
        if self.sample.n == 0 {
            return Err(config("`sample.n` must be positive"));
        }
        // Parse once with the default parameter value to surface syntax errors early.
        self.vector_fields(None, DEFAULT_SEED)?;
        self.parsed_metric(None)?;
        Ok(())
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or("scenario")
    }

    pub fn domain(&self) -> Domain {
        match self.domain {
            DomainSpec::Box([x0, x1, y0, y1]) => Domain::Rect(Rect::new(x0, x1, y0, y1)),
            DomainSpec::Torus { origin, periods } => Domain::Torus {
                origin: Vec2::new(origin[0], origin[1]),
                periods: Vec2::new(periods[0], periods[1]),
            },
        }
    }

    /// Current parameter value, overridden by `value` when given.
    pub fn param(&self, value: Option<f64>) -> Option<(String, f64)> {
        self.parameter
            .as_ref()
            .map(|p| (p.name.clone(), value.unwrap_or(p.value)))
    }

    fn parse(&self, text: &str, value: Option<f64>) -> Result<Expr, CliError> {
        let param = self.param(value);
        let consts: Vec<(&str, f64)> = param.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        expr::parse_with(text, &consts).map_err(|e| config(format!("`{text}`: {e}")))
    }

    pub fn vector_fields(
        &self,
        value: Option<f64>,
        seed: u64,
    ) -> Result<(VectorField, VectorField), CliError> {
        let (xs, ys) = match (&self.x, &self.y, &self.random) {
            (Some(x), Some(y), _) => (x.clone(), y.clone()),
            (_, _, Some(r)) => random_pair(r, seed),
            _ => return Err(config("missing fields")),
        };
        let build = |c: &[String; 2]| -> Result<VectorField, CliError> {
            VectorField::new(self.parse(&c[0], value)?, self.parse(&c[1], value)?)
                .map_err(|e| config(e.to_string()))
        };
        Ok((build(&xs)?, build(&ys)?))
    }

    fn parsed_metric(&self, value: Option<f64>) -> Result<Metric, CliError> {
        match &self.metric {
            None => Ok(Metric::euclidean()),
            Some(m) => Ok(Metric {
                g11: self.parse(&m.g11, value)?,
                g12: self.parse(&m.g12, value)?,
                g22: self.parse(&m.g22, value)?,
            }),
        }
    }

    pub fn field(&self, value: Option<f64>, seed: u64) -> Result<ProtoLineField, CliError> {
        let (x, y) = self.vector_fields(value, seed)?;
        let metric = self.parsed_metric(value)?;
        ProtoLineField::new(x, y, metric, self.domain()).map_err(|e| config(e.to_string()))
    }

    pub fn portrait_options(&self, grid: usize) -> PortraitOptions {
        let p = &self.portrait;
        PortraitOptions {
            step: p.step,
            max_len: p.max_len,
            seeds: match &p.seed_points {
                Some(pts) => Seeds::List(pts.clone()),
                None => Seeds::Grid(p.seed_grid),
            },
            separation: p.separation,
            skeleton_r0: p.skeleton_r0,
            zero_grid: grid,
        }
    }

    pub fn scan_values(&self) -> Result<Vec<f64>, CliError> {
        let scan = self
            .scan
            .as_ref()
            .ok_or_else(|| config("scenario has no `scan` section"))?;
        if let Some(v) = &scan.values {
            return Ok(v.clone());
        }
        let r = scan.range.expect("validated");
        if r.count == 1 {
            return Ok(vec![r.start]);
        }
        let h = (r.stop - r.start) / (r.count - 1) as f64;
        Ok((0..r.count).map(|k| r.start + h * k as f64).collect())
    }
}

/// Polynomial components `Σ c_ij x^i y^j` over `i + j ≤ degree`.
fn random_pair(spec: &RandomPair, seed: u64) -> ([String; 2], [String; 2]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut poly = || {
        let mut terms = Vec::new();
        for total in 0..=spec.degree {
            for i in 0..=total {
                let c: f64 = rng.gen_range(-spec.scale..=spec.scale);
                let j = total - i;
                let mut t = format!("({c})");
                if i > 0 {
                    t.push_str(&format!("*x^{i}"));
                }
                if j > 0 {
                    t.push_str(&format!("*y^{j}"));
                }
                terms.push(t);
            }
        }
        terms.join(" + ")
    };
    let x = [poly(), poly()];
    let y = [poly(), poly()];
    (x, y)
}
