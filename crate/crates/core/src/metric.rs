//! A Riemannian metric generated by a pair of vector fields and their
//! iterated Lie brackets.
//!
//! At each point the five vectors `X, Y, Z = [X, Y], W₁ = [X, Z], W₂ = [Y, Z]`
//! are stacked as the columns of a `2 × 5` matrix with rows `s₁, s₂`. A
//! vector `V` is written as `Σ uᵢ·vᵢ` with the least-norm coefficient vector
//! `u_V`, and `|V| = |u_V|₂`. Equivalently `G = (S Sᵀ)⁻¹`.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::fields::{FieldError, Mat2, Metric, Rect, Vec2, VectorField};

pub type Vec5 = SVector<f64, 5>;
pub type Frame5 = SMatrix<f64, 2, 5>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("bracket frame does not span at ({x}, {y}): r4 = {r4:e}")]
    Degenerate { x: f64, y: f64, r4: f64 },
}

/// `[X, Y] = DY·X − DX·Y`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    let comp = |i: usize| {
        let mut acc = Expr::from(0.0);
        for j in 0..2 {
            acc = acc + y.jacobian_entry(i, j).clone() * x.component(j).clone()
                - x.jacobian_entry(i, j).clone() * y.component(j).clone();
        }
        acc
    };
    VectorField::from_exprs(comp(0), comp(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketFrame {
    pub x: VectorField,
    pub y: VectorField,
    pub z: VectorField,
    pub w1: VectorField,
    pub w2: VectorField,
}

impl BracketFrame {
    pub fn new(x: &VectorField, y: &VectorField) -> Self {
        let z = lie_bracket(x, y);
        let w1 = lie_bracket(x, &z);
        let w2 = lie_bracket(y, &z);
        BracketFrame {
            x: x.clone(),
            y: y.clone(),
            z,
            w1,
            w2,
        }
    }

    pub fn fields(&self) -> [&VectorField; 5] {
        [&self.x, &self.y, &self.z, &self.w1, &self.w2]
    }

    /// The `2 × 5` matrix whose rows are `s₁` and `s₂`.
    pub fn matrix(&self, p: Vec2) -> Result<Frame5, FieldError> {
        let mut m = Frame5::zeros();
        for (k, f) in self.fields().into_iter().enumerate() {
            m.set_column(k, &f.eval(p)?);
        }
        Ok(m)
    }

    pub fn rows(&self, p: Vec2) -> Result<(Vec5, Vec5), FieldError> {
        let m = self.matrix(p)?;
        Ok((m.row(0).transpose(), m.row(1).transpose()))
    }

    /// `r⁴ = |s₁|²|s₂|² − ⟨s₁, s₂⟩²`.
    pub fn r4(&self, p: Vec2) -> Result<f64, FieldError> {
        let (s1, s2) = self.rows(p)?;
        Ok(gram_r4(&s1, &s2).0)
    }
}

fn gram_r4(s1: &Vec5, s2: &Vec5) -> (f64, f64, f64, f64) {
    let (a, b, c) = (s1.norm_squared(), s2.norm_squared(), s1.dot(s2));
    (a * b - c * c, a, b, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Span {
    Spans { r4: f64 },
    Degenerate { r4: f64 },
}

impl Span {
    pub fn spans(&self) -> bool {
        matches!(self, Span::Spans { .. })
    }
}

pub fn span_check(frame: &BracketFrame, p: Vec2) -> Result<Span, FieldError> {
    let (s1, s2) = frame.rows(p)?;
    let (r4, a, b, _) = gram_r4(&s1, &s2);
    Ok(if r4 > 1e-12 * a * b {
        Span::Spans { r4 }
    } else {
        Span::Degenerate { r4 }
    })
}

/// Least-norm `u` with `⟨u, s₁⟩ = V₁` and `⟨u, s₂⟩ = V₂`, and its length.
pub fn min_norm_coeffs(frame: &BracketFrame, p: Vec2, v: Vec2) -> Result<(Vec5, f64), MetricError> {
    let (s1, s2) = frame.rows(p)?;
    let (r4, a, b, c) = gram_r4(&s1, &s2);
    if r4.is_nan() || r4 <= 1e-12 * a * b {
        return Err(MetricError::Degenerate { x: p.x, y: p.y, r4 });
    }
    let u = s1 * ((v.x * b - v.y * c) / r4) + s2 * ((v.y * a - v.x * c) / r4);
    let n = u.norm();
    Ok((u, n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltMetric {
    pub frame: BracketFrame,
}

pub fn build_metric(x: &VectorField, y: &VectorField) -> BuiltMetric {
    BuiltMetric {
        frame: BracketFrame::new(x, y),
    }
}

impl BuiltMetric {
    pub fn norm(&self, p: Vec2, v: Vec2) -> Result<f64, MetricError> {
        Ok(min_norm_coeffs(&self.frame, p, v)?.1)
    }

    /// Inner product by polarization of the norm.
    pub fn inner(&self, p: Vec2, v: Vec2, w: Vec2) -> Result<f64, MetricError> {
        let sum = self.norm(p, v + w)?.powi(2);
        Ok(0.5 * (sum - self.norm(p, v)?.powi(2) - self.norm(p, w)?.powi(2)))
    }

    pub fn at(&self, p: Vec2) -> Result<Mat2, MetricError> {
        let (e1, e2) = (Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
        let g11 = self.norm(p, e1)?.powi(2);
        let g22 = self.norm(p, e2)?.powi(2);
        let g12 = self.inner(p, e1, e2)?;
        let g = Mat2::new(g11, g12, g12, g22);
        if !(g11 > 0.0 && g.determinant() > 0.0) {
            return Err(MetricError::Degenerate {
                x: p.x,
                y: p.y,
                r4: self.frame.r4(p)?,
            });
        }
        Ok(g)
    }

    /// The same metric as expressions, `G = (S Sᵀ)⁻¹`, for use wherever a
    /// [`Metric`] is expected.
    pub fn to_metric(&self) -> Metric {
        let fields = self.frame.fields();
        let dot = |i: usize, j: usize| {
            fields.iter().fold(Expr::from(0.0), |acc, f| {
                acc + f.component(i).clone() * f.component(j).clone()
            })
        };
        let (a, b, c) = (dot(0, 0), dot(1, 1), dot(0, 1));
        let r4 = a.clone() * b.clone() - c.clone() * c.clone();
        Metric {
            g11: b / r4.clone(),
            g12: -c / r4.clone(),
            g22: a / r4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSamplePoint {
    pub point: [f64; 2],
    pub r4: f64,
    /// `[g11, g12, g22]`, absent where the frame degenerates.
    pub g: Option<[f64; 3]>,
    pub parallelogram_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub points: Vec<MetricSamplePoint>,
    pub spd_fraction: f64,
    pub max_parallelogram_residual: f64,
}

/// Evaluates the built metric at the centres of an `n × n` grid.
pub fn sample_metric(m: &BuiltMetric, rect: &Rect, n: usize) -> Result<MetricSample, FieldError> {
    let n = n.max(1);
    let (hx, hy) = (rect.width() / n as f64, rect.height() / n as f64);
    let (v, w) = (Vec2::new(0.6, -0.3), Vec2::new(0.2, 0.9));
    let mut points = Vec::with_capacity(n * n);
    let mut max_res: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let p = Vec2::new(
                rect.min[0] + (i as f64 + 0.5) * hx,
                rect.min[1] + (j as f64 + 0.5) * hy,
            );
            let r4 = m.frame.r4(p)?;
            let (g, res) = match m.at(p) {
                Ok(g) => {
                    let nn = |u: Vec2| m.norm(p, u).map(|x| x * x);
                    let res = (|| -> Result<f64, MetricError> {
                        let lhs = nn(v + w)? + nn(v - w)?;
                        let rhs = 2.0 * nn(v)? + 2.0 * nn(w)?;
                        Ok((lhs - rhs).abs() / rhs.max(f64::MIN_POSITIVE))
                    })()
                    .ok();
                    if let Some(r) = res {
                        max_res = max_res.max(r);
                    }
                    (Some([g[(0, 0)], g[(0, 1)], g[(1, 1)]]), res)
                }
                Err(MetricError::Degenerate { .. }) => (None, None),
                Err(MetricError::Field(e)) => return Err(e),
            };
            points.push(MetricSamplePoint {
                point: [p.x, p.y],
                r4,
                g,
                parallelogram_residual: res,
            });
        }
    }
    let spd = points.iter().filter(|s| s.g.is_some()).count();
    Ok(MetricSample {
        spd_fraction: spd as f64 / points.len() as f64,
        points,
        max_parallelogram_residual: max_res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> (VectorField, VectorField) {
        (
            VectorField::parse("1", "0").unwrap(),
            VectorField::parse("0", "1 + x").unwrap(),
        )
    }

    #[test]
    fn bracket_examples() {
        let (x, y) = worked();
        let z = lie_bracket(&x, &y);
        for p in [Vec2::new(0.3, -0.2), Vec2::new(-1.0, 2.0)] {
            assert_eq!(z.eval(p).unwrap(), Vec2::new(0.0, 1.0));
            assert_eq!(lie_bracket(&x, &x).eval(p).unwrap(), Vec2::zeros());
        }
        let a = VectorField::parse("y", "0").unwrap();
        let b = VectorField::parse("0", "x").unwrap();
        let p = Vec2::new(0.7, -0.4);
        assert_eq!(lie_bracket(&a, &b).eval(p).unwrap(), Vec2::new(-p.x, p.y));
    }

    #[test]
    fn worked_pair() {
        let (x, y) = worked();
        let m = build_metric(&x, &y);
        let g = m.at(Vec2::zeros()).unwrap();
        assert!((g - Mat2::new(1.0, 0.0, 0.0, 0.5)).norm() <= 1e-12);
        assert_eq!(
            span_check(&m.frame, Vec2::zeros()).unwrap(),
            Span::Spans { r4: 2.0 }
        );
        let (u, n) = min_norm_coeffs(&m.frame, Vec2::zeros(), Vec2::new(0.0, 1.0)).unwrap();
        assert!((u - Vec5::new(0.0, 0.5, 0.5, 0.0, 0.0)).norm() < 1e-15);
        assert!((n * n - 0.5).abs() < 1e-15);
        let p = Vec2::new(0.4, 0.0);
        let g = m.at(p).unwrap();
        assert!((g[(1, 1)] - 1.0 / (1.4f64.powi(2) + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_polarization() {
        let x = VectorField::parse("1 + y^2", "x").unwrap();
        let y = VectorField::parse("sin(y)", "1 - x*y").unwrap();
        let m = build_metric(&x, &y);
        let closed = m.to_metric();
        for p in [Vec2::new(0.1, 0.2), Vec2::new(-0.5, 0.7)] {
            let a = m.at(p).unwrap();
            let b = closed.at(p).unwrap();
            assert!((a - b).norm() < 1e-10 * a.norm());
        }
    }

    #[test]
    fn identical_fields_degenerate() {
        let (x, _) = worked();
        let m = build_metric(&x, &x);
        assert!(!span_check(&m.frame, Vec2::zeros()).unwrap().spans());
        assert!(matches!(
            m.at(Vec2::zeros()),
            Err(MetricError::Degenerate { .. })
        ));
        let s = sample_metric(&m, &Rect::square(1.0), 4).unwrap();
        assert_eq!(s.spd_fraction, 0.0);
    }

    #[test]
    fn bracket_free_scaling() {
        let x = VectorField::parse("1", "0").unwrap();
        let y = VectorField::parse("0", "2").unwrap();
        let g = build_metric(&x, &y).at(Vec2::zeros()).unwrap();
        let g2 = build_metric(&x.scaled(2.0), &y.scaled(2.0))
            .at(Vec2::zeros())
            .unwrap();
        assert!((g2 - g / 4.0).norm() < 1e-15);
    }
}
