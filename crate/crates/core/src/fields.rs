//! Vector fields, metrics, angles and the bisector line field.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, EvalError, Expr, ParseError, Var};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Relative threshold below which a field value counts as vanishing.
pub const VANISHING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("metric is not positive definite at ({x}, {y})")]
    NotPositiveDefinite { x: f64, y: f64 },
    #[error("field vanishes at ({x}, {y}); bisector undefined")]
    Singular { x: f64, y: f64 },
    #[error("zero vector has no angle")]
    ZeroVector,
    #[error("symbolic Jacobian entry d{component}/d{var} disagrees with finite differences at ({x}, {y})")]
    JacobianMismatch {
        component: usize,
        var: char,
        x: f64,
        y: f64,
    },
    #[error("empty domain")]
    EmptyDomain,
    #[error("`{expr}` is not periodic with the torus periods")]
    NotPeriodic { expr: String },
    #[error("realization fails at ({x}, {y}): {reason}")]
    Realization { x: f64, y: f64, reason: String },
}

fn wrap(v: f64, period: f64) -> f64 {
    let r = v.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Angle of a vector, in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct VecAngle(f64);

impl VecAngle {
    pub fn new(theta: f64) -> Self {
        VecAngle(wrap(theta, TAU))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Angle of an unoriented line, in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LineAngle(f64);

impl LineAngle {
    pub fn new(theta: f64) -> Self {
        LineAngle(wrap(theta, PI))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Signed distance to `other` mod π, in `[-π/2, π/2)`.
    pub fn diff(self, other: LineAngle) -> f64 {
        wrap(self.0 - other.0 + PI / 2.0, PI) - PI / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    comps: [Expr; 2],
    jac: [[Expr; 2]; 2],
}

impl VectorField {
    /// Builds the field and checks its symbolic Jacobian against central
    /// differences at ten seeded points of `[-1, 1]²`.
    pub fn new(x1: Expr, x2: Expr) -> Result<Self, FieldError> {
        let f = Self::from_exprs(x1, x2);
        f.verify_jacobian()?;
        Ok(f)
    }

    pub fn parse(x1: &str, x2: &str) -> Result<Self, FieldError> {
        Self::new(expr::parse(x1)?, expr::parse(x2)?)
    }

    pub(crate) fn from_exprs(x1: Expr, x2: Expr) -> Self {
        let jac = [
            [x1.diff(Var::X), x1.diff(Var::Y)],
            [x2.diff(Var::X), x2.diff(Var::Y)],
        ];
        VectorField {
            comps: [x1, x2],
            jac,
        }
    }

    pub fn linear(a: &Mat2) -> Self {
        let row = |i: usize| Expr::from(a[(i, 0)]) * Expr::x() + Expr::from(a[(i, 1)]) * Expr::y();
        Self::from_exprs(row(0), row(1))
    }

    pub fn constant(v: Vec2) -> Self {
        Self::from_exprs(Expr::from(v.x), Expr::from(v.y))
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.comps[i]
    }

    pub fn jacobian_entry(&self, i: usize, j: usize) -> &Expr {
        &self.jac[i][j]
    }

    pub fn eval(&self, p: Vec2) -> Result<Vec2, EvalError> {
        Ok(Vec2::new(
            self.comps[0].eval(p.x, p.y)?,
            self.comps[1].eval(p.x, p.y)?,
        ))
    }

    pub fn jacobian(&self, p: Vec2) -> Result<Mat2, EvalError> {
        let e = |i: usize, j: usize| self.jac[i][j].eval(p.x, p.y);
        Ok(Mat2::new(e(0, 0)?, e(0, 1)?, e(1, 0)?, e(1, 1)?))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_exprs(
            Expr::from(c) * self.comps[0].clone(),
            Expr::from(c) * self.comps[1].clone(),
        )
    }

    fn verify_jacobian(&self) -> Result<(), FieldError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6a61_636f);
        let h = 1e-5;
        for _ in 0..10 {
            let p = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            for (i, comp) in self.comps.iter().enumerate() {
                for (j, var) in [(0, 'x'), (1, 'y')] {
                    let dir = if j == 0 {
                        Vec2::new(h, 0.0)
                    } else {
                        Vec2::new(0.0, h)
                    };
                    let (q, r) = (p + dir, p - dir);
                    let vals = (
                        self.jac[i][j].eval(p.x, p.y),
                        comp.eval(q.x, q.y),
                        comp.eval(r.x, r.y),
                    );
                    let (Ok(sym), Ok(fp), Ok(fm)) = vals else {
                        continue;
                    };
                    let fd = (fp - fm) / (2.0 * h);
                    let tol = 1e-5 * (1.0 + sym.abs() + fp.abs().max(fm.abs()));
                    if (sym - fd).abs() > tol {
                        return Err(FieldError::JacobianMismatch {
                            component: i + 1,
                            var,
                            x: p.x,
                            y: p.y,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Riemannian metric `g11 dx² + 2 g12 dx dy + g22 dy²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub g11: Expr,
    pub g12: Expr,
    pub g22: Expr,
}

impl Metric {
    pub fn euclidean() -> Self {
        Metric {
            g11: Expr::from(1.0),
            g12: Expr::from(0.0),
            g22: Expr::from(1.0),
        }
    }

    /// `dx² + λ² dy²`.
    pub fn stretched(lambda: f64) -> Self {
        Metric {
            g11: Expr::from(1.0),
            g12: Expr::from(0.0),
            g22: Expr::from(lambda * lambda),
        }
    }

    pub fn constant(m: &Mat2) -> Self {
        Metric {
            g11: Expr::from(m[(0, 0)]),
            g12: Expr::from(m[(0, 1)]),
            g22: Expr::from(m[(1, 1)]),
        }
    }

    pub fn parse(g11: &str, g12: &str, g22: &str) -> Result<Self, FieldError> {
        Ok(Metric {
            g11: expr::parse(g11)?,
            g12: expr::parse(g12)?,
            g22: expr::parse(g22)?,
        })
    }

    pub fn is_euclidean(&self) -> bool {
        self.g11.as_const() == Some(1.0)
            && self.g12.as_const() == Some(0.0)
            && self.g22.as_const() == Some(1.0)
    }

    /// Gram matrix at `p`; errors unless symmetric positive definite.
    pub fn at(&self, p: Vec2) -> Result<Mat2, FieldError> {
        let a = self.g11.eval(p.x, p.y)?;
        let b = self.g12.eval(p.x, p.y)?;
        let c = self.g22.eval(p.x, p.y)?;
        if a <= 0.0 || a * c - b * b <= 1e-14 * (a * c).abs() {
            return Err(FieldError::NotPositiveDefinite { x: p.x, y: p.y });
        }
        Ok(Mat2::new(a, b, b, c))
    }
}

/// Positively oriented `g`-orthonormal frame whose first vector is a
/// positive multiple of `(1, 0)`; the columns of the returned matrix.
pub fn frame_of(g: &Mat2) -> Mat2 {
    let (a, b, c) = (g[(0, 0)], g[(0, 1)], g[(1, 1)]);
    let det = a * c - b * b;
    let e1 = Vec2::new(1.0 / a.sqrt(), 0.0);
    let w = Vec2::new(-b / a, 1.0);
    let e2 = w / (det / a).sqrt();
    Mat2::from_columns(&[e1, e2])
}

pub fn orthonormal_frame(g: &Metric, p: Vec2) -> Result<(Vec2, Vec2), FieldError> {
    let f = frame_of(&g.at(p)?);
    Ok((f.column(0).into(), f.column(1).into()))
}

/// Frame coordinates `(g(e1, v), g(e2, v))`.
pub fn frame_coords(g: &Mat2, frame: &Mat2, v: Vec2) -> Vec2 {
    frame.transpose() * (g * v)
}

/// Angle of `v` read in the `g`-orthonormal frame.
pub fn frame_angle(g: &Mat2, v: Vec2) -> Result<f64, FieldError> {
    let c = frame_coords(g, &frame_of(g), v);
    if c.x == 0.0 && c.y == 0.0 {
        return Err(FieldError::ZeroVector);
    }
    Ok(c.y.atan2(c.x))
}

/// Counter-clockwise `g`-angle from `v` to `w`.
pub fn angle_between(g: &Metric, p: Vec2, v: Vec2, w: Vec2) -> Result<VecAngle, FieldError> {
    let gm = g.at(p)?;
    Ok(VecAngle::new(frame_angle(&gm, w)? - frame_angle(&gm, v)?))
}

/// Bisector line of `x` and `y` for the Gram matrix `g`, as a frame angle.
pub fn bisector_of(g: &Mat2, x: Vec2, y: Vec2) -> Result<LineAngle, FieldError> {
    let ax = frame_angle(g, x)?;
    let ay = frame_angle(g, y)?;
    Ok(LineAngle::new(ax + 0.5 * wrap(ay - ax, TAU)))
}

/// Coordinate direction (unit Euclidean length) of the line with frame angle `b`.
pub fn line_direction(g: &Mat2, b: LineAngle) -> Vec2 {
    let f = frame_of(g);
    let (s, c) = b.value().sin_cos();
    let v = f * Vec2::new(c, s);
    v / v.norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Rect {
            min: [xmin, ymin],
            max: [xmax, ymax],
        }
    }

    pub fn square(half: f64) -> Self {
        Rect::new(-half, half, -half, half)
    }

    pub fn around(c: Vec2, half: f64) -> Self {
        Rect::new(c.x - half, c.x + half, c.y - half, c.y + half)
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn is_empty(&self) -> bool {
        !(self.width() > 0.0 && self.height() > 0.0)
    }

    pub fn contains(&self, p: Vec2, slack: f64) -> bool {
        p.x >= self.min[0] - slack
            && p.x <= self.max[0] + slack
            && p.y >= self.min[1] - slack
            && p.y <= self.max[1] + slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Rect(Rect),
    /// `[origin, origin + periods)` with opposite sides identified.
    Torus {
        origin: Vec2,
        periods: Vec2,
    },
}

impl Domain {
    pub fn bounds(&self) -> Rect {
        match self {
            Domain::Rect(r) => *r,
            Domain::Torus { origin, periods } => Rect::new(
                origin.x,
                origin.x + periods.x,
                origin.y,
                origin.y + periods.y,
            ),
        }
    }

    /// Reduces `p` into the fundamental domain (identity on rectangles).
    pub fn reduce(&self, p: Vec2) -> Vec2 {
        match self {
            Domain::Rect(_) => p,
            Domain::Torus { origin, periods } => Vec2::new(
                origin.x + wrap(p.x - origin.x, periods.x),
                origin.y + wrap(p.y - origin.y, periods.y),
            ),
        }
    }

    /// Distance between `p` and `q`, taking periodic images into account.
    pub fn distance(&self, p: Vec2, q: Vec2) -> f64 {
        match self {
            Domain::Rect(_) => (p - q).norm(),
            Domain::Torus { periods, .. } => {
                let d = p - q;
                let fold = |v: f64, t: f64| {
                    let r = wrap(v, t);
                    r.min(t - r)
                };
                Vec2::new(fold(d.x, periods.x), fold(d.y, periods.y)).norm()
            }
        }
    }
}

/// A pair of vector fields plus the metric that measures their angles.
#[derive(Debug, Clone)]
pub struct ProtoLineField {
    pub x: VectorField,
    pub y: VectorField,
    pub metric: Metric,
    pub domain: Domain,
    /// Field magnitude scale for the vanishing tests.
    pub scale: f64,
}

impl ProtoLineField {
    pub fn new(
        x: VectorField,
        y: VectorField,
        metric: Metric,
        domain: Domain,
    ) -> Result<Self, FieldError> {
        if domain.bounds().is_empty() {
            return Err(FieldError::EmptyDomain);
        }
        let l = ProtoLineField {
            x,
            y,
            metric,
            domain,
            scale: 1.0,
        };
        if let Domain::Torus { origin, periods } = domain {
            l.check_periodic(origin, periods)?;
        }
        Ok(l)
    }

    /// Euclidean pair on `[-1, 1]²`.
    pub fn planar(x: VectorField, y: VectorField) -> Self {
        ProtoLineField {
            x,
            y,
            metric: Metric::euclidean(),
            domain: Domain::Rect(Rect::square(1.0)),
            scale: 1.0,
        }
    }

    /// Linear field `a·p` against the constant field `y0`, Euclidean, on `[-1, 1]²`.
    pub fn linear(a: &Mat2, y0: Vec2) -> Self {
        Self::planar(VectorField::linear(a), VectorField::constant(y0))
    }

    pub fn lemon() -> Self {
        Self::linear(&Mat2::new(1.0, 1.0, -1.0, 1.0), Vec2::new(1.0, 1.0))
    }

    pub fn monstar() -> Self {
        Self::linear(&Mat2::new(1.0, 0.0, 0.0, 3.0), Vec2::new(1.0, 0.0))
    }

    pub fn star() -> Self {
        Self::linear(&Mat2::new(1.0, 0.0, 0.0, -1.0), Vec2::new(1.0, 0.0))
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    fn check_periodic(&self, origin: Vec2, periods: Vec2) -> Result<(), FieldError> {
        let exprs = [
            self.x.component(0),
            self.x.component(1),
            self.y.component(0),
            self.y.component(1),
            &self.metric.g11,
            &self.metric.g12,
            &self.metric.g22,
        ];
        for e in exprs {
            for k in 0..16 {
                let s = (k as f64 + 0.37) / 16.0;
                let pairs = [
                    (
                        Vec2::new(origin.x, origin.y + s * periods.y),
                        Vec2::new(periods.x, 0.0),
                    ),
                    (
                        Vec2::new(origin.x + s * periods.x, origin.y),
                        Vec2::new(0.0, periods.y),
                    ),
                ];
                for (p, shift) in pairs {
                    let q = p + shift;
                    let a = e.eval(p.x, p.y)?;
                    let b = e.eval(q.x, q.y)?;
                    if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                        return Err(FieldError::NotPeriodic {
                            expr: e.to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, p: Vec2) -> Result<(Vec2, Vec2, Mat2), FieldError> {
        Ok((self.x.eval(p)?, self.y.eval(p)?, self.metric.at(p)?))
    }

    /// Bisector line angle at `p`, read in the `g`-orthonormal frame.
    pub fn bisector(&self, p: Vec2) -> Result<LineAngle, FieldError> {
        let (x, y, g) = self.eval(p)?;
        let tol = VANISHING_TOL * self.scale;
        if g_norm(&g, x) < tol || g_norm(&g, y) < tol {
            return Err(FieldError::Singular { x: p.x, y: p.y });
        }
        bisector_of(&g, x, y)
    }

    /// Unit coordinate direction along the bisector line at `p`.
    pub fn direction(&self, p: Vec2) -> Result<Vec2, FieldError> {
        let g = self.metric.at(p)?;
        Ok(line_direction(&g, self.bisector(p)?))
    }

    /// `min(|X|_g, |Y|_g)` at `p`.
    pub fn min_norm(&self, p: Vec2) -> Result<f64, FieldError> {
        let (x, y, g) = self.eval(p)?;
        Ok(g_norm(&g, x).min(g_norm(&g, y)))
    }
}

pub fn g_norm(g: &Mat2, v: Vec2) -> f64 {
    v.dot(&(g * v)).max(0.0).sqrt()
}

/// A smooth line field given by its doubled-angle direction `(c, s)`:
/// the line at `p` makes angle `atan2(s, c) / 2` with the frame's first axis.
#[derive(Debug, Clone)]
pub struct LineSection {
    pub cos2: Expr,
    pub sin2: Expr,
}

impl LineSection {
    /// Section whose line angle is `angle(x, y)`.
    pub fn from_angle(angle: Expr) -> Self {
        let doubled = Expr::from(2.0) * angle;
        LineSection {
            cos2: doubled.clone().cos(),
            sin2: doubled.sin(),
        }
    }

    pub fn from_doubled(cos2: Expr, sin2: Expr) -> Self {
        LineSection { cos2, sin2 }
    }

    pub fn at(&self, p: Vec2) -> Result<LineAngle, FieldError> {
        let c = self.cos2.eval(p.x, p.y)?;
        let s = self.sin2.eval(p.x, p.y)?;
        if c == 0.0 && s == 0.0 {
            return Err(FieldError::ZeroVector);
        }
        Ok(LineAngle::new(0.5 * s.atan2(c)))
    }
}

/// Builds `Y = damping · R(X)` where `R` reflects `X` across the section's
/// line in the `g`-orthonormal frame, so that the bisector of `(X, Y)` is the
/// section wherever `X ≠ 0` and `damping > 0`. `samples` are checked for both
/// conditions.
pub fn realize_line_field(
    section: &LineSection,
    x: &VectorField,
    damping: &Expr,
    metric: &Metric,
    samples: &[Vec2],
) -> Result<VectorField, FieldError> {
    for &p in samples {
        let v = x.eval(p)?;
        let g = metric.at(p)?;
        if g_norm(&g, v) < VANISHING_TOL {
            return Err(FieldError::Realization {
                x: p.x,
                y: p.y,
                reason: "X vanishes".into(),
            });
        }
        if damping.eval(p.x, p.y)? <= 0.0 {
            return Err(FieldError::Realization {
                x: p.x,
                y: p.y,
                reason: "damping is not positive".into(),
            });
        }
        section.at(p)?;
    }
    let (g11, g12, g22) = (metric.g11.clone(), metric.g12.clone(), metric.g22.clone());
    let one = || Expr::from(1.0);
    // frame: e1 = (1/sqrt(g11), 0), e2 = (-g12/g11, 1) / sqrt(det/g11)
    let det = g11.clone() * g22.clone() - g12.clone().powi(2);
    let e1x = one() / g11.clone().sqrt();
    let k2 = one() / (det / g11.clone()).sqrt();
    let e2x = -(g12.clone() / g11.clone()) * k2.clone();
    let e2y = k2;
    // frame coordinates a_i = g(e_i, X)
    let gx1 = g11 * x.component(0).clone() + g12.clone() * x.component(1).clone();
    let gx2 = g12 * x.component(0).clone() + g22 * x.component(1).clone();
    let a1 = e1x.clone() * gx1.clone();
    let a2 = e2x.clone() * gx1 + e2y.clone() * gx2;
    let len = (section.cos2.clone().powi(2) + section.sin2.clone().powi(2)).sqrt();
    let c = section.cos2.clone() / len.clone();
    let s = section.sin2.clone() / len;
    let b1 = c.clone() * a1.clone() + s.clone() * a2.clone();
    let b2 = s * a1 - c * a2;
    let y1 = damping.clone() * (b1.clone() * e1x + b2.clone() * e2x);
    let y2 = damping.clone() * (b2 * e2y);
    Ok(VectorField::from_exprs(y1, y2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub point: [f64; 2],
    pub det: f64,
    pub degenerate: bool,
}

impl Zero {
    pub fn p(&self) -> Vec2 {
        Vec2::new(self.point[0], self.point[1])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZeroSearch {
    pub roots: Vec<Zero>,
    pub nonconverged: usize,
}

/// Zeros of `v` in `rect`, from damped Newton iterations seeded at the
/// centres of an `n × n` grid.
pub fn find_zeros(v: &VectorField, rect: &Rect, n: usize) -> ZeroSearch {
    find_zeros_in(v, &Domain::Rect(*rect), n)
}

pub fn find_zeros_in(v: &VectorField, domain: &Domain, n: usize) -> ZeroSearch {
    let rect = domain.bounds();
    let n = n.max(1);
    let (hx, hy) = (rect.width() / n as f64, rect.height() / n as f64);
    let max_step = hx.hypot(hy);
    let periodic = matches!(domain, Domain::Torus { .. });
    let mut out = ZeroSearch::default();
    for i in 0..n {
        for j in 0..n {
            let seed = Vec2::new(
                rect.min[0] + (i as f64 + 0.5) * hx,
                rect.min[1] + (j as f64 + 0.5) * hy,
            );
            match newton(v, seed, max_step) {
                Some(p) => {
                    let p = domain.reduce(p);
                    if !periodic && !rect.contains(p, 1e-9) {
                        continue;
                    }
                    if out.roots.iter().any(|z| domain.distance(z.p(), p) < 1e-6) {
                        continue;
                    }
                    let det = v.jacobian(p).map(|j| j.determinant()).unwrap_or(0.0);
                    out.roots.push(Zero {
                        point: [p.x, p.y],
                        det,
                        degenerate: det.abs() < 1e-8,
                    });
                }
                None => out.nonconverged += 1,
            }
        }
    }
    out.roots
        .sort_by(|a, b| a.point.partial_cmp(&b.point).expect("finite roots"));
    out
}

fn newton(v: &VectorField, seed: Vec2, max_step: f64) -> Option<Vec2> {
    let mut p = seed;
    for _ in 0..200 {
        let f = v.eval(p).ok()?;
        if f.norm() == 0.0 {
            return Some(p);
        }
        let j = v.jacobian(p).ok()?;
        let mut step = j.lu().solve(&(-f))?;
        if !step.iter().all(|s| s.is_finite()) {
            return None;
        }
        let len = step.norm();
        if len > max_step {
            step *= max_step / len;
        }
        // damping: halve until the residual does not grow
        let mut t = 1.0;
        let mut next = p + step;
        while t > 1e-3 {
            match v.eval(next) {
                Ok(fn_) if fn_.norm() <= f.norm() * (1.0 - 1e-4 * t) || t < 0.25 => break,
                _ => {}
            }
            t *= 0.5;
            next = p + step * t;
        }
        let moved = (next - p).norm();
        p = next;
        if moved < 1e-14 * (1.0 + p.norm()) {
            break;
        }
    }
    let f = v.eval(p).ok()?;
    let scale = 1.0 + v.jacobian(p).ok()?.norm();
    (f.norm() < 1e-9 * scale).then_some(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn frame_examples() {
        let (e1, e2) = orthonormal_frame(&Metric::stretched(3.0), Vec2::zeros()).unwrap();
        assert_eq!(e1, Vec2::new(1.0, 0.0));
        assert!(close(e2.x, 0.0, 1e-15) && close(e2.y, 1.0 / 3.0, 1e-15));
        let g = Metric::constant(&Mat2::new(2.0, 0.0, 0.0, 2.0));
        let (e1, e2) = orthonormal_frame(&g, Vec2::zeros()).unwrap();
        let r = 0.5f64.sqrt();
        assert!(close(e1.x, r, 1e-15) && close(e2.y, r, 1e-15));
    }

    #[test]
    fn frame_is_orthonormal_and_oriented() {
        let m = Mat2::new(2.0, 0.7, 0.7, 1.1);
        let f = frame_of(&m);
        let gram = f.transpose() * m * f;
        assert!((gram - Mat2::identity()).norm() < 1e-14);
        assert!(f.determinant() > 0.0);
        assert_eq!(f[(1, 0)], 0.0);
    }

    #[test]
    fn metric_rejects_indefinite() {
        let g = Metric::parse("1", "x", "1").unwrap();
        assert!(g.at(Vec2::new(0.5, 0.0)).is_ok());
        assert!(matches!(
            g.at(Vec2::new(2.0, 0.0)),
            Err(FieldError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn angle_between_examples() {
        let g = Metric::stretched(3.0);
        let w = Vec2::new(1.0, 1.0) / 2f64.sqrt();
        let a = angle_between(&g, Vec2::zeros(), Vec2::new(1.0, 0.0), w).unwrap();
        assert!(close(a.value(), 3f64.atan(), 1e-12));
        let e = Metric::euclidean();
        let a =
            angle_between(&e, Vec2::zeros(), Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)).unwrap();
        assert!(close(a.value(), PI, 1e-15));
        let a = angle_between(&e, Vec2::zeros(), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)).unwrap();
        assert!(close(a.value(), 1.5 * PI, 1e-15));
        assert_eq!(
            angle_between(&e, Vec2::zeros(), Vec2::zeros(), Vec2::new(1.0, 0.0)),
            Err(FieldError::ZeroVector)
        );
    }

    #[test]
    fn bisector_examples() {
        let b = ProtoLineField::lemon()
            .bisector(Vec2::new(1.0, 0.0))
            .unwrap();
        assert!(b.value().abs() < 1e-15 || close(b.value(), PI, 1e-15));
        let b = ProtoLineField::star()
            .bisector(Vec2::new(0.0, 1.0))
            .unwrap();
        assert!(close(b.value(), 0.75 * PI, 1e-15));
        assert!(matches!(
            ProtoLineField::star().bisector(Vec2::zeros()),
            Err(FieldError::Singular { .. })
        ));
    }

    #[test]
    fn bisector_is_symmetric_in_the_pair() {
        let l = ProtoLineField::lemon();
        let swapped = ProtoLineField::planar(l.y.clone(), l.x.clone());
        for p in [
            Vec2::new(0.3, -0.2),
            Vec2::new(-0.9, 0.1),
            Vec2::new(0.0, 0.7),
        ] {
            let d = l.bisector(p).unwrap().diff(swapped.bisector(p).unwrap());
            assert!(d.abs() < 1e-14);
        }
    }

    #[test]
    fn angle_types_reduce() {
        assert!(close(VecAngle::new(-0.5).value(), TAU - 0.5, 1e-15));
        assert!(VecAngle::new(-1e-18).value() < TAU);
        assert!(close(LineAngle::new(3.5 * PI).value(), 0.5 * PI, 1e-14));
        assert!(close(
            LineAngle::new(0.1).diff(LineAngle::new(PI - 0.1)),
            0.2,
            1e-15
        ));
    }

    #[test]
    fn jacobian_matches_hand_derivatives() {
        let v = VectorField::parse("x^2*y", "sin(x) + y").unwrap();
        let j = v.jacobian(Vec2::new(2.0, 3.0)).unwrap();
        assert_eq!(j, Mat2::new(12.0, 4.0, 2f64.cos(), 1.0));
    }

    #[test]
    fn zeros_of_examples() {
        let r = find_zeros(&ProtoLineField::lemon().x, &Rect::square(1.0), 64);
        assert_eq!(r.roots.len(), 1);
        assert!(r.roots[0].p().norm() < 1e-12);
        assert!(close(r.roots[0].det, 2.0, 1e-12));

        let v = VectorField::parse("sin(x)", "sin(y)").unwrap();
        let r = find_zeros(&v, &Rect::new(-0.5, TAU - 0.5, -0.5, TAU - 0.5), 64);
        assert_eq!(r.roots.len(), 4);

        let v = VectorField::parse("x^2 - 1", "y").unwrap();
        let r = find_zeros(&v, &Rect::square(2.0), 64);
        let xs: Vec<f64> = r.roots.iter().map(|z| z.point[0]).collect();
        assert_eq!(xs.len(), 2);
        assert!(close(xs[0], -1.0, 1e-10) && close(xs[1], 1.0, 1e-10));
    }

    #[test]
    fn zeros_on_torus_are_reduced() {
        let v = VectorField::parse("sin(x)", "sin(y)").unwrap();
        let d = Domain::Torus {
            origin: Vec2::zeros(),
            periods: Vec2::new(TAU, TAU),
        };
        let r = find_zeros_in(&v, &d, 32);
        assert_eq!(r.roots.len(), 4);
        for z in &r.roots {
            assert!(z.point[0] >= 0.0 && z.point[0] < TAU);
        }
    }

    #[test]
    fn degenerate_zero_is_flagged() {
        let v = VectorField::parse("x^2", "y").unwrap();
        let r = find_zeros(&v, &Rect::square(1.0), 16);
        assert_eq!(r.roots.len(), 1);
        assert!(r.roots[0].degenerate);
    }

    #[test]
    fn torus_requires_periodic_data() {
        let x = VectorField::parse("sin(x)", "y").unwrap();
        let y = VectorField::constant(Vec2::new(1.0, 0.0));
        let d = Domain::Torus {
            origin: Vec2::zeros(),
            periods: Vec2::new(TAU, TAU),
        };
        let err = ProtoLineField::new(x, y, Metric::euclidean(), d).unwrap_err();
        assert!(matches!(err, FieldError::NotPeriodic { .. }));
    }

    #[test]
    fn realization_recovers_lemon_section() {
        let section = LineSection::from_doubled(Expr::x(), Expr::y());
        let l = ProtoLineField::lemon();
        let x = VectorField::constant(Vec2::new(1.0, 0.2));
        let samples: Vec<Vec2> = (0..100)
            .map(|k| {
                let t = k as f64 * 0.0628;
                Vec2::new(t.cos(), t.sin()) * (0.5 + 0.004 * k as f64)
            })
            .collect();
        let damping = Expr::from(1.0) + Expr::x().powi(2);
        let y = realize_line_field(&section, &x, &damping, &Metric::euclidean(), &samples).unwrap();
        let r = ProtoLineField::planar(x, y);
        for p in samples {
            let d = r.bisector(p).unwrap().diff(l.bisector(p).unwrap());
            assert!(d.abs() < 1e-9, "{p:?}: {d}");
        }
    }

    #[test]
    fn realization_rejects_bad_damping() {
        let section = LineSection::from_angle(Expr::x());
        let x = VectorField::constant(Vec2::new(1.0, 0.0));
        let err = realize_line_field(
            &section,
            &x,
            &Expr::x(),
            &Metric::euclidean(),
            &[Vec2::new(-1.0, 0.0)],
        )
        .unwrap_err();
        assert!(matches!(err, FieldError::Realization { .. }));
    }
}
