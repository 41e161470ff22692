//! Polar blow-up of a hyperbolic singularity.
//!
//! Coordinates are normalized so the metric is the identity at the
//! singularity: `p + S·ξ` with `Sᵀ g(p) S = I`. With `ξ = r (cos θ, sin θ)`
//! and `φ(r, θ)` the lifted bisector angle, the field
//! `P(r, θ) = (r cos(φ − θ), sin(φ − θ))` on `(-δ, δ) × ℝ/4πℤ` (even in `r`)
//! has its zeros on `r = 0` exactly at the fixed rays of the linear model.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{
    bisector_of, find_zeros, frame_angle, frame_of, g_norm, FieldError, LineAngle, Mat2,
    ProtoLineField, Rect, Vec2,
};
use crate::linear::{classify, Classification, FixedPoint, LinearError, LinearPlf, Stability};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlowupError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error("neither field vanishes at ({x}, {y})")]
    NotSingular { x: f64, y: f64 },
    #[error("both fields vanish at ({x}, {y})")]
    BothVanish { x: f64, y: f64 },
    #[error("another singularity at ({x}, {y}) lies inside the blow-up disc")]
    NotIsolated { x: f64, y: f64 },
    #[error("angle lift failed: step {step:.3} between neighbouring grid nodes")]
    LiftFailed { step: f64 },
    #[error("sampling curve meets another singularity at ({x}, {y})")]
    CurveHitsSingularity { x: f64, y: f64 },
}

/// Linear model of a singularity in metric-normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linearization {
    pub point: Vec2,
    /// Columns form a `g(p)`-orthonormal frame; `x = p + S ξ`.
    pub s: Mat2,
    pub a_tilde: Mat2,
    pub y_tilde: Vec2,
    /// `Y` is the vanishing field and `X` plays the constant role.
    pub swapped: bool,
}

impl Linearization {
    pub fn linear_plf(&self) -> LinearPlf {
        LinearPlf::new(self.a_tilde, self.y_tilde)
    }

    pub fn to_world(&self, xi: Vec2) -> Vec2 {
        self.point + self.s * xi
    }

    /// Unit coordinate direction of the normalized ray at angle `theta`.
    pub fn world_direction(&self, theta: f64) -> Vec2 {
        let v = self.s * Vec2::new(theta.cos(), theta.sin());
        v / v.norm()
    }

    /// Bisector angle of the linear model on the ray at `theta`.
    pub fn phi_bar(&self, theta: f64) -> LineAngle {
        self.linear_plf().ray_map(theta)
    }
}

pub fn linearize(l: &ProtoLineField, p: Vec2) -> Result<Linearization, BlowupError> {
    let (x, y, g) = l.eval(p)?;
    let jx = l.x.jacobian(p).map_err(FieldError::from)?;
    let jy = l.y.jacobian(p).map_err(FieldError::from)?;
    let x_zero = g_norm(&g, x) <= 1e-9 * (l.scale + jx.norm());
    let y_zero = g_norm(&g, y) <= 1e-9 * (l.scale + jy.norm());
    let (jac, constant, swapped) = match (x_zero, y_zero) {
        (true, true) => return Err(BlowupError::BothVanish { x: p.x, y: p.y }),
        (false, false) => return Err(BlowupError::NotSingular { x: p.x, y: p.y }),
        (true, false) => (jx, y, false),
        (false, true) => (jy, x, true),
    };
    let s = frame_of(&g);
    let s_inv = s.try_inverse().expect("frame is invertible");
    Ok(Linearization {
        point: p,
        s,
        a_tilde: s_inv * jac * s,
        y_tilde: s_inv * constant,
        swapped,
    })
}

/// Bisector angle at normalized polar coordinates `(r, θ)`, `r > 0`.
fn phi_raw(
    l: &ProtoLineField,
    lin: &Linearization,
    r: f64,
    theta: f64,
) -> Result<LineAngle, FieldError> {
    l.bisector(lin.to_world(r * Vec2::new(theta.cos(), theta.sin())))
}

fn lift_near(raw: f64, reference: f64) -> f64 {
    raw + PI * ((reference - raw) / PI).round()
}

/// Largest unwrapping step accepted between neighbouring grid nodes.
const LIFT_STEP_LIMIT: f64 = PI / 4.0;

/// Lifted bisector angle on a polar grid over the doubled circle.
#[derive(Debug, Clone)]
pub struct BlowupField<'a> {
    pub field: &'a ProtoLineField,
    pub lin: Linearization,
    pub delta: f64,
    pub radii: Vec<f64>,
    pub thetas: Vec<f64>,
    /// `phi[i][j]` at `(radii[i], thetas[j])`.
    pub phi: Vec<Vec<f64>>,
}

pub fn lift_phi<'a>(
    l: &'a ProtoLineField,
    p: Vec2,
    delta: f64,
    grid: (usize, usize),
) -> Result<BlowupField<'a>, BlowupError> {
    let lin = linearize(l, p)?;
    check_isolated(l, &lin, delta)?;
    // The ray map turns at most cond(Ã)/2 times as fast as the ray.
    let sv = lin.a_tilde.singular_values();
    let cond = sv.max() / sv.min();
    let grid = (grid.0, grid.1.max((16.0 * cond).ceil() as usize));
    match build_grid(l, lin, delta, grid) {
        Err(BlowupError::LiftFailed { .. }) => build_grid(l, lin, delta, (2 * grid.0, 2 * grid.1)),
        r => r,
    }
}

fn check_isolated(l: &ProtoLineField, lin: &Linearization, delta: f64) -> Result<(), BlowupError> {
    let hx = delta * lin.s.row(0).norm();
    let hy = delta * lin.s.row(1).norm();
    let p = lin.point;
    let rect = Rect::new(p.x - hx, p.x + hx, p.y - hy, p.y + hy);
    let s_inv = lin.s.try_inverse().expect("frame is invertible");
    for v in [&l.x, &l.y] {
        for z in find_zeros(v, &rect, 12).roots {
            let xi = s_inv * (z.p() - p);
            if xi.norm() < delta && xi.norm() > 1e-9 {
                return Err(BlowupError::NotIsolated {
                    x: z.point[0],
                    y: z.point[1],
                });
            }
        }
    }
    Ok(())
}

fn build_grid<'a>(
    l: &'a ProtoLineField,
    lin: Linearization,
    delta: f64,
    (n_r, n_t): (usize, usize),
) -> Result<BlowupField<'a>, BlowupError> {
    let n_r = n_r.max(2);
    let n_t = n_t.max(16);
    let radii: Vec<f64> = (0..=n_r).map(|i| delta * i as f64 / n_r as f64).collect();
    let thetas: Vec<f64> = (0..=n_t)
        .map(|j| 2.0 * TAU * j as f64 / n_t as f64)
        .collect();
    let mut phi = vec![vec![0.0; n_t + 1]; n_r + 1];
    let step_check = |raw: f64, prev: f64| -> Result<f64, BlowupError> {
        let lifted = lift_near(raw, prev);
        let step = (lifted - prev).abs();
        if step >= LIFT_STEP_LIMIT {
            return Err(BlowupError::LiftFailed { step });
        }
        Ok(lifted)
    };
    phi[0][0] = lin.phi_bar(0.0).value();
    for j in 1..=n_t {
        phi[0][j] = step_check(lin.phi_bar(thetas[j]).value(), phi[0][j - 1])?;
    }
    for i in 1..=n_r {
        for j in 0..=n_t {
            let raw = phi_raw(l, &lin, radii[i], thetas[j])?.value();
            phi[i][j] = step_check(raw, phi[i - 1][j])?;
        }
        for j in 1..=n_t {
            let step = (phi[i][j] - phi[i][j - 1]).abs();
            if step >= LIFT_STEP_LIMIT {
                return Err(BlowupError::LiftFailed { step });
            }
        }
    }
    Ok(BlowupField {
        field: l,
        lin,
        delta,
        radii,
        thetas,
        phi,
    })
}

impl BlowupField<'_> {
    fn interpolate(&self, r: f64, theta: f64) -> f64 {
        let n_r = self.radii.len() - 1;
        let n_t = self.thetas.len() - 1;
        let fr = (r / self.delta * n_r as f64).clamp(0.0, n_r as f64);
        let ft = theta / (2.0 * TAU) * n_t as f64;
        let (i, j) = (
            (fr.floor() as usize).min(n_r - 1),
            (ft.floor() as usize).min(n_t - 1),
        );
        let (u, v) = (fr - i as f64, ft - j as f64);
        let g = &self.phi;
        (1.0 - u) * ((1.0 - v) * g[i][j] + v * g[i][j + 1])
            + u * ((1.0 - v) * g[i + 1][j] + v * g[i + 1][j + 1])
    }

    /// Lifted angle at `(r, θ)`, even in `r`.
    pub fn phi_at(&self, r: f64, theta: f64) -> Result<f64, FieldError> {
        let r = r.abs();
        let theta = theta.rem_euclid(2.0 * TAU);
        let reference = self.interpolate(r, theta);
        let raw = if r == 0.0 {
            self.lin.phi_bar(theta)
        } else {
            phi_raw(self.field, &self.lin, r, theta)?
        };
        Ok(lift_near(raw.value(), reference))
    }

    pub fn p_at(&self, r: f64, theta: f64) -> Result<Vec2, FieldError> {
        let a = self.phi_at(r, theta)? - theta;
        Ok(Vec2::new(r * a.cos(), a.sin()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlowupZeroKind {
    Saddle,
    Node,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupZero {
    /// Position on the doubled circle, in `[0, 4π)`.
    pub theta: f64,
    pub kind: BlowupZeroKind,
    pub dp: Mat2,
    pub expected: Mat2,
    pub rel_error: f64,
    pub stability: Stability,
}

/// Zeros of `P` on `r = 0` with their finite-difference derivatives,
/// compared against `cos(φ − θ₀)·diag(1, slope − 1)`.
pub fn blowup_zeros(b: &BlowupField) -> Result<(Classification, Vec<BlowupZero>), BlowupError> {
    let class = classify(&b.lin.linear_plf())?;
    let h = 1e-5;
    let mut out = Vec::new();
    for fp in &class.fixed_points {
        for k in 0..2 {
            let theta = fp.theta.rem_euclid(TAU) + TAU * k as f64;
            out.push(blowup_zero(b, fp, theta, h)?);
        }
    }
    out.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Ok((class, out))
}

fn blowup_zero(
    b: &BlowupField,
    fp: &FixedPoint,
    theta: f64,
    h: f64,
) -> Result<BlowupZero, BlowupError> {
    let dr = (b.p_at(h, theta)? - b.p_at(-h, theta)?) / (2.0 * h);
    let dt = (b.p_at(0.0, theta + h)? - b.p_at(0.0, theta - h)?) / (2.0 * h);
    let dp = Mat2::from_columns(&[dr, dt]);
    let c = (b.phi_at(0.0, theta)? - theta).cos();
    let expected = Mat2::new(c, 0.0, 0.0, c * (fp.slope - 1.0));
    let rel_error = (dp - expected).norm() / expected.norm();
    let det = dp.determinant();
    let kind = if det.abs() < 1e-6 * dp.norm_squared() {
        BlowupZeroKind::Degenerate
    } else if det < 0.0 {
        BlowupZeroKind::Saddle
    } else {
        BlowupZeroKind::Node
    };
    Ok(BlowupZero {
        theta,
        kind,
        dp,
        expected,
        rel_error,
        stability: fp.stability,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    pub singular: bool,
    pub limit_plus: f64,
    pub limit_minus: f64,
    /// `limit_plus − limit_minus` as a line angle in `[0, π)`.
    pub jump: f64,
    /// Distance mod π from the expected jump (`π/2` at singularities, else 0).
    pub deviation: f64,
}

impl JumpReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.deviation <= tol
    }
}

/// One-sided limits of the angle between the line `p + t·dir` and the
/// bisector as `t → 0±`.
pub fn jump_check(l: &ProtoLineField, p: Vec2, dir: Vec2) -> Result<JumpReport, BlowupError> {
    let singular = l.min_norm(p)? < 1e-9 * l.scale;
    let n = 41;
    let ts: Vec<f64> = (0..n)
        .map(|k| 10f64.powf(-2.0 - 4.0 * k as f64 / (n - 1) as f64))
        .collect();
    let mut limits = [0.0; 2];
    for (slot, sign) in [(0, 1.0), (1, -1.0)] {
        let mut prev: Option<f64> = None;
        let mut vals = Vec::with_capacity(n);
        for &t in &ts {
            let q = p + sign * t * dir;
            let b = l.bisector(q).map_err(|e| match e {
                FieldError::Singular { x, y } => BlowupError::CurveHitsSingularity { x, y },
                e => e.into(),
            })?;
            let g = l.metric.at(q)?;
            let raw = b.value() - frame_angle(&g, dir)?;
            let v = match prev {
                Some(pv) => lift_near(raw, pv),
                None => LineAngle::new(raw).value(),
            };
            prev = Some(v);
            vals.push(v);
        }
        let (t1, t0) = (ts[n - 2], ts[n - 1]);
        let (v1, v0) = (vals[n - 2], vals[n - 1]);
        limits[slot] = v0 - (v1 - v0) * t0 / (t1 - t0);
    }
    let jump = LineAngle::new(limits[0] - limits[1]);
    let expected = LineAngle::new(if singular { PI / 2.0 } else { 0.0 });
    Ok(JumpReport {
        singular,
        limit_plus: limits[0],
        limit_minus: limits[1],
        jump: jump.value(),
        deviation: jump.diff(expected).abs(),
    })
}

/// Sup-norm distances of the bisector angle and its derivatives from the
/// linear model on the circle of normalized radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitResiduals {
    pub radius: f64,
    /// `max |φ(r, ·) − φ̄|`.
    pub value: f64,
    /// `max |∂θ φ(r, ·) − φ̄'|`.
    pub d_theta: f64,
    /// `max |∂r φ(r, ·)|`.
    pub d_r: f64,
}

pub fn limit_residuals(
    l: &ProtoLineField,
    lin: &Linearization,
    radii: &[f64],
    n_theta: usize,
) -> Result<Vec<LimitResiduals>, FieldError> {
    let ht = 1e-5;
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut res = LimitResiduals {
            radius: r,
            value: 0.0,
            d_theta: 0.0,
            d_r: 0.0,
        };
        let hr = 1e-2 * r;
        for k in 0..n_theta {
            let t = TAU * k as f64 / n_theta as f64;
            let bar = lin.phi_bar(t);
            let phi = phi_raw(l, lin, r, t)?;
            res.value = res.value.max(phi.diff(bar).abs());
            let dt = phi_raw(l, lin, r, t + ht)?.diff(phi_raw(l, lin, r, t - ht)?) / (2.0 * ht);
            let dbar = lin.phi_bar(t + ht).diff(lin.phi_bar(t - ht)) / (2.0 * ht);
            res.d_theta = res.d_theta.max((dt - dbar).abs());
            let dr = phi_raw(l, lin, r + hr, t)?.diff(phi_raw(l, lin, r - hr, t)?) / (2.0 * hr);
            res.d_r = res.d_r.max(dr.abs());
        }
        out.push(res);
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x.ln(), y.max(f64::MIN_POSITIVE).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Bisector frame angle on the coordinate ray `p + radius (cos θ, sin θ)`,
/// without normalizing the metric at `p`.
pub fn coordinate_ray_angle(
    l: &ProtoLineField,
    p: Vec2,
    radius: f64,
    theta: f64,
) -> Result<LineAngle, FieldError> {
    l.bisector(p + radius * Vec2::new(theta.cos(), theta.sin()))
}

/// Frame angle of `X` on the coordinate ray.
pub fn coordinate_ray_x_angle(
    l: &ProtoLineField,
    p: Vec2,
    radius: f64,
    theta: f64,
) -> Result<f64, FieldError> {
    let q = p + radius * Vec2::new(theta.cos(), theta.sin());
    frame_angle(&l.metric.at(q)?, l.x.eval(q)?)
}

fn wrap_signed(v: f64, period: f64) -> f64 {
    (v + period / 2.0).rem_euclid(period) - period / 2.0
}

pub fn coordinate_ray_slope(
    l: &ProtoLineField,
    p: Vec2,
    radius: f64,
    theta: f64,
) -> Result<f64, FieldError> {
    let h = 1e-5;
    let a = coordinate_ray_angle(l, p, radius, theta + h)?;
    let b = coordinate_ray_angle(l, p, radius, theta - h)?;
    Ok(a.diff(b) / (2.0 * h))
}

pub fn coordinate_ray_x_slope(
    l: &ProtoLineField,
    p: Vec2,
    radius: f64,
    theta: f64,
) -> Result<f64, FieldError> {
    let h = 1e-5;
    let a = coordinate_ray_x_angle(l, p, radius, theta + h)?;
    let b = coordinate_ray_x_angle(l, p, radius, theta - h)?;
    Ok(wrap_signed(a - b, TAU) / (2.0 * h))
}

/// Fixed rays of the coordinate-ray map, found by sign changes on a grid.
pub fn coordinate_ray_fixed_points(
    l: &ProtoLineField,
    p: Vec2,
    radius: f64,
    n: usize,
) -> Result<Vec<FixedPoint>, FieldError> {
    let g = |t: f64| -> Result<f64, FieldError> {
        Ok(coordinate_ray_angle(l, p, radius, t)?.diff(LineAngle::new(t)))
    };
    let mut out: Vec<FixedPoint> = Vec::new();
    for i in 0..n {
        // Half-cell offset keeps roots at 0 and ±π away from the grid nodes.
        let a = -PI + TAU * (i as f64 + 0.5) / n as f64;
        let b = -PI + TAU * (i as f64 + 1.5) / n as f64;
        let (ga, gb) = (g(a)?, g(b)?);
        let crosses = ga == 0.0 || gb != 0.0 && (ga < 0.0) != (gb < 0.0) && (ga - gb).abs() < 1.0;
        if !crosses {
            continue;
        }
        let (mut lo, mut hi) = (a, if ga == 0.0 { a } else { b });
        for _ in 0..60 {
            let m = 0.5 * (lo + hi);
            if (g(m)? < 0.0) == (ga < 0.0) {
                lo = m;
            } else {
                hi = m;
            }
        }
        let theta = wrap_signed(0.5 * (lo + hi), TAU);
        let slope = coordinate_ray_slope(l, p, radius, theta)?;
        out.push(FixedPoint {
            theta,
            theta_normal: theta,
            slope,
            stability: Stability::from_slope(slope),
        });
    }
    out.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Ok(out)
}

/// Bisector angle of the linear model with Euclidean frame, for reference.
pub fn linear_ray_angle(a: &Mat2, y0: Vec2, theta: f64) -> Result<LineAngle, FieldError> {
    bisector_of(
        &Mat2::identity(),
        a * Vec2::new(theta.cos(), theta.sin()),
        y0,
    )
}
