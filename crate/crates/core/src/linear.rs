//! Classification of linear pairs `(A·p, Y0)` with the Euclidean metric.
//!
//! A hyperbolic `A` is brought to a normal form `C·M(E, φ)` in an adapted
//! orthonormal basis. On the ellipse `(E cos θ, sin θ)` the ray angle is
//! `F(θ)` and the angle of `A·p` is `G(θ)`, so fixed points of the ray map
//! `θ ↦ angle of the bisector` are the solutions of `2F − G ≡ α (mod 2π)`,
//! `α` being the angle of `Y0` in that basis.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use nalgebra::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{bisector_of, LineAngle, Mat2, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearError {
    #[error("linear part is singular (det = {det:e})")]
    Singular { det: f64 },
    #[error("constant field vanishes")]
    ZeroConstant,
    #[error("non-generic linearization: equalized off-diagonal product vanishes")]
    NonGenericLinearization,
    #[error("classification is internally inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPlf {
    pub a: Mat2,
    pub y0: Vec2,
}

impl LinearPlf {
    pub fn new(a: Mat2, y0: Vec2) -> Self {
        LinearPlf { a, y0 }
    }

    /// Bisector line angle on the ray at angle `theta`.
    pub fn ray_map(&self, theta: f64) -> LineAngle {
        let u = Vec2::new(theta.cos(), theta.sin());
        bisector_of(&Mat2::identity(), self.a * u, self.y0).expect("hyperbolic linear part")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormalKind {
    Focus,
    Node,
    Saddle,
    ScaledRotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalForm {
    pub kind: NormalKind,
    pub e: f64,
    pub c: f64,
    pub phi: f64,
    /// Rotation angle `t` of the basis that equalizes the diagonal.
    pub rotation: f64,
    /// Whether the two basis vectors were exchanged afterwards.
    pub swapped: bool,
    /// Angle of the constant field in the adapted basis.
    pub alpha: f64,
}

impl NormalForm {
    pub fn epsilon(&self) -> f64 {
        if self.kind == NormalKind::Focus {
            -1.0
        } else {
            1.0
        }
    }

    /// Adapted basis as columns, in original coordinates.
    pub fn basis(&self) -> Mat2 {
        basis_of(self.rotation, self.swapped)
    }

    /// The normalized matrix, so that `A = Q·M·Qᵀ` with `Q = basis()`.
    pub fn matrix(&self) -> Mat2 {
        let (s, c) = self.phi.sin_cos();
        if self.kind == NormalKind::ScaledRotation {
            return self.c * Mat2::new(c, -s, s, c);
        }
        self.c * Mat2::new(c, self.epsilon() * self.e * s, s / self.e, c)
    }

    /// Angle of `y` read in the adapted basis.
    pub fn alpha_of(&self, y: Vec2) -> f64 {
        let w = self.basis().transpose() * y;
        w.y.atan2(w.x)
    }

    fn original_angle(&self, theta: f64) -> f64 {
        let v = self.basis() * Vec2::new(theta.cos(), theta.sin());
        v.y.atan2(v.x)
    }
}

fn basis_of(t: f64, swapped: bool) -> Mat2 {
    let (s, c) = t.sin_cos();
    let r = Mat2::new(c, -s, s, c);
    if swapped {
        r * Mat2::new(0.0, 1.0, 1.0, 0.0)
    } else {
        r
    }
}

/// Rotation `t ∈ [0, π/2)` with `R_tᵀ A R_t` having equal diagonal entries.
pub fn equalize_diagonal(a: &Mat2) -> (f64, Mat2) {
    let p = a[(0, 0)] - a[(1, 1)];
    let q = a[(0, 1)] + a[(1, 0)];
    let mut two_t = (-p).atan2(q).rem_euclid(PI);
    if p == 0.0 && q == 0.0 || two_t >= PI {
        two_t = 0.0;
    }
    let t = 0.5 * two_t;
    let r = basis_of(t, false);
    (t, r.transpose() * a * r)
}

pub fn normal_form(lin: &LinearPlf) -> Result<NormalForm, LinearError> {
    let a = &lin.a;
    let scale = a.norm();
    let det = a.determinant();
    if scale == 0.0 || det.abs() <= 1e-12 * scale * scale {
        return Err(LinearError::Singular { det });
    }
    if lin.y0.norm() == 0.0 {
        return Err(LinearError::ZeroConstant);
    }
    let (t, eq) = equalize_diagonal(a);
    let diag = 0.5 * (eq[(0, 0)] + eq[(1, 1)]);
    let (b, mut c) = (eq[(0, 1)], eq[(1, 0)]);
    let mut nf = NormalForm {
        kind: NormalKind::ScaledRotation,
        e: 1.0,
        c: diag.abs(),
        phi: if diag > 0.0 { 0.0 } else { PI },
        rotation: t,
        swapped: false,
        alpha: 0.0,
    };
    let small = 1e-12 * scale;
    if b.abs() <= small && c.abs() <= small {
        nf.alpha = nf.alpha_of(lin.y0);
        return Ok(nf);
    }
    if (b * c).abs() <= small * scale {
        return Err(LinearError::NonGenericLinearization);
    }
    let mut e = (b / c).abs().sqrt();
    let d = (b * c).abs().sqrt();
    let focus = b * c < 0.0;
    if focus && e < 1.0 {
        c = b;
        e = 1.0 / e;
        nf.swapped = true;
    }
    nf.e = e;
    nf.c = diag.hypot(d);
    nf.phi = (c * e).atan2(diag);
    nf.kind = if focus {
        NormalKind::Focus
    } else if det > 0.0 {
        NormalKind::Node
    } else {
        NormalKind::Saddle
    };
    nf.alpha = nf.alpha_of(lin.y0);
    let reduced = nf.phi.rem_euclid(PI);
    let ok = match nf.kind {
        NormalKind::Focus => nf.e >= 1.0,
        NormalKind::Node => !(FRAC_PI_4..=PI - FRAC_PI_4).contains(&reduced),
        NormalKind::Saddle => reduced > FRAC_PI_4 && reduced < PI - FRAC_PI_4,
        NormalKind::ScaledRotation => true,
    };
    if !ok {
        return Err(LinearError::Inconsistent(format!(
            "{:?} normal form with φ = {}",
            nf.kind, nf.phi
        )));
    }
    Ok(nf)
}

/// Continuous lift of `arg(M·(cos θ, sin θ))` for invertible `M`.
fn lifted_arg(m: &Mat2, theta: f64) -> f64 {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    // M acts on z = e^{iθ} as p z + q z̄
    let p = Complex::new(0.5 * (a + d), 0.5 * (c - b));
    let q = Complex::new(0.5 * (a - d), 0.5 * (c + b));
    let z2 = Complex::from_polar(1.0, 2.0 * theta);
    if p.norm() >= q.norm() {
        p.arg() + theta + (Complex::new(1.0, 0.0) + q / p / z2).arg()
    } else {
        q.arg() - theta + (Complex::new(1.0, 0.0) + p / q * z2).arg()
    }
}

/// Ray angle of `(E cos θ, sin θ)`, lifted with `F(0) = 0`.
pub fn f_of(theta: f64, e: f64) -> f64 {
    lifted_arg(&Mat2::new(e, 0.0, 0.0, 1.0), theta)
}

pub fn f_prime(theta: f64, e: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    e / (e * e * c * c + s * s)
}

pub fn g_of(theta: f64, nf: &NormalForm) -> f64 {
    let (e, phi) = (nf.e, nf.phi);
    match nf.kind {
        NormalKind::ScaledRotation => theta + phi,
        NormalKind::Focus => f_of(theta + phi, e),
        NormalKind::Node | NormalKind::Saddle => {
            let (s, c) = phi.sin_cos();
            lifted_arg(&Mat2::new(e * c, e * s, s, c), theta)
        }
    }
}

pub fn g_prime(theta: f64, nf: &NormalForm) -> f64 {
    let (e, phi) = (nf.e, nf.phi);
    match nf.kind {
        NormalKind::ScaledRotation => 1.0,
        NormalKind::Focus => f_prime(theta + phi, e),
        NormalKind::Node | NormalKind::Saddle => {
            let cm = (theta - phi).cos();
            let sp = (theta + phi).sin();
            e * (2.0 * phi).cos() / (e * e * cm * cm + sp * sp)
        }
    }
}

/// `2F − G`, lifted continuously.
pub fn h_of(theta: f64, nf: &NormalForm) -> f64 {
    2.0 * f_of(theta, nf.e) - g_of(theta, nf)
}

pub fn h_prime(theta: f64, nf: &NormalForm) -> f64 {
    2.0 * f_prime(theta, nf.e) - g_prime(theta, nf)
}

/// Sign data of `H'`: `sign H'(θ) = sign(cos(2θ + big_phi) + kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaPhi {
    pub kappa: f64,
    pub big_phi: f64,
    pub amplitude: f64,
}

/// Defined for foci with `E ≠ 1` and for nodes.
pub fn kappa_phi(nf: &NormalForm) -> Option<KappaPhi> {
    let e2 = nf.e * nf.e;
    let (s2, c2) = (2.0 * nf.phi).sin_cos();
    match nf.kind {
        NormalKind::Focus if (nf.e - 1.0).abs() > 1e-9 => {
            let amplitude = (5.0 - 4.0 * c2).sqrt();
            Some(KappaPhi {
                kappa: (e2 + 1.0) / (amplitude * (e2 - 1.0)),
                big_phi: (2.0 * s2).atan2(2.0 * c2 - 1.0),
                amplitude,
            })
        }
        NormalKind::Node => {
            let x = (e2 - 1.0) * c2;
            let y = -2.0 * (e2 + 1.0) * s2;
            let amplitude = x.hypot(y);
            (amplitude > 0.0).then(|| KappaPhi {
                kappa: (e2 + 1.0) * (2.0 - c2) / amplitude,
                big_phi: y.atan2(x),
                amplitude,
            })
        }
        _ => None,
    }
}

/// Interval of constant-field angles `α` (adapted basis) with three fixed points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaWindow {
    pub start: f64,
    pub width: f64,
}

impl AlphaWindow {
    pub fn contains(&self, alpha: f64) -> bool {
        let d = (alpha - self.start).rem_euclid(TAU);
        d > 0.0 && d < self.width
    }

    pub fn end(&self) -> f64 {
        self.start + self.width
    }
}

/// Local maxima and minima of `H` in one period, from the sign law.
fn h_extrema(nf: &NormalForm) -> Option<[(f64, f64); 2]> {
    let kp = kappa_phi(nf)?;
    if kp.kappa >= 1.0 {
        return None;
    }
    let beta = (-kp.kappa).acos();
    let top = 0.5 * (beta - kp.big_phi);
    let bottom = top + PI - beta;
    Some([(top, bottom), (top + PI, bottom + PI)])
}

pub fn monstar_alpha_window(nf: &NormalForm) -> Vec<AlphaWindow> {
    let Some(ext) = h_extrema(nf) else {
        return Vec::new();
    };
    ext.iter()
        .map(|&(top, bottom)| {
            let lo = h_of(bottom, nf);
            AlphaWindow {
                start: lo.rem_euclid(TAU),
                width: h_of(top, nf) - lo,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    Attractive,
    Repulsive,
    Marginal,
}

/// Band around slope 1 counted as marginal.
pub const MARGINAL_BAND: f64 = 1e-6;

impl Stability {
    pub fn from_slope(slope: f64) -> Self {
        if (slope - 1.0).abs() < MARGINAL_BAND {
            Stability::Marginal
        } else if slope > 1.0 {
            Stability::Attractive
        } else {
            Stability::Repulsive
        }
    }
}

/// Fixed ray of the bisector map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    /// Ray angle in original coordinates, in `[-π, π)`.
    pub theta: f64,
    /// Ray angle in the adapted basis.
    pub theta_normal: f64,
    /// Derivative of the ray map at the fixed point.
    pub slope: f64,
    pub stability: Stability,
}

fn to_half_open(theta: f64) -> f64 {
    let r = (theta + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        -PI
    } else {
        r
    }
}

fn wrap_signed(v: f64) -> f64 {
    (v + PI).rem_euclid(TAU) - PI
}

pub fn fixed_points(lin: &LinearPlf) -> Result<Vec<FixedPoint>, LinearError> {
    Ok(fixed_points_of(&normal_form(lin)?))
}

pub fn fixed_points_of(nf: &NormalForm) -> Vec<FixedPoint> {
    let n = ((512.0 * nf.e.max(1.0 / nf.e)).ceil() as usize).max(512);
    let alpha = nf.alpha;
    let thetas: Vec<f64> = (0..=n).map(|i| -PI + TAU * i as f64 / n as f64).collect();
    let hs: Vec<f64> = thetas.iter().map(|&t| h_of(t, nf)).collect();
    let mut roots: Vec<f64> = Vec::new();
    for i in 0..n {
        let (h0, h1) = (hs[i], hs[i + 1]);
        if h1 > h0 {
            let mut k = ((h0 - alpha) / TAU).ceil();
            while alpha + TAU * k < h1 {
                let target = alpha + TAU * k;
                if target >= h0 {
                    roots.push(bisect(nf, thetas[i], thetas[i + 1], target));
                }
                k += 1.0;
            }
        } else if h1 < h0 {
            let mut k = ((h0 - alpha) / TAU).floor();
            while alpha + TAU * k > h1 {
                let target = alpha + TAU * k;
                if target <= h0 {
                    roots.push(bisect(nf, thetas[i], thetas[i + 1], target));
                }
                k -= 1.0;
            }
        }
    }
    // tangencies at the extrema of H are missed by sign changes
    let mut tangent = Vec::new();
    if let Some(ext) = h_extrema(nf) {
        for &(top, bottom) in &ext {
            for t in [top, bottom] {
                if wrap_signed(h_of(t, nf) - alpha).abs() < 1e-9 {
                    tangent.push(to_half_open(t));
                }
            }
        }
    }
    roots.retain(|r| tangent.iter().all(|t| wrap_signed(r - t).abs() > 1e-6));
    let mut out: Vec<FixedPoint> = roots
        .into_iter()
        .map(|t1| fixed_point_at(nf, t1, false))
        .chain(tangent.into_iter().map(|t1| fixed_point_at(nf, t1, true)))
        .collect();
    out.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    out.dedup_by(|a, b| wrap_signed(a.theta - b.theta).abs() < 1e-9);
    out
}

fn bisect(nf: &NormalForm, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    let f_lo = h_of(lo, nf) - target;
    if f_lo == 0.0 {
        return lo;
    }
    let lo_sign = f_lo > 0.0;
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        let fm = h_of(mid, nf) - target;
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn fixed_point_at(nf: &NormalForm, t1: f64, tangent: bool) -> FixedPoint {
    let slope = 1.0 - h_prime(t1, nf) / (2.0 * f_prime(t1, nf.e));
    let theta_normal = to_half_open(f_of(t1, nf.e));
    FixedPoint {
        theta: to_half_open(nf.original_angle(theta_normal)),
        theta_normal,
        slope,
        stability: if tangent {
            Stability::Marginal
        } else {
            Stability::from_slope(slope)
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    Case1,
    Case2,
    Case3,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Darboux {
    Lemon,
    Monstar,
    Star,
}

impl Case {
    pub fn darboux(self) -> Option<Darboux> {
        match self {
            Case::Case1 => Some(Darboux::Lemon),
            Case::Case2 => Some(Darboux::Monstar),
            Case::Case3 => Some(Darboux::Star),
            Case::Degenerate => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub case: Case,
    pub darboux: Option<Darboux>,
    pub fixed_points: Vec<FixedPoint>,
    pub normal_form: NormalForm,
    pub kappa_phi: Option<KappaPhi>,
    /// No fixed point is marginal.
    pub hyper_hyperbolic: bool,
}

/// Whether the rays at `angles` fit in an open half-plane.
pub fn in_half_plane(angles: &[f64]) -> bool {
    largest_gap(angles).is_none_or(|(gap, _)| gap > PI)
}

/// Largest angular gap and the index of the ray following it.
fn largest_gap(angles: &[f64]) -> Option<(f64, usize)> {
    if angles.len() < 2 {
        return None;
    }
    let mut sorted: Vec<(f64, usize)> = angles
        .iter()
        .enumerate()
        .map(|(i, a)| (a.rem_euclid(TAU), i))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    (0..n)
        .map(|k| {
            let next = sorted[(k + 1) % n];
            let gap = (next.0 - sorted[k].0).rem_euclid(TAU);
            (if gap == 0.0 && n == 1 { TAU } else { gap }, next.1)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
}

pub fn classify(lin: &LinearPlf) -> Result<Classification, LinearError> {
    let nf = normal_form(lin)?;
    let fps = fixed_points_of(&nf);
    let kp = kappa_phi(&nf);
    let marginal = fps.iter().any(|f| f.stability == Stability::Marginal);
    let case = case_of(&fps).ok_or_else(|| {
        LinearError::Inconsistent(format!(
            "{} fixed points, {} repulsive",
            fps.len(),
            fps.iter()
                .filter(|f| f.stability == Stability::Repulsive)
                .count()
        ))
    })?;
    if case != Case::Degenerate {
        let expect_case1 = nf.kind == NormalKind::ScaledRotation
            || (nf.kind == NormalKind::Focus && (nf.e - 1.0).abs() <= 1e-9)
            || kp.is_some_and(|k| k.kappa >= 1.0);
        if (nf.kind == NormalKind::Saddle) != (case == Case::Case3)
            || (expect_case1 && case != Case::Case1)
        {
            return Err(LinearError::Inconsistent(format!(
                "{:?} normal form classified as {:?}",
                nf.kind, case
            )));
        }
    }
    Ok(Classification {
        case,
        darboux: case.darboux(),
        fixed_points: fps,
        normal_form: nf,
        kappa_phi: kp,
        hyper_hyperbolic: !marginal,
    })
}

/// Case read off a list of fixed rays: `None` when the list fits none of
/// the three generic patterns and has no marginal ray.
pub fn case_of(fps: &[FixedPoint]) -> Option<Case> {
    if fps.iter().any(|f| f.stability == Stability::Marginal) {
        return Some(Case::Degenerate);
    }
    let repulsive = fps
        .iter()
        .filter(|f| f.stability == Stability::Repulsive)
        .count();
    let angles: Vec<f64> = fps.iter().map(|f| f.theta).collect();
    match (fps.len(), repulsive) {
        (1, 1) => Some(Case::Case1),
        (3, 3) if !in_half_plane(&angles) => Some(Case::Case3),
        (3, 2) if in_half_plane(&angles) && attractive_in_middle(fps) => Some(Case::Case2),
        _ => None,
    }
}

/// In a half-plane triple, the attractive ray sits between the two others.
fn attractive_in_middle(fps: &[FixedPoint]) -> bool {
    let angles: Vec<f64> = fps.iter().map(|f| f.theta).collect();
    let Some((_, first)) = largest_gap(&angles) else {
        return false;
    };
    let base = angles[first];
    let mut order: Vec<usize> = (0..fps.len()).collect();
    order.sort_by(|&i, &j| {
        (angles[i] - base)
            .rem_euclid(TAU)
            .total_cmp(&(angles[j] - base).rem_euclid(TAU))
    });
    fps[order[1]].stability == Stability::Attractive
}
