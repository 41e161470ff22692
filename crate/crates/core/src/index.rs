//! Winding indices of vector fields and bisector line fields.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{
    find_zeros_in, g_norm, Domain, FieldError, Mat2, ProtoLineField, Vec2, VectorField,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexResult {
    /// Twice the index; even for vector fields.
    pub twice_index: i32,
    pub center: [f64; 2],
    pub radius: f64,
    pub samples: usize,
    /// Largest unwrapped angle increment between neighbouring samples.
    pub max_step: f64,
}

impl IndexResult {
    pub fn index(&self) -> f64 {
        self.twice_index as f64 / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("field vanishes on the sampling circle near ({x}, {y})")]
    VanishesOnCircle { x: f64, y: f64 },
    #[error("angle unwrapping unreliable (max step {max_step:.3}, residue {residue:.3})")]
    Unwrap { max_step: f64, residue: f64 },
    #[error("both fields vanish at ({x}, {y})")]
    BothVanish { x: f64, y: f64 },
    #[error("zero sets of X and Y intersect near ({x}, {y})")]
    OverlappingZeros { x: f64, y: f64 },
    #[error("operation requires a torus domain")]
    NotTorus,
    #[error("no zero at ({x}, {y})")]
    NotAZero { x: f64, y: f64 },
}

/// Minimum number of circle samples.
pub const MIN_SAMPLES: usize = 64;

fn circle(center: Vec2, radius: f64, n: usize) -> impl Iterator<Item = Vec2> {
    (0..n).map(move |k| {
        let t = TAU * k as f64 / n as f64;
        center + radius * Vec2::new(t.cos(), t.sin())
    })
}

/// Sums the increments of `angles` (closed loop), each reduced to
/// `(-period/2, period/2]`. Returns `(total, max |increment|)`.
fn unwrap_loop(angles: &[f64], period: f64) -> (f64, f64) {
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for k in 0..angles.len() {
        let a = angles[k];
        let b = angles[(k + 1) % angles.len()];
        let mut d = (b - a).rem_euclid(period);
        if d > period / 2.0 {
            d -= period;
        }
        total += d;
        max_step = max_step.max(d.abs());
    }
    (total, max_step)
}

/// Integer winding of `v` around the circle, with the Euclidean angle.
pub fn winding_index_vf(
    v: &VectorField,
    center: Vec2,
    radius: f64,
    n: usize,
) -> Result<IndexResult, IndexError> {
    let n = n.max(MIN_SAMPLES);
    match winding_vf_once(v, center, radius, n) {
        Err(IndexError::Unwrap { .. }) => winding_vf_once(v, center, radius, 4 * n),
        r => r,
    }
}

fn winding_vf_once(
    v: &VectorField,
    center: Vec2,
    radius: f64,
    n: usize,
) -> Result<IndexResult, IndexError> {
    let vals = circle(center, radius, n)
        .map(|p| v.eval(p).map_err(FieldError::from))
        .collect::<Result<Vec<_>, _>>()?;
    let max_norm = vals.iter().map(|w| w.norm()).fold(0.0, f64::max);
    for (k, w) in vals.iter().enumerate() {
        if w.norm() <= 1e-12 * max_norm || max_norm == 0.0 {
            let t = TAU * k as f64 / n as f64;
            return Err(IndexError::VanishesOnCircle {
                x: center.x + radius * t.cos(),
                y: center.y + radius * t.sin(),
            });
        }
    }
    let angles: Vec<f64> = vals.iter().map(|w| w.y.atan2(w.x)).collect();
    let (total, max_step) = unwrap_loop(&angles, TAU);
    let turns = total / TAU;
    let residue = (turns - turns.round()).abs();
    if max_step >= PI / 2.0 || residue > 0.1 {
        return Err(IndexError::Unwrap { max_step, residue });
    }
    Ok(IndexResult {
        twice_index: 2 * turns.round() as i32,
        center: [center.x, center.y],
        radius,
        samples: n,
        max_step,
    })
}

/// Largest angle step accepted when unwrapping mod π.
const LINE_STEP_LIMIT: f64 = PI / 4.0;

/// Half-integer winding of an arbitrary line-valued map around the circle.
pub fn winding_index_section<F>(
    f: F,
    center: Vec2,
    radius: f64,
    n: usize,
) -> Result<IndexResult, IndexError>
where
    F: Fn(Vec2) -> Result<f64, FieldError>,
{
    let n = n.max(MIN_SAMPLES);
    let mut last = Err(IndexError::Unwrap {
        max_step: 0.0,
        residue: 0.0,
    });
    for samples in [n, 4 * n] {
        let angles = circle(center, radius, samples)
            .map(&f)
            .collect::<Result<Vec<_>, _>>()?;
        let (total, max_step) = unwrap_loop(&angles, PI);
        let halves = total / PI;
        let residue = (halves - halves.round()).abs();
        if max_step >= LINE_STEP_LIMIT || residue > 0.1 {
            last = Err(IndexError::Unwrap { max_step, residue });
            continue;
        }
        return Ok(IndexResult {
            twice_index: halves.round() as i32,
            center: [center.x, center.y],
            radius,
            samples,
            max_step,
        });
    }
    last
}

fn vanishing_as_index_error(e: FieldError) -> IndexError {
    match e {
        FieldError::Singular { x, y } => IndexError::VanishesOnCircle { x, y },
        e => IndexError::Field(e),
    }
}

/// Line-field index of the bisector, unwrapping Euclidean line angles.
pub fn winding_index_lf(
    l: &ProtoLineField,
    center: Vec2,
    radius: f64,
    n: usize,
) -> Result<IndexResult, IndexError> {
    winding_index_section(
        |p| {
            let d = l.direction(p)?;
            Ok(d.y.atan2(d.x))
        },
        center,
        radius,
        n,
    )
    .map_err(|e| match e {
        IndexError::Field(f) => vanishing_as_index_error(f),
        e => e,
    })
}

/// Line-field index of the bisector, unwrapping its `g`-frame angles.
pub fn winding_index_lf_frame(
    l: &ProtoLineField,
    center: Vec2,
    radius: f64,
    n: usize,
) -> Result<IndexResult, IndexError> {
    winding_index_section(|p| Ok(l.bisector(p)?.value()), center, radius, n).map_err(|e| match e {
        IndexError::Field(f) => vanishing_as_index_error(f),
        e => e,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexIdentity {
    pub index_x: i32,
    pub index_y: i32,
    pub twice_index_bisector: i32,
    pub holds: bool,
}

/// Compares twice the bisector index with `ind X + ind Y` around `p`.
pub fn check_index_identity(
    l: &ProtoLineField,
    p: Vec2,
    radius: f64,
) -> Result<IndexIdentity, IndexError> {
    let (x, y, g) = l.eval(p)?;
    let tol = 1e-9 * l.scale;
    if g_norm(&g, x) < tol && g_norm(&g, y) < tol {
        return Err(IndexError::BothVanish { x: p.x, y: p.y });
    }
    let n = 256;
    let ix = winding_index_vf(&l.x, p, radius, n)?.twice_index / 2;
    let iy = winding_index_vf(&l.y, p, radius, n)?.twice_index / 2;
    let b = winding_index_lf(l, p, radius, n)?.twice_index;
    Ok(IndexIdentity {
        index_x: ix,
        index_y: iy,
        twice_index_bisector: b,
        holds: b == ix + iy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZeroType {
    Focus,
    Node,
    Saddle,
    Degenerate,
}

/// Trichotomy of an invertible Jacobian by determinant and discriminant.
/// A scalar multiple of the identity counts as a node.
pub fn classify_jacobian(j: &Mat2) -> ZeroType {
    let tol = 1e-9 * j.norm_squared();
    let det = j.determinant();
    let tr = j.trace();
    let disc = tr * tr - 4.0 * det;
    if det < -tol {
        return ZeroType::Saddle;
    }
    if det <= tol {
        return ZeroType::Degenerate;
    }
    if disc > tol {
        return ZeroType::Node;
    }
    if disc < -tol {
        return ZeroType::Focus;
    }
    let off = j - Mat2::identity() * (tr / 2.0);
    if off.norm() <= 1e-9 * j.norm() {
        ZeroType::Node
    } else {
        ZeroType::Degenerate
    }
}

pub fn hyperbolic_zero_type(v: &VectorField, p: Vec2) -> Result<ZeroType, IndexError> {
    let j = v.jacobian(p).map_err(FieldError::from)?;
    let f = v.eval(p).map_err(FieldError::from)?;
    if f.norm() > 1e-9 * (1.0 + j.norm()) {
        return Err(IndexError::NotAZero { x: p.x, y: p.y });
    }
    Ok(classify_jacobian(&j))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusSingularity {
    pub point: [f64; 2],
    pub twice_index: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareHopfReport {
    pub singularities: Vec<TorusSingularity>,
    pub twice_index_sum: i32,
    /// The sum matches the Euler characteristic of the torus.
    pub holds: bool,
}

/// Sums the bisector indices over the singularities of a torus pair.
pub fn poincare_hopf_torus(
    l: &ProtoLineField,
    seeds: usize,
) -> Result<PoincareHopfReport, IndexError> {
    let Domain::Torus { periods, .. } = l.domain else {
        return Err(IndexError::NotTorus);
    };
    let zx = find_zeros_in(&l.x, &l.domain, seeds).roots;
    let zy = find_zeros_in(&l.y, &l.domain, seeds).roots;
    for a in &zx {
        if let Some(b) = zy.iter().find(|b| l.domain.distance(a.p(), b.p()) < 1e-6) {
            return Err(IndexError::OverlappingZeros {
                x: b.point[0],
                y: b.point[1],
            });
        }
    }
    let points: Vec<Vec2> = zx.iter().chain(zy.iter()).map(|z| z.p()).collect();
    let cap = 0.25 * periods.x.min(periods.y);
    let mut singularities = Vec::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        let nearest = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &q)| l.domain.distance(p, q))
            .fold(f64::INFINITY, f64::min);
        let radius = (0.4 * nearest).min(cap);
        let r = winding_index_lf(l, p, radius, 256)?;
        singularities.push(TorusSingularity {
            point: [p.x, p.y],
            twice_index: r.twice_index,
        });
    }
    let sum = singularities.iter().map(|s| s.twice_index).sum();
    Ok(PoincareHopfReport {
        singularities,
        twice_index_sum: sum,
        holds: sum == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Expr};
    use crate::fields::{Metric, Rect};

    #[test]
    fn canonical_line_indices() {
        let r = winding_index_lf(&ProtoLineField::lemon(), Vec2::zeros(), 0.5, 256).unwrap();
        assert_eq!(r.twice_index, 1);
        assert!(r.max_step < PI / 2.0);
        let r = winding_index_lf(&ProtoLineField::monstar(), Vec2::zeros(), 0.5, 256).unwrap();
        assert_eq!(r.twice_index, 1);
        let r = winding_index_lf(&ProtoLineField::star(), Vec2::zeros(), 0.5, 256).unwrap();
        assert_eq!(r.twice_index, -1);
    }

    #[test]
    fn power_section_index() {
        // arg(z^{5/2}) mod π
        let r =
            winding_index_section(|p| Ok(2.5 * p.y.atan2(p.x)), Vec2::zeros(), 1.0, 256).unwrap();
        assert_eq!(r.twice_index, 5);
    }

    #[test]
    fn vector_field_indices() {
        let v = VectorField::linear(&Mat2::new(1.0, 0.0, 0.0, -1.0));
        assert_eq!(
            winding_index_vf(&v, Vec2::zeros(), 0.3, 64)
                .unwrap()
                .twice_index,
            -2
        );
        let v = VectorField::parse("x^2 - y^2", "2*x*y").unwrap();
        assert_eq!(
            winding_index_vf(&v, Vec2::zeros(), 0.3, 64)
                .unwrap()
                .twice_index,
            4
        );
        let err = winding_index_vf(&v, Vec2::new(0.3, 0.0), 0.3, 64).unwrap_err();
        assert!(matches!(err, IndexError::VanishesOnCircle { .. }));
    }

    #[test]
    fn index_identity_holds_for_trio() {
        for l in [
            ProtoLineField::lemon(),
            ProtoLineField::monstar(),
            ProtoLineField::star(),
        ] {
            let r = check_index_identity(&l, Vec2::zeros(), 0.5).unwrap();
            assert!(r.holds, "{r:?}");
            assert_eq!(r.index_y, 0);
        }
    }

    #[test]
    fn index_identity_rejects_shared_zero() {
        let l = ProtoLineField::planar(
            VectorField::linear(&Mat2::new(1.0, 1.0, -1.0, 1.0)),
            VectorField::linear(&Mat2::new(1.0, 0.0, 0.0, -1.0)),
        );
        assert!(matches!(
            check_index_identity(&l, Vec2::zeros(), 0.5),
            Err(IndexError::BothVanish { .. })
        ));
    }

    #[test]
    fn zero_types() {
        let t = |a, b, c, d| classify_jacobian(&Mat2::new(a, b, c, d));
        assert_eq!(t(1.0, 1.0, -1.0, 1.0), ZeroType::Focus);
        assert_eq!(t(1.0, 0.0, 0.0, 3.0), ZeroType::Node);
        assert_eq!(t(1.0, 0.0, 0.0, -1.0), ZeroType::Saddle);
        assert_eq!(t(0.0, 0.0, 0.0, 0.0), ZeroType::Degenerate);
        assert_eq!(t(1.0, 1.0, 0.0, 1.0), ZeroType::Degenerate);
        assert_eq!(t(2.0, 0.0, 0.0, 2.0), ZeroType::Node);
        let v = VectorField::parse("x + y", "y - x").unwrap();
        assert_eq!(
            hyperbolic_zero_type(&v, Vec2::zeros()).unwrap(),
            ZeroType::Focus
        );
        assert!(hyperbolic_zero_type(&v, Vec2::new(1.0, 0.0)).is_err());
    }

    fn sine_torus(y: (&str, &str)) -> Result<ProtoLineField, FieldError> {
        ProtoLineField::new(
            VectorField::parse("sin(x)", "sin(y)")?,
            VectorField::parse(y.0, y.1)?,
            Metric::euclidean(),
            Domain::Torus {
                origin: Vec2::zeros(),
                periods: Vec2::new(TAU, TAU),
            },
        )
    }

    #[test]
    fn torus_sine_field() {
        let l = sine_torus(("1", "0")).unwrap();
        let r = poincare_hopf_torus(&l, 16).unwrap();
        assert_eq!(r.singularities.len(), 4);
        assert_eq!(r.twice_index_sum, 0);
        let mut got: Vec<(i64, i64, i32)> = r
            .singularities
            .iter()
            .map(|s| {
                (
                    (s.point[0] / PI).round() as i64,
                    (s.point[1] / PI).round() as i64,
                    s.twice_index,
                )
            })
            .collect();
        got.sort();
        assert_eq!(got, vec![(0, 0, 1), (0, 1, -1), (1, 0, -1), (1, 1, 1)]);
    }

    #[test]
    fn torus_rejects_overlap_and_plane() {
        let l = sine_torus(("sin(x)", "sin(2*y)")).unwrap();
        assert!(matches!(
            poincare_hopf_torus(&l, 16),
            Err(IndexError::OverlappingZeros { .. })
        ));
        assert!(matches!(
            poincare_hopf_torus(&ProtoLineField::lemon(), 8),
            Err(IndexError::NotTorus)
        ));
    }

    #[test]
    fn euclidean_and_frame_unwrapping_agree() {
        let g = Metric {
            g11: parse("2 + x").unwrap(),
            g12: parse("0.3*y").unwrap(),
            g22: Expr::from(1.5),
        };
        for l in [ProtoLineField::lemon(), ProtoLineField::star()] {
            let l = l
                .with_metric(g.clone())
                .with_domain(Domain::Rect(Rect::square(1.0)));
            let a = winding_index_lf(&l, Vec2::zeros(), 0.4, 128).unwrap();
            let b = winding_index_lf_frame(&l, Vec2::zeros(), 0.4, 128).unwrap();
            assert_eq!(a.twice_index, b.twice_index);
        }
    }
}
