//! Integral curves of the bisector line field and portrait assembly.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::fields::{Domain, FieldError, ProtoLineField, Rect, Vec2};
use crate::linear::Stability;
use crate::singularity::{analyze_in, SingularityReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Boundary,
    Singularity,
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonTag {
    /// Index into [`Portrait::singularities`].
    pub singularity: usize,
    pub theta: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Streamline {
    pub points: Vec<[f64; 2]>,
    pub termination: Termination,
    pub length: f64,
    pub tag: Option<SkeletonTag>,
}

impl Streamline {
    pub fn point(&self, i: usize) -> Vec2 {
        Vec2::new(self.points[i][0], self.points[i][1])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        (1..self.points.len()).map(|i| (self.point(i - 1), self.point(i)))
    }
}

/// Integration settings shared by every curve in a portrait.
#[derive(Debug, Clone)]
pub struct Tracer<'a> {
    pub field: &'a ProtoLineField,
    pub bounds: Rect,
    pub step: f64,
    pub max_len: f64,
    /// Known singular points; a curve heading into one within `step` ends on it.
    pub singular_points: Vec<Vec2>,
}

impl<'a> Tracer<'a> {
    pub fn new(field: &'a ProtoLineField, bounds: Rect, step: f64, max_len: f64) -> Self {
        Tracer {
            field,
            bounds,
            step,
            max_len,
            singular_points: Vec::new(),
        }
    }

    fn near_singular(&self, p: Vec2) -> Result<bool, FieldError> {
        Ok(self.field.min_norm(p)? < 1e-6 * self.field.scale)
    }

    /// Bisector direction at `p`, oriented along `prev`.
    fn oriented(&self, p: Vec2, prev: Vec2) -> Result<Vec2, FieldError> {
        let d = self.field.direction(p)?;
        Ok(if d.dot(&prev) < 0.0 { -d } else { d })
    }

    fn rk4(&self, p: Vec2, prev: Vec2, h: f64) -> Result<(Vec2, Vec2), FieldError> {
        let k1 = self.oriented(p, prev)?;
        let k2 = self.oriented(p + 0.5 * h * k1, k1)?;
        let k3 = self.oriented(p + 0.5 * h * k2, k1)?;
        let k4 = self.oriented(p + h * k3, k1)?;
        Ok((p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), k1))
    }

    /// Point where the segment `a → b` leaves the bounds.
    fn clip(&self, a: Vec2, b: Vec2) -> Vec2 {
        let mut t: f64 = 1.0;
        for k in 0..2 {
            let d = b[k] - a[k];
            if d > 0.0 && b[k] > self.bounds.max[k] {
                t = t.min((self.bounds.max[k] - a[k]) / d);
            } else if d < 0.0 && b[k] < self.bounds.min[k] {
                t = t.min((self.bounds.min[k] - a[k]) / d);
            }
        }
        a + t.max(0.0) * (b - a)
    }

    fn captured(&self, p: Vec2, heading: Vec2) -> Option<Vec2> {
        self.singular_points
            .iter()
            .copied()
            .find(|s| (s - p).norm() <= self.step && heading.dot(&(s - p)) > 0.0)
    }

    /// Traces from `p0` with the initial orientation closest to `heading`.
    pub fn trace(&self, p0: Vec2, heading: Vec2) -> Result<Streamline, FieldError> {
        let mut dir = self.oriented(p0, heading)?;
        let mut p = p0;
        let mut points = vec![[p.x, p.y]];
        let mut length = 0.0;
        let termination = loop {
            if length >= self.max_len {
                break Termination::StepLimit;
            }
            if let Some(s) = self.captured(p, dir) {
                points.push([s.x, s.y]);
                length += (s - p).norm();
                break Termination::Singularity;
            }
            let h = self.step.min(self.max_len - length);
            let (next, k1) = match self.rk4(p, dir, h) {
                Ok(r) => r,
                Err(FieldError::Singular { .. }) => break Termination::Singularity,
                Err(e) => return Err(e),
            };
            if !self.bounds.contains(next, 0.0) {
                let q = self.clip(p, next);
                points.push([q.x, q.y]);
                length += (q - p).norm();
                break Termination::Boundary;
            }
            dir = next - p;
            dir /= dir.norm();
            if dir.dot(&k1) < 0.0 {
                dir = -dir;
            }
            p = next;
            points.push([p.x, p.y]);
            length += h;
            if self.near_singular(p)? {
                break Termination::Singularity;
            }
        };
        Ok(Streamline {
            points,
            termination,
            length,
            tag: None,
        })
    }

    /// Both halves of the leaf through `p0`, joined into one curve. The
    /// termination is that of the forward half.
    pub fn trace_leaf(&self, p0: Vec2) -> Result<Streamline, FieldError> {
        let d = self.field.direction(p0)?;
        let fwd = self.trace(p0, d)?;
        let bwd = self.trace(p0, -d)?;
        let mut points: Vec<[f64; 2]> = bwd.points.into_iter().rev().collect();
        points.extend_from_slice(&fwd.points[1..]);
        Ok(Streamline {
            points,
            termination: fwd.termination,
            length: fwd.length + bwd.length,
            tag: None,
        })
    }
}

/// One-directional streamline from `p0` along the bisector, in the
/// orientation of its frame representative.
pub fn integrate_streamline(
    l: &ProtoLineField,
    p0: Vec2,
    step: f64,
    max_len: f64,
) -> Result<Streamline, FieldError> {
    let tracer = Tracer::new(l, l.domain.bounds(), step, max_len);
    tracer.trace(p0, l.direction(p0)?)
}

/// Separatrices leaving a classified singularity, one per fixed ray.
pub fn skeleton(
    tracer: &Tracer,
    report: &SingularityReport,
    index: usize,
    r0: f64,
) -> Result<Vec<Streamline>, FieldError> {
    let p = report.p();
    let mut out = Vec::with_capacity(report.fixed_points.len());
    if report.is_degenerate() {
        return Ok(out);
    }
    for fp in &report.fixed_points {
        let d = Vec2::new(fp.theta.cos(), fp.theta.sin());
        let mut s = tracer.trace(p + r0 * d, d)?;
        s.points.insert(0, [p.x, p.y]);
        s.length += r0;
        s.tag = Some(SkeletonTag {
            singularity: index,
            theta: fp.theta,
            stability: fp.stability,
        });
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeds {
    Grid(usize),
    List(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitOptions {
    pub step: f64,
    pub max_len: f64,
    pub seeds: Seeds,
    /// A seed closer than this to an existing curve is skipped; defaults to `step / 2`.
    pub separation: Option<f64>,
    pub skeleton_r0: f64,
    /// Seed grid for the zero search.
    pub zero_grid: usize,
}

impl Default for PortraitOptions {
    fn default() -> Self {
        PortraitOptions {
            step: 1e-2,
            max_len: 4.0,
            seeds: Seeds::Grid(20),
            separation: None,
            skeleton_r0: 1e-3,
            zero_grid: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portrait {
    pub bounds: Rect,
    pub singularities: Vec<SingularityReport>,
    pub skeleton: Vec<Streamline>,
    pub streamlines: Vec<Streamline>,
}

impl Portrait {
    pub fn curves(&self) -> impl Iterator<Item = &Streamline> {
        self.skeleton.iter().chain(self.streamlines.iter())
    }
}

/// Spatial hash of curve points for seed rejection.
struct Occupancy {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<Vec2>>,
}

impl Occupancy {
    fn new(cell: f64) -> Self {
        Occupancy {
            cell,
            cells: HashMap::new(),
        }
    }

    fn key(&self, p: Vec2) -> (i64, i64) {
        (
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
        )
    }

    fn insert_curve(&mut self, s: &Streamline) {
        for i in 0..s.len() {
            let p = s.point(i);
            self.cells.entry(self.key(p)).or_default().push(p);
            // Densify long chords so the spacing never exceeds a cell.
            if i > 0 {
                let a = s.point(i - 1);
                let n = ((p - a).norm() / self.cell).ceil() as usize;
                for k in 1..n {
                    let q = a + (p - a) * (k as f64 / n as f64);
                    self.cells.entry(self.key(q)).or_default().push(q);
                }
            }
        }
    }

    fn occupied(&self, p: Vec2) -> bool {
        let (i, j) = self.key(p);
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(pts) = self.cells.get(&(i + di, j + dj)) {
                    if pts.iter().any(|q| (q - p).norm() < self.cell) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

pub fn make_portrait(
    l: &ProtoLineField,
    bounds: Rect,
    opts: &PortraitOptions,
) -> Result<Portrait, FieldError> {
    let domain = match l.domain {
        Domain::Torus { .. } => l.domain,
        Domain::Rect(_) => Domain::Rect(bounds),
    };
    let singularities = analyze_in(l, &domain, opts.zero_grid)?;
    let mut tracer = Tracer::new(l, bounds, opts.step, opts.max_len);
    tracer.singular_points = singularities.iter().map(|s| s.p()).collect();
    let mut occupancy = Occupancy::new(opts.separation.unwrap_or(opts.step / 2.0));
    let mut skel = Vec::new();
    for (i, report) in singularities.iter().enumerate() {
        if !bounds.contains(report.p(), 0.0) {
            continue;
        }
        for s in skeleton(&tracer, report, i, opts.skeleton_r0)? {
            occupancy.insert_curve(&s);
            skel.push(s);
        }
    }
    let seeds: Vec<Vec2> = match &opts.seeds {
        Seeds::Grid(n) => {
            let n = (*n).max(1);
            let (hx, hy) = (bounds.width() / n as f64, bounds.height() / n as f64);
            (0..n)
                .flat_map(|j| (0..n).map(move |i| (i, j)))
                .map(|(i, j)| {
                    Vec2::new(
                        bounds.min[0] + (i as f64 + 0.5) * hx,
                        bounds.min[1] + (j as f64 + 0.5) * hy,
                    )
                })
                .collect()
        }
        Seeds::List(pts) => pts.iter().map(|p| Vec2::new(p[0], p[1])).collect(),
    };
    let mut streamlines = Vec::new();
    for seed in seeds {
        if occupancy.occupied(seed) {
            continue;
        }
        match tracer.trace_leaf(seed) {
            Ok(s) => {
                occupancy.insert_curve(&s);
                streamlines.push(s);
            }
            Err(FieldError::Singular { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(Portrait {
        bounds,
        singularities,
        skeleton: skel,
        streamlines,
    })
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = if ab.norm_squared() == 0.0 {
        0.0
    } else {
        ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0)
    };
    (p - (a + t * ab)).norm()
}

fn directed_hausdorff(a: &Streamline, b: &Streamline) -> f64 {
    (0..a.len())
        .map(|i| {
            let p = a.point(i);
            if b.len() == 1 {
                return (p - b.point(0)).norm();
            }
            b.segments()
                .map(|(u, v)| point_segment_distance(p, u, v))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two polylines.
pub fn hausdorff(a: &Streamline, b: &Streamline) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Proper intersection point of segments `a0a1` and `b0b1`, if any.
fn segment_intersection(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> Option<Vec2> {
    let r = a1 - a0;
    let s = b1 - b0;
    let denom = r.perp(&s);
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = (b0 - a0).perp(&s) / denom;
    let u = (b0 - a0).perp(&r) / denom;
    ((0.0..1.0).contains(&t) && (0.0..1.0).contains(&u)).then(|| a0 + t * r)
}

/// Number of crossings between distinct curves at angle above `min_angle`,
/// ignoring crossings within `exclusion` of the given points.
pub fn transversal_crossings(
    curves: &[&Streamline],
    min_angle: f64,
    exclude: &[Vec2],
    exclusion: f64,
) -> usize {
    let mut count = 0;
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            for (a0, a1) in curves[i].segments() {
                for (b0, b1) in curves[j].segments() {
                    let Some(x) = segment_intersection(a0, a1, b0, b1) else {
                        continue;
                    };
                    if exclude.iter().any(|e| (e - x).norm() < exclusion) {
                        continue;
                    }
                    let (r, s) = (a1 - a0, b1 - b0);
                    let sin = (r.perp(&s) / (r.norm() * s.norm())).abs();
                    if sin.asin() > min_angle {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}
