//! Locating and classifying the singularities of a proto-line-field.

use serde::{Deserialize, Serialize};

use crate::blowup::{linearize, BlowupError, Linearization};
use crate::fields::{find_zeros_in, Domain, FieldError, ProtoLineField, Rect, Vec2};
use crate::index::{classify_jacobian, winding_index_lf, ZeroType};
use crate::linear::{classify, Case, Darboux, FixedPoint, LinearError, NormalForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vanishing {
    X,
    Y,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", content = "detail", rename_all = "snake_case")]
pub enum Flag {
    BothVanish,
    NonHyperbolic,
    NonGeneric,
    Marginal,
    Inconsistent(String),
    IndexFailed(String),
    IndexMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub location: [f64; 2],
    pub vanishing: Vanishing,
    pub zero_type: ZeroType,
    /// Determinant of the vanishing field's Jacobian.
    pub det: f64,
    pub twice_index: Option<i32>,
    pub index_radius: f64,
    pub case: Case,
    pub darboux: Option<Darboux>,
    pub kappa: Option<f64>,
    pub big_phi: Option<f64>,
    pub fixed_points: Vec<FixedPoint>,
    pub normal_form: Option<NormalForm>,
    pub linearization: Option<Linearization>,
    pub flags: Vec<Flag>,
}

impl SingularityReport {
    pub fn p(&self) -> Vec2 {
        Vec2::new(self.location[0], self.location[1])
    }

    pub fn is_degenerate(&self) -> bool {
        self.case == Case::Degenerate
    }

    pub fn class_name(&self) -> &'static str {
        match self.darboux {
            Some(Darboux::Lemon) => "Lemon",
            Some(Darboux::Monstar) => "Monstar",
            Some(Darboux::Star) => "Star",
            None => "Degenerate",
        }
    }
}

/// Zeros of `X` and `Y` in `rect`, merged; points where both vanish are
/// reported once as [`Vanishing::Both`].
pub fn locate_singularities(
    l: &ProtoLineField,
    rect: &Rect,
    grid: usize,
) -> Vec<(Vec2, Vanishing)> {
    locate_in(l, &Domain::Rect(*rect), grid)
}

/// As [`locate_singularities`], with torus zeros identified modulo the periods.
pub fn locate_in(l: &ProtoLineField, domain: &Domain, grid: usize) -> Vec<(Vec2, Vanishing)> {
    let zx = find_zeros_in(&l.x, domain, grid).roots;
    let zy = find_zeros_in(&l.y, domain, grid).roots;
    let mut out: Vec<(Vec2, Vanishing)> = zx.iter().map(|z| (z.p(), Vanishing::X)).collect();
    for z in &zy {
        match out
            .iter_mut()
            .find(|(p, _)| domain.distance(*p, z.p()) < 1e-6)
        {
            Some(entry) => entry.1 = Vanishing::Both,
            None => out.push((z.p(), Vanishing::Y)),
        }
    }
    out.sort_by(|a, b| a.0.x.total_cmp(&b.0.x).then(a.0.y.total_cmp(&b.0.y)));
    out
}

/// Finds, linearizes, classifies and indexes every singularity in `rect`.
pub fn analyze(
    l: &ProtoLineField,
    rect: &Rect,
    grid: usize,
) -> Result<Vec<SingularityReport>, FieldError> {
    analyze_in(l, &Domain::Rect(*rect), grid)
}

pub fn analyze_in(
    l: &ProtoLineField,
    domain: &Domain,
    grid: usize,
) -> Result<Vec<SingularityReport>, FieldError> {
    let found = locate_in(l, domain, grid);
    let bounds = domain.bounds();
    let cap = 0.1 * bounds.width().min(bounds.height());
    let mut out = Vec::with_capacity(found.len());
    for (i, &(p, vanishing)) in found.iter().enumerate() {
        let nearest = found
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| domain.distance(q.0, p))
            .fold(f64::INFINITY, f64::min);
        let radius = (0.4 * nearest).min(cap);
        out.push(analyze_point(l, p, vanishing, radius)?);
    }
    Ok(out)
}

pub fn analyze_point(
    l: &ProtoLineField,
    p: Vec2,
    vanishing: Vanishing,
    index_radius: f64,
) -> Result<SingularityReport, FieldError> {
    let field = if vanishing == Vanishing::Y {
        &l.y
    } else {
        &l.x
    };
    let jac = field.jacobian(p)?;
    let mut report = SingularityReport {
        location: [p.x, p.y],
        vanishing,
        zero_type: classify_jacobian(&jac),
        det: jac.determinant(),
        twice_index: None,
        index_radius,
        case: Case::Degenerate,
        darboux: None,
        kappa: None,
        big_phi: None,
        fixed_points: Vec::new(),
        normal_form: None,
        linearization: None,
        flags: Vec::new(),
    };
    if vanishing == Vanishing::Both {
        report.flags.push(Flag::BothVanish);
        return Ok(report);
    }
    if report.zero_type == ZeroType::Degenerate {
        report.flags.push(Flag::NonHyperbolic);
    }
    match winding_index_lf(l, p, index_radius, 256) {
        Ok(r) => report.twice_index = Some(r.twice_index),
        Err(e) => report.flags.push(Flag::IndexFailed(e.to_string())),
    }
    if report.zero_type == ZeroType::Degenerate {
        return Ok(report);
    }
    let lin = match linearize(l, p) {
        Ok(lin) => lin,
        Err(BlowupError::Field(e)) => return Err(e),
        Err(e) => {
            report.flags.push(Flag::Inconsistent(e.to_string()));
            return Ok(report);
        }
    };
    report.linearization = Some(lin);
    match classify(&lin.linear_plf()) {
        Ok(c) => {
            report.case = c.case;
            report.darboux = c.darboux;
            report.kappa = c.kappa_phi.map(|k| k.kappa);
            report.big_phi = c.kappa_phi.map(|k| k.big_phi);
            report.normal_form = Some(c.normal_form);
            // Fixed rays back in the coordinates of the original chart.
            report.fixed_points = c
                .fixed_points
                .iter()
                .map(|f| {
                    let d = lin.world_direction(f.theta);
                    FixedPoint {
                        theta: d.y.atan2(d.x),
                        ..*f
                    }
                })
                .collect();
            if !c.hyper_hyperbolic {
                report.flags.push(Flag::Marginal);
            }
        }
        Err(LinearError::NonGenericLinearization) => report.flags.push(Flag::NonGeneric),
        Err(e) => report.flags.push(Flag::Inconsistent(e.to_string())),
    }
    let expected = match report.darboux {
        Some(Darboux::Lemon | Darboux::Monstar) => Some(1),
        Some(Darboux::Star) => Some(-1),
        None => None,
    };
    if let (Some(e), Some(t)) = (expected, report.twice_index) {
        if e != t {
            report.flags.push(Flag::IndexMismatch);
        }
    }
    Ok(report)
}
