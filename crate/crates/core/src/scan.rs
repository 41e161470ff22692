//! Classification along one-parameter families.

use serde::{Deserialize, Serialize};

use crate::blowup::{coordinate_ray_fixed_points, coordinate_ray_slope, linearize};
use crate::fields::{FieldError, ProtoLineField, Vec2};
use crate::linear::{case_of, classify, Case, Stability};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub param: f64,
    /// Case of the metric-normalized linearization.
    pub case: Case,
    pub fixed_points: usize,
    pub slopes: Vec<f64>,
    /// Case read from rays in the raw coordinates of the chart, without
    /// normalizing the metric at the singularity. `None` if the ray map
    /// fits no pattern.
    pub convention_case: Option<Case>,
    pub convention_fixed_points: usize,
    pub convention_slopes: Vec<f64>,
    /// Slope of the raw ray map at `θ = 0`.
    pub convention_slope_at_zero: f64,
    pub marginal: bool,
    /// Either case differs from the previous row.
    pub transition: bool,
    pub error: Option<String>,
}

pub fn case_name(case: Option<Case>) -> &'static str {
    match case {
        Some(Case::Case1) => "Lemon",
        Some(Case::Case2) => "Monstar",
        Some(Case::Case3) => "Star",
        Some(Case::Degenerate) => "Degenerate",
        None => "Unclassified",
    }
}

/// Classifies the singularity at `point` for every parameter value.
/// `radius` is the coordinate radius of the raw ray map.
pub fn scan_family<F>(
    params: &[f64],
    point: Vec2,
    radius: f64,
    mut build: F,
) -> Result<Vec<ScanRow>, FieldError>
where
    F: FnMut(f64) -> Result<ProtoLineField, FieldError>,
{
    let mut rows: Vec<ScanRow> = Vec::with_capacity(params.len());
    for &param in params {
        let l = build(param)?;
        let mut row = ScanRow {
            param,
            case: Case::Degenerate,
            fixed_points: 0,
            slopes: Vec::new(),
            convention_case: None,
            convention_fixed_points: 0,
            convention_slopes: Vec::new(),
            convention_slope_at_zero: f64::NAN,
            marginal: false,
            transition: false,
            error: None,
        };
        match linearize(&l, point)
            .map_err(|e| e.to_string())
            .and_then(|lin| classify(&lin.linear_plf()).map_err(|e| e.to_string()))
        {
            Ok(c) => {
                row.case = c.case;
                row.fixed_points = c.fixed_points.len();
                row.slopes = c.fixed_points.iter().map(|f| f.slope).collect();
            }
            Err(e) => row.error = Some(e),
        }
        let fps = coordinate_ray_fixed_points(&l, point, radius, 4096)?;
        row.convention_case = case_of(&fps);
        row.convention_fixed_points = fps.len();
        row.convention_slopes = fps.iter().map(|f| f.slope).collect();
        row.convention_slope_at_zero = coordinate_ray_slope(&l, point, radius, 0.0)?;
        row.marginal =
            row.case == Case::Degenerate || fps.iter().any(|f| f.stability == Stability::Marginal);
        if let Some(prev) = rows.last() {
            row.transition = prev.case != row.case || prev.convention_case != row.convention_case;
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Mat2, Metric};

    #[test]
    fn stretched_family_crosses_marginal_at_two() {
        let params = [1.0, 2.0, 3.0];
        let rows = scan_family(&params, Vec2::zeros(), 1.0, |lambda| {
            Ok(
                ProtoLineField::linear(&Mat2::identity(), Vec2::new(1.0, 0.0))
                    .with_metric(Metric::stretched(lambda)),
            )
        })
        .unwrap();
        for r in &rows {
            assert_eq!(r.case, Case::Case1);
            assert!((r.convention_slope_at_zero - r.param / 2.0).abs() < 1e-6);
        }
        assert_eq!(rows[0].convention_case, Some(Case::Case1));
        assert_eq!(rows[1].convention_case, Some(Case::Degenerate));
        assert!(rows[1].marginal && !rows[0].marginal && !rows[2].marginal);
        assert_eq!(rows[2].convention_case, Some(Case::Case2));
        assert!(rows[1].transition && rows[2].transition);
    }

    #[test]
    fn kappa_above_one_family_is_constant() {
        let params: Vec<f64> = (0..12).map(|k| k as f64 * 0.5).collect();
        let rows = scan_family(&params, Vec2::zeros(), 1.0, |a| {
            Ok(ProtoLineField::linear(
                &Mat2::new(3.0, 0.0, 0.0, 2.0),
                Vec2::new(a.cos(), a.sin()),
            ))
        })
        .unwrap();
        assert!(rows.iter().all(|r| r.case == Case::Case1 && !r.transition));
    }
}
