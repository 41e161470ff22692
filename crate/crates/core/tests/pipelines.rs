use std::f64::consts::{PI, TAU};

use protoline::blowup::{lift_phi, linearize, BlowupError};
use protoline::fields::{Domain, Mat2, Metric, ProtoLineField, Rect, Vec2, VectorField};
use protoline::index::{classify_jacobian, ZeroType};
use protoline::linear::{
    classify, in_half_plane, monstar_alpha_window, normal_form, Case, LinearPlf, Stability,
};
use protoline::metric::{build_metric, min_norm_coeffs, span_check, Span, Vec5};
use protoline::portrait::{make_portrait, PortraitOptions, Seeds, Termination, Tracer};
use protoline::singularity::analyze_in;

#[test]
fn alpha_sweep_agrees_with_window() {
    let a = Mat2::new(1.0, 0.0, 0.0, 3.0);
    let nf = normal_form(&LinearPlf::new(a, Vec2::new(1.0, 0.0))).unwrap();
    let windows = monstar_alpha_window(&nf);
    assert_eq!(windows.len(), 2);
    assert!(windows.iter().any(|w| w.contains(nf.alpha)));
    let q = nf.basis();
    let mut inside = 0;
    for k in 0..1000 {
        let alpha = TAU * (k as f64 + 0.5) / 1000.0;
        let near_edge = windows.iter().any(|w| {
            let d = |x: f64| ((alpha - x + PI).rem_euclid(TAU) - PI).abs();
            d(w.start) < 1e-6 || d(w.end()) < 1e-6
        });
        if near_edge {
            continue;
        }
        let y = q * Vec2::new(alpha.cos(), alpha.sin());
        let c = classify(&LinearPlf::new(a, y)).unwrap();
        let in_window = windows.iter().any(|w| w.contains(alpha));
        assert_eq!(c.case == Case::Case2, in_window, "alpha = {alpha}");
        if in_window {
            inside += 1;
            assert_eq!(c.fixed_points.len(), 3);
        } else {
            assert_eq!(c.fixed_points.len(), 1);
        }
    }
    assert!(inside > 0 && inside < 1000);
}

#[test]
fn no_window_above_kappa_one_or_for_saddles() {
    for a in [
        Mat2::new(3.0, 0.0, 0.0, 2.0),
        Mat2::new(1.0, 0.0, 0.0, -1.0),
    ] {
        let nf = normal_form(&LinearPlf::new(a, Vec2::new(1.0, 0.0))).unwrap();
        assert!(monstar_alpha_window(&nf).is_empty());
    }
}

#[test]
fn linearize_examples() {
    let lin = linearize(&ProtoLineField::lemon(), Vec2::zeros()).unwrap();
    assert_eq!(lin.s, Mat2::identity());
    assert_eq!(lin.a_tilde, Mat2::new(1.0, 1.0, -1.0, 1.0));
    assert_eq!(lin.y_tilde, Vec2::new(1.0, 1.0));
    let g = ProtoLineField::linear(&Mat2::identity(), Vec2::new(1.0, 0.0))
        .with_metric(Metric::stretched(3.0));
    let lin = linearize(&g, Vec2::zeros()).unwrap();
    let gp = g.metric.at(Vec2::zeros()).unwrap();
    assert!((lin.s.transpose() * gp * lin.s - Mat2::identity()).norm() < 1e-12);
    assert!((lin.a_tilde - Mat2::identity()).norm() < 1e-15);
    assert!(matches!(
        linearize(&ProtoLineField::lemon(), Vec2::new(0.5, 0.5)),
        Err(BlowupError::NotSingular { .. })
    ));
}

#[test]
fn linearization_is_invariant_under_frame_rotation() {
    let l = ProtoLineField::monstar().with_metric(Metric::constant(&Mat2::new(2.0, 0.3, 0.3, 1.0)));
    let lin = linearize(&l, Vec2::zeros()).unwrap();
    let base = classify(&lin.linear_plf()).unwrap();
    for t in [0.3, 1.1, 2.9] {
        let q = Mat2::new(f64::cos(t), -f64::sin(t), f64::sin(t), f64::cos(t));
        let a = q.transpose() * lin.a_tilde * q;
        let y = q.transpose() * lin.y_tilde;
        let c = classify(&LinearPlf::new(a, y)).unwrap();
        assert_eq!(c.case, base.case);
        assert_eq!(c.fixed_points.len(), base.fixed_points.len());
    }
}

#[test]
fn star_lift_matches_linear_row() {
    let l = ProtoLineField::star();
    let b = lift_phi(&l, Vec2::zeros(), 0.5, (16, 256)).unwrap();
    for (j, &t) in b.thetas.iter().enumerate() {
        let bar = b.lin.phi_bar(t).value();
        let d = b.phi[1][j] - bar;
        assert!((d - PI * (d / PI).round()).abs() < 1e-6);
    }
}

#[test]
fn blowup_zero_set_is_on_the_axis() {
    let l = ProtoLineField::monstar();
    let b = lift_phi(&l, Vec2::zeros(), 0.5, (16, 512)).unwrap();
    for i in 1..b.radii.len() {
        let r = b.radii[i];
        for &t in &b.thetas {
            let p = b.p_at(r, t).unwrap();
            assert!(p.norm() > 1e-6);
            assert_eq!(b.phi_at(r, t).unwrap(), b.phi_at(-r, t).unwrap());
            let q = b.p_at(-r, t).unwrap();
            assert_eq!((q.x, q.y), (-p.x, p.y));
        }
    }
}

#[test]
fn skeleton_geometry_matches_class() {
    for (l, n, half) in [
        (ProtoLineField::monstar(), 3, true),
        (ProtoLineField::star(), 3, false),
    ] {
        let opts = PortraitOptions {
            seeds: Seeds::Grid(6),
            ..Default::default()
        };
        let p = make_portrait(&l, Rect::square(1.0), &opts).unwrap();
        let thetas: Vec<f64> = p.skeleton.iter().map(|s| s.tag.unwrap().theta).collect();
        assert_eq!(thetas.len(), n);
        assert_eq!(in_half_plane(&thetas), half);
    }
}

#[test]
fn case2_skeleton_spans_half_plane() {
    let l = ProtoLineField::linear(&Mat2::new(4.0, 0.0, 0.0, 1.0), Vec2::new(0.0, 1.0));
    let p = make_portrait(&l, Rect::square(1.0), &PortraitOptions::default()).unwrap();
    let tags: Vec<_> = p.skeleton.iter().map(|s| s.tag.unwrap()).collect();
    assert_eq!(tags.len(), 3);
    let thetas: Vec<f64> = tags.iter().map(|t| t.theta).collect();
    assert!(in_half_plane(&thetas));
    let attractive = tags
        .iter()
        .filter(|t| t.stability == Stability::Attractive)
        .count();
    assert_eq!(attractive, 1);
}

#[test]
fn skeleton_leaves_along_fixed_rays() {
    let l = ProtoLineField::star();
    let p = make_portrait(&l, Rect::square(1.0), &PortraitOptions::default()).unwrap();
    for s in &p.skeleton {
        let t = s.tag.unwrap().theta;
        let d = s.point(1) - s.point(0);
        assert!(d.norm() <= 1e-3 + 1e-15);
        let ang = d.y.atan2(d.x);
        assert!(((ang - t + PI).rem_euclid(TAU) - PI).abs() < 1e-9);
        assert_ne!(s.termination, Termination::Singularity);
    }
}

#[test]
fn torus_portrait_classes_follow_jacobians() {
    let l = ProtoLineField::new(
        VectorField::parse("sin(x)", "sin(y)").unwrap(),
        VectorField::constant(Vec2::new(1.0, 0.0)),
        Metric::euclidean(),
        Domain::Torus {
            origin: Vec2::new(-0.5, -0.5),
            periods: Vec2::new(TAU, TAU),
        },
    )
    .unwrap();
    let reports = analyze_in(&l, &l.domain, 8).unwrap();
    assert_eq!(reports.len(), 4);
    for r in &reports {
        let j = l.x.jacobian(r.p()).unwrap();
        let zt = classify_jacobian(&j);
        assert_eq!(r.zero_type, zt);
        let want = if zt == ZeroType::Saddle {
            "Star"
        } else {
            "Lemon"
        };
        assert_eq!(r.class_name(), want, "at {:?}", r.location);
        assert_eq!(
            r.twice_index,
            Some(if zt == ZeroType::Saddle { -1 } else { 1 })
        );
    }
    let opts = PortraitOptions {
        seeds: Seeds::Grid(8),
        step: 0.05,
        ..Default::default()
    };
    let p = make_portrait(&l, l.domain.bounds(), &opts).unwrap();
    assert_eq!(p.singularities.len(), 4);
}

#[test]
fn capture_stops_at_singularity_without_entering_exclusion_disc() {
    let l = ProtoLineField::star();
    let mut t = Tracer::new(&l, Rect::square(1.0), 1e-2, 4.0);
    t.singular_points.push(Vec2::zeros());
    let s = t.trace(Vec2::new(0.0, 0.8), Vec2::new(0.0, -1.0)).unwrap();
    let n = s.len();
    for i in 0..n - 1 {
        assert!(s.point(i).norm() > 1e-6);
        if i > 0 {
            assert!((s.point(i) - s.point(i - 1)).norm() <= 2.0 * 1e-2);
        }
    }
}

#[test]
fn metric_examples() {
    let x = VectorField::parse("1", "0").unwrap();
    let y = VectorField::parse("0", "1 + x").unwrap();
    let m = build_metric(&x, &y);
    assert_eq!(
        span_check(&m.frame, Vec2::zeros()).unwrap(),
        Span::Spans { r4: 2.0 }
    );
    let (u, n) = min_norm_coeffs(&m.frame, Vec2::zeros(), Vec2::zeros()).unwrap();
    assert_eq!((u, n), (Vec5::zeros(), 0.0));
    // General least-squares solver as an independent oracle.
    let p = Vec2::new(0.3, -0.7);
    let v = Vec2::new(0.4, 1.3);
    let s = m.frame.matrix(p).unwrap();
    let svd = s.svd(true, true);
    let oracle = svd.solve(&v, 1e-14).unwrap();
    let (u, _) = min_norm_coeffs(&m.frame, p, v).unwrap();
    assert!((u - oracle).norm() < 1e-12);
}

#[test]
fn random_polynomial_pairs_mostly_span() {
    let x = VectorField::parse("1 + 0.4*x*y - 0.2*y^2", "0.3*x^2 - y").unwrap();
    let y = VectorField::parse("0.5*y + x^3", "1 - 0.6*x + 0.1*y^2").unwrap();
    let m = build_metric(&x, &y);
    let sample = protoline::metric::sample_metric(&m, &Rect::square(1.0), 20).unwrap();
    assert!(sample.spd_fraction >= 0.99);
    assert!(sample.max_parallelogram_residual <= 1e-10);
}
