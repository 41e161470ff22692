//! Static SVG rendering of a portrait.

use std::fmt::Write;

use protoline::fields::Rect;
use protoline::portrait::{Portrait, Streamline};

const WIDTH: f64 = 640.0;
const MARGIN: f64 = 24.0;

struct View {
    rect: Rect,
    scale: f64,
    height: f64,
}

impl View {
    fn new(rect: Rect) -> Self {
        let scale = WIDTH / rect.width();
        View {
            rect,
            scale,
            height: rect.height() * scale,
        }
    }

    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        (
            MARGIN + (p[0] - self.rect.min[0]) * self.scale,
            MARGIN + (self.rect.max[1] - p[1]) * self.scale,
        )
    }
}

fn path_data(view: &View, s: &Streamline) -> String {
    let mut d = String::with_capacity(s.points.len() * 16);
    for (i, &p) in s.points.iter().enumerate() {
        let (x, y) = view.px(p);
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(d, "{cmd}{x:.2} {y:.2}");
    }
    d
}

pub fn render(portrait: &Portrait, title: &str) -> String {
    let view = View::new(portrait.bounds);
    let (w, h) = (WIDTH + 2.0 * MARGIN, view.height + 2.0 * MARGIN);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    out.push_str(
        "<style>.streamline{fill:none;stroke:#4a6fa5;stroke-width:0.8}\
         .skeleton{fill:none;stroke:#c0392b;stroke-width:1.8}\
         .singularity{fill:#111}\
         .label{font:12px sans-serif;fill:#111}</style>\n",
    );
    let (x0, y0) = view.px([portrait.bounds.min[0], portrait.bounds.max[1]]);
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{WIDTH:.2}" height="{:.2}" fill="none" stroke="#999"/>"##,
        view.height
    );
    out.push_str("<g id=\"streamlines\">\n");
    for s in portrait.streamlines.iter().filter(|s| s.len() >= 2) {
        let _ = writeln!(
            out,
            r#"<path class="streamline" d="{}"/>"#,
            path_data(&view, s)
        );
    }
    out.push_str("</g>\n<g id=\"skeleton\">\n");
    for s in portrait.skeleton.iter().filter(|s| s.len() >= 2) {
        let _ = writeln!(
            out,
            r#"<path class="skeleton" d="{}"/>"#,
            path_data(&view, s)
        );
    }
    out.push_str("</g>\n<g id=\"singularities\">\n");
    for r in &portrait.singularities {
        let (x, y) = view.px(r.location);
        let _ = writeln!(
            out,
            r#"<circle class="singularity" cx="{x:.2}" cy="{y:.2}" r="4"/><text class="label" x="{:.2}" y="{:.2}">{}</text>"#,
            x + 6.0,
            y - 6.0,
            r.class_name()
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
