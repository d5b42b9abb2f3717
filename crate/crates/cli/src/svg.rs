//! Deterministic SVG frames: target dashed, current solid.

use std::fmt::Write as _;

use finsler_core::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveStyle {
    Target,
    Initial,
    Current,
}

impl CurveStyle {
    fn attributes(self) -> &'static str {
        match self {
            CurveStyle::Target => r##"stroke="#1f5fbf" stroke-width="1.5" stroke-dasharray="6 4""##,
            CurveStyle::Initial => r##"stroke="#b0b0b0" stroke-width="1""##,
            CurveStyle::Current => r##"stroke="#111111" stroke-width="2""##,
        }
    }
}

const SIZE: f64 = 512.0;
const MARGIN: f64 = 16.0;

/// Renders closed polylines into a square canvas fitted to their joint
/// bounding box, y axis pointing up.
pub fn render_svg(curves: &[(&[Vec2], CurveStyle)]) -> String {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in curves.iter().flat_map(|(c, _)| c.iter()) {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let extent = (hi.x - lo.x).max(hi.y - lo.y);
    let k = if extent > 0.0 && extent.is_finite() { (SIZE - 2.0 * MARGIN) / extent } else { 1.0 };
    let off = Vec2::new(
        MARGIN + 0.5 * (SIZE - 2.0 * MARGIN - k * (hi.x - lo.x)),
        MARGIN + 0.5 * (SIZE - 2.0 * MARGIN - k * (hi.y - lo.y)),
    );
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (curve, style) in curves {
        if curve.is_empty() {
            continue;
        }
        out.push_str(r#"<polygon fill="none" "#);
        out.push_str(style.attributes());
        out.push_str(r#" points=""#);
        for (i, p) in curve.iter().enumerate() {
            let x = off.x + k * (p.x - lo.x);
            let y = SIZE - (off.y + k * (p.y - lo.y));
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x:.3},{y:.3}");
        }
        out.push_str("\"/>\n");
    }
    out.push_str("</svg>\n");
    out
}
