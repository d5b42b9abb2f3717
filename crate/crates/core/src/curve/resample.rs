use super::DiscreteCurve;
use crate::error::{FinslerError, Result};
use crate::vec2::Vec2;

/// Resamples a closed polyline to `n` nodes equispaced in arc length.
///
/// The first input vertex stays node 0 and the orientation is preserved.
/// Consecutive duplicate vertices (and a repeated closing vertex) are ignored.
pub fn resample_arclength(points: &[Vec2], n: usize) -> Result<DiscreteCurve> {
    let mut poly: Vec<Vec2> = Vec::with_capacity(points.len());
    for &p in points {
        if !p.is_finite() {
            return Err(FinslerError::NonFinite { index: poly.len() });
        }
        if poly.last() != Some(&p) {
            poly.push(p);
        }
    }
    while poly.len() > 1 && poly.first() == poly.last() {
        poly.pop();
    }
    let distinct = {
        let mut d: Vec<Vec2> = Vec::new();
        for p in &poly {
            if !d.contains(p) {
                d.push(*p);
                if d.len() >= 3 {
                    break;
                }
            }
        }
        d.len()
    };
    if distinct < 3 {
        return Err(FinslerError::TooFewPoints { found: distinct });
    }
    if n < 3 {
        return Err(FinslerError::InvalidParameter(format!(
            "node count must be at least 3, got {n}"
        )));
    }

    let m = poly.len();
    // cumulative[k] = arc length from vertex 0 to vertex k; cumulative[m] = perimeter.
    let mut cumulative = Vec::with_capacity(m + 1);
    cumulative.push(0.0);
    for k in 0..m {
        let seg = (poly[(k + 1) % m] - poly[k]).norm();
        cumulative.push(cumulative[k] + seg);
    }
    let perimeter = cumulative[m];

    let mut nodes = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        let s = perimeter * i as f64 / n as f64;
        while seg + 1 < m && cumulative[seg + 1] <= s {
            seg += 1;
        }
        let a = poly[seg];
        let b = poly[(seg + 1) % m];
        let len = cumulative[seg + 1] - cumulative[seg];
        let u = if len > 0.0 { (s - cumulative[seg]) / len } else { 0.0 };
        nodes.push(a + (b - a) * u);
    }
    DiscreteCurve::new(nodes)
}
