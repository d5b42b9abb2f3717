//! Curve documents: `{"name": ..., "closed": true, "points": [[x, y], ...]}`
//! with one point per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use finsler_core::curve::resample_arclength;
use finsler_core::{DiscreteCurve, Vec2};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub closed: bool,
    pub points: Vec<[f64; 2]>,
}

impl CurveFile {
    pub fn new(name: Option<String>, points: Vec<[f64; 2]>) -> Self {
        Self { name, closed: true, points }
    }

    pub fn from_nodes(name: Option<String>, nodes: &[Vec2]) -> Self {
        Self::new(name, nodes.iter().map(|p| [p.x, p.y]).collect())
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: CurveFile = serde_json::from_str(text).map_err(|e| CliError::input(format!("malformed curve: {e}")))?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message)))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.closed {
            return Err(CliError::input("only closed curves are supported"));
        }
        if let Some(i) = self.points.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(CliError::input(format!("non-finite coordinate at point {i}")));
        }
        let mut distinct: Vec<[f64; 2]> = self.points.clone();
        distinct.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(CliError::input(format!("need at least 3 distinct points, found {}", distinct.len())));
        }
        Ok(())
    }

    /// Points as vectors, without a trailing copy of the first point.
    pub fn vertices(&self) -> Vec<Vec2> {
        let mut v: Vec<Vec2> = self.points.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        while v.len() > 1 && v.last() == v.first() {
            v.pop();
        }
        v
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        if let Some(name) = &self.name {
            let _ = writeln!(out, "  \"name\": {},", serde_json::to_string(name).expect("string"));
        }
        let _ = writeln!(out, "  \"closed\": {},", self.closed);
        out.push_str("  \"points\": [\n");
        for (i, p) in self.points.iter().enumerate() {
            let sep = if i + 1 < self.points.len() { "," } else { "" };
            let _ = writeln!(out, "    [{}, {}]{sep}", json_f64(p[0]), json_f64(p[1]));
        }
        out.push_str("  ]\n}\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }
}

fn json_f64(x: f64) -> String {
    serde_json::to_string(&x).expect("finite float")
}

/// Signed area of a polygon, positive for counter-clockwise order.
pub fn polygon_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].x * v[(i + 1) % n].y - v[(i + 1) % n].x * v[i].y).sum::<f64>()
}

/// Affine map `p ↦ (p - origin) / scale` taking the joint bounding box of
/// some point sets to one with unit diagonal and lower corner at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub origin: [f64; 2],
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization { origin: [0.0, 0.0], scale: 1.0 };

    pub fn fit(sets: &[&[Vec2]]) -> Result<Self, CliError> {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in sets.iter().flat_map(|s| s.iter()) {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let diag = (hi - lo).norm();
        if !(diag > 0.0 && diag.is_finite()) {
            return Err(CliError::input("curves have a degenerate bounding box"));
        }
        Ok(Self { origin: [lo.x, lo.y], scale: diag })
    }

    pub fn forward(&self, p: Vec2) -> Vec2 {
        (p - Vec2::new(self.origin[0], self.origin[1])) / self.scale
    }

    pub fn inverse(&self, p: Vec2) -> Vec2 {
        p * self.scale + Vec2::new(self.origin[0], self.origin[1])
    }

    pub fn apply(&self, v: &[Vec2]) -> Vec<Vec2> {
        v.iter().map(|&p| self.forward(p)).collect()
    }

    pub fn undo(&self, v: &[Vec2]) -> Vec<Vec2> {
        v.iter().map(|&p| self.inverse(p)).collect()
    }
}

/// Resamples a vertex list to `n` nodes equally spaced in arc length.
pub fn resample(vertices: &[Vec2], n: usize) -> Result<DiscreteCurve, CliError> {
    resample_arclength(vertices, n).map_err(|e| CliError::input(format!("cannot resample curve: {e}")))
}
