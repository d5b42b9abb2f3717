use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{check_len, DiscreteCurve};
use crate::error::Result;

/// Above this many nodes, pairs are sampled instead of enumerated.
pub const FULL_PAIR_LIMIT: usize = 512;
pub const SAMPLED_PAIRS: usize = 100_000;
/// Default seed of the pair sampler.
pub const PAIR_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidityDiagnostics {
    /// `max |d_k / d_0 - 1|` over node pairs.
    pub distortion_rigid: f64,
    /// `max |d_k / d_0 - c|` with `c` the least-squares scale.
    pub distortion_similarity: f64,
    /// `c = Σ d_k d_0 / Σ d_0²`.
    pub best_fit_scale: f64,
}

fn pairs(n: usize, seed: u64) -> Vec<(usize, usize)> {
    if n <= FULL_PAIR_LIMIT {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..SAMPLED_PAIRS)
            .map(|_| {
                let i = rng.gen_range(0..n);
                let j = (i + rng.gen_range(1..n)) % n;
                (i, j)
            })
            .collect()
    }
}

/// Distance distortion of `current` against `initial`, node by node.
///
/// Pairs whose initial distance is below `1e-9` times the bounding-box
/// diagonal are skipped.
pub fn rigidity_diagnostics(initial: &DiscreteCurve, current: &DiscreteCurve) -> Result<RigidityDiagnostics> {
    rigidity_diagnostics_seeded(initial, current, PAIR_SEED)
}

/// As [`rigidity_diagnostics`], with the seed of the pair sampler used
/// above [`FULL_PAIR_LIMIT`] nodes.
pub fn rigidity_diagnostics_seeded(
    initial: &DiscreteCurve,
    current: &DiscreteCurve,
    seed: u64,
) -> Result<RigidityDiagnostics> {
    check_len(initial.len(), current.len())?;
    let eps = 1e-9 * initial.bbox_diagonal();
    let a = initial.nodes();
    let b = current.nodes();
    let mut d0 = Vec::new();
    let mut dk = Vec::new();
    for (i, j) in pairs(a.len(), seed) {
        let r = (a[i] - a[j]).norm();
        if r >= eps {
            d0.push(r);
            dk.push((b[i] - b[j]).norm());
        }
    }
    let num: f64 = d0.iter().zip(&dk).map(|(x, y)| x * y).sum();
    let den: f64 = d0.iter().map(|x| x * x).sum();
    let c = if den > 0.0 { num / den } else { 1.0 };
    let mut rigid = 0.0f64;
    let mut simil = 0.0f64;
    for (x, y) in d0.iter().zip(&dk) {
        let ratio = y / x;
        rigid = rigid.max((ratio - 1.0).abs());
        simil = simil.max((ratio - c).abs());
    }
    Ok(RigidityDiagnostics {
        distortion_rigid: rigid,
        distortion_similarity: simil,
        best_fit_scale: c,
    })
}
