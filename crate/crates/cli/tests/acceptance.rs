//! Acceptance checks, one line per criterion. Runs without the test harness
//! so the lines are always shown; exits nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use finsler_cli::curve_file::CurveFile;
use finsler_core::curve::{dot, inner_h1, resample_arclength};
use finsler_core::descent::{synthetic_flow, DescentMode, SyntheticFlowConfig};
use finsler_core::energy::{energy, grad_canonical, grad_h1, KernelParams};
use finsler_core::penalty::RigidityOperators;
use finsler_core::socp::{build_finsler_program, solve, solve_finsler, ConeStatus, FinslerVariant};
use finsler_core::{DiscreteCurve, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_130_611;
const SOCP_TOL: f64 = 1e-8;
const SOCP_MAX_ITER: u32 = 200;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

/// Star-shaped polygon with jittered angles and radii.
fn random_polygon(rng: &mut ChaCha8Rng, n: usize, center: Vec2, radius: f64) -> Vec<Vec2> {
    (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * (i as f64 + rng.gen_range(-0.3..0.3)) / n as f64;
            let r = radius * (1.0 + rng.gen_range(-0.3..0.3));
            center + Vec2::new(r * t.cos(), r * t.sin())
        })
        .collect()
}

fn random_curve(rng: &mut ChaCha8Rng, n: usize, center: Vec2, radius: f64) -> DiscreteCurve {
    DiscreteCurve::new(random_polygon(rng, n, center, radius)).unwrap()
}

fn unit_box_curve(rng: &mut ChaCha8Rng, n: usize) -> DiscreteCurve {
    let c = Vec2::new(rng.gen_range(0.4..0.6), rng.gen_range(0.4..0.6));
    let r = rng.gen_range(0.15..0.3);
    random_curve(rng, n, c, r)
}

fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec2 {
    Vec2::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_l, mut worst_v) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.gen_range(8..=256);
        let center = random_vec(&mut rng, 1.0);
        let radius = rng.gen_range(0.5..2.0);
        let curve = random_curve(&mut rng, n, center, radius);
        let a = rng.gen_range(-2.0..2.0);
        let b = random_vec(&mut rng, 2.0);
        let phi: Vec<Vec2> = curve.nodes().iter().map(|p| p.perp() * a + b).collect();
        let ops = RigidityOperators::new(&curve);
        worst_l = worst_l.max(max_abs(&ops.op_l(&phi).unwrap()));
        worst_v = worst_v.max(ops.penalty_v(&phi).unwrap());
    }
    let dt = t0.elapsed();
    outcome(
        worst_l <= 1e-10 && worst_v <= 1e-10 && within(dt, 10.0),
        format!("max |L| = {worst_l:.2e}, max V = {worst_v:.2e} over 1000 polygons, {:.2} s", dt.as_secs_f64()),
    )
}

/// Axis-aligned rectangle with extra nodes on every side.
fn subdivided_rectangle(rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let (x0, y0) = (rng.gen_range(-1.0..0.0), rng.gen_range(-1.0..0.0));
    let (x1, y1) = (x0 + rng.gen_range(0.5..2.0), y0 + rng.gen_range(0.5..2.0));
    let mut side = |from: f64, to: f64| -> Vec<f64> {
        let k = rng.gen_range(1..=8);
        let mut ts: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..0.95)).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        std::iter::once(from).chain(ts.into_iter().map(|t| from + t * (to - from))).collect()
    };
    let mut pts = Vec::new();
    pts.extend(side(x0, x1).into_iter().map(|x| Vec2::new(x, y0)));
    pts.extend(side(y0, y1).into_iter().map(|y| Vec2::new(x1, y)));
    pts.extend(side(x1, x0).into_iter().map(|x| Vec2::new(x, y1)));
    pts.extend(side(y1, y0).into_iter().map(|y| Vec2::new(x0, y)));
    pts
}

/// Field whose increments along each axis-aligned edge are normal to it,
/// so `L` vanishes in exact arithmetic and in floating point.
fn inextensible_field(rng: &mut ChaCha8Rng, nodes: &[Vec2]) -> Vec<Vec2> {
    let n = nodes.len();
    let horizontal = |i: usize| nodes[(i + 1) % n].y == nodes[i].y;
    let closing_horizontal = horizontal(n - 1);
    // Last edge before the closing one that can change the component the
    // closing edge needs to match.
    let fix = (0..n - 1).rev().find(|&i| horizontal(i) != closing_horizontal);
    let mut phi = vec![random_vec(rng, 1.0)];
    for i in 0..n - 1 {
        let mut next = phi[i];
        let fresh = rng.gen_range(-1.0..1.0);
        if horizontal(i) {
            next.y = if Some(i) == fix { phi[0].y } else { fresh };
        } else {
            next.x = if Some(i) == fix { phi[0].x } else { fresh };
        }
        phi.push(next);
    }
    phi
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut worst_tvk = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(8..=256);
        let center = random_vec(&mut rng, 1.0);
        let radius = rng.gen_range(0.5..2.0);
        let curve = random_curve(&mut rng, n, center, radius);
        let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let b = random_vec(&mut rng, 2.0);
        let phi: Vec<Vec2> = curve.nodes().iter().map(|&p| p * alpha + p.perp() * beta + b).collect();
        worst_tvk = worst_tvk.max(RigidityOperators::new(&curve).penalty_tvk(&phi).unwrap());
    }
    let mut exact = true;
    let mut nonzero_l = 0usize;
    for _ in 0..200 {
        let nodes = subdivided_rectangle(&mut rng);
        let phi = inextensible_field(&mut rng, &nodes);
        let curve = DiscreteCurve::new(nodes).unwrap();
        let ops = RigidityOperators::new(&curve);
        nonzero_l += ops.op_l(&phi).unwrap().iter().filter(|&&x| x != 0.0).count();
        let v = ops.penalty_v(&phi).unwrap();
        let sim = ops.evaluate_similarity(&phi, 0.0).unwrap();
        exact &= ops.penalty_tvk(&phi).unwrap() == v && sim.feasible_c && sim.tv == v;
    }
    let dt = t0.elapsed();
    outcome(
        worst_tvk <= 1e-10 && exact && nonzero_l == 0 && within(dt, 10.0),
        format!(
            "max TVK(similarity) = {worst_tvk:.2e}; TVK == V exactly on 200 L = 0 fields: {exact}; {:.2} s",
            dt.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let p = KernelParams::new(0.8, 0.04).unwrap();
    let mut worst_fd = 0.0f64;
    let mut worst_riesz = 0.0f64;
    for _ in 0..20 {
        let gamma = unit_box_curve(&mut rng, 32);
        let target = unit_box_curve(&mut rng, 32);
        let g = grad_canonical(gamma.nodes(), target.nodes(), &p);
        let h = 1e-6 * gamma.bbox_diagonal();
        let mut fd = vec![Vec2::ZERO; 32];
        for i in 0..32 {
            for axis in 0..2 {
                let mut plus = gamma.nodes().to_vec();
                let mut minus = gamma.nodes().to_vec();
                let e = if axis == 0 { Vec2::new(h, 0.0) } else { Vec2::new(0.0, h) };
                plus[i] += e;
                minus[i] -= e;
                let d = (energy(&plus, target.nodes(), &p) - energy(&minus, target.nodes(), &p)) / (2.0 * h);
                if axis == 0 {
                    fd[i].x = d;
                } else {
                    fd[i].y = d;
                }
            }
        }
        let err: f64 = fd.iter().zip(&g).map(|(a, b)| (*a - *b).norm_sq()).sum::<f64>().sqrt();
        let norm: f64 = g.iter().map(|v| v.norm_sq()).sum::<f64>().sqrt();
        worst_fd = worst_fd.max(err / norm);

        let metrics = gamma.metrics();
        let gh = grad_h1(&metrics, &g).unwrap();
        for _ in 0..5 {
            let phi: Vec<Vec2> = (0..32).map(|_| random_vec(&mut rng, 1.0)).collect();
            let lhs = inner_h1(&metrics, &gh, &phi);
            let rhs = dot(&g, &phi);
            worst_riesz = worst_riesz.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }
    }
    let dt = t0.elapsed();
    outcome(
        worst_fd < 1e-5 && worst_riesz <= 1e-8 && within(dt, 30.0),
        format!(
            "max relative FD error = {worst_fd:.2e} (20 pairs); max Riesz defect = {worst_riesz:.2e} (100 fields); {:.2} s",
            dt.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let p = KernelParams::new(0.8, 0.04).unwrap();
    let (mut self_e, mut min_e, mut equiv) = (0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..100 {
        let n = rng.gen_range(8..=64);
        let a = unit_box_curve(&mut rng, n);
        let m = rng.gen_range(8..=64);
        let b = unit_box_curve(&mut rng, m);
        self_e = self_e.max(energy(b.nodes(), b.nodes(), &p).abs());
        let e = energy(a.nodes(), b.nodes(), &p);
        min_e = min_e.min(e);
        let angle = rng.gen_range(-3.0..3.0);
        let shift = random_vec(&mut rng, 2.0);
        let ra = a.rigid_transform(angle, shift);
        let rb = b.rigid_transform(angle, shift);
        equiv = equiv.max((energy(ra.nodes(), rb.nodes(), &p) - e).abs());
    }
    outcome(
        self_e <= 1e-12 && min_e >= -1e-12 && equiv <= 1e-10,
        format!("max |E(L, L)| = {self_e:.2e}; min E = {min_e:.3e}; max rigid-motion change = {equiv:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let p = KernelParams::new(0.8, 0.04).unwrap();
    let rho = 0.8;
    let (mut l_max, mut gap_ratio, mut kkt_max, mut obj_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut optimal = 0;
    for _ in 0..20 {
        let gamma = unit_box_curve(&mut rng, 64);
        let target = unit_box_curve(&mut rng, 64);
        let metrics = gamma.metrics();
        let g = grad_h1(&metrics, &grad_canonical(gamma.nodes(), target.nodes(), &p)).unwrap();
        let sol = solve_finsler(&gamma, &metrics, &g, rho, FinslerVariant::Rigid, SOCP_TOL, SOCP_MAX_ITER).unwrap();
        optimal += usize::from(sol.status() == ConeStatus::Optimal);
        let ops = RigidityOperators::new(&gamma);
        l_max = l_max.max(max_abs(&ops.op_l(&sol.field).unwrap()));
        let gap = ops.deviation_gap(&metrics, &sol.field, &g, rho).unwrap();
        gap_ratio = gap_ratio.max(gap.lhs / gap.rhs);
        kkt_max = kkt_max.max(sol.cone.kkt.max());
        obj_err = obj_err.max((sol.objective - ops.penalty_v(&sol.field).unwrap()).abs());
    }
    let dt = t0.elapsed();
    outcome(
        optimal == 20
            && l_max <= 1e-6
            && gap_ratio <= 1.0 + 1e-6
            && kkt_max <= 1e-8
            && obj_err <= 1e-6
            && within(dt, 120.0),
        format!(
            "{optimal}/20 optimal; max |L| = {l_max:.2e}; max lhs/rhs = {gap_ratio:.9}; max KKT = {kkt_max:.2e}; \
             max |obj - V| = {obj_err:.2e}; {:.2} s",
            dt.as_secs_f64()
        ),
    )
}

/// Smallest deviation `‖Π(aΓ^⊥ + b - g)‖` over a shrinking grid of rigid
/// fields.
fn brute_force_rigid(curve: &DiscreteCurve, ops: &RigidityOperators, g: &[Vec2], half_width: f64) -> f64 {
    let metrics = curve.metrics();
    let deviation = |a: f64, b: Vec2| -> f64 {
        let phi: Vec<Vec2> = curve.nodes().iter().map(|p| p.perp() * a + b).collect();
        ops.deviation_gap(&metrics, &phi, g, 1.0).unwrap().lhs
    };
    let (mut ca, mut cb, mut w) = (0.0, Vec2::ZERO, half_width);
    let mut best = deviation(ca, cb);
    let steps = 12;
    for _ in 0..40 {
        let (mut na, mut nb) = (ca, cb);
        for i in -steps..=steps {
            for j in -steps..=steps {
                for k in -steps..=steps {
                    let a = ca + w * i as f64 / steps as f64;
                    let b = cb + Vec2::new(w * j as f64 / steps as f64, w * k as f64 / steps as f64);
                    let d = deviation(a, b);
                    if d < best {
                        best = d;
                        na = a;
                        nb = b;
                    }
                }
            }
        }
        ca = na;
        cb = nb;
        w *= 0.5;
    }
    best
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let rho = 0.5;
    let mut cases = 0;
    let mut worst_obj = 0.0f64;
    let mut worst_rigid_fit = 0.0f64;
    let mut all_optimal = true;
    while cases < 8 {
        let curve = random_curve(&mut rng, 4, Vec2::ZERO, 1.0);
        let a = rng.gen_range(-1.0..1.0);
        let b = random_vec(&mut rng, 1.0);
        let g: Vec<Vec2> = curve.nodes().iter().map(|p| p.perp() * a + b + random_vec(&mut rng, 0.05)).collect();
        let ops = RigidityOperators::new(&curve);
        let rhs = ops.deviation_gap(&curve.metrics(), &g, &g, rho).unwrap().rhs;
        let best = brute_force_rigid(&curve, &ops, &g, 4.0);
        // Only instances whose optimum is attained by a rigid field.
        if best > 0.9 * rhs {
            continue;
        }
        cases += 1;
        let fp = build_finsler_program(&curve, &curve.metrics(), &g, rho, FinslerVariant::Rigid).unwrap();
        let sol = solve(&fp.program, SOCP_TOL, SOCP_MAX_ITER).unwrap();
        all_optimal &= sol.status == ConeStatus::Optimal;
        // The brute-force optimum is 0: every rigid field has V = 0.
        worst_obj = worst_obj.max(fp.objective(&sol.z).abs());
        let phi = fp.extract_field(&sol.z);
        // Distance of Φ* from the rigid space, through its normal derivative.
        let h = ops.op_hn(&phi).unwrap();
        let spread = h.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)) - h.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        worst_rigid_fit = worst_rigid_fit.max(spread.max(max_abs(&ops.op_l(&phi).unwrap())));
    }
    outcome(
        all_optimal && worst_obj <= 1e-4 && worst_rigid_fit <= 1e-4,
        format!(
            "8 quadrilaterals: max |IPM objective - brute force| = {worst_obj:.2e}; max non-rigidity of Φ* = {worst_rigid_fit:.2e}"
        ),
    )
}

/// 200 × 0.06 rectangle centred at (0, 0.4), arc-length resampled.
fn rod(n: usize) -> DiscreteCurve {
    let corners = [
        Vec2::new(-100.0, 0.37),
        Vec2::new(100.0, 0.37),
        Vec2::new(100.0, 0.43),
        Vec2::new(-100.0, 0.43),
    ];
    resample_arclength(&corners, n).unwrap()
}

fn criterion_7() -> Outcome {
    let t0 = Instant::now();
    let initial = rod(128);
    let rhos = [0.1, 0.3, 0.7, 0.9];
    let mut d = Vec::new();
    for &rho in &rhos {
        let cfg = SyntheticFlowConfig { mode: DescentMode::FinslerRigid, rho, tau: 0.0005, steps: 20, ..Default::default() };
        match synthetic_flow(&initial, &cfg) {
            Ok(r) => d.push(r.trace.last().unwrap().distortion_rigid),
            Err(e) => return outcome(false, format!("rho = {rho}: {e}")),
        }
    }
    let dt = t0.elapsed();
    let monotone = d.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        monotone && d[3] <= 0.2 * d[0] && within(dt, 300.0),
        format!(
            "distortion over rho {rhos:?} = [{}]; {:.2} s",
            d.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", "),
            dt.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Outcome {
    let t0 = Instant::now();
    let initial = rod(128);
    let lambdas = [0.01, 50.0, 300.0, 2000.0];
    let mut dev = Vec::new();
    for &lambda in &lambdas {
        let cfg = SyntheticFlowConfig {
            mode: DescentMode::FinslerSimilarity,
            rho: 0.3,
            lambda,
            tau: 0.0005,
            steps: 20,
            ..Default::default()
        };
        match synthetic_flow(&initial, &cfg) {
            Ok(r) => dev.push((r.trace.last().unwrap().best_fit_scale - 1.0).abs()),
            Err(e) => return outcome(false, format!("lambda = {lambda}: {e}")),
        }
    }
    let dt = t0.elapsed();
    let increasing = dev.windows(2).all(|w| w[1] > w[0]);
    outcome(
        increasing && within(dt, 300.0),
        format!(
            "|scale - 1| over lambda {lambdas:?} = [{}]; {:.2} s",
            dev.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", "),
            dt.as_secs_f64()
        ),
    )
}

fn finsler() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_finsler"));
    c.env("FINSLER_THREADS", "2").stdout(Stdio::null());
    c
}

fn trace_energies(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

fn criterion_9(dir: &Path) -> Outcome {
    let t0 = Instant::now();
    let square = [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]];
    let angle = std::f64::consts::PI / 6.0;
    let rotated: Vec<[f64; 2]> = square
        .iter()
        .map(|p| {
            let q = Vec2::new(p[0], p[1]).rotate(angle);
            [q.x, q.y]
        })
        .collect();
    let src = dir.join("square.json");
    let tgt = dir.join("square_rot30.json");
    CurveFile::new(Some("square".into()), square.to_vec()).save(&src).unwrap();
    CurveFile::new(Some("rotated square".into()), rotated).save(&tgt).unwrap();
    let out = dir.join("run1");
    let status = finsler()
        .arg("match")
        .arg(&src)
        .arg(&tgt)
        .args(["--preset", "matching-rigid", "--n", "128", "--max-iters", "500", "--frame-every", "50", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    let dt = t0.elapsed();
    if status.code() != Some(0) {
        return outcome(false, format!("match exited with {status}"));
    }
    let e = trace_energies(&out.join("trace.csv"));
    let strict = e.windows(2).all(|w| w[1] < w[0]);
    let iterations = e.len() - 1;
    let ratio = e[iterations] / e[0];
    let corr_rows = fs::read_to_string(out.join("correspondence.csv")).map(|s| s.lines().count() - 1).unwrap_or(0);
    outcome(
        strict && ratio <= 0.01 && iterations <= 500 && corr_rows == 128 && within(dt, 600.0),
        format!(
            "{iterations} iterations, strictly decreasing: {strict}, final/initial energy = {ratio:.3e}, \
             correspondence rows = {corr_rows}; {:.2} s",
            dt.as_secs_f64()
        ),
    )
}

fn criterion_10(dir: &Path) -> Outcome {
    let first = dir.join("run1");
    let second = dir.join("run2");
    let status = finsler()
        .arg("match")
        .arg("--manifest")
        .arg(first.join("manifest.json"))
        .arg("--out")
        .arg(&second)
        .status()
        .unwrap();
    if status.code() != Some(0) {
        return outcome(false, format!("rerun exited with {status}"));
    }
    let a = fs::read(first.join("trace.csv")).unwrap();
    let b = fs::read(second.join("trace.csv")).unwrap();
    outcome(a == b, format!("trace.csv byte-identical: {} ({} bytes)", a == b, a.len()))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("rigid-null penalty", Box::new(criterion_1)),
        ("similarity-null and lambda = 0 reduction", Box::new(criterion_2)),
        ("gradient correctness", Box::new(criterion_3)),
        ("energy axioms", Box::new(criterion_4)),
        ("Finsler gradient certification", Box::new(criterion_5)),
        ("cone solver against rigid brute force", Box::new(criterion_6)),
        ("rho trend of the synthetic flow", Box::new(criterion_7)),
        ("lambda trend of the synthetic flow", Box::new(criterion_8)),
        ("matching descent, square to rotated square", Box::new(|| criterion_9(dir.path()))),
        ("determinism of the trace", Box::new(|| criterion_10(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("criterion {:>2} {name}: {} | {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
