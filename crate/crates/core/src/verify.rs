//! The acceptance checks, runnable from tests and from the command line.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bands::BandSet;
use crate::channel::{Channel, ChannelAnalysis};
use crate::config::SpectralConfig;
use crate::determinant::DeterminantEvaluator;
use crate::error::Result;
use crate::fy::{FyOptions, FySolver, Mode};
use crate::model::{
    build_preset, quad_integrate, FunctionSpec, FunctionSpecs, ModelProblem, Preset, TorusGrid,
};
use crate::oracle::{
    assemble_channel, assemble_fiber, assemble_full, classify_spectrum, eig_sym, Fiber,
    DEFAULT_DIM_CAP,
};
use crate::pencil::{split_blocks, RayleighValue};
use crate::roots::bisect;

const SEED: u64 = 0x5eed_f0c4;

/// Outcome of one acceptance check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<28} {:>8.3}s/{:<5} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.budget_seconds,
            self.detail
        )
    }
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: [(&str, f64, Check); 12] = [
    ("degenerate band", 1.0, degenerate_band),
    ("closed-form root", 1.0, closed_form_root),
    ("delta3 equivalence", 10.0, delta3_equivalence),
    ("channel convergence", 180.0, channel_convergence),
    ("hwz bottom", 180.0, hwz_bottom),
    ("channel inclusion", 30.0, channel_inclusion),
    ("fy exactness", 60.0, fy_exactness),
    ("literal/derived", 10.0, literal_derived),
    ("coefficient inverse", 1.0, coefficient_inverse),
    ("pencil spectrum", 60.0, pencil_spectrum),
    ("rayleigh min-max", 60.0, rayleigh_minmax),
    ("foundations", 30.0, foundations),
];

pub const CHECK_COUNT: usize = CHECKS.len();

/// Runs check `id` (1-based). A check passes when its numerical conditions
/// hold and it finishes within its time budget.
pub fn run_check(id: usize) -> Option<CheckResult> {
    let (name, budget, f) = *CHECKS.get(id.checked_sub(1)?)?;
    let start = Instant::now();
    let outcome = f();
    let seconds = start.elapsed().as_secs_f64();
    let (ok, mut detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    let in_time = seconds <= budget;
    if !in_time {
        detail.push_str("; over time budget");
    }
    Some(CheckResult {
        id,
        name,
        passed: ok && in_time,
        detail,
        seconds,
        budget_seconds: budget,
    })
}

pub fn run_all() -> Vec<CheckResult> {
    (1..=CHECK_COUNT).filter_map(run_check).collect()
}

fn grid(n: usize) -> Result<TorusGrid> {
    TorusGrid::new(1, n)
}

fn preset(which: Preset, n: usize) -> Result<ModelProblem> {
    build_preset(which, &grid(n)?)
}

fn degenerate_band() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for n in [8, 16, 32] {
        let prob = preset(Preset::Remark, n)?;
        let eval = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        let pi = prob.grid.pi_point();
        let b = eval.band3(pi, pi);
        worst = worst.max(b.width()).max((0.5 * (b.lo + b.hi) - 4.0).abs());
    }
    Ok((worst <= 1e-12, format!("max(width, |center-4|) = {worst:.3e}")))
}

/// The problem with `w₂ = 0`, `v₃ = 1`, `w₃ = 1 − cos t` and nothing else.
pub fn closed_form_problem(n: usize) -> Result<ModelProblem> {
    let zero = FunctionSpec::constant(0.0);
    let specs = FunctionSpecs {
        w1: zero.clone(),
        v1: zero.clone(),
        v2: zero.clone(),
        v3: FunctionSpec::constant(1.0),
        v21: zero.clone(),
        v22: zero.clone(),
        w2: zero,
        w3: FunctionSpec::dispersion_of(3, &[&[0, 0, 1]]),
    };
    ModelProblem::from_specs(grid(n)?, 0.0, &specs)
}

fn closed_form_root() -> Result<(bool, String)> {
    let prob = closed_form_problem(64)?;
    let eval = DeterminantEvaluator::new(&prob, SpectralConfig::default());
    let z0 = eval
        .disc3(0, 0)
        .below
        .ok_or_else(|| crate::Error::Hypothesis("no root below the band".into()))?;
    let four_pi2 = 4.0 * std::f64::consts::PI.powi(2);
    let u = bisect(|u| u.powi(4) + 2.0 * u.powi(3) - four_pi2, 0.0, 10.0, 0.0);
    let err = (z0 + u).abs();
    Ok((err <= 1e-6, format!("z0 = {z0:.12}, -u = {:.12}, diff {err:.3e}", -u)))
}

fn delta3_equivalence() -> Result<(bool, String)> {
    let prob = preset(Preset::Remark, 64)?;
    let eval = DeterminantEvaluator::new(&prob, SpectralConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let n = prob.npts();
    let (mut fwd, mut back, mut roots) = (0.0f64, 0.0f64, 0);
    for _ in 0..20 {
        let (p, q) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let band = eval.band3(p, q);
        let d = eval.disc3(p, q);
        let eigs = eig_sym(&assemble_fiber(Fiber::H3 { p, q }, &prob, DEFAULT_DIM_CAP)?, false)?.values;
        for r in d.roots() {
            roots += 1;
            fwd = fwd.max(eigs.iter().map(|e| (e - r).abs()).fold(f64::INFINITY, f64::min));
        }
        for &e in eigs.iter().filter(|&&e| !band.contains(e, 1e-8)) {
            back = back.max(d.roots().map(|r| (e - r).abs()).fold(f64::INFINITY, f64::min));
        }
    }
    Ok((
        fwd <= 1e-8 && back <= 1e-8,
        format!("{roots} roots; root->eig {fwd:.3e}, eig->root {back:.3e}"),
    ))
}

/// Distances at one grid size for the convergence checks.
struct Convergence {
    channel_hd: [f64; 3],
    channel_excess: [f64; 3],
    full_hd: f64,
    hwz: f64,
    hwz_dist: f64,
    hwz_identity: f64,
}

fn convergence_at(n: usize) -> Result<Convergence> {
    let prob = preset(Preset::Symmetric, n)?;
    let ch = ChannelAnalysis::new(&prob, SpectralConfig::default());
    let mut channel_hd = [0.0; 3];
    let mut channel_excess = [0.0; 3];
    for (i, c) in Channel::ALL.into_iter().enumerate() {
        let pred = ch.channel_spectrum(c);
        let eigs = eig_sym(&assemble_channel(c, &prob, DEFAULT_DIM_CAP)?, false)?.values;
        channel_hd[i] = pred.hausdorff(&eigs);
        channel_excess[i] = pred.excess_of(&eigs);
    }
    let ess = ch.essential_spectrum().set;
    let eigs = eig_sym(&assemble_full(&prob, DEFAULT_DIM_CAP)?, false)?.values;
    let cl = classify_spectrum(&eigs, &ess, Some(prob.npts()));
    let hwz = ch.hwz_min();
    let lowest = cl.clustered.first().copied().unwrap_or(f64::NAN);
    Ok(Convergence {
        channel_hd,
        channel_excess,
        full_hd: cl.hausdorff,
        hwz,
        hwz_dist: (lowest - hwz).abs(),
        hwz_identity: (hwz - ess.min().unwrap_or(f64::NAN)).abs(),
    })
}

fn convergence_pair() -> Result<(Convergence, Convergence)> {
    Ok((convergence_at(6)?, convergence_at(12)?))
}

fn channel_convergence() -> Result<(bool, String)> {
    let (a, b) = convergence_pair()?;
    let mut ok = true;
    let mut parts = Vec::new();
    for i in 0..3 {
        // every eigenvalue lies within the Hausdorff distance by definition;
        // the excess is reported to show how far inside
        ok &= b.channel_hd[i] < a.channel_hd[i];
        ok &= a.channel_excess[i] <= a.channel_hd[i] && b.channel_excess[i] <= b.channel_hd[i];
        parts.push(format!("H{}: {:.3e}->{:.3e}", i + 1, a.channel_hd[i], b.channel_hd[i]));
    }
    ok &= b.full_hd <= 1.1 * a.full_hd;
    parts.push(format!("full: {:.3e}->{:.3e}", a.full_hd, b.full_hd));
    Ok((ok, parts.join(", ")))
}

fn hwz_bottom() -> Result<(bool, String)> {
    let (a, b) = convergence_pair()?;
    let identity = a.hwz_identity.max(b.hwz_identity);
    let ok = identity == 0.0 && b.hwz_dist < a.hwz_dist;
    Ok((
        ok,
        format!(
            "hwz(6) = {:.10}, hwz(12) = {:.10}; |min clustered - hwz|: {:.3e}->{:.3e}; identity {identity:.1e}",
            a.hwz, b.hwz, a.hwz_dist, b.hwz_dist
        ),
    ))
}

fn channel_inclusion() -> Result<(bool, String)> {
    let mut ok = true;
    let mut worst = 0.0f64;
    for which in Preset::ALL {
        let prob = preset(which, 8)?;
        let ch = ChannelAnalysis::new(&prob, SpectralConfig::default());
        let tol = ch.evaluator().config().merge_tol;
        let s12 = ch.channel_spectrum(Channel::H1).union(&ch.channel_spectrum(Channel::H2));
        ok &= ch.channel_spectrum(Channel::H3).is_subset_of(&s12, tol);
        let eigs = eig_sym(&assemble_channel(Channel::H3, &prob, DEFAULT_DIM_CAP)?, false)?.values;
        let excess = s12.excess_of(&eigs);
        worst = worst.max(excess);
        ok &= excess <= tol;
    }
    Ok((ok, format!("predicted sets nested; oracle sigma(H3) excess {worst:.3e}")))
}

fn fy_exactness() -> Result<(bool, String)> {
    let prob = preset(Preset::Symmetric, 8)?;
    let solver = FySolver::new(&prob, SpectralConfig::default(), FyOptions::default())?;
    let search = solver.search_intervals();
    let found = solver.find_eigenvalues(&search);
    let eigs = eig_sym(solver.full_operator(), false)?.values;
    let inside = |z: f64| search.iter().any(|iv| iv.lo < z && z < iv.hi);
    let oracle: Vec<f64> = eigs.into_iter().filter(|&z| inside(z)).collect();
    let fy: Vec<f64> = found.iter().map(|b| b.z).collect();
    let mut ok = fy.len() == oracle.len();
    let mut worst = 0.0f64;
    for (a, b) in fy.iter().zip(&oracle) {
        worst = worst.max((a - b).abs());
    }
    ok &= worst <= 1e-8;
    let dist = found.iter().map(|b| b.eig_distance).fold(0.0, f64::max);
    let res = found.iter().map(|b| b.residual).fold(0.0, f64::max);
    ok &= dist <= 1e-8 && res <= 1e-8;
    Ok((
        ok,
        format!(
            "{} fy roots vs {} oracle; diff {worst:.3e}, eig_distance {dist:.3e}, residual {res:.3e}",
            fy.len(),
            oracle.len()
        ),
    ))
}

/// `count` random points of the search intervals.
fn random_admissible(solver: &FySolver, rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    let search = solver.search_intervals();
    let total: f64 = search.iter().map(|iv| iv.width()).sum();
    (0..count)
        .map(|_| {
            let mut u = rng.gen_range(0.0..total);
            for iv in &search {
                if u < iv.width() {
                    return iv.lo + u;
                }
                u -= iv.width();
            }
            search.last().map_or(0.0, |iv| iv.hi)
        })
        .collect()
}

fn literal_derived() -> Result<(bool, String)> {
    let prob = preset(Preset::Symmetric, 8)?;
    let solver = FySolver::new(&prob, SpectralConfig::default(), FyOptions::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for z in random_admissible(&solver, &mut rng, 5) {
        let lit = solver.reduced_system(z, Mode::Literal)?;
        let der = solver.reduced_system(z, Mode::Derived)?;
        worst = worst.max((&lit.a - &der.a).amax()).max((&lit.k - &der.k).amax());
    }
    Ok((worst <= 1e-12, format!("max entry difference {worst:.3e}")))
}

fn coefficient_inverse() -> Result<(bool, String)> {
    let prob = preset(Preset::Symmetric, 16)?;
    let eval = DeterminantEvaluator::new(&prob, SpectralConfig::default());
    let (lo, hi) = prob.spectral_window();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut done, mut tries, mut worst) = (0, 0, 0.0f64);
    while done < 100 && tries < 100_000 {
        tries += 1;
        let p = rng.gen_range(0..prob.npts());
        let z = rng.gen_range(lo..hi);
        let (Ok(a), Ok(b)) = (eval.coeff_matrix(p, z), eval.coeff_inverse(p, z)) else {
            continue;
        };
        let err = (a.matrix() * b.matrix() - nalgebra::Matrix4::identity()).amax();
        worst = worst.max(err);
        done += 1;
    }
    Ok((
        done == 100 && worst <= 1e-12,
        format!("{done} admissible samples, max |A A^-1 - I| = {worst:.3e}"),
    ))
}

fn pencil_spectrum() -> Result<(bool, String)> {
    let prob = preset(Preset::Gap, 8)?;
    let full = assemble_full(&prob, DEFAULT_DIM_CAP)?;
    let split = split_blocks(&full)?;
    let (alpha, beta) = (split.b_c + 1e-6, split.a_ess - 1e-6);
    let roots = split.pencil_spectrum(alpha, beta, 200)?;
    let eig = eig_sym(&full, true)?;
    let vectors = eig.vectors.expect("vectors requested");
    let na = split.dim_a();
    let mut ok = true;
    let (mut diff, mut l_res, mut y_res, mut count) = (0.0f64, 0.0f64, 0.0f64, 0);
    let mut oracle = Vec::new();
    for (k, &lam) in eig.values.iter().enumerate() {
        if !(alpha < lam && lam < beta) {
            continue;
        }
        oracle.push(lam);
        count += 1;
        let v = vectors.column(k).into_owned();
        let x = v.rows(0, na).into_owned();
        let y = v.rows(na, v.len() - na).into_owned();
        l_res = l_res.max((split.eval_l(lam)? * &x).norm());
        let bx = split.block_b.transpose() * &x;
        y_res = y_res.max((y + split.resolvent_apply(lam, &bx)?).norm());
    }
    ok &= roots.len() == oracle.len();
    for (a, b) in roots.iter().zip(&oracle) {
        diff = diff.max((a - b).abs());
    }
    ok &= diff <= 1e-8 && l_res <= 1e-8 && y_res <= 1e-8 && count > 0;
    Ok((
        ok,
        format!(
            "gap ({alpha:.6}, {beta:.6}): {} pencil roots vs {count} oracle; diff {diff:.3e}, |L x| {l_res:.3e}, |y + R B* x| {y_res:.3e}",
            roots.len()
        ),
    ))
}

fn rayleigh_minmax() -> Result<(bool, String)> {
    let prob = preset(Preset::Gap, 8)?;
    let full = assemble_full(&prob, DEFAULT_DIM_CAP)?;
    let split = split_blocks(&full)?;
    let (alpha, beta) = (split.b_c + 1e-6, split.a_ess - 1e-6);
    let eig = eig_sym(&full, true)?;
    let vectors = eig.vectors.expect("vectors requested");
    let pairs: Vec<(f64, DVector<f64>)> = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, &l)| alpha < l && l < beta)
        .map(|(k, &l)| (l, vectors.column(k).into_owned()))
        .collect();
    let report = split.minmax_verify(alpha, beta, &pairs, 100, SEED, 1e-8)?;
    let mut ok = report.passed && !pairs.is_empty();

    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let na = split.dim_a();
    let mut monotone = true;
    for _ in 0..100 {
        let x = DVector::from_fn(na, |_, _| rng.gen_range(-1.0..1.0)).normalize();
        let l1 = rng.gen_range(alpha..beta);
        let l2 = rng.gen_range(alpha..beta);
        let (l1, l2) = (l1.min(l2), l1.max(l2));
        if l1 < l2 {
            monotone &= split.phi(&x, l1)? > split.phi(&x, l2)?;
        }
    }
    ok &= monotone;

    let mut kappa_ok = true;
    for i in 0..10 {
        let a = alpha + (beta - alpha) * i as f64 / 9.0;
        kappa_ok &= split.kappa_alpha(a)? <= split.count_a_below(a)?;
    }
    ok &= kappa_ok;

    let worst_p = report
        .entries
        .iter()
        .map(|e| match e.p_x {
            RayleighValue::Finite(v) => (v - e.lambda).abs(),
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    let worst_b = report
        .entries
        .iter()
        .map(|e| e.max_sampled - e.lambda)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((
        ok,
        format!(
            "{} in-gap pairs, kappa_alpha = {}; max |p(x_i) - l_i| {worst_p:.3e}, max p(x) - l_i {worst_b:.3e}; phi decreasing {monotone}; kappa bound {kappa_ok}",
            pairs.len(),
            report.kappa_alpha
        ),
    ))
}

fn foundations() -> Result<(bool, String)> {
    let mut parts = Vec::new();
    let mut ok = true;

    let mut quad = 0.0f64;
    for n in [6, 8, 12, 16] {
        let g = grid(n)?;
        for k in 0..n {
            let exact = if k == 0 { 2.0 * std::f64::consts::PI } else { 0.0 };
            let c: Vec<f64> = g.nodes().iter().map(|t| (k as f64 * t).cos()).collect();
            let s: Vec<f64> = g.nodes().iter().map(|t| (k as f64 * t).sin()).collect();
            quad = quad
                .max((quad_integrate(&g, &c) - exact).abs())
                .max(quad_integrate(&g, &s).abs());
        }
    }
    ok &= quad <= 1e-13;
    parts.push(format!("quadrature {quad:.1e}"));

    let prob = preset(Preset::Symmetric, 6)?;
    let full = assemble_full(&prob, DEFAULT_DIM_CAP)?;
    let asym = full.max_asymmetry();
    let zero_blocks = [(0, 2), (0, 3), (1, 3)]
        .iter()
        .all(|&(r, c)| full.sector_block(r, c).is_some_and(|b| b.iter().all(|&x| x == 0.0)));
    ok &= asym == 0.0 && zero_blocks;
    parts.push(format!("asymmetry {asym:.1e}, zero pattern {zero_blocks}"));

    let h3 = eig_sym(&assemble_channel(Channel::H3, &prob, DEFAULT_DIM_CAP)?, false)?.values;
    let n = prob.npts();
    let mut fibers = Vec::with_capacity(h3.len());
    for p in 0..n {
        for q in 0..n {
            fibers.extend(eig_sym(&assemble_fiber(Fiber::H3 { p, q }, &prob, DEFAULT_DIM_CAP)?, false)?.values);
        }
    }
    fibers.sort_by(f64::total_cmp);
    let di = if fibers.len() == h3.len() {
        h3.iter().zip(&fibers).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    ok &= di <= 1e-12;
    parts.push(format!("direct integral {di:.1e}"));

    let eval = DeterminantEvaluator::new(&prob, SpectralConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (wlo, whi) = prob.spectral_window();
    let mut monotone = true;
    for _ in 0..500 {
        let (p, q) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let band = eval.band3(p, q);
        let (lo, hi) = if rng.gen_bool(0.5) {
            (wlo, band.lo - 1e-6)
        } else {
            (band.hi + 1e-6, whi)
        };
        let (z1, z2) = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
        let (z1, z2) = (z1.min(z2), z1.max(z2));
        if z1 < z2 {
            monotone &= eval.delta3(p, q, z1)? > eval.delta3(p, q, z2)?;
        }

        let ess = eval.ess_fiber12(p).clone();
        let gaps = gaps_of(&ess, wlo, whi);
        let g = gaps[rng.gen_range(0..gaps.len())];
        let (z1, z2) = (rng.gen_range(g.0..g.1), rng.gen_range(g.0..g.1));
        let (z1, z2) = (z1.min(z2), z1.max(z2));
        if z1 < z2 {
            monotone &= eval.delta1(p, z1)? > eval.delta1(p, z2)?;
        }
    }
    ok &= monotone;
    parts.push(format!("monotonicity {monotone}"));
    Ok((ok, parts.join(", ")))
}

/// Components of `[lo, hi] \ set`, shrunk away from the set.
fn gaps_of(set: &BandSet, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    set.complement_within(lo, hi)
        .into_iter()
        .map(|iv| (iv.lo + 1e-6, iv.hi - 1e-6))
        .filter(|(a, b)| a < b)
        .collect()
}
