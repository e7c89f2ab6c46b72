//! The 2×2 block split `H = [[A, B], [B*, C]]` with `A` on sectors {0,1} and
//! `C` on sectors {2,3}, the transfer function
//! `L(λ) = A − λ − B(C − λ)⁻¹B*`, its Rayleigh functional and index.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Serialize, Serializer};

use crate::bands::BandSet;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ModelProblem;
use crate::oracle::{assemble_full, classify_spectrum, eig_sym_matrix, DenseSymOperator, DEFAULT_DIM_CAP};
use crate::roots::expand_bracket;

/// Smallest admissible distance between `λ` and `σ(C)`.
pub const RESOLVENT_GUARD: f64 = 1e-10;

/// Block split of an assembled `H`.
#[derive(Debug, Clone)]
pub struct PencilSplit {
    pub block_a: DMatrix<f64>,
    pub block_b: DMatrix<f64>,
    pub block_c: DMatrix<f64>,
    /// Size of sector 1 (`n^ν`).
    pub npts: usize,
    c_values: Vec<f64>,
    c_vectors: DMatrix<f64>,
    /// `B·Q` with `Q` the eigenvectors of `C`.
    bq: DMatrix<f64>,
    /// Top of `σ(C)`.
    pub b_c: f64,
    /// Bottom of the clustered part of `σ(A)`.
    pub a_ess: f64,
}

/// Splits an operator assembled on the full four-sector layout.
pub fn split_blocks(full: &DenseSymOperator) -> Result<PencilSplit> {
    let layout = &full.layout;
    let (s0, s1, s2) = match (layout.block(0), layout.block(1), layout.block(2), layout.block(3)) {
        (Some(s0), Some(s1), Some(s2), Some(_)) => (s0, s1, s2),
        _ => return Err(Error::Hypothesis("operator is not on the full layout".into())),
    };
    debug_assert_eq!(s0.offset, 0);
    let top = s1.offset + s1.size;
    let dim = full.dim();
    let m = &full.matrix;
    let block_a = m.view((0, 0), (top, top)).into_owned();
    let block_b = m.view((0, s2.offset), (top, dim - top)).into_owned();
    let block_c = m.view((top, top), (dim - top, dim - top)).into_owned();
    let eig = eig_sym_matrix(&block_c, true)?;
    let c_vectors = eig.vectors.expect("vectors requested");
    let b_c = *eig.values.last().expect("non-empty block");
    let bq = &block_b * &c_vectors;
    let a_ess = a_ess_surrogate(&block_a, s1.size)?;
    Ok(PencilSplit {
        block_a,
        block_b,
        block_c,
        npts: s1.size,
        c_values: eig.values,
        c_vectors,
        bq,
        b_c,
        a_ess,
    })
}

/// Minimum of the eigenvalues of `A` that cluster on the range of its
/// one-particle diagonal.
fn a_ess_surrogate(a: &DMatrix<f64>, npts: usize) -> Result<f64> {
    let diag: Vec<f64> = (1..=npts).map(|i| a[(i, i)]).collect();
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let eigs = eig_sym_matrix(a, false)?.values;
    let c = classify_spectrum(&eigs, &BandSet::interval(lo, hi, 0.0), Some(npts));
    c.clustered
        .first()
        .copied()
        .ok_or_else(|| Error::Hypothesis("no clustered eigenvalue in block A".into()))
}

/// Value of the extended Rayleigh functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayleighValue {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
}

impl Serialize for RayleighValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RayleighValue::Finite(v) => s.serialize_f64(*v),
            RayleighValue::PlusInfinity => s.serialize_str("+inf"),
            RayleighValue::MinusInfinity => s.serialize_str("-inf"),
        }
    }
}

impl RayleighValue {
    /// Order-compatible real (`±∞` for the markers).
    pub fn as_f64(self) -> f64 {
        match self {
            RayleighValue::Finite(v) => v,
            RayleighValue::PlusInfinity => f64::INFINITY,
            RayleighValue::MinusInfinity => f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayleighResult {
    pub value: RayleighValue,
    pub iterations: usize,
}

impl PencilSplit {
    pub fn dim_a(&self) -> usize {
        self.block_a.nrows()
    }

    pub fn c_spectrum(&self) -> &[f64] {
        &self.c_values
    }

    /// `[[A, B], [B*, C]]`.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let (na, nc) = (self.dim_a(), self.block_c.nrows());
        let mut m = DMatrix::zeros(na + nc, na + nc);
        m.view_mut((0, 0), (na, na)).copy_from(&self.block_a);
        m.view_mut((0, na), (na, nc)).copy_from(&self.block_b);
        m.view_mut((na, 0), (nc, na)).copy_from(&self.block_b.transpose());
        m.view_mut((na, na), (nc, nc)).copy_from(&self.block_c);
        m
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        let (k, d) = self
            .c_values
            .iter()
            .map(|&c| (c, (c - lambda).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        if d <= RESOLVENT_GUARD {
            return Err(Error::Domain {
                z: lambda,
                what: "spectrum of block C".into(),
                lo: k,
                hi: k,
            });
        }
        Ok(())
    }

    fn inv_gaps(&self, lambda: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.c_values.len(),
            self.c_values.iter().map(|&c| 1.0 / (c - lambda)),
        )
    }

    /// `L(λ)`, exactly symmetric.
    pub fn eval_l(&self, lambda: f64) -> Result<DMatrix<f64>> {
        self.check_lambda(lambda)?;
        let d = self.inv_gaps(lambda);
        let na = self.dim_a();
        let mut l = DMatrix::zeros(na, na);
        for j in 0..na {
            for i in j..na {
                let s: f64 = (0..d.len())
                    .map(|k| self.bq[(i, k)] * d[k] * self.bq[(j, k)])
                    .sum();
                let v = self.block_a[(i, j)] - if i == j { lambda } else { 0.0 } - s;
                l[(i, j)] = v;
                l[(j, i)] = v;
            }
        }
        Ok(l)
    }

    /// `(C − λ)⁻¹ v` for `v` in the sectors {2,3}.
    pub fn resolvent_apply(&self, lambda: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_lambda(lambda)?;
        let g = self.c_vectors.transpose() * v;
        Ok(&self.c_vectors * g.component_mul(&self.inv_gaps(lambda)))
    }

    /// `φ_x(λ) = (L(λ)x, x)`.
    pub fn phi(&self, x: &DVector<f64>, lambda: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        let g = self.bq.transpose() * x;
        let s: f64 = g
            .iter()
            .zip(&self.c_values)
            .map(|(gk, c)| gk * gk / (c - lambda))
            .sum();
        Ok(x.dot(&(&self.block_a * x)) - lambda * x.norm_squared() - s)
    }

    /// `φ_x′(λ) = −‖x‖² − ‖(C − λ)⁻¹B*x‖²`.
    pub fn phi_slope(&self, x: &DVector<f64>, lambda: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        let g = self.bq.transpose() * x;
        let s: f64 = g
            .iter()
            .zip(&self.c_values)
            .map(|(gk, c)| (gk / (c - lambda)).powi(2))
            .sum();
        Ok(-x.norm_squared() - s)
    }

    fn check_interval(&self, alpha: f64, beta: f64) -> Result<()> {
        if alpha >= beta || alpha.is_nan() || beta.is_nan() {
            return Err(Error::Hypothesis(format!("empty interval [{alpha}, {beta}]")));
        }
        if let Some(&c) = self
            .c_values
            .iter()
            .find(|&&c| c >= alpha - RESOLVENT_GUARD && c <= beta + RESOLVENT_GUARD)
        {
            return Err(Error::Domain {
                z: c,
                what: "spectrum of block C".into(),
                lo: alpha,
                hi: beta,
            });
        }
        Ok(())
    }

    /// Root of the strictly decreasing `φ_x` on `[α, β]`, or the `±∞` marker.
    pub fn rayleigh(&self, x: &DVector<f64>, alpha: f64, beta: f64) -> Result<RayleighResult> {
        self.check_interval(alpha, beta)?;
        let (fa, fb) = (self.phi(x, alpha)?, self.phi(x, beta)?);
        let done = |value| Ok(RayleighResult { value, iterations: 0 });
        if fa == 0.0 {
            return done(RayleighValue::Finite(alpha));
        }
        if fb == 0.0 {
            return done(RayleighValue::Finite(beta));
        }
        if fa < 0.0 {
            return done(RayleighValue::MinusInfinity);
        }
        if fb > 0.0 {
            return done(RayleighValue::PlusInfinity);
        }
        let (mut lo, mut hi) = (alpha, beta);
        let mut iterations = 0;
        while iterations < 200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            iterations += 1;
            let f = self.phi(x, mid)?;
            if f == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if f > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(RayleighResult {
            value: RayleighValue::Finite(0.5 * (lo + hi)),
            iterations,
        })
    }

    fn l_eigenvalues(&self, lambda: f64) -> Result<Vec<f64>> {
        Ok(eig_sym_matrix(&self.eval_l(lambda)?, false)?.values)
    }

    /// Number of negative eigenvalues of `L(α)`.
    pub fn kappa_alpha(&self, alpha: f64) -> Result<usize> {
        Ok(self.l_eigenvalues(alpha)?.iter().filter(|&&v| v < 0.0).count())
    }

    /// `(λ, smallest |eigenvalue of L(λ)|, κ(λ))` on an equispaced grid.
    pub fn curve(&self, alpha: f64, beta: f64, points: usize) -> Result<Vec<(f64, f64, usize)>> {
        self.check_interval(alpha, beta)?;
        let points = points.max(1);
        (0..=points)
            .map(|i| {
                let lam = alpha + (beta - alpha) * i as f64 / points as f64;
                let ev = self.l_eigenvalues(lam)?;
                let small = ev.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
                Ok((lam, small, ev.iter().filter(|&&v| v < 0.0).count()))
            })
            .collect()
    }

    /// Points of `[α, β]` where `L(λ)` is singular, with multiplicity.
    ///
    /// Every eigenvalue of `L` decreases in `λ`, so the negative inertia only
    /// grows; each unit jump between scan nodes is one eigenvalue curve
    /// crossing zero, located by bisection on that curve.
    pub fn pencil_spectrum(&self, alpha: f64, beta: f64, points: usize) -> Result<Vec<f64>> {
        let scan = self.curve(alpha, beta, points)?;
        let mut roots = Vec::new();
        for w in scan.windows(2) {
            let ((l0, _, k0), (l1, _, k1)) = (w[0], w[1]);
            for j in k0..k1 {
                let mu = |lam: f64| self.l_eigenvalues(lam).map(|v| v[j]).unwrap_or(f64::NAN);
                let (mut lo, mut hi) = (l0, l1);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if mu(mid) >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
        }
        Ok(roots)
    }

    /// Number of eigenvalues of `A` below `α`.
    pub fn count_a_below(&self, alpha: f64) -> Result<usize> {
        Ok(eig_sym_matrix(&self.block_a, false)?
            .values
            .iter()
            .filter(|&&v| v < alpha)
            .count())
    }

    /// Attainment checks of the min–max characterization for eigenpairs of
    /// `H` in `[α, β]`; `pairs` holds `(λᵢ, full eigenvector)` in increasing
    /// order.
    pub fn minmax_verify(
        &self,
        alpha: f64,
        beta: f64,
        pairs: &[(f64, DVector<f64>)],
        samples: usize,
        seed: u64,
        tol: f64,
    ) -> Result<MinmaxReport> {
        let na = self.dim_a();
        let tops: Vec<DVector<f64>> = pairs
            .iter()
            .map(|(_, v)| v.rows(0, na).normalize())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        for (i, &(lambda, _)) in pairs.iter().enumerate() {
            let p_xi = self.rayleigh(&tops[i], alpha, beta)?.value;
            let attained = matches!(p_xi, RayleighValue::Finite(v) if (v - lambda).abs() <= tol);
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..samples {
                let mut x = DVector::zeros(na);
                for t in &tops[..=i] {
                    x += t * rng.sample::<f64, _>(StandardNormal);
                }
                let x = x.normalize();
                worst = worst.max(self.rayleigh(&x, alpha, beta)?.value.as_f64());
            }
            entries.push(MinmaxEntry {
                index: i + 1,
                lambda,
                p_x: p_xi,
                attained,
                max_sampled: worst,
                bounded: worst <= lambda + tol,
            });
        }
        let passed = entries.iter().all(|e| e.attained && e.bounded);
        Ok(MinmaxReport {
            alpha,
            beta,
            kappa_alpha: self.kappa_alpha(alpha)?,
            entries,
            passed,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MinmaxEntry {
    pub index: usize,
    pub lambda: f64,
    pub p_x: RayleighValue,
    pub attained: bool,
    pub max_sampled: f64,
    pub bounded: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinmaxReport {
    pub alpha: f64,
    pub beta: f64,
    pub kappa_alpha: usize,
    pub entries: Vec<MinmaxEntry>,
    pub passed: bool,
}

/// Result of tuning the gap preset.
#[derive(Debug, Clone)]
pub struct TunedGap {
    pub problem: ModelProblem,
    /// Constant added to `w1`.
    pub shift: f64,
    pub w0: f64,
    pub b_c: f64,
    pub a_ess: f64,
    pub margin: f64,
}

/// Separation enforced between `σ(C)` and the clustered part of `σ(A)`.
pub const GAP_MARGIN: f64 = 2.0;

/// Shifts `w1` so that `a_ess(A) = b(C) + GAP_MARGIN`, then sets `w0` so
/// that the lowest eigenvalue of `A` sits in the middle of the gap.
pub fn tune_gap(base: ModelProblem) -> Result<TunedGap> {
    let full = assemble_full(&base, DEFAULT_DIM_CAP)?;
    let split = split_blocks(&full)?;
    let npts = split.npts;
    let b_c = split.b_c;
    let with = |shift: f64, w0: f64| {
        let mut a = split.block_a.clone();
        a[(0, 0)] = w0;
        for i in 1..=npts {
            a[(i, i)] += shift;
        }
        a
    };

    // alternate the two one-dimensional solves; each moves the other's
    // target only slightly
    let (mut shift, mut w0) = (0.0, base.w0);
    for _ in 0..100 {
        let (prev_shift, prev_w0) = (shift, w0);
        for _ in 0..100 {
            let step = b_c + GAP_MARGIN - a_ess_surrogate(&with(shift, w0), npts)?;
            shift += step;
            if step.abs() <= 1e-13 * shift.abs().max(1.0) {
                break;
            }
        }
        let target = b_c + 0.5 * GAP_MARGIN;
        let lowest = |w: f64| linalg::sym_eigen(&with(shift, w), false).0[0] - target;
        // the lowest eigenvalue never exceeds w0, and grows with it
        let hi = expand_bracket(lowest, target, 1.0, 1.0, 1e9, |v| v > 0.0)
            .ok_or_else(|| Error::Hypothesis("cannot place an eigenvalue of A in the gap".into()))?;
        w0 = crate::roots::bisect(lowest, target, hi, 0.0);
        if (shift - prev_shift).abs() <= 1e-12 * shift.abs().max(1.0)
            && (w0 - prev_w0).abs() <= 1e-12 * w0.abs().max(1.0)
        {
            break;
        }
    }

    let mut problem = base;
    problem.w0 = w0;
    problem.w1.shift(shift);
    let split = split_blocks(&assemble_full(&problem, DEFAULT_DIM_CAP)?)?;
    if split.b_c >= split.a_ess {
        return Err(Error::Hypothesis(format!(
            "sigma(C) below the essential part of A: b(C) = {}, a_ess(A) = {}",
            split.b_c, split.a_ess
        )));
    }
    Ok(TunedGap {
        problem,
        shift,
        w0,
        b_c: split.b_c,
        a_ess: split.a_ess,
        margin: GAP_MARGIN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_preset, Preset, TorusGrid};

    fn split_of(which: Preset, n: usize) -> (ModelProblem, PencilSplit) {
        let mut prob = build_preset(which, &TorusGrid::new(1, n).unwrap()).unwrap();
        if which == Preset::Decoupled {
            // move sigma(C) far above sigma(A)
            prob.w2.shift(100.0);
            prob.w3.shift(100.0);
        }
        let split = split_blocks(&assemble_full(&prob, DEFAULT_DIM_CAP).unwrap()).unwrap();
        (prob, split)
    }

    #[test]
    fn decoupled_split() {
        let (prob, s) = split_of(Preset::Decoupled, 4);
        assert!(s.block_b.iter().all(|&x| x == 0.0));
        let mut expect: Vec<f64> = prob.w2.values().iter().chain(prob.w3.values()).copied().collect();
        expect.sort_by(f64::total_cmp);
        assert_eq!(s.c_spectrum(), &expect[..]);
        let l = s.eval_l(-3.0).unwrap();
        assert_eq!(l, &s.block_a - DMatrix::identity(s.dim_a(), s.dim_a()) * -3.0);
    }

    #[test]
    fn reassembly_is_bit_exact() {
        let prob = build_preset(Preset::Symmetric, &TorusGrid::new(1, 6).unwrap()).unwrap();
        let full = assemble_full(&prob, DEFAULT_DIM_CAP).unwrap();
        let s = split_blocks(&full).unwrap();
        assert_eq!(s.reassemble(), full.matrix);
    }

    #[test]
    fn gap_preset_hypothesis_holds() {
        for n in [6, 8] {
            let (prob, s) = split_of(Preset::Gap, n);
            assert!(s.b_c + GAP_MARGIN <= s.a_ess + 1e-9, "{} {}", s.b_c, s.a_ess);
            let lowest = eig_sym_matrix(&s.block_a, false).unwrap().values[0];
            assert!((lowest - 0.5 * (s.b_c + s.a_ess)).abs() < 1e-6, "{lowest} {} {}", s.b_c, s.a_ess);
            let sym = build_preset(Preset::Symmetric, &prob.grid).unwrap();
            let shift = prob.w1.values()[0] - sym.w1.values()[0];
            for (a, b) in prob.w1.values().iter().zip(sym.w1.values()) {
                assert!((a - b - shift).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn l_slope_matches_finite_difference() {
        let (_, s) = split_of(Preset::Gap, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lam = 0.5 * (s.b_c + s.a_ess);
        let h = 1e-4;
        for _ in 0..10 {
            let x = DVector::from_fn(s.dim_a(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let fd = ((s.eval_l(lam + h).unwrap() - s.eval_l(lam - h).unwrap()) * &x).dot(&x) / (2.0 * h);
            let exact = s.phi_slope(&x, lam).unwrap();
            assert!(fd < 0.0);
            assert!((fd - exact).abs() <= 1e-6 * exact.abs());
            let l = s.eval_l(lam).unwrap();
            assert_eq!((&l - l.transpose()).amax(), 0.0);
        }
    }

    #[test]
    fn uncoupled_rayleigh_is_quotient() {
        let (_, s) = split_of(Preset::Decoupled, 6);
        let x = DVector::from_fn(s.dim_a(), |i, _| 1.0 / (1.0 + i as f64)).normalize();
        let q = x.dot(&(&s.block_a * &x));
        let r = s.rayleigh(&x, q - 1.0, q + 1.0).unwrap();
        match r.value {
            RayleighValue::Finite(v) => assert!((v - q).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(s.rayleigh(&x, q + 0.5, q + 1.0).unwrap().value, RayleighValue::MinusInfinity);
        assert_eq!(s.rayleigh(&x, q - 1.0, q - 0.5).unwrap().value, RayleighValue::PlusInfinity);
    }

    #[test]
    fn uncoupled_kappa_and_spectrum() {
        let (_, s) = split_of(Preset::Decoupled, 6);
        let ev = eig_sym_matrix(&s.block_a, false).unwrap().values;
        let (lo, hi) = (ev[0], *ev.last().unwrap());
        assert_eq!(s.kappa_alpha(lo - 1.0).unwrap(), 0);
        assert_eq!(s.kappa_alpha(hi + 1.0).unwrap(), s.dim_a());
        let roots = s.pencil_spectrum(lo - 0.5, hi + 0.5, 200).unwrap();
        assert_eq!(roots.len(), ev.len());
        for (r, e) in roots.iter().zip(&ev) {
            assert!((r - e).abs() < 1e-12);
        }
    }
}
