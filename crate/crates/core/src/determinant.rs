//! Fredholm determinants Δ₃, Δ₁, Δ₂ of the fiber operators and the 4×4
//! coefficient matrix `A(p; z)` of the reduced system.

use std::sync::OnceLock;

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::Serialize;

use crate::bands::{close_sampled_roots, BandSet, Interval};
use crate::config::SpectralConfig;
use crate::error::{Error, Result};
use crate::model::ModelProblem;
use crate::roots::{bisect, expand_bracket};

/// Roots of `Δ₃(p,q; ·)` on the two sides of the band `[m₃, M₃]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Disc3 {
    pub below: Option<f64>,
    pub above: Option<f64>,
}

impl Disc3 {
    pub fn roots(&self) -> impl Iterator<Item = f64> {
        self.below.into_iter().chain(self.above)
    }
}

/// Everything computed once per first fiber variable `p`.
#[derive(Debug, Clone)]
pub struct FiberRow {
    /// `disc3(p, q)` for every `q`.
    pub disc3: Vec<Disc3>,
    /// Closure of `∪_q σ(h₃(p,q))`, the common essential spectrum of `h₁(p)`
    /// and `h₂(p)`.
    pub ess: BandSet,
}

/// The four quadratures `∫ g(s) / Δ₃(p,s; z) ds` entering Δ₁ and Δ₂.
#[derive(Debug, Clone, Copy)]
struct FiberIntegrals {
    v2sq: f64,
    v21sq: f64,
    v22sq: f64,
    v2v22: f64,
}

/// `A(p; z)` (or its inverse) in the index order `(0, 1, 2, 3)` of
/// `ψ = (f₀, f₁, c₁, c₂)`. Only the entries `00, 11, 13, 31, 22, 33` are nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffMatrix(pub Matrix4<f64>);

impl CoeffMatrix {
    fn from_entries(a00: f64, a11: f64, a13: f64, a22: f64, a33: f64) -> Self {
        let mut m = Matrix4::zeros();
        m[(0, 0)] = a00;
        m[(1, 1)] = a11;
        m[(1, 3)] = a13;
        m[(3, 1)] = a13;
        m[(2, 2)] = a22;
        m[(3, 3)] = a33;
        CoeffMatrix(m)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// `a₂₂ · (a₁₁a₃₃ − a₁₃²)`, the determinant by the zero pattern.
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[(0, 0)] * m[(2, 2)] * (m[(1, 1)] * m[(3, 3)] - m[(1, 3)] * m[(3, 1)])
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }
}

/// Cached evaluator of the determinants on the grid of one problem.
///
/// Per-`p` data (roots of Δ₃ and the fiber essential spectrum) is computed on
/// first use and then shared; the evaluator can be used from many threads.
pub struct DeterminantEvaluator<'a> {
    problem: &'a ModelProblem,
    config: SpectralConfig,
    v2sq: Vec<f64>,
    v3sq: Vec<f64>,
    v21sq: Vec<f64>,
    v22sq: Vec<f64>,
    v2v22: Vec<f64>,
    scale: f64,
    rows: Vec<OnceLock<FiberRow>>,
}

impl<'a> DeterminantEvaluator<'a> {
    pub fn new(problem: &'a ModelProblem, config: SpectralConfig) -> Self {
        let sq = |f: &[f64]| f.iter().map(|v| v * v).collect::<Vec<_>>();
        let v2 = problem.v2.values();
        let v22 = problem.v22.values();
        let scale = 1.0
            + problem.w2.max_abs()
            + problem.w3.max_abs()
            + problem.l2_norm_sq(&problem.v3);
        DeterminantEvaluator {
            problem,
            config,
            v2sq: sq(v2),
            v3sq: sq(problem.v3.values()),
            v21sq: sq(problem.v21.values()),
            v22sq: sq(v22),
            v2v22: v2.iter().zip(v22).map(|(a, b)| a * b).collect(),
            scale,
            rows: (0..problem.npts()).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn problem(&self) -> &'a ModelProblem {
        self.problem
    }

    pub fn config(&self) -> &SpectralConfig {
        &self.config
    }

    /// `[m₃(p,q), M₃(p,q)]`.
    pub fn band3(&self, p: usize, q: usize) -> Interval {
        let fiber = self.problem.w3_fiber(p, q);
        let lo = fiber.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = fiber.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }
    }

    /// Δ₃ without the band check.
    pub fn delta3_unchecked(&self, p: usize, q: usize, z: f64) -> f64 {
        let w = self.problem.grid.weight();
        let sum: f64 = self
            .problem
            .w3_fiber(p, q)
            .iter()
            .zip(&self.v3sq)
            .map(|(w3, v)| v / (w3 - z))
            .sum();
        self.problem.w2_at(p, q) - z - w * sum
    }

    /// `dΔ₃/dz = −1 − ∫ v₃²/(w₃ − z)²`.
    pub fn delta3_slope(&self, p: usize, q: usize, z: f64) -> f64 {
        let w = self.problem.grid.weight();
        let sum: f64 = self
            .problem
            .w3_fiber(p, q)
            .iter()
            .zip(&self.v3sq)
            .map(|(w3, v)| v / ((w3 - z) * (w3 - z)))
            .sum();
        -1.0 - w * sum
    }

    pub fn delta3(&self, p: usize, q: usize, z: f64) -> Result<f64> {
        let band = self.band3(p, q);
        if band.contains(z, self.config.band_guard) {
            return Err(Error::Domain {
                z,
                what: format!("band of w3({p},{q},·)"),
                lo: band.lo,
                hi: band.hi,
            });
        }
        Ok(self.delta3_unchecked(p, q, z))
    }

    /// Roots of Δ₃(p,q; ·) below and above the band.
    ///
    /// Δ₃ decreases strictly on each side of the band, from `+∞` to a pole
    /// (or to `−∞`), so each side holds at most one root, detected by the sign
    /// just outside the band.
    pub fn disc3(&self, p: usize, q: usize) -> Disc3 {
        let band = self.band3(p, q);
        let f = |z: f64| self.delta3_unchecked(p, q, z);
        let cap = 1e6 * self.scale;
        // full precision: roots close to a pole must stay on the right side
        let tol = 0.0;

        let guard_lo = self.config.band_guard * band.lo.abs().max(1.0);
        let edge_lo = band.lo - guard_lo;
        let below = match f(edge_lo) {
            0.0 => Some(edge_lo),
            v if v < 0.0 => expand_bracket(f, band.lo, -1.0, 1.0, cap, |v| v >= 0.0)
                .map(|far| bisect(f, far, edge_lo, tol)),
            _ => None,
        };

        let guard_hi = self.config.band_guard * band.hi.abs().max(1.0);
        let edge_hi = band.hi + guard_hi;
        let above = match f(edge_hi) {
            0.0 => Some(edge_hi),
            v if v > 0.0 => expand_bracket(f, band.hi, 1.0, 1.0, cap, |v| v <= 0.0)
                .map(|far| bisect(f, edge_hi, far, tol)),
            _ => None,
        };
        Disc3 { below, above }
    }

    /// Per-`p` roots of Δ₃ and the fiber essential spectrum (cached).
    pub fn fiber_row(&self, p: usize) -> &FiberRow {
        self.rows[p].get_or_init(|| self.build_row(p))
    }

    /// Fills every per-`p` cache in parallel.
    pub fn precompute(&self) {
        (0..self.rows.len()).into_par_iter().for_each(|p| {
            self.fiber_row(p);
        });
    }

    fn build_row(&self, p: usize) -> FiberRow {
        let grid = &self.problem.grid;
        let npts = self.problem.npts();
        let disc3: Vec<Disc3> = (0..npts).map(|q| self.disc3(p, q)).collect();
        let bands: Vec<Interval> = (0..npts).map(|q| self.band3(p, q)).collect();
        let below: Vec<Vec<f64>> = disc3.iter().map(|d| d.below.into_iter().collect()).collect();
        let above: Vec<Vec<f64>> = disc3.iter().map(|d| d.above.into_iter().collect()).collect();
        let tol = self.config.merge_tol;
        let link = |roots: &[Vec<f64>]| {
            close_sampled_roots(roots, |q| grid.forward_neighbors(q, 1), self.config.closure, tol)
        };
        let ess = BandSet::union_all(
            [&BandSet::from_parts(bands, [], tol), &link(&below), &link(&above)],
            tol,
        );
        FiberRow { disc3, ess }
    }

    /// `σ_ess(h₁(p)) = σ_ess(h₂(p))`.
    pub fn ess_fiber12(&self, p: usize) -> &BandSet {
        &self.fiber_row(p).ess
    }

    fn check_fiber12(&self, p: usize, z: f64) -> Result<()> {
        match self.ess_fiber12(p).piece_near(z, self.config.band_guard) {
            Some(piece) => Err(Error::Domain {
                z,
                what: format!("essential spectrum of fiber p = {p}"),
                lo: piece.lo,
                hi: piece.hi,
            }),
            None => Ok(()),
        }
    }

    fn checked_denominator(&self, p: usize, q: usize, z: f64) -> Result<f64> {
        let d = self.delta3_unchecked(p, q, z);
        if d.abs() < self.config.singular_tol || !d.is_finite() {
            return Err(Error::NearSingular {
                what: format!("Δ₃({p},{q})"),
                z,
                value: d.abs(),
            });
        }
        Ok(d)
    }

    fn integrals(&self, p: usize, z: f64) -> Result<FiberIntegrals> {
        let w = self.problem.grid.weight();
        let mut acc = [0.0; 4];
        for s in 0..self.problem.npts() {
            let d = self.checked_denominator(p, s, z)?;
            acc[0] += self.v2sq[s] / d;
            acc[1] += self.v21sq[s] / d;
            acc[2] += self.v22sq[s] / d;
            acc[3] += self.v2v22[s] / d;
        }
        Ok(FiberIntegrals {
            v2sq: w * acc[0],
            v21sq: w * acc[1],
            v22sq: w * acc[2],
            v2v22: w * acc[3],
        })
    }

    /// Δ₁ without the essential-spectrum check; Δ₃ must not vanish on the fiber.
    pub fn delta1_unchecked(&self, p: usize, z: f64) -> f64 {
        let w = self.problem.grid.weight();
        let sum: f64 = (0..self.problem.npts())
            .map(|s| self.v21sq[s] / self.delta3_unchecked(p, s, z))
            .sum();
        1.0 - w * sum
    }

    /// Δ₂ without the essential-spectrum check.
    pub fn delta2_unchecked(&self, p: usize, z: f64) -> f64 {
        let w = self.problem.grid.weight();
        let mut acc = [0.0; 3];
        for s in 0..self.problem.npts() {
            let d = self.delta3_unchecked(p, s, z);
            acc[0] += self.v2sq[s] / d;
            acc[1] += self.v22sq[s] / d;
            acc[2] += self.v2v22[s] / d;
        }
        let (i2, i22, i222) = (w * acc[0], w * acc[1], w * acc[2]);
        (1.0 - i22) * (self.problem.w1.values()[p] - z - i2) - i222 * i222
    }

    pub fn delta1(&self, p: usize, z: f64) -> Result<f64> {
        self.check_fiber12(p, z)?;
        Ok(1.0 - self.integrals(p, z)?.v21sq)
    }

    pub fn delta2(&self, p: usize, z: f64) -> Result<f64> {
        self.check_fiber12(p, z)?;
        let i = self.integrals(p, z)?;
        let w1 = self.problem.w1.values()[p];
        Ok((1.0 - i.v22sq) * (w1 - z - i.v2sq) - i.v2v22 * i.v2v22)
    }

    /// `A(p; z)`; `a₂₂` integrates over `Δ₃(s, p; z)` (first argument free).
    pub fn coeff_matrix(&self, p: usize, z: f64) -> Result<CoeffMatrix> {
        self.check_fiber12(p, z)?;
        let i = self.integrals(p, z)?;
        let w = self.problem.grid.weight();
        let mut col = 0.0;
        for s in 0..self.problem.npts() {
            let band = self.band3(s, p);
            if band.contains(z, self.config.band_guard) {
                return Err(Error::Domain {
                    z,
                    what: format!("band of w3({s},{p},·)"),
                    lo: band.lo,
                    hi: band.hi,
                });
            }
            col += self.v21sq[s] / self.checked_denominator(s, p, z)?;
        }
        let a11 = self.problem.w1.values()[p] - z - i.v2sq;
        Ok(CoeffMatrix::from_entries(
            1.0,
            a11,
            i.v2v22,
            1.0 - w * col,
            1.0 - i.v22sq,
        ))
    }

    /// Explicit inverse of `A(p; z)`.
    pub fn coeff_inverse(&self, p: usize, z: f64) -> Result<CoeffMatrix> {
        let a = self.coeff_matrix(p, z)?;
        CoeffMatrix::inverse_of(&a, z, self.config.singular_tol)
    }
}

impl CoeffMatrix {
    /// `b₁₁ = a₃₃/Δ₂`, `b₁₃ = b₃₁ = −a₁₃/Δ₂`, `b₂₂ = 1/a₂₂`, `b₃₃ = a₁₁/Δ₂`.
    pub fn inverse_of(a: &CoeffMatrix, z: f64, singular_tol: f64) -> Result<CoeffMatrix> {
        let (a11, a13, a22, a33) = (a.get(1, 1), a.get(1, 3), a.get(2, 2), a.get(3, 3));
        let d2 = a11 * a33 - a13 * a13;
        let det = a22 * d2;
        if det.abs() <= singular_tol || !det.is_finite() {
            return Err(Error::NearSingular {
                what: "coefficient matrix A(p; z)".into(),
                z,
                value: det.abs(),
            });
        }
        Ok(CoeffMatrix::from_entries(
            1.0 / a.get(0, 0),
            a33 / d2,
            -a13 / d2,
            1.0 / a22,
            a11 / d2,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_preset, DispersionTerm, FunctionSpec, Preset, TorusGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn custom(n: usize, edit: impl FnOnce(&mut crate::model::FunctionSpecs)) -> ModelProblem {
        let (w0, mut specs) = Preset::Symmetric.specs();
        edit(&mut specs);
        ModelProblem::from_specs(TorusGrid::new(1, n).unwrap(), w0, &specs).unwrap()
    }

    fn cosine_band(n: usize) -> ModelProblem {
        custom(n, |s| {
            s.w2 = FunctionSpec::constant(0.0);
            s.v3 = FunctionSpec::constant(1.0);
            s.w3 = FunctionSpec::dispersion_of(3, &[&[0, 0, 1]]);
        })
    }

    fn symmetric(n: usize) -> ModelProblem {
        build_preset(Preset::Symmetric, &TorusGrid::new(1, n).unwrap()).unwrap()
    }

    #[test]
    fn delta3_without_coupling_is_w2_minus_z() {
        let prob = custom(12, |s| s.v3 = FunctionSpec::constant(0.0));
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        let zero = prob.grid.zero_point();
        assert!((ev.delta3(zero, zero, -1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn delta3_cosine_closed_form() {
        let prob = cosine_band(64);
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        let expect = 1.0 - 2.0 * PI / 3f64.sqrt();
        for (p, q) in [(0, 0), (5, 40), (63, 63)] {
            assert!((ev.delta3(p, q, -1.0).unwrap() - expect).abs() < 1e-8);
        }
    }

    #[test]
    fn delta3_rejects_band() {
        let prob = symmetric(8);
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        let band = ev.band3(2, 3);
        let err = ev.delta3(2, 3, 0.5 * (band.lo + band.hi)).unwrap_err();
        assert!(err.is_domain());
        assert!(ev.delta3(2, 3, band.lo).is_err());
    }

    #[test]
    fn delta3_decreases_left_of_band() {
        let prob = symmetric(16);
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        for p in 0..16 {
            for q in 0..16 {
                let z = ev.band3(p, q).lo - 0.5;
                assert!(ev.delta3(p, q, z - 0.1).unwrap() > ev.delta3(p, q, z).unwrap());
            }
        }
    }

    #[test]
    fn disc3_without_coupling_is_w2() {
        let prob = custom(12, |s| {
            s.v3 = FunctionSpec::constant(0.0);
            // w3 = 1.55 + ε(t), so w2 = ε(p)+ε(q) falls on both sides of the band
            s.w3 = FunctionSpec::DispersionSum {
                constant: 1.55,
                terms: vec![DispersionTerm { coeff: 1.0, combo: vec![0, 0, 1] }],
            };
        });
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        for p in 0..12 {
            for q in 0..12 {
                let d = ev.disc3(p, q);
                let w2 = prob.w2_at(p, q);
                let band = ev.band3(p, q);
                if w2 < band.lo {
                    assert!((d.below.unwrap() - w2).abs() < 1e-12);
                } else if w2 > band.hi {
                    assert!((d.above.unwrap() - w2).abs() < 1e-12);
                } else {
                    assert_eq!(d.roots().count(), 0);
                }
            }
        }
    }

    #[test]
    fn disc3_quartic_root() {
        let prob = cosine_band(64);
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        let d = ev.disc3(3, 7);
        // u⁴ + 2u³ = 4π², solved independently by Newton
        let mut u: f64 = 2.0;
        for _ in 0..50 {
            u -= (u.powi(4) + 2.0 * u.powi(3) - 4.0 * PI * PI) / (4.0 * u.powi(3) + 6.0 * u * u);
        }
        assert!((d.below.unwrap() + u).abs() < 1e-6, "{:?} vs {}", d, -u);
    }

    #[test]
    fn delta1_trivial_cases() {
        let prob = custom(8, |s| s.v21 = FunctionSpec::constant(0.0));
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        let lo = ev.ess_fiber12(0).min().unwrap();
        assert_eq!(ev.delta1(0, lo - 3.0).unwrap(), 1.0);

        let prob = symmetric(12);
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        let p = prob.grid.zero_point();
        let lo = ev.ess_fiber12(p).min().unwrap();
        let mut last = f64::NEG_INFINITY;
        for k in 0..20 {
            let z = lo - 1e3 + 50.0 * k as f64;
            let v = ev.delta1(p, z).unwrap();
            assert!(v < 1.0);
            if k > 0 {
                assert!(v < last, "Δ₁ must grow as z decreases");
            }
            last = v;
        }
        assert!(ev.delta1(p, -1e8).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn delta2_without_couplings() {
        let prob = custom(8, |s| {
            s.v2 = FunctionSpec::constant(0.0);
            s.v22 = FunctionSpec::constant(0.0);
        });
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        for p in 0..8 {
            let z = ev.ess_fiber12(p).min().unwrap() - 2.0;
            let expect = prob.w1.values()[p] - z;
            assert!((ev.delta2(p, z).unwrap() - expect).abs() < 1e-13);
        }
    }

    fn admissible_samples(ev: &DeterminantEvaluator, count: usize, seed: u64) -> Vec<(usize, f64)> {
        let npts = ev.problem().npts();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        while out.len() < count {
            let p = rng.gen_range(0..npts);
            let ess = ev.ess_fiber12(p);
            let (lo, hi) = (ess.min().unwrap(), ess.max().unwrap());
            let z = if rng.gen_bool(0.5) {
                lo - rng.gen_range(0.01..10.0)
            } else {
                hi + rng.gen_range(0.01..10.0)
            };
            if ev.coeff_matrix(p, z).map(|a| a.det().abs() > 1e-6).unwrap_or(false) {
                out.push((p, z));
            }
        }
        out
    }

    #[test]
    fn delta2_is_two_by_two_determinant() {
        let prob = symmetric(12);
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        for (p, z) in admissible_samples(&ev, 50, 7) {
            let a = ev.coeff_matrix(p, z).unwrap();
            let d2 = a.get(1, 1) * a.get(3, 3) - a.get(1, 3).powi(2);
            let v = ev.delta2(p, z).unwrap();
            assert!((v - d2).abs() <= 1e-13 * v.abs().max(1.0));
            assert_eq!(a.get(1, 3), a.get(3, 1));
        }
    }

    #[test]
    fn coeff_matrix_trivial_and_symmetric() {
        let prob = build_preset(Preset::Decoupled, &TorusGrid::new(1, 8).unwrap()).unwrap();
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        let a = ev.coeff_matrix(3, -5.0).unwrap();
        let w1 = prob.w1.values()[3];
        let expect = CoeffMatrix::from_entries(1.0, w1 + 5.0, 0.0, 1.0, 1.0);
        assert_eq!(a, expect);
        let b = ev.coeff_inverse(3, -5.0).unwrap();
        assert_eq!(b, CoeffMatrix::from_entries(1.0, 1.0 / (w1 + 5.0), 0.0, 1.0, 1.0));

        let prob = symmetric(12);
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        for (p, z) in admissible_samples(&ev, 50, 11) {
            let a = ev.coeff_matrix(p, z).unwrap();
            assert!((a.get(2, 2) - ev.delta1(p, z).unwrap()).abs() < 1e-13);
            let det = a.get(2, 2) * ev.delta2(p, z).unwrap();
            assert!((a.det() - det).abs() <= 1e-13 * det.abs().max(1.0));
        }
    }

    #[test]
    fn coeff_inverse_residual() {
        for prob in [symmetric(12), build_preset(Preset::Remark, &TorusGrid::new(1, 12).unwrap()).unwrap()] {
            let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
            for (p, z) in admissible_samples(&ev, 100, 3) {
                let a = ev.coeff_matrix(p, z).unwrap();
                let b = ev.coeff_inverse(p, z).unwrap();
                let r = a.matrix() * b.matrix() - Matrix4::identity();
                assert!(r.amax() <= 1e-12, "residual {} at p={p} z={z}", r.amax());
            }
        }
    }

    #[test]
    fn b22_tracks_delta1_near_root() {
        let prob = symmetric(12);
        let ev = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        let p = prob.grid.zero_point();
        let lo = ev.ess_fiber12(p).min().unwrap() - 1e-9;
        let root = bisect(|z| ev.delta1_unchecked(p, z), lo - 100.0, lo, 1e-14);
        for off in [1e-3, 1e-5, 1e-7] {
            let z = root - off;
            let b = ev.coeff_inverse(p, z).unwrap();
            assert!((b.get(2, 2) * ev.delta1(p, z).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
