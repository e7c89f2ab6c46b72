//! Reduction of the eigenvalue problem for `H` to the system `ψ = T(z)ψ` on
//! `C ⊕ L₂ ⊕ L₂ ⊕ L₂`, with `ψ = (f₀, f₁, c₁, c₂)` and `T = A⁻¹K`.
//!
//! All vectors use the oracle scaling: every `L₂` sector entry carries the
//! factor `√weight`. In that basis `A` is unchanged, kernels between `L₂`
//! sectors keep their quadrature weight, and `K₀₁`, `K₁₀` carry `√weight`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bands::{BandSet, Interval};
use crate::channel::ChannelAnalysis;
use crate::config::SpectralConfig;
use crate::error::{Error, Result};
use crate::linalg::{self, Lu};
use crate::model::ModelProblem;
use crate::oracle::{assemble_full, DenseSymOperator};
use crate::roots::{bisect, golden_min};

/// How `A(z)` and `K(z)` are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Closed-form coefficients and kernels, with Δ₃ argument orders exactly
    /// as in the reduction formulas.
    Literal,
    /// Schur complements of the assembled blocks of `H`.
    Derived,
}

/// `A(z)` and `K(z)` as dense `(1 + 3N)`-square matrices, `N = n^ν`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub z: f64,
    pub mode: Mode,
    pub npts: usize,
    pub a: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        1 + 3 * self.npts
    }

    /// Offsets of the `f₁`, `c₁`, `c₂` blocks.
    pub fn offsets(&self) -> [usize; 3] {
        let n = self.npts;
        [1, 1 + n, 1 + 2 * n]
    }

    pub fn t(&self) -> DMatrix<f64> {
        Lu::new(&self.a).solve(&self.k)
    }

    pub fn i_minus_t(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim()) - self.t()
    }

    /// Largest absolute entry of `K(z)`.
    pub fn kernel_bound(&self) -> f64 {
        self.k.amax()
    }
}

/// A located eigenvalue with its reduced and reconstructed eigenvectors.
#[derive(Debug, Clone, Serialize)]
pub struct EigvecBundle {
    pub z: f64,
    pub psi: Vec<f64>,
    pub full: Vec<f64>,
    /// `‖Hf − zf‖ / ‖f‖` against the assembled operator.
    pub residual: f64,
    pub eig_distance: f64,
    /// Euclidean norms of the four sector blocks of `full`.
    pub sector_norms: [f64; 4],
}

/// Knobs of the eigenvalue search.
#[derive(Debug, Clone, Copy)]
pub struct FyOptions {
    pub scan_points: usize,
    pub residual_tol: f64,
    /// Largest `eig_distance` accepted at a local minimum without sign change.
    pub accept_tol: f64,
    pub dim_cap: usize,
}

impl Default for FyOptions {
    fn default() -> Self {
        FyOptions {
            scan_points: 200,
            residual_tol: 1e-8,
            accept_tol: 1e-8,
            dim_cap: crate::oracle::DEFAULT_DIM_CAP,
        }
    }
}

/// Blocks of the assembled `H` needed by the derived reduction.
struct Blocks {
    h00: f64,
    h01: DMatrix<f64>,
    h11: DMatrix<f64>,
    h12: DMatrix<f64>,
    h22_free: DMatrix<f64>,
    h23: DMatrix<f64>,
    h33_diag: DVector<f64>,
    p1: DMatrix<f64>,
    p2: DMatrix<f64>,
}

/// Reduced-system solver for one problem.
pub struct FySolver<'a> {
    chan: ChannelAnalysis<'a>,
    full: DenseSymOperator,
    blocks: Blocks,
    options: FyOptions,
}

/// `P₁[q, (s,q)] = √w·v₂₁(s)` and `P₂[p, (p,s)] = √w·v₂₂(s)`, so that
/// `c₁ = P₁f₂` and `c₂ = P₂f₂` in the scaled basis.
pub fn rank_factors(prob: &ModelProblem) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = prob.npts();
    let sw = prob.grid.weight().sqrt();
    let v21 = prob.v21.values();
    let v22 = prob.v22.values();
    let mut p1 = DMatrix::zeros(n, n * n);
    let mut p2 = DMatrix::zeros(n, n * n);
    for a in 0..n {
        for s in 0..n {
            p1[(a, s * n + a)] = sw * v21[s];
            p2[(a, a * n + s)] = sw * v22[s];
        }
    }
    (p1, p2)
}

impl<'a> FySolver<'a> {
    pub fn new(problem: &'a ModelProblem, config: SpectralConfig, options: FyOptions) -> Result<Self> {
        let full = assemble_full(problem, options.dim_cap)?;
        let block = |r, c| full.sector_block(r, c).expect("full layout");
        let h33 = block(3, 3);
        let h33_diag = h33.diagonal();
        if h33.iter().enumerate().any(|(k, &x)| k % (h33.nrows() + 1) != 0 && x != 0.0) {
            return Err(Error::Hypothesis("three-particle block is not diagonal".into()));
        }
        let (p1, p2) = rank_factors(problem);
        let h22_free = block(2, 2) + p1.transpose() * &p1 + p2.transpose() * &p2;
        let blocks = Blocks {
            h00: full.matrix[(0, 0)],
            h01: block(0, 1),
            h11: block(1, 1),
            h12: block(1, 2),
            h22_free,
            h23: block(2, 3),
            h33_diag,
            p1,
            p2,
        };
        Ok(FySolver {
            chan: ChannelAnalysis::new(problem, config),
            full,
            blocks,
            options,
        })
    }

    pub fn channels(&self) -> &ChannelAnalysis<'a> {
        &self.chan
    }

    pub fn problem(&self) -> &'a ModelProblem {
        self.chan.problem()
    }

    pub fn full_operator(&self) -> &DenseSymOperator {
        &self.full
    }

    fn config(&self) -> &SpectralConfig {
        self.chan.evaluator().config()
    }

    /// The excluded set `σ(H₁) ∪ σ(H₂) ∪ σ(H₃)`.
    pub fn excluded(&self) -> BandSet {
        self.chan.essential_spectrum().set
    }

    fn check_admissible(&self, z: f64) -> Result<()> {
        let ess = self.excluded();
        match ess.piece_near(z, self.config().band_guard) {
            Some(piece) => Err(Error::Domain {
                z,
                what: "channel spectra".into(),
                lo: piece.lo,
                hi: piece.hi,
            }),
            None => Ok(()),
        }
    }

    pub fn reduced_system(&self, z: f64, mode: Mode) -> Result<ReducedSystem> {
        self.check_admissible(z)?;
        match mode {
            Mode::Literal => self.literal(z),
            Mode::Derived => self.derived(z),
        }
    }

    fn literal(&self, z: f64) -> Result<ReducedSystem> {
        let prob = self.problem();
        let ev = self.chan.evaluator();
        let n = prob.npts();
        let w = prob.grid.weight();
        let sw = w.sqrt();
        let (v1, v2, v21, v22) = (
            prob.v1.values(),
            prob.v2.values(),
            prob.v21.values(),
            prob.v22.values(),
        );
        let dim = 1 + 3 * n;
        let (o1, oc1, oc2) = (1, 1 + n, 1 + 2 * n);
        let mut a = DMatrix::zeros(dim, dim);
        let mut k = DMatrix::zeros(dim, dim);

        // Δ₃(p, s) for all pairs
        let mut d3 = DMatrix::zeros(n, n);
        for p in 0..n {
            for s in 0..n {
                let d = ev.delta3(p, s, z)?;
                if d.abs() < self.config().singular_tol {
                    return Err(Error::NearSingular {
                        what: format!("Δ₃({p},{s})"),
                        z,
                        value: d.abs(),
                    });
                }
                d3[(p, s)] = d;
            }
        }

        a[(0, 0)] = 1.0;
        k[(0, 0)] = prob.w0 - z + 1.0;
        for p in 0..n {
            let c = ev.coeff_matrix(p, z)?;
            a[(o1 + p, o1 + p)] = c.get(1, 1);
            a[(o1 + p, oc2 + p)] = c.get(1, 3);
            a[(oc2 + p, o1 + p)] = c.get(3, 1);
            a[(oc1 + p, oc1 + p)] = c.get(2, 2);
            a[(oc2 + p, oc2 + p)] = c.get(3, 3);

            k[(0, o1 + p)] = sw * v1[p];
            k[(o1 + p, 0)] = -sw * v1[p];
            for s in 0..n {
                k[(o1 + p, oc1 + s)] = -w * v21[p] * v2[s] / d3[(p, s)];
                k[(oc1 + p, o1 + s)] = -w * v2[p] * v21[s] / d3[(s, p)];
                k[(oc1 + p, oc2 + s)] = w * v22[p] * v21[s] / d3[(s, p)];
                k[(oc2 + p, oc1 + s)] = w * v21[p] * v22[s] / d3[(p, s)];
            }
        }
        Ok(ReducedSystem {
            z,
            mode: Mode::Literal,
            npts: n,
            a,
            k,
        })
    }

    fn derived(&self, z: f64) -> Result<ReducedSystem> {
        let b = &self.blocks;
        let n = b.h11.nrows();
        let nn = n * n;

        // (H₃₃ − z)⁻¹ H₃₂, applied entrywise since H₃₃ is a multiplication
        let mut x = b.h23.transpose();
        for (i, mut row) in x.row_iter_mut().enumerate() {
            let d = b.h33_diag[i] - z;
            if d.abs() < self.config().singular_tol {
                return Err(Error::NearSingular {
                    what: "H33 − z".into(),
                    z,
                    value: d.abs(),
                });
            }
            row /= d;
        }
        let d3 = &b.h22_free - DMatrix::identity(nn, nn) * z - &b.h23 * x;
        let lu = Lu::new(&d3);

        let h21 = b.h12.transpose();
        let e1 = b.p1.transpose();
        let e2 = b.p2.transpose();
        let m1 = lu.solve(&h21);
        let y1 = lu.solve(&e1);
        let y2 = lu.solve(&e2);

        let a11 = &b.h11 - DMatrix::identity(n, n) * z - &b.h12 * &m1;
        let a13 = &b.h12 * &y2;
        let a22 = DMatrix::identity(n, n) - &b.p1 * &y1;
        let a31 = &b.p2 * &m1;
        let a33 = DMatrix::identity(n, n) - &b.p2 * &y2;
        let k12 = -(&b.h12 * &y1);
        let k21 = -(&b.p1 * &m1);
        let k23 = &b.p1 * &y2;
        let k32 = &b.p2 * &y1;

        let dim = 1 + 3 * n;
        let (o1, oc1, oc2) = (1, 1 + n, 1 + 2 * n);
        let mut a = DMatrix::zeros(dim, dim);
        let mut k = DMatrix::zeros(dim, dim);
        a[(0, 0)] = 1.0;
        k[(0, 0)] = b.h00 - z + 1.0;
        for j in 0..n {
            k[(0, o1 + j)] = b.h01[(0, j)];
            k[(o1 + j, 0)] = -b.h01[(0, j)];
        }
        a.view_mut((o1, o1), (n, n)).copy_from(&a11);
        a.view_mut((o1, oc2), (n, n)).copy_from(&a13);
        a.view_mut((oc1, oc1), (n, n)).copy_from(&a22);
        a.view_mut((oc2, o1), (n, n)).copy_from(&a31);
        a.view_mut((oc2, oc2), (n, n)).copy_from(&a33);
        k.view_mut((o1, oc1), (n, n)).copy_from(&k12);
        k.view_mut((oc1, o1), (n, n)).copy_from(&k21);
        k.view_mut((oc1, oc2), (n, n)).copy_from(&k23);
        k.view_mut((oc2, oc1), (n, n)).copy_from(&k32);
        Ok(ReducedSystem {
            z,
            mode: Mode::Derived,
            npts: n,
            a,
            k,
        })
    }

    /// `min |1 − μ|` over the eigenvalues `μ` of `T(z)` (derived mode).
    pub fn eig_distance(&self, z: f64) -> Result<f64> {
        let t = self.reduced_system(z, Mode::Derived)?.t();
        Ok(distance_to_one(&t))
    }

    /// `det(I − T(z))` (derived mode).
    pub fn det_i_minus_t(&self, z: f64) -> Result<f64> {
        let sys = self.reduced_system(z, Mode::Derived)?;
        Ok(linalg::determinant(&sys.i_minus_t()))
    }

    /// Open gaps of the excluded set inside the spectral window, shrunk by
    /// the band guard.
    pub fn search_intervals(&self) -> Vec<Interval> {
        let (lo, hi) = self.problem().spectral_window();
        let guard = self.config().band_guard;
        let pad = |x: f64| 1e3 * guard * x.abs().max(1.0);
        self.excluded()
            .complement_within(lo, hi)
            .into_iter()
            .map(|g| Interval {
                lo: g.lo + pad(g.lo),
                hi: g.hi - pad(g.hi),
            })
            .filter(|g| g.hi > g.lo)
            .collect()
    }

    /// Eigenvalues of `H` inside the given intervals, located through sign
    /// changes of `det(I − T)` and local minima of [`Self::eig_distance`].
    pub fn find_eigenvalues(&self, search: &[Interval]) -> Vec<EigvecBundle> {
        let mut found: Vec<EigvecBundle> = Vec::new();
        for iv in search {
            for z in self.candidates(iv) {
                if found.iter().any(|b| (b.z - z).abs() < 1e-9 * z.abs().max(1.0)) {
                    continue;
                }
                if let Ok(bundle) = self.bundle_at(z) {
                    if bundle.residual <= self.options.residual_tol {
                        found.push(bundle);
                    }
                }
            }
        }
        found.sort_by(|a, b| a.z.total_cmp(&b.z));
        found
    }

    fn candidates(&self, iv: &Interval) -> Vec<f64> {
        let m = self.options.scan_points.max(2);
        let h = (iv.hi - iv.lo) / m as f64;
        let zs: Vec<f64> = (0..=m)
            .map(|i| if i == m { iv.hi } else { iv.lo + h * i as f64 })
            .collect();
        let det = |z: f64| self.det_i_minus_t(z).unwrap_or(f64::NAN);
        let dist = |z: f64| self.eig_distance(z).unwrap_or(f64::INFINITY);
        let dets: Vec<f64> = zs.iter().map(|&z| det(z)).collect();
        let dists: Vec<f64> = zs.iter().map(|&z| dist(z)).collect();

        let mut out = Vec::new();
        for i in 0..m {
            let (d0, d1) = (dets[i], dets[i + 1]);
            if d0 == 0.0 {
                out.push(zs[i]);
            } else if d0.is_finite() && d1.is_finite() && d1 != 0.0 && (d0 < 0.0) != (d1 < 0.0) {
                out.push(bisect(det, zs[i], zs[i + 1], 0.0));
            }
        }
        if dets[m] == 0.0 {
            out.push(zs[m]);
        }
        // even-multiplicity roots: interior local minima of the distance
        for i in 1..m {
            if dists[i] <= dists[i - 1] && dists[i] <= dists[i + 1] {
                let (z, d) = golden_min(dist, zs[i - 1], zs[i + 1], 1e-14 * zs[i].abs().max(1.0));
                if d <= self.options.accept_tol.sqrt()
                    && !out.iter().any(|&r: &f64| (r - z).abs() < 1e-9 * z.abs().max(1.0))
                {
                    out.push(z);
                }
            }
        }
        out
    }

    /// Null vector of `I − T(z)`, full reconstruction and residual.
    pub fn bundle_at(&self, z: f64) -> Result<EigvecBundle> {
        let sys = self.reduced_system(z, Mode::Derived)?;
        let t = sys.t();
        let eig_distance = distance_to_one(&t);
        let (_, psi) = linalg::smallest_singular(&(DMatrix::identity(sys.dim(), sys.dim()) - t));
        let full = self.reconstruct(&psi, z)?;
        let residual = self.residual(&full, z);
        let layout = &self.full.layout;
        let mut sector_norms = [0.0; 4];
        for b in layout.blocks() {
            sector_norms[b.sector] = full.rows(b.offset, b.size).norm();
        }
        Ok(EigvecBundle {
            z,
            psi: psi.iter().copied().collect(),
            full: full.iter().copied().collect(),
            residual,
            eig_distance,
            sector_norms,
        })
    }

    /// Full eigenvector `(f₀, f₁, f₂, f₃)` from `ψ = (f₀, f₁, c₁, c₂)`.
    pub fn reconstruct(&self, psi: &DVector<f64>, z: f64) -> Result<DVector<f64>> {
        let prob = self.problem();
        let ev = self.chan.evaluator();
        let n = prob.npts();
        let sw = prob.grid.weight().sqrt();
        let tol = self.config().singular_tol;
        let (v2, v3, v21, v22) = (
            prob.v2.values(),
            prob.v3.values(),
            prob.v21.values(),
            prob.v22.values(),
        );
        let f1 = psi.rows(1, n);
        let c1 = psi.rows(1 + n, n);
        let c2 = psi.rows(1 + 2 * n, n);
        let mut out = DVector::zeros(self.full.dim());
        out[0] = psi[0];
        out.rows_mut(1, n).copy_from(&f1);
        let (o2, o3) = (1 + n, 1 + n + n * n);
        for p in 0..n {
            for q in 0..n {
                let d = ev.delta3_unchecked(p, q, z);
                if d.abs() < tol {
                    return Err(Error::NearSingular {
                        what: format!("Δ₃({p},{q})"),
                        z,
                        value: d.abs(),
                    });
                }
                let f2 = sw * (-v2[q] * f1[p] + v21[p] * c1[q] + v22[q] * c2[p]) / d;
                let pq = p * n + q;
                out[o2 + pq] = f2;
                for (t, &w3) in prob.w3_fiber(p, q).iter().enumerate() {
                    let gap = w3 - z;
                    if gap.abs() < tol {
                        return Err(Error::NearSingular {
                            what: format!("w3({p},{q},{t}) − z"),
                            z,
                            value: gap.abs(),
                        });
                    }
                    out[o3 + pq * n + t] = -sw * v3[t] * f2 / gap;
                }
            }
        }
        Ok(out)
    }

    /// `(c₁, c₂)` recomputed from the two-particle block of a full vector.
    pub fn recompute_c(&self, full: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.problem().npts();
        let f2 = full.rows(1 + n, n * n);
        (&self.blocks.p1 * f2, &self.blocks.p2 * f2)
    }

    /// `‖Hf − zf‖ / ‖f‖`.
    pub fn residual(&self, full: &DVector<f64>, z: f64) -> f64 {
        let r = &self.full.matrix * full - full * z;
        r.norm() / full.norm()
    }
}

fn distance_to_one(t: &DMatrix<f64>) -> f64 {
    linalg::eigenvalues(t)
        .into_iter()
        .map(|(re, im)| (1.0 - re).hypot(im))
        .fold(f64::INFINITY, f64::min)
}
