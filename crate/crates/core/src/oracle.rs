//! Dense symmetric discretizations of `H`, of the channel operators and of the
//! fiber operators, plus the reference eigensolver.
//!
//! A basis function of sector `k` carries the factor `weight^(k/2)`, so every
//! integral coupling turns into a symmetric matrix entry. All off-diagonal
//! entries are written in pairs from a single computed value.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bands::BandSet;
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::model::ModelProblem;

pub const DEFAULT_DIM_CAP: usize = 20_000;

/// Index range of one Fock sector inside an assembled operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SectorBlock {
    /// Number of grid arguments of the sector (0 to 3).
    pub sector: usize,
    pub offset: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SectorLayout {
    npts: usize,
    blocks: Vec<SectorBlock>,
}

impl SectorLayout {
    /// Consecutive sectors with sizes `npts^k`.
    pub fn new(sectors: &[usize], npts: usize) -> Self {
        let mut offset = 0;
        let blocks = sectors
            .iter()
            .map(|&sector| {
                let size = npts.pow(sector as u32);
                let b = SectorBlock {
                    sector,
                    offset,
                    size,
                };
                offset += size;
                b
            })
            .collect();
        SectorLayout { npts, blocks }
    }

    pub fn full(npts: usize) -> Self {
        SectorLayout::new(&[0, 1, 2, 3], npts)
    }

    pub fn dim(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.size)
    }

    pub fn blocks(&self) -> &[SectorBlock] {
        &self.blocks
    }

    pub fn block(&self, sector: usize) -> Option<SectorBlock> {
        self.blocks.iter().copied().find(|b| b.sector == sector)
    }

    fn offset(&self, sector: usize) -> usize {
        self.block(sector).expect("sector present in layout").offset
    }

    /// Sector and grid-point indices of a flat index.
    pub fn multi_index(&self, index: usize) -> Option<(usize, Vec<usize>)> {
        let b = self
            .blocks
            .iter()
            .find(|b| index >= b.offset && index < b.offset + b.size)?;
        let mut rest = index - b.offset;
        let mut out = vec![0; b.sector];
        for slot in out.iter_mut().rev() {
            *slot = rest % self.npts;
            rest /= self.npts;
        }
        Some((b.sector, out))
    }
}

/// Dense real symmetric matrix with its sector layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymOperator {
    pub layout: SectorLayout,
    pub matrix: DMatrix<f64>,
}

impl DenseSymOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let m = &self.matrix;
        let n = m.nrows();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..j {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst
    }

    /// Copy of the block between two sectors.
    pub fn sector_block(&self, row: usize, col: usize) -> Option<DMatrix<f64>> {
        let (r, c) = (self.layout.block(row)?, self.layout.block(col)?);
        Some(
            self.matrix
                .view((r.offset, c.offset), (r.size, c.size))
                .into_owned(),
        )
    }

    /// Union of the Gershgorin intervals.
    pub fn gershgorin(&self) -> (f64, f64) {
        let m = &self.matrix;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m.nrows() {
            let r: f64 = m.row(i).iter().map(|x| x.abs()).sum::<f64>() - m[(i, i)].abs();
            lo = lo.min(m[(i, i)] - r);
            hi = hi.max(m[(i, i)] + r);
        }
        (lo, hi)
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }
}

struct Builder {
    layout: SectorLayout,
    m: DMatrix<f64>,
}

impl Builder {
    fn new(layout: SectorLayout, cap: usize) -> Result<Self> {
        let dim = layout.dim();
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        Ok(Builder {
            m: DMatrix::zeros(dim, dim),
            layout,
        })
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[(i, j)] = v;
        self.m[(j, i)] = v;
    }

    fn finish(self) -> DenseSymOperator {
        DenseSymOperator {
            layout: self.layout,
            matrix: self.m,
        }
    }
}

/// Which rank-one families to subtract in the two-particle block.
#[derive(Clone, Copy)]
struct TwoBody {
    v21: bool,
    v22: bool,
}

fn fill_sector0(b: &mut Builder, prob: &ModelProblem) {
    let o0 = b.layout.offset(0);
    b.set(o0, o0, prob.w0);
}

fn fill_sector1(b: &mut Builder, prob: &ModelProblem) {
    let o1 = b.layout.offset(1);
    for (p, &w1) in prob.w1.values().iter().enumerate() {
        b.set(o1 + p, o1 + p, w1);
    }
}

fn fill_01(b: &mut Builder, prob: &ModelProblem) {
    let (o0, o1) = (b.layout.offset(0), b.layout.offset(1));
    let sw = prob.grid.weight().sqrt();
    for (j, &v1) in prob.v1.values().iter().enumerate() {
        b.set(o0, o1 + j, sw * v1);
    }
}

fn fill_12(b: &mut Builder, prob: &ModelProblem) {
    let (o1, o2) = (b.layout.offset(1), b.layout.offset(2));
    let n = prob.npts();
    let sw = prob.grid.weight().sqrt();
    let v2 = prob.v2.values();
    for p in 0..n {
        for s in 0..n {
            b.set(o1 + p, o2 + p * n + s, sw * v2[s]);
        }
    }
}

fn fill_sector2(b: &mut Builder, prob: &ModelProblem, two: TwoBody) {
    let o2 = b.layout.offset(2);
    let n = prob.npts();
    let w = prob.grid.weight();
    let v21 = prob.v21.values();
    let v22 = prob.v22.values();
    for p in 0..n {
        for q in 0..n {
            let i = p * n + q;
            let mut d = prob.w2_at(p, q);
            if two.v21 {
                d -= w * v21[p] * v21[p];
            }
            if two.v22 {
                d -= w * v22[q] * v22[q];
            }
            b.set(o2 + i, o2 + i, d);
            // same q, p' > p
            if two.v21 {
                for pp in p + 1..n {
                    b.set(o2 + i, o2 + pp * n + q, -w * v21[p] * v21[pp]);
                }
            }
            // same p, q' > q
            if two.v22 {
                for qq in q + 1..n {
                    b.set(o2 + i, o2 + p * n + qq, -w * v22[q] * v22[qq]);
                }
            }
        }
    }
}

fn fill_23_33(b: &mut Builder, prob: &ModelProblem) {
    let (o2, o3) = (b.layout.offset(2), b.layout.offset(3));
    let n = prob.npts();
    let sw = prob.grid.weight().sqrt();
    let v3 = prob.v3.values();
    for pq in 0..n * n {
        for t in 0..n {
            let k = pq * n + t;
            b.set(o2 + pq, o3 + k, sw * v3[t]);
            b.set(o3 + k, o3 + k, prob.w3.values()[k]);
        }
    }
}

/// Dense discretization of the full operator `H`.
pub fn assemble_full(prob: &ModelProblem, cap: usize) -> Result<DenseSymOperator> {
    let mut b = Builder::new(SectorLayout::full(prob.npts()), cap)?;
    fill_sector0(&mut b, prob);
    fill_01(&mut b, prob);
    fill_sector1(&mut b, prob);
    fill_12(&mut b, prob);
    fill_sector2(&mut b, prob, TwoBody { v21: true, v22: true });
    fill_23_33(&mut b, prob);
    Ok(b.finish())
}

/// Dense discretization of a channel operator.
pub fn assemble_channel(which: Channel, prob: &ModelProblem, cap: usize) -> Result<DenseSymOperator> {
    let n = prob.npts();
    let (sectors, two): (&[usize], _) = match which {
        Channel::H1 => (&[2, 3], TwoBody { v21: true, v22: false }),
        Channel::H2 => (&[1, 2, 3], TwoBody { v21: false, v22: true }),
        Channel::H3 => (&[2, 3], TwoBody { v21: false, v22: false }),
    };
    let mut b = Builder::new(SectorLayout::new(sectors, n), cap)?;
    if which == Channel::H2 {
        fill_sector1(&mut b, prob);
        fill_12(&mut b, prob);
    }
    fill_sector2(&mut b, prob, two);
    fill_23_33(&mut b, prob);
    Ok(b.finish())
}

/// Fiber operator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fiber {
    /// `h₃(p, q)` on `C ⊕ L₂`.
    H3 { p: usize, q: usize },
    /// `h₁(p)` on `L₂ ⊕ L₂²`.
    H1 { p: usize },
    /// `h₂(p)` on `C ⊕ L₂ ⊕ L₂²`.
    H2 { p: usize },
}

/// Dense discretization of a fiber operator.
pub fn assemble_fiber(kind: Fiber, prob: &ModelProblem, cap: usize) -> Result<DenseSymOperator> {
    let n = prob.npts();
    let w = prob.grid.weight();
    let sw = w.sqrt();
    let v3 = prob.v3.values();
    match kind {
        Fiber::H3 { p, q } => {
            let mut b = Builder::new(SectorLayout::new(&[0, 1], n), cap)?;
            b.set(0, 0, prob.w2_at(p, q));
            for (t, &w3) in prob.w3_fiber(p, q).iter().enumerate() {
                b.set(0, 1 + t, sw * v3[t]);
                b.set(1 + t, 1 + t, w3);
            }
            Ok(b.finish())
        }
        Fiber::H1 { p } => {
            let mut b = Builder::new(SectorLayout::new(&[1, 2], n), cap)?;
            let v21 = prob.v21.values();
            for q in 0..n {
                b.set(q, q, prob.w2_at(p, q) - w * v21[q] * v21[q]);
                for s in q + 1..n {
                    b.set(q, s, -w * v21[q] * v21[s]);
                }
            }
            fill_fiber_three(&mut b, prob, p, n);
            Ok(b.finish())
        }
        Fiber::H2 { p } => {
            let mut b = Builder::new(SectorLayout::new(&[0, 1, 2], n), cap)?;
            let v2 = prob.v2.values();
            let v22 = prob.v22.values();
            b.set(0, 0, prob.w1.values()[p]);
            for q in 0..n {
                b.set(0, 1 + q, sw * v2[q]);
                b.set(1 + q, 1 + q, prob.w2_at(p, q) - w * v22[q] * v22[q]);
                for s in q + 1..n {
                    b.set(1 + q, 1 + s, -w * v22[q] * v22[s]);
                }
            }
            fill_fiber_three(&mut b, prob, p, 1 + n);
            Ok(b.finish())
        }
    }
}

// two-particle block of a fiber starting at `o`, coupled to the three-particle
// block that follows it
fn fill_fiber_three(b: &mut Builder, prob: &ModelProblem, p: usize, o3: usize) {
    let n = prob.npts();
    let o2 = o3 - n;
    let sw = prob.grid.weight().sqrt();
    let v3 = prob.v3.values();
    for q in 0..n {
        for (t, &w3) in prob.w3_fiber(p, q).iter().enumerate() {
            let k = o3 + q * n + t;
            b.set(o2 + q, k, sw * v3[t]);
            b.set(k, k, w3);
        }
    }
}

/// Ascending eigenvalues, optionally with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Option<DMatrix<f64>>,
}

pub fn eig_sym(op: &DenseSymOperator, want_vectors: bool) -> Result<EigenDecomposition> {
    eig_sym_matrix(&op.matrix, want_vectors)
}

pub fn eig_sym_matrix(m: &DMatrix<f64>, want_vectors: bool) -> Result<EigenDecomposition> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    let (values, vectors) = crate::linalg::sym_eigen(m, want_vectors);
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("eigensolver returned non-finite values".into()));
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Split of a finite spectrum into the part near a predicted essential set
/// and the rest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub isolated: Vec<f64>,
    pub clustered: Vec<f64>,
    /// Distance to the predicted set below which an eigenvalue is clustered.
    pub tol: f64,
    /// Hausdorff distance between the clustered eigenvalues and the prediction.
    pub hausdorff: f64,
}

/// Labels each eigenvalue clustered (within `tol` of `predicted`) or
/// isolated, with `tol = max(2·width(predicted)/count, 1e-6)`; `count`
/// defaults to the number of eigenvalues.
pub fn classify_spectrum(eigs: &[f64], predicted: &BandSet, count: Option<usize>) -> Classification {
    let count = count.unwrap_or(eigs.len()).max(1);
    let tol = (2.0 * predicted.total_width() / count as f64).max(1e-6);
    let (clustered, isolated): (Vec<f64>, Vec<f64>) =
        eigs.iter().partition(|&&x| predicted.distance(x) <= tol);
    let hausdorff = predicted.hausdorff(&clustered);
    Classification {
        isolated,
        clustered,
        tol,
        hausdorff,
    }
}
