use crate::bands::DEFAULT_MERGE_TOL;
use crate::roots::ROOT_TOL;

/// How a root set sampled on the grid is turned into a closed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Closure {
    /// Keep the sampled roots as points; only pieces closer than the merge
    /// tolerance are fused.
    Points,
    /// Join the roots found at grid-adjacent nodes into intervals, i.e. take
    /// the range of the piecewise-linear interpolant of each root branch.
    #[default]
    Linked,
}

/// Tolerances and knobs shared by the determinant, channel and FY modules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    pub merge_tol: f64,
    pub closure: Closure,
    /// Distance from a band inside which a spectral parameter is rejected.
    pub band_guard: f64,
    /// Threshold below which a determinant counts as singular.
    pub singular_tol: f64,
    pub root_tol: f64,
    /// Sign-change scan density for Δ₂ per complement component.
    pub delta2_scan: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            merge_tol: DEFAULT_MERGE_TOL,
            closure: Closure::Linked,
            band_guard: 1e-12,
            singular_tol: 1e-12,
            root_tol: ROOT_TOL,
            delta2_scan: 400,
        }
    }
}
