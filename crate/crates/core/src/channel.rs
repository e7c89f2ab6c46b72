//! Fiber bands, discrete fiber eigenvalues, branch sets and channel spectra.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::bands::{close_sampled_roots, BandSet, Interval};
use crate::config::SpectralConfig;
use crate::determinant::{DeterminantEvaluator, Disc3};
use crate::model::ModelProblem;
use crate::roots::{bisect, sign_changes};

/// Roots of Δ₁(p; ·) and Δ₂(p; ·) off the fiber essential spectrum.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Disc12 {
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
}

/// The four branches of the essential spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchDecomposition {
    pub four: BandSet,
    pub three: BandSet,
    pub two1: BandSet,
    pub two2: BandSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EssentialSpectrum {
    pub set: BandSet,
    pub branches: BranchDecomposition,
}

/// Which channel operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    H1,
    H2,
    H3,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::H1, Channel::H2, Channel::H3];

    pub fn from_index(i: usize) -> Option<Channel> {
        match i {
            1 => Some(Channel::H1),
            2 => Some(Channel::H2),
            3 => Some(Channel::H3),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Channel::H1 => 1,
            Channel::H2 => 2,
            Channel::H3 => 3,
        }
    }
}

/// Channel-level spectral analysis of one problem. Results are computed on
/// first request and cached.
pub struct ChannelAnalysis<'a> {
    eval: DeterminantEvaluator<'a>,
    disc12: OnceLock<Vec<Disc12>>,
    branches: OnceLock<BranchDecomposition>,
}

impl<'a> ChannelAnalysis<'a> {
    pub fn new(problem: &'a ModelProblem, config: SpectralConfig) -> Self {
        ChannelAnalysis {
            eval: DeterminantEvaluator::new(problem, config),
            disc12: OnceLock::new(),
            branches: OnceLock::new(),
        }
    }

    pub fn evaluator(&self) -> &DeterminantEvaluator<'a> {
        &self.eval
    }

    pub fn problem(&self) -> &'a ModelProblem {
        self.eval.problem()
    }

    fn config(&self) -> &SpectralConfig {
        self.eval.config()
    }

    pub fn band3(&self, p: usize, q: usize) -> Interval {
        self.eval.band3(p, q)
    }

    pub fn disc3(&self, p: usize, q: usize) -> Disc3 {
        self.eval.fiber_row(p).disc3[q]
    }

    pub fn ess_fiber12(&self, p: usize) -> &BandSet {
        self.eval.ess_fiber12(p)
    }

    /// Open gaps of `σ_ess(h₁(p))` inside the spectral window, pulled in by
    /// the band guard on finite ends.
    fn fiber_gaps(&self, p: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = self.problem().spectral_window();
        let guard = self.config().band_guard;
        let pad = |x: f64| guard * x.abs().max(1.0);
        self.ess_fiber12(p)
            .complement_within(lo, hi)
            .into_iter()
            .map(|g| (g.lo + pad(g.lo), g.hi - pad(g.hi)))
            .filter(|(a, b)| a < b)
            .collect()
    }

    /// Roots of Δ₁ (monotone bisection) and Δ₂ (scan plus bisection) in every
    /// gap of the fiber essential spectrum.
    pub fn compute_disc12(&self, p: usize) -> Disc12 {
        let tol = self.config().root_tol;
        let scan = self.config().delta2_scan;
        let mut out = Disc12::default();
        for (a, b) in self.fiber_gaps(p) {
            let d1 = |z: f64| self.eval.delta1_unchecked(p, z);
            // Δ₁ decreases on the whole gap
            let (fa, fb) = (d1(a), d1(b));
            if fa == 0.0 {
                out.delta1.push(a);
            } else if fb == 0.0 {
                out.delta1.push(b);
            } else if fa > 0.0 && fb < 0.0 {
                out.delta1.push(bisect(d1, a, b, tol));
            }

            let d2 = |z: f64| self.eval.delta2_unchecked(p, z);
            for (x0, x1) in sign_changes(d2, a, b, scan) {
                out.delta2
                    .push(if x0 == x1 { x0 } else { bisect(d2, x0, x1, tol) });
            }
        }
        out.delta2.dedup();
        out
    }

    /// Cached `disc12` for every grid point.
    pub fn disc12_all(&self) -> &[Disc12] {
        self.disc12.get_or_init(|| {
            self.eval.precompute();
            (0..self.problem().npts())
                .into_par_iter()
                .map(|p| self.compute_disc12(p))
                .collect()
        })
    }

    pub fn disc12(&self, p: usize) -> &Disc12 {
        &self.disc12_all()[p]
    }

    pub fn branches(&self) -> &BranchDecomposition {
        self.branches.get_or_init(|| self.build_branches())
    }

    fn build_branches(&self) -> BranchDecomposition {
        let prob = self.problem();
        let grid = &prob.grid;
        let npts = prob.npts();
        let tol = self.config().merge_tol;
        let closure = self.config().closure;
        self.eval.precompute();

        let four = BandSet::interval(prob.w3.min(), prob.w3.max(), tol);

        let pairs = npts * npts;
        let disc3 = |k: usize| self.eval.fiber_row(k / npts).disc3[k % npts];
        let below: Vec<Vec<f64>> = (0..pairs).map(|k| disc3(k).below.into_iter().collect()).collect();
        let above: Vec<Vec<f64>> = (0..pairs).map(|k| disc3(k).above.into_iter().collect()).collect();
        let link2 = |roots: &[Vec<f64>]| {
            close_sampled_roots(roots, |k| grid.forward_neighbors(k, 2), closure, tol)
        };
        let three = link2(&below).union(&link2(&above));

        let d12 = self.disc12_all();
        let link1 = |roots: Vec<Vec<f64>>| {
            close_sampled_roots(&roots, |p| grid.forward_neighbors(p, 1), closure, tol)
        };
        let two1 = link1(d12.iter().map(|d| d.delta1.clone()).collect());
        let two2 = link1(d12.iter().map(|d| d.delta2.clone()).collect());

        BranchDecomposition {
            four,
            three,
            two1,
            two2,
        }
    }

    /// `σ(H₁) = σ_two(H₁) ∪ σ_three ∪ σ_four`, and analogously for `H₂`, `H₃`.
    pub fn channel_spectrum(&self, which: Channel) -> BandSet {
        let b = self.branches();
        let tol = self.config().merge_tol;
        let mut parts = vec![&b.three, &b.four];
        match which {
            Channel::H1 => parts.push(&b.two1),
            Channel::H2 => parts.push(&b.two2),
            Channel::H3 => {}
        }
        BandSet::union_all(parts, tol)
    }

    /// `σ_ess(H) = σ(H₁) ∪ σ(H₂) ∪ σ(H₃)` with its branches.
    pub fn essential_spectrum(&self) -> EssentialSpectrum {
        let tol = self.config().merge_tol;
        let spectra: Vec<BandSet> = Channel::ALL
            .iter()
            .map(|&c| self.channel_spectrum(c))
            .collect();
        EssentialSpectrum {
            set: BandSet::union_all(&spectra, tol),
            branches: self.branches().clone(),
        }
    }

    /// `min{min σ(H₁), min σ(H₂)}`.
    pub fn hwz_min(&self) -> f64 {
        let m1 = self.channel_spectrum(Channel::H1).min();
        let m2 = self.channel_spectrum(Channel::H2).min();
        m1.into_iter().chain(m2).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Closure;
    use crate::model::{build_preset, FunctionSpec, Preset, TorusGrid};

    fn preset(which: Preset, n: usize) -> ModelProblem {
        build_preset(which, &TorusGrid::new(1, n).unwrap()).unwrap()
    }

    fn with_specs(n: usize, edit: impl FnOnce(&mut crate::model::FunctionSpecs)) -> ModelProblem {
        let (w0, mut specs) = Preset::Symmetric.specs();
        edit(&mut specs);
        ModelProblem::from_specs(TorusGrid::new(1, n).unwrap(), w0, &specs).unwrap()
    }

    #[test]
    fn band3_examples() {
        for n in [8, 12, 64] {
            let prob = preset(Preset::Remark, n);
            let ch = ChannelAnalysis::new(&prob, SpectralConfig::default());
            let pi = prob.grid.pi_point();
            let b = ch.band3(pi, pi);
            assert!(b.width() <= 1e-12 && (b.lo - 4.0).abs() <= 1e-12);
            let zero = prob.grid.zero_point();
            let b = ch.band3(zero, zero);
            assert!(b.lo.abs() < 1e-14 && (b.hi - 4.0).abs() < 1e-14);
        }
        let prob = with_specs(6, |s| s.w3 = FunctionSpec::constant(2.5));
        let ch = ChannelAnalysis::new(&prob, SpectralConfig::default());
        assert_eq!(ch.band3(1, 4), Interval { lo: 2.5, hi: 2.5 });
    }

    #[test]
    fn disc3_never_inside_band() {
        for which in [Preset::Remark, Preset::Symmetric] {
            let prob = preset(which, 12);
            let ch = ChannelAnalysis::new(&prob, SpectralConfig::default());
            for p in 0..12 {
                for q in 0..12 {
                    let band = ch.band3(p, q);
                    let d = ch.disc3(p, q);
                    assert!(d.below.is_none_or(|z| z < band.lo));
                    assert!(d.above.is_none_or(|z| z > band.hi));
                }
            }
        }
    }

    #[test]
    fn ess_fiber12_without_coupling() {
        let prob = with_specs(8, |s| {
            s.v3 = FunctionSpec::constant(0.0);
            s.w2 = FunctionSpec::DispersionSum {
                constant: -1.0,
                terms: vec![crate::model::DispersionTerm { coeff: 1.0, combo: vec![1, 0] }],
            };
        });
        let config = SpectralConfig {
            closure: Closure::Points,
            ..SpectralConfig::default()
        };
        let ch = ChannelAnalysis::new(&prob, config);
        for p in 0..8 {
            let ess = ch.ess_fiber12(p);
            let expect = BandSet::from_parts(
                (0..8).map(|q| ch.band3(p, q)),
                (0..8).map(|q| prob.w2_at(p, q)),
                config.merge_tol,
            );
            assert_eq!(ess.intervals(), expect.intervals());
            assert_eq!(ess.points(), expect.points());
        }
    }

    #[test]
    fn remark_fiber_contains_four() {
        let prob = preset(Preset::Remark, 12);
        let ch = ChannelAnalysis::new(&prob, SpectralConfig::default());
        assert!(ch.ess_fiber12(prob.grid.pi_point()).contains(4.0, 1e-12));
    }

    #[test]
    fn disc12_trivial_cases() {
        let prob = with_specs(8, |s| s.v21 = FunctionSpec::constant(0.0));
        let ch = ChannelAnalysis::new(&prob, SpectralConfig::default());
        assert!(ch.disc12_all().iter().all(|d| d.delta1.is_empty()));

        // w1 pushed below every fiber band so each Δ₂ root is admissible
        let prob = with_specs(8, |s| {
            s.v2 = FunctionSpec::constant(0.0);
            s.v22 = FunctionSpec::constant(0.0);
            s.w1 = FunctionSpec::DispersionSum {
                constant: -20.0,
                terms: vec![crate::model::DispersionTerm { coeff: 1.0, combo: vec![1] }],
            };
        });
        let ch = ChannelAnalysis::new(&prob, SpectralConfig::default());
        for p in 0..8 {
            let d = ch.disc12(p);
            assert_eq!(d.delta2.len(), 1);
            assert!((d.delta2[0] - prob.w1.values()[p]).abs() < 1e-10);
        }
    }

    #[test]
    fn decoupled_channels_are_ranges() {
        let prob = preset(Preset::Decoupled, 8);
        let ch = ChannelAnalysis::new(&prob, SpectralConfig::default());
        let tol = SpectralConfig::default().merge_tol;
        let ranges = BandSet::from_parts(
            [
                Interval::new(prob.w2.min(), prob.w2.max()),
                Interval::new(prob.w3.min(), prob.w3.max()),
            ],
            [],
            tol,
        );
        assert_eq!(ch.channel_spectrum(Channel::H3), ranges);
        let with_w1 = ranges.union(&BandSet::interval(prob.w1.min(), prob.w1.max(), tol));
        assert_eq!(ch.essential_spectrum().set, with_w1);
        let expect = prob.w1.min().min(prob.w2.min()).min(prob.w3.min());
        assert_eq!(ch.hwz_min(), expect);
    }

    #[test]
    fn h3_inside_h1_h2_and_hwz_identity() {
        for which in [Preset::Decoupled, Preset::Remark, Preset::Symmetric] {
            let prob = preset(which, 8);
            let ch = ChannelAnalysis::new(&prob, SpectralConfig::default());
            let s12 = ch.channel_spectrum(Channel::H1).union(&ch.channel_spectrum(Channel::H2));
            assert!(ch.channel_spectrum(Channel::H3).is_subset_of(&s12, 1e-9));
            let ess = ch.essential_spectrum().set;
            assert_eq!(ess, s12);
            assert_eq!(ch.hwz_min(), ess.min().unwrap());
        }
    }
}
