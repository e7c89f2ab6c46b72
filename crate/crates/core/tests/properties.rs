//! Invariants over random problem data.

use fockband_core::bands::BandSet;
use fockband_core::model::{FunctionSpec, FunctionSpecs, ModelProblem, TorusGrid};
use fockband_core::oracle::{assemble_full, DEFAULT_DIM_CAP};
use fockband_core::pencil::{split_blocks, RayleighValue};
use fockband_core::{DeterminantEvaluator, SpectralConfig};
use nalgebra::DVector;
use proptest::prelude::*;

fn tabulated(values: Vec<f64>) -> FunctionSpec {
    FunctionSpec::Tabulated { values }
}

/// A random problem on the six-point grid.
fn random_problem() -> impl Strategy<Value = ModelProblem> {
    let n = 6usize;
    (
        -2.0..2.0f64,
        prop::collection::vec(-1.0..1.0f64, n),
        prop::collection::vec(-1.0..1.0f64, n * n),
        prop::collection::vec(-1.0..1.0f64, n * n * n),
        prop::collection::vec(-1.0..1.0f64, 5 * n),
    )
        .prop_map(move |(w0, w1, w2, w3, v)| {
            let c = |k: usize| tabulated(v[k * n..(k + 1) * n].to_vec());
            let specs = FunctionSpecs {
                w1: tabulated(w1),
                v1: c(0),
                v2: c(1),
                v3: c(2),
                v21: c(3),
                v22: c(4),
                w2: tabulated(w2),
                w3: tabulated(w3.iter().map(|x| x + 3.0).collect()),
            };
            ModelProblem::from_specs(TorusGrid::new(1, n).unwrap(), w0, &specs).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn delta3_decreases_off_band(prob in random_problem(), p in 0usize..6, q in 0usize..6,
                                 a in 0.0..1.0f64, b in 0.0..1.0f64, below in any::<bool>()) {
        let eval = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        let band = eval.band3(p, q);
        let (lo, hi) = if below { (band.lo - 10.0, band.lo - 1e-3) } else { (band.hi + 1e-3, band.hi + 10.0) };
        let (z1, z2) = (lo + a.min(b) * (hi - lo), lo + a.max(b) * (hi - lo));
        prop_assume!(z1 < z2);
        prop_assert!(eval.delta3(p, q, z1).unwrap() > eval.delta3(p, q, z2).unwrap());
        prop_assert!(eval.delta3_slope(p, q, z1) < 0.0);
    }

    #[test]
    fn disc3_roots_are_zeros(prob in random_problem(), p in 0usize..6, q in 0usize..6) {
        let eval = DeterminantEvaluator::new(&prob, SpectralConfig::default());
        let band = eval.band3(p, q);
        for r in eval.disc3(p, q).roots() {
            prop_assert!(!band.contains(r, 0.0));
            let scale = eval.delta3_slope(p, q, r).abs();
            prop_assert!(eval.delta3_unchecked(p, q, r).abs() <= 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn pencil_invariants(prob in random_problem(), seed in any::<u64>()) {
        let split = split_blocks(&assemble_full(&prob, DEFAULT_DIM_CAP).unwrap()).unwrap();
        let alpha = split.b_c + 0.1;
        let beta = alpha + 5.0;
        let na = split.dim_a();
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let x = DVector::from_fn(na, |_, _| next()).normalize();
        // φ strictly decreasing with the stated derivative sign
        let lams: Vec<f64> = (0..=8).map(|i| alpha + (beta - alpha) * i as f64 / 8.0).collect();
        let phis: Vec<f64> = lams.iter().map(|&l| split.phi(&x, l).unwrap()).collect();
        for w in phis.windows(2) {
            prop_assert!(w[0] > w[1]);
        }
        for &l in &lams {
            prop_assert!(split.phi_slope(&x, l).unwrap() <= -1.0 + 1e-12);
        }
        // κ non-decreasing and bounded by the inertia of A
        let kappas: Vec<usize> = lams.iter().map(|&l| split.kappa_alpha(l).unwrap()).collect();
        for (w, &l) in kappas.windows(2).zip(&lams) {
            prop_assert!(w[0] <= w[1]);
            prop_assert!(w[0] <= split.count_a_below(l).unwrap());
        }
        // the extended functional is one of the three cases, consistent with φ
        let r = split.rayleigh(&x, alpha, beta).unwrap();
        match r.value {
            RayleighValue::Finite(v) => {
                prop_assert!(alpha <= v && v <= beta);
                prop_assert!(phis[0] >= 0.0 && phis[8] <= 0.0);
            }
            RayleighValue::PlusInfinity => prop_assert!(phis[8] > 0.0),
            RayleighValue::MinusInfinity => prop_assert!(phis[0] < 0.0),
        }
    }

    #[test]
    fn bandset_union_contains_parts(a in prop::collection::vec((-5.0..5.0f64, 0.0..1.0f64), 0..6),
                                    b in prop::collection::vec((-5.0..5.0f64, 0.0..1.0f64), 0..6)) {
        let mk = |v: &Vec<(f64, f64)>| {
            v.iter().fold(BandSet::empty(1e-9), |acc, &(lo, w)| acc.union(&BandSet::interval(lo, lo + w, 1e-9)))
        };
        let (sa, sb) = (mk(&a), mk(&b));
        let u = sa.union(&sb);
        prop_assert!(sa.is_subset_of(&u, 1e-9));
        prop_assert!(sb.is_subset_of(&u, 1e-9));
        for w in u.intervals().windows(2) {
            prop_assert!(w[0].hi + 1e-9 < w[1].lo);
        }
    }
}
