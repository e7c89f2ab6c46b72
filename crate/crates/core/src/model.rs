//! Problem instances: the torus grid, the rectangle quadrature rule and the
//! sampled parameter functions `w0, w1, w2, w3, v1, v2, v3, v21, v22`.
//!
//! Every function is sampled exactly once when the problem is built; the rest
//! of the crate only ever reads the sampled arrays.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported torus dimension.
pub const MAX_NU: usize = 2;

/// Uniform grid on the torus `(-π, π]^ν` with nodes `-π + 2π(k+1)/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    nu: usize,
    n: usize,
    nodes: Vec<f64>,
    weight: f64,
}

impl TorusGrid {
    pub fn new(nu: usize, n: usize) -> Result<Self> {
        if nu == 0 || nu > MAX_NU {
            return Err(Error::Grid(format!("nu must be 1 or 2, got {nu}")));
        }
        if n == 0 || n % 2 != 0 {
            return Err(Error::Grid(format!(
                "n must be a positive even integer, got {n}"
            )));
        }
        let h = 2.0 * PI / n as f64;
        let nodes = (0..n)
            .map(|k| -PI + 2.0 * PI * (k + 1) as f64 / n as f64)
            .collect();
        Ok(TorusGrid {
            nu,
            n,
            nodes,
            weight: h.powi(nu as i32),
        })
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Per-axis node coordinates, strictly increasing, last one equal to π.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weight of a single torus point, `(2π/n)^ν`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Number of points of `T^ν`, i.e. `n^ν`.
    pub fn points(&self) -> usize {
        self.n.pow(self.nu as u32)
    }

    /// Per-axis node indices of a flat point index (row-major over axes).
    pub fn axis_indices(&self, point: usize) -> Vec<usize> {
        let mut out = vec![0; self.nu];
        let mut rest = point;
        for slot in out.iter_mut().rev() {
            *slot = rest % self.n;
            rest /= self.n;
        }
        out
    }

    /// Coordinates of a flat point index.
    pub fn coords(&self, point: usize) -> Vec<f64> {
        self.axis_indices(point)
            .into_iter()
            .map(|k| self.nodes[k])
            .collect()
    }

    /// Flat index of the point whose every coordinate equals π.
    pub fn pi_point(&self) -> usize {
        (0..self.nu).fold(0, |acc, _| acc * self.n + (self.n - 1))
    }

    /// Flat index of the origin.
    pub fn zero_point(&self) -> usize {
        let half = self.n / 2 - 1;
        (0..self.nu).fold(0, |acc, _| acc * self.n + half)
    }

    /// Neighbours of a point in the product grid `(T^ν)^m` obtained by a +1
    /// step (cyclic) along each of the `m·ν` axes. `point` is a flat index
    /// into the product grid.
    pub fn forward_neighbors(&self, point: usize, m: usize) -> Vec<usize> {
        let axes = m * self.nu;
        let mut out = Vec::with_capacity(axes);
        let mut stride = 1;
        for _ in 0..axes {
            let k = (point / stride) % self.n;
            let next = if k + 1 == self.n {
                point - k * stride
            } else {
                point + stride
            };
            out.push(next);
            stride *= self.n;
        }
        out
    }
}

/// `ε(t) = ν − Σ cos tᵢ`.
pub fn dispersion(t: &[f64]) -> f64 {
    t.len() as f64 - t.iter().map(|x| x.cos()).sum::<f64>()
}

/// Rectangle rule on `T^ν`: `weight · Σ samples`.
pub fn quad_integrate(grid: &TorusGrid, samples: &[f64]) -> f64 {
    debug_assert_eq!(samples.len(), grid.points());
    grid.weight() * samples.iter().sum::<f64>()
}

/// One trigonometric series along a single axis of a single argument:
/// `Σ_k cos[k]·cos(k x) + sin[k]·sin(k x)`, with `k` counted from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    #[serde(default)]
    pub arg: usize,
    #[serde(default)]
    pub axis: usize,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

/// `coeff · ε(Σ_j combo[j] · x_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionTerm {
    pub coeff: f64,
    pub combo: Vec<i64>,
}

/// Symbolic description of a real parameter function, before sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant {
        value: f64,
    },
    Trigpoly {
        #[serde(default)]
        constant: f64,
        terms: Vec<TrigTerm>,
    },
    DispersionSum {
        #[serde(default)]
        constant: f64,
        terms: Vec<DispersionTerm>,
    },
    /// Row-major samples over the argument points, each point itself
    /// row-major over axes.
    Tabulated {
        values: Vec<f64>,
    },
}

impl FunctionSpec {
    pub fn constant(value: f64) -> Self {
        FunctionSpec::Constant { value }
    }

    /// `Σ_i ε(x_i)` over the listed argument positions of an `arity`-ary function.
    pub fn dispersion_of(arity: usize, combos: &[&[i64]]) -> Self {
        let terms = combos
            .iter()
            .map(|c| {
                debug_assert_eq!(c.len(), arity);
                DispersionTerm {
                    coeff: 1.0,
                    combo: c.to_vec(),
                }
            })
            .collect();
        FunctionSpec::DispersionSum {
            constant: 0.0,
            terms,
        }
    }

    /// Samples the function on every point of `(T^ν)^arity`.
    pub fn sample(&self, field: &str, grid: &TorusGrid, arity: usize) -> Result<GridFunction> {
        let npts = grid.points();
        let total = npts.pow(arity as u32);
        let values: Vec<f64> = match self {
            FunctionSpec::Constant { value } => vec![*value; total],
            FunctionSpec::Tabulated { values } => {
                if values.len() != total {
                    return Err(Error::parse(
                        field,
                        format!(
                            "arity mismatch: tabulated function of arity {arity} on a grid with \
                             {npts} points needs {total} values, got {}",
                            values.len()
                        ),
                    ));
                }
                values.clone()
            }
            FunctionSpec::Trigpoly { constant, terms } => {
                for (i, term) in terms.iter().enumerate() {
                    if term.arg >= arity || term.axis >= grid.nu() {
                        return Err(Error::parse(
                            format!("{field}.terms[{i}]"),
                            format!(
                                "arity mismatch: arg {} / axis {} out of range for arity {arity}, nu {}",
                                term.arg,
                                term.axis,
                                grid.nu()
                            ),
                        ));
                    }
                }
                (0..total)
                    .map(|flat| {
                        let args = split_args(grid, flat, arity);
                        let mut acc = *constant;
                        for term in terms {
                            let x = grid.nodes()[grid.axis_indices(args[term.arg])[term.axis]];
                            for (k, c) in term.cos.iter().enumerate() {
                                acc += c * (k as f64 * x).cos();
                            }
                            for (k, s) in term.sin.iter().enumerate() {
                                acc += s * (k as f64 * x).sin();
                            }
                        }
                        acc
                    })
                    .collect()
            }
            FunctionSpec::DispersionSum { constant, terms } => {
                for (i, term) in terms.iter().enumerate() {
                    if term.combo.len() != arity {
                        return Err(Error::parse(
                            format!("{field}.terms[{i}].combo"),
                            format!(
                                "arity mismatch: expected {arity} coefficients, got {}",
                                term.combo.len()
                            ),
                        ));
                    }
                }
                let nu = grid.nu();
                let mut arg = vec![0.0; nu];
                (0..total)
                    .map(|flat| {
                        let coords: Vec<Vec<f64>> = split_args(grid, flat, arity)
                            .into_iter()
                            .map(|p| grid.coords(p))
                            .collect();
                        let mut acc = *constant;
                        for term in terms {
                            for (axis, slot) in arg.iter_mut().enumerate() {
                                *slot = term
                                    .combo
                                    .iter()
                                    .zip(&coords)
                                    .map(|(&c, x)| c as f64 * x[axis])
                                    .sum();
                            }
                            acc += term.coeff * dispersion(&arg);
                        }
                        acc
                    })
                    .collect()
            }
        };
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::parse(
                field,
                format!("non-finite value at sample {pos}"),
            ));
        }
        Ok(GridFunction { arity, values })
    }
}

fn split_args(grid: &TorusGrid, flat: usize, arity: usize) -> Vec<usize> {
    let npts = grid.points();
    let mut out = vec![0; arity];
    let mut rest = flat;
    for slot in out.iter_mut().rev() {
        *slot = rest % npts;
        rest /= npts;
    }
    out
}

/// A function on `(T^ν)^arity` sampled at the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    arity: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    pub(crate) fn shift(&mut self, by: f64) {
        for v in &mut self.values {
            *v += by;
        }
    }
}

/// A fully sampled instance of the model operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelProblem {
    pub grid: TorusGrid,
    pub w0: f64,
    pub w1: GridFunction,
    pub w2: GridFunction,
    pub w3: GridFunction,
    pub v1: GridFunction,
    pub v2: GridFunction,
    pub v3: GridFunction,
    pub v21: GridFunction,
    pub v22: GridFunction,
}

impl ModelProblem {
    pub fn from_specs(grid: TorusGrid, w0: f64, specs: &FunctionSpecs) -> Result<Self> {
        if !w0.is_finite() {
            return Err(Error::parse("w0", "non-finite value"));
        }
        Ok(ModelProblem {
            w1: specs.w1.sample("functions.w1", &grid, 1)?,
            w2: specs.w2.sample("functions.w2", &grid, 2)?,
            w3: specs.w3.sample("functions.w3", &grid, 3)?,
            v1: specs.v1.sample("functions.v1", &grid, 1)?,
            v2: specs.v2.sample("functions.v2", &grid, 1)?,
            v3: specs.v3.sample("functions.v3", &grid, 1)?,
            v21: specs.v21.sample("functions.v21", &grid, 1)?,
            v22: specs.v22.sample("functions.v22", &grid, 1)?,
            grid,
            w0,
        })
    }

    /// `n^ν`.
    pub fn npts(&self) -> usize {
        self.grid.points()
    }

    #[inline]
    pub fn w2_at(&self, p: usize, q: usize) -> f64 {
        self.w2.values[p * self.npts() + q]
    }

    #[inline]
    pub fn w3_at(&self, p: usize, q: usize, t: usize) -> f64 {
        let n = self.npts();
        self.w3.values[(p * n + q) * n + t]
    }

    /// `t ↦ w3(p, q, t)`.
    #[inline]
    pub fn w3_fiber(&self, p: usize, q: usize) -> &[f64] {
        let n = self.npts();
        let start = (p * n + q) * n;
        &self.w3.values[start..start + n]
    }

    /// Square-integral `Σ weight · f²` of a one-argument function.
    pub fn l2_norm_sq(&self, f: &GridFunction) -> f64 {
        let sq: Vec<f64> = f.values.iter().map(|v| v * v).collect();
        quad_integrate(&self.grid, &sq)
    }

    /// A crude bound on the operator norm of every coupling term; all spectra
    /// of the model (and of its channels and fibers) sit inside
    /// `[min w − bound, max w + bound]`.
    pub fn coupling_bound(&self) -> f64 {
        self.l2_norm_sq(&self.v1).sqrt()
            + self.l2_norm_sq(&self.v2).sqrt()
            + self.l2_norm_sq(&self.v3).sqrt()
            + self.l2_norm_sq(&self.v21)
            + self.l2_norm_sq(&self.v22)
    }

    /// Interval guaranteed to contain the spectrum of `H` and of every
    /// operator derived from it.
    pub fn spectral_window(&self) -> (f64, f64) {
        let lo = [self.w0, self.w1.min(), self.w2.min(), self.w3.min()]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let hi = [self.w0, self.w1.max(), self.w2.max(), self.w3.max()]
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let pad = self.coupling_bound() + 1.0;
        (lo - pad, hi + pad)
    }
}

/// The nine function entries of a problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpecs {
    pub w1: FunctionSpec,
    pub v1: FunctionSpec,
    pub v2: FunctionSpec,
    pub v3: FunctionSpec,
    pub v21: FunctionSpec,
    pub v22: FunctionSpec,
    pub w2: FunctionSpec,
    pub w3: FunctionSpec,
}

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default = "default_nu")]
    pub nu: usize,
    pub n: usize,
    pub w0: f64,
    pub functions: FunctionSpecs,
}

fn default_nu() -> usize {
    1
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            Error::parse(field_hint(&msg), msg)
        })
    }

    pub fn materialize(&self) -> Result<ModelProblem> {
        let grid = TorusGrid::new(self.nu, self.n)?;
        ModelProblem::from_specs(grid, self.w0, &self.functions)
    }
}

// serde_json messages mention the offending key in backticks; surface it as
// the field name when present.
fn field_hint(msg: &str) -> String {
    msg.split('`')
        .nth(1)
        .map(str::to_owned)
        .unwrap_or_else(|| "<document>".to_owned())
}

/// Parses and samples a JSON problem document.
pub fn parse_problem(text: &str) -> Result<ModelProblem> {
    ProblemFile::from_json(text)?.materialize()
}

/// Named problem instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// All couplings vanish; `H` is diagonal.
    Decoupled,
    /// `w3 = ε(p)+ε(q+t)+ε(t)`: the band of `h3(π,π)` collapses to `{4}`.
    Remark,
    /// `w2`, `w3` symmetric in their first two arguments.
    Symmetric,
    /// Symmetric preset tuned so that `σ(C)` lies strictly below `σ_ess(A)`.
    Gap,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Decoupled,
        Preset::Remark,
        Preset::Symmetric,
        Preset::Gap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Decoupled => "decoupled",
            Preset::Remark => "remark",
            Preset::Symmetric => "symmetric",
            Preset::Gap => "gap",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::UnknownPreset(name.to_owned()))
    }

    /// `(w0, specs)` of the preset before any grid-dependent tuning.
    pub fn specs(self) -> (f64, FunctionSpecs) {
        let one = FunctionSpec::constant(1.0);
        let zero = FunctionSpec::constant(0.0);
        let eps1 = FunctionSpec::dispersion_of(1, &[&[1]]);
        let eps_pq = FunctionSpec::dispersion_of(2, &[&[1, 0], &[0, 1]]);
        let eps_pqt = FunctionSpec::dispersion_of(3, &[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]);
        match self {
            Preset::Decoupled => (
                -1.0,
                FunctionSpecs {
                    w1: eps1,
                    v1: zero.clone(),
                    v2: zero.clone(),
                    v3: zero.clone(),
                    v21: zero.clone(),
                    v22: zero,
                    w2: eps_pq,
                    w3: eps_pqt,
                },
            ),
            Preset::Remark => (
                0.0,
                FunctionSpecs {
                    w1: eps1,
                    v1: one.clone(),
                    v2: one.clone(),
                    v3: one.clone(),
                    v21: one.clone(),
                    v22: one,
                    w2: zero,
                    w3: FunctionSpec::dispersion_of(3, &[&[1, 0, 0], &[0, 1, 1], &[0, 0, 1]]),
                },
            ),
            Preset::Symmetric | Preset::Gap => (
                0.0,
                FunctionSpecs {
                    w1: eps1,
                    v1: one.clone(),
                    v2: one.clone(),
                    v3: one.clone(),
                    v21: one.clone(),
                    v22: one,
                    w2: eps_pq,
                    w3: eps_pqt,
                },
            ),
        }
    }
}

/// Builds a named preset on the given grid.
pub fn preset(name: &str, grid: &TorusGrid) -> Result<ModelProblem> {
    build_preset(Preset::from_name(name)?, grid)
}

pub fn build_preset(which: Preset, grid: &TorusGrid) -> Result<ModelProblem> {
    let (w0, specs) = which.specs();
    let base = ModelProblem::from_specs(grid.clone(), w0, &specs)?;
    match which {
        Preset::Gap => crate::pencil::tune_gap(base).map(|tuned| tuned.problem),
        _ => Ok(base),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_doc(w2: &str) -> String {
        format!(
            r#"{{"nu": 1, "n": 4, "w0": 0.5, "functions": {{
                "w1": {{"kind": "constant", "value": 1}},
                "v1": {{"kind": "constant", "value": 0}},
                "v2": {{"kind": "constant", "value": 0}},
                "v3": {{"kind": "constant", "value": 0}},
                "v21": {{"kind": "constant", "value": 0}},
                "v22": {{"kind": "constant", "value": 0}},
                "w2": {w2},
                "w3": {{"kind": "constant", "value": 1}}
            }}}}"#
        )
    }

    #[test]
    fn grid_nodes_end_at_pi() {
        for n in [2, 4, 6, 12, 64] {
            let g = TorusGrid::new(1, n).unwrap();
            assert_eq!(g.nodes().len(), n);
            assert!((g.nodes()[n - 1] - PI).abs() <= f64::EPSILON * PI);
            assert!(g.nodes().iter().all(|&x| x > -PI && x <= PI + 1e-15));
            let h = 2.0 * PI / n as f64;
            for w in g.nodes().windows(2) {
                assert!((w[1] - w[0] - h).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn grid_rejects_odd_and_large_nu() {
        assert!(TorusGrid::new(1, 7).is_err());
        assert!(TorusGrid::new(3, 4).is_err());
        assert!(TorusGrid::new(0, 4).is_err());
    }

    #[test]
    fn weights_sum_to_torus_volume() {
        for (nu, n, m) in [(1usize, 12, 1u32), (1, 12, 3), (2, 6, 2)] {
            let g = TorusGrid::new(nu, n).unwrap();
            let count = g.points().pow(m);
            let total = g.weight().powi(m as i32) * count as f64;
            let exact = (2.0 * PI).powi((nu as u32 * m) as i32);
            assert!((total - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn quadrature_constant_and_cosine() {
        let g = TorusGrid::new(1, 12).unwrap();
        let ones = vec![1.0; 12];
        assert!((quad_integrate(&g, &ones) - 2.0 * PI).abs() < 1e-13);
        let cos: Vec<f64> = g.nodes().iter().map(|t| t.cos()).collect();
        assert!(quad_integrate(&g, &cos).abs() < 1e-14);
    }

    #[test]
    fn quadrature_matches_closed_form_cosine_integral() {
        // ∫ dt / (a − cos t) = 2π / √(a² − 1)
        let g = TorusGrid::new(1, 64).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|t| 1.0 / (2.0 - t.cos())).collect();
        let exact = 2.0 * PI / 3f64.sqrt();
        assert!((quad_integrate(&g, &f) - exact).abs() < 1e-10);
    }

    #[test]
    fn quadrature_exact_on_trig_monomials() {
        let n = 16;
        let g = TorusGrid::new(1, n).unwrap();
        for k in 1..n {
            for f in [f64::cos, f64::sin] {
                let s: Vec<f64> = g.nodes().iter().map(|t| f(k as f64 * t)).collect();
                assert!(quad_integrate(&g, &s).abs() < 1e-13, "k = {k}");
            }
        }
    }

    #[test]
    fn parse_minimal_constant_document() {
        let p = parse_problem(&minimal_doc(r#"{"kind": "constant", "value": 1}"#)).unwrap();
        assert_eq!(p.npts(), 4);
        assert_eq!(p.w0, 0.5);
        assert!(p.w3.values().iter().all(|&v| v == 1.0));
        assert!(p.v21.values().iter().all(|&v| v == 0.0));
        assert_eq!(p.w3.values().len(), 64);
    }

    #[test]
    fn parse_rejects_wrong_tabulated_shape() {
        let err = parse_problem(&minimal_doc(r#"{"kind": "tabulated", "values": [1, 2, 3]}"#))
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("w2") && msg.contains("arity mismatch"), "{msg}");
    }

    #[test]
    fn parse_accepts_correct_tabulated_shape() {
        let vals: Vec<String> = (0..16).map(|i| i.to_string()).collect();
        let doc = minimal_doc(&format!(
            r#"{{"kind": "tabulated", "values": [{}]}}"#,
            vals.join(",")
        ));
        let p = parse_problem(&doc).unwrap();
        assert_eq!(p.w2_at(1, 2), 6.0);
    }

    #[test]
    fn parse_rejects_unknown_keys() {
        let doc = minimal_doc(r#"{"kind": "constant", "value": 1, "extra": 2}"#);
        assert!(parse_problem(&doc).is_err());
        let doc = minimal_doc(r#"{"kind": "constant", "value": 1}"#).replacen('{', r#"{"bogus": 1,"#, 1);
        let err = parse_problem(&doc).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn parse_rejects_bad_dispersion_arity() {
        let doc = minimal_doc(r#"{"kind": "dispersion-sum", "terms": [{"coeff": 1, "combo": [1]}]}"#);
        let err = parse_problem(&doc).unwrap_err();
        assert!(err.to_string().contains("arity mismatch"), "{err}");
    }

    #[test]
    fn dispersion_sum_remark_form_is_four_at_pi_pi() {
        let doc = r#"{"nu": 1, "n": 8, "w0": 0, "functions": {
            "w1": {"kind": "constant", "value": 0},
            "v1": {"kind": "constant", "value": 0},
            "v2": {"kind": "constant", "value": 0},
            "v3": {"kind": "constant", "value": 0},
            "v21": {"kind": "constant", "value": 0},
            "v22": {"kind": "constant", "value": 0},
            "w2": {"kind": "constant", "value": 0},
            "w3": {"kind": "dispersion-sum", "terms": [
                {"coeff": 1, "combo": [1, 0, 0]},
                {"coeff": 1, "combo": [0, 1, 1]},
                {"coeff": 1, "combo": [0, 0, 1]}]}
        }}"#;
        let p = parse_problem(doc).unwrap();
        let pi = p.grid.pi_point();
        for t in 0..8 {
            assert!((p.w3_at(pi, pi, t) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trigpoly_samples() {
        let g = TorusGrid::new(1, 8).unwrap();
        let spec = FunctionSpec::Trigpoly {
            constant: 0.5,
            terms: vec![TrigTerm {
                arg: 1,
                axis: 0,
                cos: vec![0.0, 2.0],
                sin: vec![0.0, 0.0, 1.0],
            }],
        };
        let f = spec.sample("w2", &g, 2).unwrap();
        let x = g.nodes()[3];
        let expect = 0.5 + 2.0 * x.cos() + (2.0 * x).sin();
        assert!((f.values()[5 * 8 + 3] - expect).abs() < 1e-15);
    }

    #[test]
    fn presets_have_expected_structure() {
        let g = TorusGrid::new(1, 8).unwrap();
        let remark = preset("remark", &g).unwrap();
        let pi = g.pi_point();
        for t in 0..8 {
            assert!((remark.w3_at(pi, pi, t) - 4.0).abs() < 1e-12);
        }
        let dec = preset("decoupled", &g).unwrap();
        for f in [&dec.v1, &dec.v2, &dec.v3, &dec.v21, &dec.v22] {
            assert!(f.values().iter().all(|&v| v == 0.0));
        }
        let sym = preset("symmetric", &g).unwrap();
        for p in 0..8 {
            for q in 0..8 {
                assert_eq!(sym.w2_at(p, q), sym.w2_at(q, p));
                for t in 0..8 {
                    assert_eq!(sym.w3_at(p, q, t), sym.w3_at(q, p, t));
                }
            }
        }
        assert!(matches!(preset("nope", &g), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn presets_are_deterministic() {
        let g = TorusGrid::new(1, 6).unwrap();
        for name in ["decoupled", "remark", "symmetric"] {
            assert_eq!(preset(name, &g).unwrap(), preset(name, &g).unwrap());
        }
    }

    #[test]
    fn forward_neighbors_wrap() {
        let g = TorusGrid::new(1, 4).unwrap();
        assert_eq!(g.forward_neighbors(3, 1), vec![0]);
        // (p, q) = (1, 3) -> flat 1*4+3 = 7; +1 on q wraps to (1,0) = 4, +1 on p gives (2,3) = 11
        assert_eq!(g.forward_neighbors(7, 2), vec![4, 11]);
        let g2 = TorusGrid::new(2, 4).unwrap();
        assert_eq!(g2.pi_point(), 15);
        assert_eq!(g2.coords(g2.zero_point()), vec![0.0, 0.0]);
    }
}
