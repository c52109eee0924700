//! Rank-constrained violation search.
//!
//! The minimization target is `q_form` restricted to matrices of the shape
//! `C = sum_i |v_i><w_i|` with at most `rank` terms.  The factor vectors are
//! the optimization variables; the matrix is renormalized to unit
//! Hilbert-Schmidt norm between iterations so the gamma-homogeneous objective
//! cannot be driven to zero by shrinking `C`.  Minimization is projected
//! gradient descent with Armijo backtracking and seeded random restarts.
//!
//! On top of the minimizer sit `alpha_opt_estimate`, which bisects for the
//! largest `a` such that neither `q_v(-a, .)` nor `q_v(+a, .)` admits a
//! violation at the given rank, and `sweep_grid`, which tabulates those
//! estimates over a `(p, gamma)` grid and renders them as CSV.
//!
//! All randomness flows through explicit seeds: restart `i` of a run seeded
//! with `s` uses `derive_seed(s, i)`, so identical inputs give identical
//! reports regardless of thread scheduling.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{argument, Error, Result};
use crate::forms::{q_form, FormSpec};
use crate::spectral::{norm_from_singular_values, singular_values, RANK_TOL_BASE};
use crate::tensorspace::{
    embed_with_identity, partial_trace, ComplexVector, MultipartiteMatrix, SubsystemSubset,
};

/// Default number of random restarts for a search run.
pub const DEFAULT_RESTARTS: usize = 32;

/// Default iteration cap per restart.
pub const DEFAULT_MAX_ITERS: usize = 200;

/// A form value below this threshold counts as a violation; values in
/// `[VIOLATION_THRESHOLD, 0)` are treated as numerical noise around zero.
pub const VIOLATION_THRESHOLD: f64 = -1e-9;

// Once a restart gets this far below zero the violation is unambiguous and
// the restart stops early.  Only used on bisection probes, where existence
// of a violation is the whole question.
const EARLY_STOP: f64 = -1e-5;

const ARMIJO_C1: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;

/// Scalar field the factor vectors are drawn from and optimized over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Real,
    Complex,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Real => write!(f, "real"),
            Field::Complex => write!(f, "complex"),
        }
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Field::Real),
            "complex" => Ok(Field::Complex),
            other => Err(argument(format!(
                "unknown field '{other}' (expected 'real' or 'complex')"
            ))),
        }
    }
}

/// Random matrix ensembles used for sampling test matrices and search seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Independent Gaussian entries (complex entries have independent
    /// real and imaginary parts scaled so the entry variance is 1).
    Ginibre,
    /// Hermitian part `(G + G*)/2` of a Ginibre sample; the rank argument is
    /// ignored.
    Hermitian,
    /// `B B*` with `B` a `D x r` Ginibre block, so positive semidefinite of
    /// rank `r`.
    Psd,
    /// Sum of `r` independent Gaussian outer products `|g_i><h_i|`.
    RankR,
    /// A `Psd` sample normalized to unit trace.
    Density,
    /// `|v_1><w_1| + sum_{i>=2} eps_i |u_i><u_i|` with unimodular `eps_i`,
    /// orthonormal `u_i`, and `v_1, w_1` orthogonal to every `u_i`.
    StructuredRank1PlusNormal,
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EnsembleKind::Ginibre => "ginibre",
            EnsembleKind::Hermitian => "hermitian",
            EnsembleKind::Psd => "psd",
            EnsembleKind::RankR => "rank_r",
            EnsembleKind::Density => "density",
            EnsembleKind::StructuredRank1PlusNormal => "structured_rank1_plus_normal",
        };
        write!(f, "{name}")
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ginibre" => Ok(EnsembleKind::Ginibre),
            "hermitian" => Ok(EnsembleKind::Hermitian),
            "psd" => Ok(EnsembleKind::Psd),
            "rank_r" => Ok(EnsembleKind::RankR),
            "density" => Ok(EnsembleKind::Density),
            "structured_rank1_plus_normal" => Ok(EnsembleKind::StructuredRank1PlusNormal),
            other => Err(argument(format!("unknown ensemble kind '{other}'"))),
        }
    }
}

/// Derives the seed for sub-task `index` of a run seeded with `master`.
///
/// This is the splitmix64 output function applied to
/// `master + index * 2^64/phi`; distinct indices give well-separated streams
/// even for small or equal master seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_scalar(field: Field, rng: &mut ChaCha8Rng) -> Complex64 {
    match field {
        Field::Real => Complex64::new(rng.sample(StandardNormal), 0.0),
        Field::Complex => {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        }
    }
}

/// Samples a vector with independent standard Gaussian entries over `field`.
pub fn random_vector(d: usize, field: Field, rng: &mut ChaCha8Rng) -> ComplexVector {
    ComplexVector::from_fn(d, |_, _| sample_scalar(field, rng))
}

/// Samples `random_vector` normalized to unit length.
pub fn random_unit_vector(d: usize, field: Field, rng: &mut ChaCha8Rng) -> ComplexVector {
    loop {
        let v = random_vector(d, field, rng);
        let norm = v.norm();
        if norm > 1e-6 {
            return v / Complex64::new(norm, 0.0);
        }
    }
}

fn outer(v: &ComplexVector, w: &ComplexVector) -> nalgebra::DMatrix<Complex64> {
    v * w.adjoint()
}

// Gram-Schmidt step: remove the components of `v` along each (unit) basis
// vector.  Returns None when the remainder is numerically zero.
fn orthogonalize(v: &ComplexVector, basis: &[ComplexVector]) -> Option<ComplexVector> {
    let mut out = v.clone();
    for b in basis {
        let overlap = b.dotc(&out);
        out -= b * overlap;
    }
    if out.norm() < 1e-8 {
        None
    } else {
        Some(out)
    }
}

/// Draws one matrix from `kind` on the tensor space described by `dims`.
///
/// `r` controls the rank for the `Psd`, `RankR`, `Density` and
/// `StructuredRank1PlusNormal` ensembles and is ignored (but still validated)
/// for `Ginibre` and `Hermitian`.  Identical arguments always produce the
/// identical matrix.
pub fn random_matrix(
    kind: EnsembleKind,
    dims: &[usize],
    r: usize,
    field: Field,
    seed: u64,
) -> Result<MultipartiteMatrix> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(argument("dims must be a nonempty list of positive sizes"));
    }
    if r == 0 || r > total {
        return Err(argument(format!(
            "rank {r} out of range for total dimension {total}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrix = match kind {
        EnsembleKind::Ginibre => {
            nalgebra::DMatrix::from_fn(total, total, |_, _| sample_scalar(field, &mut rng))
        }
        EnsembleKind::Hermitian => {
            let g = nalgebra::DMatrix::from_fn(total, total, |_, _| {
                sample_scalar(field, &mut rng)
            });
            (&g + g.adjoint()).scale(0.5)
        }
        EnsembleKind::Psd | EnsembleKind::Density => {
            let b = nalgebra::DMatrix::from_fn(total, r, |_, _| sample_scalar(field, &mut rng));
            let m = &b * b.adjoint();
            if kind == EnsembleKind::Density {
                let tr: Complex64 = m.diagonal().sum();
                m.scale(1.0 / tr.re)
            } else {
                m
            }
        }
        EnsembleKind::RankR => {
            let mut m = nalgebra::DMatrix::zeros(total, total);
            for _ in 0..r {
                let v = random_vector(total, field, &mut rng);
                let w = random_vector(total, field, &mut rng);
                m += outer(&v, &w);
            }
            m
        }
        EnsembleKind::StructuredRank1PlusNormal => {
            // r - 1 orthonormal directions for the normal block, then the
            // rank-one leg with both factors orthogonal to all of them.
            let mut basis: Vec<ComplexVector> = Vec::with_capacity(r - 1);
            while basis.len() < r - 1 {
                let v = random_vector(total, field, &mut rng);
                if let Some(u) = orthogonalize(&v, &basis) {
                    let norm = u.norm();
                    basis.push(u / Complex64::new(norm, 0.0));
                }
            }
            let v1 = loop {
                let v = random_vector(total, field, &mut rng);
                if let Some(u) = orthogonalize(&v, &basis) {
                    break u;
                }
            };
            let w1 = loop {
                let v = random_vector(total, field, &mut rng);
                if let Some(u) = orthogonalize(&v, &basis) {
                    break u;
                }
            };
            let mut m = outer(&v1, &w1);
            for u in &basis {
                let eps = match field {
                    Field::Real => {
                        if rng.gen::<bool>() {
                            Complex64::new(1.0, 0.0)
                        } else {
                            Complex64::new(-1.0, 0.0)
                        }
                    }
                    Field::Complex => {
                        Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
                    }
                };
                m += outer(u, u).scale_mut_workaround(eps);
            }
            m
        }
    };
    MultipartiteMatrix::new(dims.to_vec(), matrix)
}

// nalgebra's `scale` is real-only; this is the complex-scalar counterpart
// used where a unimodular phase multiplies a whole matrix.
trait ComplexScale {
    fn scale_mut_workaround(self, factor: Complex64) -> Self;
}

impl ComplexScale for nalgebra::DMatrix<Complex64> {
    fn scale_mut_workaround(mut self, factor: Complex64) -> Self {
        for e in self.iter_mut() {
            *e *= factor;
        }
        self
    }
}

/// Low-rank factorization `C = sum_i |left_i><right_i|` returned by the
/// search so that reported minima can be reproduced exactly.
#[derive(Clone, Debug)]
pub struct RankFactorization {
    pub left: Vec<ComplexVector>,
    pub right: Vec<ComplexVector>,
    pub field: Field,
}

impl RankFactorization {
    pub fn rank(&self) -> usize {
        self.left.len()
    }

    /// Rebuilds the matrix on the tensor space described by `dims`.
    pub fn reconstruct(&self, dims: &[usize]) -> Result<MultipartiteMatrix> {
        let total: usize = dims.iter().product();
        if self.left.len() != self.right.len() {
            return Err(argument("factor lists have different lengths"));
        }
        if self.left.iter().chain(&self.right).any(|v| v.len() != total) {
            return Err(argument("factor length does not match dims"));
        }
        let mut m = nalgebra::DMatrix::zeros(total, total);
        for (v, w) in self.left.iter().zip(&self.right) {
            m += outer(v, w);
        }
        MultipartiteMatrix::new(dims.to_vec(), m)
    }
}

fn vector_parts(v: &ComplexVector) -> (Vec<f64>, Vec<f64>) {
    (
        v.iter().map(|z| z.re).collect(),
        v.iter().map(|z| z.im).collect(),
    )
}

impl Serialize for RankFactorization {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct VectorParts {
            re: Vec<f64>,
            im: Vec<f64>,
        }
        fn parts(vs: &[ComplexVector]) -> Vec<VectorParts> {
            vs.iter()
                .map(|v| {
                    let (re, im) = vector_parts(v);
                    VectorParts { re, im }
                })
                .collect()
        }
        let mut s = serializer.serialize_struct("RankFactorization", 3)?;
        s.serialize_field("field", &self.field)?;
        s.serialize_field("left", &parts(&self.left))?;
        s.serialize_field("right", &parts(&self.right))?;
        s.end()
    }
}

/// Outcome of a seeded multi-restart minimization.
#[derive(Clone, Debug, Serialize)]
pub struct SearchReport {
    pub spec: FormSpec,
    pub dims: Vec<usize>,
    pub rank: usize,
    pub field: Field,
    pub master_seed: u64,
    pub restarts: usize,
    /// Best value found, re-evaluated through `q_form` on the reconstructed
    /// matrix (not the optimizer's internal running value).
    pub best_value: f64,
    pub best_factorization: RankFactorization,
    /// Iterations consumed by each restart, in restart order.
    pub iterations: Vec<usize>,
    /// `(a, best value)` pairs recorded by bisection drivers; empty for a
    /// plain minimization.
    pub alpha_trace: Vec<(f64, f64)>,
}

// Flattened real parametrization of the factor vectors.  Layout per factor:
// left re | left im | right re | right im (imaginary blocks absent over the
// reals, which pins imaginary parts to zero for the whole run).
struct SearchContext<'a> {
    spec: &'a FormSpec,
    dims: &'a [usize],
    total: usize,
    rank: usize,
    field: Field,
    subsets: Vec<SubsystemSubset>,
    coeffs: Vec<f64>,
}

struct EvalState {
    q: f64,
    c_norm: f64,
    traces: Vec<MultipartiteMatrix>,
    sv: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

struct RestartOutcome {
    value: f64,
    x: Vec<f64>,
    iterations: usize,
}

impl<'a> SearchContext<'a> {
    fn new(spec: &'a FormSpec, dims: &'a [usize], rank: usize, field: Field) -> Result<Self> {
        if spec.n() != dims.len() {
            return Err(argument(format!(
                "sign pattern has {} slots but dims lists {} subsystems",
                spec.n(),
                dims.len()
            )));
        }
        let total: usize = dims.iter().product();
        if total == 0 {
            return Err(argument("dims must all be positive"));
        }
        if rank == 0 || rank > total {
            return Err(argument(format!(
                "rank {rank} out of range for total dimension {total}"
            )));
        }
        let subsets = SubsystemSubset::all_subsets(spec.n())?;
        let coeffs = subsets.iter().map(|s| spec.coefficient(s)).collect();
        Ok(SearchContext {
            spec,
            dims,
            total,
            rank,
            field,
            subsets,
            coeffs,
        })
    }

    fn params_per_factor(&self) -> usize {
        match self.field {
            Field::Real => 2 * self.total,
            Field::Complex => 4 * self.total,
        }
    }

    fn n_params(&self) -> usize {
        self.rank * self.params_per_factor()
    }

    fn unpack(&self, x: &[f64]) -> (Vec<ComplexVector>, Vec<ComplexVector>) {
        let d = self.total;
        let per = self.params_per_factor();
        let mut lefts = Vec::with_capacity(self.rank);
        let mut rights = Vec::with_capacity(self.rank);
        for i in 0..self.rank {
            let b = i * per;
            let (left, right) = match self.field {
                Field::Real => (
                    ComplexVector::from_fn(d, |k, _| Complex64::new(x[b + k], 0.0)),
                    ComplexVector::from_fn(d, |k, _| Complex64::new(x[b + d + k], 0.0)),
                ),
                Field::Complex => (
                    ComplexVector::from_fn(d, |k, _| Complex64::new(x[b + k], x[b + d + k])),
                    ComplexVector::from_fn(d, |k, _| {
                        Complex64::new(x[b + 2 * d + k], x[b + 3 * d + k])
                    }),
                ),
            };
            lefts.push(left);
            rights.push(right);
        }
        (lefts, rights)
    }

    fn factorization(&self, x: &[f64]) -> RankFactorization {
        let (left, right) = self.unpack(x);
        RankFactorization {
            left,
            right,
            field: self.field,
        }
    }

    fn build(&self, x: &[f64]) -> nalgebra::DMatrix<Complex64> {
        let (lefts, rights) = self.unpack(x);
        let mut m = nalgebra::DMatrix::zeros(self.total, self.total);
        for (v, w) in lefts.iter().zip(&rights) {
            m += outer(v, w);
        }
        m
    }

    // Evaluates the form, caching every partial trace and its singular
    // values.  None signals a non-finite objective, which aborts the restart.
    fn evaluate(&self, x: &[f64]) -> Option<EvalState> {
        let raw = self.build(x);
        let c = MultipartiteMatrix::new(self.dims.to_vec(), raw).ok()?;
        let mut traces = Vec::with_capacity(self.subsets.len());
        let mut sv = Vec::with_capacity(self.subsets.len());
        let mut norms = Vec::with_capacity(self.subsets.len());
        let mut q = 0.0;
        for (subset, coeff) in self.subsets.iter().zip(&self.coeffs) {
            let t = partial_trace(&c, subset).ok()?;
            let values = singular_values(t.matrix());
            let norm = norm_from_singular_values(&values, self.spec.p);
            q += coeff * norm.powf(self.spec.gamma);
            traces.push(t);
            sv.push(values);
            norms.push(norm);
        }
        if !q.is_finite() {
            return None;
        }
        // The empty subset is first in mask order, so sv[0] holds the
        // singular values of C itself whatever p is.
        let c_norm = sv[0].iter().map(|s| s * s).sum::<f64>().sqrt();
        Some(EvalState {
            q,
            c_norm,
            traces,
            sv,
            norms,
        })
    }

    // Rescales an evaluated state to match factors scaled by s^{-1/2}
    // (so C by 1/s); exact by homogeneity, no re-evaluation needed.
    fn rescale_state(&self, state: &mut EvalState, s: f64) {
        state.q /= s.powf(self.spec.gamma);
        for t in &mut state.traces {
            *t = t.scale_re(1.0 / s);
        }
        for values in &mut state.sv {
            for v in values.iter_mut() {
                *v /= s;
            }
        }
        for n in &mut state.norms {
            *n /= s;
        }
        state.c_norm /= s;
    }

    // Finite differences are used off p = 2 (no analytic formula) and at
    // near-degenerate retained singular values, where SVD-based derivatives
    // lose accuracy.
    fn wants_fd(&self, state: &EvalState) -> bool {
        if self.spec.p != 2.0 {
            return true;
        }
        for (subset, values) in self.subsets.iter().zip(&state.sv) {
            if subset.is_full() {
                continue;
            }
            let top = values.first().copied().unwrap_or(0.0);
            let kept_dim: usize = self
                .dims
                .iter()
                .enumerate()
                .filter(|(k, _)| !subset.contains(k + 1))
                .map(|(_, &d)| d)
                .product::<usize>()
                .max(1);
            let tol = RANK_TOL_BASE * kept_dim as f64 * top;
            let retained: Vec<f64> = values.iter().copied().filter(|&s| s > tol).collect();
            if retained.len() >= 2 {
                let m = retained.len();
                if retained[m - 2] - retained[m - 1] < 1e-8 {
                    return true;
                }
            }
        }
        false
    }

    // Gradient of q with respect to the flattened parameters at p = 2:
    // with h_J = |tr_J C|_2^2 the form is sum_J c_J h_J^{gamma/2}, and
    // dq = 2 Re <G, dC> for G = sum_J c_J (gamma/2) h_J^{gamma/2-1}
    // Embed(tr_J C, J).  Chain rule through C = sum |v_i><w_i| then gives
    // grad_{v_i} = G w_i and grad_{w_i} = G* v_i.
    fn analytic_gradient(&self, x: &[f64], state: &EvalState) -> Result<Vec<f64>> {
        let gamma = self.spec.gamma;
        let mut g = nalgebra::DMatrix::<Complex64>::zeros(self.total, self.total);
        for ((subset, coeff), (trace, norm)) in self
            .subsets
            .iter()
            .zip(&self.coeffs)
            .zip(state.traces.iter().zip(&state.norms))
        {
            let h = norm * norm;
            // h^{gamma/2-1} blows up as h -> 0 when gamma < 2, but the term
            // itself vanishes like h^{(gamma-1)/2}; skip it outright.
            if h < 1e-18 {
                continue;
            }
            let weight = coeff * (gamma / 2.0) * h.powf(gamma / 2.0 - 1.0);
            let embedded = embed_with_identity(trace, self.dims, subset)?;
            g += embedded.matrix().map(|z| z * Complex64::new(weight, 0.0));
        }
        let (lefts, rights) = self.unpack(x);
        let g_adj = g.adjoint();
        let d = self.total;
        let mut out = vec![0.0; self.n_params()];
        let per = self.params_per_factor();
        for i in 0..self.rank {
            let gv = &g * &rights[i];
            let gw = &g_adj * &lefts[i];
            let b = i * per;
            match self.field {
                Field::Real => {
                    for k in 0..d {
                        out[b + k] = 2.0 * gv[k].re;
                        out[b + d + k] = 2.0 * gw[k].re;
                    }
                }
                Field::Complex => {
                    for k in 0..d {
                        out[b + k] = 2.0 * gv[k].re;
                        out[b + d + k] = 2.0 * gv[k].im;
                        out[b + 2 * d + k] = 2.0 * gw[k].re;
                        out[b + 3 * d + k] = 2.0 * gw[k].im;
                    }
                }
            }
        }
        Ok(out)
    }

    fn fd_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let scale = x.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let h = 1e-6 * scale;
        let mut out = vec![0.0; x.len()];
        let mut probe = x.to_vec();
        for k in 0..x.len() {
            probe[k] = x[k] + h;
            let plus = self.evaluate(&probe)?.q;
            probe[k] = x[k] - h;
            let minus = self.evaluate(&probe)?.q;
            probe[k] = x[k];
            out[k] = (plus - minus) / (2.0 * h);
        }
        Some(out)
    }

    fn gradient(&self, x: &[f64], state: &EvalState) -> Option<Vec<f64>> {
        if self.wants_fd(state) {
            self.fd_gradient(x)
        } else {
            self.analytic_gradient(x, state).ok()
        }
    }

    fn run_restart(
        &self,
        seed: u64,
        max_iters: usize,
        stop_below: Option<f64>,
    ) -> Option<RestartOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<f64> = (0..self.n_params())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut state = self.evaluate(&x)?;
        let mut eta = 1.0f64;
        let mut best_value = f64::INFINITY;
        let mut best_x = x.clone();
        let mut iterations = 0usize;
        for iter in 0..max_iters {
            iterations = iter + 1;
            // Renormalize C to unit Hilbert-Schmidt norm; by homogeneity the
            // cached state transforms exactly.
            let s = state.c_norm;
            if !s.is_finite() || s < 1e-12 {
                break;
            }
            if (s - 1.0).abs() > 1e-12 {
                let t = s.powf(-0.5);
                for v in x.iter_mut() {
                    *v *= t;
                }
                self.rescale_state(&mut state, s);
            }
            if state.q < best_value {
                best_value = state.q;
                best_x.copy_from_slice(&x);
            }
            if let Some(th) = stop_below {
                if state.q < th {
                    break;
                }
            }
            let g = match self.gradient(&x, &state) {
                Some(g) => g,
                None => {
                    log::warn!("restart seeded {seed} aborted: non-finite gradient");
                    return None;
                }
            };
            // Remove the radial component (Euler: <g, x> = 2 gamma q), so
            // steps move along the unit-norm constraint set instead of
            // rescaling C.
            let xg: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
            let xx: f64 = x.iter().map(|a| a * a).sum();
            let dir: Vec<f64> = g
                .iter()
                .zip(&x)
                .map(|(gk, xk)| gk - xk * (xg / xx))
                .collect();
            let dir_norm2: f64 = dir.iter().map(|v| v * v).sum();
            if dir_norm2.sqrt() <= 1e-12 * state.q.abs().max(1.0) {
                break;
            }
            let mut step = eta;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let candidate: Vec<f64> = x
                    .iter()
                    .zip(&dir)
                    .map(|(xk, dk)| xk - step * dk)
                    .collect();
                if let Some(next) = self.evaluate(&candidate) {
                    if next.q.is_finite() && next.q <= state.q - ARMIJO_C1 * step * dir_norm2 {
                        x = candidate;
                        state = next;
                        eta = (step * 1.5).min(1e3);
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        // Final candidate: the best normalized value seen along the path.
        let mut final_state = self.evaluate(&best_x)?;
        let s = final_state.c_norm;
        if s.is_finite() && s > 1e-12 && (s - 1.0).abs() > 1e-12 {
            let t = s.powf(-0.5);
            for v in best_x.iter_mut() {
                *v *= t;
            }
            self.rescale_state(&mut final_state, s);
        }
        if !final_state.q.is_finite() {
            log::warn!("restart seeded {seed} aborted: non-finite objective");
            return None;
        }
        Some(RestartOutcome {
            value: final_state.q,
            x: best_x,
            iterations,
        })
    }
}

/// Minimizes `q_form(spec, C)` over matrices `C` of rank at most `rank` with
/// unit Hilbert-Schmidt norm, using `restarts` independent seeded starts.
///
/// Restarts run concurrently; the winner is the smallest value with restart
/// index as tie-break, so reports are reproducible for fixed inputs.
pub fn minimize_form(
    spec: &FormSpec,
    dims: &[usize],
    rank: usize,
    field: Field,
    restarts: usize,
    max_iters: usize,
    seed: u64,
) -> Result<SearchReport> {
    if restarts == 0 {
        return Err(argument("restarts must be positive"));
    }
    let ctx = SearchContext::new(spec, dims, rank, field)?;
    let outcomes: Vec<Option<RestartOutcome>> = (0..restarts)
        .into_par_iter()
        .map(|i| ctx.run_restart(derive_seed(seed, i as u64), max_iters, None))
        .collect();
    report_from_outcomes(&ctx, spec, dims, rank, field, seed, restarts, outcomes)
}

#[allow(clippy::too_many_arguments)]
fn report_from_outcomes(
    ctx: &SearchContext<'_>,
    spec: &FormSpec,
    dims: &[usize],
    rank: usize,
    field: Field,
    seed: u64,
    restarts: usize,
    outcomes: Vec<Option<RestartOutcome>>,
) -> Result<SearchReport> {
    let iterations: Vec<usize> = outcomes
        .iter()
        .map(|o| o.as_ref().map_or(0, |r| r.iterations))
        .collect();
    let best = outcomes
        .into_iter()
        .flatten()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.value
                .partial_cmp(&b.value)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ia.cmp(ib))
        })
        .map(|(_, o)| o)
        .ok_or_else(|| argument("every restart aborted with a non-finite objective"))?;
    let factorization = ctx.factorization(&best.x);
    let c = factorization.reconstruct(dims)?;
    // Independent re-evaluation; the optimizer's cached value must agree.
    let value = q_form(spec, &c)?;
    debug_assert!(
        (value - best.value).abs() <= 1e-9 * value.abs().max(1.0),
        "optimizer value {} disagrees with re-evaluation {}",
        best.value,
        value
    );
    Ok(SearchReport {
        spec: spec.clone(),
        dims: dims.to_vec(),
        rank,
        field,
        master_seed: seed,
        restarts,
        best_value: value,
        best_factorization: factorization,
        iterations,
        alpha_trace: Vec::new(),
    })
}

// Sequential restart scan that stops as soon as any restart certifies a
// violation.  Deterministic because the scan order is the restart order.
fn find_violation(
    spec: &FormSpec,
    dims: &[usize],
    rank: usize,
    field: Field,
    restarts: usize,
    max_iters: usize,
    seed: u64,
) -> Result<f64> {
    let ctx = SearchContext::new(spec, dims, rank, field)?;
    let mut best = f64::INFINITY;
    for i in 0..restarts {
        if let Some(out) = ctx.run_restart(derive_seed(seed, i as u64), max_iters, Some(EARLY_STOP))
        {
            if out.value < best {
                best = out.value;
            }
            if best < VIOLATION_THRESHOLD {
                break;
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(argument("every restart aborted with a non-finite objective"))
    }
}

/// One bisection probe: the deepest minima found at `alpha = -a` and
/// `alpha = +a` (the latter skipped when provably nonnegative).
#[derive(Clone, Debug, Serialize)]
pub struct AlphaProbe {
    pub a: f64,
    pub best_minus: f64,
    pub best_plus: Option<f64>,
    pub violated: bool,
}

/// Bisection estimate of the largest symmetric interval `[-a, a]` on which
/// no rank-`r` violation of the form was found.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaEstimate {
    pub estimate: f64,
    /// Analytic guarantee `1/max(dims)`, only available at `(p, gamma) = (2, 2)`.
    pub proven_lower: Option<f64>,
    /// Always true: the estimate is an upper bound from finite search, not a
    /// certificate.
    pub heuristic: bool,
    pub probes: Vec<AlphaProbe>,
}

/// Estimates the boundary `a` below which `q_v(alpha, C) >= 0` for all
/// `|alpha| <= a` and all rank-`r` matrices on `dims`, by bisection over `a`
/// with a seeded violation search at each probe.
///
/// A probe at level `a` checks `alpha = -a`, and `alpha = +a` unless the sign
/// pattern is all ones (then every term of `q_v(+a, .)` is nonnegative, so
/// the positive side cannot be violated).  The returned estimate is the
/// largest probed level with no violation, accurate to `bisect_tol`.
#[allow(clippy::too_many_arguments)]
pub fn alpha_opt_estimate(
    pattern: &[u8],
    p: f64,
    gamma: f64,
    rank: usize,
    dims: &[usize],
    field: Field,
    bisect_tol: f64,
    seed: u64,
    restarts: usize,
    max_iters: usize,
) -> Result<AlphaEstimate> {
    if !(bisect_tol > 0.0) {
        return Err(argument("bisect_tol must be positive"));
    }
    let all_ones = pattern.iter().all(|&b| b == 1);
    let mut probes = Vec::new();
    let mut probe_index = 0u64;
    let mut check = |a: f64, probes: &mut Vec<AlphaProbe>| -> Result<bool> {
        let minus_spec = FormSpec::new(pattern.to_vec(), p, gamma, -a)?;
        let minus_seed = derive_seed(seed, 2 * probe_index);
        let best_minus =
            find_violation(&minus_spec, dims, rank, field, restarts, max_iters, minus_seed)?;
        let mut violated = best_minus < VIOLATION_THRESHOLD;
        let best_plus = if all_ones || violated {
            None
        } else {
            let plus_spec = FormSpec::new(pattern.to_vec(), p, gamma, a)?;
            let plus_seed = derive_seed(seed, 2 * probe_index + 1);
            let v =
                find_violation(&plus_spec, dims, rank, field, restarts, max_iters, plus_seed)?;
            violated = violated || v < VIOLATION_THRESHOLD;
            Some(v)
        };
        probe_index += 1;
        probes.push(AlphaProbe {
            a,
            best_minus,
            best_plus,
            violated,
        });
        Ok(violated)
    };
    let max_dim = *dims.iter().max().expect("dims validated nonempty") as f64;
    let proven_lower = if p == 2.0 && gamma == 2.0 {
        Some(1.0 / max_dim)
    } else {
        None
    };
    // Probe the endpoint first: if even a = 1 is clean the answer is 1.
    let estimate = if !check(1.0, &mut probes)? {
        1.0
    } else {
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        while hi - lo > bisect_tol {
            let mid = 0.5 * (lo + hi);
            if check(mid, &mut probes)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    };
    Ok(AlphaEstimate {
        estimate,
        proven_lower,
        heuristic: true,
        probes,
    })
}

/// One cell of a `(p, gamma)` sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub gamma: f64,
    pub estimate: f64,
    pub proven_lower: Option<f64>,
    pub rank: usize,
    pub dims: Vec<usize>,
    pub field: Field,
    pub restarts: usize,
    pub seed: u64,
}

/// CSV column order for sweep output.
pub const SWEEP_CSV_HEADER: &str = "p,gamma,estimate,proven_lower,rank,dims,field,restarts,seed";

fn csv_float(x: f64) -> String {
    // 12 significant digits.
    format!("{x:.11e}")
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let dims = self
            .dims
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x");
        let proven = self.proven_lower.map(csv_float).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            csv_float(self.p),
            csv_float(self.gamma),
            csv_float(self.estimate),
            proven,
            self.rank,
            dims,
            self.field,
            self.restarts,
            self.seed
        )
    }
}

/// Renders sweep rows as a CSV document with header.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

/// Tabulates `alpha_opt_estimate` over the grid `p_values x gamma_values`.
///
/// Cell `(i, j)` runs with seed `derive_seed(seed, i * len(gamma_values) + j)`,
/// recorded in its row, so any cell can be reproduced in isolation.  When
/// `output_path` is given the CSV rendering is also written there.
#[allow(clippy::too_many_arguments)]
pub fn sweep_grid(
    pattern: &[u8],
    p_values: &[f64],
    gamma_values: &[f64],
    rank: usize,
    dims: &[usize],
    field: Field,
    bisect_tol: f64,
    seed: u64,
    restarts: usize,
    max_iters: usize,
    output_path: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    if p_values.is_empty() || gamma_values.is_empty() {
        return Err(argument("sweep grid must have at least one p and one gamma"));
    }
    let mut rows = Vec::with_capacity(p_values.len() * gamma_values.len());
    for (i, &p) in p_values.iter().enumerate() {
        for (j, &gamma) in gamma_values.iter().enumerate() {
            let cell_seed = derive_seed(seed, (i * gamma_values.len() + j) as u64);
            let est = alpha_opt_estimate(
                pattern, p, gamma, rank, dims, field, bisect_tol, cell_seed, restarts, max_iters,
            )?;
            rows.push(SweepRow {
                p,
                gamma,
                estimate: est.estimate,
                proven_lower: est.proven_lower,
                rank,
                dims: dims.to_vec(),
                field,
                restarts,
                seed: cell_seed,
            });
        }
    }
    if let Some(path) = output_path {
        std::fs::write(path, sweep_csv(&rows))?;
    }
    Ok(rows)
}

/// Worst relative deviation between analytic and central-difference gradients
/// over `trials` random parameter points.  Only defined at `p = 2`, where the
/// analytic formula exists.
pub fn gradient_consistency(
    spec: &FormSpec,
    dims: &[usize],
    rank: usize,
    field: Field,
    seed: u64,
    trials: usize,
) -> Result<f64> {
    if spec.p != 2.0 {
        return Err(argument("analytic gradients are only available at p = 2"));
    }
    let ctx = SearchContext::new(spec, dims, rank, field)?;
    let mut worst = 0.0f64;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
        let x: Vec<f64> = (0..ctx.n_params())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let state = ctx
            .evaluate(&x)
            .ok_or_else(|| argument("non-finite objective at a random point"))?;
        let analytic = ctx.analytic_gradient(&x, &state)?;
        let fd = ctx
            .fd_gradient(&x)
            .ok_or_else(|| argument("non-finite objective during finite differences"))?;
        let diff: f64 = analytic
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = analytic
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(fd.iter().map(|v| v * v).sum::<f64>().sqrt())
            .max(1e-12);
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}
