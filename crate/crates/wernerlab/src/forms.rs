//! Signed partial-trace quadratic forms and the operator constructions that
//! accompany them.
//!
//! The central object is
//!
//! ```text
//! q_v(p,γ,α,C) = Σ_{J ⊆ {1..n}} α^{|J|} (−1)^{|J| + Σ_{k∈J} v_k} ‖tr_J C‖_p^γ
//! ```
//!
//! with `tr_∅ C = C` and the full-set term reducing to the modulus of the
//! trace (a 1×1 matrix has the single singular value |tr C|, so no special
//! case is needed and the term is p-independent). Nothing here normalizes
//! `C`: the form is |λ|^γ-homogeneous and positivity is a sign question, so
//! scale is left to callers.

use num_complex::Complex64;
use num_integer::binomial;
use num_rational::Ratio;

use crate::error::{argument, Result};
use crate::spectral::{matrix_schatten_norm, operator_norm};
use crate::tensorspace::{
    embed_with_identity, flip_pair, kron, partial_trace, ComplexMatrix, ComplexVector,
    MultipartiteMatrix, SubsystemSubset,
};

/// Exact rational scalar for alternating binomial sums.
pub type ExactRational = Ratio<i128>;

/// Parameters of a signed partial-trace form.
#[derive(Clone, Debug, PartialEq)]
pub struct FormSpec {
    /// Sign pattern in {0,1}^n; entry k flips the sign rule for subsystem k.
    pub v: Vec<u8>,
    /// Schatten exponent, ≥ 1 or `f64::INFINITY`.
    pub p: f64,
    /// Norm power γ ≥ 1 (finite).
    pub gamma: f64,
    /// Weight α of each traced subsystem.
    pub alpha: f64,
}

impl FormSpec {
    pub fn new(v: Vec<u8>, p: f64, gamma: f64, alpha: f64) -> Result<Self> {
        if v.is_empty() {
            return Err(argument("sign pattern must be non-empty"));
        }
        if v.iter().any(|&b| b > 1) {
            return Err(argument("sign pattern entries must be 0 or 1"));
        }
        if !(p >= 1.0) {
            return Err(argument(format!("exponent p = {p} must be ≥ 1 or ∞")));
        }
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(argument(format!("power γ = {gamma} must be finite and ≥ 1")));
        }
        if !alpha.is_finite() {
            return Err(argument("α must be finite"));
        }
        Ok(Self { v, p, gamma, alpha })
    }

    /// The Hilbert-Schmidt case (p, γ) = (2, 2).
    pub fn hs(v: Vec<u8>, alpha: f64) -> Result<Self> {
        Self::new(v, 2.0, 2.0, alpha)
    }

    /// The all-ones pattern at (p, γ) = (2, 2): the n-copy form q^(n).
    pub fn q_n(n: usize, alpha: f64) -> Result<Self> {
        Self::hs(vec![1; n], alpha)
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn is_hilbert_schmidt(&self) -> bool {
        self.p == 2.0 && self.gamma == 2.0
    }

    /// Signed weight of a subset: α^{|J|} (−1)^{|J| + Σ_{k∈J} v_k}.
    pub fn coefficient(&self, subset: &SubsystemSubset) -> f64 {
        let j = subset.len();
        let v_sum: usize = subset.members().iter().map(|&k| self.v[k - 1] as usize).sum();
        let sign = if (j + v_sum) % 2 == 0 { 1.0 } else { -1.0 };
        sign * self.alpha.powi(j as i32)
    }

    /// The reflected form: q_v(−α, C) = q_{1−v}(α, C) for all C.
    pub fn reflected(&self) -> Self {
        Self {
            v: self.v.iter().map(|&b| 1 - b).collect(),
            p: self.p,
            gamma: self.gamma,
            alpha: -self.alpha,
        }
    }

    /// Same pattern and exponents at a different α.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }
}

impl serde::Serialize for FormSpec {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = ser.serialize_struct("FormSpec", 4)?;
        s.serialize_field("v", &self.v)?;
        // JSON has no ∞ literal; emit a string marker instead of null.
        if self.p.is_finite() {
            s.serialize_field("p", &self.p)?;
        } else {
            s.serialize_field("p", "inf")?;
        }
        s.serialize_field("gamma", &self.gamma)?;
        s.serialize_field("alpha", &self.alpha)?;
        s.end()
    }
}

/// One summand of the form: subset, norm value, and its signed weight.
#[derive(Clone, Debug)]
pub struct BreakdownTerm {
    pub subset: SubsystemSubset,
    /// ‖tr_J C‖_p.
    pub norm: f64,
    /// α^{|J|} (−1)^{|J| + Σ_{k∈J} v_k}.
    pub coefficient: f64,
    /// coefficient · norm^γ.
    pub value: f64,
}

fn check_arity(spec: &FormSpec, c: &MultipartiteMatrix) -> Result<()> {
    if spec.n() != c.n_subsystems() {
        return Err(argument(format!(
            "sign pattern has length {}, operator has {} subsystems",
            spec.n(),
            c.n_subsystems()
        )));
    }
    Ok(())
}

/// All 2^n terms of the form, in subset mask order (∅ first, full set last).
pub fn q_form_breakdown(spec: &FormSpec, c: &MultipartiteMatrix) -> Result<Vec<BreakdownTerm>> {
    check_arity(spec, c)?;
    let mut terms = Vec::with_capacity(1 << spec.n());
    for subset in SubsystemSubset::all_subsets(spec.n())? {
        let reduced = partial_trace(c, &subset)?;
        let norm = matrix_schatten_norm(reduced.matrix(), spec.p)?;
        let coefficient = spec.coefficient(&subset);
        terms.push(BreakdownTerm {
            subset,
            norm,
            coefficient,
            value: coefficient * norm.powf(spec.gamma),
        });
    }
    Ok(terms)
}

/// Evaluates q_v(p,γ,α,C).
pub fn q_form(spec: &FormSpec, c: &MultipartiteMatrix) -> Result<f64> {
    Ok(q_form_breakdown(spec, c)?.iter().map(|t| t.value).sum())
}

/// State-inversion operator families built from a pure state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InversionKind {
    BipartiteQ,
    TripartiteQ,
    TripartiteP,
}

/// A signed alternating sum of `|a⟩⟨a|`, its partial-trace marginals tensored
/// with identities, and `‖a‖²𝟙`, optionally compressed to ker(|a⟩⟨a|).
#[derive(Clone, Debug)]
pub struct InversionOperator {
    pub base_vector: ComplexVector,
    pub r: usize,
    pub kind: InversionKind,
    pub matrix: MultipartiteMatrix,
    pub projected: bool,
    /// Set when the base vector is zero: the operator is zero and every
    /// spectral bound is vacuous.
    pub vacuous: bool,
}

impl InversionOperator {
    /// Real quadratic form ⟨x, M x⟩ (the matrix is Hermitian).
    pub fn expectation(&self, x: &ComplexVector) -> Result<f64> {
        let mx = self.matrix.apply(x)?;
        Ok(x.dotc(&mx).re)
    }
}

/// Σ_J α^{|J|} (−1)^{|J|+Σ_{k∈J}v_k} · Embed(tr_J |a⟩⟨a|, identity on J).
///
/// Each marginal stays at its original slot positions; the full-set term is
/// tr(|a⟩⟨a|)·𝟙 = ‖a‖²𝟙 and the empty term is |a⟩⟨a| itself.
fn signed_inversion_sum(
    pattern: &[u8],
    alpha: f64,
    a: &ComplexVector,
    dims: &[usize],
) -> Result<MultipartiteMatrix> {
    let spec = FormSpec::new(pattern.to_vec(), 2.0, 2.0, alpha)?;
    let projector = MultipartiteMatrix::from_outer(dims.to_vec(), a, a)?;
    let mut acc = MultipartiteMatrix::zeros(dims.to_vec())?;
    for subset in SubsystemSubset::all_subsets(dims.len())? {
        let marginal = partial_trace(&projector, &subset)?;
        let embedded = embed_with_identity(&marginal, dims, &subset)?;
        acc = &acc + &embedded.scale_re(spec.coefficient(&subset));
    }
    Ok(acc)
}

/// Compression P M P with P = 𝟙 − |â⟩⟨â| the projector onto ker(|a⟩⟨a|).
fn compress_to_kernel(m: &MultipartiteMatrix, a: &ComplexVector) -> Result<MultipartiteMatrix> {
    let norm_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let unit = a / Complex64::new(norm_sq.sqrt(), 0.0);
    let proj = &MultipartiteMatrix::identity(m.dims().to_vec())?
        - &MultipartiteMatrix::from_outer(m.dims().to_vec(), &unit, &unit)?;
    Ok(&(&proj * m) * &proj)
}

fn build_inversion(
    pattern: &[u8],
    a: &ComplexVector,
    r: usize,
    dims: &[usize],
    kind: InversionKind,
    projected: bool,
) -> Result<InversionOperator> {
    if r == 0 {
        return Err(argument("rank parameter r must be ≥ 1"));
    }
    if dims.len() != pattern.len() {
        return Err(argument(format!(
            "expected {} subsystem dimensions, got {}",
            pattern.len(),
            dims.len()
        )));
    }
    let d: usize = dims.iter().product();
    if a.len() != d {
        return Err(argument(format!(
            "base vector has length {}, dims {:?} give {d}",
            a.len(),
            dims
        )));
    }
    let norm_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    if norm_sq == 0.0 {
        return Ok(InversionOperator {
            base_vector: a.clone(),
            r,
            kind,
            matrix: MultipartiteMatrix::zeros(dims.to_vec())?,
            projected,
            vacuous: true,
        });
    }
    let raw = signed_inversion_sum(pattern, -1.0 / r as f64, a, dims)?;
    let matrix = if projected {
        compress_to_kernel(&raw, a)?
    } else {
        raw
    };
    Ok(InversionOperator {
        base_vector: a.clone(),
        r,
        kind,
        matrix,
        projected,
        vacuous: false,
    })
}

/// Bipartite inversion
/// `|a⟩⟨a| − (1/r)(𝟙⊗tr₁|a⟩⟨a| + tr₂|a⟩⟨a|⊗𝟙) + (1/r²)‖a‖²𝟙`,
/// optionally compressed to ker(|a⟩⟨a|).
pub fn inversion_q_bipartite(
    a: &ComplexVector,
    r: usize,
    dims: &[usize],
    projected: bool,
) -> Result<InversionOperator> {
    build_inversion(&[1, 1], a, r, dims, InversionKind::BipartiteQ, projected)
}

/// Tripartite analogue with alternating 1/r powers down to −(1/r³)‖a‖²𝟙.
pub fn inversion_q_tripartite(
    a: &ComplexVector,
    r: usize,
    dims: &[usize],
    projected: bool,
) -> Result<InversionOperator> {
    build_inversion(&[1, 1, 1], a, r, dims, InversionKind::TripartiteQ, projected)
}

/// Tripartite variant whose sign rule exempts the first subsystem.
pub fn inversion_p_tripartite(
    a: &ComplexVector,
    r: usize,
    dims: &[usize],
    projected: bool,
) -> Result<InversionOperator> {
    build_inversion(&[0, 1, 1], a, r, dims, InversionKind::TripartiteP, projected)
}

/// Exchange symmetry of a two-slot subspace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairSymmetry {
    Symmetric,
    Antisymmetric,
}

impl PairSymmetry {
    fn sign(self) -> f64 {
        match self {
            PairSymmetry::Symmetric => 1.0,
            PairSymmetry::Antisymmetric => -1.0,
        }
    }
}

/// A creation map ℋ → ℋ⊗ℋ and its adjoint annihilation map.
#[derive(Clone, Debug)]
pub struct PairedOps {
    /// D²×D; column c is (1/√2)(v ⊗ e_c ± e_c ⊗ v).
    pub creator: ComplexMatrix,
    /// D×D²; the matrix adjoint of `creator`.
    pub annihilator: ComplexMatrix,
}

/// Materializes a*_±(v) and a_±(v) as explicit rectangular matrices.
pub fn creation_annihilation(v: &ComplexVector, symmetry: PairSymmetry) -> PairedOps {
    let d = v.len();
    let s = symmetry.sign();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let creator = ComplexMatrix::from_fn(d * d, d, |row, col| {
        let (a, b) = (row / d, row % d);
        let mut z = Complex64::new(0.0, 0.0);
        if b == col {
            z += v[a];
        }
        if a == col {
            z += Complex64::new(s, 0.0) * v[b];
        }
        z * Complex64::new(inv_sqrt2, 0.0)
    });
    let annihilator = creator.adjoint();
    PairedOps {
        creator,
        annihilator,
    }
}

/// Residuals of the two marginal-difference identities on ℋ = ℂ^{d₁}⊗ℂ^{d₂}:
///
/// ```text
/// 𝟙 ⊗ tr₁|v⟩⟨w| − tr₂|v⟩⟨w| ⊗ 𝟙 = a₋(w) ∘ F₂₄ ∘ a*₋(v)
/// 𝟙 ⊗ tr₁|v⟩⟨w| + tr₂|v⟩⟨w| ⊗ 𝟙 = a₊(w) ∘ F₂₄ ∘ a*₊(v)
/// ```
///
/// where F₂₄ exchanges slots 2 and 4 of ℋ⊗ℋ ≅ ℂ^{d₁}⊗ℂ^{d₂}⊗ℂ^{d₁}⊗ℂ^{d₂}.
/// Each identity pairs the difference (resp. sum) with the operators of the
/// SAME exchange symmetry. Returns the operator-norm residuals
/// (antisymmetric, symmetric).
pub fn fermionic_bosonic_identity_residual(
    v: &ComplexVector,
    w: &ComplexVector,
    dims: &[usize],
) -> Result<(f64, f64)> {
    if dims.len() != 2 {
        return Err(argument("identity defined on bipartite spaces"));
    }
    let (d1, d2) = (dims[0], dims[1]);
    let d = d1 * d2;
    if v.len() != d || w.len() != d {
        return Err(argument("vectors do not match the declared dims"));
    }
    let c = MultipartiteMatrix::from_outer(dims.to_vec(), v, w)?;
    let one = SubsystemSubset::from_members(2, &[1])?;
    let two = SubsystemSubset::from_members(2, &[2])?;
    let t1 = partial_trace(&c, &one)?;
    let t2 = partial_trace(&c, &two)?;
    let id1 = MultipartiteMatrix::identity(vec![d1])?;
    let id2 = MultipartiteMatrix::identity(vec![d2])?;
    let diff = &kron(&id1, &t1)? - &kron(&t2, &id2)?;
    let sum = &kron(&id1, &t1)? + &kron(&t2, &id2)?;

    let f24 = flip_pair(&[d1, d2, d1, d2], 2, 4)?;
    let sandwich = |sym: PairSymmetry| -> ComplexMatrix {
        let from_v = creation_annihilation(v, sym);
        let from_w = creation_annihilation(w, sym);
        &from_w.annihilator * &(f24.matrix() * &from_v.creator)
    };
    let anti = operator_norm(&(diff.matrix() - sandwich(PairSymmetry::Antisymmetric)));
    let sym = operator_norm(&(sum.matrix() - sandwich(PairSymmetry::Symmetric)));
    Ok((anti, sym))
}

/// Operator norm of `𝟙 ⊗ tr₁C − tr₂C ⊗ 𝟙` for bipartite C.
pub fn kronecker_difference_norm(c: &MultipartiteMatrix) -> Result<f64> {
    if c.n_subsystems() != 2 {
        return Err(argument("Kronecker difference defined for bipartite operators"));
    }
    let t1 = partial_trace(c, &SubsystemSubset::from_members(2, &[1])?)?;
    let t2 = partial_trace(c, &SubsystemSubset::from_members(2, &[2])?)?;
    let id1 = MultipartiteMatrix::identity(vec![c.dims()[0]])?;
    let id2 = MultipartiteMatrix::identity(vec![c.dims()[1]])?;
    let diff = &kron(&id1, &t1)? - &kron(&t2, &id2)?;
    Ok(operator_norm(diff.matrix()))
}

/// p_r(x) = (r−1)Σx_i² − 2Σ_{i>j}x_i x_j = Σ_{i>j}(x_i − x_j)².
///
/// Both displayed expressions are computed and their agreement asserted;
/// the pairwise-difference form is returned.
pub fn positivity_polynomial(x: &[f64]) -> f64 {
    let r = x.len();
    let sum_sq: f64 = x.iter().map(|&t| t * t).sum();
    let mut cross = 0.0;
    let mut pairwise = 0.0;
    for i in 0..r {
        for j in 0..i {
            cross += x[i] * x[j];
            pairwise += (x[i] - x[j]) * (x[i] - x[j]);
        }
    }
    let expanded = (r as f64 - 1.0) * sum_sq - 2.0 * cross;
    let scale = (r as f64 * sum_sq).max(1.0);
    assert!(
        (expanded - pairwise).abs() <= 1e-12 * scale,
        "polynomial forms disagree: {expanded} vs {pairwise}"
    );
    pairwise
}

/// Deterministic n-partite violation witness near α = −1/2.
///
/// Builds C = |e₀^⊗n⟩⟨e₀^⊗n| − |e₁^⊗n⟩⟨e₁^⊗n| on (ℂ^d)^⊗n, for which every
/// proper-subset marginal has squared norm 2 and the trace vanishes, so
/// q^(n)(α, C) = 2 Σ_{k=0}^{n−1} binom(n,k) α^k. For even n this vanishes at
/// α = −1/2 and goes negative just below. Returns (C, q evaluated through
/// the general form, closed-form sum) at α = −1/2 − ε.
pub fn appendix_counterexample(
    n: usize,
    d: usize,
    eps: f64,
) -> Result<(MultipartiteMatrix, f64, f64)> {
    if n < 2 || n % 2 != 0 {
        return Err(argument(format!(
            "witness family requires even n ≥ 2, got {n}"
        )));
    }
    if d < 2 {
        return Err(argument("local dimension must be ≥ 2"));
    }
    if !(eps > 0.0) {
        return Err(argument("ε must be > 0"));
    }
    let dims = vec![d; n];
    let total: usize = dims.iter().product();
    let mut v0 = ComplexVector::zeros(total);
    v0[0] = Complex64::new(1.0, 0.0);
    // e₁⊗...⊗e₁ has mixed-radix digits all 1: index Σ d^k = (d^n−1)/(d−1).
    let idx1 = (total - 1) / (d - 1);
    let mut v1 = ComplexVector::zeros(total);
    v1[idx1] = Complex64::new(1.0, 0.0);
    let c = &MultipartiteMatrix::from_outer(dims.clone(), &v0, &v0)?
        - &MultipartiteMatrix::from_outer(dims, &v1, &v1)?;

    let alpha = -0.5 - eps;
    let q_value = q_form(&FormSpec::q_n(n, alpha)?, &c)?;
    let closed_form: f64 = (0..n)
        .map(|k| 2.0 * binomial(n as i128, k as i128) as f64 * alpha.powi(k as i32))
        .sum();
    Ok((c, q_value, closed_form))
}

/// Both sides of the alternating binomial identity
///
/// ```text
/// Σ_{k=m}^{n−1} (−1)^k 2^{m−k} binom(n,k) binom(k,m)
///     = binom(n,m) (1/2)^{n−m} ((−1)^m − (−1)^n)
/// ```
///
/// in exact rational arithmetic, returned as (lhs, rhs).
pub fn lemma_a1_sum(n: usize, m: usize) -> Result<(ExactRational, ExactRational)> {
    if m >= n {
        return Err(argument(format!("need m < n, got n = {n}, m = {m}")));
    }
    if n > 60 {
        return Err(argument("n too large for exact i128 binomials"));
    }
    let mut lhs = ExactRational::from_integer(0);
    for k in m..n {
        let sign: i128 = if k % 2 == 0 { 1 } else { -1 };
        let numer = sign * binomial(n as i128, k as i128) * binomial(k as i128, m as i128);
        lhs += ExactRational::new(numer, 1i128 << (k - m));
    }
    let parity = |t: usize| -> i128 {
        if t % 2 == 0 {
            1
        } else {
            -1
        }
    };
    let rhs = ExactRational::new(
        binomial(n as i128, m as i128) * (parity(m) - parity(n)),
        1i128 << (n - m),
    );
    Ok((lhs, rhs))
}

fn split_rows(x: &ComplexVector, d1: usize, d2: usize) -> Vec<ComplexVector> {
    (0..d1)
        .map(|k| ComplexVector::from_fn(d2, |j, _| x[k * d2 + j]))
        .collect()
}

/// Wedge x∧y = x⊗y − y⊗x as a flat vector on ℂ^d ⊗ ℂ^d.
fn wedge(x: &ComplexVector, y: &ComplexVector) -> ComplexVector {
    let d = x.len();
    ComplexVector::from_fn(d * d, |idx, _| {
        let (a, b) = (idx / d, idx % d);
        x[a] * y[b] - y[a] * x[b]
    })
}

/// The antisymmetrized-norm value of a bipartite rank-1 positivity check:
///
/// ```text
/// ¼ ‖ Σ_{k,j} (x¹_k ∧ y¹_j) ⊗ (x²_k ∧ y²_j) ‖²
/// ```
///
/// where x = Σ_k x¹_k ⊗ x²_k and y = Σ_j y¹_j ⊗ y²_j are expanded along the
/// first-slot basis (x¹_k = e_k), so both expansions automatically have the
/// same number of terms. Equals q^(2)(−1, |x⟩⟨y|) for (p,γ) = (2,2).
pub fn rank1_antisymmetric_value(
    x: &ComplexVector,
    y: &ComplexVector,
    dims: &[usize],
) -> Result<f64> {
    if dims.len() != 2 {
        return Err(argument("antisymmetrized value defined for bipartite vectors"));
    }
    let (d1, d2) = (dims[0], dims[1]);
    if x.len() != d1 * d2 || y.len() != d1 * d2 {
        return Err(argument("vectors do not match the declared dims"));
    }
    let xr = split_rows(x, d1, d2);
    let yr = split_rows(y, d1, d2);
    let basis: Vec<ComplexVector> = (0..d1)
        .map(|k| {
            let mut e = ComplexVector::zeros(d1);
            e[k] = Complex64::new(1.0, 0.0);
            e
        })
        .collect();
    let mut acc = ComplexVector::zeros(d1 * d1 * d2 * d2);
    for k in 0..d1 {
        for j in 0..d1 {
            let first = wedge(&basis[k], &basis[j]);
            let second = wedge(&xr[k], &yr[j]);
            // acc += first ⊗ second, flat on dims [d1,d1,d2,d2].
            for (a, fa) in first.iter().enumerate() {
                if fa.re == 0.0 && fa.im == 0.0 {
                    continue;
                }
                for (b, sb) in second.iter().enumerate() {
                    acc[a * d2 * d2 + b] += fa * sb;
                }
            }
        }
    }
    Ok(0.25 * acc.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// Rank-1 evaluation through slot exchanges instead of partial traces:
///
/// ```text
/// q_v(2,2,α,|x⟩⟨y|) = ⟨x⊗y, Π_k (𝟙 + α(−1)^{v_k+1} F_{k,n+k}) x⊗y⟩
/// ```
///
/// on the doubled space of dims `dims ++ dims`. Independent of the
/// partial-trace route, so it serves as an oracle for it.
pub fn rank1_flip_value(
    pattern: &[u8],
    alpha: f64,
    x: &ComplexVector,
    y: &ComplexVector,
    dims: &[usize],
) -> Result<f64> {
    let n = dims.len();
    if pattern.len() != n {
        return Err(argument("sign pattern length must match dims"));
    }
    let d: usize = dims.iter().product();
    if x.len() != d || y.len() != d {
        return Err(argument("vectors do not match the declared dims"));
    }
    let mut doubled = dims.to_vec();
    doubled.extend_from_slice(dims);
    let mut state = ComplexVector::from_fn(d * d, |idx, _| x[idx / d] * y[idx % d]);
    let original = state.clone();
    for k in 0..n {
        let f = flip_pair(&doubled, k + 1, n + k + 1)?;
        let sign = if pattern[k] == 1 { -1.0 } else { 1.0 };
        // (𝟙 + α·(−1)^{v_k+1} F) applied in place; at v_k=1 this is 𝟙 − αF
        // with the α sign folded in so the product expands to the form terms.
        let t = Complex64::new(-sign * alpha, 0.0);
        state = &state + &(f.matrix() * &state).map(|z| z * t);
    }
    Ok(original.dotc(&state).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::hermitian_eigenvalues;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit(d: usize, k: usize) -> ComplexVector {
        let mut v = ComplexVector::zeros(d);
        v[k] = c(1.0, 0.0);
        v
    }

    fn wavy_vector(d: usize, seed: usize) -> ComplexVector {
        ComplexVector::from_fn(d, |k, _| {
            c(
                ((seed * 7 + k * 3 + 1) as f64).sin(),
                ((seed * 5 + k * 2 + 2) as f64).cos() * 0.8,
            )
        })
    }

    fn wavy_matrix(dims: Vec<usize>, seed: usize) -> MultipartiteMatrix {
        MultipartiteMatrix::from_fn(dims, |r, col| {
            c(
                ((seed + 3 * r + 7 * col + 1) as f64).sin(),
                ((seed + 5 * r + 2 * col) as f64).cos() * 0.6,
            )
        })
        .unwrap()
    }

    #[test]
    fn single_system_form_matches_closed_expression() {
        let m = wavy_matrix(vec![3], 1);
        let alpha = -0.37;
        let q = q_form(&FormSpec::q_n(1, alpha).unwrap(), &m).unwrap();
        let frob_sq: f64 = m.matrix().iter().map(|z| z.norm_sqr()).sum();
        let want = frob_sq + alpha * m.trace().norm_sqr();
        assert_relative_eq!(q, want, epsilon = 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn identity_form_closed_expression() {
        for d in [2usize, 3] {
            for alpha in [-0.5, -0.25, 0.3, 1.0] {
                let id = MultipartiteMatrix::identity(vec![d, d]).unwrap();
                let q = q_form(&FormSpec::q_n(2, alpha).unwrap(), &id).unwrap();
                let df = d as f64;
                let want = df * df * (1.0 + alpha * df) * (1.0 + alpha * df);
                assert_relative_eq!(q, want, epsilon = 1e-9 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn flip_form_closed_expression() {
        for d in [2usize, 3] {
            let f = crate::tensorspace::flip(d).unwrap();
            let alpha = -0.41;
            let q = q_form(&FormSpec::q_n(2, alpha).unwrap(), &f).unwrap();
            let df = d as f64;
            let want = df * df + 2.0 * alpha * df + alpha * alpha * df * df;
            assert_relative_eq!(q, want, epsilon = 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn rank1_product_counterexample_value() {
        // C = |u⟩⟨u| ⊗ |v⟩⟨w| with v ⟂ w: q^(2)(−1−ε) = −ε exactly.
        for eps in [0.1, 0.01] {
            let u = unit(2, 0);
            let v = unit(2, 0);
            let w = unit(2, 1);
            let uu = MultipartiteMatrix::from_outer(vec![2], &u, &u).unwrap();
            let vw = MultipartiteMatrix::from_outer(vec![2], &v, &w).unwrap();
            let cmat = kron(&uu, &vw).unwrap();
            let q = q_form(&FormSpec::q_n(2, -1.0 - eps).unwrap(), &cmat).unwrap();
            assert_relative_eq!(q, -eps, epsilon = 1e-12);
        }
    }

    #[test]
    fn mixed_pattern_signs() {
        // q_{(1,0)}(α,C) = ‖C‖² + α‖tr₁C‖² − α‖tr₂C‖² − α²|tr C|².
        let m = wavy_matrix(vec![2, 3], 4);
        let alpha = 0.63;
        let spec = FormSpec::hs(vec![1, 0], alpha).unwrap();
        let q = q_form(&spec, &m).unwrap();
        let sq = |x: &MultipartiteMatrix| x.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>();
        let t1 = partial_trace(&m, &SubsystemSubset::from_members(2, &[1]).unwrap()).unwrap();
        let t2 = partial_trace(&m, &SubsystemSubset::from_members(2, &[2]).unwrap()).unwrap();
        let want =
            sq(&m) + alpha * sq(&t1) - alpha * sq(&t2) - alpha * alpha * m.trace().norm_sqr();
        assert_relative_eq!(q, want, epsilon = 1e-9 * want.abs().max(1.0));
    }

    #[test]
    fn breakdown_terms_sum_to_the_form() {
        let m = wavy_matrix(vec![2, 2, 2], 9);
        let spec = FormSpec::new(vec![0, 1, 1], 3.0, 1.5, -0.21).unwrap();
        let terms = q_form_breakdown(&spec, &m).unwrap();
        assert_eq!(terms.len(), 8);
        let total: f64 = terms.iter().map(|t| t.value).sum();
        let q = q_form(&spec, &m).unwrap();
        assert_relative_eq!(total, q, epsilon = 1e-12 * q.abs().max(1.0));
    }

    #[test]
    fn reflection_identity() {
        let m = wavy_matrix(vec![2, 3], 11);
        for pattern in [[1u8, 1], [1, 0], [0, 1], [0, 0]] {
            let spec = FormSpec::new(pattern.to_vec(), 2.5, 2.0, 0.47).unwrap();
            let q_neg = q_form(&spec.with_alpha(-0.47), &m).unwrap();
            let q_reflected = q_form(&spec.with_alpha(-0.47).reflected(), &m).unwrap();
            assert_relative_eq!(q_neg, q_reflected, epsilon = 1e-10 * q_neg.abs().max(1.0));
        }
    }

    #[test]
    fn gamma_homogeneity() {
        let m = wavy_matrix(vec![2, 2], 5);
        for gamma in [1.0, 1.7, 2.0, 3.0] {
            let spec = FormSpec::new(vec![1, 1], 2.0, gamma, -0.3).unwrap();
            let q = q_form(&spec, &m).unwrap();
            let lambda = -2.3;
            let q_scaled = q_form(&spec, &m.scale(c(lambda, 0.0))).unwrap();
            assert_relative_eq!(
                q_scaled,
                lambda.abs().powf(gamma) * q,
                epsilon = 1e-9 * q_scaled.abs().max(1.0)
            );
        }
    }

    #[test]
    fn marginal_decomposition_with_dimension_weight() {
        // q_{(1,0)}(−1/d, C) splits into a pure-C part and a 1/d-weighted
        // part of the first marginal:
        //   [‖C‖² − (1/d)‖tr₁C‖²] + (1/d)[‖tr₂C‖² − (1/d)|tr C|²].
        for dims in [[2usize, 2], [2, 3], [3, 3]] {
            let m = wavy_matrix(dims.to_vec(), 13);
            let d = dims[0].max(dims[1]) as f64;
            let alpha = -1.0 / d;
            let q = q_form(&FormSpec::hs(vec![1, 0], alpha).unwrap(), &m).unwrap();
            let sq = |x: &MultipartiteMatrix| x.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>();
            let t1 = partial_trace(&m, &SubsystemSubset::from_members(2, &[1]).unwrap()).unwrap();
            let t2 = partial_trace(&m, &SubsystemSubset::from_members(2, &[2]).unwrap()).unwrap();
            let first = sq(&m) - sq(&t1) / d;
            let second = sq(&t2) - m.trace().norm_sqr() / d;
            assert_relative_eq!(
                q,
                first + second / d,
                epsilon = 1e-9 * q.abs().max(1.0)
            );
        }
    }

    #[test]
    fn form_rejects_arity_mismatch() {
        let m = wavy_matrix(vec![2, 2], 2);
        assert!(q_form(&FormSpec::q_n(3, 0.1).unwrap(), &m).is_err());
        assert!(FormSpec::new(vec![2, 0], 2.0, 2.0, 0.0).is_err());
        assert!(FormSpec::new(vec![1], 0.5, 2.0, 0.0).is_err());
        assert!(FormSpec::new(vec![1], 2.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn bipartite_inversion_example() {
        let a = ComplexVector::from_fn(4, |k, _| if k == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let q = inversion_q_bipartite(&a, 1, &[2, 2], false).unwrap();
        assert!(q.matrix.hermiticity_residual() <= 1e-12);
        let x = unit(4, 3); // e₁⊗e₁: only the ‖a‖²𝟙 term survives.
        assert_relative_eq!(q.expectation(&x).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn projected_inversion_annihilates_base_vector() {
        let a = wavy_vector(6, 3);
        let op = inversion_q_bipartite(&a, 2, &[2, 3], true).unwrap();
        let residual = op.matrix.apply(&a).unwrap();
        let norm: f64 = residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm <= 1e-10, "projected operator moved its base vector: {norm}");
        let a3 = wavy_vector(8, 5);
        for builder in [
            inversion_q_tripartite as fn(&ComplexVector, usize, &[usize], bool) -> Result<InversionOperator>,
            inversion_p_tripartite,
        ] {
            let op = builder(&a3, 3, &[2, 2, 2], true).unwrap();
            assert!(op.matrix.hermiticity_residual() <= 1e-12);
            let residual = op.matrix.apply(&a3).unwrap();
            let norm: f64 = residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(norm <= 1e-10);
        }
    }

    #[test]
    fn bipartite_inversion_spectrum_window() {
        for (r, dims) in [(2usize, vec![2usize, 2]), (3, vec![2, 3]), (4, vec![3, 3])] {
            let a = wavy_vector(dims.iter().product(), r);
            let norm_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            let op = inversion_q_bipartite(&a, r, &dims, true).unwrap();
            let eig = hermitian_eigenvalues(&op.matrix).unwrap();
            let rf = r as f64;
            let lo = -(1.0 / rf) * (1.0 - 1.0 / rf) * norm_sq;
            let hi = (1.0 / rf / rf) * norm_sq;
            assert!(eig[0] >= lo - 1e-9, "min {} below {}", eig[0], lo);
            assert!(*eig.last().unwrap() <= hi + 1e-9);
        }
    }

    #[test]
    fn zero_base_vector_is_vacuous() {
        let a = ComplexVector::zeros(4);
        let op = inversion_q_bipartite(&a, 2, &[2, 2], true).unwrap();
        assert!(op.vacuous);
        assert_eq!(op.matrix.max_entry_norm(), 0.0);
        assert!(inversion_q_bipartite(&a, 0, &[2, 2], false).is_err());
    }

    #[test]
    fn creation_maps_match_definitions() {
        let v = wavy_vector(3, 1);
        let w = wavy_vector(3, 2);
        let plus = creation_annihilation(&v, PairSymmetry::Symmetric);
        let made = &plus.creator * &w;
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for a in 0..3 {
            for b in 0..3 {
                let want = (v[a] * w[b] + w[a] * v[b]) * c(inv_sqrt2, 0.0);
                let got = made[a * 3 + b];
                assert_relative_eq!(got.re, want.re, epsilon = 1e-12);
                assert_relative_eq!(got.im, want.im, epsilon = 1e-12);
            }
        }
        let minus = creation_annihilation(&v, PairSymmetry::Antisymmetric);
        let self_wedge = &minus.creator * &v;
        assert!(self_wedge.iter().all(|z| z.norm() <= 1e-12));
        // Adjoint relation as matrices.
        assert_eq!(minus.annihilator, minus.creator.adjoint());
    }

    #[test]
    fn antisymmetric_creator_norm_is_vector_norm() {
        for d in [2usize, 4, 6] {
            let v = wavy_vector(d, d);
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let ops = creation_annihilation(&v, PairSymmetry::Antisymmetric);
            assert_relative_eq!(operator_norm(&ops.creator), norm, epsilon = 1e-10);
        }
    }

    #[test]
    fn marginal_identities_hold() {
        for dims in [[2usize, 2], [2, 3], [3, 3]] {
            let d = dims[0] * dims[1];
            let v = wavy_vector(d, 21);
            let w = wavy_vector(d, 22);
            let (anti, sym) = fermionic_bosonic_identity_residual(&v, &w, &dims).unwrap();
            assert!(anti <= 1e-10, "antisymmetric residual {anti} on {dims:?}");
            assert!(sym <= 1e-10, "symmetric residual {sym} on {dims:?}");
        }
    }

    #[test]
    fn kronecker_difference_examples() {
        for d in [2usize, 3] {
            let id = MultipartiteMatrix::identity(vec![d, d]).unwrap();
            assert!(kronecker_difference_norm(&id).unwrap() <= 1e-12);
        }
        let v = wavy_vector(6, 31);
        let w = wavy_vector(6, 32);
        let vnorm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let wnorm: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let cmat = MultipartiteMatrix::from_outer(vec![2, 3], &v, &w).unwrap();
        let val = kronecker_difference_norm(&cmat).unwrap();
        assert!(val <= vnorm * wnorm + 1e-10);
    }

    #[test]
    fn positivity_polynomial_examples() {
        assert_eq!(positivity_polynomial(&[1.5, 1.5, 1.5]), 0.0);
        assert_relative_eq!(positivity_polynomial(&[1.0, 0.0]), 1.0, epsilon = 1e-14);
        assert_relative_eq!(positivity_polynomial(&[3.0, 1.0, 2.0]), 6.0, epsilon = 1e-12);
        assert!(positivity_polynomial(&[-4.0, 7.0, 0.2, 1.1]) >= 0.0);
    }

    #[test]
    fn appendix_family_small_cases() {
        for d in [2usize, 3] {
            for eps in [0.1, 0.01] {
                let (_, q, closed) = appendix_counterexample(2, d, eps).unwrap();
                assert_relative_eq!(q, closed, epsilon = 1e-10 * closed.abs());
                assert_relative_eq!(q, -4.0 * eps, epsilon = 1e-10);
                assert!(q < 0.0);
            }
        }
        let (_, q4, closed4) = appendix_counterexample(4, 2, 0.1) .unwrap();
        let eps = 0.1;
        assert_relative_eq!(q4, closed4, epsilon = 1e-10 * closed4.abs());
        assert_relative_eq!(q4, -2.0 * eps - 8.0 * eps * eps * eps, epsilon = 1e-10);
        assert!(appendix_counterexample(3, 2, 0.1).is_err());
        assert!(appendix_counterexample(2, 1, 0.1).is_err());
        assert!(appendix_counterexample(2, 2, 0.0).is_err());
    }

    #[test]
    fn alternating_binomial_identity_examples() {
        let (lhs, rhs) = lemma_a1_sum(2, 0).unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(lhs, ExactRational::from_integer(0));
        let (lhs, rhs) = lemma_a1_sum(4, 1).unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(lhs, ExactRational::from_integer(-1));
        for n in (2..=12usize).step_by(2) {
            for m in (0..n).step_by(2) {
                let (lhs, rhs) = lemma_a1_sum(n, m).unwrap();
                assert_eq!(lhs, rhs, "mismatch at n={n}, m={m}");
                assert_eq!(lhs, ExactRational::from_integer(0));
            }
            for m in (1..n).step_by(2) {
                let (lhs, rhs) = lemma_a1_sum(n, m).unwrap();
                assert_eq!(lhs, rhs);
                assert!(lhs < ExactRational::from_integer(0));
            }
        }
        assert!(lemma_a1_sum(4, 4).is_err());
    }

    #[test]
    fn rank1_oracles_agree_with_the_form() {
        for dims in [[2usize, 2], [2, 3], [3, 3]] {
            let d = dims[0] * dims[1];
            let x = wavy_vector(d, 41);
            let y = wavy_vector(d, 42);
            let cmat = MultipartiteMatrix::from_outer(dims.to_vec(), &x, &y).unwrap();
            let q = q_form(&FormSpec::q_n(2, -1.0).unwrap(), &cmat).unwrap();
            let wedge_val = rank1_antisymmetric_value(&x, &y, &dims).unwrap();
            assert_relative_eq!(q, wedge_val, epsilon = 1e-9 * wedge_val.abs().max(1.0));
            assert!(wedge_val >= -1e-9);
            let flip_val = rank1_flip_value(&[1, 1], -1.0, &x, &y, &dims).unwrap();
            assert_relative_eq!(q, flip_val, epsilon = 1e-10 * flip_val.abs().max(1.0));
        }
    }

    #[test]
    fn rank1_flip_oracle_general_alpha_and_pattern() {
        let dims = [2usize, 2, 2];
        let x = wavy_vector(8, 51);
        let y = wavy_vector(8, 52);
        let cmat = MultipartiteMatrix::from_outer(dims.to_vec(), &x, &y).unwrap();
        for pattern in [[1u8, 1, 1], [0, 1, 1], [1, 0, 1], [0, 0, 0]] {
            for alpha in [-1.0, -0.5, 0.3] {
                let q = q_form(&FormSpec::hs(pattern.to_vec(), alpha).unwrap(), &cmat).unwrap();
                let flip_val = rank1_flip_value(&pattern, alpha, &x, &y, &dims).unwrap();
                assert_relative_eq!(q, flip_val, epsilon = 1e-9 * q.abs().max(1.0));
            }
        }
    }
}
