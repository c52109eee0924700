//! Dense multipartite operators with a fixed mixed-radix basis convention.
//!
//! A [`MultipartiteMatrix`] is a square complex matrix together with the list
//! of subsystem dimensions `[d_1, ..., d_n]`. Basis index `b` of the composite
//! space is associated row-major with the tuple `(i_1, ..., i_n)`, subsystem 1
//! being the most significant digit:
//!
//! ```text
//! b = ((i_1 · d_2 + i_2) · d_3 + i_3) · ... + i_n
//! ```
//!
//! Every operation in this module (Kronecker products, partial traces and
//! transposes, flips, permutations, embeddings) is defined relative to this
//! convention. Partial traces are computed by direct index contraction; the
//! total dimension is capped so the dense loops stay tractable.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::error::{argument, size, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Largest admitted total dimension D = Π d_i for freshly built operators.
pub const DIM_CAP: usize = 4096;

/// Largest admitted subsystem count (subsets are stored as bit masks).
pub const MAX_SUBSYSTEMS: usize = 64;

/// A subset of the subsystems `{1, ..., n}`, using 1-based indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SubsystemSubset {
    n: usize,
    mask: u64,
}

impl SubsystemSubset {
    /// The empty subset of an `n`-partite system.
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_SUBSYSTEMS {
            return Err(argument(format!("subsystem count {n} out of range")));
        }
        Ok(Self { n, mask: 0 })
    }

    /// The full subset `{1, ..., n}`.
    pub fn full(n: usize) -> Result<Self> {
        let mut s = Self::empty(n)?;
        s.mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Ok(s)
    }

    /// Builds a subset from 1-based member indices. Duplicates collapse.
    pub fn from_members(n: usize, members: &[usize]) -> Result<Self> {
        let mut s = Self::empty(n)?;
        for &k in members {
            if k == 0 || k > n {
                return Err(argument(format!("subsystem index {k} not in 1..={n}")));
            }
            s.mask |= 1u64 << (k - 1);
        }
        Ok(s)
    }

    /// Total subsystem count `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.n
    }

    /// Membership test for a 1-based index.
    pub fn contains(&self, k: usize) -> bool {
        k >= 1 && k <= self.n && (self.mask >> (k - 1)) & 1 == 1
    }

    /// Members as ascending 1-based indices.
    pub fn members(&self) -> Vec<usize> {
        (1..=self.n).filter(|&k| self.contains(k)).collect()
    }

    /// Members as ascending 0-based slot positions.
    pub(crate) fn slots(&self) -> Vec<usize> {
        (0..self.n).filter(|&k| (self.mask >> k) & 1 == 1).collect()
    }

    /// The complement `{1..n} \ self`.
    pub fn complement(&self) -> Self {
        let full = if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        };
        Self {
            n: self.n,
            mask: full & !self.mask,
        }
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.n == other.n && self.mask & other.mask == 0
    }

    /// Set union; both subsets must refer to the same subsystem count.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(argument("subset union across different system counts"));
        }
        Ok(Self {
            n: self.n,
            mask: self.mask | other.mask,
        })
    }

    /// All `2^n` subsets in mask order (empty set first, full set last).
    pub fn all_subsets(n: usize) -> Result<Vec<Self>> {
        if n == 0 || n > 20 {
            return Err(argument(format!(
                "subset enumeration supported for 1..=20 subsystems, got {n}"
            )));
        }
        Ok((0..(1u64 << n)).map(|mask| Self { n, mask }).collect())
    }
}

impl fmt::Display for SubsystemSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for k in self.members() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
            first = false;
        }
        write!(f, "}}")
    }
}

/// Mixed-radix strides: `strides[k] = d_{k+2} · ... · d_n` (0-based slots).
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn checked_product(dims: &[usize]) -> Result<usize> {
    let mut d: usize = 1;
    for &di in dims {
        d = d
            .checked_mul(di)
            .ok_or_else(|| size("dimension product overflows usize"))?;
    }
    Ok(d)
}

fn validate_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(argument("dims must be non-empty"));
    }
    if dims.len() > MAX_SUBSYSTEMS {
        return Err(argument(format!(
            "at most {MAX_SUBSYSTEMS} subsystems supported"
        )));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(argument("every subsystem dimension must be ≥ 1"));
    }
    checked_product(dims)
}

/// A square complex operator on `ℂ^{d_1} ⊗ ... ⊗ ℂ^{d_n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultipartiteMatrix {
    dims: Vec<usize>,
    entries: ComplexMatrix,
}

impl MultipartiteMatrix {
    /// Wraps an explicit matrix, validating shape and finiteness.
    pub fn new(dims: Vec<usize>, entries: ComplexMatrix) -> Result<Self> {
        let d = validate_dims(&dims)?;
        if entries.nrows() != d || entries.ncols() != d {
            return Err(size(format!(
                "entries are {}×{}, expected {d}×{d} from dims {:?}",
                entries.nrows(),
                entries.ncols(),
                dims
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(argument("entries must be finite (no NaN/Inf)"));
        }
        Ok(Self { dims, entries })
    }

    /// The zero operator.
    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let d = validate_dims(&dims)?;
        Ok(Self {
            dims,
            entries: ComplexMatrix::zeros(d, d),
        })
    }

    /// The identity operator.
    pub fn identity(dims: Vec<usize>) -> Result<Self> {
        let d = validate_dims(&dims)?;
        Ok(Self {
            dims,
            entries: ComplexMatrix::identity(d, d),
        })
    }

    /// Builds entries from a closure over (row, col) basis indices.
    pub fn from_fn(dims: Vec<usize>, f: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        let d = validate_dims(&dims)?;
        Self::new(dims, ComplexMatrix::from_fn(d, d, f))
    }

    /// The rank-1 operator `|x⟩⟨y|` on the given dims.
    pub fn from_outer(dims: Vec<usize>, x: &ComplexVector, y: &ComplexVector) -> Result<Self> {
        let d = validate_dims(&dims)?;
        if x.len() != d || y.len() != d {
            return Err(size(format!(
                "outer-product factors have lengths {} and {}, expected {d}",
                x.len(),
                y.len()
            )));
        }
        Ok(Self {
            dims,
            entries: x * y.adjoint(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_subsystems(&self) -> usize {
        self.dims.len()
    }

    /// Total dimension `D = Π d_i`.
    pub fn total_dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.diagonal().sum()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            entries: self.entries.adjoint(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            dims: self.dims.clone(),
            entries: &self.entries * factor,
        }
    }

    pub fn scale_re(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Hermiticity residual `max |M - M†|` over entries.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.total_dim() {
            for c in 0..=r {
                let delta = (self.entries[(r, c)] - self.entries[(c, r)].conj()).norm();
                worst = worst.max(delta);
            }
        }
        worst
    }

    /// Matrix-vector application.
    pub fn apply(&self, v: &ComplexVector) -> Result<ComplexVector> {
        if v.len() != self.total_dim() {
            return Err(size("vector length does not match operator dimension"));
        }
        Ok(&self.entries * v)
    }

    /// Largest entry magnitude; used for scale-relative tolerances.
    pub fn max_entry_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Add for &MultipartiteMatrix {
    type Output = MultipartiteMatrix;
    fn add(self, rhs: &MultipartiteMatrix) -> MultipartiteMatrix {
        assert_eq!(self.dims, rhs.dims, "operator addition across unequal dims");
        MultipartiteMatrix {
            dims: self.dims.clone(),
            entries: &self.entries + &rhs.entries,
        }
    }
}

impl std::ops::Sub for &MultipartiteMatrix {
    type Output = MultipartiteMatrix;
    fn sub(self, rhs: &MultipartiteMatrix) -> MultipartiteMatrix {
        assert_eq!(self.dims, rhs.dims, "operator subtraction across unequal dims");
        MultipartiteMatrix {
            dims: self.dims.clone(),
            entries: &self.entries - &rhs.entries,
        }
    }
}

impl std::ops::Mul for &MultipartiteMatrix {
    type Output = MultipartiteMatrix;
    fn mul(self, rhs: &MultipartiteMatrix) -> MultipartiteMatrix {
        assert_eq!(self.dims, rhs.dims, "operator product across unequal dims");
        MultipartiteMatrix {
            dims: self.dims.clone(),
            entries: &self.entries * &rhs.entries,
        }
    }
}

/// Kronecker product; result dims are `A.dims ++ B.dims`.
pub fn kron(a: &MultipartiteMatrix, b: &MultipartiteMatrix) -> Result<MultipartiteMatrix> {
    let d = a
        .total_dim()
        .checked_mul(b.total_dim())
        .ok_or_else(|| size("Kronecker dimension overflows usize"))?;
    if d > DIM_CAP {
        return Err(size(format!(
            "Kronecker product dimension {d} exceeds cap {DIM_CAP}"
        )));
    }
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    Ok(MultipartiteMatrix {
        dims,
        entries: a.entries.kronecker(&b.entries),
    })
}

/// Offset tables for a subset of slots: `offsets[m]` is the contribution of
/// the m-th mixed-radix tuple over `slots` to a full basis index.
fn subset_offsets(dims: &[usize], slots: &[usize]) -> Vec<usize> {
    let s = strides(dims);
    let sub_dims: Vec<usize> = slots.iter().map(|&k| dims[k]).collect();
    let count: usize = sub_dims.iter().product();
    let mut offsets = vec![0usize; count];
    for (m, off) in offsets.iter_mut().enumerate() {
        let mut rem = m;
        let mut acc = 0usize;
        for t in (0..slots.len()).rev() {
            let digit = rem % sub_dims[t];
            rem /= sub_dims[t];
            acc += digit * s[slots[t]];
        }
        *off = acc;
    }
    offsets
}

/// Partial trace over the subsystems in `subset`.
///
/// Result dims are the kept dims in order; tracing every subsystem yields a
/// 1×1 matrix (dims `[1]`) holding the full trace.
pub fn partial_trace(
    c: &MultipartiteMatrix,
    subset: &SubsystemSubset,
) -> Result<MultipartiteMatrix> {
    if subset.n() != c.n_subsystems() {
        return Err(argument(format!(
            "subset is over {} subsystems, operator has {}",
            subset.n(),
            c.n_subsystems()
        )));
    }
    if subset.is_empty() {
        return Ok(c.clone());
    }
    let traced = subset.slots();
    let kept = subset.complement().slots();
    let off_j = subset_offsets(&c.dims, &traced);
    let off_k = subset_offsets(&c.dims, &kept);
    let dk = off_k.len();
    let mut out = ComplexMatrix::zeros(dk, dk);
    for (mr, &or) in off_k.iter().enumerate() {
        for (mc, &oc) in off_k.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &oj in &off_j {
                acc += c.entries[(or + oj, oc + oj)];
            }
            out[(mr, mc)] = acc;
        }
    }
    let out_dims: Vec<usize> = if kept.is_empty() {
        vec![1]
    } else {
        kept.iter().map(|&k| c.dims[k]).collect()
    };
    MultipartiteMatrix::new(out_dims, out)
}

/// Per-index offset split: for each basis index `b`, the contribution of the
/// `subset` digits (`in_part`) so that `b = in_part[b] + (b - in_part[b])`.
fn index_split(dims: &[usize], subset_slots: &[usize]) -> Vec<usize> {
    let s = strides(dims);
    let d: usize = dims.iter().product();
    let mut part = vec![0usize; d];
    for (b, p) in part.iter_mut().enumerate() {
        let mut acc = 0usize;
        for &k in subset_slots {
            let digit = (b / s[k]) % dims[k];
            acc += digit * s[k];
        }
        *p = acc;
    }
    part
}

/// Partial transpose on the subsystems in `subset`.
pub fn partial_transpose(
    c: &MultipartiteMatrix,
    subset: &SubsystemSubset,
) -> Result<MultipartiteMatrix> {
    if subset.n() != c.n_subsystems() {
        return Err(argument(format!(
            "subset is over {} subsystems, operator has {}",
            subset.n(),
            c.n_subsystems()
        )));
    }
    let d = c.total_dim();
    let oj = index_split(&c.dims, &subset.slots());
    let mut out = ComplexMatrix::zeros(d, d);
    for r in 0..d {
        let rk = r - oj[r];
        for col in 0..d {
            let ck = col - oj[col];
            out[(r, col)] = c.entries[(oj[col] + rk, oj[r] + ck)];
        }
    }
    MultipartiteMatrix::new(c.dims.clone(), out)
}

/// The flip (swap) operator `F` on `ℂ^d ⊗ ℂ^d`: `F(x⊗y) = y⊗x`.
pub fn flip(d: usize) -> Result<MultipartiteMatrix> {
    flip_pair(&[d, d], 1, 2)
}

/// The operator exchanging tensor slots `i` and `j` (1-based) of `dims`.
pub fn flip_pair(dims: &[usize], i: usize, j: usize) -> Result<MultipartiteMatrix> {
    let n = dims.len();
    let d = validate_dims(dims)?;
    if d > DIM_CAP {
        return Err(size(format!("dimension {d} exceeds cap {DIM_CAP}")));
    }
    if i == 0 || j == 0 || i > n || j > n || i == j {
        return Err(argument(format!("slots ({i},{j}) invalid for {n} subsystems")));
    }
    if dims[i - 1] != dims[j - 1] {
        return Err(argument(format!(
            "cannot exchange slots of dimensions {} and {}",
            dims[i - 1],
            dims[j - 1]
        )));
    }
    let s = strides(dims);
    let (si, sj) = (s[i - 1], s[j - 1]);
    let (di, dj) = (dims[i - 1], dims[j - 1]);
    let mut out = ComplexMatrix::zeros(d, d);
    for b in 0..d {
        let xi = (b / si) % di;
        let xj = (b / sj) % dj;
        let swapped = b - xi * si - xj * sj + xj * si + xi * sj;
        out[(swapped, b)] = Complex64::new(1.0, 0.0);
    }
    MultipartiteMatrix::new(dims.to_vec(), out)
}

/// Relabels subsystems: input subsystem `i` becomes output subsystem
/// `sigma[i-1]` (both 1-based). `sigma` must be a permutation of `1..=n`.
pub fn permute_systems(c: &MultipartiteMatrix, sigma: &[usize]) -> Result<MultipartiteMatrix> {
    let n = c.n_subsystems();
    if sigma.len() != n {
        return Err(argument(format!(
            "permutation has length {}, expected {n}",
            sigma.len()
        )));
    }
    let mut seen = vec![false; n];
    for &img in sigma {
        if img == 0 || img > n || seen[img - 1] {
            return Err(argument("sigma is not a permutation of 1..=n"));
        }
        seen[img - 1] = true;
    }
    let mut out_dims = vec![0usize; n];
    for (i, &img) in sigma.iter().enumerate() {
        out_dims[img - 1] = c.dims[i];
    }
    let s_in = strides(&c.dims);
    let s_out = strides(&out_dims);
    let d = c.total_dim();
    let mut map = vec![0usize; d];
    for (b, slot) in map.iter_mut().enumerate() {
        let mut acc = 0usize;
        for i in 0..n {
            let digit = (b / s_in[i]) % c.dims[i];
            acc += digit * s_out[sigma[i] - 1];
        }
        *slot = acc;
    }
    let mut out = ComplexMatrix::zeros(d, d);
    for r in 0..d {
        for col in 0..d {
            out[(map[r], map[col])] = c.entries[(r, col)];
        }
    }
    MultipartiteMatrix::new(out_dims, out)
}

/// Relabels the subsystems of a state vector; `sigma` as in
/// [`permute_systems`]. Returns the permuted vector and the new dims.
pub fn permute_vector_systems(
    v: &ComplexVector,
    dims: &[usize],
    sigma: &[usize],
) -> Result<(ComplexVector, Vec<usize>)> {
    let n = dims.len();
    let d = validate_dims(dims)?;
    if v.len() != d {
        return Err(size("vector length does not match dims"));
    }
    if sigma.len() != n {
        return Err(argument(format!(
            "permutation has length {}, expected {n}",
            sigma.len()
        )));
    }
    let mut seen = vec![false; n];
    for &img in sigma {
        if img == 0 || img > n || seen[img - 1] {
            return Err(argument("sigma is not a permutation of 1..=n"));
        }
        seen[img - 1] = true;
    }
    let mut out_dims = vec![0usize; n];
    for (i, &img) in sigma.iter().enumerate() {
        out_dims[img - 1] = dims[i];
    }
    let s_in = strides(dims);
    let s_out = strides(&out_dims);
    let mut out = ComplexVector::zeros(d);
    for b in 0..d {
        let mut target = 0usize;
        for i in 0..n {
            target += ((b / s_in[i]) % dims[i]) * s_out[sigma[i] - 1];
        }
        out[target] = v[b];
    }
    Ok((out, out_dims))
}

/// Reshapes a state vector into the coefficient matrix of a bipartition:
/// rows are indexed by the `left` subsystems' digits, columns by the rest.
/// Its singular values are the Schmidt coefficients at that cut.
pub fn cut_matrix(
    v: &ComplexVector,
    dims: &[usize],
    left: &SubsystemSubset,
) -> Result<ComplexMatrix> {
    let d = validate_dims(dims)?;
    if v.len() != d {
        return Err(size("vector length does not match dims"));
    }
    if left.n() != dims.len() {
        return Err(argument("cut refers to a different subsystem count"));
    }
    if left.is_empty() || left.is_full() {
        return Err(argument("cut must have subsystems on both sides"));
    }
    let off_l = subset_offsets(dims, &left.slots());
    let off_r = subset_offsets(dims, &left.complement().slots());
    let mut out = ComplexMatrix::zeros(off_l.len(), off_r.len());
    for (r, &ol) in off_l.iter().enumerate() {
        for (c, &or) in off_r.iter().enumerate() {
            out[(r, c)] = v[ol + or];
        }
    }
    Ok(out)
}

/// Embeds `C` as the top-left block of a larger space, subsystem by
/// subsystem. Zero padding preserves every Schatten norm, every partial-trace
/// norm, and the trace.
pub fn pad_embed(c: &MultipartiteMatrix, target_dims: &[usize]) -> Result<MultipartiteMatrix> {
    if target_dims.len() != c.n_subsystems() {
        return Err(argument(format!(
            "target has {} subsystems, operator has {}",
            target_dims.len(),
            c.n_subsystems()
        )));
    }
    for (k, (&t, &d)) in target_dims.iter().zip(c.dims.iter()).enumerate() {
        if t < d {
            return Err(argument(format!(
                "target dim {t} shrinks subsystem {} of dim {d}",
                k + 1
            )));
        }
    }
    let dt = validate_dims(target_dims)?;
    let s_in = strides(&c.dims);
    let s_out = strides(target_dims);
    let d = c.total_dim();
    let n = c.n_subsystems();
    let mut map = vec![0usize; d];
    for (b, slot) in map.iter_mut().enumerate() {
        let mut acc = 0usize;
        for k in 0..n {
            acc += ((b / s_in[k]) % c.dims[k]) * s_out[k];
        }
        *slot = acc;
    }
    let mut out = ComplexMatrix::zeros(dt, dt);
    for r in 0..d {
        for col in 0..d {
            out[(map[r], map[col])] = c.entries[(r, col)];
        }
    }
    MultipartiteMatrix::new(target_dims.to_vec(), out)
}

/// Places `m` on the complement slots and the identity on `identity_slots`,
/// keeping every slot at its original position. This is the adjoint of
/// [`partial_trace`] with respect to the Hilbert-Schmidt pairing.
pub fn embed_with_identity(
    m: &MultipartiteMatrix,
    full_dims: &[usize],
    identity_slots: &SubsystemSubset,
) -> Result<MultipartiteMatrix> {
    let n = full_dims.len();
    if identity_slots.n() != n {
        return Err(argument("identity slots refer to a different system count"));
    }
    let d = validate_dims(full_dims)?;
    let id_slots = identity_slots.slots();
    let kept = identity_slots.complement().slots();
    let kept_dims: Vec<usize> = kept.iter().map(|&k| full_dims[k]).collect();
    let expected: Vec<usize> = if kept_dims.is_empty() { vec![1] } else { kept_dims };
    if m.dims() != expected.as_slice() {
        return Err(argument(format!(
            "embedded operator has dims {:?}, expected {:?}",
            m.dims(),
            expected
        )));
    }
    let off_i = subset_offsets(full_dims, &id_slots);
    let off_k = subset_offsets(full_dims, &kept);
    let mut out = ComplexMatrix::zeros(d, d);
    for (mr, &or) in off_k.iter().enumerate() {
        for (mc, &oc) in off_k.iter().enumerate() {
            let v = m.entries[(mr, mc)];
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            for &oi in &off_i {
                out[(or + oi, oc + oi)] = v;
            }
        }
    }
    MultipartiteMatrix::new(full_dims.to_vec(), out)
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dims: Vec<usize>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl MultipartiteMatrix {
    /// Serializes to the JSON schema `{"dims":[...],"re":[[...]],"im":[[...]]}`
    /// with row-major 2-D arrays.
    pub fn to_json(&self) -> String {
        let d = self.total_dim();
        let row = |r: usize, pick: fn(&Complex64) -> f64| -> Vec<f64> {
            (0..d).map(|c| pick(&self.entries[(r, c)])).collect()
        };
        let doc = MatrixJson {
            dims: self.dims.clone(),
            re: (0..d).map(|r| row(r, |z| z.re)).collect(),
            im: (0..d).map(|r| row(r, |z| z.im)).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("matrix JSON serialization cannot fail")
    }

    /// Parses the JSON schema produced by [`MultipartiteMatrix::to_json`].
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: MatrixJson = serde_json::from_str(text)?;
        let d = validate_dims(&doc.dims)?;
        if doc.re.len() != d || doc.im.len() != d {
            return Err(size(format!(
                "JSON matrix has {} rows of re and {} of im, expected {d}",
                doc.re.len(),
                doc.im.len()
            )));
        }
        let mut entries = ComplexMatrix::zeros(d, d);
        for r in 0..d {
            if doc.re[r].len() != d || doc.im[r].len() != d {
                return Err(size(format!("JSON matrix row {r} has wrong length")));
            }
            for c in 0..d {
                entries[(r, c)] = Complex64::new(doc.re[r][c], doc.im[r][c]);
            }
        }
        Self::new(doc.dims, entries)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Serializes a vector as a 1-column matrix in the same JSON schema.
pub fn vector_to_json(v: &ComplexVector, dims: &[usize]) -> Result<String> {
    let d = validate_dims(dims)?;
    if v.len() != d {
        return Err(size(format!(
            "vector has length {}, dims {:?} give {d}",
            v.len(),
            dims
        )));
    }
    let doc = MatrixJson {
        dims: dims.to_vec(),
        re: v.iter().map(|z| vec![z.re]).collect(),
        im: v.iter().map(|z| vec![z.im]).collect(),
    };
    Ok(serde_json::to_string_pretty(&doc).expect("vector JSON serialization cannot fail"))
}

/// Parses a vector stored as a 1-column matrix.
pub fn vector_from_json_str(text: &str) -> Result<(ComplexVector, Vec<usize>)> {
    let doc: MatrixJson = serde_json::from_str(text)?;
    let d = validate_dims(&doc.dims)?;
    if doc.re.len() != d || doc.im.len() != d {
        return Err(size("JSON vector has wrong row count"));
    }
    let mut v = ComplexVector::zeros(d);
    for r in 0..d {
        if doc.re[r].len() != 1 || doc.im[r].len() != 1 {
            return Err(size("JSON vector rows must have exactly one column"));
        }
        v[r] = Complex64::new(doc.re[r][0], doc.im[r][0]);
        if !v[r].re.is_finite() || !v[r].im.is_finite() {
            return Err(argument("vector entries must be finite"));
        }
    }
    Ok((v, doc.dims))
}
