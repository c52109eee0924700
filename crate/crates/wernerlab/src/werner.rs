//! Werner states, their partial transposes, and the correspondence between
//! signed partial-trace forms and witness expectation values.
//!
//! The family is ρ_α = (𝟙 + αF)/(d² + αd) on ℂ^d ⊗ ℂ^d with F the flip.
//! Its partial transpose is (𝟙 + αd·P_Ω)/(d² + αd) with P_Ω the projector
//! onto the maximally entangled vector, and for an n-copy witness ψ the
//! expectation ⟨ψ, (ρ_α^{T₁})^{⊗n} ψ⟩ reproduces, up to the positive factor
//! (d²+αd)^n, the form q^(n)(α, C) of the matrix C whose factor pairs build
//! ψ. The builder conjugates the left factors: for C = Σ_i |x_i⟩⟨y_i| it
//! returns ψ_C = Σ_i conj(x_i) ⊗ y_i, which is what makes the ⟨Ω, ψ⟩ overlap
//! produce |tr C| rather than a bilinear expression.

use num_complex::Complex64;

use crate::error::{argument, Result};
use crate::forms::{q_form, FormSpec};
use crate::spectral::{hermitian_eigenvalues, matrix_numerical_rank};
use crate::tensorspace::{
    cut_matrix, flip, kron, partial_transpose, permute_vector_systems, ComplexMatrix,
    ComplexVector, MultipartiteMatrix, SubsystemSubset,
};

/// Local dimension and mixing weight of a Werner state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WernerParams {
    pub d: usize,
    pub alpha: f64,
}

impl WernerParams {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        if d < 2 {
            return Err(argument("local dimension must be ≥ 2"));
        }
        if !alpha.is_finite() || alpha.abs() > 1.0 {
            return Err(argument(format!("α = {alpha} must lie in [−1, 1]")));
        }
        let params = Self { d, alpha };
        // d ≥ 2 and |α| ≤ 1 make this strictly positive.
        assert!(params.normalization() > 0.0);
        Ok(params)
    }

    /// d² + αd, the trace of 𝟙 + αF.
    pub fn normalization(&self) -> f64 {
        let d = self.d as f64;
        d * d + self.alpha * d
    }
}

/// The normalized maximally entangled vector Ω = (1/√d) Σ_i e_i ⊗ e_i.
pub fn maximally_entangled_vector(d: usize) -> Result<ComplexVector> {
    if d < 2 {
        return Err(argument("local dimension must be ≥ 2"));
    }
    let mut omega = ComplexVector::zeros(d * d);
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    for i in 0..d {
        omega[i * d + i] = amp;
    }
    Ok(omega)
}

/// The rank-1 projector P_Ω onto the maximally entangled vector.
pub fn maximally_entangled_projector(d: usize) -> Result<MultipartiteMatrix> {
    let omega = maximally_entangled_vector(d)?;
    MultipartiteMatrix::from_outer(vec![d, d], &omega, &omega)
}

/// ρ_α = (𝟙 + αF)/(d² + αd) on dims [d, d].
pub fn werner_state(params: &WernerParams) -> Result<MultipartiteMatrix> {
    let id = MultipartiteMatrix::identity(vec![params.d, params.d])?;
    let f = flip(params.d)?;
    Ok((&id + &f.scale_re(params.alpha)).scale_re(1.0 / params.normalization()))
}

/// The partial transpose of ρ_α built analytically:
/// (𝟙 + αd·P_Ω)/(d² + αd). A test keeps this route and
/// `partial_transpose(werner_state(..))` in exact agreement.
pub fn per_copy_ppt_operator(params: &WernerParams) -> Result<MultipartiteMatrix> {
    let id = MultipartiteMatrix::identity(vec![params.d, params.d])?;
    let p = maximally_entangled_projector(params.d)?;
    Ok((&id + &p.scale_re(params.alpha * params.d as f64))
        .scale_re(1.0 / params.normalization()))
}

/// Minimum eigenvalue of ρ_α^{T₁}; strictly negative exactly when α < −1/d.
pub fn werner_ppt_min_eigenvalue(params: &WernerParams) -> Result<f64> {
    Ok(hermitian_eigenvalues(&per_copy_ppt_operator(params)?)?[0])
}

/// An n-copy witness on the interleaved ordering A₁B₁A₂B₂…AₙBₙ, every slot
/// of dimension d.
#[derive(Clone, Debug)]
pub struct WitnessVector {
    pub amplitudes: ComplexVector,
    /// Copy count n; the vector has 2n slots.
    pub n: usize,
    /// Local dimension of every slot.
    pub d: usize,
}

impl WitnessVector {
    pub fn new(amplitudes: ComplexVector, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d < 2 {
            return Err(argument("witness needs n ≥ 1 copies of local dimension ≥ 2"));
        }
        let expected = d.pow(2 * n as u32);
        if amplitudes.len() != expected {
            return Err(argument(format!(
                "witness on {n} copies of dimension {d} needs {expected} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(argument("witness amplitudes must be finite"));
        }
        Ok(Self { amplitudes, n, d })
    }

    pub fn dims(&self) -> Vec<usize> {
        vec![self.d; 2 * self.n]
    }

    /// The A-side of the declared cut: slots 1, 3, …, 2n−1.
    pub fn declared_cut(&self) -> SubsystemSubset {
        let members: Vec<usize> = (1..=self.n).map(|k| 2 * k - 1).collect();
        SubsystemSubset::from_members(2 * self.n, &members)
            .expect("odd slots of 2n systems form a valid subset")
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Schmidt rank at a bipartition: the numerical rank of the reshaped
/// coefficient matrix.
pub fn schmidt_rank(psi: &WitnessVector, cut: &SubsystemSubset) -> Result<usize> {
    let m = cut_matrix(&psi.amplitudes, &psi.dims(), cut)?;
    Ok(matrix_numerical_rank(&m, None).numerical_rank)
}

/// Builds the witness ψ_C = Σ_i conj(x_i) ⊗ y_i for any decomposition
/// C = Σ_i |x_i⟩⟨y_i|; the sum telescopes to ψ_C[a·D+b] = conj(C[a,b]),
/// independent of the decomposition, assembled block-wise on A…A,B…B and
/// then permuted to the interleaved ordering. ‖ψ_C‖² = ‖C‖₂² and the
/// Schmidt rank at the A|B cut equals the numerical rank of C, which is
/// enforced first by compressing C onto its retained right-singular
/// subspace (eigenbasis of C†C; the factored SVD misassembles some
/// rank-deficient complex inputs, the Gram route does not).
pub fn psi_from_matrix(c: &MultipartiteMatrix, rank_tol: Option<f64>) -> Result<WitnessVector> {
    let dims = c.dims();
    let d = dims[0];
    if dims.iter().any(|&di| di != d) {
        return Err(argument(
            "witness construction needs equal subsystem dimensions (pad first)",
        ));
    }
    if d < 2 {
        return Err(argument("local dimension must be ≥ 2"));
    }
    let n = dims.len();
    let total = c.total_dim();

    let profile = matrix_numerical_rank(c.matrix(), rank_tol);
    let retained = if profile.numerical_rank < total {
        let gram = c.matrix().adjoint() * c.matrix();
        let eigen = gram.symmetric_eigen();
        // Keep the eigenvectors whose σ = √λ clears the retention threshold;
        // λ can dip below zero by rounding.
        let mut order: Vec<usize> = (0..total).collect();
        order.sort_by(|&a, &b| {
            eigen.eigenvalues[b]
                .partial_cmp(&eigen.eigenvalues[a])
                .expect("eigenvalues are finite")
        });
        let mut projector = ComplexMatrix::zeros(total, total);
        for &i in order.iter().take(profile.numerical_rank) {
            let v = eigen.eigenvectors.column(i);
            projector.gerc(Complex64::new(1.0, 0.0), &v, &v, Complex64::new(1.0, 0.0));
        }
        c.matrix() * projector
    } else {
        c.matrix().clone()
    };

    let mut block = ComplexVector::zeros(total * total);
    for a in 0..total {
        for b in 0..total {
            block[a * total + b] = retained[(a, b)].conj();
        }
    }

    // A-block slot k → 2k−1, B-block slot n+k → 2k (1-based).
    let mut sigma_perm = vec![0usize; 2 * n];
    for k in 1..=n {
        sigma_perm[k - 1] = 2 * k - 1;
        sigma_perm[n + k - 1] = 2 * k;
    }
    let (interleaved, _) = permute_vector_systems(&block, &vec![d; 2 * n], &sigma_perm)?;
    WitnessVector::new(interleaved, n, d)
}

/// ⟨ψ, (ρ_{α₁}^{T₁} ⊗ … ⊗ ρ_{αₙ}^{T₁}) ψ⟩ with one parameter set per copy.
pub fn witness_value_mixed(psi: &WitnessVector, per_copy: &[WernerParams]) -> Result<f64> {
    if per_copy.len() != psi.n {
        return Err(argument(format!(
            "witness has {} copies, got {} parameter sets",
            psi.n,
            per_copy.len()
        )));
    }
    if per_copy.iter().any(|p| p.d != psi.d) {
        return Err(argument("witness and state local dimensions differ"));
    }
    // Copies act on adjacent interleaved slot pairs, so the n-copy operator
    // is a plain Kronecker product in copy order.
    let mut op = per_copy_ppt_operator(&per_copy[0])?;
    for params in &per_copy[1..] {
        op = kron(&op, &per_copy_ppt_operator(params)?)?;
    }
    let image = op.apply(&psi.amplitudes)?;
    Ok(psi.amplitudes.dotc(&image).re)
}

/// ⟨ψ, (ρ_α^{T₁})^{⊗n} ψ⟩ for a single parameter set on every copy.
pub fn witness_value(psi: &WitnessVector, params: &WernerParams) -> Result<f64> {
    witness_value_mixed(psi, &vec![*params; psi.n])
}

/// Evaluates both sides of the form/witness correspondence:
/// q^(n)(α, C) against (d²+αd)^n · ⟨ψ_C, (ρ_α^{T₁})^{⊗n} ψ_C⟩.
/// Returns (q value, scaled witness value, their ratio).
pub fn q_witness_equivalence(
    c: &MultipartiteMatrix,
    alpha: f64,
    n: usize,
    d: usize,
) -> Result<(f64, f64, f64)> {
    if c.n_subsystems() != n || c.dims().iter().any(|&di| di != d) {
        return Err(argument("operator does not live on n systems of dimension d"));
    }
    let params = WernerParams::new(d, alpha)?;
    let q = q_form(&FormSpec::q_n(n, alpha)?, c)?;
    let psi = psi_from_matrix(c, None)?;
    let scaled = witness_value(&psi, &params)? * params.normalization().powi(n as i32);
    let ratio = if q != 0.0 { scaled / q } else { f64::NAN };
    Ok((q, scaled, ratio))
}

/// Expectation values of a witness against the two opposite-sign copy pairs
/// (α = ±1/2), with the form values they rescale to.
#[derive(Clone, Copy, Debug)]
pub struct MixedSignReport {
    /// ⟨ψ_C, (ρ_{+1/2}^{T₁} ⊗ ρ_{−1/2}^{T₁}) ψ_C⟩.
    pub plus_minus_expectation: f64,
    /// q_{(0,1)}(−1/2, C); equals `scale · plus_minus_expectation`.
    pub q_01: f64,
    /// ⟨ψ_C, (ρ_{−1/2}^{T₁} ⊗ ρ_{+1/2}^{T₁}) ψ_C⟩.
    pub minus_plus_expectation: f64,
    /// q_{(1,0)}(−1/2, C); equals `scale · minus_plus_expectation`.
    pub q_10: f64,
    /// (d² + d/2)(d² − d/2).
    pub scale: f64,
}

/// Pairs each opposite-sign two-copy expectation with the signed form it
/// rescales to. The sign weight flips where the copy carries α = −1/2:
/// (+1/2, −1/2) matches the pattern (0,1) and (−1/2, +1/2) matches (1,0).
pub fn mixed_sign_expectations(c: &MultipartiteMatrix, d: usize) -> Result<MixedSignReport> {
    if c.n_subsystems() != 2 || c.dims() != [d, d] {
        return Err(argument("mixed-sign check needs a two-system operator on [d, d]"));
    }
    let plus = WernerParams::new(d, 0.5)?;
    let minus = WernerParams::new(d, -0.5)?;
    let psi = psi_from_matrix(c, None)?;
    let plus_minus = witness_value_mixed(&psi, &[plus, minus])?;
    let minus_plus = witness_value_mixed(&psi, &[minus, plus])?;
    let q_01 = q_form(&FormSpec::hs(vec![0, 1], -0.5)?, c)?;
    let q_10 = q_form(&FormSpec::hs(vec![1, 0], -0.5)?, c)?;
    Ok(MixedSignReport {
        plus_minus_expectation: plus_minus,
        q_01,
        minus_plus_expectation: minus_plus,
        q_10,
        scale: plus.normalization() * minus.normalization(),
    })
}

/// Dual-route consistency residual: max entry difference between the
/// analytic per-copy operator and the transposed state.
pub fn ppt_route_residual(params: &WernerParams) -> Result<f64> {
    let direct = per_copy_ppt_operator(params)?;
    let via_transpose = partial_transpose(
        &werner_state(params)?,
        &SubsystemSubset::from_members(2, &[1])?,
    )?;
    Ok((&direct - &via_transpose).max_entry_norm())
}
