//! Named verification suites behind the `verify` command.
//!
//! Each suite bundles the randomized checks for one cluster of results:
//! closed-form anchors are checked exactly, inequalities are checked on
//! seeded ensembles with a small additive slack, and every check reports its
//! trial count, failure count and worst observed margin.  A margin is the
//! signed slack of the tested inequality (tolerance included), so any
//! negative margin is a failure and the worst margin says how close the run
//! came to one.
//!
//! All randomness is derived from the configured seed; suites are
//! deterministic and safe to re-run bit-for-bit.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{argument, Result};
use crate::forms::{
    appendix_counterexample, creation_annihilation, fermionic_bosonic_identity_residual,
    inversion_p_tripartite, inversion_q_bipartite, inversion_q_tripartite,
    kronecker_difference_norm, lemma_a1_sum, q_form, rank1_antisymmetric_value, rank1_flip_value,
    FormSpec, PairSymmetry,
};
use crate::search::{derive_seed, random_matrix, random_vector, EnsembleKind, Field};
use crate::spectral::{hermitian_eigenvalues, operator_norm, schatten_norm};
use crate::tensorspace::{partial_trace, ComplexVector, MultipartiteMatrix, SubsystemSubset};
use crate::werner::{
    mixed_sign_expectations, ppt_route_residual, psi_from_matrix, q_witness_equivalence,
    witness_value, WernerParams, WitnessVector,
};

/// Default seed for suites and CLI runs.
pub const DEFAULT_SEED: u64 = 7;

/// Default trial count per randomized check.
pub const DEFAULT_TRIALS: usize = 200;

/// All recognized suite names.
pub const SUITE_NAMES: &[&str] = &[
    "rank1",
    "cor33",
    "thm45",
    "tripartite",
    "spectral-bounds",
    "creation-annihilation",
    "werner-equivalence",
    "appendix",
    "lemma-a1",
];

/// Knobs shared by every suite.  `n_max` only affects `lemma-a1`, which is a
/// deterministic grid rather than a sampled ensemble.
#[derive(Clone, Copy, Debug)]
pub struct SuiteConfig {
    pub trials: usize,
    pub seed: u64,
    pub n_max: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            n_max: 12,
        }
    }
}

/// Aggregated result of one named check inside a suite.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Smallest slack observed across all recorded margins; negative values
    /// are violations.
    pub worst_margin: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Result of a whole suite run.
#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    /// Plain-text rendering: one line per check plus a verdict line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for check in &self.checks {
            out.push_str(&format!(
                "  [{}] {:<34} checks {:>5}  failures {:>3}  worst margin {:+.3e}\n",
                if check.passed() { "PASS" } else { "FAIL" },
                check.name,
                check.trials,
                check.failures,
                check.worst_margin,
            ));
        }
        out.push_str(&format!(
            "suite {}: {} (seed {})\n",
            self.suite,
            if self.passed() { "PASS" } else { "FAIL" },
            self.seed,
        ));
        out
    }
}

// Margin accumulator: one instance per named check.
struct Margins {
    name: &'static str,
    trials: usize,
    failures: usize,
    worst: f64,
}

impl Margins {
    fn new(name: &'static str) -> Self {
        Margins {
            name,
            trials: 0,
            failures: 0,
            worst: f64::INFINITY,
        }
    }

    fn record(&mut self, margin: f64) {
        self.trials += 1;
        // NaN margins count as failures and poison worst via the comparison.
        if !(margin >= 0.0) {
            self.failures += 1;
        }
        if margin.is_nan() {
            self.worst = f64::NAN;
        } else if margin < self.worst {
            self.worst = margin;
        }
    }

    fn record_bool(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { -1.0 });
    }

    fn done(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name,
            trials: self.trials,
            failures: self.failures,
            worst_margin: if self.worst == f64::INFINITY {
                0.0
            } else {
                self.worst
            },
        }
    }
}

fn rng_for(config: &SuiteConfig, check: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(config.seed, check), trial as u64))
}

fn unit(v: ComplexVector) -> ComplexVector {
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

fn orthonormal_pair(
    d: usize,
    field: Field,
    rng: &mut ChaCha8Rng,
) -> (ComplexVector, ComplexVector) {
    let a = unit(random_vector(d, field, rng));
    loop {
        let raw = random_vector(d, field, rng);
        let overlap = a.dotc(&raw);
        let b = raw - &a * overlap;
        if b.norm() > 1e-6 {
            return (a.clone(), unit(b));
        }
    }
}

// Unit Hilbert-Schmidt normalization; every form here is homogeneous, so
// positivity checks lose nothing and the absolute tolerances become
// meaningful.
fn hs_normalized(c: &MultipartiteMatrix) -> Result<MultipartiteMatrix> {
    let norm = schatten_norm(c, 2.0)?;
    if norm < 1e-12 {
        return Err(argument("cannot normalize a numerically zero matrix"));
    }
    Ok(c.scale_re(1.0 / norm))
}

fn marginal_norm_sq(c: &MultipartiteMatrix, subsystem: usize) -> Result<f64> {
    let subset = SubsystemSubset::from_members(c.n_subsystems(), &[subsystem])?;
    let t = partial_trace(c, &subset)?;
    let n = schatten_norm(&t, 2.0)?;
    Ok(n * n)
}

/// Runs the named suite.  Unknown names are an argument error (the CLI maps
/// that to its usage exit code).
pub fn run_suite(name: &str, config: &SuiteConfig) -> Result<SuiteReport> {
    let checks = match name {
        "rank1" => suite_rank1(config)?,
        "cor33" => suite_cor33(config)?,
        "thm45" => suite_thm45(config)?,
        "tripartite" => suite_tripartite(config)?,
        "spectral-bounds" => suite_spectral_bounds(config)?,
        "creation-annihilation" => suite_creation_annihilation(config)?,
        "werner-equivalence" => suite_werner_equivalence(config)?,
        "appendix" => suite_appendix(config)?,
        "lemma-a1" => suite_lemma_a1(config)?,
        other => return Err(argument(format!("unknown suite '{other}'"))),
    };
    Ok(SuiteReport {
        suite: name.to_string(),
        seed: config.seed,
        checks,
    })
}

// Rank-1 positivity at the endpoint alpha = -1, its antisymmetrized closed
// form, the flip-operator reformulation, the three-system variant, and the
// just-outside-the-interval counterexample.
fn suite_rank1(config: &SuiteConfig) -> Result<Vec<CheckOutcome>> {
    let dims_cycle: [&[usize]; 4] = [&[2, 2], &[2, 3], &[3, 3], &[4, 4]];
    let mut floor = Margins::new("two_copy_floor_at_minus_one");
    let mut wedge = Margins::new("antisymmetrized_closed_form");
    let mut flip = Margins::new("flip_reformulation");
    let mut three = Margins::new("three_copy_floor");
    let mut outside = Margins::new("outside_interval_anchor");
    let spec2 = FormSpec::hs(vec![1, 1], -1.0)?;
    let spec3 = FormSpec::hs(vec![1, 1, 1], -1.0)?;
    for trial in 0..config.trials {
        let dims = dims_cycle[trial % dims_cycle.len()];
        let total: usize = dims.iter().product();
        let mut rng = rng_for(config, 0, trial);
        let x = unit(random_vector(total, Field::Complex, &mut rng));
        let y = unit(random_vector(total, Field::Complex, &mut rng));
        let c = MultipartiteMatrix::from_outer(dims.to_vec(), &x, &y)?;
        let q = q_form(&spec2, &c)?;
        floor.record(q + 1e-9);
        let closed = rank1_antisymmetric_value(&x, &y, dims)?;
        wedge.record(1e-9 * q.abs().max(1.0) - (q - closed).abs());
        let flipped = rank1_flip_value(&[1, 1], -1.0, &x, &y, dims)?;
        flip.record(1e-10 * q.abs().max(1.0) - (q - flipped).abs());

        let x3 = unit(random_vector(8, Field::Complex, &mut rng));
        let y3 = unit(random_vector(8, Field::Complex, &mut rng));
        let c3 = MultipartiteMatrix::from_outer(vec![2, 2, 2], &x3, &y3)?;
        three.record(q_form(&spec3, &c3)? + 1e-9);

        // C = |u><u| (x) |v><w| with unit u, v, w and v orthogonal to w has
        // q exactly -eps at alpha = -1 - eps.
        let eps = if trial % 2 == 0 { 0.1 } else { 0.01 };
        let u = unit(random_vector(dims[0], Field::Complex, &mut rng));
        let (v, w) = orthonormal_pair(dims[1], Field::Complex, &mut rng);
        let left = u.kronecker(&v);
        let right = u.kronecker(&w);
        let counter = MultipartiteMatrix::from_outer(dims.to_vec(), &left, &right)?;
        let q_out = q_form(&FormSpec::hs(vec![1, 1], -1.0 - eps)?, &counter)?;
        outside.record(1e-12 - (q_out + eps).abs());
    }
    Ok(vec![
        floor.done(),
        wedge.done(),
        flip.done(),
        three.done(),
        outside.done(),
    ])
}

// Rank-controlled positivity: the two-copy form inside alpha >= -1/(2r), the
// single-system trace bound at -1/r, and the dimension bound for all sign
// patterns at |alpha| <= 1/max(dims).
fn suite_cor33(config: &SuiteConfig) -> Result<Vec<CheckOutcome>> {
    let mut two_copy = Margins::new("two_copy_rank_window");
    let mut single = Margins::new("single_system_trace_bound");
    let mut dim_bound = Margins::new("dimension_bound_all_patterns");
    let patterns: [&[u8]; 4] = [&[0, 0], &[0, 1], &[1, 0], &[1, 1]];
    for trial in 0..config.trials {
        let mut rng = rng_for(config, 0, trial);
        let r = trial % 4 + 1;

        let dims: &[usize] = if trial % 2 == 0 { &[2, 2] } else { &[3, 3] };
        let c = hs_normalized(&random_matrix(
            EnsembleKind::RankR,
            dims,
            r,
            Field::Complex,
            derive_seed(config.seed, trial as u64),
        )?)?;
        let endpoint = -1.0 / (2.0 * r as f64);
        let alpha = if trial % 3 == 0 {
            endpoint
        } else {
            rng.gen_range(endpoint..=1.0)
        };
        two_copy.record(q_form(&FormSpec::hs(vec![1, 1], alpha)?, &c)? + 1e-9);

        let d_single = if trial % 2 == 0 { 4 } else { 6 };
        let single_c = hs_normalized(&random_matrix(
            EnsembleKind::RankR,
            &[d_single],
            r,
            Field::Complex,
            derive_seed(config.seed, 1000 + trial as u64),
        )?)?;
        single.record(q_form(&FormSpec::hs(vec![1], -1.0 / r as f64)?, &single_c)? + 1e-9);

        let dims_cycle: [&[usize]; 3] = [&[2, 2], &[2, 3], &[3, 3]];
        let bdims = dims_cycle[trial % 3];
        let dmax = *bdims.iter().max().expect("nonempty") as f64;
        let g = hs_normalized(&random_matrix(
            EnsembleKind::Ginibre,
            bdims,
            1,
            Field::Complex,
            derive_seed(config.seed, 2000 + trial as u64),
        )?)?;
        let alpha_edge = (1.0 / dmax) * if trial % 2 == 0 { -1.0 } else { 1.0 };
        let alpha_in = rng.gen_range(-1.0 / dmax..1.0 / dmax);
        for pattern in patterns {
            for a in [alpha_edge, alpha_in] {
                dim_bound.record(q_form(&FormSpec::hs(pattern.to_vec(), a)?, &g)? + 1e-9);
            }
        }
    }
    Ok(vec![two_copy.done(), single.done(), dim_bound.done()])
}

// The three marginal-norm inequalities (difference, sum, structured
// rank-1-plus-normal), plus the bracket decomposition of the two-term mixed
// pattern at alpha = -1/max(dims).
fn suite_thm45(config: &SuiteConfig) -> Result<Vec<CheckOutcome>> {
    let dims_cycle: [&[usize]; 3] = [&[2, 2], &[2, 3], &[3, 3]];
    let mut diff = Margins::new("marginal_difference_bound");
    let mut sum = Margins::new("marginal_sum_bound");
    let mut structured = Margins::new("structured_rank1_plus_normal");
    let mut decomp_eq = Margins::new("mixed_pattern_decomposition");
    let mut decomp_pos = Margins::new("decomposition_brackets_floor");
    for trial in 0..config.trials {
        let dims = dims_cycle[trial % dims_cycle.len()];
        let dmax = *dims.iter().max().expect("nonempty") as f64;
        let r = trial % 4 + 1;

        let c = hs_normalized(&random_matrix(
            EnsembleKind::RankR,
            dims,
            r,
            Field::Complex,
            derive_seed(config.seed, 3000 + trial as u64),
        )?)?;
        let h1 = marginal_norm_sq(&c, 1)?;
        let h2 = marginal_norm_sq(&c, 2)?;
        let tr2 = c.trace().norm_sqr();
        let m = (r as f64).min(dmax);
        diff.record(m - tr2 / m + 1e-9 - (h1 - h2).abs());

        let kind = if trial % 2 == 0 {
            EnsembleKind::Ginibre
        } else {
            EnsembleKind::Hermitian
        };
        let g = hs_normalized(&random_matrix(
            kind,
            dims,
            1,
            Field::Complex,
            derive_seed(config.seed, 4000 + trial as u64),
        )?)?;
        let g1 = marginal_norm_sq(&g, 1)?;
        let g2 = marginal_norm_sq(&g, 2)?;
        let gtr = g.trace().norm_sqr();
        sum.record(dmax + gtr / dmax + 1e-9 - (g1 + g2));

        let rs = 2 + trial % 2;
        let field = if trial % 4 < 2 {
            Field::Complex
        } else {
            Field::Real
        };
        let s = hs_normalized(&random_matrix(
            EnsembleKind::StructuredRank1PlusNormal,
            dims,
            rs,
            field,
            derive_seed(config.seed, 5000 + trial as u64),
        )?)?;
        let s1 = marginal_norm_sq(&s, 1)?;
        let s2 = marginal_norm_sq(&s, 2)?;
        let str_tr = s.trace().norm_sqr();
        structured.record(rs as f64 + str_tr / rs as f64 + 1e-9 - (s1 + s2));

        // q_{(1,0)}(-1/d, C) regroups into two single-system-style brackets,
        // the second weighted by 1/d; both brackets are nonnegative, which
        // is exactly how the dimension bound is proved.
        let q = q_form(&FormSpec::hs(vec![1, 0], -1.0 / dmax)?, &g)?;
        let bracket1 = 1.0 - g1 / dmax;
        let bracket2 = g2 - gtr / dmax;
        let regrouped = bracket1 + bracket2 / dmax;
        decomp_eq.record(1e-12 * q.abs().max(1.0) - (q - regrouped).abs());
        decomp_pos.record(bracket1 + 1e-9);
        decomp_pos.record(bracket2 + 1e-9);
    }
    Ok(vec![
        diff.done(),
        sum.done(),
        structured.done(),
        decomp_eq.done(),
        decomp_pos.done(),
    ])
}

// PSD marginal comparison, PSD three-system forms at -1/r, the self-adjoint
// rank-2 three-copy case, and the spectral windows of the three-system
// inversion operators.
fn suite_tripartite(config: &SuiteConfig) -> Result<Vec<CheckOutcome>> {
    let mut psd_marginal = Margins::new("psd_marginal_comparison");
    let mut psd_forms = Margins::new("psd_forms_floor");
    let mut self_adjoint = Margins::new("self_adjoint_rank2_floor");
    let mut q3_window = Margins::new("q3_inversion_ceiling");
    let mut p3_floor = Margins::new("p3_inversion_floor");
    let bipartite_cycle: [&[usize]; 4] = [&[2, 2], &[2, 3], &[3, 3], &[2, 4]];
    let spec3 = FormSpec::hs(vec![1, 1, 1], -0.5)?;
    for trial in 0..config.trials {
        let mut rng = rng_for(config, 0, trial);
        let r = trial % 4 + 1;

        let bdims = bipartite_cycle[trial % bipartite_cycle.len()];
        let psd = hs_normalized(&random_matrix(
            EnsembleKind::Psd,
            bdims,
            r,
            Field::Complex,
            derive_seed(config.seed, 6000 + trial as u64),
        )?)?;
        let h1 = marginal_norm_sq(&psd, 1)?;
        let h2 = marginal_norm_sq(&psd, 2)?;
        // Relabeling the systems keeps C positive semidefinite, so the
        // comparison holds in both directions.
        psd_marginal.record(h1 - h2 / r as f64 + 1e-9);
        psd_marginal.record(h2 - h1 / r as f64 + 1e-9);

        let tpsd = hs_normalized(&random_matrix(
            EnsembleKind::Psd,
            &[2, 2, 2],
            r,
            Field::Complex,
            derive_seed(config.seed, 7000 + trial as u64),
        )?)?;
        let alpha_r = -1.0 / r as f64;
        psd_forms.record(q_form(&FormSpec::hs(vec![0, 1, 1], alpha_r)?, &tpsd)? + 1e-9);
        psd_forms.record(q_form(&FormSpec::hs(vec![0, 0, 1], alpha_r)?, &tpsd)? + 1e-9);

        let (v1, v2) = orthonormal_pair(8, Field::Complex, &mut rng);
        let sa = &MultipartiteMatrix::from_outer(vec![2, 2, 2], &v1, &v1)?
            - &MultipartiteMatrix::from_outer(vec![2, 2, 2], &v2, &v2)?;
        self_adjoint.record(q_form(&spec3, &sa)? + 1e-9);

        let rq = 2 + trial % 2;
        let a = random_vector(8, Field::Complex, &mut rng);
        let norm_sq = a.norm_squared();
        let q3 = inversion_q_tripartite(&a, rq, &[2, 2, 2], true)?;
        let eigs = hermitian_eigenvalues(&q3.matrix)?;
        let rf = rq as f64;
        let ceiling = (1.0 / (rf * rf)) * (1.0 - 1.0 / rf) * norm_sq;
        q3_window.record(ceiling + 1e-9 - eigs.last().copied().unwrap_or(0.0));

        let p3 = inversion_p_tripartite(&a, rq, &[2, 2, 2], true)?;
        let p_eigs = hermitian_eigenvalues(&p3.matrix)?;
        let floor = ((1.0 - rf * rf) / (rf * rf * rf)) * norm_sq;
        p3_floor.record(p_eigs.first().copied().unwrap_or(0.0) - floor + 1e-9);
    }
    Ok(vec![
        psd_marginal.done(),
        psd_forms.done(),
        self_adjoint.done(),
        q3_window.done(),
        p3_floor.done(),
    ])
}

// Classical norm chains, partial-trace contraction in 1-norm, the traced-out
// dimension and rank bounds for general p, bipartite inversion windows, the
// Kronecker-difference trace-norm bound, the Frobenius cross-check and the
// Tsallis density inequality.
fn suite_spectral_bounds(config: &SuiteConfig) -> Result<Vec<CheckOutcome>> {
    let mut chain = Margins::new("norm_chain_rank_window");
    let mut trace_floor = Margins::new("trace_rank_floor");
    let mut contraction = Margins::new("trace_norm_contraction");
    let mut dim_bound = Margins::new("traced_dimension_bound");
    let mut holder = Margins::new("holder_rank_bound");
    let mut q_window = Margins::new("bipartite_inversion_window");
    let mut kron_diff = Margins::new("kronecker_difference_bound");
    let mut frob = Margins::new("frobenius_agreement");
    let mut tsallis = Margins::new("tsallis_density_floor");
    let p_cycle = [1.0, 1.5, 2.0, 3.0, f64::INFINITY];
    let tsallis_grid = [
        (1.5, 1.0),
        (1.5, 1.5),
        (2.0, 1.0),
        (2.0, 2.0),
        (3.0, 1.0),
        (3.0, 3.0),
    ];
    let dims_cycle: [&[usize]; 3] = [&[2, 2], &[2, 3], &[3, 3]];
    for trial in 0..config.trials {
        let mut rng = rng_for(config, 0, trial);
        let r = trial % 4 + 1;
        let dims: &[usize] = if trial % 2 == 0 { &[2, 2] } else { &[3, 3] };
        let c = random_matrix(
            EnsembleKind::RankR,
            dims,
            r,
            Field::Complex,
            derive_seed(config.seed, 8000 + trial as u64),
        )?;
        let n1 = schatten_norm(&c, 1.0)?;
        let n2 = schatten_norm(&c, 2.0)?;
        chain.record(n1 - n2 + 1e-10);
        chain.record((r as f64).sqrt() * n2 - n1 + 1e-10);
        trace_floor.record(n2 * n2 - c.trace().norm_sqr() / r as f64 + 1e-10);
        for subsystem in [1usize, 2] {
            let subset = SubsystemSubset::from_members(2, &[subsystem])?;
            let t = partial_trace(&c, &subset)?;
            contraction.record(n1 - schatten_norm(&t, 1.0)? + 1e-10);
        }

        let bdims = dims_cycle[trial % dims_cycle.len()];
        let g = random_matrix(
            EnsembleKind::Ginibre,
            bdims,
            1,
            Field::Complex,
            derive_seed(config.seed, 9000 + trial as u64),
        )?;
        let p = p_cycle[trial % p_cycle.len()];
        let exponent = if p.is_infinite() { 1.0 } else { (p - 1.0) / p };
        let gp = schatten_norm(&g, p)?;
        for subsystem in [1usize, 2] {
            let subset = SubsystemSubset::from_members(2, &[subsystem])?;
            let t = partial_trace(&g, &subset)?;
            let tp = schatten_norm(&t, p)?;
            let traced_dim = bdims[subsystem - 1] as f64;
            dim_bound.record(traced_dim.powf(exponent) * gp + 1e-9 - tp);
        }
        let cp = schatten_norm(&c, p)?;
        for subsystem in [1usize, 2] {
            let subset = SubsystemSubset::from_members(2, &[subsystem])?;
            let t = partial_trace(&c, &subset)?;
            holder.record((r as f64).powf(exponent) * cp + 1e-9 - schatten_norm(&t, p)?);
        }

        let rq = 2 + trial % 3;
        let a = random_vector(bdims.iter().product(), Field::Complex, &mut rng);
        let norm_sq = a.norm_squared();
        let op = inversion_q_bipartite(&a, rq, bdims, true)?;
        let eigs = hermitian_eigenvalues(&op.matrix)?;
        let rf = rq as f64;
        q_window.record((1.0 / (rf * rf)) * norm_sq + 1e-9 - eigs.last().copied().unwrap_or(0.0));
        q_window.record(
            eigs.first().copied().unwrap_or(0.0) + (1.0 / rf) * (1.0 - 1.0 / rf) * norm_sq + 1e-9,
        );

        match trial % 3 {
            0 => {
                let k = random_matrix(
                    EnsembleKind::RankR,
                    bdims,
                    3,
                    Field::Complex,
                    derive_seed(config.seed, 10_000 + trial as u64),
                )?;
                kron_diff.record(schatten_norm(&k, 1.0)? + 1e-10 - kronecker_difference_norm(&k)?);
            }
            1 => {
                let x = random_vector(bdims.iter().product(), Field::Complex, &mut rng);
                let y = random_vector(bdims.iter().product(), Field::Complex, &mut rng);
                let k = MultipartiteMatrix::from_outer(bdims.to_vec(), &x, &y)?;
                kron_diff.record(x.norm() * y.norm() + 1e-10 - kronecker_difference_norm(&k)?);
            }
            _ => {
                let eye = MultipartiteMatrix::identity(vec![3, 3])?;
                kron_diff.record(1e-12 - kronecker_difference_norm(&eye)?);
            }
        }

        let f_direct: f64 = c.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        frob.record(1e-12 * f_direct.max(1.0) - (n2 - f_direct).abs());

        let (tp_p, tp_g) = tsallis_grid[trial % tsallis_grid.len()];
        let rho = random_matrix(
            EnsembleKind::Density,
            dims_cycle[trial % dims_cycle.len()],
            4,
            Field::Complex,
            derive_seed(config.seed, 11_000 + trial as u64),
        )?;
        let whole = schatten_norm(&rho, tp_p)?.powf(tp_g);
        let m1 = {
            let subset = SubsystemSubset::from_members(2, &[1])?;
            schatten_norm(&partial_trace(&rho, &subset)?, tp_p)?.powf(tp_g)
        };
        let m2 = {
            let subset = SubsystemSubset::from_members(2, &[2])?;
            schatten_norm(&partial_trace(&rho, &subset)?, tp_p)?.powf(tp_g)
        };
        tsallis.record(whole - m1 - m2 + 1.0 + 1e-9);
    }
    Ok(vec![
        chain.done(),
        trace_floor.done(),
        contraction.done(),
        dim_bound.done(),
        holder.done(),
        q_window.done(),
        kron_diff.done(),
        frob.done(),
        tsallis.done(),
    ])
}

// Creation/annihilation pairs: the exchange identities, the fermionic norm
// equality, antisymmetric self-annihilation and the product-vector bound.
fn suite_creation_annihilation(config: &SuiteConfig) -> Result<Vec<CheckOutcome>> {
    let dims_cycle: [&[usize]; 3] = [&[2, 2], &[2, 3], &[3, 3]];
    let mut residuals = Margins::new("exchange_identity_residuals");
    let mut fermi_norm = Margins::new("fermionic_creator_norm");
    let mut self_kill = Margins::new("antisymmetric_self_annihilation");
    let mut product_bound = Margins::new("product_vector_norm_bound");
    for trial in 0..config.trials {
        let mut rng = rng_for(config, 0, trial);
        let dims = dims_cycle[trial % dims_cycle.len()];
        let total: usize = dims.iter().product();
        let v = random_vector(total, Field::Complex, &mut rng);
        let w = random_vector(total, Field::Complex, &mut rng);
        let (anti, sym) = fermionic_bosonic_identity_residual(&v, &w, dims)?;
        let scale = v.norm() * w.norm();
        residuals.record(1e-10 * scale.max(1.0) - anti);
        residuals.record(1e-10 * scale.max(1.0) - sym);

        let d = 2 + trial % 5;
        let u = random_vector(d, Field::Complex, &mut rng);
        let ops = creation_annihilation(&u, PairSymmetry::Antisymmetric);
        let creator_norm = operator_norm(&ops.creator);
        fermi_norm.record(1e-10 * u.norm().max(1.0) - (creator_norm - u.norm()).abs());
        self_kill.record(1e-12 * u.norm_squared().max(1.0) - (&ops.creator * &u).norm());

        let a = unit(random_vector(dims[0], Field::Complex, &mut rng));
        let b = unit(random_vector(dims[1], Field::Complex, &mut rng));
        let c = unit(random_vector(dims[0], Field::Complex, &mut rng));
        let e = unit(random_vector(dims[1], Field::Complex, &mut rng));
        let prod = MultipartiteMatrix::from_outer(
            dims.to_vec(),
            &a.kronecker(&b),
            &c.kronecker(&e),
        )?;
        product_bound.record(1.0 + 1e-10 - kronecker_difference_norm(&prod)?);
    }
    Ok(vec![
        residuals.done(),
        fermi_norm.done(),
        self_kill.done(),
        product_bound.done(),
    ])
}

// The form/witness correspondence: ratios pinned to 1, the analytic vs
// transposed per-copy operator, nonnegativity of rank-2 witnesses at the
// boundary, an explicit negative witness below it, and the opposite-sign
// two-copy expectations.
fn suite_werner_equivalence(config: &SuiteConfig) -> Result<Vec<CheckOutcome>> {
    let mut ratio = Margins::new("form_witness_ratio");
    let mut dual = Margins::new("transpose_route_agreement");
    let mut boundary = Margins::new("rank2_witness_floor_at_half");
    let mut below = Margins::new("negative_witness_below_half");
    let mut mixed = Margins::new("mixed_sign_expectations");
    let alphas = [-0.8, -0.5, -0.3, 0.4];
    for trial in 0..config.trials {
        let mut rng = rng_for(config, 0, trial);
        let d = 2 + trial % 2;
        let n = 1 + (trial / 2) % 2;
        let alpha = alphas[trial % alphas.len()];
        let r = trial % 3 + 1;
        let dims = vec![d; n];
        let c = hs_normalized(&random_matrix(
            EnsembleKind::RankR,
            &dims,
            r.min(d.pow(n as u32)),
            Field::Complex,
            derive_seed(config.seed, 12_000 + trial as u64),
        )?)?;
        // 1e−9 relative, with an absolute floor well under any meaningful
        // magnitude for when q sits at a cancellation zero (the family is
        // normalized to ‖C‖₂ = 1, so the summed terms are O(1..10)).
        let (q, scaled, rel) = q_witness_equivalence(&c, alpha, n, d)?;
        ratio.record(1e-9 * q.abs() + 1e-11 - (scaled - q).abs());
        if q.abs() > 1e-6 {
            ratio.record(1e-9 - (rel - 1.0).abs());
        }

        let dd = 2 + trial % 4;
        let da = rng.gen_range(-1.0..=1.0);
        dual.record(1e-12 - ppt_route_residual(&WernerParams::new(dd, da)?)?);

        let wd = 2 + trial % 3;
        let x1 = random_vector(wd, Field::Complex, &mut rng);
        let y1 = random_vector(wd, Field::Complex, &mut rng);
        let x2 = random_vector(wd, Field::Complex, &mut rng);
        let y2 = random_vector(wd, Field::Complex, &mut rng);
        let psi_raw = x1.kronecker(&y1) + x2.kronecker(&y2);
        let psi = WitnessVector::new(unit(psi_raw), 1, wd)?;
        boundary.record(witness_value(&psi, &WernerParams::new(wd, -0.5)?)? + 1e-9);

        // diag(1, 1, 0, ...) maximizes |tr| against the 2-norm at rank 2, so
        // its witness dips negative as soon as alpha < -1/2.
        let mut traceful = nalgebra::DMatrix::<Complex64>::zeros(wd, wd);
        traceful[(0, 0)] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        traceful[(1, 1)] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let tc = MultipartiteMatrix::new(vec![wd], traceful)?;
        let psi_tc = psi_from_matrix(&tc, None)?;
        let neg = witness_value(&psi_tc, &WernerParams::new(wd, -0.55)?)?;
        below.record(-neg);

        let md = 2 + trial % 2;
        let mc = hs_normalized(&random_matrix(
            EnsembleKind::RankR,
            &[md, md],
            1 + trial % 2,
            Field::Complex,
            derive_seed(config.seed, 13_000 + trial as u64),
        )?)?;
        let report = mixed_sign_expectations(&mc, md)?;
        mixed.record(report.plus_minus_expectation + 1e-9);
        mixed.record(report.minus_plus_expectation + 1e-9);
        let tol = |q: f64| 1e-9 * q.abs().max(1.0);
        mixed.record(tol(report.q_01) - (report.scale * report.plus_minus_expectation - report.q_01).abs());
        mixed.record(tol(report.q_10) - (report.scale * report.minus_plus_expectation - report.q_10).abs());
    }
    Ok(vec![
        ratio.done(),
        dual.done(),
        boundary.done(),
        below.done(),
        mixed.done(),
    ])
}

// The violating family: closed-form agreement, the fixed marginal norms, the
// approach to zero from below, and rejection of odd copy counts.
fn suite_appendix(config: &SuiteConfig) -> Result<Vec<CheckOutcome>> {
    let mut exact = Margins::new("closed_form_agreement");
    let mut negative = Margins::new("strictly_negative_inside");
    let mut marginals = Margins::new("marginal_norms_fixed");
    let mut vanishing = Margins::new("vanishes_from_below");
    let mut rejects = Margins::new("odd_copy_count_rejected");
    let eps_grid = [0.1, 0.01, 0.001];
    // The n = 6 spot check stays at d = 2; larger local dimensions blow up
    // the 2^n marginal SVDs without exercising anything new.
    let shapes = [(2usize, 2usize), (2, 3), (4, 2), (4, 3), (6, 2)];
    for trial in 0..config.trials {
        let (n, d) = shapes[trial % shapes.len()];
        let eps = eps_grid[(trial / shapes.len()) % eps_grid.len()];
        let (c, q_value, closed_form) = appendix_counterexample(n, d, eps)?;
        exact.record(1e-10 * closed_form.abs().max(1e-30) - (q_value - closed_form).abs());
        negative.record(-q_value);

        if n <= 4 {
            for subset in SubsystemSubset::all_subsets(n)? {
                let t = partial_trace(&c, &subset)?;
                let norm_sq = {
                    let v = schatten_norm(&t, 2.0)?;
                    v * v
                };
                let expected = if subset.is_full() { 0.0 } else { 2.0 };
                marginals.record(1e-10 - (norm_sq - expected).abs());
            }
        }

        let small = 10f64.powi(-((trial % 6) as i32 + 1));
        let (_, q_small, _) = appendix_counterexample(2, 2, small)?;
        vanishing.record(-q_small);
        vanishing.record(4.5 * small - q_small.abs());

        rejects.record_bool(appendix_counterexample(3, 2, 0.1).is_err());
        rejects.record_bool(appendix_counterexample(2, 2, -0.1).is_err());
    }
    Ok(vec![
        exact.done(),
        negative.done(),
        marginals.done(),
        vanishing.done(),
        rejects.done(),
    ])
}

// Exact rational identity for the alternating binomial sums: equality of the
// two closed forms, zero at even lower index, strictly negative at odd.
fn suite_lemma_a1(config: &SuiteConfig) -> Result<Vec<CheckOutcome>> {
    let mut equality = Margins::new("exact_rational_equality");
    let mut even_zero = Margins::new("even_index_vanishes");
    let mut odd_negative = Margins::new("odd_index_negative");
    let mut rejects = Margins::new("out_of_range_rejected");
    let n_max = config.n_max.max(2);
    let mut n = 2;
    while n <= n_max {
        for m in 0..n {
            let (lhs, rhs) = lemma_a1_sum(n, m)?;
            equality.record_bool(lhs == rhs);
            if m % 2 == 0 {
                even_zero.record_bool(lhs == num_rational::Ratio::from_integer(0));
            } else {
                odd_negative.record_bool(lhs < num_rational::Ratio::from_integer(0));
            }
        }
        n += 2;
    }
    rejects.record_bool(lemma_a1_sum(4, 4).is_err());
    rejects.record_bool(lemma_a1_sum(4, 7).is_err());
    Ok(vec![
        equality.done(),
        even_zero.done(),
        odd_negative.done(),
        rejects.done(),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config() -> SuiteConfig {
        SuiteConfig {
            trials: 24,
            seed: 41,
            n_max: 8,
        }
    }

    #[test]
    fn every_suite_passes_a_quick_run() {
        for name in SUITE_NAMES {
            let report = run_suite(name, &quick_config()).unwrap();
            assert!(
                report.passed(),
                "suite {name} failed:\n{}",
                report.render()
            );
            assert!(!report.checks.is_empty());
        }
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(run_suite("nonsense", &quick_config()).is_err());
    }

    #[test]
    fn reports_render_with_verdict_lines() {
        let report = run_suite("lemma-a1", &quick_config()).unwrap();
        let text = report.render();
        assert!(text.contains("suite lemma-a1: PASS"));
        assert!(text.contains("exact_rational_equality"));
        assert!(text.contains("worst margin"));
    }

    #[test]
    fn suites_are_deterministic() {
        let a = run_suite("cor33", &quick_config()).unwrap();
        let b = run_suite("cor33", &quick_config()).unwrap();
        for (x, y) in a.checks.iter().zip(&b.checks) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.worst_margin.to_bits(), y.worst_margin.to_bits());
        }
    }

    #[test]
    fn margins_flag_nan_and_negative() {
        let mut m = Margins::new("probe");
        m.record(1.0);
        m.record(-0.5);
        m.record(f64::NAN);
        let out = m.done();
        assert_eq!(out.trials, 3);
        assert_eq!(out.failures, 2);
        assert!(!out.passed());
    }
}
