//! Randomized laws exercised through the public API: partial-trace algebra,
//! form symmetries, serialization roundtrips, and search reproducibility.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wernerlab::forms::{q_form, q_form_breakdown, FormSpec};
use wernerlab::search::{
    alpha_opt_estimate, derive_seed, gradient_consistency, minimize_form, random_matrix,
    random_vector, sweep_csv, sweep_grid, EnsembleKind, Field,
};
use wernerlab::spectral::{hermitian_eigenvalues, hs_inner, schatten_norm};
use wernerlab::tensorspace::{
    flip, kron, pad_embed, partial_trace, partial_transpose, permute_systems, vector_from_json_str,
    vector_to_json, MultipartiteMatrix, SubsystemSubset,
};
use wernerlab::werner::q_witness_equivalence;

const DIMS_POOL: [&[usize]; 5] = [&[2, 2], &[3, 2], &[2, 3], &[2, 2, 2], &[3, 3]];

fn ginibre(dims: &[usize], seed: u64) -> MultipartiteMatrix {
    random_matrix(EnsembleKind::Ginibre, dims, 1, Field::Complex, seed).unwrap()
}

fn hermitian(dims: &[usize], seed: u64) -> MultipartiteMatrix {
    random_matrix(EnsembleKind::Hermitian, dims, 1, Field::Complex, seed).unwrap()
}

fn vector(d: usize, seed: u64) -> wernerlab::tensorspace::ComplexVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_vector(d, Field::Complex, &mut rng)
}

fn subset_from_mask(n: usize, mask: usize) -> SubsystemSubset {
    let members: Vec<usize> = (1..=n).filter(|k| mask & (1 << (k - 1)) != 0).collect();
    SubsystemSubset::from_members(n, &members).unwrap()
}

fn max_entry_diff(a: &MultipartiteMatrix, b: &MultipartiteMatrix) -> f64 {
    assert_eq!(a.dims(), b.dims());
    (a.matrix() - b.matrix())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partial_trace_is_linear(seed in any::<u64>(), dims in prop::sample::select(&DIMS_POOL[..])) {
        let n = dims.len();
        let c1 = ginibre(dims, derive_seed(seed, 1));
        let c2 = ginibre(dims, derive_seed(seed, 2));
        let a = Complex64::new(0.8, -0.45);
        let b = Complex64::new(-0.35, 1.2);
        let combo = &c1.scale(a) + &c2.scale(b);
        for mask in 1..(1usize << n) {
            let j = subset_from_mask(n, mask);
            let lhs = partial_trace(&combo, &j).unwrap();
            let rhs = &partial_trace(&c1, &j).unwrap().scale(a)
                + &partial_trace(&c2, &j).unwrap().scale(b);
            let scale = lhs.max_entry_norm().max(1.0);
            prop_assert!(max_entry_diff(&lhs, &rhs) <= 1e-10 * scale);
        }
    }

    #[test]
    fn disjoint_partial_traces_compose(seed in any::<u64>(), tri in prop::sample::select(vec![[2usize, 3, 2], [2, 2, 2], [3, 2, 2]])) {
        let c = ginibre(&tri, seed);
        let n = 3;
        for k_mask in 1usize..(1 << n) {
            for j_mask in 1usize..(1 << n) {
                if j_mask & k_mask != 0 || j_mask | k_mask == (1 << n) - 1 {
                    continue;
                }
                let inner = partial_trace(&c, &subset_from_mask(n, k_mask)).unwrap();
                // Relabel J to slots of the reduced operator: each member drops
                // by the number of traced subsystems below it.
                let members: Vec<usize> = (1..=n)
                    .filter(|k| j_mask & (1 << (k - 1)) != 0)
                    .map(|k| k - (1..k).filter(|i| k_mask & (1 << (i - 1)) != 0).count())
                    .collect();
                let j_reduced =
                    SubsystemSubset::from_members(inner.n_subsystems(), &members).unwrap();
                let stepwise = partial_trace(&inner, &j_reduced).unwrap();
                let joint = partial_trace(&c, &subset_from_mask(n, j_mask | k_mask)).unwrap();
                let scale = joint.max_entry_norm().max(1.0);
                prop_assert!(max_entry_diff(&stepwise, &joint) <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn trace_partition_identity(seed in any::<u64>(), dims in prop::sample::select(vec![&[2usize, 2][..], &[3, 2], &[2, 2, 2], &[3, 3, 2]])) {
        let n = dims.len();
        let total: usize = dims.iter().product();
        let a = vector(total, derive_seed(seed, 1));
        let x = vector(total, derive_seed(seed, 2));
        let aa = MultipartiteMatrix::from_outer(dims.to_vec(), &a, &a).unwrap();
        let xx = MultipartiteMatrix::from_outer(dims.to_vec(), &x, &x).unwrap();
        let ax = MultipartiteMatrix::from_outer(dims.to_vec(), &a, &x).unwrap();
        for mask in 1..((1usize << n) - 1) {
            let i = subset_from_mask(n, mask);
            let lhs = hs_inner(
                &partial_trace(&aa, &i).unwrap(),
                &partial_trace(&xx, &i).unwrap(),
            )
            .unwrap();
            let cross = partial_trace(&ax, &i.complement()).unwrap();
            let rhs = schatten_norm(&cross, 2.0).unwrap().powi(2);
            let scale = lhs.re.abs().max(rhs).max(1e-6);
            prop_assert!(lhs.im.abs() <= 1e-10 * scale);
            prop_assert!((lhs.re - rhs).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn partial_transpose_is_an_involution(seed in any::<u64>(), dims in prop::sample::select(&DIMS_POOL[..])) {
        let c = ginibre(dims, seed);
        let n = dims.len();
        for mask in 1..(1usize << n) {
            let j = subset_from_mask(n, mask);
            let twice =
                partial_transpose(&partial_transpose(&c, &j).unwrap(), &j).unwrap();
            // Pure entry relocation, so the roundtrip is exact.
            prop_assert_eq!(max_entry_diff(&twice, &c), 0.0);
            let traced = partial_transpose(&c, &j).unwrap().trace();
            prop_assert!((traced - c.trace()).norm() <= 1e-12 * c.trace().norm().max(1.0));
        }
    }

    #[test]
    fn swap_operator_contracts_products(seed in any::<u64>(), d in 2usize..=6) {
        let x = ginibre(&[d], derive_seed(seed, 1));
        let y = ginibre(&[d], derive_seed(seed, 2));
        let f = flip(d).unwrap();
        let lhs = (kron(&x, &y).unwrap().matrix() * f.matrix()).trace();
        let rhs = (x.matrix() * y.matrix()).trace();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
    }

    #[test]
    fn padding_preserves_form_values(seed in any::<u64>()) {
        let c = ginibre(&[2, 3], seed);
        let padded = pad_embed(&c, &[3, 3]).unwrap();
        let cases: [(Vec<u8>, f64, f64, f64); 4] = [
            (vec![1, 1], 2.0, 2.0, -0.7),
            (vec![1, 0], 2.0, 2.5, 0.45),
            (vec![0, 1], 3.0, 2.0, -0.5),
            (vec![1, 1], f64::INFINITY, 1.5, -0.3),
        ];
        for (v, p, gamma, alpha) in cases {
            let spec = FormSpec::new(v, p, gamma, alpha).unwrap();
            let q0 = q_form(&spec, &c).unwrap();
            let q1 = q_form(&spec, &padded).unwrap();
            prop_assert!((q0 - q1).abs() <= 1e-10 * q0.abs().max(1.0));
        }
    }

    #[test]
    fn reflection_swaps_sign_pattern(seed in any::<u64>(), dims in prop::sample::select(&DIMS_POOL[..]), alpha in -1.0f64..1.0) {
        let c = ginibre(dims, seed);
        let n = dims.len();
        for v_mask in 0..(1usize << n) {
            let v: Vec<u8> = (0..n).map(|k| ((v_mask >> k) & 1) as u8).collect();
            let spec = FormSpec::new(v, 2.0, 2.0, alpha).unwrap();
            let q = q_form(&spec, &c).unwrap();
            let q_reflected = q_form(&spec.reflected(), &c).unwrap();
            prop_assert!((q - q_reflected).abs() <= 1e-12 * q.abs().max(1.0));
        }
    }

    #[test]
    fn forms_are_gamma_homogeneous(seed in any::<u64>(), lambda in prop::sample::select(vec![-1.7f64, -0.4, 0.3, 2.4]), gamma in prop::sample::select(vec![1.0f64, 1.5, 2.0, 3.5])) {
        let dims = [2usize, 3];
        let c = ginibre(&dims, seed);
        let spec = FormSpec::new(vec![1, 0], 2.0, gamma, -0.6).unwrap();
        let q = q_form(&spec, &c).unwrap();
        let q_scaled = q_form(&spec, &c.scale_re(lambda)).unwrap();
        let expected = lambda.abs().powf(gamma) * q;
        prop_assert!((q_scaled - expected).abs() <= 1e-10 * expected.abs().max(1.0));
    }

    #[test]
    fn breakdown_terms_sum_to_the_form(seed in any::<u64>(), dims in prop::sample::select(&DIMS_POOL[..]), alpha in -1.0f64..1.0) {
        let c = ginibre(dims, seed);
        let spec = FormSpec::q_n(dims.len(), alpha).unwrap();
        let q = q_form(&spec, &c).unwrap();
        let terms = q_form_breakdown(&spec, &c).unwrap();
        prop_assert_eq!(terms.len(), 1 << dims.len());
        let total: f64 = terms.iter().map(|t| t.value).sum();
        prop_assert!((total - q).abs() <= 1e-12 * q.abs().max(1.0));
    }

    #[test]
    fn hs_inner_is_conjugate_symmetric(seed in any::<u64>(), dims in prop::sample::select(&DIMS_POOL[..])) {
        let a = ginibre(dims, derive_seed(seed, 1));
        let b = ginibre(dims, derive_seed(seed, 2));
        let ab = hs_inner(&a, &b).unwrap();
        let ba = hs_inner(&b, &a).unwrap();
        let scale = ab.norm().max(1.0);
        prop_assert!((ab - ba.conj()).norm() <= 1e-12 * scale);
        let aa = hs_inner(&a, &a).unwrap();
        let norm_sq = schatten_norm(&a, 2.0).unwrap().powi(2);
        prop_assert!(aa.im.abs() <= 1e-12 * aa.re.max(1.0));
        prop_assert!((aa.re - norm_sq).abs() <= 1e-10 * norm_sq.max(1.0));
    }

    #[test]
    fn relabeling_preserves_spectra(seed in any::<u64>(), sigma in prop::sample::select(vec![[2usize, 3, 1], [3, 1, 2], [2, 1, 3], [1, 3, 2]])) {
        let c = hermitian(&[2, 3, 2], seed);
        let permuted = permute_systems(&c, &sigma).unwrap();
        let ev_before = hermitian_eigenvalues(&c).unwrap();
        let ev_after = hermitian_eigenvalues(&permuted).unwrap();
        let scale = ev_before.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (x, y) in ev_before.iter().zip(&ev_after) {
            prop_assert!((x - y).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn json_roundtrips_are_exact(seed in any::<u64>(), dims in prop::sample::select(&DIMS_POOL[..])) {
        let c = ginibre(dims, seed);
        let back = MultipartiteMatrix::from_json_str(&c.to_json()).unwrap();
        prop_assert_eq!(back.dims(), c.dims());
        prop_assert_eq!(max_entry_diff(&back, &c), 0.0);

        let total: usize = dims.iter().product();
        let v = vector(total, derive_seed(seed, 3));
        let (v_back, v_dims) = vector_from_json_str(&vector_to_json(&v, dims).unwrap()).unwrap();
        prop_assert_eq!(&v_dims[..], dims);
        prop_assert!(v_back.iter().zip(v.iter()).all(|(x, y)| x == y));
    }
}

#[test]
fn transposed_swap_operator_has_a_single_nonzero_eigenvalue() {
    for d in 2..=4usize {
        let f = flip(d).unwrap();
        let pt = partial_transpose(&f, &SubsystemSubset::from_members(2, &[1]).unwrap()).unwrap();
        let ev = hermitian_eigenvalues(&pt).unwrap();
        let top = *ev.last().unwrap();
        assert!((top - d as f64).abs() <= 1e-10, "d = {d}: top = {top}");
        for &lambda in &ev[..ev.len() - 1] {
            assert!(lambda.abs() <= 1e-10, "d = {d}: stray eigenvalue {lambda}");
        }
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let hs = FormSpec::new(vec![1, 1], 2.0, 2.0, -0.6).unwrap();
    let worst = gradient_consistency(&hs, &[2, 3], 2, Field::Complex, 11, 100).unwrap();
    assert!(worst < 1e-5, "hs case: worst relative deviation {worst:.3e}");

    let tsallis = FormSpec::new(vec![1, 0], 2.0, 3.5, 0.35).unwrap();
    let worst = gradient_consistency(&tsallis, &[2, 2], 2, Field::Real, 12, 100).unwrap();
    assert!(worst < 1e-5, "gamma = 3.5 case: worst relative deviation {worst:.3e}");
}

#[test]
fn search_reports_are_reproducible_and_sound() {
    let spec = FormSpec::new(vec![1, 1], 2.0, 2.0, -0.55).unwrap();
    let dims = [2usize, 2];
    let run = || minimize_form(&spec, &dims, 2, Field::Real, 12, 150, 5).unwrap();
    let first = run();
    let second = run();
    assert_eq!(first.best_value.to_bits(), second.best_value.to_bits());
    assert_eq!(
        serde_json::to_string(&first).unwrap(),
        serde_json::to_string(&second).unwrap()
    );

    // Inside the undistillable window a rank-2 violation must be found.
    assert!(first.best_value < -1e-9, "best = {:.3e}", first.best_value);

    // The reported value must survive re-evaluation from the reconstructed
    // matrix, and the witness route must agree with it.
    let c = first.best_factorization.reconstruct(&dims).unwrap();
    let direct = q_form(&spec, &c).unwrap();
    assert!((direct - first.best_value).abs() <= 1e-9 * direct.abs().max(1e-12));
    let (q, scaled, _ratio) = q_witness_equivalence(&c, -0.55, 2, 2).unwrap();
    assert!((q - direct).abs() <= 1e-12 * direct.abs());
    assert!(scaled < 0.0);
    assert!((scaled - q).abs() <= 1e-9 * q.abs() + 1e-11);
}

#[test]
fn alpha_estimates_respect_the_proven_floor() {
    let est = alpha_opt_estimate(&[1, 1], 2.0, 2.0, 2, &[2, 2], Field::Real, 0.01, 3, 12, 150)
        .unwrap();
    assert_eq!(est.proven_lower, Some(0.5));
    assert!(est.heuristic);
    assert!(!est.probes.is_empty());
    assert!(est.estimate + 0.01 + 1e-12 >= 0.5, "estimate = {}", est.estimate);

    // Rank 1 admits no violation anywhere in [-1, 1], so the endpoint probe
    // settles it.
    let est = alpha_opt_estimate(&[1, 1], 2.0, 2.0, 1, &[2, 2], Field::Complex, 0.01, 3, 8, 120)
        .unwrap();
    assert_eq!(est.estimate, 1.0);
    assert_eq!(est.probes.len(), 1);

    // Away from (p, gamma) = (2, 2) there is no analytic guarantee.
    let est = alpha_opt_estimate(&[1, 1], 2.5, 2.0, 1, &[2, 2], Field::Complex, 0.05, 3, 4, 60)
        .unwrap();
    assert_eq!(est.proven_lower, None);
}

#[test]
fn larger_restart_budgets_do_not_raise_the_estimate() {
    let run = |restarts: usize| {
        alpha_opt_estimate(&[1, 1], 2.0, 2.0, 2, &[2, 2], Field::Real, 0.02, 17, restarts, 120)
            .unwrap()
            .estimate
    };
    let small = run(4);
    let large = run(16);
    assert!(large <= small + 0.02 + 1e-12, "small = {small}, large = {large}");
}

#[test]
fn sweep_rows_rerun_byte_identically() {
    let run = || {
        sweep_grid(
            &[1, 1],
            &[2.0],
            &[2.0, 3.0],
            1,
            &[2, 2],
            Field::Complex,
            0.05,
            9,
            2,
            40,
            None,
        )
        .unwrap()
    };
    let csv1 = sweep_csv(&run());
    let csv2 = sweep_csv(&run());
    assert_eq!(csv1, csv2);
    assert!(csv1.starts_with("p,gamma,estimate,"));
    assert_eq!(csv1.lines().count(), 3);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    sweep_grid(
        &[1, 1],
        &[2.0],
        &[2.0, 3.0],
        1,
        &[2, 2],
        Field::Complex,
        0.05,
        9,
        2,
        40,
        Some(&path),
    )
    .unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), csv1);
}
