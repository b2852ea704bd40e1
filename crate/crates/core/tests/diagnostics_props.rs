mod common;

use common::*;
use proptest::prelude::*;
use rkma::diagnostics::{
    diagnose, diagnose_auto, fixed_point_offset, inconsistent_bound, noise_gamma, restricted_basis,
    restricted_diagnostics,
};
use rkma::linalg::DenseMatrix;
use rkma::problems::{assemble_underdetermined, ProbabilityScheme};
use rkma::{Error, ProbabilityVector, StepRule, SystemPair};

fn mismatched(m: usize, n: usize, spread: f64, seed: u64, noisy: bool) -> SystemPair {
    let mut r = rng(seed);
    loop {
        let a = gaussian_matrix(m, n, &mut r);
        let v: Vec<Vec<f64>> = a
            .iter()
            .map(|row| row.iter().map(|x| x + spread * normal(&mut r)).collect())
            .collect();
        let x: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let b = matvec(&a, &x);
        let noise = noisy.then(|| (0..m).map(|_| 0.05 * normal(&mut r)).collect());
        if let Ok(s) = SystemPair::new(to_dense(&a), to_dense(&v), b, noise, Some(x)) {
            return s;
        }
    }
}

// ||M^k||^(1/k) -> rho(M)
fn gelfand_radius(m: &[Vec<f64>], k: usize) -> f64 {
    let mut pow = m.to_vec();
    let mut log_scale = 0.0;
    for _ in 1..k {
        pow = matmul(&pow, m);
        let s = pow.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs()));
        for x in pow.iter_mut().flatten() {
            *x /= s;
        }
        log_scale += s.ln();
    }
    ((power_sigma(&pow)).ln() + log_scale).exp().powf(1.0 / k as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn diagnostics_match_reference_operators(m in 4usize..20, n in 1usize..6, seed in any::<u64>()) {
        let sys = mismatched(m, n, 0.3, seed, false);
        let p = ProbabilityVector::new(random_simplex(m, &mut rng(seed ^ 7))).unwrap();
        let d = diagnose(&sys, &p, StepRule::ObliqueExact).unwrap();
        let (step, w) = reference_operators(&sys, &p);
        let lam = sturm_eigenvalue(&w, 0);
        prop_assert!((d.lambda - lam).abs() <= 1e-9 * lam.abs().max(1.0), "{} vs {}", d.lambda, lam);
        prop_assert!((d.expected_improvement - (1.0 - lam)).abs() <= 1e-9);
        let nrm = power_sigma(&step);
        prop_assert!((d.norm_expectation - nrm).abs() <= 1e-8 * nrm.max(1.0));
        prop_assert!(d.rho_asymptotic <= d.norm_expectation + 1e-10);
        prop_assert!(d.positivity_ok);
    }

    #[test]
    fn matched_row_norm_lambda_is_scaled_smallest_eigenvalue(m in 3usize..20, n in 1usize..4, seed in any::<u64>()) {
        let sys = mismatched(m, n, 0.0, seed, false).matched().unwrap();
        let p = ProbabilityScheme::RowNormA.build(&sys).unwrap();
        let d = diagnose(&sys, &p, StepRule::ObliqueExact).unwrap();
        let a = to_rows(sys.a());
        let ata = matmul(&transpose(&a), &a);
        let fro: f64 = a.iter().flatten().map(|x| x * x).sum();
        let want = sturm_eigenvalue(&ata, 0) / fro;
        prop_assert!((d.lambda - want).abs() <= 1e-9 * want.max(1e-6), "{} vs {}", d.lambda, want);
        prop_assert!(d.conjectured_ordering_holds());
    }
}

#[test]
fn asymptotic_rate_agrees_with_gelfand_limit() {
    for seed in 0..4 {
        let sys = mismatched(12, 4, 0.4, seed, false);
        let p = ProbabilityVector::uniform(12);
        let d = diagnose(&sys, &p, StepRule::ObliqueExact).unwrap();
        let (step, _) = reference_operators(&sys, &p);
        let want = gelfand_radius(&step, 3000);
        assert!((d.rho_asymptotic - want).abs() < 2e-3 * want, "{} vs {want}", d.rho_asymptotic);
    }
}

#[test]
fn identity_lambda_is_one_over_m() {
    for m in [1usize, 3, 8] {
        let a = DenseMatrix::identity(m);
        let sys = SystemPair::consistent(a.clone(), a, vec![1.0; m]).unwrap();
        let d = diagnose(&sys, &ProbabilityVector::uniform(m), StepRule::ObliqueExact).unwrap();
        let want = 1.0 / m as f64;
        assert!((d.lambda - want).abs() < 1e-14);
        assert!((d.rho_asymptotic - (1.0 - want)).abs() < 1e-12);
        assert!((d.norm_expectation - (1.0 - want)).abs() < 1e-12);
    }
}

#[test]
fn fixed_point_solves_the_reference_system() {
    let sys = mismatched(15, 4, 0.3, 3, true);
    let p = ProbabilityVector::new(random_simplex(15, &mut rng(4))).unwrap();
    let off = fixed_point_offset(&sys, &p, StepRule::ObliqueExact).unwrap();
    // (I - step) off = V^T D r
    let (step, _) = reference_operators(&sys, &p);
    let k: Vec<Vec<f64>> = step
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, x)| if i == j { 1.0 - x } else { -x }).collect())
        .collect();
    let lhs = matvec(&k, &off);
    let v = to_rows(sys.v());
    let a = to_rows(sys.a());
    let r = sys.noise().unwrap();
    let mut rhs = vec![0.0; 4];
    for i in 0..15 {
        let c = p.as_slice()[i] * r[i] / dot(&a[i], &v[i]);
        for (t, vi) in rhs.iter_mut().zip(&v[i]) {
            *t += c * vi;
        }
    }
    for (x, y) in lhs.iter().zip(&rhs) {
        assert!((x - y).abs() < 1e-12);
    }
    let d = diagnose(&sys, &p, StepRule::ObliqueExact).unwrap();
    assert!((d.fixed_point_error.unwrap() - norm(&off)).abs() < 1e-14);
}

#[test]
fn noise_gamma_is_worst_row() {
    let sys = mismatched(10, 3, 0.2, 9, true);
    let a = to_rows(sys.a());
    let v = to_rows(sys.v());
    let want = (0..10)
        .map(|i| sys.noise().unwrap()[i].abs() * norm(&v[i]) / dot(&a[i], &v[i]).abs())
        .fold(0.0, f64::max);
    assert!((noise_gamma(&sys).unwrap() - want).abs() < 1e-15);
    assert!(noise_gamma(&mismatched(10, 3, 0.2, 9, false)).is_err());
}

#[test]
fn bound_formula_and_preconditions() {
    let got = inconsistent_bound(10, 0.2, 0.5, 4.0).unwrap();
    let want = 0.9f64.powi(10) * 4.0 + 2.0 * 0.25 / 0.2;
    assert!((got - want).abs() < 1e-14);
    assert_eq!(inconsistent_bound(0, 0.5, 0.0, 3.0).unwrap(), 3.0);
    assert!(matches!(inconsistent_bound(1, -0.1, 1.0, 1.0), Err(Error::NoGuarantee(_))));
    assert!(inconsistent_bound(1, 1.5, 1.0, 1.0).is_err());
}

#[test]
fn restricted_diagnostics_use_range_of_v_transpose() {
    let sys = assemble_underdetermined(12, 30, 0.3, 2).unwrap();
    let p = ProbabilityVector::uniform(12);
    let d = diagnose_auto(&sys, &p, StepRule::ObliqueExact).unwrap();
    assert!(d.restricted);
    assert_eq!(d, restricted_diagnostics(&sys, &p, StepRule::ObliqueExact).unwrap());
    // on range(V^T) the reference W is compressed by Z
    let z = to_rows(&restricted_basis(&sys).unwrap());
    let (_, w) = reference_operators(&sys, &p);
    let wz = matmul(&transpose(&z), &matmul(&w, &z));
    let sym: Vec<Vec<f64>> = (0..wz.len())
        .map(|i| (0..wz.len()).map(|j| 0.5 * (wz[i][j] + wz[j][i])).collect())
        .collect();
    let want = sturm_eigenvalue(&sym, 0);
    assert!((d.lambda - want).abs() < 1e-10, "{} vs {want}", d.lambda);
    // the unrestricted lambda is zero or negative: V^T D A has a kernel
    let full = diagnose(&sys, &p, StepRule::ObliqueExact).unwrap();
    assert!(full.lambda <= 1e-10);
    assert!(d.lambda > 0.0);
}

#[test]
fn restricted_analysis_needs_wide_system() {
    let sys = mismatched(8, 3, 0.3, 1, false);
    assert!(matches!(restricted_basis(&sys), Err(Error::Precondition(_))));
}

#[test]
fn reports_are_consistent() {
    let sys = mismatched(9, 3, 0.3, 5, true);
    let d = diagnose(&sys, &ProbabilityVector::uniform(9), StepRule::ObliqueExact).unwrap();
    let row = d.to_csv_row();
    assert_eq!(row.split(',').count(), rkma::RateDiagnostics::CSV_HEADER.split(',').count());
    assert!(row.starts_with(&d.lambda.to_string()));
    assert!(d.to_key_value().contains(&format!("conjectured_ordering = {}", d.conjectured_ordering_holds())));
}
