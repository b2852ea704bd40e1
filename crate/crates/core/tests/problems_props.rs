mod common;

use common::{dot, norm};
use proptest::prelude::*;
use rkma::diagnostics::{diagnose, diagnose_auto, restricted_basis};
use rkma::linalg::symmetric_eig_min;
use rkma::problems::ct::{ray_offsets, RAYS_PER_GROUP};
use rkma::problems::*;
use rkma::StepRule;

#[test]
fn gaussian_moments_and_rank() {
    let a = gen_gaussian(500, 200, 3).unwrap();
    let x = a.as_slice();
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 0.01, "mean {mean}");
    assert!((0.98..=1.02).contains(&var), "variance {var}");
    let smallest = symmetric_eig_min(&a.tr_matmul(&a)).unwrap().0;
    assert!(smallest > 1.0, "lambda_min(A^T A) = {smallest}");
}

#[test]
fn threshold_zero_fraction_matches_normal_cdf() {
    let a = gen_gaussian(500, 200, 4).unwrap();
    let v = mismatch_threshold(&a, 0.5).unwrap();
    let frac = v.as_slice().iter().filter(|&&x| x == 0.0).count() as f64 / v.as_slice().len() as f64;
    // P(|Z| < 0.5) = erf(0.5 / sqrt 2)
    assert!((frac - 0.382_925).abs() < 0.02, "fraction {frac}");
}

#[test]
fn fig1_instance_has_positive_lambda() {
    let a = gen_gaussian(500, 200, 0).unwrap();
    let v = mismatch_threshold(&a, 0.5).unwrap();
    let sys = assemble_consistent(a, v, 0).unwrap();
    let p = ProbabilityScheme::RowNormA.build(&sys).unwrap();
    let d = diagnose(&sys, &p, StepRule::ObliqueExact).unwrap();
    assert!(d.lambda > 0.0);
    assert!(d.conjectured_ordering_holds());
}

#[test]
fn noisy_instance_keeps_noise_apart() {
    let a = gen_gaussian(40, 10, 5).unwrap();
    let v = mismatch_threshold(&a, 0.5).unwrap();
    let sys = assemble_inconsistent(a.clone(), v.clone(), 0.1, 5).unwrap();
    let clean = assemble_consistent(a, v, 5).unwrap();
    assert_eq!(sys.b(), clean.b());
    assert_eq!(sys.truth(), clean.truth());
    let r = sys.noise().unwrap();
    for ((rhs, b), ri) in sys.rhs().iter().zip(sys.b()).zip(r) {
        assert_eq!(*rhs, b + ri);
    }
    let p = ProbabilityScheme::RowNormA.build(&sys).unwrap();
    let d = diagnose(&sys, &p, StepRule::ObliqueExact).unwrap();
    assert!(d.gamma.unwrap() > 0.0);
    assert!(d.fixed_point_error.unwrap() > 0.0);
}

#[test]
fn underdetermined_solution_lies_in_range_of_v_transpose() {
    let sys = assemble_underdetermined(60, 300, 0.3, 7).unwrap();
    let z = restricted_basis(&sys).unwrap();
    let x = sys.truth().unwrap();
    let proj = z.matvec(&z.tr_matvec(x));
    let out: Vec<f64> = x.iter().zip(&proj).map(|(a, b)| a - b).collect();
    assert!(norm(&out) <= 1e-8 * norm(x));
    // generically outside range(A^T)
    assert!(range_defect(sys.a(), x).unwrap() > 1e-3 * norm(x));
    let p = ProbabilityScheme::Uniform.build(&sys).unwrap();
    assert!(diagnose_auto(&sys, &p, StepRule::ObliqueExact).unwrap().restricted);
}

#[test]
fn probopt_rows_shrink() {
    let sys = assemble_scaled_for_probopt(150, 50, 0.05, 0).unwrap();
    let norms = sys.a_norms_sq();
    let head: f64 = norms[..30].iter().sum();
    let tail: f64 = norms[120..].iter().sum();
    assert!(head > 2.0 * tail);
    let zeros = sys.v().as_slice().iter().filter(|&&x| x == 0.0).count();
    assert_eq!(zeros, 375);
    assert_eq!(
        assemble_scaled_for_probopt(20, 5, 0.1, 9).unwrap().v(),
        assemble_scaled_for_probopt(20, 5, 0.1, 9).unwrap().v()
    );
}

/// Chord length of a line through the square, by dense sampling.
fn supersampled_chord(grid_n: usize, angle: f64, s: f64) -> f64 {
    let half = grid_n as f64 / 2.0;
    let t = angle.to_radians();
    let (sin, cos) = t.sin_cos();
    let reach = 2.0 * grid_n as f64;
    let steps = 400_000;
    let du = 2.0 * reach / steps as f64;
    (0..steps)
        .filter(|k| {
            let u = -reach + (*k as f64 + 0.5) * du;
            let (x, y) = (s * cos - u * sin, s * sin + u * cos);
            x.abs() < half && y.abs() < half
        })
        .count() as f64
        * du
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn ray_row_sum_is_chord_length(grid_n in 2usize..12, angle in 0.0f64..180.0, frac in -0.75f64..0.75) {
        let s = frac * grid_n as f64;
        let row: f64 = trace_ray(grid_n, angle, s).iter().map(|(_, l)| l).sum();
        let want = supersampled_chord(grid_n, angle, s);
        prop_assert!((row - want).abs() < 1e-3, "row {} chord {}", row, want);
    }

    #[test]
    fn ray_entries_are_bounded(grid_n in 2usize..12, angle in 0.0f64..180.0, frac in -0.75f64..0.75) {
        for (idx, l) in trace_ray(grid_n, angle, frac * grid_n as f64) {
            prop_assert!(idx < grid_n * grid_n);
            prop_assert!(l > 0.0 && l <= 2f64.sqrt() + 1e-12);
        }
    }
}

#[test]
fn standard_geometry_row_count() {
    let g = ScanGeometry::standard(50);
    let full = g.matrix().unwrap();
    assert_eq!(full.rows(), 5400);
    assert!(full.as_slice().iter().all(|&x| x >= 0.0));
    let x = smooth_phantom(50, 1).unwrap();
    let b = full.matvec(&x);
    let pair = ct_mismatch_pair(&full, &b, Some(x.clone())).unwrap();
    let m = pair.system.rows();
    assert!((1400..=1800).contains(&m), "{m} rows");
    assert_eq!(m + pair.dropped_zero + pair.dropped_pairing, 5400 / RAYS_PER_GROUP);
    // consistency survives the row selection
    assert!(pair.system.residual_norm(&x) <= 1e-12 * norm(pair.system.b()));
}

#[test]
fn averaged_rows_are_the_group_mean() {
    let g = ScanGeometry::standard(8);
    let full = g.matrix().unwrap();
    let b = vec![0.0; full.rows()];
    let pair = ct_mismatch_pair(&full, &b, None).unwrap();
    for (row, &grp) in pair.kept_groups.iter().enumerate() {
        let a = pair.system.a().row(row);
        assert_eq!(a, full.row(RAYS_PER_GROUP * grp + 1));
        for (j, v) in pair.system.v().row(row).iter().enumerate() {
            let mean = (0..3).map(|k| full[(3 * grp + k, j)]).sum::<f64>() / 3.0;
            assert!((v - mean).abs() < 1e-15);
        }
        assert!(dot(a, pair.system.v().row(row)) > 0.0);
    }
}

#[test]
fn detector_offsets_are_centred() {
    let o = ray_offsets(4, 8.0);
    assert_eq!(o, vec![-3.0, -1.0, 1.0, 3.0]);
}

#[test]
fn phantom_is_smoother_than_its_raw_field() {
    for seed in 0..3 {
        let p = smooth_phantom(32, seed).unwrap();
        let raw = power_law_field(32, 0.3, 1.3, seed).unwrap();
        assert!(gradient_energy(&p, 32) * 10.0 <= gradient_energy(&raw, 32));
    }
}
