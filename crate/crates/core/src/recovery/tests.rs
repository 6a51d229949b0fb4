use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::geometry::Geometry;
use crate::kernels::KernelSpec;
use crate::rng::stream_rng;

/// Orthonormal columns by modified Gram-Schmidt on a Gaussian matrix.
fn random_orthonormal(n: usize, k: usize, seed: u64) -> Mat<f64> {
    let mut rng = stream_rng(seed, 0);
    let mut m = Mat::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    for j in 0..k {
        for i in 0..j {
            let dot: f64 = (0..n).map(|r| m[(r, i)] * m[(r, j)]).sum();
            for r in 0..n {
                m[(r, j)] -= dot * m[(r, i)];
            }
        }
        let norm = (0..n).map(|r| m[(r, j)] * m[(r, j)]).sum::<f64>().sqrt();
        for r in 0..n {
            m[(r, j)] /= norm;
        }
    }
    m
}

fn outer(v: &Mat<f64>, c: f64) -> Mat<f64> {
    let n = v.nrows();
    let mut out = Mat::<f64>::zeros(n, n);
    matmul(out.as_mut(), Accum::Replace, v.as_ref(), v.transpose(), c, Par::Seq);
    for i in 0..n {
        for j in 0..i {
            out[(j, i)] = out[(i, j)];
        }
    }
    out
}

#[test]
fn exact_low_rank_input() {
    let (n, d) = (40, 3);
    let v = random_orthonormal(n, d, 1);
    let abar = StandardizedAdjacency::from_matrix(outer(&v, 5.0), 0.5).unwrap();
    let est = spectral_recover(&abar, d).unwrap();
    let expect = outer(&v, n as f64 / d as f64);
    for i in 0..n {
        for j in 0..n {
            assert!((est.estimate[(i, j)] - expect[(i, j)]).abs() < 1e-8);
        }
    }
    assert!(est.gap.gap_d > 4.99 && est.gap.gap_d1 < 1e-10);
    assert_eq!(largest_gap_dimension(&est.spectrum, 10), Some(3));
}

#[test]
fn zero_input_is_handled() {
    let abar = StandardizedAdjacency::from_matrix(Mat::zeros(10, 10), 0.5).unwrap();
    let est = spectral_recover(&abar, 2).unwrap();
    assert!(est.estimate.norm_l2().is_finite());
    assert_eq!(est.gap.gap_d, 0.0);
}

#[test]
fn dimension_bounds() {
    let abar = StandardizedAdjacency::from_matrix(Mat::zeros(5, 5), 0.5).unwrap();
    assert!(spectral_recover(&abar, 0).is_err());
    assert!(spectral_recover(&abar, 5).is_err());
    assert!(spectral_recover(&abar, 4).is_ok());
}

#[test]
fn estimate_is_symmetric_and_orthonormal() {
    let k = ModelKernel::InnerProduct(KernelSpec::gaussian_cdf(1.0).unwrap());
    let cloud = sample_sphere_points(300, 6, 3).unwrap();
    let g = sample_rgg(&k, &cloud, 4).unwrap();
    let abar = standardize_adjacency(&g, 0.5).unwrap();
    let est = spectral_recover(&abar, 6).unwrap();
    for i in 0..300 {
        for j in 0..300 {
            assert!((est.estimate[(i, j)] - est.estimate[(j, i)]).abs() < 1e-10);
        }
    }
    let u = &est.vectors;
    for a in 0..6 {
        for b in 0..6 {
            let dot: f64 = (0..300).map(|r| u[(r, a)] * u[(r, b)]).sum();
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!((dot - expect).abs() < 1e-10);
        }
    }
    let z = est.zero_diagonal();
    assert_eq!(z[(7, 7)], 0.0);
    assert_eq!(z[(7, 8)], est.estimate[(7, 8)]);
    for w in est.spectrum.windows(2) {
        assert!(w[0].abs() >= w[1].abs());
    }
}

#[test]
fn scoring_identities() {
    let (n, d) = (60, 5);
    let seeds = 200;
    let (mut zero, mut double) = (Vec::new(), Vec::new());
    for s in 0..seeds {
        let cloud = sample_sphere_points(n, d, s).unwrap();
        let x = gram_matrix(&cloud, DiagMode::Zero);
        assert_eq!(relative_mse(x.as_mat(), &x, d).unwrap(), 0.0);
        zero.push(relative_mse(Mat::<f64>::zeros(n, n).as_ref(), &x, d).unwrap());
        let twice = Mat::from_fn(n, n, |i, j| 2.0 * x.get(i, j));
        double.push(relative_mse(twice.as_ref(), &x, d).unwrap());
    }
    assert!(MeanSe::of(&zero).z_from(1.0) < 4.0, "{:?}", MeanSe::of(&zero));
    assert_eq!(zero, double);
    let cloud = sample_sphere_points(n, d, 0).unwrap();
    let unit = gram_matrix(&cloud, DiagMode::Unit);
    assert!(relative_mse(unit.as_mat(), &unit, d).is_err());
    let x = gram_matrix(&cloud, DiagMode::Zero);
    assert!(relative_mse(Mat::<f64>::zeros(3, 3).as_ref(), &x, d).is_err());
}

#[test]
fn score_is_rotation_invariant() {
    let k = ModelKernel::InnerProduct(KernelSpec::gaussian_cdf(1.0).unwrap());
    let (n, d) = (200, 5);
    let (mut base, mut rotated) = (Vec::new(), Vec::new());
    for s in 0..50u64 {
        let cloud = sample_sphere_points(n, d, 1000 + s).unwrap();
        let q = random_orthonormal(d, d, 2000 + s);
        let mut coords = vec![0.0; n * d];
        for i in 0..n {
            let x = cloud.point(i);
            for a in 0..d {
                coords[i * d + a] = (0..d).map(|b| q[(a, b)] * x[b]).sum();
            }
        }
        let turned = PointCloud::from_coords(n, d, coords, Geometry::SphereUniform).unwrap();
        base.push(recover_on_cloud(&k, &cloud, s).unwrap().0);
        rotated.push(recover_on_cloud(&k, &turned, s).unwrap().0);
    }
    let diffs: Vec<f64> = base.iter().zip(&rotated).map(|(a, b)| a - b).collect();
    let se = MeanSe::of(&base).se;
    let mean_diff = diffs.iter().sum::<f64>() / diffs.len() as f64;
    assert!(mean_diff.abs() < 2.0 * se, "{mean_diff} vs {se}");
}

#[test]
fn sweep_is_monotone() {
    let k = ModelKernel::InnerProduct(KernelSpec::gaussian_cdf(1.0).unwrap());
    // Past the threshold the score drifts down like 2 - d/n, so the grid
    // stays below d/n = 0.11.
    let curve = recovery_sweep(&k, 300, &[2, 4, 8, 16, 32], 10, 8).unwrap();
    for w in curve.points.windows(2) {
        let se = (w[0].mse.se.powi(2) + w[1].mse.se.powi(2)).sqrt();
        assert!(w[1].mse.mean >= w[0].mse.mean - 2.0 * se, "{:?}", curve.points);
    }
    let c = curve.crossing.expect("the curve crosses 0.5");
    assert!(c > 2.0 && c < 32.0);
    assert!(recovery_sweep(&k, 300, &[2, 4], 9, 8).is_err());
    assert!(recovery_sweep(&k, 300, &[4, 2], 10, 8).is_err());
}

#[test]
fn crossing_interpolation() {
    let pts = [(1.0, 0.1), (4.0, 0.3), (16.0, 0.7), (64.0, 0.9)];
    assert!((first_crossing(&pts, 0.5).unwrap() - 8.0).abs() < 1e-12);
    assert_eq!(first_crossing(&pts, 0.95), None);
}
