//! Latent point clouds and Gram matrices.

use faer::{Accum, Mat, MatRef, Par};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    SphereUniform,
    /// Coordinates i.i.d. N(0, 1/d).
    GaussianIsotropic,
}

/// `n` latent points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    d: usize,
    coords: Vec<f64>,
    geometry: Geometry,
    seed: Option<u64>,
}

impl PointCloud {
    /// Builds a cloud from explicit coordinates. Sphere clouds must have unit
    /// rows to 1e-12.
    pub fn from_coords(n: usize, d: usize, coords: Vec<f64>, geometry: Geometry) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(invalid("point cloud needs n >= 1 and d >= 1"));
        }
        if coords.len() != n * d {
            return Err(invalid(format!(
                "expected {} coordinates, got {}",
                n * d,
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        if geometry == Geometry::SphereUniform {
            for (i, row) in coords.chunks_exact(d).enumerate() {
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("row {i} has norm {norm}, not 1")));
                }
            }
        }
        Ok(Self {
            n,
            d,
            coords,
            geometry,
            seed: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    /// Seed the cloud was sampled with, if any.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn inner(&self, i: usize, j: usize) -> f64 {
        dot(self.point(i), self.point(j))
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// The first `m` points as a cloud of their own.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n {
            return Err(invalid(format!("prefix size {m} out of range 1..={}", self.n)));
        }
        Ok(Self {
            n: m,
            d: self.d,
            coords: self.coords[..m * self.d].to_vec(),
            geometry: self.geometry,
            seed: self.seed,
        })
    }

    pub(crate) fn as_mat(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.coords, self.n, self.d)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(n: usize, d: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    Ok(())
}

/// Uniform points on `S^{d-1}`.
pub fn sample_sphere_points(n: usize, d: usize, seed: u64) -> Result<PointCloud> {
    check_dims(n, d)?;
    let mut coords = vec![0.0; n * d];
    coords
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(i, row)| {
            let mut rng = stream_rng(seed, i as u64);
            loop {
                for x in row.iter_mut() {
                    *x = StandardNormal.sample(&mut rng);
                }
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|x| *x /= norm);
                    break;
                }
            }
        });
    Ok(PointCloud {
        n,
        d,
        coords,
        geometry: Geometry::SphereUniform,
        seed: Some(seed),
    })
}

/// Points with i.i.d. N(0, 1/d) coordinates.
pub fn sample_gaussian_points(n: usize, d: usize, seed: u64) -> Result<PointCloud> {
    check_dims(n, d)?;
    let scale = 1.0 / (d as f64).sqrt();
    let mut coords = vec![0.0; n * d];
    coords
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(i, row)| {
            let mut rng = stream_rng(seed, i as u64);
            for x in row.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = z * scale;
            }
        });
    Ok(PointCloud {
        n,
        d,
        coords,
        geometry: Geometry::GaussianIsotropic,
        seed: Some(seed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagMode {
    #[default]
    Zero,
    Unit,
}

/// Symmetric matrix of pairwise inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    entries: Mat<f64>,
    diag_mode: DiagMode,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag_mode(&self) -> DiagMode {
        self.diag_mode
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        self.entries.as_ref()
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.entries
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                let v = self.entries[(i, j)];
                acc += v * v;
            }
        }
        acc
    }
}

pub fn gram_matrix(cloud: &PointCloud, diag_mode: DiagMode) -> GramMatrix {
    let n = cloud.n();
    let x = cloud.as_mat();
    let mut g = Mat::<f64>::zeros(n, n);
    faer::linalg::matmul::matmul(g.as_mut(), Accum::Replace, x, x.transpose(), 1.0, Par::Seq);
    for j in 0..n {
        for i in (j + 1)..n {
            let mut v = g[(i, j)];
            if cloud.geometry() == Geometry::SphereUniform {
                v = v.clamp(-1.0, 1.0);
            }
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
        g[(j, j)] = match diag_mode {
            DiagMode::Zero => 0.0,
            DiagMode::Unit => 1.0,
        };
    }
    GramMatrix {
        n,
        entries: g,
        diag_mode,
    }
}

/// `E[<x1, x2>^k]` for independent uniform points on `S^{d-1}`:
/// `(k-1)!! / (d (d+2) ... (d+k-2))` for even `k`, zero for odd `k`.
pub fn sphere_overlap_moment(d: usize, k: u32) -> Result<f64> {
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    if k % 2 == 1 {
        return Ok(0.0);
    }
    let l = k / 2;
    let d = d as f64;
    if k <= 60 {
        let mut acc = 1.0;
        for i in 0..l {
            acc *= (2 * i + 1) as f64 / (d + 2.0 * i as f64);
        }
        Ok(acc)
    } else {
        let mut log = 0.0;
        for i in 0..l {
            log += ((2 * i + 1) as f64).ln() - (d + 2.0 * i as f64).ln();
        }
        Ok(log.exp())
    }
}
