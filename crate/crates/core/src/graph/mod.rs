//! Random geometric and Erdos-Renyi graphs.

mod io;

use std::fmt;

use faer::Mat;
use rayon::prelude::*;

pub use io::{decode_bits, decode_edge_list, encode_bits, encode_edge_list, BITS_MAGIC, BITS_VERSION};

use crate::distance::DistanceKernelSpec;
use crate::error::{invalid, Error, Result};
use crate::geometry::{Geometry, PointCloud};
use crate::kernels::{KernelSpec, KernelVariant};
use crate::rng::EdgeUniforms;

/// Largest vertex count held as a dense bit matrix.
pub const MAX_VERTICES: usize = 1 << 14;

/// The kernel a graph is sampled from.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKernel {
    /// A function of `<x_i, x_j>`.
    InnerProduct(KernelSpec),
    /// A function of `x_i - x_j`.
    Distance(DistanceKernelSpec),
}

impl fmt::Display for ModelKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKernel::InnerProduct(k) => k.fmt(f),
            ModelKernel::Distance(k) => k.fmt(f),
        }
    }
}

impl std::str::FromStr for ModelKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let call = crate::kernels::parse_call(s)?;
        if call.name == "distance" {
            DistanceKernelSpec::from_call(&call).map(ModelKernel::Distance)
        } else {
            KernelSpec::from_call(&call).map(ModelKernel::InnerProduct)
        }
    }
}

impl From<KernelSpec> for ModelKernel {
    fn from(k: KernelSpec) -> Self {
        ModelKernel::InnerProduct(k)
    }
}

impl From<DistanceKernelSpec> for ModelKernel {
    fn from(k: DistanceKernelSpec) -> Self {
        ModelKernel::Distance(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Rgg {
        kernel: String,
        cloud_seed: Option<u64>,
        edge_seed: u64,
        /// Pairs whose linear-kernel probability was clamped into `[0, 1]`.
        clamped: usize,
    },
    Er {
        p: f64,
        seed: u64,
    },
    /// Read from a file or built from an edge list.
    External,
}

/// A simple undirected graph stored as dense bit rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    words: usize,
    bits: Vec<u64>,
    provenance: Provenance,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("graph needs at least one vertex"));
    }
    if n > MAX_VERTICES {
        return Err(Error::SizeLimit(format!(
            "{n} vertices exceeds the dense limit of {MAX_VERTICES}"
        )));
    }
    Ok(())
}

impl Graph {
    fn empty(n: usize, provenance: Provenance) -> Self {
        let words = n.div_ceil(64);
        Self {
            n,
            words,
            bits: vec![0; n * words],
            provenance,
        }
    }

    /// Builds from per-row upper-triangle flags produced in parallel.
    fn from_upper(n: usize, upper: Vec<Vec<u64>>, provenance: Provenance) -> Self {
        let mut g = Self::empty(n, provenance);
        for (i, row) in upper.into_iter().enumerate() {
            for (w, &word) in row.iter().enumerate() {
                let mut m = word;
                while m != 0 {
                    let j = w * 64 + m.trailing_zeros() as usize;
                    m &= m - 1;
                    g.set(i, j);
                }
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        check_n(n)?;
        let mut g = Self::empty(n, Provenance::External);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(invalid(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(invalid(format!("self-loop at {i}")));
            }
            if g.has_edge(i, j) {
                return Err(invalid(format!("duplicate edge ({i}, {j})")));
            }
            g.set(i, j);
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Result<Self> {
        sample_er(n, 1.0, 0)
    }

    fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
        self.bits[j * self.words + i / 64] |= 1 << (i % 64);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn degree(&self, i: usize) -> usize {
        self.bits[i * self.words..(i + 1) * self.words]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    /// Fraction of the `n choose 2` pairs that are edges.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.edge_count() as f64 / (self.n * (self.n - 1) / 2) as f64
    }

    /// Edges `(i, j)` with `i < j` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).filter(move |&j| self.has_edge(i, j)).map(move |j| (i, j)))
    }

    /// Subgraph induced on vertices `0..m`.
    pub fn induced_prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n {
            return Err(invalid(format!("prefix size {m} out of range 1..={}", self.n)));
        }
        let mut g = Self::empty(m, self.provenance.clone());
        for i in 0..m {
            for j in (i + 1)..m {
                if self.has_edge(i, j) {
                    g.set(i, j);
                }
            }
        }
        Ok(g)
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    /// Number of triangles.
    pub fn triangle_count(&self) -> u64 {
        let mut total = 0u64;
        for (i, j) in self.edges() {
            let (a, b) = (self.row(i), self.row(j));
            total += a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as u64).sum::<u64>();
        }
        total / 3
    }

    /// Number of paths of length two, `sum_i C(deg_i, 2)`.
    pub fn wedge_count(&self) -> u64 {
        (0..self.n)
            .map(|i| {
                let k = self.degree(i) as u64;
                k * k.saturating_sub(1) / 2
            })
            .sum()
    }

    /// Same edges, tagged as read from outside.
    pub fn without_provenance(mut self) -> Self {
        self.provenance = Provenance::External;
        self
    }
}

/// Dot product with a fixed summation order, so a pair's value does not
/// depend on the rest of the cloud.
#[inline]
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Samples `A_ij ~ Bernoulli(K(x_i, x_j))` independently given the cloud.
/// The uniform for pair `{i, j}` depends only on `(seed, i, j)`.
pub fn sample_rgg(kernel: &ModelKernel, cloud: &PointCloud, seed: u64) -> Result<Graph> {
    let n = cloud.n();
    check_n(n)?;
    if let ModelKernel::InnerProduct(k) = kernel {
        let v = k.validity();
        if !v.in_unit_interval() {
            return Err(Error::InvalidKernel(format!(
                "{k} ranges over [{}, {}]",
                v.min, v.max
            )));
        }
    }
    let uniforms = EdgeUniforms::new(seed);
    let words = n.div_ceil(64);
    let sq_norms: Vec<f64> = (0..n).map(|i| dot4(cloud.point(i), cloud.point(i))).collect();
    let results: Vec<Result<(Vec<u64>, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0u64; words];
            let mut clamped = 0usize;
            let xi = cloud.point(i);
            for j in (i + 1)..n {
                let ip = dot4(xi, cloud.point(j));
                let prob = match kernel {
                    ModelKernel::InnerProduct(k) => {
                        inner_product_probability(k, ip, cloud.geometry(), &mut clamped)?
                    }
                    ModelKernel::Distance(k) => k.eval_sq_dist((sq_norms[i] + sq_norms[j] - 2.0 * ip).max(0.0)),
                };
                if uniforms.get(i, j) < prob {
                    row[j / 64] |= 1 << (j % 64);
                }
            }
            Ok((row, clamped))
        })
        .collect();
    let mut upper = Vec::with_capacity(n);
    let mut clamped = 0;
    for r in results {
        let (row, c) = r?;
        upper.push(row);
        clamped += c;
    }
    Ok(Graph::from_upper(
        n,
        upper,
        Provenance::Rgg {
            kernel: kernel.to_string(),
            cloud_seed: cloud.seed(),
            edge_seed: seed,
            clamped,
        },
    ))
}

fn inner_product_probability(k: &KernelSpec, t: f64, geometry: Geometry, clamped: &mut usize) -> Result<f64> {
    if geometry == Geometry::SphereUniform || t.abs() <= 1.0 {
        return Ok(k.eval(t.clamp(-1.0, 1.0)));
    }
    if !k.defined_off_sphere() {
        return Err(Error::GeometryMismatch(format!(
            "{k} is only defined on [-1, 1] but a Gaussian cloud produced <x_i, x_j> = {t}"
        )));
    }
    let v = k.eval(t);
    if let KernelVariant::Linear { .. } = k.variant() {
        if !(0.0..=1.0).contains(&v) {
            *clamped += 1;
            return Ok(v.clamp(0.0, 1.0));
        }
    }
    Ok(v)
}

/// `G(n, p)`.
pub fn sample_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    check_n(n)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("edge probability {p} outside [0, 1]")));
    }
    let uniforms = EdgeUniforms::new(seed);
    let words = n.div_ceil(64);
    let upper: Vec<Vec<u64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0u64; words];
            for j in (i + 1)..n {
                if uniforms.get(i, j) < p {
                    row[j / 64] |= 1 << (j % 64);
                }
            }
            row
        })
        .collect();
    Ok(Graph::from_upper(n, upper, Provenance::Er { p, seed }))
}

/// `(A - p) / sqrt(p (1 - p))` with zero diagonal.
#[derive(Debug, Clone)]
pub struct StandardizedAdjacency {
    n: usize,
    p: f64,
    entries: Mat<f64>,
}

pub fn standardize_adjacency(g: &Graph, p: f64) -> Result<StandardizedAdjacency> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("standardizing needs p in (0, 1), got {p}")));
    }
    let hi = ((1.0 - p) / p).sqrt();
    let lo = -(p / (1.0 - p)).sqrt();
    let n = g.n();
    let entries = Mat::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else if g.has_edge(i, j) {
            hi
        } else {
            lo
        }
    });
    Ok(StandardizedAdjacency { n, p, entries })
}

impl StandardizedAdjacency {
    /// Wraps an arbitrary symmetric matrix, for synthetic inputs to the
    /// estimators. The diagonal is kept as given.
    pub fn from_matrix(entries: Mat<f64>, p: f64) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(invalid("matrix must be square"));
        }
        for i in 0..n {
            for j in 0..i {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(invalid("matrix must be symmetric"));
                }
            }
        }
        Ok(Self { n, p, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_mat(&self) -> faer::MatRef<'_, f64> {
        self.entries.as_ref()
    }
}
