//! Exact moments `E prod <g_i, g_j>` over the edges of a multigraph, by
//! summing over set partitions of the edge multiset.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{invalid, Error, Result};

pub const MAX_WICK_EDGES: usize = 12;

/// A loopless multigraph; each entry of `edges` is one copy of an edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multigraph {
    k: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
}

impl Multigraph {
    /// Edges with multiplicities `(i, j, mult)`.
    pub fn new(k: usize, edges: &[(usize, usize, usize)]) -> Result<Self> {
        let mut list = Vec::new();
        let mut degrees = vec![0; k];
        for &(i, j, mult) in edges {
            if i >= k || j >= k {
                return Err(invalid(format!("edge ({i}, {j}) out of range for {k} vertices")));
            }
            if i == j {
                return Err(invalid(format!("self-loop at {i}")));
            }
            if mult == 0 {
                return Err(invalid("multiplicities must be at least 1"));
            }
            for _ in 0..mult {
                list.push((i.min(j), i.max(j)));
            }
            degrees[i] += mult;
            degrees[j] += mult;
        }
        list.sort_unstable();
        Ok(Self {
            k,
            edges: list,
            degrees,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.k
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }
}

/// The moment as a float plus the exact integer.
#[derive(Debug, Clone, PartialEq)]
pub struct WickValue {
    pub value: f64,
    pub exact: BigUint,
}

fn gaussian_moment(m: usize) -> u128 {
    if m % 2 == 1 {
        return 0;
    }
    (1..m).step_by(2).map(|x| x as u128).product()
}

/// Partition-count polynomial: `c[b]` is the weight of partitions into `b`
/// blocks, so the moment is `sum_b c[b] (d)_b`.
fn block_weights(h: &Multigraph) -> Result<Vec<u128>> {
    let m = h.edges.len();
    let mut weights = vec![0u128; m + 1];
    if m == 0 {
        weights[0] = 1;
        return Ok(weights);
    }
    let mut rgs = vec![0usize; m];
    let mut maxes = vec![0usize; m];
    let mut deg = vec![0usize; m * h.k];
    let overflow = || Error::SizeLimit("Wick weights overflow 128 bits".into());
    loop {
        let blocks = maxes[m - 1] + 1;
        deg.iter_mut().take(blocks * h.k).for_each(|x| *x = 0);
        for (e, &(i, j)) in h.edges.iter().enumerate() {
            deg[rgs[e] * h.k + i] += 1;
            deg[rgs[e] * h.k + j] += 1;
        }
        let mut w: u128 = 1;
        for &x in &deg[..blocks * h.k] {
            let g = gaussian_moment(x);
            if g == 0 {
                w = 0;
                break;
            }
            w = w.checked_mul(g).ok_or_else(overflow)?;
        }
        weights[blocks] = weights[blocks].checked_add(w).ok_or_else(overflow)?;
        // next restricted-growth string
        let mut pos = m - 1;
        loop {
            if pos == 0 {
                return Ok(weights);
            }
            let limit = maxes[pos - 1] + 1;
            if rgs[pos] < limit {
                rgs[pos] += 1;
                maxes[pos] = maxes[pos - 1].max(rgs[pos]);
                for q in (pos + 1)..m {
                    rgs[q] = 0;
                    maxes[q] = maxes[pos];
                }
                break;
            }
            pos -= 1;
        }
    }
}

fn check_size(h: &Multigraph) -> Result<()> {
    if h.edges.len() > MAX_WICK_EDGES {
        return Err(Error::SizeLimit(format!(
            "{} edges exceeds the enumeration limit of {MAX_WICK_EDGES}",
            h.edges.len()
        )));
    }
    Ok(())
}

/// `E prod_{(i,j) in E(H)} <g_i, g_j>` for i.i.d. `g_i ~ N(0, I_d)`.
pub fn wick_multigraph_expectation(h: &Multigraph, d: u64) -> Result<WickValue> {
    check_size(h)?;
    if h.degrees.iter().any(|x| x % 2 == 1) {
        return Ok(WickValue {
            value: 0.0,
            exact: BigUint::zero(),
        });
    }
    let weights = block_weights(h)?;
    let mut total = BigUint::zero();
    let mut falling = BigUint::from(1u32);
    for (b, &w) in weights.iter().enumerate() {
        if b > 0 {
            if d < b as u64 {
                break;
            }
            falling *= d - (b as u64 - 1);
        }
        total += &falling * BigUint::from(w);
    }
    Ok(WickValue {
        value: total.to_f64().unwrap_or(f64::INFINITY),
        exact: total,
    })
}

/// `E prod <x_i, x_j>` for i.i.d. uniform points on `S^{d-1}`, as an exact
/// rational and a float.
pub fn spherical_multigraph_expectation(h: &Multigraph, d: u64) -> Result<(f64, BigRational)> {
    let w = wick_multigraph_expectation(h, d)?;
    if w.exact.is_zero() {
        return Ok((0.0, BigRational::zero()));
    }
    // E|g|^(2l) = d (d+2) ... (d+2l-2)
    let mut denom = BigInt::from(1);
    for &deg in &h.degrees {
        for j in 0..deg / 2 {
            denom *= BigInt::from(d + 2 * j as u64);
        }
    }
    let r = BigRational::new(BigInt::from(w.exact), denom);
    Ok((r.to_f64().unwrap_or(f64::NAN), r))
}
