//! Taylor polynomials of smooth kernels at the origin.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::{CdfBase, KernelSpec, KernelVariant, Validity};
use crate::error::{Error, Result};
use crate::numeric::normal_pdf;

/// A Taylor polynomial that may or may not be a probability kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorApproximation {
    pub coeffs: Vec<f64>,
    pub validity: Validity,
    kernel: KernelSpec,
}

impl TaylorApproximation {
    pub fn is_valid(&self) -> bool {
        self.validity.in_unit_interval()
    }

    /// The polynomial as an evaluable profile, valid or not.
    pub fn profile(&self) -> &KernelSpec {
        &self.kernel
    }

    /// The polynomial as a kernel; fails when it leaves `[0, 1]`.
    pub fn kernel(&self) -> Result<KernelSpec> {
        if self.is_valid() {
            Ok(self.kernel.clone())
        } else {
            Err(Error::InvalidKernel(format!(
                "Taylor polynomial ranges over [{}, {}]",
                self.validity.min, self.validity.max
            )))
        }
    }
}

/// Degree-`degree` Taylor polynomial of `kernel` at 0.
pub fn taylor_kernel(kernel: &KernelSpec, degree: usize) -> Result<TaylorApproximation> {
    let coeffs = match kernel.variant() {
        KernelVariant::Polynomial { coeffs } => {
            let mut c = coeffs.clone();
            c.truncate(degree + 1);
            c
        }
        KernelVariant::Linear { p, r, .. } => {
            let mut c = vec![*p, *r];
            c.truncate(degree + 1);
            c
        }
        KernelVariant::Constant { p } => vec![*p],
        KernelVariant::ScaledCdf { base: CdfBase::Gaussian, r } => gaussian_cdf_coeffs(*r, degree),
        KernelVariant::ScaledCdf { base: CdfBase::Logistic, r } => logistic_coeffs(*r, degree),
        KernelVariant::HardThreshold { .. } => {
            return Err(Error::InvalidKernel("a hard threshold has no Taylor expansion".into()))
        }
    };
    let poly = KernelSpec::unchecked(KernelVariant::Polynomial { coeffs: coeffs.clone() });
    Ok(TaylorApproximation {
        validity: poly.validity(),
        coeffs,
        kernel: poly,
    })
}

/// `Phi(r t) = 1/2 + sum_k r^k phi(0) (-1)^(k-1) h_{k-1} / k`, where
/// `h_m = He_m(0) / m!` obeys `h_{m+1} = -h_{m-1} / (m + 1)`.
fn gaussian_cdf_coeffs(r: f64, degree: usize) -> Vec<f64> {
    let mut out = vec![0.5];
    let mut h = vec![1.0, 0.0];
    let mut rk = 1.0;
    for k in 1..=degree {
        let m = k - 1;
        while h.len() <= m {
            let j = h.len() - 1;
            let next = -h[j - 1] / (j + 1) as f64;
            h.push(next);
        }
        rk *= r;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        out.push(rk * normal_pdf(0.0) * sign * h[m] / k as f64);
    }
    out
}

/// Derivatives of the logistic function as polynomials in `s = sigma(x)`:
/// `P_0 = s`, `P_{k+1} = P_k'(s) s (1 - s)`, evaluated exactly at `s = 1/2`.
fn logistic_coeffs(r: f64, degree: usize) -> Vec<f64> {
    let mut poly: Vec<BigInt> = vec![BigInt::zero(), BigInt::one()];
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut fact = BigInt::one();
    let mut out = Vec::with_capacity(degree + 1);
    let mut rk = 1.0;
    for k in 0..=degree {
        if k > 0 {
            fact *= k;
            rk *= r;
        }
        let mut val = BigRational::zero();
        let mut pow = BigRational::one();
        for c in &poly {
            val += BigRational::from_integer(c.clone()) * &pow;
            pow *= &half;
        }
        let coeff = val / BigRational::from_integer(fact.clone());
        out.push(rk * coeff.to_f64().unwrap_or(0.0));
        // derivative times s - s^2
        let deriv: Vec<BigInt> = poly
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * BigInt::from(i))
            .collect();
        let mut next = vec![BigInt::zero(); deriv.len() + 2];
        for (i, c) in deriv.iter().enumerate() {
            next[i + 1] += c;
            next[i + 2] -= c;
        }
        poly = next;
    }
    out
}
