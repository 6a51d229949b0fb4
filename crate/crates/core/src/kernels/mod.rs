//! Inner-product kernels `K: [-1, 1] -> [0, 1]` and their standardized forms.

mod grammar;
mod taylor;

use std::fmt;

pub use grammar::{parse_call, Arg, Call};
pub use taylor::{taylor_kernel, TaylorApproximation};

use crate::error::{invalid, Error, Result};
use crate::numeric::normal_cdf;
use crate::quadrature::OverlapMeasure;

/// Points on the validity grid.
pub const VALIDITY_GRID: usize = 10_000;
/// Margin for "bounded away from 0 and 1".
pub const VALIDITY_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CdfBase {
    Gaussian,
    Logistic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelVariant {
    /// `p + r t`.
    Linear { p: f64, r: f64, allow_any: bool },
    /// `sum a_k t^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `F(r t)` for a symmetric CDF `F`.
    ScaledCdf { base: CdfBase, r: f64 },
    /// `1{t >= tau}`.
    HardThreshold { tau: f64 },
    Constant { p: f64 },
}

/// An inner-product kernel. Construct through the checked constructors or
/// by parsing a kernel string.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    variant: KernelVariant,
}

/// Range of a kernel over the validity grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validity {
    pub min: f64,
    pub max: f64,
}

impl Validity {
    pub fn in_unit_interval(&self) -> bool {
        self.min >= 0.0 && self.max <= 1.0
    }

    pub fn bounded_away(&self) -> bool {
        self.min >= VALIDITY_MARGIN && self.max <= 1.0 - VALIDITY_MARGIN
    }
}

/// Something with a profile on `[-1, 1]` that quadrature can integrate.
pub trait ProfileFn {
    fn value(&self, t: f64) -> f64;

    /// Interior points where the profile is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Polynomial degree, or 0 when not a polynomial.
    fn degree_hint(&self) -> usize {
        0
    }
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidKernel(format!("{name} must be finite")))
    }
}

impl KernelSpec {
    fn checked(variant: KernelVariant) -> Result<Self> {
        let k = Self { variant };
        let v = k.validity();
        if !v.in_unit_interval() {
            return Err(Error::InvalidKernel(format!(
                "{k} leaves [0, 1] on [-1, 1]: min {}, max {}",
                v.min, v.max
            )));
        }
        Ok(k)
    }

    pub(crate) fn unchecked(variant: KernelVariant) -> Self {
        Self { variant }
    }

    /// `p + r t` with `0 < r <= p < 1/2`.
    pub fn linear(p: f64, r: f64) -> Result<Self> {
        finite("p", p)?;
        finite("r", r)?;
        if !(0.0 < r && r <= p && p < 0.5) {
            return Err(Error::InvalidKernel(format!(
                "linear kernel needs 0 < r <= p < 1/2, got p = {p}, r = {r}"
            )));
        }
        Self::checked(KernelVariant::Linear { p, r, allow_any: false })
    }

    /// `p + r t` for any `(p, r)` that keeps it in `[0, 1]`.
    pub fn linear_override(p: f64, r: f64) -> Result<Self> {
        finite("p", p)?;
        finite("r", r)?;
        Self::checked(KernelVariant::Linear { p, r, allow_any: true })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidKernel("polynomial needs at least one coefficient".into()));
        }
        for &c in &coeffs {
            finite("coefficient", c)?;
        }
        Self::checked(KernelVariant::Polynomial { coeffs })
    }

    pub fn gaussian_cdf(r: f64) -> Result<Self> {
        Self::scaled_cdf(CdfBase::Gaussian, r)
    }

    pub fn logistic(r: f64) -> Result<Self> {
        Self::scaled_cdf(CdfBase::Logistic, r)
    }

    pub fn scaled_cdf(base: CdfBase, r: f64) -> Result<Self> {
        finite("r", r)?;
        if r <= 0.0 {
            return Err(Error::InvalidKernel(format!("scale must be positive, got {r}")));
        }
        Self::checked(KernelVariant::ScaledCdf { base, r })
    }

    pub fn hard_threshold(tau: f64) -> Result<Self> {
        finite("tau", tau)?;
        Self::checked(KernelVariant::HardThreshold { tau })
    }

    pub fn constant(p: f64) -> Result<Self> {
        finite("p", p)?;
        Self::checked(KernelVariant::Constant { p })
    }

    pub fn variant(&self) -> &KernelVariant {
        &self.variant
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.variant {
            KernelVariant::Linear { p, r, .. } => p + r * t,
            KernelVariant::Polynomial { coeffs } => horner(coeffs, t),
            KernelVariant::ScaledCdf { base, r } => cdf(*base, r * t),
            KernelVariant::HardThreshold { tau } => {
                if t >= *tau {
                    1.0
                } else {
                    0.0
                }
            }
            KernelVariant::Constant { p } => *p,
        }
    }

    /// Whether `eval` is meaningful for arguments outside `[-1, 1]`. Linear
    /// kernels are, after clamping to `[0, 1]`.
    pub fn defined_off_sphere(&self) -> bool {
        !matches!(self.variant, KernelVariant::Polynomial { .. })
    }

    /// Min and max over a Chebyshev-Lobatto grid of [`VALIDITY_GRID`] points.
    pub fn validity(&self) -> Validity {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let m = VALIDITY_GRID - 1;
        for i in 0..=m {
            let t = (std::f64::consts::PI * i as f64 / m as f64).cos();
            let v = self.eval(t);
            min = min.min(v);
            max = max.max(v);
        }
        if let KernelVariant::HardThreshold { tau } = self.variant {
            // the jump may fall between grid points
            for t in [tau, tau.next_down()] {
                if (-1.0..=1.0).contains(&t) {
                    min = min.min(self.eval(t));
                    max = max.max(self.eval(t));
                }
            }
        }
        Validity { min, max }
    }

    /// Short identifier for file names.
    pub fn slug(&self) -> String {
        self.to_string()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
            .collect()
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn cdf(base: CdfBase, x: f64) -> f64 {
    match base {
        CdfBase::Gaussian => normal_cdf(x),
        CdfBase::Logistic => 1.0 / (1.0 + (-x).exp()),
    }
}

impl ProfileFn for KernelSpec {
    fn value(&self, t: f64) -> f64 {
        self.eval(t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self.variant {
            KernelVariant::HardThreshold { tau } => vec![tau],
            _ => Vec::new(),
        }
    }

    fn degree_hint(&self) -> usize {
        match &self.variant {
            KernelVariant::Linear { .. } => 1,
            KernelVariant::Polynomial { coeffs } => coeffs.len() - 1,
            _ => 0,
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variant {
            KernelVariant::Linear { p, r, allow_any } => {
                write!(f, "linear(p={p:?},r={r:?}")?;
                if *allow_any {
                    write!(f, ",override=true")?;
                }
                write!(f, ")")
            }
            KernelVariant::Polynomial { coeffs } => {
                write!(f, "poly(")?;
                for (i, c) in coeffs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c:?}")?;
                }
                write!(f, ")")
            }
            KernelVariant::ScaledCdf { base: CdfBase::Gaussian, r } => write!(f, "gauss_cdf(r={r:?})"),
            KernelVariant::ScaledCdf { base: CdfBase::Logistic, r } => write!(f, "logistic(r={r:?})"),
            KernelVariant::HardThreshold { tau } => write!(f, "threshold(tau={tau:?})"),
            KernelVariant::Constant { p } => write!(f, "const(p={p:?})"),
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let call = parse_call(s)?;
        Self::from_call(&call)
    }
}

impl KernelSpec {
    pub(crate) fn from_call(call: &Call) -> Result<Self> {
        let err = |msg: String| Error::Parse {
            line: 1,
            column: call.name_column,
            message: msg,
        };
        let wrap = |r: Result<Self>| r.map_err(|e| err(e.to_string()));
        match call.name.as_str() {
            "linear" => {
                let allowed = ["p", "r", "override"];
                call.expect_keys(&allowed)?;
                let p = call.number("p")?;
                let r = call.number("r")?;
                if call.flag("override")? {
                    wrap(Self::linear_override(p, r))
                } else {
                    wrap(Self::linear(p, r))
                }
            }
            "poly" => {
                let coeffs = call.positional()?;
                wrap(Self::polynomial(coeffs))
            }
            "gauss_cdf" => {
                call.expect_keys(&["r"])?;
                wrap(Self::gaussian_cdf(call.number("r")?))
            }
            "logistic" => {
                call.expect_keys(&["r"])?;
                wrap(Self::logistic(call.number("r")?))
            }
            "threshold" => {
                call.expect_keys(&["tau"])?;
                wrap(Self::hard_threshold(call.number("tau")?))
            }
            "const" => {
                call.expect_keys(&["p"])?;
                wrap(Self::constant(call.number("p")?))
            }
            other => Err(err(format!("unknown kernel `{other}`"))),
        }
    }
}

/// `p = E K(<x1, x2>)` for uniform points on `S^{d-1}`.
pub fn edge_density(kernel: &KernelSpec, d: f64) -> Result<f64> {
    let mu = OverlapMeasure::new(d)?;
    match kernel.variant {
        KernelVariant::HardThreshold { tau } => Ok(mu.upper_tail(tau)),
        KernelVariant::Constant { p } => Ok(p),
        _ => mu.integrate(|t| kernel.eval(t), kernel.degree_hint(), &[]),
    }
}

/// `kappa(t) = (K(t) - p) / sqrt(p (1 - p))` at a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedKernel {
    base: KernelSpec,
    d: f64,
    p: f64,
    scale: f64,
}

/// Centering tolerance.
pub const CENTERING_TOLERANCE: f64 = 1e-8;

pub fn standardize(kernel: &KernelSpec, d: f64) -> Result<StandardizedKernel> {
    let p = edge_density(kernel, d)?;
    standardize_with(kernel, d, p)
}

/// Standardizes with a supplied edge density.
pub fn standardize_with(kernel: &KernelSpec, d: f64, p: f64) -> Result<StandardizedKernel> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("edge density {p} is not strictly inside (0, 1)")));
    }
    Ok(StandardizedKernel {
        base: kernel.clone(),
        d,
        p,
        scale: (p * (1.0 - p)).sqrt(),
    })
}

impl StandardizedKernel {
    pub fn base(&self) -> &KernelSpec {
        &self.base
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.base.eval(t) - self.p) / self.scale
    }

    pub fn measure(&self) -> Result<OverlapMeasure> {
        OverlapMeasure::new(self.d)
    }

    /// `E kappa(T)`, which should vanish.
    pub fn mean(&self) -> Result<f64> {
        self.measure()?
            .integrate(|t| self.eval(t), self.degree_hint(), &self.breakpoints())
    }

    /// `E kappa(T)^2`.
    pub fn norm_sq(&self) -> Result<f64> {
        let v = self.eval(0.0);
        if let KernelVariant::Constant { .. } = self.base.variant {
            return Ok(v * v);
        }
        self.measure()?
            .integrate(|t| self.eval(t).powi(2), 2 * self.degree_hint(), &self.breakpoints())
    }

    /// Slope `kappa'(0)` when available in closed form.
    pub fn derivative_at_zero(&self) -> Option<f64> {
        let k1 = match &self.base.variant {
            KernelVariant::Linear { r, .. } => *r,
            KernelVariant::Polynomial { coeffs } => coeffs.get(1).copied().unwrap_or(0.0),
            KernelVariant::ScaledCdf { base: CdfBase::Gaussian, r } => r * crate::numeric::normal_pdf(0.0),
            KernelVariant::ScaledCdf { base: CdfBase::Logistic, r } => r / 4.0,
            KernelVariant::Constant { .. } => 0.0,
            KernelVariant::HardThreshold { .. } => return None,
        };
        Some(k1 / self.scale)
    }

    /// Coefficients of `kappa` as a polynomial, when the base is one.
    pub fn polynomial_coeffs(&self) -> Option<Vec<f64>> {
        let mut c = match &self.base.variant {
            KernelVariant::Linear { p, r, .. } => vec![*p, *r],
            KernelVariant::Polynomial { coeffs } => coeffs.clone(),
            KernelVariant::Constant { p } => vec![*p],
            _ => return None,
        };
        c[0] -= self.p;
        c.iter_mut().for_each(|v| *v /= self.scale);
        Some(c)
    }
}

impl ProfileFn for StandardizedKernel {
    fn value(&self, t: f64) -> f64 {
        self.eval(t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.base.breakpoints()
    }

    fn degree_hint(&self) -> usize {
        self.base.degree_hint()
    }
}

/// `||K1 - K2||` in `L^2(mu_d)`.
pub fn l2_mu_distance(k1: &dyn ProfileFn, k2: &dyn ProfileFn, d: f64) -> Result<f64> {
    let mu = OverlapMeasure::new(d)?;
    let mut bps = k1.breakpoints();
    bps.extend(k2.breakpoints());
    let deg = 2 * k1.degree_hint().max(k2.degree_hint());
    let sq = mu.integrate(|t| (k1.value(t) - k2.value(t)).powi(2), deg, &bps)?;
    Ok(sq.max(0.0).sqrt())
}
