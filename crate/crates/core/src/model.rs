//! Problem data: the uncontrolled diffusion, the discount rate and the
//! marginal yield of harvesting, plus Feller classification of the boundary 0.
//!
//! The population follows `dX = b(X)dt + σ(X)dW − dZ` and harvesting earns
//! `f(X(s−)) dZ(s)` discounted at rate `r` until extinction.

use serde::{Deserialize, Serialize};

use crate::error::{HarvestError, Result};
use crate::quad::cumulative_trapezoid_from_right;

/// Parametric diffusion families supported by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Family {
    /// `b(x) = μ`, `σ(x) = σ`.
    DriftedBm { mu: f64, sigma: f64 },
    /// `b(x) = μx`, `σ(x) = σx`.
    Gbm { mu: f64, sigma: f64 },
    /// `b(x) = μx(1 − x/K)`, `σ(x) = σx`.
    Logistic { mu: f64, k: f64, sigma: f64 },
}

/// Marginal yield `f`, continuous and nonincreasing with `0 < f(0) < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum YieldFn {
    Constant { p: f64 },
    /// `p·e^(−αx)`
    Exponential { p: f64, alpha: f64 },
    /// `p/(1 + αx)`
    Rational { p: f64, alpha: f64 },
}

impl YieldFn {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            YieldFn::Constant { p } => p,
            YieldFn::Exponential { p, alpha } => p * (-alpha * x).exp(),
            YieldFn::Rational { p, alpha } => p / (1.0 + alpha * x),
        }
    }

    /// Analytic derivative `f′(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            YieldFn::Constant { .. } => 0.0,
            YieldFn::Exponential { p, alpha } => -alpha * p * (-alpha * x).exp(),
            YieldFn::Rational { p, alpha } => -alpha * p / (1.0 + alpha * x).powi(2),
        }
    }

    /// Exact `∫_a^b f(y) dy`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            YieldFn::Constant { p } => p * (b - a),
            YieldFn::Exponential { p, alpha } => {
                if alpha == 0.0 {
                    p * (b - a)
                } else {
                    // p e^{-αa} (1 − e^{−α(b−a)}) / α
                    -p * (-alpha * a).exp() * (-alpha * (b - a)).exp_m1() / alpha
                }
            }
            YieldFn::Rational { p, alpha } => {
                if alpha == 0.0 {
                    p * (b - a)
                } else {
                    // ln((1+αb)/(1+αa)) = ln1p(α(b−a)/(1+αa))
                    p * (alpha * (b - a) / (1.0 + alpha * a)).ln_1p() / alpha
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let (p, alpha) = match *self {
            YieldFn::Constant { p } => (p, 0.0),
            YieldFn::Exponential { p, alpha } | YieldFn::Rational { p, alpha } => (p, alpha),
        };
        if !(p.is_finite() && p > 0.0) {
            return Err(HarvestError::InvalidModel(format!("yield p must be > 0, got {p}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(HarvestError::InvalidModel(format!(
                "yield alpha must be >= 0 (nonincreasing f), got {alpha}"
            )));
        }
        Ok(())
    }
}

/// Full problem description. Immutable once validated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDescriptor", into = "ModelDescriptor")]
pub struct ModelSpec {
    pub family: Family,
    pub discount: f64,
    pub yield_fn: YieldFn,
}

/// Wire form of [`ModelSpec`]:
/// `{"family": .., "params": {..}, "discount": r, "yield": {"kind": .., "params": {..}}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDescriptor {
    #[serde(flatten)]
    family: Family,
    discount: f64,
    #[serde(rename = "yield")]
    yield_fn: YieldFn,
}

impl TryFrom<ModelDescriptor> for ModelSpec {
    type Error = HarvestError;

    fn try_from(d: ModelDescriptor) -> Result<Self> {
        ModelSpec::new(d.family, d.discount, d.yield_fn)
    }
}

impl From<ModelSpec> for ModelDescriptor {
    fn from(m: ModelSpec) -> Self {
        ModelDescriptor { family: m.family, discount: m.discount, yield_fn: m.yield_fn }
    }
}

/// Feller type of the boundary 0. Entrance is rejected at classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryClass {
    Exit,
    Natural,
    Regular,
}

/// Probe settings for the Feller integrals near 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrationParams {
    /// Right end of the Feller integrals, in units of the model scale.
    pub x_ref: f64,
    /// Lower cut-offs ε (in units of the model scale); must be decreasing.
    pub eps_sweep: [f64; 3],
    /// Log-grid resolution.
    pub points_per_decade: usize,
}

impl Default for IntegrationParams {
    fn default() -> Self {
        Self { x_ref: 1.0, eps_sweep: [1e-4, 1e-6, 1e-8], points_per_decade: 200 }
    }
}

/// Feller integrals evaluated at each cut-off of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FellerIntegrals {
    /// `Σ(ε) = ∫_ε^c (S(c) − S(x)) m(x) dx`
    pub sigma: [f64; 3],
    /// `N(ε) = ∫_ε^c (M(c) − M(x)) s(x) dx`
    pub n: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Growth {
    Converges,
    Diverges,
    Ambiguous,
}

fn growth(vals: &[f64; 3]) -> Growth {
    if vals.iter().any(|v| !v.is_finite()) {
        return Growth::Diverges;
    }
    let d1 = vals[1] - vals[0];
    let d2 = vals[2] - vals[1];
    let floor = 1e-12 * vals[2].abs().max(f64::MIN_POSITIVE);
    if d2 <= floor || d2 <= 0.5 * d1 {
        Growth::Converges
    } else if d2 >= 0.9 * d1 {
        // log-divergence gives d2 == d1; power divergence gives d2 ≫ d1
        Growth::Diverges
    } else {
        Growth::Ambiguous
    }
}

/// Map finite/infinite Feller integrals onto the boundary class.
pub fn class_from_integrals(sigma_finite: bool, n_finite: bool) -> Result<BoundaryClass> {
    match (sigma_finite, n_finite) {
        (true, true) => Ok(BoundaryClass::Regular),
        (true, false) => Ok(BoundaryClass::Exit),
        (false, true) => Err(HarvestError::EntranceBoundary),
        (false, false) => Ok(BoundaryClass::Natural),
    }
}

impl ModelSpec {
    pub fn new(family: Family, discount: f64, yield_fn: YieldFn) -> Result<Self> {
        let m = Self { family, discount, yield_fn };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.discount.is_finite() && self.discount > 0.0) {
            return Err(HarvestError::InvalidModel(format!(
                "discount must be > 0, got {}",
                self.discount
            )));
        }
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(HarvestError::InvalidModel(format!("{name} must be finite")))
            }
        };
        match self.family {
            Family::DriftedBm { mu, sigma } | Family::Gbm { mu, sigma } => {
                finite(mu, "mu")?;
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(HarvestError::InvalidModel(format!("sigma must be > 0, got {sigma}")));
                }
            }
            Family::Logistic { mu, k, sigma } => {
                if !(mu.is_finite() && mu > 0.0) {
                    return Err(HarvestError::InvalidModel(format!("logistic mu must be > 0, got {mu}")));
                }
                if !(k.is_finite() && k > 0.0) {
                    return Err(HarvestError::InvalidModel(format!("carrying capacity must be > 0, got {k}")));
                }
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(HarvestError::InvalidModel(format!("sigma must be > 0, got {sigma}")));
                }
            }
        }
        self.yield_fn.validate()
    }

    /// Characteristic length of the state space (1 unless the family has one).
    pub fn scale(&self) -> f64 {
        match self.family {
            Family::Logistic { k, .. } => k,
            _ => 1.0,
        }
    }

    pub fn drift_at(&self, x: f64) -> f64 {
        match self.family {
            Family::DriftedBm { mu, .. } => mu,
            Family::Gbm { mu, .. } => mu * x,
            Family::Logistic { mu, k, .. } => mu * x * (1.0 - x / k),
        }
    }

    pub fn drift_derivative_at(&self, x: f64) -> f64 {
        match self.family {
            Family::DriftedBm { .. } => 0.0,
            Family::Gbm { mu, .. } => mu,
            Family::Logistic { mu, k, .. } => mu * (1.0 - 2.0 * x / k),
        }
    }

    pub fn sigma_at(&self, x: f64) -> f64 {
        match self.family {
            Family::DriftedBm { sigma, .. } => sigma,
            Family::Gbm { sigma, .. } | Family::Logistic { sigma, .. } => sigma * x,
        }
    }

    pub fn sigma2_at(&self, x: f64) -> f64 {
        let s = self.sigma_at(x);
        s * s
    }

    /// `d(σ²)/dx`
    pub fn sigma2_derivative_at(&self, x: f64) -> f64 {
        match self.family {
            Family::DriftedBm { .. } => 0.0,
            Family::Gbm { sigma, .. } | Family::Logistic { sigma, .. } => 2.0 * sigma * sigma * x,
        }
    }

    pub fn yield_at(&self, x: f64) -> f64 {
        self.yield_fn.value(x)
    }

    pub fn yield_derivative_at(&self, x: f64) -> f64 {
        self.yield_fn.derivative(x)
    }

    /// Leading exponent `γ₊ > 0` of the increasing solution near a natural 0
    /// for state-proportional families: positive root of `½σ²γ(γ−1) + μγ − r`.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.family {
            Family::Gbm { mu, sigma } | Family::Logistic { mu, sigma, .. } => {
                let a = 0.5 * sigma * sigma;
                let b = mu - a;
                let c = -self.discount;
                Some((-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a))
            }
            Family::DriftedBm { .. } => None,
        }
    }

    /// Evaluate the Feller integrals for each cut-off of the sweep.
    pub fn feller_integrals(&self, probe: &IntegrationParams) -> FellerIntegrals {
        let c = probe.x_ref * self.scale();
        let eps_min = probe.eps_sweep[2];
        let decades = (1.0 / eps_min).log10();
        let n = (decades * probe.points_per_decade as f64).round() as usize;
        let du = std::f64::consts::LN_10 / probe.points_per_decade as f64;
        // log grid from eps_min·c up to c, decades land on nodes
        let u: Vec<f64> = (0..=n).map(|j| c.ln() - (n - j) as f64 * du).collect();
        let x: Vec<f64> = u.iter().map(|v| v.exp()).collect();

        // ln s(x) = ∫_x^c 2b/σ² dt, integrated in u = ln t
        let a: Vec<f64> = x
            .iter()
            .map(|&xi| 2.0 * self.drift_at(xi) / self.sigma2_at(xi) * xi)
            .collect();
        let ln_s = cumulative_trapezoid_from_right(&u, &a);
        let s: Vec<f64> = ln_s.iter().map(|v| v.exp()).collect();
        let m: Vec<f64> = x
            .iter()
            .zip(&s)
            .map(|(&xi, &si)| 1.0 / (self.sigma2_at(xi) * si))
            .collect();

        let sx: Vec<f64> = s.iter().zip(&x).map(|(a, b)| a * b).collect();
        let mx: Vec<f64> = m.iter().zip(&x).map(|(a, b)| a * b).collect();
        let s_inner = cumulative_trapezoid_from_right(&u, &sx);
        let m_inner = cumulative_trapezoid_from_right(&u, &mx);

        let sig_integrand: Vec<f64> =
            (0..=n).map(|j| s_inner[j] * m[j] * x[j]).collect();
        let n_integrand: Vec<f64> = (0..=n).map(|j| m_inner[j] * s[j] * x[j]).collect();
        let sig_cum = cumulative_trapezoid_from_right(&u, &sig_integrand);
        let n_cum = cumulative_trapezoid_from_right(&u, &n_integrand);

        let at = |eps: f64| -> usize {
            let k = ((1.0 / eps).log10() * probe.points_per_decade as f64).round() as usize;
            n - k.min(n)
        };
        let idx = [at(probe.eps_sweep[0]), at(probe.eps_sweep[1]), at(probe.eps_sweep[2])];
        FellerIntegrals {
            sigma: idx.map(|i| sig_cum[i]),
            n: idx.map(|i| n_cum[i]),
        }
    }

    /// Feller classification of 0 from the sweep of lower cut-offs.
    pub fn classify_boundary_zero(&self, probe: &IntegrationParams) -> Result<BoundaryClass> {
        let fi = self.feller_integrals(probe);
        let gs = growth(&fi.sigma);
        let gn = growth(&fi.n);
        if gs == Growth::Ambiguous || gn == Growth::Ambiguous {
            return Err(HarvestError::AmbiguousBoundary(format!(
                "Σ(ε) = {:?}, N(ε) = {:?}",
                fi.sigma, fi.n
            )));
        }
        class_from_integrals(gs == Growth::Converges, gn == Growth::Converges)
    }
}
