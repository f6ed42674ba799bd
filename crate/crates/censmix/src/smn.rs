//! Scale-mixture-of-normal (SMN) distributions: the Normal, Student-t, Slash,
//! and Contaminated-Normal sub-families, with numerically stable densities,
//! cdfs, samplers, and the special functions the censored-data code relies on.
//!
//! A standardized SMN variable is T = U^{-1/2} Z with Z standard normal and U
//! a positive mixing variable; the general variable is Y = mu + sigma * T.

use crate::error::{Error, Result};
use crate::numeric::{
    ln_diff_exp, ln_normal_cdf, ln_normal_pdf, logaddexp, normal_cdf, LN_SQRT_2PI,
};
use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::{gamma, gamma_lr, gamma_ui, ln_gamma};

/// Family selector carrying the mixing-law parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmnFamily {
    /// U = 1 with probability one.
    Normal,
    /// U ~ Gamma(nu/2, rate nu/2); `nu` > 0.
    StudentT { nu: f64 },
    /// U ~ Beta(nu, 1); `nu` > 0.
    Slash { nu: f64 },
    /// U = gamma with probability nu, else 1; both in (0, 1).
    ContaminatedNormal { nu: f64, gamma: f64 },
}

/// Family without its parameters, e.g. for CLI selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Normal,
    StudentT,
    Slash,
    ContaminatedNormal,
}

impl FamilyKind {
    /// Short code used on the command line: n, t, sl, cn.
    #[must_use]
    pub fn code(self) -> &'static str {
        match self {
            FamilyKind::Normal => "n",
            FamilyKind::StudentT => "t",
            FamilyKind::Slash => "sl",
            FamilyKind::ContaminatedNormal => "cn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" | "normal" => Ok(FamilyKind::Normal),
            "t" | "student" | "studentt" => Ok(FamilyKind::StudentT),
            "sl" | "slash" => Ok(FamilyKind::Slash),
            "cn" | "contaminated" | "contaminatednormal" => Ok(FamilyKind::ContaminatedNormal),
            other => Err(Error::InvalidParameter(format!(
                "unknown family '{other}' (expected n, t, sl, or cn)"
            ))),
        }
    }
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

impl SmnFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SmnFamily::Normal => Ok(()),
            SmnFamily::StudentT { nu } | SmnFamily::Slash { nu } => {
                if nu.is_finite() && nu > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "degrees-of-freedom parameter must be positive, got {nu}"
                    )))
                }
            }
            SmnFamily::ContaminatedNormal { nu, gamma } => {
                if nu > 0.0 && nu < 1.0 && gamma > 0.0 && gamma < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "contaminated-normal parameters must lie in (0,1), got nu={nu}, gamma={gamma}"
                    )))
                }
            }
        }
    }

    #[must_use]
    pub fn kind(&self) -> FamilyKind {
        match self {
            SmnFamily::Normal => FamilyKind::Normal,
            SmnFamily::StudentT { .. } => FamilyKind::StudentT,
            SmnFamily::Slash { .. } => FamilyKind::Slash,
            SmnFamily::ContaminatedNormal { .. } => FamilyKind::ContaminatedNormal,
        }
    }

    /// E(U^r) of the mixing variable; finite for r > -nu/2 (t), r > -nu
    /// (slash), and all r otherwise.
    #[must_use]
    pub fn mixing_moment(&self, r: f64) -> f64 {
        match *self {
            SmnFamily::Normal => 1.0,
            SmnFamily::StudentT { nu } => {
                (ln_gamma(nu / 2.0 + r) - ln_gamma(nu / 2.0) - r * (nu / 2.0).ln()).exp()
            }
            SmnFamily::Slash { nu } => nu / (nu + r),
            SmnFamily::ContaminatedNormal { nu, gamma } => nu * gamma.powf(r) + 1.0 - nu,
        }
    }

    /// Number of free family parameters (per component when untied).
    #[must_use]
    pub fn param_count(kind: FamilyKind) -> usize {
        match kind {
            FamilyKind::Normal => 0,
            FamilyKind::StudentT | FamilyKind::Slash => 1,
            FamilyKind::ContaminatedNormal => 2,
        }
    }
}

/// Location mu and scale sigma^2 > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationScale {
    pub mu: f64,
    pub sigma2: f64,
}

impl LocationScale {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "location-scale must have finite mu and sigma2 > 0, got mu={mu}, sigma2={sigma2}"
            )));
        }
        Ok(LocationScale { mu, sigma2 })
    }

    #[must_use]
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

// ---------------------------------------------------------------------------
// Slash helper: ln( x^{-a} * gamma_lower(a, x) ), the scaled lower incomplete
// gamma that all slash closed forms reduce to.
// ---------------------------------------------------------------------------

/// ln( x^{-a} * int_0^x t^{a-1} e^{-t} dt ) for a > 0, x >= 0.
///
/// Uses the ascending series x^{-a} gamma(a,x) = e^{-x} sum_k x^k /
/// (a (a+1) ... (a+k)) where it converges quickly, and the regularized
/// incomplete gamma otherwise. The series branch tracks a scale offset so
/// huge partial sums cannot overflow.
pub(crate) fn ln_gamma_scaled(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return -a.ln();
    }
    let series = |a: f64, x: f64| -> f64 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut offset = 0.0f64;
        for k in 0..100_000 {
            term *= x / (a + 1.0 + k as f64);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            if sum > 1e280 {
                sum *= 1e-280;
                term *= 1e-280;
                offset += 280.0 * std::f64::consts::LN_10;
            }
        }
        -x + sum.ln() + offset
    };
    if x <= 30.0 || x < 0.9 * a {
        return series(a, x);
    }
    let p = gamma_lr(a, x);
    if p > 0.0 {
        ln_gamma(a) + p.ln() - a * x.ln()
    } else {
        series(a, x)
    }
}

/// Standardized slash log-density with shape parameter `nu`.
pub(crate) fn ln_slash_pdf(t: f64, nu: f64) -> f64 {
    nu.ln() + ln_gamma_scaled(nu + 0.5, 0.5 * t * t) - LN_SQRT_2PI
}

/// Standardized slash cdf with shape parameter `nu`.
///
/// Uses F(t) = Phi(t) - t f(t) / (2 nu); for t < 0 both terms are positive so
/// the identity is cancellation-free.
pub(crate) fn slash_cdf(t: f64, nu: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    let f = ln_slash_pdf(t, nu).exp();
    (normal_cdf(t) - t * f / (2.0 * nu)).clamp(0.0, 1.0)
}

/// Standardized slash log-cdf, stable in the left tail.
pub(crate) fn ln_slash_cdf(t: f64, nu: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if t >= 0.0 {
        return slash_cdf(t, nu).ln();
    }
    logaddexp(
        ln_normal_cdf(t),
        (-t).ln() + ln_slash_pdf(t, nu) - (2.0 * nu).ln(),
    )
}

// ---------------------------------------------------------------------------
// Student-t helpers.
// ---------------------------------------------------------------------------

pub(crate) fn ln_t_pdf(t: f64, nu: f64) -> f64 {
    ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()
}

pub(crate) fn t_cdf(t: f64, nu: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    StudentsT::new(0.0, 1.0, nu)
        .expect("validated dof")
        .cdf(t)
}

pub(crate) fn ln_t_cdf(t: f64, nu: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let p = t_cdf(t, nu);
    if p > 1e-290 {
        return p.ln();
    }
    // Power-law tail: F(t) ~ f(t) |t| / nu as t -> -infinity.
    ln_t_pdf(t, nu) + t.abs().ln() - nu.ln()
}

// ---------------------------------------------------------------------------
// Family dispatch for standardized log-pdf / cdf / log-cdf.
// ---------------------------------------------------------------------------

pub(crate) fn ln_pdf_std(t: f64, fam: &SmnFamily) -> f64 {
    match *fam {
        SmnFamily::Normal => ln_normal_pdf(t),
        SmnFamily::StudentT { nu } => ln_t_pdf(t, nu),
        SmnFamily::Slash { nu } => ln_slash_pdf(t, nu),
        SmnFamily::ContaminatedNormal { nu, gamma } => logaddexp(
            nu.ln() + 0.5 * gamma.ln() + ln_normal_pdf(gamma.sqrt() * t),
            (1.0 - nu).ln() + ln_normal_pdf(t),
        ),
    }
}

pub(crate) fn cdf_std(t: f64, fam: &SmnFamily) -> f64 {
    match *fam {
        SmnFamily::Normal => normal_cdf(t),
        SmnFamily::StudentT { nu } => t_cdf(t, nu),
        SmnFamily::Slash { nu } => slash_cdf(t, nu),
        SmnFamily::ContaminatedNormal { nu, gamma } => {
            nu * normal_cdf(gamma.sqrt() * t) + (1.0 - nu) * normal_cdf(t)
        }
    }
}

pub(crate) fn ln_cdf_std(t: f64, fam: &SmnFamily) -> f64 {
    match *fam {
        SmnFamily::Normal => ln_normal_cdf(t),
        SmnFamily::StudentT { nu } => ln_t_cdf(t, nu),
        SmnFamily::Slash { nu } => ln_slash_cdf(t, nu),
        SmnFamily::ContaminatedNormal { nu, gamma } => logaddexp(
            nu.ln() + ln_normal_cdf(gamma.sqrt() * t),
            (1.0 - nu).ln() + ln_normal_cdf(t),
        ),
    }
}

/// ln P(t1 < T < t2) for a standardized SMN variable, stable in both tails.
///
/// Intervals entirely inside one tail are evaluated as log-differences of
/// log-cdfs (mirrored through symmetry on the right); intervals straddling
/// zero carry enough mass for linear-space subtraction.
pub(crate) fn ln_interval_prob_std(t1: f64, t2: f64, fam: &SmnFamily) -> f64 {
    debug_assert!(t1 < t2);
    if t2 <= 0.0 {
        ln_diff_exp(ln_cdf_std(t2, fam), ln_cdf_std(t1, fam))
    } else if t1 >= 0.0 {
        // P(t1 < T < t2) = P(-t2 < T < -t1) by symmetry.
        ln_diff_exp(ln_cdf_std(-t1, fam), ln_cdf_std(-t2, fam))
    } else {
        (cdf_std(t2, fam) - cdf_std(t1, fam)).max(1e-300).ln()
    }
}

// ---------------------------------------------------------------------------
// Public operations.
// ---------------------------------------------------------------------------

/// Density of the SMN distribution at `y` with location-scale `loc`.
pub fn smn_pdf(y: f64, loc: &LocationScale, fam: &SmnFamily) -> Result<f64> {
    Ok(smn_ln_pdf(y, loc, fam)?.exp())
}

/// Log-density of the SMN distribution at `y`.
pub fn smn_ln_pdf(y: f64, loc: &LocationScale, fam: &SmnFamily) -> Result<f64> {
    fam.validate()?;
    let s = loc.sigma();
    Ok(ln_pdf_std((y - loc.mu) / s, fam) - s.ln())
}

/// Cdf of the standardized SMN distribution (mu = 0, sigma^2 = 1).
pub fn smn_cdf(x: f64, fam: &SmnFamily) -> Result<f64> {
    fam.validate()?;
    Ok(cdf_std(x, fam))
}

/// Log-cdf of the standardized SMN distribution, accurate in the left tail.
pub fn smn_ln_cdf(x: f64, fam: &SmnFamily) -> Result<f64> {
    fam.validate()?;
    Ok(ln_cdf_std(x, fam))
}

/// Stable normal hazard HF(x) = phi(x)/Phi(x), evaluated as
/// exp(ln phi(x) - ln Phi(x)) and floored at 1e-300 so it stays strictly
/// positive even where phi underflows (x near +40).
#[must_use]
pub fn stable_normal_hazard(x: f64) -> f64 {
    (ln_normal_pdf(x) - ln_normal_cdf(x)).exp().max(1e-300)
}

/// Cdf of the Pearson type VII distribution with density proportional to
/// (1 + x^2/delta)^(-a/2); requires a > 1, delta > 0.
///
/// Rescaling x by sqrt((a-1)/delta) reduces it to a Student-t cdf with a-1
/// degrees of freedom.
pub fn pvii_cdf(x: f64, a: f64, delta: f64) -> Result<f64> {
    if !(a > 1.0) || !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Pearson VII requires a > 1 and delta > 0, got a={a}, delta={delta}"
        )));
    }
    Ok(t_cdf(x * ((a - 1.0) / delta).sqrt(), a - 1.0))
}

/// Unnormalized upper incomplete gamma Gamma(a, x) = int_x^inf t^{a-1} e^{-t} dt.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "upper incomplete gamma requires a > 0 and x >= 0, got a={a}, x={x}"
        )));
    }
    if x == 0.0 {
        Ok(gamma(a))
    } else {
        Ok(gamma_ui(a, x))
    }
}

/// Draw the mixing value U for one standardized draw.
pub(crate) fn sample_mixing<R: Rng + ?Sized>(fam: &SmnFamily, rng: &mut R) -> f64 {
    match *fam {
        SmnFamily::Normal => 1.0,
        SmnFamily::StudentT { nu } => {
            GammaDist::new(nu / 2.0, 2.0 / nu)
                .expect("validated dof")
                .sample(rng)
        }
        SmnFamily::Slash { nu } => {
            // Beta(nu, 1) via inverse cdf; 1 - U(0,1) keeps the draw in (0, 1].
            (1.0 - rng.gen::<f64>()).powf(1.0 / nu)
        }
        SmnFamily::ContaminatedNormal { nu, gamma } => {
            if rng.gen::<f64>() < nu {
                gamma
            } else {
                1.0
            }
        }
    }
}

/// One standardized draw T = Z / sqrt(U), returning (t, u).
pub(crate) fn sample_std_with_u<R: Rng + ?Sized>(fam: &SmnFamily, rng: &mut R) -> (f64, f64) {
    let u = sample_mixing(fam, rng);
    let z: f64 = StandardNormal.sample(rng);
    (z / u.sqrt(), u)
}

/// Draw `n` SMN variates; deterministic given the state of `rng`.
pub fn smn_sample<R: Rng + ?Sized>(
    n: usize,
    loc: &LocationScale,
    fam: &SmnFamily,
    rng: &mut R,
) -> Result<Vec<f64>> {
    fam.validate()?;
    let s = loc.sigma();
    Ok((0..n)
        .map(|_| loc.mu + s * sample_std_with_u(fam, rng).0)
        .collect())
}
