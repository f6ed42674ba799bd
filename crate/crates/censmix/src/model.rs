//! Model containers and likelihood evaluation: censored observations,
//! mixture parameters, softmax gating, observed-data log-likelihood, and
//! posterior responsibilities.

use crate::error::{Error, Result};
use crate::numeric::{logsumexp, LN_PROB_FLOOR};
use crate::smn::{ln_interval_prob_std, ln_pdf_std, SmnFamily};
use nalgebra::DVector;

/// One response record: an exact value (`rho = false`) or an interval
/// (`rho = true`, `c1 < y <= c2`), with expert covariates `x` and gating
/// covariates `r`, both carrying a leading 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredObservation {
    /// Observed value; meaningful only when `rho` is false.
    pub w: f64,
    /// Censoring indicator.
    pub rho: bool,
    /// Lower interval bound (may be -inf).
    pub c1: f64,
    /// Upper interval bound (may be +inf).
    pub c2: f64,
    /// Expert covariates, length p, first entry 1.
    pub x: Vec<f64>,
    /// Gating covariates, length q, first entry 1.
    pub r: Vec<f64>,
}

impl CensoredObservation {
    pub fn uncensored(w: f64, x: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if !w.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "uncensored response must be finite, got {w}"
            )));
        }
        let obs = CensoredObservation { w, rho: false, c1: f64::NAN, c2: f64::NAN, x, r };
        obs.validate()?;
        Ok(obs)
    }

    pub fn censored(c1: f64, c2: f64, x: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        let obs = CensoredObservation { w: f64::NAN, rho: true, c1, c2, x, r };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.is_empty() || self.r.is_empty() {
            return Err(Error::DimensionMismatch(
                "covariate vectors must be nonempty".into(),
            ));
        }
        if self.rho {
            if !(self.c1 < self.c2) {
                return Err(Error::InvalidParameter(format!(
                    "censoring interval requires c1 < c2, got ({}, {})",
                    self.c1, self.c2
                )));
            }
            if self.c1 == f64::NEG_INFINITY && self.c2 == f64::INFINITY {
                return Err(Error::InvalidParameter(
                    "censoring interval must have at least one finite bound".into(),
                ));
            }
        } else if !self.w.is_finite() {
            return Err(Error::InvalidParameter(
                "uncensored observation must carry a finite response".into(),
            ));
        }
        Ok(())
    }

    /// Response value used for initialization: the exact value when observed,
    /// the interval midpoint when both bounds are finite, else the finite
    /// bound.
    #[must_use]
    pub fn imputed_response(&self) -> f64 {
        if !self.rho {
            self.w
        } else if self.c1.is_finite() && self.c2.is_finite() {
            0.5 * (self.c1 + self.c2)
        } else if self.c1.is_finite() {
            self.c1
        } else {
            self.c2
        }
    }
}

/// Full parameter set of the G-component mixture of experts.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    /// Per-component regression coefficients, each length p.
    pub beta: Vec<DVector<f64>>,
    /// Per-component error variances.
    pub sigma2: Vec<f64>,
    /// Per-component families (identical kinds; parameters may be tied).
    pub fam: Vec<SmnFamily>,
    /// Gating coefficients, G-1 vectors of length q; component G is the
    /// softmax reference with implicit zero coefficients.
    pub tau: Vec<DVector<f64>>,
}

impl MixtureParams {
    #[must_use]
    pub fn g(&self) -> usize {
        self.beta.len()
    }

    #[must_use]
    pub fn p(&self) -> usize {
        self.beta.first().map_or(0, DVector::len)
    }

    #[must_use]
    pub fn q(&self) -> usize {
        self.tau.first().map_or(0, DVector::len)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.g();
        if g == 0 {
            return Err(Error::DimensionMismatch("no components".into()));
        }
        if self.sigma2.len() != g || self.fam.len() != g || self.tau.len() != g - 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} beta, {} sigma2, {} fam, {} tau entries; got {}, {}, {}, {}",
                g,
                g,
                g,
                g - 1,
                self.beta.len(),
                self.sigma2.len(),
                self.fam.len(),
                self.tau.len()
            )));
        }
        let p = self.p();
        if self.beta.iter().any(|b| b.len() != p) {
            return Err(Error::DimensionMismatch("beta lengths differ".into()));
        }
        let q = self.q();
        if self.tau.iter().any(|t| t.len() != q) {
            return Err(Error::DimensionMismatch("tau lengths differ".into()));
        }
        for (j, &s2) in self.sigma2.iter().enumerate() {
            if !s2.is_finite() || s2 <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "sigma2[{j}] must be positive, got {s2}"
                )));
            }
        }
        let kind = self.fam[0].kind();
        for f in &self.fam {
            f.validate()?;
            if f.kind() != kind {
                return Err(Error::InvalidParameter(
                    "all components must share one family kind".into(),
                ));
            }
        }
        Ok(())
    }

    /// Number of free parameters m for AIC/BIC: G*p regression coefficients,
    /// G variances, (G-1)*q gating coefficients, plus family parameters
    /// (one set when tied, one per component otherwise).
    #[must_use]
    pub fn n_params(&self, tie_nu: bool) -> usize {
        let g = self.g();
        let fam_per = SmnFamily::param_count(self.fam[0].kind());
        let fam_total = if tie_nu || g == 1 { fam_per } else { g * fam_per };
        g * self.p() + g + (g - 1) * self.q() + fam_total
    }

    /// Mean of component j at covariates x.
    #[must_use]
    pub fn mean(&self, j: usize, x: &[f64]) -> f64 {
        self.beta[j].iter().zip(x.iter()).map(|(b, v)| b * v).sum()
    }

    /// Components reordered by ascending beta_{j0} (ties by sigma2), with
    /// the gating coefficients re-expressed against the new reference
    /// component. Returns the permutation applied (new index -> old index).
    #[must_use]
    pub fn canonical_order(&self) -> (MixtureParams, Vec<usize>) {
        let g = self.g();
        let mut order: Vec<usize> = (0..g).collect();
        order.sort_by(|&a, &b| {
            self.beta[a][0]
                .total_cmp(&self.beta[b][0])
                .then(self.sigma2[a].total_cmp(&self.sigma2[b]))
        });
        (self.reordered(&order), order)
    }

    /// The same mixture with components permuted (`order[k]` is the old
    /// index of new component k) and the gating coefficients re-expressed
    /// against the new reference component; the distribution is unchanged.
    #[must_use]
    pub fn reordered(&self, order: &[usize]) -> MixtureParams {
        let g = self.g();
        let q = self.q();
        // Old logit vectors, with the old reference component at zero.
        let logit = |j: usize| -> DVector<f64> {
            if j + 1 == g {
                DVector::zeros(q)
            } else {
                self.tau[j].clone()
            }
        };
        let new_ref = order[g - 1];
        let tau = order[..g - 1]
            .iter()
            .map(|&j| logit(j) - logit(new_ref))
            .collect();
        MixtureParams {
            beta: order.iter().map(|&j| self.beta[j].clone()).collect(),
            sigma2: order.iter().map(|&j| self.sigma2[j]).collect(),
            fam: order.iter().map(|&j| self.fam[j]).collect(),
            tau,
        }
    }
}

/// Softmax gating probabilities at covariates `r`; component G (implicit
/// zero coefficients) is the reference.
pub fn gating_probs(r: &[f64], tau: &[DVector<f64>]) -> Result<Vec<f64>> {
    Ok(ln_gating_probs(r, tau)?.iter().map(|l| l.exp()).collect())
}

/// Log of the gating probabilities, computed by a stable log-softmax.
pub fn ln_gating_probs(r: &[f64], tau: &[DVector<f64>]) -> Result<Vec<f64>> {
    let g = tau.len() + 1;
    let mut logits = Vec::with_capacity(g);
    for t in tau {
        if t.len() != r.len() {
            return Err(Error::DimensionMismatch(format!(
                "gating covariates have length {}, coefficients length {}",
                r.len(),
                t.len()
            )));
        }
        logits.push(t.iter().zip(r.iter()).map(|(a, b)| a * b).sum::<f64>());
    }
    logits.push(0.0);
    let lse = logsumexp(&logits);
    Ok(logits.into_iter().map(|l| l - lse).collect())
}

/// Log of component j's likelihood factor for one observation: the density
/// at the observed value, or the interval probability when censored.
pub(crate) fn ln_component_term(obs: &CensoredObservation, theta: &MixtureParams, j: usize) -> f64 {
    let mu = theta.mean(j, &obs.x);
    let s = theta.sigma2[j].sqrt();
    if obs.rho {
        let t1 = if obs.c1.is_finite() { (obs.c1 - mu) / s } else { obs.c1 };
        let t2 = if obs.c2.is_finite() { (obs.c2 - mu) / s } else { obs.c2 };
        ln_interval_prob_std(t1, t2, &theta.fam[j])
    } else {
        ln_pdf_std((obs.w - mu) / s, &theta.fam[j]) - s.ln()
    }
}

/// Per-component joint log-terms ln(pi_j) + ln(component likelihood).
pub(crate) fn ln_joint_terms(
    obs: &CensoredObservation,
    theta: &MixtureParams,
) -> Result<Vec<f64>> {
    let ln_pi = ln_gating_probs(&obs.r, &theta.tau)?;
    Ok((0..theta.g())
        .map(|j| {
            let term = ln_component_term(obs, theta, j);
            // Interval probabilities below the floor count as no support.
            if term < LN_PROB_FLOOR {
                f64::NEG_INFINITY
            } else {
                ln_pi[j] + term
            }
        })
        .collect())
}

/// Observed-data log-likelihood, fully in log space with log-sum-exp across
/// components. Errors with the observation index when no component gives an
/// observation numerical support.
pub fn observed_loglik(data: &[CensoredObservation], theta: &MixtureParams) -> Result<f64> {
    theta.validate()?;
    let mut total = 0.0;
    for (i, obs) in data.iter().enumerate() {
        let terms = ln_joint_terms(obs, theta)?;
        let l = logsumexp(&terms);
        if !l.is_finite() {
            return Err(Error::NumericalSupport { index: i });
        }
        total += l;
    }
    Ok(total)
}

/// Posterior membership probabilities of one observation.
pub fn responsibilities(obs: &CensoredObservation, theta: &MixtureParams) -> Result<Vec<f64>> {
    theta.validate()?;
    let terms = ln_joint_terms(obs, theta)?;
    let lse = logsumexp(&terms);
    if !lse.is_finite() {
        return Err(Error::NumericalSupport { index: 0 });
    }
    Ok(terms.iter().map(|t| (t - lse).exp()).collect())
}

/// Posterior probability that an observation is a contamination "bad point"
/// under component `j` of a contaminated-normal mixture.
pub fn cn_bad_point_prob(
    obs: &CensoredObservation,
    j: usize,
    theta: &MixtureParams,
) -> Result<f64> {
    theta.validate()?;
    let SmnFamily::ContaminatedNormal { nu, gamma } = theta.fam[j] else {
        return Err(Error::InvalidParameter(format!(
            "component {j} is not contaminated normal"
        )));
    };
    let mu = theta.mean(j, &obs.x);
    let s = theta.sigma2[j].sqrt();
    let sg = gamma.sqrt();
    if obs.rho {
        // nu * (Phi(sqrt(g) t2) - Phi(sqrt(g) t1)) / (F_CN(t2) - F_CN(t1)),
        // assembled in log space through the same interval primitives.
        let t1 = if obs.c1.is_finite() { (obs.c1 - mu) / s } else { obs.c1 };
        let t2 = if obs.c2.is_finite() { (obs.c2 - mu) / s } else { obs.c2 };
        let scale = |t: f64| if t.is_finite() { sg * t } else { t };
        let ln_num =
            nu.ln() + ln_interval_prob_std(scale(t1), scale(t2), &SmnFamily::Normal);
        let ln_den = ln_interval_prob_std(t1, t2, &theta.fam[j]);
        if ln_den < LN_PROB_FLOOR {
            return Err(Error::DegenerateInterval);
        }
        Ok((ln_num - ln_den).exp().clamp(0.0, 1.0))
    } else {
        let t = (obs.w - mu) / s;
        let delta = t * t;
        // Divide numerator and denominator by phi(t); the remaining
        // exponential has a nonpositive argument.
        let w = (1.0 - nu) * (-0.5 * (1.0 - gamma) * delta).exp();
        let num = nu * sg;
        Ok((num / (num + w)).clamp(0.0, 1.0))
    }
}
