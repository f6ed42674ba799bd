//! Information-based standard errors assembled from individual score
//! vectors of the observed log-likelihood.

use crate::ecme::{e_step, EStepRow};
use crate::error::{Error, Result};
use crate::model::{gating_probs, CensoredObservation, MixtureParams};
use nalgebra::{DMatrix, DVector};

/// Conditioning threshold beyond which the empirical information matrix is
/// treated as singular and pseudo-inverted.
const COND_LIMIT: f64 = 1e12;

/// Standard errors for the free parameters, in the same component order as
/// the fitted `MixtureParams`. Shape parameters (nu, gamma) are excluded:
/// they are treated as fixed at their estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SeTable {
    /// G-1 rows of length q.
    pub tau: Vec<Vec<f64>>,
    /// G rows of length p.
    pub beta: Vec<Vec<f64>>,
    /// Length G.
    pub sigma2: Vec<f64>,
    /// True when the information matrix was pseudo-inverted.
    pub singular: bool,
    /// Spectral condition number of the information matrix.
    pub condition: f64,
}

/// Flat score dimension: (G-1) q gating + G p regression + G variance.
fn score_dim(theta: &MixtureParams) -> usize {
    let (g, p, q) = (theta.g(), theta.p(), theta.q());
    (g - 1) * q + g * p + g
}

/// Individual score vector at `theta`, ordered (tau_1..tau_{G-1},
/// beta_1..beta_G, sigma2_1..sigma2_G). `cache_row` must hold the
/// conditional expectations of this observation at the same `theta`.
pub fn score_vector(
    obs: &CensoredObservation,
    theta: &MixtureParams,
    cache_row: &EStepRow,
) -> Result<DVector<f64>> {
    let (g, p, q) = (theta.g(), theta.p(), theta.q());
    let mut s = DVector::zeros(score_dim(theta));
    let pi = gating_probs(&obs.r, &theta.tau)?;
    let mut k = 0;
    for j in 0..g.saturating_sub(1) {
        let w = cache_row.z[j] - pi[j];
        for a in 0..q {
            s[k] = w * obs.r[a];
            k += 1;
        }
    }
    for j in 0..g {
        let xb = theta.mean(j, &obs.x);
        let w = cache_row.z[j] / theta.sigma2[j];
        let resid = cache_row.uy[j] - cache_row.u[j] * xb;
        for a in 0..p {
            s[k] = w * resid * obs.x[a];
            k += 1;
        }
    }
    for j in 0..g {
        let xb = theta.mean(j, &obs.x);
        let quad = cache_row.uy2[j] - 2.0 * cache_row.uy[j] * xb + cache_row.u[j] * xb * xb;
        s[k] = -(cache_row.z[j] / (2.0 * theta.sigma2[j] * theta.sigma2[j]))
            * (theta.sigma2[j] - quad);
        k += 1;
    }
    Ok(s)
}

/// Standard errors from the empirical information matrix
/// I = sum_i s_i s_i^T evaluated at `theta_hat`. Ill-conditioned matrices
/// are pseudo-inverted and flagged.
pub fn information_se(data: &[CensoredObservation], theta_hat: &MixtureParams) -> Result<SeTable> {
    theta_hat.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    let cache = e_step(data, theta_hat)?;
    let dim = score_dim(theta_hat);
    let mut info: DMatrix<f64> = DMatrix::zeros(dim, dim);
    for (obs, row) in data.iter().zip(&cache.rows) {
        let s = score_vector(obs, theta_hat, row)?;
        for a in 0..dim {
            for b in a..dim {
                info[(a, b)] += s[a] * s[b];
            }
        }
    }
    info.fill_lower_triangle_with_upper_triangle();

    let eig = info.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_ev = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max_ev > 0.0) {
        return Err(Error::InvalidParameter(
            "information matrix has no positive spectrum".into(),
        ));
    }
    let condition = if min_ev > 0.0 { max_ev / min_ev } else { f64::INFINITY };
    let singular = !(condition <= COND_LIMIT);
    let cut = max_ev / COND_LIMIT;
    // Inverse (or pseudo-inverse, dropping the near-null space) through the
    // eigendecomposition.
    let mut var = vec![0.0f64; dim];
    for (a, v) in var.iter_mut().enumerate() {
        let mut acc = 0.0f64;
        for k in 0..dim {
            let ev = eig.eigenvalues[k];
            if ev > cut {
                let u = eig.eigenvectors[(a, k)];
                acc += u * u / ev;
            }
        }
        *v = acc.max(0.0);
    }

    let (g, p, q) = (theta_hat.g(), theta_hat.p(), theta_hat.q());
    let mut k = 0;
    let mut tau = Vec::with_capacity(g - 1);
    for _ in 0..g.saturating_sub(1) {
        tau.push((0..q).map(|_| {
            let v = var[k].sqrt();
            k += 1;
            v
        }).collect());
    }
    let mut beta = Vec::with_capacity(g);
    for _ in 0..g {
        beta.push((0..p).map(|_| {
            let v = var[k].sqrt();
            k += 1;
            v
        }).collect());
    }
    let mut sigma2 = Vec::with_capacity(g);
    for _ in 0..g {
        sigma2.push(var[k].sqrt());
        k += 1;
    }
    Ok(SeTable { tau, beta, sigma2, singular, condition })
}
