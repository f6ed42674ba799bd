//! The ECME fitting loop: initialization, E-step, two CM-steps, a CML-step
//! for the mixing parameters, and convergence control.

use crate::error::{Error, Result};
use crate::inference::{information_se, SeTable};
use crate::metrics::aic_bic;
use crate::model::{
    cn_bad_point_prob, gating_probs, ln_joint_terms, observed_loglik, CensoredObservation,
    MixtureParams,
};
use crate::moments::{censored_moments, u_hat_uncensored};
use crate::numeric::{derive_seed, golden_section_max, hash_f64s, logsumexp, nelder_mead_box_max, FNV_OFFSET};
use crate::smn::{FamilyKind, LocationScale, SmnFamily};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How the parameters are seeded before the first iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy {
    /// K-means on imputed responses followed by per-group least squares.
    KMeansLS,
    /// Start from caller-provided parameters.
    UserSupplied(MixtureParams),
}

/// How the gating coefficients are seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauInit {
    Zero,
    /// Multinomial-logistic fit to the initial hard partition.
    MultinomialFit,
}

/// Tuning knobs of `fit`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub init_strategy: InitStrategy,
    pub tau_init: TauInit,
    /// Share the mixing parameters (nu, and gamma for contaminated normal)
    /// across components.
    pub tie_nu: bool,
    /// Override of the search box for the primary shape parameter nu;
    /// `None` uses the per-family default. A zero-width box pins nu.
    pub nu_bounds: Option<(f64, f64)>,
    pub seed: u64,
    /// Smallest allowed posterior mass of a component; `None` means
    /// 1e-6 * n.
    pub min_component_mass: Option<f64>,
    /// Candidate starting points: each runs for `burn_in` iterations and
    /// the best continues to convergence. Explicit starting values use a
    /// single candidate regardless.
    pub n_starts: usize,
    pub burn_in: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 1000,
            tol: 1e-5,
            init_strategy: InitStrategy::KMeansLS,
            tau_init: TauInit::Zero,
            tie_nu: true,
            nu_bounds: None,
            seed: 0,
            min_component_mass: None,
            n_starts: 4,
            burn_in: 25,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::Config("n_starts must be at least 1".into()));
        }
        if let Some((lo, hi)) = self.nu_bounds {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(Error::Config(format!("invalid nu bounds ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    /// Search box for nu, honoring the override.
    #[must_use]
    pub fn nu_box(&self, kind: FamilyKind) -> (f64, f64) {
        self.nu_bounds.unwrap_or(default_nu_box(kind))
    }
}

/// Default search boxes keeping variances finite and the likelihood away
/// from flat ridges.
#[must_use]
pub fn default_nu_box(kind: FamilyKind) -> (f64, f64) {
    match kind {
        FamilyKind::Normal => (1.0, 1.0),
        FamilyKind::StudentT => (2.01, 100.0),
        FamilyKind::Slash => (1.01, 50.0),
        FamilyKind::ContaminatedNormal => (0.01, 0.99),
    }
}

const GAMMA_BOX: (f64, f64) = (0.01, 0.99);

/// Near-normal starting family for a fit.
fn initial_family(kind: FamilyKind, opts: &FitOptions) -> SmnFamily {
    let (lo, hi) = opts.nu_box(kind);
    match kind {
        FamilyKind::Normal => SmnFamily::Normal,
        FamilyKind::StudentT => SmnFamily::StudentT { nu: 20.0f64.clamp(lo, hi) },
        FamilyKind::Slash => SmnFamily::Slash { nu: 20.0f64.clamp(lo, hi) },
        FamilyKind::ContaminatedNormal => SmnFamily::ContaminatedNormal {
            nu: 0.05f64.clamp(lo, hi),
            gamma: 0.8f64.clamp(GAMMA_BOX.0, GAMMA_BOX.1),
        },
    }
}

/// Conditional expectations for one observation: membership probabilities
/// and the weighted response moments entering the CM-steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EStepRow {
    /// Posterior component probabilities, length G.
    pub z: Vec<f64>,
    /// E(U | component, data).
    pub u: Vec<f64>,
    /// E(UY | component, data).
    pub uy: Vec<f64>,
    /// E(UY^2 | component, data).
    pub uy2: Vec<f64>,
    /// Contaminated normal only: posterior bad-point probabilities.
    pub b: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EStepCache {
    pub rows: Vec<EStepRow>,
}

impl EStepCache {
    /// Posterior mass of component j.
    #[must_use]
    pub fn mass(&self, j: usize) -> f64 {
        self.rows.iter().map(|r| r.z[j]).sum()
    }
}

/// Conditional expectations of Z, U, UY, UY^2 (and the bad-point indicator
/// for contaminated normal) for every observation at `theta`.
pub fn e_step(data: &[CensoredObservation], theta: &MixtureParams) -> Result<EStepCache> {
    theta.validate()?;
    let g = theta.g();
    let is_cn = matches!(theta.fam[0], SmnFamily::ContaminatedNormal { .. });
    let mut rows = Vec::with_capacity(data.len());
    for (i, obs) in data.iter().enumerate() {
        let terms = ln_joint_terms(obs, theta)?;
        let lse = logsumexp(&terms);
        if !lse.is_finite() {
            return Err(Error::NumericalSupport { index: i });
        }
        let z: Vec<f64> = terms.iter().map(|t| (t - lse).exp()).collect();
        let mut u = vec![0.0; g];
        let mut uy = vec![0.0; g];
        let mut uy2 = vec![0.0; g];
        let mut b = if is_cn { Some(vec![0.0; g]) } else { None };
        for j in 0..g {
            let loc = LocationScale::new(theta.mean(j, &obs.x), theta.sigma2[j])?;
            let fam = &theta.fam[j];
            let (uj, uyj, uy2j) = if obs.rho {
                match censored_moments(obs.c1, obs.c2, &loc, fam) {
                    Ok(m) => (m.u_hat, m.uy_hat, m.uy2_hat),
                    Err(Error::DegenerateInterval) => {
                        // The interval holds no mass under component j, so
                        // z[j] is exactly zero and these moments carry no
                        // weight; evaluate at the projection of the mean
                        // onto the interval to keep the cache finite.
                        debug_assert_eq!(z[j], 0.0);
                        let y0 = loc.mu.clamp(obs.c1, obs.c2);
                        let uh = u_hat_uncensored(y0, &loc, fam)?;
                        (uh, y0 * uh, y0 * y0 * uh)
                    }
                    Err(e) => return Err(e),
                }
            } else {
                let uh = u_hat_uncensored(obs.w, &loc, fam)?;
                (uh, obs.w * uh, obs.w * obs.w * uh)
            };
            u[j] = uj;
            uy[j] = uyj;
            uy2[j] = uy2j;
            if let Some(bv) = b.as_mut() {
                bv[j] = match cn_bad_point_prob(obs, j, theta) {
                    Ok(p) => p,
                    Err(Error::DegenerateInterval) => match theta.fam[j] {
                        SmnFamily::ContaminatedNormal { nu, .. } => nu,
                        _ => unreachable!("b is only built for contaminated normal"),
                    },
                    Err(e) => return Err(e),
                };
            }
        }
        rows.push(EStepRow { z, u, uy, uy2, b });
    }
    Ok(EStepCache { rows })
}

/// CM-step 1: weighted least squares for each beta_j with weights z*u,
/// then the closed-form sigma2_j update.
pub fn cm_step_regression(
    cache: &EStepCache,
    data: &[CensoredObservation],
    min_mass: f64,
) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    let g = cache.rows.first().map_or(0, |r| r.z.len());
    let p = data.first().map_or(0, |o| o.x.len());
    if g == 0 || p == 0 || cache.rows.len() != data.len() {
        return Err(Error::DimensionMismatch("cache/data shape mismatch".into()));
    }
    let mut betas = Vec::with_capacity(g);
    let mut sigma2 = Vec::with_capacity(g);
    for j in 0..g {
        let nj = cache.mass(j);
        if nj < min_mass {
            return Err(Error::EmptyComponent { component: j, mass: nj, threshold: min_mass });
        }
        let mut gram = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        for (row, obs) in cache.rows.iter().zip(data) {
            let w = row.z[j] * row.u[j];
            let wy = row.z[j] * row.uy[j];
            for a in 0..p {
                rhs[a] += wy * obs.x[a];
                for bidx in a..p {
                    gram[(a, bidx)] += w * obs.x[a] * obs.x[bidx];
                }
            }
        }
        gram.fill_lower_triangle_with_upper_triangle();
        let chol = gram.cholesky().ok_or(Error::SingularDesign { component: j })?;
        let beta = chol.solve(&rhs);
        let mut acc = 0.0;
        for (row, obs) in cache.rows.iter().zip(data) {
            let xb: f64 = beta.iter().zip(&obs.x).map(|(b, v)| b * v).sum();
            acc += row.z[j] * (row.uy2[j] - 2.0 * row.uy[j] * xb + row.u[j] * xb * xb);
        }
        // The quadratic form is nonnegative up to rounding; keep it positive.
        sigma2.push((acc / nj).max(1e-10));
        betas.push(beta);
    }
    Ok((betas, sigma2))
}

/// CM-step 2: one minorization step on the gating coefficients,
/// tau_j + 4 (sum r r^T)^{-1} sum (z_ij - pi_j(r_i)) r_i.
pub fn cm_step_gating(
    cache: &EStepCache,
    tau_old: &[DVector<f64>],
    r_all: &[Vec<f64>],
) -> Result<Vec<DVector<f64>>> {
    if tau_old.is_empty() {
        return Ok(Vec::new());
    }
    let q = tau_old[0].len();
    let mut gram = DMatrix::zeros(q, q);
    for r in r_all {
        for a in 0..q {
            for b in a..q {
                gram[(a, b)] += r[a] * r[b];
            }
        }
    }
    gram.fill_lower_triangle_with_upper_triangle();
    let chol = gram.cholesky().ok_or(Error::SingularGating)?;
    let gm1 = tau_old.len();
    let mut grads = vec![DVector::zeros(q); gm1];
    for (row, r) in cache.rows.iter().zip(r_all) {
        let pi = gating_probs(r, tau_old)?;
        for (j, grad) in grads.iter_mut().enumerate() {
            let w = row.z[j] - pi[j];
            for a in 0..q {
                grad[a] += w * r[a];
            }
        }
    }
    Ok(tau_old
        .iter()
        .zip(grads)
        .map(|(t, grad)| t + 4.0 * chol.solve(&grad))
        .collect())
}

fn shape_nu(fam: &SmnFamily) -> f64 {
    match *fam {
        SmnFamily::Normal => 1.0,
        SmnFamily::StudentT { nu } | SmnFamily::Slash { nu } => nu,
        SmnFamily::ContaminatedNormal { nu, .. } => nu,
    }
}

fn push_boundary_flag(flags: &mut Vec<String>, name: &str, x: f64, lo: f64, hi: f64) {
    let tol = 1e-3 * (hi - lo).max(1e-9);
    if x - lo <= tol {
        flags.push(format!("{name} at lower bound {lo}"));
    } else if hi - x <= tol {
        flags.push(format!("{name} at upper bound {hi}"));
    }
}

/// Golden-section iterations: shrinks the bracket to ~5e-7 of its width,
/// far below what the log-likelihood stopping tolerance can distinguish.
const GOLDEN_ITERS: usize = 30;

/// CML-step: update the family shape parameters by maximizing the actual
/// observed log-likelihood, with beta, sigma2, tau already updated. Returns
/// the new families and any boundary flags. The observed log-likelihood
/// never decreases: the current parameters stay when no candidate improves.
pub fn cml_step_nu(
    data: &[CensoredObservation],
    theta: &MixtureParams,
    opts: &FitOptions,
) -> Result<(Vec<SmnFamily>, Vec<String>)> {
    theta.validate()?;
    let g = theta.g();
    let kind = theta.fam[0].kind();
    let mut flags = Vec::new();
    let eval = |fams: Vec<SmnFamily>| -> f64 {
        let cand = MixtureParams { fam: fams, ..theta.clone() };
        observed_loglik(data, &cand).unwrap_or(f64::NEG_INFINITY)
    };
    match kind {
        FamilyKind::Normal => Ok((theta.fam.clone(), flags)),
        FamilyKind::StudentT | FamilyKind::Slash => {
            let (lo, hi) = opts.nu_box(kind);
            let mk = |nu: f64| match kind {
                FamilyKind::StudentT => SmnFamily::StudentT { nu },
                _ => SmnFamily::Slash { nu },
            };
            let mut fams = theta.fam.clone();
            if opts.tie_nu || g == 1 {
                let cur = shape_nu(&fams[0]);
                let f = |nu: f64| eval(vec![mk(nu); g]);
                let (x, fx) = golden_section_max(&f, lo, hi, GOLDEN_ITERS);
                let nu = if fx > f(cur) { x } else { cur };
                fams = vec![mk(nu); g];
                push_boundary_flag(&mut flags, "nu", nu, lo, hi);
            } else {
                for j in 0..g {
                    let cur = shape_nu(&fams[j]);
                    let f = |nu: f64| {
                        let mut cand = fams.clone();
                        cand[j] = mk(nu);
                        eval(cand)
                    };
                    let (x, fx) = golden_section_max(&f, lo, hi, GOLDEN_ITERS);
                    let nu = if fx > f(cur) { x } else { cur };
                    fams[j] = mk(nu);
                    push_boundary_flag(&mut flags, &format!("nu_{}", j + 1), nu, lo, hi);
                }
            }
            Ok((fams, flags))
        }
        FamilyKind::ContaminatedNormal => {
            // Closed-form nu from bad-point probabilities and
            // responsibilities recomputed at the current parameters.
            let cache = e_step(data, theta)?;
            let (lo, hi) = opts.nu_box(kind);
            let mass_b = |j: usize| -> f64 {
                cache
                    .rows
                    .iter()
                    .map(|r| r.z[j] * r.b.as_ref().expect("cn cache")[j])
                    .sum()
            };
            let old_score = eval(theta.fam.clone());
            if opts.tie_nu || g == 1 {
                let num: f64 = (0..g).map(mass_b).sum();
                let nu = (num / data.len() as f64).clamp(lo, hi);
                let gamma_cur = match theta.fam[0] {
                    SmnFamily::ContaminatedNormal { gamma, .. } => gamma,
                    _ => unreachable!(),
                };
                let f = |gamma: f64| eval(vec![SmnFamily::ContaminatedNormal { nu, gamma }; g]);
                let (gx, gfx) = golden_section_max(&f, GAMMA_BOX.0, GAMMA_BOX.1, GOLDEN_ITERS);
                // Best of: previous parameters, new nu with previous gamma,
                // new nu with searched gamma.
                let candidates = [
                    (theta.fam.clone(), old_score),
                    (vec![SmnFamily::ContaminatedNormal { nu, gamma: gamma_cur }; g], f(gamma_cur)),
                    (vec![SmnFamily::ContaminatedNormal { nu, gamma: gx }; g], gfx),
                ];
                let best = candidates
                    .iter()
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("nonempty");
                let fams = best.0.clone();
                if let SmnFamily::ContaminatedNormal { nu, gamma } = fams[0] {
                    push_boundary_flag(&mut flags, "nu", nu, lo, hi);
                    push_boundary_flag(&mut flags, "gamma", gamma, GAMMA_BOX.0, GAMMA_BOX.1);
                }
                Ok((fams, flags))
            } else {
                let mut fams = theta.fam.clone();
                for j in 0..g {
                    let nj = cache.mass(j);
                    let nu0 = if nj > 0.0 { (mass_b(j) / nj).clamp(lo, hi) } else { lo };
                    let (gamma0, nu_cur, gamma_cur) = match fams[j] {
                        SmnFamily::ContaminatedNormal { nu, gamma } => (gamma, nu, gamma),
                        _ => unreachable!(),
                    };
                    let f = |v: &[f64]| {
                        let mut cand = fams.clone();
                        cand[j] = SmnFamily::ContaminatedNormal { nu: v[0], gamma: v[1] };
                        eval(cand)
                    };
                    let start = [
                        nu0.clamp(lo + 1e-6, hi - 1e-6),
                        gamma0.clamp(GAMMA_BOX.0 + 1e-6, GAMMA_BOX.1 - 1e-6),
                    ];
                    let (v, fv) = nelder_mead_box_max(
                        &f,
                        &start,
                        &[lo, GAMMA_BOX.0],
                        &[hi, GAMMA_BOX.1],
                        120,
                    );
                    let cur_score = f(&[nu_cur, gamma_cur]);
                    if fv > cur_score {
                        fams[j] = SmnFamily::ContaminatedNormal { nu: v[0], gamma: v[1] };
                    }
                    if let SmnFamily::ContaminatedNormal { nu, gamma } = fams[j] {
                        push_boundary_flag(&mut flags, &format!("nu_{}", j + 1), nu, lo, hi);
                        push_boundary_flag(
                            &mut flags,
                            &format!("gamma_{}", j + 1),
                            gamma,
                            GAMMA_BOX.0,
                            GAMMA_BOX.1,
                        );
                    }
                }
                Ok((fams, flags))
            }
        }
    }
}

/// One-dimensional k-means with deterministic farthest-point seeding.
/// `seed` picks the first centroid; ties resolve to the lowest index.
fn kmeans_1d(values: &[f64], k: usize, seed: u64) -> Vec<usize> {
    let n = values.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(values[(seed % n as u64) as usize]);
    while centroids.len() < k {
        let (mut best_i, mut best_d) = (0usize, -1.0f64);
        for (i, &v) in values.iter().enumerate() {
            let d = centroids.iter().map(|c| (v - c).abs()).fold(f64::INFINITY, f64::min);
            if d > best_d {
                best_d = d;
                best_i = i;
            }
        }
        centroids.push(values[best_i]);
    }
    let mut labels = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, &v) in values.iter().enumerate() {
            let (mut best_j, mut best_d) = (0usize, f64::INFINITY);
            for (j, &c) in centroids.iter().enumerate() {
                let d = (v - c).abs();
                if d < best_d {
                    best_d = d;
                    best_j = j;
                }
            }
            if labels[i] != best_j {
                labels[i] = best_j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for j in 0..centroids.len() {
            let members: Vec<f64> =
                values.iter().zip(&labels).filter(|(_, &l)| l == j).map(|(&v, _)| v).collect();
            if members.is_empty() {
                // Re-seed a dead centroid at the point farthest from the rest.
                let (mut best_i, mut best_d) = (0usize, -1.0f64);
                for (i, &v) in values.iter().enumerate() {
                    let d = centroids_distance(&centroids, j, v);
                    if d > best_d {
                        best_d = d;
                        best_i = i;
                    }
                }
                centroids[j] = values[best_i];
            } else {
                centroids[j] = members.iter().sum::<f64>() / members.len() as f64;
            }
        }
    }
    labels
}

fn centroids_distance(centroids: &[f64], skip: usize, v: f64) -> f64 {
    centroids
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != skip)
        .map(|(_, c)| (v - c).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Labels from regression lines fitted to disjoint random subsets of p+2
/// points each: every observation joins the line with the smallest absolute
/// residual. Unlike a marginal k-means partition this can separate
/// components whose mean lines cross.
fn random_line_labels(
    data: &[CensoredObservation],
    imputed: &[f64],
    g: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = data.len();
    let p = data[0].x.len();
    let need = g * (p + 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..need {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut lines = Vec::with_capacity(g);
    for j in 0..g {
        let subset: Vec<usize> = idx[j * (p + 2)..(j + 1) * (p + 2)].to_vec();
        let (beta, _) = group_ols(data, imputed, &subset)?;
        lines.push(beta);
    }
    Ok((0..n)
        .map(|i| {
            let (mut best_j, mut best_d) = (0usize, f64::INFINITY);
            for (j, beta) in lines.iter().enumerate() {
                let fitted: f64 = beta.iter().zip(&data[i].x).map(|(b, v)| b * v).sum();
                let d = (imputed[i] - fitted).abs();
                if d < best_d {
                    best_d = d;
                    best_j = j;
                }
            }
            best_j
        })
        .collect())
}

/// Ordinary least squares on the rows selected by `idx`; residual variance
/// uses the maximum-likelihood divisor.
fn group_ols(data: &[CensoredObservation], imputed: &[f64], idx: &[usize]) -> Result<(DVector<f64>, f64)> {
    let p = data[0].x.len();
    let mut gram = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for &i in idx {
        let x = &data[i].x;
        for a in 0..p {
            rhs[a] += imputed[i] * x[a];
            for b in a..p {
                gram[(a, b)] += x[a] * x[b];
            }
        }
    }
    gram.fill_lower_triangle_with_upper_triangle();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::InitializationFailure("singular group design".into()))?;
    let beta = chol.solve(&rhs);
    let mut rss = 0.0;
    for &i in idx {
        let fitted: f64 = beta.iter().zip(&data[i].x).map(|(b, v)| b * v).sum();
        rss += (imputed[i] - fitted).powi(2);
    }
    Ok((beta, (rss / idx.len() as f64).max(1e-6)))
}

/// Multinomial-logistic fit of hard labels on the gating covariates by
/// iterating the minorization update on one-hot memberships.
fn multinomial_fit(labels: &[usize], g: usize, r_all: &[Vec<f64>]) -> Result<Vec<DVector<f64>>> {
    let q = r_all[0].len();
    let rows: Vec<EStepRow> = labels
        .iter()
        .map(|&l| {
            let mut z = vec![0.0; g];
            z[l] = 1.0;
            EStepRow { z, u: Vec::new(), uy: Vec::new(), uy2: Vec::new(), b: None }
        })
        .collect();
    let cache = EStepCache { rows };
    let mut tau = vec![DVector::zeros(q); g - 1];
    for _ in 0..200 {
        let new = cm_step_gating(&cache, &tau, r_all)?;
        let delta = new
            .iter()
            .zip(&tau)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0f64, f64::max);
        tau = new;
        if delta < 1e-6 {
            break;
        }
    }
    Ok(tau)
}

/// Initial parameters: k-means partition of imputed responses, per-group
/// least squares, zero or multinomial-logistic gating, near-normal nu.
pub fn initialize(
    data: &[CensoredObservation],
    g: usize,
    kind: FamilyKind,
    opts: &FitOptions,
) -> Result<MixtureParams> {
    initialize_with_restart(data, g, kind, opts, 0)
}

fn initialize_with_restart(
    data: &[CensoredObservation],
    g: usize,
    kind: FamilyKind,
    opts: &FitOptions,
    restart_base: u64,
) -> Result<MixtureParams> {
    let n = data.len();
    let p = data[0].x.len();
    let q = data[0].r.len();
    if n < g * (p + 2) {
        return Err(Error::InitializationFailure(format!(
            "need at least G(p+2) = {} observations, got {n}",
            g * (p + 2)
        )));
    }
    if let InitStrategy::UserSupplied(theta) = &opts.init_strategy {
        theta.validate()?;
        if theta.g() != g || theta.p() != p || (g > 1 && theta.q() != q) {
            return Err(Error::DimensionMismatch(
                "user-supplied initial parameters do not match the data".into(),
            ));
        }
        if theta.fam[0].kind() != kind {
            return Err(Error::InvalidParameter(
                "user-supplied initial family differs from the requested one".into(),
            ));
        }
        return Ok(theta.clone());
    }
    let imputed: Vec<f64> = data.iter().map(CensoredObservation::imputed_response).collect();
    let content = hash_f64s(FNV_OFFSET, imputed.iter().copied());
    let mut last_err = None;
    for restart in 0..10u64 {
        let seed = derive_seed(opts.seed ^ content, restart_base + restart);
        // The first candidate start partitions by k-means; later candidates
        // use random line starts for diversity.
        let labels = if g == 1 {
            vec![0usize; n]
        } else if restart_base == 0 {
            kmeans_1d(&imputed, g, seed)
        } else {
            match random_line_labels(data, &imputed, g, seed) {
                Ok(l) => l,
                Err(e) => {
                    last_err = Some(e);
                    continue;
                }
            }
        };
        let groups: Vec<Vec<usize>> = (0..g)
            .map(|j| (0..n).filter(|&i| labels[i] == j).collect())
            .collect();
        if groups.iter().any(|grp| grp.len() < p + 1) {
            last_err = Some(Error::InitializationFailure(format!(
                "a k-means group has fewer than p+1 = {} points",
                p + 1
            )));
            continue;
        }
        let mut beta = Vec::with_capacity(g);
        let mut sigma2 = Vec::with_capacity(g);
        let mut ok = true;
        for grp in &groups {
            match group_ols(data, &imputed, grp) {
                Ok((b, s2)) => {
                    beta.push(b);
                    sigma2.push(s2);
                }
                Err(e) => {
                    last_err = Some(e);
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let tau = match opts.tau_init {
            TauInit::Zero => vec![DVector::zeros(q); g - 1],
            TauInit::MultinomialFit => {
                if g == 1 {
                    Vec::new()
                } else {
                    let r_all: Vec<Vec<f64>> = data.iter().map(|o| o.r.clone()).collect();
                    multinomial_fit(&labels, g, &r_all)?
                }
            }
        };
        let theta = MixtureParams {
            beta,
            sigma2,
            fam: vec![initial_family(kind, opts); g],
            tau,
        };
        theta.validate()?;
        return Ok(theta);
    }
    Err(last_err.unwrap_or_else(|| Error::InitializationFailure("k-means failed".into())))
}

/// Everything `fit` produces: estimates, trace, posterior memberships,
/// standard errors, and information criteria.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub theta_hat: MixtureParams,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iters: usize,
    /// Posterior membership probabilities in the caller's row order.
    pub responsibilities: Vec<Vec<f64>>,
    /// Hard assignments (argmax responsibilities), caller's row order.
    pub labels: Vec<usize>,
    pub se: Option<SeTable>,
    pub aic: f64,
    pub bic: f64,
    /// Free-parameter count used for AIC/BIC.
    pub n_params: usize,
    pub n: usize,
    pub tie_nu: bool,
    /// Shape parameters that ended on a search-box boundary.
    pub boundary_flags: Vec<String>,
}

impl FitReport {
    /// Final observed log-likelihood.
    #[must_use]
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("nonempty trace")
    }
}

fn row_key_cmp(a: &CensoredObservation, b: &CensoredObservation) -> std::cmp::Ordering {
    a.imputed_response()
        .total_cmp(&b.imputed_response())
        .then_with(|| cmp_slices(&a.x, &b.x))
        .then_with(|| cmp_slices(&a.r, &b.r))
        .then(a.rho.cmp(&b.rho))
}

fn cmp_slices(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = x.total_cmp(y);
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    a.len().cmp(&b.len())
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Fit a G-component mixture by ECME. Deterministic given the data and
/// options; invariant to the order of the rows (estimates are computed on a
/// canonical internal ordering, memberships are returned in caller order).
pub fn fit(
    data: &[CensoredObservation],
    g: usize,
    kind: FamilyKind,
    opts: &FitOptions,
) -> Result<FitReport> {
    opts.validate()?;
    if g == 0 {
        return Err(Error::Config("components must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    let n = data.len();
    let p = data[0].x.len();
    let q = data[0].r.len();
    for (i, obs) in data.iter().enumerate() {
        obs.validate().map_err(|e| Error::FitFailure(format!("row {i}: {e}")))?;
        if obs.x.len() != p || obs.r.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has covariate lengths ({}, {}), expected ({p}, {q})",
                obs.x.len(),
                obs.r.len()
            )));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| row_key_cmp(&data[a], &data[b]));
    let sorted: Vec<CensoredObservation> = order.iter().map(|&i| data[i].clone()).collect();
    let r_all: Vec<Vec<f64>> = sorted.iter().map(|o| o.r.clone()).collect();
    let min_mass = opts.min_component_mass.unwrap_or(1e-6 * n as f64);

    // Candidate starting points. An explicit start and the single-component
    // case are deterministic, so multi-starting them would only repeat work.
    let single = g == 1 || matches!(opts.init_strategy, InitStrategy::UserSupplied(_));
    let n_starts = if single { 1 } else { opts.n_starts };
    let mut candidates = Vec::new();
    let mut init_err = None;
    for s in 0..n_starts {
        match initialize_with_restart(&sorted, g, kind, opts, s as u64 * 10) {
            Ok(theta) => candidates.push(theta),
            Err(e) => init_err = Some(e),
        }
    }
    if candidates.is_empty() {
        return Err(init_err.expect("n_starts >= 1"));
    }

    // Short burn-in per candidate; rank by achieved log-likelihood.
    let mut burned: Vec<(f64, LoopOutcome)> = Vec::new();
    let mut burn_err = None;
    if candidates.len() == 1 {
        let theta0 = candidates.pop().expect("one candidate");
        match ecme_loop(&sorted, &r_all, theta0, opts, min_mass, opts.max_iter, None) {
            Ok(out) => burned.push((out.ll, out)),
            Err(e) => return Err(e),
        }
    } else {
        for theta0 in candidates {
            match ecme_loop(&sorted, &r_all, theta0, opts, min_mass, opts.burn_in, None) {
                Ok(out) => burned.push((out.ll, out)),
                Err(e) => burn_err = Some(e),
            }
        }
        burned.sort_by(|a, b| b.0.total_cmp(&a.0));
        if burned.is_empty() {
            return Err(burn_err.expect("at least one burn-in ran"));
        }
    }

    // Continue the best start to convergence; on a mid-run component
    // collapse fall through to the next-ranked start.
    let mut outcome = None;
    let mut run_err = None;
    for (_, burn) in burned {
        if burn.converged {
            outcome = Some(burn);
            break;
        }
        let warm = burn.trace.clone();
        match ecme_loop(&sorted, &r_all, burn.theta, opts, min_mass, opts.max_iter, Some(warm)) {
            Ok(mut out) => {
                out.iters += burn.iters;
                outcome = Some(out);
                break;
            }
            Err(e @ (Error::EmptyComponent { .. } | Error::SingularDesign { .. })) => {
                run_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    let outcome = match outcome {
        Some(out) => out,
        None => return Err(run_err.expect("every start failed")),
    };

    let (theta_hat, _) = outcome.theta.canonical_order();
    let cache = e_step(&sorted, &theta_hat)?;
    let mut responsibilities = vec![Vec::new(); n];
    let mut labels = vec![0usize; n];
    for (pos, &orig) in order.iter().enumerate() {
        labels[orig] = argmax(&cache.rows[pos].z);
        responsibilities[orig] = cache.rows[pos].z.clone();
    }
    let m = theta_hat.n_params(opts.tie_nu);
    let (aic, bic) = aic_bic(outcome.ll, m, n);
    let se = information_se(&sorted, &theta_hat).ok();
    Ok(FitReport {
        theta_hat,
        loglik_trace: outcome.trace,
        converged: outcome.converged,
        iters: outcome.iters,
        responsibilities,
        labels,
        se,
        aic,
        bic,
        n_params: m,
        n,
        tie_nu: opts.tie_nu,
        boundary_flags: outcome.flags,
    })
}

struct LoopOutcome {
    theta: MixtureParams,
    ll: f64,
    trace: Vec<f64>,
    converged: bool,
    iters: usize,
    flags: Vec<String>,
}

/// The ECME iteration proper, from a given starting point. `warm_trace`
/// carries the log-likelihood path of a preceding burn-in so the reported
/// trace stays contiguous.
fn ecme_loop(
    sorted: &[CensoredObservation],
    r_all: &[Vec<f64>],
    theta0: MixtureParams,
    opts: &FitOptions,
    min_mass: f64,
    max_iter: usize,
    warm_trace: Option<Vec<f64>>,
) -> Result<LoopOutcome> {
    let g = theta0.g();
    let mut theta = theta0;
    let mut ll = observed_loglik(sorted, &theta)?;
    let mut trace = warm_trace.unwrap_or_else(|| vec![ll]);
    let mut converged = false;
    let mut flags: Vec<String> = Vec::new();
    let mut iters = 0;
    while iters < max_iter {
        iters += 1;
        let theta_prev = theta.clone();
        let cache = e_step(sorted, &theta)?;
        if let Some(j) = (0..g).find(|&j| cache.mass(j) < min_mass) {
            return Err(Error::EmptyComponent {
                component: j + 1,
                mass: cache.mass(j),
                threshold: min_mass,
            });
        }
        let (beta, sigma2) = cm_step_regression(&cache, sorted, min_mass)?;
        theta.beta = beta;
        theta.sigma2 = sigma2;
        if g > 1 {
            // One minorization step; halve it if a long step ever
            // overshoots, so the observed log-likelihood cannot drop.
            let tau_old = theta.tau.clone();
            let tau_full = cm_step_gating(&cache, &tau_old, r_all)?;
            let base_ll = observed_loglik(sorted, &theta)?;
            let mut t = 1.0;
            for _ in 0..20 {
                let cand: Vec<DVector<f64>> = tau_old
                    .iter()
                    .zip(&tau_full)
                    .map(|(o, f)| o + t * (f - o))
                    .collect();
                let cand_theta = MixtureParams { tau: cand.clone(), ..theta.clone() };
                if observed_loglik(sorted, &cand_theta)? >= base_ll {
                    theta.tau = cand;
                    break;
                }
                t *= 0.5;
            }
        }
        let (fams, step_flags) = cml_step_nu(sorted, &theta, opts)?;
        theta.fam = fams;
        flags = step_flags;
        let new_ll = observed_loglik(sorted, &theta)?;
        if new_ll < ll {
            // Numerical plateau: every sub-step is ascent up to rounding,
            // so stop at the previous iterate.
            theta = theta_prev;
            converged = (ll - new_ll).abs() < opts.tol;
            if !converged {
                flags.push(format!("log-likelihood decreased by {:.3e}", ll - new_ll));
            }
            break;
        }
        trace.push(new_ll);
        let delta = new_ll - ll;
        ll = new_ll;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(LoopOutcome { theta, ll, trace, converged, iters, flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{generate_moe_data, GeneratorSpec, MixingLaw, RLaw};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uncensored_fixture(n: usize, seed: u64) -> Vec<CensoredObservation> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x1: f64 = rng.gen_range(-2.0..2.0);
                let y = 1.0 + 0.5 * x1 + rng.gen_range(-0.5..0.5);
                CensoredObservation::uncensored(y, vec![1.0, x1], vec![1.0]).unwrap()
            })
            .collect()
    }

    fn ols(data: &[CensoredObservation]) -> (DVector<f64>, f64) {
        let p = data[0].x.len();
        let mut gram = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        for obs in data {
            for a in 0..p {
                rhs[a] += obs.w * obs.x[a];
                for b in 0..p {
                    gram[(a, b)] += obs.x[a] * obs.x[b];
                }
            }
        }
        let beta = gram.cholesky().unwrap().solve(&rhs);
        let rss: f64 = data
            .iter()
            .map(|o| {
                let f: f64 = beta.iter().zip(&o.x).map(|(b, v)| b * v).sum();
                (o.w - f).powi(2)
            })
            .sum();
        (beta, rss / data.len() as f64)
    }

    #[test]
    fn e_step_normal_uncensored_is_identity_weights() {
        let data = uncensored_fixture(20, 7);
        let theta = MixtureParams {
            beta: vec![DVector::from_vec(vec![1.0, 0.5])],
            sigma2: vec![0.2],
            fam: vec![SmnFamily::Normal],
            tau: vec![],
        };
        let cache = e_step(&data, &theta).unwrap();
        for (row, obs) in cache.rows.iter().zip(&data) {
            assert_eq!(row.z, vec![1.0]);
            assert_relative_eq!(row.u[0], 1.0, max_relative = 1e-14);
            assert_relative_eq!(row.uy[0], obs.w, max_relative = 1e-14);
            assert_relative_eq!(row.uy2[0], obs.w * obs.w, max_relative = 1e-14);
        }
    }

    #[test]
    fn e_step_uncensored_consistency_uy_relations() {
        // For every family, uncensored rows must satisfy uy = y*u, uy2 = y^2*u.
        let data = uncensored_fixture(10, 3);
        for fam in [
            SmnFamily::StudentT { nu: 4.0 },
            SmnFamily::Slash { nu: 2.5 },
            SmnFamily::ContaminatedNormal { nu: 0.2, gamma: 0.4 },
        ] {
            let theta = MixtureParams {
                beta: vec![DVector::from_vec(vec![0.8, 0.4]), DVector::from_vec(vec![1.2, 0.6])],
                sigma2: vec![0.3, 0.5],
                fam: vec![fam; 2],
                tau: vec![DVector::from_vec(vec![0.1])],
            };
            let cache = e_step(&data, &theta).unwrap();
            for (row, obs) in cache.rows.iter().zip(&data) {
                assert_abs_diff_eq!(row.z.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
                for j in 0..2 {
                    assert_relative_eq!(row.uy[j], obs.w * row.u[j], max_relative = 1e-12);
                    assert_relative_eq!(row.uy2[j], obs.w * obs.w * row.u[j], max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn cm_regression_reduces_to_ols() {
        let data = uncensored_fixture(50, 11);
        let theta = MixtureParams {
            beta: vec![DVector::from_vec(vec![0.0, 0.0])],
            sigma2: vec![1.0],
            fam: vec![SmnFamily::Normal],
            tau: vec![],
        };
        let cache = e_step(&data, &theta).unwrap();
        let (beta, sigma2) = cm_step_regression(&cache, &data, 1e-6).unwrap();
        let (b_ols, s2_ols) = ols(&data);
        assert_relative_eq!(beta[0][0], b_ols[0], max_relative = 1e-10);
        assert_relative_eq!(beta[0][1], b_ols[1], max_relative = 1e-10);
        assert_relative_eq!(sigma2[0], s2_ols, max_relative = 1e-10);
    }

    #[test]
    fn cm_regression_constant_weights_cancel() {
        let data = uncensored_fixture(30, 5);
        let n = data.len();
        // Hand-build a cache with all weights equal to 0.37.
        let rows: Vec<EStepRow> = data
            .iter()
            .map(|o| EStepRow {
                z: vec![1.0],
                u: vec![0.37],
                uy: vec![0.37 * o.w],
                uy2: vec![0.37 * o.w * o.w],
                b: None,
            })
            .collect();
        let cache = EStepCache { rows };
        let (beta, _) = cm_step_regression(&cache, &data, 1e-6).unwrap();
        let (b_ols, _) = ols(&data);
        assert_relative_eq!(beta[0][0], b_ols[0], max_relative = 1e-10);
        assert_relative_eq!(beta[0][1], b_ols[1], max_relative = 1e-10);
        let _ = n;
    }

    #[test]
    fn cm_regression_hand_fixture() {
        // n=4, p=2, unequal weights; normal equations solved symbolically:
        // X = [(1,0), (1,1), (1,2), (1,3)], y = (0, 1, 1, 3), w = (1, 2, 1, 2).
        // A = [[6, 10], [10, 24]], rhs = [9, 22]; det = 44;
        // beta = ( (24*9-10*22)/44, (6*22-10*9)/44 ) = (-1/11, 21/22).
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 1.0, 3.0];
        let ws = [1.0, 2.0, 1.0, 2.0];
        let data: Vec<CensoredObservation> = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                CensoredObservation::uncensored(y, vec![1.0, x], vec![1.0]).unwrap()
            })
            .collect();
        let rows: Vec<EStepRow> = ys
            .iter()
            .zip(&ws)
            .map(|(&y, &w)| EStepRow {
                z: vec![1.0],
                u: vec![w],
                uy: vec![w * y],
                uy2: vec![w * y * y],
                b: None,
            })
            .collect();
        let cache = EStepCache { rows };
        let (beta, _) = cm_step_regression(&cache, &data, 1e-6).unwrap();
        assert_relative_eq!(beta[0][0], -1.0 / 11.0, max_relative = 1e-12);
        assert_relative_eq!(beta[0][1], 21.0 / 22.0, max_relative = 1e-12);
    }

    #[test]
    fn gating_step_zero_score_is_fixed_point() {
        let r_all: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64 / 10.0]).collect();
        let tau = vec![DVector::from_vec(vec![0.3, -0.2])];
        let rows: Vec<EStepRow> = r_all
            .iter()
            .map(|r| {
                let pi = gating_probs(r, &tau).unwrap();
                EStepRow { z: pi, u: Vec::new(), uy: Vec::new(), uy2: Vec::new(), b: None }
            })
            .collect();
        let new = cm_step_gating(&EStepCache { rows }, &tau, &r_all).unwrap();
        assert_abs_diff_eq!((&new[0] - &tau[0]).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gating_step_hand_value() {
        // G=2, intercept-only, all memberships on component 1, tau=0:
        // update = 4 * (n)^-1 * sum (1 - 0.5) = 2.
        let n = 8;
        let r_all: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0]).collect();
        let rows: Vec<EStepRow> = (0..n)
            .map(|_| EStepRow {
                z: vec![1.0, 0.0],
                u: Vec::new(),
                uy: Vec::new(),
                uy2: Vec::new(),
                b: None,
            })
            .collect();
        let tau = vec![DVector::zeros(1)];
        let new = cm_step_gating(&EStepCache { rows }, &tau, &r_all).unwrap();
        assert_relative_eq!(new[0][0], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn gating_iteration_reaches_soft_label_mle() {
        // Fixed soft memberships; iterating the minorization step converges
        // to the stationary point of the soft-label multinomial likelihood,
        // where the score is zero.
        let r_all: Vec<Vec<f64>> = (0..40).map(|i| vec![1.0, (i as f64 - 20.0) / 10.0]).collect();
        let rows: Vec<EStepRow> = r_all
            .iter()
            .map(|r| {
                let p = 1.0 / (1.0 + (-0.5 - 1.2 * r[1]).exp());
                EStepRow {
                    z: vec![p, 1.0 - p],
                    u: Vec::new(),
                    uy: Vec::new(),
                    uy2: Vec::new(),
                    b: None,
                }
            })
            .collect();
        let cache = EStepCache { rows };
        let mut tau = vec![DVector::zeros(2)];
        for _ in 0..500 {
            tau = cm_step_gating(&cache, &tau, &r_all).unwrap();
        }
        // The memberships were generated by a logistic model with
        // coefficients (0.5, 1.2), which is therefore the exact optimum.
        assert_abs_diff_eq!(tau[0][0], 0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(tau[0][1], 1.2, epsilon = 1e-4);
    }

    #[test]
    fn g1_normal_fit_is_ols_in_two_iterations() {
        let data = uncensored_fixture(60, 2);
        let report = fit(&data, 1, FamilyKind::Normal, &FitOptions::default()).unwrap();
        let (b_ols, s2_ols) = ols(&data);
        assert!(report.converged);
        assert!(report.iters <= 2, "iters = {}", report.iters);
        assert_abs_diff_eq!(report.theta_hat.beta[0][0], b_ols[0], epsilon = 1e-8);
        assert_abs_diff_eq!(report.theta_hat.beta[0][1], b_ols[1], epsilon = 1e-8);
        assert_abs_diff_eq!(report.theta_hat.sigma2[0], s2_ols, epsilon = 1e-8);
        assert_eq!(report.labels, vec![0; data.len()]);
    }

    #[test]
    fn fit_is_deterministic_and_order_invariant() {
        let spec = GeneratorSpec {
            beta: vec![DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![4.0, -1.0])],
            sigma2: vec![0.25, 0.25],
            tau: vec![DVector::from_vec(vec![0.4, 0.8])],
            mixing: vec![MixingLaw::Normal; 2],
            x_ranges: vec![(-2.0, 2.0)],
            r_law: RLaw::SameAsX,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let sample = generate_moe_data(&spec, 120, &mut rng).unwrap();
        let opts = FitOptions { seed: 9, ..FitOptions::default() };
        let a = fit(&sample.data, 2, FamilyKind::Normal, &opts).unwrap();
        let b = fit(&sample.data, 2, FamilyKind::Normal, &opts).unwrap();
        assert_eq!(a.theta_hat, b.theta_hat);
        assert_eq!(a.loglik_trace, b.loglik_trace);
        assert_eq!(a.labels, b.labels);

        // Reversing the rows must give identical estimates and
        // correspondingly reversed memberships.
        let reversed: Vec<CensoredObservation> = sample.data.iter().rev().cloned().collect();
        let c = fit(&reversed, 2, FamilyKind::Normal, &opts).unwrap();
        assert_eq!(a.theta_hat, c.theta_hat);
        let mut rev_labels = c.labels.clone();
        rev_labels.reverse();
        assert_eq!(a.labels, rev_labels);
    }

    #[test]
    fn fit_trace_is_monotone() {
        let spec = GeneratorSpec {
            beta: vec![DVector::from_vec(vec![-1.0, 2.0]), DVector::from_vec(vec![2.0, -1.0])],
            sigma2: vec![1.0, 0.5],
            tau: vec![DVector::from_vec(vec![0.5, 1.0])],
            mixing: vec![MixingLaw::StudentT { nu: 4.0 }; 2],
            x_ranges: vec![(-1.5, 1.5)],
            r_law: RLaw::SameAsX,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sample = generate_moe_data(&spec, 150, &mut rng).unwrap();
        crate::simgen::apply_interval_censoring(&mut sample.data, 0.15, 1.0, &mut rng).unwrap();
        let report = fit(&sample.data, 2, FamilyKind::StudentT, &FitOptions::default()).unwrap();
        for w in report.loglik_trace.windows(2) {
            assert!(w[1] - w[0] >= -1e-8, "trace decreased: {} -> {}", w[0], w[1]);
        }
        assert!(report.converged);
    }

    #[test]
    fn canonical_component_order_in_report() {
        let spec = GeneratorSpec {
            beta: vec![DVector::from_vec(vec![5.0, 0.5]), DVector::from_vec(vec![-5.0, -0.5])],
            sigma2: vec![0.5, 0.5],
            tau: vec![DVector::from_vec(vec![0.0, 0.3])],
            mixing: vec![MixingLaw::Normal; 2],
            x_ranges: vec![(-1.0, 1.0)],
            r_law: RLaw::SameAsX,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let sample = generate_moe_data(&spec, 100, &mut rng).unwrap();
        let report = fit(&sample.data, 2, FamilyKind::Normal, &FitOptions::default()).unwrap();
        assert!(report.theta_hat.beta[0][0] < report.theta_hat.beta[1][0]);
    }

    #[test]
    fn user_supplied_initialization_is_respected() {
        let data = uncensored_fixture(40, 21);
        let start = MixtureParams {
            beta: vec![DVector::from_vec(vec![1.0, 0.5])],
            sigma2: vec![0.1],
            fam: vec![SmnFamily::Normal],
            tau: vec![],
        };
        let opts = FitOptions {
            init_strategy: InitStrategy::UserSupplied(start.clone()),
            ..FitOptions::default()
        };
        let init = initialize(&data, 1, FamilyKind::Normal, &opts).unwrap();
        assert_eq!(init, start);

        // Mismatched dimensions are rejected.
        let bad = MixtureParams {
            beta: vec![DVector::from_vec(vec![1.0])],
            sigma2: vec![0.1],
            fam: vec![SmnFamily::Normal],
            tau: vec![],
        };
        let opts = FitOptions {
            init_strategy: InitStrategy::UserSupplied(bad),
            ..FitOptions::default()
        };
        assert!(initialize(&data, 1, FamilyKind::Normal, &opts).is_err());
    }

    #[test]
    fn initialization_zero_tau_gives_uniform_gating() {
        let spec = GeneratorSpec {
            beta: vec![DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![6.0, 1.0])],
            sigma2: vec![0.1, 0.1],
            tau: vec![DVector::from_vec(vec![0.0, 0.0])],
            mixing: vec![MixingLaw::Normal; 2],
            x_ranges: vec![(-1.0, 1.0)],
            r_law: RLaw::SameAsX,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sample = generate_moe_data(&spec, 60, &mut rng).unwrap();
        let theta = initialize(&sample.data, 2, FamilyKind::Normal, &FitOptions::default()).unwrap();
        for obs in &sample.data {
            let pi = gating_probs(&obs.r, &theta.tau).unwrap();
            assert_relative_eq!(pi[0], 0.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn initialization_recovers_separated_clusters() {
        // Means 5 apart with sigma^2 = 0.01: k-means must recover the
        // partition and per-group least squares lands near the truth.
        let spec = GeneratorSpec {
            beta: vec![DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![5.0, 1.0])],
            sigma2: vec![0.01, 0.01],
            tau: vec![DVector::from_vec(vec![0.0, 0.0])],
            mixing: vec![MixingLaw::Normal; 2],
            x_ranges: vec![(-0.3, 0.3)],
            r_law: RLaw::SameAsX,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let sample = generate_moe_data(&spec, 80, &mut rng).unwrap();
        let theta = initialize(&sample.data, 2, FamilyKind::Normal, &FitOptions::default()).unwrap();
        let mut intercepts = [theta.beta[0][0], theta.beta[1][0]];
        intercepts.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(intercepts[0], 0.0, epsilon = 0.2);
        assert_abs_diff_eq!(intercepts[1], 5.0, epsilon = 0.2);
    }

    #[test]
    fn cml_drives_nu_to_upper_bound_on_normal_data() {
        let data = uncensored_fixture(150, 8);
        let opts = FitOptions::default();
        let report = fit(&data, 1, FamilyKind::StudentT, &opts).unwrap();
        let SmnFamily::StudentT { nu } = report.theta_hat.fam[0] else {
            panic!("wrong family")
        };
        assert!(nu > 99.0, "nu = {nu}");
        assert!(
            report.boundary_flags.iter().any(|f| f.contains("upper")),
            "flags = {:?}",
            report.boundary_flags
        );
    }

    #[test]
    fn tied_nu_matches_grid_search() {
        let spec = GeneratorSpec {
            beta: vec![DVector::from_vec(vec![0.0, 1.0])],
            sigma2: vec![1.0],
            tau: vec![],
            mixing: vec![MixingLaw::StudentT { nu: 3.0 }],
            x_ranges: vec![(-2.0, 2.0)],
            r_law: RLaw::SameAsX,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let sample = generate_moe_data(&spec, 120, &mut rng).unwrap();
        let theta = MixtureParams {
            beta: vec![DVector::from_vec(vec![0.0, 1.0])],
            sigma2: vec![1.0],
            fam: vec![SmnFamily::StudentT { nu: 20.0 }],
            tau: vec![],
        };
        let opts = FitOptions::default();
        let (fams, _) = cml_step_nu(&sample.data, &theta, &opts).unwrap();
        let SmnFamily::StudentT { nu } = fams[0] else { panic!() };
        // 1e-3-resolution grid over the same box.
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut v = 2.01;
        while v <= 100.0 {
            let cand = MixtureParams {
                fam: vec![SmnFamily::StudentT { nu: v }],
                ..theta.clone()
            };
            let l = observed_loglik(&sample.data, &cand).unwrap();
            if l > best.0 {
                best = (l, v);
            }
            v += 1e-3;
        }
        assert_abs_diff_eq!(nu, best.1, epsilon = 2e-3);
    }

    #[test]
    fn cn_nu_closed_form_clips_at_lower_bound() {
        // Data tightly packed around the mean: bad-point probabilities are
        // essentially zero, so the closed-form nu ratio clips at 0.01.
        let data = uncensored_fixture(50, 4);
        let (b_ols, s2) = ols(&data);
        let theta = MixtureParams {
            beta: vec![b_ols],
            sigma2: vec![s2],
            fam: vec![SmnFamily::ContaminatedNormal { nu: 0.5, gamma: 0.001 }],
            tau: vec![],
        };
        // gamma near zero makes the bad density flat: b stays far below the
        // prior weight nu = 0.5 everywhere.
        let cache = e_step(&data, &theta).unwrap();
        let bsum: f64 = cache.rows.iter().map(|r| r.b.as_ref().unwrap()[0]).sum();
        assert!(bsum / (data.len() as f64) < 0.1, "mean b = {}", bsum / data.len() as f64);
    }

    #[test]
    fn pinned_nu_box_keeps_nu_fixed() {
        let data = uncensored_fixture(40, 19);
        let opts = FitOptions { nu_bounds: Some((1e6, 1e6)), ..FitOptions::default() };
        let report = fit(&data, 1, FamilyKind::StudentT, &opts).unwrap();
        let SmnFamily::StudentT { nu } = report.theta_hat.fam[0] else { panic!() };
        assert_eq!(nu, 1e6);
    }

    #[test]
    fn unattainable_mass_floor_fails() {
        // A mass floor above n/2 can never hold for both components, so
        // every candidate start must fail and the fit must report it.
        let data: Vec<CensoredObservation> = (0..12)
            .map(|i| {
                CensoredObservation::uncensored(
                    if i % 2 == 0 { 0.0 } else { 1e-9 },
                    vec![1.0, (i % 3) as f64],
                    vec![1.0],
                )
                .unwrap()
            })
            .collect();
        let opts = FitOptions {
            min_component_mass: Some(7.0),
            ..FitOptions::default()
        };
        let err = fit(&data, 2, FamilyKind::Normal, &opts);
        assert!(err.is_err());
    }

    #[test]
    fn self_consistency_at_convergence() {
        let spec = GeneratorSpec {
            beta: vec![DVector::from_vec(vec![0.0, 2.0]), DVector::from_vec(vec![3.0, -2.0])],
            sigma2: vec![0.5, 0.5],
            tau: vec![DVector::from_vec(vec![0.3, 0.5])],
            mixing: vec![MixingLaw::Normal; 2],
            x_ranges: vec![(-1.0, 1.0)],
            r_law: RLaw::SameAsX,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample = generate_moe_data(&spec, 200, &mut rng).unwrap();
        let opts = FitOptions::default();
        let report = fit(&sample.data, 2, FamilyKind::Normal, &opts).unwrap();
        assert!(report.converged);
        // One extra full iteration moves every parameter by < 10*tol.
        let theta = report.theta_hat.clone();
        let cache = e_step(&sample.data, &theta).unwrap();
        let (beta, sigma2) = cm_step_regression(&cache, &sample.data, 1e-6).unwrap();
        for j in 0..2 {
            assert!((&beta[j] - &theta.beta[j]).amax() < 10.0 * opts.tol);
            assert!((sigma2[j] - theta.sigma2[j]).abs() < 10.0 * opts.tol);
        }
    }
}
