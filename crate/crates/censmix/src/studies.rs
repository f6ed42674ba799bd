//! The four simulation-study designs and their Monte-Carlo runners, shared
//! by the `mc` command and the acceptance suite.

use crate::ecme::{fit, FitOptions};
use crate::error::{Error, Result};
use crate::inference::{information_se, SeTable};
use crate::metrics::{mcr, rand_indices, regression_mean_mse};
use crate::model::{CensoredObservation, MixtureParams};
use crate::numeric::derive_seed;
use crate::simgen::{
    apply_interval_censoring, apply_tail_censoring, generate_moe_data, inject_outliers,
    GeneratorSpec, MixingLaw, RLaw, TailSide, OUTLIER_LABEL,
};
use crate::smn::FamilyKind;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Asymptotic,
    Gselect,
    Heavytail,
    Outliers,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "asymptotic" => Ok(Scenario::Asymptotic),
            "gselect" => Ok(Scenario::Gselect),
            "heavytail" => Ok(Scenario::Heavytail),
            "outliers" => Ok(Scenario::Outliers),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeavytailVariant {
    /// U^{-1} exponential (Laplace-type errors) in every component.
    S1,
    /// Birnbaum-Saunders mixing with per-component shapes (3, 1, 2).
    S2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierMixing {
    Gig,
    BirnbaumSaunders,
    Laplace,
}

impl OutlierMixing {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gig" => Ok(OutlierMixing::Gig),
            "bs" => Ok(OutlierMixing::BirnbaumSaunders),
            "laplace" => Ok(OutlierMixing::Laplace),
            other => Err(Error::Config(format!("unknown mixing `{other}`"))),
        }
    }

    fn label(self) -> &'static str {
        match self {
            OutlierMixing::Gig => "gig",
            OutlierMixing::BirnbaumSaunders => "bs",
            OutlierMixing::Laplace => "laplace",
        }
    }
}

/// Two-component design with three expert and two gating covariates, used
/// for the consistency and standard-error studies.
#[must_use]
pub fn asymptotic_spec(kind: FamilyKind) -> GeneratorSpec {
    let mixing = match kind {
        FamilyKind::Normal => MixingLaw::Normal,
        FamilyKind::StudentT => MixingLaw::StudentT { nu: 3.0 },
        FamilyKind::Slash => MixingLaw::Slash { nu: 3.0 },
        FamilyKind::ContaminatedNormal => MixingLaw::ContaminatedNormal { nu: 0.3, gamma: 0.3 },
    };
    GeneratorSpec {
        beta: vec![
            DVector::from_vec(vec![0.0, -1.0, -2.0, -3.0]),
            DVector::from_vec(vec![-1.0, 1.0, 2.0, 3.0]),
        ],
        sigma2: vec![1.0, 2.0],
        tau: vec![DVector::from_vec(vec![0.7, 1.0, 2.0])],
        mixing: vec![mixing; 2],
        x_ranges: vec![(1.0, 5.0), (-2.0, 2.0), (1.0, 4.0)],
        r_law: RLaw::Uniform(vec![(-2.0, 1.0), (-1.0, 1.0)]),
    }
}

/// Three-component design with generalized-inverse-Gaussian mixing used for
/// the order-selection study; scale one in every expert.
#[must_use]
pub fn gselect_spec() -> GeneratorSpec {
    GeneratorSpec {
        beta: vec![
            DVector::from_vec(vec![-4.0, 4.0]),
            DVector::from_vec(vec![0.0, -2.0]),
            DVector::from_vec(vec![0.0, 4.0]),
        ],
        sigma2: vec![1.0, 1.0, 1.0],
        tau: vec![
            DVector::from_vec(vec![0.0, 13.0]),
            DVector::from_vec(vec![2.0, 9.0]),
        ],
        mixing: vec![
            MixingLaw::Gig { kappa: -0.5, chi: 1.0, psi: 2.0 },
            MixingLaw::Gig { kappa: 0.5, chi: 1.0, psi: 2.0 },
            MixingLaw::Gig { kappa: -0.5, chi: 2.0, psi: 1.0 },
        ],
        x_ranges: vec![(-2.0, 2.0)],
        r_law: RLaw::SameAsX,
    }
}

/// Three-component heavy-tail design with interval censoring.
#[must_use]
pub fn heavytail_spec(variant: HeavytailVariant) -> GeneratorSpec {
    let mixing = match variant {
        HeavytailVariant::S1 => vec![MixingLaw::LaplaceViaExp { lambda: 0.5 }; 3],
        HeavytailVariant::S2 => vec![
            MixingLaw::BirnbaumSaunders { alpha: 3.0, beta: 1.0 },
            MixingLaw::BirnbaumSaunders { alpha: 1.0, beta: 1.0 },
            MixingLaw::BirnbaumSaunders { alpha: 2.0, beta: 1.0 },
        ],
    };
    GeneratorSpec {
        beta: vec![
            DVector::from_vec(vec![-2.0, -1.0, -2.0, -3.0]),
            DVector::from_vec(vec![0.5, 1.0, 2.0, 3.0]),
            DVector::from_vec(vec![2.0, 1.0, 3.0, 5.0]),
        ],
        sigma2: vec![1.0, 3.0, 5.0],
        tau: vec![
            DVector::from_vec(vec![2.0, 10.0]),
            DVector::from_vec(vec![0.7, 10.0]),
        ],
        mixing,
        x_ranges: vec![(1.0, 5.0), (0.0, 1.0), (-2.0, -1.0)],
        r_law: RLaw::Uniform(vec![(-1.0, 1.0)]),
    }
}

/// Two sharply separated experts with tiny variance, fat-tailed mixing, and
/// an injected outlier class at y = -2.
#[must_use]
pub fn outliers_spec(mixing: OutlierMixing) -> GeneratorSpec {
    let mixing = match mixing {
        OutlierMixing::Gig => vec![
            MixingLaw::Gig { kappa: -0.5, chi: 1.0, psi: 0.2 },
            MixingLaw::Gig { kappa: 0.5, chi: 1.0, psi: 0.2 },
        ],
        OutlierMixing::BirnbaumSaunders => vec![
            MixingLaw::BirnbaumSaunders { alpha: 0.5, beta: 1.0 },
            MixingLaw::BirnbaumSaunders { alpha: 1.0, beta: 1.0 },
        ],
        OutlierMixing::Laplace => vec![MixingLaw::LaplaceViaExp { lambda: 0.5 }; 2],
    };
    GeneratorSpec {
        beta: vec![DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![0.0, -1.0])],
        sigma2: vec![0.01, 0.01],
        tau: vec![DVector::from_vec(vec![0.0, 10.0])],
        mixing,
        x_ranges: vec![(-1.0, 1.0)],
        r_law: RLaw::SameAsX,
    }
}

/// Clustering agreement between generated and fitted labels, with injected
/// outlier rows excluded.
pub fn agreement_metrics(truth: &[usize], pred: &[usize]) -> Result<(f64, f64, f64, f64)> {
    let mut t = Vec::with_capacity(truth.len());
    let mut p = Vec::with_capacity(pred.len());
    for (&a, &b) in truth.iter().zip(pred) {
        if a != OUTLIER_LABEL {
            t.push(a);
            p.push(b);
        }
    }
    let m = mcr(&t, &p)?;
    let (ri, ari, jci) = rand_indices(&t, &p)?;
    Ok((m, ri, ari, jci))
}

/// Flatten beta, sigma2, tau (in that order) for bias bookkeeping.
#[must_use]
pub fn flatten_params(theta: &MixtureParams) -> Vec<f64> {
    let mut out = Vec::new();
    for b in &theta.beta {
        out.extend(b.iter().copied());
    }
    out.extend(theta.sigma2.iter().copied());
    for t in &theta.tau {
        out.extend(t.iter().copied());
    }
    out
}

/// Column names matching `flatten_params` (components 1-based, coefficients
/// 0-based).
#[must_use]
pub fn param_names(g: usize, p: usize, q: usize) -> Vec<String> {
    let mut out = Vec::new();
    for j in 1..=g {
        for k in 0..p {
            out.push(format!("beta{j}_{k}"));
        }
    }
    for j in 1..=g {
        out.push(format!("sigma2_{j}"));
    }
    for j in 1..=g.saturating_sub(1) {
        for k in 0..q {
            out.push(format!("tau{j}_{k}"));
        }
    }
    out
}

/// Standard errors flattened in the `flatten_params` order.
#[must_use]
pub fn flatten_se(se: &SeTable) -> Vec<f64> {
    let mut out = Vec::new();
    for b in &se.beta {
        out.extend(b.iter().copied());
    }
    out.extend(se.sigma2.iter().copied());
    for t in &se.tau {
        out.extend(t.iter().copied());
    }
    out
}

/// Visit every permutation of `0..g` (new index -> old index).
fn for_each_permutation<F: FnMut(&[usize])>(g: usize, f: &mut F) {
    fn rec<F: FnMut(&[usize])>(current: &mut Vec<usize>, used: &mut [bool], g: usize, f: &mut F) {
        if current.len() == g {
            f(current);
            return;
        }
        for j in 0..g {
            if !used[j] {
                used[j] = true;
                current.push(j);
                rec(current, used, g, f);
                current.pop();
                used[j] = false;
            }
        }
    }
    rec(&mut Vec::with_capacity(g), &mut vec![false; g], g, f);
}

/// Undo label switching before estimates are compared to the truth: permute
/// the fitted components so each sits in the slot of the true component it
/// is closest to (squared beta distance plus squared log-sigma2 distance).
/// When the order changes, the gating coefficients are re-referenced and
/// the standard errors recomputed at the permuted estimate.
#[must_use]
pub fn align_to_truth(
    theta: &MixtureParams,
    se: Option<SeTable>,
    data: &[CensoredObservation],
    truth: &MixtureParams,
) -> (MixtureParams, Option<SeTable>) {
    let g = theta.g();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_permutation(g, &mut |perm| {
        let cost: f64 = (0..g)
            .map(|j| {
                let db = (&theta.beta[perm[j]] - &truth.beta[j]).norm_squared();
                let ds = (theta.sigma2[perm[j]].ln() - truth.sigma2[j].ln()).powi(2);
                db + ds
            })
            .sum();
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, perm.to_vec()));
        }
    });
    let (_, order) = best.expect("g >= 1");
    if order.iter().enumerate().all(|(k, &j)| k == j) {
        return (theta.clone(), se);
    }
    let aligned = theta.reordered(&order);
    let se = information_se(data, &aligned).ok();
    (aligned, se)
}

#[derive(Debug, Clone)]
pub struct AsymptoticRep {
    /// Estimates aligned to the true component order.
    pub theta: MixtureParams,
    pub se: Option<SeTable>,
    pub converged: bool,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub mcr: f64,
    pub ri: f64,
    pub ari: f64,
    pub jci: f64,
}

/// Consistency/SE study cell: fit the generating family with G = 2 under
/// right tail censoring.
pub fn run_asymptotic_cell(
    kind: FamilyKind,
    n: usize,
    cens: f64,
    reps: usize,
    seed: u64,
    tie_nu: bool,
) -> Vec<Result<AsymptoticRep>> {
    let spec = asymptotic_spec(kind);
    let truth = asymptotic_truth(kind);
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, rep as u64));
            let mut sample = generate_moe_data(&spec, n, &mut rng)?;
            apply_tail_censoring(&mut sample.data, cens, TailSide::Right)?;
            let opts = FitOptions {
                seed: derive_seed(seed, (1 << 32) + rep as u64),
                tie_nu,
                ..FitOptions::default()
            };
            let report = fit(&sample.data, 2, kind, &opts)?;
            let (m, ri, ari, jci) = agreement_metrics(&sample.labels, &report.labels)?;
            let (theta, se) =
                align_to_truth(&report.theta_hat, report.se.clone(), &sample.data, &truth);
            Ok(AsymptoticRep {
                theta,
                se,
                converged: report.converged,
                loglik: report.loglik(),
                aic: report.aic,
                bic: report.bic,
                mcr: m,
                ri,
                ari,
                jci,
            })
        })
        .collect()
}

/// Canonically ordered true parameters of the asymptotic design, aligned
/// with the component order `fit` reports.
#[must_use]
pub fn asymptotic_truth(kind: FamilyKind) -> MixtureParams {
    asymptotic_spec(kind).mean_params().canonical_order().0
}

#[derive(Debug, Clone)]
pub struct GFitRow {
    pub g: usize,
    pub converged: bool,
    pub loglik: f64,
    pub m: usize,
    pub aic: f64,
    pub bic: f64,
}

#[derive(Debug)]
pub struct GselectRep {
    pub rows: Vec<(usize, Result<GFitRow>)>,
    pub chosen_bic: usize,
    pub chosen_aic: usize,
}

/// Order-selection cell: left-censored GIG data, Student-t fits over a
/// range of G; a replication fails only if every G fails.
pub fn run_gselect_cell(
    n: usize,
    cens: f64,
    g_min: usize,
    g_max: usize,
    reps: usize,
    seed: u64,
    tie_nu: bool,
) -> Vec<Result<GselectRep>> {
    let spec = gselect_spec();
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, rep as u64));
            let mut sample = generate_moe_data(&spec, n, &mut rng)?;
            apply_tail_censoring(&mut sample.data, cens, TailSide::Left)?;
            let opts = FitOptions {
                seed: derive_seed(seed, (1 << 32) + rep as u64),
                tie_nu,
                ..FitOptions::default()
            };
            let mut rows = Vec::new();
            for g in g_min..=g_max {
                let row = fit(&sample.data, g, FamilyKind::StudentT, &opts).map(|r| GFitRow {
                    g,
                    converged: r.converged,
                    loglik: r.loglik(),
                    m: r.n_params,
                    aic: r.aic,
                    bic: r.bic,
                });
                rows.push((g, row));
            }
            let best = |key: fn(&GFitRow) -> f64| -> Option<usize> {
                rows.iter()
                    .filter_map(|(g, r)| r.as_ref().ok().map(|row| (*g, key(row))))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(g, _)| g)
            };
            match (best(|r| r.bic), best(|r| r.aic)) {
                (Some(chosen_bic), Some(chosen_aic)) => {
                    Ok(GselectRep { rows, chosen_bic, chosen_aic })
                }
                _ => Err(Error::FitFailure("every component count failed".into())),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SimpleRep {
    pub converged: bool,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub mcr: f64,
    pub ri: f64,
    pub ari: f64,
    pub jci: f64,
}

/// Heavy-tail cell: interval-censored data from the S1/S2 design, G = 3
/// fits of one family.
pub fn run_heavytail_cell(
    variant: HeavytailVariant,
    fit_kind: FamilyKind,
    n: usize,
    cens: f64,
    reps: usize,
    seed: u64,
    tie_nu: bool,
) -> Vec<Result<SimpleRep>> {
    let spec = heavytail_spec(variant);
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, rep as u64));
            let mut sample = generate_moe_data(&spec, n, &mut rng)?;
            apply_interval_censoring(&mut sample.data, cens, 1.0, &mut rng)?;
            let opts = FitOptions {
                seed: derive_seed(seed, (1 << 32) + rep as u64),
                tie_nu,
                ..FitOptions::default()
            };
            let report = fit(&sample.data, 3, fit_kind, &opts)?;
            let (m, ri, ari, jci) = agreement_metrics(&sample.labels, &report.labels)?;
            Ok(SimpleRep {
                converged: report.converged,
                loglik: report.loglik(),
                aic: report.aic,
                bic: report.bic,
                mcr: m,
                ri,
                ari,
                jci,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct OutlierRep {
    pub converged: bool,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    /// Mean squared gap between the true and fitted regression mean
    /// functions over the non-outlier design points.
    pub mse: f64,
}

/// Robustness cell: fat-tailed two-expert data, left censoring, appended
/// outlier class, G = 2 fit of one family.
pub fn run_outliers_cell(
    mixing: OutlierMixing,
    fit_kind: FamilyKind,
    n: usize,
    cens: f64,
    outlier_prob: f64,
    reps: usize,
    seed: u64,
    tie_nu: bool,
) -> Vec<Result<OutlierRep>> {
    let spec = outliers_spec(mixing);
    let truth = spec.mean_params();
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, rep as u64));
            let mut sample = generate_moe_data(&spec, n, &mut rng)?;
            apply_tail_censoring(&mut sample.data, cens, TailSide::Left)?;
            inject_outliers(&mut sample, outlier_prob, &mut rng)?;
            let opts = FitOptions {
                seed: derive_seed(seed, (1 << 32) + rep as u64),
                tie_nu,
                ..FitOptions::default()
            };
            let report = fit(&sample.data, 2, fit_kind, &opts)?;
            let designs: Vec<(Vec<f64>, Vec<f64>)> = sample.data[..n]
                .iter()
                .map(|o| (o.x.clone(), o.r.clone()))
                .collect();
            let mse = regression_mean_mse(&report.theta_hat, &truth, &designs)?;
            Ok(OutlierRep {
                converged: report.converged,
                loglik: report.loglik(),
                aic: report.aic,
                bic: report.bic,
                mse,
            })
        })
        .collect()
}

/// Parsed flat key = value study configuration.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub replications: usize,
    pub seed: u64,
    pub sample_sizes: Vec<usize>,
    pub censoring_levels: Vec<f64>,
    pub families: Vec<FamilyKind>,
    pub g_min: usize,
    pub g_max: usize,
    pub outlier_probs: Vec<f64>,
    pub mixing: Vec<OutlierMixing>,
    pub variant: HeavytailVariant,
    pub tie_nu: bool,
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = std::collections::BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", i + 1))
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let scenario = Scenario::parse(
            kv.get("scenario")
                .ok_or_else(|| Error::Config("missing `scenario`".into()))?,
        )?;
        let get = |key: &str| kv.get(key).map(String::as_str);
        let parse_list = |key: &str| -> Option<Vec<&str>> {
            get(key).map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect())
        };
        let parse_usize = |key: &str, default: usize| -> Result<usize> {
            get(key).map_or(Ok(default), |v| {
                v.parse().map_err(|_| Error::Config(format!("bad `{key}` value `{v}`")))
            })
        };
        let replications = parse_usize("replications", 10)?;
        if replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        let seed = get("seed").map_or(Ok(20260823u64), |v| {
            v.parse().map_err(|_| Error::Config(format!("bad `seed` value `{v}`")))
        })?;
        let sample_sizes = match parse_list("n") {
            Some(vs) => vs
                .iter()
                .map(|v| v.parse().map_err(|_| Error::Config(format!("bad `n` entry `{v}`"))))
                .collect::<Result<Vec<usize>>>()?,
            None => match scenario {
                Scenario::Asymptotic | Scenario::Heavytail => vec![100],
                _ => vec![500],
            },
        };
        let censoring_levels = match parse_list("censoring") {
            Some(vs) => vs
                .iter()
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::Config(format!("bad `censoring` entry `{v}`")))
                })
                .collect::<Result<Vec<f64>>>()?,
            None => vec![0.15],
        };
        let families = match parse_list("families") {
            Some(vs) => vs
                .iter()
                .map(|v| FamilyKind::parse(v))
                .collect::<Result<Vec<_>>>()?,
            None => match scenario {
                Scenario::Asymptotic => vec![FamilyKind::Normal],
                Scenario::Gselect => vec![FamilyKind::StudentT],
                _ => vec![FamilyKind::Normal, FamilyKind::StudentT],
            },
        };
        let outlier_probs = match parse_list("outliers") {
            Some(vs) => vs
                .iter()
                .map(|v| {
                    v.parse().map_err(|_| Error::Config(format!("bad `outliers` entry `{v}`")))
                })
                .collect::<Result<Vec<f64>>>()?,
            None => vec![0.0, 0.06],
        };
        let mixing = match parse_list("mixing") {
            Some(vs) => vs
                .iter()
                .map(|v| OutlierMixing::parse(v))
                .collect::<Result<Vec<_>>>()?,
            None => vec![OutlierMixing::Gig],
        };
        let variant = match get("variant") {
            None | Some("s1") => HeavytailVariant::S1,
            Some("s2") => HeavytailVariant::S2,
            Some(other) => return Err(Error::Config(format!("unknown variant `{other}`"))),
        };
        let tie_nu = match get("tie_nu") {
            None | Some("true") => true,
            Some("false") => false,
            Some(other) => return Err(Error::Config(format!("bad `tie_nu` value `{other}`"))),
        };
        let g_min = parse_usize("gmin", 1)?;
        let g_max = parse_usize("gmax", 4)?;
        if g_min == 0 || g_min > g_max {
            return Err(Error::Config(format!("need 1 <= gmin <= gmax, got {g_min}..{g_max}")));
        }
        Ok(StudyConfig {
            scenario,
            replications,
            seed,
            sample_sizes,
            censoring_levels,
            families,
            g_min,
            g_max,
            outlier_probs,
            mixing,
            variant,
            tie_nu,
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Tabular study output: a header row plus string records, rendered as CSV.
#[derive(Debug, Clone)]
pub struct McTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl McTable {
    #[must_use]
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

/// Column-wise mean and standard deviation of the numeric tail of rows;
/// non-numeric entries produce empty aggregate cells.
fn aggregate(rows: &[Vec<String>], skip: usize, label_cols: &[String]) -> Vec<Vec<String>> {
    let width = label_cols.len() + rows.first().map_or(0, |r| r.len() - skip);
    let mut mean = vec![String::new(); width];
    let mut sd = vec![String::new(); width];
    let mut mean_abs = vec![String::new(); width];
    mean[..skip].clone_from_slice(&label_cols[..skip]);
    sd[..skip].clone_from_slice(&label_cols[..skip]);
    mean_abs[..skip].clone_from_slice(&label_cols[..skip]);
    if let Some(first) = rows.first() {
        for col in skip..first.len() {
            let vals: Vec<f64> = rows
                .iter()
                .filter_map(|r| r.get(col).and_then(|s| s.parse::<f64>().ok()))
                .collect();
            if vals.is_empty() {
                continue;
            }
            let n = vals.len() as f64;
            let mu = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let abs = vals.iter().map(|v| v.abs()).sum::<f64>() / n;
            mean[col] = fmt(mu);
            sd[col] = fmt(var.sqrt());
            mean_abs[col] = fmt(abs);
        }
    }
    vec![mean, sd, mean_abs]
}

fn mc_asymptotic(cfg: &StudyConfig) -> Result<McTable> {
    let kind = cfg.families[0];
    let spec = asymptotic_spec(kind);
    let truth = asymptotic_truth(kind);
    let truth_flat = flatten_params(&truth);
    let (g, p, q) = (2, spec.beta[0].len(), 3);
    let names = param_names(g, p, q);
    let mut header: Vec<String> = ["scenario", "family", "n", "censoring", "rep", "status",
        "converged", "loglik", "aic", "bic", "mcr", "ri", "ari", "jci"]
        .iter()
        .map(ToString::to_string)
        .collect();
    for nm in &names {
        header.push(format!("err_{nm}"));
    }
    for nm in &names {
        header.push(format!("se_{nm}"));
    }
    let mut rows = Vec::new();
    for &n in &cfg.sample_sizes {
        for &cens in &cfg.censoring_levels {
            let outcomes =
                run_asymptotic_cell(kind, n, cens, cfg.replications, cfg.seed, cfg.tie_nu);
            let labels = vec![
                "asymptotic".to_string(),
                kind.to_string(),
                n.to_string(),
                format!("{cens}"),
            ];
            let mut cell_rows = Vec::new();
            for (rep, outcome) in outcomes.iter().enumerate() {
                let mut row = labels.clone();
                row.push(rep.to_string());
                match outcome {
                    Ok(r) => {
                        row.push("ok".into());
                        row.push(r.converged.to_string());
                        row.extend([fmt(r.loglik), fmt(r.aic), fmt(r.bic)]);
                        row.extend([fmt(r.mcr), fmt(r.ri), fmt(r.ari), fmt(r.jci)]);
                        let est = flatten_params(&r.theta);
                        for (e, t) in est.iter().zip(&truth_flat) {
                            row.push(fmt(e - t));
                        }
                        match &r.se {
                            Some(se) => {
                                for v in flatten_se(se) {
                                    row.push(fmt(v));
                                }
                            }
                            None => row.extend(vec![String::new(); names.len()]),
                        }
                    }
                    Err(e) => {
                        row.push(format!("error: {e}").replace(',', ";"));
                        row.extend(vec![String::new(); header.len() - row.len()]);
                    }
                }
                cell_rows.push(row);
            }
            let mut label_cols = labels.clone();
            label_cols.push(String::new());
            let aggs = aggregate(&cell_rows, 5, &label_cols);
            for (i, mut agg) in aggs.into_iter().enumerate() {
                agg[4] = ["mean", "sd", "mean_abs"][i].to_string();
                cell_rows.push(agg);
            }
            rows.extend(cell_rows);
        }
    }
    Ok(McTable { header, rows })
}

fn mc_gselect(cfg: &StudyConfig) -> Result<McTable> {
    let header: Vec<String> = ["scenario", "n", "censoring", "rep", "g", "status", "converged",
        "loglik", "m", "aic", "bic", "chosen_by_bic", "chosen_by_aic"]
        .iter()
        .map(ToString::to_string)
        .collect();
    let mut rows = Vec::new();
    for &n in &cfg.sample_sizes {
        for &cens in &cfg.censoring_levels {
            let outcomes = run_gselect_cell(
                n,
                cens,
                cfg.g_min,
                cfg.g_max,
                cfg.replications,
                cfg.seed,
                cfg.tie_nu,
            );
            let mut bic_counts = vec![0usize; cfg.g_max + 1];
            let mut ok_reps = 0usize;
            for (rep, outcome) in outcomes.iter().enumerate() {
                match outcome {
                    Ok(r) => {
                        ok_reps += 1;
                        bic_counts[r.chosen_bic] += 1;
                        for (gval, row) in &r.rows {
                            let mut rec = vec![
                                "gselect".to_string(),
                                n.to_string(),
                                format!("{cens}"),
                                rep.to_string(),
                                gval.to_string(),
                            ];
                            match row {
                                Ok(fr) => {
                                    rec.push("ok".into());
                                    rec.push(fr.converged.to_string());
                                    rec.extend([
                                        fmt(fr.loglik),
                                        fr.m.to_string(),
                                        fmt(fr.aic),
                                        fmt(fr.bic),
                                    ]);
                                    rec.push(usize::from(*gval == r.chosen_bic).to_string());
                                    rec.push(usize::from(*gval == r.chosen_aic).to_string());
                                }
                                Err(e) => {
                                    rec.push(format!("error: {e}").replace(',', ";"));
                                    rec.extend(vec![String::new(); header.len() - rec.len()]);
                                }
                            }
                            rows.push(rec);
                        }
                    }
                    Err(e) => {
                        let mut rec = vec![
                            "gselect".to_string(),
                            n.to_string(),
                            format!("{cens}"),
                            rep.to_string(),
                            String::new(),
                        ];
                        rec.push(format!("error: {e}").replace(',', ";"));
                        rec.extend(vec![String::new(); header.len() - rec.len()]);
                        rows.push(rec);
                    }
                }
            }
            for gval in cfg.g_min..=cfg.g_max {
                let frac = if ok_reps > 0 {
                    bic_counts[gval] as f64 / ok_reps as f64
                } else {
                    f64::NAN
                };
                let mut rec = vec![
                    "gselect".to_string(),
                    n.to_string(),
                    format!("{cens}"),
                    "freq".to_string(),
                    gval.to_string(),
                    "ok".to_string(),
                ];
                rec.extend(vec![String::new(); 4]);
                rec.push(String::new());
                rec.push(fmt(frac));
                rec.push(String::new());
                rows.push(rec);
            }
        }
    }
    Ok(McTable { header, rows })
}

fn mc_heavytail(cfg: &StudyConfig) -> Result<McTable> {
    let header: Vec<String> = ["scenario", "variant", "family", "n", "censoring", "rep",
        "status", "converged", "loglik", "aic", "bic", "mcr", "ri", "ari", "jci"]
        .iter()
        .map(ToString::to_string)
        .collect();
    let variant_label = match cfg.variant {
        HeavytailVariant::S1 => "s1",
        HeavytailVariant::S2 => "s2",
    };
    let mut rows = Vec::new();
    for &kind in &cfg.families {
        for &n in &cfg.sample_sizes {
            for &cens in &cfg.censoring_levels {
                let outcomes = run_heavytail_cell(
                    cfg.variant,
                    kind,
                    n,
                    cens,
                    cfg.replications,
                    cfg.seed,
                    cfg.tie_nu,
                );
                let labels = vec![
                    "heavytail".to_string(),
                    variant_label.to_string(),
                    kind.to_string(),
                    n.to_string(),
                    format!("{cens}"),
                ];
                let mut cell_rows = Vec::new();
                for (rep, outcome) in outcomes.iter().enumerate() {
                    let mut row = labels.clone();
                    row.push(rep.to_string());
                    match outcome {
                        Ok(r) => {
                            row.push("ok".into());
                            row.push(r.converged.to_string());
                            row.extend([
                                fmt(r.loglik),
                                fmt(r.aic),
                                fmt(r.bic),
                                fmt(r.mcr),
                                fmt(r.ri),
                                fmt(r.ari),
                                fmt(r.jci),
                            ]);
                        }
                        Err(e) => {
                            row.push(format!("error: {e}").replace(',', ";"));
                            row.extend(vec![String::new(); header.len() - row.len()]);
                        }
                    }
                    cell_rows.push(row);
                }
                let mut label_cols = labels.clone();
                label_cols.push(String::new());
                let aggs = aggregate(&cell_rows, 6, &label_cols);
                for (i, mut agg) in aggs.into_iter().enumerate().take(2) {
                    agg[5] = ["mean", "sd"][i].to_string();
                    cell_rows.push(agg);
                }
                rows.extend(cell_rows);
            }
        }
    }
    Ok(McTable { header, rows })
}

fn mc_outliers(cfg: &StudyConfig) -> Result<McTable> {
    let header: Vec<String> = ["scenario", "mixing", "family", "n", "censoring",
        "outlier_prob", "rep", "status", "converged", "loglik", "aic", "bic", "mse"]
        .iter()
        .map(ToString::to_string)
        .collect();
    let mut rows = Vec::new();
    for &mixing in &cfg.mixing {
        for &kind in &cfg.families {
            for &n in &cfg.sample_sizes {
                for &cens in &cfg.censoring_levels {
                    for &c_prob in &cfg.outlier_probs {
                        let outcomes = run_outliers_cell(
                            mixing,
                            kind,
                            n,
                            cens,
                            c_prob,
                            cfg.replications,
                            cfg.seed,
                            cfg.tie_nu,
                        );
                        let labels = vec![
                            "outliers".to_string(),
                            mixing.label().to_string(),
                            kind.to_string(),
                            n.to_string(),
                            format!("{cens}"),
                            format!("{c_prob}"),
                        ];
                        let mut cell_rows = Vec::new();
                        for (rep, outcome) in outcomes.iter().enumerate() {
                            let mut row = labels.clone();
                            row.push(rep.to_string());
                            match outcome {
                                Ok(r) => {
                                    row.push("ok".into());
                                    row.push(r.converged.to_string());
                                    row.extend([
                                        fmt(r.loglik),
                                        fmt(r.aic),
                                        fmt(r.bic),
                                        fmt(r.mse),
                                    ]);
                                }
                                Err(e) => {
                                    row.push(format!("error: {e}").replace(',', ";"));
                                    row.extend(vec![String::new(); header.len() - row.len()]);
                                }
                            }
                            cell_rows.push(row);
                        }
                        let mut label_cols = labels.clone();
                        label_cols.push(String::new());
                        let aggs = aggregate(&cell_rows, 7, &label_cols);
                        for (i, mut agg) in aggs.into_iter().enumerate().take(2) {
                            agg[6] = ["mean", "sd"][i].to_string();
                            cell_rows.push(agg);
                        }
                        rows.extend(cell_rows);
                    }
                }
            }
        }
    }
    Ok(McTable { header, rows })
}

/// Run the configured scenario and return the per-replication plus
/// aggregate table.
pub fn run_study(cfg: &StudyConfig) -> Result<McTable> {
    if cfg.families.is_empty() {
        return Err(Error::Config("no families configured".into()));
    }
    match cfg.scenario {
        Scenario::Asymptotic => mc_asymptotic(cfg),
        Scenario::Gselect => mc_gselect(cfg),
        Scenario::Heavytail => mc_heavytail(cfg),
        Scenario::Outliers => mc_outliers(cfg),
    }
}
