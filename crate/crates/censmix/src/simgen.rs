//! Data generation for the simulation studies: mixture-of-experts sampling
//! under arbitrary mixing laws, censoring schemes, and outlier injection.

use crate::error::{Error, Result};
use crate::model::{gating_probs, CensoredObservation, MixtureParams};
use crate::smn::SmnFamily;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma as GammaDist, StandardNormal};

/// True-label sentinel for injected outlier rows.
pub const OUTLIER_LABEL: usize = usize::MAX;

/// Mixing law of the latent scale factor U in Y = mu + U^{-1/2} V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixingLaw {
    Normal,
    StudentT { nu: f64 },
    Slash { nu: f64 },
    ContaminatedNormal { nu: f64, gamma: f64 },
    /// U^{-1} exponential with the given rate; lambda = 0.5 with unit
    /// variance makes the response Laplace.
    LaplaceViaExp { lambda: f64 },
    /// Birnbaum-Saunders with shape alpha and scale beta.
    BirnbaumSaunders { alpha: f64, beta: f64 },
    /// Generalized inverse Gaussian with index kappa and weights chi, psi.
    Gig { kappa: f64, chi: f64, psi: f64 },
}

impl MixingLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MixingLaw::Normal => true,
            MixingLaw::StudentT { nu } | MixingLaw::Slash { nu } => nu.is_finite() && nu > 0.0,
            MixingLaw::ContaminatedNormal { nu, gamma } => {
                (0.0..=1.0).contains(&nu) && gamma > 0.0 && gamma <= 1.0
            }
            MixingLaw::LaplaceViaExp { lambda } => lambda.is_finite() && lambda > 0.0,
            MixingLaw::BirnbaumSaunders { alpha, beta } => {
                alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0
            }
            MixingLaw::Gig { kappa, chi, psi } => {
                kappa.is_finite() && chi.is_finite() && chi > 0.0 && psi.is_finite() && psi > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("mixing law out of domain: {self:?}")))
        }
    }

    /// One draw of the scale factor U.
    pub fn sample_u<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MixingLaw::Normal => 1.0,
            MixingLaw::StudentT { nu } => {
                GammaDist::new(nu / 2.0, 2.0 / nu).expect("validated").sample(rng)
            }
            MixingLaw::Slash { nu } => (1.0 - rng.gen::<f64>()).powf(1.0 / nu),
            MixingLaw::ContaminatedNormal { nu, gamma } => {
                if rng.gen::<f64>() < nu {
                    gamma
                } else {
                    1.0
                }
            }
            MixingLaw::LaplaceViaExp { lambda } => {
                let exp = Exp::new(lambda).expect("validated");
                loop {
                    let e: f64 = exp.sample(rng);
                    if e > 0.0 {
                        return 1.0 / e;
                    }
                }
            }
            MixingLaw::BirnbaumSaunders { alpha, beta } => {
                let z: f64 = StandardNormal.sample(rng);
                let w = alpha * z / 2.0;
                beta * (w + (w * w + 1.0).sqrt()).powi(2)
            }
            MixingLaw::Gig { kappa, chi, psi } => {
                sample_gig(kappa, chi, psi, rng).expect("validated")
            }
        }
    }
}

/// Law of the gating covariates.
#[derive(Debug, Clone, PartialEq)]
pub enum RLaw {
    /// r_i = x_i (shared draws, identical columns).
    SameAsX,
    /// Independent uniform columns after the leading 1.
    Uniform(Vec<(f64, f64)>),
}

/// Complete description of a generating mixture-of-experts model.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    /// Per-component regression coefficients (length p, intercept first).
    pub beta: Vec<DVector<f64>>,
    pub sigma2: Vec<f64>,
    /// Gating coefficients, G-1 vectors of length q.
    pub tau: Vec<DVector<f64>>,
    /// Per-component mixing law.
    pub mixing: Vec<MixingLaw>,
    /// Uniform ranges for x_1..x_{p-1} (the intercept is implicit).
    pub x_ranges: Vec<(f64, f64)>,
    pub r_law: RLaw,
}

impl GeneratorSpec {
    #[must_use]
    pub fn g(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.g();
        if g == 0 {
            return Err(Error::DimensionMismatch("no components".into()));
        }
        if self.sigma2.len() != g || self.mixing.len() != g || self.tau.len() != g - 1 {
            return Err(Error::DimensionMismatch(
                "beta/sigma2/mixing/tau lengths are inconsistent".into(),
            ));
        }
        let p = self.beta[0].len();
        if self.beta.iter().any(|b| b.len() != p) || self.x_ranges.len() != p - 1 {
            return Err(Error::DimensionMismatch("beta length or x_ranges mismatch".into()));
        }
        for &(lo, hi) in &self.x_ranges {
            if !(lo < hi) {
                return Err(Error::InvalidParameter(format!("empty covariate range ({lo}, {hi})")));
            }
        }
        let q = match &self.r_law {
            RLaw::SameAsX => p,
            RLaw::Uniform(ranges) => {
                for &(lo, hi) in ranges {
                    if !(lo < hi) {
                        return Err(Error::InvalidParameter(format!(
                            "empty covariate range ({lo}, {hi})"
                        )));
                    }
                }
                ranges.len() + 1
            }
        };
        if g > 1 && self.tau.iter().any(|t| t.len() != q) {
            return Err(Error::DimensionMismatch("tau length does not match r".into()));
        }
        for &s2 in &self.sigma2 {
            if !(s2.is_finite() && s2 > 0.0) {
                return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {s2}")));
            }
        }
        for m in &self.mixing {
            m.validate()?;
        }
        Ok(())
    }

    /// Parameters carrying this spec's mean function (gating and experts);
    /// families are placeholders — only beta and tau matter for the mean.
    #[must_use]
    pub fn mean_params(&self) -> MixtureParams {
        MixtureParams {
            beta: self.beta.clone(),
            sigma2: self.sigma2.clone(),
            fam: vec![SmnFamily::Normal; self.g()],
            tau: self.tau.clone(),
        }
    }
}

/// A generated sample: observations plus the latent component labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MoeSample {
    pub data: Vec<CensoredObservation>,
    pub labels: Vec<usize>,
}

/// Draw n observations from the mixture of experts: labels from the gating
/// model, responses from the chosen expert with its mixing law.
pub fn generate_moe_data<R: Rng + ?Sized>(
    spec: &GeneratorSpec,
    n: usize,
    rng: &mut R,
) -> Result<MoeSample> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let g = spec.g();
    let mut data = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = Vec::with_capacity(spec.x_ranges.len() + 1);
        x.push(1.0);
        for &(lo, hi) in &spec.x_ranges {
            x.push(rng.gen_range(lo..hi));
        }
        let r = match &spec.r_law {
            RLaw::SameAsX => x.clone(),
            RLaw::Uniform(ranges) => {
                let mut r = Vec::with_capacity(ranges.len() + 1);
                r.push(1.0);
                for &(lo, hi) in ranges {
                    r.push(rng.gen_range(lo..hi));
                }
                r
            }
        };
        let pi = gating_probs(&r, &spec.tau)?;
        let coin: f64 = rng.gen();
        let mut acc = 0.0;
        let mut label = g - 1;
        for (j, pj) in pi.iter().enumerate() {
            acc += pj;
            if coin < acc {
                label = j;
                break;
            }
        }
        let u = spec.mixing[label].sample_u(rng);
        let z: f64 = StandardNormal.sample(rng);
        let mean: f64 = spec.beta[label].iter().zip(&x).map(|(b, v)| b * v).sum();
        let y = mean + spec.sigma2[label].sqrt() * z / u.sqrt();
        data.push(CensoredObservation::uncensored(y, x, r)?);
        labels.push(label);
    }
    Ok(MoeSample { data, labels })
}

/// Interval-censor floor(n p) + 1 rows chosen uniformly without
/// replacement. Each censored row keeps y inside its interval and the
/// interval width never exceeds c.
pub fn apply_interval_censoring<R: Rng + ?Sized>(
    data: &mut [CensoredObservation],
    p: f64,
    c: f64,
    rng: &mut R,
) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("censoring level {p} outside [0, 1)")));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("interval width bound must be positive, got {c}")));
    }
    if p == 0.0 {
        return Ok(());
    }
    let n = data.len();
    let nc = ((n as f64 * p).floor() as usize + 1).min(n);
    let chosen = rand::seq::index::sample(rng, n, nc);
    for i in chosen {
        let obs = &data[i];
        if obs.rho {
            return Err(Error::InvalidParameter(format!("row {i} is already censored")));
        }
        let y = obs.w;
        loop {
            let u1: f64 = rng.gen_range(0.0..c);
            let u2: f64 = rng.gen_range(0.0..c);
            let c1 = (y - u1).max(y + u2 - c);
            let c2 = (y + u2).min(y - u1 + c);
            if c1 < c2 {
                data[i] = CensoredObservation::censored(
                    c1,
                    c2,
                    data[i].x.clone(),
                    data[i].r.clone(),
                )?;
                break;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSide {
    Left,
    Right,
}

/// Censor the floor(n p) most extreme responses beyond the corresponding
/// empirical quantile: right-censoring replaces the top values by
/// (threshold, +inf), left-censoring the bottom values by (-inf, threshold).
pub fn apply_tail_censoring(
    data: &mut [CensoredObservation],
    p: f64,
    side: TailSide,
) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("censoring level {p} outside [0, 1)")));
    }
    let n = data.len();
    let k = (n as f64 * p).floor() as usize;
    if k == 0 {
        return Ok(());
    }
    if data.iter().any(|o| o.rho) {
        return Err(Error::InvalidParameter("tail censoring requires uncensored input".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| data[a].w.total_cmp(&data[b].w).then(a.cmp(&b)));
    match side {
        TailSide::Right => {
            let threshold = data[idx[n - k - 1]].w;
            for &i in &idx[n - k..] {
                data[i] = CensoredObservation::censored(
                    threshold,
                    f64::INFINITY,
                    data[i].x.clone(),
                    data[i].r.clone(),
                )?;
            }
        }
        TailSide::Left => {
            let threshold = data[idx[k]].w;
            for &i in &idx[..k] {
                data[i] = CensoredObservation::censored(
                    f64::NEG_INFINITY,
                    threshold,
                    data[i].x.clone(),
                    data[i].r.clone(),
                )?;
            }
        }
    }
    Ok(())
}

/// Append floor(n c_prob) outlier rows: y = -2, fresh uniform(-1, 1)
/// covariates, uncensored, labeled with the outlier sentinel.
pub fn inject_outliers<R: Rng + ?Sized>(
    sample: &mut MoeSample,
    c_prob: f64,
    rng: &mut R,
) -> Result<()> {
    if !(0.0..=1.0).contains(&c_prob) {
        return Err(Error::InvalidParameter(format!("outlier probability {c_prob} outside [0, 1]")));
    }
    let n = sample.data.len();
    let k = (n as f64 * c_prob).floor() as usize;
    if k == 0 {
        return Ok(());
    }
    let first = sample
        .data
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty sample".into()))?;
    let (p, q) = (first.x.len(), first.r.len());
    for _ in 0..k {
        let mut x = Vec::with_capacity(p);
        x.push(1.0);
        for _ in 1..p {
            x.push(rng.gen_range(-1.0..1.0));
        }
        let r = if q == p {
            x.clone()
        } else {
            let mut r = Vec::with_capacity(q);
            r.push(1.0);
            for _ in 1..q {
                r.push(rng.gen_range(-1.0..1.0));
            }
            r
        };
        sample.data.push(CensoredObservation::uncensored(-2.0, x, r)?);
        sample.labels.push(OUTLIER_LABEL);
    }
    Ok(())
}

/// One draw from the generalized inverse Gaussian GIG(kappa, chi, psi) with
/// density proportional to x^{kappa-1} exp(-(chi/x + psi x)/2), by
/// mode-shifted ratio-of-uniforms on the standardized variable.
pub fn sample_gig<R: Rng + ?Sized>(
    kappa: f64,
    chi: f64,
    psi: f64,
    rng: &mut R,
) -> Result<f64> {
    MixingLaw::Gig { kappa, chi, psi }.validate()?;
    let omega = (chi * psi).sqrt();
    let lam = kappa;
    // Mode of x^{lam-1} exp(-omega (x + 1/x) / 2).
    let m = ((lam - 1.0) + ((lam - 1.0).powi(2) + omega * omega).sqrt()) / omega;
    let ln_g = |x: f64| (lam - 1.0) * x.ln() - 0.5 * omega * (x + 1.0 / x);
    let ln_gm = ln_g(m);
    // The two critical points of g(x) (x - m)^2 bracketing the mode give
    // the v-bounds of the acceptance region; they solve a cubic with three
    // real roots (the third is negative).
    let a = -(2.0 * (lam + 1.0) / omega + m);
    let b = 2.0 * (lam - 1.0) * m / omega - 1.0;
    let c = m;
    let (x_lo, x_hi) = bracket_roots(a, b, c, m);
    let v_lo = (x_lo - m) * (0.5 * (ln_g(x_lo) - ln_gm)).exp();
    let v_hi = (x_hi - m) * (0.5 * (ln_g(x_hi) - ln_gm)).exp();
    let scale = (chi / psi).sqrt();
    loop {
        let u: f64 = rng.gen();
        if u == 0.0 {
            continue;
        }
        let v = rng.gen_range(v_lo..v_hi);
        let x = m + v / u;
        if x > 0.0 && 2.0 * u.ln() <= ln_g(x) - ln_gm {
            return Ok(scale * x);
        }
    }
}

/// Roots of x^3 + a x^2 + b x + c below and above `m` (trigonometric
/// formula for the three-real-root case).
fn bracket_roots(a: f64, b: f64, c: f64, m: f64) -> (f64, f64) {
    let p = b - a * a / 3.0;
    let q = 2.0 * a.powi(3) / 27.0 - a * b / 3.0 + c;
    let s = (-p / 3.0).max(1e-300).sqrt();
    let cos_arg = (3.0 * q / (2.0 * p) * (-3.0 / p).max(0.0).sqrt()).clamp(-1.0, 1.0);
    let theta = cos_arg.acos();
    let mut lo = f64::NAN;
    let mut hi = f64::NAN;
    for k in 0..3 {
        let root = 2.0 * s * ((theta - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos()
            - a / 3.0;
        if root > 0.0 && root < m && (lo.is_nan() || root > lo) {
            lo = root;
        }
        if root > m && (hi.is_nan() || root < hi) {
            hi = root;
        }
    }
    // Degenerate coefficients collapse toward the mode; fall back to a
    // narrow bracket so sampling still terminates.
    if lo.is_nan() {
        lo = 0.5 * m;
    }
    if hi.is_nan() {
        hi = 2.0 * m;
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::adaptive_gk;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_component_spec() -> GeneratorSpec {
        GeneratorSpec {
            beta: vec![DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![2.0, -1.0])],
            sigma2: vec![1.0, 1.0],
            tau: vec![DVector::from_vec(vec![0.5, 0.3])],
            mixing: vec![MixingLaw::Normal; 2],
            x_ranges: vec![(-2.0, 2.0)],
            r_law: RLaw::SameAsX,
        }
    }

    #[test]
    fn degenerate_noise_recovers_regression_line() {
        let mut spec = two_component_spec();
        spec.sigma2 = vec![1e-16, 1e-16];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sample = generate_moe_data(&spec, 200, &mut rng).unwrap();
        for (obs, &label) in sample.data.iter().zip(&sample.labels) {
            let mean: f64 = spec.beta[label].iter().zip(&obs.x).map(|(b, v)| b * v).sum();
            assert_abs_diff_eq!(obs.w, mean, epsilon = 1e-6);
        }
    }

    #[test]
    fn saturated_gating_pins_all_labels() {
        let mut spec = two_component_spec();
        spec.tau = vec![DVector::from_vec(vec![50.0, 0.0])];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sample = generate_moe_data(&spec, 100, &mut rng).unwrap();
        assert!(sample.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn empirical_proportions_match_gating_average() {
        let spec = two_component_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample = generate_moe_data(&spec, 500, &mut rng).unwrap();
        let mut avg_pi = 0.0;
        for obs in &sample.data {
            avg_pi += gating_probs(&obs.r, &spec.tau).unwrap()[0];
        }
        avg_pi /= sample.data.len() as f64;
        let frac = sample.labels.iter().filter(|&&l| l == 0).count() as f64 / 500.0;
        assert_abs_diff_eq!(frac, avg_pi, epsilon = 0.05);
    }

    // Bit-level equality; unused interval bounds are NaN, so the derived
    // `PartialEq` would never match.
    fn obs_eq(a: &CensoredObservation, b: &CensoredObservation) -> bool {
        a.w.to_bits() == b.w.to_bits()
            && a.rho == b.rho
            && a.c1.to_bits() == b.c1.to_bits()
            && a.c2.to_bits() == b.c2.to_bits()
            && a.x == b.x
            && a.r == b.r
    }

    fn data_eq(a: &[CensoredObservation], b: &[CensoredObservation]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| obs_eq(x, y))
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = two_component_spec();
        let a = generate_moe_data(&spec, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate_moe_data(&spec, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(data_eq(&a.data, &b.data));
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn interval_censoring_counts_and_bounds() {
        let spec = two_component_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sample = generate_moe_data(&spec, 100, &mut rng).unwrap();
        let original: Vec<f64> = sample.data.iter().map(|o| o.w).collect();
        apply_interval_censoring(&mut sample.data, 0.15, 1.0, &mut rng).unwrap();
        let censored: Vec<usize> =
            (0..100).filter(|&i| sample.data[i].rho).collect();
        assert_eq!(censored.len(), 16);
        for &i in &censored {
            let o = &sample.data[i];
            assert!(o.c1 <= original[i] && original[i] <= o.c2);
            assert!(o.c2 - o.c1 <= 1.0 + 1e-12);
            assert!(o.c1 < o.c2);
        }
        // p = 0 is the identity.
        let mut clone = sample.data.clone();
        apply_interval_censoring(&mut clone, 0.0, 1.0, &mut rng).unwrap();
        assert!(data_eq(&clone, &sample.data));
    }

    #[test]
    fn tail_censoring_fixture() {
        let mk = |y: f64| CensoredObservation::uncensored(y, vec![1.0], vec![1.0]).unwrap();
        let mut data: Vec<CensoredObservation> = (1..=10).map(|i| mk(i as f64)).collect();
        apply_tail_censoring(&mut data, 0.3, TailSide::Right).unwrap();
        for (i, obs) in data.iter().enumerate() {
            if i < 7 {
                assert!(!obs.rho);
            } else {
                assert!(obs.rho);
                assert_eq!(obs.c1, 7.0);
                assert_eq!(obs.c2, f64::INFINITY);
            }
        }
        // Left-censoring of -y mirrors right-censoring of y.
        let mut neg: Vec<CensoredObservation> = (1..=10).map(|i| mk(-(i as f64))).collect();
        apply_tail_censoring(&mut neg, 0.3, TailSide::Left).unwrap();
        for (i, obs) in neg.iter().enumerate() {
            if i < 7 {
                assert!(!obs.rho);
            } else {
                assert!(obs.rho);
                assert_eq!(obs.c2, -7.0);
                assert_eq!(obs.c1, f64::NEG_INFINITY);
            }
        }
    }

    #[test]
    fn outlier_injection_shape() {
        let spec = two_component_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sample = generate_moe_data(&spec, 500, &mut rng).unwrap();
        inject_outliers(&mut sample, 0.06, &mut rng).unwrap();
        assert_eq!(sample.data.len(), 530);
        assert_eq!(sample.labels.len(), 530);
        for i in 500..530 {
            assert_eq!(sample.data[i].w, -2.0);
            assert!(!sample.data[i].rho);
            assert_eq!(sample.labels[i], OUTLIER_LABEL);
            assert!(sample.data[i].x[1] > -1.0 && sample.data[i].x[1] < 1.0);
            assert_eq!(sample.data[i].x, sample.data[i].r);
        }
        // c = 0 leaves the sample unchanged.
        let mut clone = sample.clone();
        inject_outliers(&mut clone, 0.0, &mut rng).unwrap();
        assert!(data_eq(&clone.data, &sample.data));
        assert_eq!(clone.labels, sample.labels);
    }

    fn gig_quadrature_cdf(kappa: f64, chi: f64, psi: f64, x: f64) -> f64 {
        let omega = (chi * psi).sqrt();
        let scale = (chi / psi).sqrt();
        let ln_g = |t: f64| (kappa - 1.0) * t.ln() - 0.5 * omega * (t + 1.0 / t);
        let m = ((kappa - 1.0) + ((kappa - 1.0).powi(2) + omega * omega).sqrt()) / omega;
        let ln_gm = ln_g(m);
        let f = |t: f64| (ln_g(t) - ln_gm).exp();
        let upper = m + 60.0 / omega.min(1.0);
        let total = adaptive_gk(&f, 1e-12, upper, 1e-12);
        let part = adaptive_gk(&f, 1e-12, (x / scale).min(upper), 1e-12);
        part / total
    }

    #[test]
    fn gig_matches_quadrature_cdf() {
        let (kappa, chi, psi) = (0.5, 1.0, 2.0);
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut draws: Vec<f64> = (0..n)
            .map(|_| sample_gig(kappa, chi, psi, &mut rng).unwrap())
            .collect();
        draws.sort_by(f64::total_cmp);
        assert!(draws[0] > 0.0);
        // Reference values from 40-digit quadrature of the normalized
        // density; the in-test quadrature must agree, and the empirical
        // cdf must land within sampling error.
        let frozen = [
            (0.3, 0.067811876608126215401),
            (0.8, 0.41309708543127230018),
            (1.5, 0.72854195049000225976),
            (3.0, 0.94850104115501982537),
        ];
        for &(x, reference) in &frozen {
            let cdf = gig_quadrature_cdf(kappa, chi, psi, x);
            assert_abs_diff_eq!(cdf, reference, epsilon = 1e-8);
            let emp = draws.partition_point(|&d| d <= x) as f64 / n as f64;
            assert_abs_diff_eq!(emp, reference, epsilon = 0.01);
        }
        // Kolmogorov-Smirnov distance against the quadrature cdf on a
        // quantile grid.
        let mut ks = 0.0f64;
        for q in 1..50 {
            let x = draws[n * q / 50];
            let cdf = gig_quadrature_cdf(kappa, chi, psi, x);
            ks = ks.max((q as f64 / 50.0 - cdf).abs());
        }
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn gig_inverse_gaussian_mean() {
        // kappa = -1/2 reduces to inverse Gaussian with mean sqrt(chi/psi).
        let (chi, psi) = (2.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_gig(-0.5, chi, psi, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        let expect = (chi / psi).sqrt();
        assert!((mean - expect).abs() / expect < 0.05, "mean {mean} vs {expect}");
    }

    #[test]
    fn gig_reciprocal_maps_kappa_to_negative() {
        // 1/X for X ~ GIG(kappa, c, c) is distributed GIG(-kappa, c, c);
        // compare empirical quantiles of the two streams.
        let c = 1.3;
        let n = 50_000;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut recip: Vec<f64> =
            (0..n).map(|_| 1.0 / sample_gig(0.5, c, c, &mut rng).unwrap()).collect();
        let mut direct: Vec<f64> =
            (0..n).map(|_| sample_gig(-0.5, c, c, &mut rng).unwrap()).collect();
        recip.sort_by(f64::total_cmp);
        direct.sort_by(f64::total_cmp);
        for q in [n / 10, n / 4, n / 2, 3 * n / 4, 9 * n / 10] {
            assert_relative_eq!(recip[q], direct[q], max_relative = 0.05);
        }
    }

    #[test]
    fn laplace_mixing_gives_laplace_responses() {
        // U^{-1} ~ Exp(0.5) turns a unit normal into a standard Laplace.
        let law = MixingLaw::LaplaceViaExp { lambda: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| {
                let u = law.sample_u(&mut rng);
                let z: f64 = StandardNormal.sample(&mut rng);
                z / u.sqrt()
            })
            .collect();
        draws.sort_by(f64::total_cmp);
        let laplace_cdf = |t: f64| {
            if t < 0.0 {
                0.5 * t.exp()
            } else {
                1.0 - 0.5 * (-t).exp()
            }
        };
        let mut ks = 0.0f64;
        for q in 1..100 {
            let x = draws[n * q / 100];
            ks = ks.max((q as f64 / 100.0 - laplace_cdf(x)).abs());
        }
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn birnbaum_saunders_moments() {
        // Mean of BS(alpha, beta) is beta (1 + alpha^2 / 2).
        let law = MixingLaw::BirnbaumSaunders { alpha: 0.5, beta: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| law.sample_u(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.125).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn domain_violations_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!(sample_gig(0.5, -1.0, 1.0, &mut rng).is_err());
        assert!(sample_gig(0.5, 1.0, 0.0, &mut rng).is_err());
        assert!(MixingLaw::StudentT { nu: 0.0 }.validate().is_err());
        assert!(MixingLaw::BirnbaumSaunders { alpha: 0.0, beta: 1.0 }.validate().is_err());
        let mut spec = two_component_spec();
        spec.x_ranges = vec![(2.0, 2.0)];
        assert!(generate_moe_data(&spec, 10, &mut rng).is_err());
    }
}
