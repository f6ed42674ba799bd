//! Key-value rendering of fit results for the CLI and file reports.

use crate::ecme::FitReport;
use crate::smn::SmnFamily;
use std::fmt::Write as _;

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ")
}

/// Render one fitted model as `key = value` lines. Deterministic: the same
/// report renders byte-identically.
#[must_use]
pub fn render_fit_report(report: &FitReport) -> String {
    let theta = &report.theta_hat;
    let g = theta.g();
    let mut out = String::new();
    let kind = theta.fam[0].kind();
    let _ = writeln!(out, "family = {kind}");
    let _ = writeln!(out, "components = {g}");
    let _ = writeln!(out, "n = {}", report.n);
    let _ = writeln!(out, "converged = {}", report.converged);
    let _ = writeln!(out, "iterations = {}", report.iters);
    let _ = writeln!(out, "loglik = {}", report.loglik());
    let _ = writeln!(out, "m = {}", report.n_params);
    let _ = writeln!(out, "aic = {}", report.aic);
    let _ = writeln!(out, "bic = {}", report.bic);
    let _ = writeln!(out, "tie_nu = {}", report.tie_nu);
    for (j, fam) in theta.fam.iter().enumerate() {
        let label = |name: &str| {
            if report.tie_nu || g == 1 {
                name.to_string()
            } else {
                format!("{name}_{}", j + 1)
            }
        };
        match *fam {
            SmnFamily::Normal => {}
            SmnFamily::StudentT { nu } | SmnFamily::Slash { nu } => {
                let _ = writeln!(out, "{} = {nu}", label("nu"));
            }
            SmnFamily::ContaminatedNormal { nu, gamma } => {
                let _ = writeln!(out, "{} = {nu}", label("nu"));
                let _ = writeln!(out, "{} = {gamma}", label("gamma"));
            }
        }
        if report.tie_nu || g == 1 {
            break;
        }
    }
    for (j, beta) in theta.beta.iter().enumerate() {
        let _ = writeln!(out, "beta_{} = {}", j + 1, fmt_vec(beta.as_slice()));
    }
    for (j, s2) in theta.sigma2.iter().enumerate() {
        let _ = writeln!(out, "sigma2_{} = {s2}", j + 1);
    }
    for (j, tau) in theta.tau.iter().enumerate() {
        let _ = writeln!(out, "tau_{} = {}", j + 1, fmt_vec(tau.as_slice()));
    }
    match &report.se {
        Some(se) => {
            for (j, row) in se.beta.iter().enumerate() {
                let _ = writeln!(out, "se_beta_{} = {}", j + 1, fmt_vec(row));
            }
            for (j, v) in se.sigma2.iter().enumerate() {
                let _ = writeln!(out, "se_sigma2_{} = {v}", j + 1);
            }
            for (j, row) in se.tau.iter().enumerate() {
                let _ = writeln!(out, "se_tau_{} = {}", j + 1, fmt_vec(row));
            }
            let _ = writeln!(out, "se_condition = {}", se.condition);
            let _ = writeln!(out, "se_singular = {}", se.singular);
        }
        None => {
            let _ = writeln!(out, "se = unavailable");
        }
    }
    let flags = if report.boundary_flags.is_empty() {
        "none".to_string()
    } else {
        report.boundary_flags.join("; ")
    };
    let _ = writeln!(out, "boundary_flags = {flags}");
    out
}

/// Render posterior membership probabilities as CSV (one row per
/// observation, one column per component, plus the hard label).
#[must_use]
pub fn render_responsibilities(report: &FitReport) -> String {
    let g = report.theta_hat.g();
    let mut out = String::new();
    let cols: Vec<String> = (1..=g).map(|j| format!("z{j}")).collect();
    let _ = writeln!(out, "{},label", cols.join(","));
    for (z, &l) in report.responsibilities.iter().zip(&report.labels) {
        let row: Vec<String> = z.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{},{}", row.join(","), l + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecme::{fit, FitOptions};
    use crate::model::CensoredObservation;
    use crate::smn::FamilyKind;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> Vec<CensoredObservation> {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        (0..40)
            .map(|_| {
                let x: f64 = rng.gen_range(-1.0..1.0);
                CensoredObservation::uncensored(
                    0.3 + 0.9 * x + rng.gen_range(-0.2..0.2),
                    vec![1.0, x],
                    vec![1.0],
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn report_contains_expected_keys() {
        let data = fixture();
        let report = fit(&data, 1, FamilyKind::StudentT, &FitOptions::default()).unwrap();
        let text = render_fit_report(&report);
        for key in [
            "family = t",
            "components = 1",
            "n = 40",
            "converged = ",
            "loglik = ",
            "aic = ",
            "bic = ",
            "nu = ",
            "beta_1 = ",
            "sigma2_1 = ",
            "se_beta_1 = ",
        ] {
            assert!(text.contains(key), "missing `{key}` in:\n{text}");
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let data = fixture();
        let opts = FitOptions { seed: 3, ..FitOptions::default() };
        let a = render_fit_report(&fit(&data, 1, FamilyKind::Normal, &opts).unwrap());
        let b = render_fit_report(&fit(&data, 1, FamilyKind::Normal, &opts).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn responsibilities_csv_shape() {
        let data = fixture();
        let report = fit(&data, 1, FamilyKind::Normal, &FitOptions::default()).unwrap();
        let text = render_responsibilities(&report);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 41);
        assert_eq!(lines[0], "z1,label");
        assert!(lines[1].starts_with('1'));
    }
}
