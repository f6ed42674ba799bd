use std::path::PathBuf;
use std::process::ExitCode;

use censmix::dataset::read_dataset;
use censmix::ecme::{fit, FitOptions};
use censmix::report::{render_fit_report, render_responsibilities};
use censmix::smn::FamilyKind;
use censmix::studies::{run_study, StudyConfig};
use clap::{ArgAction, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "censmix",
    version,
    about = "Mixtures of linear experts for censored responses with scale-mixture-of-normal errors"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a mixture with a fixed number of components.
    Fit {
        /// Dataset file (header `y,cens,c1,c2,x1..,r1..`).
        dataset: PathBuf,
        /// Error family: n, t, sl, or cn.
        #[arg(long, default_value = "n")]
        family: String,
        /// Number of expert components.
        #[arg(long, short = 'g', default_value_t = 2)]
        components: usize,
        /// Share one shape parameter across components.
        #[arg(long, default_value_t = true, action = ArgAction::Set)]
        tie_nu: bool,
        #[arg(long, default_value_t = 20_260_823)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        /// Absolute log-likelihood stopping tolerance.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-observation responsibilities as CSV.
        #[arg(long)]
        responsibilities: Option<PathBuf>,
    },
    /// Fit a range of component counts and tabulate AIC/BIC.
    Select {
        dataset: PathBuf,
        #[arg(long, default_value = "n")]
        family: String,
        #[arg(long, default_value_t = 1)]
        gmin: usize,
        #[arg(long, default_value_t = 4)]
        gmax: usize,
        #[arg(long, default_value_t = true, action = ArgAction::Set)]
        tie_nu: bool,
        #[arg(long, default_value_t = 20_260_823)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte-Carlo study described by a key = value config file.
    Mc {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&PathBuf>, text: &str) -> censmix::Result<()> {
    match out {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fit_options(tie_nu: bool, seed: u64, max_iter: usize, tol: f64) -> FitOptions {
    FitOptions { tie_nu, seed, max_iter, tol, ..FitOptions::default() }
}

fn cmd_fit(
    dataset: &PathBuf,
    family: &str,
    components: usize,
    opts: &FitOptions,
    out: Option<&PathBuf>,
    responsibilities: Option<&PathBuf>,
) -> censmix::Result<u8> {
    let kind = FamilyKind::parse(family)?;
    let data = read_dataset(dataset)?;
    let report = fit(&data, components, kind, opts)?;
    emit(out, &render_fit_report(&report))?;
    if let Some(path) = responsibilities {
        std::fs::write(path, render_responsibilities(&report))?;
    }
    if report.converged {
        Ok(0)
    } else {
        eprintln!(
            "warning: stopped after {} iterations without meeting the tolerance",
            report.iters
        );
        Ok(2)
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_select(
    dataset: &PathBuf,
    family: &str,
    gmin: usize,
    gmax: usize,
    opts: &FitOptions,
    out: Option<&PathBuf>,
) -> censmix::Result<u8> {
    if gmin == 0 || gmin > gmax {
        return Err(censmix::Error::Config(format!(
            "need 1 <= gmin <= gmax, got {gmin}..{gmax}"
        )));
    }
    let kind = FamilyKind::parse(family)?;
    let data = read_dataset(dataset)?;
    let mut rows = Vec::new();
    for g in gmin..=gmax {
        match fit(&data, g, kind, opts) {
            Ok(r) => rows.push((g, Ok((r.converged, r.loglik(), r.n_params, r.aic, r.bic)))),
            Err(e) => {
                eprintln!("g = {g}: {e}");
                rows.push((g, Err(e)));
            }
        }
    }
    let best = |idx: usize| -> Option<usize> {
        rows.iter()
            .filter_map(|(g, r)| {
                r.as_ref().ok().map(|&(_, _, _, aic, bic)| (*g, [aic, bic][idx]))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(g, _)| g)
    };
    let (best_aic, best_bic) = (best(0), best(1));
    let mut csv = String::from("g,status,converged,loglik,m,aic,bic,best_aic,best_bic\n");
    for (g, row) in &rows {
        match row {
            Ok((converged, loglik, m, aic, bic)) => {
                csv.push_str(&format!(
                    "{g},ok,{converged},{loglik:.6},{m},{aic:.6},{bic:.6},{},{}\n",
                    usize::from(Some(*g) == best_aic),
                    usize::from(Some(*g) == best_bic),
                ));
            }
            Err(e) => {
                csv.push_str(&format!("{g},error: {},,,,,,,\n", e.to_string().replace(',', ";")));
            }
        }
    }
    emit(out, &csv)?;
    match best_bic {
        None => Err(censmix::Error::FitFailure(
            "every component count failed".into(),
        )),
        Some(g) => {
            let converged = rows
                .iter()
                .find(|(gv, _)| *gv == g)
                .and_then(|(_, r)| r.as_ref().ok().map(|&(c, ..)| c))
                .unwrap_or(false);
            if converged {
                Ok(0)
            } else {
                eprintln!("warning: the BIC-preferred fit (g = {g}) did not converge");
                Ok(2)
            }
        }
    }
}

fn cmd_mc(config: &PathBuf, out: Option<&PathBuf>) -> censmix::Result<u8> {
    let cfg = StudyConfig::from_file(config)?;
    let table = run_study(&cfg)?;
    emit(out, &table.to_csv())?;
    Ok(0)
}

fn run(cli: Cli) -> censmix::Result<u8> {
    match &cli.cmd {
        Cmd::Fit {
            dataset,
            family,
            components,
            tie_nu,
            seed,
            max_iter,
            tol,
            out,
            responsibilities,
        } => {
            let opts = fit_options(*tie_nu, *seed, *max_iter, *tol);
            cmd_fit(dataset, family, *components, &opts, out.as_ref(), responsibilities.as_ref())
        }
        Cmd::Select { dataset, family, gmin, gmax, tie_nu, seed, max_iter, tol, out } => {
            let opts = fit_options(*tie_nu, *seed, *max_iter, *tol);
            cmd_select(dataset, family, *gmin, *gmax, &opts, out.as_ref())
        }
        Cmd::Mc { config, out } => cmd_mc(config, out.as_ref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
