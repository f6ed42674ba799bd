//! Model-selection criteria and clustering agreement metrics.

use crate::error::{Error, Result};
use crate::model::{gating_probs, MixtureParams};

/// (AIC, BIC) for a fitted model with log-likelihood `loglik`, `m` free
/// parameters, and `n` observations.
#[must_use]
pub fn aic_bic(loglik: f64, m: usize, n: usize) -> (f64, f64) {
    let m = m as f64;
    (2.0 * m - 2.0 * loglik, m * (n as f64).ln() - 2.0 * loglik)
}

fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::BTreeMap::new();
    let out = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

fn contingency(a: &[usize], b: &[usize]) -> Result<(Vec<Vec<u64>>, usize)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "label vectors have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter("label vectors are empty".into()));
    }
    let (ra, ka) = relabel(a);
    let (rb, kb) = relabel(b);
    let k = ka.max(kb);
    let mut table = vec![vec![0u64; k]; k];
    for (&i, &j) in ra.iter().zip(rb.iter()) {
        table[i][j] += 1;
    }
    Ok((table, k))
}

/// Minimum-cost assignment on a square matrix by the potentials method,
/// O(k^3). Returns the column assigned to each row.
fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        // Augment along the alternating path back to the virtual column.
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[matched[j] - 1] = j - 1;
    }
    assign
}

fn max_trace_exhaustive(table: &[Vec<u64>]) -> u64 {
    let k = table.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let trace = |p: &[usize]| -> u64 { (0..k).map(|i| table[i][p[i]]).sum() };
    let mut best = trace(&perm);
    // Heap's algorithm over column permutations.
    let mut c = vec![0usize; k];
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.max(trace(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Misclassification rate under the best matching of predicted labels to
/// true labels: exhaustive over permutations for up to 8 labels, Hungarian
/// assignment beyond that.
pub fn mcr(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let (table, k) = contingency(truth, pred)?;
    let matched = if k <= 8 {
        max_trace_exhaustive(&table)
    } else {
        let cost: Vec<Vec<f64>> =
            table.iter().map(|row| row.iter().map(|&c| -(c as f64)).collect()).collect();
        let assign = hungarian_min(&cost);
        (0..k).map(|i| table[i][assign[i]]).sum()
    };
    Ok(1.0 - matched as f64 / truth.len() as f64)
}

fn choose2(x: u64) -> f64 {
    let x = x as f64;
    0.5 * x * (x - 1.0)
}

/// (Rand index, adjusted Rand index, Jaccard index) between two partitions,
/// computed from the contingency table. Degenerate denominators follow the
/// convention: 1.0 when the partitions are identical, 0.0 otherwise.
pub fn rand_indices(a: &[usize], b: &[usize]) -> Result<(f64, f64, f64)> {
    let (table, k) = contingency(a, b)?;
    let n = a.len() as u64;
    let row: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<u64> = (0..k).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let s_ab: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let s_a: f64 = row.iter().map(|&c| choose2(c)).sum();
    let s_b: f64 = col.iter().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    // Identical partitions agree on every pair.
    let identical = s_ab == s_a && s_ab == s_b && {
        table
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().enumerate().all(|(j, &c)| c == 0 || (row[i] == c && col[j] == c)))
    };

    let n11 = s_ab;
    let n10 = s_a - s_ab;
    let n01 = s_b - s_ab;
    let n00 = total - n11 - n10 - n01;

    let ri = if total > 0.0 { (n11 + n00) / total } else { 1.0 };

    let expected = s_a * s_b / total.max(1.0);
    let ari_den = 0.5 * (s_a + s_b) - expected;
    let ari = if ari_den.abs() < 1e-300 {
        if identical {
            1.0
        } else {
            0.0
        }
    } else {
        (n11 - expected) / ari_den
    };

    let jci_den = n11 + n10 + n01;
    let jci = if jci_den <= 0.0 {
        if identical {
            1.0
        } else {
            0.0
        }
    } else {
        n11 / jci_den
    };
    Ok((ri, ari, jci))
}

/// Mean squared error between two models' mean functions, averaged over the
/// supplied design points: E(x, r) = sum_j pi_j(r) x'beta_j.
pub fn regression_mean_mse(
    theta_hat: &MixtureParams,
    theta_true: &MixtureParams,
    designs: &[(Vec<f64>, Vec<f64>)],
) -> Result<f64> {
    if designs.is_empty() {
        return Err(Error::InvalidParameter("no design points".into()));
    }
    let mean_at = |theta: &MixtureParams, x: &[f64], r: &[f64]| -> Result<f64> {
        let pi = gating_probs(r, &theta.tau)?;
        Ok((0..theta.g()).map(|j| pi[j] * theta.mean(j, x)).sum())
    };
    let mut acc = 0.0;
    for (x, r) in designs {
        let d = mean_at(theta_hat, x, r)? - mean_at(theta_true, x, r)?;
        acc += d * d;
    }
    Ok(acc / designs.len() as f64)
}
