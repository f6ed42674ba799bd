//! Shared numerical utilities: stable log-space primitives, adaptive
//! Gauss-Kronrod quadrature, derivative-free optimizers, and deterministic
//! hashing for reproducible seeding.

/// ln(sqrt(2*pi))
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the smallest interval probability treated as nonzero.
pub const LN_PROB_FLOOR: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// Standard normal log-density.
#[inline]
#[must_use]
pub fn ln_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal density.
#[inline]
#[must_use]
pub fn normal_pdf(x: f64) -> f64 {
    ln_normal_pdf(x).exp()
}

/// Standard normal cdf via the complementary error function.
#[inline]
#[must_use]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal log-cdf, accurate over the whole real line.
///
/// Uses erfc in the central range and the asymptotic expansion of Mills'
/// ratio in the deep left tail where erfc loses relative accuracy.
#[must_use]
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x >= 8.0 {
        // ln(1 - Phi(-x)) with Phi(-x) tiny
        return (-normal_cdf(-x)).ln_1p();
    }
    if x > -20.0 {
        return normal_cdf(x).ln();
    }
    // Asymptotic: Phi(x) = phi(x)/(-x) * (1 - 1/x^2 + 3/x^4 - 15/x^6 + ...)
    let inv2 = 1.0 / (x * x);
    let series = 1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * (105.0 - 945.0 * inv2))));
    ln_normal_pdf(x) - (-x).ln() + series.ln()
}

/// log(sum(exp(v))) with the usual max shift; -inf inputs are ignored.
#[must_use]
pub fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Two-argument log-sum-exp.
#[must_use]
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln(1 - exp(u)) for u <= 0, stable near both ends.
#[must_use]
pub fn ln_1m_exp(u: f64) -> f64 {
    debug_assert!(u <= 0.0);
    if u > -std::f64::consts::LN_2 {
        (-u.exp_m1()).ln()
    } else {
        (-u.exp()).ln_1p()
    }
}

/// ln(exp(la) - exp(lb)) for la >= lb.
#[must_use]
pub fn ln_diff_exp(la: f64, lb: f64) -> f64 {
    debug_assert!(la >= lb, "ln_diff_exp requires la >= lb ({la} < {lb})");
    if lb == f64::NEG_INFINITY {
        return la;
    }
    if la <= lb {
        return f64::NEG_INFINITY;
    }
    la + ln_1m_exp(lb - la)
}

// Gauss-Kronrod 7-15 nodes on [-1, 1]: Kronrod abscissae (positive half),
// Kronrod weights, and the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let (flo, fhi) = if x == 0.0 {
            let v = f(c);
            (v, 0.0)
        } else {
            (f(c - h * x), f(c + h * x))
        };
        let pair = flo + fhi;
        kronrod += wk * pair;
        // Gauss nodes sit at the odd Kronrod indices (1, 3, 5, 7).
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]` to absolute
/// tolerance `abs_tol`, by interval bisection.
pub fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let mut total = 0.0;
    let mut stack = vec![(a, b, abs_tol.max(1e-15), 0u32)];
    let mut splits = 0usize;
    while let Some((lo, hi, tol, depth)) = stack.pop() {
        let (val, err) = gk15(f, lo, hi);
        if err <= tol || depth >= 48 || splits >= 20_000 {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            splits += 1;
            stack.push((lo, mid, 0.5 * tol, depth + 1));
            stack.push((mid, hi, 0.5 * tol, depth + 1));
        }
    }
    total
}

/// Golden-section search maximizing `f` on `[lo, hi]`.
///
/// Returns `(argmax, max)`. The bracket shrinks by the golden ratio each of
/// `iters` rounds; the final interval midpoint is returned.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    debug_assert!(lo <= hi);
    if lo == hi {
        return (lo, f(lo));
    }
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INVPHI * (b - a);
    let mut x2 = a + INVPHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INVPHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INVPHI * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Nelder-Mead maximization of `f` inside the box `lo[i] <= x[i] <= hi[i]`,
/// run in logit-transformed coordinates so the simplex cannot leave the box.
///
/// Returns `(argmax, max)`; `start` must lie strictly inside the box.
pub fn nelder_mead_box_max<F: Fn(&[f64]) -> f64>(
    f: &F,
    start: &[f64],
    lo: &[f64],
    hi: &[f64],
    iters: usize,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let to_x = |z: &[f64]| -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, &u)| lo[i] + (hi[i] - lo[i]) * sigmoid(u))
            .collect()
    };
    let fz = |z: &[f64]| f(&to_x(z));
    let z0: Vec<f64> = start
        .iter()
        .enumerate()
        .map(|(i, &x)| logit(((x - lo[i]) / (hi[i] - lo[i])).clamp(1e-8, 1.0 - 1e-8)))
        .collect();
    // Initial simplex: start plus a 0.5 offset in each transformed coordinate.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((z0.clone(), fz(&z0)));
    for i in 0..n {
        let mut z = z0.clone();
        z[i] += 0.5;
        let v = fz(&z);
        simplex.push((z, v));
    }
    for _ in 0..iters {
        // Sort descending by value (maximization).
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let worst = simplex[n].clone();
        if (simplex[0].1 - worst.1).abs() < 1e-12 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(z, _)| z[i]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> = (0..n).map(|i| 2.0 * centroid[i] - worst.0[i]).collect();
        let fr = fz(&reflect);
        if fr > simplex[0].1 {
            let expand: Vec<f64> = (0..n).map(|i| 3.0 * centroid[i] - 2.0 * worst.0[i]).collect();
            let fe = fz(&expand);
            simplex[n] = if fe > fr { (expand, fe) } else { (reflect, fr) };
        } else if fr > simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = (0..n).map(|i| 0.5 * (centroid[i] + worst.0[i])).collect();
            let fc = fz(&contract);
            if fc > worst.1 {
                simplex[n] = (contract, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let z: Vec<f64> = (0..n).map(|i| 0.5 * (entry.0[i] + best[i])).collect();
                    let v = fz(&z);
                    *entry = (z, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    (to_x(&simplex[0].0), simplex[0].1)
}

/// 64-bit FNV-1a over a byte stream, continuing from `state`.
#[must_use]
pub fn fnv1a(mut state: u64, bytes: &[u8]) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    for &b in bytes {
        state ^= u64::from(b);
        state = state.wrapping_mul(PRIME);
    }
    state
}

/// FNV-1a offset basis, the conventional starting state.
pub const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

/// Hash a stream of f64 values (by bit pattern) into a seed.
pub fn hash_f64s<I: IntoIterator<Item = f64>>(init: u64, values: I) -> u64 {
    let mut h = init;
    for v in values {
        h = fnv1a(h, &v.to_bits().to_le_bytes());
    }
    h
}

/// Derive an independent stream seed from a master seed (splitmix64 mix).
#[must_use]
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
