//! Goodness-of-fit statistics used by the diagnostics.
//!
//! Kolmogorov–Smirnov p-values use the asymptotic Kolmogorov distribution
//! with Stephens' finite-sample scaling, and the exact
//! Marsaglia–Tsang–Wang recursion for one-sample tests with `n < 50`.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size (`n` one-sample, `nm/(n+m)` two-sample).
    pub effective_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Survival of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi theta form converges fast for small x
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let s: f64 = (0..20).map(|k| y.powi((2 * k + 1) * (2 * k + 1))).sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Exact `P(D_n < d)` for the one-sample statistic (Marsaglia, Tsang and
/// Wang, 2003).
pub fn ks_exact_cdf(n: usize, d: f64) -> f64 {
    let nf = n as f64;
    if d <= 0.0 {
        return 0.0;
    }
    if d >= 1.0 {
        return 1.0;
    }
    let k = (nf * d).floor() as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nf * d;
    let mut hm = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                hm[i * m + j] = 1.0;
            }
        }
    }
    for i in 0..m {
        hm[i * m] -= h.powi(i as i32 + 1);
        hm[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1) * m] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                for g in 1..=(i + 1 - j) {
                    hm[i * m + j] /= g as f64;
                }
            }
        }
    }
    let (q, mut exp) = matrix_power(&hm, m, n);
    let mut s = q[(k - 1) * m + (k - 1)];
    for i in 1..=n {
        s *= i as f64 / nf;
        if s < 1e-140 {
            s *= 1e140;
            exp -= 140;
        }
    }
    (s * 10f64.powi(exp)).clamp(0.0, 1.0)
}

fn matmul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i * m + j] += aik * b[k * m + j];
            }
        }
    }
    c
}

/// `a^n` with a decimal exponent carried separately to avoid overflow.
fn matrix_power(a: &[f64], m: usize, n: usize) -> (Vec<f64>, i32) {
    if n == 1 {
        return (a.to_vec(), 0);
    }
    let (half, e) = matrix_power(a, m, n / 2);
    let mut v = matmul(&half, &half, m);
    let mut exp = 2 * e;
    if n % 2 == 1 {
        v = matmul(a, &v, m);
    }
    if v[(m / 2) * m + m / 2] > 1e140 {
        v.iter_mut().for_each(|x| *x *= 1e-140);
        exp += 140;
    }
    (v, exp)
}

/// One-sample test of `xs` against a continuous distribution function.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> KsResult {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let p_value = if n == 0 {
        1.0
    } else if n < 50 {
        1.0 - ks_exact_cdf(n, d)
    } else {
        let sq = nf.sqrt();
        kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
    };
    KsResult {
        statistic: d,
        p_value,
        effective_n: nf,
    }
}

/// Two-sample statistic `sup |F_a - F_b|`; ties are handled by stepping
/// past every copy of a value before comparing, so discrete data are fine
/// (the asymptotic p-value is then conservative).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|p, q| p.total_cmp(q));
    xb.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let v = xa[i].min(xb[j]);
        while i < na && xa[i] <= v {
            i += 1;
        }
        while j < nb && xb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sq = ne.sqrt();
    KsResult {
        statistic: d,
        p_value: if na == 0 || nb == 0 {
            1.0
        } else {
            kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
        },
        effective_n: ne,
    }
}

/// Critical value of the two-sample statistic at `level`, from the
/// asymptotic distribution: smallest `d` with `P(D > d) <= level`.
pub fn ks_two_sample_critical(na: usize, nb: usize, level: f64) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sq = ne.sqrt();
    let (mut lo, mut hi) = (0.0, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi / (sq + 0.12 + 0.11 / sq)
}

/// Pearson goodness of fit of integer observations against `pmf` on
/// `{0, 1, 2, ...}`; categories with expected count below 5 are pooled into
/// their neighbours, and the upper tail forms the last category.
pub fn chi_square_gof<F: Fn(usize) -> f64>(observations: &[usize], pmf: F, estimated_params: usize) -> ChiSquareResult {
    let n = observations.len() as f64;
    let max_obs = observations.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max_obs + 1];
    for &o in observations {
        counts[o] += 1;
    }
    // (observed, expected) categories, last one absorbs the upper tail
    let mut cats: Vec<(f64, f64)> = Vec::new();
    let mut acc_p = 0.0;
    let (mut o_run, mut e_run) = (0.0, 0.0);
    let mut k = 0;
    loop {
        let p = pmf(k);
        acc_p += p;
        o_run += counts.get(k).copied().unwrap_or(0) as f64;
        e_run += n * p;
        let remaining = (1.0 - acc_p).max(0.0) * n;
        if e_run >= 5.0 && remaining >= 5.0 {
            cats.push((o_run, e_run));
            o_run = 0.0;
            e_run = 0.0;
        } else if remaining < 5.0 {
            let o_tail: f64 = counts.iter().skip(k + 1).sum::<usize>() as f64;
            o_run += o_tail;
            e_run += remaining;
            match cats.last_mut() {
                Some(last) if e_run < 5.0 => {
                    last.0 += o_run;
                    last.1 += e_run;
                }
                _ => cats.push((o_run, e_run)),
            }
            break;
        }
        k += 1;
    }
    let statistic: f64 = cats
        .iter()
        .map(|(o, e)| if *e > 0.0 { (o - e).powi(2) / e } else { 0.0 })
        .sum();
    let dof = cats.len().saturating_sub(1 + estimated_params).max(1);
    let p_value = ChiSquared::new(dof as f64)
        .map(|c| c.sf(statistic))
        .unwrap_or(f64::NAN);
    ChiSquareResult {
        statistic,
        dof,
        p_value,
    }
}

pub fn poisson_pmf(lambda: f64, k: usize) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (kf * lambda.ln() - lambda - statrs::function::gamma::ln_gamma(kf + 1.0)).exp()
}
