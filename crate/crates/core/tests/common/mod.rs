//! Brute-force oracles shared by the integration tests. None of these call
//! into the library's numerical code.
#![allow(dead_code)]

use rand::Rng;

/// Piecewise-constant inverse CDF of a uniform mixture of sorted `values`:
/// the bin `((i-1)/N, i/N]` maps to `values[i-1]`, and `τ = 0` to the first.
pub fn inverse_cdf(values: &[f64], tau: f64) -> f64 {
    let n = values.len();
    for (i, &v) in values.iter().enumerate() {
        if tau * n as f64 <= (i + 1) as f64 {
            return v;
        }
    }
    values[n - 1]
}

/// Midpoint Riemann sum of the inverse CDF over `[a, b]`, divided by `b - a`.
/// For a monotone step function the error is at most `(v_N - v_1) / (2n)`.
pub fn riemann_interval_mean(values: &[f64], a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = 0.0;
    for k in 0..n {
        sum += inverse_cdf(values, a + (k as f64 + 0.5) * h);
    }
    sum / n as f64
}

/// `(∫₀¹ |F_a⁻¹ - F_b⁻¹|^p dτ)^{1/p}` by a midpoint sum on `n` cells.
pub fn riemann_wasserstein(a: &[f64], b: &[f64], p: i32, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut sum = 0.0;
    for k in 0..n {
        let t = (k as f64 + 0.5) * h;
        sum += (inverse_cdf(a, t) - inverse_cdf(b, t)).abs().powi(p);
    }
    (sum * h).powf(1.0 / f64::from(p))
}

/// Quantile-Huber loss written out term by term.
pub fn quantile_huber_loss(pred: &[f64], targets: &[f64], kappa: f64) -> f64 {
    let n = pred.len();
    let m = targets.len();
    let mut total = 0.0;
    for (i, &z) in pred.iter().enumerate() {
        let tau = (2 * i + 1) as f64 / (2 * n) as f64;
        for &t in targets {
            let u = t - z;
            let huber = if u.abs() <= kappa {
                0.5 * u * u
            } else {
                kappa * (u.abs() - 0.5 * kappa)
            };
            let weight = (tau - if u < 0.0 { 1.0 } else { 0.0 }).abs();
            total += weight * huber / kappa;
        }
    }
    total / (n * m) as f64
}

pub fn random_sorted<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Exact linear schedule from seeking toward averse, written independently:
/// α falls over the first half of `s`, β over the second.
pub fn seeking_to_averse(t: u64, s: u64) -> (f64, f64) {
    let half = s as f64 / 2.0;
    let t = t as f64;
    if t <= half {
        (0.75 * (1.0 - t / half), 1.0)
    } else if t < s as f64 {
        (0.0, 1.0 - 0.75 * (t - half) / half)
    } else {
        (0.0, 0.25)
    }
}

/// Value iteration on a finite MDP with state-dependent action sets.
/// `model[s][a]` lists `(probability, reward, next state or None if terminal)`.
pub fn value_iteration(model: &[Vec<Vec<(f64, f64, Option<usize>)>>], gamma: f64) -> Vec<Vec<f64>> {
    let mut v = vec![0.0; model.len()];
    let mut q: Vec<Vec<f64>> = model.iter().map(|acts| vec![0.0; acts.len()]).collect();
    for _ in 0..10_000 {
        let mut delta: f64 = 0.0;
        for (s, acts) in model.iter().enumerate() {
            for (a, outcomes) in acts.iter().enumerate() {
                q[s][a] = outcomes
                    .iter()
                    .map(|&(p, r, next)| p * (r + next.map_or(0.0, |n| gamma * v[n])))
                    .sum();
            }
            let best = q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if delta < 1e-12 {
            break;
        }
    }
    q
}
