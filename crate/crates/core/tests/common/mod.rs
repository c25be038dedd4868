//! Brute-force estimators written straight from the definitions, plus
//! exhaustive enumeration helpers, used as independent oracles.
#![allow(dead_code)]

use rmst_core::Sample;

/// Observation types over the time grid {1, 2, 3}.
pub const TYPES: [(f64, bool); 6] = [
    (1.0, false),
    (1.0, true),
    (2.0, false),
    (2.0, true),
    (3.0, false),
    (3.0, true),
];

/// Every multiset of `size` observations drawn from `TYPES`.
pub fn multisets(size: usize) -> Vec<Vec<(f64, bool)>> {
    fn rec(start: usize, left: usize, cur: &mut Vec<(f64, bool)>, out: &mut Vec<Vec<(f64, bool)>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for (i, &t) in TYPES.iter().enumerate().skip(start) {
            cur.push(t);
            rec(i, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, size, &mut Vec::new(), &mut out);
    out
}

/// All subsets of `0..n` with `k` elements, as boolean masks.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<bool>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).map(|i| m >> i & 1 == 1).collect())
        .collect()
}

pub fn sample(group: u8, obs: &[(f64, bool)]) -> Sample {
    let times: Vec<f64> = obs.iter().map(|o| o.0).collect();
    let status: Vec<u8> = obs.iter().map(|o| u8::from(o.1)).collect();
    Sample::new(group, &times, &status).unwrap()
}

/// Per distinct time: `(t, Y(t), d(t), c(t))`, counted directly.
pub fn table(obs: &[(f64, bool)]) -> Vec<(f64, f64, f64, f64)> {
    let mut times: Vec<f64> = obs.iter().map(|o| o.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .map(|t| {
            let y = obs.iter().filter(|o| o.0 >= t).count() as f64;
            let d = obs.iter().filter(|o| o.0 == t && o.1).count() as f64;
            let c = obs.iter().filter(|o| o.0 == t && !o.1).count() as f64;
            (t, y, d, c)
        })
        .collect()
}

pub fn km_at(obs: &[(f64, bool)], t: f64) -> f64 {
    table(obs)
        .iter()
        .filter(|r| r.0 <= t)
        .map(|&(_, y, d, _)| 1.0 - d / y)
        .product()
}

pub fn na_at(obs: &[(f64, bool)], t: f64) -> f64 {
    table(obs)
        .iter()
        .filter(|r| r.0 <= t)
        .map(|&(_, y, d, _)| d / y)
        .sum()
}

pub fn censoring_km_at(obs: &[(f64, bool)], t: f64) -> f64 {
    table(obs)
        .iter()
        .filter(|r| r.0 <= t && r.3 > 0.0)
        .map(|&(_, y, d, c)| 1.0 - c / (y - d))
        .product()
}

/// Whether the curve is determined on `[0, tau]`.
pub fn estimable(obs: &[(f64, bool)], tau: f64) -> bool {
    let t = table(obs);
    let &(last, _, d, _) = t.last().unwrap();
    d > 0.0 || last >= tau
}

/// `∫_a^tau S`, with `S` carried forward past the last observation.
pub fn area(obs: &[(f64, bool)], a: f64, tau: f64) -> f64 {
    let mut cuts: Vec<f64> = table(obs)
        .iter()
        .map(|r| r.0)
        .filter(|&t| t > a && t < tau)
        .collect();
    cuts.insert(0, a);
    cuts.push(tau);
    cuts.windows(2)
        .map(|w| km_at(obs, w[0]) * (w[1] - w[0]))
        .sum()
}

pub fn rmst(obs: &[(f64, bool)], tau: f64) -> f64 {
    area(obs, 0.0, tau)
}

/// `n Σ_{x <= tau} w(x)^2 d / (Y (Y - d))`, skipping terms with `w = 0`.
pub fn sigma2(obs: &[(f64, bool)], tau: f64, n_total: usize) -> f64 {
    let mut sum = 0.0;
    for (t, y, d, _) in table(obs) {
        if t > tau || d == 0.0 {
            continue;
        }
        let w = area(obs, t, tau);
        if w == 0.0 {
            continue;
        }
        sum += w * w * d / (y * (y - d));
    }
    n_total as f64 * sum
}

/// Studentized difference, unstudentized difference and studentized log
/// ratio for a split of `pooled` by `mask` (`true` = group 1).
pub fn two_sample_stats(pooled: &[(f64, bool)], mask: &[bool], tau: f64) -> (f64, f64, f64, f64) {
    let g1: Vec<_> = pooled
        .iter()
        .zip(mask)
        .filter(|p| *p.1)
        .map(|p| *p.0)
        .collect();
    let g2: Vec<_> = pooled
        .iter()
        .zip(mask)
        .filter(|p| !*p.1)
        .map(|p| *p.0)
        .collect();
    let n = pooled.len();
    let (m1, m2) = (rmst(&g1, tau), rmst(&g2, tau));
    let (s1, s2) = (sigma2(&g1, tau, n), sigma2(&g2, tau, n));
    let sqrt_n = (n as f64).sqrt();
    let diff = (m1 - m2).abs();
    let sigma = (s1 + s2).sqrt();
    let log_diff = (m1.ln() - m2.ln()).abs();
    let sigma_rat = (s1 / (m1 * m1) + s2 / (m2 * m2)).sqrt();
    (
        sqrt_n * diff / sigma,
        diff,
        sqrt_n * log_diff / sigma_rat,
        sigma,
    )
}

/// `|a - b| <= tol * max(|b|, 1)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * b.abs().max(1.0)
}
