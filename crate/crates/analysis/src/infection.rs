//! Time until a fresh block is confirmed by a milestone, through the
//! infection chain `(X, M)`: `X` miners can reach the block, `M` flags
//! confirmation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{domain, AnalysisError};

fn check(n: u64, p: f64) -> Result<(), AnalysisError> {
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(domain(format!("p must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// Expected jumps to confirmation from one infected miner, by backward
/// recursion from `q_n = 1/p`.
pub fn infection_q1(n: u64, p: f64) -> Result<f64, AnalysisError> {
    check(n, p)?;
    let nf = n as f64;
    let mut q = 1.0 / p;
    for x in (1..n).rev() {
        let xf = x as f64;
        let a = xf * (nf - xf) / (nf * nf);
        let b = 1.0 - p * xf / nf;
        q = (1.0 + b * a * q) / (1.0 - b * (1.0 - a));
    }
    Ok(q)
}

/// The same quantity from the explicit sum-of-products form.
pub fn infection_q1_sum(n: u64, p: f64) -> Result<f64, AnalysisError> {
    check(n, p)?;
    let nf = n as f64;
    let d = |k: f64| p * k * k - nf * (p + 1.0) * k + nf * nf * (p + 1.0);
    let mut prod = 1.0;
    let mut sum = 0.0;
    for k in 1..=n {
        let kf = k as f64;
        sum += nf * nf * nf / (kf * d(kf)) * prod;
        prod *= (p * kf - nf) * (kf - nf) / d(kf);
    }
    Ok(sum)
}

/// `2n(1 + ln n) + 1/p`.
pub fn q1_bound(n: u64, p: f64) -> f64 {
    let nf = n as f64;
    2.0 * nf * (1.0 + nf.ln()) + 1.0 / p
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct W2 {
    pub q1: f64,
    /// `q1 / (n mu)` seconds.
    pub exact: f64,
    /// `(2 + 2 ln n)/mu + 1/(n p mu)` seconds.
    pub bound: f64,
}

pub fn w2(n: u64, p: f64, mu: f64) -> Result<W2, AnalysisError> {
    let q1 = infection_q1(n, p)?;
    let nf = n as f64;
    Ok(W2 { q1, exact: q1 / (nf * mu), bound: (2.0 + 2.0 * nf.ln()) / mu + 1.0 / (nf * p * mu) })
}

/// Jumps to absorption of one simulated path of the chain started at `X = 1`.
pub fn chain_path(n: u64, p: f64, rng: &mut impl Rng) -> u64 {
    let nf = n as f64;
    let mut x = 1u64;
    let mut jumps = 0u64;
    loop {
        jumps += 1;
        let xf = x as f64;
        if rng.random::<f64>() < p * xf / nf {
            return jumps;
        }
        if x < n && rng.random::<f64>() < xf * (nf - xf) / (nf * nf) {
            x += 1;
        }
    }
}

/// Monte-Carlo mean and standard error of the jump count.
pub fn chain_mc(n: u64, p: f64, paths: u64, seed: u64) -> Result<(f64, f64), AnalysisError> {
    check(n, p)?;
    if paths < 2 {
        return Err(domain("need at least two paths"));
    }
    let (s, s2) = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let j = chain_path(n, p, &mut rng) as f64;
            (j, j * j)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = paths as f64;
    let mean = s / m;
    let var = (s2 / m - mean * mean) * m / (m - 1.0);
    Ok((mean, (var / m).sqrt()))
}
