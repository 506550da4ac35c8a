//! Secure latency: how long a milestone must be extended before honest
//! forks and an adversary together are unlikely to displace it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::delay::DelayCurve;
use crate::format::sig12;
use crate::tags::next_tag;
use crate::{domain, AnalysisError};

/// How an adversary share turns into milestone rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    /// The total rate is fixed; honest miners get `1 - share` of it.
    Total,
    /// Honest miners keep the full rate; the adversary adds
    /// `share / (1 - share)` of it on top.
    Extra,
}

/// Comparison deciding that a path failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureRule {
    /// `ones <= zeros + adversary`.
    AtMost,
    /// `ones < zeros + adversary`.
    Below,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecureParams {
    /// Milestone rate `p n mu` the convention starts from.
    pub rate: f64,
    pub adversary_share: f64,
    pub curve: DelayCurve,
    pub convention: Convention,
    pub rule: FailureRule,
}

impl SecureParams {
    pub fn new(rate: f64, adversary_share: f64, curve: DelayCurve) -> Self {
        SecureParams { rate, adversary_share, curve, convention: Convention::Total, rule: FailureRule::AtMost }
    }

    /// `(honest, adversary)` milestone rates.
    pub fn rates(&self) -> (f64, f64) {
        let s = self.adversary_share;
        match self.convention {
            Convention::Total => (self.rate * (1.0 - s), self.rate * s),
            Convention::Extra => (self.rate, self.rate * s / (1.0 - s)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecurePoint {
    pub t: f64,
    pub failures: u64,
    pub paths: u64,
}

impl SecurePoint {
    pub fn frequency(&self) -> f64 {
        self.failures as f64 / self.paths as f64
    }

    /// Binomial standard error of the frequency.
    pub fn sigma(&self) -> f64 {
        let f = self.frequency();
        (f * (1.0 - f) / self.paths as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecureCurve {
    pub params: SecureParams,
    pub points: Vec<SecurePoint>,
}

impl SecureCurve {
    /// First grid value whose frequency is below `level`.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        self.points.iter().find(|p| p.frequency() < level).map(|p| p.t)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("T,failures,paths,frequency,sigma\n");
        for p in &self.points {
            let (f, e) = (sig12(p.frequency()), sig12(p.sigma()));
            s.push_str(&format!("{},{},{},{f},{e}\n", p.t, p.failures, p.paths));
        }
        s
    }
}

/// Failure counts of one path at every grid point.
fn path(params: &SecureParams, grid: &[f64], rng: &mut ChaCha8Rng, hon: &Exp<f64>, adv: Option<&Exp<f64>>, out: &mut [u64]) {
    let t0 = params.curve.t0();
    let horizon = grid.iter().copied().fold(0.0, f64::max);
    // honest milestones after the one under test, which counts as tagged 0
    let mut times = Vec::new();
    let mut ones = Vec::new();
    let (mut t, mut prev) = (0.0, false);
    loop {
        let u = hon.sample(rng);
        t += u;
        if t > horizon {
            break;
        }
        let (y, _) = next_tag(prev, u, rng.random(), &params.curve);
        times.push(t);
        ones.push(y);
        prev = y;
    }
    let mut adversary = Vec::new();
    if let Some(a) = adv {
        let mut t = 0.0;
        loop {
            t += a.sample(rng);
            if t > horizon {
                break;
            }
            adversary.push(t);
        }
    }
    // prefix counts of type-1 tags
    let mut pre = Vec::with_capacity(ones.len() + 1);
    pre.push(0u32);
    for &y in &ones {
        pre.push(pre.last().unwrap() + y as u32);
    }
    let lo = times.partition_point(|&x| x < t0);
    for (k, &big_t) in grid.iter().enumerate() {
        let hi = times.partition_point(|&x| x <= big_t - t0);
        let (n1, n) = if hi > lo { (pre[hi] - pre[lo], (hi - lo) as u32) } else { (0, 0) };
        let n0 = n - n1;
        let a = adversary.partition_point(|&x| x <= big_t) as u32;
        let fail = match params.rule {
            FailureRule::AtMost => n1 <= n0 + a,
            FailureRule::Below => n1 < n0 + a,
        };
        out[k] += fail as u64;
    }
}

/// Failure frequency at each `grid` value over `paths` sample paths. Path `i`
/// draws from ChaCha8 seeded with `seed` on stream `i`, so results do not
/// depend on the thread count.
pub fn secure_latency_mc(params: &SecureParams, grid: &[f64], paths: u64, seed: u64) -> Result<SecureCurve, AnalysisError> {
    let t0 = params.curve.t0();
    if let Some(bad) = grid.iter().find(|&&t| !(t > 2.0 * t0)) {
        return Err(domain(format!("grid value {bad} is not above 2*t0 = {}", 2.0 * t0)));
    }
    if !(params.adversary_share >= 0.0 && params.adversary_share < 1.0) {
        return Err(domain(format!("adversary share must lie in [0, 1), got {}", params.adversary_share)));
    }
    let (h, a) = params.rates();
    let hon = Exp::new(h).map_err(|e| domain(format!("honest rate {h}: {e}")))?;
    let adv = if a > 0.0 { Some(Exp::new(a).map_err(|e| domain(format!("adversary rate {a}: {e}")))?) } else { None };
    const CHUNK: u64 = 1 << 12;
    let chunks = paths.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut out = vec![0u64; grid.len()];
            for i in c * CHUNK..((c + 1) * CHUNK).min(paths) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i);
                path(params, grid, &mut rng, &hon, adv.as_ref(), &mut out);
            }
            out
        })
        .reduce(
            || vec![0u64; grid.len()],
            |mut x, y| {
                for (a, b) in x.iter_mut().zip(y) {
                    *a += b;
                }
                x
            },
        );
    let points = grid.iter().zip(counts).map(|(&t, failures)| SecurePoint { t, failures, paths }).collect();
    Ok(SecureCurve { params: *params, points })
}

/// Weighted least-squares nonincreasing fit (pool adjacent violators).
pub fn isotonic_nonincreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (v2, w2, n2) = blocks[blocks.len() - 1];
            let (v1, w1, n1) = blocks[blocks.len() - 2];
            if v1 >= v2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, n1 + n2));
        }
    }
    blocks.into_iter().flat_map(|(v, _, n)| std::iter::repeat_n(v, n)).collect()
}

/// Probability that an attacker with rate share `q` ever catches up after
/// the honest side (share `p`) has added `z` blocks, with the attacker's
/// progress over that span taken as Poisson with mean `z q / p`.
pub fn nakamoto_catchup(q: f64, p: f64, z: u32) -> f64 {
    if q == 0.0 {
        return if z == 0 { 1.0 } else { 0.0 };
    }
    let lambda = z as f64 * q / p;
    let mut poisson = (-lambda).exp();
    let mut sum = 1.0;
    for k in 0..=z {
        if k > 0 {
            poisson *= lambda / k as f64;
        }
        sum -= poisson * (1.0 - (q / p).powi((z - k) as i32));
    }
    sum.max(0.0)
}

/// Smallest depth whose catch-up probability is below `risk`, with the
/// honest share discounted by the type-1 fraction.
pub fn nakamoto_discounted_depth(adversary_share: f64, type1_fraction: f64, risk: f64) -> Result<u32, AnalysisError> {
    if !(risk > 0.0 && risk < 1.0) {
        return Err(domain(format!("risk must lie in (0, 1), got {risk}")));
    }
    let honest = (1.0 - adversary_share) * type1_fraction;
    if adversary_share >= honest {
        return Err(AnalysisError::AdversaryMajority { adversary: adversary_share, honest });
    }
    (1..=100_000).find(|&z| nakamoto_catchup(adversary_share, honest, z) < risk).ok_or_else(|| domain("no depth below 100000"))
}

/// Monte-Carlo of the same race: attacker arrivals over `z / p` time units,
/// then a ±1 random walk until the deficit closes or grows past `cap`.
pub fn nakamoto_race_mc(q: f64, p: f64, z: u32, paths: u64, seed: u64) -> f64 {
    let cap = 400i64;
    let wins: u64 = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let mut k = 0i64;
            if q > 0.0 {
                let exp = Exp::new(q).unwrap();
                let span = z as f64 / p;
                let mut t = exp.sample(&mut rng);
                while t <= span {
                    k += 1;
                    t += exp.sample(&mut rng);
                }
            }
            let mut deficit = z as i64 - k;
            let up = q / (p + q);
            while deficit > 0 && deficit < cap {
                if rng.random::<f64>() < up {
                    deficit -= 1;
                } else {
                    deficit += 1;
                }
            }
            (deficit <= 0) as u64
        })
        .sum();
    wins as f64 / paths as f64
}
