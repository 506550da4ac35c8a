//! The honest milestone tag model: a milestone is type 1 when its creator
//! had seen every earlier honest milestone.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::delay::DelayCurve;
use crate::quad::integrate;
use crate::{domain, AnalysisError};

const TOL: f64 = 1e-10;

fn check(rate: f64) -> Result<(), AnalysisError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(domain(format!("milestone rate must be positive, got {rate}")));
    }
    Ok(())
}

/// `integral_0^t0 (1 - F(t)) a e^{-a t} dt`: a type-1 milestone is followed
/// by a type-0 one.
pub fn z_failure_prob(rate: f64, curve: &DelayCurve) -> Result<f64, AnalysisError> {
    check(rate)?;
    let t0 = curve.t0();
    Ok(integrate(|t| (1.0 - curve.cdf(t)) * rate * (-rate * t).exp(), 0.0, t0, TOL))
}

/// `integral_0^t0 F(t) a e^{-a t} dt + e^{-a t0}`.
pub fn z_success_prob(rate: f64, curve: &DelayCurve) -> Result<f64, AnalysisError> {
    check(rate)?;
    let t0 = curve.t0();
    Ok(integrate(|t| curve.cdf(t) * rate * (-rate * t).exp(), 0.0, t0, TOL) + (-rate * t0).exp())
}

/// Long-run share of type-1 milestones,
/// `e^{-a t0} / (e^{-a t0} + integral_0^t0 a (1 - F(t)) e^{-a t} dt)`.
pub fn type1_fraction(rate: f64, curve: &DelayCurve) -> Result<f64, AnalysisError> {
    let e = (-rate * curve.t0()).exp();
    Ok(e / (e + z_failure_prob(rate, curve)?))
}

/// A simulated run of honest milestones.
#[derive(Clone, Debug, PartialEq)]
pub struct TagSequence {
    pub tags: Vec<bool>,
    pub inter_arrivals: Vec<f64>,
    /// `Z_i`: the creator had received milestone `i - 1`.
    pub z: Vec<bool>,
}

impl TagSequence {
    pub fn ones(&self) -> usize {
        self.tags.iter().filter(|t| **t).count()
    }
}

/// Next tag given the previous one, for inter-arrival `u` and draw `r`.
pub fn next_tag(prev: bool, u: f64, r: f64, curve: &DelayCurve) -> (bool, bool) {
    let t0 = curve.t0();
    let z = u >= t0 || r < curve.cdf(u);
    let y = if prev { z } else { u > t0 };
    (y, z)
}

/// `count` milestones at rate `rate`, the first following a virtual
/// milestone tagged `first`.
pub fn simulate_tags(
    rate: f64,
    curve: &DelayCurve,
    count: usize,
    first: bool,
    rng: &mut impl Rng,
) -> Result<TagSequence, AnalysisError> {
    check(rate)?;
    let exp = Exp::new(rate).map_err(|e| domain(e.to_string()))?;
    let mut s = TagSequence { tags: Vec::with_capacity(count), inter_arrivals: Vec::with_capacity(count), z: Vec::with_capacity(count) };
    let mut prev = first;
    for _ in 0..count {
        let u = exp.sample(rng);
        let (y, z) = next_tag(prev, u, rng.random(), curve);
        s.tags.push(y);
        s.inter_arrivals.push(u);
        s.z.push(z);
        prev = y;
    }
    Ok(s)
}

/// Mean of `xs` with a batch-means standard error.
pub fn batch_mean(xs: &[bool], batches: usize) -> (f64, f64) {
    let size = xs.len() / batches;
    let means: Vec<f64> =
        xs.chunks_exact(size).take(batches).map(|c| c.iter().filter(|x| **x).count() as f64 / size as f64).collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (means.len() - 1) as f64;
    (m, (var / means.len() as f64).sqrt())
}
