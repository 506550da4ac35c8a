//! Wasted capacity and the mempool fluid model.

use crate::AnalysisError;

/// Upper bound on the share of capacity spent on duplicate copies,
/// `(1-e^{-mu t}) mu c t / (1 + (1-e^{-mu t}) mu c t)` with `t = t_bar`.
pub fn theta(c: f64, mu: f64, t_bar: f64) -> f64 {
    let x = (1.0 - (-mu * t_bar).exp()) * mu * c * t_bar;
    x / (1.0 + x)
}

fn load(lambda: f64, n: f64, mu: f64, theta: f64) -> Result<f64, AnalysisError> {
    let rho = lambda / (n * mu);
    let l = rho / (1.0 - theta);
    if !(l < 1.0) {
        return Err(AnalysisError::Unstable { load: l });
    }
    Ok(l)
}

/// Stable mempool size `Q = (n/c) ln(n mu / (n mu - lambda/(1-theta)))`.
pub fn queue_length(lambda: f64, n: f64, mu: f64, c: f64, theta: f64) -> Result<f64, AnalysisError> {
    let l = load(lambda, n, mu, theta)?;
    Ok(n / c * (-(1.0 - l).ln()))
}

/// Mean mempool wait `Q / lambda`.
pub fn w1(lambda: f64, n: f64, mu: f64, c: f64, theta: f64) -> Result<f64, AnalysisError> {
    let l = load(lambda, n, mu, theta)?;
    let rho = lambda / (n * mu);
    if rho == 0.0 {
        // ln(1/(1-x)) ~ x
        return Ok(1.0 / (c * (1.0 - theta) * mu));
    }
    Ok(1.0 / c / (rho * mu) * (-(1.0 - l).ln()))
}

/// The wait written in terms of the wasted share instead of `c`.
pub fn w1_of_theta(theta: f64, rho: f64, t_bar: f64, mu: f64) -> Result<f64, AnalysisError> {
    let l = rho / (1.0 - theta);
    if !(l < 1.0) {
        return Err(AnalysisError::Unstable { load: l });
    }
    let k = (1.0 - theta) * t_bar * (1.0 - (-mu * t_bar).exp()) / theta;
    if rho == 0.0 {
        return Ok(k / (1.0 - theta));
    }
    Ok(k / rho * (-(1.0 - l).ln()))
}
