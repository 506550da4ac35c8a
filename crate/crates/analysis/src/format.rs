//! Plain decimal output with a fixed number of significant digits.

/// `x` in positional notation rounded to `digits` significant digits.
/// Non-finite values print as `inf`, `-inf` or `NaN`.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    // round first so that 9.9999... carries into the next decade
    let e = x.abs().log10().floor() as i32;
    let probe = format!("{:.*e}", digits - 1, x);
    let e = probe.rsplit_once('e').and_then(|(_, p)| p.parse::<i32>().ok()).unwrap_or(e);
    let decimals = (digits as i32 - 1 - e).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn sig12(x: f64) -> String {
    sig(x, 12)
}
