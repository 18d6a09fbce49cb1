//! Safeguarded Newton iteration on a sign-changing bracket.

use crate::error::{Result, TdError};

const MAX_ITER: usize = 200;

/// Find the root of an increasing function on `[lo, hi]` given `g(lo) <= 0 <= g(hi)`.
///
/// `eval` returns `(g(x), g'(x))`. Newton steps are taken from `guess` and
/// replaced by bisection whenever they leave the current bracket or stall.
/// Iteration stops once the bracket or the step is at round-off level, so the
/// answer is accurate to a few ulps whenever `g'` is not tiny.
pub fn increasing_root<F>(mut eval: F, mut lo: f64, mut hi: f64, guess: f64) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    if !(lo <= hi) {
        return Err(TdError::NoConvergence(format!("empty bracket [{lo}, {hi}]")));
    }
    let (glo, _) = eval(lo);
    if glo == 0.0 {
        return Ok(lo);
    }
    let (ghi, _) = eval(hi);
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo > 0.0 || ghi < 0.0 {
        return Err(TdError::NoConvergence(format!(
            "no sign change on [{lo}, {hi}]: g(lo)={glo:e}, g(hi)={ghi:e}"
        )));
    }

    let mut x = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    let mut last_step = hi - lo;
    for _ in 0..MAX_ITER {
        let (g, dg) = eval(x);
        if g == 0.0 {
            return Ok(x);
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = if dg > 0.0 { x - g / dg } else { f64::NAN };
        let use_newton = newton > lo && newton < hi && (x - newton).abs() < 0.5 * last_step.abs();
        let next = if use_newton { newton } else { 0.5 * (lo + hi) };
        last_step = next - x;
        let scale = 4.0 * f64::EPSILON * next.abs().max(f64::MIN_POSITIVE);
        if (hi - lo) <= scale || last_step.abs() <= scale || next == x {
            return Ok(next);
        }
        x = next;
    }
    Err(TdError::NoConvergence(format!(
        "bracket [{lo:e}, {hi:e}] after {MAX_ITER} iterations"
    )))
}
