pub mod fit;
pub mod quadrature;
pub mod roots;

pub use fit::{fit_loglog, log_space, LogLogFit};
pub use quadrature::{integrate, integrate_2d, integrate_breaks, integrate_vec, QuadOptions, Quadrature};
pub use roots::increasing_root;

/// Centered first difference with step `h`.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Radical-inverse (van der Corput) value of `i` in `base`.
pub fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}
