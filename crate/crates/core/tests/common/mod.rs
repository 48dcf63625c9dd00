//! Oracles shared by the integration tests.
#![allow(dead_code)]

pub mod zeeman;

use std::f64::consts::PI;

/// Adaptive Simpson, written here so the oracle does not share the library's quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Gaussian (x) Lorentzian by direct quadrature, split at the Lorentzian peak.
pub fn convolution(detuning: f64, sigma: f64, gamma: f64) -> f64 {
    let g = |x: f64| (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt());
    let l = |x: f64| gamma / PI / (x * x + gamma * gamma);
    let f = |x: f64| g(x) * l(detuning - x);
    let lim = 14.0 * sigma;
    let mut cuts = vec![-lim, lim];
    if detuning.abs() < lim {
        cuts.insert(1, detuning);
    }
    let peak = g(0.0).min(1.0 / (PI * gamma));
    let tol = 1e-13 * peak;
    cuts.windows(2).map(|w| simpson(&f, w[0], w[1], tol)).sum()
}
