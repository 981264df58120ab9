//! Integrals of `tau^u * L(tau)^{-beta}` with `L(tau) = |log(e*R/tau)|`.
//!
//! These are the radial building blocks behind every segment mass and moment.
//! Closed forms cover `beta = 0` (pure power) and `u = -1` (log-power
//! antiderivative); everything else goes through quadrature in the
//! `w = L(tau)` coordinate, where the integrand is `e^{±(u+1)w} w^{-beta}`.
//!
//! Divergence at the endpoints is decided analytically, never by overflow.

use crate::quad::{integrate_panels, QuadOptions};

/// `L(tau) = |log(e * log_scale / tau)| = |1 + ln(log_scale) - ln(tau)|`.
pub fn log_term(tau: f64, log_scale: f64) -> f64 {
    (1.0 + log_scale.ln() - tau.ln()).abs()
}

/// Radius where the log factor changes sign: `e * log_scale`.
pub fn log_edge(log_scale: f64) -> f64 {
    std::f64::consts::E * log_scale
}

/// Does `int_0 tau^u L^{-beta} dtau` diverge at 0?
pub fn diverges_at_zero(u: f64, beta: f64) -> bool {
    u < -1.0 || (u == -1.0 && beta <= 1.0)
}

/// Does `int^inf tau^u L^{-beta} dtau` diverge at infinity?
pub fn diverges_at_infinity(u: f64, beta: f64) -> bool {
    u > -1.0 || (u == -1.0 && beta <= 1.0)
}

/// `int_{w1}^{w2} e^{c w} w^{-beta} dw` for `0 <= w1 < w2 <= inf`.
fn exp_power_integral(c: f64, beta: f64, w1: f64, w2: f64) -> f64 {
    debug_assert!(w1 >= 0.0 && w2 > w1);
    if w2.is_infinite() {
        if c > 0.0 || (c == 0.0 && beta <= 1.0) {
            return f64::INFINITY;
        }
        if c == 0.0 {
            return w1.powf(1.0 - beta) / (beta - 1.0);
        }
        // truncate where the exponential has decayed below resolution
        let wmax = w1 + (50.0 + 2.0 * (-beta).max(0.0)) / c.abs();
        return exp_power_integral(c, beta, w1, wmax);
    }
    if c == 0.0 {
        if beta == 1.0 {
            return if w1 == 0.0 { f64::INFINITY } else { (w2 / w1).ln() };
        }
        if w1 == 0.0 && beta > 1.0 {
            return f64::INFINITY;
        }
        let p = 1.0 - beta;
        return (w2.powf(p) - if w1 == 0.0 { 0.0 } else { w1.powf(p) }) / p;
    }
    if w1 == 0.0 && beta >= 1.0 {
        return f64::INFINITY;
    }
    // quadrature; grade panels toward a singular-ish left endpoint
    let span = w2 - w1;
    let mut breaks = Vec::with_capacity(12);
    breaks.push(w1);
    if beta > 0.0 && w1 < 1e-3 * span {
        for &frac in &[1e-12, 1e-9, 1e-6, 1e-4, 1e-2] {
            let w = w1 + span * frac;
            if w > *breaks.last().unwrap() && w < w2 {
                breaks.push(w);
            }
        }
    }
    // keep the exponential well resolved on wide ranges
    let nseg = ((c.abs() * span / 8.0).ceil() as usize).clamp(1, 24);
    let start = *breaks.last().unwrap();
    for k in 1..nseg {
        breaks.push(start + (w2 - start) * k as f64 / nseg as f64);
    }
    breaks.push(w2);
    let opt = QuadOptions {
        rel_tol: 1e-11,
        abs_tol: 0.0,
        max_intervals: 4000,
    };
    integrate_panels(|w| (c * w).exp() * w.powf(-beta), &breaks, opt).value
}

/// `int_a^b tau^u L(tau)^{-beta} dtau` for `0 <= a <= b <= inf`.
///
/// When `beta != 0` the interval must lie on one side of the edge
/// `e * log_scale` (measure validation enforces this for segments).
pub fn powerlog_integral(u: f64, beta: f64, log_scale: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= a);
    if a == b {
        return 0.0;
    }
    if beta == 0.0 {
        let p = u + 1.0;
        if b.is_infinite() {
            if p >= 0.0 {
                return f64::INFINITY;
            }
            return -a.powf(p) / p;
        }
        if a == 0.0 {
            if p <= 0.0 {
                return f64::INFINITY;
            }
            return b.powf(p) / p;
        }
        if u == -1.0 {
            return (b / a).ln();
        }
        return (b.powf(p) - a.powf(p)) / p;
    }

    let edge = log_edge(log_scale);
    debug_assert!(
        b <= edge * (1.0 + 1e-12) || a >= edge * (1.0 - 1e-12),
        "powerlog interval must not straddle the log edge"
    );
    let inside = a < edge; // whole interval below (or touching) the edge

    if u == -1.0 {
        // int tau^{-1} L^{-beta} dtau = int w^{-beta} dw in the L coordinate
        let (w_small, w_large) = if inside {
            (log_term(b.min(edge), log_scale), if a == 0.0 { f64::INFINITY } else { log_term(a, log_scale) })
        } else {
            (log_term(a, log_scale), if b.is_infinite() { f64::INFINITY } else { log_term(b, log_scale) })
        };
        return exp_power_integral(0.0, beta, w_small, w_large);
    }

    let p = u + 1.0;
    if inside {
        // tau = edge * e^{-w}: integral = edge^p * int_{L(b)}^{L(a)} e^{-p w} w^{-beta} dw
        let w1 = log_term(b.min(edge), log_scale);
        let w2 = if a == 0.0 { f64::INFINITY } else { log_term(a, log_scale) };
        if w2.is_infinite() && diverges_at_zero(u, beta) {
            return f64::INFINITY;
        }
        edge.powf(p) * exp_power_integral(-p, beta, w1, w2)
    } else {
        // tau = edge * e^{w}: integral = edge^p * int_{L(a)}^{L(b)} e^{p w} w^{-beta} dw
        let w1 = log_term(a, log_scale);
        let w2 = if b.is_infinite() { f64::INFINITY } else { log_term(b, log_scale) };
        if w2.is_infinite() && diverges_at_infinity(u, beta) {
            return f64::INFINITY;
        }
        edge.powf(p) * exp_power_integral(p, beta, w1, w2)
    }
}
