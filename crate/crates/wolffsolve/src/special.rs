//! Sphere and ball geometry built on the regularized incomplete beta function.
//!
//! Everything the ball-mass oracle needs reduces to two quantities: the
//! fraction of a sphere `|y| = rho` covered by a ball `B(x, t)` (a spherical
//! cap), and the volume of the intersection of two balls (two caps glued at
//! the radical plane). Both are exact in terms of `I_x(a, b)`.

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

/// Surface measure of the unit sphere `S^{n-1}`: `2 pi^{n/2} / Gamma(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    let nf = n as f64;
    2.0 * (0.5 * nf * std::f64::consts::PI.ln() - ln_gamma(0.5 * nf)).exp()
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n) / n as f64
}

/// Regularized incomplete beta `I_x(a, b)`, clamped to `[0, 1]`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    beta_reg(a, b, x).clamp(0.0, 1.0)
}

/// Fraction of the unit sphere `S^{n-1}` lying in the cap `{u . e >= cos_theta}`.
///
/// For `n >= 2` this is `(1/2) I_{sin^2 theta}((n-1)/2, 1/2)` on the small
/// side, reflected through 1/2 for angles past the equator; `n <= 3` uses the
/// closed forms since this sits inside the ball-mass quadrature. `n = 1` is
/// the two-point sphere and is handled by counting.
pub fn sphere_cap_fraction(n: usize, cos_theta: f64) -> f64 {
    debug_assert!(!cos_theta.is_nan());
    if cos_theta.is_nan() {
        return 0.0;
    }
    let c = cos_theta.clamp(-1.0, 1.0);
    match n {
        1 => {
            // points {+1, -1}; the cap holds +1 iff cos_theta <= 1, -1 iff <= -1
            if c <= -1.0 {
                1.0
            } else if c <= 1.0 {
                0.5
            } else {
                0.0
            }
        }
        2 => c.acos() / std::f64::consts::PI,
        3 => 0.5 * (1.0 - c),
        _ => {
            let x = (1.0 - c * c).clamp(0.0, 1.0);
            let half = 0.5 * reg_inc_beta(0.5 * (n as f64 - 1.0), 0.5, x);
            if c >= 0.0 {
                half
            } else {
                1.0 - half
            }
        }
    }
}

/// Fraction of the sphere `|y| = rho` (about the origin) inside the open ball
/// `B(x, t)` with `|x| = d`.
///
/// The cap angle satisfies `1 - cos = (t-w)(t+w)/(2 d rho)` and
/// `1 + cos = (d+rho-t)(d+rho+t)/(2 d rho)` with `w = rho - d`; both factored
/// forms stay accurate for thin lenses (`t << d`), where the naive
/// `(d^2+rho^2-t^2)/(2 d rho)` loses all digits of `1 - cos`.
pub fn sphere_in_ball_fraction(n: usize, rho: f64, d: f64, t: f64) -> f64 {
    if rho <= 0.0 {
        return if t > d { 1.0 } else { 0.0 };
    }
    if d == 0.0 {
        return if rho < t { 1.0 } else { 0.0 };
    }
    if t >= d + rho {
        return 1.0;
    }
    if t <= (d - rho).abs() {
        return 0.0;
    }
    let w = rho - d;
    let denom = 2.0 * d * rho;
    let one_minus_cos = ((t - w) * (t + w) / denom).clamp(0.0, 2.0);
    let one_plus_cos = ((d + rho - t) * (d + rho + t) / denom).clamp(0.0, 2.0);
    let cos_theta = 0.5 * ((one_plus_cos - one_minus_cos).clamp(-2.0, 2.0));
    match n {
        1 => sphere_cap_fraction(1, cos_theta),
        2 => {
            let sin_theta = (one_minus_cos * one_plus_cos).max(0.0).sqrt();
            sin_theta.atan2(cos_theta) / std::f64::consts::PI
        }
        3 => 0.5 * one_minus_cos,
        _ => {
            let x = (one_minus_cos * one_plus_cos).clamp(0.0, 1.0);
            let half = 0.5 * reg_inc_beta(0.5 * (n as f64 - 1.0), 0.5, x);
            if cos_theta >= 0.0 {
                half
            } else {
                1.0 - half
            }
        }
    }
}

/// Fraction of the unit ball beyond the plane at signed distance `a` from its
/// center (`a` in `[-1, 1]`): `(1/2) I_{1-a^2}((n+1)/2, 1/2)` for `a >= 0`,
/// with closed forms for `n <= 3`.
pub fn ball_cap_volume_fraction(n: usize, a: f64) -> f64 {
    debug_assert!(!a.is_nan());
    let a = a.clamp(-1.0, 1.0);
    match n {
        1 => 0.5 * (1.0 - a),
        2 => (a.acos() - a * (1.0 - a * a).max(0.0).sqrt()) / std::f64::consts::PI,
        3 => 0.25 * (2.0 - 3.0 * a + a * a * a),
        _ => {
            let x = (1.0 - a * a).clamp(0.0, 1.0);
            let half = 0.5 * reg_inc_beta(0.5 * (n as f64 + 1.0), 0.5, x);
            if a >= 0.0 {
                half
            } else {
                1.0 - half
            }
        }
    }
}

/// Volume of `B(c1, r1) ∩ B(c2, r2)` with centers `d` apart, as two caps cut
/// at the radical plane. Containment and disjoint cases are exact.
pub fn ball_ball_intersection_volume(n: usize, d: f64, r1: f64, r2: f64) -> f64 {
    let vn = unit_ball_volume(n);
    if d >= r1 + r2 {
        return 0.0;
    }
    if d + r1 <= r2 {
        return vn * r1.powi(n as i32);
    }
    if d + r2 <= r1 {
        return vn * r2.powi(n as i32);
    }
    let a1 = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
    let a2 = (d * d + r2 * r2 - r1 * r1) / (2.0 * d);
    vn * r1.powi(n as i32) * ball_cap_volume_fraction(n, a1 / r1)
        + vn * r2.powi(n as i32) * ball_cap_volume_fraction(n, a2 / r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_area_and_ball_volume() {
        assert_relative_eq!(unit_sphere_area(1), 2.0, max_relative = 1e-14);
        assert_relative_eq!(unit_sphere_area(2), 2.0 * std::f64::consts::PI, max_relative = 1e-14);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * std::f64::consts::PI, max_relative = 1e-14);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * std::f64::consts::PI / 3.0, max_relative = 1e-14);
        assert_relative_eq!(
            unit_ball_volume(4),
            std::f64::consts::PI * std::f64::consts::PI / 2.0,
            max_relative = 1e-13
        );
    }

    // Reference values computed with mpmath (dps=25).
    #[test]
    fn reg_inc_beta_reference_values() {
        let refs: &[(f64, f64, f64, f64)] = &[
            (1.0, 0.5, 0.36, 0.19999999999999999),
            (2.0, 0.5, 0.7, 0.2605745473680257),
            (0.5, 0.5, 0.25, 0.33333333333333333),
            (2.5, 0.5, 0.9, 0.48958974456442755),
            (1.5, 0.5, 0.5, 0.18169011381620933),
            (1.0, 0.5, 0.9999, 0.99000000000000055),
            (7.5, 0.5, 0.3, 2.8321983469905539e-5),
        ];
        for &(a, b, x, want) in refs {
            let got = reg_inc_beta(a, b, x);
            assert!(
                (got - want).abs() <= 1e-12,
                "I_{x}({a},{b}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn cap_fraction_equator_is_exactly_half() {
        for n in 2..=7 {
            assert_relative_eq!(sphere_cap_fraction(n, 0.0), 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn low_dimension_closed_forms_match_beta_route() {
        // the n <= 3 fast paths must agree with the incomplete-beta identity
        for &c in &[-0.95, -0.4, 0.0, 0.3, 0.8, 0.999] {
            for n in [2usize, 3] {
                let x = (1.0 - c * c).clamp(0.0, 1.0);
                let half = 0.5 * reg_inc_beta(0.5 * (n as f64 - 1.0), 0.5, x);
                let via_beta = if c >= 0.0 { half } else { 1.0 - half };
                assert_relative_eq!(sphere_cap_fraction(n, c), via_beta, epsilon = 1e-12);
            }
            for n in [1usize, 2, 3] {
                let x = (1.0 - c * c).clamp(0.0, 1.0);
                let half = 0.5 * reg_inc_beta(0.5 * (n as f64 + 1.0), 0.5, x);
                let via_beta = if c >= 0.0 { half } else { 1.0 - half };
                assert_relative_eq!(ball_cap_volume_fraction(n, c), via_beta, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cap_fraction_n3_closed_form() {
        // n = 3: fraction = (1 - cos theta) / 2
        for &c in &[-0.9, -0.5, -0.1, 0.0, 0.2, 0.7, 0.99] {
            assert_relative_eq!(sphere_cap_fraction(3, c), (1.0 - c) / 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn cap_fraction_n2_is_arc_fraction() {
        for &theta in &[0.3_f64, 1.0, 1.5, 2.0, 2.9] {
            assert_relative_eq!(
                sphere_cap_fraction(2, theta.cos()),
                theta / std::f64::consts::PI,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn sphere_in_ball_monotone_in_t() {
        let (n, rho, d) = (5, 0.7, 1.1);
        let mut prev = -1.0;
        let mut t = 0.05;
        while t < 3.0 {
            let f = sphere_in_ball_fraction(n, rho, d, t);
            assert!((0.0..=1.0).contains(&f));
            assert!(f >= prev, "cap fraction must be nondecreasing in t");
            prev = f;
            t += 0.01;
        }
        assert_eq!(sphere_in_ball_fraction(n, rho, d, d + rho + 1e-9), 1.0);
        assert_eq!(sphere_in_ball_fraction(n, rho, d, (d - rho).abs() - 1e-9), 0.0);
    }

    #[test]
    fn ball_ball_matches_n3_lens_formula() {
        // mpmath: d=0.8, r1=1, r2=0.5 -> 0.367206366311782
        let v = ball_ball_intersection_volume(3, 0.8, 1.0, 0.5);
        assert_relative_eq!(v, 0.367206366311782, max_relative = 1e-12);
        // symmetric in the two balls
        let w = ball_ball_intersection_volume(3, 0.8, 0.5, 1.0);
        assert_relative_eq!(v, w, max_relative = 1e-13);
    }

    #[test]
    fn ball_ball_containment_and_disjoint() {
        let vn = unit_ball_volume(4);
        assert_eq!(ball_ball_intersection_volume(4, 3.0, 1.0, 1.5), 0.0);
        assert_relative_eq!(
            ball_ball_intersection_volume(4, 0.2, 0.5, 1.0),
            vn * 0.5_f64.powi(4),
            max_relative = 1e-13
        );
        // concentric partial: B(0,t) inside B(0,h) gives (t/h)^n of the volume
        assert_relative_eq!(
            ball_ball_intersection_volume(3, 0.0, 0.5, 1.0),
            unit_ball_volume(3) * 0.125,
            max_relative = 1e-13
        );
    }

    #[test]
    fn ball_ball_matches_cap_area_integration() {
        // independent route: V = int_0^{r1} area(S_rho ∩ B(x, r2)) drho
        let (n, d, r1, r2) = (3usize, 0.8, 1.0, 0.5);
        let omega = unit_sphere_area(n);
        let steps = 200_000;
        let h = r1 / steps as f64;
        let mut acc = 0.0;
        for i in 0..steps {
            let rho = (i as f64 + 0.5) * h;
            acc += omega * rho.powi(n as i32 - 1) * sphere_in_ball_fraction(n, rho, d, r2) * h;
        }
        let exact = ball_ball_intersection_volume(n, d, r1, r2);
        assert_relative_eq!(acc, exact, max_relative = 1e-6);
    }
}
