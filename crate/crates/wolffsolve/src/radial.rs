//! Fast 1-D path for the radial fractional problem `u = I_{2a}(u^q dsigma) + r`.
//!
//! For radial measures the Riesz potential is equivalent (up to dimensional
//! constants) to `sigma(B(0,|x|))/|x|^{n-2a} + int_{|y|>=|x|} |y|^{-(n-2a)} dsigma`.
//! The model kernel `max(rho,tau)^{-(n-2a)}` reproduces that right-hand side
//! *exactly*, so the 1-D solve iterates a kernel whose integrals reduce to
//! the radial moment machinery; all claims against the true Riesz solve are
//! trend- and sandwich-level, matching the equivalence-up-to-constants.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{Measure, Point, RadialSegment};
use crate::potential::{apply_radial_weight, PotentialParams, RadialPowerFit};
use crate::solver::{NodeSet, SolutionField};

/// Log-spaced collocation radii with graded clusters at the support
/// boundaries (where the iterate has its largest log-log curvature).
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub radii: Vec<f64>,
}

impl RadialGrid {
    pub fn for_measure(m: &Measure, nodes_per_decade: usize, span: (f64, f64)) -> Result<Self> {
        if nodes_per_decade == 0 {
            return Err(Error::invalid("grid needs at least one node per decade"));
        }
        let (lo_s, hi_raw) = m
            .radial_support_range()
            .ok_or_else(|| Error::invalid("grid construction needs a nontrivial measure"))?;
        let scale = if hi_raw.is_finite() {
            hi_raw
        } else {
            lo_s.max(1.0) * 1e3
        };
        let lo = scale * span.0;
        let hi = scale * span.1;
        let decades = (hi / lo).log10();
        let count = (decades * nodes_per_decade as f64).ceil() as usize + 1;
        let mut radii: Vec<f64> = (0..count)
            .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
            .collect();
        // graded refinement toward each support boundary
        let mut boundaries: Vec<f64> = Vec::new();
        for seg in m.segments() {
            if seg.r_lo > 0.0 {
                boundaries.push(seg.r_lo);
            }
            if seg.r_hi.is_finite() {
                boundaries.push(seg.r_hi);
            }
        }
        for atom in m.atoms() {
            let d = atom.center.norm();
            boundaries.push(d + atom.radius);
            if d - atom.radius > 0.0 {
                boundaries.push(d - atom.radius);
            }
        }
        for b in boundaries {
            if b <= lo || b >= hi {
                continue;
            }
            radii.push(b);
            for j in 2..=13 {
                let eps =  3.0 * 2f64.powi(-j);
                let below = b * (1.0 - eps);
                let above = b * (1.0 + eps);
                if below > lo {
                    radii.push(below);
                }
                if above < hi {
                    radii.push(above);
                }
            }
        }
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.dedup_by(|b, a| *b <= *a * (1.0 + 1e-9));
        Ok(RadialGrid { radii })
    }
}

/// The kernel whose integral operator reproduces the radial Riesz
/// equivalence exactly: `max(rho, tau)^{-(n-2a)}`.
pub fn model_kernel(rho: f64, tau: f64, n: usize, two_alpha: f64) -> f64 {
    rho.max(tau).powf(-(n as f64 - two_alpha))
}

/// The two terms of the radial solution envelope at `rho`:
/// `k_term = rho^{-(n-2a)} M_q(rho)^{1/(1-q)}` and
/// `tail_term = T(rho)^{1/(1-q)}`.
pub fn radial_envelope(m: &Measure, params: &PotentialParams, rho: f64) -> Result<(f64, f64)> {
    require_fractional(params)?;
    let failures = crate::conditions::radial_existence_failures(m, params)?;
    if !failures.is_empty() {
        return Err(Error::invalid(format!(
            "radial existence fails: {} diverges",
            failures.join(" and ")
        )));
    }
    let e = params.n_minus_alpha_p();
    let inv = 1.0 / (1.0 - params.q());
    let m_q = m.radial_moment_below(rho, e * params.q())?;
    let t = m.radial_moment_above(rho, e)?;
    Ok((rho.powf(-e) * m_q.powf(inv), t.powf(inv)))
}

/// The counterexample measure: density `|y|^{-s} log^{-beta}(1/|y|)` on
/// `|y| < 1/2` with `s = (1-q) n + 2 alpha q`; existence holds while the
/// two-sided Brezis-Kamin-type upper estimate fails.
pub fn make_counterexample(n: usize, two_alpha: f64, q: f64, beta: f64) -> Result<Measure> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid("need 0 < q < 1"));
    }
    if !(two_alpha > 0.0 && two_alpha < n as f64) {
        return Err(Error::invalid("need 0 < 2*alpha < n"));
    }
    if !(beta > 1.0) {
        return Err(Error::invalid(
            "need beta > 1: otherwise the weighted mass near the origin is infinite",
        ));
    }
    let s = (1.0 - q) * n as f64 + two_alpha * q;
    debug_assert!(two_alpha < s && s < n as f64);
    Measure::new(
        n,
        vec![RadialSegment {
            c: 1.0,
            s,
            beta,
            r_lo: 0.0,
            r_hi: 0.5,
            log_scale: (-1.0f64).exp(), // log(e*R/rho) = log(1/rho)
        }],
        vec![],
    )
}

/// The power example `|y|^{-s}` on `B(0,1)`, valid for
/// `2 alpha < s < n - (n-2a) q`: the energy/capacity condition fails while
/// the weaker q-dependent conditions hold.
pub fn make_powerlaw_example(n: usize, two_alpha: f64, q: f64, s: f64) -> Result<Measure> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid("need 0 < q < 1"));
    }
    if !(two_alpha > 0.0 && two_alpha < n as f64) {
        return Err(Error::invalid("need 0 < 2*alpha < n"));
    }
    let upper = n as f64 - (n as f64 - two_alpha) * q;
    if !(s > two_alpha && s < upper) {
        return Err(Error::invalid(format!(
            "need 2*alpha < s < n - (n-2a) q, i.e. s in ({two_alpha}, {upper})"
        )));
    }
    Measure::new(n, vec![RadialSegment::power(1.0, s, 0.0, 1.0)], vec![])
}

/// Outcome of the 1-D radial solve: the field plus the data to evaluate
/// `u(rho)` anywhere through the model kernel.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub field: SolutionField,
    pub weighted: Measure,
    pub params: PotentialParams,
    pub r: f64,
}

impl RadialSolution {
    /// `u(rho) = K(u^q dsigma)(rho) + r` from the converged weighted measure.
    pub fn eval(&self, rho: f64) -> Result<f64> {
        if self.weighted.is_zero() {
            return Ok(self.r);
        }
        let e = self.params.n_minus_alpha_p();
        let cum = self.weighted.cumulative_mass(rho);
        let tail = self.weighted.radial_moment_above(rho, e)?;
        Ok(rho.powf(-e) * cum + tail + self.r)
    }
}

/// Apply the model-kernel operator to the node values `u` in one pass:
/// pieces of the weighted measure are knot-aligned, so cumulative and tail
/// sums reduce to prefix sums over per-piece moments.
fn kernel_apply(
    m: &Measure,
    radii: &[f64],
    u: &[f64],
    params: &PotentialParams,
) -> Result<(Vec<f64>, Measure)> {
    let e = params.n_minus_alpha_p();
    let q = params.q();
    let fit = RadialPowerFit::from_samples(radii, u)?;
    let atom_w: Vec<f64> = m.atoms().iter().map(|_| fit.value(radii[0])).collect();
    let (weighted, _) = apply_radial_weight(m, &fit, &atom_w, q)?;

    let n = m.n();
    // per-piece mass and e-weighted moment
    struct Piece {
        r_hi: f64,
        mass: f64,
        moment: f64,
    }
    // pieces are cut at the fit knots (= grid nodes), so every piece lies
    // within one node interval up to floating point drift; prefix sums over
    // pieces give the cumulative mass and tail moment at every node
    let mut pieces: Vec<Piece> = weighted
        .segments()
        .iter()
        .map(|seg| Piece {
            r_hi: seg.r_hi,
            mass: seg.mass(n, 0.0, f64::INFINITY),
            moment: seg.weighted_mass(n, 0.0, f64::INFINITY, e),
        })
        .collect();
    pieces.sort_by(|a, b| a.r_hi.partial_cmp(&b.r_hi).unwrap());

    let atoms_only = Measure::new(n, vec![], weighted.atoms().to_vec())?;
    let has_atoms = !atoms_only.is_zero();

    let mut out = Vec::with_capacity(radii.len());
    let mut j_lo = 0usize; // pieces fully below the current node
    let mut prefix_mass = 0.0f64;
    let mut suffix_moment: f64 = pieces.iter().map(|p| p.moment).sum();
    for &rho in radii {
        while j_lo < pieces.len() && pieces[j_lo].r_hi <= rho * (1.0 + 1e-12) {
            prefix_mass += pieces[j_lo].mass;
            suffix_moment -= pieces[j_lo].moment;
            j_lo += 1;
        }
        let mut cum = prefix_mass;
        let mut tail = suffix_moment.max(0.0);
        if has_atoms {
            cum += atoms_only.cumulative_mass(rho);
            tail += atoms_only.radial_moment_above(rho, e)?;
        }
        out.push(rho.powf(-e) * cum + tail + params.r());
    }
    Ok((out, weighted))
}

/// Solve `u(rho) = int max(rho,tau)^{-(n-2a)} u(tau)^q dsigma~(tau) + r` by
/// monotone iteration from a verified multiple of the radial envelope.
pub fn radial_solve(
    m: &Measure,
    params: &PotentialParams,
    grid: &RadialGrid,
    tol: f64,
    max_iter: usize,
) -> Result<RadialSolution> {
    require_fractional(params)?;
    if !m.is_radial() {
        return Err(Error::unsupported("radial solve needs a radial measure"));
    }
    let r = params.r();
    if m.is_zero() {
        let field = SolutionField {
            nodes: NodeSet::Radial { radii: vec![1.0] },
            values: vec![r],
            envelope_lower: vec![r],
            envelope_upper: vec![r],
            node_residuals: vec![0.0],
            residual: 0.0,
            offnode_residual: 0.0,
            iterations: 1,
            converged: true,
            trivial: r == 0.0,
            sandwich: (1.0, 1.0),
        };
        return Ok(RadialSolution {
            field,
            weighted: Measure::zero(m.n()),
            params: *params,
            r,
        });
    }
    let failures = crate::conditions::radial_existence_failures(m, params)?;
    if !failures.is_empty() {
        return Err(Error::invalid(format!(
            "radial existence fails: {} diverges",
            failures.join(" and ")
        )));
    }

    let radii = &grid.radii;
    let envelope: Vec<(f64, f64)> = radii
        .par_iter()
        .map(|rho| radial_envelope(m, params, *rho))
        .collect::<Result<Vec<_>>>()?;
    let env_sum: Vec<f64> = envelope.iter().map(|(k, t)| k + t).collect();
    if env_sum.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Internal(
            "radial envelope must be positive and finite on the grid".to_string(),
        ));
    }

    // start constant: largest dyadic c with c^q A + r >= c E on all nodes,
    // where A = K(E^q dsigma) and E is the envelope sum
    let (a_vals, _) = kernel_apply(m, radii, &env_sum, &params.with_r(0.0)?)?;
    let mut c0 = f64::INFINITY;
    for (a, env) in a_vals.iter().zip(&env_sum) {
        // subsolution when c <= (A/E)^{1/(1-q)} (r only helps)
        c0 = c0.min((a / env).powf(1.0 / (1.0 - params.q())));
    }
    let c0 = 2f64.powi((c0.log2().floor() as i32).clamp(-60, 0));

    let mut u: Vec<f64> = env_sum.iter().map(|v| (c0 * v).max(1e-300)).collect();
    if r > 0.0 {
        for v in u.iter_mut() {
            *v = v.max(r);
        }
    }

    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < max_iter {
        let (next, _) = kernel_apply(m, radii, &u, params)?;
        iterations += 1;
        for (i, (nv, ov)) in next.iter().zip(&u).enumerate() {
            if *nv < ov * (1.0 - 1e-11) {
                return Err(Error::Internal(format!(
                    "monotone trace violated at node {i}: {ov} -> {nv}"
                )));
            }
        }
        let change = next
            .iter()
            .zip(&u)
            .map(|(nv, ov)| (nv - ov).abs() / nv.max(r + 1e-300))
            .fold(0.0f64, f64::max);
        u = next;
        if change < tol {
            converged = true;
            break;
        }
    }

    let (image, weighted) = kernel_apply(m, radii, &u, params)?;
    let node_residuals: Vec<f64> = u
        .iter()
        .zip(&image)
        .map(|(uv, iv)| (uv - iv).abs() / uv.max(r + 1e-300))
        .collect();
    let residual = node_residuals.iter().cloned().fold(0.0f64, f64::max);

    // off-node residual via the reconstruction at interval midpoints
    let fit = RadialPowerFit::from_samples(radii, &u)?;
    let sol_probe = RadialSolution {
        field: SolutionField {
            nodes: NodeSet::Radial { radii: radii.clone() },
            values: u.clone(),
            envelope_lower: vec![],
            envelope_upper: vec![],
            node_residuals: vec![],
            residual: 0.0,
            offnode_residual: 0.0,
            iterations,
            converged,
            trivial: false,
            sandwich: (0.0, 0.0),
        },
        weighted: weighted.clone(),
        params: *params,
        r,
    };
    let offnode_residual = radii
        .windows(2)
        .enumerate()
        .filter(|(i, _)| i % 5 == 0)
        .map(|(_, w)| {
            let rho = (w[0] * w[1]).sqrt();
            let im = sol_probe.eval(rho).unwrap_or(f64::NAN);
            let uf = fit.value(rho);
            (uf - im).abs() / uf.max(r + 1e-300)
        })
        .fold(0.0f64, f64::max);

    // sandwich against the radial envelope
    let mut c_lower = 0.0f64;
    let mut c_upper = 0.0f64;
    for (uv, env) in u.iter().zip(&env_sum) {
        c_lower = c_lower.max(env / uv);
        c_upper = c_upper.max(uv / env);
    }

    let field = SolutionField {
        nodes: NodeSet::Radial {
            radii: radii.clone(),
        },
        values: u,
        envelope_lower: env_sum.clone(),
        envelope_upper: env_sum,
        node_residuals,
        residual,
        offnode_residual,
        iterations,
        converged,
        trivial: false,
        sandwich: (c_lower, c_upper),
    };
    if !field.converged {
        return Err(Error::NotConverged(format!(
            "radial solve: no convergence after {} sweeps (residual {:.3e})",
            field.iterations, field.residual
        )));
    }
    Ok(RadialSolution {
        field,
        weighted,
        params: *params,
        r,
    })
}

/// One row of the radial study table.
#[derive(Debug, Clone)]
pub struct RadialStudyRow {
    pub rho: f64,
    pub u: f64,
    pub k_term: f64,
    pub tail_term: f64,
    pub envelope: f64,
    pub ratio_5_2: f64,
    pub riesz_potential: f64,
}

/// Evaluate the study columns at the given scales.
pub fn radial_study(
    m: &Measure,
    params: &PotentialParams,
    sol: &RadialSolution,
    scales: &[f64],
) -> Result<Vec<RadialStudyRow>> {
    let rows = scales
        .par_iter()
        .map(|&rho| {
            let (k_term, tail_term) = radial_envelope(m, params, rho)?;
            let u = sol.eval(rho)?;
            let ratio = crate::conditions::radial_ratio(m, params, rho)?;
            let riesz = crate::potential::riesz(m, 2.0 * params.alpha(), &Point::radial(m.n(), rho))?;
            Ok(RadialStudyRow {
                rho,
                u,
                k_term,
                tail_term,
                envelope: k_term + tail_term,
                ratio_5_2: ratio,
                riesz_potential: riesz.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows)
}

fn require_fractional(params: &PotentialParams) -> Result<()> {
    if params.p() != 2.0 {
        return Err(Error::unsupported(
            "the radial reduction applies to the fractional case (p = 2) only",
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_panels, QuadOptions};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn frac_params(r: f64) -> PotentialParams {
        PotentialParams::fractional(3, 1.0, 0.5, r).unwrap()
    }

    #[test]
    fn model_kernel_values_and_symmetry() {
        assert_eq!(model_kernel(1.0, 1.0, 3, 1.0), 1.0);
        assert_eq!(model_kernel(2.0, 0.5, 3, 1.0), 0.5);
        for &(a, b) in &[(0.3, 1.7), (2.0, 0.01), (5.0, 5.0)] {
            assert_eq!(model_kernel(a, b, 4, 1.5), model_kernel(b, a, 4, 1.5));
        }
    }

    #[test]
    fn kernel_integral_identity() {
        // int max(rho,tau)^{-(n-2a)} dsigma~ = sigma(B(0,rho))/rho^{n-2a} + T(rho)
        let m = make_powerlaw_example(3, 1.0, 0.5, 1.5).unwrap();
        let params = frac_params(0.0);
        let e = params.n_minus_alpha_p();
        for &rho in &[0.01f64, 0.3, 0.9, 2.0] {
            let lhs = integrate_panels(
                |t| {
                    let tau = t.exp();
                    4.0 * PI * tau.powf(3.0 - 1.5) * model_kernel(rho, tau, 3, 1.0)
                },
                &[(1e-12f64).ln(), rho.min(1.0).ln(), 0.0],
                QuadOptions::with_rel_tol(1e-10),
            )
            .value;
            let rhs = m.cumulative_mass(rho) * rho.powf(-e)
                + m.radial_moment_above(rho, e).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-7);
        }
    }

    #[test]
    fn counterexample_generator_parameters() {
        let m = make_counterexample(3, 1.0, 0.5, 2.0).unwrap();
        assert_relative_eq!(m.segments()[0].s, 2.0, max_relative = 1e-15);
        let m4 = make_counterexample(4, 2.0, 0.5, 2.0).unwrap();
        assert_relative_eq!(m4.segments()[0].s, 3.0, max_relative = 1e-15);
        assert!(make_counterexample(3, 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn powerlaw_generator_interval_is_open() {
        assert!(make_powerlaw_example(3, 1.0, 0.5, 1.5).is_ok());
        assert!(make_powerlaw_example(3, 1.0, 0.5, 1.0).is_err());
        assert!(make_powerlaw_example(3, 1.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn envelope_powerlaw_closed_form() {
        // k_term = 4 w^2 / rho, tail = (2w (rho^{-1/2}-1))^2 with w = 4 pi
        let m = make_powerlaw_example(3, 1.0, 0.5, 1.5).unwrap();
        let params = frac_params(0.0);
        let w = 4.0 * PI;
        for &rho in &[1e-4f64, 1e-2, 0.25] {
            let (k, t) = radial_envelope(&m, &params, rho).unwrap();
            assert_relative_eq!(k, 4.0 * w * w / rho, max_relative = 1e-10);
            let tail = 2.0 * w * (rho.powf(-0.5) - 1.0);
            assert_relative_eq!(t, tail * tail, max_relative = 1e-10);
        }
    }

    #[test]
    fn envelope_below_annulus_support() {
        let annulus = Measure::new(
            3,
            vec![RadialSegment::power(1.0, 0.0, 0.5, 1.0)],
            vec![],
        )
        .unwrap();
        let params = frac_params(0.0);
        let (k1, t1) = radial_envelope(&annulus, &params, 0.1).unwrap();
        let (k2, t2) = radial_envelope(&annulus, &params, 0.2).unwrap();
        assert_eq!(k1, 0.0);
        assert_eq!(k2, 0.0);
        assert_relative_eq!(t1, t2, max_relative = 1e-12);
    }

    #[test]
    fn envelope_requires_existence() {
        let leb = Measure::new(
            3,
            vec![RadialSegment::power(1.0, 0.0, 0.0, f64::INFINITY)],
            vec![],
        )
        .unwrap();
        let err = radial_envelope(&leb, &frac_params(0.0), 0.5).unwrap_err();
        assert!(err.to_string().contains("existence"));
    }

    #[test]
    fn radial_solve_zero_measure() {
        let grid = RadialGrid {
            radii: vec![0.5, 1.0, 2.0],
        };
        let sol = radial_solve(&Measure::zero(3), &frac_params(1.0), &grid, 1e-8, 100).unwrap();
        assert_eq!(sol.field.values, vec![1.0]);
        assert_eq!(sol.eval(0.01).unwrap(), 1.0);
    }

    #[test]
    fn radial_solve_powerlaw_matches_envelope_shape() {
        let m = make_powerlaw_example(3, 1.0, 0.5, 1.5).unwrap();
        let params = frac_params(0.0);
        let grid = RadialGrid::for_measure(&m, 48, (1e-6, 1e3)).unwrap();
        let sol = radial_solve(&m, &params, &grid, 1e-8, 500).unwrap();
        assert!(sol.field.residual < 1e-6);
        // u(rho) * rho bounded above and below on [1e-5, 1e-2]
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &rho in &[1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2] {
            let v = sol.eval(rho).unwrap() * rho;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(hi / lo < 3.0, "u * rho varied by {}", hi / lo);
        // log-log slope -1 +- 0.05 on [1e-5, 1e-3]
        let slope = {
            let r1: f64 = 1e-5;
            let r2: f64 = 1e-3;
            let u1 = sol.eval(r1).unwrap();
            let u2 = sol.eval(r2).unwrap();
            (u2.ln() - u1.ln()) / (r2.ln() - r1.ln())
        };
        assert!((slope + 1.0).abs() < 0.05, "slope {slope}");
        // sandwiched by the envelope with modest constants
        let (cl, cu) = sol.field.sandwich;
        assert!(cl * cu < 100.0, "sandwich band {} {}", cl, cu);
    }

    #[test]
    fn radial_solve_requires_existence() {
        let leb = Measure::new(
            3,
            vec![RadialSegment::power(1.0, 0.0, 0.0, f64::INFINITY)],
            vec![],
        )
        .unwrap();
        let grid = RadialGrid {
            radii: vec![0.5, 1.0],
        };
        assert!(radial_solve(&leb, &frac_params(0.0), &grid, 1e-8, 10).is_err());
    }

    #[test]
    fn study_rows_are_consistent() {
        let m = make_powerlaw_example(3, 1.0, 0.5, 1.5).unwrap();
        let params = frac_params(0.0);
        let grid = RadialGrid::for_measure(&m, 32, (1e-5, 1e2)).unwrap();
        let sol = radial_solve(&m, &params, &grid, 1e-8, 500).unwrap();
        let rows = radial_study(&m, &params, &sol, &[1e-3, 1e-2, 0.1]).unwrap();
        for row in &rows {
            assert_relative_eq!(
                row.envelope,
                row.k_term + row.tail_term,
                max_relative = 1e-12
            );
            assert!(row.u > 0.0 && row.riesz_potential > 0.0);
            assert_relative_eq!(
                row.ratio_5_2,
                1.0 / (1.0 - row.rho.sqrt()),
                max_relative = 1e-9
            );
        }
    }
}
