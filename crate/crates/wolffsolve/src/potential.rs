//! Wolff potentials `W_{a,p} sigma` and Riesz potentials `I_{2a} = W_{a,2}`.
//!
//! The potential is the `dt/t` integral of `(sigma(B(x,t)) / t^{n-ap})^{1/(p-1)}`.
//! Head (before first support contact) is identically zero, the tail beyond
//! the cover radius of a compactly supported measure is in closed form, and
//! the middle is adaptive quadrature in `log t` split at the support-contact
//! radii where the ball mass has kinks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{Measure, Point};
use crate::quad::{integrate_panels, QuadOptions};

/// Exponent bundle for the sublinear problem `u = W_{a,p}(u^q dsigma) + r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialParams {
    n: usize,
    alpha: f64,
    p: f64,
    q: f64,
    r: f64,
}

impl PotentialParams {
    pub fn new(n: usize, alpha: f64, p: f64, q: f64, r: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dimension n must be >= 1"));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::invalid("p must satisfy p > 1"));
        }
        if !(alpha > 0.0 && alpha < n as f64 / p) {
            return Err(Error::invalid(
                "alpha must lie in (0, n/p); otherwise the Wolff tail never converges",
            ));
        }
        if !(q > 0.0 && q < p - 1.0) {
            return Err(Error::invalid("q must lie in (0, p-1)"));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::invalid("boundary value r must be >= 0"));
        }
        Ok(PotentialParams { n, alpha, p, q, r })
    }

    /// Fractional/Riesz parameters: `I_{2a} = W_{a,2}` with `0 < 2a < n`.
    pub fn fractional(n: usize, two_alpha: f64, q: f64, r: f64) -> Result<Self> {
        if !(two_alpha > 0.0 && two_alpha < n as f64) {
            return Err(Error::invalid("need 0 < 2*alpha < n"));
        }
        PotentialParams::new(n, two_alpha / 2.0, 2.0, q, r)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn with_r(&self, r: f64) -> Result<Self> {
        PotentialParams::new(self.n, self.alpha, self.p, self.q, r)
    }

    /// `n - alpha p  (> 0)`.
    pub fn n_minus_alpha_p(&self) -> f64 {
        self.n as f64 - self.alpha * self.p
    }

    /// Solution-envelope exponent `gamma = (p-1)/(p-1-q)`.
    pub fn gamma(&self) -> f64 {
        (self.p - 1.0) / (self.p - 1.0 - self.q)
    }

    /// Weight exponent `beta_w = (p-1) q / (p-1-q)`.
    pub fn beta_w(&self) -> f64 {
        (self.p - 1.0) * self.q / (self.p - 1.0 - self.q)
    }

    /// Decay exponent of the potential of a point mass: `(n - alpha p)/(p-1)`.
    pub fn tail_exponent(&self) -> f64 {
        self.n_minus_alpha_p() / (self.p - 1.0)
    }

    pub fn inv_pm1(&self) -> f64 {
        1.0 / (self.p - 1.0)
    }

    /// Mass-scaling covariance of the solution at r=0: `1/(p-1-q)`.
    pub fn solution_scaling_exponent(&self) -> f64 {
        1.0 / (self.p - 1.0 - self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceReason {
    /// The global finiteness condition on `sigma(B(0,t))` growth fails.
    TailGrowth,
    /// The local density at the evaluation point is too singular.
    LocalSingularity,
}

impl std::fmt::Display for DivergenceReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DivergenceReason::TailGrowth => write!(f, "tail exponent"),
            DivergenceReason::LocalSingularity => write!(f, "local divergence"),
        }
    }
}

/// A potential evaluation with its accuracy accounting.
#[derive(Debug, Clone, Copy)]
pub struct PotentialValue {
    pub value: f64,
    pub abs_error_bound: f64,
    /// The `t`-window covered numerically; head/tail beyond it are closed form.
    pub t_window: (f64, f64),
    /// Closed-form contribution below the window (always 0: the integrand
    /// vanishes before first support contact).
    pub head: f64,
    /// Closed-form tail contribution beyond the window.
    pub tail: f64,
    pub divergence: Option<DivergenceReason>,
}

impl PotentialValue {
    pub fn zero() -> Self {
        PotentialValue {
            value: 0.0,
            abs_error_bound: 0.0,
            t_window: (0.0, 0.0),
            head: 0.0,
            tail: 0.0,
            divergence: None,
        }
    }

    pub fn infinite(reason: DivergenceReason) -> Self {
        PotentialValue {
            value: f64::INFINITY,
            abs_error_bound: f64::INFINITY,
            t_window: (0.0, 0.0),
            head: 0.0,
            tail: 0.0,
            divergence: Some(reason),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Outcome of the analytic tail-finiteness test.
#[derive(Debug, Clone)]
pub struct Finiteness {
    pub finite: bool,
    pub reason: Option<String>,
}

/// Decides `int_1^inf (sigma(B(0,t))/t^{n-ap})^{1/(p-1)} dt/t < inf`
/// from segment growth exponents alone. Exact, not numeric.
pub fn finiteness_check(m: &Measure, params: &PotentialParams) -> Finiteness {
    let ap = params.alpha * params.p;
    let pm1 = params.p - 1.0;
    for seg in m.segments() {
        if seg.r_hi.is_finite() || seg.tail_mass_finite(m.n()) {
            // bounded contribution to sigma(B(0,t)): the integrand decays
            // like t^{-(n-ap)/(p-1)-1}, convergent since n > ap
            continue;
        }
        // sigma(B(0,t)) grows like t^{n-s} L^{-beta}; the integrand behaves
        // like t^{(ap-s)/(p-1)-1} L^{-beta/(p-1)}
        if seg.s < ap {
            return Finiteness {
                finite: false,
                reason: Some(format!(
                    "tail exponent: sigma(B(0,t)) ~ t^{{{}}} makes the Wolff tail diverge",
                    m.n() as f64 - seg.s
                )),
            };
        }
        if seg.s == ap && seg.beta <= pm1 {
            return Finiteness {
                finite: false,
                reason: Some(
                    "log-divergent tail: sigma(B(0,t)) ~ t^{n-ap} up to insufficient log decay"
                        .to_string(),
                ),
            };
        }
    }
    Finiteness {
        finite: true,
        reason: None,
    }
}

/// Wolff potential `W_{a,p} sigma (x)`.
pub fn wolff(m: &Measure, params: &PotentialParams, x: &Point) -> Result<PotentialValue> {
    wolff_windowed(m, params, x, (0.0, f64::INFINITY))
}

/// Riesz potential `I_{2a} sigma (x)` of order `0 < 2a < n`, via the
/// structural identity `I_{2a} = W_{a,2}` (same code path).
pub fn riesz(m: &Measure, two_alpha: f64, x: &Point) -> Result<PotentialValue> {
    let params = PotentialParams::fractional(m.n(), two_alpha, 0.5, 0.0)?;
    wolff(m, &params, x)
}

/// Truncated Wolff potential: the `t`-integral restricted to `[t_lo, t_hi]`.
/// The full potential is the window `(0, inf)`.
pub fn wolff_windowed(
    m: &Measure,
    params: &PotentialParams,
    x: &Point,
    window: (f64, f64),
) -> Result<PotentialValue> {
    if x.dim() != m.n() || m.n() != params.n {
        return Err(Error::invalid("dimension mismatch between measure, params and point"));
    }
    let (t_lo, t_hi) = window;
    if !(t_lo >= 0.0 && t_hi > t_lo) {
        return Err(Error::invalid("invalid t-window"));
    }
    if m.is_zero() {
        return Ok(PotentialValue::zero());
    }
    if t_hi.is_infinite() {
        let fin = finiteness_check(m, params);
        if !fin.finite {
            return Ok(PotentialValue::infinite(DivergenceReason::TailGrowth));
        }
    }

    let d = x.norm();
    let ap = params.alpha * params.p;
    let pm1 = params.p - 1.0;
    if d == 0.0 && t_lo == 0.0 {
        // analytic local check: sigma(B(0,t)) ~ t^{n-s} L^{-beta} near 0
        for seg in m.segments() {
            if seg.r_lo == 0.0 && (seg.s > ap || (seg.s == ap && seg.beta <= pm1)) {
                return Ok(PotentialValue::infinite(DivergenceReason::LocalSingularity));
            }
        }
    }

    let ipm1 = params.inv_pm1();
    let delta = params.tail_exponent();
    let integrand = |v: f64| -> f64 {
        let t = v.exp();
        let bm = m.ball_mass(x, t).expect("validated inputs");
        if bm == 0.0 {
            return 0.0;
        }
        bm.powf(ipm1) * (-v * delta).exp()
    };

    let opt = QuadOptions {
        rel_tol: 3e-8,
        abs_tol: 0.0,
        max_intervals: 300,
    };

    let mut value = 0.0;
    let mut err = 0.0;

    // numeric window
    let fc = m.first_contact(x);
    let cover = m.cover_radius(x);
    let mut start = t_lo.max(fc);
    let mut end = t_hi;
    let mut tail = 0.0;
    if let Some(cov) = cover {
        if t_hi.is_infinite() {
            let t0 = cov.max(start);
            // sigma(B(x,t)) = total mass beyond the cover radius
            tail = m.total_mass().powf(ipm1) / delta * t0.powf(-delta);
            end = t0;
        }
    }

    let mut kinks: Vec<f64> = m
        .kink_radii(x)
        .into_iter()
        .filter(|k| *k > start && *k < end)
        .collect();
    if kinks.len() > 40 {
        // many-piece measures have only mild interior kinks (continuous
        // density); keep a subsample and let the adaptive driver do the rest
        let step = kinks.len() / 38 + 1;
        let last = *kinks.last().unwrap();
        let mut thin: Vec<f64> = kinks.iter().copied().step_by(step).collect();
        if *thin.last().unwrap() < last {
            thin.push(last);
        }
        kinks = thin;
    }

    if start == 0.0 {
        // x lies on the support: walk dyadic blocks down toward t = 0 until
        // the contribution is negligible, then bound the remaining head
        let b0 = kinks
            .first()
            .copied()
            .unwrap_or_else(|| if end.is_finite() { end } else { 1.0 });
        let mut hi = b0;
        let mut prev_block = f64::INFINITY;
        let mut acc = 0.0;
        let mut ratio: f64 = 0.5;
        for j in 0..48 {
            let lo = hi / 8.0;
            // later blocks only need accuracy relative to the running total
            let block_opt = QuadOptions {
                abs_tol: 1e-11 * acc,
                max_intervals: 100,
                ..opt
            };
            let block = integrate_panels(&integrand, &[lo.ln(), hi.ln()], block_opt);
            if j >= 2 && prev_block.is_finite() && block.value > 1.5 * prev_block {
                // decaying blocks turning upward means the ball-mass noise
                // floor; charge the block to the error bound and stop
                err += block.value;
                break;
            }
            acc += block.value;
            err += block.abs_error;
            if prev_block.is_finite() && prev_block > 0.0 {
                ratio = (block.value / prev_block).min(0.9);
            }
            prev_block = block.value;
            hi = lo;
            if block.value <= 1e-11 * acc.max(1e-300) {
                break;
            }
        }
        // geometric bound on the rest of the head
        err += prev_block * ratio / (1.0 - ratio);
        value += acc;
        start = b0;
        kinks.retain(|k| *k > start);
    }

    if end.is_infinite() {
        // unbounded support: expanding dyadic blocks plus a geometric bound
        let t0 = kinks.last().copied().unwrap_or(start.max(1.0)).max(start);
        let mut panel_breaks: Vec<f64> = Vec::new();
        panel_breaks.push(start.ln());
        for k in &kinks {
            panel_breaks.push(k.ln());
        }
        if t0 > start {
            panel_breaks.push(t0.ln());
        }
        panel_breaks.dedup_by(|b, a| *b <= *a + 1e-12);
        if panel_breaks.len() >= 2 {
            let mid = integrate_panels(&integrand, &panel_breaks, opt);
            value += mid.value;
            err += mid.abs_error;
        }
        let mut lo = t0;
        let mut prev_block = f64::INFINITY;
        let mut acc = 0.0;
        let mut ratio: f64 = 0.5;
        for _ in 0..60 {
            let hi2 = lo * 2.0;
            let block_opt = QuadOptions {
                abs_tol: 1e-11 * (acc + value.abs()),
                max_intervals: 100,
                ..opt
            };
            let block = integrate_panels(&integrand, &[lo.ln(), hi2.ln()], block_opt);
            acc += block.value;
            err += block.abs_error;
            if prev_block.is_finite() && prev_block > 0.0 {
                ratio = (block.value / prev_block).min(0.9);
            }
            prev_block = block.value;
            lo = hi2;
            if block.value <= 1e-10 * acc.max(1e-300) && acc > 0.0 {
                break;
            }
        }
        err += prev_block * ratio / (1.0 - ratio);
        value += acc;
        return Ok(PotentialValue {
            value,
            abs_error_bound: err,
            t_window: (start, lo),
            head: 0.0,
            tail: 0.0,
            divergence: None,
        });
    }

    if end > start {
        let mut panel_breaks: Vec<f64> = Vec::with_capacity(kinks.len() + 2);
        panel_breaks.push(start.ln());
        for k in &kinks {
            panel_breaks.push(k.ln());
        }
        panel_breaks.push(end.ln());
        panel_breaks.dedup_by(|b, a| *b <= *a + 1e-12);
        if panel_breaks.len() >= 2 {
            let mid = integrate_panels(&integrand, &panel_breaks, opt);
            value += mid.value;
            err += mid.abs_error;
        }
    }

    value += tail;
    Ok(PotentialValue {
        value,
        abs_error_bound: err,
        t_window: (start, end),
        head: 0.0,
        tail,
        divergence: None,
    })
}

/// Piecewise power function in log-log coordinates: the interpolation family
/// for potentials and iterates on radial grids.
#[derive(Debug, Clone)]
pub struct RadialPowerFit {
    ln_r: Vec<f64>,
    ln_w: Vec<f64>,
}

impl RadialPowerFit {
    pub fn from_samples(radii: &[f64], values: &[f64]) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 2 {
            return Err(Error::invalid("power fit needs >= 2 matching samples"));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("power fit radii must be strictly increasing"));
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("power fit values must be positive and finite"));
        }
        Ok(RadialPowerFit {
            ln_r: radii.iter().map(|r| r.ln()).collect(),
            ln_w: values.iter().map(|v| v.ln()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.ln_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_r.is_empty()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.ln_r.iter().map(|l| l.exp()).collect()
    }

    fn segment_slope(&self, i: usize) -> f64 {
        (self.ln_w[i + 1] - self.ln_w[i]) / (self.ln_r[i + 1] - self.ln_r[i])
    }

    pub fn ln_value(&self, ln_rho: f64) -> f64 {
        let n = self.ln_r.len();
        let i = match self
            .ln_r
            .binary_search_by(|v| v.partial_cmp(&ln_rho).unwrap())
        {
            Ok(i) => return self.ln_w[i],
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        self.ln_w[i] + self.segment_slope(i) * (ln_rho - self.ln_r[i])
    }

    pub fn value(&self, rho: f64) -> f64 {
        self.ln_value(rho.ln()).exp()
    }

    /// Raise the fitted function to a power (exact on the fit family).
    pub fn pow(&self, e: f64) -> RadialPowerFit {
        RadialPowerFit {
            ln_r: self.ln_r.clone(),
            ln_w: self.ln_w.iter().map(|w| w * e).collect(),
        }
    }
}

/// Realize `w(|y|)^exponent dsigma` as a `Measure`: each radial segment is
/// split at the fit knots into power-log pieces, each atom is scaled by the
/// weight at its center.
///
/// Below the deepest knot the fit extrapolates with its edge slope; if that
/// extrapolation would make the bottom piece locally infinite at the origin
/// the slope is clamped to the integrable limit. For a power-family base
/// (`beta <= 1`) that clamp means the weighted measure genuinely has
/// infinite mass near the origin, so the returned flag reports it.
pub fn apply_radial_weight(
    m: &Measure,
    fit: &RadialPowerFit,
    atom_weights: &[f64],
    exponent: f64,
) -> Result<(Measure, bool)> {
    if atom_weights.len() != m.atoms().len() {
        return Err(Error::invalid("atom weight count mismatch"));
    }
    if exponent == 0.0 {
        return Ok((m.clone(), false));
    }
    let n = m.n();
    let mut diverges_at_origin = false;
    let mut segments = Vec::new();
    let knots = &fit.ln_r;
    for seg in m.segments() {
        let lo = seg.r_lo.max(1e-300).ln();
        let hi = seg.r_hi.ln(); // may be inf
        // knot interval indices overlapping [lo, hi]
        let mut cut_points: Vec<f64> = Vec::new();
        cut_points.push(lo);
        for k in knots {
            if *k > lo && *k < hi {
                cut_points.push(*k);
            }
        }
        cut_points.push(hi);
        for w in cut_points.windows(2) {
            let (la, lb) = (w[0], w[1]);
            if lb <= la {
                continue;
            }
            let lmid = if lb.is_infinite() { la + 1.0 } else { 0.5 * (la + lb) };
            // local power representation of the weight around lmid
            let (i, slope) = fit_local(fit, lmid);
            let mut s_new = seg.s - slope * exponent;
            let mut ln_c_new =
                seg.c.ln() + exponent * (fit.ln_w[i] - fit.segment_slope_pub(i) * fit.ln_r[i]);
            // clamp a divergent extrapolated bottom piece (below deepest knot)
            let piece_r_lo = if la <= seg.r_lo.max(1e-300).ln() { seg.r_lo } else { la.exp() };
            if piece_r_lo == 0.0 {
                let u = n as f64 - 1.0 - s_new;
                let s_max = if seg.beta > 1.0 { n as f64 } else { n as f64 - 1e-6 };
                if crate::powerlog::diverges_at_zero(u, seg.beta) && s_new > s_max {
                    // keep the density value at the piece's upper end
                    ln_c_new += (s_max - s_new) * lb;
                    s_new = s_max;
                    if seg.beta <= 1.0 {
                        diverges_at_origin = true;
                    }
                }
            }
            segments.push(crate::measure::RadialSegment {
                c: ln_c_new.exp(),
                s: s_new,
                beta: seg.beta,
                r_lo: piece_r_lo,
                r_hi: if lb.is_infinite() { f64::INFINITY } else { lb.exp() },
                log_scale: seg.log_scale,
            });
        }
    }
    let mut atoms = Vec::new();
    for (atom, w) in m.atoms().iter().zip(atom_weights) {
        if !w.is_finite() && exponent > 0.0 {
            return Err(Error::Unsupported(
                "base potential is infinite on an atom of positive mass".to_string(),
            ));
        }
        let mass = atom.mass * w.powf(exponent);
        if !(mass.is_finite() && mass > 0.0) {
            if mass == 0.0 {
                continue;
            }
            return Err(Error::invalid("weighted atom mass is not finite"));
        }
        atoms.push(crate::measure::MollifiedAtom {
            center: atom.center.clone(),
            mass,
            radius: atom.radius,
        });
    }
    Ok((Measure::new(n, segments, atoms)?, diverges_at_origin))
}

fn fit_local(fit: &RadialPowerFit, ln_rho: f64) -> (usize, f64) {
    let n = fit.ln_r.len();
    let i = match fit
        .ln_r
        .binary_search_by(|v| v.partial_cmp(&ln_rho).unwrap())
    {
        Ok(i) => i.min(n - 2),
        Err(0) => 0,
        Err(j) if j >= n => n - 2,
        Err(j) => j - 1,
    };
    (i, fit.segment_slope_pub(i))
}

impl RadialPowerFit {
    fn segment_slope_pub(&self, i: usize) -> f64 {
        self.segment_slope(i)
    }
}

/// The base-potential table behind `weighted_wolff`: `W_{a,p} sigma` sampled
/// on a log knot grid over the support (radial part) and at atom centers.
#[derive(Debug, Clone)]
pub struct BasePotential {
    pub params: PotentialParams,
    radial_fit: Option<RadialPowerFit>,
    pub atom_values: Vec<f64>,
    pub fit_rel_err: f64,
    infinite: bool,
}

impl BasePotential {
    /// Build the table with `knots_per_decade` knots (64 is the default used
    /// by `weighted_wolff`). `deep_to` optionally extends the knot range down
    /// to cover probes far below the support scale.
    pub fn build(
        m: &Measure,
        params: &PotentialParams,
        knots_per_decade: usize,
        deep_to: Option<f64>,
    ) -> Result<Self> {
        if m.n() != params.n {
            return Err(Error::invalid("measure/params dimension mismatch"));
        }
        if !finiteness_check(m, params).finite {
            return Ok(BasePotential {
                params: *params,
                radial_fit: None,
                atom_values: vec![f64::INFINITY; m.atoms().len()],
                fit_rel_err: 0.0,
                infinite: true,
            });
        }
        if !m.is_radial() && !m.segments().is_empty() {
            return Err(Error::unsupported(
                "base-potential table for mixed segment + off-center atom measures",
            ));
        }
        let atom_values: Vec<f64> = m
            .atoms()
            .par_iter()
            .map(|a| wolff(m, params, &a.center).map(|v| v.value))
            .collect::<Result<Vec<_>>>()?;
        let radial_fit = if m.segments().is_empty() {
            None
        } else {
            let (lo_s, hi_raw) = m.radial_support_range().expect("segments present");
            let hi_s = if hi_raw.is_finite() {
                hi_raw
            } else {
                lo_s.max(1e-3) * 1e12
            };
            let mut lo = lo_s.max(hi_s * 1e-7);
            if let Some(deep) = deep_to {
                lo = lo.min(deep.max(lo_s.max(1e-300))).max(1e-300);
            }
            let decades = (hi_s / lo).log10().max(0.1);
            let count = ((decades * knots_per_decade as f64).ceil() as usize + 1).max(8);
            let radii: Vec<f64> = (0..count)
                .map(|i| lo * (hi_s / lo).powf(i as f64 / (count - 1) as f64))
                .collect();
            let values: Vec<f64> = radii
                .par_iter()
                .map(|rho| wolff(m, params, &Point::radial(m.n(), *rho)).map(|v| v.value))
                .collect::<Result<Vec<_>>>()?;
            if values.iter().any(|v| !v.is_finite()) {
                return Ok(BasePotential {
                    params: *params,
                    radial_fit: None,
                    atom_values,
                    fit_rel_err: 0.0,
                    infinite: true,
                });
            }
            Some(RadialPowerFit::from_samples(&radii, &values)?)
        };
        // midpoint fit-error diagnostic on a subsample
        let mut fit_rel_err = 0.0f64;
        if let Some(fit) = &radial_fit {
            let radii = fit.radii();
            let mids: Vec<f64> = radii
                .windows(2)
                .step_by(8)
                .map(|w| (w[0] * w[1]).sqrt())
                .collect();
            let errs: Vec<f64> = mids
                .par_iter()
                .map(|rho| {
                    let truth = wolff(m, params, &Point::radial(m.n(), *rho))
                        .map(|v| v.value)
                        .unwrap_or(f64::NAN);
                    let approx = fit.value(*rho);
                    ((truth - approx) / truth).abs()
                })
                .collect();
            fit_rel_err = errs.into_iter().fold(0.0, f64::max);
        }
        Ok(BasePotential {
            params: *params,
            radial_fit,
            atom_values,
            fit_rel_err,
            infinite: false,
        })
    }

    pub fn is_infinite(&self) -> bool {
        self.infinite
    }

    pub fn radial_fit(&self) -> Option<&RadialPowerFit> {
        self.radial_fit.as_ref()
    }

    /// The fitted `W_{a,p} sigma (rho)` (radial measures).
    pub fn base_value(&self, rho: f64) -> f64 {
        match &self.radial_fit {
            Some(fit) => fit.value(rho),
            None => f64::NAN,
        }
    }

    /// Realize `(W_{a,p} sigma)^exponent dsigma`. The flag reports a
    /// genuinely divergent origin mass of the weighted measure.
    pub fn weighted_measure(&self, m: &Measure, exponent: f64) -> Result<(Measure, bool)> {
        if self.infinite {
            return Err(Error::Unsupported(
                "base potential is identically infinite".to_string(),
            ));
        }
        match &self.radial_fit {
            Some(fit) => apply_radial_weight(m, fit, &self.atom_values, exponent),
            None => {
                let unit = RadialPowerFit::from_samples(&[0.5, 2.0], &[1.0, 1.0])?;
                apply_radial_weight(m, &unit, &self.atom_values, exponent)
            }
        }
    }

    /// `W_{a,p}((W_{a,p} sigma)^exponent dsigma)(x)`.
    pub fn weighted_wolff(
        &self,
        m: &Measure,
        exponent: f64,
        x: &Point,
    ) -> Result<PotentialValue> {
        if exponent == 0.0 {
            // identity weight: exactly the base potential
            return wolff(m, &self.params, x);
        }
        if self.infinite {
            return Ok(PotentialValue::infinite(DivergenceReason::TailGrowth));
        }
        if exponent > 0.0 && self.atom_values.iter().any(|w| !w.is_finite()) {
            // the base potential is infinite on an atom of positive mass
            return Ok(PotentialValue::infinite(DivergenceReason::LocalSingularity));
        }
        let (derived, diverges) = self.weighted_measure(m, exponent)?;
        if diverges {
            // infinite mass concentrates at the origin; the potential is
            // infinite wherever a ball reaches it
            return Ok(PotentialValue::infinite(DivergenceReason::LocalSingularity));
        }
        let mut out = wolff(&derived, &self.params, x)?;
        if out.is_finite() {
            // propagate the fit error through the weight power and the 1/(p-1) root
            let amp = (1.0 + self.fit_rel_err).powf(exponent.abs() * self.params.inv_pm1().max(1.0))
                - 1.0;
            out.abs_error_bound += out.value * amp;
        }
        Ok(out)
    }
}

/// One-shot `W_{a,p}((W_{a,p} sigma)^{weight_exponent} dsigma)(x)`;
/// builds the base-potential table internally with default knock density.
pub fn weighted_wolff(
    m: &Measure,
    params: &PotentialParams,
    weight_exponent: f64,
    x: &Point,
) -> Result<PotentialValue> {
    let table = BasePotential::build(m, params, 64, None)?;
    table.weighted_wolff(m, weight_exponent, x)
}
