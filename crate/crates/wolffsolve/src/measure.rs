//! Nonnegative measures with exactly computable ball masses.
//!
//! A [`Measure`] is a finite sum of origin-centered radial power-log density
//! segments and mollified atoms (point masses spread uniformly over a small
//! ball). Every potential in this crate is computed through the single
//! interface `t -> sigma(B(x, t))`, so each component only has to expose its
//! mass inside a ball.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::powerlog::{self, log_edge, log_term, powerlog_integral};
use crate::quad::{integrate_panels, QuadOptions};
use crate::special::{ball_ball_intersection_volume, unit_ball_volume, unit_sphere_area};

/// A point of `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Point { coords })
    }

    pub fn origin(n: usize) -> Self {
        Point {
            coords: vec![0.0; n],
        }
    }

    /// The point `(r, 0, ..., 0)`.
    pub fn radial(n: usize, r: f64) -> Self {
        let mut coords = vec![0.0; n];
        coords[0] = r;
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn translated(&self, shift: &[f64]) -> Result<Point> {
        if shift.len() != self.coords.len() {
            return Err(Error::invalid("shift dimension mismatch"));
        }
        Point::new(
            self.coords
                .iter()
                .zip(shift)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

/// Radial density `f(rho) = c * rho^{-s} * L(rho)^{-beta}` on `(r_lo, r_hi)`,
/// with `L(rho) = |log(e * log_scale / rho)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSegment {
    pub c: f64,
    pub s: f64,
    pub beta: f64,
    pub r_lo: f64,
    #[serde(with = "radius_end")]
    pub r_hi: f64,
    pub log_scale: f64,
}

impl RadialSegment {
    /// Power-law segment (no log factor) on `(r_lo, r_hi)`.
    pub fn power(c: f64, s: f64, r_lo: f64, r_hi: f64) -> Self {
        RadialSegment {
            c,
            s,
            beta: 0.0,
            r_lo,
            r_hi,
            log_scale: 1.0,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid("segment coefficient c must be positive and finite"));
        }
        if !self.s.is_finite() || !self.beta.is_finite() {
            return Err(Error::invalid("segment exponents must be finite"));
        }
        if !(self.log_scale > 0.0 && self.log_scale.is_finite()) {
            return Err(Error::invalid("segment log_scale must be positive and finite"));
        }
        if !(self.r_lo >= 0.0 && self.r_lo.is_finite() && self.r_hi > self.r_lo) {
            return Err(Error::invalid("segment radii must satisfy 0 <= r_lo < r_hi"));
        }
        if self.beta != 0.0 {
            let edge = log_edge(self.log_scale);
            if !(self.r_hi <= edge || self.r_lo >= edge) {
                return Err(Error::invalid(
                    "segment with beta != 0 must not straddle the log edge e*log_scale",
                ));
            }
            if self.beta >= 1.0 && (self.r_hi == edge || self.r_lo == edge) {
                return Err(Error::invalid(
                    "segment touching the log edge with beta >= 1 has infinite local mass",
                ));
            }
        }
        if self.r_lo == 0.0 {
            // local finiteness at the origin
            let u = n as f64 - 1.0 - self.s;
            if powerlog::diverges_at_zero(u, self.beta) {
                return Err(Error::invalid(
                    "segment reaching 0 must have s < n (or s = n with beta > 1) for locally finite mass",
                ));
            }
        }
        Ok(())
    }

    pub fn density(&self, rho: f64) -> f64 {
        if rho <= self.r_lo || rho >= self.r_hi {
            return 0.0;
        }
        let mut d = self.c * rho.powf(-self.s);
        if self.beta != 0.0 {
            d *= log_term(rho, self.log_scale).powf(-self.beta);
        }
        d
    }

    /// Is the total mass of an infinite segment over `(1, inf)` finite?
    pub fn tail_mass_finite(&self, n: usize) -> bool {
        if self.r_hi.is_finite() {
            return true;
        }
        let u = n as f64 - 1.0 - self.s;
        !powerlog::diverges_at_infinity(u, self.beta)
    }

    /// `int_{a < |y| < b} |y|^{-e} dsigma_seg = omega_{n-1} c int tau^{n-1-s-e} L^{-beta} dtau`,
    /// clipped to the segment interval. Returns `+inf` exactly when the
    /// integral diverges (decided analytically).
    pub fn weighted_mass(&self, n: usize, a: f64, b: f64, e: f64) -> f64 {
        let lo = a.max(self.r_lo);
        let hi = b.min(self.r_hi);
        if lo >= hi {
            return 0.0;
        }
        let u = n as f64 - 1.0 - self.s - e;
        if lo == 0.0 && powerlog::diverges_at_zero(u, self.beta) {
            return f64::INFINITY;
        }
        if hi.is_infinite() && powerlog::diverges_at_infinity(u, self.beta) {
            return f64::INFINITY;
        }
        unit_sphere_area(n) * self.c * powerlog_integral(u, self.beta, self.log_scale, lo, hi)
    }

    pub fn mass(&self, n: usize, a: f64, b: f64) -> f64 {
        self.weighted_mass(n, a, b, 0.0)
    }
}

/// A point mass of total `mass` spread uniformly over the closed ball
/// `B(center, radius)`. Atoms proper admit no solutions (they are singular
/// with respect to capacity), so this is the non-atomic stand-in.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedAtom {
    pub center: Point,
    pub mass: f64,
    pub radius: f64,
}

impl MollifiedAtom {
    fn validate(&self, n: usize) -> Result<()> {
        if self.center.dim() != n {
            return Err(Error::invalid("atom center dimension mismatch"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid("atom mass must be positive and finite"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid("atom radius must be positive and finite"));
        }
        Ok(())
    }

    /// Mass inside `B(x, t)`: mass times the volume fraction of the
    /// mollifier ball covered.
    pub fn ball_mass(&self, n: usize, x: &Point, t: f64) -> f64 {
        let d = self.center.distance(x);
        let vol = ball_ball_intersection_volume(n, d, self.radius, t);
        self.mass * vol / (unit_ball_volume(n) * self.radius.powi(n as i32))
    }
}

/// Prefix-sum index over the segment boundaries: cumulative masses and the
/// segments covering each boundary interval. Built lazily, once per measure;
/// it turns ball-mass queries over many-piece measures (the reweighted
/// measures of the solver sweeps) into `O(log n)` lookups.
#[derive(Debug)]
struct MassIndex {
    /// sorted distinct segment boundaries (may end with `inf`)
    bounds: Vec<f64>,
    /// cumulative segment mass strictly below `bounds[i]`
    prefix: Vec<f64>,
    /// segment indices covering the interval `(bounds[i], bounds[i+1])`
    cover: Vec<Vec<usize>>,
}

impl MassIndex {
    fn build(n: usize, segments: &[RadialSegment]) -> Self {
        let mut bounds: Vec<f64> = Vec::with_capacity(2 * segments.len());
        for seg in segments {
            bounds.push(seg.r_lo);
            bounds.push(seg.r_hi);
        }
        bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bounds.dedup();
        let mut cover = Vec::with_capacity(bounds.len().saturating_sub(1));
        let mut prefix = Vec::with_capacity(bounds.len());
        prefix.push(0.0);
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1]);
            let covering: Vec<usize> = segments
                .iter()
                .enumerate()
                .filter(|(_, s)| s.r_lo <= a && s.r_hi >= b)
                .map(|(i, _)| i)
                .collect();
            let mass: f64 = covering
                .iter()
                .map(|i| segments[*i].mass(n, a, b))
                .sum();
            prefix.push(prefix.last().unwrap() + mass);
            cover.push(covering);
        }
        MassIndex {
            bounds,
            prefix,
            cover,
        }
    }

    fn interval_of(&self, rho: f64) -> Option<usize> {
        if self.bounds.len() < 2 || rho <= self.bounds[0] || rho >= *self.bounds.last().unwrap() {
            return None;
        }
        // bounds[i-1] <= rho < bounds[i]
        Some(self.bounds.partition_point(|b| *b <= rho) - 1)
    }

    /// Total segment mass strictly inside `(0, rho)`.
    fn cumulative(&self, n: usize, segments: &[RadialSegment], rho: f64) -> f64 {
        if self.bounds.is_empty() || rho <= self.bounds[0] {
            return 0.0;
        }
        if rho >= *self.bounds.last().unwrap() {
            return *self.prefix.last().unwrap();
        }
        match self.interval_of(rho) {
            Some(i) => {
                let partial: f64 = self.cover[i]
                    .iter()
                    .map(|j| segments[*j].mass(n, self.bounds[i], rho))
                    .sum();
                self.prefix[i] + partial
            }
            None => *self.prefix.last().unwrap(),
        }
    }

    /// Combined density at `rho` of all covering segments.
    fn density(&self, segments: &[RadialSegment], rho: f64) -> f64 {
        match self.interval_of(rho) {
            Some(i) => self.cover[i]
                .iter()
                .map(|j| segments[*j].density(rho))
                .sum(),
            None => 0.0,
        }
    }

    /// Boundaries strictly inside `(lo, hi)`.
    fn boundaries_between(&self, lo: f64, hi: f64) -> &[f64] {
        let a = self.bounds.partition_point(|b| *b <= lo);
        let b = self.bounds.partition_point(|b| *b < hi);
        &self.bounds[a..b]
    }
}

/// A nonnegative locally finite measure: radial power-log segments plus
/// mollified atoms.
#[derive(Debug)]
pub struct Measure {
    n: usize,
    segments: Vec<RadialSegment>,
    atoms: Vec<MollifiedAtom>,
    index: std::sync::OnceLock<MassIndex>,
}

impl Clone for Measure {
    fn clone(&self) -> Self {
        Measure {
            n: self.n,
            segments: self.segments.clone(),
            atoms: self.atoms.clone(),
            index: std::sync::OnceLock::new(),
        }
    }
}

impl PartialEq for Measure {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.segments == other.segments && self.atoms == other.atoms
    }
}

impl Measure {
    pub fn new(n: usize, segments: Vec<RadialSegment>, atoms: Vec<MollifiedAtom>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dimension n must be >= 1"));
        }
        for seg in &segments {
            seg.validate(n)?;
        }
        for atom in &atoms {
            atom.validate(n)?;
        }
        Ok(Measure {
            n,
            segments,
            atoms,
            index: std::sync::OnceLock::new(),
        })
    }

    pub fn zero(n: usize) -> Self {
        Measure {
            n,
            segments: Vec::new(),
            atoms: Vec::new(),
            index: std::sync::OnceLock::new(),
        }
    }

    fn mass_index(&self) -> &MassIndex {
        self.index
            .get_or_init(|| MassIndex::build(self.n, &self.segments))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn segments(&self) -> &[RadialSegment] {
        &self.segments
    }

    pub fn atoms(&self) -> &[MollifiedAtom] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.segments.is_empty() && self.atoms.is_empty()
    }

    /// Purely radial: every atom sits at the origin.
    pub fn is_radial(&self) -> bool {
        self.atoms.iter().all(|a| a.center.norm() == 0.0)
    }

    /// `sigma(B(x, t))` for the open ball of radius `t` about `x`.
    ///
    /// Radial segments are integrated shell by shell against the spherical
    /// cap fraction; atoms use the exact ball-ball intersection volume.
    pub fn ball_mass(&self, x: &Point, t: f64) -> Result<f64> {
        if x.dim() != self.n {
            return Err(Error::invalid(format!(
                "probe point has dimension {}, measure has {}",
                x.dim(),
                self.n
            )));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid("ball radius t must be positive and finite"));
        }
        let mut total = 0.0;
        for atom in &self.atoms {
            total += atom.ball_mass(self.n, x, t);
        }
        total += self.segments_ball_mass(x.norm(), t);
        debug_assert!(!total.is_nan());
        Ok(total)
    }

    /// Segment contribution to `sigma(B(x, t))` for `|x| = d`: shells fully
    /// inside the ball from the prefix index, partially covered shells by one
    /// quadrature of `density x cap fraction` over the contact window.
    fn segments_ball_mass(&self, d: f64, t: f64) -> f64 {
        if self.segments.is_empty() {
            return 0.0;
        }
        let n = self.n;
        let idx = self.mass_index();
        if d == 0.0 {
            return idx.cumulative(n, &self.segments, t);
        }
        let sup_lo = idx.bounds[0];
        let sup_hi = *idx.bounds.last().unwrap();
        if t >= d + sup_hi {
            return *idx.prefix.last().unwrap();
        }
        let mut total = 0.0;
        // shells entirely inside B(x, t)
        if t > d {
            total += idx.cumulative(n, &self.segments, t - d);
        }
        // partially covered shells: rho in (|d - t|, d + t)
        let lo = sup_lo.max((d - t).abs());
        let hi = sup_hi.min(d + t);
        if lo < hi {
            // keep the log-coordinate window away from rho = 0 (t = d makes
            // the lower edge collapse); the cap fraction is constant to
            // O(rho) there, so the sub-floor shells sum in closed form
            let lo_eff = lo.max(hi * 1e-14);
            if lo < lo_eff {
                let frac = crate::special::sphere_in_ball_fraction(n, lo_eff, d, t);
                let below = idx.cumulative(n, &self.segments, lo_eff)
                    - idx.cumulative(n, &self.segments, lo);
                total += frac * below;
            }
            let omega = unit_sphere_area(n);
            let nf = n as f64;
            let f = |v: f64| {
                let rho = v.exp();
                let frac = crate::special::sphere_in_ball_fraction(n, rho, d, t);
                if frac == 0.0 {
                    return 0.0;
                }
                omega * idx.density(&self.segments, rho) * rho.powf(nf) * frac
            };
            let (la, lb) = (lo_eff.ln(), hi.ln());
            // panels aligned with the density pieces: per panel the integrand
            // is smooth, so the Kronrod rule is essentially exact and the
            // adaptive driver only polishes the window edges
            let mut breaks: Vec<f64> = Vec::with_capacity(18);
            breaks.push(la);
            let interior = idx.boundaries_between(lo_eff, hi);
            for b in interior {
                breaks.push(b.ln());
            }
            breaks.push(lb);
            breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            breaks.dedup_by(|b, a| *b <= *a + 1e-14);
            if breaks.len() < 2 {
                return total;
            }
            if breaks.len() == 2 {
                let span_panels = (((lb - la) / 0.7).ceil() as usize).clamp(1, 12);
                for k in 1..span_panels {
                    breaks.insert(k, la + (lb - la) * k as f64 / span_panels as f64);
                }
            }
            let opt = QuadOptions {
                rel_tol: 3e-9,
                abs_tol: 0.0,
                max_intervals: breaks.len() + 28,
            };
            total += integrate_panels(f, &breaks, opt).value;
        }
        total
    }

    /// `sigma(B(0, rho))`.
    pub fn cumulative_mass(&self, rho: f64) -> f64 {
        let mut total = self
            .mass_index()
            .cumulative(self.n, &self.segments, rho);
        for atom in &self.atoms {
            let d = atom.center.norm();
            if d == 0.0 {
                let frac = (rho / atom.radius).min(1.0).powi(self.n as i32);
                total += atom.mass * frac;
            } else {
                total += atom.ball_mass(self.n, &Point::origin(self.n), rho);
            }
        }
        total
    }

    /// Total mass; `+inf` for measures with divergent tails.
    pub fn total_mass(&self) -> f64 {
        let mut total = 0.0;
        for seg in &self.segments {
            total += seg.mass(self.n, 0.0, f64::INFINITY);
        }
        for atom in &self.atoms {
            total += atom.mass;
        }
        total
    }

    /// `int_{|y| < rho} |y|^{-e} dsigma`, exact or to quadrature accuracy;
    /// `+inf` exactly when the integral diverges at 0.
    pub fn radial_moment_below(&self, rho: f64, e: f64) -> Result<f64> {
        self.require_radial()?;
        if !(rho > 0.0) {
            return Err(Error::invalid("moment radius must be positive"));
        }
        let mut total = 0.0;
        for seg in &self.segments {
            total += seg.weighted_mass(self.n, 0.0, rho, e);
        }
        for atom in &self.atoms {
            total += self.origin_atom_moment(atom, 0.0, rho, e);
        }
        Ok(total)
    }

    /// `int_{|y| >= rho} |y|^{-e} dsigma`; `+inf` exactly when the tail diverges.
    pub fn radial_moment_above(&self, rho: f64, e: f64) -> Result<f64> {
        self.require_radial()?;
        if !(rho > 0.0) {
            return Err(Error::invalid("moment radius must be positive"));
        }
        let mut total = 0.0;
        for seg in &self.segments {
            total += seg.weighted_mass(self.n, rho, f64::INFINITY, e);
        }
        for atom in &self.atoms {
            total += self.origin_atom_moment(atom, rho, f64::INFINITY, e);
        }
        Ok(total)
    }

    fn origin_atom_moment(&self, atom: &MollifiedAtom, a: f64, b: f64, e: f64) -> f64 {
        let n = self.n;
        let lo = a;
        let hi = b.min(atom.radius);
        if lo >= hi {
            return 0.0;
        }
        let u = n as f64 - 1.0 - e;
        if lo == 0.0 && powerlog::diverges_at_zero(u, 0.0) {
            return f64::INFINITY;
        }
        let density = atom.mass / (unit_ball_volume(n) * atom.radius.powi(n as i32));
        density * unit_sphere_area(n) * powerlog_integral(u, 0.0, 1.0, lo, hi)
    }

    fn require_radial(&self) -> Result<()> {
        if !self.is_radial() {
            return Err(Error::unsupported(
                "radial moment of a measure with off-center atoms",
            ));
        }
        Ok(())
    }

    /// Scale the measure: `lambda * sigma`.
    pub fn scaled(&self, lambda: f64) -> Result<Measure> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("scale factor must be positive and finite"));
        }
        let segments = self
            .segments
            .iter()
            .map(|s| RadialSegment {
                c: s.c * lambda,
                ..s.clone()
            })
            .collect();
        let atoms = self
            .atoms
            .iter()
            .map(|a| MollifiedAtom {
                mass: a.mass * lambda,
                ..a.clone()
            })
            .collect();
        Measure::new(self.n, segments, atoms)
    }

    /// Translate an atomic measure by `shift`. Radial segments are pinned to
    /// the origin, so measures with segments cannot be translated.
    pub fn translated(&self, shift: &[f64]) -> Result<Measure> {
        if !self.segments.is_empty() {
            return Err(Error::unsupported("translating a measure with radial segments"));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                Ok(MollifiedAtom {
                    center: a.center.translated(shift)?,
                    mass: a.mass,
                    radius: a.radius,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Measure::new(self.n, self.segments.clone(), atoms)
    }

    /// Restriction to the origin ball `B(0, radius)`. Segments are clipped to
    /// radial sub-intervals; atoms are kept, dropped, or (straddling the
    /// boundary) kept with their mass scaled to the covered fraction, which
    /// is recorded as an approximation note.
    pub fn restrict_to_origin_ball(&self, radius: f64) -> Result<(Measure, Vec<String>)> {
        self.restrict_to_ball(&Point::origin(self.n), radius)
    }

    /// Restriction to `B(center, radius)`. For off-center balls only atomic
    /// components are supported.
    pub fn restrict_to_ball(&self, center: &Point, radius: f64) -> Result<(Measure, Vec<String>)> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("restriction radius must be positive and finite"));
        }
        let origin_centered = center.norm() == 0.0;
        if !origin_centered && !self.segments.is_empty() {
            return Err(Error::unsupported(
                "restricting radial segments to an off-center ball",
            ));
        }
        let mut notes = Vec::new();
        let mut segments = Vec::new();
        for seg in &self.segments {
            if seg.r_lo >= radius {
                continue;
            }
            let mut clipped = seg.clone();
            clipped.r_hi = clipped.r_hi.min(radius);
            segments.push(clipped);
        }
        let mut atoms = Vec::new();
        for atom in &self.atoms {
            let d = atom.center.distance(center);
            if d + atom.radius <= radius {
                atoms.push(atom.clone());
            } else if d - atom.radius >= radius {
                // fully outside
            } else {
                let covered = ball_ball_intersection_volume(self.n, d, atom.radius, radius)
                    / (unit_ball_volume(self.n) * atom.radius.powi(self.n as i32));
                if covered > 0.0 {
                    notes.push(format!(
                        "atom at distance {d:.6} straddles the probe boundary; kept with mass scaled by {covered:.6}"
                    ));
                    atoms.push(MollifiedAtom {
                        center: atom.center.clone(),
                        mass: atom.mass * covered,
                        radius: atom.radius,
                    });
                }
            }
        }
        Ok((Measure::new(self.n, segments, atoms)?, notes))
    }

    /// Distance from `x` to the support (0 if `x` is on the support).
    pub fn first_contact(&self, x: &Point) -> f64 {
        let d = x.norm();
        let mut fc = f64::INFINITY;
        for seg in &self.segments {
            let dist = if d < seg.r_lo {
                seg.r_lo - d
            } else if d > seg.r_hi {
                d - seg.r_hi
            } else {
                0.0
            };
            fc = fc.min(dist);
        }
        for atom in &self.atoms {
            fc = fc.min((atom.center.distance(x) - atom.radius).max(0.0));
        }
        if fc.is_infinite() {
            0.0
        } else {
            fc
        }
    }

    /// Radius beyond which `B(x, t)` covers the whole support
    /// (`None` for unbounded supports).
    pub fn cover_radius(&self, x: &Point) -> Option<f64> {
        let d = x.norm();
        let mut cover = 0.0f64;
        for seg in &self.segments {
            if seg.r_hi.is_infinite() {
                return None;
            }
            cover = cover.max(d + seg.r_hi);
        }
        for atom in &self.atoms {
            cover = cover.max(atom.center.distance(x) + atom.radius);
        }
        Some(cover)
    }

    /// Radii where `t -> sigma(B(x, t))` has kinks (support contacts).
    pub fn kink_radii(&self, x: &Point) -> Vec<f64> {
        let d = x.norm();
        let mut ks = Vec::new();
        for seg in &self.segments {
            for r in [seg.r_lo, seg.r_hi] {
                if r.is_finite() {
                    ks.push((d - r).abs());
                    ks.push(d + r);
                }
            }
        }
        for atom in &self.atoms {
            let da = atom.center.distance(x);
            ks.push((da - atom.radius).abs());
            ks.push(da + atom.radius);
        }
        ks.retain(|k| *k > 0.0 && k.is_finite());
        ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // merge kinks that are relatively indistinguishable
        ks.dedup_by(|b, a| *b <= *a * (1.0 + 1e-9));
        ks
    }

    /// Radial extent of the support as seen from the origin:
    /// smallest and largest support radius.
    pub fn radial_support_range(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for seg in &self.segments {
            lo = lo.min(seg.r_lo);
            hi = hi.max(seg.r_hi);
        }
        for atom in &self.atoms {
            let d = atom.center.norm();
            lo = lo.min((d - atom.radius).max(0.0));
            hi = hi.max(d + atom.radius);
        }
        if hi == 0.0 {
            None
        } else {
            Some((lo, hi))
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("measure serialization cannot fail")
    }

    pub fn from_json_str(s: &str) -> Result<Measure> {
        Ok(serde_json::from_str(s)?)
    }
}

impl Serialize for Measure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            n: usize,
            radial_segments: &'a [RadialSegment],
            atoms: Vec<AtomRepr>,
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| AtomRepr {
                center: a.center.coords().to_vec(),
                mass: a.mass,
                radius: a.radius,
            })
            .collect();
        Repr {
            n: self.n,
            radial_segments: &self.segments,
            atoms,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Measure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            n: usize,
            #[serde(default)]
            radial_segments: Vec<RadialSegment>,
            #[serde(default)]
            atoms: Vec<AtomRepr>,
        }
        let repr = Repr::deserialize(deserializer)?;
        let atoms = repr
            .atoms
            .into_iter()
            .map(|a| {
                Ok(MollifiedAtom {
                    center: Point::new(a.center).map_err(D::Error::custom)?,
                    mass: a.mass,
                    radius: a.radius,
                })
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        Measure::new(repr.n, repr.radial_segments, atoms).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct AtomRepr {
    center: Vec<f64>,
    mass: f64,
    radius: f64,
}

/// `r_hi` serializes as a number, or the string `"inf"` for an unbounded segment.
mod radius_end {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "r_hi must be a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn atom_at_origin(n: usize, mass: f64, radius: f64) -> Measure {
        Measure::new(
            n,
            vec![],
            vec![MollifiedAtom {
                center: Point::origin(n),
                mass,
                radius,
            }],
        )
        .unwrap()
    }

    #[test]
    fn concentric_atom_ball_mass_is_volume_ratio() {
        let m = atom_at_origin(3, 1.0, 1.0);
        let bm = m.ball_mass(&Point::origin(3), 0.5).unwrap();
        assert_relative_eq!(bm, 0.125, max_relative = 1e-13);
        let full = m.ball_mass(&Point::origin(3), 2.0).unwrap();
        assert_relative_eq!(full, 1.0, max_relative = 1e-13);
    }

    #[test]
    fn atom_translation_consistency() {
        let n = 3;
        let m = Measure::new(
            n,
            vec![],
            vec![MollifiedAtom {
                center: Point::new(vec![0.2, -0.5, 1.0]).unwrap(),
                mass: 2.5,
                radius: 0.3,
            }],
        )
        .unwrap();
        let shift = [1.5, 0.25, -2.0];
        let m2 = m.translated(&shift).unwrap();
        let x = Point::new(vec![0.4, 0.1, 0.6]).unwrap();
        let x2 = x.translated(&shift).unwrap();
        for &t in &[0.05, 0.2, 0.5, 1.0, 3.0] {
            assert_eq!(
                m.ball_mass(&x, t).unwrap(),
                m2.ball_mass(&x2, t).unwrap(),
                "translation must preserve ball mass exactly"
            );
        }
    }

    #[test]
    fn powerlaw_segment_ball_mass_matches_reference() {
        // c=1, s=1.5 on (0,1), n=3, |x|=0.3, t=0.2 -> mpmath cap-fraction oracle
        let m = Measure::new(3, vec![RadialSegment::power(1.0, 1.5, 0.0, 1.0)], vec![]).unwrap();
        let bm = m.ball_mass(&Point::radial(3, 0.3), 0.2).unwrap();
        assert_relative_eq!(bm, 0.211937883004, max_relative = 1e-8);
    }

    #[test]
    fn ball_mass_monotone_in_t_and_converges_to_total() {
        let m = Measure::new(
            3,
            vec![RadialSegment::power(1.0, 1.5, 0.0, 1.0)],
            vec![MollifiedAtom {
                center: Point::new(vec![0.5, 0.5, 0.0]).unwrap(),
                mass: 0.7,
                radius: 0.1,
            }],
        )
        .unwrap();
        let x = Point::new(vec![0.1, -0.2, 0.3]).unwrap();
        let mut prev: f64 = 0.0;
        for k in 0..60 {
            let t = 0.01 * 1.2f64.powi(k);
            let bm = m.ball_mass(&x, t).unwrap();
            assert!(bm >= prev - 1e-12 * prev.abs(), "ball mass must be nondecreasing in t");
            prev = bm;
        }
        let total = m.total_mass();
        assert_relative_eq!(prev, total, max_relative = 1e-9);
        // total for the power-law part: 4*pi * int_0^1 t^0.5 dt = 8*pi/3 plus the atom
        assert_relative_eq!(total, 8.0 * PI / 3.0 + 0.7, max_relative = 1e-12);
    }

    #[test]
    fn radial_ball_mass_matches_monte_carlo() {
        // MC oracle: sample uniformly in B(x,t), average the density
        let m = Measure::new(3, vec![RadialSegment::power(1.0, 1.5, 0.0, 1.0)], vec![]).unwrap();
        let (d, t) = (0.3, 0.2);
        let x = Point::radial(3, d);
        let exact = m.ball_mass(&x, t).unwrap();

        // deterministic xorshift sampler
        let mut state: u64 = 0x9e3779b97f4a7c15;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state as f64 / u64::MAX as f64
        };
        let nsamp = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut kept = 0usize;
        while kept < nsamp {
            let (a, b, c) = (2.0 * next() - 1.0, 2.0 * next() - 1.0, 2.0 * next() - 1.0);
            if a * a + b * b + c * c > 1.0 {
                continue;
            }
            kept += 1;
            let y = [d + t * a, t * b, t * c];
            let rho = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
            let f = if rho < 1.0 { rho.powf(-1.5) } else { 0.0 };
            sum += f;
            sumsq += f * f;
        }
        let vol = 4.0 * PI / 3.0 * t * t * t;
        let mean = sum / nsamp as f64;
        let var = (sumsq / nsamp as f64 - mean * mean).max(0.0);
        let est = vol * mean;
        let se = vol * (var / nsamp as f64).sqrt();
        assert!(
            (est - exact).abs() <= 3.0 * se,
            "MC estimate {est} +- {se} vs exact {exact}"
        );
    }

    #[test]
    fn moment_below_counterexample_closed_form() {
        // density |y|^-2 log^-2(1/|y|) on (0, 1/2), n=3: at rho = e^-10 the
        // moment with e = 1 is 4*pi/10
        let seg = RadialSegment {
            c: 1.0,
            s: 2.0,
            beta: 2.0,
            r_lo: 0.0,
            r_hi: 0.5,
            log_scale: (-1.0f64).exp(),
        };
        let m = Measure::new(3, vec![seg], vec![]).unwrap();
        let rho = (-10.0f64).exp();
        let v = m.radial_moment_below(rho, 1.0).unwrap();
        assert_relative_eq!(v, 4.0 * PI / 10.0, max_relative = 1e-10);
    }

    #[test]
    fn moment_below_powerlaw_closed_form() {
        // sigma = |y|^-1.5 on B(0,1), n=3, e=1: 4*pi*rho^0.5/0.5; at rho=0.25 -> 4*pi
        let m = Measure::new(3, vec![RadialSegment::power(1.0, 1.5, 0.0, 1.0)], vec![]).unwrap();
        let v = m.radial_moment_below(0.25, 1.0).unwrap();
        assert_relative_eq!(v, 4.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn moment_above_powerlaw_closed_form() {
        // e = 2, rho = 0.01: 4*pi*2*(0.01^-0.5 - 1) = 72*pi
        let m = Measure::new(3, vec![RadialSegment::power(1.0, 1.5, 0.0, 1.0)], vec![]).unwrap();
        let v = m.radial_moment_above(0.01, 2.0).unwrap();
        assert_relative_eq!(v, 4.0 * PI * 18.0, max_relative = 1e-12);
        // beyond the support: zero
        assert_eq!(m.radial_moment_above(2.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn moment_divergence_is_analytic() {
        // integrand exponent at 0 equal to -1 with beta = 0 diverges
        let m = Measure::new(3, vec![RadialSegment::power(1.0, 2.0, 0.0, 1.0)], vec![]).unwrap();
        assert!(m.radial_moment_below(0.5, 1.0).unwrap().is_infinite());
        // Lebesgue on R^n: tail moment with e = n - 2a < n diverges
        let leb = Measure::new(3, vec![RadialSegment::power(1.0, 0.0, 0.0, f64::INFINITY)], vec![])
            .unwrap();
        assert!(leb.radial_moment_above(1.0, 2.0).unwrap().is_infinite());
    }

    #[test]
    fn moments_add_up_to_total_mass() {
        let m = Measure::new(
            3,
            vec![RadialSegment::power(2.0, 1.0, 0.1, 2.0)],
            vec![MollifiedAtom {
                center: Point::origin(3),
                mass: 0.5,
                radius: 0.25,
            }],
        )
        .unwrap();
        for &rho in &[0.05, 0.2, 0.7, 1.5, 3.0] {
            let below = m.radial_moment_below(rho, 0.0).unwrap();
            let above = m.radial_moment_above(rho, 0.0).unwrap();
            assert_relative_eq!(below + above, m.total_mass(), max_relative = 1e-10);
        }
    }

    #[test]
    fn boundary_convention_is_irrelevant_at_machine_scale() {
        let m = Measure::new(3, vec![RadialSegment::power(1.0, 1.5, 0.0, 1.0)], vec![]).unwrap();
        let x = Point::radial(3, 0.3);
        let base = m.ball_mass(&x, 0.7).unwrap();
        for &dt in &[-1e-12, 1e-12] {
            let v = m.ball_mass(&x, 0.7 + dt).unwrap();
            assert_relative_eq!(v, base, max_relative = 1e-9);
        }
    }

    #[test]
    fn segment_validation_rejects_bad_inputs() {
        // straddles the log edge with beta != 0
        let bad = RadialSegment {
            c: 1.0,
            s: 1.0,
            beta: 2.0,
            r_lo: 0.5,
            r_hi: 3.0,
            log_scale: (-1.0f64).exp(), // edge at 1
        };
        assert!(Measure::new(3, vec![bad], vec![]).is_err());
        // locally infinite mass at the origin
        let heavy = RadialSegment::power(1.0, 3.5, 0.0, 1.0);
        assert!(Measure::new(3, vec![heavy], vec![]).is_err());
        // s = n at the origin is fine with beta > 1
        let log_ok = RadialSegment {
            c: 1.0,
            s: 3.0,
            beta: 1.5,
            r_lo: 0.0,
            r_hi: 0.5,
            log_scale: (-1.0f64).exp(),
        };
        assert!(Measure::new(3, vec![log_ok], vec![]).is_ok());
    }

    #[test]
    fn json_round_trip_and_inf_encoding() {
        let m = Measure::new(
            3,
            vec![
                RadialSegment::power(1.0, 1.5, 0.0, 1.0),
                RadialSegment::power(2.0, 4.0, 1.0, f64::INFINITY),
            ],
            vec![MollifiedAtom {
                center: Point::new(vec![0.0, 1.0, 0.0]).unwrap(),
                mass: 1.0,
                radius: 0.1,
            }],
        )
        .unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"r_hi\":\"inf\""));
        assert!(json.contains("\"radial_segments\""));
        let back = Measure::from_json_str(&json).unwrap();
        assert_eq!(m, back);
        // malformed input gets a diagnostic, not a panic
        assert!(Measure::from_json_str("{\"n\": 0, \"radial_segments\": [], \"atoms\": []}").is_err());
    }

    #[test]
    fn restriction_clips_segments_and_scales_straddling_atoms() {
        let m = Measure::new(
            3,
            vec![RadialSegment::power(1.0, 1.5, 0.0, 1.0)],
            vec![MollifiedAtom {
                center: Point::radial(3, 0.5),
                mass: 1.0,
                radius: 0.2,
            }],
        )
        .unwrap();
        let (inside, notes) = m.restrict_to_origin_ball(0.25).unwrap();
        assert_eq!(inside.segments()[0].r_hi, 0.25);
        assert!(inside.atoms().is_empty());
        assert!(notes.is_empty());
        let (straddle, notes) = m.restrict_to_origin_ball(0.5).unwrap();
        assert_eq!(straddle.atoms().len(), 1);
        assert!(straddle.atoms()[0].mass < 0.5);
        assert_eq!(notes.len(), 1);
    }
}
