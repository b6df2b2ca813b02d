//! Problem data: marked-point configuration, validation, derived range
//! parameters, and the regime classification table.

use crate::error::{Result, VortexError};
use crate::fields::plateau_bump;
use crate::util::gauss_panels;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// A vortex location with its (positive) integer multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkedPoint {
    pub at: Point,
    pub mult: u32,
}

impl MarkedPoint {
    pub fn new(x: f64, y: f64, mult: u32) -> Self {
        MarkedPoint {
            at: Point::new(x, y),
            mult,
        }
    }
}

/// User-level description of one problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexConfig {
    pub poles: Vec<MarkedPoint>,
    pub antipoles: Vec<MarkedPoint>,
    /// Gravitational coupling; zero switches the weight to a constant.
    pub a: f64,
    /// Amplitude of the weight at unit distance from all marked points.
    pub amplitude: f64,
    /// Regularization radius; defaulted from the marked-point geometry.
    pub sigma: Option<f64>,
    /// Reference far radius; defaulted from the geometry and core radius.
    pub r0: Option<f64>,
    /// Permits a*n_j >= 1 for branches whose weights stay bounded at poles.
    pub allow_heavy_poles: bool,
}

impl Default for VortexConfig {
    fn default() -> Self {
        VortexConfig {
            poles: Vec::new(),
            antipoles: Vec::new(),
            a: 0.5,
            amplitude: 1.0,
            sigma: None,
            r0: None,
            allow_heavy_poles: false,
        }
    }
}

pub const CORE_RADIUS: f64 = 15.154262241479264; // exp(e), where the scale function switches to ln r

impl VortexConfig {
    pub fn n_total(&self) -> u32 {
        self.poles.iter().map(|p| p.mult).sum()
    }
    pub fn m_total(&self) -> u32 {
        self.antipoles.iter().map(|p| p.mult).sum()
    }

    fn all_points(&self) -> Vec<MarkedPoint> {
        self.poles
            .iter()
            .chain(self.antipoles.iter())
            .copied()
            .collect()
    }

    /// Smallest pairwise distance among marked points (infinite when fewer
    /// than two points exist).
    pub fn min_separation(&self) -> f64 {
        let pts = self.all_points();
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                best = best.min(pts[i].at.dist(&pts[j].at));
            }
        }
        best
    }

    /// Regularization radius actually used: the explicit value, or
    /// 0.4 times the minimum separation capped at 1.
    pub fn sigma_value(&self) -> f64 {
        self.sigma
            .unwrap_or_else(|| (0.4 * self.min_separation()).min(1.0))
    }

    /// Reference radius actually used.
    pub fn r0_value(&self) -> f64 {
        self.r0.unwrap_or_else(|| {
            let far = self
                .all_points()
                .iter()
                .map(|p| p.at.norm())
                .fold(0.0_f64, f64::max);
            CORE_RADIUS.max(2.0 * far + 2.0 * self.sigma_value())
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a >= 0.0) {
            return Err(VortexError::Invalid(format!(
                "coupling a = {} must be finite and nonnegative",
                self.a
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(VortexError::Invalid(format!(
                "amplitude = {} must be finite and positive",
                self.amplitude
            )));
        }
        let pts = self.all_points();
        for p in &pts {
            if p.mult == 0 {
                return Err(VortexError::Invalid(
                    "marked-point multiplicities must be positive".into(),
                ));
            }
            if !p.at.x.is_finite() || !p.at.y.is_finite() {
                return Err(VortexError::Invalid("marked point not finite".into()));
            }
        }
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if pts[i].at.dist(&pts[j].at) < 1e-12 {
                    return Err(VortexError::Invalid(format!(
                        "marked points {i} and {j} coincide"
                    )));
                }
            }
        }
        if !self.allow_heavy_poles {
            for (index, p) in self.poles.iter().enumerate() {
                let product = self.a * p.mult as f64;
                if product >= 1.0 {
                    return Err(VortexError::HeavyPole { index, product });
                }
            }
        }
        let sigma = self.sigma_value();
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(VortexError::Invalid(format!(
                "regularization radius {sigma} must be positive"
            )));
        }
        let dmin = self.min_separation();
        if 2.0 * sigma > dmin {
            return Err(VortexError::Invalid(format!(
                "regularization balls overlap: 2*sigma = {} exceeds min separation {}",
                2.0 * sigma,
                dmin
            )));
        }
        let r0 = self.r0_value();
        let reach = pts
            .iter()
            .map(|p| p.at.norm())
            .fold(0.0_f64, f64::max)
            + sigma;
        if r0 < CORE_RADIUS - 1e-9 || r0 < reach {
            return Err(VortexError::Invalid(format!(
                "reference radius {r0} too small (needs at least {})",
                CORE_RADIUS.max(reach)
            )));
        }
        Ok(())
    }
}

/// Range parameters computed from a validated configuration.
#[derive(Debug, Clone)]
pub struct DerivedParams {
    pub n: u32,
    pub m: u32,
    pub a: f64,
    pub amplitude: f64,
    pub sigma: f64,
    pub r0: f64,
    /// Lower critical growth rate: min of 0, 2aN-2 and alpha_star - 2(N-M).
    pub beta_star: f64,
    /// Threshold above which the multiple-solution ladder applies.
    /// Stored as -infinity when a = 0 (the ladder never applies there).
    pub beta_sharp: f64,
    pub beta_sharp_plus: f64,
    /// Normalized total mass of the weight; +infinity unless aN > 1 with
    /// every pole product a*n_j < 1.
    pub alpha_star: f64,
    /// Far-field decay exponent of the weight envelope, 2aN.
    pub weight_decay: f64,
    /// Some pole has a*n_j >= 1: the weight is non-integrable there, which
    /// invalidates the minimal and critical constructions.
    pub heavy_poles: bool,
    /// Some antipole has a*m_j >= 1: the ladder weights are non-integrable
    /// there, which invalidates the multiple-solution constructions.
    pub heavy_antipoles: bool,
}

impl DerivedParams {
    /// Total flux carried by a solution with growth rate beta.
    pub fn flux_of(&self, beta: f64) -> f64 {
        2.0 * PI * (2.0 * (self.n as f64 - self.m as f64) + beta)
    }
    pub fn topological_flux(&self) -> f64 {
        4.0 * PI * (self.n as f64 - self.m as f64)
    }
}

/// Classification of one growth rate, or one band of growth rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Minimal decaying branch below the lower critical rate.
    MinimalTypeOne,
    /// Borderline minimal branch with a double-log correction.
    CriticalMinimal,
    /// Ladder of solutions approaching a negative growth rate.
    MultipleTypeOne,
    /// Ladder at growth rate zero carrying exactly the topological flux.
    TopologicalMultiple,
    /// Ladder of solutions with positive growth rate.
    MultipleTypeTwo,
    /// No solution with logarithmic growth exists in this band.
    NoLogSolution,
    /// Growth rate zero with unit exponent product aN = 1: no solution
    /// carrying the topological flux.
    NoTopological,
    /// Band where the coarse weight envelope suggests existence but
    /// the sharp envelope does not support it; reported, never claimed.
    ContestedTypeTwo,
    Unknown,
}

/// Half-open or closed interval of growth rates with one classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeBand {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub regime: Regime,
}

impl RegimeBand {
    fn contains(&self, beta: f64) -> bool {
        let above = if self.lo_closed {
            beta >= self.lo
        } else {
            beta > self.lo
        };
        let below = if self.hi_closed {
            beta <= self.hi
        } else {
            beta < self.hi
        };
        above && below
    }
}

/// Computes all derived range parameters. Runs the mass quadrature for
/// alpha_star only when it is finite.
pub fn derive_params(cfg: &VortexConfig) -> Result<DerivedParams> {
    cfg.validate()?;
    let n = cfg.n_total();
    let m = cfg.m_total();
    let nf = n as f64;
    let mf = m as f64;
    let a = cfg.a;
    let alpha_star = alpha_star_value(cfg);
    // With no vortex charge the range formulas are vacuous; the vacuum
    // conventions keep downstream consumers total.
    let beta_star = if n == 0 {
        0.0
    } else {
        0.0_f64
            .min(2.0 * a * nf - 2.0)
            .min(alpha_star - 2.0 * (nf - mf))
    };
    let beta_sharp = if n == 0 {
        f64::INFINITY
    } else if a == 0.0 {
        f64::NEG_INFINITY
    } else {
        (-2.0 * (nf - mf)).max((2.0 - 2.0 * a * nf) / a)
    };
    let beta_sharp_plus = beta_sharp.max(0.0);
    Ok(DerivedParams {
        n,
        m,
        a,
        amplitude: cfg.amplitude,
        sigma: cfg.sigma_value(),
        r0: cfg.r0_value(),
        beta_star,
        beta_sharp,
        beta_sharp_plus,
        alpha_star,
        weight_decay: 2.0 * a * nf,
        heavy_poles: cfg.poles.iter().any(|p| a * p.mult as f64 >= 1.0),
        heavy_antipoles: cfg.antipoles.iter().any(|p| a * p.mult as f64 >= 1.0),
    })
}

/// Normalized total mass of the weight P: (1/2pi) times its integral.
/// Infinite when the far decay is too slow (aN <= 1) or any pole product
/// a*n_j reaches 1.
pub fn alpha_star_value(cfg: &VortexConfig) -> f64 {
    let a = cfg.a;
    let nf = cfg.n_total() as f64;
    if a * nf <= 1.0 {
        return f64::INFINITY;
    }
    for p in &cfg.poles {
        if a * p.mult as f64 >= 1.0 {
            return f64::INFINITY;
        }
    }
    alpha_star_quadrature(cfg, 1)
}

/// ln P at a general point, directly from the product form.
fn ln_weight_raw(cfg: &VortexConfig, x: f64, y: f64) -> f64 {
    let mut acc = cfg.amplitude.ln();
    if cfg.a > 0.0 {
        for p in &cfg.poles {
            let rho = (x - p.at.x).hypot(y - p.at.y);
            acc -= 2.0 * cfg.a * p.mult as f64 * rho.ln();
        }
    }
    acc
}

/// Partition-of-unity quadrature of P over the plane. `refine` scales every
/// resolution knob, so calling with 1 and 2 gives a self-convergence check.
pub fn alpha_star_quadrature(cfg: &VortexConfig, refine: usize) -> f64 {
    let a = cfg.a;
    let an_total = 2.0 * a * cfg.n_total() as f64;
    let refine = refine.max(1);
    let ntheta = 256 * refine;
    let panels = 24 * refine;

    // Bump radius: supports around distinct poles must not touch.
    let dmin = cfg.min_separation();
    let s = if dmin.is_finite() { 0.35 * dmin } else { 1.0 };
    let geom = cfg
        .poles
        .iter()
        .map(|p| p.at.norm())
        .fold(1.0_f64, f64::max);
    let r_far = 1.0e3 * geom.max(s);

    let p_at = |x: f64, y: f64| ln_weight_raw(cfg, x, y).exp();

    let mut total = 0.0;

    // Singular caps: polar patches around each pole with a power-law
    // substitution that absorbs the rho^(-2 a n) factor.
    for pole in &cfg.poles {
        let an = a * pole.mult as f64;
        let q = (2.0 / (2.0 - 2.0 * an)).ceil().max(2.0);
        let mut cap = 0.0;
        for kt in 0..ntheta {
            let theta = 2.0 * PI * (kt as f64 + 0.5) / ntheta as f64;
            let (sin_t, cos_t) = theta.sin_cos();
            // Smooth part of the integrand at radius rho from this pole.
            let smooth = |rho: f64| {
                let x = pole.at.x + rho * cos_t;
                let y = pole.at.y + rho * sin_t;
                let mut acc = cfg.amplitude.ln();
                for other in &cfg.poles {
                    if std::ptr::eq(other, pole) {
                        continue;
                    }
                    let d = (x - other.at.x).hypot(y - other.at.y);
                    acc -= 2.0 * a * other.mult as f64 * d.ln();
                }
                acc.exp() * plateau_bump(rho / s)
            };
            let integrand = |w: f64| {
                let rho = s * w.powf(q);
                // rho^(1-2an) drho = s^(2-2an) q w^(q(2-2an)-1) dw
                let jac = s.powf(2.0 - 2.0 * an) * q * w.powf(q * (2.0 - 2.0 * an) - 1.0);
                smooth(rho) * jac
            };
            let w_half = 0.5_f64.powf(1.0 / q);
            cap += gauss_panels(&integrand, 0.0, w_half, panels)
                + gauss_panels(&integrand, w_half, 1.0, panels);
        }
        total += cap * (2.0 * PI / ntheta as f64);
    }

    // Remainder: everything outside the caps, in origin-centered polar
    // coordinates. The integrand vanishes identically near each pole.
    let masked = |r: f64| {
        let mut acc = 0.0;
        for kt in 0..ntheta {
            let theta = 2.0 * PI * (kt as f64 + 0.5) / ntheta as f64;
            let x = r * theta.cos();
            let y = r * theta.sin();
            let mut mask = 1.0;
            for pole in &cfg.poles {
                let rho = (x - pole.at.x).hypot(y - pole.at.y);
                mask -= plateau_bump(rho / s);
            }
            if mask > 0.0 {
                acc += mask * p_at(x, y);
            }
        }
        acc * (2.0 * PI / ntheta as f64) * r
    };
    let r_mid = (2.0 * geom + 2.0 * s).max(4.0 * s);
    total += gauss_panels(&masked, 0.0, r_mid, panels * 4);
    // Log substitution for the slowly decaying far region.
    let far = |t: f64| {
        let r = t.exp();
        masked(r) * r
    };
    total += gauss_panels(&far, r_mid.ln(), r_far.ln(), panels * 6);
    // Analytic power tail beyond r_far; the dipole correction averages out.
    total += cfg.amplitude * 2.0 * PI * r_far.powf(2.0 - an_total) / (an_total - 2.0);

    total / (2.0 * PI)
}

/// Full classification table over growth rates, covering the whole line.
/// Bands are ordered, disjoint, and leave no gaps (gaps are explicit
/// Unknown bands).
pub fn feasible_ranges(dp: &DerivedParams) -> Vec<RegimeBand> {
    let nf = dp.n as f64;
    let mf = dp.m as f64;
    let a = dp.a;
    let mut bands: Vec<RegimeBand> = Vec::new();
    let neg_inf = f64::NEG_INFINITY;
    let pos_inf = f64::INFINITY;

    // Per-point heaviness invalidates the constructions whose weights must
    // be integrable at that kind of point; those claims degrade to Unknown
    // while the band layout stays intact.
    let heavy_poles = dp.heavy_poles;
    let heavy_antipoles = dp.heavy_antipoles;
    let mut push = |lo: f64, hi: f64, lc: bool, hc: bool, regime: Regime| {
        let regime = match regime {
            Regime::MinimalTypeOne | Regime::CriticalMinimal if heavy_poles => Regime::Unknown,
            Regime::MultipleTypeOne
            | Regime::MultipleTypeTwo
            | Regime::TopologicalMultiple
            | Regime::ContestedTypeTwo
                if heavy_antipoles =>
            {
                Regime::Unknown
            }
            other => other,
        };
        if lo < hi || (lo == hi && lc && hc) {
            bands.push(RegimeBand {
                lo,
                hi,
                lo_closed: lc,
                hi_closed: hc,
                regime,
            });
        }
    };

    if dp.n == 0 {
        push(neg_inf, pos_inf, false, false, Regime::Unknown);
        return bands;
    }

    let an = a * nf;
    let lower = -2.0 * (nf - mf);

    if a == 0.0 {
        if dp.m + 1 == dp.n {
            // The borderline count admits no solutions at any rate.
            push(neg_inf, pos_inf, false, false, Regime::NoLogSolution);
        } else if dp.m + 1 < dp.n {
            push(neg_inf, lower, false, true, Regime::Unknown);
            push(lower, -2.0, false, false, Regime::MinimalTypeOne);
            push(-2.0, -2.0, true, true, Regime::CriticalMinimal);
            push(-2.0, pos_inf, false, false, Regime::NoLogSolution);
        } else {
            push(neg_inf, -2.0, false, true, Regime::Unknown);
            push(-2.0, pos_inf, false, false, Regime::NoLogSolution);
        }
        return bands;
    }

    if an < 1.0 {
        let blowup_hi = (2.0 - 2.0 * an) / a;
        let type2_lo = (2.0 - an) / a;
        let minimal_ok = mf < (1.0 + a) * nf - 1.0;
        if minimal_ok {
            push(neg_inf, lower, false, true, Regime::Unknown);
            push(lower, dp.beta_star, false, false, Regime::MinimalTypeOne);
            push(dp.beta_star, dp.beta_star, true, true, Regime::CriticalMinimal);
            push(dp.beta_star, blowup_hi, false, false, Regime::NoLogSolution);
        } else {
            push(neg_inf, dp.beta_star, false, true, Regime::Unknown);
            push(dp.beta_star, blowup_hi, false, false, Regime::NoLogSolution);
        }
        // Between the blow-up band and the solid ladder range sits the
        // contested strip, clipped to rates above beta_sharp_plus.
        let contested_lo = blowup_hi.max(dp.beta_sharp_plus);
        if contested_lo > blowup_hi {
            push(blowup_hi, contested_lo, true, false, Regime::Unknown);
            push(contested_lo, type2_lo, true, false, Regime::ContestedTypeTwo);
        } else {
            push(blowup_hi, type2_lo, true, false, Regime::ContestedTypeTwo);
        }
        push(type2_lo, pos_inf, true, false, Regime::MultipleTypeTwo);
        return bands;
    }

    if an == 1.0 {
        let minimal_ok = mf < (1.0 + a) * nf - 1.0;
        if minimal_ok {
            push(neg_inf, lower, false, true, Regime::Unknown);
            push(lower, 0.0, false, false, Regime::MinimalTypeOne);
        } else {
            push(neg_inf, 0.0, false, false, Regime::Unknown);
        }
        if dp.m < dp.n {
            push(0.0, 0.0, true, true, Regime::NoTopological);
            push(0.0, pos_inf, false, false, Regime::MultipleTypeTwo);
        } else {
            let sharp = dp.beta_sharp.max(0.0);
            push(0.0, sharp, true, true, Regime::Unknown);
            push(sharp, pos_inf, false, false, Regime::MultipleTypeTwo);
        }
        return bands;
    }

    // an > 1
    if dp.m < dp.n {
        push(neg_inf, dp.beta_sharp, false, true, Regime::Unknown);
        push(dp.beta_sharp, 0.0, false, false, Regime::MultipleTypeOne);
        push(0.0, 0.0, true, true, Regime::TopologicalMultiple);
        push(0.0, pos_inf, false, false, Regime::MultipleTypeTwo);
    } else {
        push(neg_inf, dp.beta_sharp, false, true, Regime::Unknown);
        push(dp.beta_sharp, pos_inf, false, false, Regime::MultipleTypeTwo);
    }
    bands
}

/// Point query against the classification table.
pub fn classify_regime(dp: &DerivedParams, beta: f64) -> Regime {
    for band in feasible_ranges(dp) {
        if band.contains(beta) {
            return band.regime;
        }
    }
    Regime::Unknown
}

/// True when the configuration is rotationally symmetric about the origin,
/// which is what the fast radial backend requires.
pub fn radial_symmetric(cfg: &VortexConfig) -> bool {
    cfg.poles
        .iter()
        .chain(cfg.antipoles.iter())
        .all(|p| p.at.norm() < 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> VortexConfig {
        VortexConfig {
            poles: vec![MarkedPoint::new(0.0, 0.0, 1)],
            a: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn desk_parameters_match_hand_values() {
        let dp = derive_params(&desk()).unwrap();
        assert_eq!(dp.n, 1);
        assert_eq!(dp.m, 0);
        assert_eq!(dp.alpha_star, f64::INFINITY);
        assert!((dp.beta_star - (-1.0)).abs() < 1e-14);
        assert!((dp.beta_sharp - 2.0).abs() < 1e-14);
        assert!((dp.beta_sharp_plus - 2.0).abs() < 1e-14);
        assert!((dp.flux_of(-1.5) - std::f64::consts::PI).abs() < 1e-12);
        assert!((dp.topological_flux() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn desk_band_table_is_the_expected_partition() {
        let dp = derive_params(&desk()).unwrap();
        let bands = feasible_ranges(&dp);
        let got: Vec<(f64, f64, Regime)> =
            bands.iter().map(|b| (b.lo, b.hi, b.regime)).collect();
        assert_eq!(
            got,
            vec![
                (f64::NEG_INFINITY, -2.0, Regime::Unknown),
                (-2.0, -1.0, Regime::MinimalTypeOne),
                (-1.0, -1.0, Regime::CriticalMinimal),
                (-1.0, 2.0, Regime::NoLogSolution),
                (2.0, 3.0, Regime::ContestedTypeTwo),
                (3.0, f64::INFINITY, Regime::MultipleTypeTwo),
            ]
        );
        assert_eq!(classify_regime(&dp, -1.5), Regime::MinimalTypeOne);
        assert_eq!(classify_regime(&dp, -1.0), Regime::CriticalMinimal);
        assert_eq!(classify_regime(&dp, 0.5), Regime::NoLogSolution);
        assert_eq!(classify_regime(&dp, 2.0), Regime::ContestedTypeTwo);
        assert_eq!(classify_regime(&dp, 3.0), Regime::MultipleTypeTwo);
        assert_eq!(classify_regime(&dp, -5.0), Regime::Unknown);
    }

    #[test]
    fn heavy_pole_rejected_without_the_flag() {
        let cfg = VortexConfig {
            poles: vec![MarkedPoint::new(0.0, 0.0, 1)],
            a: 2.0,
            ..Default::default()
        };
        let err = derive_params(&cfg).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("an_j < 1 violated"), "got: {text}");
    }

    #[test]
    fn heavy_pole_allowed_with_flag_and_alpha_star_infinite() {
        let cfg = VortexConfig {
            poles: vec![MarkedPoint::new(0.0, 0.0, 2)],
            a: 1.0,
            allow_heavy_poles: true,
            ..Default::default()
        };
        let dp = derive_params(&cfg).unwrap();
        // a*n = 2 at the pole, so the weight mass diverges there even
        // though aN > 1 makes the far field integrable.
        assert_eq!(dp.alpha_star, f64::INFINITY);
        assert!((dp.beta_star - 0.0).abs() < 1e-14);
        assert!((dp.beta_sharp - (-2.0)).abs() < 1e-14);
        let bands = feasible_ranges(&dp);
        assert_eq!(classify_regime(&dp, -1.0), Regime::MultipleTypeOne);
        assert_eq!(classify_regime(&dp, 0.0), Regime::TopologicalMultiple);
        assert_eq!(classify_regime(&dp, 1.0), Regime::MultipleTypeTwo);
        assert!(bands.iter().all(|b| b.lo <= b.hi));
    }

    #[test]
    fn empty_config_is_valid_and_unclassified() {
        let cfg = VortexConfig::default();
        let dp = derive_params(&cfg).unwrap();
        assert_eq!(dp.n, 0);
        assert_eq!(dp.m, 0);
        assert_eq!(dp.beta_star, 0.0);
        assert_eq!(classify_regime(&dp, 0.0), Regime::Unknown);
    }

    #[test]
    fn zero_coupling_layer_and_nonexistence_counts() {
        // Three poles, no antipoles: solutions fill a layer of rates.
        let cfg = VortexConfig {
            poles: vec![
                MarkedPoint::new(0.0, 0.0, 1),
                MarkedPoint::new(3.0, 0.0, 1),
                MarkedPoint::new(0.0, 3.0, 1),
            ],
            a: 0.0,
            ..Default::default()
        };
        let dp = derive_params(&cfg).unwrap();
        assert_eq!(dp.beta_sharp, f64::NEG_INFINITY);
        assert_eq!(classify_regime(&dp, -4.0), Regime::MinimalTypeOne);
        assert_eq!(classify_regime(&dp, -2.0), Regime::CriticalMinimal);
        assert_eq!(classify_regime(&dp, 0.0), Regime::NoLogSolution);
        assert_eq!(classify_regime(&dp, -7.0), Regime::Unknown);

        // One antipole against two poles: borderline count, nothing exists.
        let cfg2 = VortexConfig {
            poles: vec![MarkedPoint::new(0.0, 0.0, 2)],
            antipoles: vec![MarkedPoint::new(3.0, 0.0, 1)],
            a: 0.0,
            ..Default::default()
        };
        let dp2 = derive_params(&cfg2).unwrap();
        assert_eq!(classify_regime(&dp2, -3.0), Regime::NoLogSolution);
        assert_eq!(classify_regime(&dp2, 5.0), Regime::NoLogSolution);
    }

    #[test]
    fn unit_exponent_product_refuses_topological_rate() {
        // Single pole of multiplicity 2: the pole itself is heavy, so the
        // minimal band is not claimed, but the flux obstruction at rate 0
        // is a far-field statement and stands.
        let cfg = VortexConfig {
            poles: vec![MarkedPoint::new(0.0, 0.0, 2)],
            a: 0.5,
            allow_heavy_poles: true,
            ..Default::default()
        };
        let dp = derive_params(&cfg).unwrap();
        assert!((dp.weight_decay - 2.0).abs() < 1e-14);
        assert!(dp.heavy_poles);
        assert_eq!(classify_regime(&dp, 0.0), Regime::NoTopological);
        assert_eq!(classify_regime(&dp, -1.0), Regime::Unknown);
        assert_eq!(classify_regime(&dp, 0.5), Regime::MultipleTypeTwo);

        // Two separated simple poles with the same totals: nothing heavy,
        // and the minimal band below rate zero is claimed.
        let cfg2 = VortexConfig {
            poles: vec![MarkedPoint::new(0.0, 0.0, 1), MarkedPoint::new(5.0, 0.0, 1)],
            a: 0.5,
            ..Default::default()
        };
        let dp2 = derive_params(&cfg2).unwrap();
        assert!(!dp2.heavy_poles);
        assert_eq!(classify_regime(&dp2, -1.0), Regime::MinimalTypeOne);
        assert_eq!(classify_regime(&dp2, 0.0), Regime::NoTopological);
    }

    #[test]
    fn two_pole_mass_matches_the_closed_form() {
        // For two unit poles with exponent 2b each, the plane integral of
        // |x-p|^(-2b) |x-q|^(-2b) has a closed form via the composition
        // identity for power kernels. At b = 3/4 and separation 8.25 the
        // normalized mass is (Gamma(1/4)/Gamma(3/4))^2 / (2 * 8.25).
        let cfg = VortexConfig {
            poles: vec![
                MarkedPoint::new(4.125, 0.0, 1),
                MarkedPoint::new(-4.125, 0.0, 1),
            ],
            a: 0.75,
            sigma: Some(3.4),
            ..Default::default()
        };
        let expected = 0.530530808; // 8.753758.../16.5
        let got = alpha_star_value(&cfg);
        assert!(
            (got - expected).abs() / expected < 5e-4,
            "alpha_star = {got}, expected ~{expected}"
        );
        // Linear in the amplitude.
        let cfg40 = VortexConfig {
            amplitude: 40.0,
            ..cfg.clone()
        };
        let got40 = alpha_star_value(&cfg40);
        assert!((got40 - 40.0 * got).abs() / got40 < 1e-10);
        // Translation invariant.
        let shifted = VortexConfig {
            poles: vec![
                MarkedPoint::new(4.125 + 1.0, 2.0, 1),
                MarkedPoint::new(-4.125 + 1.0, 2.0, 1),
            ],
            ..cfg.clone()
        };
        let got_shift = alpha_star_value(&shifted);
        assert!((got_shift - got).abs() / got < 1e-4);
        // Self-convergence under refinement.
        let fine = alpha_star_quadrature(&cfg, 2);
        assert!((fine - got).abs() / got < 2e-4);
    }

    #[test]
    fn bands_tile_the_line_without_gaps_or_overlaps() {
        let samples = [
            (vec![(0.0, 0.0, 1u32)], vec![], 0.5),
            (vec![(0.0, 0.0, 2)], vec![], 1.0),
            (vec![(0.0, 0.0, 2)], vec![], 0.5),
            (vec![(0.0, 0.0, 3)], vec![], 0.0),
            (vec![(0.0, 0.0, 2)], vec![(3.0, 0.0, 1)], 0.0),
            (vec![(0.0, 0.0, 1)], vec![(3.0, 0.0, 2)], 0.6),
            (vec![(4.125, 0.0, 1), (-4.125, 0.0, 1)], vec![], 0.75),
            (vec![(0.0, 0.0, 1)], vec![(5.0, 0.0, 1)], 1.2),
        ];
        for (poles, antipoles, a) in samples {
            let cfg = VortexConfig {
                poles: poles
                    .iter()
                    .map(|&(x, y, m)| MarkedPoint::new(x, y, m))
                    .collect(),
                antipoles: antipoles
                    .iter()
                    .map(|&(x, y, m)| MarkedPoint::new(x, y, m))
                    .collect(),
                a,
                allow_heavy_poles: true,
                ..Default::default()
            };
            let dp = derive_params(&cfg).unwrap();
            let bands = feasible_ranges(&dp);
            assert!(!bands.is_empty());
            assert_eq!(bands[0].lo, f64::NEG_INFINITY);
            assert_eq!(bands.last().unwrap().hi, f64::INFINITY);
            for w in bands.windows(2) {
                assert_eq!(
                    w[0].hi, w[1].lo,
                    "gap between bands in {:?}",
                    (w[0], w[1])
                );
                // Exactly one side owns the shared endpoint.
                assert!(
                    w[0].hi_closed ^ w[1].lo_closed,
                    "endpoint ownership broken at {}",
                    w[0].hi
                );
            }
            // Point queries never fall through to the default.
            for k in -40..40 {
                let beta = k as f64 * 0.25;
                let hits = bands.iter().filter(|b| b.contains(beta)).count();
                assert_eq!(hits, 1, "beta = {beta} hit {hits} bands");
            }
        }
    }

    #[test]
    fn sigma_defaults_respect_separation_and_cap() {
        let cfg = VortexConfig {
            poles: vec![MarkedPoint::new(0.0, 0.0, 1), MarkedPoint::new(1.5, 0.0, 1)],
            a: 0.3,
            ..Default::default()
        };
        assert!((cfg.sigma_value() - 0.6).abs() < 1e-14);
        let single = desk();
        assert!((single.sigma_value() - 1.0).abs() < 1e-14);
        assert!((single.r0_value() - CORE_RADIUS).abs() < 1e-12);
    }

    #[test]
    fn overlapping_regularization_balls_rejected() {
        let cfg = VortexConfig {
            poles: vec![MarkedPoint::new(0.0, 0.0, 1), MarkedPoint::new(1.0, 0.0, 1)],
            a: 0.3,
            sigma: Some(0.8),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
