//! Regularized field decomposition: the smooth log cutoff, the two radial
//! envelope functions with explicit Laplacians, the bounded weight V, and
//! the compactly supported source terms that replace the point charges.

use crate::error::{Result, VortexError};
use crate::problem::{Point, VortexConfig, CORE_RADIUS};
use crate::util::gauss_panels;
use std::f64::consts::{E, LN_2, PI};

// Quintic blend coefficients in s = 2t - 1. They interpolate between the
// Hermite data of ln t at t = 1/2 (value -ln 2, slope 2, curvature -4) and
// the flat state (0, 0, 0) at t = 1, making the cutoff C^2 everywhere.
const B3: f64 = 10.0 * LN_2 - 4.5;
const B4: f64 = -15.0 * LN_2 + 6.5;
const B5: f64 = 6.0 * LN_2 - 2.5;

/// Smooth log cutoff: ln t on (0, 1/2], a quintic rise on [1/2, 1],
/// identically zero beyond 1. Nondecreasing and C^2.
pub fn zeta(t: f64) -> f64 {
    if t <= 0.0 {
        f64::NEG_INFINITY
    } else if t <= 0.5 {
        t.ln()
    } else if t < 1.0 {
        let s = 2.0 * t - 1.0;
        -LN_2 + s * (1.0 + s * (-0.5 + s * (B3 + s * (B4 + s * B5))))
    } else {
        0.0
    }
}

/// First derivative of the cutoff.
pub fn zeta_d1(t: f64) -> f64 {
    if t <= 0.0 {
        f64::INFINITY
    } else if t <= 0.5 {
        1.0 / t
    } else if t < 1.0 {
        let s = 2.0 * t - 1.0;
        2.0 * (1.0 + s * (-1.0 + s * (3.0 * B3 + s * (4.0 * B4 + s * 5.0 * B5))))
    } else {
        0.0
    }
}

/// Second derivative of the cutoff.
pub fn zeta_d2(t: f64) -> f64 {
    if t <= 0.0 {
        f64::NEG_INFINITY
    } else if t <= 0.5 {
        -1.0 / (t * t)
    } else if t < 1.0 {
        let s = 2.0 * t - 1.0;
        4.0 * (-1.0 + s * (6.0 * B3 + s * (12.0 * B4 + s * 20.0 * B5)))
    } else {
        0.0
    }
}

/// C^2 plateau bump: 1 up to 1/2, quintic descent, 0 beyond 1. Used as a
/// partition of unity in singular quadratures.
pub fn plateau_bump(t: f64) -> f64 {
    if t <= 0.5 {
        1.0
    } else if t < 1.0 {
        let s = 2.0 * t - 1.0;
        1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    } else {
        0.0
    }
}

const R2: f64 = CORE_RADIUS * CORE_RADIUS;
const R4: f64 = R2 * R2;
// Curvature of the slow envelope at the matching circle, in u = r^2.
const T2: f64 = -(2.0 * E + 1.0) / (4.0 * E * E * R4);

/// Log of the growth envelope: exactly ln r beyond the core radius, a
/// quadratic in r^2 inside, C^2 at the seam, and bounded below by a
/// positive constant (value e - 3/4 at the origin).
pub fn ln_scale(r: f64) -> f64 {
    let u = r * r;
    if u <= R2 {
        let d = u - R2;
        E + d / (2.0 * R2) - d * d / (4.0 * R4)
    } else {
        r.ln()
    }
}

/// Laplacian of `ln_scale`: nonnegative, supported in the core disc, with
/// total mass exactly 2 pi.
pub fn lap_ln_scale(r: f64) -> f64 {
    let u = r * r;
    if u <= R2 {
        (4.0 / R2) * (1.0 - u / R2)
    } else {
        0.0
    }
}

/// Log of the slow envelope: exactly ln ln r beyond the core radius,
/// quadratic in r^2 inside, C^2, positive everywhere.
pub fn ln_slow_scale(r: f64) -> f64 {
    let u = r * r;
    if u <= R2 {
        let d = u - R2;
        1.0 + d / (2.0 * R2 * E) + 0.5 * T2 * d * d
    } else {
        r.ln().ln()
    }
}

/// Laplacian of `ln_slow_scale`: positive core part of mass 2 pi / e,
/// negative tail -1/(r ln r)^2 carrying exactly the opposite mass.
pub fn lap_ln_slow_scale(r: f64) -> f64 {
    let u = r * r;
    if u <= R2 {
        2.0 / (R2 * E) + 4.0 * T2 * (2.0 * u - R2)
    } else {
        let l = r.ln();
        -1.0 / (u * l * l)
    }
}

/// Bounded positive profile used by the borderline flux matcher; takes
/// values in (0, 1] and decays like r^-2.
pub fn matching_profile(r: f64) -> f64 {
    1.0 / (1.0 + r * r)
}

/// Laplacian of the matching profile, 4 (r^2 - 1) / (1 + r^2)^3.
/// Integrates to zero over the plane: profile translations are
/// flux-neutral.
pub fn lap_matching_profile(r: f64) -> f64 {
    let q = 1.0 + r * r;
    4.0 * (r * r - 1.0) / (q * q * q)
}

/// The saturated density e^u / (1 + e^u)^(1+a), evaluated stably. It is
/// sandwiched between min(e^u, e^-au) and 2^-(1+a) times that envelope.
pub fn sat_density(u: f64, a: f64) -> f64 {
    if u == f64::NEG_INFINITY {
        return 0.0;
    }
    if u == f64::INFINITY {
        return if a > 0.0 { 0.0 } else { 1.0 };
    }
    (u - (1.0 + a) * crate::util::softplus(u)).exp()
}

/// Precomputed field evaluators for one validated configuration.
#[derive(Debug, Clone)]
pub struct FieldBundle {
    pub cfg: VortexConfig,
    pub a: f64,
    pub amplitude: f64,
    pub sigma: f64,
    pub r0: f64,
    pub n: u32,
    pub m: u32,
}

/// Relative defect of the regularized source mass against the flux target.
#[derive(Debug, Clone, Copy)]
pub struct SourceMassReport {
    pub mass: f64,
    pub expected: f64,
    pub rel_err: f64,
}

impl FieldBundle {
    pub fn new(cfg: &VortexConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FieldBundle {
            cfg: cfg.clone(),
            a: cfg.a,
            amplitude: cfg.amplitude,
            sigma: cfg.sigma_value(),
            r0: cfg.r0_value(),
            n: cfg.n_total(),
            m: cfg.m_total(),
        })
    }

    /// Regularized pole logarithm: 2 sum_j n_j zeta(rho_j / sigma).
    /// Nonpositive; -infinity exactly at a pole.
    pub fn nu_pole(&self, p: Point) -> f64 {
        let mut acc = 0.0;
        for q in &self.cfg.poles {
            acc += 2.0 * q.mult as f64 * zeta(p.dist(&q.at) / self.sigma);
        }
        acc
    }

    /// Regularized antipole logarithm, same shape over the antipoles.
    pub fn nu_antipole(&self, p: Point) -> f64 {
        let mut acc = 0.0;
        for q in &self.cfg.antipoles {
            acc += 2.0 * q.mult as f64 * zeta(p.dist(&q.at) / self.sigma);
        }
        acc
    }

    /// Singular split D: -infinity at poles, +infinity at antipoles,
    /// zero away from all regularization balls.
    pub fn log_gap(&self, p: Point) -> f64 {
        self.nu_pole(p) - self.nu_antipole(p)
    }

    /// ln P from the product form; +infinity at poles when a > 0.
    pub fn ln_p(&self, p: Point) -> f64 {
        if self.a == 0.0 {
            return self.amplitude.ln();
        }
        let mut acc = self.amplitude.ln();
        for q in &self.cfg.poles {
            acc -= 2.0 * self.a * q.mult as f64 * p.dist(&q.at).ln();
        }
        acc
    }

    /// P with an explicit singular-point signal at exact pole hits.
    pub fn eval_p(&self, p: Point) -> Result<f64> {
        if self.a > 0.0 {
            for q in &self.cfg.poles {
                if p.dist(&q.at) == 0.0 {
                    return Err(VortexError::SingularPoint { x: p.x, y: p.y });
                }
            }
        }
        Ok(self.ln_p(p).exp())
    }

    /// ln V, the pole-regularized weight logarithm. Finite at every pole
    /// (constant ln(A0) - 2aN ln(sigma) when a single pole cluster fills the
    /// plateau), +infinity at antipoles.
    pub fn ln_v(&self, p: Point) -> f64 {
        if self.a == 0.0 {
            return self.amplitude.ln();
        }
        let mut acc = self.amplitude.ln();
        let half = 0.5 * self.sigma;
        for q in &self.cfg.poles {
            let rho = p.dist(&q.at);
            let psi = if rho <= half {
                -self.sigma.ln()
            } else {
                zeta(rho / self.sigma) - rho.ln()
            };
            acc += 2.0 * self.a * q.mult as f64 * psi;
        }
        for q in &self.cfg.antipoles {
            let rho = p.dist(&q.at);
            acc -= 2.0 * self.a * q.mult as f64 * zeta(rho / self.sigma);
        }
        acc
    }

    /// The ladder weight V lambda^(-a beta). Returns 0 at exact antipole
    /// hits, where the pointwise limit is infinite but carries no mass.
    pub fn eval_w_beta(&self, p: Point, beta: f64) -> f64 {
        let lv = self.ln_v(p);
        if lv == f64::INFINITY {
            return 0.0;
        }
        (lv - self.a * beta * ln_scale(p.norm())).exp()
    }

    /// Smeared pole source: supported on the annuli sigma/2 <= rho_j <=
    /// sigma, identically zero elsewhere, total mass 4 pi N.
    pub fn f_pole(&self, p: Point) -> f64 {
        self.smeared(p, &self.cfg.poles)
    }

    /// Smeared antipole source, total mass 4 pi M.
    pub fn f_antipole(&self, p: Point) -> f64 {
        self.smeared(p, &self.cfg.antipoles)
    }

    fn smeared(&self, p: Point, pts: &[crate::problem::MarkedPoint]) -> f64 {
        let s = self.sigma;
        let mut acc = 0.0;
        for q in pts {
            let rho = p.dist(&q.at);
            let t = rho / s;
            if (0.5..=1.0).contains(&t) {
                acc -= 2.0 * q.mult as f64 * (zeta_d2(t) / (s * s) + zeta_d1(t) / (s * rho));
            }
        }
        acc
    }

    /// Compactly supported source for growth rate beta.
    pub fn source_compact(&self, p: Point, beta: f64) -> f64 {
        self.f_pole(p) - self.f_antipole(p) + beta * lap_ln_scale(p.norm())
    }

    /// Source for the borderline branch: the compact part at the critical
    /// rate minus twice the slow-envelope Laplacian (mass unchanged, but
    /// support extends to infinity with an r^-2 (ln r)^-2 tail).
    pub fn source_critical(&self, p: Point, beta_star: f64) -> f64 {
        self.source_compact(p, beta_star) - 2.0 * lap_ln_slow_scale(p.norm())
    }

    /// Integrates the regularized source by per-piece Gauss panels on the
    /// closed-form radial profiles and reports the defect against the flux
    /// target 2 pi (2(N - M) + beta). `budget` scales the panel counts.
    pub fn check_source_mass(&self, beta: f64, critical: bool, budget: usize) -> SourceMassReport {
        let panels = (budget / 128).max(4);
        let s = self.sigma;
        let annulus = |rho: f64| zeta_d2(rho / s) / (s * s) + zeta_d1(rho / s) / (s * rho);
        let ring = gauss_panels(&|rho| annulus(rho) * rho, 0.5 * s, s, panels);
        let mut mass = 0.0;
        for q in &self.cfg.poles {
            mass += -2.0 * q.mult as f64 * 2.0 * PI * ring;
        }
        for q in &self.cfg.antipoles {
            mass -= -2.0 * q.mult as f64 * 2.0 * PI * ring;
        }
        mass += beta * 2.0 * PI * gauss_panels(&|r| lap_ln_scale(r) * r, 0.0, CORE_RADIUS, panels);
        if critical {
            let inner =
                gauss_panels(&|r| lap_ln_slow_scale(r) * r, 0.0, CORE_RADIUS, panels);
            // Outer tail in t = ln r the integrand r * lap is exactly -1/t^2,
            // so integrate to a cut and append the exact remainder.
            let t_cut = 40.0;
            let outer = gauss_panels(&|t: f64| -1.0 / (t * t), E, t_cut, panels) + (-1.0 / t_cut);
            mass += -2.0 * 2.0 * PI * (inner + outer);
        }
        let expected = 2.0 * PI * (2.0 * (self.n as f64 - self.m as f64) + beta);
        let rel_err = (mass - expected).abs() / (1.0 + expected.abs());
        SourceMassReport {
            mass,
            expected,
            rel_err,
        }
    }
}
