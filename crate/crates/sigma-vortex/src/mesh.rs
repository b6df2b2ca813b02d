//! Discretizations: a log-spaced radial mesh (the fast path for
//! rotationally symmetric configurations) and a node-centered square grid
//! with a Jacobi-preconditioned conjugate-gradient solver.

use crate::error::{Result, VortexError};
use crate::problem::Point;
use crate::util::solve_tridiagonal;
use rayon::prelude::*;

/// Boundary handling for a linear solve.
#[derive(Debug, Clone)]
pub enum Bc {
    /// Zero-slope ghosts at both radial ends.
    Neumann,
    /// Dirichlet with one constant value on the whole boundary.
    Constant(f64),
    /// Dirichlet with per-node values (only boundary entries are read).
    Values(Vec<f64>),
}

/// Log-spaced radial mesh on [r_min, r_max]. In s = ln r the 2D Laplacian
/// becomes e^(-2s) d2/ds2, so a uniform s-grid carries the whole solver.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub h: f64,
    weights: Vec<f64>,
}

impl RadialGrid {
    pub fn new(r_min: f64, r_max: f64, nodes: usize) -> Self {
        assert!(nodes >= 8 && r_min > 0.0 && r_max > r_min);
        let s0 = r_min.ln();
        let s1 = r_max.ln();
        let h = (s1 - s0) / (nodes - 1) as f64;
        let s: Vec<f64> = (0..nodes).map(|i| s0 + h * i as f64).collect();
        let r: Vec<f64> = s.iter().map(|v| v.exp()).collect();
        // Trapezoid in s of 2 pi r^2 f. These weights are exactly the left
        // null vector of the Neumann operator, which is what makes the
        // pinned corrector solve satisfy every Neumann row at once.
        let mut weights: Vec<f64> = r
            .iter()
            .map(|ri| 2.0 * std::f64::consts::PI * ri * ri * h)
            .collect();
        weights[0] *= 0.5;
        weights[nodes - 1] *= 0.5;
        RadialGrid { r, s, h, weights }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, vals: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(vals)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Discrete -Laplacian with mirrored (zero-slope) ghosts at both ends.
    pub fn neg_lap(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let h2 = self.h * self.h;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let vm = if i == 0 { v[1] } else { v[i - 1] };
            let vp = if i == n - 1 { v[n - 2] } else { v[i + 1] };
            out[i] = -(vp - 2.0 * v[i] + vm) / (h2 * self.r[i] * self.r[i]);
        }
        out
    }

    /// Solves (-Lap + K) v = rhs with zero-slope ends. K must be
    /// nonnegative and positive somewhere.
    pub fn solve_neumann(&self, k: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if !k.iter().any(|&x| x > 1e-300) {
            return Err(VortexError::IllConditioned(
                "zero-shift Neumann system has a free constant".into(),
            ));
        }
        let h2 = self.h * self.h;
        let mut diag = vec![0.0; n];
        let mut lower = vec![0.0; n - 1];
        let mut upper = vec![0.0; n - 1];
        let mut b = vec![0.0; n];
        for i in 0..n {
            let r2 = self.r[i] * self.r[i];
            diag[i] = 2.0 + h2 * r2 * k[i];
            b[i] = h2 * r2 * rhs[i];
        }
        for i in 0..n - 1 {
            lower[i] = -1.0;
            upper[i] = -1.0;
        }
        // Mirrored ghosts fold into doubled off-diagonal couplings.
        upper[0] = -2.0;
        lower[n - 2] = -2.0;
        Ok(solve_tridiagonal(&lower, &diag, &upper, &b))
    }

    /// Solves -Lap w = rhs with a zero-slope inner end and w = 0 pinned at
    /// the outer node. When rhs has zero discrete mass in this grid's
    /// quadrature, the pinned row's Neumann residual vanishes identically,
    /// so w is a discrete-exact potential.
    pub fn solve_pinned(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let h2 = self.h * self.h;
        let mut diag = vec![2.0; n];
        let mut lower = vec![-1.0; n - 1];
        let mut upper = vec![-1.0; n - 1];
        let mut b: Vec<f64> = (0..n)
            .map(|i| h2 * self.r[i] * self.r[i] * rhs[i])
            .collect();
        upper[0] = -2.0;
        // Replace the outer row by the gauge w = 0.
        diag[n - 1] = 1.0;
        lower[n - 2] = 0.0;
        b[n - 1] = 0.0;
        solve_tridiagonal(&lower, &diag, &upper, &b)
    }
}

/// Statistics from one conjugate-gradient solve.
#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Node-centered square grid on [-half, half]^2 with 5-point coupling.
#[derive(Debug, Clone)]
pub struct PlanarGrid {
    pub n: usize,
    pub h: f64,
    pub half: f64,
    weights: Vec<f64>,
}

impl PlanarGrid {
    pub fn new(half: f64, n: usize) -> Self {
        assert!(n >= 9 && n % 2 == 1, "odd node count keeps the origin on a node");
        let h = 2.0 * half / (n - 1) as f64;
        let mut weights = vec![h * h; n * n];
        for idx in 0..n * n {
            let (i, j) = (idx % n, idx / n);
            let mut w = h * h;
            if i == 0 || i == n - 1 {
                w *= 0.5;
            }
            if j == 0 || j == n - 1 {
                w *= 0.5;
            }
            weights[idx] = w;
        }
        PlanarGrid { n, h, half, weights }
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn point(&self, idx: usize) -> Point {
        let (i, j) = (idx % self.n, idx / self.n);
        Point::new(
            -self.half + self.h * i as f64,
            -self.half + self.h * j as f64,
        )
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = (idx % self.n, idx / self.n);
        i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, vals: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(vals)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Discrete -Laplacian on interior nodes; boundary rows report zero.
    pub fn neg_lap(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let h2 = self.h * self.h;
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n)
            .enumerate()
            .for_each(|(j, row)| {
                if j == 0 || j == n - 1 {
                    return;
                }
                for i in 1..n - 1 {
                    let idx = j * n + i;
                    row[i] = (4.0 * v[idx] - v[idx - 1] - v[idx + 1] - v[idx - n] - v[idx + n])
                        / h2;
                }
            });
        out
    }

    fn apply(&self, k: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.n;
        let h2 = self.h * self.h;
        out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            if j == 0 || j == n - 1 {
                for i in 0..n {
                    row[i] = 0.0;
                }
                return;
            }
            for i in 1..n - 1 {
                let idx = j * n + i;
                row[i] = (4.0 * v[idx] - v[idx - 1] - v[idx + 1] - v[idx - n] - v[idx + n]) / h2
                    + k[idx] * v[idx];
            }
            row[0] = 0.0;
            row[n - 1] = 0.0;
        });
    }

    /// Deterministic dot product over interior nodes: per-row partial sums
    /// are computed in parallel but combined in row order.
    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.n;
        let partials: Vec<f64> = (1..n - 1)
            .into_par_iter()
            .map(|j| {
                let mut acc = 0.0;
                for i in 1..n - 1 {
                    let idx = j * n + i;
                    acc += a[idx] * b[idx];
                }
                acc
            })
            .collect();
        partials.iter().sum()
    }

    fn boundary_value(&self, bc: &Bc, idx: usize) -> f64 {
        match bc {
            Bc::Neumann => 0.0,
            Bc::Constant(c) => *c,
            Bc::Values(vals) => vals[idx],
        }
    }

    /// Solves (-Lap + K) v = rhs with Dirichlet boundary data, by CG with
    /// Jacobi preconditioning. K must be nonnegative.
    pub fn solve_dirichlet(
        &self,
        k: &[f64],
        rhs: &[f64],
        bc: &Bc,
        warm: Option<&[f64]>,
    ) -> Result<(Vec<f64>, CgStats)> {
        let n = self.n;
        let total = n * n;
        let h2 = self.h * self.h;
        let mut v = vec![0.0; total];
        if let Some(w) = warm {
            v.copy_from_slice(w);
        }
        for idx in 0..total {
            if self.is_boundary(idx) {
                v[idx] = self.boundary_value(bc, idx);
            }
        }
        // Residual r = b - A v on interior nodes (boundary values of v are
        // already the Dirichlet data, so no separate rhs lift is needed).
        let mut av = vec![0.0; total];
        self.apply(k, &v, &mut av);
        let mut res: Vec<f64> = (0..total)
            .map(|idx| {
                if self.is_boundary(idx) {
                    0.0
                } else {
                    rhs[idx] - av[idx]
                }
            })
            .collect();
        let bnorm = {
            let mut m = 0.0_f64;
            for idx in 0..total {
                if !self.is_boundary(idx) {
                    m = m.max(rhs[idx].abs());
                }
            }
            m.max(1e-300)
        };
        // Keep the target above the attainable CG floor (~ cond * eps).
        let tol = 1e-11 * bnorm;
        let precond: Vec<f64> = (0..total)
            .map(|idx| {
                if self.is_boundary(idx) {
                    0.0
                } else {
                    1.0 / (4.0 / h2 + k[idx].max(0.0))
                }
            })
            .collect();
        let mut z: Vec<f64> = res.iter().zip(&precond).map(|(r, p)| r * p).collect();
        let mut p = z.clone();
        let mut rz = self.dot(&res, &z);
        let mut stats = CgStats {
            iterations: 0,
            residual: f64::INFINITY,
        };
        let max_iter = 20 * total;
        let mut ap = vec![0.0; total];
        let mut best = f64::INFINITY;
        let mut last_improved = 0usize;
        for it in 0..max_iter {
            let rmax = res.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
            stats.iterations = it;
            stats.residual = rmax;
            if rmax <= tol {
                return Ok((v, stats));
            }
            if rmax < 0.5 * best {
                best = rmax;
                last_improved = it;
            }
            // Roundoff floor reached: accept if meaningfully converged.
            if it > last_improved + 1000 {
                if rmax <= 1e-8 * bnorm {
                    return Ok((v, stats));
                }
                return Err(VortexError::NoConvergence {
                    iterations: it,
                    residual: rmax,
                });
            }
            self.apply(k, &p, &mut ap);
            let pap = self.dot(&p, &ap);
            if pap <= 0.0 {
                return Err(VortexError::IllConditioned(format!(
                    "CG curvature {pap} at iteration {it}"
                )));
            }
            let alpha = rz / pap;
            for idx in 0..total {
                if !self.is_boundary(idx) {
                    v[idx] += alpha * p[idx];
                    res[idx] -= alpha * ap[idx];
                }
            }
            for idx in 0..total {
                z[idx] = res[idx] * precond[idx];
            }
            let rz_new = self.dot(&res, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for idx in 0..total {
                p[idx] = z[idx] + beta * p[idx];
            }
        }
        Err(VortexError::NoConvergence {
            iterations: max_iter,
            residual: stats.residual,
        })
    }

    /// Bilinear sample of a nodal field at an arbitrary interior point.
    pub fn sample(&self, vals: &[f64], x: f64, y: f64) -> f64 {
        let fx = (x + self.half) / self.h;
        let fy = (y + self.half) / self.h;
        let i = (fx.floor() as isize).clamp(0, self.n as isize - 2) as usize;
        let j = (fy.floor() as isize).clamp(0, self.n as isize - 2) as usize;
        let tx = (fx - i as f64).clamp(0.0, 1.0);
        let ty = (fy - j as f64).clamp(0.0, 1.0);
        let idx = j * self.n + i;
        let v00 = vals[idx];
        let v10 = vals[idx + 1];
        let v01 = vals[idx + self.n];
        let v11 = vals[idx + self.n + 1];
        v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty
            + v11 * tx * ty
    }

    /// Dirichlet data from the monopole and dipole moments of a source:
    /// the free-space potential expansion evaluated on every node.
    pub fn multipole_bc(&self, source: &[f64]) -> Vec<f64> {
        let mass = self.integrate(source);
        let mut dx = 0.0;
        let mut dy = 0.0;
        for idx in 0..self.len() {
            let p = self.point(idx);
            dx += self.weights[idx] * p.x * source[idx];
            dy += self.weights[idx] * p.y * source[idx];
        }
        let inv2pi = 1.0 / (2.0 * std::f64::consts::PI);
        (0..self.len())
            .map(|idx| {
                let p = self.point(idx);
                let r2 = (p.x * p.x + p.y * p.y).max(1e-12);
                -inv2pi * (0.5 * mass * r2.ln() - (p.x * dx + p.y * dy) / r2)
            })
            .collect()
    }
}

/// One discretization, radial or planar, behind a common face.
#[derive(Debug, Clone)]
pub enum Grid {
    Radial(RadialGrid),
    Planar(PlanarGrid),
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::Radial(g) => g.len(),
            Grid::Planar(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> Point {
        match self {
            Grid::Radial(g) => Point::new(g.r[idx], 0.0),
            Grid::Planar(g) => g.point(idx),
        }
    }

    /// Nodes excluded from pointwise certificates (planar Dirichlet rim).
    pub fn is_active(&self, idx: usize) -> bool {
        match self {
            Grid::Radial(_) => true,
            Grid::Planar(g) => !g.is_boundary(idx),
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            Grid::Radial(g) => g.weights(),
            Grid::Planar(g) => g.weights(),
        }
    }

    pub fn integrate(&self, vals: &[f64]) -> f64 {
        match self {
            Grid::Radial(g) => g.integrate(vals),
            Grid::Planar(g) => g.integrate(vals),
        }
    }

    pub fn neg_lap(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Grid::Radial(g) => g.neg_lap(v),
            Grid::Planar(g) => g.neg_lap(v),
        }
    }

    /// Roundoff envelope of each neg_lap row on these values. Two sources
    /// share the same 1/(h r)^2 amplification near a radial grid's inner
    /// end: recomputing the stencil on stored values, and the backward
    /// error the fields picked up in the solves that produced them.
    /// Certificates treat residuals inside the envelope as zero.
    pub fn lap_noise(&self, v: &[f64]) -> Vec<f64> {
        let eps = 32.0 * f64::EPSILON;
        match self {
            Grid::Radial(g) => {
                let n = v.len();
                let h2 = g.h * g.h;
                (0..n)
                    .map(|i| {
                        let vm = if i == 0 { v[1] } else { v[i - 1] };
                        let vp = if i == n - 1 { v[n - 2] } else { v[i + 1] };
                        let m = vm.abs().max(2.0 * v[i].abs()).max(vp.abs());
                        4.0 * eps * m / (h2 * g.r[i] * g.r[i])
                    })
                    .collect()
            }
            Grid::Planar(g) => {
                let n = g.n;
                let h2 = g.h * g.h;
                let mut out = vec![0.0; n * n];
                for j in 1..n - 1 {
                    for i in 1..n - 1 {
                        let idx = j * n + i;
                        let m = (4.0 * v[idx].abs())
                            .max(v[idx - 1].abs())
                            .max(v[idx + 1].abs())
                            .max(v[idx - n].abs())
                            .max(v[idx + n].abs());
                        out[idx] = 4.0 * eps * m / h2;
                    }
                }
                out
            }
        }
    }

    /// Shifted linear solve (-Lap + K) v = rhs under this grid's boundary
    /// handling. Radial grids use zero-slope ends and ignore `bc`.
    pub fn solve(
        &self,
        k: &[f64],
        rhs: &[f64],
        bc: &Bc,
        warm: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        match self {
            Grid::Radial(g) => g.solve_neumann(k, rhs),
            Grid::Planar(g) => Ok(g.solve_dirichlet(k, rhs, bc, warm)?.0),
        }
    }

    /// Potential-style solve -Lap w = rhs: radial grids pin the outer node
    /// (exact for discretely mass-free sources), planar grids take
    /// Dirichlet data from the source's multipole expansion.
    pub fn corrector(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Grid::Radial(g) => Ok(g.solve_pinned(rhs)),
            Grid::Planar(g) => {
                let bc = Bc::Values(g.multipole_bc(rhs));
                let zero = vec![0.0; g.len()];
                Ok(g.solve_dirichlet(&zero, rhs, &bc, None)?.0)
            }
        }
    }
}
