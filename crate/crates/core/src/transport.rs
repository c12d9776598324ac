//! Forward scalar solvers: pure transport (ε = 0) and ε-regularized
//! advection-diffusion with homogeneous Neumann walls, plus the linearized
//! (directional-derivative) equation.
//!
//! Advection is conservative flux-form SSP-RK3 with a third-order
//! upwind-biased flux. The upwind dissipation coefficient `|u|` is replaced by
//! the smooth surrogate `u²/√(u²+η²)` with a small velocity scale `η`, which
//! vanishes at stagnation and keeps the whole step differentiable in the
//! velocity; the adjoint module transposes these operators exactly.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::spectral::{thomas_const_off, C64, XFft};
use crate::stokes::{ControlTrajectory, StokesSolver, VelocityTrajectory};

/// Time-indexed scalar snapshots plus the ε they were produced with.
#[derive(Debug, Clone)]
pub struct ScalarTrajectory {
    pub snapshots: Vec<ScalarField>,
    pub eps: f64,
    pub dt: f64,
}

impl ScalarTrajectory {
    pub fn nt(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn terminal(&self) -> &ScalarField {
        self.snapshots.last().unwrap()
    }
}

/// Smoothed |u|: `u² / √(u² + η²)`.
#[inline]
pub(crate) fn psi(u: f64, eta: f64) -> f64 {
    u * u / (u * u + eta * eta).sqrt()
}

/// d/du of `psi`.
#[inline]
pub(crate) fn psi_prime(u: f64, eta: f64) -> f64 {
    let s = u * u + eta * eta;
    (u * u * u + 2.0 * u * eta * eta) / (s * s.sqrt())
}

pub struct TransportSolver {
    pub grid: Grid,
    pub eps: f64,
    pub dt: f64,
    pub cfl: f64,
    /// Velocity scale of the smoothed upwinding.
    pub eta: f64,
    fft: XFft,
}

impl TransportSolver {
    pub fn new(grid: Grid, eps: f64, dt: f64) -> Result<Self> {
        if eps < 0.0 || dt <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "TransportSolver requires eps >= 0 and dt > 0 (got eps={eps}, dt={dt})"
            )));
        }
        let hmin = grid.hx.min(grid.hy);
        Ok(Self {
            grid,
            eps,
            dt,
            cfl: 0.5,
            // The smoothing scale trades upwind dissipation against the
            // curvature of the flux in u: too small and J picks up large
            // third derivatives that poison finite-difference checks of the
            // gradient; too large and the scheme loses its upwind bias.
            eta: 0.3 * hmin / dt,
            fft: XFft::new(grid.nx, grid.lx),
        })
    }

    pub fn cfl_limit(&self, vmax: f64) -> f64 {
        self.cfl * self.grid.hx.min(self.grid.hy) / vmax.max(1e-300)
    }

    fn check_cfl(&self, vmax: f64, step: usize) -> Result<()> {
        let limit = self.cfl_limit(vmax);
        if self.dt > limit {
            return Err(Error::CflViolation {
                step,
                dt: self.dt,
                limit,
                vmax,
            });
        }
        Ok(())
    }

    /// One step: SSP-RK3 advection by the midpoint velocity, then implicit
    /// Crank-Nicolson diffusion when ε > 0. Mass is conserved to roundoff.
    pub fn step(
        &self,
        theta: &ScalarField,
        v_now: &VectorField,
        v_next: &VectorField,
    ) -> Result<ScalarField> {
        let v_mid = midpoint(v_now, v_next);
        self.check_cfl(v_mid.max_abs(), 0)?;
        let out = self.step_with_mid(theta, &v_mid);
        if !out.is_finite() {
            return Err(Error::NonFinite {
                context: "transport_step",
            });
        }
        Ok(out)
    }

    pub(crate) fn step_with_mid(&self, theta: &ScalarField, v_mid: &VectorField) -> ScalarField {
        let dt = self.dt;
        let l0 = self.apply_adv(v_mid, theta);
        let mut s1 = theta.clone();
        s1.axpy(dt, &l0);
        let l1 = self.apply_adv(v_mid, &s1);
        let mut s2 = theta.clone();
        s2.scale(0.75);
        s2.axpy(0.25, &s1);
        s2.axpy(0.25 * dt, &l1);
        let l2 = self.apply_adv(v_mid, &s2);
        let mut s3 = theta.clone();
        s3.scale(1.0 / 3.0);
        s3.axpy(2.0 / 3.0, &s2);
        s3.axpy(2.0 / 3.0 * dt, &l2);
        if self.eps > 0.0 {
            self.diffuse(&mut s3);
        }
        s3
    }

    /// Transpose of `step_with_mid` in the scalar argument.
    pub(crate) fn step_transpose(&self, rho: &ScalarField, v_mid: &VectorField) -> ScalarField {
        let mut mu = rho.clone();
        if self.eps > 0.0 {
            self.diffuse(&mut mu); // symmetric
        }
        // R = I + dt L + dt²/2 L² + dt³/6 L³, so Rᵀ is the same polynomial in
        // Lᵀ; run the identical stage recursion with the transposed operator.
        let dt = self.dt;
        let l0 = self.apply_adv_t(v_mid, &mu);
        let mut s1 = mu.clone();
        s1.axpy(dt, &l0);
        let l1 = self.apply_adv_t(v_mid, &s1);
        let mut s2 = mu.clone();
        s2.scale(0.75);
        s2.axpy(0.25, &s1);
        s2.axpy(0.25 * dt, &l1);
        let l2 = self.apply_adv_t(v_mid, &s2);
        let mut s3 = mu;
        s3.scale(1.0 / 3.0);
        s3.axpy(2.0 / 3.0, &s2);
        s3.axpy(2.0 / 3.0 * dt, &l2);
        s3
    }

    /// Transpose of one step with accumulation of the velocity cotangent:
    /// returns (θ̄, v̄_mid) for the incoming scalar cotangent `rho`.
    pub(crate) fn step_transpose_with_forcing(
        &self,
        rho: &ScalarField,
        theta: &ScalarField,
        v_mid: &VectorField,
    ) -> (ScalarField, VectorField) {
        let dt = self.dt;
        // Recompute the forward stages from θ = θ^{n}.
        let l0 = self.apply_adv(v_mid, theta);
        let mut s1 = theta.clone();
        s1.axpy(dt, &l0);
        let l1 = self.apply_adv(v_mid, &s1);
        let mut s2 = theta.clone();
        s2.scale(0.75);
        s2.axpy(0.25, &s1);
        s2.axpy(0.25 * dt, &l1);

        let mut mu = rho.clone();
        if self.eps > 0.0 {
            self.diffuse(&mut mu);
        }
        let mut vbar = VectorField::zeros(self.grid);

        // θ^{n+1} = θ/3 + 2/3 (s2 + dt L s2)
        let mut s2_bar = mu.clone();
        s2_bar.scale(2.0 / 3.0);
        s2_bar.axpy(2.0 / 3.0 * dt, &self.apply_adv_t(v_mid, &mu));
        self.accumulate_flux_forcing_at(v_mid, &s2, &mu, 2.0 / 3.0 * dt, &mut vbar);
        let mut theta_bar = mu.clone();
        theta_bar.scale(1.0 / 3.0);

        // s2 = 3/4 θ + 1/4 (s1 + dt L s1)
        let mut s1_bar = s2_bar.clone();
        s1_bar.scale(0.25);
        s1_bar.axpy(0.25 * dt, &self.apply_adv_t(v_mid, &s2_bar));
        self.accumulate_flux_forcing_at(v_mid, &s1, &s2_bar, 0.25 * dt, &mut vbar);
        theta_bar.axpy(0.75, &s2_bar);

        // s1 = θ + dt L θ
        theta_bar.axpy(1.0, &s1_bar);
        theta_bar.axpy(dt, &self.apply_adv_t(v_mid, &s1_bar));
        self.accumulate_flux_forcing_at(v_mid, theta, &s1_bar, dt, &mut vbar);

        (theta_bar, vbar)
    }

    /// Directional derivative of one step with respect to (θ, v) in the
    /// direction (z, w_mid); used by the linearized solver.
    pub(crate) fn step_jvp(
        &self,
        z: &ScalarField,
        theta: &ScalarField,
        v_mid: &VectorField,
        w_mid: &VectorField,
    ) -> ScalarField {
        let dt = self.dt;
        let mut s1 = theta.clone();
        s1.axpy(dt, &self.apply_adv(v_mid, theta));
        let mut s2 = theta.clone();
        s2.scale(0.75);
        s2.axpy(0.25, &s1);
        s2.axpy(0.25 * dt, &self.apply_adv(v_mid, &s1));

        let mut z1 = z.clone();
        z1.axpy(dt, &self.apply_adv(v_mid, z));
        z1.axpy(dt, &self.apply_adv_dv(v_mid, w_mid, theta));

        let mut z2 = z.clone();
        z2.scale(0.75);
        z2.axpy(0.25, &z1);
        z2.axpy(0.25 * dt, &self.apply_adv(v_mid, &z1));
        z2.axpy(0.25 * dt, &self.apply_adv_dv(v_mid, w_mid, &s1));

        let mut z3 = z.clone();
        z3.scale(1.0 / 3.0);
        z3.axpy(2.0 / 3.0, &z2);
        z3.axpy(2.0 / 3.0 * dt, &self.apply_adv(v_mid, &z2));
        z3.axpy(2.0 / 3.0 * dt, &self.apply_adv_dv(v_mid, w_mid, &s2));
        if self.eps > 0.0 {
            self.diffuse(&mut z3);
        }
        z3
    }

    /// `-div(F(v, θ))` with the smoothed third-order upwind-biased flux.
    pub(crate) fn apply_adv(&self, v: &VectorField, theta: &ScalarField) -> ScalarField {
        let g = self.grid;
        let eta = self.eta;
        let mut out = ScalarField::zeros(g);
        let nx = g.nx;
        // x-faces: face i sits between cells i-1 and i.
        for j in 0..g.ny {
            let row = j * nx;
            let mut fl = 0.0; // flux at face i (left face of cell i)
            let mut first = 0.0;
            for i in 0..nx {
                let f = {
                    let u = v.u[row + i];
                    let tm2 = theta.values[row + (i + nx - 2) % nx];
                    let tm1 = theta.values[row + (i + nx - 1) % nx];
                    let t0 = theta.values[row + i];
                    let tp1 = theta.values[row + (i + 1) % nx];
                    let c4 = (-tm2 + 7.0 * tm1 + 7.0 * t0 - tp1) / 12.0;
                    let d3 = -tm2 + 3.0 * tm1 - 3.0 * t0 + tp1;
                    u * c4 + psi(u, eta) * d3 / 12.0
                };
                if i == 0 {
                    first = f;
                } else {
                    out.values[row + i - 1] -= (f - fl) / g.hx;
                }
                fl = f;
            }
            out.values[row + nx - 1] -= (first - fl) / g.hx;
        }
        // y-faces: face j between cells j-1 and j; wall fluxes are zero.
        for j in 1..g.ny {
            for i in 0..nx {
                let u = v.vy[j * nx + i];
                let f = if j >= 2 && j + 1 < g.ny {
                    let tm2 = theta.values[(j - 2) * nx + i];
                    let tm1 = theta.values[(j - 1) * nx + i];
                    let t0 = theta.values[j * nx + i];
                    let tp1 = theta.values[(j + 1) * nx + i];
                    let c4 = (-tm2 + 7.0 * tm1 + 7.0 * t0 - tp1) / 12.0;
                    let d3 = -tm2 + 3.0 * tm1 - 3.0 * t0 + tp1;
                    u * c4 + psi(u, eta) * d3 / 12.0
                } else {
                    let tm1 = theta.values[(j - 1) * nx + i];
                    let t0 = theta.values[j * nx + i];
                    u * 0.5 * (tm1 + t0) + psi(u, eta) * 0.5 * (tm1 - t0)
                };
                out.values[(j - 1) * nx + i] -= f / g.hy;
                out.values[j * nx + i] += f / g.hy;
            }
        }
        out
    }

    /// Exact transpose of `apply_adv` in θ at fixed velocity.
    pub(crate) fn apply_adv_t(&self, v: &VectorField, rho: &ScalarField) -> ScalarField {
        let g = self.grid;
        let eta = self.eta;
        let mut out = ScalarField::zeros(g);
        let nx = g.nx;
        for j in 0..g.ny {
            let row = j * nx;
            for i in 0..nx {
                // face i between cells i-1 and i; d = (ρ_R - ρ_L)/hx.
                let d = (rho.values[row + i] - rho.values[row + (i + nx - 1) % nx]) / g.hx;
                let u = v.u[row + i];
                let p = psi(u, eta);
                out.values[row + (i + nx - 2) % nx] += (-u - p) / 12.0 * d;
                out.values[row + (i + nx - 1) % nx] += (7.0 * u + 3.0 * p) / 12.0 * d;
                out.values[row + i] += (7.0 * u - 3.0 * p) / 12.0 * d;
                out.values[row + (i + 1) % nx] += (-u + p) / 12.0 * d;
            }
        }
        for j in 1..g.ny {
            for i in 0..nx {
                let d = (rho.values[j * nx + i] - rho.values[(j - 1) * nx + i]) / g.hy;
                let u = v.vy[j * nx + i];
                let p = psi(u, eta);
                if j >= 2 && j + 1 < g.ny {
                    out.values[(j - 2) * nx + i] += (-u - p) / 12.0 * d;
                    out.values[(j - 1) * nx + i] += (7.0 * u + 3.0 * p) / 12.0 * d;
                    out.values[j * nx + i] += (7.0 * u - 3.0 * p) / 12.0 * d;
                    out.values[(j + 1) * nx + i] += (-u + p) / 12.0 * d;
                } else {
                    out.values[(j - 1) * nx + i] += 0.5 * (u + p) * d;
                    out.values[j * nx + i] += 0.5 * (u - p) * d;
                }
            }
        }
        out
    }

    /// Directional derivative of `apply_adv` in the velocity at fixed θ.
    pub(crate) fn apply_adv_dv(
        &self,
        v: &VectorField,
        w: &VectorField,
        theta: &ScalarField,
    ) -> ScalarField {
        let g = self.grid;
        let eta = self.eta;
        let mut out = ScalarField::zeros(g);
        let nx = g.nx;
        for j in 0..g.ny {
            let row = j * nx;
            for i in 0..nx {
                let u = v.u[row + i];
                let tm2 = theta.values[row + (i + nx - 2) % nx];
                let tm1 = theta.values[row + (i + nx - 1) % nx];
                let t0 = theta.values[row + i];
                let tp1 = theta.values[row + (i + 1) % nx];
                let c4 = (-tm2 + 7.0 * tm1 + 7.0 * t0 - tp1) / 12.0;
                let d3 = -tm2 + 3.0 * tm1 - 3.0 * t0 + tp1;
                let df = (c4 + psi_prime(u, eta) * d3 / 12.0) * w.u[row + i];
                out.values[row + (i + nx - 1) % nx] -= df / g.hx;
                out.values[row + i] += df / g.hx;
            }
        }
        for j in 1..g.ny {
            for i in 0..nx {
                let u = v.vy[j * nx + i];
                let df = if j >= 2 && j + 1 < g.ny {
                    let tm2 = theta.values[(j - 2) * nx + i];
                    let tm1 = theta.values[(j - 1) * nx + i];
                    let t0 = theta.values[j * nx + i];
                    let tp1 = theta.values[(j + 1) * nx + i];
                    let c4 = (-tm2 + 7.0 * tm1 + 7.0 * t0 - tp1) / 12.0;
                    let d3 = -tm2 + 3.0 * tm1 - 3.0 * t0 + tp1;
                    (c4 + psi_prime(u, eta) * d3 / 12.0) * w.vy[j * nx + i]
                } else {
                    let tm1 = theta.values[(j - 1) * nx + i];
                    let t0 = theta.values[j * nx + i];
                    (0.5 * (tm1 + t0) + psi_prime(u, eta) * 0.5 * (tm1 - t0)) * w.vy[j * nx + i]
                };
                out.values[(j - 1) * nx + i] -= df / g.hy;
                out.values[j * nx + i] += df / g.hy;
            }
        }
        out
    }

    /// Velocity cotangent of `coef * L(v)θ` against ρ, accumulated into `vbar`:
    /// `v̄_f += coef * (∂F_f/∂u_f) * (ρ_R - ρ_L)/h` at the base velocity `v`.
    pub(crate) fn accumulate_flux_forcing_at(
        &self,
        v: &VectorField,
        theta: &ScalarField,
        rho: &ScalarField,
        coef: f64,
        vbar: &mut VectorField,
    ) {
        let g = self.grid;
        let eta = self.eta;
        let nx = g.nx;
        for j in 0..g.ny {
            let row = j * nx;
            for i in 0..nx {
                let d = (rho.values[row + i] - rho.values[row + (i + nx - 1) % nx]) / g.hx;
                let u = v.u[row + i];
                let tm2 = theta.values[row + (i + nx - 2) % nx];
                let tm1 = theta.values[row + (i + nx - 1) % nx];
                let t0 = theta.values[row + i];
                let tp1 = theta.values[row + (i + 1) % nx];
                let c4 = (-tm2 + 7.0 * tm1 + 7.0 * t0 - tp1) / 12.0;
                let d3 = -tm2 + 3.0 * tm1 - 3.0 * t0 + tp1;
                vbar.u[row + i] += coef * (c4 + psi_prime(u, eta) * d3 / 12.0) * d;
            }
        }
        for j in 1..g.ny {
            for i in 0..nx {
                let d = (rho.values[j * nx + i] - rho.values[(j - 1) * nx + i]) / g.hy;
                let u = v.vy[j * nx + i];
                let df = if j >= 2 && j + 1 < g.ny {
                    let tm2 = theta.values[(j - 2) * nx + i];
                    let tm1 = theta.values[(j - 1) * nx + i];
                    let t0 = theta.values[j * nx + i];
                    let tp1 = theta.values[(j + 1) * nx + i];
                    let c4 = (-tm2 + 7.0 * tm1 + 7.0 * t0 - tp1) / 12.0;
                    let d3 = -tm2 + 3.0 * tm1 - 3.0 * t0 + tp1;
                    c4 + psi_prime(u, eta) * d3 / 12.0
                } else {
                    let tm1 = theta.values[(j - 1) * nx + i];
                    let t0 = theta.values[j * nx + i];
                    0.5 * (tm1 + t0) + psi_prime(u, eta) * 0.5 * (tm1 - t0)
                };
                vbar.vy[j * nx + i] += coef * df * d;
            }
        }
    }

    /// Crank-Nicolson Neumann diffusion solve, symmetric and mass-conserving.
    pub(crate) fn diffuse(&self, theta: &mut ScalarField) {
        let g = self.grid;
        let fft = &self.fft;
        let mut modes = fft.forward(&theta.values, g.ny);
        let hy2 = g.hy * g.hy;
        let a = 0.5 * self.eps * self.dt;
        let mut col = vec![C64::new(0.0, 0.0); g.ny];
        let mut rhs = vec![C64::new(0.0, 0.0); g.ny];
        let mut diag = vec![0.0f64; g.ny];
        for m in 0..g.nx {
            let sx = fft.spectral_laplace_symbol(m);
            for j in 0..g.ny {
                col[j] = modes[j * g.nx + m];
            }
            for j in 0..g.ny {
                let c = if j == 0 || j == g.ny - 1 { 1.0 } else { 2.0 };
                let dm = 1.0 - a * (sx + c / hy2);
                let mut r = col[j] * dm;
                if j > 0 {
                    r += col[j - 1] * (a / hy2);
                }
                if j + 1 < g.ny {
                    r += col[j + 1] * (a / hy2);
                }
                rhs[j] = r;
            }
            for (j, dd) in diag.iter_mut().enumerate() {
                let c = if j == 0 || j == g.ny - 1 { 1.0 } else { 2.0 };
                *dd = 1.0 + a * (sx + c / hy2);
            }
            thomas_const_off(&diag, -a / hy2, &mut rhs);
            for j in 0..g.ny {
                modes[j * g.nx + m] = rhs[j];
            }
        }
        fft.inverse(&mut modes, &mut theta.values);
    }
}

/// Average of two velocity snapshots (the per-step advecting field).
pub fn midpoint(a: &VectorField, b: &VectorField) -> VectorField {
    let mut m = a.clone();
    m.axpy(1.0, b);
    m.scale(0.5);
    m
}

/// Full forward solve along a velocity trajectory.
pub fn solve_forward(
    theta0: &ScalarField,
    v: &VelocityTrajectory,
    eps: f64,
) -> Result<ScalarTrajectory> {
    let grid = theta0.grid;
    let solver = TransportSolver::new(grid, eps, v.dt)?;
    let nt = v.nt();
    let mut snapshots = Vec::with_capacity(nt + 1);
    snapshots.push(theta0.clone());
    let mut theta = theta0.clone();
    for n in 0..nt {
        let v_mid = midpoint(&v.snapshots[n], &v.snapshots[n + 1]);
        solver
            .check_cfl(v_mid.max_abs(), n)
            .map_err(|e| match e {
                Error::CflViolation { dt, limit, vmax, .. } => Error::CflViolation {
                    step: n,
                    dt,
                    limit,
                    vmax,
                },
                other => other,
            })?;
        theta = solver.step_with_mid(&theta, &v_mid);
        if !theta.is_finite() {
            return Err(Error::NonFinite {
                context: "solve_forward",
            });
        }
        snapshots.push(theta.clone());
    }
    Ok(ScalarTrajectory {
        snapshots,
        eps,
        dt: v.dt,
    })
}

/// Linearized transport: directional derivative of the forward solve with
/// respect to the control in direction `h` (so `w = L h`), starting from zero.
pub fn solve_linearized(
    h: &ControlTrajectory,
    base: &ScalarTrajectory,
    v: &VelocityTrajectory,
    eps: f64,
    stokes: &StokesSolver,
) -> Result<ScalarTrajectory> {
    if base.nt() != v.nt() {
        return Err(Error::TrajectoryMismatch(
            "base scalar and velocity trajectories disagree in length",
        ));
    }
    if (base.eps - eps).abs() > 0.0 {
        return Err(Error::TrajectoryMismatch(
            "base trajectory was produced with a different eps",
        ));
    }
    let w = stokes.apply_l(h)?;
    let grid = base.snapshots[0].grid;
    let solver = TransportSolver::new(grid, eps, v.dt)?;
    let nt = v.nt();
    let mut z = ScalarField::zeros(grid);
    let mut snapshots = Vec::with_capacity(nt + 1);
    snapshots.push(z.clone());
    for n in 0..nt {
        let v_mid = midpoint(&v.snapshots[n], &v.snapshots[n + 1]);
        let w_mid = midpoint(&w.snapshots[n], &w.snapshots[n + 1]);
        z = solver.step_jvp(&z, &base.snapshots[n], &v_mid, &w_mid);
        snapshots.push(z.clone());
    }
    Ok(ScalarTrajectory {
        snapshots,
        eps,
        dt: v.dt,
    })
}
