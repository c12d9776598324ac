//! Unsteady Stokes flow with nonhomogeneous Navier-slip wall data.
//!
//! One step is a Crank-Nicolson diffusion solve (Robin slip closure for the
//! tangential velocity, Dirichlet for the wall-normal one) followed by a
//! pressure projection. The control-to-velocity map `L` is the trajectory
//! driven from rest, and `L*` is its exact algebraic transpose, realized by
//! reverse stepping. Every per-mode matrix is real symmetric and the
//! Crank-Nicolson factors commute, so the transposed scheme reuses the
//! forward primitives in reverse order.

use crate::error::{Error, Result};
use crate::field::{divergence, BoundarySlice, VectorField};
use crate::grid::Grid;
use crate::spectral::{thomas_const_off, thomas_neumann_singular, C64, XFft};
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct StokesConfig {
    /// Wall friction coefficient in the slip balance `k u ∓ ∂u/∂y = g`.
    pub k: f64,
    pub dt: f64,
    pub nt: usize,
    /// Relative divergence tolerance after projection.
    pub div_tol: f64,
}

impl StokesConfig {
    pub fn new(k: f64, dt: f64, nt: usize) -> Result<Self> {
        if k <= 0.0 || dt <= 0.0 || nt == 0 {
            return Err(Error::InvalidParameter(format!(
                "StokesConfig requires k > 0, dt > 0, nt >= 1 (got k={k}, dt={dt}, nt={nt})"
            )));
        }
        Ok(Self {
            k,
            dt,
            nt,
            div_tol: 1e-10,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.nt as f64
    }
}

/// Time-indexed velocity snapshots `v(t_0..t_nt)`.
#[derive(Debug, Clone)]
pub struct VelocityTrajectory {
    pub snapshots: Vec<VectorField>,
    pub dt: f64,
}

impl VelocityTrajectory {
    pub fn nt(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn max_abs(&self) -> f64 {
        self.snapshots
            .iter()
            .fold(0.0f64, |m, v| m.max(v.max_abs()))
    }

    /// Space-time L² inner product with trapezoidal time weights.
    pub fn inner_space_time(&self, other: &VelocityTrajectory) -> f64 {
        let nt = self.nt();
        let mut acc = 0.0;
        for n in 0..=nt {
            let wt = if n == 0 || n == nt { 0.5 } else { 1.0 };
            acc += wt * self.dt * self.snapshots[n].inner(&other.snapshots[n]);
        }
        acc
    }
}

/// Tangential wall data `g(t_0..t_nt)`, optionally restricted to the first
/// `mode_cap` x-Fourier modes.
#[derive(Debug, Clone)]
pub struct ControlTrajectory {
    pub slices: Vec<BoundarySlice>,
    pub mode_cap: Option<usize>,
}

impl ControlTrajectory {
    pub fn zeros(grid: Grid, nt: usize) -> Self {
        Self {
            slices: vec![BoundarySlice::zeros(grid); nt + 1],
            mode_cap: None,
        }
    }

    pub fn constant(grid: Grid, nt: usize, c: f64) -> Self {
        Self {
            slices: vec![BoundarySlice::constant(grid, c); nt + 1],
            mode_cap: None,
        }
    }

    pub fn random(grid: Grid, nt: usize, amplitude: f64, rng: &mut impl Rng) -> Self {
        let mut out = Self::zeros(grid, nt);
        for s in &mut out.slices {
            for v in s.bottom.iter_mut().chain(s.top.iter_mut()) {
                *v = amplitude * rng.gen_range(-1.0..1.0);
            }
        }
        out
    }

    pub fn nt(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn grid(&self) -> Grid {
        self.slices[0].grid
    }

    pub fn scale(&mut self, a: f64) {
        for s in &mut self.slices {
            s.scale(a);
        }
    }

    pub fn axpy(&mut self, a: f64, other: &ControlTrajectory) {
        for (s, o) in self.slices.iter_mut().zip(other.slices.iter()) {
            s.axpy(a, o);
        }
    }

    /// `Σ_t w_t dt ∫_Γ f g dx` with trapezoidal time weights.
    pub fn inner_space_time(&self, other: &ControlTrajectory, dt: f64) -> f64 {
        let nt = self.nt();
        let mut acc = 0.0;
        for n in 0..=nt {
            let wt = if n == 0 || n == nt { 0.5 } else { 1.0 };
            acc += wt * dt * self.slices[n].inner(&other.slices[n]);
        }
        acc
    }

    pub fn l2_space_time_sq(&self, dt: f64) -> f64 {
        self.inner_space_time(self, dt)
    }

    pub fn l2_space_time(&self, dt: f64) -> f64 {
        self.l2_space_time_sq(dt).max(0.0).sqrt()
    }

    /// Zero every x-Fourier mode at or above `mode_cap` on every slice.
    pub fn enforce_mode_cap(&mut self) {
        let Some(cap) = self.mode_cap else {
            return;
        };
        let grid = self.grid();
        let fft = XFft::new(grid.nx, grid.lx);
        for s in &mut self.slices {
            for wall in [&mut s.bottom, &mut s.top] {
                let mut modes = fft.forward(wall, 1);
                for (m, c) in modes.iter_mut().enumerate() {
                    let m_abs = m.min(grid.nx - m);
                    if m_abs >= cap {
                        *c = C64::new(0.0, 0.0);
                    }
                }
                fft.inverse(&mut modes, wall);
            }
        }
    }
}

/// Projection of an arbitrary staggered field onto discretely divergence-free
/// fields with zero normal wall trace.
pub fn leray_project(v: &VectorField) -> VectorField {
    let solver = StokesSolver::new(v.grid, StokesConfig::new(1.0, 1.0, 1).unwrap());
    solver.project(v.clone())
}

/// Second-order one-sided extrapolation of the tangential velocity to both walls.
pub fn boundary_trace_tangential(v: &VectorField) -> BoundarySlice {
    let g = v.grid;
    let mut out = BoundarySlice::zeros(g);
    for i in 0..g.nx {
        out.bottom[i] = 1.5 * v.u_at(i, 0) - 0.5 * v.u_at(i, 1);
        out.top[i] = 1.5 * v.u_at(i, g.ny - 1) - 0.5 * v.u_at(i, g.ny - 2);
    }
    out
}

/// Max-norm defect of the slip balance `k u ∓ ∂u/∂y = g` over both walls.
pub fn navier_slip_residual(v: &VectorField, g: &BoundarySlice, k: f64) -> f64 {
    let gr = v.grid;
    let h = gr.hy;
    let mut worst = 0.0f64;
    for i in 0..gr.nx {
        let u0 = v.u_at(i, 0);
        let u1 = v.u_at(i, 1);
        let u2 = v.u_at(i, 2);
        let u_wall = 1.5 * u0 - 0.5 * u1;
        let du = (-2.0 * u0 + 3.0 * u1 - u2) / h;
        worst = worst.max((k * u_wall - du - g.bottom[i]).abs());

        let n = gr.ny;
        let t0 = v.u_at(i, n - 1);
        let t1 = v.u_at(i, n - 2);
        let t2 = v.u_at(i, n - 3);
        let u_wall = 1.5 * t0 - 0.5 * t1;
        let du = (2.0 * t0 - 3.0 * t1 + t2) / h;
        worst = worst.max((k * u_wall + du - g.top[i]).abs());
    }
    worst
}

/// Time quadrature of `‖∇v‖_{L∞}` along a trajectory (diagnostic).
pub fn grad_v_infty_integral(traj: &VelocityTrajectory) -> f64 {
    let nt = traj.nt();
    let mut acc = 0.0;
    for (n, v) in traj.snapshots.iter().enumerate() {
        let wt = if n == 0 || n == nt { 0.5 } else { 1.0 };
        acc += wt * traj.dt * grad_infty(v);
    }
    acc
}

fn grad_infty(v: &VectorField) -> f64 {
    let g = v.grid;
    let mut m = 0.0f64;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let ip = (i + 1) % g.nx;
            m = m.max(((v.u_at(ip, j) - v.u_at(i, j)) / g.hx).abs());
        }
    }
    for j in 0..g.ny - 1 {
        for i in 0..g.nx {
            m = m.max(((v.u_at(i, j + 1) - v.u_at(i, j)) / g.hy).abs());
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let ip = (i + 1) % g.nx;
            m = m.max(((v.vy_at(ip, j) - v.vy_at(i, j)) / g.hx).abs());
        }
    }
    for j in 0..g.ny {
        for i in 0..g.nx {
            m = m.max(((v.vy_at(i, j + 1) - v.vy_at(i, j)) / g.hy).abs());
        }
    }
    m
}

/// Crank-Nicolson Stokes stepper on a fixed grid and configuration.
pub struct StokesSolver {
    pub grid: Grid,
    pub cfg: StokesConfig,
    fft: XFft,
    /// Robin ghost elimination: ghost = g/den - a * interior.
    robin_a: f64,
    robin_den: f64,
}

impl StokesSolver {
    pub fn new(grid: Grid, cfg: StokesConfig) -> Self {
        let den = 0.5 * cfg.k + 1.0 / grid.hy;
        let a = (0.5 * cfg.k - 1.0 / grid.hy) / den;
        Self {
            grid,
            cfg,
            fft: XFft::new(grid.nx, grid.lx),
            robin_a: a,
            robin_den: den,
        }
    }

    /// One diffusion + projection step with the control taken at the midpoint.
    pub fn step(
        &self,
        v: &VectorField,
        g_now: &BoundarySlice,
        g_next: &BoundarySlice,
    ) -> Result<VectorField> {
        let mut g_mid = g_now.clone();
        g_mid.axpy(1.0, g_next);
        g_mid.scale(0.5);
        let mut out = v.clone();
        self.diffuse_u(&mut out.u, Some(&g_mid));
        self.diffuse_vy(&mut out.vy);
        let out = self.project(out);
        if !out.is_finite() {
            return Err(Error::NonFinite {
                context: "stokes_step",
            });
        }
        Ok(out)
    }

    /// Full trajectory from `v0` driven by `g` (`g.nt()` must equal `cfg.nt`).
    pub fn solve(&self, v0: &VectorField, g: &ControlTrajectory) -> Result<VelocityTrajectory> {
        if g.nt() != self.cfg.nt {
            return Err(Error::TrajectoryMismatch(
                "control trajectory length does not match nt",
            ));
        }
        let mut snapshots = Vec::with_capacity(self.cfg.nt + 1);
        let mut v = self.project(v0.clone());
        snapshots.push(v.clone());
        for n in 0..self.cfg.nt {
            v = self.step(&v, &g.slices[n], &g.slices[n + 1])?;
            snapshots.push(v.clone());
        }
        Ok(VelocityTrajectory {
            snapshots,
            dt: self.cfg.dt,
        })
    }

    /// Control-to-velocity map: trajectory from rest driven by `g`.
    pub fn apply_l(&self, g: &ControlTrajectory) -> Result<VelocityTrajectory> {
        self.solve(&VectorField::zeros(self.grid), g)
    }

    /// Exact transpose of `apply_l` against Euclidean seeds: given per-node
    /// adjoint velocity seeds `λ̄_n` (n = 0..nt), returns the Euclidean control
    /// cotangent `ḡ_n` per node.
    pub fn reverse_sweep(&self, seeds: &[VectorField]) -> Vec<BoundarySlice> {
        assert_eq!(seeds.len(), self.cfg.nt + 1);
        let nt = self.cfg.nt;
        let mut gbar = vec![BoundarySlice::zeros(self.grid); nt + 1];
        let mut lambda = VectorField::zeros(self.grid);
        for n in (1..=nt).rev() {
            lambda.axpy(1.0, &seeds[n]);
            // v^{n} = P M₋⁻¹ (M₊ v^{n-1} + dt E g_mid); transpose in reverse.
            let mut mu = self.project(lambda.clone());
            self.minv_u(&mut mu.u);
            // ḡ_mid^{n-1} = dt Eᵀ M₋⁻¹ P λ
            let b = 1.0 / (self.robin_den * self.grid.hy * self.grid.hy);
            let mut gm = BoundarySlice::zeros(self.grid);
            for i in 0..self.grid.nx {
                gm.bottom[i] = self.cfg.dt * b * mu.u[i];
                gm.top[i] = self.cfg.dt * b * mu.u[(self.grid.ny - 1) * self.grid.nx + i];
            }
            gbar[n - 1].axpy(0.5, &gm);
            gbar[n].axpy(0.5, &gm);
            // λ ← M₊ M₋⁻¹ P λ (u part already solved; finish with M₊, and the
            // commuting pair for vy).
            self.mplus_u(&mut mu.u);
            self.minv_vy(&mut mu.vy);
            self.mplus_vy(&mut mu.vy);
            lambda = mu;
        }
        gbar
    }

    /// `L*` against a space-time velocity function `f`, returned as an
    /// `L²(0,T; L²(Γ))` representative so that
    /// `⟨Lg, f⟩_{space-time} = ⟨g, L*f⟩_{walls×time}`.
    pub fn apply_l_star(&self, f: &[VectorField]) -> ControlTrajectory {
        let nt = self.cfg.nt;
        assert_eq!(f.len(), nt + 1);
        let area = self.grid.cell_area();
        let seeds: Vec<VectorField> = f
            .iter()
            .enumerate()
            .map(|(n, fv)| {
                let wt = if n == 0 || n == nt { 0.5 } else { 1.0 };
                let mut s = fv.clone();
                s.scale(wt * self.cfg.dt * area);
                s
            })
            .collect();
        let gbar = self.reverse_sweep(&seeds);
        let mut out = ControlTrajectory::zeros(self.grid, nt);
        for n in 0..=nt {
            let wt = if n == 0 || n == nt { 0.5 } else { 1.0 };
            let w = wt * self.cfg.dt * self.grid.hx;
            out.slices[n] = gbar[n].clone();
            out.slices[n].scale(1.0 / w);
        }
        out
    }

    /// Remove the discrete-gradient part: output has MAC divergence at
    /// roundoff level and untouched (zero) normal wall trace.
    pub fn project(&self, mut v: VectorField) -> VectorField {
        v.enforce_no_penetration();
        let g = self.grid;
        let div = divergence(&v);
        let fft = &self.fft;
        let mut modes = fft.forward(&div.values, g.ny);
        let hy2 = g.hy * g.hy;
        let e = -1.0 / hy2;
        let mut col = vec![C64::new(0.0, 0.0); g.ny];
        let mut diag = vec![0.0f64; g.ny];
        for m in 0..g.nx {
            let sx = fft.mac_laplace_symbol(m);
            for j in 0..g.ny {
                let c = if j == 0 || j == g.ny - 1 { 1.0 } else { 2.0 };
                diag[j] = sx + c / hy2;
                col[j] = -modes[j * g.nx + m];
            }
            if m == 0 {
                thomas_neumann_singular(&diag, e, &mut col);
            } else {
                thomas_const_off(&diag, e, &mut col);
            }
            for j in 0..g.ny {
                modes[j * g.nx + m] = col[j];
            }
        }
        let mut q = vec![0.0; g.nx * g.ny];
        fft.inverse(&mut modes, &mut q);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let im = (i + g.nx - 1) % g.nx;
                v.u[j * g.nx + i] -= (q[j * g.nx + i] - q[j * g.nx + im]) / g.hx;
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                v.vy[j * g.nx + i] -= (q[j * g.nx + i] - q[(j - 1) * g.nx + i]) / g.hy;
            }
        }
        v
    }

    fn u_diag(&self, sx: f64, j: usize, sign: f64) -> f64 {
        let hy2 = self.grid.hy * self.grid.hy;
        let c = if j == 0 || j == self.grid.ny - 1 {
            2.0 + self.robin_a
        } else {
            2.0
        };
        1.0 + sign * 0.5 * self.cfg.dt * (sx + c / hy2)
    }

    /// u ← M₋⁻¹ (M₊ u + dt E g_mid), the CN diffusion half-step for the
    /// tangential component with the Robin slip closure.
    fn diffuse_u(&self, u: &mut Vec<f64>, g_mid: Option<&BoundarySlice>) {
        let g = self.grid;
        let fft = &self.fft;
        let mut modes = fft.forward(u, g.ny);
        let (gb, gt) = match g_mid {
            Some(s) => (fft.forward(&s.bottom, 1), fft.forward(&s.top, 1)),
            None => (
                vec![C64::new(0.0, 0.0); g.nx],
                vec![C64::new(0.0, 0.0); g.nx],
            ),
        };
        let hy2 = g.hy * g.hy;
        let b = 1.0 / (self.robin_den * hy2);
        let e_plus = 0.5 * self.cfg.dt / hy2;
        let mut col = vec![C64::new(0.0, 0.0); g.ny];
        let mut rhs = vec![C64::new(0.0, 0.0); g.ny];
        let mut diag = vec![0.0f64; g.ny];
        for m in 0..g.nx {
            let sx = fft.spectral_laplace_symbol(m);
            for j in 0..g.ny {
                col[j] = modes[j * g.nx + m];
            }
            for j in 0..g.ny {
                let mut r = col[j] * self.u_diag(sx, j, -1.0);
                if j > 0 {
                    r += col[j - 1] * e_plus;
                }
                if j + 1 < g.ny {
                    r += col[j + 1] * e_plus;
                }
                rhs[j] = r;
            }
            rhs[0] += gb[m] * (self.cfg.dt * b);
            rhs[g.ny - 1] += gt[m] * (self.cfg.dt * b);
            for (j, d) in diag.iter_mut().enumerate() {
                *d = self.u_diag(sx, j, 1.0);
            }
            thomas_const_off(&diag, -e_plus, &mut rhs);
            for j in 0..g.ny {
                modes[j * g.nx + m] = rhs[j];
            }
        }
        fft.inverse(&mut modes, u);
    }

    /// vy ← M₋⁻¹ M₊ vy with homogeneous Dirichlet wall rows.
    fn diffuse_vy(&self, vy: &mut Vec<f64>) {
        let g = self.grid;
        let fft = &self.fft;
        let mut modes = fft.forward(vy, g.ny + 1);
        let hy2 = g.hy * g.hy;
        let e_plus = 0.5 * self.cfg.dt / hy2;
        let ni = g.ny - 1; // interior y-face count
        let mut col = vec![C64::new(0.0, 0.0); ni];
        let mut rhs = vec![C64::new(0.0, 0.0); ni];
        let mut diag = vec![0.0f64; ni];
        for m in 0..g.nx {
            let sx = fft.spectral_laplace_symbol(m);
            let dm = 1.0 - 0.5 * self.cfg.dt * (sx + 2.0 / hy2);
            let dp = 1.0 + 0.5 * self.cfg.dt * (sx + 2.0 / hy2);
            for j in 0..ni {
                col[j] = modes[(j + 1) * g.nx + m];
            }
            for j in 0..ni {
                let mut r = col[j] * dm;
                if j > 0 {
                    r += col[j - 1] * e_plus;
                }
                if j + 1 < ni {
                    r += col[j + 1] * e_plus;
                }
                rhs[j] = r;
            }
            for d in diag.iter_mut() {
                *d = dp;
            }
            thomas_const_off(&diag, -e_plus, &mut rhs);
            for j in 0..ni {
                modes[(j + 1) * g.nx + m] = rhs[j];
            }
            modes[m] = C64::new(0.0, 0.0);
            modes[g.ny * g.nx + m] = C64::new(0.0, 0.0);
        }
        fft.inverse(&mut modes, vy);
    }

    fn minv_u(&self, u: &mut Vec<f64>) {
        self.u_mode_op(u, |solver, sx, diag, col| {
            for (j, d) in diag.iter_mut().enumerate() {
                *d = solver.u_diag(sx, j, 1.0);
            }
            let e = -0.5 * solver.cfg.dt / (solver.grid.hy * solver.grid.hy);
            thomas_const_off(diag, e, col);
        });
    }

    fn mplus_u(&self, u: &mut Vec<f64>) {
        self.u_mode_op(u, |solver, sx, _diag, col| {
            let e = 0.5 * solver.cfg.dt / (solver.grid.hy * solver.grid.hy);
            let n = col.len();
            let orig = col.to_vec();
            for j in 0..n {
                let mut r = orig[j] * solver.u_diag(sx, j, -1.0);
                if j > 0 {
                    r += orig[j - 1] * e;
                }
                if j + 1 < n {
                    r += orig[j + 1] * e;
                }
                col[j] = r;
            }
        });
    }

    fn minv_vy(&self, vy: &mut Vec<f64>) {
        self.vy_mode_op(vy, true);
    }

    fn mplus_vy(&self, vy: &mut Vec<f64>) {
        self.vy_mode_op(vy, false);
    }

    fn u_mode_op(&self, u: &mut Vec<f64>, op: impl Fn(&Self, f64, &mut [f64], &mut [C64])) {
        let g = self.grid;
        let fft = &self.fft;
        let mut modes = fft.forward(u, g.ny);
        let mut col = vec![C64::new(0.0, 0.0); g.ny];
        let mut diag = vec![0.0f64; g.ny];
        for m in 0..g.nx {
            let sx = fft.spectral_laplace_symbol(m);
            for j in 0..g.ny {
                col[j] = modes[j * g.nx + m];
            }
            op(self, sx, &mut diag, &mut col);
            for j in 0..g.ny {
                modes[j * g.nx + m] = col[j];
            }
        }
        fft.inverse(&mut modes, u);
    }

    fn vy_mode_op(&self, vy: &mut Vec<f64>, invert: bool) {
        let g = self.grid;
        let fft = &self.fft;
        let mut modes = fft.forward(vy, g.ny + 1);
        let hy2 = g.hy * g.hy;
        let e_abs = 0.5 * self.cfg.dt / hy2;
        let ni = g.ny - 1;
        let mut col = vec![C64::new(0.0, 0.0); ni];
        let mut diag = vec![0.0f64; ni];
        for m in 0..g.nx {
            let sx = fft.spectral_laplace_symbol(m);
            for j in 0..ni {
                col[j] = modes[(j + 1) * g.nx + m];
            }
            if invert {
                let dp = 1.0 + 0.5 * self.cfg.dt * (sx + 2.0 / hy2);
                for d in diag.iter_mut() {
                    *d = dp;
                }
                thomas_const_off(&diag, -e_abs, &mut col);
            } else {
                let dm = 1.0 - 0.5 * self.cfg.dt * (sx + 2.0 / hy2);
                let orig = col.clone();
                for j in 0..ni {
                    let mut r = orig[j] * dm;
                    if j > 0 {
                        r += orig[j - 1] * e_abs;
                    }
                    if j + 1 < ni {
                        r += orig[j + 1] * e_abs;
                    }
                    col[j] = r;
                }
            }
            for j in 0..ni {
                modes[(j + 1) * g.nx + m] = col[j];
            }
            modes[m] = C64::new(0.0, 0.0);
            modes[g.ny * g.nx + m] = C64::new(0.0, 0.0);
        }
        fft.inverse(&mut modes, vy);
    }
}
