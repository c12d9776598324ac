//! Gradient assembly from the optimality system, Armijo/Barzilai-Borwein
//! descent, the penalized variant, ε-continuation, and the rate and
//! uniqueness experiments.

use crate::adjoint;
use crate::error::{Error, Result};
use crate::field::{lp_norm, ScalarField, VectorField};
use crate::grid::Grid;
use crate::mixnorm::{cost, helmholtz_neumann_solve, CostReport};
use crate::stokes::{grad_v_infty_integral, ControlTrajectory, StokesConfig, StokesSolver};
use crate::transport::solve_forward;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptMode {
    #[default]
    Descent,
    Picard,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptConfig {
    pub max_iters: usize,
    /// Relative gradient-norm stopping tolerance: `‖∇J‖ / ‖γ g‖`.
    pub tol_g: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub step0: f64,
    /// L-BFGS memory for the descent direction; `0` falls back to plain
    /// steepest descent with Barzilai-Borwein step seeding.
    pub lbfgs_mem: usize,
    pub mode: OptMode,
    pub max_backtracks: usize,
    pub seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol_g: 1e-6,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            step0: 1.0,
            lbfgs_mem: 10,
            mode: OptMode::Descent,
            max_backtracks: 40,
            seed: 0,
        }
    }
}

/// One optimization problem instance: initial data, flow parameters, grid.
#[derive(Clone)]
pub struct MixingProblem {
    pub grid: Grid,
    pub theta0: ScalarField,
    pub v0: VectorField,
    pub stokes_cfg: StokesConfig,
    pub gamma: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub j: f64,
    pub mix_term: f64,
    pub control_term: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub residual: f64,
}

#[derive(Clone)]
pub struct OptResult {
    pub g_final: ControlTrajectory,
    pub history: Vec<IterRecord>,
    pub optimality_residual: f64,
    pub grad_v_infty: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_cost: CostReport,
}

/// Per-ε study of `sup_t ‖θ_ε - θ‖_{L²}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub eps: Vec<f64>,
    pub sup_diff: Vec<f64>,
    pub slope: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub distance_rel: f64,
    pub residual_a: f64,
    pub residual_b: f64,
    pub converged: bool,
}

struct EvalOutput {
    total: f64,
}

impl MixingProblem {
    pub fn with_eps(&self, eps: f64) -> Self {
        let mut p = self.clone();
        p.eps = eps;
        p
    }

    fn solver(&self) -> StokesSolver {
        StokesSolver::new(self.grid, self.stokes_cfg)
    }

    /// Evaluate the cost at `g` (forward solves only).
    pub fn evaluate(&self, g: &ControlTrajectory) -> Result<CostReport> {
        let stokes = self.solver();
        let vtraj = stokes.solve(&self.v0, g)?;
        let ttraj = solve_forward(&self.theta0, &vtraj, self.eps)?;
        cost(g, self.stokes_cfg.dt, ttraj.terminal(), self.gamma, self.eps)
    }

    /// Exact discrete gradient of `J` with respect to `g`, represented in
    /// `L²(0,T; L²(Γ))`: `∇J = γ g + L*(θ∇ρ-forcing chain)`, with the forcing
    /// the exact transpose of the discrete advection operators.
    pub fn gradient(&self, g: &ControlTrajectory) -> Result<(ControlTrajectory, CostReport)> {
        if self.eps <= 0.0 {
            return Err(Error::InvalidParameter(
                "gradient requires eps > 0; approach eps = 0 through epsilon_continuation".into(),
            ));
        }
        let stokes = self.solver();
        let vtraj = stokes.solve(&self.v0, g)?;
        let ttraj = solve_forward(&self.theta0, &vtraj, self.eps)?;
        let report = cost(g, self.stokes_cfg.dt, ttraj.terminal(), self.gamma, self.eps)?;

        let rho_t = helmholtz_neumann_solve(ttraj.terminal());
        let mut seed = rho_t;
        seed.scale(self.grid.cell_area());
        let (_lambda, vel_seeds) = adjoint::sweep_with_forcing(&ttraj, &vtraj, self.eps, &seed)?;
        let gbar = stokes.reverse_sweep(&vel_seeds);

        let dt = self.stokes_cfg.dt;
        let nt = self.stokes_cfg.nt;
        let mut grad = g.clone();
        grad.scale(self.gamma);
        for n in 0..=nt {
            let wt = if n == 0 || n == nt { 0.5 } else { 1.0 };
            let w = wt * dt * self.grid.hx;
            grad.slices[n].axpy(1.0 / w, &gbar[n]);
        }
        grad.mode_cap = g.mode_cap;
        grad.enforce_mode_cap();
        Ok((grad, report))
    }

    /// Armijo-backtracking gradient descent (optionally BB-seeded), or Picard
    /// fixed-point iteration on the optimality condition.
    pub fn descend(&self, g0: &ControlTrajectory, cfg: &OptConfig) -> Result<OptResult> {
        self.minimize(g0, None, cfg)
    }

    /// Minimize `J(g) + ½ ‖g - anchor‖²` (the penalized problem).
    pub fn penalized_descend(
        &self,
        g0: &ControlTrajectory,
        anchor: &ControlTrajectory,
        cfg: &OptConfig,
    ) -> Result<OptResult> {
        self.minimize(g0, Some(anchor), cfg)
    }

    fn eval_total(
        &self,
        g: &ControlTrajectory,
        anchor: Option<&ControlTrajectory>,
    ) -> Result<EvalOutput> {
        let mut total = self.evaluate(g)?.total;
        if let Some(a) = anchor {
            let mut diff = g.clone();
            diff.axpy(-1.0, a);
            total += 0.5 * diff.l2_space_time_sq(self.stokes_cfg.dt);
        }
        Ok(EvalOutput { total })
    }

    fn grad_total(
        &self,
        g: &ControlTrajectory,
        anchor: Option<&ControlTrajectory>,
    ) -> Result<(ControlTrajectory, CostReport, f64)> {
        let (mut grad, report) = self.gradient(g)?;
        let mut total = report.total;
        if let Some(a) = anchor {
            let mut diff = g.clone();
            diff.axpy(-1.0, a);
            total += 0.5 * diff.l2_space_time_sq(self.stokes_cfg.dt);
            grad.axpy(1.0, &diff);
        }
        Ok((grad, report, total))
    }

    fn minimize(
        &self,
        g0: &ControlTrajectory,
        anchor: Option<&ControlTrajectory>,
        cfg: &OptConfig,
    ) -> Result<OptResult> {
        let dt = self.stokes_cfg.dt;
        let mut g = g0.clone();
        g.enforce_mode_cap();
        let mut history = Vec::new();
        let mut converged = false;
        // L-BFGS curvature pairs (s, y, 1/<s,y>), most recent last. With
        // `lbfgs_mem == 0` only the latest pair is kept and used for a
        // Barzilai-Borwein step length.
        let mut pairs: Vec<(ControlTrajectory, ControlTrajectory, f64)> = Vec::new();
        let mut last_step = cfg.step0;
        let mut residual = f64::INFINITY;
        let mut iterations = 0;

        let (mut grad, mut report, mut total) = self.grad_total(&g, anchor)?;
        for iter in 0..cfg.max_iters {
            let gnorm = grad.l2_space_time(dt);
            let denom = self.gamma * g.l2_space_time(dt);
            residual = if denom > 1e-300 { gnorm / denom } else { gnorm };
            history.push(IterRecord {
                iter,
                j: total,
                mix_term: report.mix_term,
                control_term: report.control_term,
                grad_norm: gnorm,
                step: last_step,
                residual,
            });
            if residual <= cfg.tol_g || gnorm <= 1e-16 {
                converged = true;
                iterations = iter;
                break;
            }

            let accepted = match cfg.mode {
                OptMode::Descent => {
                    // Search direction: L-BFGS two-loop recursion over the
                    // stored pairs (a BB1-scaled steepest descent when no
                    // curvature information is available yet).
                    let (dir, mut step) = if cfg.lbfgs_mem == 0 {
                        let mut step = cfg.step0;
                        if let Some((s, y, _)) = pairs.last() {
                            let sy = s.inner_space_time(y, dt);
                            let ss = s.l2_space_time_sq(dt);
                            if sy > 1e-300 && ss > 0.0 {
                                step = (ss / sy).clamp(1e-12, 1e12);
                            }
                        }
                        let mut d = grad.clone();
                        d.scale(-1.0);
                        (d, step)
                    } else if pairs.is_empty() {
                        let mut d = grad.clone();
                        d.scale(-1.0);
                        (d, cfg.step0)
                    } else {
                        (two_loop_direction(&grad, &pairs, dt), 1.0)
                    };
                    // Directional derivative for the Armijo test; the two-loop
                    // direction is a descent direction whenever every stored
                    // pair has positive curvature, which the update enforces.
                    let slope = grad.inner_space_time(&dir, dt);
                    let mut accepted = None;
                    if slope < 0.0 {
                        for _ in 0..=cfg.max_backtracks {
                            let mut cand = g.clone();
                            cand.axpy(step, &dir);
                            cand.enforce_mode_cap();
                            match self.eval_total(&cand, anchor) {
                                Ok(ev) => {
                                    if ev.total <= total + cfg.armijo_c1 * step * slope {
                                        accepted = Some((cand, step));
                                        break;
                                    }
                                }
                                Err(Error::CflViolation { .. }) => {} // too aggressive; shrink
                                Err(e) => return Err(e),
                            }
                            step *= cfg.backtrack;
                        }
                    }
                    if accepted.is_none() && !pairs.is_empty() {
                        // Stale curvature can poison the direction; drop the
                        // memory and retry this iteration as steepest descent.
                        pairs.clear();
                        let mut step = cfg.step0;
                        for _ in 0..=cfg.max_backtracks {
                            let mut cand = g.clone();
                            cand.axpy(-step, &grad);
                            cand.enforce_mode_cap();
                            match self.eval_total(&cand, anchor) {
                                Ok(ev) => {
                                    if ev.total <= total - cfg.armijo_c1 * step * gnorm * gnorm {
                                        accepted = Some((cand, step));
                                        break;
                                    }
                                }
                                Err(Error::CflViolation { .. }) => {}
                                Err(e) => return Err(e),
                            }
                            step *= cfg.backtrack;
                        }
                    }
                    accepted
                }
                OptMode::Picard => {
                    // g ← -(1/γ) L*(forcing chain) = g - ∇J/γ, damped on
                    // non-decrease.
                    let mut cand = g.clone();
                    cand.axpy(-1.0 / self.gamma, &grad);
                    cand.enforce_mode_cap();
                    let mut accepted = None;
                    for _ in 0..=cfg.max_backtracks {
                        match self.eval_total(&cand, anchor) {
                            Ok(ev) => {
                                if ev.total <= total {
                                    accepted = Some((cand.clone(), 1.0));
                                    break;
                                }
                            }
                            Err(Error::CflViolation { .. }) => {}
                            Err(e) => return Err(e),
                        }
                        // Damp halfway back toward the current iterate.
                        let mut half = g.clone();
                        half.axpy(1.0, &cand);
                        half.scale(0.5);
                        cand = half;
                    }
                    accepted
                }
            };

            let Some((g_new, step)) = accepted else {
                iterations = iter + 1;
                break; // no decrease found; return best iterate
            };
            last_step = step;
            let (ngrad, nreport, ntotal) = self.grad_total(&g_new, anchor)?;
            let mut s = g_new.clone();
            s.axpy(-1.0, &g);
            let mut y = ngrad.clone();
            y.axpy(-1.0, &grad);
            let sy = s.inner_space_time(&y, dt);
            if sy > 1e-300 {
                pairs.push((s, y, 1.0 / sy));
                let cap = cfg.lbfgs_mem.max(1);
                if pairs.len() > cap {
                    pairs.remove(0);
                }
            }
            g = g_new;
            grad = ngrad;
            report = nreport;
            total = ntotal;
            iterations = iter + 1;
        }

        // Final telemetry.
        let stokes = self.solver();
        let vtraj = stokes.solve(&self.v0, &g)?;
        let grad_v_infty = grad_v_infty_integral(&vtraj);
        Ok(OptResult {
            g_final: g,
            history,
            optimality_residual: residual,
            grad_v_infty,
            iterations,
            converged,
            final_cost: report,
        })
    }

    /// Warm-started descent over a strictly decreasing ε schedule.
    pub fn epsilon_continuation(
        &self,
        schedule: &[f64],
        g0: &ControlTrajectory,
        cfg: &OptConfig,
    ) -> Result<Vec<OptResult>> {
        if schedule.is_empty() {
            return Err(Error::InvalidParameter("empty epsilon schedule".into()));
        }
        for w in schedule.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::InvalidParameter(
                    "epsilon schedule must be strictly decreasing".into(),
                ));
            }
        }
        if schedule.iter().any(|&e| e <= 0.0) {
            return Err(Error::InvalidParameter(
                "epsilon schedule entries must be positive".into(),
            ));
        }
        let mut results = Vec::new();
        let mut warm = g0.clone();
        for &eps in schedule {
            let res = self.with_eps(eps).descend(&warm, cfg)?;
            warm = res.g_final.clone();
            results.push(res);
        }
        Ok(results)
    }

    /// `sup_t ‖θ_ε(t) - θ(t)‖_{L²}` for each ε at matched resolution, with a
    /// least-squares log-log slope fit.
    pub fn rate_study(&self, g: &ControlTrajectory, schedule: &[f64]) -> Result<RateReport> {
        if schedule.len() < 3 {
            return Err(Error::InvalidParameter(
                "rate study needs at least 3 epsilon values".into(),
            ));
        }
        let stokes = self.solver();
        let vtraj = stokes.solve(&self.v0, g)?;
        let reference = solve_forward(&self.theta0, &vtraj, 0.0)?;
        let mut sup_diff = Vec::new();
        for &eps in schedule {
            let teps = solve_forward(&self.theta0, &vtraj, eps)?;
            let mut sup = 0.0f64;
            for (a, b) in teps.snapshots.iter().zip(reference.snapshots.iter()) {
                let d = a.sub(b);
                sup = sup.max(lp_norm(&d, 2.0)?);
            }
            sup_diff.push(sup);
        }
        let slope = fit_loglog_slope(schedule, &sup_diff);
        Ok(RateReport {
            eps: schedule.to_vec(),
            sup_diff,
            slope,
        })
    }

    /// Run descent from two initial controls and report their distance.
    pub fn uniqueness_probe(
        &self,
        g0_a: &ControlTrajectory,
        g0_b: &ControlTrajectory,
        cfg: &OptConfig,
    ) -> Result<UniquenessReport> {
        let ra = self.descend(g0_a, cfg)?;
        let rb = self.descend(g0_b, cfg)?;
        let dt = self.stokes_cfg.dt;
        let mut diff = ra.g_final.clone();
        diff.axpy(-1.0, &rb.g_final);
        let na = ra.g_final.l2_space_time(dt);
        let distance_rel = if na > 1e-300 {
            diff.l2_space_time(dt) / na
        } else {
            diff.l2_space_time(dt)
        };
        Ok(UniquenessReport {
            distance_rel,
            residual_a: ra.optimality_residual,
            residual_b: rb.optimality_residual,
            converged: ra.converged && rb.converged,
        })
    }
}

/// L-BFGS two-loop recursion: returns `-H ∇J` for the limited-memory inverse
/// Hessian built from `pairs = [(s, y, 1/<s,y>), ...]` (oldest first), scaled
/// initially by `<s,y>/<y,y>` of the most recent pair.
fn two_loop_direction(
    grad: &ControlTrajectory,
    pairs: &[(ControlTrajectory, ControlTrajectory, f64)],
    dt: f64,
) -> ControlTrajectory {
    let mut q = grad.clone();
    let mut alphas = vec![0.0; pairs.len()];
    for (i, (s, y, rho)) in pairs.iter().enumerate().rev() {
        let a = rho * s.inner_space_time(&q, dt);
        alphas[i] = a;
        q.axpy(-a, y);
    }
    let (s_last, y_last, _) = pairs.last().expect("two_loop needs at least one pair");
    let yy = y_last.l2_space_time_sq(dt);
    if yy > 1e-300 {
        q.scale(s_last.inner_space_time(y_last, dt) / yy);
    }
    for (i, (s, y, rho)) in pairs.iter().enumerate() {
        let b = rho * y.inner_space_time(&q, dt);
        q.axpy(alphas[i] - b, s);
    }
    q.scale(-1.0);
    q
}

/// Least-squares slope of `ln(y)` against `ln(x)`.
pub fn fit_loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.max(1e-300).ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx
        .iter()
        .zip(ly.iter())
        .map(|(a, b)| (a - mx) * (b - my))
        .sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Pick `nt` so that `dt = T / nt` satisfies the advective CFL bound for a
/// velocity bound `vmax` with safety factor `cfl`.
pub fn choose_nt(grid: Grid, t_horizon: f64, vmax: f64, cfl: f64) -> usize {
    let hmin = grid.hx.min(grid.hy);
    let dt_max = cfl * hmin / vmax.max(1e-12);
    (t_horizon / dt_max).ceil().max(1.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_problem(eps: f64, gamma: f64) -> MixingProblem {
        let grid = Grid::default_channel(24, 13).unwrap();
        MixingProblem {
            grid,
            theta0: ScalarField::from_fn(grid, |x, _| x.sin()),
            v0: VectorField::zeros(grid),
            stokes_cfg: StokesConfig::new(1.0, 0.02, 10).unwrap(),
            gamma,
            eps,
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = small_problem(1e-2, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = ControlTrajectory::random(p.grid, p.stokes_cfg.nt, 1.0, &mut rng);
        let h = ControlTrajectory::random(p.grid, p.stokes_cfg.nt, 1.0, &mut rng);
        let (grad, _) = p.gradient(&g).unwrap();
        let directional = grad.inner_space_time(&h, p.stokes_cfg.dt);

        let delta = 1e-5;
        let mut gp = g.clone();
        gp.axpy(delta, &h);
        let mut gm = g.clone();
        gm.axpy(-delta, &h);
        let jp = p.evaluate(&gp).unwrap().total;
        let jm = p.evaluate(&gm).unwrap().total;
        let fd = (jp - jm) / (2.0 * delta);
        assert_relative_eq!(directional, fd, max_relative = 1e-6);
    }

    #[test]
    fn gradient_requires_positive_eps() {
        let p = small_problem(0.0, 1e-3);
        let g = ControlTrajectory::zeros(p.grid, p.stokes_cfg.nt);
        assert!(p.gradient(&g).is_err());
    }

    #[test]
    fn constant_initial_data_converges_immediately() {
        // θ0 constant: J = const + γ/2 ‖g‖², so BB recovers the exact Hessian
        // step and the minimizer g = 0 in a couple of iterations.
        let grid = Grid::default_channel(24, 13).unwrap();
        let p = MixingProblem {
            grid,
            theta0: ScalarField::constant(grid, 0.7),
            v0: VectorField::zeros(grid),
            stokes_cfg: StokesConfig::new(1.0, 0.02, 10).unwrap(),
            gamma: 0.5,
            eps: 1e-2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g0 = ControlTrajectory::random(p.grid, p.stokes_cfg.nt, 0.5, &mut rng);
        let res = p
            .descend(&g0, &OptConfig { max_iters: 10, ..OptConfig::default() })
            .unwrap();
        assert!(res.converged, "residual {}", res.optimality_residual);
        assert!(res.iterations <= 3, "took {} iterations", res.iterations);
        assert!(res.g_final.l2_space_time(p.stokes_cfg.dt) < 1e-6);
    }

    #[test]
    fn descent_decreases_cost_from_seed() {
        // θ0 = sin x makes the zero control a symmetry critical point, so
        // start from a small symmetry-breaking seed.
        let p = small_problem(1e-2, 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g0 = ControlTrajectory::random(p.grid, p.stokes_cfg.nt, 0.4, &mut rng);
        let j0 = p.evaluate(&g0).unwrap().total;
        let cfg = OptConfig { max_iters: 8, tol_g: 1e-12, ..OptConfig::default() };
        let res = p.descend(&g0, &cfg).unwrap();
        assert!(res.final_cost.total < j0, "{} !< {j0}", res.final_cost.total);
        for w in res.history.windows(2) {
            assert!(w[1].j <= w[0].j + 1e-14, "cost increased");
        }
    }

    #[test]
    fn picard_iteration_decreases_cost() {
        let p = small_problem(1e-2, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g0 = ControlTrajectory::random(p.grid, p.stokes_cfg.nt, 0.3, &mut rng);
        let j0 = p.evaluate(&g0).unwrap().total;
        let cfg = OptConfig {
            max_iters: 6,
            mode: OptMode::Picard,
            tol_g: 1e-10,
            ..OptConfig::default()
        };
        let res = p.descend(&g0, &cfg).unwrap();
        assert!(res.final_cost.total < j0);
    }

    #[test]
    fn penalized_anchor_at_optimum_is_fixed() {
        let p = small_problem(1e-2, 1.0);
        let g0 = ControlTrajectory::zeros(p.grid, p.stokes_cfg.nt);
        let cfg = OptConfig { max_iters: 60, tol_g: 1e-9, ..OptConfig::default() };
        let star = p.descend(&g0, &cfg).unwrap();
        let pen = p
            .penalized_descend(&star.g_final, &star.g_final, &cfg)
            .unwrap();
        let mut d = pen.g_final.clone();
        d.axpy(-1.0, &star.g_final);
        assert!(d.l2_space_time(p.stokes_cfg.dt) < 1e-6);
    }

    #[test]
    fn epsilon_schedule_validation() {
        let p = small_problem(1e-2, 1.0);
        let g0 = ControlTrajectory::zeros(p.grid, p.stokes_cfg.nt);
        let cfg = OptConfig { max_iters: 1, ..OptConfig::default() };
        assert!(p.epsilon_continuation(&[], &g0, &cfg).is_err());
        assert!(p.epsilon_continuation(&[1e-2, 1e-2], &g0, &cfg).is_err());
        assert!(p.epsilon_continuation(&[1e-2, -1e-3], &g0, &cfg).is_err());
        assert!(p.epsilon_continuation(&[1e-2, 1e-3], &g0, &cfg).is_ok());
    }

    #[test]
    fn rate_study_on_diffusive_decay() {
        let p = small_problem(0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = ControlTrajectory::random(p.grid, p.stokes_cfg.nt, 0.5, &mut rng);
        let report = p
            .rate_study(&g, &[1e-2, 3e-3, 1e-3, 3e-4, 1e-4])
            .unwrap();
        assert!(
            report.sup_diff.windows(2).all(|w| w[1] < w[0]),
            "differences not monotone in eps: {:?}",
            report.sup_diff
        );
        assert!(report.slope >= 0.4, "slope {}", report.slope);
        assert!(p.rate_study(&g, &[1e-2, 1e-3]).is_err());
    }

    #[test]
    fn loglog_slope_fit_is_exact_on_power_laws() {
        let x = [1.0, 0.5, 0.25, 0.125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.sqrt()).collect();
        assert_relative_eq!(fit_loglog_slope(&x, &y), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn choose_nt_respects_cfl() {
        let grid = Grid::default_channel(64, 65).unwrap();
        let nt = choose_nt(grid, 1.0, 2.0, 0.5);
        let dt = 1.0 / nt as f64;
        assert!(dt <= 0.5 * grid.hx.min(grid.hy) / 2.0 + 1e-15);
    }
}
