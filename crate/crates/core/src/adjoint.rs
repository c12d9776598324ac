//! Backward-in-time scalar adjoint solver.
//!
//! The default mode is the exact transpose of the discrete forward transport
//! map, stepped in reverse order, so duality identities against the linearized
//! forward solve hold to roundoff. A continuous-adjoint mode discretizes the
//! backward equation independently for cross-validation.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::mixnorm::helmholtz_neumann_solve;
use crate::stokes::VelocityTrajectory;
use crate::transport::{ScalarTrajectory, TransportSolver};

/// How the backward solve is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjointMode {
    /// Transpose of the discrete forward stepping (discretize-then-optimize).
    #[default]
    DiscreteTranspose,
    /// Independent discretization of the backward advection-diffusion
    /// equation; agrees with the transpose mode to O(dt + h²).
    Continuous,
}

/// Terminal adjoint state `ρ(T) = (-Δ+I)^{-1} θ(T)`.
pub fn terminal_condition(theta_t: &ScalarField) -> ScalarField {
    helmholtz_neumann_solve(theta_t)
}

/// Backward adjoint trajectory `ρ(t_nt .. t_0)`, returned in forward index
/// order (`snapshots[n]` is ρ at `t_n`).
pub fn solve_adjoint(
    theta_t: &ScalarField,
    base: &ScalarTrajectory,
    v: &VelocityTrajectory,
    eps: f64,
    mode: AdjointMode,
) -> Result<ScalarTrajectory> {
    if base.nt() != v.nt() {
        return Err(Error::TrajectoryMismatch(
            "scalar and velocity trajectories disagree in length",
        ));
    }
    let grid = theta_t.grid;
    let solver = TransportSolver::new(grid, eps, v.dt)?;
    let nt = v.nt();
    let mut snapshots = vec![ScalarField::zeros(grid); nt + 1];
    let mut rho = terminal_condition(theta_t);
    snapshots[nt] = rho.clone();
    for n in (0..nt).rev() {
        let mut v_mid = v.snapshots[n].clone();
        v_mid.axpy(1.0, &v.snapshots[n + 1]);
        v_mid.scale(0.5);
        rho = match mode {
            AdjointMode::DiscreteTranspose => solver.step_transpose(&rho, &v_mid),
            AdjointMode::Continuous => {
                // Backward equation in reversed time is advection by -v with
                // the same diffusion; reuse the forward stepper.
                let mut v_neg = v_mid.clone();
                v_neg.scale(-1.0);
                solver.step_with_mid(&rho, &v_neg)
            }
        };
        if !rho.is_finite() {
            return Err(Error::NonFinite {
                context: "solve_adjoint",
            });
        }
        snapshots[n] = rho.clone();
    }
    Ok(ScalarTrajectory {
        snapshots,
        eps,
        dt: v.dt,
    })
}

/// Backward sweep with velocity-cotangent accumulation.
///
/// `terminal_seed` is the Euclidean cotangent of the cost with respect to the
/// terminal scalar. Returns the adjoint scalar trajectory (in the same
/// Euclidean scaling) and, per time node, the cotangent of the cost with
/// respect to the velocity snapshot — the discrete realization of the
/// `θ ∇ρ` forcing that feeds the control adjoint.
pub fn sweep_with_forcing(
    base: &ScalarTrajectory,
    v: &VelocityTrajectory,
    eps: f64,
    terminal_seed: &ScalarField,
) -> Result<(Vec<ScalarField>, Vec<VectorField>)> {
    if base.nt() != v.nt() {
        return Err(Error::TrajectoryMismatch(
            "scalar and velocity trajectories disagree in length",
        ));
    }
    let grid = terminal_seed.grid;
    let solver = TransportSolver::new(grid, eps, v.dt)?;
    let nt = v.nt();
    let mut lambda_traj = vec![ScalarField::zeros(grid); nt + 1];
    let mut seeds = vec![VectorField::zeros(grid); nt + 1];
    let mut lambda = terminal_seed.clone();
    lambda_traj[nt] = lambda.clone();
    for n in (0..nt).rev() {
        let mut v_mid = v.snapshots[n].clone();
        v_mid.axpy(1.0, &v.snapshots[n + 1]);
        v_mid.scale(0.5);
        let (lam_prev, vbar_mid) =
            solver.step_transpose_with_forcing(&lambda, &base.snapshots[n], &v_mid);
        seeds[n].axpy(0.5, &vbar_mid);
        seeds[n + 1].axpy(0.5, &vbar_mid);
        lambda = lam_prev;
        lambda_traj[n] = lambda.clone();
    }
    Ok((lambda_traj, seeds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::lp_norm;
    use crate::grid::Grid;
    use crate::stokes::{ControlTrajectory, StokesConfig, StokesSolver};
    use crate::transport::{solve_forward, solve_linearized};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::default_channel(24, 13).unwrap()
    }

    fn setup(
        seed: u64,
        eps: f64,
    ) -> (
        StokesSolver,
        ControlTrajectory,
        crate::stokes::VelocityTrajectory,
        crate::transport::ScalarTrajectory,
    ) {
        let g = grid();
        let cfg = StokesConfig::new(1.0, 0.02, 10).unwrap();
        let solver = StokesSolver::new(g, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctrl = ControlTrajectory::random(g, cfg.nt, 1.5, &mut rng);
        let v = solver.apply_l(&ctrl).unwrap();
        let theta0 = ScalarField::from_fn(g, |x, _| x.sin());
        let base = solve_forward(&theta0, &v, eps).unwrap();
        (solver, ctrl, v, base)
    }

    #[test]
    fn stationary_adjoint_with_zero_velocity() {
        let g = grid();
        let v = crate::stokes::VelocityTrajectory {
            snapshots: vec![VectorField::zeros(g); 6],
            dt: 0.1,
        };
        let theta_t = ScalarField::from_fn(g, |x, _| (2.0 * x).cos());
        let base = solve_forward(&theta_t, &v, 0.0).unwrap();
        let rho = solve_adjoint(&theta_t, &base, &v, 0.0, AdjointMode::DiscreteTranspose).unwrap();
        let want = terminal_condition(&theta_t);
        for snap in &rho.snapshots {
            let d = snap.sub(&want);
            assert!(d.max_abs() < 1e-14, "drift {}", d.max_abs());
        }
    }

    #[test]
    fn duality_identity_against_linearized_solve() {
        // <seed, z(T)> = Σ_n <seeds_n, w_n> for z the linearized forward state
        // driven by w = L h, all pairings plain Euclidean.
        let eps = 5e-3;
        let (solver, _ctrl, v, base) = setup(8, eps);
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let h = ControlTrajectory::random(g, solver.cfg.nt, 1.0, &mut rng);
        let z = solve_linearized(&h, &base, &v, eps, &solver).unwrap();
        let w = solver.apply_l(&h).unwrap();

        let seed = ScalarField::from_fn(g, |x, y| (2.0 * x).cos() + 0.3 * y);
        let lhs: f64 = seed
            .values
            .iter()
            .zip(z.terminal().values.iter())
            .map(|(a, b)| a * b)
            .sum();

        let (_lambda, vel_seeds) = sweep_with_forcing(&base, &v, eps, &seed).unwrap();
        let mut rhs = 0.0;
        for n in 0..=solver.cfg.nt {
            rhs += vel_seeds[n]
                .u
                .iter()
                .zip(w.snapshots[n].u.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>();
            rhs += vel_seeds[n]
                .vy
                .iter()
                .zip(w.snapshots[n].vy.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    #[test]
    fn discrete_and_continuous_modes_agree_to_discretization_error() {
        let eps = 1e-2;
        let (_solver, _ctrl, v, base) = setup(4, eps);
        let theta_t = base.terminal().clone();
        let a = solve_adjoint(&theta_t, &base, &v, eps, AdjointMode::DiscreteTranspose).unwrap();
        let b = solve_adjoint(&theta_t, &base, &v, eps, AdjointMode::Continuous).unwrap();
        let d = a.snapshots[0].sub(&b.snapshots[0]);
        let scale = lp_norm(&a.snapshots[0], 2.0).unwrap();
        assert!(
            lp_norm(&d, 2.0).unwrap() < 0.05 * scale,
            "modes disagree: {} vs scale {}",
            lp_norm(&d, 2.0).unwrap(),
            scale
        );
    }

    #[test]
    fn adjoint_rejects_mismatched_lengths() {
        let (_solver, _ctrl, v, base) = setup(5, 1e-2);
        let mut short = base.clone();
        short.snapshots.pop();
        let theta_t = base.terminal().clone();
        assert!(solve_adjoint(&theta_t, &short, &v, 1e-2, AdjointMode::DiscreteTranspose).is_err());
    }
}
