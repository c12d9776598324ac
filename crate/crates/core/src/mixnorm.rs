//! The `(H¹)'` mix-norm via the Neumann Helmholtz operator `-Δ + I`, and the
//! cost functional (terminal mixedness plus control energy).

use crate::error::{Error, Result};
use crate::field::{inner_product, ScalarField};
use crate::spectral::{thomas_const_off, XFft};
use crate::stokes::ControlTrajectory;
use serde::{Deserialize, Serialize};

/// Solve `(-Δ + I) Φ = θ` with periodic x and homogeneous Neumann walls.
///
/// Spectral in x, second-order three-point stencil in y. The operator has no
/// zero eigenvalue, so the solve needs no gauge fixing.
pub fn helmholtz_neumann_solve(theta: &ScalarField) -> ScalarField {
    let g = theta.grid;
    let fft = XFft::new(g.nx, g.lx);
    let mut modes = fft.forward(&theta.values, g.ny);
    let hy2 = g.hy * g.hy;
    let e = -1.0 / hy2;
    let mut col = vec![num_complex::Complex::new(0.0, 0.0); g.ny];
    let mut diag = vec![0.0f64; g.ny];
    for m in 0..g.nx {
        let sx = fft.spectral_laplace_symbol(m);
        for j in 0..g.ny {
            let ny_coupling = if j == 0 || j == g.ny - 1 { 1.0 } else { 2.0 };
            diag[j] = 1.0 + sx + ny_coupling / hy2;
            col[j] = modes[j * g.nx + m];
        }
        thomas_const_off(&diag, e, &mut col);
        for j in 0..g.ny {
            modes[j * g.nx + m] = col[j];
        }
    }
    let mut out = ScalarField::zeros(g);
    fft.inverse(&mut modes, &mut out.values);
    out
}

/// Apply the discrete `-Δ + I` (Neumann walls), the inverse of the solve.
pub fn helmholtz_neumann_apply(phi: &ScalarField) -> ScalarField {
    let g = phi.grid;
    let fft = XFft::new(g.nx, g.lx);
    let mut modes = fft.forward(&phi.values, g.ny);
    let hy2 = g.hy * g.hy;
    for m in 0..g.nx {
        let sx = fft.spectral_laplace_symbol(m);
        let col: Vec<num_complex::Complex<f64>> =
            (0..g.ny).map(|j| modes[j * g.nx + m]).collect();
        for j in 0..g.ny {
            let me = col[j];
            let up = if j + 1 < g.ny { col[j + 1] } else { me };
            let dn = if j > 0 { col[j - 1] } else { me };
            modes[j * g.nx + m] = me * (1.0 + sx) + (2.0 * me - up - dn) / hy2;
        }
    }
    let mut out = ScalarField::zeros(g);
    fft.inverse(&mut modes, &mut out.values);
    out
}

/// `‖θ‖_{(H¹)'} = √((-Δ+I)^{-1}θ, θ)`.
pub fn mix_norm(theta: &ScalarField) -> f64 {
    let phi = helmholtz_neumann_solve(theta);
    inner_product(&phi, theta)
        .expect("same grid by construction")
        .max(0.0)
        .sqrt()
}

/// Terminal-mixedness plus control-energy cost breakdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub mix_term: f64,
    pub control_term: f64,
    pub total: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

/// `J = ½ ‖θ(T)‖²_{(H¹)'} + γ/2 ‖g‖²_{L²(0,T;L²(Γ))}` with trapezoidal time
/// quadrature for the control term.
pub fn cost(
    g: &ControlTrajectory,
    dt: f64,
    theta_t: &ScalarField,
    gamma: f64,
    epsilon: f64,
) -> Result<CostReport> {
    if gamma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "cost requires gamma > 0, got {gamma}"
        )));
    }
    let mn = mix_norm(theta_t);
    let mix_term = 0.5 * mn * mn;
    let control_term = 0.5 * gamma * g.l2_space_time_sq(dt);
    Ok(CostReport {
        mix_term,
        control_term,
        total: mix_term + control_term,
        gamma,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::lp_norm;
    use crate::grid::Grid;
    use crate::stokes::ControlTrajectory;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::default_channel(64, 65).unwrap()
    }

    #[test]
    fn constant_is_fixed_point() {
        let theta = ScalarField::constant(grid(), 1.0);
        let phi = helmholtz_neumann_solve(&theta);
        for v in &phi.values {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cos_x_eigenfunction() {
        let g = grid();
        let theta = ScalarField::from_fn(g, |x, _| x.cos());
        let phi = helmholtz_neumann_solve(&theta);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, _) = g.cell_center(i, j);
                assert_relative_eq!(phi.at(i, j), 0.5 * x.cos(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cos_pi_y_eigenfunction_second_order() {
        let errs: Vec<f64> = [64usize, 128]
            .iter()
            .map(|&ny| {
                let g = Grid::default_channel(8, ny + 1).unwrap();
                let theta = ScalarField::from_fn(g, |_, y| (PI * y).cos());
                let phi = helmholtz_neumann_solve(&theta);
                let mut err = 0.0f64;
                for j in 0..g.ny {
                    for i in 0..g.nx {
                        let (_, y) = g.cell_center(i, j);
                        err = err.max((phi.at(i, j) - (PI * y).cos() / (1.0 + PI * PI)).abs());
                    }
                }
                err
            })
            .collect();
        assert!(errs[0] < 2e-4, "coarse error {}", errs[0]);
        assert!(errs[1] < errs[0] / 3.0, "not second order: {errs:?}");
    }

    #[test]
    fn residual_of_solve_is_small() {
        let g = grid();
        let theta = ScalarField::from_fn(g, |x, y| (3.0 * x).sin() + y * y - 0.5);
        let phi = helmholtz_neumann_solve(&theta);
        let back = helmholtz_neumann_apply(&phi);
        let diff = back.sub(&theta);
        assert!(lp_norm(&diff, 2.0).unwrap() <= 1e-12 * lp_norm(&theta, 2.0).unwrap());
    }

    #[test]
    fn self_adjoint_under_inner_product() {
        let g = grid();
        let a = ScalarField::from_fn(g, |x, y| x.sin() * (1.0 + 0.5 * y));
        let b = ScalarField::from_fn(g, |x, y| (2.0 * x).cos() + (y - 0.3).powi(2));
        let lhs = inner_product(&helmholtz_neumann_solve(&a), &b).unwrap();
        let rhs = inner_product(&a, &helmholtz_neumann_solve(&b)).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn mix_norm_values() {
        let g = grid();
        let one = ScalarField::constant(g, 1.0);
        assert_relative_eq!(mix_norm(&one), (2.0 * PI).sqrt(), max_relative = 1e-12);
        let c = ScalarField::from_fn(g, |x, _| x.cos());
        assert_relative_eq!(mix_norm(&c), (PI / 2.0).sqrt(), max_relative = 1e-12);
        let cy = ScalarField::from_fn(g, |_, y| (PI * y).cos());
        assert_relative_eq!(
            mix_norm(&cy),
            (PI / (1.0 + PI * PI)).sqrt(),
            max_relative = 1e-3
        );
    }

    #[test]
    fn mix_norm_bounded_by_l2_and_homogeneous() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x, y| (2.0 * x).sin() + 0.2 * y);
        assert!(mix_norm(&f) < lp_norm(&f, 2.0).unwrap());
        let mut f3 = f.clone();
        f3.scale(-3.0);
        assert_relative_eq!(mix_norm(&f3), 3.0 * mix_norm(&f), max_relative = 1e-12);
        // Decreasing in wavenumber: small scales count less.
        let m1 = mix_norm(&ScalarField::from_fn(g, |x, _| x.cos()));
        let m4 = mix_norm(&ScalarField::from_fn(g, |x, _| (4.0 * x).cos()));
        assert!(m4 < m1);
        assert_relative_eq!(
            m4,
            PI.sqrt() / (17.0f64).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn cost_examples() {
        let g = grid();
        let zero_theta = ScalarField::zeros(g);
        let zero_g = ControlTrajectory::zeros(g, 4);
        let r = cost(&zero_g, 0.25, &zero_theta, 1.0, 0.0).unwrap();
        assert_eq!(r.total, 0.0);

        let c = ScalarField::from_fn(g, |x, _| x.cos());
        let r = cost(&zero_g, 0.25, &c, 1.0, 0.0).unwrap();
        assert_relative_eq!(r.total, PI / 4.0, max_relative = 1e-12);

        // g ≡ 1 on both walls, γ = 2, T = 1: γ/2 · (2 walls · 2π · 1) = 4π.
        let nt = 8;
        let mut gg = ControlTrajectory::zeros(g, nt);
        for s in &mut gg.slices {
            for v in s.bottom.iter_mut().chain(s.top.iter_mut()) {
                *v = 1.0;
            }
        }
        let r = cost(&gg, 1.0 / nt as f64, &zero_theta, 2.0, 0.0).unwrap();
        assert_relative_eq!(r.total, 4.0 * PI, max_relative = 1e-12);
        assert!(cost(&gg, 0.125, &zero_theta, -1.0, 0.0).is_err());
    }
}
