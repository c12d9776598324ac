//! Subcommand drivers. Each returns `Ok(())` or an `AppError` that maps onto
//! the documented exit codes.

use crate::spec::{ControlSpec, RunSpec};
use optmix_core::adjoint::sweep_with_forcing;
use optmix_core::field::lp_norm;
use optmix_core::mixnorm::mix_norm;
use optmix_core::optimize::{choose_nt, MixingProblem, OptConfig};
use optmix_core::snapshot;
use optmix_core::stokes::{grad_v_infty_integral, ControlTrajectory, StokesConfig, StokesSolver};
use optmix_core::transport::{solve_forward, solve_linearized};
use optmix_core::{Error as CoreError, Grid, ScalarField, VectorField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub enum AppError {
    /// exit 1: a verification check failed
    Check(String),
    /// exit 2: configuration problem
    Config(String),
    /// exit 3: numerical failure during a solve
    Numerical(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Check(_) => 1,
            AppError::Config(_) => 2,
            AppError::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            AppError::Check(m) | AppError::Config(m) | AppError::Numerical(m) => m,
        }
    }
}

fn numerical(e: CoreError) -> AppError {
    AppError::Numerical(e.to_string())
}

pub struct Context {
    pub spec: RunSpec,
    pub spec_text: String,
    pub output: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

impl Context {
    fn write_manifest(&self, command: &str, extra: serde_json::Value) -> Result<(), AppError> {
        let mut hasher = Sha256::new();
        hasher.update(self.spec_text.as_bytes());
        let hash = hex::encode(hasher.finalize());
        let manifest = json!({
            "command": command,
            "config": serde_json::from_str::<serde_json::Value>(&self.spec_text)
                .unwrap_or(serde_json::Value::Null),
            "config_sha256": hash,
            "seed": self.seed,
            "threads": self.threads,
            "results": extra,
        });
        write_json(&self.output.join("manifest.json"), &manifest)
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), AppError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n")
        .map_err(|e| AppError::Numerical(format!("cannot write {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    std::fs::write(path, text)
        .map_err(|e| AppError::Numerical(format!("cannot write {}: {e}", path.display())))
}

/// Resolve grid, time step (by CFL against the control's velocity scale), and
/// the control trajectory itself.
struct Resolved {
    grid: Grid,
    nt: usize,
    dt: f64,
    control: ControlTrajectory,
    theta0: ScalarField,
}

fn resolve(ctx: &Context) -> Result<Resolved, AppError> {
    let spec = &ctx.spec;
    spec.validate().map_err(AppError::Config)?;
    let grid = spec.grid().map_err(AppError::Config)?;
    let theta0 = spec.theta0(grid).map_err(AppError::Config)?;
    let vscale = spec.control.velocity_scale(spec.physics.k).max(0.1);
    let nt = choose_nt(grid, spec.physics.t_final, vscale, spec.physics.cfl);
    let dt = spec.physics.t_final / nt as f64;
    let control = build_control(&spec.control, grid, nt, ctx.seed);
    Ok(Resolved {
        grid,
        nt,
        dt,
        control,
        theta0,
    })
}

fn build_control(spec: &ControlSpec, grid: Grid, nt: usize, seed: u64) -> ControlTrajectory {
    match spec {
        ControlSpec::Zero => ControlTrajectory::zeros(grid, nt),
        ControlSpec::Plug { amplitude } => ControlTrajectory::constant(grid, nt, *amplitude),
        ControlSpec::Shear { amplitude } => {
            let mut g = ControlTrajectory::zeros(grid, nt);
            for s in &mut g.slices {
                for v in s.bottom.iter_mut() {
                    *v = *amplitude;
                }
                for v in s.top.iter_mut() {
                    *v = -*amplitude;
                }
            }
            g
        }
        ControlSpec::Random { amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ControlTrajectory::random(grid, nt, *amplitude, &mut rng)
        }
    }
}

fn scalar_diagnostics(theta: &ScalarField) -> (f64, f64, f64, f64, f64) {
    (
        lp_norm(theta, 1.0).unwrap(),
        lp_norm(theta, 2.0).unwrap(),
        lp_norm(theta, f64::INFINITY).unwrap(),
        theta.integral(),
        mix_norm(theta),
    )
}

pub fn run_simulate(ctx: &Context) -> Result<(), AppError> {
    let r = resolve(ctx)?;
    let spec = &ctx.spec;
    let solver = StokesSolver::new(
        r.grid,
        StokesConfig::new(spec.physics.k, r.dt, r.nt).map_err(numerical)?,
    );
    let v = solver
        .solve(&VectorField::zeros(r.grid), &r.control)
        .map_err(numerical)?;
    let traj = solve_forward(&r.theta0, &v, spec.physics.epsilon).map_err(numerical)?;

    let mut csv = String::from("t,l1,l2,linf,mass,mixnorm\n");
    for (n, snap) in traj.snapshots.iter().enumerate() {
        let stride = ctx.spec.snapshot_stride;
        let wanted = n == 0 || n == r.nt || (stride > 0 && n % stride == 0);
        if !wanted {
            continue;
        }
        let (l1, l2, linf, mass, mn) = scalar_diagnostics(snap);
        writeln!(csv, "{},{l1},{l2},{linf},{mass},{mn}", n as f64 * r.dt).unwrap();
        snapshot::write_scalar(&ctx.output.join(format!("theta_{n:06}.fld")), snap)
            .map_err(numerical)?;
    }
    write_text(&ctx.output.join("diagnostics.csv"), &csv)?;

    let (l1_0, l2_0, linf_0, mass_0, mn_0) = scalar_diagnostics(&r.theta0);
    let (l1_t, l2_t, linf_t, mass_t, mn_t) = scalar_diagnostics(traj.terminal());
    let summary = json!({
        "nt": r.nt,
        "dt": r.dt,
        "mixnorm_initial": mn_0,
        "mixnorm_final": mn_t,
        "drift_l1": (l1_t - l1_0).abs() / l1_0.max(1e-300),
        "drift_l2": (l2_t - l2_0).abs() / l2_0.max(1e-300),
        "drift_linf": (linf_t - linf_0).abs() / linf_0.max(1e-300),
        "drift_mass": (mass_t - mass_0).abs() / r.grid.total_area(),
        "grad_v_infty_integral": grad_v_infty_integral(&v),
    });
    write_json(&ctx.output.join("summary.json"), &summary)?;
    ctx.write_manifest("simulate", summary)?;
    println!("mixnorm(theta_T) = {mn_t:.6e} (initial {mn_0:.6e})");
    Ok(())
}

fn history_csv(res: &optmix_core::optimize::OptResult) -> String {
    let mut csv = String::from("iter,J,mix_term,control_term,grad_norm,step,residual\n");
    for r in &res.history {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.iter, r.j, r.mix_term, r.control_term, r.grad_norm, r.step, r.residual
        )
        .unwrap();
    }
    csv
}

fn write_control(dir: &Path, stem: &str, g: &ControlTrajectory) -> Result<(), AppError> {
    // per-wall arrays over time: nx columns, nt+1 rows
    let grid = g.grid();
    let nt = g.nt();
    let mut bottom = Vec::with_capacity(grid.nx * (nt + 1));
    let mut top = Vec::with_capacity(grid.nx * (nt + 1));
    for s in &g.slices {
        bottom.extend_from_slice(&s.bottom);
        top.extend_from_slice(&s.top);
    }
    snapshot::write_array(
        &dir.join(format!("{stem}_bottom.fld")),
        grid.nx,
        nt + 1,
        &bottom,
    )
    .map_err(numerical)?;
    snapshot::write_array(&dir.join(format!("{stem}_top.fld")), grid.nx, nt + 1, &top)
        .map_err(numerical)
}

fn problem(ctx: &Context, r: &Resolved) -> Result<(MixingProblem, OptConfig), AppError> {
    let spec = &ctx.spec;
    let Some(opt) = &spec.optimizer else {
        return Err(AppError::Config(
            "this subcommand requires an \"optimizer\" block in the config".into(),
        ));
    };
    let p = MixingProblem {
        grid: r.grid,
        theta0: r.theta0.clone(),
        v0: VectorField::zeros(r.grid),
        stokes_cfg: StokesConfig::new(spec.physics.k, r.dt, r.nt).map_err(numerical)?,
        gamma: spec.physics.gamma,
        eps: spec.physics.epsilon,
    };
    Ok((p, opt.to_core(ctx.seed)))
}

pub fn run_optimize(ctx: &Context) -> Result<(), AppError> {
    let r = resolve(ctx)?;
    let (p, cfg) = problem(ctx, &r)?;
    if p.eps <= 0.0 {
        return Err(AppError::Config(
            "optimize requires physics.epsilon > 0 (use sweep-epsilon for the eps -> 0 limit)"
                .into(),
        ));
    }
    let j0 = p
        .evaluate(&ControlTrajectory::zeros(r.grid, r.nt))
        .map_err(numerical)?
        .total;
    let res = p.descend(&r.control, &cfg).map_err(numerical)?;
    write_text(&ctx.output.join("history.csv"), &history_csv(&res))?;
    write_control(&ctx.output, "g_final", &res.g_final)?;
    let summary = json!({
        "nt": r.nt,
        "dt": r.dt,
        "iterations": res.iterations,
        "converged": res.converged,
        "optimality_residual": res.optimality_residual,
        "grad_v_infty_integral": res.grad_v_infty,
        "J0": j0,
        "J_final": res.final_cost.total,
        "improvement_ratio": res.final_cost.total / j0,
        "mix_term": res.final_cost.mix_term,
        "control_term": res.final_cost.control_term,
    });
    write_json(&ctx.output.join("summary.json"), &summary)?;
    ctx.write_manifest("optimize", summary)?;
    println!(
        "J(g*)/J(0) = {:.6} after {} iterations (residual {:.3e})",
        res.final_cost.total / j0,
        res.iterations,
        res.optimality_residual
    );
    Ok(())
}

pub fn run_sweep_epsilon(ctx: &Context) -> Result<(), AppError> {
    let r = resolve(ctx)?;
    let (p, cfg) = problem(ctx, &r)?;
    let Some(schedule) = ctx.spec.epsilon_schedule.clone() else {
        return Err(AppError::Config(
            "sweep-epsilon requires an \"epsilon_schedule\" array in the config".into(),
        ));
    };
    let results = p
        .epsilon_continuation(&schedule, &r.control, &cfg)
        .map_err(numerical)?;
    let mut entries = Vec::new();
    let mut prev: Option<ControlTrajectory> = None;
    for (eps, res) in schedule.iter().zip(results.iter()) {
        let dist = prev.as_ref().map(|p0| {
            let mut d = res.g_final.clone();
            d.axpy(-1.0, p0);
            d.l2_space_time(r.dt)
        });
        entries.push(json!({
            "epsilon": eps,
            "J_final": res.final_cost.total,
            "iterations": res.iterations,
            "converged": res.converged,
            "optimality_residual": res.optimality_residual,
            "distance_to_previous": dist,
        }));
        prev = Some(res.g_final.clone());
    }
    if let Some(last) = results.last() {
        write_control(&ctx.output, "g_final", &last.g_final)?;
    }
    let summary = json!({ "nt": r.nt, "dt": r.dt, "entries": entries });
    write_json(&ctx.output.join("summary.json"), &summary)?;
    ctx.write_manifest("sweep-epsilon", summary)?;
    println!("swept {} epsilon values", schedule.len());
    Ok(())
}

/// The verification suite at spec resolution: adjoint identity, gradient FD,
/// conservation, rate study.
pub fn run_checks(ctx: &Context) -> Result<(), AppError> {
    let r = resolve(ctx)?;
    let spec = &ctx.spec;
    let k = spec.physics.k;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut report = Vec::new();
    let mut all_ok = true;
    let mut record = |name: &str, value: f64, tol: f64, upper: bool| {
        let ok = if upper { value <= tol } else { value >= tol };
        report.push(json!({
            "check": name,
            "value": value,
            "tolerance": tol,
            "passed": ok,
        }));
        ok
    };

    // adjoint transpose identity on a shortened horizon
    {
        let nt = r.nt.min(32);
        let cfg = StokesConfig::new(k, r.dt, nt).map_err(numerical)?;
        let solver = StokesSolver::new(r.grid, cfg);
        let ctrl = ControlTrajectory::random(r.grid, nt, 1.0, &mut rng);
        let h = ControlTrajectory::random(r.grid, nt, 1.0, &mut rng);
        let eps = spec.physics.epsilon.max(1e-3);
        let v = solver.apply_l(&ctrl).map_err(numerical)?;
        let base = solve_forward(&r.theta0, &v, eps).map_err(numerical)?;
        let z = solve_linearized(&h, &base, &v, eps, &solver).map_err(numerical)?;
        let w = solver.apply_l(&h).map_err(numerical)?;
        let seed_field = ScalarField::from_fn(r.grid, |x, y| (2.0 * x).cos() + 0.3 * y);
        let lhs: f64 = seed_field
            .values
            .iter()
            .zip(z.terminal().values.iter())
            .map(|(a, b)| a * b)
            .sum();
        let (_lam, seeds) = sweep_with_forcing(&base, &v, eps, &seed_field).map_err(numerical)?;
        let mut rhs = 0.0;
        for n in 0..=nt {
            rhs += seeds[n]
                .u
                .iter()
                .zip(w.snapshots[n].u.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + seeds[n]
                    .vy
                    .iter()
                    .zip(w.snapshots[n].vy.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
        }
        let err = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
        all_ok &= record("adjoint_identity", err, 1e-10, true);
    }

    // gradient vs finite differences
    {
        let nt = r.nt.min(32);
        let p = MixingProblem {
            grid: r.grid,
            theta0: r.theta0.clone(),
            v0: VectorField::zeros(r.grid),
            stokes_cfg: StokesConfig::new(k, r.dt, nt).map_err(numerical)?,
            gamma: spec.physics.gamma,
            eps: spec.physics.epsilon.max(1e-3),
        };
        let g = ControlTrajectory::random(r.grid, nt, 0.5, &mut rng);
        let h = ControlTrajectory::random(r.grid, nt, 0.5, &mut rng);
        let (grad, _) = p.gradient(&g).map_err(numerical)?;
        let directional = grad.inner_space_time(&h, r.dt);
        let delta = 1e-5;
        let mut gp = g.clone();
        gp.axpy(delta, &h);
        let mut gm = g.clone();
        gm.axpy(-delta, &h);
        let jp = p.evaluate(&gp).map_err(numerical)?.total;
        let jm = p.evaluate(&gm).map_err(numerical)?.total;
        let fd = (jp - jm) / (2.0 * delta);
        let err = (directional - fd).abs() / fd.abs().max(1e-300);
        all_ok &= record("gradient_fd", err, 1e-6, true);
    }

    // conservation at eps = 0 under the configured control
    {
        let cfg = StokesConfig::new(k, r.dt, r.nt).map_err(numerical)?;
        let solver = StokesSolver::new(r.grid, cfg);
        let v = solver.apply_l(&r.control).map_err(numerical)?;
        let traj = solve_forward(&r.theta0, &v, 0.0).map_err(numerical)?;
        let drift = (traj.terminal().integral() - r.theta0.integral()).abs()
            / r.grid.total_area();
        all_ok &= record("mass_conservation", drift, 1e-12, true);
    }

    // epsilon rate study
    {
        let p = MixingProblem {
            grid: r.grid,
            theta0: r.theta0.clone(),
            v0: VectorField::zeros(r.grid),
            stokes_cfg: StokesConfig::new(k, r.dt, r.nt).map_err(numerical)?,
            gamma: spec.physics.gamma,
            eps: 0.0,
        };
        let rep = p
            .rate_study(&r.control, &[1e-2, 4e-3, 1e-3])
            .map_err(numerical)?;
        all_ok &= record("epsilon_rate_slope", rep.slope, 0.4, false);
    }

    let summary = json!({ "passed": all_ok, "checks": report });
    write_json(&ctx.output.join("checks.json"), &summary)?;
    ctx.write_manifest("check", summary)?;
    for c in report_lines(&report) {
        println!("{c}");
    }
    if all_ok {
        Ok(())
    } else {
        Err(AppError::Check("one or more checks failed".into()))
    }
}

fn report_lines(report: &[serde_json::Value]) -> Vec<String> {
    report
        .iter()
        .map(|c| {
            let ok = c["passed"].as_bool().unwrap_or(false);
            format!(
                "[{}] {}: {:.3e} (tol {:.1e})",
                if ok { "PASS" } else { "FAIL" },
                c["check"].as_str().unwrap_or("?"),
                c["value"].as_f64().unwrap_or(f64::NAN),
                c["tolerance"].as_f64().unwrap_or(f64::NAN),
            )
        })
        .collect()
}

pub fn run_mixnorm(path: &Path) -> Result<(), AppError> {
    let (nx, ny, values) =
        snapshot::read_array(path).map_err(|e| AppError::Config(e.to_string()))?;
    let grid = Grid::default_channel(nx, ny)
        .map_err(|e| AppError::Config(format!("snapshot dimensions unusable: {e}")))?;
    let theta = ScalarField { grid, values };
    if !theta.is_finite() {
        return Err(AppError::Numerical(format!(
            "snapshot {} contains non-finite values",
            path.display()
        )));
    }
    println!("{:.12e}", mix_norm(&theta));
    Ok(())
}
