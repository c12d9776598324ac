use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::spectral::{C64, XFft};

/// Cell-centered scalar samples, row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.nx * grid.ny],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.nx * grid.ny],
        }
    }

    /// Sample `f(x, y)` at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                out.values[grid.idx(i, j)] = f(x, y);
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        for (v, w) in self.values.iter_mut().zip(other.values.iter()) {
            *v += a * w;
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Quadrature integral `∫ f dx`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Staggered (MAC) velocity samples: `u` at x-faces (nx × ny), `vy` at y-faces
/// (nx × (ny+1)), with `vy = 0` on both wall rows (no penetration).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub u: Vec<f64>,
    pub vy: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            u: vec![0.0; grid.nx * grid.ny],
            vy: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    /// Sample `(u(x,y), vy(x,y))` at the respective face centers; wall rows of
    /// `vy` are forced to zero.
    pub fn from_fn(grid: Grid, fu: impl Fn(f64, f64) -> f64, fv: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let x = grid.x_face(i);
                let y = (j as f64 + 0.5) * grid.hy;
                out.u[j * grid.nx + i] = fu(x, y);
            }
        }
        for j in 1..grid.ny {
            for i in 0..grid.nx {
                let x = (i as f64 + 0.5) * grid.hx;
                let y = grid.y_face(j);
                out.vy[j * grid.nx + i] = fv(x, y);
            }
        }
        out
    }

    #[inline]
    pub fn u_at(&self, i: usize, j: usize) -> f64 {
        self.u[j * self.grid.nx + i]
    }

    #[inline]
    pub fn vy_at(&self, i: usize, j: usize) -> f64 {
        self.vy[j * self.grid.nx + i]
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.vy.iter()).all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(self.vy.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, a: f64) {
        for v in self.u.iter_mut().chain(self.vy.iter_mut()) {
            *v *= a;
        }
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        for (v, w) in self.u.iter_mut().zip(other.u.iter()) {
            *v += a * w;
        }
        for (v, w) in self.vy.iter_mut().zip(other.vy.iter()) {
            *v += a * w;
        }
    }

    /// Zero the wall rows of `vy` exactly.
    pub fn enforce_no_penetration(&mut self) {
        let nx = self.grid.nx;
        let ny = self.grid.ny;
        for i in 0..nx {
            self.vy[i] = 0.0;
            self.vy[ny * nx + i] = 0.0;
        }
    }

    /// L² inner product of two velocity fields (uniform face weights).
    pub fn inner(&self, other: &VectorField) -> f64 {
        let area = self.grid.cell_area();
        let su: f64 = self
            .u
            .iter()
            .zip(other.u.iter())
            .map(|(a, b)| a * b)
            .sum();
        let sv: f64 = self
            .vy
            .iter()
            .zip(other.vy.iter())
            .map(|(a, b)| a * b)
            .sum();
        (su + sv) * area
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }
}

/// Tangential scalar data on the two walls (bottom `y=0`, top `y=Ly`),
/// sampled at the cell-center abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySlice {
    pub grid: Grid,
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
}

impl BoundarySlice {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            bottom: vec![0.0; grid.nx],
            top: vec![0.0; grid.nx],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            bottom: vec![c; grid.nx],
            top: vec![c; grid.nx],
        }
    }

    pub fn from_fn(grid: Grid, fb: impl Fn(f64) -> f64, ft: impl Fn(f64) -> f64) -> Self {
        let xs = grid.wall_x();
        Self {
            grid,
            bottom: xs.iter().map(|&x| fb(x)).collect(),
            top: xs.iter().map(|&x| ft(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bottom
            .iter()
            .chain(self.top.iter())
            .all(|v| v.is_finite())
    }

    pub fn scale(&mut self, a: f64) {
        for v in self.bottom.iter_mut().chain(self.top.iter_mut()) {
            *v *= a;
        }
    }

    pub fn axpy(&mut self, a: f64, other: &BoundarySlice) {
        for (v, w) in self.bottom.iter_mut().zip(other.bottom.iter()) {
            *v += a * w;
        }
        for (v, w) in self.top.iter_mut().zip(other.top.iter()) {
            *v += a * w;
        }
    }

    /// `∫_Γ f g dx` over both walls.
    pub fn inner(&self, other: &BoundarySlice) -> f64 {
        let s: f64 = self
            .bottom
            .iter()
            .zip(other.bottom.iter())
            .chain(self.top.iter().zip(other.top.iter()))
            .map(|(a, b)| a * b)
            .sum();
        s * self.grid.hx
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }
}

/// L² inner product `Σ f g · area`.
pub fn inner_product(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    if !f.grid.same_as(&g.grid) {
        return Err(Error::GridMismatch("inner_product"));
    }
    Ok(f.values
        .iter()
        .zip(g.values.iter())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * f.grid.cell_area())
}

/// Quadrature-weighted Lᵖ norm; `p = ∞` (use `f64::INFINITY`) gives `max |f|`.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    if p < 1.0 {
        return Err(Error::InvalidParameter(format!("lp_norm requires p >= 1, got {p}")));
    }
    let s: f64 = f.values.iter().map(|v| v.abs().powf(p)).sum();
    Ok((s * f.grid.cell_area()).powf(1.0 / p))
}

/// Gradient of a cell-centered scalar, sampled to the staggered layout:
/// ∂f/∂x spectrally at x-faces, ∂f/∂y by centered differences at interior
/// y-faces with second-order one-sided stencils on the walls.
pub fn gradient(f: &ScalarField) -> ScalarGradient {
    let g = f.grid;
    let fft = XFft::new(g.nx, g.lx);
    let mut modes = fft.forward(&f.values, g.ny);
    // Multiply by iκ e^{-iκ hx/2}: derivative evaluated at the x-face half a
    // cell to the left of the center. Zero the Nyquist mode.
    for j in 0..g.ny {
        for m in 0..g.nx {
            let idx = j * g.nx + m;
            if g.nx % 2 == 0 && m == g.nx / 2 {
                modes[idx] = C64::new(0.0, 0.0);
                continue;
            }
            let k = fft.wavenumber(m);
            let shift = C64::from_polar(1.0, -0.5 * k * g.hx);
            modes[idx] *= C64::new(0.0, k) * shift;
        }
    }
    let mut dx = vec![0.0; g.nx * g.ny];
    fft.inverse(&mut modes, &mut dx);

    let mut dy = vec![0.0; g.nx * (g.ny + 1)];
    for j in 1..g.ny {
        for i in 0..g.nx {
            dy[j * g.nx + i] = (f.at(i, j) - f.at(i, j - 1)) / g.hy;
        }
    }
    let h = g.hy;
    for i in 0..g.nx {
        // Quadratic fit through the three nearest cell centers.
        dy[i] = (-2.0 * f.at(i, 0) + 3.0 * f.at(i, 1) - f.at(i, 2)) / h;
        dy[g.ny * g.nx + i] =
            (2.0 * f.at(i, g.ny - 1) - 3.0 * f.at(i, g.ny - 2) + f.at(i, g.ny - 3)) / h;
    }
    ScalarGradient {
        grid: g,
        dx,
        dy,
    }
}

/// ∇f on the staggered layout (same shapes as `VectorField` components, but
/// without the no-penetration constraint on the wall rows).
#[derive(Debug, Clone)]
pub struct ScalarGradient {
    pub grid: Grid,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

/// Conservative MAC divergence per cell.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let ip = (i + 1) % g.nx;
            let du = (v.u_at(ip, j) - v.u_at(i, j)) / g.hx;
            let dv = (v.vy_at(i, j + 1) - v.vy_at(i, j)) / g.hy;
            out.values[g.idx(i, j)] = du + dv;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn grid() -> Grid {
        Grid::default_channel(64, 65).unwrap()
    }

    #[test]
    fn inner_product_of_ones_is_domain_area() {
        let one = ScalarField::constant(grid(), 1.0);
        assert_relative_eq!(inner_product(&one, &one).unwrap(), TAU, max_relative = 1e-14);
    }

    #[test]
    fn cos_sin_orthogonal() {
        let g = grid();
        let c = ScalarField::from_fn(g, |x, _| x.cos());
        let s = ScalarField::from_fn(g, |x, _| x.sin());
        assert!(inner_product(&c, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn inner_product_rejects_grid_mismatch() {
        let a = ScalarField::constant(grid(), 1.0);
        let b = ScalarField::constant(Grid::default_channel(32, 33).unwrap(), 1.0);
        assert!(inner_product(&a, &b).is_err());
    }

    #[test]
    fn lp_norms() {
        let g = grid();
        let one = ScalarField::constant(g, 1.0);
        assert_relative_eq!(lp_norm(&one, 2.0).unwrap(), TAU.sqrt(), max_relative = 1e-14);
        let neg = ScalarField::constant(g, -3.0);
        assert_relative_eq!(lp_norm(&neg, f64::INFINITY).unwrap(), 3.0);
        let c = ScalarField::from_fn(g, |x, _| x.cos());
        assert_relative_eq!(lp_norm(&c, 2.0).unwrap(), PI.sqrt(), max_relative = 1e-12);
        assert!(lp_norm(&one, 0.5).is_err());
    }

    #[test]
    fn lp2_matches_inner_product() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x, y| (x.sin() + 0.3) * (1.0 + y));
        let n2 = lp_norm(&f, 2.0).unwrap();
        let ip = inner_product(&f, &f).unwrap();
        assert_relative_eq!(n2 * n2, ip, max_relative = 1e-14);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let f = ScalarField::constant(grid(), 4.2);
        let df = gradient(&f);
        assert!(df.dx.iter().all(|v| v.abs() < 1e-13));
        assert!(df.dy.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn gradient_of_sin_x_is_cos_x() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x, _| x.sin());
        let df = gradient(&f);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let x = g.x_face(i);
                assert_relative_eq!(df.dx[j * g.nx + i], x.cos(), epsilon = 1e-12);
            }
        }
        assert!(df.dy.iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn gradient_of_y_squared() {
        let g = grid();
        let f = ScalarField::from_fn(g, |_, y| y * y);
        let df = gradient(&f);
        // Interior faces are exact for quadratics; walls second-order one-sided.
        for j in 0..=g.ny {
            let y = g.y_face(j);
            assert_relative_eq!(df.dy[j * g.nx], 2.0 * y, epsilon = 1e-10);
        }
        assert!(df.dx.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn divergence_of_uniform_flow_is_zero() {
        let v = VectorField::from_fn(grid(), |_, _| 3.0, |_, _| 0.0);
        let d = divergence(&v);
        assert!(d.max_abs() < 1e-14);
    }

    #[test]
    fn divergence_of_grad_sin_x() {
        let g = grid();
        // u = cos x sampled at faces is the spectral gradient of sin x.
        let v = VectorField::from_fn(g, |x, _| x.cos(), |_, _| 0.0);
        let d = divergence(&v);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, _) = g.cell_center(i, j);
                // MAC difference of cos x: -sin x with the discrete symbol.
                let expected = (((x + 0.5 * g.hx).cos()) - ((x - 0.5 * g.hx).cos())) / g.hx;
                assert_relative_eq!(d.at(i, j), expected, epsilon = 1e-12);
                assert_relative_eq!(d.at(i, j), -x.sin(), epsilon = 2e-3);
            }
        }
    }

    #[test]
    fn discrete_integration_by_parts() {
        // (div v, φ) = -Σ_faces v · Gφ for v with vy = 0 at walls, where G is
        // the MAC difference gradient (the exact transpose of the divergence).
        let g = grid();
        let v = VectorField::from_fn(g, |x, y| (x + y).sin(), |x, y| x.cos() * (PI * y).sin());
        let phi = ScalarField::from_fn(g, |x, y| (2.0 * x).cos() + y * y);
        let lhs = inner_product(&divergence(&v), &phi).unwrap();
        let mut rhs = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let im = (i + g.nx - 1) % g.nx;
                let gx = (phi.at(i, j) - phi.at(im, j)) / g.hx;
                rhs -= v.u_at(i, j) * gx * g.cell_area();
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                let gy = (phi.at(i, j) - phi.at(i, j - 1)) / g.hy;
                rhs -= v.vy_at(i, j) * gy * g.cell_area();
            }
        }
        assert_relative_eq!(lhs, rhs, epsilon = 1e-11, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn inner_product_symmetric_positive(seed in 0u64..32) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Grid::default_channel(16, 17).unwrap();
            let mut a = ScalarField::zeros(g);
            let mut b = ScalarField::zeros(g);
            for v in &mut a.values { *v = rng.gen_range(-1.0..1.0); }
            for v in &mut b.values { *v = rng.gen_range(-1.0..1.0); }
            let ab = inner_product(&a, &b).unwrap();
            let ba = inner_product(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-14 * ab.abs().max(1.0));
            prop_assert!(inner_product(&a, &a).unwrap() >= 0.0);
        }

        #[test]
        fn gradient_is_linear(seed in 0u64..16) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Grid::default_channel(16, 17).unwrap();
            let mut a = ScalarField::zeros(g);
            let mut b = ScalarField::zeros(g);
            for v in &mut a.values { *v = rng.gen_range(-1.0..1.0); }
            for v in &mut b.values { *v = rng.gen_range(-1.0..1.0); }
            let alpha = 0.7;
            let mut comb = a.clone();
            comb.scale(alpha);
            comb.axpy(1.0, &b);
            let dc = gradient(&comb);
            let da = gradient(&a);
            let db = gradient(&b);
            for i in 0..dc.dx.len() {
                prop_assert!((dc.dx[i] - alpha * da.dx[i] - db.dx[i]).abs() < 1e-10);
            }
            for i in 0..dc.dy.len() {
                prop_assert!((dc.dy[i] - alpha * da.dy[i] - db.dy[i]).abs() < 1e-10);
            }
        }
    }
}
