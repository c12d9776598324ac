use crate::error::{Error, Result};

/// Uniform staggered grid on the periodic channel `[0, Lx) x [0, Ly]`.
///
/// The x-direction is periodic with `nx` cells; the y-direction has two
/// physical walls at `y = 0` and `y = Ly` and `ny` cells. Scalars live at
/// cell centers, x-velocity at x-face centers, y-velocity at y-face centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::GridTooSmall { nx, ny });
        }
        if lx <= 0.0 || ly <= 0.0 {
            return Err(Error::NonPositiveLength { lx, ly });
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    /// Default channel `[0, 2π) x [0, 1]`.
    pub fn default_channel(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, std::f64::consts::TAU, 1.0)
    }

    /// Per-cell quadrature weight (uniform).
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    /// Total quadrature mass, `Lx * Ly` up to roundoff.
    pub fn total_area(&self) -> f64 {
        self.cell_area() * (self.nx * self.ny) as f64
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    /// Cell-center coordinates of cell (i, j).
    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    /// x-coordinate of the i-th x-face (location of `u[i][j]`).
    #[inline]
    pub fn x_face(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    /// y-coordinate of the j-th y-face (location of `vy[i][j]`), j in `0..=ny`.
    #[inline]
    pub fn y_face(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    /// Wall x-sample coordinates (cell-center abscissae, shared by both walls).
    pub fn wall_x(&self) -> Vec<f64> {
        (0..self.nx).map(|i| (i as f64 + 0.5) * self.hx).collect()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.lx - other.lx).abs() <= 1e-14 * self.lx.abs()
            && (self.ly - other.ly).abs() <= 1e-14 * self.ly.abs()
    }
}
