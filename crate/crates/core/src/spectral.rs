//! FFT-in-x plus tridiagonal-in-y building blocks.
//!
//! Every elliptic solve in the channel (pressure Poisson, Helmholtz, CN
//! diffusion) decouples into one tridiagonal system per x-Fourier mode. The
//! per-mode matrices are real and symmetric, so the resulting physical-space
//! operators are symmetric and their transposes are themselves.

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub type C64 = Complex<f64>;

/// Row-wise forward/inverse FFT over the periodic x-direction.
pub struct XFft {
    pub nx: usize,
    pub lx: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl XFft {
    pub fn new(nx: usize, lx: f64) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            lx,
            fwd: planner.plan_fft_forward(nx),
            inv: planner.plan_fft_inverse(nx),
        }
    }

    /// Signed wavenumber of mode m: `2π m' / Lx` with `m' = m` for `m <= nx/2`,
    /// else `m - nx`.
    #[inline]
    pub fn wavenumber(&self, m: usize) -> f64 {
        let half = self.nx / 2;
        let m_signed = if m <= half {
            m as isize
        } else {
            m as isize - self.nx as isize
        };
        std::f64::consts::TAU * m_signed as f64 / self.lx
    }

    /// Symbol of the MAC one-sided difference Laplacian `-D_x G_x`:
    /// `(4/hx²) sin²(κ hx / 2)`, reported with the sign of `-∂xx` (>= 0).
    #[inline]
    pub fn mac_laplace_symbol(&self, m: usize) -> f64 {
        let hx = self.lx / self.nx as f64;
        let s = (0.5 * self.wavenumber(m) * hx).sin();
        4.0 * s * s / (hx * hx)
    }

    /// Spectral symbol of `-∂xx`: `κ²`.
    #[inline]
    pub fn spectral_laplace_symbol(&self, m: usize) -> f64 {
        let k = self.wavenumber(m);
        k * k
    }

    /// Forward FFT of each of `nrows` contiguous rows of length nx.
    pub fn forward(&self, data: &[f64], nrows: usize) -> Vec<C64> {
        assert_eq!(data.len(), self.nx * nrows);
        let mut buf: Vec<C64> = data.iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut scratch = vec![C64::new(0.0, 0.0); self.fwd.get_inplace_scratch_len()];
        for row in buf.chunks_mut(self.nx) {
            self.fwd.process_with_scratch(row, &mut scratch);
        }
        buf
    }

    /// Inverse FFT of each row; writes the real part (normalized by nx).
    pub fn inverse(&self, modes: &mut [C64], out: &mut [f64]) {
        assert_eq!(modes.len(), out.len());
        let mut scratch = vec![C64::new(0.0, 0.0); self.inv.get_inplace_scratch_len()];
        let scale = 1.0 / self.nx as f64;
        for (row, orow) in modes.chunks_mut(self.nx).zip(out.chunks_mut(self.nx)) {
            self.inv.process_with_scratch(row, &mut scratch);
            for (o, c) in orow.iter_mut().zip(row.iter()) {
                *o = c.re * scale;
            }
        }
    }
}

/// Solve a symmetric tridiagonal system with constant off-diagonal `e` and
/// per-row diagonal `d`, complex right-hand side in place.
pub fn thomas_const_off(d: &[f64], e: f64, rhs: &mut [C64]) {
    let n = d.len();
    assert_eq!(rhs.len(), n);
    if n == 0 {
        return;
    }
    let mut c = vec![0.0f64; n];
    c[0] = e / d[0];
    rhs[0] /= d[0];
    for j in 1..n {
        let denom = d[j] - e * c[j - 1];
        c[j] = e / denom;
        rhs[j] = (rhs[j] - rhs[j - 1] * e) / denom;
    }
    for j in (0..n - 1).rev() {
        let next = rhs[j + 1];
        rhs[j] -= next * c[j];
    }
}

/// Solve the singular Neumann tridiagonal (nullspace = constants) by removing
/// the incompatible component, pinning the first unknown, and returning the
/// zero-mean solution.
pub fn thomas_neumann_singular(d: &[f64], e: f64, rhs: &mut [C64]) {
    let n = d.len();
    assert!(n >= 2);
    let mean = rhs.iter().sum::<C64>() / n as f64;
    for r in rhs.iter_mut() {
        *r -= mean;
    }
    // Pin rhs[0] := 0 and solve rows 1..n with the q0-coupling dropped.
    rhs[0] = C64::new(0.0, 0.0);
    {
        let (head, tail) = rhs.split_at_mut(1);
        let _ = head;
        thomas_const_off(&d[1..], e, tail);
    }
    let mean = rhs.iter().sum::<C64>() / n as f64;
    for r in rhs.iter_mut() {
        *r -= mean;
    }
}
