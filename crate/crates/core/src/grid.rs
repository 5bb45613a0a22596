//! Uniform 2D position grid, its conjugate momentum grid, the complex
//! wavefunction container and the 2D FFT used to move between them.
//!
//! Layout is row-major with `x` the fastest index: amplitude `(i, j)` lives at
//! `j * nx + i`. The forward transform is unnormalized and the inverse carries
//! the full `1 / (nx * ny)` factor.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Smallest accepted point count per axis.
pub const MIN_POINTS: usize = 16;

#[derive(Clone, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    x0: f64,
    y0: f64,
    kx: Vec<f64>,
    ky: Vec<f64>,
}

impl fmt::Debug for Grid2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid2D")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("dx", &self.dx)
            .field("dy", &self.dy)
            .finish()
    }
}

fn check_count(name: &str, n: usize) -> Result<()> {
    if n < MIN_POINTS || !n.is_power_of_two() {
        return Err(Error::config(
            name,
            format!("point count must be a power of two >= {MIN_POINTS}, got {n}"),
        ));
    }
    Ok(())
}

fn check_spacing(name: &str, d: f64) -> Result<()> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::config(name, format!("spacing must be positive, got {d}")));
    }
    Ok(())
}

/// Momentum values in standard FFT ordering: 0, 1, ..., n/2-1, -n/2, ..., -1
/// times `2 pi / (n d)`.
pub fn fft_frequencies(n: usize, d: f64) -> Vec<f64> {
    let dk = 2.0 * PI / (n as f64 * d);
    (0..n)
        .map(|i| {
            let m = if i < n / 2 { i as isize } else { i as isize - n as isize };
            m as f64 * dk
        })
        .collect()
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        check_count("nx", nx)?;
        check_count("ny", ny)?;
        check_spacing("dx", dx)?;
        check_spacing("dy", dy)?;
        Ok(Grid2D {
            nx,
            ny,
            dx,
            dy,
            x0: -((nx / 2) as f64) * dx,
            y0: -((ny / 2) as f64) * dy,
            kx: fft_frequencies(nx, dx),
            ky: fft_frequencies(ny, dy),
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn y0(&self) -> f64 {
        self.y0
    }
    pub fn kx(&self) -> &[f64] {
        &self.kx
    }
    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    pub fn dkx(&self) -> f64 {
        2.0 * PI / (self.nx as f64 * self.dx)
    }

    pub fn dky(&self) -> f64 {
        2.0 * PI / (self.ny as f64 * self.dy)
    }

    /// Smallest distance from the origin to a box edge.
    pub fn min_half_extent(&self) -> f64 {
        (-self.x0).min(-self.y0)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Same point counts and (bitwise) spacings.
    pub fn same_shape(&self, other: &Grid2D) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.dx == other.dx && self.dy == other.dy
    }
}

/// Complex amplitude field on a [`Grid2D`]. `|amp|^2 dx dy` is a probability.
#[derive(Debug, Clone)]
pub struct Wavefunction {
    grid: Arc<Grid2D>,
    amp: Vec<C64>,
}

impl Wavefunction {
    pub fn zeros(grid: Arc<Grid2D>) -> Self {
        let amp = vec![C64::new(0.0, 0.0); grid.len()];
        Wavefunction { grid, amp }
    }

    pub fn from_fn(grid: Arc<Grid2D>, mut f: impl FnMut(f64, f64) -> C64) -> Self {
        let mut amp = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            let y = grid.y(j);
            for i in 0..grid.nx() {
                amp.push(f(grid.x(i), y));
            }
        }
        Wavefunction { grid, amp }
    }

    pub fn from_amplitudes(grid: Arc<Grid2D>, amp: Vec<C64>) -> Result<Self> {
        if amp.len() != grid.len() {
            return Err(Error::Usage(format!(
                "amplitude buffer has {} entries, grid has {}",
                amp.len(),
                grid.len()
            )));
        }
        Ok(Wavefunction { grid, amp })
    }

    /// Normalized Gaussian `exp(-((x-xc)^2 + (y-yc)^2) / (4 sigma^2))` with
    /// momentum kick `(px, py)`; `sigma` is the standard deviation of `|psi|^2`.
    pub fn gaussian(grid: Arc<Grid2D>, center: (f64, f64), sigma: f64, momentum: (f64, f64)) -> Self {
        let c = 1.0 / (2.0 * PI * sigma * sigma).sqrt();
        Wavefunction::from_fn(grid, |x, y| {
            let (u, v) = (x - center.0, y - center.1);
            let mag = c * (-(u * u + v * v) / (4.0 * sigma * sigma)).exp();
            C64::from_polar(mag, momentum.0 * x + momentum.1 * y)
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amp
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amp
    }

    pub(crate) fn buffer_mut(&mut self) -> &mut Vec<C64> {
        &mut self.amp
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amp
    }

    /// `sum |amp|^2 dx dy` without a finiteness check.
    pub fn norm_sqr_unchecked(&self) -> f64 {
        self.amp.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn norm_sqr(&self) -> Result<f64> {
        let n2 = self.norm_sqr_unchecked();
        if !n2.is_finite() {
            return Err(Error::Blowup { step: 0, time: f64::NAN });
        }
        Ok(n2)
    }

    /// `sqrt(sum |amp|^2 dx dy)`.
    pub fn norm(&self) -> Result<f64> {
        self.norm_sqr().map(f64::sqrt)
    }

    /// `sum conj(self) * other dx dy`.
    pub fn inner_product(&self, other: &Wavefunction) -> Result<C64> {
        if !self.grid.same_shape(&other.grid) {
            return Err(Error::Usage("inner product of wavefunctions on different grids".into()));
        }
        let s: C64 = self
            .amp
            .iter()
            .zip(&other.amp)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.cell_area())
    }

    /// Scale to unit norm; returns the norm before scaling.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm()?;
        if n == 0.0 {
            return Err(Error::Usage("cannot normalize a zero wavefunction".into()));
        }
        self.scale(1.0 / n);
        Ok(n)
    }

    pub fn scale(&mut self, s: f64) {
        for z in &mut self.amp {
            *z *= s;
        }
    }

    /// `|amp|^2` per node, same layout as the amplitudes.
    pub fn density(&self) -> Vec<f64> {
        self.amp.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Largest pointwise modulus of the difference.
    pub fn max_abs_diff(&self, other: &Wavefunction) -> f64 {
        self.amp
            .iter()
            .zip(&other.amp)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// L2 distance `sqrt(sum |a-b|^2 dx dy)`.
    pub fn l2_distance(&self, other: &Wavefunction) -> f64 {
        let s: f64 = self.amp.iter().zip(&other.amp).map(|(a, b)| (a - b).norm_sqr()).sum();
        (s * self.grid.cell_area()).sqrt()
    }
}

/// Out-of-place blocked transpose of a `rows x cols` row-major matrix.
pub(crate) fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    const B: usize = 8;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Planned 2D complex FFT for one grid shape.
///
/// `forward`/`inverse` work in the natural layout. The `_transposed` pair skips
/// the final transpose: in that layout `(i, j)` lives at `i * ny + j`.
pub struct Fft2d {
    nx: usize,
    ny: usize,
    fx: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
    work: Vec<C64>,
    scratch: Vec<C64>,
}

impl Fft2d {
    pub fn new(grid: &Grid2D) -> Self {
        let mut planner = FftPlanner::new();
        let (nx, ny) = (grid.nx(), grid.ny());
        let fx = planner.plan_fft_forward(nx);
        let fy = planner.plan_fft_forward(ny);
        let ix = planner.plan_fft_inverse(nx);
        let iy = planner.plan_fft_inverse(ny);
        let scratch_len = [&fx, &fy, &ix, &iy]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Fft2d {
            nx,
            ny,
            fx,
            fy,
            ix,
            iy,
            work: vec![C64::new(0.0, 0.0); nx * ny],
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
        }
    }

    fn check(&self, data: &[C64]) {
        assert_eq!(data.len(), self.nx * self.ny, "buffer does not match FFT plan");
    }

    /// Unnormalized forward transform, natural layout in and out.
    pub fn forward(&mut self, data: &mut Vec<C64>) {
        self.forward_transposed(data);
        transpose(data, &mut self.work, self.nx, self.ny);
        std::mem::swap(data, &mut self.work);
    }

    /// Inverse transform including the `1 / (nx ny)` factor.
    pub fn inverse(&mut self, data: &mut Vec<C64>) {
        self.check(data);
        transpose(data, &mut self.work, self.ny, self.nx);
        std::mem::swap(data, &mut self.work);
        self.inverse_transposed(data);
    }

    /// Forward transform leaving the result in transposed layout.
    pub fn forward_transposed(&mut self, data: &mut Vec<C64>) {
        self.check(data);
        self.fx.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.work, self.ny, self.nx);
        std::mem::swap(data, &mut self.work);
        self.fy.process_with_scratch(data, &mut self.scratch);
    }

    /// Inverse of [`Fft2d::forward_transposed`], normalized.
    pub fn inverse_transposed(&mut self, data: &mut Vec<C64>) {
        self.check(data);
        self.iy.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.work, self.nx, self.ny);
        std::mem::swap(data, &mut self.work);
        self.ix.process_with_scratch(data, &mut self.scratch);
        let s = 1.0 / (self.nx * self.ny) as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Simpson quadrature of the error-function integrand.
    fn erf(x: f64) -> f64 {
        let n = 20_000;
        let h = x / n as f64;
        let f = |t: f64| (-t * t).exp();
        let mut s = f(0.0) + f(x);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(k as f64 * h);
        }
        s * h / 3.0 * 2.0 / PI.sqrt()
    }

    #[test]
    fn symmetric_grid_16() {
        let g = Grid2D::new(16, 16, 1.0, 1.0).unwrap();
        assert_eq!(g.x(0), -8.0);
        assert_eq!(g.x(15), 7.0);
        assert_eq!(g.x(8), 0.0);
        assert!((g.dkx() - std::f64::consts::FRAC_PI_8).abs() < 1e-15);
        assert_eq!(g.kx()[1], g.dkx());
        assert_eq!(g.kx()[8], -PI);
    }

    #[test]
    fn box_extent_256() {
        let g = Grid2D::new(256, 256, 0.4, 0.4).unwrap();
        assert!((g.x0() + 51.2).abs() < 1e-12);
        assert!((g.x(255) - 50.8).abs() < 1e-12);
        assert!((g.kx().iter().cloned().fold(0.0, |a: f64, b| a.max(b.abs())) - PI / 0.4).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(Grid2D::new(100, 16, 1.0, 1.0), Err(Error::Config { ref field, .. }) if field == "nx"));
        assert!(Grid2D::new(8, 16, 1.0, 1.0).is_err());
        assert!(matches!(Grid2D::new(16, 16, 1.0, 0.0), Err(Error::Config { ref field, .. }) if field == "dy"));
        assert!(Grid2D::new(16, 16, -1.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_norm_and_zero() {
        let g = Arc::new(Grid2D::new(128, 128, 0.25, 0.25).unwrap());
        let psi = Wavefunction::gaussian(g.clone(), (0.0, 0.0), 1.5, (0.0, 0.0));
        assert!((psi.norm().unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(Wavefunction::zeros(g).norm().unwrap(), 0.0);
    }

    #[test]
    fn truncated_gaussian_matches_erf() {
        // box [-4, 4) holds a sigma = 2 Gaussian (in |psi|^2) out to 2 sigma
        let g = Arc::new(Grid2D::new(128, 128, 8.0 / 128.0, 8.0 / 128.0).unwrap());
        let sigma = 2.0;
        let psi = Wavefunction::gaussian(g, (0.0, 0.0), sigma, (0.0, 0.0));
        let n2 = psi.norm_sqr().unwrap();
        // node sums are midpoint sums over cells [x0 - dx/2, x_last + dx/2]
        let h = 4.0 / 128.0;
        let s = sigma * 2f64.sqrt();
        let p1 = 0.5 * (erf((4.0 + h) / s) + erf((4.0 - h) / s));
        assert!(n2 < 1.0);
        assert!((n2 - p1 * p1).abs() < 1e-4, "{n2} vs {}", p1 * p1);
    }

    #[test]
    fn nan_is_blowup() {
        let g = Arc::new(Grid2D::new(16, 16, 1.0, 1.0).unwrap());
        let mut psi = Wavefunction::zeros(g);
        psi.amplitudes_mut()[3] = C64::new(f64::NAN, 0.0);
        assert!(matches!(psi.norm(), Err(Error::Blowup { .. })));
    }

    #[test]
    fn inner_products() {
        let g = Arc::new(Grid2D::new(256, 64, 0.5, 0.5).unwrap());
        let a = Wavefunction::gaussian(g.clone(), (-20.0, 0.0), 1.0, (0.0, 0.0));
        let b = Wavefunction::gaussian(g.clone(), (20.0, 0.0), 1.0, (0.0, 0.0));
        assert!(a.inner_product(&b).unwrap().norm() < 1e-12);
        let aa = a.inner_product(&a).unwrap();
        assert!((aa.re - a.norm_sqr().unwrap()).abs() < 1e-12);
        assert!(aa.im.abs() < 1e-12);

        let k1 = g.kx()[3];
        let k2 = g.kx()[7];
        let p = Wavefunction::from_fn(g.clone(), |x, _| C64::from_polar(1.0, k1 * x));
        let q = Wavefunction::from_fn(g.clone(), |x, _| C64::from_polar(1.0, k2 * x));
        assert!(p.inner_product(&q).unwrap().norm() < 1e-12 * p.norm_sqr().unwrap());

        let other = Arc::new(Grid2D::new(64, 64, 0.5, 0.5).unwrap());
        assert!(matches!(a.inner_product(&Wavefunction::zeros(other)), Err(Error::Usage(_))));
    }

    #[test]
    fn fft_of_delta_and_plane_wave() {
        let g = Grid2D::new(16, 32, 1.0, 0.5).unwrap();
        let mut fft = Fft2d::new(&g);
        let mut d = vec![C64::new(0.0, 0.0); g.len()];
        d[0] = C64::new(1.0, 0.0);
        fft.forward(&mut d);
        assert!(d.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-14));

        // e^{i kx x} lands on the (3, 0) bin with weight nx*ny, up to the phase of x0
        let (m, n) = (3usize, 5usize);
        let mut p: Vec<C64> = (0..g.ny())
            .flat_map(|j| {
                let g = &g;
                (0..g.nx()).map(move |i| C64::from_polar(1.0, g.kx()[m] * g.x(i) + g.ky()[n] * g.y(j)))
            })
            .collect();
        fft.forward(&mut p);
        let peak = p[g.index(m, n)].norm();
        assert!((peak - g.len() as f64).abs() < 1e-9);
        let rest: f64 = p.iter().map(|z| z.norm()).sum::<f64>() - peak;
        assert!(rest < 1e-8);
    }
}
