//! Time-series observables, harmonic spectra and density snapshots.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, Wavefunction, C64};
use crate::physics::{LaserPulse, SoftCorePotential};

/// Per-step record of a propagation. All columns have equal length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub norm2: Vec<f64>,
    pub dip_x: Vec<f64>,
    pub dip_y: Vec<f64>,
    pub acc_x: Vec<f64>,
    pub acc_y: Vec<f64>,
    pub field_x: Vec<f64>,
    pub field_y: Vec<f64>,
}

/// One row of an [`ObservableSeries`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub norm2: f64,
    pub dipole: (f64, f64),
    pub acceleration: (f64, f64),
    pub field: (f64, f64),
}

impl ObservableSeries {
    pub fn with_capacity(n: usize) -> Self {
        ObservableSeries {
            times: Vec::with_capacity(n),
            norm2: Vec::with_capacity(n),
            dip_x: Vec::with_capacity(n),
            dip_y: Vec::with_capacity(n),
            acc_x: Vec::with_capacity(n),
            acc_y: Vec::with_capacity(n),
            field_x: Vec::with_capacity(n),
            field_y: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, s: Sample) {
        self.times.push(s.t);
        self.norm2.push(s.norm2);
        self.dip_x.push(s.dipole.0);
        self.dip_y.push(s.dipole.1);
        self.acc_x.push(s.acceleration.0);
        self.acc_y.push(s.acceleration.1);
        self.field_x.push(s.field.0);
        self.field_y.push(s.field.1);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample {
            t: self.times[i],
            norm2: self.norm2[i],
            dipole: (self.dip_x[i], self.dip_y[i]),
            acceleration: (self.acc_x[i], self.acc_y[i]),
            field: (self.field_x[i], self.field_y[i]),
        }
    }

    pub fn final_norm2(&self) -> Option<f64> {
        self.norm2.last().copied()
    }

    /// Every column has the same length.
    pub fn is_consistent(&self) -> bool {
        let n = self.times.len();
        [
            &self.norm2,
            &self.dip_x,
            &self.dip_y,
            &self.acc_x,
            &self.acc_y,
            &self.field_x,
            &self.field_y,
        ]
        .iter()
        .all(|c| c.len() == n)
    }

    /// Sampling step if the time axis is uniform to `1e-9` relative.
    pub fn uniform_step(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::Usage("series needs at least two samples".into()));
        }
        let dt = (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64;
        let ok = dt > 0.0
            && self
                .times
                .windows(2)
                .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.max(1.0));
        if !ok {
            return Err(Error::Usage("time axis is not uniformly sampled".into()));
        }
        Ok(dt)
    }
}

/// Precomputed per-node weights for the moments measured every step.
#[derive(Debug, Clone)]
pub struct MomentTables {
    xs: Vec<f64>,
    ys: Vec<f64>,
    grad_x: Vec<f64>,
    grad_y: Vec<f64>,
    cell: f64,
}

/// Raw moments of `|psi|^2`, already divided by the norm where relevant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub norm2: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    /// `<dV/dx>`, `<dV/dy>`.
    pub mean_grad: (f64, f64),
}

impl MomentTables {
    /// `pot = None` means free motion: the force term vanishes.
    pub fn new(grid: &Grid2D, pot: Option<&SoftCorePotential>) -> Self {
        let xs = grid.xs();
        let ys = grid.ys();
        let mut grad_x = vec![0.0; grid.len()];
        let mut grad_y = vec![0.0; grid.len()];
        if let Some(pot) = pot {
            for (j, &y) in ys.iter().enumerate() {
                for (i, &x) in xs.iter().enumerate() {
                    let (gx, gy) = pot.gradient(x, y);
                    grad_x[j * xs.len() + i] = gx;
                    grad_y[j * xs.len() + i] = gy;
                }
            }
        }
        MomentTables {
            xs,
            ys,
            grad_x,
            grad_y,
            cell: grid.cell_area(),
        }
    }

    /// Single pass over the wavefunction; `Err` on non-finite or zero norm.
    pub fn measure(&self, psi: &Wavefunction) -> Result<Moments> {
        let amp = psi.amplitudes();
        let nx = self.xs.len();
        assert_eq!(amp.len(), self.grad_x.len(), "tables built for another grid");
        let (mut s0, mut sx, mut sy, mut gx, mut gy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (j, &y) in self.ys.iter().enumerate() {
            let row = &amp[j * nx..(j + 1) * nx];
            let grx = &self.grad_x[j * nx..(j + 1) * nx];
            let gry = &self.grad_y[j * nx..(j + 1) * nx];
            let (mut r0, mut rx, mut rgx, mut rgy) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..nx {
                let d = row[i].norm_sqr();
                r0 += d;
                rx += self.xs[i] * d;
                rgx += grx[i] * d;
                rgy += gry[i] * d;
            }
            s0 += r0;
            sx += rx;
            sy += y * r0;
            gx += rgx;
            gy += rgy;
        }
        if !s0.is_finite() {
            return Err(Error::Blowup { step: 0, time: f64::NAN });
        }
        if s0 == 0.0 {
            return Err(Error::Usage("expectation value of a zero-norm state".into()));
        }
        Ok(Moments {
            norm2: s0 * self.cell,
            mean_x: sx / s0,
            mean_y: sy / s0,
            mean_grad: (gx / s0, gy / s0),
        })
    }
}

/// `(<x>, <y>)` of the normalized state.
pub fn dipole_expectation(psi: &Wavefunction) -> Result<(f64, f64)> {
    let m = MomentTables::new(psi.grid(), None).measure(psi)?;
    Ok((m.mean_x, m.mean_y))
}

/// Ehrenfest acceleration `-<grad V> - E(t)` of the normalized state.
pub fn dipole_acceleration(
    psi: &Wavefunction,
    pot: Option<&SoftCorePotential>,
    pulse: Option<&LaserPulse>,
    t: f64,
) -> Result<(f64, f64)> {
    let m = MomentTables::new(psi.grid(), pot).measure(psi)?;
    let (ex, ey) = pulse.map_or((0.0, 0.0), |p| p.field(t));
    Ok((-m.mean_grad.0 - ex, -m.mean_grad.1 - ey))
}

/// `<x^2>` and `<y^2>` of the normalized density.
pub fn second_moments(grid: &Grid2D, density: &[f64]) -> (f64, f64) {
    let (mut s0, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for j in 0..grid.ny() {
        let y = grid.y(j);
        for i in 0..grid.nx() {
            let d = density[grid.index(i, j)];
            let x = grid.x(i);
            s0 += d;
            sxx += x * x * d;
            syy += y * y * d;
        }
    }
    (sxx / s0, syy / s0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    None,
    #[default]
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumSource {
    Dipole,
    #[default]
    Acceleration,
}

impl Window {
    pub fn as_str(&self) -> &'static str {
        match self {
            Window::None => "none",
            Window::Hann => "hann",
        }
    }

    fn weights(&self, n: usize) -> Vec<f64> {
        match self {
            Window::None => vec![1.0; n],
            Window::Hann if n < 2 => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / (n - 1) as f64).cos()))
                .collect(),
        }
    }
}

impl SpectrumSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectrumSource::Dipole => "dipole",
            SpectrumSource::Acceleration => "acceleration",
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for SpectrumSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Window {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Window::None),
            "hann" => Ok(Window::Hann),
            o => Err(format!("unknown window `{o}` (expected none | hann)")),
        }
    }
}

impl FromStr for SpectrumSource {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dipole" => Ok(SpectrumSource::Dipole),
            "acceleration" => Ok(SpectrumSource::Acceleration),
            o => Err(format!("unknown spectrum source `{o}` (expected dipole | acceleration)")),
        }
    }
}

/// One-sided power spectrum on a harmonic-order axis.
///
/// `power_x[k] = |sum_n w_n s_x(t_n) exp(-2 pi i k n / N)|^2` (unnormalized
/// DFT of the windowed samples), likewise for y, and `power = power_x + power_y`.
/// Bin `k` sits at order `2 pi k / (N dt omega)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub harmonic_order: Vec<f64>,
    pub power: Vec<f64>,
    pub power_x: Vec<f64>,
    pub power_y: Vec<f64>,
    pub window: Window,
    pub source: SpectrumSource,
    pub omega: f64,
    /// Factor all powers were divided by (1.0 when not rescaled).
    pub scale: f64,
}

impl Spectrum {
    /// Spacing of the order axis.
    pub fn resolution(&self) -> f64 {
        self.harmonic_order.get(1).copied().unwrap_or(0.0)
    }

    /// Largest total power with `|order - center| <= half_width`.
    pub fn peak_near(&self, center: f64, half_width: f64) -> f64 {
        self.harmonic_order
            .iter()
            .zip(&self.power)
            .filter(|(o, _)| (**o - center).abs() <= half_width)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max)
    }

    /// Divide all powers so the fundamental peak (orders 0.5..1.5) is one.
    pub fn rescale_to_fundamental(&mut self) {
        let peak = self.peak_near(1.0, 0.5);
        if peak > 0.0 {
            for v in self
                .power
                .iter_mut()
                .chain(self.power_x.iter_mut())
                .chain(self.power_y.iter_mut())
            {
                *v /= peak;
            }
            self.scale *= peak;
        }
    }

    /// Peak-to-floor ratio in dB around harmonic `order`: the peak is the
    /// maximum within `+-0.25` orders, the floor the median over the flanks
    /// `0.5 <= |o - order| <= 1.0`.
    pub fn harmonic_contrast_db(&self, order: f64) -> f64 {
        let peak = self.peak_near(order, 0.25);
        let mut flank: Vec<f64> = self
            .harmonic_order
            .iter()
            .zip(&self.power)
            .filter(|(o, _)| {
                let d = (**o - order).abs();
                (0.5..=1.0).contains(&d)
            })
            .map(|(_, p)| *p)
            .collect();
        if flank.is_empty() {
            return f64::NAN;
        }
        flank.sort_by(|a, b| a.total_cmp(b));
        let floor = flank[flank.len() / 2];
        10.0 * (peak / floor).log10()
    }
}

impl Spectrum {
    /// How far the even order `n` sits below the weaker of its odd neighbours, in dB.
    pub fn even_suppression_db(&self, n: u32) -> f64 {
        let n = n as f64;
        let odd = self.peak_near(n - 1.0, 0.25).min(self.peak_near(n + 1.0, 0.25));
        10.0 * (odd / self.peak_near(n, 0.25)).log10()
    }
}

/// `(order, visible)` for every integer order in `2..=max_order`.
pub fn harmonic_visibility(spec: &Spectrum, max_order: u32, threshold_db: f64) -> Vec<(u32, bool)> {
    (2..=max_order)
        .map(|n| (n, spec.harmonic_contrast_db(n as f64) >= threshold_db))
        .collect()
}

/// dB threshold for a harmonic to count as visible above the local floor.
pub const VISIBILITY_DB: f64 = 10.0;

/// Windowed one-sided spectrum of the dipole or acceleration columns.
pub fn hhg_spectrum(
    series: &ObservableSeries,
    omega: f64,
    source: SpectrumSource,
    window: Window,
) -> Result<Spectrum> {
    if !series.is_consistent() {
        return Err(Error::Usage("series columns have different lengths".into()));
    }
    if !(omega > 0.0) {
        return Err(Error::Usage("laser frequency must be positive".into()));
    }
    let dt = series.uniform_step()?;
    let (sx, sy) = match source {
        SpectrumSource::Dipole => (&series.dip_x, &series.dip_y),
        SpectrumSource::Acceleration => (&series.acc_x, &series.acc_y),
    };
    let n = sx.len();
    let w = window.weights(n);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let transform = |s: &[f64]| -> Vec<f64> {
        let mut buf: Vec<C64> = s.iter().zip(&w).map(|(v, wk)| C64::new(v * wk, 0.0)).collect();
        fft.process(&mut buf);
        buf[..=n / 2].iter().map(|z| z.norm_sqr()).collect()
    };
    let power_x = transform(sx);
    let power_y = transform(sy);
    let power = power_x.iter().zip(&power_y).map(|(a, b)| a + b).collect();
    let d_order = 2.0 * PI / (n as f64 * dt * omega);
    Ok(Spectrum {
        harmonic_order: (0..=n / 2).map(|k| k as f64 * d_order).collect(),
        power,
        power_x,
        power_y,
        window,
        source,
        omega,
        scale: 1.0,
    })
}

/// `|psi|^2` on the grid at time `t`, with the grid geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySnapshot {
    pub nx: u32,
    pub ny: u32,
    pub dx: f64,
    pub dy: f64,
    pub x0: f64,
    pub y0: f64,
    pub t: f64,
    /// Row-major, x fastest.
    pub density: Vec<f64>,
}

pub fn density_snapshot(psi: &Wavefunction, t: f64) -> DensitySnapshot {
    let g = psi.grid();
    DensitySnapshot {
        nx: g.nx() as u32,
        ny: g.ny() as u32,
        dx: g.dx(),
        dy: g.dy(),
        x0: g.x0(),
        y0: g.y0(),
        t,
        density: psi.density(),
    }
}

impl DensitySnapshot {
    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.nx as usize, self.ny as usize, self.dx, self.dy)
    }

    /// `<x^2> / <y^2>`; large for a packet stretched along x.
    pub fn anisotropy(&self) -> Result<f64> {
        let g = self.grid()?;
        let (xx, yy) = second_moments(&g, &self.density);
        Ok(xx / yy)
    }

    /// Total probability `sum density dx dy`.
    pub fn probability(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.dx * self.dy
    }
}
