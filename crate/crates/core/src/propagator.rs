//! Second-order split-operator propagation in real and imaginary time.
//!
//! One real-time step over `[t, t + dt]` is
//!
//! ```text
//! exp(-i T dt/2) exp(-i V dt) exp(-i T dt/2)
//! ```
//!
//! with `T` diagonal in momentum space and `V` diagonal in position space.
//! Time-dependent pieces enter through their exact integrals over the
//! sub-interval they act on: in the velocity gauge the kinetic symbol is
//! `(k + A)^2 / 2` with `A` averaged over each half step, in the length gauge
//! the potential carries `r . int E dt`. Both reduce to the exact free-particle
//! propagator when the binding potential is switched off.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use rustfft::{Fft, FftPlanner};

use crate::grid::{transpose, Fft2d, Grid2D, Wavefunction, C64};
use crate::observables::{MomentTables, ObservableSeries, Sample};
use crate::physics::{LaserPulse, SoftCorePotential};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gauge {
    Length,
    #[default]
    Velocity,
}

impl Gauge {
    pub fn as_str(&self) -> &'static str {
        match self {
            Gauge::Length => "length",
            Gauge::Velocity => "velocity",
        }
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gauge {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "length" => Ok(Gauge::Length),
            "velocity" => Ok(Gauge::Velocity),
            o => Err(format!("unknown gauge `{o}` (expected length | velocity)")),
        }
    }
}

/// Width of the absorbing band on each side of the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AbsorberWidth {
    /// `1/8` of the box length per side.
    Auto,
    /// Explicit width in bohr; `0` disables the absorber.
    Bohr(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub gauge: Gauge,
    pub absorber_width: AbsorberWidth,
    /// Mask is `cos^exponent` across the band.
    pub absorber_exponent: f64,
    /// Imaginary-time step.
    pub imaginary_dt: f64,
    /// Energy change (a.u.) between convergence checks that counts as converged.
    pub imaginary_time_tol: f64,
    pub imaginary_max_iterations: usize,
    /// Steps between energy evaluations during relaxation.
    pub imaginary_check_interval: usize,
    /// Field-free propagation appended after the pulse (a.u.).
    pub tail: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            dt: 0.05,
            gauge: Gauge::Velocity,
            absorber_width: AbsorberWidth::Auto,
            absorber_exponent: 0.125,
            imaginary_dt: 0.02,
            imaginary_time_tol: 1e-10,
            imaginary_max_iterations: 50_000,
            imaginary_check_interval: 10,
            tail: 0.0,
        }
    }
}

impl PropagatorConfig {
    /// Absorber width in bohr for this grid (0 when disabled).
    pub fn resolved_absorber_width(&self, grid: &Grid2D) -> f64 {
        match self.absorber_width {
            AbsorberWidth::Auto => grid.nx().min(grid.ny()) as f64 * grid.dx().min(grid.dy()) / 8.0,
            AbsorberWidth::Bohr(w) => w,
        }
    }

    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.imaginary_dt.is_finite() && self.imaginary_dt > 0.0) {
            return Err(Error::config("imaginary_dt", format!("must be positive, got {}", self.imaginary_dt)));
        }
        if !(self.imaginary_time_tol > 0.0) {
            return Err(Error::config("imaginary_time_tol", "must be positive"));
        }
        if self.imaginary_check_interval == 0 {
            return Err(Error::config("imaginary_check_interval", "must be at least 1"));
        }
        if !(self.absorber_exponent.is_finite() && self.absorber_exponent > 0.0) {
            return Err(Error::config("absorber_exponent", "must be positive"));
        }
        if !(self.tail >= 0.0) {
            return Err(Error::config("tail", "must be non-negative"));
        }
        let w = self.resolved_absorber_width(grid);
        let limit = grid.min_half_extent() / 2.0;
        if !(w >= 0.0) || w > limit {
            return Err(Error::config(
                "absorber_width",
                format!("must lie in [0, {limit}] for this box, got {w}"),
            ));
        }
        Ok(())
    }
}

/// One-axis absorber profile: 1 inside, `cos^p` across the outer band.
///
/// Depends on `|coordinate|` only, so it is even under reflection. The band
/// runs from `half - width` out to half a cell beyond the outermost node,
/// which keeps the mask strictly positive.
fn axis_mask(coords: &[f64], spacing: f64, width: f64, exponent: f64) -> Vec<f64> {
    let half = coords.len() as f64 * spacing / 2.0;
    let inner = half - width;
    let outer = half + spacing / 2.0;
    coords
        .iter()
        .map(|&c| {
            let r = c.abs();
            if width <= 0.0 || r <= inner {
                1.0
            } else {
                let phase = 0.5 * PI * (r - inner) / (outer - inner);
                phase.cos().powf(exponent)
            }
        })
        .collect()
}

/// Boundary mask `m(x, y) = m_x(x) m_y(y)`.
#[derive(Debug, Clone)]
pub struct Absorber {
    mx: Vec<f64>,
    my: Vec<f64>,
    enabled: bool,
}

impl Absorber {
    pub fn new(grid: &Grid2D, cfg: &PropagatorConfig) -> Self {
        let w = cfg.resolved_absorber_width(grid);
        let mx = axis_mask(&grid.xs(), grid.dx(), w, cfg.absorber_exponent);
        let my = axis_mask(&grid.ys(), grid.dy(), w, cfg.absorber_exponent);
        Absorber { mx, my, enabled: w > 0.0 }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.mx[i] * self.my[j]
    }

    /// Multiply `psi` by the mask. Rows and columns with unit mask are skipped
    /// so the interior is untouched bit for bit.
    pub fn apply(&self, psi: &mut Wavefunction) {
        if !self.enabled {
            return;
        }
        let nx = self.mx.len();
        let edge_cols: Vec<usize> = (0..nx).filter(|&i| self.mx[i] != 1.0).collect();
        let amp = psi.amplitudes_mut();
        for (j, &my) in self.my.iter().enumerate() {
            let row = &mut amp[j * nx..(j + 1) * nx];
            if my != 1.0 {
                for (z, &mx) in row.iter_mut().zip(&self.mx) {
                    *z *= mx * my;
                }
            } else {
                for &i in &edge_cols {
                    row[i] *= self.mx[i];
                }
            }
        }
    }
}

/// Relaxed initial state.
#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub psi0: Wavefunction,
    pub energy: f64,
    pub iterations: usize,
}

/// Per-step callback during [`Propagator::propagate_pulse`].
pub trait StepHook {
    /// Called with the state at `t` after step `step` (step 0 is the initial
    /// state).
    fn on_step(&mut self, step: usize, t: f64, psi: &Wavefunction) -> Result<()>;
}

/// Time-independent part of the potential factor, stored in transposed layout.
enum PotentialFactor {
    Free,
    Table(Vec<C64>),
}

/// Split-operator stepper bound to one grid, potential and configuration.
///
/// A step is evaluated as `Kx/2 | transpose | Ky/2 V Ky/2 | transpose | Kx/2`:
/// the kinetic factor separates into commuting x and y parts, and the y part
/// and the potential act row by row on the transposed buffer, so each row is
/// transformed, multiplied and transformed back while it sits in cache.
pub struct Propagator {
    grid: Arc<Grid2D>,
    cfg: PropagatorConfig,
    fft: Fft2d,
    fx: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
    work: Vec<C64>,
    potential: Vec<f64>,
    potential_t: Vec<f64>,
    factor: PotentialFactor,
    xs: Vec<f64>,
    ys: Vec<f64>,
    absorber: Absorber,
    moments: MomentTables,
}

/// Per-step multipliers. Kinetic factors include the inverse-FFT scaling.
struct StepFactors {
    kx1: Vec<C64>,
    kx2: Vec<C64>,
    ky1: Vec<C64>,
    ky2: Vec<C64>,
    // length gauge dipole phases; empty in the velocity gauge
    px: Vec<C64>,
    py: Vec<C64>,
}

fn kinetic_factors(k: &[f64], shift: f64, h: f64) -> Vec<C64> {
    let s = 1.0 / k.len() as f64;
    k.iter()
        .map(|&k| {
            let p = k + shift;
            C64::from_polar(s, -0.5 * p * p * h)
        })
        .collect()
}

impl Propagator {
    /// `pot = None` propagates a free particle (used by the classical checks).
    pub fn new(grid: Arc<Grid2D>, pot: Option<SoftCorePotential>, cfg: PropagatorConfig) -> Result<Self> {
        cfg.validate(&grid)?;
        let xs = grid.xs();
        let ys = grid.ys();
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut potential = vec![0.0; grid.len()];
        let mut potential_t = vec![0.0; grid.len()];
        if let Some(p) = &pot {
            for (j, &y) in ys.iter().enumerate() {
                for (i, &x) in xs.iter().enumerate() {
                    let v = p.value(x, y);
                    potential[j * nx + i] = v;
                    potential_t[i * ny + j] = v;
                }
            }
        }
        let mut planner = FftPlanner::new();
        let fx = planner.plan_fft_forward(nx);
        let ix = planner.plan_fft_inverse(nx);
        let fy = planner.plan_fft_forward(ny);
        let iy = planner.plan_fft_inverse(ny);
        let scratch_len = [&fx, &ix, &fy, &iy]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let absorber = Absorber::new(&grid, &cfg);
        let moments = MomentTables::new(&grid, pot.as_ref());
        let mut prop = Propagator {
            fft: Fft2d::new(&grid),
            fx,
            ix,
            fy,
            iy,
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
            work: vec![C64::new(0.0, 0.0); grid.len()],
            factor: PotentialFactor::Free,
            grid,
            cfg,
            potential,
            potential_t,
            xs,
            ys,
            absorber,
            moments,
        };
        if pot.is_some() {
            prop.set_real_time_factor();
        }
        Ok(prop)
    }

    fn set_real_time_factor(&mut self) {
        let dt = self.cfg.dt;
        self.factor = PotentialFactor::Table(self.potential_t.iter().map(|&v| C64::from_polar(1.0, -v * dt)).collect());
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.cfg
    }

    pub fn absorber(&self) -> &Absorber {
        &self.absorber
    }

    fn check_grid(&self, psi: &Wavefunction) -> Result<()> {
        if !psi.grid().same_shape(&self.grid) {
            return Err(Error::Usage("wavefunction grid does not match the propagator".into()));
        }
        Ok(())
    }

    fn real_time_factors(&self, pulse: Option<&LaserPulse>, t0: f64, t1: f64) -> StepFactors {
        let tm = 0.5 * (t0 + t1);
        let (a1, a2) = match (self.cfg.gauge, pulse) {
            (Gauge::Velocity, Some(p)) => (p.mean_vector_potential(t0, tm), p.mean_vector_potential(tm, t1)),
            _ => ((0.0, 0.0), (0.0, 0.0)),
        };
        let (px, py) = match (self.cfg.gauge, pulse) {
            (Gauge::Length, Some(p)) => {
                let (fx, fy) = p.field_integral(t0, t1);
                (
                    self.xs.iter().map(|&x| C64::from_polar(1.0, -x * fx)).collect(),
                    self.ys.iter().map(|&y| C64::from_polar(1.0, -y * fy)).collect(),
                )
            }
            _ => (Vec::new(), Vec::new()),
        };
        let g = &self.grid;
        StepFactors {
            kx1: kinetic_factors(g.kx(), a1.0, tm - t0),
            kx2: kinetic_factors(g.kx(), a2.0, t1 - tm),
            ky1: kinetic_factors(g.ky(), a1.1, tm - t0),
            ky2: kinetic_factors(g.ky(), a2.1, t1 - tm),
            px,
            py,
        }
    }

    /// Transform each row of `data` (length `fft.len()`), multiply, transform back.
    fn row_pass(fwd: &dyn Fft<f64>, inv: &dyn Fft<f64>, scratch: &mut [C64], data: &mut [C64], factor: &[C64]) {
        for row in data.chunks_exact_mut(factor.len()) {
            fwd.process_with_scratch(row, scratch);
            for (z, &f) in row.iter_mut().zip(factor) {
                *z *= f;
            }
            inv.process_with_scratch(row, scratch);
        }
    }

    fn apply_factors(&mut self, psi: &mut Wavefunction, f: &StepFactors) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let buf = psi.buffer_mut();
        Self::row_pass(&*self.fx, &*self.ix, &mut self.scratch, buf, &f.kx1);
        transpose(buf, &mut self.work, ny, nx);
        let table = match &self.factor {
            PotentialFactor::Table(t) => Some(t.as_slice()),
            PotentialFactor::Free => None,
        };
        let length = !f.px.is_empty();
        for (i, row) in self.work.chunks_exact_mut(ny).enumerate() {
            self.fy.process_with_scratch(row, &mut self.scratch);
            for (z, &k) in row.iter_mut().zip(&f.ky1) {
                *z *= k;
            }
            self.iy.process_with_scratch(row, &mut self.scratch);
            if let Some(table) = table {
                for (z, &v) in row.iter_mut().zip(&table[i * ny..(i + 1) * ny]) {
                    *z *= v;
                }
            }
            if length {
                let px = f.px[i];
                for (z, &py) in row.iter_mut().zip(&f.py) {
                    *z *= px * py;
                }
            }
            self.fy.process_with_scratch(row, &mut self.scratch);
            for (z, &k) in row.iter_mut().zip(&f.ky2) {
                *z *= k;
            }
            self.iy.process_with_scratch(row, &mut self.scratch);
        }
        transpose(&self.work, buf, nx, ny);
        Self::row_pass(&*self.fx, &*self.ix, &mut self.scratch, buf, &f.kx2);
    }

    fn step_over(&mut self, psi: &mut Wavefunction, pulse: Option<&LaserPulse>, t0: f64, t1: f64) {
        let f = self.real_time_factors(pulse, t0, t1);
        self.apply_factors(psi, &f);
    }

    /// One step `[t, t + dt]` of `exp(-iT dt/2) exp(-iV dt) exp(-iT dt/2)`.
    pub fn split_step(&mut self, psi: &mut Wavefunction, t: f64, pulse: Option<&LaserPulse>) -> Result<()> {
        self.check_grid(psi)?;
        let dt = self.cfg.dt;
        self.step_over(psi, pulse, t, t + dt);
        if !psi.norm_sqr_unchecked().is_finite() {
            return Err(Error::Blowup { step: 0, time: t + dt });
        }
        Ok(())
    }

    pub fn apply_absorber(&self, psi: &mut Wavefunction) {
        self.absorber.apply(psi);
    }

    /// Observables of `psi` at time `t`.
    pub fn sample(&self, psi: &Wavefunction, t: f64, pulse: Option<&LaserPulse>) -> Result<Sample> {
        let m = self.moments.measure(psi)?;
        let field = pulse.map_or((0.0, 0.0), |p| p.field(t));
        Ok(Sample {
            t,
            norm2: m.norm2,
            dipole: (m.mean_x, m.mean_y),
            acceleration: (-m.mean_grad.0 - field.0, -m.mean_grad.1 - field.1),
            field,
        })
    }

    /// Step count and step length covering `duration` with steps no longer
    /// than the configured `dt`.
    pub fn steps_for(&self, duration: f64) -> (usize, f64) {
        if duration <= 0.0 {
            return (0, self.cfg.dt);
        }
        let n = (duration / self.cfg.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (n, duration / n as f64)
    }

    /// Propagate `n_steps` of length `dt` from `t_start`, applying the absorber
    /// after every step and recording observables (including the initial row).
    pub fn evolve(
        &mut self,
        psi: &mut Wavefunction,
        pulse: Option<&LaserPulse>,
        t_start: f64,
        n_steps: usize,
        dt: f64,
        hooks: &mut [&mut dyn StepHook],
    ) -> Result<ObservableSeries> {
        self.check_grid(psi)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config("dt", format!("must be positive, got {dt}")));
        }
        if dt != self.cfg.dt {
            self.cfg.dt = dt;
            if matches!(self.factor, PotentialFactor::Table(_)) {
                self.set_real_time_factor();
            }
        }
        let mut series = ObservableSeries::with_capacity(n_steps + 1);
        series.push(self.sample(psi, t_start, pulse)?);
        for h in hooks.iter_mut() {
            h.on_step(0, t_start, psi)?;
        }
        for step in 1..=n_steps {
            let t0 = t_start + (step - 1) as f64 * dt;
            let t1 = t_start + step as f64 * dt;
            self.step_over(psi, pulse, t0, t1);
            self.absorber.apply(psi);
            let s = self.sample(psi, t1, pulse).map_err(|e| match e {
                Error::Blowup { .. } => Error::Blowup { step, time: t1 },
                other => other,
            })?;
            series.push(s);
            for h in hooks.iter_mut() {
                h.on_step(step, t1, psi)?;
            }
        }
        Ok(series)
    }

    /// Propagate through the whole pulse plus the configured field-free tail.
    ///
    /// The step is shrunk (if needed) so that an integer number of steps spans
    /// the pulse exactly; the tail uses the same step.
    pub fn propagate_pulse(
        &mut self,
        mut psi: Wavefunction,
        pulse: &LaserPulse,
        hooks: &mut [&mut dyn StepHook],
    ) -> Result<(Wavefunction, ObservableSeries)> {
        let (n_pulse, dt) = self.steps_for(pulse.duration());
        let n_tail = if self.cfg.tail > 0.0 {
            (self.cfg.tail / dt - 1e-9).ceil() as usize
        } else {
            0
        };
        let series = self.evolve(&mut psi, Some(pulse), 0.0, n_pulse + n_tail, dt, hooks)?;
        Ok((psi, series))
    }

    /// `<H>` of the field-free Hamiltonian, normalized by `<psi|psi>`.
    pub fn energy_expectation(&mut self, psi: &Wavefunction) -> Result<f64> {
        self.check_grid(psi)?;
        let (kin, pot) = self.energy_parts(psi)?;
        Ok(kin + pot)
    }

    /// `(<T>, <V>)` for the normalized state.
    pub fn energy_parts(&mut self, psi: &Wavefunction) -> Result<(f64, f64)> {
        let n2 = psi.norm_sqr()?;
        if n2 == 0.0 {
            return Err(Error::Usage("energy of a zero-norm state".into()));
        }
        let mut buf = psi.amplitudes().to_vec();
        self.fft.forward_transposed(&mut buf);
        let ny = self.grid.ny();
        let mut t_sum = 0.0;
        for (i, chunk) in buf.chunks_exact(ny).enumerate() {
            let kx2 = self.grid.kx()[i].powi(2);
            for (z, &ky) in chunk.iter().zip(self.grid.ky()) {
                t_sum += z.norm_sqr() * 0.5 * (kx2 + ky * ky);
            }
        }
        // unnormalized forward FFT: sum |F|^2 = N sum |psi|^2
        let kinetic = t_sum * self.grid.cell_area() / self.grid.len() as f64 / n2;
        let v_sum: f64 = psi
            .amplitudes()
            .iter()
            .zip(&self.potential)
            .map(|(z, v)| z.norm_sqr() * v)
            .sum();
        let potential = v_sum * self.grid.cell_area() / n2;
        Ok((kinetic, potential))
    }

    /// Imaginary-time relaxation from `seed`. Each step applies
    /// `exp(-T tau/2) exp(-V tau) exp(-T tau/2)` and renormalizes; every
    /// `imaginary_check_interval` steps the energy is compared with the previous
    /// check.
    pub fn relax(&mut self, seed: Wavefunction) -> Result<GroundStateResult> {
        self.check_grid(&seed)?;
        let tau = self.cfg.imaginary_dt;
        let decay = |k: &[f64]| -> Vec<C64> {
            let s = 1.0 / k.len() as f64;
            k.iter().map(|k| C64::new(s * (-0.25 * k * k * tau).exp(), 0.0)).collect()
        };
        let (kx, ky) = (decay(self.grid.kx()), decay(self.grid.ky()));
        let factors = StepFactors {
            kx1: kx.clone(),
            kx2: kx,
            ky1: ky.clone(),
            ky2: ky,
            px: Vec::new(),
            py: Vec::new(),
        };
        let real_time = std::mem::replace(
            &mut self.factor,
            PotentialFactor::Table(self.potential_t.iter().map(|v| C64::new((-v * tau).exp(), 0.0)).collect()),
        );
        let result = self.relax_with(seed, &factors, tau);
        self.factor = real_time;
        result
    }

    fn relax_with(&mut self, seed: Wavefunction, factors: &StepFactors, tau: f64) -> Result<GroundStateResult> {
        let mut psi = seed;
        psi.normalize()?;
        let mut energy = self.energy_expectation(&psi)?;
        let mut last_change = f64::INFINITY;
        let mut iterations = 0;
        while iterations < self.cfg.imaginary_max_iterations {
            for _ in 0..self.cfg.imaginary_check_interval {
                self.apply_factors(&mut psi, factors);
                psi.normalize().map_err(|e| match e {
                    Error::Blowup { .. } => Error::Blowup {
                        step: iterations,
                        time: iterations as f64 * tau,
                    },
                    other => other,
                })?;
                iterations += 1;
            }
            let e = self.energy_expectation(&psi)?;
            last_change = (e - energy).abs();
            energy = e;
            if last_change < self.cfg.imaginary_time_tol {
                return Ok(GroundStateResult {
                    psi0: psi,
                    energy,
                    iterations,
                });
            }
        }
        Err(Error::NotConverged { iterations, last_change })
    }
}

/// Default relaxation seed: an origin-centered Gaussian.
pub fn default_seed(grid: Arc<Grid2D>) -> Wavefunction {
    Wavefunction::gaussian(grid, (0.0, 0.0), 1.0, (0.0, 0.0))
}

/// Relax the ground state of `pot` on `grid` from the default seed.
pub fn imaginary_time_ground_state(
    pot: &SoftCorePotential,
    grid: Arc<Grid2D>,
    cfg: &PropagatorConfig,
) -> Result<GroundStateResult> {
    let mut prop = Propagator::new(grid.clone(), Some(*pot), cfg.clone())?;
    prop.relax(default_seed(grid))
}

/// `<H>` of the field-free Hamiltonian.
pub fn energy_expectation(psi: &Wavefunction, pot: Option<&SoftCorePotential>) -> Result<f64> {
    let mut prop = Propagator::new(
        psi.grid_arc().clone(),
        pot.copied(),
        PropagatorConfig {
            absorber_width: AbsorberWidth::Bohr(0.0),
            ..PropagatorConfig::default()
        },
    )?;
    prop.energy_expectation(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_absorber() -> PropagatorConfig {
        PropagatorConfig {
            absorber_width: AbsorberWidth::Bohr(0.0),
            ..PropagatorConfig::default()
        }
    }

    fn small_grid() -> Arc<Grid2D> {
        Arc::new(Grid2D::new(64, 64, 0.4, 0.4).unwrap())
    }

    #[test]
    fn plane_wave_phase_is_exact() {
        let g = small_grid();
        let k = g.kx()[5];
        let mut prop = Propagator::new(g.clone(), None, no_absorber()).unwrap();
        let mut psi = Wavefunction::from_fn(g.clone(), |x, _| C64::from_polar(1.0, k * x));
        let start = psi.clone();
        let n = 37;
        for s in 0..n {
            prop.split_step(&mut psi, s as f64 * 0.05, None).unwrap();
        }
        let expected = C64::from_polar(1.0, -0.5 * k * k * 0.05 * n as f64);
        for (a, b) in psi.amplitudes().iter().zip(start.amplitudes()) {
            assert!((a - b * expected).norm() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_energy() {
        let g = small_grid();
        let k = g.kx()[3];
        let psi = Wavefunction::from_fn(g.clone(), |x, _| C64::from_polar(1.0, k * x));
        let e = energy_expectation(&psi, None).unwrap();
        assert!((e - 0.5 * k * k).abs() < 1e-12);
    }

    #[test]
    fn absorber_leaves_interior_alone() {
        let g = small_grid();
        let cfg = PropagatorConfig::default();
        let prop = Propagator::new(g.clone(), None, cfg).unwrap();
        let mut psi = Wavefunction::gaussian(g.clone(), (0.0, 0.0), 0.8, (0.0, 0.0));
        // truncate to the interior so the check is exact
        let w = prop.config().resolved_absorber_width(&g);
        let half = g.min_half_extent();
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                if g.x(i).abs() > half - w || g.y(j).abs() > half - w {
                    psi.amplitudes_mut()[g.index(i, j)] = C64::new(0.0, 0.0);
                }
            }
        }
        let before = psi.clone();
        let mut after = psi.clone();
        prop.apply_absorber(&mut after);
        assert_eq!(before.amplitudes(), after.amplitudes());
    }

    #[test]
    fn absorber_edge_row_and_powers() {
        let g = small_grid();
        let prop = Propagator::new(g.clone(), None, PropagatorConfig::default()).unwrap();
        let last = g.ny() - 1;
        let mut psi = Wavefunction::from_fn(g.clone(), |_, y| {
            if y == g.y(last) {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let before = psi.norm_sqr().unwrap();
        prop.apply_absorber(&mut psi);
        let after = psi.norm_sqr().unwrap();
        let ab = prop.absorber();
        let expected: f64 = (0..g.nx()).map(|i| ab.value(i, last).powi(2)).sum::<f64>() * g.cell_area();
        assert!((after - expected).abs() < 1e-14);
        assert!(after < before);
        for i in 0..g.nx() {
            let m = ab.value(i, last);
            assert!(m > 0.0 && m < 1.0);
        }

        let mut rep = Wavefunction::from_fn(g.clone(), |x, y| C64::new(1.0 + 0.01 * x, 0.3 * y));
        let orig = rep.clone();
        for _ in 0..5 {
            prop.apply_absorber(&mut rep);
        }
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let idx = g.index(i, j);
                let expect = orig.amplitudes()[idx] * ab.value(i, j).powi(5);
                assert!((rep.amplitudes()[idx] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn absorber_width_limit() {
        let g = small_grid();
        let cfg = PropagatorConfig {
            absorber_width: AbsorberWidth::Bohr(g.min_half_extent()),
            ..PropagatorConfig::default()
        };
        assert!(matches!(Propagator::new(g, None, cfg), Err(Error::Config { ref field, .. }) if field == "absorber_width"));
    }

    #[test]
    fn unitary_without_absorber() {
        let g = small_grid();
        let pulse = LaserPulse::new(0.05, 0.3, 0.6).unwrap();
        for gauge in [Gauge::Length, Gauge::Velocity] {
            let cfg = PropagatorConfig { gauge, ..no_absorber() };
            let mut prop = Propagator::new(g.clone(), Some(SoftCorePotential::default()), cfg).unwrap();
            let mut psi = Wavefunction::gaussian(g.clone(), (0.5, -0.3), 1.2, (0.1, 0.0));
            let n0 = psi.norm_sqr().unwrap();
            let series = prop.evolve(&mut psi, Some(&pulse), 0.0, 500, 0.05, &mut []).unwrap();
            for n in &series.norm2 {
                assert!((n - n0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn absorber_makes_norm_monotone() {
        let g = small_grid();
        let pulse = LaserPulse::new(0.3, 0.3, 0.0).unwrap();
        let mut prop = Propagator::new(g.clone(), Some(SoftCorePotential::default()), PropagatorConfig::default()).unwrap();
        let psi = Wavefunction::gaussian(g.clone(), (0.0, 0.0), 1.0, (0.0, 0.0));
        let (_, series) = prop.propagate_pulse(psi, &pulse, &mut []).unwrap();
        assert!(series.norm2.windows(2).all(|w| w[1] <= w[0]));
        assert!(*series.norm2.last().unwrap() < 0.999);
    }

    #[test]
    fn pulse_steps_cover_duration() {
        let g = small_grid();
        let prop = Propagator::new(g, None, PropagatorConfig::default()).unwrap();
        let pulse = LaserPulse::new(0.1, 0.0867, 0.0).unwrap();
        let (n, dt) = prop.steps_for(pulse.duration());
        assert!(dt <= 0.05 && dt > 0.0499);
        assert!((n as f64 * dt - pulse.duration()).abs() < 1e-9);
    }

    #[test]
    fn relaxation_converges_and_is_idempotent() {
        let g = Arc::new(Grid2D::new(64, 64, 0.5, 0.5).unwrap());
        let cfg = PropagatorConfig {
            imaginary_time_tol: 1e-11,
            ..no_absorber()
        };
        let pot = SoftCorePotential::default();
        let gs = imaginary_time_ground_state(&pot, g.clone(), &cfg).unwrap();
        assert!((gs.psi0.norm().unwrap() - 1.0).abs() < 1e-12);
        assert!(gs.energy < 0.0);
        let mut prop = Propagator::new(g, Some(pot), cfg.clone()).unwrap();
        let (t, v) = prop.energy_parts(&gs.psi0).unwrap();
        // soft-core virial: 2<T> = <r.grad V> < -<V>, hence 2E < <V> < E
        assert!(t > 0.0, "{t}");
        assert!(2.0 * gs.energy < v && v < gs.energy, "{v} {}", gs.energy);
        let again = prop.relax(gs.psi0.clone()).unwrap();
        assert!((again.energy - gs.energy).abs() < cfg.imaginary_time_tol);
    }

    #[test]
    fn odd_seed_stays_odd() {
        // antisymmetric in x: relaxation cannot leave the odd sector
        let g = Arc::new(Grid2D::new(64, 64, 0.5, 0.5).unwrap());
        let cfg = PropagatorConfig {
            imaginary_time_tol: 1e-9,
            ..no_absorber()
        };
        let mut prop = Propagator::new(g.clone(), Some(SoftCorePotential::default()), cfg).unwrap();
        let seed = Wavefunction::from_fn(g.clone(), |x, y| C64::new(x * (-(x * x + y * y) / 4.0).exp(), 0.0));
        let gs = prop.relax(seed).unwrap();
        let odd_overlap: f64 = (1..g.nx())
            .flat_map(|i| (0..g.ny()).map(move |j| (i, j)))
            .map(|(i, j)| {
                let a = gs.psi0.amplitudes()[g.index(i, j)];
                let b = gs.psi0.amplitudes()[g.index(g.nx() - i, j)];
                (a + b).norm()
            })
            .fold(0.0, f64::max);
        // roundoff seeds the even sector, which then grows; it stays small
        // on this time scale
        assert!(odd_overlap < 1e-3, "{odd_overlap}");
        // well above the ground state
        assert!(gs.energy > -0.4, "{}", gs.energy);
    }
}
