//! Single runs, parameter scans and their output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::grid::Wavefunction;
use crate::observables::{
    density_snapshot, harmonic_visibility, hhg_spectrum, DensitySnapshot, ObservableSeries, Spectrum, VISIBILITY_DB,
};
use crate::physics::{Intensity, LaserPulse, INTENSITY_AU_WCM2};
use crate::propagator::{default_seed, GroundStateResult, Propagator, StepHook};

use super::config::{RunConfig, ScanVariable};
use super::formats::{encode_snapshot, encode_state, fmt_f64, series_to_csv, spectrum_to_csv, write_atomic};

/// Highest harmonic order examined for visibility.
pub const MAX_HARMONIC_CHECKED: u32 = 41;

pub const SERIES_FILE: &str = "series.csv";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const MANIFEST_FILE: &str = "manifest.cfg";
pub const GROUND_STATE_FILE: &str = "ground_state.bin";
pub const ELLIPTICITY_TABLE: &str = "scan_ellipticity.csv";
pub const INTENSITY_TABLE: &str = "scan_intensity.csv";

/// Relax the field-free ground state, starting from `seed` when given.
///
/// A converged seed returns after one convergence check.
pub fn relax_ground_state(cfg: &RunConfig, seed: Option<Wavefunction>) -> Result<GroundStateResult> {
    let grid = Arc::new(cfg.grid.build()?);
    let seed = match seed {
        Some(s) if s.grid().same_shape(&grid) => Wavefunction::from_amplitudes(grid.clone(), s.into_amplitudes())?,
        Some(s) => {
            let g = s.grid();
            return Err(Error::config(
                "seed-state",
                format!(
                    "saved state is on a {}x{} grid with spacing ({}, {}), the config asks for {}x{} with ({}, {})",
                    g.nx(),
                    g.ny(),
                    g.dx(),
                    g.dy(),
                    grid.nx(),
                    grid.ny(),
                    grid.dx(),
                    grid.dy()
                ),
            ));
        }
        None => default_seed(grid.clone()),
    };
    let mut prop = Propagator::new(grid, Some(cfg.potential()?), cfg.propagator.clone())?;
    prop.relax(seed)
}

/// Everything one propagation produced.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub pulse: LaserPulse,
    pub dt: f64,
    pub steps: usize,
    pub series: ObservableSeries,
    /// Rescaled to the fundamental when the config asks for it.
    pub spectrum: Spectrum,
    pub snapshots: Vec<DensitySnapshot>,
}

impl PointResult {
    pub fn final_norm2(&self) -> f64 {
        self.series.final_norm2().unwrap_or(f64::NAN)
    }

    pub fn ionization_yield(&self) -> f64 {
        1.0 - self.final_norm2()
    }
}

struct SnapshotHook {
    /// (step, requested time), sorted by step
    targets: Vec<(usize, f64)>,
    taken: Vec<DensitySnapshot>,
}

impl StepHook for SnapshotHook {
    fn on_step(&mut self, step: usize, t: f64, psi: &Wavefunction) -> Result<()> {
        for &(s, _) in &self.targets {
            if s == step {
                self.taken.push(density_snapshot(psi, t));
            }
        }
        Ok(())
    }
}

/// Propagate the ground state through the pulse described by `cfg`.
pub fn simulate(cfg: &RunConfig, ground: &GroundStateResult) -> Result<PointResult> {
    let grid = ground.psi0.grid_arc().clone();
    let pulse = cfg.pulse.build(None, None)?;
    let mut prop = Propagator::new(grid, Some(cfg.potential()?), cfg.propagator.clone())?;
    let (n_pulse, dt) = prop.steps_for(pulse.duration());
    let n_tail = if cfg.propagator.tail > 0.0 {
        (cfg.propagator.tail / dt - 1e-9).ceil() as usize
    } else {
        0
    };
    let last = n_pulse + n_tail;
    let mut targets: Vec<(usize, f64)> = cfg
        .observables
        .snapshots
        .iter()
        .map(|s| {
            let t = s.resolve(pulse.omega());
            (((t / dt).round() as usize).min(last), t)
        })
        .collect();
    targets.sort_by_key(|t| t.0);
    let mut hook = SnapshotHook {
        targets,
        taken: Vec::new(),
    };
    let (_, series) = prop.propagate_pulse(ground.psi0.clone(), &pulse, &mut [&mut hook])?;
    let mut spectrum = hhg_spectrum(&series, pulse.omega(), cfg.observables.source, cfg.observables.window)?;
    if cfg.observables.rescale_spectrum {
        spectrum.rescale_to_fundamental();
    }
    Ok(PointResult {
        pulse,
        dt,
        steps: last,
        series,
        spectrum,
        snapshots: hook.taken,
    })
}

fn manifest_text(cfg: &RunConfig, ground: &GroundStateResult, point: Option<&PointResult>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# tdse2d run manifest. Every parameter is resolved; this file is a valid config.");
    let grid = ground.psi0.grid();
    let _ = writeln!(s, "# resolved.box_au = {:?} x {:?}", grid.nx() as f64 * grid.dx(), grid.ny() as f64 * grid.dy());
    let _ = writeln!(s, "# resolved.absorber_width_au = {:?}", cfg.propagator.resolved_absorber_width(grid));
    let _ = writeln!(s, "# resolved.potential = -1/sqrt(a^2 + r^2), a = {:?}", cfg.softening);
    let _ = writeln!(s, "# ground_state.energy_au = {:?}", ground.energy);
    let _ = writeln!(s, "# ground_state.iterations = {}", ground.iterations);
    if let Some(p) = point {
        let pulse = &p.pulse;
        let _ = writeln!(s, "# resolved.omega_au = {:?}", pulse.omega());
        let _ = writeln!(s, "# resolved.e0_au = {:?}", pulse.e0());
        let _ = writeln!(s, "# resolved.field_x_amplitude_au = {:?}", pulse.amplitude());
        let _ = writeln!(s, "# resolved.field_y_amplitude_au = {:?}", pulse.amplitude() * pulse.epsilon());
        let _ = writeln!(s, "# resolved.intensity_convention = {}", pulse.convention());
        let _ = writeln!(s, "# resolved.pulse_duration_au = {:?}", pulse.duration());
        let _ = writeln!(s, "# resolved.dt_au = {:?}", p.dt);
        let _ = writeln!(s, "# resolved.steps = {}", p.steps);
        let _ = writeln!(s, "# result.final_norm2 = {:?}", p.final_norm2());
        let _ = writeln!(s, "# result.ionization_yield = {:?}", p.ionization_yield());
    }
    s.push('\n');
    let mut clean = cfg.clone();
    clean.observables.output_dir = None;
    s.push_str(&clean.to_text());
    s
}

fn series_meta(cfg: &RunConfig, p: &PointResult) -> Vec<(String, String)> {
    vec![
        ("omega_au".into(), format!("{:?}", p.pulse.omega())),
        ("e0_au".into(), format!("{:?}", p.pulse.e0())),
        ("ellipticity".into(), format!("{:?}", p.pulse.epsilon())),
        ("intensity_convention".into(), p.pulse.convention().to_string()),
        ("gauge".into(), cfg.propagator.gauge.to_string()),
        ("dt_au".into(), format!("{:?}", p.dt)),
    ]
}

fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{t:09.3}.bin")
}

/// Write series, spectrum, snapshots and manifest for one point into `dir`.
/// Returns the paths written.
pub fn write_point_outputs(
    dir: &Path,
    cfg: &RunConfig,
    ground: &GroundStateResult,
    p: &PointResult,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    put(SERIES_FILE.into(), series_to_csv(&p.series, &series_meta(cfg, p)).as_bytes())?;
    put(
        SPECTRUM_FILE.into(),
        spectrum_to_csv(&p.spectrum, cfg.observables.rescale_spectrum).as_bytes(),
    )?;
    for snap in &p.snapshots {
        put(snapshot_name(snap.t), &encode_snapshot(snap))?;
    }
    put(MANIFEST_FILE.into(), manifest_text(cfg, ground, Some(p)).as_bytes())?;
    Ok(written)
}

/// Write the relaxed state and a manifest describing it.
pub fn write_ground_state(dir: &Path, cfg: &RunConfig, ground: &GroundStateResult) -> Result<Vec<PathBuf>> {
    let state = dir.join(GROUND_STATE_FILE);
    write_atomic(&state, &encode_state(&ground.psi0))?;
    let snap = dir.join(snapshot_name(0.0));
    write_atomic(&snap, &encode_snapshot(&density_snapshot(&ground.psi0, 0.0)))?;
    let manifest = dir.join(MANIFEST_FILE);
    write_atomic(&manifest, manifest_text(cfg, ground, None).as_bytes())?;
    Ok(vec![state, snap, manifest])
}

/// Outcome of [`run_single`].
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub ground: GroundStateResult,
    pub point: PointResult,
    pub files: Vec<PathBuf>,
}

/// Relax (or reuse `seed`), propagate, and write all outputs into `out`.
pub fn run_single(cfg: &RunConfig, out: &Path, seed: Option<Wavefunction>) -> Result<SingleRun> {
    cfg.validate()?;
    let ground = relax_ground_state(cfg, seed)?;
    let point = simulate(cfg, &ground)?;
    let files = write_point_outputs(out, cfg, &ground, &point)?;
    Ok(SingleRun { ground, point, files })
}

/// Run `n` independent jobs on at most `jobs` threads; results keep job order.
pub fn run_pool<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = jobs.clamp(1, n.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every job ran"))
        .collect()
}

/// Harmonic content of one spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicSummary {
    /// Integer orders in `2..=MAX_HARMONIC_CHECKED` clearing the threshold.
    pub visible_count: u32,
    /// Largest odd `n` with every odd order `3..=n` visible; `1` if order 3 is not.
    pub highest_contiguous_odd: u32,
}

pub fn summarize_harmonics(spec: &Spectrum) -> HarmonicSummary {
    let vis = harmonic_visibility(spec, MAX_HARMONIC_CHECKED, VISIBILITY_DB);
    let visible = |n: u32| vis.iter().any(|&(o, v)| o == n && v);
    let mut highest = 1;
    let mut n = 3;
    while n <= MAX_HARMONIC_CHECKED && visible(n) {
        highest = n;
        n += 2;
    }
    HarmonicSummary {
        visible_count: vis.iter().filter(|(o, v)| *o >= 2 && *v).count() as u32,
        highest_contiguous_odd: highest,
    }
}

/// One row of a scan.
#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub ellipticity: f64,
    pub intensity_au: f64,
    pub result: std::result::Result<PointResult, String>,
}

impl ScanPoint {
    pub fn final_norm2(&self) -> f64 {
        self.result.as_ref().map_or(f64::NAN, |r| r.final_norm2())
    }
}

/// Outcome of a scan: points in table order plus the written table.
#[derive(Debug, Clone)]
pub struct ScanReport {
    pub variable: ScanVariable,
    pub ground: GroundStateResult,
    pub points: Vec<ScanPoint>,
    pub table: PathBuf,
}

impl ScanReport {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.result.is_err()).count()
    }

    pub fn point(&self, ellipticity: f64, intensity_au: f64) -> Option<&ScanPoint> {
        self.points
            .iter()
            .find(|p| p.ellipticity == ellipticity && (p.intensity_au - intensity_au).abs() <= 1e-12 * intensity_au)
    }
}

fn eps_label(e: f64) -> String {
    format!("{e:.3}")
}

fn point_config(cfg: &RunConfig, ellipticity: f64, intensity_au: Option<f64>) -> RunConfig {
    let mut c = cfg.clone();
    c.scan = None;
    c.observables.output_dir = None;
    c.pulse.ellipticity = ellipticity;
    if let Some(i) = intensity_au {
        c.pulse.intensity = Some(Intensity::AtomicUnits(i));
    }
    c
}

fn status(r: &std::result::Result<PointResult, String>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("failed: {}", e.replace([',', '\n'], ";")),
    }
}

/// Run every point of `cfg.scan` and write the scan table plus per-point outputs.
///
/// Point failures are recorded in the table and the scan continues.
pub fn run_scan(cfg: &RunConfig, out: &Path, jobs: usize, seed: Option<Wavefunction>) -> Result<ScanReport> {
    cfg.validate()?;
    let scan = cfg
        .scan
        .as_ref()
        .ok_or_else(|| Error::Usage("config has no [scan] section".into()))?;
    let ground = relax_ground_state(cfg, seed)?;
    write_ground_state(out, cfg, &ground)?;

    // (ellipticity, intensity override, subdirectory)
    let jobs_list: Vec<(f64, Option<f64>, String)> = match scan.variable {
        ScanVariable::Ellipticity => scan
            .values
            .iter()
            .map(|&e| (e, None, format!("eps_{}", eps_label(e))))
            .collect(),
        ScanVariable::Intensity => scan
            .values
            .iter()
            .flat_map(|&i| {
                scan.series_ellipticities
                    .iter()
                    .map(move |&e| (e, Some(i), format!("I_{i:.6e}_eps_{}", eps_label(e))))
            })
            .collect(),
    };
    let ground_ref = &ground;
    let points = run_pool(jobs_list.len(), jobs, |k| {
        let (e, i, ref sub) = jobs_list[k];
        let pc = point_config(cfg, e, i);
        let r = simulate(&pc, ground_ref).and_then(|p| {
            write_point_outputs(&out.join(sub), &pc, ground_ref, &p)?;
            Ok(p)
        });
        let intensity_au = match i {
            Some(i) => i,
            None => pc.pulse.intensity.map_or(f64::NAN, |i| i.atomic_units()),
        };
        ScanPoint {
            ellipticity: e,
            intensity_au,
            result: r.map_err(|e| e.to_string()),
        }
    });

    let table_text = match scan.variable {
        ScanVariable::Ellipticity => ellipticity_table(cfg, &points, scan.rescale),
        ScanVariable::Intensity => intensity_table(cfg, &points, &scan.series_ellipticities, scan.values.len()),
    };
    let name = match scan.variable {
        ScanVariable::Ellipticity => ELLIPTICITY_TABLE,
        ScanVariable::Intensity => INTENSITY_TABLE,
    };
    let table = out.join(name);
    write_atomic(&table, table_text.as_bytes())?;
    Ok(ScanReport {
        variable: scan.variable,
        ground,
        points,
        table,
    })
}

fn scan_header(cfg: &RunConfig, s: &mut String) {
    let _ = writeln!(s, "# intensity_convention = {}", cfg.pulse.convention);
    let _ = writeln!(s, "# gauge = {}", cfg.propagator.gauge);
    let _ = writeln!(s, "# spectrum_source = {}", cfg.observables.source);
    let _ = writeln!(s, "# window = {}", cfg.observables.window);
    let _ = writeln!(s, "# norm2 is the survival probability at the end of the run; yield = 1 - norm2");
}

fn ellipticity_table(cfg: &RunConfig, points: &[ScanPoint], rescale: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# variable = ellipticity");
    if let Some(i) = cfg.pulse.intensity {
        let _ = writeln!(s, "# intensity_au = {:?}", i.atomic_units());
    }
    scan_header(cfg, &mut s);
    let reference = points
        .iter()
        .find(|p| p.ellipticity == 0.0)
        .or(points.first())
        .expect("validated scans have points");
    let (n_ref, y_ref) = (reference.final_norm2(), 1.0 - reference.final_norm2());
    if rescale {
        let _ = writeln!(s, "# rescaled columns are divided by the value at epsilon = {:?}", reference.ellipticity);
    }
    let _ = writeln!(
        s,
        "# visibility: peak within 0.25 orders at least {VISIBILITY_DB} dB above the median of the flanks 0.5..1 orders away, orders 2..={MAX_HARMONIC_CHECKED}"
    );
    let summaries: Vec<Option<HarmonicSummary>> = points
        .iter()
        .map(|p| p.result.as_ref().ok().map(|r| summarize_harmonics(&r.spectrum)))
        .collect();
    let vanish = points
        .iter()
        .zip(&summaries)
        .find(|(_, h)| matches!(h, Some(h) if h.visible_count == 0))
        .map_or("none".to_string(), |(p, _)| format!("{:?}", p.ellipticity));
    let _ = writeln!(s, "# harmonics_vanish_at_epsilon = {vanish}");
    s.push_str("epsilon,final_norm2,yield");
    if rescale {
        s.push_str(",rescaled_norm2,rescaled_yield");
    }
    s.push_str(",visible_harmonics,highest_contiguous_odd_order,status\n");
    for (p, h) in points.iter().zip(&summaries) {
        let n2 = p.final_norm2();
        let _ = write!(s, "{},{},{}", fmt_f64(p.ellipticity), fmt_f64(n2), fmt_f64(1.0 - n2));
        if rescale {
            let _ = write!(s, ",{},{}", fmt_f64(n2 / n_ref), fmt_f64((1.0 - n2) / y_ref));
        }
        match h {
            Some(h) => {
                let _ = write!(s, ",{},{}", h.visible_count, h.highest_contiguous_odd);
            }
            None => s.push_str(",,"),
        }
        let _ = writeln!(s, ",{}", status(&p.result));
    }
    s
}

fn intensity_table(cfg: &RunConfig, points: &[ScanPoint], series: &[f64], n_int: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# variable = intensity");
    scan_header(cfg, &mut s);
    s.push_str("intensity_au,intensity_wcm2");
    for e in series {
        let _ = write!(s, ",norm2_eps{0},yield_eps{0}", eps_label(*e));
    }
    s.push_str(",status\n");
    let m = series.len();
    for k in 0..n_int {
        let row = &points[k * m..(k + 1) * m];
        let i = row[0].intensity_au;
        let _ = write!(s, "{},{}", fmt_f64(i), fmt_f64(i * INTENSITY_AU_WCM2));
        for p in row {
            let n2 = p.final_norm2();
            let _ = write!(s, ",{},{}", fmt_f64(n2), fmt_f64(1.0 - n2));
        }
        let st: Vec<String> = row
            .iter()
            .filter(|p| p.result.is_err())
            .map(|p| format!("eps {}: {}", eps_label(p.ellipticity), status(&p.result)))
            .collect();
        let _ = writeln!(s, ",{}", if st.is_empty() { "ok".to_string() } else { st.join("; ") });
    }
    s
}

/// Base run against a refined run (grid spacing and time step halved, same box).
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub base_norm2: f64,
    pub refined_norm2: f64,
    pub base_energy: f64,
    pub refined_energy: f64,
}

impl ConvergenceReport {
    pub fn relative_yield_change(&self) -> f64 {
        let (a, b) = (1.0 - self.base_norm2, 1.0 - self.refined_norm2);
        (b - a).abs() / a.abs()
    }

    pub fn to_text(&self) -> String {
        format!(
            "ground_state_energy_au: base {:?} refined {:?} delta {:e}\n\
             final_norm2: base {:?} refined {:?} delta {:e}\n\
             yield_relative_change: {:e}\n",
            self.base_energy,
            self.refined_energy,
            self.refined_energy - self.base_energy,
            self.base_norm2,
            self.refined_norm2,
            self.refined_norm2 - self.base_norm2,
            self.relative_yield_change()
        )
    }
}

/// Repeat `base` with doubled point counts, halved spacing and halved `dt`.
pub fn convergence_check(cfg: &RunConfig, base: &SingleRun, out: &Path) -> Result<ConvergenceReport> {
    let mut fine = cfg.clone();
    fine.grid.nx *= 2;
    fine.grid.ny *= 2;
    fine.grid.dx /= 2.0;
    fine.grid.dy /= 2.0;
    fine.propagator.dt /= 2.0;
    let run = run_single(&fine, &out.join("refined"), None)?;
    let report = ConvergenceReport {
        base_norm2: base.point.final_norm2(),
        refined_norm2: run.point.final_norm2(),
        base_energy: base.ground.energy,
        refined_energy: run.ground.energy,
    };
    write_atomic(&out.join("convergence.txt"), report.to_text().as_bytes())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scans::config::{GridParams, PulseParams};

    fn tiny() -> RunConfig {
        let mut cfg = RunConfig {
            grid: GridParams {
                nx: 32,
                ny: 32,
                dx: 0.6,
                dy: 0.6,
            },
            pulse: PulseParams {
                intensity: Some(Intensity::AtomicUnits(0.005)),
                ramp_cycles: 1,
                plateau_cycles: 0,
                ..PulseParams::default()
            },
            ..RunConfig::default()
        };
        cfg.propagator.dt = 0.2;
        cfg.propagator.imaginary_time_tol = 1e-8;
        cfg
    }

    #[test]
    fn pool_keeps_job_order() {
        for jobs in [1, 2, 5, 40] {
            let r = run_pool(17, jobs, |i| i * i);
            assert_eq!(r, (0..17).map(|i| i * i).collect::<Vec<_>>());
        }
        assert!(run_pool(0, 3, |i| i).is_empty());
    }

    #[test]
    fn failed_points_get_a_status_row() {
        let cfg = tiny();
        let ground = relax_ground_state(&cfg, None).unwrap();
        let good = simulate(&cfg, &ground).unwrap();
        let points = vec![
            ScanPoint {
                ellipticity: 0.0,
                intensity_au: 0.005,
                result: Ok(good),
            },
            ScanPoint {
                ellipticity: 0.5,
                intensity_au: 0.005,
                result: Err("wavefunction blew up, at step 3".into()),
            },
        ];
        let table = ellipticity_table(&cfg, &points, true);
        let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[1].ends_with(",ok"));
        let bad: Vec<&str> = rows[2].split(',').collect();
        assert_eq!(bad.len(), rows[0].split(',').count());
        assert_eq!(bad[1], "NaN");
        assert_eq!(bad[5], "");
        assert!(bad.last().unwrap().starts_with("failed: wavefunction blew up; at step 3"));
    }
}
