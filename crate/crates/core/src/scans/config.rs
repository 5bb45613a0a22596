//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! [grid]
//! nx = 512
//! dx = 0.4 au
//! [pulse]
//! intensity = 3.51e14 Wcm2
//! wavelength = 526 nm
//! ```
//!
//! Every dimensional quantity carries an explicit unit; dimensionless values
//! carry none. Unknown sections and keys, duplicates and missing required keys
//! are errors that name the line or key. [`RunConfig::to_text`] writes a fully
//! resolved file that parses back to an identical configuration.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::observables::{SpectrumSource, Window};
use crate::physics::{
    intensity_to_field, wavelength_nm_to_omega, Intensity, IntensityConvention, LaserPulse, SoftCorePotential,
    DEFAULT_OMEGA, DEFAULT_SOFTENING,
};
use crate::propagator::{AbsorberWidth, Gauge, PropagatorConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            nx: 512,
            ny: 512,
            dx: 0.4,
            dy: 0.4,
        }
    }
}

impl GridParams {
    pub fn build(&self) -> Result<Grid2D> {
        Grid2D::new(self.nx, self.ny, self.dx, self.dy)
    }
}

/// How the carrier frequency was specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frequency {
    Omega(f64),
    WavelengthNm(f64),
}

impl Frequency {
    pub fn omega(&self) -> Result<f64> {
        match *self {
            Frequency::Omega(w) if w.is_finite() && w > 0.0 => Ok(w),
            Frequency::Omega(w) => Err(Error::config("omega", format!("must be positive, got {w}"))),
            Frequency::WavelengthNm(l) => wavelength_nm_to_omega(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseParams {
    /// Absent only when the scan varies intensity.
    pub intensity: Option<Intensity>,
    pub frequency: Frequency,
    pub ellipticity: f64,
    pub ramp_cycles: u32,
    pub plateau_cycles: u32,
    pub convention: IntensityConvention,
}

impl Default for PulseParams {
    fn default() -> Self {
        PulseParams {
            intensity: None,
            frequency: Frequency::Omega(DEFAULT_OMEGA),
            ellipticity: 0.0,
            ramp_cycles: 2,
            plateau_cycles: 2,
            convention: IntensityConvention::FixedEx,
        }
    }
}

impl PulseParams {
    /// Build the pulse, overriding intensity and/or ellipticity.
    pub fn build(&self, intensity: Option<Intensity>, ellipticity: Option<f64>) -> Result<LaserPulse> {
        let intensity = intensity
            .or(self.intensity)
            .ok_or_else(|| Error::config("intensity", "missing required key"))?;
        LaserPulse::with_shape(
            intensity_to_field(intensity)?,
            self.frequency.omega()?,
            ellipticity.unwrap_or(self.ellipticity),
            self.ramp_cycles,
            self.plateau_cycles,
            self.convention,
        )
    }
}

/// A time given either in atomic units or in optical cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeSpec {
    Au(f64),
    Cycles(f64),
}

impl TimeSpec {
    pub fn resolve(&self, omega: f64) -> f64 {
        match *self {
            TimeSpec::Au(t) => t,
            TimeSpec::Cycles(c) => c * 2.0 * std::f64::consts::PI / omega,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableParams {
    pub source: SpectrumSource,
    pub window: Window,
    pub rescale_spectrum: bool,
    pub snapshots: Vec<TimeSpec>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ObservableParams {
    fn default() -> Self {
        ObservableParams {
            source: SpectrumSource::Acceleration,
            window: Window::Hann,
            rescale_spectrum: true,
            snapshots: Vec::new(),
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanVariable {
    Ellipticity,
    Intensity,
}

impl ScanVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanVariable::Ellipticity => "ellipticity",
            ScanVariable::Intensity => "intensity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub variable: ScanVariable,
    /// Ellipticities, or intensities in atomic units.
    pub values: Vec<f64>,
    /// Ellipticity of each series in an intensity scan.
    pub series_ellipticities: Vec<f64>,
    /// Add the yield column normalized to the first point.
    pub rescale: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridParams,
    pub pulse: PulseParams,
    pub softening: f64,
    pub propagator: PropagatorConfig,
    pub observables: ObservableParams,
    pub scan: Option<ScanSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: GridParams::default(),
            pulse: PulseParams::default(),
            softening: DEFAULT_SOFTENING,
            propagator: PropagatorConfig::default(),
            observables: ObservableParams::default(),
            scan: None,
        }
    }
}

impl RunConfig {
    pub fn potential(&self) -> Result<SoftCorePotential> {
        SoftCorePotential::new(self.softening)
    }

    /// Cross-field checks not tied to a single line.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.propagator.validate(&grid)?;
        self.potential()?;
        let omega = self.pulse.frequency.omega()?;
        if !(0.0..=1.0).contains(&self.pulse.ellipticity) {
            return Err(Error::config("ellipticity", format!("must lie in [0, 1], got {}", self.pulse.ellipticity)));
        }
        if self.pulse.ramp_cycles == 0 {
            return Err(Error::config("ramp_cycles", "must be at least 1"));
        }
        let intensity_scan = matches!(&self.scan, Some(s) if s.variable == ScanVariable::Intensity);
        match self.pulse.intensity {
            None if !intensity_scan => return Err(Error::config("intensity", "missing required key")),
            Some(i) => {
                intensity_to_field(i)?;
            }
            None => {}
        }
        if let Some(scan) = &self.scan {
            if scan.values.is_empty() {
                return Err(Error::config("values", "scan needs at least one value"));
            }
            match scan.variable {
                ScanVariable::Ellipticity => {
                    if let Some(v) = scan.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                        return Err(Error::config("values", format!("ellipticity {v} outside [0, 1]")));
                    }
                }
                ScanVariable::Intensity => {
                    if let Some(v) = scan.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                        return Err(Error::config("values", format!("intensity {v} must be positive")));
                    }
                    if scan.series_ellipticities.is_empty() {
                        return Err(Error::config("series", "intensity scan needs at least one ellipticity"));
                    }
                    if let Some(v) = scan.series_ellipticities.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                        return Err(Error::config("series", format!("ellipticity {v} outside [0, 1]")));
                    }
                }
            }
        }
        let pulse_len = (2 * self.pulse.ramp_cycles + self.pulse.plateau_cycles) as f64 * 2.0 * std::f64::consts::PI / omega;
        let end = pulse_len + self.propagator.tail;
        for s in &self.observables.snapshots {
            let t = s.resolve(omega);
            if !(0.0..=end).contains(&t) {
                return Err(Error::config("snapshots", format!("time {t} a.u. outside the run [0, {end}]")));
            }
        }
        Ok(())
    }

    /// Fully resolved configuration text; parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let _ = writeln!(s, "[grid]");
        let _ = writeln!(s, "nx = {}", g.nx);
        let _ = writeln!(s, "ny = {}", g.ny);
        let _ = writeln!(s, "dx = {:?} au", g.dx);
        let _ = writeln!(s, "dy = {:?} au", g.dy);

        let p = &self.pulse;
        let _ = writeln!(s, "\n[pulse]");
        match p.intensity {
            Some(Intensity::AtomicUnits(i)) => {
                let _ = writeln!(s, "intensity = {i:?} au");
            }
            Some(Intensity::WattsPerCm2(i)) => {
                let _ = writeln!(s, "intensity = {i:?} Wcm2");
            }
            None => {}
        }
        match p.frequency {
            Frequency::Omega(w) => {
                let _ = writeln!(s, "omega = {w:?} au");
            }
            Frequency::WavelengthNm(l) => {
                let _ = writeln!(s, "wavelength = {l:?} nm");
            }
        }
        let _ = writeln!(s, "ellipticity = {:?}", p.ellipticity);
        let _ = writeln!(s, "ramp_cycles = {}", p.ramp_cycles);
        let _ = writeln!(s, "plateau_cycles = {}", p.plateau_cycles);
        let _ = writeln!(s, "convention = {}", p.convention);
        let _ = writeln!(s, "softening = {:?} au", self.softening);

        let c = &self.propagator;
        let _ = writeln!(s, "\n[propagator]");
        let _ = writeln!(s, "dt = {:?} au", c.dt);
        let _ = writeln!(s, "gauge = {}", c.gauge);
        match c.absorber_width {
            AbsorberWidth::Auto => {
                let _ = writeln!(s, "absorber_width = auto");
            }
            AbsorberWidth::Bohr(w) => {
                let _ = writeln!(s, "absorber_width = {w:?} au");
            }
        }
        let _ = writeln!(s, "absorber_exponent = {:?}", c.absorber_exponent);
        let _ = writeln!(s, "imaginary_dt = {:?} au", c.imaginary_dt);
        let _ = writeln!(s, "imaginary_tol = {:?} au", c.imaginary_time_tol);
        let _ = writeln!(s, "imaginary_max_iterations = {}", c.imaginary_max_iterations);
        let _ = writeln!(s, "imaginary_check_interval = {}", c.imaginary_check_interval);
        let _ = writeln!(s, "tail = {:?} au", c.tail);

        let o = &self.observables;
        let _ = writeln!(s, "\n[observables]");
        let _ = writeln!(s, "spectrum_source = {}", o.source);
        let _ = writeln!(s, "window = {}", o.window);
        let _ = writeln!(s, "rescale_spectrum = {}", o.rescale_spectrum);
        if !o.snapshots.is_empty() {
            let items: Vec<String> = o
                .snapshots
                .iter()
                .map(|t| match t {
                    TimeSpec::Au(v) => format!("{v:?} au"),
                    TimeSpec::Cycles(v) => format!("{v:?} cycles"),
                })
                .collect();
            let _ = writeln!(s, "snapshots = {}", items.join(", "));
        }
        if let Some(dir) = &o.output_dir {
            let _ = writeln!(s, "output_dir = {}", dir.display());
        }

        if let Some(scan) = &self.scan {
            let _ = writeln!(s, "\n[scan]");
            let _ = writeln!(s, "variable = {}", scan.variable.as_str());
            let vals: Vec<String> = scan.values.iter().map(|v| format!("{v:?}")).collect();
            match scan.variable {
                ScanVariable::Ellipticity => {
                    let _ = writeln!(s, "values = {}", vals.join(", "));
                }
                ScanVariable::Intensity => {
                    let _ = writeln!(s, "values = {} au", vals.join(", "));
                }
            }
            if !scan.series_ellipticities.is_empty() {
                let vals: Vec<String> = scan.series_ellipticities.iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(s, "series = {}", vals.join(", "));
            }
            let _ = writeln!(s, "rescale = {}", scan.rescale);
        }
        s
    }
}

/// `value [unit]` split on the first run of whitespace after the number(s).
struct Value<'a> {
    text: &'a str,
    unit: Option<&'a str>,
}

const UNITS: &[&str] = &["au", "Wcm2", "nm", "cycles"];

fn split_value(raw: &str) -> Value<'_> {
    let raw = raw.trim();
    if let Some(pos) = raw.rfind(char::is_whitespace) {
        let (head, tail) = raw.split_at(pos);
        let tail = tail.trim();
        if UNITS.contains(&tail) {
            return Value {
                text: head.trim(),
                unit: Some(tail),
            };
        }
    }
    Value { text: raw, unit: None }
}

struct LineCtx<'a> {
    line: usize,
    key: &'a str,
}

impl LineCtx<'_> {
    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Parse {
            line: self.line,
            message: format!("`{}`: {msg}", self.key),
        }
    }

    fn no_unit(&self, v: &Value) -> Result<()> {
        match v.unit {
            Some(u) => Err(self.err(format!("is dimensionless, unexpected unit `{u}`"))),
            None => Ok(()),
        }
    }

    fn unit<'v>(&self, v: &Value<'v>, allowed: &[&str]) -> Result<&'v str> {
        match v.unit {
            Some(u) if allowed.contains(&u) => Ok(u),
            Some(u) => Err(self.err(format!("unit `{u}` not allowed here (expected {})", allowed.join(" | ")))),
            None => Err(self.err(format!("missing unit (expected {})", allowed.join(" | ")))),
        }
    }

    fn float(&self, s: &str) -> Result<f64> {
        let v: f64 = s.trim().parse().map_err(|_| self.err(format!("`{s}` is not a number")))?;
        if !v.is_finite() {
            return Err(self.err("must be finite"));
        }
        Ok(v)
    }

    fn float_list(&self, s: &str) -> Result<Vec<f64>> {
        s.split(',').map(|p| self.float(p)).collect()
    }

    fn count<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.trim()
            .parse()
            .map_err(|_| self.err(format!("`{s}` is not a non-negative integer")))
    }

    fn boolean(&self, s: &str) -> Result<bool> {
        match s {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.err(format!("`{s}` is not true | false"))),
        }
    }

    fn positive(&self, v: f64) -> Result<f64> {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(format!("must be positive, got {v}")))
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Section {
    Grid,
    Pulse,
    Propagator,
    Observables,
    Scan,
}

/// Parse a configuration file. Defaults are filled in for every key not given.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section: Option<Section> = None;
    let mut seen: HashSet<(Section, String)> = HashSet::new();
    let mut seen_sections: HashSet<Section> = HashSet::new();
    let mut frequency_set = false;
    let mut scan_variable: Option<ScanVariable> = None;
    let mut scan_values: Option<(Vec<f64>, Option<String>, usize)> = None;
    let mut scan_logspace: Option<(Vec<f64>, usize)> = None;
    let mut scan_series: Vec<f64> = Vec::new();
    let mut scan_rescale = true;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(p) => &raw_line[..p],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or(Error::Parse {
                line: line_no,
                message: format!("malformed section header `{line}`"),
            })?;
            let s = match name.trim() {
                "grid" => Section::Grid,
                "pulse" => Section::Pulse,
                "propagator" => Section::Propagator,
                "observables" => Section::Observables,
                "scan" => Section::Scan,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("unknown section `[{other}]`"),
                    })
                }
            };
            if !seen_sections.insert(s) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("section `[{}]` appears twice", name.trim()),
                });
            }
            section = Some(s);
            continue;
        }
        let (key, raw_value) = line.split_once('=').ok_or(Error::Parse {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let ctx = LineCtx { line: line_no, key };
        let sec = section.ok_or_else(|| ctx.err("key outside of any section"))?;
        if !seen.insert((sec, key.to_string())) {
            return Err(ctx.err("duplicate key"));
        }
        let v = split_value(raw_value);
        if v.text.is_empty() {
            return Err(ctx.err("missing value"));
        }

        match (sec, key) {
            (Section::Grid, "nx" | "ny") => {
                ctx.no_unit(&v)?;
                let n: usize = ctx.count(v.text)?;
                if key == "nx" {
                    cfg.grid.nx = n;
                } else {
                    cfg.grid.ny = n;
                }
            }
            (Section::Grid, "dx" | "dy") => {
                ctx.unit(&v, &["au"])?;
                let d = ctx.positive(ctx.float(v.text)?)?;
                if key == "dx" {
                    cfg.grid.dx = d;
                } else {
                    cfg.grid.dy = d;
                }
            }
            (Section::Pulse, "intensity") => {
                let unit = ctx.unit(&v, &["au", "Wcm2"])?;
                let i = ctx.float(v.text)?;
                if i < 0.0 {
                    return Err(ctx.err(format!("must be non-negative, got {i}")));
                }
                cfg.pulse.intensity = Some(if unit == "au" {
                    Intensity::AtomicUnits(i)
                } else {
                    Intensity::WattsPerCm2(i)
                });
            }
            (Section::Pulse, "wavelength" | "omega") => {
                if frequency_set {
                    return Err(ctx.err("give either wavelength or omega, not both"));
                }
                frequency_set = true;
                if key == "wavelength" {
                    ctx.unit(&v, &["nm"])?;
                    cfg.pulse.frequency = Frequency::WavelengthNm(ctx.positive(ctx.float(v.text)?)?);
                } else {
                    ctx.unit(&v, &["au"])?;
                    cfg.pulse.frequency = Frequency::Omega(ctx.positive(ctx.float(v.text)?)?);
                }
            }
            (Section::Pulse, "ellipticity") => {
                ctx.no_unit(&v)?;
                let e = ctx.float(v.text)?;
                if !(0.0..=1.0).contains(&e) {
                    return Err(ctx.err(format!("must lie in [0, 1], got {e}")));
                }
                cfg.pulse.ellipticity = e;
            }
            (Section::Pulse, "ramp_cycles") => {
                ctx.no_unit(&v)?;
                cfg.pulse.ramp_cycles = ctx.count(v.text)?;
            }
            (Section::Pulse, "plateau_cycles") => {
                ctx.no_unit(&v)?;
                cfg.pulse.plateau_cycles = ctx.count(v.text)?;
            }
            (Section::Pulse, "convention") => {
                ctx.no_unit(&v)?;
                cfg.pulse.convention = v.text.parse().map_err(|e: String| ctx.err(e))?;
            }
            (Section::Pulse, "softening") => {
                ctx.unit(&v, &["au"])?;
                cfg.softening = ctx.positive(ctx.float(v.text)?)?;
            }
            (Section::Propagator, "dt") => {
                ctx.unit(&v, &["au"])?;
                cfg.propagator.dt = ctx.positive(ctx.float(v.text)?)?;
            }
            (Section::Propagator, "gauge") => {
                ctx.no_unit(&v)?;
                cfg.propagator.gauge = v.text.parse::<Gauge>().map_err(|e| ctx.err(e))?;
            }
            (Section::Propagator, "absorber_width") => {
                if v.text == "auto" && v.unit.is_none() {
                    cfg.propagator.absorber_width = AbsorberWidth::Auto;
                } else {
                    ctx.unit(&v, &["au"])?;
                    let w = ctx.float(v.text)?;
                    if w < 0.0 {
                        return Err(ctx.err(format!("must be non-negative, got {w}")));
                    }
                    cfg.propagator.absorber_width = AbsorberWidth::Bohr(w);
                }
            }
            (Section::Propagator, "absorber_exponent") => {
                ctx.no_unit(&v)?;
                cfg.propagator.absorber_exponent = ctx.positive(ctx.float(v.text)?)?;
            }
            (Section::Propagator, "imaginary_dt") => {
                ctx.unit(&v, &["au"])?;
                cfg.propagator.imaginary_dt = ctx.positive(ctx.float(v.text)?)?;
            }
            (Section::Propagator, "imaginary_tol") => {
                ctx.unit(&v, &["au"])?;
                cfg.propagator.imaginary_time_tol = ctx.positive(ctx.float(v.text)?)?;
            }
            (Section::Propagator, "imaginary_max_iterations") => {
                ctx.no_unit(&v)?;
                cfg.propagator.imaginary_max_iterations = ctx.count(v.text)?;
            }
            (Section::Propagator, "imaginary_check_interval") => {
                ctx.no_unit(&v)?;
                let n: usize = ctx.count(v.text)?;
                if n == 0 {
                    return Err(ctx.err("must be at least 1"));
                }
                cfg.propagator.imaginary_check_interval = n;
            }
            (Section::Propagator, "tail") => {
                ctx.unit(&v, &["au"])?;
                let t = ctx.float(v.text)?;
                if t < 0.0 {
                    return Err(ctx.err(format!("must be non-negative, got {t}")));
                }
                cfg.propagator.tail = t;
            }
            (Section::Observables, "spectrum_source") => {
                ctx.no_unit(&v)?;
                cfg.observables.source = v.text.parse().map_err(|e: String| ctx.err(e))?;
            }
            (Section::Observables, "window") => {
                ctx.no_unit(&v)?;
                cfg.observables.window = v.text.parse().map_err(|e: String| ctx.err(e))?;
            }
            (Section::Observables, "rescale_spectrum") => {
                ctx.no_unit(&v)?;
                cfg.observables.rescale_spectrum = ctx.boolean(v.text)?;
            }
            (Section::Observables, "snapshots") => {
                // items may carry their own unit; bare items take the line's unit
                let line_unit = ctx.unit(&v, &["au", "cycles"])?;
                let mut times = Vec::new();
                for item in v.text.split(',') {
                    let iv = split_value(item);
                    let unit = match iv.unit {
                        Some(_) => ctx.unit(&iv, &["au", "cycles"])?,
                        None => line_unit,
                    };
                    let t = ctx.float(iv.text)?;
                    if t < 0.0 {
                        return Err(ctx.err(format!("snapshot time {t} is negative")));
                    }
                    times.push(if unit == "au" { TimeSpec::Au(t) } else { TimeSpec::Cycles(t) });
                }
                cfg.observables.snapshots = times;
            }
            (Section::Observables, "output_dir") => {
                cfg.observables.output_dir = Some(PathBuf::from(raw_value.trim()));
            }
            (Section::Scan, "variable") => {
                ctx.no_unit(&v)?;
                scan_variable = Some(match v.text {
                    "ellipticity" => ScanVariable::Ellipticity,
                    "intensity" => ScanVariable::Intensity,
                    o => return Err(ctx.err(format!("unknown scan variable `{o}` (expected ellipticity | intensity)"))),
                });
            }
            (Section::Scan, "values") => {
                if seen.contains(&(Section::Scan, "logspace".to_string())) {
                    return Err(ctx.err("give either values or logspace, not both"));
                }
                scan_values = Some((ctx.float_list(v.text)?, v.unit.map(str::to_string), line_no));
            }
            (Section::Scan, "logspace") => {
                if seen.contains(&(Section::Scan, "values".to_string())) {
                    return Err(ctx.err("give either values or logspace, not both"));
                }
                let unit = ctx.unit(&v, &["au", "Wcm2"])?;
                let parts: Vec<&str> = v.text.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(ctx.err("expected `start, stop, count unit`"));
                }
                let (a, b) = (ctx.positive(ctx.float(parts[0])?)?, ctx.positive(ctx.float(parts[1])?)?);
                let n: usize = ctx.count(parts[2])?;
                if n < 2 {
                    return Err(ctx.err("count must be at least 2"));
                }
                let scale = if unit == "Wcm2" { Intensity::WattsPerCm2(1.0).atomic_units() } else { 1.0 };
                let (la, lb) = (a.ln(), b.ln());
                let vals = (0..n)
                    .map(|k| (la + (lb - la) * k as f64 / (n - 1) as f64).exp() * scale)
                    .collect();
                scan_logspace = Some((vals, line_no));
            }
            (Section::Scan, "series") => {
                ctx.no_unit(&v)?;
                scan_series = ctx.float_list(v.text)?;
                if let Some(e) = scan_series.iter().find(|e| !(0.0..=1.0).contains(*e)) {
                    return Err(ctx.err(format!("ellipticity {e} outside [0, 1]")));
                }
            }
            (Section::Scan, "rescale") => {
                ctx.no_unit(&v)?;
                scan_rescale = ctx.boolean(v.text)?;
            }
            _ => return Err(ctx.err("unknown key in this section")),
        }
    }

    if seen_sections.contains(&Section::Scan) {
        let variable = scan_variable.ok_or_else(|| Error::config("variable", "scan section needs `variable`"))?;
        let values = match (scan_values, scan_logspace) {
            (Some((vals, unit, line)), None) => {
                let ctx = LineCtx { line, key: "values" };
                match (variable, unit.as_deref()) {
                    (ScanVariable::Ellipticity, None) => vals,
                    (ScanVariable::Ellipticity, Some(u)) => {
                        return Err(ctx.err(format!("ellipticities are dimensionless, unexpected unit `{u}`")))
                    }
                    (ScanVariable::Intensity, Some("au")) => vals,
                    (ScanVariable::Intensity, Some("Wcm2")) => {
                        vals.iter().map(|v| Intensity::WattsPerCm2(*v).atomic_units()).collect()
                    }
                    (ScanVariable::Intensity, _) => return Err(ctx.err("intensities need a unit (au | Wcm2)")),
                }
            }
            (None, Some((vals, line))) => {
                if variable != ScanVariable::Intensity {
                    return Err(Error::Parse {
                        line,
                        message: "`logspace` is only supported for intensity scans".into(),
                    });
                }
                vals
            }
            _ => return Err(Error::config("values", "scan section needs `values` or `logspace`")),
        };
        let series_ellipticities = if variable == ScanVariable::Intensity && scan_series.is_empty() {
            vec![0.0, 1.0]
        } else {
            scan_series
        };
        cfg.scan = Some(ScanSpec {
            variable,
            values,
            series_ellipticities,
            rescale: scan_rescale,
        });
    }

    cfg.validate()?;
    Ok(cfg)
}
