//! On-disk formats: series and spectrum tables, density snapshots and
//! saved wavefunctions. Every writer has a matching reader or decoder.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, Wavefunction, C64};
use crate::observables::{DensitySnapshot, ObservableSeries, Sample, Spectrum};

pub const SERIES_HEADER: &str = "t_au,norm2,dip_x_au,dip_y_au,acc_x_au,acc_y_au,field_x_au,field_y_au";
pub const SPECTRUM_HEADER: &str = "harmonic_order,power,power_x,power_y";
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"TDSE2Dv1";
pub const STATE_MAGIC: &[u8; 8] = b"TDSE2Dwf";
const SNAPSHOT_HEADER_LEN: usize = 8 + 4 + 4 + 5 * 8;
const STATE_HEADER_LEN: usize = 8 + 4 + 4 + 2 * 8;

/// Write `bytes` to `path` via a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp: PathBuf = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Series table with optional `# key = value` metadata lines before the header.
pub fn series_to_csv(series: &ObservableSeries, meta: &[(String, String)]) -> String {
    let mut s = String::with_capacity(series.len() * 200 + 256);
    for (k, v) in meta {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s.push_str(SERIES_HEADER);
    s.push('\n');
    for i in 0..series.len() {
        let cols = [
            series.times[i],
            series.norm2[i],
            series.dip_x[i],
            series.dip_y[i],
            series.acc_x[i],
            series.acc_y[i],
            series.field_x[i],
            series.field_y[i],
        ];
        for (c, v) in cols.iter().enumerate() {
            if c > 0 {
                s.push(',');
            }
            s.push_str(&fmt_f64(*v));
        }
        s.push('\n');
    }
    s
}

/// Parsed series table.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFile {
    pub meta: Vec<(String, String)>,
    pub series: ObservableSeries,
}

impl SeriesFile {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn parse_comment(line: &str) -> Option<(String, String)> {
    let body = line.strip_prefix('#')?.trim();
    let (k, v) = body.split_once('=')?;
    Some((k.trim().to_string(), v.trim().to_string()))
}

/// Read a table written by [`series_to_csv`].
pub fn parse_series_csv(text: &str) -> Result<SeriesFile> {
    let mut meta = Vec::new();
    let mut lines = text.lines().enumerate();
    let err = |line: usize, message: String| Error::Parse { line, message };
    loop {
        match lines.next() {
            None => return Err(err(0, "missing header row".into())),
            Some((i, l)) if l.starts_with('#') => {
                if let Some(kv) = parse_comment(l) {
                    meta.push(kv);
                }
                let _ = i;
            }
            Some((i, l)) => {
                if l.trim() != SERIES_HEADER {
                    return Err(err(i + 1, format!("expected header `{SERIES_HEADER}`")));
                }
                break;
            }
        }
    }
    let mut series = ObservableSeries::default();
    for (i, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let mut v = [0.0f64; 8];
        let mut n = 0;
        for field in l.split(',') {
            if n == 8 {
                return Err(err(i + 1, "more than 8 columns".into()));
            }
            v[n] = field
                .trim()
                .parse()
                .map_err(|_| err(i + 1, format!("column {} is not a number", n + 1)))?;
            n += 1;
        }
        if n != 8 {
            return Err(err(i + 1, format!("expected 8 columns, found {n}")));
        }
        series.push(Sample {
            t: v[0],
            norm2: v[1],
            dipole: (v[2], v[3]),
            acceleration: (v[4], v[5]),
            field: (v[6], v[7]),
        });
    }
    Ok(SeriesFile { meta, series })
}

/// Spectrum table; the header comments record window, source and rescaling.
pub fn spectrum_to_csv(spec: &Spectrum, rescaled: bool) -> String {
    let mut s = String::with_capacity(spec.power.len() * 100 + 256);
    let _ = writeln!(s, "# window = {}", spec.window);
    let _ = writeln!(s, "# source = {}", spec.source);
    let _ = writeln!(s, "# omega_au = {:?}", spec.omega);
    let _ = writeln!(s, "# power = |DFT(window * signal)|^2, one-sided, total = x + y");
    let _ = writeln!(s, "# rescaled_to_fundamental = {rescaled}");
    let _ = writeln!(s, "# scale = {}", fmt_f64(spec.scale));
    s.push_str(SPECTRUM_HEADER);
    s.push('\n');
    for i in 0..spec.power.len() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_f64(spec.harmonic_order[i]),
            fmt_f64(spec.power[i]),
            fmt_f64(spec.power_x[i]),
            fmt_f64(spec.power_y[i])
        );
    }
    s
}

pub fn encode_snapshot(snap: &DensitySnapshot) -> Vec<u8> {
    let mut out = Vec::with_capacity(SNAPSHOT_HEADER_LEN + snap.density.len() * 8);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&snap.nx.to_le_bytes());
    out.extend_from_slice(&snap.ny.to_le_bytes());
    for v in [snap.dx, snap.dy, snap.x0, snap.y0, snap.t] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &snap.density {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u32(&mut self) -> u32 {
        let v = u32::from_le_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        v
    }
    fn f64(&mut self) -> f64 {
        let v = f64::from_le_bytes(self.bytes[self.pos..self.pos + 8].try_into().unwrap());
        self.pos += 8;
        v
    }
}

fn format_err(kind: &'static str, message: impl Into<String>) -> Error {
    Error::Format {
        kind,
        message: message.into(),
    }
}

/// Payload size check done before any allocation.
fn check_len(kind: &'static str, bytes: &[u8], header: usize, nx: u32, ny: u32, per_point: usize) -> Result<usize> {
    if nx == 0 || ny == 0 {
        return Err(format_err(kind, "grid dimensions must be non-zero"));
    }
    let points = (nx as usize)
        .checked_mul(ny as usize)
        .ok_or_else(|| format_err(kind, "grid dimensions overflow"))?;
    let expected = points
        .checked_mul(per_point)
        .and_then(|p| p.checked_add(header))
        .ok_or_else(|| format_err(kind, "grid dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(format_err(
            kind,
            format!("expected {expected} bytes for a {nx}x{ny} grid, found {}", bytes.len()),
        ));
    }
    Ok(points)
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<DensitySnapshot> {
    const KIND: &str = "snapshot";
    if bytes.len() < SNAPSHOT_HEADER_LEN {
        return Err(format_err(KIND, "file shorter than the header"));
    }
    if &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(format_err(KIND, "bad magic bytes"));
    }
    let mut r = Reader { bytes, pos: 8 };
    let nx = r.u32();
    let ny = r.u32();
    let points = check_len(KIND, bytes, SNAPSHOT_HEADER_LEN, nx, ny, 8)?;
    let (dx, dy, x0, y0, t) = (r.f64(), r.f64(), r.f64(), r.f64(), r.f64());
    let density = (0..points).map(|_| r.f64()).collect();
    Ok(DensitySnapshot {
        nx,
        ny,
        dx,
        dy,
        x0,
        y0,
        t,
        density,
    })
}

/// Saved wavefunction: magic `TDSE2Dwf`, LE `u32 nx, u32 ny, f64 dx, f64 dy`,
/// then `nx*ny` pairs `(re, im)` of f64, x fastest.
pub fn encode_state(psi: &Wavefunction) -> Vec<u8> {
    let g = psi.grid();
    let mut out = Vec::with_capacity(STATE_HEADER_LEN + g.len() * 16);
    out.extend_from_slice(STATE_MAGIC);
    out.extend_from_slice(&(g.nx() as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny() as u32).to_le_bytes());
    out.extend_from_slice(&g.dx().to_le_bytes());
    out.extend_from_slice(&g.dy().to_le_bytes());
    for z in psi.amplitudes() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_state(bytes: &[u8]) -> Result<Wavefunction> {
    const KIND: &str = "state";
    if bytes.len() < STATE_HEADER_LEN {
        return Err(format_err(KIND, "file shorter than the header"));
    }
    if &bytes[..8] != STATE_MAGIC {
        return Err(format_err(KIND, "bad magic bytes"));
    }
    let mut r = Reader { bytes, pos: 8 };
    let nx = r.u32();
    let ny = r.u32();
    check_len(KIND, bytes, STATE_HEADER_LEN, nx, ny, 16)?;
    let (dx, dy) = (r.f64(), r.f64());
    let grid = Grid2D::new(nx as usize, ny as usize, dx, dy)?;
    let amp: Vec<C64> = (0..grid.len()).map(|_| C64::new(r.f64(), r.f64())).collect();
    if amp.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(format_err(KIND, "non-finite amplitude"));
    }
    Wavefunction::from_amplitudes(Arc::new(grid), amp)
}
