use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tdse2d::observables::{hhg_spectrum, SpectrumSource, Window};
use tdse2d::scans::formats::{decode_snapshot, decode_state, parse_series_csv, spectrum_to_csv, write_atomic};
use tdse2d::scans::run::{convergence_check, write_ground_state, relax_ground_state, GROUND_STATE_FILE};
use tdse2d::scans::{parse_config, run_scan, run_single, RunConfig};
use tdse2d::{Error, Result};

/// Split-operator TDSE solver for a 2D atom in elliptically polarized light.
#[derive(Parser)]
#[command(name = "tdse2d", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relax the ground state, propagate one pulse and write all outputs.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Start relaxation from a saved state instead of the default Gaussian.
        #[arg(long)]
        seed_state: Option<PathBuf>,
        /// Repeat with halved grid spacing and time step and report the deltas.
        #[arg(long)]
        convergence_check: bool,
    },
    /// Run the `[scan]` section of a config.
    Scan {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent scan points.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        seed_state: Option<PathBuf>,
    },
    /// Relax the ground state only and save it.
    Relax {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed_state: Option<PathBuf>,
    },
    /// Recompute a spectrum table from a saved series.
    Spectrum {
        series: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Laser frequency in a.u.; read from the series header when absent.
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long, default_value = "acceleration")]
        source: SpectrumSource,
        #[arg(long, default_value = "hann")]
        window: Window,
        /// Keep absolute powers instead of rescaling the fundamental to one.
        #[arg(long)]
        no_rescale: bool,
    },
    /// Print the header and summary statistics of a density snapshot.
    SnapshotInfo { file: PathBuf },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&read_text(path)?)
}

fn out_dir(cli: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    cli.or_else(|| cfg.observables.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_seed(path: Option<PathBuf>) -> Result<Option<tdse2d::grid::Wavefunction>> {
    path.map(|p| decode_state(&read_bytes(&p)?)).transpose()
}

fn execute(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run {
            config,
            out,
            seed_state,
            convergence_check: check,
        } => {
            let cfg = load_config(&config)?;
            let out = out_dir(out, &cfg);
            let run = run_single(&cfg, &out, load_seed(seed_state)?)?;
            println!("ground_state_energy_au = {:?}", run.ground.energy);
            println!("final_norm2 = {:?}", run.point.final_norm2());
            println!("ionization_yield = {:?}", run.point.ionization_yield());
            for f in &run.files {
                println!("wrote {}", f.display());
            }
            if check {
                let report = convergence_check(&cfg, &run, &out)?;
                print!("{}", report.to_text());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Scan {
            config,
            out,
            jobs,
            seed_state,
        } => {
            let cfg = load_config(&config)?;
            let out = out_dir(out, &cfg);
            let report = run_scan(&cfg, &out, jobs, load_seed(seed_state)?)?;
            print!("{}", read_text(&report.table)?);
            println!("wrote {}", report.table.display());
            let failed = report.failures();
            if failed > 0 {
                eprintln!("{failed} of {} scan points failed", report.points.len());
                return Ok(ExitCode::from(4));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Relax { config, out, seed_state } => {
            let cfg = load_config(&config)?;
            let out = out_dir(out, &cfg);
            let ground = relax_ground_state(&cfg, load_seed(seed_state)?)?;
            write_ground_state(&out, &cfg, &ground)?;
            println!("ground_state_energy_au = {:?}", ground.energy);
            println!("iterations = {}", ground.iterations);
            println!("wrote {}", out.join(GROUND_STATE_FILE).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Spectrum {
            series,
            out,
            omega,
            source,
            window,
            no_rescale,
        } => {
            let file = parse_series_csv(&read_text(&series)?)?;
            let omega = match omega {
                Some(w) => w,
                None => file
                    .meta("omega_au")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Usage("series has no `omega_au` header; pass --omega".into()))?,
            };
            let mut spec = hhg_spectrum(&file.series, omega, source, window)?;
            if !no_rescale {
                spec.rescale_to_fundamental();
            }
            let text = spectrum_to_csv(&spec, !no_rescale);
            match out {
                Some(p) => write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SnapshotInfo { file } => {
            let snap = decode_snapshot(&read_bytes(&file)?)?;
            println!("grid = {} x {}", snap.nx, snap.ny);
            println!("spacing_au = {:?} x {:?}", snap.dx, snap.dy);
            println!("origin_au = ({:?}, {:?})", snap.x0, snap.y0);
            println!("t_au = {:?}", snap.t);
            println!("probability = {:?}", snap.probability());
            let max = snap.density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            println!("max_density = {max:?}");
            match snap.anisotropy() {
                Ok(a) => println!("anisotropy_x2_over_y2 = {a:?}"),
                Err(e) => println!("anisotropy_x2_over_y2 = unavailable ({e})"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
