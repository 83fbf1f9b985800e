//! Subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use fieldlab::{
    detect_kinks, discrete_spectrum, fit_effective_mass, global_soliton_center, integrate_effective, measure_width,
    solve_profile, tabulate_family, BandConfig, ExternalPotential, FieldKind, Grid, Model, Nonlinearity,
    SchrodingerOperator1D, SolitonCoupledPotential,
};

use crate::config::{parse_pair, Config as Params};
use crate::dump::{read_dump, read_header};
use crate::error::{CliError, CliResult};
use crate::presets::{execute, run_dir, ExperimentPreset};
use crate::table::Table;

#[derive(Debug, Parser)]
#[command(name = "fieldlab", version, about = "1D nonlinear wave experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a preset experiment.
    Run {
        /// Preset name; may be omitted when --config names one.
        preset: Option<String>,
        /// Flat key=value file, e.g. a previous manifest.cfg.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output base directory (else $FIELDLAB_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
        /// key=value overrides.
        overrides: Vec<String>,
    },
    /// Run a preset once per value of one parameter, in parallel.
    Sweep {
        preset: String,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long, default_value_t = 4)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        overrides: Vec<String>,
    },
    /// Solve a solitary-wave profile and export it.
    Profile {
        #[arg(long, default_value = "row3")]
        model: String,
        #[arg(long, default_value_t = 0.6)]
        omega: f64,
        #[arg(long, default_value_t = 1.0)]
        mass_squared: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discrete spectrum of the kink linearization.
    Spectrum {
        #[arg(long, default_value_t = 40.0)]
        half_width: f64,
        #[arg(long, default_value_t = 0.01)]
        dx: f64,
        #[arg(long, default_value_t = 1.99)]
        below: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Effective particle dynamics in a cosine potential.
    Effective {
        #[arg(long, default_value = "row3")]
        model: String,
        #[arg(long, default_value_t = 0.6)]
        omega: f64,
        #[arg(long, default_value_t = 5.0)]
        q0: f64,
        #[arg(long, default_value_t = 0.0)]
        v0: f64,
        #[arg(long, default_value_t = -0.2, allow_hyphen_values = true)]
        amplitude: f64,
        #[arg(long, default_value_t = 0.31)]
        wavenumber: f64,
        #[arg(long, default_value_t = 1000.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 0.6)]
        vmax: f64,
        #[arg(long, default_value_t = 25)]
        rows: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate kinks or a soliton in a field dump.
    Analyze {
        dump: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
    /// Print a dump header and, unless --header-only, payload statistics.
    Inspect {
        dump: PathBuf,
        #[arg(long)]
        header_only: bool,
    },
}

fn pairs(raw: &[String]) -> CliResult<Vec<(String, String)>> {
    raw.iter().map(|s| parse_pair(s)).collect()
}

fn out_dir(out: Option<PathBuf>) -> Option<PathBuf> {
    out.or_else(|| std::env::var_os(crate::OUT_ENV).map(PathBuf::from))
}

fn nonlinearity(name: &str) -> CliResult<Nonlinearity<f64>> {
    if name == "gl" {
        return Ok(Nonlinearity::GinzburgLandau);
    }
    Nonlinearity::preset(name).ok_or_else(|| CliError::config(format!("unknown model {name:?}")))
}

fn emit(out: &mut dyn Write, p: &Params) -> CliResult<()> {
    write!(out, "{p}")?;
    Ok(())
}

fn write_table(dir: Option<&Path>, name: &str, t: &Table) -> CliResult<()> {
    if let Some(d) = dir {
        std::fs::create_dir_all(d)?;
        t.write(&d.join(name))?;
    }
    Ok(())
}

pub fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Run {
            preset,
            config,
            out: base,
            overrides,
        } => {
            let file = match config {
                Some(path) => Some(Params::parse(&std::fs::read_to_string(path)?)?),
                None => None,
            };
            let p = ExperimentPreset::resolve(preset.as_deref(), file.as_ref(), &pairs(&overrides)?)?;
            let dir = run_dir(base.as_deref(), &p);
            let report = execute(&p, Some(&dir))?;
            writeln!(out, "output={}", dir.display())?;
            emit(out, &report.summary())
        }
        Command::Sweep {
            preset,
            param,
            values,
            jobs,
            out: base,
            overrides,
        } => {
            let base_over = pairs(&overrides)?;
            let mut runs = Vec::new();
            for v in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                let mut o = base_over.clone();
                o.push((param.clone(), v.to_string()));
                let p = ExperimentPreset::resolve(Some(&preset), None, &o)?;
                let dir = run_dir(base.as_deref(), &p).with_file_name(format!("{preset}-{param}={v}"));
                runs.push((v.to_string(), p, dir));
            }
            let results = sweep(&runs, jobs.max(1));
            let mut first_err = None;
            for ((v, _, dir), r) in runs.iter().zip(results) {
                match r {
                    Ok(()) => writeln!(out, "{param}={v} ok {}", dir.display())?,
                    Err(e) => {
                        writeln!(out, "{param}={v} failed: {e}")?;
                        first_err.get_or_insert(e);
                    }
                }
            }
            first_err.map_or(Ok(()), Err)
        }
        Command::Profile {
            model,
            omega,
            mass_squared,
            tol,
            out: dir,
        } => {
            let nl = nonlinearity(&model)?;
            let prof = solve_profile(&nl, mass_squared, omega, tol)?;
            let mut t = Table::new(&[("x", "position"), ("phi", "profile"), ("dphi", "profile derivative")]);
            let h = prof.step();
            let reach = prof.extent();
            let n = (reach / h).floor() as i64;
            for i in -n..=n {
                let x = i as f64 * h;
                t.push(vec![x, prof.value(x), prof.derivative(x)]);
            }
            write_table(out_dir(dir).as_deref(), "profile.csv", &t)?;
            let mut p = Params::new();
            p.set("omega", omega);
            p.set("peak_amplitude", prof.peak_amplitude());
            p.set("half_amplitude_width", prof.half_amplitude_width());
            p.set("decay_rate", prof.decay_rate());
            p.set("residual", prof.residual());
            p.set("norm_squared", prof.norm_squared());
            emit(out, &p)
        }
        Command::Spectrum {
            half_width,
            dx,
            below,
            out: dir,
        } => {
            let g = Grid::with_spacing(-half_width, half_width, dx)?;
            let op = SchrodingerOperator1D::kink_linearization(g);
            let s = discrete_spectrum(&op, below, false)?;
            let mut t = Table::new(&[("index", "eigenvalue index"), ("lambda", "eigenvalue")]);
            for (i, l) in s.eigenvalues.iter().enumerate() {
                t.push(vec![i as f64, *l]);
                writeln!(out, "lambda_{i}={l}")?;
            }
            writeln!(out, "edge_contaminated={}", s.edge_contaminated)?;
            write_table(out_dir(dir).as_deref(), "eigenvalues.csv", &t)
        }
        Command::Effective {
            model,
            omega,
            q0,
            v0,
            amplitude,
            wavenumber,
            t_end,
            dt,
            vmax,
            rows,
            out: dir,
        } => {
            let ext = ExternalPotential::Cosine { amplitude, wavenumber };
            let m = Model::soliton(nonlinearity(&model)?, ext.clone());
            let g = Grid::with_spacing(-100.0, 100.0, 0.05)?;
            let vs: Vec<f64> = (0..rows)
                .map(|i| -vmax + 2.0 * vmax * i as f64 / (rows.max(2) - 1) as f64)
                .collect();
            let fam = tabulate_family(&m, omega, &vs, g)?;
            let gamma = 1.0 / (1.0 - v0 * v0).sqrt();
            let coupled = SolitonCoupledPotential::new(ext, fam.profile().expect("tabulated"), gamma);
            let tr = integrate_effective(&fam, &coupled, q0, fam.momentum_at(v0), dt, t_end)?;
            let mut t = Table::new(&[("t", "time"), ("q", "centre"), ("pi", "momentum"), ("h", "effective energy")]);
            for i in 0..tr.times.len() {
                t.push(vec![tr.times[i], tr.q[i], tr.pi[i], tr.hamiltonian[i]]);
            }
            write_table(out_dir(dir).as_deref(), "effective.csv", &t)?;
            let mut p = Params::new();
            if let Ok(mass) = fit_effective_mass(&fam) {
                p.set("effective_mass", mass.mass);
                p.set("rest_energy", mass.rest_energy);
                p.set("r_squared", mass.r_squared);
            }
            p.set("cosine_factor", coupled.cosine_factor());
            let h = &tr.hamiltonian;
            let drift = h.iter().map(|v| (v - h[0]).abs()).fold(0.0, f64::max);
            p.set("energy_drift", drift);
            p.set("q_min", tr.q.iter().copied().fold(f64::INFINITY, f64::min));
            p.set("q_max", tr.q.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            emit(out, &p)
        }
        Command::Analyze { dump, epsilon } => {
            let s = read_dump(&dump)?;
            let mut p = Params::new();
            p.set("time", s.time());
            match s.kind() {
                FieldKind::Real => {
                    let bands = BandConfig::new(epsilon)?;
                    let kinks = detect_kinks(&s, &bands)?;
                    p.set("kinks", kinks.len());
                    for (i, k) in kinks.iter().enumerate() {
                        p.set(&format!("kink_{i}_position"), k.position);
                        p.set(&format!("kink_{i}_orientation"), k.orientation);
                        if let Ok(w) = measure_width(&s, k.position) {
                            p.set(&format!("kink_{i}_width"), w);
                        }
                    }
                }
                FieldKind::Complex => {
                    let (c, peak) = global_soliton_center(&s);
                    p.set("soliton_center", c);
                    p.set("soliton_peak", peak);
                    if let Ok(w) = measure_width(&s, c) {
                        p.set("soliton_width", w);
                    }
                }
            }
            emit(out, &p)
        }
        Command::Inspect { dump, header_only } => {
            let h = read_header(&dump)?;
            let mut p = Params::new();
            p.set("version", h.version);
            p.set("kind", h.kind.name());
            p.set("periodic", h.periodic);
            p.set("n_points", h.n_points);
            p.set("x_min", h.x_min);
            p.set("x_max", h.x_max);
            p.set("dx", h.dx);
            p.set("time", h.time);
            p.set("payload_bytes", h.payload_len());
            if !header_only {
                let s = read_dump(&dump)?;
                p.set("max_abs_psi", s.psi().moduli().into_iter().fold(0.0, f64::max));
                p.set("max_abs_pi", s.pi().moduli().into_iter().fold(0.0, f64::max));
            }
            emit(out, &p)
        }
    }
}

/// One worker per run, at most `jobs` at a time; result order follows `runs`.
fn sweep(runs: &[(String, ExperimentPreset, PathBuf)], jobs: usize) -> Vec<CliResult<()>> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<CliResult<()>>>> = runs.iter().map(|_| Default::default()).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.min(runs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some((_, p, dir)) = runs.get(i) else { break };
                let r = execute(p, Some(dir)).map(|_| ());
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().unwrap_or(Ok(())))
        .collect()
}

/// Parses arguments, runs, prints errors to stderr and returns the exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>, out: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fieldlab: {e}");
            e.exit_code()
        }
    }
}
