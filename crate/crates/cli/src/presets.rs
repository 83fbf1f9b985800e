//! Named experiments. Each preset is a flat parameter bundle; a run writes
//! its resolved parameters as `manifest.cfg`, which re-runs it exactly.

use std::fs;
use std::path::{Path, PathBuf};

use fieldlab::{
    discrete_spectrum, free_trace, frozen_profile, integrate_effective, kink_with_internal_mode,
    local_l2_distance, measure_oscillation, run, simulate_string, solve_profile, static_kink_width,
    stationary_states, tabulate_family, trace_ode_oracle, track, AdiabaticOptions, BandConfig, Boundary, Config,
    EffectivePotential, ExternalPotential, FieldKind, FitOptions, Grid, KinkSpec, Model, Nonlinearity, SchrodingerOperator1D,
    SolitonCoupledPotential, State, StringOscillatorModel, Traj,
};

use crate::analysis::{self, AdiabaticInputs, AdiabaticSummary, KinkDecayOptions, KinkDecayReport};
use crate::config::Config as Params;
use crate::dump::write_dump;
use crate::error::{CliError, CliResult};
use crate::image::{kink_heatmap, magnitude_heatmap};
use crate::random::{random_initial, InitialKind, RandomSpec};
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Fig4Kinks,
    SolitonDecay,
    Fig7Adiabatic,
    KinkKinematics,
    SpectrumCheck,
    StringAttraction,
}

impl PresetName {
    pub const ALL: [PresetName; 6] = [
        PresetName::Fig4Kinks,
        PresetName::SolitonDecay,
        PresetName::Fig7Adiabatic,
        PresetName::KinkKinematics,
        PresetName::SpectrumCheck,
        PresetName::StringAttraction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Fig4Kinks => "fig4_kinks",
            PresetName::SolitonDecay => "soliton_decay",
            PresetName::Fig7Adiabatic => "fig7_adiabatic",
            PresetName::KinkKinematics => "kink_kinematics",
            PresetName::SpectrumCheck => "spectrum_check",
            PresetName::StringAttraction => "string_attraction",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|p| p.as_str()).collect();
            CliError::config(format!("unknown preset {s:?}; known: {}", names.join(", ")))
        })
    }

    fn defaults(self) -> &'static [(&'static str, &'static str)] {
        match self {
            PresetName::Fig4Kinks => &[
                ("x_min", "-200"),
                ("x_max", "200"),
                ("dx", "0.01"),
                ("dt", "0.001"),
                ("t_end", "150"),
                ("frame_dt", "0.1"),
                ("boundary", "dirichlet"),
                ("initial", "kink"),
                ("support_lo", "-20"),
                ("support_hi", "20"),
                ("amplitude", "0.5"),
                ("smoothness", "1"),
                ("bumps", "10"),
                ("epsilon", "0.05"),
                ("analysis_from", "100"),
                ("analysis_window", "60"),
                ("kink_exclusion", "5"),
            ],
            PresetName::SolitonDecay => &[
                ("model", "row2"),
                ("x_min", "-100"),
                ("x_max", "100"),
                ("dx", "0.05"),
                ("dt", "0.005"),
                ("t_end", "150"),
                ("frame_dt", "1"),
                ("boundary", "sponge"),
                ("sponge_width", "20"),
                ("sponge_strength", "1"),
                ("initial", "complex"),
                ("support_lo", "-20"),
                ("support_hi", "20"),
                ("amplitude", "0.8"),
                ("smoothness", "1.5"),
                ("bumps", "10"),
                ("count_threshold", "0.1"),
                ("count_separation", "4"),
                ("heatmap_scale", "1"),
            ],
            PresetName::Fig7Adiabatic => &[
                ("model", "row3"),
                ("potential_amplitude", "-0.2"),
                ("potential_wavenumber", "0.31"),
                ("omega0", "0.6"),
                ("q0", "5"),
                ("v0", "0"),
                ("x_min", "-100"),
                ("x_max", "100"),
                ("dx", "0.05"),
                ("dt", "0.005"),
                ("t_end", "1000"),
                ("frame_dt", "2"),
                ("boundary", "sponge"),
                ("sponge_width", "20"),
                ("sponge_strength", "1"),
                ("width_lo", "4.4"),
                ("width_hi", "5.6"),
                ("min_peak", "0.05"),
                ("fit_every", "25"),
                ("fit_radius", "15"),
                ("family_vmax", "0.6"),
                ("family_rows", "25"),
                ("effective_dt", "0.01"),
                ("heatmap_scale", "0.8"),
            ],
            PresetName::KinkKinematics => &[
                ("velocity", "0.5"),
                ("position", "-10"),
                ("mode_amplitude", "0.01"),
                ("x_min", "-60"),
                ("x_max", "60"),
                ("dx", "0.02"),
                ("dt", "0.01"),
                ("t_end", "40"),
                ("frame_dt", "0.05"),
                ("boundary", "sponge"),
                ("sponge_width", "8"),
                ("sponge_strength", "5"),
                ("epsilon", "0.05"),
            ],
            PresetName::SpectrumCheck => &[
                ("x_min", "-40"),
                ("x_max", "40"),
                ("dx", "0.01"),
                ("below", "1.99"),
            ],
            PresetName::StringAttraction => &[
                ("oscillator", "gl"),
                ("coupling_x", "0"),
                ("regularization", "node"),
                ("x_min", "-40"),
                ("x_max", "40"),
                ("dx", "0.01"),
                ("dt", "0.005"),
                ("t_end", "40"),
                ("frame_dt", "0.1"),
                ("boundary", "dirichlet"),
                ("initial", "real"),
                ("support_lo", "-10"),
                ("support_hi", "10"),
                ("amplitude", "0.8"),
                ("smoothness", "1"),
                ("bumps", "10"),
                ("radius", "5"),
                ("transient", "20"),
                ("heatmap_scale", "1.2"),
            ],
        }
    }
}

/// Keys every preset understands.
const COMMON: &[(&str, &str)] = &[
    ("seed", "1"),
    ("fidelity", "false"),
    ("dump_dt", "0"),
    ("heatmap_width", "800"),
    ("heatmap_height", "600"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub params: Params,
}

impl ExperimentPreset {
    pub fn defaults(name: PresetName) -> Self {
        let mut params = Params::from_pairs(COMMON.iter().copied());
        for (k, v) in name.defaults() {
            params.set(k, v);
        }
        params.set("preset", name.as_str());
        Self { name, params }
    }

    /// Defaults, then the entries of `file` (a manifest or hand-written
    /// config), then `overrides`. Unknown keys are rejected.
    pub fn resolve(name: Option<&str>, file: Option<&Params>, overrides: &[(String, String)]) -> CliResult<Self> {
        let from_file = file.and_then(|f| f.get_str("preset").ok());
        let name = match (name, from_file) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::config(format!("preset {a} given but config file is for {b}")))
            }
            (Some(a), _) | (None, Some(a)) => PresetName::parse(a)?,
            (None, None) => return Err(CliError::config("no preset named")),
        };
        let mut p = Self::defaults(name);
        if let Some(f) = file {
            let pairs: Vec<(String, String)> = f.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
            p.params.apply(&pairs)?;
        }
        if overrides.iter().any(|(k, _)| k == "preset") {
            return Err(CliError::config("preset cannot be overridden"));
        }
        p.params.apply(overrides)?;
        if p.params.flag("fidelity")? && p.params.contains("dt") {
            p.params.set("dx", "0.01");
            p.params.set("dt", "0.001");
        }
        p.validate()?;
        Ok(p)
    }

    /// Type-checks every parameter before anything is computed.
    pub fn validate(&self) -> CliResult<()> {
        let p = &self.params;
        for (k, v) in p.iter() {
            match k {
                "preset" | "boundary" | "initial" | "model" | "oscillator" | "regularization" => {}
                "fidelity" => {
                    p.flag(k)?;
                }
                "seed" | "bumps" | "fit_every" | "family_rows" | "heatmap_width" | "heatmap_height" => {
                    p.get::<u64>(k)?;
                }
                _ => {
                    if v.parse::<f64>().is_err() {
                        return Err(CliError::config(format!("{k} = {v:?} is not a number")));
                    }
                }
            }
        }
        if p.contains("boundary") && !matches!(p.get_str("boundary")?, "dirichlet" | "sponge") {
            return Err(CliError::config("boundary must be dirichlet or sponge"));
        }
        if p.contains("initial") {
            InitialKind::parse(p.get_str("initial")?)?;
        }
        if p.contains("model") {
            model_nonlinearity(p.get_str("model")?)?;
        }
        if p.contains("oscillator") {
            model_nonlinearity(p.get_str("oscillator")?)?;
        }
        grid(p)?;
        Ok(())
    }
}

fn model_nonlinearity(name: &str) -> CliResult<Nonlinearity<f64>> {
    if name == "gl" {
        return Ok(Nonlinearity::GinzburgLandau);
    }
    if let Some(c) = name.strip_prefix("linear:") {
        let coefficient = c
            .parse()
            .map_err(|_| CliError::config(format!("bad linear coefficient {c:?}")))?;
        return Ok(Nonlinearity::Linear { coefficient });
    }
    Nonlinearity::preset(name).ok_or_else(|| CliError::config(format!("unknown model {name:?}")))
}

fn grid(p: &Params) -> CliResult<Grid> {
    Ok(Grid::with_spacing(p.num("x_min")?, p.num("x_max")?, p.num("dx")?)?)
}

fn integrator(p: &Params, initial: &State) -> CliResult<Config> {
    let dt = p.num("dt")?;
    let every = ((p.num("frame_dt")? / dt).round() as usize).max(1);
    let boundary = match p.get_str("boundary")? {
        "sponge" => Boundary::Sponge {
            width: p.num("sponge_width")?,
            strength: p.num("sponge_strength")?,
        },
        _ => {
            let psi = initial.psi().re();
            Boundary::DirichletVacuum {
                left: psi[0],
                right: psi[psi.len() - 1],
            }
        }
    };
    let cfg = Config::new(dt, boundary, every);
    cfg.validate(initial.grid())?;
    Ok(cfg)
}

fn random_spec(p: &Params) -> CliResult<RandomSpec> {
    Ok(RandomSpec {
        seed: p.get("seed")?,
        support: (p.num("support_lo")?, p.num("support_hi")?),
        amplitude: p.num("amplitude")?,
        smoothness: p.num("smoothness")?,
        bumps: p.get("bumps")?,
        kind: InitialKind::parse(p.get_str("initial")?)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicsReport {
    pub velocity_set: f64,
    pub velocity: f64,
    pub width: f64,
    /// `width / static width`; `sqrt(1 - v^2)` in theory.
    pub contraction: f64,
    pub frequency: f64,
    pub frequency_uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub edge_contaminated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StringReport {
    pub limit: f64,
    pub final_distance: f64,
    /// `sup |y_grid - y_ode|` after the transient.
    pub oracle_mismatch: f64,
    pub trace_times: Vec<f64>,
    pub trace_grid: Vec<f64>,
    pub trace_oracle: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PresetReport {
    Kinks(KinkDecayReport),
    Solitons { positions: Vec<f64> },
    Adiabatic(Box<AdiabaticSummary>),
    Kinematics(KinematicsReport),
    Spectrum(SpectrumReport),
    String(StringReport),
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",")
}

impl PresetReport {
    /// Key-value summary written as `report.txt`.
    pub fn summary(&self) -> Params {
        let mut r = Params::new();
        match self {
            PresetReport::Kinks(k) => {
                r.set("kinks", k.kinks.len());
                r.set("kink_velocities", join(&k.kinks.iter().map(|k| k.velocity).collect::<Vec<_>>()));
                r.set("kinks_uniform", k.kinks_uniform(0.02));
                r.set("ridge_speeds", join(&k.ridge_speeds));
                r.set("outside_energy_monotone", k.outside_energy_monotone());
            }
            PresetReport::Solitons { positions } => {
                r.set("solitons", positions.len());
                r.set("positions", join(positions));
            }
            PresetReport::Adiabatic(a) => {
                r.set("trackable", a.trackable());
                r.set("lost_at", a.track.lost_at.map_or("none".to_string(), |t| t.to_string()));
                r.set("width_fraction", a.width_fraction);
                r.set("turning_points", a.turning_points.len());
                r.set("turning_energy_error", a.turning_energy_error);
                r.set("sup_q", a.sup_q());
            }
            PresetReport::Kinematics(k) => {
                r.set("velocity", k.velocity);
                r.set("width", k.width);
                r.set("contraction", k.contraction);
                r.set("frequency", k.frequency);
                r.set("frequency_uncertainty", k.frequency_uncertainty);
            }
            PresetReport::Spectrum(s) => {
                r.set("eigenvalues", join(&s.eigenvalues));
                r.set("edge_contaminated", s.edge_contaminated);
            }
            PresetReport::String(s) => {
                r.set("limit", s.limit);
                r.set("final_distance", s.final_distance);
                r.set("oracle_mismatch", s.oracle_mismatch);
            }
        }
        r
    }
}

/// Where a run writes: `--out`, else `$FIELDLAB_OUT`, else `./fieldlab-out`,
/// with a `<preset>-seed<seed>` subdirectory.
pub fn run_dir(base: Option<&Path>, preset: &ExperimentPreset) -> PathBuf {
    let base = base
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(crate::OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fieldlab-out"));
    let seed = preset.params.get_str("seed").unwrap_or("0");
    base.join(format!("{}-seed{seed}", preset.name.as_str()))
}

struct Artifacts<'a> {
    dir: Option<&'a Path>,
}

impl Artifacts<'_> {
    fn observables(&self, traj: &Traj) -> CliResult<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        let mut cols = vec![("t", "time")];
        let docs = [
            ("energy", "total energy"),
            ("momentum", "field momentum"),
            ("charge", "U(1) charge"),
        ];
        for s in &traj.observables {
            if let Some(d) = docs.iter().find(|d| d.0 == s.name) {
                cols.push(*d);
            }
        }
        let mut t = Table::new(&cols);
        for (i, &time) in traj.times.iter().enumerate() {
            let mut row = vec![time];
            row.extend(traj.observables.iter().take(cols.len() - 1).map(|s| s.values[i]));
            t.push(row);
        }
        t.write(&dir.join("observables.csv"))
    }

    fn dumps(&self, traj: &Traj, p: &Params) -> CliResult<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        let dump_dt = p.num("dump_dt")?;
        if dump_dt > 0.0 {
            let sub = dir.join("dumps");
            fs::create_dir_all(&sub)?;
            let stride = ((dump_dt / p.num("frame_dt")?).round() as usize).max(1);
            for (i, s) in traj.snapshots.iter().enumerate().step_by(stride) {
                write_dump(s, &sub.join(format!("frame_{i:05}.slab")))?;
            }
        }
        if let Some(last) = traj.snapshots.last() {
            write_dump(last, &dir.join("final.slab"))?;
        }
        Ok(())
    }

    fn kink_image(&self, traj: &Traj, bands: &BandConfig<f64>, p: &Params) -> CliResult<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        kink_heatmap(traj, bands, p.get("heatmap_width")?, p.get("heatmap_height")?)?.write(&dir.join("heatmap.ppm"))
    }

    fn gray_image(&self, traj: &Traj, p: &Params) -> CliResult<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        magnitude_heatmap(traj, p.num("heatmap_scale")?, p.get("heatmap_width")?, p.get("heatmap_height")?)?
            .write(&dir.join("heatmap.ppm"))
    }

    fn table(&self, name: &str, t: &Table) -> CliResult<()> {
        match self.dir {
            Some(dir) => t.write(&dir.join(name)),
            None => Ok(()),
        }
    }
}

/// Runs a preset. With `dir` set, writes the manifest, report and artifacts
/// there; with `None` only computes.
pub fn execute(preset: &ExperimentPreset, dir: Option<&Path>) -> CliResult<PresetReport> {
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
        fs::write(d.join("manifest.cfg"), preset.params.to_string())?;
    }
    let art = Artifacts { dir };
    let p = &preset.params;
    let report = match preset.name {
        PresetName::Fig4Kinks => fig4(p, &art)?,
        PresetName::SolitonDecay => soliton_decay(p, &art)?,
        PresetName::Fig7Adiabatic => fig7(p, &art)?,
        PresetName::KinkKinematics => PresetReport::Kinematics(kinematics(p, &art)?),
        PresetName::SpectrumCheck => spectrum(p, &art)?,
        PresetName::StringAttraction => PresetReport::String(string_attraction(p, &art)?),
    };
    if let Some(d) = dir {
        fs::write(d.join("report.txt"), report.summary().to_string())?;
    }
    Ok(report)
}

fn fig4(p: &Params, art: &Artifacts<'_>) -> CliResult<PresetReport> {
    let g = grid(p)?;
    let init = random_initial(&random_spec(p)?, &g)?;
    let cfg = integrator(p, &init)?;
    let traj = run(&init, &Model::ginzburg_landau(), &cfg, p.num("t_end")?, &[])?;
    let bands = BandConfig::new(p.num("epsilon")?)?;
    art.observables(&traj)?;
    art.dumps(&traj, p)?;
    art.kink_image(&traj, &bands, p)?;
    let rep = analysis::kink_decay(
        &traj,
        &bands,
        &KinkDecayOptions {
            from: p.num("analysis_from")?,
            window: p.num("analysis_window")?,
            exclusion: p.num("kink_exclusion")?,
            ..KinkDecayOptions::default()
        },
    )?;
    let mut t = Table::new(&[("t", "time"), ("outside_energy", "energy away from kinks in the analysis window")]);
    for (time, e) in rep.outside_times.iter().zip(&rep.outside_energy) {
        t.push(vec![*time, *e]);
    }
    art.table("outside_energy.csv", &t)?;
    Ok(PresetReport::Kinks(rep))
}

fn soliton_decay(p: &Params, art: &Artifacts<'_>) -> CliResult<PresetReport> {
    let g = grid(p)?;
    let init = random_initial(&random_spec(p)?, &g)?.to_complex();
    let model = Model::soliton(model_nonlinearity(p.get_str("model")?)?, ExternalPotential::Zero);
    let cfg = integrator(p, &init)?;
    let traj = run(&init, &model, &cfg, p.num("t_end")?, &[])?;
    art.observables(&traj)?;
    art.dumps(&traj, p)?;
    art.gray_image(&traj, p)?;
    let reach = g.x_max() - p.num("sponge_width")?;
    let last = traj.snapshots.last().expect("at least one frame");
    let positions = analysis::count_solitons(last, p.num("count_threshold")?, reach, p.num("count_separation")?);
    Ok(PresetReport::Solitons { positions })
}

fn fig7(p: &Params, art: &Artifacts<'_>) -> CliResult<PresetReport> {
    let g = grid(p)?;
    let nl = model_nonlinearity(p.get_str("model")?)?;
    let ext = ExternalPotential::Cosine {
        amplitude: p.num("potential_amplitude")?,
        wavenumber: p.num("potential_wavenumber")?,
    };
    let model = Model::soliton(nl, ext.clone());
    let omega0 = p.num("omega0")?;
    let q0 = p.num("q0")?;
    let v0 = p.num("v0")?;
    let profile = solve_profile(&model.nonlinearity, model.mass_squared, omega0, 1e-10)?;
    let init = frozen_profile(&profile, v0, q0, g)?.to_complex();
    let cfg = integrator(p, &init)?;
    let t_end = p.num("t_end")?;
    let traj = run(&init, &model, &cfg, t_end, &[])?;
    art.observables(&traj)?;
    art.dumps(&traj, p)?;
    art.gray_image(&traj, p)?;

    let rows: usize = p.get("family_rows")?;
    let vmax = p.num("family_vmax")?;
    let vs: Vec<f64> = (0..rows)
        .map(|i| -vmax + 2.0 * vmax * i as f64 / (rows.max(2) - 1) as f64)
        .collect();
    let family = tabulate_family(&model, omega0, &vs, g)?;
    let gamma = 1.0 / (1.0 - v0 * v0).sqrt();
    let coupled = SolitonCoupledPotential::new(ext, &profile, gamma);
    let pi0 = family.momentum_at(v0);
    let effective = integrate_effective(&family, &coupled, q0, pi0, p.num("effective_dt")?, t_end)?;
    // well of the effective potential nearest q0
    let period = 2.0 * std::f64::consts::PI / p.num("potential_wavenumber")?;
    let value = |x: f64| coupled.value(x);
    let well_bottom = (-8..=8)
        .map(|j| j as f64 * 0.5 * period)
        .filter(|&x| value(x) < value(x - 0.1) && value(x) < value(x + 0.1))
        .min_by(|a, b| (a - q0).abs().total_cmp(&(b - q0).abs()))
        .unwrap_or(0.0);
    let summary = analysis::adiabatic_summary(AdiabaticInputs {
        traj: &traj,
        family: &family,
        potential: &coupled,
        effective,
        q0,
        width_range: (p.num("width_lo")?, p.num("width_hi")?),
        options: AdiabaticOptions {
            min_peak: p.num("min_peak")?,
            fit_every: p.get("fit_every")?,
            fit: FitOptions {
                radius: p.num("fit_radius")?,
                ..FitOptions::default()
            },
        },
        well_bottom,
    })?;
    let mut t = Table::new(&[
        ("t", "time"),
        ("q_field", "tracked soliton centre"),
        ("width", "half-amplitude width"),
        ("peak", "peak modulus"),
        ("q_effective", "effective-dynamics centre"),
    ]);
    for i in 0..summary.track.times.len() {
        let ti = summary.track.times[i];
        t.push(vec![
            ti,
            summary.track.centers[i],
            summary.track.widths[i],
            summary.track.peaks[i],
            summary.effective.at(ti).0,
        ]);
    }
    art.table("track.csv", &t)?;
    Ok(PresetReport::Adiabatic(Box::new(summary)))
}

fn kinematics(p: &Params, art: &Artifacts<'_>) -> CliResult<KinematicsReport> {
    let g = grid(p)?;
    let v = p.num("velocity")?;
    let spec = KinkSpec::moving(p.num("position")?, v)?;
    let init = kink_with_internal_mode(&spec, p.num("mode_amplitude")?, g, 0.0);
    let cfg = integrator(p, &init)?;
    let traj = run(&init, &Model::ginzburg_landau(), &cfg, p.num("t_end")?, &[])?;
    let bands = BandConfig::new(p.num("epsilon")?)?;
    art.observables(&traj)?;
    art.dumps(&traj, p)?;
    art.kink_image(&traj, &bands, p)?;
    let tr = track(&traj, &bands)?;
    let k = tr
        .tracks
        .iter()
        .max_by_key(|t| t.times.len())
        .ok_or_else(|| CliError::Numerical("no kink found".into()))?;
    let (_, velocity) = fieldlab::line_fit(&k.times, &k.positions).unwrap_or((0.0, f64::NAN));
    let est = measure_oscillation(&k.times, &k.center_slope)?;
    let width = k.widths.iter().sum::<f64>() / k.widths.len() as f64;
    let mut t = Table::new(&[
        ("t", "time"),
        ("position", "kink centre"),
        ("width", "kink width"),
        ("slope", "psi_x at the centre"),
    ]);
    for i in 0..k.times.len() {
        t.push(vec![k.times[i], k.positions[i], k.widths[i], k.center_slope[i]]);
    }
    art.table("kink_track.csv", &t)?;
    Ok(KinematicsReport {
        velocity_set: v,
        velocity,
        width,
        contraction: width / static_kink_width::<f64>(),
        frequency: est.frequency,
        frequency_uncertainty: est.uncertainty,
    })
}

fn spectrum(p: &Params, art: &Artifacts<'_>) -> CliResult<PresetReport> {
    let g = grid(p)?;
    let op = SchrodingerOperator1D::kink_linearization(g);
    let s = discrete_spectrum(&op, p.num("below")?, false)?;
    let mut t = Table::new(&[("index", "eigenvalue index"), ("lambda", "eigenvalue")]);
    for (i, l) in s.eigenvalues.iter().enumerate() {
        t.push(vec![i as f64, *l]);
    }
    art.table("eigenvalues.csv", &t)?;
    Ok(PresetReport::Spectrum(SpectrumReport {
        eigenvalues: s.eigenvalues,
        edge_contaminated: s.edge_contaminated,
    }))
}

fn string_attraction(p: &Params, art: &Artifacts<'_>) -> CliResult<StringReport> {
    let g = grid(p)?;
    let f = model_nonlinearity(p.get_str("oscillator")?)?;
    let reg = match p.get_str("regularization")? {
        "node" => fieldlab::DeltaRegularization::Node,
        "hat" => fieldlab::DeltaRegularization::Hat,
        other => return Err(CliError::config(format!("unknown regularization {other:?}"))),
    };
    let x0 = p.num("coupling_x")?;
    let model = StringOscillatorModel::point(x0, f.clone()).with_regularization(reg);
    let init = random_initial(&random_spec(p)?, &g)?;
    if init.kind() != FieldKind::Real {
        return Err(CliError::config("string runs need real initial data"));
    }
    let cfg = integrator(p, &init)?;
    let t_end = p.num("t_end")?;
    let traj = simulate_string(&model, &init, &cfg, t_end)?;
    art.observables(&traj)?;
    art.dumps(&traj, p)?;
    art.gray_image(&traj, p)?;

    let node = g.nearest(x0);
    let incoming = |t: f64| free_trace(&init, x0, t);
    let y0 = init.psi().re()[node];
    let oracle = trace_ode_oracle(&f, y0, &incoming, t_end, cfg.dt)?;
    let transient = p.num("transient")?;
    let mut mismatch: f64 = 0.0;
    let mut trace_times = Vec::new();
    let mut trace_grid = Vec::new();
    let mut trace_oracle = Vec::new();
    for (s, &t) in traj.snapshots.iter().zip(&traj.times) {
        let k = ((t / cfg.dt).round() as usize).min(oracle.values.len() - 1);
        let yg = s.psi().re()[node];
        trace_times.push(t);
        trace_grid.push(yg);
        trace_oracle.push(oracle.values[k]);
        if t >= transient {
            mismatch = mismatch.max((yg - oracle.values[k]).abs());
        }
    }
    let last = traj.snapshots.last().expect("at least one frame");
    let radius = p.num("radius")?;
    let candidates = stationary_states(&f, -3.0, 3.0, 600);
    let (limit, final_distance) = candidates
        .iter()
        .map(|&z| {
            let c = State::constant(g, FieldKind::Real, z);
            (z, local_l2_distance(last, &c, radius).unwrap_or(f64::INFINITY))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((f64::NAN, f64::INFINITY));
    let mut t = Table::new(&[("t", "time"), ("y_grid", "coupling-node value"), ("y_oracle", "reduced ODE value")]);
    for i in 0..trace_times.len() {
        t.push(vec![trace_times[i], trace_grid[i], trace_oracle[i]]);
    }
    art.table("trace.csv", &t)?;
    Ok(StringReport {
        limit,
        final_distance,
        oracle_mismatch: mismatch,
        trace_times,
        trace_grid,
        trace_oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn fig7_defaults_carry_the_published_parameters() {
        let p = ExperimentPreset::defaults(PresetName::Fig7Adiabatic).params;
        assert_eq!(p.get_str("model").unwrap(), "row3");
        assert_eq!(Nonlinearity::preset("row3"), Some(Nonlinearity::polynomial(10.0, 6, 8.75, 5).unwrap()));
        assert_eq!(p.num("potential_amplitude").unwrap(), -0.2);
        assert_eq!(p.num("potential_wavenumber").unwrap(), 0.31);
        assert_eq!(p.num("omega0").unwrap(), 0.6);
        assert_eq!(p.num("q0").unwrap(), 5.0);
        assert_eq!(p.num("v0").unwrap(), 0.0);
        let f4 = ExperimentPreset::defaults(PresetName::Fig4Kinks).params;
        assert_eq!((f4.num("dx").unwrap(), f4.num("dt").unwrap()), (0.01, 0.001));
        assert_eq!((f4.num("support_lo").unwrap(), f4.num("support_hi").unwrap()), (-20.0, 20.0));
    }

    #[test]
    fn bad_keys_and_values_fail_before_running() {
        let e = ExperimentPreset::resolve(Some("fig4_kinks"), None, &ov(&[("dxx", "1"), ("seeed", "2")])).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("dxx") && e.to_string().contains("seeed"));
        assert!(ExperimentPreset::resolve(Some("fig4_kinks"), None, &ov(&[("dx", "abc")])).is_err());
        assert!(ExperimentPreset::resolve(Some("fig4_kinks"), None, &ov(&[("boundary", "wall")])).is_err());
        assert!(ExperimentPreset::resolve(Some("nope"), None, &[]).is_err());
        assert!(ExperimentPreset::resolve(Some("spectrum_check"), None, &ov(&[("preset", "fig4_kinks")])).is_err());
    }

    #[test]
    fn fidelity_flag_selects_fine_resolution() {
        let p = ExperimentPreset::resolve(Some("fig7_adiabatic"), None, &ov(&[("fidelity", "true")])).unwrap();
        assert_eq!(p.params.num("dx").unwrap(), 0.01);
        assert_eq!(p.params.num("dt").unwrap(), 0.001);
    }

    #[test]
    fn manifest_resolves_to_the_same_preset() {
        let p = ExperimentPreset::resolve(Some("string_attraction"), None, &ov(&[("seed", "9"), ("dx", "0.05")])).unwrap();
        let text = p.params.to_string();
        let back = ExperimentPreset::resolve(None, Some(&Params::parse(&text).unwrap()), &[]).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn spectrum_preset_runs() {
        let p = ExperimentPreset::resolve(Some("spectrum_check"), None, &ov(&[("dx", "0.05")])).unwrap();
        match execute(&p, None).unwrap() {
            PresetReport::Spectrum(s) => {
                assert_eq!(s.eigenvalues.len(), 2);
                assert!((s.eigenvalues[1] - 1.5).abs() < 1e-2);
            }
            other => panic!("{other:?}"),
        }
    }
}
