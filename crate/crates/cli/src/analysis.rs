//! Post-processing shared by the presets and the acceptance checks.

use fieldlab::{
    compare_adiabatic, detect_kinks, line_fit, ridge_speeds, track, track_soliton, AdiabaticOptions,
    AdiabaticReport, BandConfig, EffectivePotential, EffectiveTrajectory, Family, RidgeOptions, SolitonTrack,
    State, Traj,
};

use crate::error::CliResult;

/// Frames with `t >= from`, observables dropped.
pub fn tail(traj: &Traj, from: f64) -> Traj {
    let keep: Vec<usize> = (0..traj.times.len()).filter(|&i| traj.times[i] >= from - 1e-9).collect();
    Traj {
        times: keep.iter().map(|&i| traj.times[i]).collect(),
        snapshots: keep.iter().filter_map(|&i| traj.snapshots.get(i).cloned()).collect(),
        observables: Vec::new(),
        record_every: traj.record_every,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinkSummary {
    pub orientation: i8,
    pub velocity: f64,
    /// Largest deviation of a sliding-window velocity from `velocity`.
    pub velocity_spread: f64,
    /// Alive over the whole analysis window.
    pub persistent: bool,
    pub final_position: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinkDecayReport {
    pub from: f64,
    pub kinks: Vec<KinkSummary>,
    pub ridge_speeds: Vec<f64>,
    pub outside_times: Vec<f64>,
    /// Ginzburg-Landau energy in `|x| < window` with kink neighbourhoods removed.
    pub outside_energy: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinkDecayOptions {
    pub from: f64,
    pub window: f64,
    pub exclusion: f64,
    /// Length of the sliding windows for velocity constancy.
    pub velocity_window: f64,
}

impl Default for KinkDecayOptions {
    fn default() -> Self {
        Self {
            from: 100.0,
            window: 60.0,
            exclusion: 5.0,
            velocity_window: 20.0,
        }
    }
}

/// `pi^2/2 + psi_x^2/2 + (1 - psi^2)^2/4` integrated over `|x| < window`,
/// skipping nodes within `exclusion` of a kink.
pub fn energy_outside_kinks(state: &State, kinks: &[f64], window: f64, exclusion: f64) -> f64 {
    let g = state.grid();
    let psi = state.psi().re();
    let pi = state.pi().re();
    let n = psi.len();
    let mut e = 0.0;
    for k in 1..n - 1 {
        let x = g.x(k);
        if x.abs() >= window || kinks.iter().any(|&c| (x - c).abs() < exclusion) {
            continue;
        }
        let d = (psi[k + 1] - psi[k - 1]) / (2.0 * g.dx());
        let s = 1.0 - psi[k] * psi[k];
        e += g.dx() * (0.5 * pi[k] * pi[k] + 0.5 * d * d + 0.25 * s * s);
    }
    e
}

pub fn kink_decay(traj: &Traj, bands: &BandConfig<f64>, opts: &KinkDecayOptions) -> CliResult<KinkDecayReport> {
    let late = tail(traj, opts.from);
    let tracks = track(&late, bands)?;
    let mut kinks = Vec::new();
    for tr in &tracks.tracks {
        let persistent = !tr.ended && tr.first_frame == 0 && tr.times.len() == late.times.len();
        let (_, v) = line_fit(&tr.times, &tr.positions).unwrap_or((0.0, f64::NAN));
        let w = (opts.velocity_window / (late.times.get(1).map_or(1.0, |t1| t1 - late.times[0]))).round() as usize;
        let spread = tr
            .sliding_velocities(w.max(2))
            .iter()
            .map(|s| (s - v).abs())
            .fold(0.0, f64::max);
        kinks.push(KinkSummary {
            orientation: tr.orientation,
            velocity: v,
            velocity_spread: spread,
            persistent,
            final_position: *tr.positions.last().unwrap_or(&f64::NAN),
        });
    }
    let ridges = ridge_speeds(
        &late,
        &RidgeOptions {
            vacua: vec![-1.0, 1.0],
            kink_bands: Some(*bands),
            ..RidgeOptions::default()
        },
    )?;
    let mut outside_times = Vec::new();
    let mut outside_energy = Vec::new();
    for s in &late.snapshots {
        let pos: Vec<f64> = detect_kinks(s, bands)?.iter().map(|k| k.position).collect();
        outside_times.push(s.time());
        outside_energy.push(energy_outside_kinks(s, &pos, opts.window, opts.exclusion));
    }
    Ok(KinkDecayReport {
        from: opts.from,
        kinks,
        ridge_speeds: ridges,
        outside_times,
        outside_energy,
    })
}

impl KinkDecayReport {
    pub fn kinks_uniform(&self, max_spread: f64) -> bool {
        self.kinks
            .iter()
            .all(|k| k.persistent && k.velocity.abs() < 1.0 && k.velocity_spread < max_spread)
    }

    pub fn ridges_in(&self, lo: f64, hi: f64) -> bool {
        self.ridge_speeds.iter().all(|s| s.abs() > lo && s.abs() < hi)
    }

    pub fn outside_energy_monotone(&self) -> bool {
        self.outside_energy.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Local maxima of `|psi|` above `threshold` in `|x| < reach`, at least
/// `separation` apart.
pub fn count_solitons(state: &State, threshold: f64, reach: f64, separation: f64) -> Vec<f64> {
    let g = state.grid();
    let m = state.psi().moduli();
    let half = (separation / g.dx()).round() as usize;
    let mut peaks = Vec::new();
    for k in 0..m.len() {
        let x = g.x(k);
        if x.abs() >= reach || m[k] <= threshold {
            continue;
        }
        let lo = k.saturating_sub(half);
        let hi = (k + half).min(m.len() - 1);
        if (lo..=hi).all(|j| m[j] < m[k] || (m[j] == m[k] && j >= k)) {
            peaks.push(x);
        }
    }
    peaks
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticSummary {
    pub track: SolitonTrack<f64>,
    pub comparison: Option<AdiabaticReport<f64>>,
    pub width_fraction: f64,
    /// `(t, q)` at extrema of the tracked centre.
    pub turning_points: Vec<(f64, f64)>,
    /// Largest `|V_eff(q_turn) - V_eff(q0)|` relative to `V_eff(q0) - min V_eff`.
    pub turning_energy_error: f64,
    pub effective: EffectiveTrajectory<f64>,
}

impl AdiabaticSummary {
    pub fn trackable(&self) -> bool {
        self.track.lost_at.is_none()
    }

    pub fn sup_q(&self) -> f64 {
        self.comparison.as_ref().map_or(f64::INFINITY, |c| c.sup_q)
    }
}

/// Extrema of `y(t)` refined by a parabola through the three samples.
pub fn turning_points(t: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..y.len().saturating_sub(1) {
        let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
        if (b > a && b >= c) || (b < a && b <= c) {
            let den = a - 2.0 * b + c;
            let s = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            let h = t[i + 1] - t[i];
            out.push((t[i] + s * h, b - 0.25 * (a - c) * s));
        }
    }
    out
}

pub struct AdiabaticInputs<'a> {
    pub traj: &'a Traj,
    pub family: &'a Family,
    pub potential: &'a dyn EffectivePotential<f64>,
    pub effective: EffectiveTrajectory<f64>,
    pub q0: f64,
    pub width_range: (f64, f64),
    pub options: AdiabaticOptions<f64>,
    /// Minimum of the effective potential nearest `q0`.
    pub well_bottom: f64,
}

pub fn adiabatic_summary(inp: AdiabaticInputs<'_>) -> CliResult<AdiabaticSummary> {
    let tr = track_soliton(inp.traj, inp.q0, inp.options.min_peak)?;
    let inside = tr
        .widths
        .iter()
        .filter(|w| **w >= inp.width_range.0 && **w <= inp.width_range.1)
        .count();
    let width_fraction = inside as f64 / inp.traj.times.len().max(1) as f64;
    let tp = turning_points(&tr.times, &tr.centers);
    let v0 = inp.potential.value(inp.q0);
    let depth = (v0 - inp.potential.value(inp.well_bottom)).abs();
    let turning_energy_error = if tp.is_empty() {
        f64::INFINITY
    } else {
        tp.iter()
            .map(|&(_, q)| (inp.potential.value(q) - v0).abs() / depth)
            .fold(0.0, f64::max)
    };
    let comparison = compare_adiabatic(inp.traj, &inp.effective, inp.family, &inp.options).ok();
    Ok(AdiabaticSummary {
        track: tr,
        comparison,
        width_fraction,
        turning_points: tp,
        turning_energy_error,
        effective: inp.effective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fieldlab::Grid;

    #[test]
    fn turning_points_of_a_cosine() {
        let t: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|&s| 5.0 * s.cos()).collect();
        let tp = turning_points(&t, &y);
        assert_eq!(tp.len(), 6);
        for (k, (ti, qi)) in tp.iter().enumerate() {
            assert!((ti - (k + 1) as f64 * std::f64::consts::PI).abs() < 1e-3);
            assert!((qi.abs() - 5.0).abs() < 1e-4);
        }
    }

    #[test]
    fn soliton_count_separates_peaks() {
        let g = Grid::with_spacing(-50.0, 50.0, 0.05).unwrap();
        let s = State::from_fn_real(
            g,
            0.0,
            |x| (-(x + 20.0).powi(2)).exp() + 0.5 * (-(x - 10.0).powi(2)).exp() + 0.01 * x.sin(),
            |_| 0.0,
        );
        let p = count_solitons(&s, 0.1, 45.0, 3.0);
        assert_eq!(p.len(), 2);
        assert!((p[0] + 20.0).abs() < 0.1 && (p[1] - 10.0).abs() < 0.1);
    }

    #[test]
    fn outside_energy_excludes_kink() {
        let g = Grid::with_spacing(-40.0, 40.0, 0.01).unwrap();
        let k = State::from_fn_real(g, 0.0, |x| (x / 2f64.sqrt()).tanh(), |_| 0.0);
        assert!(energy_outside_kinks(&k, &[], 30.0, 5.0) > 0.9);
        assert!(energy_outside_kinks(&k, &[0.0], 30.0, 5.0) < 1e-4);
    }
}
