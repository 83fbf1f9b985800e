//! Measurements on states and trajectories: kinks, widths, pulsations,
//! radiation ridges and projection onto the soliton family.

use num_complex::Complex;

use crate::effective::SolitonFamilyTable;
use crate::error::{LabError, Result};
use crate::field::{centered_gradient, integrate_window, local_l2_distance, FieldKind, FieldState, Grid1D, StateView};
use crate::integrate::Trajectory;
use crate::models::ModelSpec;
use crate::scalar::{FieldValue, Scalar};
use crate::soliton::{solve_profile, soliton_point, static_kink_width, SolitaryWaveProfile};

/// Threshold of the three-band picture: above `1 + eps`, below `-1 - eps`, and
/// the kink band `|psi| < 1 - eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandConfig<T> {
    epsilon: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    Above,
    Below,
    Kink,
    Vacuum,
}

impl<T: Scalar> BandConfig<T> {
    pub fn new(epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon < T::lit(0.5)) {
            return Err(LabError::InvalidParameter(format!(
                "band epsilon must lie in (0, 0.5), got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn classify(&self, psi: T) -> Band {
        let one = T::one();
        if psi > one + self.epsilon {
            Band::Above
        } else if psi < -one - self.epsilon {
            Band::Below
        } else if psi.abs() < one - self.epsilon {
            Band::Kink
        } else {
            Band::Vacuum
        }
    }
}

impl<T: Scalar> Default for BandConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(0.05),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinkDetection<T> {
    pub position: T,
    /// +1 for a rising kink, -1 for a falling one.
    pub orientation: i8,
    /// Extent of the kink band around the crossing.
    pub band: (T, T),
    /// The band holds several crossings or is far wider than a kink.
    pub unresolved: bool,
}

fn real_psi<T: Scalar>(state: &FieldState<T>) -> Result<&[T]> {
    match state.view() {
        StateView::Real(p, _) => Ok(p),
        StateView::Complex(..) => Err(LabError::KindMismatch {
            expected: "real",
            found: "complex",
        }),
    }
}

/// Zero crossings of a real field inside the kink band.
pub fn detect_kinks<T: Scalar>(state: &FieldState<T>, bands: &BandConfig<T>) -> Result<Vec<KinkDetection<T>>> {
    let psi = real_psi(state)?;
    let g = state.grid();
    let n = psi.len();
    let limit = T::lit(50.0) * static_kink_width::<T>();
    let mut out = Vec::new();
    let mut j = 0;
    while j < n {
        if bands.classify(psi[j]) != Band::Kink {
            j += 1;
            continue;
        }
        let start = j;
        while j < n && bands.classify(psi[j]) == Band::Kink {
            j += 1;
        }
        let end = j - 1;
        let mut crossings = Vec::new();
        for k in start..end {
            let (a, b) = (psi[k], psi[k + 1]);
            if (a < T::zero() && b >= T::zero()) || (a > T::zero() && b <= T::zero()) {
                let f = a / (a - b);
                let orientation = if b > a { 1 } else { -1 };
                crossings.push((g.x(k) + f * g.dx(), orientation));
            }
        }
        let band = (g.x(start), g.x(end));
        let unresolved = crossings.len() > 1 || band.1 - band.0 > limit;
        for (position, orientation) in crossings {
            out.push(KinkDetection {
                position,
                orientation,
                band,
                unresolved,
            });
        }
    }
    Ok(out)
}

fn crossing_right<T: Scalar>(g: &Grid1D<T>, f: &[T], from: usize, level: T) -> Option<T> {
    for k in from..f.len() - 1 {
        if (f[k] - level) * (f[k + 1] - level) <= T::zero() && f[k] != f[k + 1] {
            return Some(g.x(k) + g.dx() * (f[k] - level) / (f[k] - f[k + 1]));
        }
    }
    None
}

fn crossing_left<T: Scalar>(g: &Grid1D<T>, f: &[T], from: usize, level: T) -> Option<T> {
    for k in (1..=from).rev() {
        if (f[k] - level) * (f[k - 1] - level) <= T::zero() && f[k] != f[k - 1] {
            return Some(g.x(k) - g.dx() * (f[k] - level) / (f[k] - f[k - 1]));
        }
    }
    None
}

/// Parabolic vertex through three equispaced samples, as an offset in cells.
fn vertex_offset<T: Scalar>(a: T, b: T, c: T) -> T {
    let den = a - T::lit(2.0) * b + c;
    if den == T::zero() {
        T::zero()
    } else {
        (T::lit(0.5) * (a - c) / den).max(-T::one()).min(T::one())
    }
}

/// Peak of `|psi|` nearest to `center`, refined by a parabola.
fn local_peak<T: Scalar>(g: &Grid1D<T>, m: &[T], center: T) -> (usize, T, T) {
    let mut k = g.nearest(center);
    loop {
        let left = if k > 0 { m[k - 1] } else { T::neg_infinity() };
        let right = if k + 1 < m.len() { m[k + 1] } else { T::neg_infinity() };
        if right > m[k] && right >= left {
            k += 1;
        } else if left > m[k] {
            k -= 1;
        } else {
            break;
        }
    }
    if k == 0 || k + 1 == m.len() {
        return (k, g.x(k), m[k]);
    }
    let s = vertex_offset(m[k - 1], m[k], m[k + 1]);
    let peak = m[k] - T::lit(0.25) * (m[k - 1] - m[k + 1]) * s;
    (k, g.x(k) + s * g.dx(), peak)
}

/// Full width at half deviation from the vacuum of the structure at `center`.
///
/// A real field changing sign near `center` is treated as a kink (distance
/// between the `-1/2` and `+1/2` crossings in units of its vacua); anything
/// else as a bump of `|psi|`.
pub fn measure_width<T: Scalar>(state: &FieldState<T>, center: T) -> Result<T> {
    let g = state.grid();
    let c = g.nearest(center);
    if let StateView::Real(psi, _) = state.view() {
        let w = static_kink_width::<T>();
        let span = (w / g.dx()).ceil().to_usize().unwrap_or(1).max(1);
        let lo = c.saturating_sub(span);
        let hi = (c + span).min(psi.len() - 1);
        if psi[lo] * psi[hi] < T::zero() {
            let o = if psi[hi] > psi[lo] { T::one() } else { -T::one() };
            let half = T::lit(0.5) * o;
            let a = crossing_left(g, psi, c, -half);
            let b = crossing_right(g, psi, c, half);
            return match (a, b) {
                (Some(a), Some(b)) => Ok((b - a).abs()),
                _ => Err(LabError::InvalidParameter("kink does not reach half height".into())),
            };
        }
    }
    let m = state.psi().moduli();
    let (k, _, peak) = local_peak(g, &m, center);
    let half = T::lit(0.5) * peak;
    match (crossing_left(g, &m, k, half), crossing_right(g, &m, k, half)) {
        (Some(a), Some(b)) => Ok(b - a),
        _ => Err(LabError::InvalidParameter("structure does not fall to half height".into())),
    }
}

/// Centre and peak of `|psi|` near `guess`.
pub fn soliton_center<T: Scalar>(state: &FieldState<T>, guess: T) -> (T, T) {
    let m = state.psi().moduli();
    let (_, x, peak) = local_peak(state.grid(), &m, guess);
    (x, peak)
}

/// Centre of the global maximum of `|psi|`.
pub fn global_soliton_center<T: Scalar>(state: &FieldState<T>) -> (T, T) {
    let m = state.psi().moduli();
    let k = (0..m.len()).fold(0, |b, k| if m[k] > m[b] { k } else { b });
    soliton_center(state, state.grid().x(k))
}

/// `psi_x` at a kink crossing, linearly interpolated.
fn slope_at<T: Scalar>(g: &Grid1D<T>, psi: &[T], x: T) -> T {
    let c = (x - g.x_min()) / g.dx();
    let j = c.floor().to_usize().unwrap_or(0).min(psi.len() - 2);
    let f = c - T::from_usize(j);
    let a = centered_gradient(g, psi, j);
    let b = centered_gradient(g, psi, j + 1);
    a * (T::one() - f) + b * f
}

/// One kink followed through consecutive frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Track<T> {
    pub orientation: i8,
    /// Frame at which the track was born.
    pub first_frame: usize,
    pub times: Vec<T>,
    pub positions: Vec<T>,
    pub widths: Vec<T>,
    /// `psi_x` at the centre; oscillates with the internal mode.
    pub center_slope: Vec<T>,
    /// Ended by an annihilation, an unresolved band or a gate miss.
    pub ended: bool,
}

impl<T: Scalar> Track<T> {
    /// Least-squares slope of position against time.
    pub fn velocity(&self) -> T {
        line_fit(&self.times, &self.positions).map(|(_, b)| b).unwrap_or(T::zero())
    }

    /// Slopes over consecutive windows of `window` frames.
    pub fn sliding_velocities(&self, window: usize) -> Vec<T> {
        if window < 2 || self.times.len() < window {
            return Vec::new();
        }
        (0..=self.times.len() - window)
            .filter_map(|s| line_fit(&self.times[s..s + window], &self.positions[s..s + window]).map(|f| f.1))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrackEvent<T> {
    Birth { time: T, position: T },
    Death { time: T, position: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinkTrack<T> {
    pub times: Vec<T>,
    pub tracks: Vec<Track<T>>,
    pub events: Vec<TrackEvent<T>>,
}

impl<T: Scalar> KinkTrack<T> {
    pub fn velocities(&self) -> Vec<T> {
        self.tracks.iter().map(|t| t.velocity()).collect()
    }
}

/// `(intercept, slope)` of the least-squares line through `(t, y)`.
pub fn line_fit<T: Scalar>(t: &[T], y: &[T]) -> Option<(T, T)> {
    let n = t.len();
    if n < 2 {
        return None;
    }
    let nf = T::from_usize(n);
    let tm = t.iter().copied().sum::<T>() / nf;
    let ym = y.iter().copied().sum::<T>() / nf;
    let mut stt = T::zero();
    let mut sty = T::zero();
    for k in 0..n {
        stt += (t[k] - tm) * (t[k] - tm);
        sty += (t[k] - tm) * (y[k] - ym);
    }
    if stt == T::zero() {
        return None;
    }
    let b = sty / stt;
    Some((ym - b * tm, b))
}

/// Follows every resolved kink of a real trajectory with nearest-neighbour
/// association inside a gate of `10 dx`.
pub fn track<T: Scalar>(traj: &Trajectory<T>, bands: &BandConfig<T>) -> Result<KinkTrack<T>> {
    if traj.snapshots.is_empty() {
        return Err(LabError::InvalidParameter("trajectory has no snapshots".into()));
    }
    let gate = T::lit(10.0) * traj.snapshots[0].grid().dx();
    let mut tracks: Vec<Track<T>> = Vec::new();
    let mut events = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    for (frame, st) in traj.snapshots.iter().enumerate() {
        let t = st.time();
        let psi = real_psi(st)?;
        let found: Vec<KinkDetection<T>> = detect_kinks(st, bands)?.into_iter().filter(|d| !d.unresolved).collect();
        // greedy matching on increasing distance
        let mut pairs = Vec::new();
        for (oi, &ti) in open.iter().enumerate() {
            let last = *tracks[ti].positions.last().unwrap();
            for (di, d) in found.iter().enumerate() {
                let dist = (d.position - last).abs();
                if dist < gate && d.orientation == tracks[ti].orientation {
                    pairs.push((dist, oi, di));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut used_track = vec![false; open.len()];
        let mut used_det = vec![false; found.len()];
        for (_, oi, di) in pairs {
            if used_track[oi] || used_det[di] {
                continue;
            }
            used_track[oi] = true;
            used_det[di] = true;
            let d = &found[di];
            let tr = &mut tracks[open[oi]];
            tr.times.push(t);
            tr.positions.push(d.position);
            tr.widths.push(measure_width(st, d.position).unwrap_or(T::nan()));
            tr.center_slope.push(slope_at(st.grid(), psi, d.position));
        }
        let mut still = Vec::new();
        for (oi, &ti) in open.iter().enumerate() {
            if used_track[oi] {
                still.push(ti);
            } else {
                tracks[ti].ended = true;
                events.push(TrackEvent::Death {
                    time: t,
                    position: *tracks[ti].positions.last().unwrap(),
                });
            }
        }
        for (di, d) in found.iter().enumerate() {
            if used_det[di] {
                continue;
            }
            if frame > 0 {
                events.push(TrackEvent::Birth {
                    time: t,
                    position: d.position,
                });
            }
            tracks.push(Track {
                orientation: d.orientation,
                first_frame: frame,
                times: vec![t],
                positions: vec![d.position],
                widths: vec![measure_width(st, d.position).unwrap_or(T::nan())],
                center_slope: vec![slope_at(st.grid(), psi, d.position)],
                ended: false,
            });
            still.push(tracks.len() - 1);
        }
        open = still;
    }
    Ok(KinkTrack {
        times: traj.times.clone(),
        tracks,
        events,
    })
}

/// Centre, peak and width of a soliton through a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonTrack<T> {
    pub times: Vec<T>,
    pub centers: Vec<T>,
    pub peaks: Vec<T>,
    pub widths: Vec<T>,
    /// Time at which the peak fell below the floor or jumped past the gate.
    pub lost_at: Option<T>,
}

/// Follows the `|psi|` maximum that starts nearest `start`. The per-frame gate
/// is `frame interval + 10 dx`, the distance a subluminal structure can cover.
pub fn track_soliton<T: Scalar>(traj: &Trajectory<T>, start: T, min_peak: T) -> Result<SolitonTrack<T>> {
    if traj.snapshots.is_empty() {
        return Err(LabError::InvalidParameter("trajectory has no snapshots".into()));
    }
    let dx = traj.snapshots[0].grid().dx();
    let mut out = SolitonTrack {
        times: Vec::new(),
        centers: Vec::new(),
        peaks: Vec::new(),
        widths: Vec::new(),
        lost_at: None,
    };
    let mut guess = start;
    let mut last_t = traj.snapshots[0].time();
    for st in &traj.snapshots {
        let (c, peak) = soliton_center(st, guess);
        let gate = (st.time() - last_t).abs() + T::lit(10.0) * dx;
        let jumped = !out.centers.is_empty() && (c - guess).abs() > gate;
        if peak < min_peak || jumped {
            out.lost_at = Some(st.time());
            break;
        }
        out.times.push(st.time());
        out.centers.push(c);
        out.peaks.push(peak);
        out.widths.push(measure_width(st, c).unwrap_or(T::nan()));
        guess = c;
        last_t = st.time();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationEstimate<T> {
    pub frequency: T,
    /// Standard error propagated from the spread of the period estimates.
    pub uncertainty: T,
    pub periods_used: usize,
}

/// Times of maxima and of minima, one per excursion beyond `+-band`, so
/// ripple smaller than the band cannot split an extremum.
fn extrema_times<T: Scalar>(t: &[T], y: &[T], band: T) -> (Vec<T>, Vec<T>) {
    let (mut maxima, mut minima) = (Vec::new(), Vec::new());
    let n = y.len();
    let mut k = 0;
    while k < n {
        if y[k].abs() <= band {
            k += 1;
            continue;
        }
        let up = y[k] > T::zero();
        let start = k;
        // the excursion lasts until the opposite band is entered
        while k < n && !(if up { y[k] < -band } else { y[k] > band }) {
            k += 1;
        }
        let s = if up { T::one() } else { -T::one() };
        let (mut best, mut j) = (start, start);
        while j < k {
            if s * y[j] > s * y[best] {
                best = j;
            }
            j += 1;
        }
        // excursions touching either end may be cut off
        if start > 0 && k < n && best + 1 < n {
            let h = t[best + 1] - t[best];
            let tm = t[best] + vertex_offset(s * y[best - 1], s * y[best], s * y[best + 1]) * h;
            if up {
                maxima.push(tm);
            } else {
                minima.push(tm);
            }
        }
    }
    (maxima, minima)
}

/// Frequency of a quasi-periodic series from the spacing of successive
/// maxima and of successive minima after removing a linear trend.
pub fn measure_oscillation<T: Scalar>(t: &[T], y: &[T]) -> Result<OscillationEstimate<T>> {
    if t.len() != y.len() || t.len() < 5 {
        return Err(LabError::InvalidParameter("series too short".into()));
    }
    let (a, b) = line_fit(t, y).ok_or_else(|| LabError::InvalidParameter("degenerate time axis".into()))?;
    let r: Vec<T> = t.iter().zip(y).map(|(&t, &y)| y - a - b * t).collect();
    let rms = (r.iter().map(|&v| v * v).sum::<T>() / T::from_usize(r.len())).sqrt();
    let (maxima, minima) = extrema_times(t, &r, T::lit(0.5) * rms);
    let mut periods = Vec::new();
    for e in [maxima, minima] {
        periods.extend(e.windows(2).map(|w| w[1] - w[0]));
    }
    if periods.len() < 2 {
        return Err(LabError::InvalidParameter("fewer than two oscillation periods".into()));
    }
    let n = T::from_usize(periods.len());
    let mean = periods.iter().copied().sum::<T>() / n;
    let var = periods.iter().map(|&p| (p - mean) * (p - mean)).sum::<T>() / (n - T::one());
    let se = (var / n).sqrt();
    let two_pi = T::lit(2.0) * T::PI();
    Ok(OscillationEstimate {
        frequency: two_pi / mean,
        uncertainty: two_pi * se / (mean * mean),
        periods_used: periods.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeOptions<T> {
    /// Maxima below this fraction of the largest smoothed density are ignored.
    pub threshold: T,
    /// Gaussian smoothing length applied before picking maxima.
    pub smoothing: T,
    /// Vacuum values subtracted from `psi` (nearest one per node).
    pub vacua: Vec<T>,
    /// When set, neighbourhoods of detected kinks are excluded.
    pub kink_bands: Option<BandConfig<T>>,
    pub exclusion_radius: T,
    /// Minimum fraction of frames a ridge must appear in.
    pub min_fraction: T,
    /// Width of the intercept bins of the line transform.
    pub bin_width: T,
    pub max_ridges: usize,
}

impl<T: Scalar> Default for RidgeOptions<T> {
    fn default() -> Self {
        Self {
            threshold: T::lit(0.1),
            smoothing: T::lit(2.0),
            vacua: vec![T::zero()],
            kink_bands: None,
            exclusion_radius: T::lit(5.0),
            min_fraction: T::lit(0.3),
            bin_width: T::lit(1.0),
            max_ridges: 20,
        }
    }
}

fn ridge_density<T: Scalar>(st: &FieldState<T>, vacua: &[T]) -> Vec<T> {
    let g = st.grid();
    let c = st.to_complex();
    let psi = c.psi().as_complex().unwrap();
    let pi = c.pi().as_complex().unwrap();
    (0..psi.len())
        .map(|k| {
            let p = psi[k];
            let dev = vacua
                .iter()
                .map(|&v| (p - Complex::new(v, T::zero())).norm_sqr())
                .fold(T::infinity(), T::min);
            let dev = if vacua.is_empty() { p.norm_sqr() } else { dev };
            pi[k].norm_sqr() + centered_gradient(g, psi, k).norm_sqr() + dev
        })
        .collect()
}

fn gaussian_smooth<T: Scalar>(f: &[T], dx: T, sigma: T) -> Vec<T> {
    let half = (T::lit(3.0) * sigma / dx).ceil().to_usize().unwrap_or(0);
    if half == 0 {
        return f.to_vec();
    }
    let kernel: Vec<T> = (0..=half)
        .map(|i| {
            let x = T::from_usize(i) * dx / sigma;
            (-T::lit(0.5) * x * x).exp()
        })
        .collect();
    let n = f.len();
    (0..n)
        .map(|j| {
            let mut acc = T::zero();
            let mut wsum = T::zero();
            let lo = j.saturating_sub(half);
            let hi = (j + half).min(n - 1);
            for i in lo..=hi {
                let w = kernel[if i > j { i - j } else { j - i }];
                acc += w * f[i];
                wsum += w;
            }
            acc / wsum
        })
        .collect()
}

/// Speeds of straight space-time ridges of the smoothed radiation density,
/// extracted with a line (Hough) transform and refined by least squares.
pub fn ridge_speeds<T: Scalar>(traj: &Trajectory<T>, opts: &RidgeOptions<T>) -> Result<Vec<T>> {
    if traj.snapshots.len() < 3 {
        return Err(LabError::InvalidParameter("need at least three snapshots".into()));
    }
    let g = *traj.snapshots[0].grid();
    let dens: Vec<Vec<T>> = traj
        .snapshots
        .iter()
        .map(|s| gaussian_smooth(&ridge_density(s, &opts.vacua), g.dx(), opts.smoothing))
        .collect();
    let top = dens.iter().flatten().copied().fold(T::zero(), T::max);
    if !(top > T::zero()) {
        return Ok(Vec::new());
    }
    let floor = opts.threshold * top;
    let mut points: Vec<(T, T, usize)> = Vec::new();
    for (f, (d, st)) in dens.iter().zip(&traj.snapshots).enumerate() {
        let excluded: Vec<T> = match (&opts.kink_bands, st.kind()) {
            (Some(b), FieldKind::Real) => detect_kinks(st, b)?.into_iter().map(|k| k.position).collect(),
            _ => Vec::new(),
        };
        for k in 1..d.len() - 1 {
            if d[k] > floor && d[k] > d[k - 1] && d[k] >= d[k + 1] {
                let x = g.x(k) + vertex_offset(d[k - 1], d[k], d[k + 1]) * g.dx();
                if excluded.iter().all(|&p| (x - p).abs() > opts.exclusion_radius) {
                    points.push((st.time(), x, f));
                }
            }
        }
    }
    let t0 = traj.snapshots[0].time();
    let t_span = traj.snapshots[traj.snapshots.len() - 1].time() - t0;
    let nv = 999usize;
    let vmax = T::lit(0.999);
    let speed = |i: usize| -vmax + T::lit(2.0) * vmax * T::from_usize(i) / T::from_usize(nv - 1);
    let x_lo = g.x_min() - t_span;
    let nb = ((g.length() + T::lit(2.0) * t_span) / opts.bin_width).ceil().to_usize().unwrap_or(1) + 1;
    let need = (opts.min_fraction * T::from_usize(traj.snapshots.len())).ceil().to_usize().unwrap_or(3).max(3);
    let mut alive = vec![true; points.len()];
    let mut speeds = Vec::new();
    for _ in 0..opts.max_ridges {
        let mut votes = vec![0u32; nv * nb];
        for (p, &(t, x, _)) in points.iter().enumerate() {
            if !alive[p] {
                continue;
            }
            for i in 0..nv {
                let x0 = x - speed(i) * (t - t0);
                let b = ((x0 - x_lo) / opts.bin_width).floor().to_usize().unwrap_or(0).min(nb - 1);
                votes[i * nb + b] += 1;
            }
        }
        let (best, &count) = votes.iter().enumerate().max_by_key(|(_, &v)| v).unwrap();
        if (count as usize) < need {
            break;
        }
        let v0 = speed(best / nb);
        let x0 = x_lo + (T::from_usize(best % nb) + T::lit(0.5)) * opts.bin_width;
        let tol = T::lit(2.0) * opts.bin_width;
        let mut members: Vec<usize> = (0..points.len())
            .filter(|&p| alive[p] && (points[p].1 - x0 - v0 * (points[p].0 - t0)).abs() < tol)
            .collect();
        // one point per frame: the closest to the line
        members.sort_by(|&a, &b| {
            let da = (points[a].1 - x0 - v0 * (points[a].0 - t0)).abs();
            let db = (points[b].1 - x0 - v0 * (points[b].0 - t0)).abs();
            points[a].2.cmp(&points[b].2).then(da.partial_cmp(&db).unwrap())
        });
        members.dedup_by_key(|p| points[*p].2);
        for &p in &members {
            alive[p] = false;
        }
        if members.len() < need {
            continue;
        }
        let ts: Vec<T> = members.iter().map(|&p| points[p].0).collect();
        let xs: Vec<T> = members.iter().map(|&p| points[p].1).collect();
        if let Some((_, v)) = line_fit(&ts, &xs) {
            if v.abs() < T::one() {
                speeds.push(v);
            }
        }
    }
    Ok(speeds)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldFit<T> {
    pub omega: T,
    pub v: T,
    pub q: T,
    pub theta: T,
    /// Phase-space distance `(||dpsi||^2 + ||dpi||^2)^{1/2}` on the fit window.
    pub residual: T,
    /// Same norm of the input on the window.
    pub state_norm: T,
    pub off_manifold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    /// Half width of the comparison window about the initial centre.
    pub radius: T,
    /// Frequency search interval; `None` keeps the table's frequency.
    pub omega_bracket: Option<(T, T)>,
    pub sweeps: usize,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            radius: T::lit(15.0),
            omega_bracket: None,
            sweeps: 14,
        }
    }
}

fn golden<T: Scalar>(mut a: T, mut b: T, f: &mut impl FnMut(T) -> T) -> (T, T) {
    let r = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..40 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

struct FitWorkspace<'a, T: Scalar> {
    xs: Vec<T>,
    w: Vec<T>,
    psi: Vec<Complex<T>>,
    pi: Vec<Complex<T>>,
    table: &'a SolitonFamilyTable<T>,
    cache: Option<SolitaryWaveProfile<T>>,
}

impl<'a, T: Scalar> FitWorkspace<'a, T> {
    fn ensure_profile(&mut self, omega: T) -> Result<()> {
        let hit = self.cache.as_ref().map(|p| p.omega() == omega).unwrap_or(false);
        if !hit {
            let p = match self.table.profile() {
                Some(b) if b.omega() == omega => b.clone(),
                _ => {
                    let m = self.table.model();
                    solve_profile(&m.nonlinearity, m.mass_squared, omega, T::lit(1e-10))?
                }
            };
            self.cache = Some(p);
        }
        Ok(())
    }

    fn misfit(&mut self, p: [T; 4]) -> T {
        let [omega, v, q, theta] = p;
        if !(v.abs() < T::one()) || self.ensure_profile(omega).is_err() {
            return T::infinity();
        }
        let prof = self.cache.as_ref().unwrap();
        let gamma = T::one() / (T::one() - v * v).sqrt();
        let mut acc = T::zero();
        for (k, &x) in self.xs.iter().enumerate() {
            let (a, b) = soliton_point(prof, v, gamma, q, theta, x);
            acc += self.w[k] * ((self.psi[k] - a).norm_sqr() + (self.pi[k] - b).norm_sqr());
        }
        acc
    }
}

fn local_energy_momentum<T: Scalar>(st: &FieldState<T>, model: &ModelSpec<T>, lo: T, hi: T) -> (T, T) {
    let g = st.grid();
    let c = st.to_complex();
    let psi = c.psi().as_complex().unwrap();
    let pi = c.pi().as_complex().unwrap();
    let half = T::lit(0.5);
    let mut e = Vec::with_capacity(psi.len());
    let mut p = Vec::with_capacity(psi.len());
    for k in 0..psi.len() {
        let d = centered_gradient(g, psi, k);
        let s = psi[k].norm_sqr();
        e.push(half * (pi[k].norm_sqr() + d.norm_sqr()) + model.nonlinearity.potential_of(s) + half * model.mass_squared * s);
        p.push(-pi[k].dot_re(d));
    }
    (integrate_window(g, &e, lo, hi), integrate_window(g, &p, lo, hi))
}

/// Least-squares projection onto the boosted solitons of `family`'s model:
/// moment-based initial guess, then coordinate descent with golden-section
/// line searches over `(omega, v, q, theta)`.
pub fn fit_manifold<T: Scalar>(
    state: &FieldState<T>,
    family: &SolitonFamilyTable<T>,
    opts: &FitOptions<T>,
) -> Result<ManifoldFit<T>> {
    let c = state.to_complex();
    let g = *c.grid();
    let psi = c.psi().as_complex().unwrap();
    let pi = c.pi().as_complex().unwrap();
    let (q0, _) = global_soliton_center(&c);
    let (lo, hi) = (q0 - opts.radius, q0 + opts.radius);
    let idx: Vec<usize> = (0..g.n_points()).filter(|&k| g.x(k) >= lo && g.x(k) <= hi).collect();
    if idx.len() < 3 {
        return Err(LabError::InvalidParameter("fit window holds fewer than three nodes".into()));
    }
    let mut ws = FitWorkspace {
        xs: idx.iter().map(|&k| g.x(k)).collect(),
        w: idx.iter().map(|&k| g.weight(k)).collect(),
        psi: idx.iter().map(|&k| psi[k]).collect(),
        pi: idx.iter().map(|&k| pi[k]).collect(),
        table: family,
        cache: None,
    };
    let state_norm = (0..idx.len())
        .map(|k| ws.w[k] * (ws.psi[k].norm_sqr() + ws.pi[k].norm_sqr()))
        .sum::<T>()
        .sqrt();

    // initial guess from moments
    let (e, p) = local_energy_momentum(&c, family.model(), lo, hi);
    let v0 = if e > T::zero() { (p / e).max(-T::lit(0.95)).min(T::lit(0.95)) } else { T::zero() };
    let gamma0 = T::one() / (T::one() - v0 * v0).sqrt();
    let kp = g.nearest(q0);
    let ratio = if psi[kp].norm() > T::zero() { pi[kp] / psi[kp] } else { Complex::new(T::zero(), T::zero()) };
    let table_omega = family.omega();
    let (w_lo, w_hi) = opts.omega_bracket.unwrap_or((table_omega, table_omega));
    let w0 = (-ratio.im / gamma0).max(w_lo).min(w_hi);
    let th0 = psi[kp].arg() - w0 * gamma0 * v0 * (g.x(kp) - q0);
    let mut x = [w0, v0, q0, th0];
    let mut span = [
        (w_hi - w_lo) * T::lit(0.5),
        T::lit(0.05),
        T::lit(2.0) * g.dx().max(T::lit(0.05)),
        T::lit(0.3),
    ];
    let mut best = ws.misfit(x);
    let vmax = T::lit(0.999);
    for _ in 0..opts.sweeps {
        for i in 0..4 {
            if span[i] == T::zero() {
                continue;
            }
            let (mut a, mut b) = (x[i] - span[i], x[i] + span[i]);
            if i == 0 {
                a = a.max(w_lo);
                b = b.min(w_hi);
            }
            if i == 1 {
                a = a.max(-vmax);
                b = b.min(vmax);
            }
            let mut trial = x;
            let (xi, fi) = golden(a, b, &mut |s| {
                trial[i] = s;
                ws.misfit(trial)
            });
            if fi < best {
                best = fi;
                let edge = (xi - a).abs() < span[i] * T::lit(0.05) || (b - xi).abs() < span[i] * T::lit(0.05);
                x[i] = xi;
                if !edge {
                    span[i] *= T::lit(0.5);
                }
            } else {
                span[i] *= T::lit(0.5);
            }
        }
    }
    let residual = best.max(T::zero()).sqrt();
    Ok(ManifoldFit {
        omega: x[0],
        v: x[1],
        q: x[2],
        theta: (x[3] + T::PI()).rem_euclid(T::lit(2.0) * T::PI()) - T::PI(),
        residual,
        state_norm,
        off_manifold: residual > T::lit(0.5) * state_norm,
    })
}

trait RemEuclid {
    fn rem_euclid(self, m: Self) -> Self;
}

impl<T: Scalar> RemEuclid for T {
    fn rem_euclid(self, m: T) -> T {
        let r = self % m;
        if r < T::zero() {
            r + m
        } else {
            r
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport<T> {
    pub times: Vec<T>,
    pub distances: Vec<T>,
    /// Fraction of consecutive records where the distance did not grow.
    pub decreasing_fraction: T,
}

/// Local distance to `limit` on `|x| < radius` at every recorded snapshot.
pub fn convergence_report<T: Scalar>(
    traj: &Trajectory<T>,
    limit: &FieldState<T>,
    radius: T,
) -> Result<ConvergenceReport<T>> {
    let distances = traj
        .snapshots
        .iter()
        .map(|s| local_l2_distance(s, limit, radius))
        .collect::<Result<Vec<T>>>()?;
    let steps = distances.len().saturating_sub(1);
    let down = distances.windows(2).filter(|w| w[1] <= w[0]).count();
    Ok(ConvergenceReport {
        times: traj.snapshots.iter().map(|s| s.time()).collect(),
        decreasing_fraction: if steps == 0 {
            T::one()
        } else {
            T::from_usize(down) / T::from_usize(steps)
        },
        distances,
    })
}
