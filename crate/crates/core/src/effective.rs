//! Energy-momentum relation of the soliton family and the reduced
//! dynamics `Q' = E'(Pi)`, `Pi' = -V'(Q)`.

use crate::diagnostics::{fit_manifold, track_soliton, FitOptions};
use crate::error::{LabError, Result};
use crate::field::{energy, momentum, Grid1D};
use crate::integrate::Trajectory;
use crate::models::{ExternalPotential, ModelSpec};
use crate::scalar::Scalar;
use crate::soliton::{moving_soliton, solve_profile, SolitaryWaveProfile};

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic<T> {
    x: Vec<T>,
    y: Vec<T>,
    d: Vec<T>,
}

impl<T: Scalar> MonotoneCubic<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(LabError::InvalidParameter("need at least two matching knots".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::InvalidParameter("knots must be strictly increasing".into()));
        }
        let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let s: Vec<T> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![T::zero(); n];
        if n == 2 {
            d[0] = s[0];
            d[1] = s[0];
        } else {
            let three = T::lit(3.0);
            for k in 1..n - 1 {
                if s[k - 1] * s[k] <= T::zero() {
                    d[k] = T::zero();
                } else {
                    let w1 = T::lit(2.0) * h[k] + h[k - 1];
                    let w2 = h[k] + T::lit(2.0) * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / s[k - 1] + w2 / s[k]);
                }
            }
            let end = |h0: T, h1: T, s0: T, s1: T| {
                let e = ((T::lit(2.0) * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
                if e * s0 <= T::zero() {
                    T::zero()
                } else if s0 * s1 <= T::zero() && e.abs() > (three * s0).abs() {
                    three * s0
                } else {
                    e
                }
            };
            d[0] = end(h[0], h[1], s[0], s[1]);
            d[n - 1] = end(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn range(&self) -> (T, T) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn segment(&self, t: T) -> (usize, T, T) {
        let n = self.x.len();
        let k = match self.x.iter().position(|&xk| xk > t) {
            Some(0) => 0,
            Some(p) => p - 1,
            None => n - 2,
        }
        .min(n - 2);
        let h = self.x[k + 1] - self.x[k];
        (k, h, (t - self.x[k]) / h)
    }

    pub fn value(&self, t: T) -> T {
        let (k, h, s) = self.segment(t);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let (s2, s3) = (s * s, s * s * s);
        (two * s3 - three * s2 + T::one()) * self.y[k]
            + (s3 - two * s2 + s) * h * self.d[k]
            + (three * s2 - two * s3) * self.y[k + 1]
            + (s3 - s2) * h * self.d[k + 1]
    }

    pub fn derivative(&self, t: T) -> T {
        let (k, h, s) = self.segment(t);
        let s2 = s * s;
        let six = T::lit(6.0);
        ((six * s2 - six * s) * (self.y[k] - self.y[k + 1])) / h
            + (T::lit(3.0) * s2 - T::lit(4.0) * s + T::one()) * self.d[k]
            + (T::lit(3.0) * s2 - T::lit(2.0) * s) * self.d[k + 1]
    }

    /// `int_{x_k}^{x_k + s h}` over segment `k`.
    fn partial(&self, k: usize, s: T) -> T {
        let h = self.x[k + 1] - self.x[k];
        let (s2, s3, s4) = (s * s, s * s * s, s * s * s * s);
        let half = T::lit(0.5);
        let quarter = T::lit(0.25);
        let third = T::one() / T::lit(3.0);
        h * ((s - s3 + half * s4) * self.y[k]
            + (half * s2 - T::lit(2.0) * third * s3 + quarter * s4) * h * self.d[k]
            + (s3 - half * s4) * self.y[k + 1]
            + (quarter * s4 - third * s3) * h * self.d[k + 1])
    }

    fn from_start(&self, t: T) -> T {
        let (k, _, s) = self.segment(t);
        (0..k).map(|j| self.partial(j, T::one())).sum::<T>() + self.partial(k, s)
    }

    /// `int_a^b` of the interpolant.
    pub fn integral(&self, a: T, b: T) -> T {
        self.from_start(b) - self.from_start(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyRow<T> {
    pub v: T,
    pub omega: T,
    pub momentum: T,
    pub energy: T,
}

/// Energy and momentum of boosted solitons at one frequency, sampled in `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonFamilyTable<T> {
    rows: Vec<FamilyRow<T>>,
    model: ModelSpec<T>,
    profile: Option<SolitaryWaveProfile<T>>,
    /// Velocities whose row could not be built, with the reason.
    pub skipped: Vec<(T, String)>,
    velocity_of_p: MonotoneCubic<T>,
    p_of_velocity: MonotoneCubic<T>,
    anchor: usize,
}

impl<T: Scalar> SolitonFamilyTable<T> {
    /// Builds a table from given rows (sorted by `v`; `P` must increase with `v`).
    pub fn from_rows(rows: Vec<FamilyRow<T>>, model: ModelSpec<T>) -> Result<Self> {
        Self::assemble(rows, model, None, Vec::new())
    }

    fn assemble(
        rows: Vec<FamilyRow<T>>,
        model: ModelSpec<T>,
        profile: Option<SolitaryWaveProfile<T>>,
        skipped: Vec<(T, String)>,
    ) -> Result<Self> {
        if rows.len() < 2 {
            return Err(LabError::InvalidParameter("family table needs two rows".into()));
        }
        for w in rows.windows(2) {
            if !(w[1].v > w[0].v) {
                return Err(LabError::InvalidParameter("velocities must increase strictly".into()));
            }
            if !(w[1].momentum > w[0].momentum) {
                return Err(LabError::InvalidParameter(format!(
                    "momentum is not monotone between v = {} and v = {}",
                    w[0].v, w[1].v
                )));
            }
        }
        let ps: Vec<T> = rows.iter().map(|r| r.momentum).collect();
        let vs: Vec<T> = rows.iter().map(|r| r.v).collect();
        let anchor = (0..rows.len()).fold(0, |b, k| if rows[k].momentum.abs() < rows[b].momentum.abs() { k } else { b });
        Ok(Self {
            velocity_of_p: MonotoneCubic::new(ps.clone(), vs.clone())?,
            p_of_velocity: MonotoneCubic::new(vs, ps)?,
            rows,
            model,
            profile,
            skipped,
            anchor,
        })
    }

    pub fn rows(&self) -> &[FamilyRow<T>] {
        &self.rows
    }
    pub fn model(&self) -> &ModelSpec<T> {
        &self.model
    }
    pub fn profile(&self) -> Option<&SolitaryWaveProfile<T>> {
        self.profile.as_ref()
    }
    pub fn omega(&self) -> T {
        self.rows[self.anchor].omega
    }
    pub fn momentum_range(&self) -> (T, T) {
        self.velocity_of_p.range()
    }

    /// `E'(P)`; for a boosted family this is the soliton velocity.
    pub fn velocity_at(&self, p: T) -> T {
        self.velocity_of_p.value(p)
    }

    pub fn momentum_at(&self, v: T) -> T {
        self.p_of_velocity.value(v)
    }

    /// `E(P)`, the integral of `E'` from the row of smallest `|P|`.
    pub fn energy_at(&self, p: T) -> T {
        let a = &self.rows[self.anchor];
        a.energy + self.velocity_of_p.integral(a.momentum, p)
    }

    pub fn rest_energy(&self) -> T {
        self.energy_at(T::zero())
    }
}

/// One row per velocity: energy and momentum of `moving_soliton(omega, v)`
/// with the external potential switched off.
pub fn tabulate_family<T: Scalar>(
    model: &ModelSpec<T>,
    omega: T,
    velocities: &[T],
    grid: Grid1D<T>,
) -> Result<SolitonFamilyTable<T>> {
    let free = model.clone().with_external(ExternalPotential::Zero);
    let profile = solve_profile(&free.nonlinearity, free.mass_squared, omega, T::lit(1e-10))?;
    let mut vs = velocities.to_vec();
    vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vs.dedup();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for v in vs {
        match moving_soliton(&profile, v, T::zero(), T::zero(), grid) {
            Ok(st) => rows.push(FamilyRow {
                v,
                omega,
                momentum: momentum(&st),
                energy: energy(&st, &free)?.total,
            }),
            Err(e) => skipped.push((v, e.to_string())),
        }
    }
    SolitonFamilyTable::assemble(rows, free, Some(profile), skipped)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveMass<T> {
    pub mass: T,
    pub rest_energy: T,
    pub r_squared: T,
    pub rows_used: usize,
}

/// Least-squares fit `E = E0 + P^2 / (2 M)` over the rows with `|v| <= 0.2`.
pub fn fit_effective_mass<T: Scalar>(table: &SolitonFamilyTable<T>) -> Result<EffectiveMass<T>> {
    let sel: Vec<&FamilyRow<T>> = table.rows.iter().filter(|r| r.v.abs() <= T::lit(0.2) + T::epsilon()).collect();
    if sel.len() < 5 {
        return Err(LabError::InvalidParameter(format!(
            "effective mass fit needs five rows with |v| <= 0.2, found {}",
            sel.len()
        )));
    }
    let n = T::from_usize(sel.len());
    let z: Vec<T> = sel.iter().map(|r| r.momentum * r.momentum).collect();
    let e: Vec<T> = sel.iter().map(|r| r.energy).collect();
    let zm = z.iter().copied().sum::<T>() / n;
    let em = e.iter().copied().sum::<T>() / n;
    let szz = z.iter().map(|&a| (a - zm) * (a - zm)).sum::<T>();
    let sze = z.iter().zip(&e).map(|(&a, &b)| (a - zm) * (b - em)).sum::<T>();
    if szz == T::zero() {
        return Err(LabError::FitRejected("momenta do not vary".into()));
    }
    let c2 = sze / szz;
    let c0 = em - c2 * zm;
    let ss_tot = e.iter().map(|&b| (b - em) * (b - em)).sum::<T>();
    let ss_res = z.iter().zip(&e).map(|(&a, &b)| (b - c0 - c2 * a).powi(2)).sum::<T>();
    let r_squared = if ss_tot == T::zero() { T::one() } else { T::one() - ss_res / ss_tot };
    if r_squared < T::lit(0.99) || !(c2 > T::zero()) {
        return Err(LabError::FitRejected(format!("quadratic fit R^2 = {r_squared}")));
    }
    Ok(EffectiveMass {
        mass: T::one() / (T::lit(2.0) * c2),
        rest_energy: c0,
        r_squared,
        rows_used: sel.len(),
    })
}

/// Potential felt by the collective coordinate.
pub trait EffectivePotential<T> {
    fn value(&self, q: T) -> T;
    fn derivative(&self, q: T) -> T;
}

/// The external potential evaluated at the soliton centre.
impl<T: Scalar> EffectivePotential<T> for ExternalPotential<T> {
    fn value(&self, q: T) -> T {
        ExternalPotential::value(self, q)
    }
    fn derivative(&self, q: T) -> T {
        ExternalPotential::derivative(self, q)
    }
}

/// `V_eff(Q) = (1/2) int V(x) |phi(gamma (x - Q))|^2 dx`, the coupling energy of
/// a soliton of fixed shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonCoupledPotential<T> {
    external: ExternalPotential<T>,
    /// Quadrature offsets `y` and weights `h phi(gamma y)^2 / 2`.
    nodes: Vec<(T, T)>,
    /// For a cosine, `(1/2) int cos(k y) phi^2 dy`.
    cosine_factor: T,
}

impl<T: Scalar> SolitonCoupledPotential<T> {
    pub fn new(external: ExternalPotential<T>, profile: &SolitaryWaveProfile<T>, gamma: T) -> Self {
        let h = T::lit(0.02);
        let reach = profile.extent() / gamma;
        let n = (reach / h).floor().to_usize().unwrap_or(0);
        let mut nodes = Vec::with_capacity(2 * n + 1);
        let half = T::lit(0.5);
        for i in 0..=2 * n {
            let y = h * (T::from_usize(i) - T::from_usize(n));
            let f = profile.value(gamma * y);
            let w = if i == 0 || i == 2 * n { half * h } else { h };
            if f * f > T::lit(1e-30) {
                nodes.push((y, half * w * f * f));
            }
        }
        let cosine_factor = match external {
            ExternalPotential::Cosine { wavenumber, .. } => {
                nodes.iter().map(|&(y, w)| w * (wavenumber * y).cos()).sum()
            }
            _ => T::zero(),
        };
        Self {
            external,
            nodes,
            cosine_factor,
        }
    }

    /// Ratio `V_eff / V` for a cosine potential.
    pub fn cosine_factor(&self) -> T {
        self.cosine_factor
    }
}

impl<T: Scalar> EffectivePotential<T> for SolitonCoupledPotential<T> {
    fn value(&self, q: T) -> T {
        match self.external {
            ExternalPotential::Zero => T::zero(),
            ExternalPotential::Cosine { .. } => self.cosine_factor * self.external.value(q),
            _ => self.nodes.iter().map(|&(y, w)| w * self.external.value(q + y)).sum(),
        }
    }
    fn derivative(&self, q: T) -> T {
        match self.external {
            ExternalPotential::Zero => T::zero(),
            ExternalPotential::Cosine { .. } => self.cosine_factor * self.external.derivative(q),
            _ => self.nodes.iter().map(|&(y, w)| w * self.external.derivative(q + y)).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveTrajectory<T> {
    pub times: Vec<T>,
    pub q: Vec<T>,
    pub pi: Vec<T>,
    /// `E(Pi) + V(Q)` along the run.
    pub hamiltonian: Vec<T>,
}

impl<T: Scalar> EffectiveTrajectory<T> {
    /// Linear interpolation of `(Q, Pi)` at time `t`.
    pub fn at(&self, t: T) -> (T, T) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (self.q[0], self.pi[0]);
        }
        let k = match self.times.iter().position(|&s| s > t) {
            Some(p) => p - 1,
            None => return (self.q[n - 1], self.pi[n - 1]),
        };
        let f = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        (
            self.q[k] + f * (self.q[k + 1] - self.q[k]),
            self.pi[k] + f * (self.pi[k + 1] - self.pi[k]),
        )
    }
}

/// Classic fourth-order Runge-Kutta for `Q' = E'(Pi)`, `Pi' = -V'(Q)`.
pub fn integrate_effective<T: Scalar>(
    table: &SolitonFamilyTable<T>,
    potential: &dyn EffectivePotential<T>,
    q0: T,
    pi0: T,
    dt: T,
    t_end: T,
) -> Result<EffectiveTrajectory<T>> {
    if !(dt > T::zero()) || t_end < T::zero() {
        return Err(LabError::InvalidParameter("need dt > 0 and t_end >= 0".into()));
    }
    let (lo, hi) = table.momentum_range();
    let mut time = T::zero();
    let check = |p: T, time: T| {
        if p < lo || p > hi {
            Err(LabError::OutOfTable {
                value: p.as_f64(),
                lo: lo.as_f64(),
                hi: hi.as_f64(),
                time: time.as_f64(),
            })
        } else {
            Ok(())
        }
    };
    check(pi0, time)?;
    let steps = (t_end / dt).round().to_usize().unwrap_or(0);
    let h_of = |q: T, p: T| table.energy_at(p) + potential.value(q);
    let mut out = EffectiveTrajectory {
        times: vec![time],
        q: vec![q0],
        pi: vec![pi0],
        hamiltonian: vec![h_of(q0, pi0)],
    };
    let (mut q, mut p) = (q0, pi0);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let sixth = T::one() / T::lit(6.0);
    for i in 1..=steps {
        let k1q = table.velocity_at(p);
        let k1p = -potential.derivative(q);
        let p2 = p + half * dt * k1p;
        check(p2, time)?;
        let k2q = table.velocity_at(p2);
        let k2p = -potential.derivative(q + half * dt * k1q);
        let p3 = p + half * dt * k2p;
        check(p3, time)?;
        let k3q = table.velocity_at(p3);
        let k3p = -potential.derivative(q + half * dt * k2q);
        let p4 = p + dt * k3p;
        check(p4, time)?;
        let k4q = table.velocity_at(p4);
        let k4p = -potential.derivative(q + dt * k3q);
        q += dt * sixth * (k1q + two * (k2q + k3q) + k4q);
        p += dt * sixth * (k1p + two * (k2p + k3p) + k4p);
        time = dt * T::from_usize(i);
        check(p, time)?;
        out.times.push(time);
        out.q.push(q);
        out.pi.push(p);
        out.hamiltonian.push(h_of(q, p));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticReport<T> {
    pub times: Vec<T>,
    pub q_field: Vec<T>,
    pub q_effective: Vec<T>,
    /// Momentum of the fitted soliton, read off the table at the fitted velocity.
    pub p_field: Vec<T>,
    pub p_effective: Vec<T>,
    pub widths: Vec<T>,
    pub sup_q: T,
    pub sup_p: T,
    /// Set when the soliton could no longer be followed.
    pub truncated_at: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticOptions<T> {
    /// Tracking stops when the peak modulus drops below this.
    pub min_peak: T,
    /// Fit every n-th snapshot for the momentum comparison (0 disables fits).
    pub fit_every: usize,
    pub fit: FitOptions<T>,
}

impl<T: Scalar> Default for AdiabaticOptions<T> {
    fn default() -> Self {
        Self {
            min_peak: T::lit(0.05),
            fit_every: 1,
            fit: FitOptions::default(),
        }
    }
}

/// Follows the soliton through a field run and compares it with the reduced
/// trajectory at the recorded times.
pub fn compare_adiabatic<T: Scalar>(
    field: &Trajectory<T>,
    effective: &EffectiveTrajectory<T>,
    family: &SolitonFamilyTable<T>,
    opts: &AdiabaticOptions<T>,
) -> Result<AdiabaticReport<T>> {
    let tr = track_soliton(field, effective.q[0], opts.min_peak)?;
    let mut rep = AdiabaticReport {
        times: Vec::new(),
        q_field: Vec::new(),
        q_effective: Vec::new(),
        p_field: Vec::new(),
        p_effective: Vec::new(),
        widths: Vec::new(),
        sup_q: T::zero(),
        sup_p: T::zero(),
        truncated_at: tr.lost_at,
    };
    let (p_lo, p_hi) = family.momentum_range();
    for (i, &t) in tr.times.iter().enumerate() {
        let (qe, pe) = effective.at(t);
        rep.times.push(t);
        rep.q_field.push(tr.centers[i]);
        rep.q_effective.push(qe);
        rep.widths.push(tr.widths[i]);
        rep.sup_q = rep.sup_q.max((tr.centers[i] - qe).abs());
        if opts.fit_every > 0 && i % opts.fit_every == 0 {
            let fit = fit_manifold(&field.snapshots[i], family, &opts.fit)?;
            let vlo = family.rows()[0].v;
            let vhi = family.rows()[family.rows().len() - 1].v;
            let p = family.momentum_at(fit.v.max(vlo).min(vhi)).max(p_lo).min(p_hi);
            rep.p_field.push(p);
            rep.p_effective.push(pe);
            rep.sup_p = rep.sup_p.max((p - pe).abs());
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::measure_oscillation;
    use crate::integrate::{run, Boundary, IntegratorConfig};
    use crate::models::Nonlinearity;

    fn grid() -> Grid1D<f64> {
        Grid1D::<f64>::with_spacing(-40.0, 40.0, 0.02).unwrap()
    }

    fn row2() -> ModelSpec<f64> {
        ModelSpec::soliton(Nonlinearity::row2(), ExternalPotential::Zero)
    }

    fn velocities() -> Vec<f64> {
        (-10..=10).map(|i| 0.05 * i as f64).collect()
    }

    #[test]
    fn monotone_cubic_basics() {
        let x: Vec<f64> = (0..8).map(|k| k as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|&t| t * t * t).collect();
        let m = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((m.value(*a) - b).abs() < 1e-12);
        }
        // monotone data stay monotone
        let mut last = m.value(0.0);
        for k in 1..350 {
            let v = m.value(k as f64 * 0.01);
            assert!(v >= last);
            last = v;
        }
        // integral against the quadrature of the interpolant itself
        let n = 20000;
        let h = 3.5 / n as f64;
        let quad: f64 = (0..n).map(|k| m.value((k as f64 + 0.5) * h)).sum::<f64>() * h;
        assert!((m.integral(0.0, 3.5) - quad).abs() < 1e-6);
        let fd = (m.value(1.3 + 1e-6) - m.value(1.3 - 1e-6)) / 2e-6;
        assert!((m.derivative(1.3) - fd).abs() < 1e-6);
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn family_symmetry_and_invariant_mass() {
        let t = tabulate_family(&row2(), 0.7, &velocities(), grid()).unwrap();
        let rows = t.rows();
        let mid = rows.len() / 2;
        assert_eq!(rows[mid].v, 0.0);
        assert!(rows[mid].momentum.abs() < 1e-12);
        for k in 0..mid {
            let (a, b) = (rows[k], rows[rows.len() - 1 - k]);
            assert!((a.energy - b.energy).abs() < 1e-6);
            assert!((a.momentum + b.momentum).abs() < 1e-6);
        }
        let e0 = rows[mid].energy;
        for r in rows {
            let inv = (r.energy * r.energy - r.momentum * r.momentum).sqrt();
            assert!((inv / e0 - 1.0).abs() < 0.01);
        }
        // E obtained by integrating E' reproduces the tabulated energies
        for r in rows {
            assert!((t.energy_at(r.momentum) / r.energy - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn synthetic_quadratic_mass() {
        let m = 1.7;
        let rows: Vec<FamilyRow<f64>> = (-5..=5)
            .map(|i| {
                let p = 0.1 * i as f64;
                FamilyRow {
                    v: p / m,
                    omega: 0.6,
                    momentum: p,
                    energy: 2.0 + p * p / (2.0 * m),
                }
            })
            .collect();
        let t = SolitonFamilyTable::from_rows(rows, row2()).unwrap();
        let fit = fit_effective_mass(&t).unwrap();
        assert!((fit.mass - m).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relativistic_mass_and_fit_stability() {
        let vs: Vec<f64> = (-8..=8).map(|i| 0.025 * i as f64).collect();
        let t = tabulate_family(&row2(), 0.7, &vs, grid()).unwrap();
        let fit = fit_effective_mass(&t).unwrap();
        let e0 = t.rows()[8].energy;
        assert!((fit.mass / e0 - 1.0).abs() < 0.02);
        assert!(fit.r_squared > 0.999);
        let half: Vec<f64> = vs.iter().step_by(2).copied().collect();
        let t2 = tabulate_family(&row2(), 0.7, &half, grid()).unwrap();
        let fit2 = fit_effective_mass(&t2).unwrap();
        assert!((fit2.mass / fit.mass - 1.0).abs() < 0.005);
    }

    #[test]
    fn non_monotone_rows_are_rejected() {
        let rows = vec![
            FamilyRow { v: 0.0, omega: 0.6, momentum: 0.0, energy: 1.0 },
            FamilyRow { v: 0.1, omega: 0.6, momentum: -0.1, energy: 1.0 },
        ];
        assert!(SolitonFamilyTable::from_rows(rows, row2()).is_err());
    }

    #[test]
    fn free_motion_is_uniform() {
        let t = tabulate_family(&row2(), 0.7, &velocities(), grid()).unwrap();
        let p0 = t.momentum_at(0.3);
        let tr = integrate_effective(&t, &ExternalPotential::Zero, 1.0, p0, 0.01, 50.0).unwrap();
        let v = t.velocity_at(p0);
        for (s, q) in tr.times.iter().zip(&tr.q) {
            assert!((q - 1.0 - v * s).abs() < 1e-8);
        }
    }

    #[test]
    fn cosine_oscillation_conserves_energy() {
        let vs: Vec<f64> = (-18..=18).map(|i| 0.05 * i as f64).collect();
        let t = tabulate_family(&row2(), 0.7, &vs, grid()).unwrap();
        let v = ExternalPotential::slow_cosine();
        let tr = integrate_effective(&t, &v, 5.0, 0.0, 0.01, 200.0).unwrap();
        let h0 = tr.hamiltonian[0];
        let drift = tr.hamiltonian.iter().fold(0.0f64, |a, h| a.max((h - h0).abs()));
        assert!(drift < 1e-8 * 200.0, "{drift}");
        // turning points where Pi changes sign
        let e0 = t.rest_energy();
        for k in 1..tr.pi.len() {
            if tr.pi[k - 1] * tr.pi[k] < 0.0 {
                let qt = tr.q[k];
                assert!((e0 + v.value(5.0) - (e0 + v.value(qt))).abs() < 1e-6);
                assert!((qt.abs() - 5.0).abs() < 0.01);
            }
        }
        assert!(tr.q.iter().all(|q| q.abs() <= 5.0 + 1e-6));
    }

    #[test]
    fn harmonic_limit_frequency() {
        let t = tabulate_family(&row2(), 0.7, &velocities(), grid()).unwrap();
        let v = ExternalPotential::slow_cosine();
        let tr = integrate_effective(&t, &v, 0.05, 0.0, 0.02, 600.0).unwrap();
        let est = measure_oscillation(&tr.times, &tr.q).unwrap();
        let mass = fit_effective_mass(&t).unwrap().mass;
        let vpp = 0.2 * 0.31 * 0.31;
        assert!((est.frequency / (vpp / mass).sqrt() - 1.0).abs() < 0.01);
    }

    #[test]
    fn leaving_the_table_aborts() {
        let t = tabulate_family(&row2(), 0.7, &[-0.1, 0.0, 0.1], grid()).unwrap();
        let r = integrate_effective(&t, &ExternalPotential::slow_cosine(), 5.0, 0.0, 0.01, 100.0);
        assert!(matches!(r, Err(LabError::OutOfTable { .. })));
    }

    #[test]
    fn coupled_potential_of_cosine() {
        let t = tabulate_family(&row2(), 0.7, &velocities(), grid()).unwrap();
        let p = t.profile().unwrap();
        let v = ExternalPotential::slow_cosine();
        let c = SolitonCoupledPotential::new(v.clone(), p, 1.0);
        let direct = SolitonCoupledPotential::new(
            ExternalPotential::tabulate(&Grid1D::<f64>::with_spacing(-80.0, 80.0, 0.01).unwrap(), |x| v.value(x)),
            p,
            1.0,
        );
        for q in [0.0, 1.3, 5.0] {
            assert!((c.value(q) - direct.value(q)).abs() < 1e-5);
        }
        assert!(c.cosine_factor() > 0.0 && c.cosine_factor() < 0.5 * p.norm_squared());
    }

    #[test]
    fn free_field_run_matches_free_motion() {
        let g = Grid1D::<f64>::with_spacing(-60.0, 60.0, 0.05).unwrap();
        let t = tabulate_family(&row2(), 0.7, &velocities(), g).unwrap();
        let p = t.profile().unwrap();
        let st = moving_soliton(p, 0.2, -10.0, 0.0, g).unwrap();
        let cfg = IntegratorConfig::new(0.02, Boundary::Sponge { width: 10.0, strength: 5.0 }, 100);
        let traj = run(&st, &row2(), &cfg, 100.0, &[]).unwrap();
        let eff = integrate_effective(&t, &ExternalPotential::Zero, -10.0, t.momentum_at(0.2), 0.02, 100.0).unwrap();
        let opts = AdiabaticOptions { fit_every: 10, ..AdiabaticOptions::default() };
        let rep = compare_adiabatic(&traj, &eff, &t, &opts).unwrap();
        assert!(rep.truncated_at.is_none());
        assert!(rep.sup_q < 5.0 * g.dx(), "{}", rep.sup_q);
        assert!(rep.sup_p < 1e-2, "{}", rep.sup_p);
    }
}
