//! Exact kinks, boosted kinks and numerically computed solitary-wave profiles.

use num_complex::Complex;

use crate::error::{LabError, Result};
use crate::field::{FieldState, Grid1D};
use crate::models::Nonlinearity;
use crate::scalar::Scalar;

/// Frequency of the even internal mode of the static kink, `sqrt(3/2)`.
pub fn internal_mode_frequency<T: Scalar>() -> T {
    T::lit(1.5).sqrt()
}

/// Full width between the points where the static kink crosses `-1/2` and `1/2`:
/// `2 sqrt(2) artanh(1/2)`.
pub fn static_kink_width<T: Scalar>() -> T {
    T::lit(2.0) * T::SQRT_2() * T::lit(0.5).atanh()
}

/// `S(x) = tanh(x / sqrt 2)`.
#[inline]
pub fn kink_profile<T: Scalar>(x: T) -> T {
    (x / T::SQRT_2()).tanh()
}

/// Odd eigenfunction of `-d^2/dx^2 + 2 - 3 sech^2(x / sqrt 2)` with eigenvalue 3/2.
#[inline]
pub fn internal_mode_shape<T: Scalar>(x: T) -> T {
    let z = x / T::SQRT_2();
    z.tanh() / z.cosh()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinkSpec<T> {
    orientation: T,
    reflection: T,
    position: T,
    velocity: T,
}

impl<T: Scalar> KinkSpec<T> {
    pub fn new(orientation: T, reflection: T, position: T, velocity: T) -> Result<Self> {
        let unit = |s: T| (s.abs() - T::one()).abs() < T::epsilon();
        if !unit(orientation) || !unit(reflection) {
            return Err(LabError::InvalidParameter(
                "orientation and reflection must be +1 or -1".into(),
            ));
        }
        if !(velocity.abs() < T::one()) {
            return Err(LabError::InvalidParameter(format!(
                "kink velocity must satisfy |v| < 1, got {velocity}"
            )));
        }
        Ok(Self {
            orientation: orientation.signum(),
            reflection: reflection.signum(),
            position,
            velocity,
        })
    }

    /// Rising kink centred at `position` moving with `velocity`.
    pub fn moving(position: T, velocity: T) -> Result<Self> {
        Self::new(T::one(), T::one(), position, velocity)
    }

    pub fn orientation(&self) -> T {
        self.orientation
    }
    pub fn reflection(&self) -> T {
        self.reflection
    }
    pub fn position(&self) -> T {
        self.position
    }
    pub fn velocity(&self) -> T {
        self.velocity
    }

    pub fn gamma(&self) -> T {
        T::one() / (T::one() - self.velocity * self.velocity).sqrt()
    }

    /// Lab-frame centre at time `t`.
    pub fn center(&self, t: T) -> T {
        self.reflection * (self.position + self.velocity * t)
    }
}

/// `psi = o tanh(gamma (r x - a - v t) / sqrt 2)` and its exact time derivative.
pub fn kink<T: Scalar>(spec: &KinkSpec<T>, grid: Grid1D<T>, t: T) -> FieldState<T> {
    let g = spec.gamma();
    let s2 = T::SQRT_2();
    let o = spec.orientation;
    FieldState::from_fn_real(
        grid,
        t,
        |x| o * kink_profile(g * (spec.reflection * x - spec.position - spec.velocity * t)),
        |x| {
            let xi = g * (spec.reflection * x - spec.position - spec.velocity * t);
            let c = (xi / s2).cosh();
            -o * g * spec.velocity / (s2 * c * c)
        },
    )
}

/// Boosted kink carrying a small internal-mode oscillation,
/// `o [S(xi) + eps phi_2(xi) cos(omega_2 tau)]` with `xi = gamma (y - a - v t)`,
/// `tau = gamma (t - v (y - a))`, `y = r x`.
pub fn kink_with_internal_mode<T: Scalar>(
    spec: &KinkSpec<T>,
    amplitude: T,
    grid: Grid1D<T>,
    t: T,
) -> FieldState<T> {
    let g = spec.gamma();
    let v = spec.velocity;
    let s2 = T::SQRT_2();
    let w2 = internal_mode_frequency::<T>();
    let o = spec.orientation;
    let coords = move |x: T| {
        let y = spec.reflection * x;
        (g * (y - spec.position - v * t), g * (t - v * (y - spec.position)))
    };
    FieldState::from_fn_real(
        grid,
        t,
        |x| {
            let (xi, tau) = coords(x);
            o * (kink_profile(xi) + amplitude * internal_mode_shape(xi) * (w2 * tau).cos())
        },
        |x| {
            let (xi, tau) = coords(x);
            let z = xi / s2;
            let sech = T::one() / z.cosh();
            let th = z.tanh();
            let ds = sech * sech / s2;
            let dm = sech * (sech * sech - th * th) / s2;
            let m = th * sech;
            o * (-ds * g * v
                + amplitude * (-dm * g * v * (w2 * tau).cos() - m * w2 * g * (w2 * tau).sin()))
        },
    )
}

/// Tuning knobs of the profile integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions<T> {
    /// Integration step on the half line.
    pub step: T,
    /// Integration stops once `phi / phi_peak` drops below this.
    pub tail_cut: T,
    /// Number of samples used to bracket the turning point.
    pub scan_points: usize,
}

impl<T: Scalar> Default for ProfileOptions<T> {
    fn default() -> Self {
        Self {
            step: T::lit(1e-3),
            tail_cut: T::lit(1e-13),
            scan_points: 4000,
        }
    }
}

/// Even, positive, decaying solution of `phi'' = (m^2 - omega^2) phi - F(phi)`.
///
/// Samples live on the half line `x = k * step`, `k = 0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitaryWaveProfile<T> {
    omega: T,
    mass_squared: T,
    nonlinearity: Nonlinearity<T>,
    step: T,
    phi: Vec<T>,
    dphi: Vec<T>,
    peak_amplitude: T,
    decay_rate: T,
    half_amplitude_width: T,
    residual: T,
}

/// Effective potential `U_e(phi) = U(phi^2) - U(0) + (m^2 - omega^2) phi^2 / 2`,
/// written as `phi^2 w(phi) / 2`.
#[derive(Debug, Clone)]
struct EffectivePotential<'a, T> {
    nl: &'a Nonlinearity<T>,
    kappa2: T,
}

impl<'a, T: Scalar> EffectivePotential<'a, T> {
    /// `w = 2 U_e / phi^2`.
    #[inline]
    fn w(&self, phi: T) -> T {
        self.kappa2 + T::lit(2.0) * self.nl.reduced_potential(phi * phi)
    }
    #[inline]
    fn value(&self, phi: T) -> T {
        T::lit(0.5) * phi * phi * self.w(phi)
    }
    /// `dU_e/dphi = (m^2 - omega^2 - g(phi^2)) phi`.
    #[inline]
    fn slope(&self, phi: T) -> T {
        (self.kappa2 - self.nl.gain(phi * phi)) * phi
    }

    fn scan_limit(&self) -> T {
        match *self.nl {
            Nonlinearity::Polynomial { a, m, b, n } => {
                T::lit(2.0) * (b / a).powf(T::one() / T::from_usize(2 * (m - n) as usize))
            }
            Nonlinearity::Cubic { sign } if sign > T::zero() => {
                T::lit(2.0) * (T::lit(2.0) * self.kappa2.max(T::zero()) / sign).sqrt()
            }
            _ => T::lit(10.0),
        }
    }
}

impl<T: Scalar> SolitaryWaveProfile<T> {
    pub fn omega(&self) -> T {
        self.omega
    }
    pub fn mass_squared(&self) -> T {
        self.mass_squared
    }
    pub fn nonlinearity(&self) -> &Nonlinearity<T> {
        &self.nonlinearity
    }
    pub fn step(&self) -> T {
        self.step
    }
    /// Profile values on the half grid.
    pub fn samples(&self) -> &[T] {
        &self.phi
    }
    pub fn derivative_samples(&self) -> &[T] {
        &self.dphi
    }
    pub fn peak_amplitude(&self) -> T {
        self.peak_amplitude
    }
    pub fn decay_rate(&self) -> T {
        self.decay_rate
    }
    pub fn half_amplitude_width(&self) -> T {
        self.half_amplitude_width
    }
    /// Sup-norm residual of the stationary ODE on the sample grid.
    pub fn residual(&self) -> T {
        self.residual
    }
    /// Largest sampled `|x|`.
    pub fn extent(&self) -> T {
        self.step * T::from_usize(self.phi.len() - 1)
    }

    /// `(x, phi)` pairs over `[-extent, extent]`.
    pub fn full_samples(&self) -> Vec<(T, T)> {
        let n = self.phi.len();
        let mut out = Vec::with_capacity(2 * n - 1);
        for k in (1..n).rev() {
            out.push((-self.step * T::from_usize(k), self.phi[k]));
        }
        for k in 0..n {
            out.push((self.step * T::from_usize(k), self.phi[k]));
        }
        out
    }

    fn hermite(&self, r: T) -> (T, T) {
        let h = self.step;
        let n = self.phi.len();
        let c = r / h;
        let j = c.floor().to_usize().unwrap_or(usize::MAX);
        if j + 1 >= n {
            let last = self.phi[n - 1];
            let d = r - self.extent();
            let v = last * (-self.decay_rate * d).exp();
            return (v, -self.decay_rate * v);
        }
        let s = c - T::from_usize(j);
        let (p0, p1) = (self.phi[j], self.phi[j + 1]);
        let (m0, m1) = (self.dphi[j] * h, self.dphi[j + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        let v = h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1;
        let d00 = T::lit(6.0) * s2 - T::lit(6.0) * s;
        let d10 = three * s2 - T::lit(4.0) * s + T::one();
        let d01 = -d00;
        let d11 = three * s2 - two * s;
        let d = (d00 * p0 + d10 * m0 + d01 * p1 + d11 * m1) / h;
        (v, d)
    }

    /// `phi(x)` for any real `x` (cubic Hermite inside, exponential tail outside).
    pub fn value(&self, x: T) -> T {
        self.hermite(x.abs()).0
    }

    /// `phi'(x)`.
    pub fn derivative(&self, x: T) -> T {
        let (_, d) = self.hermite(x.abs());
        if x < T::zero() {
            -d
        } else {
            d
        }
    }

    /// `\int phi^2 dx` over the line.
    pub fn norm_squared(&self) -> T {
        let h = self.step;
        let n = self.phi.len();
        let mut acc = T::zero();
        for k in 0..n {
            let w = if k == 0 || k + 1 == n { T::lit(0.5) } else { T::one() };
            acc += w * self.phi[k] * self.phi[k];
        }
        T::lit(2.0) * acc * h
    }

    fn check_cover(&self, needed: T) -> Result<()> {
        let covered = self.extent();
        let edge = self.phi[self.phi.len() - 1] / self.peak_amplitude;
        if needed > covered && edge > T::lit(1e-10) {
            return Err(LabError::ProfileTooNarrow {
                needed: needed.as_f64(),
                covered: covered.as_f64(),
            });
        }
        Ok(())
    }
}

/// Computes the solitary-wave profile at frequency `omega` with default options.
pub fn solve_profile<T: Scalar>(
    nl: &Nonlinearity<T>,
    mass_squared: T,
    omega: T,
    tol: T,
) -> Result<SolitaryWaveProfile<T>> {
    solve_profile_with(nl, mass_squared, omega, tol, &ProfileOptions::default())
}

pub fn solve_profile_with<T: Scalar>(
    nl: &Nonlinearity<T>,
    mass_squared: T,
    omega: T,
    tol: T,
    opts: &ProfileOptions<T>,
) -> Result<SolitaryWaveProfile<T>> {
    let kappa2 = mass_squared - omega * omega;
    let no_wave = |reason: &str| LabError::NoSolitaryWave {
        omega: omega.as_f64(),
        reason: reason.to_string(),
    };
    if !(kappa2 > T::zero()) {
        return Err(no_wave("omega^2 must be below the mass gap"));
    }
    let ue = EffectivePotential { nl, kappa2 };
    let w0 = ue.w(T::zero());
    if !(w0 > T::zero()) {
        return Err(no_wave("zero is not a strict minimum of the effective potential"));
    }

    // bracket the first positive root of U_e
    let limit = ue.scan_limit();
    let n_scan = opts.scan_points.max(16);
    let mut bracket = None;
    let mut prev = T::zero();
    for i in 1..=n_scan {
        let phi = limit * T::from_usize(i) / T::from_usize(n_scan);
        if ue.w(phi) < T::zero() {
            bracket = Some((prev, phi));
            break;
        }
        prev = phi;
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| no_wave("effective potential has no turning point"))?;
    for _ in 0..200 {
        if hi - lo <= tol * T::lit(1e-3) {
            break;
        }
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ue.w(mid) < T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let peak = if ue.value(lo).abs() <= ue.value(hi).abs() { lo } else { hi };
    if !(ue.slope(peak) < T::zero()) {
        return Err(no_wave("degenerate turning point"));
    }

    // U_e must rise then fall exactly once on (0, peak)
    let mut changes = 0;
    let mut last = ue.slope(peak * T::lit(1e-6)) > T::zero();
    for i in 1..n_scan {
        let phi = peak * T::from_usize(i) / T::from_usize(n_scan);
        let up = ue.slope(phi) > T::zero();
        if up != last {
            changes += 1;
            last = up;
        }
    }
    if changes > 1 {
        return Err(LabError::MultiBump {
            omega: omega.as_f64(),
        });
    }

    let h = opts.step;
    let max_steps = 4_000_000usize;
    let mut phi = vec![peak];
    let mut dphi = vec![T::zero()];

    // near the peak: phi'' = U_e'(phi)
    let switch = peak * T::lit(0.5);
    let (mut p, mut q) = (peak, T::zero());
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    while p > switch {
        let f = |p: T| ue.slope(p);
        let (k1p, k1q) = (q, f(p));
        let (k2p, k2q) = (q + half * h * k1q, f(p + half * h * k1p));
        let (k3p, k3q) = (q + half * h * k2q, f(p + half * h * k2p));
        let (k4p, k4q) = (q + h * k3q, f(p + h * k3p));
        p += h * sixth * (k1p + T::lit(2.0) * (k2p + k3p) + k4p);
        q += h * sixth * (k1q + T::lit(2.0) * (k2q + k3q) + k4q);
        phi.push(p);
        dphi.push(q);
        if phi.len() > max_steps {
            return Err(no_wave("profile does not decay"));
        }
    }

    // tail: (ln phi)' = -sqrt(w(phi)), stable outward
    let speed = |u: T| -ue.w(u.exp()).max(T::zero()).sqrt();
    let mut u = p.ln();
    let stop = (peak * opts.tail_cut).ln();
    while u > stop {
        let k1 = speed(u);
        let k2 = speed(u + half * h * k1);
        let k3 = speed(u + half * h * k2);
        let k4 = speed(u + h * k3);
        u += h * sixth * (k1 + T::lit(2.0) * (k2 + k3) + k4);
        let v = u.exp();
        phi.push(v);
        dphi.push(v * speed(u));
        if phi.len() > max_steps {
            break;
        }
    }

    // stationary-equation residual from a fourth-order difference of phi'
    let mut residual = T::zero();
    let twelve_h = T::lit(12.0) * h;
    for k in 2..phi.len().saturating_sub(2) {
        let d2 = (-dphi[k + 2] + T::lit(8.0) * (dphi[k + 1] - dphi[k - 1]) + dphi[k - 2]) / twelve_h;
        let r = (d2 - ue.slope(phi[k])).abs();
        if r > residual {
            residual = r;
        }
    }
    let bound = T::lit(10.0) * tol;
    if residual > bound {
        return Err(LabError::ProfileResidual {
            residual: residual.as_f64(),
            bound: bound.as_f64(),
        });
    }

    let mut profile = SolitaryWaveProfile {
        omega,
        mass_squared,
        nonlinearity: nl.clone(),
        step: h,
        phi,
        dphi,
        peak_amplitude: peak,
        decay_rate: w0.sqrt(),
        half_amplitude_width: T::zero(),
        residual,
    };
    profile.half_amplitude_width = T::lit(2.0) * half_level_crossing(&profile, peak * half);
    Ok(profile)
}

/// Smallest `x > 0` with `phi(x) = level`.
fn half_level_crossing<T: Scalar>(p: &SolitaryWaveProfile<T>, level: T) -> T {
    let k = p.phi.iter().position(|&v| v < level).unwrap_or(p.phi.len() - 1);
    let h = p.step;
    let mut lo = h * T::from_usize(k.saturating_sub(1));
    let mut hi = h * T::from_usize(k);
    for _ in 0..80 {
        let mid = T::lit(0.5) * (lo + hi);
        if p.value(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    T::lit(0.5) * (lo + hi)
}

/// Lorentz-boosted standing wave
/// `psi = e^{i theta} e^{-i omega gamma (t - v (x - q))} phi(gamma (x - q - v t))` at `t = 0`,
/// with `pi` its exact time derivative.
pub fn moving_soliton<T: Scalar>(
    profile: &SolitaryWaveProfile<T>,
    v: T,
    q: T,
    theta: T,
    grid: Grid1D<T>,
) -> Result<FieldState<T>> {
    if !(v.abs() < T::one()) {
        return Err(LabError::InvalidParameter(format!(
            "soliton velocity must satisfy |v| < 1, got {v}"
        )));
    }
    let gamma = T::one() / (T::one() - v * v).sqrt();
    let reach = (grid.x_min() - q).abs().max((grid.x_max() - q).abs()) * gamma;
    profile.check_cover(reach)?;
    let xs = grid.xs();
    let mut psi = Vec::with_capacity(xs.len());
    let mut pi = Vec::with_capacity(xs.len());
    for &x in &xs {
        let (a, b) = soliton_point(profile, v, gamma, q, theta, x);
        psi.push(a);
        pi.push(b);
    }
    FieldState::complex(grid, psi, pi, T::zero())
}

/// `(psi, pi)` of the boosted wave at one point; `gamma` must match `v`.
pub(crate) fn soliton_point<T: Scalar>(
    profile: &SolitaryWaveProfile<T>,
    v: T,
    gamma: T,
    q: T,
    theta: T,
    x: T,
) -> (Complex<T>, Complex<T>) {
    let y = x - q;
    let xi = gamma * y;
    let (val, d) = profile.hermite(xi.abs());
    let df = if xi < T::zero() { -d } else { d };
    let w = profile.omega;
    let phase = theta + w * gamma * v * y;
    let rot = Complex::new(phase.cos(), phase.sin());
    (rot * val, rot * Complex::new(-gamma * v * df, -w * gamma * val))
}

/// Profile placed at `q` (contracted by `gamma_v`) with zero momentum: an
/// initial datum that is deliberately off the solitary manifold.
pub fn frozen_profile<T: Scalar>(
    profile: &SolitaryWaveProfile<T>,
    v: T,
    q: T,
    grid: Grid1D<T>,
) -> Result<FieldState<T>> {
    if !(v.abs() < T::one()) {
        return Err(LabError::InvalidParameter(format!(
            "velocity must satisfy |v| < 1, got {v}"
        )));
    }
    let gamma = T::one() / (T::one() - v * v).sqrt();
    let reach = (grid.x_min() - q).abs().max((grid.x_max() - q).abs()) * gamma;
    profile.check_cover(reach)?;
    Ok(FieldState::from_fn_complex(
        grid,
        T::zero(),
        |x| Complex::new(profile.value(gamma * (x - q)), T::zero()),
        |_| Complex::new(T::zero(), T::zero()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{charge, energy, local_l2_distance, FieldKind};
    use crate::integrate::{Boundary, IntegratorConfig, Stepper};
    use crate::models::{force_field, ExternalPotential, ModelSpec};

    fn grid(a: f64, b: f64, dx: f64) -> Grid1D<f64> {
        Grid1D::with_spacing(a, b, dx).unwrap()
    }

    #[test]
    fn static_kink_values() {
        let spec = KinkSpec::moving(0.0, 0.0).unwrap();
        let g = Grid1D::new(-2f64.sqrt(), 2f64.sqrt(), 3).unwrap();
        let st = kink(&spec, g, 0.0);
        let psi = st.psi().re();
        assert_eq!(psi[1], 0.0);
        assert!((psi[2] - 0.761594155955765).abs() < 1e-12);
        assert!(KinkSpec::moving(0.0, 1.0).is_err());
        assert!(KinkSpec::new(0.5, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn boosted_kink_pi_is_time_derivative() {
        let spec = KinkSpec::new(-1.0, 1.0, 0.7, 0.6).unwrap();
        let g = grid(-10.0, 10.0, 0.05);
        let h = 1e-5;
        let a = kink(&spec, g, -h).psi().re();
        let b = kink(&spec, g, h).psi().re();
        let pi = kink(&spec, g, 0.0).pi().re();
        for k in 0..a.len() {
            assert!(((b[k] - a[k]) / (2.0 * h) - pi[k]).abs() < 1e-8);
        }
        let spec = KinkSpec::new(1.0, -1.0, 0.2, 0.5).unwrap();
        let a = kink_with_internal_mode(&spec, 0.05, g, -h).psi().re();
        let b = kink_with_internal_mode(&spec, 0.05, g, h).psi().re();
        let pi = kink_with_internal_mode(&spec, 0.05, g, 0.0).pi().re();
        for k in 0..a.len() {
            assert!(((b[k] - a[k]) / (2.0 * h) - pi[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn boosted_kink_energy_is_gamma_times_rest_energy() {
        let rest = 2.0 * 2f64.sqrt() / 3.0;
        let g = grid(-40.0, 40.0, 0.01);
        for &v in &[0.3, 0.6, 0.88] {
            let spec = KinkSpec::moving(0.0, v).unwrap();
            let e = energy(&kink(&spec, g, 0.0), &ModelSpec::ginzburg_landau()).unwrap().total;
            let expect = spec.gamma() * rest;
            assert!((e / expect - 1.0).abs() < 5e-3, "v={v}: {e} vs {expect}");
        }
    }

    #[test]
    fn static_kink_residual_is_second_order() {
        let m = ModelSpec::ginzburg_landau();
        let spec = KinkSpec::moving(0.0, 0.0).unwrap();
        let mut consts = Vec::new();
        for &dx in &[0.04, 0.02, 0.01] {
            let st = kink(&spec, grid(-30.0, 30.0, dx), 0.0);
            let f = force_field(&m, &st).unwrap();
            let sup = f.as_real().unwrap().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            consts.push(sup / (dx * dx));
        }
        for c in &consts {
            assert!((c / consts[2] - 1.0).abs() < 0.02, "{consts:?}");
        }
    }

    #[test]
    fn internal_mode_is_eigenfunction() {
        // -phi'' + (2 - 3 sech^2(x/sqrt2)) phi = 1.5 phi
        let h = 1e-4;
        for &x in &[-3.0, -0.7, 0.4, 1.9] {
            let f = internal_mode_shape::<f64>;
            let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            let c = (x / 2f64.sqrt()).cosh();
            let lhs = -d2 + (2.0 - 3.0 / (c * c)) * f(x);
            assert!((lhs - 1.5 * f(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn cubic_profile_matches_sech() {
        // phi'' = kappa^2 phi - phi^3  =>  phi = sqrt(2) kappa sech(kappa x)
        let nl = Nonlinearity::Cubic { sign: 1.0 };
        let omega: f64 = 0.6;
        let p = solve_profile(&nl, 1.0, omega, 1e-10).unwrap();
        let kappa = (1.0 - omega * omega).sqrt();
        assert!((p.peak_amplitude() - 2f64.sqrt() * kappa).abs() < 1e-12);
        for &x in &[0.0, 0.37, 1.5, 4.0, 12.0, -7.3] {
            let exact = 2f64.sqrt() * kappa / (kappa * x).cosh();
            assert!((p.value(x) - exact).abs() < 1e-9 * (1.0 + exact), "x={x}");
        }
        let w = 2.0 * (2.0 + 3f64.sqrt()).ln() / kappa;
        assert!((p.half_amplitude_width() - w).abs() < 1e-8);
    }

    #[test]
    fn row3_profile_turning_point_width_and_tail() {
        let nl = Nonlinearity::<f64>::row3();
        let p = solve_profile(&nl, 1.0, 0.6, 1e-10).unwrap();
        let phi = p.peak_amplitude();
        let ue = nl.potential_of(phi * phi) + 0.5 * 0.64 * phi * phi;
        assert!(ue.abs() < 1e-12, "{ue}");
        assert!((phi - 0.7539075233723436).abs() < 1e-9);
        // independent adaptive quadrature of x(phi) = \int d phi / sqrt(2 U_e)
        assert!((p.half_amplitude_width() - 2.4073512387085523).abs() < 1e-6);
        assert!(p.residual() < 1e-8);
        // tail slope of ln phi against x over the last decade of amplitude
        let s = p.samples();
        let n = s.len();
        let a = n - 1;
        let b = s.iter().position(|&v| v < s[a] * 10.0).unwrap();
        let slope = (s[a].ln() - s[b].ln()) / (p.step() * (a - b) as f64);
        assert!((slope + 0.8).abs() < 0.016, "{slope}");
    }

    #[test]
    fn profiles_are_even_positive_monotone() {
        for (nl, w) in [
            (Nonlinearity::<f64>::row2(), 0.6),
            (Nonlinearity::row3(), 0.9),
            (Nonlinearity::row1(), 0.95),
        ] {
            let p = solve_profile(&nl, 1.0, w, 1e-10).unwrap();
            assert!(p.samples().iter().all(|&v| v > 0.0));
            assert!(p.samples().windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(p.value(1.3), p.value(-1.3));
        }
    }

    #[test]
    fn profile_errors() {
        let nl = Nonlinearity::<f64>::row1();
        assert!(matches!(
            solve_profile(&nl, 1.0, 0.6, 1e-10),
            Err(LabError::NoSolitaryWave { .. })
        ));
        assert!(solve_profile(&nl, 1.0, 1.2, 1e-10).is_err());
        assert!(solve_profile(&Nonlinearity::GinzburgLandau, 1.0, 0.5, 1e-10).is_err());
    }

    #[test]
    fn standing_soliton_fields() {
        let p = solve_profile(&Nonlinearity::<f64>::row3(), 1.0, 0.6, 1e-10).unwrap();
        let g = grid(-30.0, 30.0, 0.05);
        let st = moving_soliton(&p, 0.0, 0.0, 0.0, g).unwrap();
        for k in 0..g.n_points() {
            let x = g.x(k);
            let f = p.value(x);
            assert!((st.psi().get(k) - Complex::new(f, 0.0)).norm() < 1e-15);
            assert!((st.pi().get(k) - Complex::new(0.0, -0.6 * f)).norm() < 1e-15);
        }
        // Q = -omega \int phi^2
        let q = charge(&st).unwrap();
        let direct: f64 = (0..g.n_points()).map(|k| g.weight(k) * p.value(g.x(k)).powi(2)).sum();
        assert!((q + 0.6 * direct).abs() < 1e-6);
    }

    #[test]
    fn moving_soliton_pi_is_time_derivative() {
        let p = solve_profile(&Nonlinearity::<f64>::row2(), 1.0, 0.7, 1e-10).unwrap();
        let g = grid(-20.0, 20.0, 0.1);
        let (v, q, th) = (0.4, 1.5, 0.3);
        let gamma = 1.0 / (1.0f64 - v * v).sqrt();
        let w = p.omega();
        let exact = |x: f64, t: f64| {
            let xi = gamma * (x - q - v * t);
            let ph = th - w * gamma * (t - v * (x - q));
            Complex::new(ph.cos(), ph.sin()) * p.value(xi)
        };
        let st = moving_soliton(&p, v, q, th, g).unwrap();
        let h = 1e-5;
        for k in (0..g.n_points()).step_by(7) {
            let x = g.x(k);
            assert!((st.psi().get(k) - exact(x, 0.0)).norm() < 1e-12);
            let fd = (exact(x, h) - exact(x, -h)) / (2.0 * h);
            assert!((st.pi().get(k) - fd).norm() < 1e-7);
        }
    }

    #[test]
    fn boosted_width_contracts() {
        let p = solve_profile(&Nonlinearity::<f64>::row3(), 1.0, 0.9, 1e-10).unwrap();
        let g = grid(-40.0, 40.0, 0.01);
        for &v in &[0.3, 0.6, 0.9] {
            let st = moving_soliton(&p, v, 0.0, 0.0, g).unwrap();
            let m = st.psi().moduli();
            let peak = m.iter().cloned().fold(0.0, f64::max);
            let above: Vec<usize> = (0..m.len()).filter(|&k| m[k] >= peak / 2.0).collect();
            let width = (above[above.len() - 1] - above[0]) as f64 * g.dx();
            let gamma = 1.0 / (1.0f64 - v * v).sqrt();
            let expect = p.half_amplitude_width() / gamma;
            assert!((width / expect - 1.0).abs() < 0.01, "v={v}: {width} vs {expect}");
        }
    }

    #[test]
    fn charge_is_phase_invariant() {
        let p = solve_profile(&Nonlinearity::<f64>::row2(), 1.0, 0.7, 1e-10).unwrap();
        let g = grid(-25.0, 25.0, 0.05);
        let q0 = charge(&moving_soliton(&p, 0.3, 0.0, 0.0, g).unwrap()).unwrap();
        for &th in &[0.4, 1.7, 3.0, 5.9] {
            let q = charge(&moving_soliton(&p, 0.3, 0.0, th, g).unwrap()).unwrap();
            assert!((q - q0).abs() < 1e-12);
        }
    }

    #[test]
    fn standing_wave_persists_for_one_period() {
        // row2 at this frequency has d|Q|/d omega < 0, so the wave is orbitally stable
        let p = solve_profile(&Nonlinearity::<f64>::row2(), 1.0, 0.7, 1e-10).unwrap();
        let g = grid(-40.0, 40.0, 0.02);
        let st = moving_soliton(&p, 0.0, 0.0, 0.0, g).unwrap();
        let m = ModelSpec::soliton(Nonlinearity::row2(), ExternalPotential::Zero);
        let dt = 0.01;
        let period = 2.0 * std::f64::consts::PI / 0.7;
        let steps = (period / dt).round() as usize;
        let cfg = IntegratorConfig::new(dt, Boundary::DirichletVacuum { left: 0.0, right: 0.0 }, 1);
        let mut s = Stepper::new(st.clone(), &m, &cfg).unwrap();
        s.advance(steps).unwrap();
        let t = s.time();
        let fin = s.into_state().rotate_phase(0.7 * t).with_time(0.0);
        let d = local_l2_distance(&fin, &st, 20.0).unwrap();
        assert!(d < 1e-2, "{d}");
        assert_eq!(fin.kind(), FieldKind::Complex);
    }

    #[test]
    fn frozen_profile_has_zero_momentum() {
        let p = solve_profile(&Nonlinearity::<f64>::row3(), 1.0, 0.6, 1e-10).unwrap();
        let g = grid(-30.0, 30.0, 0.05);
        let st = frozen_profile(&p, 0.0, 5.0, g).unwrap();
        assert!((0..g.n_points()).all(|k| st.pi().get(k).norm() == 0.0));
        assert!((st.psi().get(g.nearest(5.0)).re - p.peak_amplitude()).abs() < 1e-12);
    }

    #[test]
    fn narrow_profile_is_rejected() {
        let opts = ProfileOptions {
            tail_cut: 1e-4,
            ..ProfileOptions::default()
        };
        let p = solve_profile_with(&Nonlinearity::<f64>::row3(), 1.0, 0.6, 1e-10, &opts).unwrap();
        let g = grid(-60.0, 60.0, 0.1);
        assert!(matches!(
            moving_soliton(&p, 0.0, 0.0, 0.0, g),
            Err(LabError::ProfileTooNarrow { .. })
        ));
    }
}
