//! Nonlinearities, external potentials and complete models.
//!
//! Every nonlinearity in the catalog has the phase-equivariant form
//! `F(psi) = g(|psi|^2) psi` with a real gain `g`, and the potential density is
//! a function of `s = |psi|^2` with `g(s) = -2 U'(s)`.

use crate::error::{LabError, Result};
use crate::field::{FieldKind, FieldState, Grid1D, Samples, StateView};
use crate::integrate::{Dynamics, ForceLaw};
use crate::scalar::{FieldValue, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity<T> {
    /// `F(psi) = psi - |psi|^2 psi`, `U = (|psi|^2 - 1)^2 / 4`.
    GinzburgLandau,
    /// `U = a |psi|^{2m} - b |psi|^{2n}`.
    Polynomial { a: T, m: u32, b: T, n: u32 },
    /// `F(psi) = sign |psi|^2 psi` (focusing for `sign > 0`).
    Cubic { sign: T },
    /// `F(psi) = coefficient * psi`; zero coefficient gives the free field.
    Linear { coefficient: T },
}

impl<T: Scalar> Nonlinearity<T> {
    pub fn polynomial(a: T, m: u32, b: T, n: u32) -> Result<Self> {
        let nl = Nonlinearity::Polynomial { a, m, b, n };
        nl.validate()?;
        Ok(nl)
    }

    pub fn row1() -> Self {
        Nonlinearity::Polynomial {
            a: T::lit(1.0),
            m: 3,
            b: T::lit(0.61),
            n: 2,
        }
    }

    pub fn row2() -> Self {
        Nonlinearity::Polynomial {
            a: T::lit(10.0),
            m: 4,
            b: T::lit(2.1),
            n: 2,
        }
    }

    pub fn row3() -> Self {
        Nonlinearity::Polynomial {
            a: T::lit(10.0),
            m: 6,
            b: T::lit(8.75),
            n: 5,
        }
    }

    /// Named catalog entry: `gl`, `row1`, `row2`, `row3`, `cubic`, `free`.
    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "gl" => Nonlinearity::GinzburgLandau,
            "row1" => Self::row1(),
            "row2" => Self::row2(),
            "row3" => Self::row3(),
            "cubic" => Nonlinearity::Cubic { sign: T::one() },
            "free" => Nonlinearity::Linear {
                coefficient: T::zero(),
            },
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Nonlinearity::Polynomial { a, m, b, n } => {
                if !(m > n && n >= 2) {
                    return Err(LabError::InvalidParameter(format!(
                        "polynomial exponents need m > n >= 2, got m={m}, n={n}"
                    )));
                }
                if !(a > T::zero() && b > T::zero()) {
                    return Err(LabError::InvalidParameter(format!(
                        "polynomial coefficients must be positive, got a={a}, b={b}"
                    )));
                }
                Ok(())
            }
            Nonlinearity::Cubic { sign } if !sign.is_finite() => Err(
                LabError::InvalidParameter("cubic sign must be finite".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Real gain `g(s)` with `F(psi) = g(|psi|^2) psi`.
    #[inline]
    pub fn gain(&self, s: T) -> T {
        match *self {
            Nonlinearity::GinzburgLandau => T::one() - s,
            Nonlinearity::Polynomial { a, m, b, n } => {
                let two = T::lit(2.0);
                -two * a * T::from_usize(m as usize) * s.powi(m as i32 - 1)
                    + two * b * T::from_usize(n as usize) * s.powi(n as i32 - 1)
            }
            Nonlinearity::Cubic { sign } => sign * s,
            Nonlinearity::Linear { coefficient } => coefficient,
        }
    }

    /// Potential density `U` as a function of `s = |psi|^2`.
    #[inline]
    pub fn potential_of(&self, s: T) -> T {
        match *self {
            Nonlinearity::GinzburgLandau => {
                let q = T::lit(0.25);
                q * s * s - T::lit(0.5) * s + q
            }
            Nonlinearity::Polynomial { a, m, b, n } => a * s.powi(m as i32) - b * s.powi(n as i32),
            Nonlinearity::Cubic { sign } => -sign * s * s * T::lit(0.25),
            Nonlinearity::Linear { coefficient } => -coefficient * s * T::lit(0.5),
        }
    }

    /// `(U(s) - U(0)) / s` in closed form, so that small amplitudes do not cancel.
    #[inline]
    pub fn reduced_potential(&self, s: T) -> T {
        match *self {
            Nonlinearity::GinzburgLandau => T::lit(0.25) * s - T::lit(0.5),
            Nonlinearity::Polynomial { a, m, b, n } => {
                a * s.powi(m as i32 - 1) - b * s.powi(n as i32 - 1)
            }
            Nonlinearity::Cubic { sign } => -sign * s * T::lit(0.25),
            Nonlinearity::Linear { coefficient } => -coefficient * T::lit(0.5),
        }
    }

    /// `F(psi)`.
    #[inline]
    pub fn eval_f<E: FieldValue<T>>(&self, psi: E) -> E {
        psi * self.gain(psi.norm_sqr())
    }

    /// `U(psi)`.
    #[inline]
    pub fn eval_u<E: FieldValue<T>>(&self, psi: E) -> T {
        self.potential_of(psi.norm_sqr())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExternalPotential<T> {
    Zero,
    /// `V(x) = amplitude * cos(wavenumber * x)`.
    Cosine { amplitude: T, wavenumber: T },
    /// Nodal samples, piecewise-linear in between and constant beyond the ends.
    Tabulated { x_min: T, dx: T, samples: Vec<T> },
}

impl<T: Scalar> ExternalPotential<T> {
    /// The slowly varying potential `-0.2 cos(0.31 x)`.
    pub fn slow_cosine() -> Self {
        ExternalPotential::Cosine {
            amplitude: T::lit(-0.2),
            wavenumber: T::lit(0.31),
        }
    }

    pub fn tabulate(grid: &Grid1D<T>, f: impl Fn(T) -> T) -> Self {
        ExternalPotential::Tabulated {
            x_min: grid.x_min(),
            dx: grid.dx(),
            samples: grid.xs().into_iter().map(f).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExternalPotential::Zero)
    }

    fn locate(x_min: T, dx: T, len: usize, x: T) -> (usize, T) {
        let c = (x - x_min) / dx;
        if c <= T::zero() {
            return (0, T::zero());
        }
        let j = c.floor().to_usize().unwrap_or(usize::MAX);
        if j + 1 >= len {
            return (len - 2, T::one());
        }
        (j, c - T::from_usize(j))
    }

    pub fn value(&self, x: T) -> T {
        match self {
            ExternalPotential::Zero => T::zero(),
            ExternalPotential::Cosine {
                amplitude,
                wavenumber,
            } => *amplitude * (*wavenumber * x).cos(),
            ExternalPotential::Tabulated { x_min, dx, samples } => {
                let (j, f) = Self::locate(*x_min, *dx, samples.len(), x);
                samples[j] * (T::one() - f) + samples[j + 1] * f
            }
        }
    }

    pub fn derivative(&self, x: T) -> T {
        match self {
            ExternalPotential::Zero => T::zero(),
            ExternalPotential::Cosine {
                amplitude,
                wavenumber,
            } => -*amplitude * *wavenumber * (*wavenumber * x).sin(),
            ExternalPotential::Tabulated { x_min, dx, samples } => {
                let c = (x - *x_min) / *dx;
                if c < T::zero() || c > T::from_usize(samples.len() - 1) {
                    return T::zero();
                }
                let (j, _) = Self::locate(*x_min, *dx, samples.len(), x);
                (samples[j + 1] - samples[j]) / *dx
            }
        }
    }

    /// Upper bound of `|V'|`: the adiabatic small parameter.
    pub fn gradient_scale(&self) -> T {
        match self {
            ExternalPotential::Zero => T::zero(),
            ExternalPotential::Cosine {
                amplitude,
                wavenumber,
            } => (*amplitude * *wavenumber).abs(),
            ExternalPotential::Tabulated { dx, samples, .. } => samples
                .windows(2)
                .map(|w| ((w[1] - w[0]) / *dx).abs())
                .fold(T::zero(), T::max),
        }
    }

    /// Nodal values on `grid`.
    pub fn sample(&self, grid: &Grid1D<T>) -> Result<Vec<T>> {
        match self {
            ExternalPotential::Zero => Ok(vec![T::zero(); grid.n_points()]),
            ExternalPotential::Cosine { .. } => Ok(grid.xs().into_iter().map(|x| self.value(x)).collect()),
            ExternalPotential::Tabulated { x_min, dx, samples } => {
                let tol = grid.dx() * T::lit(1e-9);
                if samples.len() != grid.n_points()
                    || (*x_min - grid.x_min()).abs() > tol
                    || (*dx - grid.dx()).abs() > tol
                {
                    return Err(LabError::GridMismatch(format!(
                        "tabulated potential has {} samples, grid has {}",
                        samples.len(),
                        grid.n_points()
                    )));
                }
                Ok(samples.clone())
            }
        }
    }

    /// The potential mirrored, `V(-x)`.
    pub fn mirrored(&self) -> Self {
        match self {
            ExternalPotential::Tabulated { x_min, dx, samples } => {
                let n = samples.len();
                let x_max = *x_min + *dx * T::from_usize(n - 1);
                ExternalPotential::Tabulated {
                    x_min: -x_max,
                    dx: *dx,
                    samples: samples.iter().rev().copied().collect(),
                }
            }
            other => other.clone(),
        }
    }
}

/// A full model `psi_tt = psi_xx - m^2 psi + F(psi) - V(x) psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<T> {
    pub mass_squared: T,
    pub nonlinearity: Nonlinearity<T>,
    pub external: ExternalPotential<T>,
    pub field_kind: FieldKind,
}

impl<T: Scalar> ModelSpec<T> {
    /// Real Ginzburg-Landau wave equation `psi_tt = psi_xx + psi - psi^3`.
    pub fn ginzburg_landau() -> Self {
        Self {
            mass_squared: T::zero(),
            nonlinearity: Nonlinearity::GinzburgLandau,
            external: ExternalPotential::Zero,
            field_kind: FieldKind::Real,
        }
    }

    /// Complex unit-mass model with a polynomial nonlinearity and external potential.
    pub fn soliton(nonlinearity: Nonlinearity<T>, external: ExternalPotential<T>) -> Self {
        Self {
            mass_squared: T::one(),
            nonlinearity,
            external,
            field_kind: FieldKind::Complex,
        }
    }

    /// Linear Klein-Gordon equation with the given mass.
    pub fn klein_gordon(mass_squared: T, field_kind: FieldKind) -> Self {
        Self {
            mass_squared,
            nonlinearity: Nonlinearity::Linear {
                coefficient: T::zero(),
            },
            external: ExternalPotential::Zero,
            field_kind,
        }
    }

    pub fn with_external(mut self, external: ExternalPotential<T>) -> Self {
        self.external = external;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass_squared >= T::zero()) {
            return Err(LabError::InvalidParameter(format!(
                "mass_squared must be >= 0, got {}",
                self.mass_squared
            )));
        }
        self.nonlinearity.validate()
    }
}

/// A model with its external potential sampled on a grid.
#[derive(Debug, Clone)]
pub struct BoundModel<T> {
    grid: Grid1D<T>,
    mass_squared: T,
    nonlinearity: Nonlinearity<T>,
    potential: Vec<T>,
}

/// Three-point Laplacian; rows of open ends are left at zero.
pub(crate) fn laplacian_into<T: Scalar, E: FieldValue<T>>(grid: &Grid1D<T>, psi: &[E], out: &mut [E]) {
    let n = psi.len();
    let inv = T::one() / (grid.dx() * grid.dx());
    for j in 1..n - 1 {
        out[j] = (psi[j + 1] + psi[j - 1] - psi[j] - psi[j]) * inv;
    }
    if grid.is_periodic() {
        out[0] = (psi[1] + psi[n - 1] - psi[0] - psi[0]) * inv;
        out[n - 1] = (psi[0] + psi[n - 2] - psi[n - 1] - psi[n - 1]) * inv;
    } else {
        out[0] = E::zero();
        out[n - 1] = E::zero();
    }
}

impl<T: Scalar> ForceLaw<T> for BoundModel<T> {
    fn force<E: FieldValue<T>>(&self, psi: &[E], out: &mut [E]) {
        laplacian_into(&self.grid, psi, out);
        let n = psi.len();
        let (lo, hi) = if self.grid.is_periodic() { (0, n) } else { (1, n - 1) };
        for j in lo..hi {
            let p = psi[j];
            let g = self.nonlinearity.gain(p.norm_sqr()) - self.mass_squared - self.potential[j];
            out[j] += p * g;
        }
    }
}

impl<T: Scalar> Dynamics<T> for ModelSpec<T> {
    type Law = BoundModel<T>;

    fn field_kind(&self) -> FieldKind {
        self.field_kind
    }

    fn bind(&self, grid: &Grid1D<T>) -> Result<BoundModel<T>> {
        self.validate()?;
        Ok(BoundModel {
            grid: *grid,
            mass_squared: self.mass_squared,
            nonlinearity: self.nonlinearity.clone(),
            potential: self.external.sample(grid)?,
        })
    }

    fn energy(&self, state: &FieldState<T>) -> Result<crate::field::EnergySnapshot<T>> {
        crate::field::energy(state, self)
    }
}

/// Right-hand side `psi'' - m^2 psi + F(psi) - V psi` on the grid of `state`.
///
/// Rows at open ends are zero (they are pinned by the boundary treatment).
pub fn force_field<T: Scalar>(model: &ModelSpec<T>, state: &FieldState<T>) -> Result<Samples<T>> {
    let law = model.bind(state.grid())?;
    Ok(match state.view() {
        StateView::Real(p, _) => {
            let mut out = vec![T::zero(); p.len()];
            law.force(p, &mut out);
            Samples::Real(out)
        }
        StateView::Complex(p, _) => {
            let mut out = vec![FieldValue::<T>::zero(); p.len()];
            law.force(p, &mut out);
            Samples::Complex(out)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;
    use proptest::prelude::*;

    fn all_variants() -> Vec<Nonlinearity<f64>> {
        vec![
            Nonlinearity::GinzburgLandau,
            Nonlinearity::row1(),
            Nonlinearity::row2(),
            Nonlinearity::row3(),
            Nonlinearity::Cubic { sign: 1.0 },
            Nonlinearity::Cubic { sign: -1.0 },
            Nonlinearity::Linear { coefficient: -0.7 },
        ]
    }

    #[test]
    fn f_vanishes_at_zero() {
        for nl in all_variants() {
            assert_eq!(nl.eval_f(0.0), 0.0);
        }
    }

    #[test]
    fn gl_zeros_and_potential_values() {
        let nl = Nonlinearity::<f64>::GinzburgLandau;
        assert_eq!(nl.eval_f(1.0), 0.0);
        assert_eq!(nl.eval_f(-1.0), 0.0);
        assert_eq!(nl.eval_u(1.0), 0.0);
        assert_eq!(nl.eval_u(-1.0), 0.0);
        assert_eq!(nl.eval_u(0.0), 0.25);
        assert!((Nonlinearity::<f64>::row3().eval_u(1.0) - 1.25).abs() < 1e-14);
    }

    #[test]
    fn row1_force_matches_potential_derivative() {
        let nl = Nonlinearity::<f64>::row1();
        let h = 1e-6;
        let fd = -(nl.eval_u(0.5 + h) - nl.eval_u(0.5 - h)) / (2.0 * h);
        assert!((nl.eval_f(0.5) - fd).abs() < 1e-8);
    }

    #[test]
    fn polynomial_validation() {
        assert!(Nonlinearity::polynomial(1.0, 2, 1.0, 3).is_err());
        assert!(Nonlinearity::polynomial(-1.0, 3, 1.0, 2).is_err());
        assert!(Nonlinearity::polynomial(1.0, 3, 0.61, 2).is_ok());
    }

    #[test]
    fn f_is_minus_u_prime_on_random_points() {
        // deterministic LCG sample of |psi| <= 2
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        let h = 1e-6;
        for nl in all_variants() {
            for _ in 0..1000 {
                let p = next();
                let fd = -(nl.eval_u(p + h) - nl.eval_u(p - h)) / (2.0 * h);
                let f = nl.eval_f(p);
                assert!((f - fd).abs() < 1e-7 * (1.0 + f.abs()), "{nl:?} at {p}: {f} vs {fd}");
            }
        }
    }

    #[test]
    fn reduced_potential_matches_definition() {
        for nl in all_variants() {
            for &s in &[0.01, 0.3, 1.1, 2.5] {
                let direct = (nl.potential_of(s) - nl.potential_of(0.0)) / s;
                assert!((nl.reduced_potential(s) - direct).abs() < 1e-12 * (1.0 + direct.abs()));
            }
        }
    }

    fn has_turning_point(nl: &Nonlinearity<f64>, omega: f64) -> bool {
        // U_e(phi) = U(phi^2) + (1 - omega^2) phi^2 / 2 changes sign for some phi > 0
        let k2 = 1.0 - omega * omega;
        (1..4000).any(|i| {
            let phi = i as f64 * 1e-3;
            nl.potential_of(phi * phi) + 0.5 * k2 * phi * phi < 0.0
        })
    }

    #[test]
    fn table_rows_effective_potential_turning_points() {
        assert!(has_turning_point(&Nonlinearity::row2(), 0.6));
        assert!(has_turning_point(&Nonlinearity::row3(), 0.6));
        // row1 only binds for omega^2 > 1 - 0.61^2 / 2
        assert!(!has_turning_point(&Nonlinearity::row1(), 0.6));
        assert!(has_turning_point(&Nonlinearity::row1(), 0.95));
    }

    #[test]
    fn vacuum_is_equilibrium() {
        let g = Grid1D::<f64>::new(-5.0, 5.0, 101).unwrap();
        let st = FieldState::constant(g, FieldKind::Real, 1.0);
        let f = force_field(&ModelSpec::ginzburg_landau(), &st).unwrap();
        assert!(f.as_real().unwrap().iter().all(|v: &f64| v.abs() < 1e-14));
    }

    #[test]
    fn kink_residual_is_small() {
        let g = Grid1D::<f64>::with_spacing(-40.0, 40.0, 0.01).unwrap();
        let st = FieldState::from_fn_real(g, 0.0, |x| (x / 2f64.sqrt()).tanh(), |_| 0.0);
        let f = force_field(&ModelSpec::ginzburg_landau(), &st).unwrap();
        let max = f.as_real().unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max <= 5e-4, "{max}");
    }

    #[test]
    fn plane_wave_discrete_dispersion() {
        let n = 256;
        let g = Grid1D::<f64>::periodic(0.0, 32.0, n).unwrap();
        let k = 2.0 * std::f64::consts::PI * 8.0 / g.length();
        let omega = 1.3;
        let st = FieldState::from_fn_complex(
            g,
            0.0,
            |x| Complex::new(0.0, k * x).exp(),
            |_| Complex::new(0.0, 0.0),
        );
        let m = ModelSpec::klein_gordon(2.0, FieldKind::Complex);
        let f = force_field(&m, &st).unwrap();
        let dx = g.dx();
        let kd2 = 2.0 * (1.0 - (k * dx).cos()) / (dx * dx);
        let f = f.as_complex().unwrap();
        for j in 0..n {
            let psi = st.psi().get(j);
            // psi_tt = -omega^2 psi, so the residual psi_tt - rhs is -(omega^2 - kd2 - 2) psi
            let resid = -omega * omega * psi - f[j];
            let expect = -(omega * omega - kd2 - 2.0) * psi;
            assert!((resid - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn cosine_potential_and_gradient_scale() {
        let v = ExternalPotential::<f64>::slow_cosine();
        assert!((v.value(0.0) + 0.2).abs() < 1e-15);
        assert!((v.gradient_scale() - 0.062).abs() < 1e-15);
        let h = 1e-5;
        let fd = (v.value(1.0 + h) - v.value(1.0 - h)) / (2.0 * h);
        assert!((fd - v.derivative(1.0)).abs() < 1e-9);
    }

    #[test]
    fn tabulated_interpolates_linearly() {
        let g = Grid1D::<f64>::new(0.0, 2.0, 3).unwrap();
        let v = ExternalPotential::tabulate(&g, |x| x * x);
        assert!((v.value(0.5) - 0.5).abs() < 1e-15);
        assert!((v.value(1.5) - 2.5).abs() < 1e-15);
        assert!((v.derivative(1.5) - 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn phase_equivariance(re in -2.0f64..2.0, im in -2.0f64..2.0, theta in 0.0f64..6.3) {
            let psi = Complex::new(re, im);
            let rot = Complex::new(theta.cos(), theta.sin());
            for nl in all_variants() {
                let lhs = nl.eval_f(psi * rot);
                let rhs = nl.eval_f(psi) * rot;
                prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
            }
        }
    }
}
