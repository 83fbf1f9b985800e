//! Grids, field states and the conserved functionals evaluated on them.

use num_complex::Complex;

use crate::error::{LabError, Result};
use crate::models::ModelSpec;
use crate::scalar::{FieldValue, Scalar};

/// Uniform 1D grid. Node `k` sits at `x_min + k * dx`.
///
/// A periodic grid identifies node `n_points` with node 0, so its period is
/// `n_points * dx` and `x_max` is the last distinct node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    x_min: T,
    x_max: T,
    n_points: usize,
    dx: T,
    periodic: bool,
}

impl<T: Scalar> Grid1D<T> {
    pub fn new(x_min: T, x_max: T, n_points: usize) -> Result<Self> {
        if n_points < 3 {
            return Err(LabError::InvalidGrid(format!(
                "need at least 3 points, got {n_points}"
            )));
        }
        if !(x_max > x_min) {
            return Err(LabError::InvalidGrid(format!(
                "x_max ({x_max}) must exceed x_min ({x_min})"
            )));
        }
        let dx = (x_max - x_min) / T::from_usize(n_points - 1);
        Ok(Self {
            x_min,
            x_max,
            n_points,
            dx,
            periodic: false,
        })
    }

    /// Grid on `[x_min, x_max]` whose spacing is as close as possible to `dx`.
    pub fn with_spacing(x_min: T, x_max: T, dx: T) -> Result<Self> {
        if !(dx > T::zero()) {
            return Err(LabError::InvalidGrid(format!("dx must be positive, got {dx}")));
        }
        let cells = ((x_max - x_min) / dx).round();
        let n = cells.to_usize().unwrap_or(0) + 1;
        Self::new(x_min, x_max, n)
    }

    /// Periodic grid of `n_points` nodes covering one period starting at `x_min`.
    pub fn periodic(x_min: T, period: T, n_points: usize) -> Result<Self> {
        if n_points < 3 {
            return Err(LabError::InvalidGrid(format!(
                "need at least 3 points, got {n_points}"
            )));
        }
        if !(period > T::zero()) {
            return Err(LabError::InvalidGrid(format!("period must be positive, got {period}")));
        }
        let dx = period / T::from_usize(n_points);
        Ok(Self {
            x_min,
            x_max: x_min + dx * T::from_usize(n_points - 1),
            n_points,
            dx,
            periodic: true,
        })
    }

    /// Periodic grid from its spacing; inverse of reading back `dx` and `n_points`.
    pub fn periodic_with_spacing(x_min: T, dx: T, n_points: usize) -> Result<Self> {
        if n_points < 3 || !(dx > T::zero()) {
            return Err(LabError::InvalidGrid(format!(
                "need at least 3 points and dx > 0, got n = {n_points}, dx = {dx}"
            )));
        }
        Ok(Self {
            x_min,
            x_max: x_min + dx * T::from_usize(n_points - 1),
            n_points,
            dx,
            periodic: true,
        })
    }

    #[inline]
    pub fn x_min(&self) -> T {
        self.x_min
    }
    #[inline]
    pub fn x_max(&self) -> T {
        self.x_max
    }
    #[inline]
    pub fn n_points(&self) -> usize {
        self.n_points
    }
    #[inline]
    pub fn dx(&self) -> T {
        self.dx
    }
    #[inline]
    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Length of one period (periodic grids) or of the closed interval.
    pub fn length(&self) -> T {
        if self.periodic {
            self.dx * T::from_usize(self.n_points)
        } else {
            self.x_max - self.x_min
        }
    }

    #[inline]
    pub fn x(&self, k: usize) -> T {
        self.x_min + self.dx * T::from_usize(k)
    }

    pub fn xs(&self) -> Vec<T> {
        (0..self.n_points).map(|k| self.x(k)).collect()
    }

    /// Trapezoid quadrature weight of node `k`.
    #[inline]
    pub fn weight(&self, k: usize) -> T {
        if !self.periodic && (k == 0 || k + 1 == self.n_points) {
            self.dx * T::lit(0.5)
        } else {
            self.dx
        }
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: T) -> usize {
        let r = ((x - self.x_min) / self.dx).round();
        if r <= T::zero() {
            0
        } else {
            r.to_usize().unwrap_or(usize::MAX).min(self.n_points - 1)
        }
    }

    /// Fractional node coordinate of `x`.
    #[inline]
    pub fn coordinate(&self, x: T) -> T {
        (x - self.x_min) / self.dx
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        let tol = self.dx * T::lit(1e-9);
        if self.n_points != other.n_points
            || self.periodic != other.periodic
            || (self.x_min - other.x_min).abs() > tol
            || (self.dx - other.dx).abs() > tol
        {
            return Err(LabError::GridMismatch(format!(
                "[{}, {}]x{} vs [{}, {}]x{}",
                self.x_min, self.x_max, self.n_points, other.x_min, other.x_max, other.n_points
            )));
        }
        Ok(())
    }

    /// Same grid in another scalar type.
    pub fn cast<U: Scalar>(&self) -> Grid1D<U> {
        Grid1D {
            x_min: U::lit(self.x_min.as_f64()),
            x_max: U::lit(self.x_max.as_f64()),
            n_points: self.n_points,
            dx: U::lit(self.dx.as_f64()),
            periodic: self.periodic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Real,
    Complex,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Real => "real",
            FieldKind::Complex => "complex",
        }
    }
}

/// Field samples. Complex samples are stored as interleaved `(re, im)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum Samples<T> {
    Real(Vec<T>),
    Complex(Vec<Complex<T>>),
}

impl<T: Scalar> Samples<T> {
    pub fn zeros(kind: FieldKind, n: usize) -> Self {
        match kind {
            FieldKind::Real => Samples::Real(vec![T::zero(); n]),
            FieldKind::Complex => Samples::Complex(vec![Complex::new(T::zero(), T::zero()); n]),
        }
    }

    pub fn kind(&self) -> FieldKind {
        match self {
            Samples::Real(_) => FieldKind::Real,
            Samples::Complex(_) => FieldKind::Complex,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Samples::Real(v) => v.len(),
            Samples::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, k: usize) -> Complex<T> {
        match self {
            Samples::Real(v) => Complex::new(v[k], T::zero()),
            Samples::Complex(v) => v[k],
        }
    }

    #[inline]
    pub fn norm_sqr(&self, k: usize) -> T {
        match self {
            Samples::Real(v) => v[k] * v[k],
            Samples::Complex(v) => v[k].norm_sqr(),
        }
    }

    /// Real parts.
    pub fn re(&self) -> Vec<T> {
        match self {
            Samples::Real(v) => v.clone(),
            Samples::Complex(v) => v.iter().map(|c| c.re).collect(),
        }
    }

    pub fn moduli(&self) -> Vec<T> {
        (0..self.len()).map(|k| self.norm_sqr(k).sqrt()).collect()
    }

    pub fn to_complex(&self) -> Samples<T> {
        match self {
            Samples::Real(v) => {
                Samples::Complex(v.iter().map(|&x| Complex::new(x, T::zero())).collect())
            }
            Samples::Complex(v) => Samples::Complex(v.clone()),
        }
    }

    pub fn as_real(&self) -> Option<&[T]> {
        match self {
            Samples::Real(v) => Some(v),
            Samples::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&[Complex<T>]> {
        match self {
            Samples::Complex(v) => Some(v),
            Samples::Real(_) => None,
        }
    }

    /// First index holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<usize> {
        match self {
            Samples::Real(v) => v.iter().position(|x| !x.is_finite()),
            Samples::Complex(v) => v.iter().position(|x| !FieldValue::is_finite(*x)),
        }
    }
}

/// Borrowed view that fixes the element type of both arrays of a state.
pub enum StateView<'a, T> {
    Real(&'a [T], &'a [T]),
    Complex(&'a [Complex<T>], &'a [Complex<T>]),
}

/// Sampled field `psi` and conjugate momentum `pi = d psi / dt` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState<T> {
    grid: Grid1D<T>,
    psi: Samples<T>,
    pi: Samples<T>,
    time: T,
}

impl<T: Scalar> FieldState<T> {
    pub fn new(grid: Grid1D<T>, psi: Samples<T>, pi: Samples<T>, time: T) -> Result<Self> {
        if psi.kind() != pi.kind() {
            return Err(LabError::KindMismatch {
                expected: psi.kind().name(),
                found: pi.kind().name(),
            });
        }
        if psi.len() != grid.n_points() || pi.len() != grid.n_points() {
            return Err(LabError::GridMismatch(format!(
                "{} / {} samples on a {}-point grid",
                psi.len(),
                pi.len(),
                grid.n_points()
            )));
        }
        Ok(Self {
            grid,
            psi,
            pi,
            time,
        })
    }

    pub fn real(grid: Grid1D<T>, psi: Vec<T>, pi: Vec<T>, time: T) -> Result<Self> {
        Self::new(grid, Samples::Real(psi), Samples::Real(pi), time)
    }

    pub fn complex(
        grid: Grid1D<T>,
        psi: Vec<Complex<T>>,
        pi: Vec<Complex<T>>,
        time: T,
    ) -> Result<Self> {
        Self::new(grid, Samples::Complex(psi), Samples::Complex(pi), time)
    }

    /// Constant field with zero momentum.
    pub fn constant(grid: Grid1D<T>, kind: FieldKind, value: T) -> Self {
        let n = grid.n_points();
        let psi = match kind {
            FieldKind::Real => Samples::Real(vec![value; n]),
            FieldKind::Complex => Samples::Complex(vec![Complex::new(value, T::zero()); n]),
        };
        Self {
            grid,
            psi,
            pi: Samples::zeros(kind, n),
            time: T::zero(),
        }
    }

    /// Samples `psi(x)` and `pi(x)` from closures.
    pub fn from_fn_real(
        grid: Grid1D<T>,
        time: T,
        psi: impl Fn(T) -> T,
        pi: impl Fn(T) -> T,
    ) -> Self {
        let xs = grid.xs();
        Self {
            grid,
            psi: Samples::Real(xs.iter().map(|&x| psi(x)).collect()),
            pi: Samples::Real(xs.iter().map(|&x| pi(x)).collect()),
            time,
        }
    }

    pub fn from_fn_complex(
        grid: Grid1D<T>,
        time: T,
        psi: impl Fn(T) -> Complex<T>,
        pi: impl Fn(T) -> Complex<T>,
    ) -> Self {
        let xs = grid.xs();
        Self {
            grid,
            psi: Samples::Complex(xs.iter().map(|&x| psi(x)).collect()),
            pi: Samples::Complex(xs.iter().map(|&x| pi(x)).collect()),
            time,
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }
    #[inline]
    pub fn kind(&self) -> FieldKind {
        self.psi.kind()
    }
    #[inline]
    pub fn psi(&self) -> &Samples<T> {
        &self.psi
    }
    #[inline]
    pub fn pi(&self) -> &Samples<T> {
        &self.pi
    }
    #[inline]
    pub fn time(&self) -> T {
        self.time
    }

    pub fn with_time(mut self, time: T) -> Self {
        self.time = time;
        self
    }

    pub fn view(&self) -> StateView<'_, T> {
        match (&self.psi, &self.pi) {
            (Samples::Real(a), Samples::Real(b)) => StateView::Real(a, b),
            (Samples::Complex(a), Samples::Complex(b)) => StateView::Complex(a, b),
            _ => unreachable!("kinds checked at construction"),
        }
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Samples<T>, &mut Samples<T>, &mut T) {
        (&mut self.psi, &mut self.pi, &mut self.time)
    }

    /// The same state as a complex field.
    pub fn to_complex(&self) -> Self {
        Self {
            grid: self.grid,
            psi: self.psi.to_complex(),
            pi: self.pi.to_complex(),
            time: self.time,
        }
    }

    /// Multiplies psi and pi by `e^{i theta}`. Real states are promoted to complex.
    pub fn rotate_phase(&self, theta: T) -> Self {
        let rot = Complex::new(theta.cos(), theta.sin());
        let c = self.to_complex();
        let map = |s: &Samples<T>| match s {
            Samples::Complex(v) => Samples::Complex(v.iter().map(|&z| z * rot).collect()),
            Samples::Real(_) => unreachable!(),
        };
        Self {
            grid: self.grid,
            psi: map(&c.psi),
            pi: map(&c.pi),
            time: self.time,
        }
    }

    /// Mirror image `x -> -x` on a grid symmetric about the origin.
    pub fn reflected(&self) -> Self {
        let rev = |s: &Samples<T>| match s {
            Samples::Real(v) => Samples::Real(v.iter().rev().copied().collect()),
            Samples::Complex(v) => Samples::Complex(v.iter().rev().copied().collect()),
        };
        Self {
            grid: self.grid,
            psi: rev(&self.psi),
            pi: rev(&self.pi),
            time: self.time,
        }
    }

    /// Cyclic shift by `cells` nodes (meaningful on periodic grids).
    pub fn shifted(&self, cells: isize) -> Self {
        let n = self.grid.n_points() as isize;
        let s = cells.rem_euclid(n) as usize;
        let rot = |smp: &Samples<T>| match smp {
            Samples::Real(v) => {
                let mut w = v.clone();
                w.rotate_right(s);
                Samples::Real(w)
            }
            Samples::Complex(v) => {
                let mut w = v.clone();
                w.rotate_right(s);
                Samples::Complex(w)
            }
        };
        Self {
            grid: self.grid,
            psi: rot(&self.psi),
            pi: rot(&self.pi),
            time: self.time,
        }
    }

    /// Same state in another scalar type.
    pub fn cast<U: Scalar>(&self) -> FieldState<U> {
        let cast = |s: &Samples<T>| match s {
            Samples::Real(v) => Samples::Real(v.iter().map(|x| U::lit(x.as_f64())).collect()),
            Samples::Complex(v) => Samples::Complex(
                v.iter()
                    .map(|z| Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64())))
                    .collect(),
            ),
        };
        FieldState {
            grid: self.grid.cast(),
            psi: cast(&self.psi),
            pi: cast(&self.pi),
            time: U::lit(self.time.as_f64()),
        }
    }

    pub fn sup_distance(&self, other: &FieldState<T>) -> Result<T> {
        self.grid.check_same(&other.grid)?;
        let mut m = T::zero();
        for k in 0..self.grid.n_points() {
            let d = (self.psi.get(k) - other.psi.get(k)).norm();
            if d > m {
                m = d;
            }
        }
        Ok(m)
    }
}

/// Energy split into its densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySnapshot<T> {
    pub kinetic: T,
    pub gradient: T,
    /// Nonlinear potential plus the mass term.
    pub potential: T,
    pub external: T,
    pub total: T,
}

impl<T: Scalar> EnergySnapshot<T> {
    pub fn from_parts(kinetic: T, gradient: T, potential: T, external: T) -> Self {
        Self {
            kinetic,
            gradient,
            potential,
            external,
            total: kinetic + gradient + potential + external,
        }
    }
}

/// `sum over cells of |psi_{j+1} - psi_j|^2 / (2 dx)`: the gradient energy of
/// the three-point Laplacian stencil.
pub(crate) fn gradient_energy<T: Scalar, E: FieldValue<T>>(grid: &Grid1D<T>, psi: &[E]) -> T {
    let n = psi.len();
    let mut acc = T::zero();
    for j in 0..n - 1 {
        acc += (psi[j + 1] - psi[j]).norm_sqr();
    }
    if grid.is_periodic() {
        acc += (psi[0] - psi[n - 1]).norm_sqr();
    }
    acc * T::lit(0.5) / grid.dx()
}

/// Centered first difference, one-sided at open ends.
#[inline]
pub(crate) fn centered_gradient<T: Scalar, E: FieldValue<T>>(
    grid: &Grid1D<T>,
    psi: &[E],
    k: usize,
) -> E {
    let n = psi.len();
    let dx = grid.dx();
    if grid.is_periodic() {
        let l = if k == 0 { n - 1 } else { k - 1 };
        let r = if k + 1 == n { 0 } else { k + 1 };
        (psi[r] - psi[l]) * (T::lit(0.5) / dx)
    } else if k == 0 {
        (psi[1] - psi[0]) * (T::one() / dx)
    } else if k + 1 == n {
        (psi[n - 1] - psi[n - 2]) * (T::one() / dx)
    } else {
        (psi[k + 1] - psi[k - 1]) * (T::lit(0.5) / dx)
    }
}

fn energy_impl<T: Scalar, E: FieldValue<T>>(
    grid: &Grid1D<T>,
    psi: &[E],
    pi: &[E],
    model: &ModelSpec<T>,
    v: &[T],
) -> EnergySnapshot<T> {
    let half = T::lit(0.5);
    let mut kin = T::zero();
    let mut pot = T::zero();
    let mut ext = T::zero();
    for k in 0..psi.len() {
        let w = grid.weight(k);
        let s = psi[k].norm_sqr();
        kin += w * pi[k].norm_sqr();
        pot += w * (model.nonlinearity.potential_of(s) + half * model.mass_squared * s);
        ext += w * v[k] * s;
    }
    EnergySnapshot::from_parts(kin * half, gradient_energy(grid, psi), pot, ext * half)
}

/// Hamiltonian of `state` under `model`, by trapezoid quadrature.
pub fn energy<T: Scalar>(state: &FieldState<T>, model: &ModelSpec<T>) -> Result<EnergySnapshot<T>> {
    if state.kind() != model.field_kind {
        return Err(LabError::KindMismatch {
            expected: model.field_kind.name(),
            found: state.kind().name(),
        });
    }
    let v = model.external.sample(state.grid())?;
    Ok(match state.view() {
        StateView::Real(p, q) => energy_impl(state.grid(), p, q, model, &v),
        StateView::Complex(p, q) => energy_impl(state.grid(), p, q, model, &v),
    })
}

fn momentum_impl<T: Scalar, E: FieldValue<T>>(grid: &Grid1D<T>, psi: &[E], pi: &[E]) -> T {
    let mut acc = T::zero();
    for k in 0..psi.len() {
        acc += grid.weight(k) * pi[k].dot_re(centered_gradient(grid, psi, k));
    }
    -acc
}

/// Field momentum `P = -Re \int conj(pi) psi_x dx`; positive for right movers.
pub fn momentum<T: Scalar>(state: &FieldState<T>) -> T {
    match state.view() {
        StateView::Real(p, q) => momentum_impl(state.grid(), p, q),
        StateView::Complex(p, q) => momentum_impl(state.grid(), p, q),
    }
}

/// Noether charge `Q = Im \int conj(psi) pi dx` of the phase symmetry.
pub fn charge<T: Scalar>(state: &FieldState<T>) -> Result<T> {
    match state.view() {
        StateView::Real(..) => Err(LabError::KindMismatch {
            expected: "complex",
            found: "real",
        }),
        StateView::Complex(p, q) => {
            let g = state.grid();
            Ok((0..p.len()).map(|k| g.weight(k) * p[k].dot_im(q[k])).sum())
        }
    }
}

/// Integral of the piecewise-linear interpolant of nodal `density` over `[lo, hi]`.
pub(crate) fn integrate_window<T: Scalar>(grid: &Grid1D<T>, density: &[T], lo: T, hi: T) -> T {
    let n = density.len();
    let dx = grid.dx();
    let half = T::lit(0.5);
    let lo = lo.max(grid.x_min());
    let hi = hi.min(grid.x_max());
    if !(hi > lo) {
        return T::zero();
    }
    let mut acc = T::zero();
    // cell j spans [x_j, x_{j+1}]
    let c_lo = grid.coordinate(lo).floor().to_usize().unwrap_or(0).min(n - 2);
    let c_hi = grid.coordinate(hi).floor().to_usize().unwrap_or(0).min(n - 2);
    for j in c_lo..=c_hi {
        let xa = grid.x(j);
        let a = (lo - xa) / dx;
        let b = (hi - xa) / dx;
        let a = a.max(T::zero());
        let b = b.min(T::one());
        if b <= a {
            continue;
        }
        let (f0, f1) = (density[j], density[j + 1]);
        // \int_a^b f0 (1 - s) + f1 s ds
        let seg = f0 * (b - a) + (f1 - f0) * half * (b * b - a * a);
        acc += seg * dx;
    }
    acc
}

/// `(\int_{|x - center| < r} |psi_a - psi_b|^2 dx)^{1/2}` without domain checks.
pub fn local_l2_distance_about<T: Scalar>(
    a: &FieldState<T>,
    b: &FieldState<T>,
    center: T,
    r: T,
) -> Result<T> {
    a.grid().check_same(b.grid())?;
    let density: Vec<T> = (0..a.grid().n_points())
        .map(|k| (a.psi().get(k) - b.psi().get(k)).norm_sqr())
        .collect();
    Ok(integrate_window(a.grid(), &density, center - r, center + r).sqrt())
}

/// Local seminorm distance `||psi_a - psi_b||_{L^2(|x| < r)}`.
pub fn local_l2_distance<T: Scalar>(a: &FieldState<T>, b: &FieldState<T>, r: T) -> Result<T> {
    a.grid().check_same(b.grid())?;
    let g = a.grid();
    let limit = (-g.x_min()).min(g.x_max());
    if r > limit * (T::one() + T::lit(1e-12)) || r < T::zero() {
        return Err(LabError::RadiusExceedsDomain {
            radius: r.as_f64(),
            limit: limit.as_f64(),
        });
    }
    local_l2_distance_about(a, b, T::zero(), r)
}

/// Phase-space local distance `(||dpsi||^2 + ||dpi||^2)^{1/2}` on `|x - center| < r`.
pub fn local_phase_distance<T: Scalar>(
    a: &FieldState<T>,
    b: &FieldState<T>,
    center: T,
    r: T,
) -> Result<T> {
    a.grid().check_same(b.grid())?;
    let density: Vec<T> = (0..a.grid().n_points())
        .map(|k| {
            (a.psi().get(k) - b.psi().get(k)).norm_sqr() + (a.pi().get(k) - b.pi().get(k)).norm_sqr()
        })
        .collect();
    Ok(integrate_window(a.grid(), &density, center - r, center + r).sqrt())
}
