//! A string `psi_tt = psi_xx + f(x, psi)` coupled to oscillators, either at
//! points (`f = sum_k delta(x - x_k) F_k(psi)`) or through a density
//! (`f = chi(x) F(psi)`).

use crate::error::{LabError, Result};
use crate::field::{gradient_energy, EnergySnapshot, FieldKind, FieldState, Grid1D, StateView};
use crate::integrate::{run, Dynamics, ForceLaw, IntegratorConfig, Trajectory};
use crate::models::{laplacian_into, Nonlinearity};
use crate::scalar::{FieldValue, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaRegularization {
    /// Weight `1/dx` on the nearest node.
    Node,
    /// Linear hat over the two bracketing nodes.
    Hat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coupling<T> {
    Points(Vec<(T, Nonlinearity<T>)>),
    Distributed { chi: Vec<T>, force: Nonlinearity<T> },
}

/// The oscillator force is `F(y) = g(y^2) y` of a [`Nonlinearity`]; for
/// example `GinzburgLandau` gives `y - y^3` and `Linear { coefficient: -k }`
/// gives `-k y`.
#[derive(Debug, Clone, PartialEq)]
pub struct StringOscillatorModel<T> {
    coupling: Coupling<T>,
    regularization: DeltaRegularization,
}

impl<T: Scalar> StringOscillatorModel<T> {
    pub fn point(x: T, force: Nonlinearity<T>) -> Self {
        Self {
            coupling: Coupling::Points(vec![(x, force)]),
            regularization: DeltaRegularization::Node,
        }
    }

    pub fn points(points: Vec<(T, Nonlinearity<T>)>) -> Self {
        Self {
            coupling: Coupling::Points(points),
            regularization: DeltaRegularization::Node,
        }
    }

    pub fn distributed(chi: Vec<T>, force: Nonlinearity<T>) -> Result<Self> {
        if chi.iter().any(|&c| !(c >= T::zero())) {
            return Err(LabError::InvalidParameter("coupling density must be non-negative".into()));
        }
        Ok(Self {
            coupling: Coupling::Distributed { chi, force },
            regularization: DeltaRegularization::Node,
        })
    }

    pub fn with_regularization(mut self, r: DeltaRegularization) -> Self {
        self.regularization = r;
        self
    }

    pub fn coupling(&self) -> &Coupling<T> {
        &self.coupling
    }

    /// Nodes and weights carrying coupling point `x`.
    fn stencil(&self, grid: &Grid1D<T>, x: T) -> Result<Vec<(usize, T)>> {
        if x <= grid.x_min() || x >= grid.x_max() {
            return Err(LabError::InvalidParameter(format!(
                "coupling point {x} outside the grid interior"
            )));
        }
        let inv = T::one() / grid.dx();
        Ok(match self.regularization {
            DeltaRegularization::Node => vec![(grid.nearest(x), inv)],
            DeltaRegularization::Hat => {
                let c = (x - grid.x_min()) / grid.dx();
                let j = c.floor().to_usize().unwrap_or(0).min(grid.n_points() - 2);
                let s = c - T::from_usize(j);
                vec![(j, (T::one() - s) * inv), (j + 1, s * inv)]
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct BoundStringModel<T> {
    grid: Grid1D<T>,
    /// Point couplings: stencil weights and force.
    points: Vec<(Vec<(usize, T)>, Nonlinearity<T>)>,
    density: Option<(Vec<T>, Nonlinearity<T>)>,
}

impl<T: Scalar> BoundStringModel<T> {
    /// `psi(x_k)` seen by a coupling: the weighted stencil average.
    fn point_value<E: FieldValue<T>>(&self, stencil: &[(usize, T)], psi: &[E]) -> E {
        let total: T = stencil.iter().map(|s| s.1).sum();
        let mut acc = E::zero();
        for &(j, w) in stencil {
            acc += psi[j] * (w / total);
        }
        acc
    }
}

impl<T: Scalar> ForceLaw<T> for BoundStringModel<T> {
    fn force<E: FieldValue<T>>(&self, psi: &[E], out: &mut [E]) {
        laplacian_into(&self.grid, psi, out);
        for (stencil, f) in &self.points {
            let y = self.point_value(stencil, psi);
            let fy = f.eval_f(y);
            for &(j, w) in stencil {
                out[j] += fy * w;
            }
        }
        if let Some((chi, f)) = &self.density {
            let n = psi.len();
            for j in 1..n - 1 {
                if chi[j] != T::zero() {
                    out[j] += f.eval_f(psi[j]) * chi[j];
                }
            }
        }
    }
}

impl<T: Scalar> Dynamics<T> for StringOscillatorModel<T> {
    type Law = BoundStringModel<T>;

    fn field_kind(&self) -> FieldKind {
        FieldKind::Real
    }

    fn bind(&self, grid: &Grid1D<T>) -> Result<BoundStringModel<T>> {
        Ok(match &self.coupling {
            Coupling::Points(pts) => BoundStringModel {
                grid: *grid,
                points: pts
                    .iter()
                    .map(|(x, f)| Ok((self.stencil(grid, *x)?, f.clone())))
                    .collect::<Result<_>>()?,
                density: None,
            },
            Coupling::Distributed { chi, force } => {
                if chi.len() != grid.n_points() {
                    return Err(LabError::GridMismatch(format!(
                        "coupling density has {} samples, grid has {}",
                        chi.len(),
                        grid.n_points()
                    )));
                }
                BoundStringModel {
                    grid: *grid,
                    points: Vec::new(),
                    density: Some((chi.clone(), force.clone())),
                }
            }
        })
    }

    /// `int (pi^2 + psi_x^2)/2 + sum_k [U_k(psi(x_k)^2) - U_k(0)]`; the
    /// oscillator part is reported as `potential`.
    fn energy(&self, state: &FieldState<T>) -> Result<EnergySnapshot<T>> {
        let law = self.bind(state.grid())?;
        let g = state.grid();
        let (psi, pi) = match state.view() {
            StateView::Real(p, q) => (p, q),
            StateView::Complex(..) => {
                return Err(LabError::KindMismatch {
                    expected: "real",
                    found: "complex",
                })
            }
        };
        let kin: T = (0..psi.len()).map(|k| g.weight(k) * pi[k] * pi[k]).sum::<T>() * T::lit(0.5);
        let mut pot = T::zero();
        for (stencil, f) in &law.points {
            let y = law.point_value(stencil, psi);
            pot += f.eval_u(y) - f.potential_of(T::zero());
        }
        if let Some((chi, f)) = &law.density {
            let u0 = f.potential_of(T::zero());
            pot += (0..psi.len())
                .map(|k| g.weight(k) * chi[k] * (f.eval_u(psi[k]) - u0))
                .sum::<T>();
        }
        Ok(EnergySnapshot::from_parts(kin, gradient_energy(g, psi), pot, T::zero()))
    }
}

/// Grid simulation of the coupled string; identical to [`run`] otherwise.
pub fn simulate_string<T: Scalar>(
    model: &StringOscillatorModel<T>,
    initial: &FieldState<T>,
    cfg: &IntegratorConfig<T>,
    t_end: T,
) -> Result<Trajectory<T>> {
    run(initial, model, cfg, t_end, &[])
}

/// Free-string value at `x0` by d'Alembert's formula,
/// `(f(x0 - t) + f(x0 + t))/2 + (1/2) int_{x0-t}^{x0+t} g`.
pub fn free_trace<T: Scalar>(initial: &FieldState<T>, x0: T, t: T) -> T {
    let g = initial.grid();
    let psi = initial.psi().re();
    let pi = initial.pi().re();
    let sample = |x: T| -> T {
        if x <= g.x_min() || x >= g.x_max() {
            return T::zero();
        }
        let c = (x - g.x_min()) / g.dx();
        let j = c.floor().to_usize().unwrap_or(0).min(psi.len() - 2);
        let s = c - T::from_usize(j);
        psi[j] * (T::one() - s) + psi[j + 1] * s
    };
    let lo = x0 - t;
    let hi = x0 + t;
    let integral = crate::field::integrate_window(g, &pi, lo, hi);
    T::lit(0.5) * (sample(lo) + sample(hi)) + T::lit(0.5) * integral
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
}

/// Coupling-point trace `y = incoming(t) + u(t)` for a single node coupling,
/// from the jump condition `2 u' = F(y)` with `u(0) = y0 - incoming(0)`.
pub fn trace_ode_oracle<T: Scalar>(
    force: &Nonlinearity<T>,
    y0: T,
    incoming: &dyn Fn(T) -> T,
    t_end: T,
    dt: T,
) -> Result<TraceSeries<T>> {
    if !(dt > T::zero()) {
        return Err(LabError::InvalidParameter("dt must be positive".into()));
    }
    let steps = (t_end / dt).round().to_usize().unwrap_or(0);
    let rhs = |t: T, u: T| T::lit(0.5) * force.eval_f(incoming(t) + u);
    let mut u = y0 - incoming(T::zero());
    let mut out = TraceSeries {
        times: vec![T::zero()],
        values: vec![y0],
    };
    let half = T::lit(0.5);
    for i in 0..steps {
        let t = dt * T::from_usize(i);
        let k1 = rhs(t, u);
        let k2 = rhs(t + half * dt, u + half * dt * k1);
        let k3 = rhs(t + half * dt, u + half * dt * k2);
        let k4 = rhs(t + dt, u + dt * k3);
        u += dt / T::lit(6.0) * (k1 + T::lit(2.0) * (k2 + k3) + k4);
        let t1 = dt * T::from_usize(i + 1);
        if !u.is_finite() {
            return Err(LabError::BlowUp { time: t1.as_f64() });
        }
        out.times.push(t1);
        out.values.push(incoming(t1) + u);
    }
    Ok(out)
}

/// Zeros of `F` on `[lo, hi]` by scanning `n` cells and bisecting sign changes.
pub fn stationary_states<T: Scalar>(force: &Nonlinearity<T>, lo: T, hi: T, n: usize) -> Vec<T> {
    let f = |y: T| force.eval_f(y);
    let n = n.max(2);
    let at = |i: usize| lo + (hi - lo) * T::from_usize(i) / T::from_usize(n);
    let mut roots: Vec<T> = Vec::new();
    let tol = (hi - lo) * T::epsilon() * T::lit(16.0);
    let push = |r: T, roots: &mut Vec<T>| {
        if roots.last().map(|&l: &T| (r - l).abs() > tol).unwrap_or(true) {
            roots.push(r);
        }
    };
    for i in 0..n {
        let (a, b) = (at(i), at(i + 1));
        let (fa, fb) = (f(a), f(b));
        if fa == T::zero() {
            push(a, &mut roots);
        } else if fa * fb < T::zero() {
            let (mut l, mut r) = (a, b);
            for _ in 0..200 {
                let m = T::lit(0.5) * (l + r);
                if m <= l || m >= r {
                    break;
                }
                if f(l) * f(m) <= T::zero() {
                    r = m;
                } else {
                    l = m;
                }
            }
            push(T::lit(0.5) * (l + r), &mut roots);
        }
        if i + 1 == n && fb == T::zero() {
            push(b, &mut roots);
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::local_l2_distance;
    use crate::integrate::Boundary;

    fn grid(dx: f64) -> Grid1D<f64> {
        Grid1D::<f64>::with_spacing(-30.0, 30.0, dx).unwrap()
    }

    fn bump(g: Grid1D<f64>, c: f64, a: f64) -> FieldState<f64> {
        FieldState::from_fn_real(g, 0.0, |x| a * (-(x - c).powi(2)).exp(), |x| -a * 0.5 * (x - c) * (-(x - c).powi(2)).exp())
    }

    fn cfg(dx: f64) -> IntegratorConfig<f64> {
        IntegratorConfig::new(0.5 * dx, Boundary::DirichletVacuum { left: 0.0, right: 0.0 }, ((0.1 / (0.5 * dx)).round()) as usize)
    }

    #[test]
    fn free_string_matches_dalembert() {
        let gl = Nonlinearity::Linear { coefficient: 0.0 };
        let mut errs = Vec::new();
        for dx in [0.04, 0.02] {
            let g = grid(dx);
            let st = bump(g, 3.0, 1.0);
            let traj = simulate_string(&StringOscillatorModel::point(0.0, gl.clone()), &st, &cfg(dx), 10.0).unwrap();
            let last = traj.snapshots.last().unwrap();
            let t = last.time();
            let err = (0..g.n_points())
                .map(|k| (last.psi().re()[k] - free_trace(&st, g.x(k), t)).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        let r = errs[0] / errs[1];
        assert!((3.0..5.0).contains(&r), "{errs:?}");
    }

    #[test]
    fn oracle_phase_line() {
        let gl = Nonlinearity::<f64>::GinzburgLandau;
        let tr = trace_ode_oracle(&gl, 0.5, &|_| 0.0, 30.0, 0.01).unwrap();
        assert!(tr.values.windows(2).all(|w| w[1] >= w[0]));
        assert!((tr.values.last().unwrap() - 1.0).abs() < 1e-6);
        let zero = Nonlinearity::Linear { coefficient: 0.0 };
        let tr = trace_ode_oracle(&zero, 0.3, &|_| 0.0, 5.0, 0.01).unwrap();
        assert!(tr.values.iter().all(|&v| v == 0.3));
    }

    #[test]
    fn linear_coupling_decay_rate() {
        // 2 y' = -k y  =>  rate k/2
        let k = 0.8;
        let f = Nonlinearity::Linear { coefficient: -k };
        // the bump carries zero net velocity, so after it passes y relaxes to 0
        let g = grid(0.01);
        let st = bump(g, 4.0, 0.5);
        let mid = g.nearest(0.0);
        let model = StringOscillatorModel::point(0.0, f);
        let traj = simulate_string(&model, &st, &cfg(0.01), 16.0).unwrap();
        let y: Vec<f64> = traj.snapshots.iter().map(|s| s.psi().re()[mid]).collect();
        let (t1, t2) = (100, 150);
        let rate = (y[t1] / y[t2]).ln() / (traj.times[t2] - traj.times[t1]);
        assert!((rate - k / 2.0).abs() < 0.02, "{rate}");
    }

    #[test]
    fn grid_trace_matches_oracle() {
        let f = Nonlinearity::<f64>::GinzburgLandau;
        let g = grid(0.01);
        let st = bump(g, 4.0, 0.6);
        let model = StringOscillatorModel::point(0.0, f.clone());
        let traj = simulate_string(&model, &st, &cfg(0.01), 25.0).unwrap();
        let mid = g.nearest(0.0);
        let inc = |t: f64| free_trace(&st, 0.0, t);
        let tr = trace_ode_oracle(&f, st.psi().re()[mid], &inc, 25.0, 0.005).unwrap();
        let mut worst = 0.0f64;
        for (s, t) in traj.snapshots.iter().zip(&traj.times) {
            if *t < 8.0 {
                continue;
            }
            let k = (t / 0.005).round() as usize;
            worst = worst.max((s.psi().re()[mid] - tr.values[k]).abs());
        }
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn attraction_to_stationary_constant() {
        let f = Nonlinearity::<f64>::GinzburgLandau;
        let g = Grid1D::<f64>::with_spacing(-40.0, 40.0, 0.02).unwrap();
        let st = bump(g, -3.0, 0.4);
        let model = StringOscillatorModel::point(0.0, f.clone());
        let traj = simulate_string(&model, &st, &cfg(0.02), 40.0).unwrap();
        let last = traj.snapshots.last().unwrap();
        let zs = stationary_states(&f, -2.0, 2.0, 400);
        let best = zs
            .iter()
            .map(|&z| local_l2_distance(last, &FieldState::constant(g, FieldKind::Real, z), 5.0).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(best < 0.02, "{best}");
    }

    #[test]
    fn energy_is_conserved_without_boundary_flux() {
        let f = Nonlinearity::<f64>::GinzburgLandau;
        let g = grid(0.02);
        let st = bump(g, 2.0, 0.5);
        for reg in [DeltaRegularization::Node, DeltaRegularization::Hat] {
            let model = StringOscillatorModel::point(0.013, f.clone()).with_regularization(reg);
            let traj = simulate_string(&model, &st, &cfg(0.02), 15.0).unwrap();
            let e = traj.series("energy").unwrap();
            let drift = e.iter().fold(0.0f64, |a, v| a.max((v - e[0]).abs()));
            assert!(drift < 1e-4 * e[0].abs().max(1.0), "{drift}");
        }
    }

    #[test]
    fn distributed_coupling_and_errors() {
        let g = grid(0.05);
        let chi: Vec<f64> = g.xs().iter().map(|&x| if x.abs() < 1.0 { 0.5 } else { 0.0 }).collect();
        let m = StringOscillatorModel::distributed(chi, Nonlinearity::GinzburgLandau).unwrap();
        let traj = simulate_string(&m, &bump(g, 0.0, 0.3), &cfg(0.05), 5.0).unwrap();
        let e = traj.series("energy").unwrap();
        assert!((e[e.len() - 1] - e[0]).abs() < 1e-4);
        assert!(StringOscillatorModel::distributed(vec![-1.0], Nonlinearity::GinzburgLandau).is_err());
        let out = StringOscillatorModel::point(100.0, Nonlinearity::GinzburgLandau);
        assert!(simulate_string(&out, &bump(g, 0.0, 0.1), &cfg(0.05), 1.0).is_err());
    }

    #[test]
    fn stationary_state_examples() {
        let gl = Nonlinearity::<f64>::GinzburgLandau;
        let z = stationary_states(&gl, -2.0, 2.0, 400);
        assert_eq!(z.len(), 3);
        for (a, b) in z.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let z = stationary_states(&Nonlinearity::<f64>::Linear { coefficient: -1.0 }, -2.0, 2.0, 401);
        assert_eq!(z.len(), 1);
        assert!(z[0].abs() < 1e-12);
        assert!(stationary_states(&gl, 2.0, 5.0, 100).is_empty());
    }
}
