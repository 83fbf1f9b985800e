//! Discrete spectra of `-d^2/dx^2 + c + V(x)` on a Dirichlet box.

use num_complex::Complex;

use crate::error::{LabError, Result};
use crate::field::Grid1D;
use crate::scalar::Scalar;
use crate::soliton::kink_profile;

#[derive(Debug, Clone, PartialEq)]
pub struct SchrodingerOperator1D<T> {
    grid: Grid1D<T>,
    potential: Vec<T>,
    offset: T,
}

impl<T: Scalar> SchrodingerOperator1D<T> {
    pub fn new(grid: Grid1D<T>, potential: Vec<T>, offset: T) -> Result<Self> {
        if potential.len() != grid.n_points() {
            return Err(LabError::GridMismatch(format!(
                "potential has {} samples, grid has {}",
                potential.len(),
                grid.n_points()
            )));
        }
        if let Some(k) = potential.iter().position(|v| !v.is_finite()) {
            return Err(LabError::InvalidParameter(format!("potential not finite at node {k}")));
        }
        Ok(Self {
            grid,
            potential,
            offset,
        })
    }

    pub fn from_fn(grid: Grid1D<T>, offset: T, v: impl Fn(T) -> T) -> Self {
        let potential = grid.xs().into_iter().map(v).collect();
        Self {
            grid,
            potential,
            offset,
        }
    }

    /// Linearization of the Ginzburg-Landau equation at the static kink:
    /// offset 2 and `V = 3 S^2 - 3`.
    pub fn kink_linearization(grid: Grid1D<T>) -> Self {
        let three = T::lit(3.0);
        Self::from_fn(grid, T::lit(2.0), |x| {
            let s = kink_profile(x);
            three * s * s - three
        })
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }
    pub fn potential(&self) -> &[T] {
        &self.potential
    }
    pub fn offset(&self) -> T {
        self.offset
    }

    /// Potential at the walls is small against its peak.
    pub fn decays_at_ends(&self) -> bool {
        let peak = self.potential.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let n = self.potential.len();
        let edge = self.potential[0].abs().max(self.potential[n - 1].abs());
        edge <= T::lit(1e-6) * peak
    }

    fn inv_h2(&self) -> T {
        let dx = self.grid.dx();
        T::one() / (dx * dx)
    }

    fn diagonal(&self, j: usize) -> T {
        T::lit(2.0) * self.inv_h2() + self.offset + self.potential[j]
    }

    /// Number of eigenvalues strictly below `lambda` (Sturm count on the interior nodes).
    pub fn count_below(&self, lambda: T) -> usize {
        let e2 = self.inv_h2() * self.inv_h2();
        let n = self.potential.len();
        let tiny = T::min_positive_value().sqrt();
        let mut count = 0;
        let mut q = T::one();
        for j in 1..n - 1 {
            q = self.diagonal(j) - lambda - if j == 1 { T::zero() } else { e2 / q };
            if q == T::zero() {
                q = -tiny;
            }
            if q < T::zero() {
                count += 1;
            }
        }
        count
    }

    fn lower_bound(&self) -> T {
        let n = self.potential.len();
        (1..n - 1).fold(T::infinity(), |a, j| a.min(self.diagonal(j))) - T::lit(2.0) * self.inv_h2()
    }

    /// The `i`-th smallest eigenvalue by bisection, starting from `[lo, hi]`.
    fn kth(&self, i: usize, mut lo: T, mut hi: T) -> T {
        for _ in 0..200 {
            let mid = T::lit(0.5) * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > i {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        T::lit(0.5) * (lo + hi)
    }

    /// Normalized eigenvector (`sum dx u^2 = 1`, zero at the walls, positive
    /// where its modulus peaks) for an eigenvalue found by [`discrete_spectrum`].
    pub fn eigenvector(&self, lambda: T) -> Vec<T> {
        let n = self.potential.len();
        let m = n - 2;
        let off = -self.inv_h2();
        let shift = lambda + T::lit(1e-10) * (T::one() + lambda.abs());
        let mut x = vec![T::one(); m];
        for _ in 0..4 {
            // Thomas algorithm on (A - shift) y = x
            let mut c = vec![T::zero(); m];
            let mut d = vec![T::zero(); m];
            let mut b = self.diagonal(1) - shift;
            c[0] = off / b;
            d[0] = x[0] / b;
            for k in 1..m {
                b = self.diagonal(k + 1) - shift - off * c[k - 1];
                if b == T::zero() {
                    b = T::epsilon();
                }
                c[k] = off / b;
                d[k] = (x[k] - off * d[k - 1]) / b;
            }
            let mut y = vec![T::zero(); m];
            y[m - 1] = d[m - 1];
            for k in (0..m - 1).rev() {
                y[k] = d[k] - c[k] * y[k + 1];
            }
            let norm = y.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
            x = y.into_iter().map(|v| v / norm).collect();
        }
        let scale = T::one() / self.grid.dx().sqrt();
        let pivot = x.iter().fold(T::zero(), |a: T, &v| if v.abs() > a.abs() { v } else { a });
        let sign = if pivot < T::zero() { -T::one() } else { T::one() };
        let mut out = vec![T::zero(); n];
        for k in 0..m {
            out[k + 1] = sign * scale * x[k];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    /// Sorted eigenvalues below `threshold - margin`.
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Option<Vec<Vec<T>>>,
    /// `10 dx^2`, subtracted from the threshold before classification.
    pub margin: T,
    pub threshold: T,
    /// Set when the potential does not decay to the walls.
    pub edge_contaminated: bool,
}

/// All eigenvalues of the finite-difference operator below `below - 10 dx^2`.
pub fn discrete_spectrum<T: Scalar>(
    op: &SchrodingerOperator1D<T>,
    below: T,
    with_vectors: bool,
) -> Result<Spectrum<T>> {
    if below > op.offset {
        return Err(LabError::InvalidParameter(format!(
            "threshold {below} lies above the continuum edge {}",
            op.offset
        )));
    }
    let dx = op.grid.dx();
    let margin = T::lit(10.0) * dx * dx;
    let cut = below - margin;
    let count = op.count_below(cut);
    let lo = op.lower_bound() - T::one();
    let eigenvalues: Vec<T> = (0..count).map(|i| op.kth(i, lo, cut)).collect();
    let eigenvectors = with_vectors.then(|| eigenvalues.iter().map(|&l| op.eigenvector(l)).collect());
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        margin,
        threshold: below,
        edge_contaminated: !op.decays_at_ends(),
    })
}

/// `omega'(k) = k / sqrt(k^2 + m^2)` for the linear Klein-Gordon branch; requires `m^2 > 0`.
pub fn group_velocity<T: Scalar>(k: T, mass_squared: T) -> T {
    if k.is_infinite() {
        return k.signum();
    }
    k / (k * k + mass_squared).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WienerReport<T> {
    pub min_modulus: T,
    pub argmin: T,
}

/// Minimum of `|rho_hat(k)| = |int e^{ikx} rho dx|` over `n_k` equispaced points
/// of `[k_lo, k_hi]`, with the trapezoid rule in `x`.
pub fn wiener_check<T: Scalar>(
    rho: &[T],
    grid: &Grid1D<T>,
    k_lo: T,
    k_hi: T,
    n_k: usize,
) -> Result<WienerReport<T>> {
    if rho.len() != grid.n_points() {
        return Err(LabError::GridMismatch(format!(
            "density has {} samples, grid has {}",
            rho.len(),
            grid.n_points()
        )));
    }
    if !(k_hi >= k_lo) || n_k == 0 {
        return Err(LabError::InvalidParameter("empty wavenumber band".into()));
    }
    let xs = grid.xs();
    let weighted: Vec<T> = (0..rho.len()).map(|j| grid.weight(j) * rho[j]).collect();
    let mut best = WienerReport {
        min_modulus: T::infinity(),
        argmin: k_lo,
    };
    for i in 0..n_k {
        let k = if n_k == 1 {
            k_lo
        } else {
            k_lo + (k_hi - k_lo) * T::from_usize(i) / T::from_usize(n_k - 1)
        };
        let mut acc = Complex::new(T::zero(), T::zero());
        for (j, &w) in weighted.iter().enumerate() {
            if w != T::zero() {
                let ph = k * xs[j];
                acc += Complex::new(ph.cos(), ph.sin()) * w;
            }
        }
        let m = acc.norm();
        if m < best.min_modulus {
            best = WienerReport {
                min_modulus: m,
                argmin: k,
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn box40(dx: f64) -> Grid1D<f64> {
        Grid1D::<f64>::with_spacing(-40.0, 40.0, dx).unwrap()
    }

    fn poschl_teller(dx: f64) -> SchrodingerOperator1D<f64> {
        SchrodingerOperator1D::from_fn(box40(dx), 2.0, |x| {
            let c = (x / 2f64.sqrt()).cosh();
            -3.0 / (c * c)
        })
    }

    #[test]
    fn poschl_teller_two_point_spectrum() {
        let sp = discrete_spectrum(&poschl_teller(0.01), 2.0, false).unwrap();
        assert_eq!(sp.eigenvalues.len(), 2, "{:?}", sp.eigenvalues);
        assert!(sp.eigenvalues[0].abs() < 1e-3);
        assert!((sp.eigenvalues[1] - 1.5).abs() < 1e-3);
        assert!(!sp.edge_contaminated);
        assert!((sp.margin - 1e-3).abs() < 1e-15);
        // nothing else between 1.5 and 1.99
        let sp = discrete_spectrum(&poschl_teller(0.01), 1.99, false).unwrap();
        assert_eq!(sp.eigenvalues.len(), 2);
    }

    #[test]
    fn kink_linearization_equals_poschl_teller() {
        let a = SchrodingerOperator1D::kink_linearization(box40(0.05));
        let b = poschl_teller(0.05);
        for (p, q) in a.potential().iter().zip(b.potential()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn free_operator_has_no_bound_states() {
        let op = SchrodingerOperator1D::from_fn(box40(0.02), 2.0, |_| 0.0);
        assert!(discrete_spectrum(&op, 2.0, false).unwrap().eigenvalues.is_empty());
    }

    #[test]
    fn reflectionless_well() {
        // -u'' - 2 sech^2 x u has the single bound state sech x at -1
        let op = SchrodingerOperator1D::from_fn(box40(0.01), 0.0, |x| -2.0 / x.cosh().powi(2));
        let sp = discrete_spectrum(&op, 0.0, true).unwrap();
        assert_eq!(sp.eigenvalues.len(), 1);
        assert!((sp.eigenvalues[0] + 1.0).abs() < 1e-3);
        let u = &sp.eigenvectors.unwrap()[0];
        let xs = op.grid().xs();
        let exact: Vec<f64> = xs.iter().map(|&x| 1.0 / (2f64.sqrt() * x.cosh())).collect();
        let err = u.iter().zip(&exact).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn second_order_convergence() {
        let err = |dx: f64| {
            let sp = discrete_spectrum(&poschl_teller(dx), 2.0, false).unwrap();
            (sp.eigenvalues[1] - 1.5).abs()
        };
        let r = err(0.04) / err(0.02);
        assert!((3.5..=4.5).contains(&r), "{r}");
    }

    #[test]
    fn zero_mode_is_kink_derivative() {
        let op = SchrodingerOperator1D::kink_linearization(box40(0.01));
        let sp = discrete_spectrum(&op, 2.0, true).unwrap();
        let e0 = &sp.eigenvectors.as_ref().unwrap()[0];
        let g = op.grid();
        let ds: Vec<f64> = g
            .xs()
            .iter()
            .map(|&x| 1.0 / (2f64.sqrt() * (x / 2f64.sqrt()).cosh().powi(2)))
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>() * g.dx();
        let overlap = dot(e0, &ds) / dot(&ds, &ds).sqrt();
        assert!(overlap.abs() > 0.999, "{overlap}");
        // the second mode is odd about the centre as well: tanh sech
        let e1 = &sp.eigenvectors.as_ref().unwrap()[1];
        let m: Vec<f64> = g.xs().iter().map(|&x| crate::soliton::internal_mode_shape(x)).collect();
        assert!((dot(e1, &m) / dot(&m, &m).sqrt()).abs() > 0.999);
    }

    #[test]
    fn eigenvalue_count_is_monotone_and_edge_flag() {
        let op = poschl_teller(0.05);
        let mut last = 0;
        for i in 0..50 {
            let c = op.count_below(-1.0 + 0.1 * i as f64);
            assert!(c >= last);
            last = c;
        }
        let wide = SchrodingerOperator1D::from_fn(box40(0.05), 2.0, |x| -0.5 / (1.0 + (x / 30.0).powi(2)));
        assert!(discrete_spectrum(&wide, 2.0, false).unwrap().edge_contaminated);
        assert!(discrete_spectrum(&op, 2.5, false).is_err());
    }

    #[test]
    fn group_velocity_values() {
        assert_eq!(group_velocity(0.0, 2.0), 0.0);
        assert!((group_velocity(2f64.sqrt(), 2.0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(group_velocity(f64::INFINITY, 2.0), 1.0);
        assert!((group_velocity(1e8f64, 2.0) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn group_velocity_odd_increasing(k in 0.0f64..50.0, dk in 1e-6f64..1.0, m2 in 0.1f64..5.0) {
            prop_assert_eq!(group_velocity(-k, m2), -group_velocity(k, m2));
            prop_assert!(group_velocity(k + dk, m2) > group_velocity(k, m2));
            prop_assert!(group_velocity(k, m2).abs() < 1.0);
        }
    }

    #[test]
    fn wiener_examples() {
        let g = Grid1D::<f64>::with_spacing(-10.0, 10.0, 0.01).unwrap();
        let gauss: Vec<f64> = g.xs().iter().map(|x| (-x * x).exp()).collect();
        let r = wiener_check(&gauss, &g, 0.0, 6.0, 301).unwrap();
        assert!(r.min_modulus > 0.0);
        let exact = std::f64::consts::PI.sqrt() * (-36.0f64 / 4.0).exp();
        assert!((r.min_modulus - exact).abs() < 1e-6 * exact.max(1e-6));

        // half value at the jumps, so the trapezoid sum is dx sin(k) cot(k dx / 2)
        let ind: Vec<f64> = g
            .xs()
            .iter()
            .map(|&x| match x.abs() {
                a if (a - 1.0).abs() < 1e-9 => 0.5,
                a if a < 1.0 => 1.0,
                _ => 0.0,
            })
            .collect();
        let r = wiener_check(&ind, &g, 2.0, 4.0, 2001).unwrap();
        assert!(r.min_modulus < 1e-3, "{}", r.min_modulus);
        assert!((r.argmin - std::f64::consts::PI).abs() < 0.01);

        let mut delta = vec![0.0; g.n_points()];
        delta[g.nearest(0.0)] = 1.0 / g.dx();
        for k in [0.0, 1.0, 7.5] {
            let r = wiener_check(&delta, &g, k, k, 1).unwrap();
            assert!((r.min_modulus - 1.0).abs() < 1e-12);
        }
    }
}
