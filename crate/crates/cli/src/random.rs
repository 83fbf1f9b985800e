//! Seeded smooth initial data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fieldlab::{Complex, Grid, State};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    Real,
    Complex,
    /// Real field on a background of kinks joining the `+-1` vacua.
    Kink,
}

impl InitialKind {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "real" => Ok(Self::Real),
            "complex" => Ok(Self::Complex),
            "kink" => Ok(Self::Kink),
            _ => Err(CliError::config(format!("unknown initial kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub seed: u64,
    pub support: (f64, f64),
    pub amplitude: f64,
    pub smoothness: f64,
    pub bumps: usize,
    pub kind: InitialKind,
}

/// Quintic smoothstep, C2 at both ends.
fn smoothstep(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    z * z * z * (10.0 - 15.0 * z + 6.0 * z * z)
}

/// 1 on the support, falling to 0 over three smoothness scales outside it.
pub fn cutoff(x: f64, support: (f64, f64), scale: f64) -> f64 {
    let w = 3.0 * scale;
    smoothstep((x - support.0 + w) / w) * smoothstep((support.1 + w - x) / w)
}

struct Bump {
    center: f64,
    width: f64,
    weight: Complex<f64>,
}

fn draw(rng: &mut ChaCha8Rng, spec: &RandomSpec, complex: bool) -> Vec<Bump> {
    (0..spec.bumps)
        .map(|_| {
            let center = rng.gen_range(spec.support.0..=spec.support.1);
            let width = spec.smoothness * rng.gen_range(1.0..3.0);
            let mag = rng.gen_range(0.3..1.0);
            let weight = if complex {
                Complex::from_polar(mag, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            } else if rng.gen_bool(0.5) {
                Complex::new(mag, 0.0)
            } else {
                Complex::new(-mag, 0.0)
            };
            Bump { center, width, weight }
        })
        .collect()
}

fn sum(bumps: &[Bump], x: f64) -> Complex<f64> {
    bumps
        .iter()
        .map(|b| b.weight * (-((x - b.center) / b.width).powi(2)).exp())
        .sum()
}

/// Sum of seeded Gaussian bumps times a smooth cutoff, scaled so that the
/// largest `|psi|` equals `amplitude`; `pi` is built the same way with half
/// the amplitude. Kink data add a background `prod tanh((x - c_j)/sqrt 2)`
/// with 1 to 3 seeded sign changes inside the support. Amplitude 0 gives the
/// vacuum (`+1` for kink data).
pub fn random_initial(spec: &RandomSpec, grid: &Grid) -> CliResult<State> {
    let (lo, hi) = spec.support;
    if !(lo < hi) || lo < grid.x_min() || hi > grid.x_max() {
        return Err(CliError::config(format!("support [{lo}, {hi}] must lie inside the grid")));
    }
    if !(spec.amplitude >= 0.0) || !(spec.smoothness > 0.0) || spec.bumps == 0 {
        return Err(CliError::config("amplitude >= 0, smoothness > 0 and bumps >= 1 required"));
    }
    let complex = spec.kind == InitialKind::Complex;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let psi_bumps = draw(&mut rng, spec, complex);
    let pi_bumps = draw(&mut rng, spec, complex);
    let kinks: Vec<f64> = match spec.kind {
        InitialKind::Kink => {
            let k = rng.gen_range(1..=3);
            let mut c: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..hi)).collect();
            c.sort_by(f64::total_cmp);
            c
        }
        _ => Vec::new(),
    };
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let xs = grid.xs();
    let envelope = |bumps: &[Bump], target: f64| -> Vec<Complex<f64>> {
        let raw: Vec<Complex<f64>> = xs
            .iter()
            .map(|&x| sum(bumps, x) * cutoff(x, spec.support, spec.smoothness))
            .collect();
        let peak = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let scale = if peak > 0.0 { target / peak } else { 0.0 };
        raw.into_iter().map(|z| z * scale).collect()
    };
    let psi = envelope(&psi_bumps, spec.amplitude);
    let pi = envelope(&pi_bumps, 0.5 * spec.amplitude);
    let time = 0.0;
    match spec.kind {
        InitialKind::Complex => Ok(State::complex(*grid, psi, pi, time)?),
        InitialKind::Real => Ok(State::real(
            *grid,
            psi.iter().map(|z| z.re).collect(),
            pi.iter().map(|z| z.re).collect(),
            time,
        )?),
        InitialKind::Kink => {
            let background = |x: f64| -> f64 {
                if spec.amplitude == 0.0 {
                    return 1.0;
                }
                kinks
                    .iter()
                    .map(|c| ((x - c) / std::f64::consts::SQRT_2).tanh())
                    .product::<f64>()
                    * sign
            };
            Ok(State::real(
                *grid,
                xs.iter().zip(&psi).map(|(&x, z)| background(x) + z.re).collect(),
                pi.iter().map(|z| z.re).collect(),
                time,
            )?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64, kind: InitialKind) -> RandomSpec {
        RandomSpec {
            seed,
            support: (-20.0, 20.0),
            amplitude: 1.0,
            smoothness: 1.0,
            bumps: 10,
            kind,
        }
    }

    #[test]
    fn zero_amplitude_is_vacuum() {
        let g = Grid::with_spacing(-40.0, 40.0, 0.1).unwrap();
        for kind in [InitialKind::Real, InitialKind::Complex, InitialKind::Kink] {
            let s = random_initial(&RandomSpec { amplitude: 0.0, ..spec(3, kind) }, &g).unwrap();
            let v = if kind == InitialKind::Kink { 1.0 } else { 0.0 };
            assert!(s.psi().moduli().iter().all(|&m| m == v));
            assert!(s.pi().moduli().iter().all(|&m| m == 0.0));
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let g = Grid::with_spacing(-40.0, 40.0, 0.1).unwrap();
        let a = random_initial(&spec(11, InitialKind::Complex), &g).unwrap();
        let b = random_initial(&spec(11, InitialKind::Complex), &g).unwrap();
        let c = random_initial(&spec(12, InitialKind::Complex), &g).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn amplitude_and_support_bounds_over_many_seeds() {
        let g = Grid::with_spacing(-30.0, 30.0, 0.1).unwrap();
        for seed in 0..1000 {
            let kind = [InitialKind::Real, InitialKind::Complex][seed as usize % 2];
            let sp = RandomSpec { support: (-10.0, 5.0), smoothness: 0.5 + (seed % 3) as f64 * 0.5, ..spec(seed, kind) };
            let s = random_initial(&sp, &g).unwrap();
            let psi = s.psi().moduli();
            let pi = s.pi().moduli();
            assert!(psi.iter().fold(0.0f64, |a, &b| a.max(b)) <= 1.2 * sp.amplitude);
            let w = 3.0 * sp.smoothness;
            for (k, x) in g.xs().into_iter().enumerate() {
                if x < -10.0 - w || x > 5.0 + w {
                    assert!(psi[k] == 0.0 && pi[k] == 0.0, "seed {seed} x {x}");
                }
            }
        }
    }

    #[test]
    fn kink_background_has_sign_changes() {
        let g = Grid::with_spacing(-60.0, 60.0, 0.1).unwrap();
        for seed in 0..20 {
            let s = random_initial(&spec(seed, InitialKind::Kink), &g).unwrap();
            let psi = s.psi().re();
            assert!((psi[0].abs() - 1.0).abs() < 1e-9);
            assert!((psi[psi.len() - 1].abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn support_outside_grid_is_rejected() {
        let g = Grid::with_spacing(-10.0, 10.0, 0.1).unwrap();
        assert!(random_initial(&spec(0, InitialKind::Real), &g).is_err());
    }
}
