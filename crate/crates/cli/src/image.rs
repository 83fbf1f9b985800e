//! Space-time heatmaps as binary PPM (P6). Time runs upward: the first frame
//! is the bottom row.

use std::fs;
use std::path::Path;

use fieldlab::{Band, BandConfig, Traj};

use crate::error::{CliError, CliResult};

pub const RED: [u8; 3] = [220, 30, 30];
pub const BLUE: [u8; 3] = [30, 60, 220];
pub const YELLOW: [u8; 3] = [240, 220, 40];
/// Vacuum band, split by sign so the sides of a kink stay distinguishable.
pub const VACUUM_PLUS: [u8; 3] = [250, 205, 205];
pub const VACUUM_MINUS: [u8; 3] = [205, 215, 250];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub pixels: Vec<[u8; 3]>,
}

impl Heatmap {
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        fs::write(path, self.to_ppm())?;
        Ok(())
    }

    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }
}

pub fn parse_ppm(bytes: &[u8]) -> CliResult<Heatmap> {
    // header: four whitespace separated tokens
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(CliError::config("truncated PPM header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    i += 1;
    if tokens[0] != "P6" || tokens[3] != "255" {
        return Err(CliError::config("not an 8-bit P6 image"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| CliError::config("bad PPM size"));
    let (width, height) = (num(&tokens[1])?, num(&tokens[2])?);
    let body = bytes.get(i..).unwrap_or(&[]);
    if body.len() != width * height * 3 {
        return Err(CliError::config("PPM payload size mismatch"));
    }
    Ok(Heatmap {
        width,
        height,
        pixels: body.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
    })
}

pub fn band_color(band: Band, psi: f64) -> [u8; 3] {
    match band {
        Band::Above => RED,
        Band::Below => BLUE,
        Band::Kink => YELLOW,
        Band::Vacuum if psi >= 0.0 => VACUUM_PLUS,
        Band::Vacuum => VACUUM_MINUS,
    }
}

pub fn color_band(c: [u8; 3]) -> Option<Band> {
    match c {
        RED => Some(Band::Above),
        BLUE => Some(Band::Below),
        YELLOW => Some(Band::Kink),
        VACUUM_PLUS | VACUUM_MINUS => Some(Band::Vacuum),
        _ => None,
    }
}

/// Grid nodes shown as columns: every `stride`-th node.
pub fn column_nodes(n_points: usize, max_width: usize) -> Vec<usize> {
    let stride = n_points.div_ceil(max_width.max(1)).max(1);
    (0..n_points).step_by(stride).collect()
}

fn frames<F: Fn(usize, usize) -> [u8; 3]>(
    traj: &Traj,
    max_width: usize,
    max_height: usize,
    color: F,
) -> CliResult<Heatmap> {
    let first = traj
        .snapshots
        .first()
        .ok_or_else(|| CliError::config("heatmap needs recorded snapshots"))?;
    let cols = column_nodes(first.grid().n_points(), max_width);
    let rows = column_nodes(traj.snapshots.len(), max_height);
    let mut pixels = Vec::with_capacity(cols.len() * rows.len());
    for &f in rows.iter().rev() {
        for &k in &cols {
            pixels.push(color(f, k));
        }
    }
    Ok(Heatmap {
        width: cols.len(),
        height: rows.len(),
        pixels,
    })
}

/// Three-band palette of a real field.
pub fn kink_heatmap(traj: &Traj, bands: &BandConfig<f64>, max_width: usize, max_height: usize) -> CliResult<Heatmap> {
    let re: Vec<Vec<f64>> = traj.snapshots.iter().map(|s| s.psi().re()).collect();
    frames(traj, max_width, max_height, |f, k| {
        let v = re[f][k];
        band_color(bands.classify(v), v)
    })
}

/// `|psi| / scale` in grayscale, saturating at white.
pub fn magnitude_heatmap(traj: &Traj, scale: f64, max_width: usize, max_height: usize) -> CliResult<Heatmap> {
    let m: Vec<Vec<f64>> = traj.snapshots.iter().map(|s| s.psi().moduli()).collect();
    frames(traj, max_width, max_height, |f, k| {
        let g = (255.0 * (m[f][k] / scale).clamp(0.0, 1.0)).round() as u8;
        [g, g, g]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fieldlab::{run, Boundary, Config, Grid, Model, State};

    #[test]
    fn ppm_round_trip() {
        let h = Heatmap {
            width: 2,
            height: 1,
            pixels: vec![RED, [0, 0, 0]],
        };
        let bytes = h.to_ppm();
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(parse_ppm(&bytes).unwrap(), h);
        assert!(parse_ppm(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn bands_match_classification() {
        let g = Grid::with_spacing(-10.0, 10.0, 0.05).unwrap();
        let s = State::from_fn_real(g, 0.0, |x| 1.3 * (x / 2f64.sqrt()).tanh() + 0.2 * x.sin(), |_| 0.0);
        let cfg = Config::new(0.02, Boundary::DirichletVacuum { left: -1.3, right: 1.3 }, 5);
        let traj = run(&s, &Model::ginzburg_landau(), &cfg, 0.5, &[]).unwrap();
        let bands = BandConfig::new(0.05).unwrap();
        let img = kink_heatmap(&traj, &bands, 150, 100).unwrap();
        let cols = column_nodes(g.n_points(), 150);
        assert_eq!(img.width, cols.len());
        assert_eq!(img.height, traj.snapshots.len());
        for (row, snap) in traj.snapshots.iter().rev().enumerate() {
            let psi = snap.psi().re();
            for (c, &k) in cols.iter().enumerate() {
                assert_eq!(color_band(img.pixel(c, row)), Some(bands.classify(psi[k])));
            }
        }
    }

    #[test]
    fn grayscale_saturates() {
        let g = Grid::new(0.0, 1.0, 3).unwrap();
        let traj = Traj {
            times: vec![0.0],
            snapshots: vec![State::real(g, vec![0.0, 0.5, 3.0], vec![0.0; 3], 0.0).unwrap()],
            observables: vec![],
            record_every: 1,
        };
        let img = magnitude_heatmap(&traj, 1.0, 10, 10).unwrap();
        assert_eq!(img.pixels, vec![[0; 3], [128; 3], [255; 3]]);
    }
}
