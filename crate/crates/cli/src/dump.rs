//! Binary field dumps.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SLAB"
//!      4     2  format version (1)
//!      6     1  field kind: 0 real, 1 complex
//!      7     1  payload encoding: 0 = f64
//!      8     1  flags: bit 0 periodic grid
//!      9     7  reserved, zero
//!     16     8  n_points (u64)
//!     24     8  x_min
//!     32     8  x_max
//!     40     8  dx
//!     48     8  time
//!     56        psi samples, then pi samples (complex: re, im interleaved)
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use fieldlab::{Complex, FieldKind, Grid, State};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"SLAB";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 56;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpHeader {
    pub version: u16,
    pub kind: FieldKind,
    pub periodic: bool,
    pub n_points: u64,
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub time: f64,
}

impl DumpHeader {
    pub fn of(state: &State) -> Self {
        let g = state.grid();
        Self {
            version: VERSION,
            kind: state.kind(),
            periodic: g.is_periodic(),
            n_points: g.n_points() as u64,
            x_min: g.x_min(),
            x_max: g.x_max(),
            dx: g.dx(),
            time: state.time(),
        }
    }

    /// Bytes of payload that follow the header.
    pub fn payload_len(&self) -> u64 {
        let per = match self.kind {
            FieldKind::Real => 1,
            FieldKind::Complex => 2,
        };
        self.n_points * per * 2 * 8
    }

    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[0..4].copy_from_slice(MAGIC);
        h[4..6].copy_from_slice(&self.version.to_le_bytes());
        h[6] = match self.kind {
            FieldKind::Real => 0,
            FieldKind::Complex => 1,
        };
        h[7] = 0;
        h[8] = u8::from(self.periodic);
        h[16..24].copy_from_slice(&self.n_points.to_le_bytes());
        for (i, v) in [self.x_min, self.x_max, self.dx, self.time].iter().enumerate() {
            h[24 + 8 * i..32 + 8 * i].copy_from_slice(&v.to_le_bytes());
        }
        h
    }

    pub fn decode(h: &[u8]) -> CliResult<Self> {
        if h.len() < HEADER_LEN {
            return Err(CliError::config(format!(
                "truncated header: data ends at offset {}, header needs {HEADER_LEN} bytes",
                h.len()
            )));
        }
        if &h[0..4] != MAGIC {
            return Err(CliError::config(format!("bad magic {:?} at offset 0", &h[0..4])));
        }
        let version = u16::from_le_bytes([h[4], h[5]]);
        if version != VERSION {
            return Err(CliError::config(format!("unsupported version {version} at offset 4")));
        }
        let kind = match h[6] {
            0 => FieldKind::Real,
            1 => FieldKind::Complex,
            k => return Err(CliError::config(format!("unknown field kind {k} at offset 6"))),
        };
        if h[7] != 0 {
            return Err(CliError::config(format!("unknown payload encoding {} at offset 7", h[7])));
        }
        let f = |o: usize| f64::from_le_bytes(h[o..o + 8].try_into().unwrap());
        Ok(Self {
            version,
            kind,
            periodic: h[8] & 1 == 1,
            n_points: u64::from_le_bytes(h[16..24].try_into().unwrap()),
            x_min: f(24),
            x_max: f(32),
            dx: f(40),
            time: f(48),
        })
    }

    fn grid(&self) -> CliResult<Grid> {
        let n = usize::try_from(self.n_points)
            .map_err(|_| CliError::config("n_points at offset 16 overflows"))?;
        let g = if self.periodic {
            Grid::periodic_with_spacing(self.x_min, self.dx, n)?
        } else {
            Grid::new(self.x_min, self.x_max, n)?
        };
        if g.x_max().to_bits() != self.x_max.to_bits() || g.dx().to_bits() != self.dx.to_bits() {
            return Err(CliError::config("grid fields at offsets 24..48 are inconsistent"));
        }
        Ok(g)
    }
}

pub fn encode_dump(state: &State) -> Vec<u8> {
    let header = DumpHeader::of(state);
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_len() as usize);
    out.extend_from_slice(&header.encode());
    for s in [state.psi(), state.pi()] {
        if let Some(re) = s.as_real() {
            for v in re {
                out.extend_from_slice(&v.to_le_bytes());
            }
        } else if let Some(c) = s.as_complex() {
            for v in c {
                out.extend_from_slice(&v.re.to_le_bytes());
                out.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_dump(bytes: &[u8]) -> CliResult<State> {
    let header = DumpHeader::decode(bytes)?;
    let grid = header.grid()?;
    let need = header.payload_len();
    let have = (bytes.len() - HEADER_LEN) as u64;
    if have != need {
        return Err(CliError::config(format!(
            "payload at offset {HEADER_LEN} has {have} bytes, header implies {need}"
        )));
    }
    let mut vals = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let n = grid.n_points();
    let state = match header.kind {
        FieldKind::Real => {
            let psi: Vec<f64> = vals.by_ref().take(n).collect();
            let pi: Vec<f64> = vals.take(n).collect();
            State::real(grid, psi, pi, header.time)?
        }
        FieldKind::Complex => {
            let mut take = || -> Vec<Complex<f64>> {
                (0..n)
                    .map(|_| {
                        let re = vals.next().unwrap();
                        Complex::new(re, vals.next().unwrap())
                    })
                    .collect()
            };
            let psi = take();
            let pi = take();
            State::complex(grid, psi, pi, header.time)?
        }
    };
    Ok(state)
}

pub fn write_dump(state: &State, path: &Path) -> CliResult<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_dump(state))?;
    Ok(())
}

pub fn read_dump(path: &Path) -> CliResult<State> {
    decode_dump(&fs::read(path)?)
}

/// Reads only the first `HEADER_LEN` bytes.
pub fn read_header(path: &Path) -> CliResult<DumpHeader> {
    let mut f = fs::File::open(path)?;
    let mut h = Vec::with_capacity(HEADER_LEN);
    Read::by_ref(&mut f).take(HEADER_LEN as u64).read_to_end(&mut h)?;
    DumpHeader::decode(&h)
}
