//! Two-port scattering parameters: extraction from port waveforms, dB and
//! resonance helpers, passivity/reciprocity checks and Touchstone I/O.

mod extract;
mod touchstone;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use extract::{extract_sparams, extract_symmetric, port_waves, PortWaves};
pub use touchstone::{parse_touchstone, read_touchstone, touchstone_string, write_touchstone};

/// Reported value for an exactly zero magnitude.
pub const DB_FLOOR: f64 = -200.0;

pub type Matrix2 = [[Complex64; 2]; 2];

/// `20 log10 |s|`, floored at [`DB_FLOOR`].
pub fn db_mag(s: Complex64) -> f64 {
    let m = s.norm();
    if m == 0.0 {
        DB_FLOOR
    } else {
        (20.0 * m.log10()).max(DB_FLOOR)
    }
}

/// Inclusive linear frequency grid.
pub fn linspace(fmin: f64, fmax: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![fmin],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    fmax
                } else {
                    fmin + (fmax - fmin) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SParamSet {
    freqs: Vec<f64>,
    s: Vec<Matrix2>,
    z0: f64,
}

impl SParamSet {
    pub fn new(freqs: Vec<f64>, s: Vec<Matrix2>, z0: f64) -> Result<Self> {
        if freqs.len() != s.len() {
            return Err(Error::invalid(format!(
                "{} frequencies but {} matrices",
                freqs.len(),
                s.len()
            )));
        }
        if freqs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("frequencies must be strictly ascending"));
        }
        if !(z0 > 0.0) {
            return Err(Error::invalid(format!("reference impedance must be positive, got {z0}")));
        }
        Ok(Self { freqs, s, z0 })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn matrices(&self) -> &[Matrix2] {
        &self.s
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// `S[row][col]` over the sweep; ports are 1-based.
    pub fn trace(&self, row: usize, col: usize) -> Vec<Complex64> {
        self.s.iter().map(|m| m[row - 1][col - 1]).collect()
    }

    /// Matrix at `f`, linearly interpolated between neighbouring samples.
    pub fn at(&self, f: f64) -> Result<Matrix2> {
        let n = self.freqs.len();
        if n == 0 || f < self.freqs[0] || f > self.freqs[n - 1] || !f.is_finite() {
            return Err(Error::invalid(format!("frequency {f} Hz outside the sweep")));
        }
        let hi = self.freqs.partition_point(|&x| x < f);
        if self.freqs[hi] == f {
            return Ok(self.s[hi]);
        }
        let lo = hi - 1;
        let t = (f - self.freqs[lo]) / (self.freqs[hi] - self.freqs[lo]);
        let mut m = self.s[lo];
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] = self.s[lo][r][c] * (1.0 - t) + self.s[hi][r][c] * t;
            }
        }
        Ok(m)
    }

    /// `(|S11| dB, |S21| dB)` at `f`.
    pub fn match_and_isolation_db(&self, f: f64) -> Result<(f64, f64)> {
        let m = self.at(f)?;
        Ok((db_mag(m[0][0]), db_mag(m[1][0])))
    }
}

/// Frequency and depth of the smallest `|S_pp|`; ties resolve to the lowest
/// frequency.
pub fn resonance_min(set: &SParamSet, port: usize) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::invalid("empty sweep"));
    }
    if !(1..=2).contains(&port) {
        return Err(Error::invalid(format!("port {port} out of range")));
    }
    let mut best = (set.freqs[0], set.s[0][port - 1][port - 1].norm());
    for (f, m) in set.freqs.iter().zip(&set.s).skip(1) {
        let mag = m[port - 1][port - 1].norm();
        if mag < best.1 {
            best = (*f, mag);
        }
    }
    Ok((best.0, db_mag(Complex64::new(best.1, 0.0))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SanityReport {
    /// Largest column power `|S1j|^2 + |S2j|^2` over the sweep.
    pub max_power: f64,
    pub max_power_freq: f64,
    /// Largest `|S21 - S12|`.
    pub max_reciprocity_error: f64,
    pub passivity_limit: f64,
    pub passivity_violation: bool,
    pub reciprocity_violation: bool,
}

impl SanityReport {
    pub fn passed(&self) -> bool {
        !self.passivity_violation && !self.reciprocity_violation
    }
}

pub const PASSIVITY_LIMIT_LOSSLESS: f64 = 1.02;
pub const PASSIVITY_LIMIT_LOSSY: f64 = 1.0 + 1e-3;
pub const RECIPROCITY_LIMIT: f64 = 0.02;

pub fn sanity_check(set: &SParamSet, lossless: bool) -> SanityReport {
    let mut max_power = 0.0f64;
    let mut max_power_freq = set.freqs.first().copied().unwrap_or(0.0);
    let mut max_recip = 0.0f64;
    for (f, m) in set.freqs.iter().zip(&set.s) {
        for col in 0..2 {
            let p = m[0][col].norm_sqr() + m[1][col].norm_sqr();
            if p > max_power {
                max_power = p;
                max_power_freq = *f;
            }
        }
        max_recip = max_recip.max((m[1][0] - m[0][1]).norm());
    }
    let limit = if lossless {
        PASSIVITY_LIMIT_LOSSLESS
    } else {
        PASSIVITY_LIMIT_LOSSY
    };
    SanityReport {
        max_power,
        max_power_freq,
        max_reciprocity_error: max_recip,
        passivity_limit: limit,
        passivity_violation: max_power > limit,
        reciprocity_violation: max_recip > RECIPROCITY_LIMIT,
    }
}
