//! Binary pixel grids for patch metallization.
//!
//! Bits are stored row-major: index `iy * nx + ix`, with `(0, 0)` at the
//! patch corner nearest the feed line. Electrical connectivity is the
//! 4-neighborhood; diagonal point contact does not conduct.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel coordinate within a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub ix: usize,
    pub iy: usize,
}

impl Cell {
    pub const fn new(ix: usize, iy: usize) -> Self {
        Self { ix, iy }
    }
}

const DEFAULT_PITCH: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    nx: usize,
    ny: usize,
    bits: Vec<bool>,
    pitch_x: f64,
    pitch_y: f64,
    feed: Cell,
}

impl PixelGrid {
    /// Grid with every bit set to `fill`, feed at the bottom-center cell.
    pub fn new(nx: usize, ny: usize, fill: bool) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid(format!("grid dimensions must be positive, got {nx}x{ny}")));
        }
        Ok(Self {
            nx,
            ny,
            bits: vec![fill; nx * ny],
            pitch_x: DEFAULT_PITCH,
            pitch_y: DEFAULT_PITCH,
            feed: Cell::new(nx / 2, 0),
        })
    }

    pub fn from_bits(nx: usize, ny: usize, bits: Vec<bool>) -> Result<Self> {
        let mut g = Self::new(nx, ny, false)?;
        if bits.len() != nx * ny {
            return Err(Error::invalid(format!(
                "bit vector length {} does not match {nx}x{ny}",
                bits.len()
            )));
        }
        g.bits = bits;
        Ok(g)
    }

    /// Pixel edge lengths in meters along x and y.
    pub fn with_pitch(mut self, pitch_x: f64, pitch_y: f64) -> Result<Self> {
        if !(pitch_x > 0.0 && pitch_y > 0.0 && pitch_x.is_finite() && pitch_y.is_finite()) {
            return Err(Error::invalid(format!("pitch must be positive, got ({pitch_x}, {pitch_y})")));
        }
        self.pitch_x = pitch_x;
        self.pitch_y = pitch_y;
        Ok(self)
    }

    pub fn with_feed(mut self, feed: Cell) -> Result<Self> {
        self.check_cell(feed)?;
        self.feed = feed;
        Ok(self)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn pitch_x(&self) -> f64 {
        self.pitch_x
    }

    pub fn pitch_y(&self) -> f64 {
        self.pitch_y
    }

    pub fn feed(&self) -> Cell {
        self.feed
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        c.iy * self.nx + c.ix
    }

    pub fn get(&self, c: Cell) -> bool {
        self.bits[self.index(c)]
    }

    pub fn set(&mut self, c: Cell, on: bool) {
        let i = self.index(c);
        self.bits[i] = on;
    }

    pub fn active_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn same_shape(&self, other: &PixelGrid) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }

    fn check_cell(&self, c: Cell) -> Result<()> {
        if c.ix >= self.nx || c.iy >= self.ny {
            return Err(Error::invalid(format!(
                "cell ({}, {}) outside {}x{} grid",
                c.ix, c.iy, self.nx, self.ny
            )));
        }
        Ok(())
    }

    fn neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        let Cell { ix, iy } = c;
        [
            (ix > 0).then(|| Cell::new(ix - 1, iy)),
            (ix + 1 < self.nx).then(|| Cell::new(ix + 1, iy)),
            (iy > 0).then(|| Cell::new(ix, iy - 1)),
            (iy + 1 < self.ny).then(|| Cell::new(ix, iy + 1)),
        ]
        .into_iter()
        .flatten()
    }

    /// Active cells 4-connected to `seed`. All zeros if the seed is inactive.
    pub fn connected_component(&self, seed: Cell) -> Result<PixelGrid> {
        self.check_cell(seed)?;
        let mut mask = PixelGrid {
            bits: vec![false; self.bits.len()],
            ..self.clone()
        };
        if !self.get(seed) {
            return Ok(mask);
        }
        let mut queue = VecDeque::from([seed]);
        mask.set(seed, true);
        while let Some(c) = queue.pop_front() {
            for n in self.neighbors(c) {
                if self.get(n) && !mask.get(n) {
                    mask.set(n, true);
                    queue.push_back(n);
                }
            }
        }
        Ok(mask)
    }

    /// Force the feed cell on and delete every pixel not connected to it.
    pub fn repair_floating(&self) -> PixelGrid {
        let mut forced = self.clone();
        forced.set(self.feed, true);
        forced
            .connected_component(self.feed)
            .expect("feed is validated on construction")
    }

    /// True when every active pixel is connected to an active feed cell.
    pub fn is_repaired(&self) -> bool {
        self.get(self.feed) && self.repair_floating().bits == self.bits
    }

    pub fn hamming(&self, other: &PixelGrid) -> Result<usize> {
        if !self.same_shape(other) {
            return Err(Error::invalid(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.nx, self.ny, other.nx, other.ny
            )));
        }
        Ok(self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count())
    }

    /// Left-right mirror image; the feed cell is mirrored with the pixels.
    pub fn mirrored_x(&self) -> PixelGrid {
        let mut out = self.clone();
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                out.set(Cell::new(self.nx - 1 - ix, iy), self.get(Cell::new(ix, iy)));
            }
        }
        out.feed = Cell::new(self.nx - 1 - self.feed.ix, self.feed.iy);
        out
    }

    /// Rows packed LSB-first into whole bytes, rows in ascending `iy`,
    /// hex-encoded.
    pub fn bits_hex(&self) -> String {
        let row_bytes = self.nx.div_ceil(8);
        let mut out = String::with_capacity(2 * row_bytes * self.ny);
        for row in self.bits.chunks(self.nx) {
            for chunk in row.chunks(8) {
                let byte = chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (k, &b)| acc | (u8::from(b) << k));
                write!(out, "{byte:02x}").unwrap();
            }
        }
        debug_assert_eq!(out.len(), 2 * row_bytes * self.ny);
        out
    }

    /// Inverse of [`PixelGrid::bits_hex`] for an `nx` x `ny` grid.
    pub fn from_bits_hex(nx: usize, ny: usize, hex: &str) -> Result<PixelGrid> {
        let mut grid = PixelGrid::new(nx, ny, false)?;
        let row_bytes = nx.div_ceil(8);
        let hex = hex.trim();
        if hex.len() != 2 * row_bytes * ny || !hex.is_ascii() {
            return Err(Error::invalid(format!(
                "expected {} hex digits for a {nx}x{ny} grid, got {:?}",
                2 * row_bytes * ny,
                hex
            )));
        }
        for iy in 0..ny {
            for b in 0..row_bytes {
                let at = 2 * (iy * row_bytes + b);
                let byte = u8::from_str_radix(&hex[at..at + 2], 16)
                    .map_err(|_| Error::invalid(format!("invalid hex digits {:?}", &hex[at..at + 2])))?;
                for k in 0..8 {
                    let ix = 8 * b + k;
                    let on = byte >> k & 1 == 1;
                    if ix < nx {
                        grid.set(Cell::new(ix, iy), on);
                    } else if on {
                        return Err(Error::invalid(format!("padding bit set in row {iy}")));
                    }
                }
            }
        }
        Ok(grid)
    }

    /// Portable bitmap (P1) text.
    pub fn to_p1(&self) -> String {
        let mut out = format!("P1\n{} {}\n", self.nx, self.ny);
        for row in self.bits.chunks(self.nx) {
            let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parse P1 text written by [`PixelGrid::to_p1`]. Pitch and feed take
    /// their defaults.
    pub fn from_p1(text: &str) -> Result<PixelGrid> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, "P1")) => {}
            Some((n, other)) => return Err(Error::parse(n, format!("expected header \"P1\", found {other:?}"))),
            None => return Err(Error::parse(1, "empty mask file")),
        }
        let (n, dims) = lines.next().ok_or_else(|| Error::parse(2, "missing dimensions line"))?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(n, format!("bad dimensions: {e}")))?;
        let [nx, ny] = dims[..] else {
            return Err(Error::parse(n, "dimensions line must hold exactly \"nx ny\""));
        };
        let mut grid = PixelGrid::new(nx, ny, false).map_err(|e| Error::parse(n, e.to_string()))?;
        for iy in 0..ny {
            let (n, row) = lines
                .next()
                .ok_or_else(|| Error::parse(n + iy + 1, format!("missing row {iy}")))?;
            let digits: Vec<&str> = row.split_whitespace().collect();
            if digits.len() != nx {
                return Err(Error::parse(n, format!("expected {nx} digits, found {}", digits.len())));
            }
            for (ix, d) in digits.into_iter().enumerate() {
                let on = match d {
                    "0" => false,
                    "1" => true,
                    other => return Err(Error::parse(n, format!("invalid pixel value {other:?}"))),
                };
                grid.set(Cell::new(ix, iy), on);
            }
        }
        if let Some((n, extra)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(Error::parse(n, format!("unexpected trailing content {extra:?}")));
        }
        Ok(grid)
    }
}

/// Each bit independently on with probability `density`, deterministic in
/// `seed`.
pub fn random_grid(nx: usize, ny: usize, density: f64, seed: u64) -> Result<PixelGrid> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::invalid(format!("density {density} outside [0, 1]")));
    }
    let mut grid = PixelGrid::new(nx, ny, false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for b in grid.bits.iter_mut() {
        *b = rng.gen::<f64>() < density;
    }
    Ok(grid)
}
