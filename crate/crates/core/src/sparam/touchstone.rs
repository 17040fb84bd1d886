//! Touchstone version-1 two-port (`.s2p`) files.
//!
//! Written files carry the option line `# HZ S RI R <z0>` and one data line
//! per frequency: `f S11 S21 S12 S22` as real/imaginary pairs with nine
//! significant digits. The reader also accepts KHZ/MHZ/GHZ units and MA/DB
//! formats.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::{Matrix2, SParamSet};
use crate::error::{Error, Result};

pub fn touchstone_string(set: &SParamSet) -> String {
    let mut out = String::new();
    out.push_str("! two-port S-parameters, real/imaginary\n");
    writeln!(out, "# HZ S RI R {}", set.z0()).unwrap();
    for (f, m) in set.freqs().iter().zip(set.matrices()) {
        write!(out, "{f:.8e}").unwrap();
        // column order of the version-1 two-port line: S11 S21 S12 S22
        for s in [m[0][0], m[1][0], m[0][1], m[1][1]] {
            write!(out, " {:.8e} {:.8e}", s.re, s.im).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_touchstone(set: &SParamSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, touchstone_string(set)).map_err(|e| Error::io(path, e))
}

pub fn read_touchstone(path: impl AsRef<Path>) -> Result<SParamSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_touchstone(&text)
}

#[derive(Clone, Copy)]
enum Format {
    Ri,
    Ma,
    Db,
}

struct Options {
    scale: f64,
    format: Format,
    z0: f64,
}

fn parse_options(line: usize, text: &str) -> Result<Options> {
    // version-1 defaults
    let mut opts = Options {
        scale: 1e9,
        format: Format::Ma,
        z0: 50.0,
    };
    let mut tokens = text.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => opts.scale = 1.0,
            "KHZ" => opts.scale = 1e3,
            "MHZ" => opts.scale = 1e6,
            "GHZ" => opts.scale = 1e9,
            "S" => {}
            p @ ("Y" | "Z" | "H" | "G") => {
                return Err(Error::parse(line, format!("unsupported parameter type {p}")));
            }
            "RI" => opts.format = Format::Ri,
            "MA" => opts.format = Format::Ma,
            "DB" => opts.format = Format::Db,
            "R" => {
                let v = tokens
                    .next()
                    .ok_or_else(|| Error::parse(line, "option R without a value"))?;
                opts.z0 = v
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad reference impedance {v:?}")))?;
                if !(opts.z0 > 0.0) {
                    return Err(Error::parse(line, "reference impedance must be positive"));
                }
            }
            other => return Err(Error::parse(line, format!("malformed option line: unknown token {other:?}"))),
        }
    }
    Ok(opts)
}

fn pair(format: Format, x: f64, y: f64) -> Complex64 {
    match format {
        Format::Ri => Complex64::new(x, y),
        Format::Ma => Complex64::from_polar(x, y.to_radians()),
        Format::Db => Complex64::from_polar(10f64.powf(x / 20.0), y.to_radians()),
    }
}

pub fn parse_touchstone(text: &str) -> Result<SParamSet> {
    let mut opts: Option<Options> = None;
    let mut freqs = Vec::new();
    let mut mats: Vec<Matrix2> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('#') {
            if opts.is_some() {
                return Err(Error::parse(line, "duplicate option line"));
            }
            if !freqs.is_empty() {
                return Err(Error::parse(line, "option line after data"));
            }
            opts = Some(parse_options(line, rest)?);
            continue;
        }
        let o = opts.get_or_insert_with(|| Options {
            scale: 1e9,
            format: Format::Ma,
            z0: 50.0,
        });
        let values: Vec<f64> = content
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(line, format!("invalid number {t:?}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != 9 {
            return Err(Error::parse(line, format!("expected 9 columns, found {}", values.len())));
        }
        let f = values[0] * o.scale;
        if let Some(&prev) = freqs.last() {
            if !(f > prev) {
                return Err(Error::parse(line, format!("frequency {f:e} Hz not above previous {prev:e} Hz")));
            }
        }
        if f < 0.0 {
            return Err(Error::parse(line, "negative frequency"));
        }
        let s = |k: usize| pair(o.format, values[1 + 2 * k], values[2 + 2 * k]);
        freqs.push(f);
        mats.push([[s(0), s(2)], [s(1), s(3)]]);
    }
    let z0 = opts.map(|o| o.z0).unwrap_or(50.0);
    if freqs.is_empty() {
        return Err(Error::parse(text.lines().count().max(1), "no data lines"));
    }
    SParamSet::new(freqs, mats, z0)
}
