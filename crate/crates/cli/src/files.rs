//! Run-directory artifacts: lock, atomic writes, history CSV.

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use pixiso_core::optim::HistoryRow;

use crate::error::{CliError, Result};

pub const LOCK_FILE: &str = "run.lock";
pub const HISTORY_HEADER: &str = "iter,gbest_cost,s11_db,s21_db,cache_hit_rate,bits_hex";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Refused(format!(
                "{} exists: another run is using this output directory",
                path.display()
            ))),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Write through a temporary sibling and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// `%g`-style text with six significant digits.
pub fn g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter,
            g6(r.gbest_cost),
            g6(r.s11_db),
            g6(r.s21_db),
            g6(r.cache_hit_rate),
            r.bits_hex
        )
        .unwrap();
    }
    out
}

/// One parsed `history.csv` row.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryLine {
    pub iter: usize,
    pub gbest_cost: f64,
    pub s11_db: f64,
    pub s21_db: f64,
    pub cache_hit_rate: f64,
    pub bits_hex: String,
}

pub fn parse_history(text: &str) -> Result<Vec<HistoryLine>> {
    let mut lines = text.lines();
    if lines.next() != Some(HISTORY_HEADER) {
        return Err(pixiso_core::Error::Parse {
            line: 1,
            message: format!("history header must be {HISTORY_HEADER:?}"),
        }
        .into());
    }
    lines
        .enumerate()
        .map(|(n, l)| {
            let bad = || pixiso_core::Error::Parse {
                line: n + 2,
                message: format!("malformed history row {l:?}"),
            };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(bad().into());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(HistoryLine {
                iter: f[0].parse().map_err(|_| bad())?,
                gbest_cost: num(f[1])?,
                s11_db: num(f[2])?,
                s21_db: num(f[3])?,
                cache_hit_rate: num(f[4])?,
                bits_hex: f[5].to_string(),
            })
        })
        .collect()
}
