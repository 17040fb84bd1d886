use num_complex::Complex64;

use super::{linspace, Matrix2, SParamSet};
use crate::emcore::TimeSeries;
use crate::error::{Error, Result};

/// Runs whose trailing port energy is above this fraction of its peak are
/// too truncated for a faithful spectrum.
pub const DECAY_LIMIT: f64 = 1e-6;

/// Power waves `a`, `b` at every port of one run, per frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct PortWaves {
    pub freqs: Vec<f64>,
    /// Indexed `[freq][port slot]`.
    pub a: Vec<Vec<Complex64>>,
    pub b: Vec<Vec<Complex64>>,
}

/// DFT of the port voltages and currents, combined into
/// `a = (V + Z0 I) / (2 sqrt Z0)` and `b = (V - Z0 I) / (2 sqrt Z0)`.
pub fn port_waves(run: &TimeSeries, freqs: &[f64]) -> PortWaves {
    let np = run.port_index.len();
    let dt = run.dt;
    let mut a = Vec::with_capacity(freqs.len());
    let mut b = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let w = 2.0 * std::f64::consts::PI * f;
        let half_step = Complex64::from_polar(1.0, -w * dt * 0.5);
        let mut vf = vec![Complex64::new(0.0, 0.0); np];
        let mut if_ = vec![Complex64::new(0.0, 0.0); np];
        for n in 0..run.len() {
            // currents at (n + 1/2) dt, voltages at (n + 1) dt
            let ph_i = Complex64::from_polar(1.0, -w * (n as f64 + 0.5) * dt);
            let ph_v = ph_i * half_step;
            for p in 0..np {
                vf[p] += ph_v * run.v[p][n];
                if_[p] += ph_i * run.i[p][n];
            }
        }
        let mut ap = Vec::with_capacity(np);
        let mut bp = Vec::with_capacity(np);
        for p in 0..np {
            let z0 = run.z0[p];
            let (v, i) = (vf[p] * dt, if_[p] * dt);
            let k = 1.0 / (2.0 * z0.sqrt());
            ap.push((v + i * z0) * k);
            bp.push((v - i * z0) * k);
        }
        a.push(ap);
        b.push(bp);
    }
    PortWaves {
        freqs: freqs.to_vec(),
        a,
        b,
    }
}

fn check_run(run: &TimeSeries, band: (f64, f64)) -> Result<()> {
    if run.port_index.len() != 2 {
        return Err(Error::invalid(format!("expected a two-port run, got {} ports", run.port_index.len())));
    }
    if !run.pulse.covers(band.0, band.1) {
        let (lo, hi) = run.pulse.band_edges(-20.0);
        return Err(Error::invalid(format!(
            "band [{:e}, {:e}] Hz outside the source's -20 dB span [{lo:e}, {hi:e}]",
            band.0, band.1
        )));
    }
    if run.trailing_ratio > DECAY_LIMIT {
        return Err(Error::Accuracy(format!(
            "port {} run stopped with trailing energy ratio {:e} (limit {DECAY_LIMIT:e})",
            run.active_port, run.trailing_ratio
        )));
    }
    Ok(())
}

fn invert(m: Matrix2) -> Result<Matrix2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.norm() == 0.0 || !det.is_finite() {
        return Err(Error::Numeric("incident-wave matrix is singular".into()));
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn mul(x: Matrix2, y: Matrix2) -> Matrix2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = x[r][0] * y[0][c] + x[r][1] * y[1][c];
        }
    }
    out
}

/// `S = B A^-1`, where column `j` of `A` and `B` holds the waves of the run
/// exciting port `j`. With ideal matched terminations this reduces to
/// `S_ij = b_i / a_j`.
fn solve(waves: [&PortWaves; 2], freqs: &[f64], z0: f64) -> Result<SParamSet> {
    let mut s = Vec::with_capacity(freqs.len());
    for f in 0..freqs.len() {
        let mut a = [[Complex64::new(0.0, 0.0); 2]; 2];
        let mut b = a;
        for (col, w) in waves.iter().enumerate() {
            for row in 0..2 {
                a[row][col] = w.a[f][row];
                b[row][col] = w.b[f][row];
            }
        }
        s.push(mul(b, invert(a)?));
    }
    SParamSet::new(freqs.to_vec(), s, z0)
}

fn sweep(band: (f64, f64), nfreq: usize) -> Result<Vec<f64>> {
    if nfreq < 2 || !(band.0 > 0.0 && band.0 < band.1) {
        return Err(Error::invalid(format!("bad sweep: {band:?} with {nfreq} points")));
    }
    Ok(linspace(band.0, band.1, nfreq))
}

/// Two-port S-parameters from one run per excited port.
pub fn extract_sparams(runs: &[TimeSeries], band: (f64, f64), nfreq: usize) -> Result<SParamSet> {
    let freqs = sweep(band, nfreq)?;
    let [r1, r2] = runs else {
        return Err(Error::invalid(format!("need one run per port, got {}", runs.len())));
    };
    check_run(r1, band)?;
    check_run(r2, band)?;
    if r1.dt != r2.dt || r1.port_index != r2.port_index || r1.len() == 0 || r2.len() == 0 {
        return Err(Error::invalid("runs must share scene and time step"));
    }
    let (p1, p2) = (r1.port_index[0], r1.port_index[1]);
    let (first, second) = match (r1.active_port, r2.active_port) {
        (a, b) if a == p1 && b == p2 => (r1, r2),
        (a, b) if a == p2 && b == p1 => (r2, r1),
        _ => return Err(Error::invalid("runs must excite distinct ports")),
    };
    if first.z0[0] != first.z0[1] {
        return Err(Error::invalid("ports must share one reference impedance"));
    }
    let w1 = port_waves(first, &freqs);
    let w2 = port_waves(second, &freqs);
    solve([&w1, &w2], &freqs, first.z0[0])
}

/// S-parameters of a scene that is mirror-symmetric under a swap of its
/// two ports, from the single run exciting the first port.
pub fn extract_symmetric(run: &TimeSeries, band: (f64, f64), nfreq: usize) -> Result<SParamSet> {
    let freqs = sweep(band, nfreq)?;
    check_run(run, band)?;
    if run.active_port != run.port_index[0] {
        return Err(Error::invalid("symmetric extraction expects the first port excited"));
    }
    let w1 = port_waves(run, &freqs);
    let swap = |v: &Vec<Vec<Complex64>>| v.iter().map(|x| vec![x[1], x[0]]).collect::<Vec<_>>();
    let w2 = PortWaves {
        freqs: freqs.clone(),
        a: swap(&w1.a),
        b: swap(&w1.b),
    };
    solve([&w1, &w2], &freqs, run.z0[0])
}
