//! Closed-form rectangular patch model, standard-patch synthesis and the
//! isolation-improvement metric.

use serde::{Deserialize, Serialize};

use crate::consts::C0;
use crate::error::{Error, Result};
use crate::sparam::SParamSet;

/// Design frequency of the 5.4 GHz band.
pub const F0_DEFAULT: f64 = 5.4e9;
/// GPS L1 preset. Only dimensions are produced at this frequency.
pub const F0_GPS: f64 = 1.57e9;
/// Bisection tolerance on the resonance, in Hz.
pub const DESIGN_TOL_HZ: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchDims {
    pub w: f64,
    pub l: f64,
    /// Fringing extension at each radiating edge.
    pub delta_l: f64,
    pub eps_eff: f64,
}

fn check_stack(w: f64, eps_r: f64, h: f64) -> Result<()> {
    if !(w > 0.0 && w.is_finite()) || !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("patch width and height must be positive, got W={w}, h={h}")));
    }
    if !(eps_r >= 1.0 && eps_r.is_finite()) {
        return Err(Error::invalid(format!("relative permittivity must be at least 1, got {eps_r}")));
    }
    Ok(())
}

/// Effective permittivity and fringing extension of a microstrip of width `w`.
pub fn fringing(w: f64, eps_r: f64, h: f64) -> Result<(f64, f64)> {
    check_stack(w, eps_r, h)?;
    let eps_eff = (eps_r + 1.0) / 2.0 + (eps_r - 1.0) / 2.0 / (1.0 + 12.0 * h / w).sqrt();
    let u = w / h;
    let delta_l = 0.412 * h * (eps_eff + 0.3) * (u + 0.264) / ((eps_eff - 0.258) * (u + 0.8));
    Ok((eps_eff, delta_l))
}

/// Cavity-model resonance of the dominant mode along `l`.
pub fn hammerstad_resonance(w: f64, l: f64, eps_r: f64, h: f64) -> Result<f64> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid(format!("patch length must be positive, got {l}")));
    }
    let (eps_eff, dl) = fringing(w, eps_r, h)?;
    Ok(C0 / (2.0 * (l + 2.0 * dl) * eps_eff.sqrt()))
}

/// Width from the usual radiator rule, length by bisection so the cavity
/// model resonates at `f0`.
pub fn design_standard_patch(f0: f64, eps_r: f64, h: f64) -> Result<PatchDims> {
    if !(f0 > 0.0 && f0.is_finite()) {
        return Err(Error::invalid(format!("design frequency must be positive, got {f0}")));
    }
    let w = C0 / (2.0 * f0) * (2.0 / (eps_r + 1.0)).sqrt();
    let (eps_eff, delta_l) = fringing(w, eps_r, h)?;
    let f = |l: f64| hammerstad_resonance(w, l, eps_r, h);

    // f decreases with l; bracket between a vanishing length and a
    // free-space half wavelength
    let (mut lo, mut hi) = (1e-12 * C0 / f0, C0 / (2.0 * f0));
    if !(f(lo)? > f0 && f(hi)? < f0) {
        return Err(Error::Numeric(format!("no patch length resonates at {f0:e} Hz for this stack")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if (fm - f0).abs() <= DESIGN_TOL_HZ {
            return Ok(PatchDims {
                w,
                l: mid,
                delta_l,
                eps_eff,
            });
        }
        if fm > f0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numeric(format!("length bisection did not converge at {f0:e} Hz")))
}

/// `S21 dB` of the baseline minus that of the optimized design at `f0`.
pub fn isolation_improvement(baseline: &SParamSet, optimized: &SParamSet, f0: f64) -> Result<f64> {
    let (_, base) = baseline.match_and_isolation_db(f0)?;
    let (_, opt) = optimized.match_and_isolation_db(f0)?;
    Ok(base - opt)
}
