use serde::{Deserialize, Serialize};

/// Differentiated-Gaussian source voltage, normalized to unit peak.
///
/// `v(t) = A * sqrt(2e) * -(x) * exp(-x^2)` with `x = (t - delay) / tau`.
/// The spectrum is proportional to `w * exp(-(w tau)^2 / 4)`, peaking at
/// `w = sqrt(2) / tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub amplitude: f64,
    pub tau: f64,
    pub delay: f64,
}

/// Delay in units of `tau`; the onset value is below 1e-14 of the peak.
const DELAY_TAUS: f64 = 6.0;

impl Pulse {
    /// Pulse whose spectral peak sits at `center_hz`.
    pub fn centered(center_hz: f64) -> Self {
        let tau = std::f64::consts::SQRT_2 / (2.0 * std::f64::consts::PI * center_hz);
        Self {
            amplitude: 1.0,
            tau,
            delay: DELAY_TAUS * tau,
        }
    }

    pub fn center_hz(&self) -> f64 {
        std::f64::consts::SQRT_2 / (2.0 * std::f64::consts::PI * self.tau)
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = (t - self.delay) / self.tau;
        -self.amplitude * (2.0 * std::f64::consts::E).sqrt() * x * (-x * x).exp()
    }

    /// Time after which `|v(t)| < ratio * peak` for good.
    pub fn extinction_time(&self, ratio: f64) -> f64 {
        // x exp(-x^2) sqrt(2e) is monotone decreasing for x > 1/sqrt(2)
        let g = |x: f64| (2.0 * std::f64::consts::E).sqrt() * x * (-x * x).exp();
        let (mut lo, mut hi) = (std::f64::consts::FRAC_1_SQRT_2, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.delay + hi * self.tau
    }

    /// Magnitude spectrum relative to its peak.
    pub fn relative_spectrum(&self, f: f64) -> f64 {
        let x = f / self.center_hz();
        x * (-(x * x - 1.0) / 2.0).exp()
    }

    /// Frequencies where the spectrum falls to `level_db` (negative) below
    /// its peak.
    pub fn band_edges(&self, level_db: f64) -> (f64, f64) {
        let target = 10f64.powf(level_db / 20.0);
        let fc = self.center_hz();
        let solve = |mut lo: f64, mut hi: f64, rising: bool| {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let above = self.relative_spectrum(mid) > target;
                if above == rising {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        (solve(0.0, fc, true), solve(fc, 20.0 * fc, false))
    }

    pub fn covers(&self, fmin: f64, fmax: f64) -> bool {
        let (lo, hi) = self.band_edges(-20.0);
        fmin >= lo && fmax <= hi && fmin <= fmax
    }
}

impl Default for Pulse {
    fn default() -> Self {
        Self::centered(5.5e9)
    }
}
