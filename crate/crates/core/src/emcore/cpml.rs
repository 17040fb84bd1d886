//! Convolutional PML coefficient profiles.
//!
//! Each axis carries recursive-convolution coefficients `b`, `c` at integer
//! node positions (used by E components whose derivative runs along that
//! axis) and at half-integer positions (used by H components). Outside the
//! layer `b = c = 0`, so the auxiliary fields stay zero there.

use crate::consts::{EPS0, ETA0};
use crate::emcore::scene::Boundary;

#[derive(Clone, Debug, Default)]
pub(crate) struct AxisProfile {
    pub b_node: Vec<f64>,
    pub c_node: Vec<f64>,
    pub b_half: Vec<f64>,
    pub c_half: Vec<f64>,
    /// Index ranges (in node / half-node index) touched by the layer.
    pub ranges: Vec<(usize, usize)>,
}

impl AxisProfile {
    /// `n` cells along the axis with absorbing layers on the requested sides.
    pub fn new(n: usize, d: f64, dt: f64, bnd: &Boundary, low: bool, high: bool) -> Self {
        let depth_cells = bnd.cells as f64;
        let thickness = depth_cells * d;
        let m = bnd.grading_order;
        let sigma_max = -(m + 1.0) * bnd.reflection.ln() / (2.0 * ETA0 * thickness);

        // depth into the layer, in cells, of a position `x` in cell units
        let depth = |x: f64| -> f64 {
            let lo = if low { depth_cells - x } else { f64::NEG_INFINITY };
            let hi = if high { x - (n as f64 - depth_cells) } else { f64::NEG_INFINITY };
            lo.max(hi)
        };
        let coeffs = |x: f64| -> (f64, f64) {
            let r = depth(x);
            if r < 0.0 {
                return (0.0, 0.0);
            }
            let g = r / depth_cells;
            let sigma = sigma_max * g.powf(m);
            let kappa = 1.0 + (bnd.kappa_max - 1.0) * g.powf(m);
            let alpha = bnd.alpha_max * (1.0 - g);
            let b = (-(sigma / kappa + alpha) * dt / EPS0).exp();
            let denom = sigma * kappa + kappa * kappa * alpha;
            let c = if denom > 0.0 { sigma * (b - 1.0) / denom } else { 0.0 };
            (b, c)
        };

        let mut p = AxisProfile {
            b_node: vec![0.0; n + 1],
            c_node: vec![0.0; n + 1],
            b_half: vec![0.0; n + 1],
            c_half: vec![0.0; n + 1],
            ranges: Vec::new(),
        };
        for i in 0..=n {
            (p.b_node[i], p.c_node[i]) = coeffs(i as f64);
            if i < n {
                (p.b_half[i], p.c_half[i]) = coeffs(i as f64 + 0.5);
            }
        }
        let w = bnd.cells;
        if low {
            p.ranges.push((0, w + 1));
        }
        if high {
            p.ranges.push((n - w, n + 1));
        }
        p
    }

}
