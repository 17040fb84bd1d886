//! WebAssembly bindings for the demo page in `www/`.
//!
//! Masks cross the boundary as one byte per pixel, row-major, `iy = 0`
//! first (the feed row).

use pixiso_core::bench::{design_standard_patch, hammerstad_resonance};
use pixiso_core::optim::{OneMax, Swarm, SwarmConfig, Transfer};
use pixiso_core::{Cell, PixelGrid};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn grid(nx: usize, ny: usize, bits: &[u8], feed_x: usize) -> Result<PixelGrid, JsError> {
    let bits = bits.iter().map(|&b| b != 0).collect();
    PixelGrid::from_bits(nx, ny, bits)
        .and_then(|g| g.with_feed(Cell::new(feed_x, 0)))
        .map_err(err)
}

/// Mask with every pixel not connected to the feed removed; the feed is
/// switched on.
#[wasm_bindgen]
pub fn repair_mask(nx: usize, ny: usize, bits: &[u8], feed_x: usize) -> Result<Vec<u8>, JsError> {
    let g = grid(nx, ny, bits, feed_x)?.repair_floating();
    Ok(g.bits().iter().map(|&b| u8::from(b)).collect())
}

/// Row-packed hex form of a mask, as written to `history.csv`.
#[wasm_bindgen]
pub fn mask_hex(nx: usize, ny: usize, bits: &[u8], feed_x: usize) -> Result<String, JsError> {
    Ok(grid(nx, ny, bits, feed_x)?.bits_hex())
}

/// P1 bitmap text of a mask.
#[wasm_bindgen]
pub fn mask_p1(nx: usize, ny: usize, bits: &[u8], feed_x: usize) -> Result<String, JsError> {
    Ok(grid(nx, ny, bits, feed_x)?.to_p1())
}

/// `[W mm, L mm, fringing extension mm, eps_eff, check resonance GHz]` of the
/// standard patch for `f0` on a substrate of `eps_r` and `h_mm`.
#[wasm_bindgen]
pub fn standard_patch(f0_ghz: f64, eps_r: f64, h_mm: f64) -> Result<Vec<f64>, JsError> {
    let h = h_mm * 1e-3;
    let d = design_standard_patch(f0_ghz * 1e9, eps_r, h).map_err(err)?;
    let fr = hammerstad_resonance(d.w, d.l, eps_r, h).map_err(err)?;
    Ok(vec![d.w * 1e3, d.l * 1e3, d.delta_l * 1e3, d.eps_eff, fr / 1e9])
}

/// Cavity-model resonance in GHz of a `w_mm` by `l_mm` patch.
#[wasm_bindgen]
pub fn patch_resonance(w_mm: f64, l_mm: f64, eps_r: f64, h_mm: f64) -> Result<f64, JsError> {
    hammerstad_resonance(w_mm * 1e-3, l_mm * 1e-3, eps_r, h_mm * 1e-3)
        .map(|f| f / 1e9)
        .map_err(err)
}

/// Binary swarm on the OneMax toy objective, advanced one iteration at a
/// time from the page.
#[wasm_bindgen]
pub struct OneMaxDemo {
    swarm: Swarm,
    objective: OneMax,
}

#[wasm_bindgen]
impl OneMaxDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(n_bits: usize, n_particles: usize, n_iters: usize, seed: u32, v_shaped: bool) -> Result<OneMaxDemo, JsError> {
        let config = SwarmConfig {
            n_particles,
            n_iters,
            seed: u64::from(seed),
            transfer: if v_shaped { Transfer::VShaped } else { Transfer::SShaped },
            ..SwarmConfig::default()
        };
        let objective = OneMax { n: n_bits };
        let swarm = Swarm::new(config, &objective).map_err(err)?;
        Ok(OneMaxDemo { swarm, objective })
    }

    /// Advance one iteration; false once the budget is spent.
    pub fn step(&mut self) -> Result<bool, JsError> {
        if self.swarm.is_done() {
            return Ok(false);
        }
        self.swarm.step(&self.objective).map_err(err)?;
        Ok(true)
    }

    pub fn iteration(&self) -> usize {
        self.swarm.iter()
    }

    /// Correct bits in the best string so far.
    pub fn best_score(&self) -> usize {
        self.objective.n - self.swarm.gbest().cost as usize
    }

    pub fn best_bits(&self) -> Vec<u8> {
        self.swarm.gbest_canonical().iter().map(|&b| u8::from(b)).collect()
    }

    /// Best score after each completed iteration.
    pub fn score_history(&self) -> Vec<u32> {
        self.swarm
            .history()
            .iter()
            .map(|h| (self.objective.n as f64 - h.gbest_cost) as u32)
            .collect()
    }

    pub fn cache_hit_rate(&self) -> f64 {
        self.swarm.cache().hit_rate()
    }
}
