use serde::{Deserialize, Serialize};

use super::cache::Evaluation;
use super::swarm::Objective;
use crate::emcore::{build_scene_with, run_fdtd_with, LatticeSpec, MaterialStack, Pulse, RunOptions, Scene, TimeSeries};
use crate::error::{Error, Result};
use crate::grid::PixelGrid;
use crate::sparam::{extract_sparams, extract_symmetric, SParamSet};

/// Match and isolation targets at the design frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub f0: f64,
    /// Reflection target, dB.
    pub t_match: f64,
    /// Isolation target, dB.
    pub t_iso: f64,
    pub alpha: f64,
    pub beta: f64,
    pub band: (f64, f64),
    pub nfreq: usize,
}

impl Default for CostSpec {
    fn default() -> Self {
        Self {
            f0: 5.4e9,
            t_match: -10.0,
            t_iso: -40.0,
            alpha: 1.0,
            beta: 1.0,
            band: (3e9, 8e9),
            nfreq: 251,
        }
    }
}

impl CostSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_match < 0.0) {
            return Err(Error::invalid(format!("t_match must be negative, got {}", self.t_match)));
        }
        if !(self.t_iso < self.t_match) {
            return Err(Error::invalid(format!(
                "t_iso ({}) must be below t_match ({})",
                self.t_iso, self.t_match
            )));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) || self.alpha + self.beta == 0.0 {
            return Err(Error::invalid("weights must be non-negative and not both zero"));
        }
        if !(self.band.0 > 0.0 && self.band.0 < self.band.1) || self.nfreq < 2 {
            return Err(Error::invalid(format!("bad sweep {:?} x {}", self.band, self.nfreq)));
        }
        if !(self.f0 >= self.band.0 && self.f0 <= self.band.1) {
            return Err(Error::invalid(format!("f0 = {:e} Hz lies outside the sweep", self.f0)));
        }
        Ok(())
    }

    /// Hinge sum of the two shortfalls.
    pub fn cost(&self, s11_db: f64, s21_db: f64) -> f64 {
        self.alpha * (s11_db - self.t_match).max(0.0) + self.beta * (s21_db - self.t_iso).max(0.0)
    }
}

/// Two-port response of a pair of repaired patches, `b` given in placed
/// (mirrored) orientation.
pub trait Evaluator: Sync {
    fn evaluate(&self, a: &PixelGrid, b: &PixelGrid) -> Result<SParamSet>;
}

impl<F> Evaluator for F
where
    F: Fn(&PixelGrid, &PixelGrid) -> Result<SParamSet> + Sync,
{
    fn evaluate(&self, a: &PixelGrid, b: &PixelGrid) -> Result<SParamSet> {
        self(a, b)
    }
}

pub fn cost_from_sparams(set: &SParamSet, spec: &CostSpec) -> Result<Evaluation> {
    let (s11, s21) = set.match_and_isolation_db(spec.f0)?;
    Ok(Evaluation::new(spec.cost(s11, s21), s11, s21))
}

/// Repair `grid`, place it and its mirror image as the two elements and
/// score the result.
pub fn evaluate_cost(grid: &PixelGrid, spec: &CostSpec, evaluator: &dyn Evaluator) -> Result<Evaluation> {
    let a = grid.repair_floating();
    let set = evaluator
        .evaluate(&a, &a.mirrored_x())
        .map_err(|e| Error::Evaluation(e.to_string()))?;
    cost_from_sparams(&set, spec)
}

/// Field-solver pipeline: voxelize, excite, extract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdtdEvaluator {
    pub materials: MaterialStack,
    pub spacing: f64,
    pub lattice: LatticeSpec,
    pub pulse: Pulse,
    pub run: RunOptions,
    pub band: (f64, f64),
    pub nfreq: usize,
}

impl FdtdEvaluator {
    pub fn new(materials: MaterialStack, spacing: f64, lattice: LatticeSpec, spec: &CostSpec) -> Self {
        Self {
            materials,
            spacing,
            lattice,
            pulse: Pulse::default(),
            run: RunOptions {
                energy_every: None,
                ..RunOptions::new(60_000)
            },
            band: spec.band,
            nfreq: spec.nfreq,
        }
    }

    pub fn scene(&self, a: &PixelGrid, b: &PixelGrid) -> Result<Scene> {
        build_scene_with(a, b, self.spacing, &self.materials, &self.lattice)
    }

    /// One run per port, and the S-parameters extracted from both.
    pub fn simulate(&self, scene: &Scene) -> Result<(SParamSet, Vec<TimeSeries>)> {
        let runs = scene
            .ports()
            .iter()
            .map(|p| run_fdtd_with(scene, p.index, &self.pulse, &self.run))
            .collect::<Result<Vec<_>>>()?;
        let set = extract_sparams(&runs, self.band, self.nfreq)?;
        Ok((set, runs))
    }
}

impl Evaluator for FdtdEvaluator {
    /// Mirror-image pairs need only the first port's run.
    fn evaluate(&self, a: &PixelGrid, b: &PixelGrid) -> Result<SParamSet> {
        let scene = self.scene(a, b)?;
        if *b == a.mirrored_x() {
            let first = scene.ports()[0].index;
            let run = run_fdtd_with(&scene, first, &self.pulse, &self.run)?;
            extract_symmetric(&run, self.band, self.nfreq)
        } else {
            Ok(self.simulate(&scene)?.0)
        }
    }
}

/// Pixel patterns of the two elements as a search space. The feed pixel is
/// always on and is not searched. In symmetric mode both elements share one
/// pattern; otherwise the second half of the bitstring describes element B
/// in its own (unmirrored) frame.
pub struct AntennaObjective<E> {
    pub template: PixelGrid,
    pub spec: CostSpec,
    pub evaluator: E,
    pub asymmetric: bool,
}

impl<E: Evaluator> AntennaObjective<E> {
    pub fn new(template: PixelGrid, spec: CostSpec, evaluator: E, asymmetric: bool) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            template,
            spec,
            evaluator,
            asymmetric,
        })
    }

    fn per_element(&self) -> usize {
        self.template.len() - 1
    }

    fn feed_index(&self) -> usize {
        self.template.index(self.template.feed())
    }

    fn grid_from_search(&self, bits: &[bool]) -> PixelGrid {
        let feed = self.feed_index();
        let mut g = self.template.clone();
        let mut it = bits.iter();
        for n in 0..g.len() {
            let on = if n == feed { true } else { *it.next().expect("length checked") };
            g.set(crate::grid::Cell::new(n % g.nx(), n / g.nx()), on);
        }
        g.repair_floating()
    }

    fn grid_from_canonical(&self, bits: &[bool]) -> Result<PixelGrid> {
        let mut g = self.template.clone();
        for (n, &on) in bits.iter().enumerate() {
            g.set(crate::grid::Cell::new(n % g.nx(), n / g.nx()), on);
        }
        Ok(g)
    }

    /// Repaired element patterns, both in their own frame.
    pub fn decode(&self, bits: &[bool]) -> Result<(PixelGrid, PixelGrid)> {
        if bits.len() != self.n_bits() {
            return Err(Error::invalid(format!("expected {} bits, got {}", self.n_bits(), bits.len())));
        }
        let m = self.per_element();
        let a = self.grid_from_search(&bits[..m]);
        let b = if self.asymmetric {
            self.grid_from_search(&bits[m..])
        } else {
            a.clone()
        };
        Ok((a, b))
    }

    /// Element patterns from a canonical key.
    pub fn decode_canonical(&self, canonical: &[bool]) -> Result<(PixelGrid, PixelGrid)> {
        let n = self.template.len();
        let a = self.grid_from_canonical(&canonical[..n])?;
        let b = if self.asymmetric {
            self.grid_from_canonical(&canonical[n..])?
        } else {
            a.clone()
        };
        Ok((a, b))
    }
}

impl<E: Evaluator> Objective for AntennaObjective<E> {
    fn n_bits(&self) -> usize {
        self.per_element() * if self.asymmetric { 2 } else { 1 }
    }

    fn canonicalize(&self, bits: &[bool]) -> Vec<bool> {
        let (a, b) = self.decode(bits).expect("swarm passes n_bits bits");
        let mut key = a.bits().to_vec();
        if self.asymmetric {
            key.extend_from_slice(b.bits());
        }
        key
    }

    fn evaluate(&self, canonical: &[bool]) -> Result<Evaluation> {
        let (a, b) = self.decode_canonical(canonical)?;
        let set = self
            .evaluator
            .evaluate(&a, &b.mirrored_x())
            .map_err(|e| Error::Evaluation(e.to_string()))?;
        cost_from_sparams(&set, &self.spec)
    }

    fn describe(&self, canonical: &[bool]) -> String {
        let (a, b) = self
            .decode_canonical(canonical)
            .expect("canonical keys come from canonicalize");
        if self.asymmetric {
            a.bits_hex() + &b.bits_hex()
        } else {
            a.bits_hex()
        }
    }
}
