//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [swarm]
//! n_particles = 12
//! seed = 7
//! ```
//!
//! Every key has a default. `auto` is accepted for the grid pitch (derived
//! from the standard patch at `f0`) and the feed column (`nx / 2`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pixiso_core::bench::{design_standard_patch, PatchDims};
use pixiso_core::emcore::{Boundary, LatticeSpec, MaterialStack, Pulse, RunOptions};
use pixiso_core::optim::{CostSpec, FdtdEvaluator, SwarmConfig, Transfer};
use pixiso_core::{Cell, PixelGrid};

use crate::error::{CliError, Result};

const KEYS: &[(&str, &[&str])] = &[
    ("grid", &["nx", "ny", "pitch_x", "pitch_y", "feed_x"]),
    ("materials", &["eps_r", "h", "loss_tangent"]),
    ("cost", &["f0", "t_match", "t_iso", "alpha", "beta", "f_min", "f_max", "n_freq"]),
    (
        "swarm",
        &[
            "n_particles",
            "n_iters",
            "w_start",
            "w_end",
            "c1",
            "c2",
            "v_max",
            "transfer",
            "seed",
            "asymmetric",
            "threads",
        ],
    ),
    (
        "solver",
        &[
            "spacing",
            "resolution",
            "substrate_cells",
            "air_cells",
            "air_cells_z",
            "feed_cells",
            "pml_cells",
            "max_steps",
            "decay_ratio",
            "pulse_center",
        ],
    ),
    ("output", &["dir", "checkpoint_interval"]),
];

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub pitch_x: f64,
    pub pitch_y: f64,
    pub feed_x: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Edge-to-edge element spacing, meters.
    pub spacing: f64,
    pub lattice: LatticeSpec,
    pub max_steps: usize,
    pub decay_ratio: f64,
    pub pulse_center: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub materials: MaterialStack,
    pub cost: CostSpec,
    pub swarm: SwarmConfig,
    pub asymmetric: bool,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub solver: SolverConfig,
    pub out_dir: PathBuf,
    pub checkpoint_interval: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config_str("").expect("defaults are valid")
    }
}

struct Entries {
    map: BTreeMap<(String, String), (String, usize)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut section: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Syntax {
                        line,
                        message: format!("unterminated section header {content:?}"),
                    })?
                    .trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(CliError::Syntax {
                        line,
                        message: format!("unknown section [{name}]"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| CliError::Syntax {
                line,
                message: format!("expected `key = value`, found {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = &section else {
                return Err(CliError::Syntax {
                    line,
                    message: format!("key {key:?} appears before any section header"),
                });
            };
            let known = KEYS.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !known.contains(&key) {
                return Err(CliError::Config {
                    section: sec.clone(),
                    key: key.into(),
                    line: Some(line),
                    message: "unknown key".into(),
                });
            }
            if let Some((_, first)) = map.get(&(sec.clone(), key.to_string())) {
                return Err(CliError::Config {
                    section: sec.clone(),
                    key: key.into(),
                    line: Some(line),
                    message: format!("duplicate key, first set on line {first}"),
                });
            }
            map.insert((sec.clone(), key.to_string()), (value.to_string(), line));
        }
        Ok(Self { map })
    }

    fn line(&self, section: &str, key: &str) -> Option<usize> {
        self.map.get(&(section.to_string(), key.to_string())).map(|(_, l)| *l)
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.map.get(&(section.to_string(), key.to_string())).map(|(v, _)| v.as_str())
    }

    fn error(&self, section: &str, key: &str, message: impl Into<String>) -> CliError {
        CliError::Config {
            section: section.into(),
            key: key.into(),
            line: self.line(section, key),
            message: message.into(),
        }
    }

    fn get<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| self.error(section, key, format!("cannot parse value {v:?}"))),
        }
    }

    /// `None` for `auto`.
    fn get_auto<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.raw(section, key) {
            None | Some("auto") => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| self.error(section, key, format!("cannot parse value {v:?}"))),
        }
    }

    fn check(&self, ok: bool, section: &str, key: &str, message: impl FnOnce() -> String) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.error(section, key, message()))
        }
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let e = Entries::parse(text)?;

    let materials = MaterialStack {
        eps_r: e.get("materials", "eps_r", 2.2)?,
        h: e.get("materials", "h", 0.787e-3)?,
        loss_tangent: e.get("materials", "loss_tangent", 0.0)?,
    };
    e.check(materials.eps_r >= 1.0 && materials.eps_r.is_finite(), "materials", "eps_r", || {
        format!("must be at least 1, got {}", materials.eps_r)
    })?;
    e.check(materials.h > 0.0 && materials.h.is_finite(), "materials", "h", || {
        format!("must be positive, got {}", materials.h)
    })?;
    e.check(materials.loss_tangent >= 0.0, "materials", "loss_tangent", || {
        format!("must be non-negative, got {}", materials.loss_tangent)
    })?;

    let d = CostSpec::default();
    let cost = CostSpec {
        f0: e.get("cost", "f0", d.f0)?,
        t_match: e.get("cost", "t_match", d.t_match)?,
        t_iso: e.get("cost", "t_iso", d.t_iso)?,
        alpha: e.get("cost", "alpha", d.alpha)?,
        beta: e.get("cost", "beta", d.beta)?,
        band: (e.get("cost", "f_min", d.band.0)?, e.get("cost", "f_max", d.band.1)?),
        nfreq: e.get("cost", "n_freq", d.nfreq)?,
    };
    e.check(cost.f0 > 0.0 && cost.f0.is_finite(), "cost", "f0", || format!("must be positive, got {}", cost.f0))?;
    e.check(cost.t_match < 0.0, "cost", "t_match", || format!("must be negative, got {}", cost.t_match))?;
    e.check(cost.t_iso < cost.t_match, "cost", "t_iso", || {
        format!("must lie below t_match ({}), got {}", cost.t_match, cost.t_iso)
    })?;
    e.check(cost.alpha >= 0.0, "cost", "alpha", || format!("must be non-negative, got {}", cost.alpha))?;
    e.check(cost.beta >= 0.0, "cost", "beta", || format!("must be non-negative, got {}", cost.beta))?;
    e.check(cost.alpha + cost.beta > 0.0, "cost", "beta", || "alpha and beta cannot both be zero".into())?;
    e.check(cost.band.0 > 0.0, "cost", "f_min", || format!("must be positive, got {}", cost.band.0))?;
    e.check(cost.band.1 > cost.band.0, "cost", "f_max", || {
        format!("must exceed f_min ({}), got {}", cost.band.0, cost.band.1)
    })?;
    e.check(cost.nfreq >= 2, "cost", "n_freq", || format!("must be at least 2, got {}", cost.nfreq))?;

    let ds = SwarmConfig::default();
    let transfer: Transfer = match e.raw("swarm", "transfer") {
        None => ds.transfer,
        Some(v) => v
            .parse()
            .map_err(|_| e.error("swarm", "transfer", format!("expected s_shaped or v_shaped, got {v:?}")))?,
    };
    let swarm = SwarmConfig {
        n_particles: e.get("swarm", "n_particles", ds.n_particles)?,
        n_iters: e.get("swarm", "n_iters", ds.n_iters)?,
        w_start: e.get("swarm", "w_start", ds.w_start)?,
        w_end: e.get("swarm", "w_end", ds.w_end)?,
        c1: e.get("swarm", "c1", ds.c1)?,
        c2: e.get("swarm", "c2", ds.c2)?,
        v_max: e.get("swarm", "v_max", ds.v_max)?,
        transfer,
        seed: e.get("swarm", "seed", ds.seed)?,
    };
    e.check(swarm.n_particles >= 2, "swarm", "n_particles", || {
        format!("must be at least 2, got {}", swarm.n_particles)
    })?;
    e.check(swarm.v_max > 0.0 && swarm.v_max.is_finite(), "swarm", "v_max", || {
        format!("must be positive, got {}", swarm.v_max)
    })?;
    for (key, v) in [("w_start", swarm.w_start), ("w_end", swarm.w_end), ("c1", swarm.c1), ("c2", swarm.c2)] {
        e.check(v >= 0.0 && v.is_finite(), "swarm", key, || format!("must be non-negative, got {v}"))?;
    }
    swarm.validate().map_err(|err| e.error("swarm", "n_particles", err.to_string()))?;
    let asymmetric = e.get("swarm", "asymmetric", false)?;
    let threads = e.get("swarm", "threads", 0usize)?;

    let nx: usize = e.get("grid", "nx", 8)?;
    let ny: usize = e.get("grid", "ny", 8)?;
    e.check(nx >= 1, "grid", "nx", || "must be positive".into())?;
    e.check(ny >= 1, "grid", "ny", || "must be positive".into())?;
    let pitch_x = e.get_auto::<f64>("grid", "pitch_x")?;
    let pitch_y = e.get_auto::<f64>("grid", "pitch_y")?;
    let (pitch_x, pitch_y) = match (pitch_x, pitch_y) {
        (Some(px), Some(py)) => (px, py),
        (px, py) => {
            let dims = design_standard_patch(cost.f0, materials.eps_r, materials.h)
                .map_err(|err| e.error("grid", "pitch_x", format!("cannot derive pitch: {err}")))?;
            (px.unwrap_or(dims.w / nx as f64), py.unwrap_or(dims.l / ny as f64))
        }
    };
    e.check(pitch_x > 0.0 && pitch_x.is_finite(), "grid", "pitch_x", || format!("must be positive, got {pitch_x}"))?;
    e.check(pitch_y > 0.0 && pitch_y.is_finite(), "grid", "pitch_y", || format!("must be positive, got {pitch_y}"))?;
    let feed_x = e.get_auto::<usize>("grid", "feed_x")?.unwrap_or(nx / 2);
    e.check(feed_x < nx, "grid", "feed_x", || format!("must be below nx = {nx}, got {feed_x}"))?;

    let dl = LatticeSpec::default();
    let lattice = LatticeSpec {
        resolution: e.get("solver", "resolution", dl.resolution)?,
        substrate_cells: e.get("solver", "substrate_cells", dl.substrate_cells)?,
        air_cells: e.get("solver", "air_cells", dl.air_cells)?,
        air_cells_z: e.get("solver", "air_cells_z", dl.air_cells_z)?,
        feed_cells: e.get("solver", "feed_cells", dl.feed_cells)?,
        boundary: Boundary {
            cells: e.get("solver", "pml_cells", dl.boundary.cells)?,
            ..dl.boundary
        },
        loss_reference_hz: cost.f0,
    };
    e.check(lattice.resolution >= 2, "solver", "resolution", || {
        format!("must be at least 2 cells per pixel, got {}", lattice.resolution)
    })?;
    e.check(lattice.substrate_cells >= 1, "solver", "substrate_cells", || "must be positive".into())?;
    e.check(lattice.air_cells >= 10, "solver", "air_cells", || {
        format!("must be at least 10, got {}", lattice.air_cells)
    })?;
    e.check(lattice.air_cells_z >= 10, "solver", "air_cells_z", || {
        format!("must be at least 10, got {}", lattice.air_cells_z)
    })?;
    e.check(lattice.boundary.cells >= 6, "solver", "pml_cells", || {
        format!("must be at least 6, got {}", lattice.boundary.cells)
    })?;
    let solver = SolverConfig {
        spacing: e.get("solver", "spacing", 2e-3)?,
        lattice,
        max_steps: e.get("solver", "max_steps", 60_000)?,
        decay_ratio: e.get("solver", "decay_ratio", 1e-8)?,
        pulse_center: e.get("solver", "pulse_center", 5.5e9)?,
    };
    e.check(solver.spacing >= 0.0 && solver.spacing.is_finite(), "solver", "spacing", || {
        format!("must be non-negative, got {}", solver.spacing)
    })?;
    e.check(solver.max_steps >= 1, "solver", "max_steps", || "must be positive".into())?;
    e.check(solver.decay_ratio > 0.0 && solver.decay_ratio < 1.0, "solver", "decay_ratio", || {
        format!("must lie in (0, 1), got {}", solver.decay_ratio)
    })?;
    e.check(solver.pulse_center > 0.0 && solver.pulse_center.is_finite(), "solver", "pulse_center", || {
        format!("must be positive, got {}", solver.pulse_center)
    })?;

    let out_dir = PathBuf::from(e.get("output", "dir", String::from("run"))?);
    let checkpoint_interval = e.get("output", "checkpoint_interval", 1usize)?;
    e.check(checkpoint_interval >= 1, "output", "checkpoint_interval", || "must be at least 1".into())?;

    Ok(RunConfig {
        grid: GridConfig {
            nx,
            ny,
            pitch_x,
            pitch_y,
            feed_x,
        },
        materials,
        cost,
        swarm,
        asymmetric,
        threads,
        solver,
        out_dir,
        checkpoint_interval,
    })
}

impl RunConfig {
    /// Every key with its resolved value, readable by [`parse_config_str`].
    pub fn echo(&self) -> String {
        let mut s = self.echo_physics();
        writeln!(s, "\n[output]").unwrap();
        writeln!(s, "dir = {}", self.out_dir.display()).unwrap();
        writeln!(s, "checkpoint_interval = {}", self.checkpoint_interval).unwrap();
        s
    }

    /// The echo of every setting that can change a result: no `[output]`
    /// section, and `threads` pinned to 0.
    pub fn echo_results(&self) -> String {
        RunConfig { threads: 0, ..self.clone() }.echo_physics()
    }

    /// The echo without the `[output]` section.
    pub fn echo_physics(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let c = &self.cost;
        let w = &self.swarm;
        let v = &self.solver;
        let l = &v.lattice;
        let m = &self.materials;
        let _ = write!(
            s,
            "[grid]\nnx = {}\nny = {}\npitch_x = {:?}\npitch_y = {:?}\nfeed_x = {}\n",
            g.nx, g.ny, g.pitch_x, g.pitch_y, g.feed_x
        );
        let _ = write!(
            s,
            "\n[materials]\neps_r = {:?}\nh = {:?}\nloss_tangent = {:?}\n",
            m.eps_r, m.h, m.loss_tangent
        );
        let _ = write!(
            s,
            "\n[cost]\nf0 = {:?}\nt_match = {:?}\nt_iso = {:?}\nalpha = {:?}\nbeta = {:?}\nf_min = {:?}\nf_max = {:?}\nn_freq = {}\n",
            c.f0, c.t_match, c.t_iso, c.alpha, c.beta, c.band.0, c.band.1, c.nfreq
        );
        let _ = write!(
            s,
            "\n[swarm]\nn_particles = {}\nn_iters = {}\nw_start = {:?}\nw_end = {:?}\nc1 = {:?}\nc2 = {:?}\nv_max = {:?}\ntransfer = {}\nseed = {}\nasymmetric = {}\nthreads = {}\n",
            w.n_particles, w.n_iters, w.w_start, w.w_end, w.c1, w.c2, w.v_max, w.transfer, w.seed, self.asymmetric, self.threads
        );
        let _ = write!(
            s,
            "\n[solver]\nspacing = {:?}\nresolution = {}\nsubstrate_cells = {}\nair_cells = {}\nair_cells_z = {}\nfeed_cells = {}\npml_cells = {}\nmax_steps = {}\ndecay_ratio = {:?}\npulse_center = {:?}\n",
            v.spacing,
            l.resolution,
            l.substrate_cells,
            l.air_cells,
            l.air_cells_z,
            l.feed_cells,
            l.boundary.cells,
            v.max_steps,
            v.decay_ratio,
            v.pulse_center
        );
        s
    }

    /// Empty element grid with the configured shape, pitch and feed.
    pub fn template(&self) -> Result<PixelGrid> {
        let g = &self.grid;
        Ok(PixelGrid::new(g.nx, g.ny, false)?
            .with_pitch(g.pitch_x, g.pitch_y)?
            .with_feed(Cell::new(g.feed_x, 0))?)
    }

    /// Gives a parsed mask this config's pitch and feed.
    pub fn adopt_mask(&self, mask: &PixelGrid) -> Result<PixelGrid> {
        if mask.nx() != self.grid.nx || mask.ny() != self.grid.ny {
            return Err(pixiso_core::Error::InvalidArgument(format!(
                "mask is {}x{} but the config grid is {}x{}",
                mask.nx(),
                mask.ny(),
                self.grid.nx,
                self.grid.ny
            ))
            .into());
        }
        Ok(PixelGrid::from_bits(mask.nx(), mask.ny(), mask.bits().to_vec())?
            .with_pitch(self.grid.pitch_x, self.grid.pitch_y)?
            .with_feed(Cell::new(self.grid.feed_x, 0))?)
    }

    pub fn standard_patch(&self) -> Result<PatchDims> {
        Ok(design_standard_patch(self.cost.f0, self.materials.eps_r, self.materials.h)?)
    }

    pub fn evaluator(&self) -> FdtdEvaluator {
        let mut ev = FdtdEvaluator::new(self.materials, self.solver.spacing, self.solver.lattice, &self.cost);
        ev.pulse = Pulse::centered(self.solver.pulse_center);
        ev.run = RunOptions {
            max_steps: self.solver.max_steps,
            decay_ratio: self.solver.decay_ratio,
            energy_every: None,
        };
        ev
    }

    /// Refuses field simulation when `f0` is outside the analysis band.
    pub fn require_simulable(&self) -> Result<()> {
        let (lo, hi) = self.cost.band;
        if self.cost.f0 < lo || self.cost.f0 > hi {
            return Err(CliError::Refused(format!(
                "f0 = {:.4} GHz lies outside the {:.1}-{:.1} GHz band the excitation and lattice are sized for; \
                 a faithful lattice at this frequency exceeds desk scale, so only the closed-form dimensions are produced",
                self.cost.f0 / 1e9,
                lo / 1e9,
                hi / 1e9
            )));
        }
        Ok(self.cost.validate()?)
    }
}
