use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use pixiso_core::bench::{hammerstad_resonance, isolation_improvement};
use pixiso_core::optim::{AntennaObjective, Evaluator, Swarm, CHECKPOINT_VERSION};
use pixiso_core::sparam::{read_touchstone, resonance_min, sanity_check, write_touchstone, SParamSet};
use pixiso_core::{Error, PixelGrid};
use serde::{Deserialize, Serialize};

use crate::config::{parse_config, RunConfig};
use crate::error::{CliError, Result};
use crate::files::{g6, history_csv, parse_history, read, write_atomic, RunLock};

pub const VERSION: &str = concat!("pixiso ", env!("CARGO_PKG_VERSION"));

pub const CONFIG_ECHO: &str = "config.resolved";
pub const VERSION_FILE: &str = "version.txt";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const HISTORY: &str = "history.csv";

/// Claim the output directory and record how to reproduce its contents.
fn open_run(cfg: &RunConfig) -> Result<RunLock> {
    let lock = RunLock::acquire(&cfg.out_dir)?;
    write_atomic(&cfg.out_dir.join(CONFIG_ECHO), &cfg.echo())?;
    write_atomic(
        &cfg.out_dir.join(VERSION_FILE),
        &format!("{VERSION}\nseed {}\n", cfg.swarm.seed),
    )?;
    Ok(lock)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Refused(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(f)
}

/// Text summary of one two-port result.
pub fn sparam_summary(title: &str, set: &SParamSet, cfg: &RunConfig, lossless: bool) -> Result<String> {
    let f0 = cfg.cost.f0;
    let (s11, s21) = set.match_and_isolation_db(f0)?;
    let (r1, d1) = resonance_min(set, 1)?;
    let (r2, d2) = resonance_min(set, 2)?;
    let san = sanity_check(set, lossless);
    let mut s = String::new();
    writeln!(s, "[{title}]").unwrap();
    writeln!(s, "f0_ghz = {}", g6(f0 / 1e9)).unwrap();
    writeln!(s, "s11_db_at_f0 = {}", g6(s11)).unwrap();
    writeln!(s, "s21_db_at_f0 = {}", g6(s21)).unwrap();
    writeln!(s, "cost_at_f0 = {}", g6(cfg.cost.cost(s11, s21))).unwrap();
    writeln!(s, "resonance_port1_ghz = {} ({} dB)", g6(r1 / 1e9), g6(d1)).unwrap();
    writeln!(s, "resonance_port2_ghz = {} ({} dB)", g6(r2 / 1e9), g6(d2)).unwrap();
    writeln!(s, "max_column_power = {} at {} GHz", g6(san.max_power), g6(san.max_power_freq / 1e9)).unwrap();
    writeln!(s, "max_reciprocity_error = {}", g6(san.max_reciprocity_error)).unwrap();
    writeln!(s, "sanity = {}", if san.passed() { "pass" } else { "FAIL" }).unwrap();
    Ok(s)
}

fn read_mask(cfg: &RunConfig, path: &Path) -> Result<PixelGrid> {
    let text = read(path)?;
    let mask = PixelGrid::from_p1(&text)?;
    cfg.adopt_mask(&mask)
}

/// Field simulation of a mask and its mirror image, both ports excited.
pub fn cmd_simulate(cfg: &RunConfig, mask_path: &Path) -> Result<String> {
    cfg.require_simulable()?;
    let raw = read_mask(cfg, mask_path)?;
    let a = raw.repair_floating();
    let _lock = open_run(cfg)?;
    in_pool(cfg.threads, || {
        let ev = cfg.evaluator();
        let scene = ev.scene(&a, &a.mirrored_x())?;
        let (set, runs) = ev.simulate(&scene)?;
        write_touchstone(&set, cfg.out_dir.join("simulate.s2p"))?;
        let mut report = format!("{VERSION}\nmask = {}\n", mask_path.display());
        let removed = raw.bits().iter().zip(a.bits()).filter(|(r, k)| **r && !**k).count();
        if removed > 0 {
            writeln!(report, "repair removed {removed} floating pixels").unwrap();
        }
        writeln!(report, "lattice = {:?}", scene.dims()).unwrap();
        writeln!(report, "steps = {} {}", runs[0].len(), runs[1].len()).unwrap();
        let w = a.nx() as f64 * a.pitch_x();
        let l = a.ny() as f64 * a.pitch_y();
        let fr = hammerstad_resonance(w, l, cfg.materials.eps_r, cfg.materials.h)?;
        writeln!(report, "cavity_model_resonance_ghz = {} (full {} x {} mm rectangle)", g6(fr / 1e9), g6(w * 1e3), g6(l * 1e3))
            .unwrap();
        report.push('\n');
        report += &sparam_summary("simulate", &set, cfg, scene.is_lossless())?;
        write_atomic(&cfg.out_dir.join("simulate_report.txt"), &report)?;
        Ok(report)
    })
}

/// Standard-patch dimensions, then the all-ones pair at those dimensions.
pub fn cmd_baseline(cfg: &RunConfig) -> Result<String> {
    let _lock = open_run(cfg)?;
    let d = cfg.standard_patch()?;
    let fr = hammerstad_resonance(d.w, d.l, cfg.materials.eps_r, cfg.materials.h)?;
    let (nx, ny) = (cfg.grid.nx, cfg.grid.ny);
    let mut dims = format!("{VERSION}\n[standard_patch]\n");
    writeln!(dims, "f0_hz = {:?}", cfg.cost.f0).unwrap();
    writeln!(dims, "eps_r = {:?}\nh_m = {:?}", cfg.materials.eps_r, cfg.materials.h).unwrap();
    writeln!(dims, "w_m = {:?}\nl_m = {:?}\ndelta_l_m = {:?}\neps_eff = {:?}", d.w, d.l, d.delta_l, d.eps_eff).unwrap();
    writeln!(dims, "cavity_model_resonance_hz = {fr:?}").unwrap();
    writeln!(dims, "pitch_x_m = {:?}\npitch_y_m = {:?}", d.w / nx as f64, d.l / ny as f64).unwrap();
    let dims_path = cfg.out_dir.join("baseline_dims.txt");
    write_atomic(&dims_path, &dims)?;
    match cfg.require_simulable() {
        Err(CliError::Refused(why)) => {
            return Err(CliError::Refused(format!(
                "baseline simulation refused: {why}; dimensions written to {}",
                dims_path.display()
            )))
        }
        other => other?,
    }

    in_pool(cfg.threads, || {
        let ones = PixelGrid::new(nx, ny, true)?
            .with_pitch(d.w / nx as f64, d.l / ny as f64)?
            .with_feed(pixiso_core::Cell::new(cfg.grid.feed_x, 0))?;
        let ev = cfg.evaluator();
        let scene = ev.scene(&ones, &ones.mirrored_x())?;
        let (set, _) = ev.simulate(&scene)?;
        write_touchstone(&set, cfg.out_dir.join("baseline.s2p"))?;
        let mut report = dims.clone();
        report.push('\n');
        report += &sparam_summary("baseline", &set, cfg, scene.is_lossless())?;
        write_atomic(&cfg.out_dir.join("baseline_report.txt"), &report)?;
        Ok(report)
    })
}

/// Forwards to an inner evaluator and remembers whether any call hit a
/// numerical instability.
struct Watch<E> {
    inner: E,
    unstable: AtomicBool,
}

impl<E: Evaluator> Evaluator for Watch<E> {
    fn evaluate(&self, a: &PixelGrid, b: &PixelGrid) -> pixiso_core::Result<SParamSet> {
        let out = self.inner.evaluate(a, b);
        if matches!(out, Err(Error::NumericalInstability { .. })) {
            self.unstable.store(true, Ordering::SeqCst);
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: String,
    checkpoint_format: u32,
    /// Resolved configuration without the output section.
    config: String,
    swarm: serde_json::Value,
}

#[derive(Clone, Debug, Default)]
pub struct OptimizeOptions {
    pub resume: Option<PathBuf>,
    /// Stop after this many completed iterations, leaving a checkpoint.
    pub stop_after: Option<usize>,
}

/// What [`optimize_with`] produced.
#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub report: String,
    /// False when stopped early on request.
    pub finished: bool,
    pub best: Option<SParamSet>,
    pub baseline: Option<SParamSet>,
}

fn save_progress(cfg: &RunConfig, swarm: &Swarm) -> Result<()> {
    let ck = Checkpoint {
        version: VERSION.into(),
        checkpoint_format: CHECKPOINT_VERSION,
        config: cfg.echo_results(),
        swarm: serde_json::from_str(&swarm.to_checkpoint()).expect("swarm checkpoint is JSON"),
    };
    let text = serde_json::to_string(&ck).expect("checkpoint is serializable");
    write_atomic(&cfg.out_dir.join(CHECKPOINT), &text)?;
    write_atomic(&cfg.out_dir.join(HISTORY), &history_csv(swarm.history()))
}

fn load_checkpoint(cfg: &RunConfig, path: &Path) -> Result<Swarm> {
    let text = read(path)?;
    let ck: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("{}: unreadable checkpoint: {e}", path.display())))?;
    if ck.config != cfg.echo_results() {
        return Err(CliError::Refused(format!(
            "{} was written with a different configuration; resume with the config.resolved from its run",
            path.display()
        )));
    }
    let swarm = Swarm::from_checkpoint(&ck.swarm.to_string())?;
    if *swarm.config() != cfg.swarm {
        return Err(CliError::Refused("checkpoint swarm settings differ from the config".into()));
    }
    Ok(swarm)
}

/// Optimization with the field-solver evaluator.
pub fn cmd_optimize(cfg: &RunConfig, opts: &OptimizeOptions) -> Result<OptimizeOutcome> {
    optimize_with(cfg, cfg.evaluator(), opts)
}

/// The optimize workflow over any evaluator.
pub fn optimize_with<E: Evaluator>(cfg: &RunConfig, evaluator: E, opts: &OptimizeOptions) -> Result<OptimizeOutcome> {
    cfg.require_simulable()?;
    let _lock = open_run(cfg)?;
    let watch = Watch {
        inner: evaluator,
        unstable: AtomicBool::new(false),
    };
    let obj = AntennaObjective::new(cfg.template()?, cfg.cost, watch, cfg.asymmetric)?;
    in_pool(cfg.threads, || optimize_inner(cfg, &obj, opts))
}

/// Error out if any evaluation so far went unstable. `iter` is the
/// iteration in progress.
fn check_stable<E>(obj: &AntennaObjective<Watch<E>>, iter: usize) -> Result<()> {
    if obj.evaluator.unstable.load(Ordering::SeqCst) {
        return Err(Error::Evaluation(format!(
            "field solver went unstable during iteration {iter}; run aborted, last checkpoint kept"
        ))
        .into());
    }
    Ok(())
}

fn optimize_inner<E: Evaluator>(
    cfg: &RunConfig,
    obj: &AntennaObjective<Watch<E>>,
    opts: &OptimizeOptions,
) -> Result<OptimizeOutcome> {
    let mut swarm = match &opts.resume {
        Some(path) => load_checkpoint(cfg, path)?,
        None => {
            let s = Swarm::new(cfg.swarm, obj)?;
            check_stable(obj, 0)?;
            save_progress(cfg, &s)?;
            s
        }
    };
    while !swarm.is_done() {
        if opts.stop_after.is_some_and(|k| swarm.iter() >= k) {
            save_progress(cfg, &swarm)?;
            let report = format!(
                "{VERSION}\nstopped after iteration {} of {}; resume with --resume {}\n",
                swarm.iter(),
                cfg.swarm.n_iters,
                cfg.out_dir.join(CHECKPOINT).display()
            );
            return Ok(OptimizeOutcome {
                report,
                finished: false,
                best: None,
                baseline: None,
            });
        }
        swarm.step(obj)?;
        check_stable(obj, swarm.iter())?;
        if swarm.iter() % cfg.checkpoint_interval == 0 {
            save_progress(cfg, &swarm)?;
        }
    }
    save_progress(cfg, &swarm)?;

    let result = swarm.result(obj);
    let (a, b) = obj.decode_canonical(&result.best_bits)?;
    write_atomic(&cfg.out_dir.join("best.pbm"), &a.to_p1())?;
    if cfg.asymmetric {
        write_atomic(&cfg.out_dir.join("best_b.pbm"), &b.to_p1())?;
    }
    let best = obj.evaluator.evaluate(&a, &b.mirrored_x())?;
    write_touchstone(&best, cfg.out_dir.join("best.s2p"))?;
    let ones = cfg.template()?;
    let ones = PixelGrid::from_bits(ones.nx(), ones.ny(), vec![true; ones.len()])?
        .with_pitch(ones.pitch_x(), ones.pitch_y())?
        .with_feed(ones.feed())?;
    let baseline = obj.evaluator.evaluate(&ones, &ones.mirrored_x())?;
    write_touchstone(&baseline, cfg.out_dir.join("baseline.s2p"))?;

    let mut report = format!("{VERSION}\n[optimize]\n");
    writeln!(report, "iterations = {}", swarm.iter()).unwrap();
    writeln!(report, "evaluations = {}", result.cache_misses).unwrap();
    writeln!(report, "cache_hits = {}", result.cache_hits).unwrap();
    writeln!(report, "failed_evaluations = {}", result.failures).unwrap();
    writeln!(report, "best_cost = {}", g6(result.best.cost)).unwrap();
    writeln!(report, "best_bits_hex = {}", result.best_hex).unwrap();
    writeln!(report, "best_active_pixels = {}", a.active_count()).unwrap();
    let gain = isolation_improvement(&baseline, &best, cfg.cost.f0)?;
    writeln!(report, "isolation_improvement_db = {}", g6(gain)).unwrap();
    report.push('\n');
    report += &sparam_summary("best", &best, cfg, cfg.materials.loss_tangent == 0.0)?;
    report.push('\n');
    report += &sparam_summary("baseline", &baseline, cfg, cfg.materials.loss_tangent == 0.0)?;
    write_atomic(&cfg.out_dir.join("optimize_report.txt"), &report)?;
    Ok(OptimizeOutcome {
        report,
        finished: true,
        best: Some(best),
        baseline: Some(baseline),
    })
}

/// Write a mask: all ones, all zeros, or a `bits_hex` string from a
/// history row.
pub fn cmd_export_mask(cfg: &RunConfig, pattern: &str, path: &Path) -> Result<String> {
    let (nx, ny) = (cfg.grid.nx, cfg.grid.ny);
    let grid = match pattern {
        "ones" => PixelGrid::new(nx, ny, true)?,
        "zeros" => PixelGrid::new(nx, ny, false)?,
        hex => PixelGrid::from_bits_hex(nx, ny, hex)?,
    };
    std::fs::write(path, grid.to_p1()).map_err(|e| CliError::io(path, e))?;
    Ok(format!("wrote {}x{} mask to {}\n", nx, ny, path.display()))
}

/// Summary of an existing run directory.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let cfg = parse_config(dir.join(CONFIG_ECHO))?;
    let mut out = String::new();
    if let Ok(v) = std::fs::read_to_string(dir.join(VERSION_FILE)) {
        out.push_str(&v);
    }
    let history_path = dir.join(HISTORY);
    if history_path.exists() {
        let rows = parse_history(&read(&history_path)?)?;
        let monotone = rows.windows(2).all(|w| w[1].gbest_cost <= w[0].gbest_cost);
        writeln!(out, "[history]\nrows = {}", rows.len()).unwrap();
        if let Some(last) = rows.last() {
            writeln!(out, "final_gbest_cost = {}", g6(last.gbest_cost)).unwrap();
            writeln!(out, "final_bits_hex = {}", last.bits_hex).unwrap();
            writeln!(out, "final_cache_hit_rate = {}", g6(last.cache_hit_rate)).unwrap();
        }
        writeln!(out, "gbest_non_increasing = {monotone}\n").unwrap();
    }
    let mut sets = Vec::new();
    for name in ["simulate", "baseline", "best"] {
        let p = dir.join(format!("{name}.s2p"));
        if p.exists() {
            let set = read_touchstone(&p)?;
            out += &sparam_summary(name, &set, &cfg, cfg.materials.loss_tangent == 0.0)?;
            out.push('\n');
            sets.push((name, set));
        }
    }
    let get = |n: &str| sets.iter().find(|(k, _)| *k == n).map(|(_, s)| s);
    if let (Some(base), Some(best)) = (get("baseline"), get("best")) {
        let gain = isolation_improvement(base, best, cfg.cost.f0)?;
        writeln!(out, "isolation_improvement_db = {}", g6(gain)).unwrap();
    }
    if out.is_empty() {
        return Err(CliError::Refused(format!("{} holds no run artifacts", dir.display())));
    }
    write_atomic(&dir.join("report.txt"), &out)?;
    Ok(out)
}
