//! Acceptance run: every criterion at its stated tolerance, one line each.
//!
//! Field-solver criteria use the full 8x8, 2 cells/pixel lattice, so this
//! target takes tens of minutes on one core.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use pixiso_cli::files::{parse_history, HistoryLine};
use pixiso_cli::{optimize_with, parse_config_str, OptimizeOptions, RunConfig};
use pixiso_core::bench::{design_standard_patch, hammerstad_resonance, isolation_improvement};
use pixiso_core::emcore::{run_fdtd_with, LatticeSpec, MaterialStack, Scene, TimeSeries};
use pixiso_core::optim::{
    evaluate_cost, run, AntennaObjective, CostSpec, FdtdEvaluator, OneMax, SwarmConfig, Transfer,
};
use pixiso_core::sparam::{
    extract_sparams, parse_touchstone, resonance_min, sanity_check, touchstone_string, Matrix2, SParamSet,
};
use pixiso_core::{random_grid, Cell, Error, PixelGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const F0: f64 = 5.4e9;
const EPS_R: f64 = 2.2;
const H: f64 = 0.787e-3;
const SPACING: f64 = 2e-3;

/// Field-run budget for criterion 1.
const RUN_LIMIT_S: f64 = 600.0;
/// Desk budget for the end-to-end optimization.
const OPT_LIMIT_S: f64 = 12.0 * 3600.0;
/// Swarm used for the end-to-end optimization.
const E2E_PARTICLES: usize = 4;
const E2E_ITERS: usize = 3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// A field-solved scene shared by criteria 1 to 4.
struct Solved {
    name: &'static str,
    scene: Scene,
    runs: Vec<TimeSeries>,
    set: SParamSet,
    seconds: Vec<f64>,
}

fn evaluator() -> FdtdEvaluator {
    let mut ev = FdtdEvaluator::new(
        MaterialStack::rogers_like(),
        SPACING,
        LatticeSpec::with_resolution(2),
        &CostSpec::default(),
    );
    ev.run.energy_every = Some(50);
    ev
}

fn solve(name: &'static str, a: &PixelGrid, b_placed: &PixelGrid) -> Solved {
    let ev = evaluator();
    let scene = ev.scene(a, b_placed).unwrap();
    let mut runs = Vec::new();
    let mut seconds = Vec::new();
    for p in scene.ports().iter().map(|p| p.index).collect::<Vec<_>>() {
        let t = Instant::now();
        runs.push(run_fdtd_with(&scene, p, &ev.pulse, &ev.run).unwrap());
        seconds.push(t.elapsed().as_secs_f64());
    }
    let set = extract_sparams(&runs, ev.band, ev.nfreq).unwrap();
    Solved {
        name,
        scene,
        runs,
        set,
        seconds,
    }
}

fn standard_pair() -> (PixelGrid, f64) {
    let d = design_standard_patch(F0, EPS_R, H).unwrap();
    let g = PixelGrid::new(8, 8, true)
        .unwrap()
        .with_pitch(d.w / 8.0, d.l / 8.0)
        .unwrap();
    (g, hammerstad_resonance(d.w, d.l, EPS_R, H).unwrap())
}

fn pixelated_pair() -> (PixelGrid, PixelGrid) {
    let (ones, _) = standard_pair();
    let pick = |seed| {
        random_grid(8, 8, 0.7, seed)
            .unwrap()
            .with_pitch(ones.pitch_x(), ones.pitch_y())
            .unwrap()
            .repair_floating()
    };
    (pick(3), pick(4).mirrored_x())
}

fn criterion_1(baseline: &Solved, fr: f64) -> Outcome {
    let (f1, d1) = resonance_min(&baseline.set, 1).unwrap();
    let err = (f1 - fr) / fr;
    let slowest = baseline.seconds.iter().cloned().fold(0.0, f64::max);
    outcome(
        err.abs() <= 0.05 && slowest <= RUN_LIMIT_S,
        format!(
            "FDTD S11 minimum {:.3} GHz ({d1:.1} dB) vs cavity model {:.3} GHz: {:+.2}% (limit 5%); lattice {:?}, runs {:.0} s and {:.0} s (limit {RUN_LIMIT_S:.0} s)",
            f1 / 1e9,
            fr / 1e9,
            100.0 * err,
            baseline.scene.dims(),
            baseline.seconds[0],
            baseline.seconds[1]
        ),
    )
}

fn criterion_2(scenes: &[&Solved]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in scenes {
        let r = sanity_check(&s.set, true);
        pass &= s.scene.is_lossless() && r.max_power <= 1.02;
        parts.push(format!("{} {:.4} at {:.2} GHz", s.name, r.max_power, r.max_power_freq / 1e9));
    }
    outcome(pass, format!("max |S11|^2+|S21|^2 over 3-8 GHz: {} (limit 1.02)", parts.join(", ")))
}

fn criterion_3(scenes: &[&Solved]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in scenes {
        let r = sanity_check(&s.set, true);
        pass &= r.max_reciprocity_error <= 0.02;
        parts.push(format!("{} {:.2e}", s.name, r.max_reciprocity_error));
    }
    outcome(pass, format!("max |S21 - S12|: {} (limit 0.02)", parts.join(", ")))
}

fn criterion_4(scenes: &[&Solved]) -> Outcome {
    let mut pass = true;
    let mut worst = f64::NEG_INFINITY;
    let mut samples = 0;
    for s in scenes {
        for run in &s.runs {
            let after: Vec<_> = run.energy.iter().filter(|e| e.step >= run.extinction_step).collect();
            pass &= after.len() >= 10;
            samples += after.len();
            for w in after.windows(2) {
                let rel = (w[1].joules - w[0].joules) / w[0].joules;
                worst = worst.max(rel);
                pass &= w[1].joules <= w[0].joules * (1.0 + 1e-6);
            }
        }
    }
    outcome(
        pass,
        format!("{samples} post-extinction samples over 4 runs; largest relative rise {worst:.2e} (limit 1e-6)"),
    )
}

fn onemax_bits(transfer: Transfer, seed: u64) -> (usize, bool) {
    let cfg = SwarmConfig {
        n_particles: 30,
        n_iters: 200,
        transfer,
        seed,
        ..SwarmConfig::default()
    };
    let r = run(cfg, &OneMax { n: 64 }).unwrap();
    let monotone = r.history.windows(2).all(|w| w[1].gbest_cost <= w[0].gbest_cost);
    (64 - r.best.cost as usize, monotone)
}

fn criterion_5() -> Outcome {
    let mut monotone = true;
    let mut counts = |t: Transfer| -> Vec<usize> {
        (1..=10)
            .map(|seed| {
                let (bits, mono) = onemax_bits(t, seed);
                monotone &= mono;
                bits
            })
            .collect()
    };
    let v = counts(Transfer::VShaped);
    let s = counts(Transfer::SShaped);
    let hits = |c: &[usize]| c.iter().filter(|&&b| b >= 60).count();
    outcome(
        hits(&v) >= 9 && monotone,
        format!(
            "v_shaped bits {v:?}: {}/10 seeds reach 60 (need 9); s_shaped bits {s:?}: {}/10; gbest monotone on all 20 runs: {monotone}",
            hits(&v),
            hits(&s)
        ),
    )
}

/// Flat-spectrum evaluator for the 3x4 search.
fn stub(a: &PixelGrid, _b: &PixelGrid) -> pixiso_core::Result<SParamSet> {
    let k = a.active_count() as f64;
    let high = (0..a.len()).filter(|&n| n / a.nx() >= 2 && a.bits()[n]).count() as f64;
    let left = (0..a.ny()).filter(|&iy| a.get(Cell::new(0, iy))).count() as f64;
    let s11 = -3.0 - 1.7 * high + 0.9 * (k - 7.0).abs();
    let s21 = -22.0 - 2.3 * k + 4.1 * left;
    let m = |db: f64| Complex64::new(10f64.powf(db / 20.0), 0.0);
    let s: Matrix2 = [[m(s11), m(s21)], [m(s21), m(s11)]];
    SParamSet::new(vec![3e9, 5.4e9, 8e9], vec![s; 3], 50.0)
}

fn criterion_6() -> Outcome {
    type Stub = fn(&PixelGrid, &PixelGrid) -> pixiso_core::Result<SParamSet>;
    let spec = CostSpec::default();
    let obj = AntennaObjective::new(PixelGrid::new(3, 4, false).unwrap(), spec, stub as Stub, false).unwrap();
    let brute = (0u32..1 << 12)
        .map(|word| {
            let bits = (0..12).map(|b| word >> b & 1 == 1).collect();
            let g = PixelGrid::from_bits(3, 4, bits).unwrap();
            evaluate_cost(&g, &spec, &obj.evaluator).unwrap().cost
        })
        .fold(f64::INFINITY, f64::min);
    let found: Vec<f64> = (1..=5)
        .map(|seed| run(SwarmConfig { seed, ..SwarmConfig::default() }, &obj).unwrap().best.cost)
        .collect();
    outcome(
        found.iter().all(|&c| c == brute),
        format!("brute-force minimum over 4096 repaired grids {brute:.6}; swarm best for seeds 1-5 {found:?}"),
    )
}

fn criterion_7() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(&format!(
        "[swarm]\nn_particles = {E2E_PARTICLES}\nn_iters = {E2E_ITERS}\nseed = 1\n[output]\ndir = {}\n",
        tmp.path().display()
    ))
    .unwrap();
    let t = Instant::now();
    let out = optimize_with(&cfg, cfg.evaluator(), &OptimizeOptions::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let best = out.best.unwrap();
    let base = out.baseline.unwrap();
    let (b11, b21) = best.match_and_isolation_db(F0).unwrap();
    let (a11, a21) = base.match_and_isolation_db(F0).unwrap();
    let (best_cost, base_cost) = (cfg.cost.cost(b11, b21), cfg.cost.cost(a11, a21));
    let gain = isolation_improvement(&base, &best, F0).unwrap();
    let rows = history_of(tmp.path());
    outcome(
        b21 <= a21 && (b11 <= -10.0 || best_cost < base_cost) && secs <= OPT_LIMIT_S,
        format!(
            "{E2E_PARTICLES} particles x {E2E_ITERS} iterations, {} history rows, {:.0} s; optimized S21 {b21:.2} dB vs baseline {a21:.2} dB, \
             S11 {b11:.2} vs {a11:.2} dB, cost {best_cost:.3} vs {base_cost:.3}; isolation improvement {gain:.2} dB (published figure about 18 dB, not asserted)",
            rows.len(),
            secs
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut failures = 0;
    for seed in 0..10_000u64 {
        let nx = 1 + (seed % 12) as usize;
        let ny = 1 + (seed / 12 % 12) as usize;
        let density = (seed * 7919 % 101) as f64 / 100.0;
        let feed = Cell::new(seed as usize % nx, (seed / 7) as usize % ny);
        let g = random_grid(nx, ny, density, seed).unwrap().with_feed(feed).unwrap();
        let r = g.repair_floating();
        let mut forced = g.clone();
        forced.set(feed, true);
        let component = forced.connected_component(feed).unwrap();
        let added = (0..g.len()).any(|n| r.bits()[n] && !g.bits()[n] && n != g.index(feed));
        if r != component || r.repair_floating() != r || added || !r.is_repaired() {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("10000 random grids up to 12x12: {failures} violations of component equality, idempotence or no-addition"),
    )
}

fn history_of(dir: &Path) -> Vec<HistoryLine> {
    parse_history(&std::fs::read_to_string(dir.join("history.csv")).unwrap()).unwrap()
}

fn history_bytes(dir: &Path) -> Vec<u8> {
    std::fs::read(dir.join("history.csv")).unwrap()
}

/// Full run twice, with 1 and 3 threads, and a stop/resume splice.
fn determinism_case<E, F>(base: &str, make: F, stop: usize) -> (bool, usize)
where
    E: pixiso_core::optim::Evaluator,
    F: Fn(&RunConfig) -> E,
{
    let cfg_in = |dir: &Path, extra: &str| -> RunConfig {
        parse_config_str(&format!("{base}{extra}\n[output]\ndir = {}\n", dir.display())).unwrap()
    };
    let dirs: Vec<_> = (0..4).map(|_| tempfile::tempdir().unwrap()).collect();
    let go = |dir: &Path, threads: usize, opts: &OptimizeOptions| {
        let cfg = cfg_in(dir, &format!("threads = {threads}"));
        optimize_with(&cfg, make(&cfg), opts).unwrap();
    };
    let full = OptimizeOptions::default();
    go(dirs[0].path(), 1, &full);
    go(dirs[1].path(), 1, &full);
    go(dirs[2].path(), 3, &full);
    go(
        dirs[3].path(),
        1,
        &OptimizeOptions {
            stop_after: Some(stop),
            ..Default::default()
        },
    );
    go(
        dirs[3].path(),
        3,
        &OptimizeOptions {
            resume: Some(dirs[3].path().join("checkpoint.json")),
            ..Default::default()
        },
    );
    let reference = history_bytes(dirs[0].path());
    let same = dirs[1..].iter().all(|d| history_bytes(d.path()) == reference);
    (same, history_of(dirs[0].path()).len())
}

fn criterion_9() -> Outcome {
    type Stub = fn(&PixelGrid, &PixelGrid) -> pixiso_core::Result<SParamSet>;
    let (stub_ok, stub_rows) = determinism_case(
        "[grid]\nnx = 8\nny = 8\n[swarm]\nn_particles = 30\nn_iters = 40\nseed = 21\n",
        |_| stub as Stub,
        17,
    );
    let (fdtd_ok, fdtd_rows) = determinism_case(
        "[grid]\nnx = 2\nny = 2\n[materials]\nh = 0.003\n[solver]\nsubstrate_cells = 1\n[swarm]\nn_particles = 4\nn_iters = 4\nseed = 8\n",
        |cfg: &RunConfig| cfg.evaluator(),
        2,
    );
    outcome(
        stub_ok && fdtd_ok,
        format!(
            "history.csv byte-identical across repeat, 1 vs 3 threads and stop/resume: stub 8x8 ({stub_rows} rows) {stub_ok}, coarse field solver 2x2 ({fdtd_rows} rows) {fdtd_ok}"
        ),
    )
}

fn close9(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 5e-9 * a.abs().max(b.abs())
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut lossy = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..40);
        let mut f = rng.gen_range(1e6..1e9);
        let mut freqs = Vec::new();
        let mut mats = Vec::new();
        for _ in 0..n {
            f += rng.gen_range(1e3..1e8);
            freqs.push(f);
            let mut c = || Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            mats.push([[c(), c()], [c(), c()]]);
        }
        let set = SParamSet::new(freqs, mats, rng.gen_range(1..200) as f64).unwrap();
        let back = parse_touchstone(&touchstone_string(&set)).unwrap();
        let mut ok = back.len() == set.len() && back.z0() == set.z0();
        for (x, y) in back.freqs().iter().zip(set.freqs()) {
            ok &= close9(*x, *y);
        }
        for (m, k) in back.matrices().iter().zip(set.matrices()) {
            for r in 0..2 {
                for c in 0..2 {
                    ok &= close9(m[r][c].re, k[r][c].re) && close9(m[r][c].im, k[r][c].im);
                }
            }
        }
        lossy += usize::from(!ok);
    }

    let header = "! test\n# HZ S RI R 50\n";
    let row = "1e9 0 0 0 0 0 0 0 0\n";
    let corpus: Vec<(String, usize)> = vec![
        (format!("{header}{row}2e9 0 0 0 0 0 0 0\n"), 4),
        (format!("{header}{row}2e9 0 0 0 0 0 0 0 0 0\n"), 4),
        (format!("{header}{row}5e8 0 0 0 0 0 0 0 0\n"), 4),
        (format!("{header}{row}{row}"), 4),
        ("# HZ S XY R 50\n1e9 0 0 0 0 0 0 0 0\n".into(), 1),
        (format!("{header}# HZ S RI R 50\n{row}"), 3),
        (format!("{header}{row}# GHZ S MA R 50\n"), 4),
        (format!("{header}{row}2e9 0 0 abc 0 0 0 0 0\n"), 4),
        ("# HZ S RI R\n".into(), 1),
        ("# HZ S RI R 0\n".into(), 1),
        (format!("{header}2e9 0 inf 0 0 0 0 0 0\n"), 3),
        ("! y\n# HZ Y RI R 50\n".into(), 2),
        ("! only a comment\n".into(), 1),
        (format!("{header}-1 0 0 0 0 0 0 0 0\n"), 3),
    ];
    let rejected = corpus
        .iter()
        .filter(|(text, line)| matches!(parse_touchstone(text), Err(Error::Parse { line: l, .. }) if l == *line))
        .count();
    outcome(
        lossy == 0 && rejected == corpus.len() && corpus.len() >= 10,
        format!(
            "1000 random sets: {lossy} round trips off by more than 9 significant digits; malformed corpus {rejected}/{} rejected at the expected line",
            corpus.len()
        ),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        }
    }
}

fn main() -> ExitCode {
    let titles = [
        "solver resonance vs cavity model",
        "passivity",
        "reciprocity",
        "energy decay",
        "optimizer calibration (OneMax)",
        "exhaustive equivalence 3x4",
        "end-to-end isolation",
        "repair invariant",
        "determinism",
        "touchstone",
    ];
    let mut results: Vec<Outcome> = Vec::new();
    let report = |n: usize, o: &Outcome| {
        println!(
            "criterion {:>2} {}: {} | {}",
            n,
            if o.pass { "PASS" } else { "FAIL" },
            titles[n - 1],
            o.detail
        );
    };

    let (ones, fr) = standard_pair();
    let solved = catch_unwind(|| {
        let (a, b) = pixelated_pair();
        (solve("all-ones", &ones, &ones.mirrored_x()), solve("pixelated", &a, &b))
    });
    let field: [Box<dyn Fn(&Solved, &Solved) -> Outcome>; 4] = [
        Box::new(|b, _| criterion_1(b, fr)),
        Box::new(|b, p| criterion_2(&[b, p])),
        Box::new(|b, p| criterion_3(&[b, p])),
        Box::new(|b, p| criterion_4(&[b, p])),
    ];
    for check in &field {
        let o = match &solved {
            Ok((b, p)) => guarded(|| check(b, p)),
            Err(_) => outcome(false, "field runs panicked".into()),
        };
        report(results.len() + 1, &o);
        results.push(o);
    }
    let rest: [fn() -> Outcome; 6] = [criterion_5, criterion_6, criterion_7, criterion_8, criterion_9, criterion_10];
    for f in rest {
        let o = guarded(f);
        report(results.len() + 1, &o);
        results.push(o);
    }

    let passed = results.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
