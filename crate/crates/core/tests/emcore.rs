use pixiso_core::emcore::*;
use pixiso_core::sparam::{extract_sparams, sanity_check};
use pixiso_core::{random_grid, PixelGrid};

fn stack() -> MaterialStack {
    MaterialStack::rogers_like()
}

fn small_patch(fill_seed: Option<u64>) -> PixelGrid {
    let g = match fill_seed {
        Some(seed) => random_grid(4, 4, 0.6, seed).unwrap(),
        None => PixelGrid::new(4, 4, true).unwrap(),
    };
    g.with_pitch(2e-3, 2e-3).unwrap().repair_floating()
}

/// Port, a one-cell strip and a second port on tiny cells: port 1 sees the
/// 50 ohm of port 2 through a negligible series inductance.
fn thru_scene() -> Scene {
    let d = 20e-6;
    let mut b = SceneBuilder::new([30, 30, 20], [d, d, d]).unwrap();
    b.ground();
    b.wire(Axis::X, (14, 15, 1), 1);
    b.port(14, 15, 0, 1);
    b.port(15, 15, 0, 1);
    b.build().unwrap()
}

#[test]
fn matched_thru_has_small_reflection() {
    let scene = thru_scene();
    let pulse = Pulse::default();
    let opts = RunOptions {
        energy_every: None,
        ..RunOptions::new(200_000)
    };
    let runs: Vec<TimeSeries> = [1, 2]
        .iter()
        .map(|&p| run_fdtd_with(&scene, p, &pulse, &opts).unwrap())
        .collect();
    assert!(runs.iter().all(|r| r.decayed));
    let set = extract_sparams(&runs, (3e9, 8e9), 51).unwrap();
    for m in set.matrices() {
        assert!(m[0][0].norm() <= 0.05, "|S11| = {}", m[0][0].norm());
        assert!(m[1][1].norm() <= 0.05);
        assert!(m[1][0].norm() > 0.95);
    }
    assert!(sanity_check(&set, true).passed());
}

#[test]
fn port_waveforms_survive_mirroring() {
    let (a, b) = (small_patch(Some(3)), small_patch(Some(8)));
    let scene = build_scene(&a, &b, 3e-3, &stack(), 2).unwrap();
    let mirror = scene.mirrored_x();
    let pulse = Pulse::default();
    let opts = RunOptions {
        energy_every: None,
        ..RunOptions::new(1500)
    };
    let x = run_fdtd_with(&scene, 1, &pulse, &opts).unwrap();
    let y = run_fdtd_with(&mirror, 1, &pulse, &opts).unwrap();
    assert_eq!(x.len(), y.len());
    for slot in 0..2 {
        let peak = x.v[slot].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ipeak = x.i[slot].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for n in 0..x.len() {
            assert!((x.v[slot][n] - y.v[slot][n]).abs() <= 1e-9 * peak);
            assert!((x.i[slot][n] - y.i[slot][n]).abs() <= 1e-9 * ipeak);
        }
    }
}

#[test]
fn repeat_runs_are_bit_identical() {
    let g = small_patch(None);
    let scene = build_scene(&g, &g.mirrored_x(), 2e-3, &stack(), 2).unwrap();
    let a = run_fdtd(&scene, 2, 800, &Pulse::default()).unwrap();
    let b = run_fdtd(&scene, 2, 800, &Pulse::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.v[0].len(), a.i[0].len());
    assert!(a.len() <= 800);
}

#[test]
fn touching_spacing_keeps_patches_apart() {
    let g = PixelGrid::new(8, 8, true).unwrap().with_pitch(2.7e-3, 2.3e-3).unwrap();
    let scene = build_scene(&g, &g.mirrored_x(), 0.0, &stack(), 2).unwrap();
    let text = scene.describe();
    let patches: Vec<Vec<usize>> = text
        .lines()
        .filter(|l| l.starts_with("patch "))
        .map(|l| l.split_whitespace().skip(1).map(|t| t.parse().unwrap()).collect())
        .collect();
    assert_eq!(patches.len(), 2);
    // one empty cell column between the facing edges
    assert_eq!(patches[1][1] - patches[0][2], 1);
    for (n, p) in patches.iter().enumerate() {
        assert_eq!(p[0], n + 1);
        assert_eq!(p[2] - p[1], 16);
        assert_eq!(p[4] - p[3], 16);
        assert_eq!(p[5], 3);
    }
    let [nx, ny, nz] = scene.dims();
    assert!(text.contains(&format!("dims {nx} {ny} {nz}\n")));
    let ground = nx * (ny + 1) + (nx + 1) * ny;
    // a full 16x16-cell plate has 2*16*17 edges
    let expect = ground + 2 * (2 * 16 * 17) + 2 * 2;
    assert!(text.contains(&format!("pec {expect}\n")), "{text}");
    let ports: Vec<&str> = text.lines().filter(|l| l.starts_with("port ")).collect();
    assert_eq!(ports.len(), 2);
}

#[test]
fn energy_never_grows_after_extinction() {
    let g = small_patch(None);
    let scene = build_scene(&g, &g.mirrored_x(), 2e-3, &stack(), 2).unwrap();
    assert!(scene.is_lossless());
    let run = run_fdtd(&scene, 1, 40_000, &Pulse::default()).unwrap();
    assert!(run.decayed);
    let after: Vec<&EnergySample> = run.energy.iter().filter(|e| e.step >= run.extinction_step).collect();
    assert!(after.len() > 10);
    for w in after.windows(2) {
        assert!(w[1].joules <= w[0].joules * (1.0 + 1e-6), "{:?} -> {:?}", w[0], w[1]);
    }
}

#[test]
fn far_apart_patches_are_decoupled() {
    let g = small_patch(None);
    let scene = build_scene(&g, &g.mirrored_x(), 60e-3, &stack(), 2).unwrap();
    let opts = RunOptions {
        energy_every: None,
        ..RunOptions::new(60_000)
    };
    let runs: Vec<TimeSeries> = [1, 2]
        .iter()
        .map(|&p| run_fdtd_with(&scene, p, &Pulse::default(), &opts).unwrap())
        .collect();
    let set = extract_sparams(&runs, (3e9, 8e9), 51).unwrap();
    for m in set.matrices() {
        assert!(pixiso_core::sparam::db_mag(m[1][0]) < -40.0);
    }
}
