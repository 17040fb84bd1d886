//! Leapfrog Yee updates with CPML, lumped resistive ports and PEC edges.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consts::{C0, EPS0, MU0};
use crate::emcore::cpml::AxisProfile;
use crate::emcore::pulse::Pulse;
use crate::emcore::scene::{Axis, Scene};
use crate::error::{Error, Result};

pub const CFL: f64 = 0.99;

/// Largest stable time step for the scene's cells, scaled by [`CFL`].
pub fn courant_dt(scene: &Scene) -> f64 {
    courant_dt_for(scene.cell_size())
}

pub fn courant_dt_for([dx, dy, dz]: [f64; 3]) -> f64 {
    CFL / (C0 * (1.0 / (dx * dx) + 1.0 / (dy * dy) + 1.0 / (dz * dz)).sqrt())
}

/// Snapshot of the six field components on the padded index layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Fields {
    pub e: [Vec<f64>; 3],
    pub h: [Vec<f64>; 3],
}

impl Fields {
    pub fn zeros(scene: &Scene) -> Self {
        let n = scene.field_len();
        Self {
            e: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            h: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.e.iter_mut().chain(self.h.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= s);
        }
    }

    fn all_finite(&self) -> bool {
        self.e.iter().chain(self.h.iter()).all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Ranges of padded indices inside the non-absorbing box for each E and H
/// component, as `[(i range), (j range), (k range)]`, half-open.
fn interior_ranges(scene: &Scene) -> ([[(usize, usize); 3]; 3], [[(usize, usize); 3]; 3]) {
    let [(x0, x1), (y0, y1), (z0, z1)] = scene.interior();
    let node = |a: usize, b: usize| (a, b + 1);
    let half = |a: usize, b: usize| (a, b);
    let e = [
        [half(x0, x1), node(y0, y1), node(z0, z1)],
        [node(x0, x1), half(y0, y1), node(z0, z1)],
        [node(x0, x1), node(y0, y1), half(z0, z1)],
    ];
    let h = [
        [node(x0, x1), half(y0, y1), half(z0, z1)],
        [half(x0, x1), node(y0, y1), half(z0, z1)],
        [half(x0, x1), half(y0, y1), node(z0, z1)],
    ];
    (e, h)
}

fn eps_at(scene: &Scene, axis: usize, k: usize) -> f64 {
    let a = [Axis::X, Axis::Y, Axis::Z][axis];
    EPS0 * scene.edge_eps_r(a, k)
}

fn energy_with(scene: &Scene, fields: &Fields, h_other: &[Vec<f64>; 3]) -> f64 {
    let (er, hr) = interior_ranges(scene);
    let dv = scene.d[0] * scene.d[1] * scene.d[2];
    let mut we = 0.0;
    for c in 0..3 {
        let [(i0, i1), (j0, j1), (k0, k1)] = er[c];
        let eps: Vec<f64> = (k0..k1).map(|k| eps_at(scene, c, k)).collect();
        for i in i0..i1 {
            for j in j0..j1 {
                let n = scene.idx(i, j, k0);
                let row = &fields.e[c][n..n + (k1 - k0)];
                we += row.iter().zip(&eps).map(|(v, e)| e * v * v).sum::<f64>();
            }
        }
    }
    let mut wh = 0.0;
    for c in 0..3 {
        let [(i0, i1), (j0, j1), (k0, k1)] = hr[c];
        for i in i0..i1 {
            for j in j0..j1 {
                let n = scene.idx(i, j, k0);
                let m = k1 - k0;
                wh += fields.h[c][n..n + m].iter().zip(&h_other[c][n..n + m]).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
    0.5 * (we + MU0 * wh) * dv
}

/// `1/2 sum(eps |E|^2 + mu |H|^2) dV` over the non-absorbing region, taking
/// the snapshot's E and H as simultaneous.
pub fn total_field_energy(scene: &Scene, fields: &Fields) -> f64 {
    energy_with(scene, fields, &fields.h)
}

/// Leapfrog-consistent energy `1/2 sum(eps E^n.E^n + mu H^{n-1/2}.H^{n+1/2})`,
/// which source-free, lossless interior updates conserve exactly.
pub fn leapfrog_energy(scene: &Scene, fields: &Fields, h_before: &[Vec<f64>; 3]) -> f64 {
    energy_with(scene, fields, h_before)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub max_steps: usize,
    /// Stop once trailing-window port energy drops below this fraction of
    /// its peak.
    pub decay_ratio: f64,
    /// Record the leapfrog field energy every this many steps.
    pub energy_every: Option<usize>,
}

impl RunOptions {
    pub fn new(max_steps: usize) -> Self {
        Self {
            max_steps,
            decay_ratio: 1e-8,
            energy_every: Some(50),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub step: usize,
    pub joules: f64,
}

/// Port waveforms of one excitation.
///
/// Sample `n` of `v` is taken at `(n + 1) dt`; samples of `i` and `source`
/// at `(n + 1/2) dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dt: f64,
    pub active_port: usize,
    pub pulse: Pulse,
    pub port_index: Vec<usize>,
    pub z0: Vec<f64>,
    pub rs: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub i: Vec<Vec<f64>>,
    pub source: Vec<f64>,
    /// Step after which the source stays below 1e-12 of its peak.
    pub extinction_step: usize,
    pub decayed: bool,
    /// Final trailing-window port energy over its peak.
    pub trailing_ratio: f64,
    pub energy: Vec<EnergySample>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }
}

struct PortDrive {
    slot: usize,
    /// Padded indices of the gap edges.
    edges: Vec<usize>,
    /// Middle edge, where the current loop is taken.
    mid: usize,
    polarity: f64,
    /// Multiplies the source voltage in the Ez update.
    src_coef: Vec<f64>,
}

/// Either one value for a whole run or one value per entry.
trait Coef: Copy {
    fn at(self, n: usize) -> f64;
}

impl Coef for f64 {
    #[inline(always)]
    fn at(self, _: usize) -> f64 {
        self
    }
}

impl Coef for &[f64] {
    #[inline(always)]
    fn at(self, n: usize) -> f64 {
        self[n]
    }
}

/// `psi = b psi + c (d1 - d0)`, then `field += sign coef psi`, entrywise.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn psi_run(
    field: &mut [f64],
    psi: &mut [f64],
    coef: impl Coef,
    d1: &[f64],
    d0: &[f64],
    b: impl Coef,
    c: impl Coef,
    sign: f64,
) {
    let m = field.len();
    let (psi, d1, d0) = (&mut psi[..m], &d1[..m], &d0[..m]);
    for n in 0..m {
        let p = b.at(n) * psi[n] + c.at(n) * (d1[n] - d0[n]);
        psi[n] = p;
        field[n] += sign * coef.at(n) * p;
    }
}

/// Precomputed coefficients plus mutable state for one run.
pub struct Solver<'a> {
    scene: &'a Scene,
    dt: f64,
    ca: [Vec<f64>; 3],
    cb: [Vec<f64>; 3],
    ch: f64,
    prof: [AxisProfile; 3],
    /// y-profile `b` and `c / dy` laid out like one i-slab of the lattice.
    y_node: [Vec<f64>; 2],
    y_half: [Vec<f64>; 2],
    /// z-profile `c / dz`.
    z_node: Vec<f64>,
    z_half: Vec<f64>,
    psi_e: [[Vec<f64>; 3]; 3],
    psi_h: [[Vec<f64>; 3]; 3],
    ports: Vec<PortDrive>,
    pub fields: Fields,
}

impl<'a> Solver<'a> {
    pub fn new(scene: &'a Scene) -> Self {
        let dt = courant_dt(scene);
        let len = scene.field_len();
        let [nx, ny, nz] = scene.n;
        let [dx, dy, dz] = scene.d;

        let mut ca = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        let mut cb = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        for (c, axis) in [Axis::X, Axis::Y, Axis::Z].into_iter().enumerate() {
            for i in 0..=nx {
                for j in 0..=ny {
                    for k in 0..=nz {
                        let n = scene.idx(i, j, k);
                        // edges on the outer walls, padding and PEC stay at zero
                        let inner = [(i, nx), (j, ny), (k, nz)]
                            .iter()
                            .enumerate()
                            .all(|(a, &(x, n))| if a == c { x < n } else { x >= 1 && x < n });
                        if !inner || scene.pec[c][n] {
                            continue;
                        }
                        let eps = EPS0 * scene.edge_eps_r(axis, k);
                        let loss = scene.edge_sigma(axis, k) * dt / (2.0 * eps);
                        ca[c][n] = (1.0 - loss) / (1.0 + loss);
                        cb[c][n] = (dt / eps) / (1.0 + loss);
                    }
                }
            }
        }

        let mut ports = Vec::new();
        for (slot, p) in scene.ports.iter().enumerate() {
            let n_edges = p.edges() as f64;
            let sigma_r = n_edges * dz / (p.rs * dx * dy);
            let mut edges = Vec::new();
            let mut src_coef = Vec::new();
            for k in p.k0..p.k1 {
                let n = scene.idx(p.i, p.j, k);
                let eps = EPS0 * scene.edge_eps_r(Axis::Z, k);
                let loss = (scene.edge_sigma(Axis::Z, k) + sigma_r) * dt / (2.0 * eps);
                ca[2][n] = (1.0 - loss) / (1.0 + loss);
                cb[2][n] = (dt / eps) / (1.0 + loss);
                edges.push(n);
                src_coef.push(-f64::from(p.polarity) * cb[2][n] / (p.rs * dx * dy));
            }
            ports.push(PortDrive {
                slot,
                mid: scene.idx(p.i, p.j, p.k0 + p.edges() / 2),
                edges,
                polarity: f64::from(p.polarity),
                src_coef,
            });
        }

        let b = &scene.boundary;
        let prof = [
            AxisProfile::new(nx, dx, dt, b, true, true),
            AxisProfile::new(ny, dy, dt, b, true, true),
            AxisProfile::new(nz, dz, dt, b, false, true),
        ];
        let alloc = |on: bool| if on { vec![0.0; len] } else { Vec::new() };
        // psi_e[c][a]: component c, derivative along axis a
        let psi = || {
            [
                [Vec::new(), alloc(true), alloc(true)],
                [alloc(true), Vec::new(), alloc(true)],
                [alloc(true), alloc(true), Vec::new()],
            ]
        };

        let sy = nz + 1;
        let slab = |b: &[f64], c: &[f64]| -> [Vec<f64>; 2] {
            let cell = |v: &[f64], s: f64, n: usize| v[(n / sy).min(ny)] * s;
            let len = (ny + 1) * sy;
            [(0..len).map(|n| cell(b, 1.0, n)).collect(), (0..len).map(|n| cell(c, 1.0 / dy, n)).collect()]
        };
        let y_node = slab(&prof[1].b_node, &prof[1].c_node);
        let y_half = slab(&prof[1].b_half, &prof[1].c_half);
        let z_node = prof[2].c_node.iter().map(|c| c / dz).collect();
        let z_half = prof[2].c_half.iter().map(|c| c / dz).collect();

        Self {
            scene,
            dt,
            ca,
            cb,
            ch: dt / MU0,
            prof,
            y_node,
            y_half,
            z_node,
            z_half,
            psi_e: psi(),
            psi_h: psi(),
            ports,
            fields: Fields::zeros(scene),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn update_h(&mut self) {
        let s = self.scene;
        let [nx, ny, nz] = s.n;
        let sy = nz + 1;
        let sx = (ny + 1) * sy;
        let [idx, idy, idz] = [1.0 / s.d[0], 1.0 / s.d[1], 1.0 / s.d[2]];
        let ch = self.ch;
        let [ex, ey, ez] = &self.fields.e;
        let [hx, hy, hz] = &mut self.fields.h;

        // Each i-slab is updated as one contiguous run. Padding entries
        // inside the run see only zero neighbours and so stay zero.
        hx.par_chunks_mut(sx).enumerate().for_each(|(i, hx)| {
            let (m, c) = ((ny - 1) * sy + nz, i * sx);
            let rows = hx[..m]
                .iter_mut()
                .zip(&ez[c..c + m])
                .zip(&ez[c + sy..c + sy + m])
                .zip(&ey[c..c + m])
                .zip(&ey[c + 1..c + 1 + m]);
            for ((((h, ez0), ez1), ey0), ey1) in rows {
                *h -= ch * ((ez1 - ez0) * idy - (ey1 - ey0) * idz);
            }
        });
        hy.par_chunks_mut(sx).enumerate().take(nx).for_each(|(i, hy)| {
            let (m, c) = (ny * sy + nz, i * sx);
            let rows = hy[..m]
                .iter_mut()
                .zip(&ex[c..c + m])
                .zip(&ex[c + 1..c + 1 + m])
                .zip(&ez[c..c + m])
                .zip(&ez[c + sx..c + sx + m]);
            for ((((h, ex0), ex1), ez0), ez1) in rows {
                *h -= ch * ((ex1 - ex0) * idz - (ez1 - ez0) * idx);
            }
        });
        hz.par_chunks_mut(sx).enumerate().take(nx).for_each(|(i, hz)| {
            let (m, c) = (ny * sy, i * sx);
            let rows = hz[..m]
                .iter_mut()
                .zip(&ey[c..c + m])
                .zip(&ey[c + sx..c + sx + m])
                .zip(&ex[c..c + m])
                .zip(&ex[c + sy..c + sy + m]);
            for ((((h, ey0), ey1), ex0), ex1) in rows {
                *h -= ch * ((ey1 - ey0) * idx - (ex1 - ex0) * idy);
            }
        });

        self.cpml_h();
    }

    fn update_e(&mut self) {
        let s = self.scene;
        let [nx, ny, nz] = s.n;
        let sy = nz + 1;
        let sx = (ny + 1) * sy;
        let [idx, idy, idz] = [1.0 / s.d[0], 1.0 / s.d[1], 1.0 / s.d[2]];
        let [hx, hy, hz] = &self.fields.h;
        let [ex, ey, ez] = &mut self.fields.e;
        let [cax, cay, caz] = &self.ca;
        let [cbx, cby, cbz] = &self.cb;

        // Edges outside the update set have ca = cb = 0 and stay zero.
        ex.par_chunks_mut(sx).enumerate().take(nx).for_each(|(i, ex)| {
            let (r0, r1) = (sy + 1, (ny - 1) * sy + nz);
            let (m, c) = (r1 - r0, i * sx + r0);
            let rows = ex[r0..r1]
                .iter_mut()
                .zip(&cax[c..c + m])
                .zip(&cbx[c..c + m])
                .zip(&hz[c..c + m])
                .zip(&hz[c - sy..c - sy + m])
                .zip(&hy[c..c + m])
                .zip(&hy[c - 1..c - 1 + m]);
            for ((((((e, ca), cb), hz1), hz0), hy1), hy0) in rows {
                *e = ca * *e + cb * ((hz1 - hz0) * idy - (hy1 - hy0) * idz);
            }
        });
        ey.par_chunks_mut(sx).enumerate().skip(1).take(nx - 1).for_each(|(i, ey)| {
            let (r0, r1) = (1, (ny - 1) * sy + nz);
            let (m, c) = (r1 - r0, i * sx + r0);
            let rows = ey[r0..r1]
                .iter_mut()
                .zip(&cay[c..c + m])
                .zip(&cby[c..c + m])
                .zip(&hx[c..c + m])
                .zip(&hx[c - 1..c - 1 + m])
                .zip(&hz[c..c + m])
                .zip(&hz[c - sx..c - sx + m]);
            for ((((((e, ca), cb), hx1), hx0), hz1), hz0) in rows {
                *e = ca * *e + cb * ((hx1 - hx0) * idz - (hz1 - hz0) * idx);
            }
        });
        ez.par_chunks_mut(sx).enumerate().skip(1).take(nx - 1).for_each(|(i, ez)| {
            let (r0, r1) = (sy, (ny - 1) * sy + nz);
            let (m, c) = (r1 - r0, i * sx + r0);
            let rows = ez[r0..r1]
                .iter_mut()
                .zip(&caz[c..c + m])
                .zip(&cbz[c..c + m])
                .zip(&hy[c..c + m])
                .zip(&hy[c - sx..c - sx + m])
                .zip(&hx[c..c + m])
                .zip(&hx[c - sy..c - sy + m]);
            for ((((((e, ca), cb), hy1), hy0), hx1), hx0) in rows {
                *e = ca * *e + cb * ((hy1 - hy0) * idx - (hx1 - hx0) * idy);
            }
        });

        self.cpml_e();
    }

    /// Auxiliary convolution terms for E inside the absorbing layers.
    fn cpml_e(&mut self) {
        let s = self.scene;
        let [nx, ny, nz] = s.n;
        let sy = nz + 1;
        let sx = (ny + 1) * sy;
        let idx = 1.0 / s.d[0];
        let [hx, hy, hz] = &self.fields.h;
        let [ex, ey, ez] = &mut self.fields.e;
        let [px, py, pz] = &self.prof;
        let [by, cy] = &self.y_node;
        let [cbx, cby, cbz] = &self.cb;
        let [pex, pey, pez] = &mut self.psi_e;
        let end = (ny - 1) * sy + nz;

        // x-derivatives: Ey (dHz/dx), Ez (dHy/dx)
        for &(r0, r1) in &px.ranges {
            for i in r0.max(1)..r1.min(nx) {
                let (b, cc) = (px.b_node[i], px.c_node[i] * idx);
                let o = i * sx;
                let r = o + 1..o + end;
                psi_run(&mut ey[r.clone()], &mut pey[0][r.clone()], &cby[r.clone()], &hz[r.clone()], &hz[r.start - sx..r.end - sx], b, cc, -1.0);
                let r = o + sy..o + end;
                psi_run(&mut ez[r.clone()], &mut pez[0][r.clone()], &cbz[r.clone()], &hy[r.clone()], &hy[r.start - sx..r.end - sx], b, cc, 1.0);
            }
        }
        // y-derivatives: Ex (dHz/dy), Ez (dHx/dy)
        for &(r0, r1) in &py.ranges {
            let (j0, j1) = (r0.max(1), r1.min(ny));
            let (a, z) = (j0 * sy, (j1 - 1) * sy + nz);
            for i in 0..nx {
                let o = i * sx;
                let r = o + a + 1..o + z;
                let q = a + 1..z;
                psi_run(&mut ex[r.clone()], &mut pex[1][r.clone()], &cbx[r.clone()], &hz[r.clone()], &hz[r.start - sy..r.end - sy], &by[q.clone()], &cy[q], 1.0);
                if i >= 1 {
                    let r = o + a..o + z;
                    psi_run(&mut ez[r.clone()], &mut pez[1][r.clone()], &cbz[r.clone()], &hx[r.clone()], &hx[r.start - sy..r.end - sy], &by[a..z], &cy[a..z], -1.0);
                }
            }
        }
        // z-derivatives: Ex (dHy/dz), Ey (dHx/dz)
        for &(r0, r1) in &pz.ranges {
            let (k0, k1) = (r0.max(1), r1.min(nz));
            let bz = &pz.b_node[k0..k1];
            let cz = &self.z_node[k0..k1];
            for i in 0..nx {
                for j in 0..ny {
                    let c = i * sx + j * sy + k0;
                    let r = c..c + (k1 - k0);
                    if j >= 1 {
                        psi_run(&mut ex[r.clone()], &mut pex[2][r.clone()], &cbx[r.clone()], &hy[r.clone()], &hy[r.start - 1..r.end - 1], bz, cz, -1.0);
                    }
                    if i >= 1 {
                        psi_run(&mut ey[r.clone()], &mut pey[2][r.clone()], &cby[r.clone()], &hx[r.clone()], &hx[r.start - 1..r.end - 1], bz, cz, 1.0);
                    }
                }
            }
        }
    }

    /// Auxiliary convolution terms for H inside the absorbing layers.
    fn cpml_h(&mut self) {
        let s = self.scene;
        let [nx, ny, nz] = s.n;
        let sy = nz + 1;
        let sx = (ny + 1) * sy;
        let idx = 1.0 / s.d[0];
        let ch = self.ch;
        let [ex, ey, ez] = &self.fields.e;
        let [hx, hy, hz] = &mut self.fields.h;
        let [px, py, pz] = &self.prof;
        let [by, cy] = &self.y_half;
        let [phx, phy, phz] = &mut self.psi_h;

        // x-derivatives: Hy (dEz/dx), Hz (dEy/dx)
        for &(r0, r1) in &px.ranges {
            for i in r0..r1.min(nx) {
                let (b, cc) = (px.b_half[i], px.c_half[i] * idx);
                let o = i * sx;
                let r = o..o + ny * sy + nz;
                psi_run(&mut hy[r.clone()], &mut phy[0][r.clone()], ch, &ez[r.start + sx..r.end + sx], &ez[r.clone()], b, cc, 1.0);
                let r = o..o + ny * sy;
                psi_run(&mut hz[r.clone()], &mut phz[0][r.clone()], ch, &ey[r.start + sx..r.end + sx], &ey[r.clone()], b, cc, -1.0);
            }
        }
        // y-derivatives: Hx (dEz/dy), Hz (dEx/dy)
        for &(r0, r1) in &py.ranges {
            let j1 = r1.min(ny);
            let a = r0 * sy;
            for i in 0..=nx {
                let o = i * sx;
                let z = (j1 - 1) * sy + nz;
                let r = o + a..o + z;
                psi_run(&mut hx[r.clone()], &mut phx[1][r.clone()], ch, &ez[r.start + sy..r.end + sy], &ez[r.clone()], &by[a..z], &cy[a..z], -1.0);
                if i < nx {
                    let z = j1 * sy;
                    let r = o + a..o + z;
                    psi_run(&mut hz[r.clone()], &mut phz[1][r.clone()], ch, &ex[r.start + sy..r.end + sy], &ex[r.clone()], &by[a..z], &cy[a..z], 1.0);
                }
            }
        }
        // z-derivatives: Hx (dEy/dz), Hy (dEx/dz)
        for &(r0, r1) in &pz.ranges {
            let (k0, k1) = (r0, r1.min(nz));
            let bz = &pz.b_half[k0..k1];
            let cz = &self.z_half[k0..k1];
            for i in 0..=nx {
                for j in 0..=ny {
                    let c = i * sx + j * sy + k0;
                    let r = c..c + (k1 - k0);
                    if j < ny {
                        psi_run(&mut hx[r.clone()], &mut phx[2][r.clone()], ch, &ey[r.start + 1..r.end + 1], &ey[r.clone()], bz, cz, 1.0);
                    }
                    if i < nx {
                        psi_run(&mut hy[r.clone()], &mut phy[2][r.clone()], ch, &ex[r.start + 1..r.end + 1], &ex[r.clone()], bz, cz, -1.0);
                    }
                }
            }
        }
    }

    fn drive_ports(&mut self, active_slot: usize, vs: f64) {
        let ez = &mut self.fields.e[2];
        if let Some(p) = self.ports.iter().find(|p| p.slot == active_slot) {
            for (&n, &coef) in p.edges.iter().zip(&p.src_coef) {
                ez[n] += coef * vs;
            }
        }
    }

    fn port_voltage(&self, slot: usize) -> f64 {
        let p = &self.ports[slot];
        let dz = self.scene.d[2];
        -p.polarity * p.edges.iter().map(|&n| self.fields.e[2][n]).sum::<f64>() * dz
    }

    fn port_current(&self, slot: usize) -> f64 {
        let p = &self.ports[slot];
        let s = self.scene;
        let [dx, dy, _] = s.d;
        let sy = s.n[2] + 1;
        let sx = (s.n[1] + 1) * sy;
        let c = p.mid;
        let [hx, hy, _] = &self.fields.h;
        p.polarity * ((hy[c] - hy[c - sx]) * dy - (hx[c] - hx[c - sy]) * dx)
    }

    /// Excite `active_port` with `pulse` and step until the port signals
    /// decay or `opts.max_steps` is reached.
    pub fn run(&mut self, active_port: usize, pulse: &Pulse, opts: &RunOptions) -> Result<TimeSeries> {
        let scene = self.scene;
        let active_slot = scene
            .ports
            .iter()
            .position(|p| p.index == active_port)
            .ok_or_else(|| Error::invalid(format!("no port with index {active_port}")))?;
        if opts.max_steps == 0 {
            return Err(Error::invalid("max_steps must be at least 1"));
        }
        let dt = self.dt;
        let np = scene.ports.len();
        let extinction_step = (pulse.extinction_time(1e-12) / dt).ceil() as usize;
        let window = ((2.0 * pulse.delay / dt).ceil() as usize).max(100);
        let check_every = opts.energy_every.unwrap_or(50).max(1);

        let mut ts = TimeSeries {
            dt,
            active_port,
            pulse: *pulse,
            port_index: scene.ports.iter().map(|p| p.index).collect(),
            z0: scene.ports.iter().map(|p| p.z0).collect(),
            rs: scene.ports.iter().map(|p| p.rs).collect(),
            v: vec![Vec::new(); np],
            i: vec![Vec::new(); np],
            source: Vec::new(),
            extinction_step,
            decayed: false,
            trailing_ratio: 1.0,
            energy: Vec::new(),
        };
        let mut port_energy: Vec<f64> = Vec::new();
        let mut peak = 0.0f64;
        let mut h_before: Option<[Vec<f64>; 3]> = None;

        for n in 0..opts.max_steps {
            let sample = opts.energy_every.is_some_and(|e| n % e == 0);
            if sample {
                h_before = Some(self.fields.h.clone());
            }
            self.update_h();
            if let Some(hb) = h_before.take() {
                let w = leapfrog_energy(scene, &self.fields, &hb);
                if !w.is_finite() {
                    return Err(Error::NumericalInstability { step: n });
                }
                ts.energy.push(EnergySample { step: n, joules: w });
            }
            for slot in 0..np {
                ts.i[slot].push(self.port_current(slot));
            }

            let vs = pulse.value((n as f64 + 0.5) * dt);
            ts.source.push(vs);
            self.update_e();
            self.drive_ports(active_slot, vs);

            let mut e_n = 0.0;
            for slot in 0..np {
                let v = self.port_voltage(slot);
                ts.v[slot].push(v);
                let zi = ts.z0[slot] * ts.i[slot][n];
                e_n += v * v + zi * zi;
            }
            if !e_n.is_finite() || (n % check_every == 0 && !self.fields.all_finite()) {
                return Err(Error::NumericalInstability { step: n });
            }
            port_energy.push(e_n);

            let lo = (n + 1).saturating_sub(window);
            let trailing: f64 = port_energy[lo..].iter().sum();
            peak = peak.max(trailing);
            ts.trailing_ratio = if peak > 0.0 { trailing / peak } else { 1.0 };
            if n >= extinction_step + window && ts.trailing_ratio < opts.decay_ratio {
                ts.decayed = true;
                break;
            }
        }
        Ok(ts)
    }
}

/// Run one excitation of `scene` from zero fields.
pub fn run_fdtd(scene: &Scene, active_port: usize, max_steps: usize, pulse: &Pulse) -> Result<TimeSeries> {
    Solver::new(scene).run(active_port, pulse, &RunOptions::new(max_steps))
}

pub fn run_fdtd_with(scene: &Scene, active_port: usize, pulse: &Pulse, opts: &RunOptions) -> Result<TimeSeries> {
    Solver::new(scene).run(active_port, pulse, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emcore::scene::SceneBuilder;

    #[test]
    fn courant_examples() {
        let dt = courant_dt_for([1e-3; 3]);
        assert!((dt - 0.99 / (C0 * 3f64.sqrt() * 1000.0)).abs() < 1e-27);
        let half = courant_dt_for([0.5e-3; 3]);
        assert!((half - dt / 2.0).abs() < 1e-27);
        // independent evaluation: 1/dx^2 + 1/dy^2 + 1/dz^2 = 4e6 + 1e6 + 16e6 = 21e6
        let dt = courant_dt_for([0.5e-3, 1e-3, 0.25e-3]);
        let expected = 0.99 / (299_792_458.0 * 21e6f64.sqrt());
        assert!((dt - expected).abs() / expected < 1e-14);
    }

    fn empty_box() -> Scene {
        let mut b = SceneBuilder::new([20, 20, 14], [1e-3; 3]).unwrap();
        b.ground();
        b.build().unwrap()
    }

    #[test]
    fn energy_examples() {
        let scene = empty_box();
        let mut f = Fields::zeros(&scene);
        assert_eq!(total_field_energy(&scene, &f), 0.0);

        let n = scene.idx(10, 10, 3);
        f.e[2][n] = 2.0;
        let dv = 1e-9;
        let expected = 0.5 * EPS0 * 4.0 * dv;
        assert!((total_field_energy(&scene, &f) - expected).abs() < 1e-30);

        f.h[0][scene.idx(10, 10, 2)] = 0.01;
        let w1 = total_field_energy(&scene, &f);
        f.scale(2.0);
        assert!((total_field_energy(&scene, &f) - 4.0 * w1).abs() < 1e-12 * w1);

        // cells inside the absorbing layer are excluded
        let mut g = Fields::zeros(&scene);
        g.e[2][scene.idx(2, 10, 3)] = 1.0;
        assert_eq!(total_field_energy(&scene, &g), 0.0);
    }

    #[test]
    fn rejects_missing_port_and_zero_steps() {
        let mut b = SceneBuilder::new([20, 20, 14], [1e-3; 3]).unwrap();
        b.ground();
        b.port(10, 10, 0, 2);
        let scene = b.build().unwrap();
        let p = Pulse::default();
        assert!(run_fdtd(&scene, 2, 10, &p).is_err());
        assert!(run_fdtd(&scene, 1, 0, &p).is_err());
        let ts = run_fdtd(&scene, 1, 37, &p).unwrap();
        assert_eq!(ts.v[0].len(), 37);
        assert_eq!(ts.i[0].len(), 37);
        assert!(ts.v[0].iter().all(|x| x.is_finite()));
    }

    #[test]
    fn unstable_step_is_reported() {
        let mut b = SceneBuilder::new([20, 20, 14], [1e-3; 3]).unwrap();
        b.ground();
        b.port(10, 10, 0, 2);
        let scene = b.build().unwrap();
        let mut solver = Solver::new(&scene);
        solver.dt *= 1.5;
        solver.ch = solver.dt / MU0;
        for c in 0..3 {
            for n in 0..solver.cb[c].len() {
                solver.cb[c][n] *= 1.5;
            }
        }
        let err = solver.run(1, &Pulse::default(), &RunOptions::new(20_000)).unwrap_err();
        assert!(matches!(err, Error::NumericalInstability { .. }), "{err}");
    }
}
