use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::consts::EPS0;
use crate::error::{Error, Result};
use crate::grid::PixelGrid;

/// Grounded dielectric substrate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialStack {
    pub eps_r: f64,
    /// Thickness in meters.
    pub h: f64,
    pub loss_tangent: f64,
}

impl MaterialStack {
    pub fn new(eps_r: f64, h: f64, loss_tangent: f64) -> Result<Self> {
        let m = Self { eps_r, h, loss_tangent };
        m.validate()?;
        Ok(m)
    }

    /// PTFE-glass laminate, 0.787 mm.
    pub fn rogers_like() -> Self {
        Self {
            eps_r: 2.2,
            h: 0.787e-3,
            loss_tangent: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_r >= 1.0) || !(self.h > 0.0) || !(self.loss_tangent >= 0.0) {
            return Err(Error::invalid(format!(
                "non-physical material stack: eps_r={}, h={}, loss_tangent={}",
                self.eps_r, self.h, self.loss_tangent
            )));
        }
        Ok(())
    }
}

impl Default for MaterialStack {
    fn default() -> Self {
        Self::rogers_like()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Convolutional PML on the four lateral faces and the top face. The bottom
/// face is the ground plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub cells: usize,
    pub grading_order: f64,
    pub reflection: f64,
    pub kappa_max: f64,
    pub alpha_max: f64,
}

pub const MIN_PML_CELLS: usize = 6;

impl Default for Boundary {
    fn default() -> Self {
        Self {
            cells: 8,
            grading_order: 3.0,
            reflection: 1e-6,
            kappa_max: 1.0,
            alpha_max: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Substrate {
    /// Layers `0..cells` in z are filled.
    pub cells: usize,
    pub eps_r: f64,
    /// Conductivity in S/m.
    pub sigma: f64,
}

/// Lumped resistive port across a vertical column of Ez edges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Port {
    /// 1-based.
    pub index: usize,
    pub i: usize,
    pub j: usize,
    /// Edges `k0..k1` in z.
    pub k0: usize,
    pub k1: usize,
    pub z0: f64,
    pub rs: f64,
    /// +1 when the positive terminal is the upper conductor.
    pub polarity: i8,
}

impl Port {
    pub fn edges(&self) -> usize {
        self.k1 - self.k0
    }
}

/// Node-index extent of a placed patch, inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
    pub k: usize,
}

/// Discretization and padding used to turn pixel grids into a lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Lattice cells per pixel edge.
    pub resolution: usize,
    pub substrate_cells: usize,
    /// Air margin between the metal and the absorbing layer, x and y.
    pub air_cells: usize,
    /// Air margin above the substrate.
    pub air_cells_z: usize,
    /// Length of the feed strip between the port and the patch edge.
    pub feed_cells: usize,
    pub boundary: Boundary,
    /// Frequency at which the loss tangent is converted to a conductivity.
    pub loss_reference_hz: f64,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self {
            resolution: 2,
            substrate_cells: 3,
            air_cells: 10,
            air_cells_z: 20,
            feed_cells: 2,
            boundary: Boundary::default(),
            loss_reference_hz: 5.4e9,
        }
    }
}

impl LatticeSpec {
    pub fn with_resolution(resolution: usize) -> Self {
        Self {
            resolution,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::invalid(format!("resolution must be >= 2 cells per pixel, got {}", self.resolution)));
        }
        if self.substrate_cells < 1 {
            return Err(Error::invalid("substrate needs at least one cell"));
        }
        if self.air_cells < 10 || self.air_cells_z < 10 {
            return Err(Error::invalid("air margin must be at least 10 cells"));
        }
        if self.boundary.cells < MIN_PML_CELLS {
            return Err(Error::invalid(format!(
                "absorbing layer must be at least {MIN_PML_CELLS} cells, got {}",
                self.boundary.cells
            )));
        }
        Ok(())
    }
}

/// Voxelized two-port problem on a uniform Yee lattice.
///
/// Field index layout is `(i * (ny + 1) + j) * (nz + 1) + k` for every
/// component, `k` fastest. `n` counts cells; node indices run `0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub(crate) n: [usize; 3],
    pub(crate) d: [f64; 3],
    pub(crate) boundary: Boundary,
    pub(crate) substrate: Substrate,
    pub(crate) pec: [Vec<bool>; 3],
    pub(crate) ports: Vec<Port>,
    pub(crate) groups: Vec<(String, usize)>,
    pub(crate) placements: Vec<Placement>,
}

impl Scene {
    pub fn dims(&self) -> [usize; 3] {
        self.n
    }

    pub fn cell_size(&self) -> [f64; 3] {
        self.d
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn substrate(&self) -> &Substrate {
        &self.substrate
    }

    pub fn ports(&self) -> &[Port] {
        &self.ports
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn port(&self, index: usize) -> Option<&Port> {
        self.ports.iter().find(|p| p.index == index)
    }

    #[inline]
    pub(crate) fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * (self.n[1] + 1) + j) * (self.n[2] + 1) + k
    }

    pub(crate) fn field_len(&self) -> usize {
        (self.n[0] + 1) * (self.n[1] + 1) * (self.n[2] + 1)
    }

    pub fn is_pec(&self, axis: Axis, i: usize, j: usize, k: usize) -> bool {
        self.pec[axis as usize][self.idx(i, j, k)]
    }

    pub fn pec_count(&self) -> usize {
        self.pec.iter().map(|m| m.iter().filter(|&&b| b).count()).sum()
    }

    /// Named PEC edge counts recorded by the builder.
    pub fn pec_groups(&self) -> &[(String, usize)] {
        &self.groups
    }

    /// Relative permittivity seen by an E edge along `axis` at layer `k`.
    pub(crate) fn edge_eps_r(&self, axis: Axis, k: usize) -> f64 {
        let s = &self.substrate;
        match axis {
            Axis::Z if k < s.cells => s.eps_r,
            Axis::Z => 1.0,
            _ if k < s.cells => s.eps_r,
            _ if k == s.cells => 0.5 * (s.eps_r + 1.0),
            _ => 1.0,
        }
    }

    pub(crate) fn edge_sigma(&self, axis: Axis, k: usize) -> f64 {
        let s = &self.substrate;
        match axis {
            Axis::Z if k < s.cells => s.sigma,
            Axis::Z => 0.0,
            _ if k < s.cells => s.sigma,
            _ if k == s.cells => 0.5 * s.sigma,
            _ => 0.0,
        }
    }

    /// Inclusive node-coordinate box outside the absorbing layers.
    pub fn interior(&self) -> [(usize, usize); 3] {
        let p = self.boundary.cells;
        [(p, self.n[0] - p), (p, self.n[1] - p), (0, self.n[2] - p)]
    }

    pub fn is_lossless(&self) -> bool {
        self.substrate.sigma == 0.0
    }

    /// Left-right mirror image. Port indices follow their conductors.
    pub fn mirrored_x(&self) -> Scene {
        let nx = self.n[0];
        let mut out = self.clone();
        for m in out.pec.iter_mut() {
            m.iter_mut().for_each(|b| *b = false);
        }
        for i in 0..=nx {
            for j in 0..=self.n[1] {
                for k in 0..=self.n[2] {
                    let src = self.idx(i, j, k);
                    if i < nx && self.pec[0][src] {
                        let dst = self.idx(nx - 1 - i, j, k);
                        out.pec[0][dst] = true;
                    }
                    let dst = self.idx(nx - i, j, k);
                    out.pec[1][dst] = self.pec[1][src];
                    out.pec[2][dst] = self.pec[2][src];
                }
            }
        }
        for p in out.ports.iter_mut() {
            p.i = nx - p.i;
        }
        for pl in out.placements.iter_mut() {
            let (i0, i1) = (nx - pl.i1, nx - pl.i0);
            pl.i0 = i0;
            pl.i1 = i1;
        }
        out
    }

    /// Line-oriented audit description. Identical scenes give identical text.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let [nx, ny, nz] = self.n;
        let [dx, dy, dz] = self.d;
        let b = &self.boundary;
        let sub = &self.substrate;
        writeln!(s, "pixiso-scene 1").unwrap();
        writeln!(s, "dims {nx} {ny} {nz}").unwrap();
        writeln!(s, "cell {dx:e} {dy:e} {dz:e}").unwrap();
        writeln!(
            s,
            "pml {} {:e} {:e} {:e} {:e}",
            b.cells, b.grading_order, b.reflection, b.kappa_max, b.alpha_max
        )
        .unwrap();
        writeln!(s, "substrate {} {:e} {:e}", sub.cells, sub.eps_r, sub.sigma).unwrap();
        writeln!(s, "pec {}", self.pec_count()).unwrap();
        for (name, count) in &self.groups {
            writeln!(s, "pec_group {name} {count}").unwrap();
        }
        for (n, pl) in self.placements.iter().enumerate() {
            writeln!(s, "patch {} {} {} {} {} {}", n + 1, pl.i0, pl.i1, pl.j0, pl.j1, pl.k).unwrap();
        }
        for p in &self.ports {
            writeln!(
                s,
                "port {} {} {} {} {} {:e} {:e} {}",
                p.index, p.i, p.j, p.k0, p.k1, p.z0, p.rs, p.polarity
            )
            .unwrap();
        }
        writeln!(s, "pec_hash {:016x}", self.pec_hash()).unwrap();
        s
    }

    fn pec_hash(&self) -> u64 {
        // FNV-1a over the set edge indices of each component
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (c, m) in self.pec.iter().enumerate() {
            for (n, _) in m.iter().enumerate().filter(|(_, &b)| b) {
                for byte in ((c as u64) << 56 | n as u64).to_le_bytes() {
                    h ^= u64::from(byte);
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }
}

/// Incremental construction of a [`Scene`].
#[derive(Clone, Debug)]
pub struct SceneBuilder {
    scene: Scene,
}

impl SceneBuilder {
    pub fn new(n: [usize; 3], d: [f64; 3]) -> Result<Self> {
        if n.iter().any(|&c| c == 0) {
            return Err(Error::invalid(format!("lattice dimensions must be positive, got {n:?}")));
        }
        if d.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::invalid(format!("cell sizes must be positive, got {d:?}")));
        }
        let len = (n[0] + 1) * (n[1] + 1) * (n[2] + 1);
        Ok(Self {
            scene: Scene {
                n,
                d,
                boundary: Boundary::default(),
                substrate: Substrate {
                    cells: 0,
                    eps_r: 1.0,
                    sigma: 0.0,
                },
                pec: [vec![false; len], vec![false; len], vec![false; len]],
                ports: Vec::new(),
                groups: Vec::new(),
                placements: Vec::new(),
            },
        })
    }

    pub fn boundary(mut self, b: Boundary) -> Self {
        self.scene.boundary = b;
        self
    }

    pub fn substrate(mut self, cells: usize, eps_r: f64, sigma: f64) -> Self {
        self.scene.substrate = Substrate { cells, eps_r, sigma };
        self
    }

    /// Marks one E edge as PEC. Returns true if it was not already set.
    pub fn pec_edge(&mut self, axis: Axis, i: usize, j: usize, k: usize) -> bool {
        let n = self.scene.idx(i, j, k);
        !std::mem::replace(&mut self.scene.pec[axis as usize][n], true)
    }

    /// Whole z = 0 plane.
    pub fn ground(&mut self) -> usize {
        let [nx, ny, _] = self.scene.n;
        self.plate(0, 0, nx, 0, ny)
    }

    /// Horizontal PEC rectangle spanning nodes `i0..=i1`, `j0..=j1` at
    /// layer `k`. Returns the number of newly set edges.
    pub fn plate(&mut self, k: usize, i0: usize, i1: usize, j0: usize, j1: usize) -> usize {
        let mut added = 0;
        for i in i0..i1 {
            for j in j0..=j1 {
                added += usize::from(self.pec_edge(Axis::X, i, j, k));
            }
        }
        for i in i0..=i1 {
            for j in j0..j1 {
                added += usize::from(self.pec_edge(Axis::Y, i, j, k));
            }
        }
        added
    }

    /// Straight wire of PEC edges along `axis` starting at node `(i, j, k)`.
    pub fn wire(&mut self, axis: Axis, (i, j, k): (usize, usize, usize), len: usize) -> usize {
        (0..len)
            .map(|s| {
                let (a, b, c) = match axis {
                    Axis::X => (i + s, j, k),
                    Axis::Y => (i, j + s, k),
                    Axis::Z => (i, j, k + s),
                };
                usize::from(self.pec_edge(axis, a, b, c))
            })
            .sum()
    }

    pub fn record_group(&mut self, name: &str, count: usize) {
        self.scene.groups.push((name.to_string(), count));
    }

    /// 50 ohm lumped port across Ez edges `k0..k1` at node `(i, j)`.
    pub fn port(&mut self, i: usize, j: usize, k0: usize, k1: usize) -> usize {
        let index = self.scene.ports.len() + 1;
        self.scene.ports.push(Port {
            index,
            i,
            j,
            k0,
            k1,
            z0: 50.0,
            rs: 50.0,
            polarity: 1,
        });
        index
    }

    pub fn place(&mut self, p: Placement) {
        self.scene.placements.push(p);
    }

    pub fn build(self) -> Result<Scene> {
        let s = self.scene;
        let p = s.boundary.cells;
        let [nx, ny, nz] = s.n;
        if p < MIN_PML_CELLS {
            return Err(Error::invalid(format!("absorbing layer must be at least {MIN_PML_CELLS} cells")));
        }
        if 2 * p + 2 > nx || 2 * p + 2 > ny || p + 2 > nz {
            return Err(Error::invalid("lattice too small for its absorbing layers"));
        }
        if s.substrate.eps_r < 1.0 || s.substrate.sigma < 0.0 || s.substrate.cells >= nz - p {
            return Err(Error::invalid("substrate must be physical and below the absorbing layer"));
        }
        for port in &s.ports {
            let inside = port.i > p
                && port.i < nx - p
                && port.j > p
                && port.j < ny - p
                && port.k0 < port.k1
                && port.k1 < nz - p;
            if !inside {
                return Err(Error::invalid(format!(
                    "port {} must lie strictly inside the non-absorbing region",
                    port.index
                )));
            }
            if !(port.z0 > 0.0 && port.rs > 0.0) {
                return Err(Error::invalid(format!("port {} needs positive impedances", port.index)));
            }
            for k in port.k0..port.k1 {
                if s.is_pec(Axis::Z, port.i, port.j, k) {
                    return Err(Error::invalid(format!("port {} gap is shorted", port.index)));
                }
            }
        }
        for (a, pa) in s.ports.iter().enumerate() {
            if s.ports[a + 1..].iter().any(|pb| pb.i == pa.i && pb.j == pa.j) {
                return Err(Error::invalid("two ports share a feed"));
            }
        }
        Ok(s)
    }
}

/// Two coplanar pixelated patches over a grounded substrate, placed side by
/// side along x with `spacing` meters between facing edges. Each patch is
/// fed by a strip running in -y from its feed pixel to a lumped port.
pub fn build_scene(
    patch_a: &PixelGrid,
    patch_b: &PixelGrid,
    spacing: f64,
    materials: &MaterialStack,
    resolution: usize,
) -> Result<Scene> {
    build_scene_with(patch_a, patch_b, spacing, materials, &LatticeSpec::with_resolution(resolution))
}

pub fn build_scene_with(
    patch_a: &PixelGrid,
    patch_b: &PixelGrid,
    spacing: f64,
    materials: &MaterialStack,
    spec: &LatticeSpec,
) -> Result<Scene> {
    spec.validate()?;
    materials.validate()?;
    if !(spacing >= 0.0 && spacing.is_finite()) {
        return Err(Error::invalid(format!("spacing must be non-negative, got {spacing}")));
    }
    for (name, g) in [("A", patch_a), ("B", patch_b)] {
        if !g.is_repaired() {
            return Err(Error::invalid(format!("patch {name} has floating pixels; repair it first")));
        }
        if g.feed().iy != 0 {
            return Err(Error::invalid(format!("patch {name} feed must sit on the bottom row")));
        }
    }
    if !patch_a.same_shape(patch_b) || patch_a.pitch_x() != patch_b.pitch_x() || patch_a.pitch_y() != patch_b.pitch_y() {
        return Err(Error::invalid("both patches must share shape and pitch"));
    }

    let r = spec.resolution;
    let dx = patch_a.pitch_x() / r as f64;
    let dy = patch_a.pitch_y() / r as f64;
    let dz = materials.h / spec.substrate_cells as f64;
    let pml = spec.boundary.cells;
    let (gnx, gny) = (patch_a.nx() * r, patch_a.ny() * r);
    // facing edges never share a node: the minimum representable gap is one cell
    let gap = ((spacing / dx).round() as usize).max(1);

    let ia0 = pml + spec.air_cells;
    let ib0 = ia0 + gnx + gap;
    let nx = ib0 + gnx + spec.air_cells + pml;
    let j_port = pml + spec.air_cells;
    let j0 = j_port + spec.feed_cells;
    let ny = j0 + gny + spec.air_cells + pml;
    let ks = spec.substrate_cells;
    let nz = ks + spec.air_cells_z + pml;

    let sigma = 2.0 * std::f64::consts::PI * spec.loss_reference_hz * EPS0 * materials.eps_r * materials.loss_tangent;
    let mut b = SceneBuilder::new([nx, ny, nz], [dx, dy, dz])?
        .boundary(spec.boundary)
        .substrate(ks, materials.eps_r, sigma);
    let ground = b.ground();
    b.record_group("ground", ground);

    for (n, (g, i0)) in [(patch_a, ia0), (patch_b, ib0)].into_iter().enumerate() {
        let mut count = 0;
        for iy in 0..g.ny() {
            for ix in 0..g.nx() {
                if g.get(crate::grid::Cell::new(ix, iy)) {
                    let (pi, pj) = (i0 + ix * r, j0 + iy * r);
                    count += b.plate(ks, pi, pi + r, pj, pj + r);
                }
            }
        }
        b.record_group(&format!("patch_{}", n + 1), count);
        b.place(Placement {
            i0,
            i1: i0 + gnx,
            j0,
            j1: j0 + gny,
            k: ks,
        });
        let i_feed = i0 + g.feed().ix * r + r / 2;
        let feed = b.wire(Axis::Y, (i_feed, j_port, ks), spec.feed_cells);
        b.record_group(&format!("feed_{}", n + 1), feed);
        b.port(i_feed, j_port, 0, ks);
    }
    b.build()
}
