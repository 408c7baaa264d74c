//! Finite-window realisations of the marked Poisson graph.
//!
//! Vertices form a Poisson process on the ball `B(0, W)` with i.i.d. marks
//! uniform on `(0, 1]`; every unordered pair is joined independently with the
//! kernel probability. A root may be planted afterwards, with its edges
//! sampled the same way. All randomness comes from caller-supplied streams,
//! so identical streams give identical graphs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{ball_volume, norm, squared_distance};
use crate::model::{ModelParams, Profile};

/// Expected-vertex-count cap guarding runaway windows.
pub const DEFAULT_VERTEX_CAP: f64 = 1e7;

/// Cell-pair connection bounds below this floor are skipped outright; the
/// skipped probability mass is accumulated and reported.
pub const CELL_GRID_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub position: Vec<f64>,
    pub mark: f64,
}

/// Flat storage for a set of marked vertices (positions are `dim`-strided).
#[derive(Debug, Clone, Default)]
pub struct VertexSet {
    dim: u32,
    positions: Vec<f64>,
    marks: Vec<f64>,
}

impl VertexSet {
    pub fn new(dim: u32) -> Self {
        VertexSet { dim, positions: Vec::new(), marks: Vec::new() }
    }

    pub fn from_vertices(dim: u32, vertices: &[Vertex]) -> Result<Self> {
        let mut set = VertexSet::new(dim);
        for v in vertices {
            if v.position.len() != dim as usize {
                return Err(Error::invalid("vertex dimension mismatch"));
            }
            if !(v.mark > 0.0 && v.mark <= 1.0) {
                return Err(Error::invalid("marks must lie in (0, 1]"));
            }
            set.push(&v.position, v.mark);
        }
        Ok(set)
    }

    pub fn push(&mut self, position: &[f64], mark: f64) {
        debug_assert_eq!(position.len(), self.dim as usize);
        self.positions.extend_from_slice(position);
        self.marks.push(mark);
    }

    /// Drop all vertices, keeping the allocation.
    pub fn clear(&mut self, dim: u32) {
        self.dim = dim;
        self.positions.clear();
        self.marks.clear();
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        let d = self.dim as usize;
        &self.positions[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn mark(&self, i: usize) -> f64 {
        self.marks[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.position(i), self.mark(i)))
    }

    pub fn to_vertices(&self) -> Vec<Vertex> {
        (0..self.len())
            .map(|i| Vertex { position: self.position(i).to_vec(), mark: self.mark(i) })
            .collect()
    }
}

/// Edge sampling strategy. Both produce identically distributed adjacencies;
/// `CellGrid` accelerates large homogeneous windows exactly, short-circuiting
/// probability-one blocks under the hard profile and skipping cell pairs
/// whose maximal connection probability falls below [`CELL_GRID_FLOOR`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeStrategy {
    Naive,
    CellGrid,
}

#[derive(Debug, Clone, Default)]
pub struct EdgeSample {
    pub edges: Vec<(u32, u32)>,
    /// Upper bound on the expected number of edges lost to floor skipping.
    pub skipped_mass: f64,
}

/// Compressed adjacency built once per graph.
#[derive(Debug, Clone, Default)]
struct Csr {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl Csr {
    fn rebuild(&mut self, n: usize, edges: &[(u32, u32)]) {
        self.offsets.clear();
        self.offsets.resize(n + 2, 0);
        // Counting sort with the counts shifted by one, so the cursor pass
        // leaves the offsets in place without a scratch copy.
        for &(a, b) in edges {
            self.offsets[a as usize + 2] += 1;
            self.offsets[b as usize + 2] += 1;
        }
        for i in 2..n + 2 {
            self.offsets[i] += self.offsets[i - 1];
        }
        self.targets.clear();
        self.targets.resize(edges.len() * 2, 0);
        for &(a, b) in edges {
            self.targets[self.offsets[a as usize + 1] as usize] = b;
            self.offsets[a as usize + 1] += 1;
            self.targets[self.offsets[b as usize + 1] as usize] = a;
            self.offsets[b as usize + 1] += 1;
        }
        self.offsets.pop();
    }

}

/// An immutable sampled graph: vertex set, normalized edge set, window radius
/// and seed provenance, plus the planted root if any.
#[derive(Debug, Clone)]
pub struct SampledGraph {
    verts: VertexSet,
    edges: Vec<(u32, u32)>,
    csr: Csr,
    norms: Vec<f64>,
    pub window_radius: f64,
    pub root_index: Option<u32>,
    pub seed: u64,
    pub skipped_mass: f64,
}

/// Recycled storage of a consumed graph; lets trial loops rebuild graphs
/// without reallocating the big vectors.
#[derive(Debug, Default)]
pub(crate) struct GraphParts {
    pub verts: VertexSet,
    pub edges: Vec<(u32, u32)>,
    csr: Csr,
    norms: Vec<f64>,
}

impl SampledGraph {
    pub fn assemble(
        verts: VertexSet,
        edges: Vec<(u32, u32)>,
        window_radius: f64,
        root_index: Option<u32>,
        seed: u64,
    ) -> Self {
        let parts = GraphParts { verts, edges, csr: Csr::default(), norms: Vec::new() };
        Self::assemble_from_parts(parts, window_radius, root_index, seed)
    }

    pub(crate) fn assemble_from_parts(
        mut parts: GraphParts,
        window_radius: f64,
        root_index: Option<u32>,
        seed: u64,
    ) -> Self {
        let n = parts.verts.len();
        for e in parts.edges.iter_mut() {
            debug_assert!(e.0 != e.1, "adjacency must be irreflexive");
            debug_assert!((e.0 as usize) < n && (e.1 as usize) < n);
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        parts.edges.sort_unstable();
        parts.edges.dedup();
        parts.csr.rebuild(n, &parts.edges);
        parts.norms.clear();
        parts.norms.extend((0..n).map(|i| norm(parts.verts.position(i))));
        SampledGraph {
            verts: parts.verts,
            edges: parts.edges,
            csr: parts.csr,
            norms: parts.norms,
            window_radius,
            root_index,
            seed,
            skipped_mass: 0.0,
        }
    }

    /// Reclaim the internal buffers for the next trial.
    pub(crate) fn into_parts(self) -> GraphParts {
        GraphParts { verts: self.verts, edges: self.edges, csr: self.csr, norms: self.norms }
    }

    /// Distance of vertex `i` from the origin, precomputed at assembly.
    #[inline]
    pub fn radial_distance(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn vertices(&self) -> &VertexSet {
        &self.verts
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    #[inline]
    pub fn neighbors(&self, i: u32) -> &[u32] {
        let lo = self.csr.offsets[i as usize] as usize;
        let hi = self.csr.offsets[i as usize + 1] as usize;
        &self.csr.targets[lo..hi]
    }

    pub fn root(&self) -> Option<(u32, &[f64], f64)> {
        self.root_index
            .map(|i| (i, self.verts.position(i as usize), self.verts.mark(i as usize)))
    }

    /// Rebuild a graph from [`SampledGraph::dump`] text. The root index and
    /// a non-unit hard threshold are not part of the format and are lost.
    pub fn from_dump(text: &str) -> Result<(ModelParams, SampledGraph)> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        if header.len() != 9 || header[0] != "girg" || header[1] != "v1" {
            return Err(Error::invalid("dump header must be `girg v1 d lambda gamma delta W seed n`"));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::invalid(format!("bad {what} in dump header")))
        };
        let dim = parse(header[2], "dimension")? as u32;
        let lambda = parse(header[3], "lambda")?;
        let gamma = parse(header[4], "gamma")?;
        let profile = if header[5] == "inf" {
            Profile::Hard { r0: 1.0 }
        } else {
            Profile::SoftPowerLaw { delta: parse(header[5], "delta")? }
        };
        let params = ModelParams::new(dim, lambda, gamma, profile)?;
        let window = parse(header[6], "window")?;
        let seed = parse(header[7], "seed")? as u64;
        let n = parse(header[8], "count")? as usize;
        let mut verts = VertexSet::new(dim);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| Error::invalid("truncated vertex block"))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 + dim as usize {
                return Err(Error::invalid("malformed vertex line"));
            }
            let coords = fields[1..=dim as usize]
                .iter()
                .map(|s| parse(s, "coordinate"))
                .collect::<Result<Vec<f64>>>()?;
            verts.push(&coords, parse(fields[dim as usize + 1], "mark")?);
        }
        let mut edges = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (a, b) = (it.next(), it.next());
            match (a.and_then(|s| s.parse::<u32>().ok()), b.and_then(|s| s.parse::<u32>().ok())) {
                (Some(a), Some(b)) if (a as usize) < n && (b as usize) < n && a != b => {
                    edges.push((a, b))
                }
                _ => return Err(Error::invalid("malformed edge line")),
            }
        }
        Ok((params, SampledGraph::assemble(verts, edges, window, None, seed)))
    }

    /// Plain-text dump: `girg v1 d lambda gamma delta W seed n`, one vertex
    /// line `idx x_1 .. x_d mark`, one edge line `i j`. `delta` prints as
    /// `inf` for the hard profile (the unit threshold is assumed).
    pub fn dump(&self, params: &ModelParams) -> String {
        use std::fmt::Write;
        let delta = params.delta_effective();
        let mut out = String::new();
        let _ = write!(
            out,
            "girg v1 {} {} {} {} {} {} {}\n",
            params.dim,
            params.lambda,
            params.gamma,
            if delta.is_finite() { delta.to_string() } else { "inf".into() },
            self.window_radius,
            self.seed,
            self.verts.len()
        );
        for i in 0..self.verts.len() {
            let _ = write!(out, "{}", i);
            for x in self.verts.position(i) {
                let _ = write!(out, " {}", x);
            }
            let _ = write!(out, " {}\n", self.verts.mark(i));
        }
        for &(a, b) in &self.edges {
            let _ = write!(out, "{} {}\n", a, b);
        }
        out
    }
}

fn sample_uniform_in_ball(dim: u32, radius: f64, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
    match dim {
        1 => out.push(radius * (2.0 * rng.random::<f64>() - 1.0)),
        2 | 3 => loop {
            // Rejection from the bounding cube; acceptance >= 0.52.
            let d = dim as usize;
            let start = out.len();
            let mut sq = 0.0;
            for _ in 0..d {
                let x = 2.0 * rng.random::<f64>() - 1.0;
                sq += x * x;
                out.push(x);
            }
            if sq <= 1.0 {
                for x in &mut out[start..] {
                    *x *= radius;
                }
                break;
            }
            out.truncate(start);
        },
        _ => {
            // Direction from normalized Gaussians, radius via U^{1/d}.
            let d = dim as usize;
            let start = out.len();
            let mut sq = 0.0;
            loop {
                for _ in 0..d {
                    let g: f64 = StandardNormal.sample(rng);
                    sq += g * g;
                    out.push(g);
                }
                if sq > 0.0 {
                    break;
                }
                out.truncate(start);
            }
            let r = radius * rng.random::<f64>().powf(1.0 / dim as f64) / sq.sqrt();
            for x in &mut out[start..] {
                *x *= r;
            }
        }
    }
}

fn sample_mark(rng: &mut ChaCha8Rng) -> f64 {
    // 1 - U with U uniform on [0, 1), so marks land in (0, 1].
    1.0 - rng.random::<f64>()
}

pub fn sample_vertices(
    params: &ModelParams,
    window_radius: f64,
    rng: &mut ChaCha8Rng,
) -> Result<VertexSet> {
    sample_vertices_capped(params, window_radius, rng, DEFAULT_VERTEX_CAP)
}

/// Poisson(lambda * vol(B(0, W))) vertices, i.i.d. uniform positions in the
/// window and uniform marks. Deterministic given the stream state.
pub fn sample_vertices_capped(
    params: &ModelParams,
    window_radius: f64,
    rng: &mut ChaCha8Rng,
    cap: f64,
) -> Result<VertexSet> {
    let mut set = VertexSet::new(params.dim);
    sample_vertices_into(params, window_radius, rng, cap, &mut set)?;
    Ok(set)
}

/// Buffer-reusing variant for trial loops.
pub(crate) fn sample_vertices_into(
    params: &ModelParams,
    window_radius: f64,
    rng: &mut ChaCha8Rng,
    cap: f64,
    out: &mut VertexSet,
) -> Result<()> {
    params.validate()?;
    if !(window_radius > 0.0) || !window_radius.is_finite() {
        return Err(Error::invalid("window radius must be positive and finite"));
    }
    let mean = params.lambda * ball_volume(params.dim, window_radius);
    if mean > cap {
        return Err(Error::ResourceExhausted { expected: mean, cap });
    }
    let count = Poisson::new(mean)
        .map_err(|e| Error::invalid(format!("poisson mean invalid: {e}")))?
        .sample(rng) as usize;
    out.clear(params.dim);
    out.positions.reserve(count * params.dim as usize);
    out.marks.reserve(count);
    for _ in 0..count {
        sample_uniform_in_ball(params.dim, window_radius, rng, &mut out.positions);
        out.marks.push(sample_mark(rng));
    }
    Ok(())
}

/// Bernoulli edge sampling over every unordered vertex pair.
pub fn sample_edges(
    params: &ModelParams,
    verts: &VertexSet,
    rng: &mut ChaCha8Rng,
    strategy: EdgeStrategy,
) -> EdgeSample {
    sample_edges_pruned(params, verts, rng, strategy, None)
}

/// Edge sampling that may drop pairs lying entirely outside `B(0, prune)`.
///
/// Crossing and escape events with outer radius at most `prune` never use an
/// edge whose endpoints are both at distance >= `prune`: a minimal witness
/// path stays inside the ball until its first exit. Dropping those pairs
/// leaves every such event indicator unchanged while skipping the bulk of
/// the pair work in wide windows.
pub(crate) fn sample_edges_pruned(
    params: &ModelParams,
    verts: &VertexSet,
    rng: &mut ChaCha8Rng,
    strategy: EdgeStrategy,
    prune: Option<f64>,
) -> EdgeSample {
    match strategy {
        EdgeStrategy::Naive => sample_edges_naive(params, verts, rng, prune),
        EdgeStrategy::CellGrid => {
            let mut sample = EdgeSample::default();
            let mut scratch = cell_grid::GridScratch::default();
            sample.skipped_mass =
                cell_grid::sample_into(params, verts, rng, prune, &mut scratch, &mut sample.edges);
            sample
        }
    }
}

/// Buffer-reusing edge sampling for trial loops; appends into `edges`.
pub(crate) fn sample_edges_into(
    params: &ModelParams,
    verts: &VertexSet,
    rng: &mut ChaCha8Rng,
    strategy: EdgeStrategy,
    prune: Option<f64>,
    scratch: &mut cell_grid::GridScratch,
    edges: &mut Vec<(u32, u32)>,
) -> f64 {
    match strategy {
        EdgeStrategy::Naive => {
            let sample = sample_edges_naive(params, verts, rng, prune);
            edges.extend_from_slice(&sample.edges);
            sample.skipped_mass
        }
        EdgeStrategy::CellGrid => cell_grid::sample_into(params, verts, rng, prune, scratch, edges),
    }
}

fn sample_edges_naive(
    params: &ModelParams,
    verts: &VertexSet,
    rng: &mut ChaCha8Rng,
    prune: Option<f64>,
) -> EdgeSample {
    let n = verts.len();
    let active: Vec<bool> = match prune {
        Some(radius) => (0..n).map(|i| norm(verts.position(i)) < radius).collect(),
        None => Vec::new(),
    };
    let mut edges = Vec::new();
    for i in 0..n {
        let (xi, ui) = (verts.position(i), verts.mark(i));
        for j in (i + 1)..n {
            if !active.is_empty() && !active[i] && !active[j] {
                continue;
            }
            let p = params.connection_probability_sq(
                squared_distance(xi, verts.position(j)),
                ui,
                verts.mark(j),
            );
            // Deterministic pairs burn no randomness, so threshold blocks
            // match the cell grid's short-circuit outcome exactly.
            if p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p) {
                edges.push((i as u32, j as u32));
            }
        }
    }
    EdgeSample { edges, skipped_mass: 0.0 }
}

/// Plant an extra vertex with fixed position and mark; its edges to every
/// prior vertex are sampled with the standard kernel, one uniform per
/// existing vertex in index order (so reusing a stream couples the edge sets
/// across different root marks).
pub fn plant_vertex(
    params: &ModelParams,
    graph: SampledGraph,
    position: &[f64],
    mark: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SampledGraph> {
    if position.len() != params.dim as usize {
        return Err(Error::invalid("root position dimension mismatch"));
    }
    if norm(position) > graph.window_radius {
        return Err(Error::invalid("root position outside the window"));
    }
    if !(mark > 0.0 && mark <= 1.0) {
        return Err(Error::invalid("root mark must lie in (0, 1]"));
    }
    let SampledGraph { mut verts, mut edges, window_radius, seed, skipped_mass, .. } = graph;
    let root = verts.len() as u32;
    for j in 0..verts.len() {
        let p = params.connection_probability_sq(
            squared_distance(position, verts.position(j)),
            mark,
            verts.mark(j),
        );
        if rng.random::<f64>() < p {
            edges.push((j as u32, root));
        }
    }
    verts.push(position, mark);
    let mut graph = SampledGraph::assemble(verts, edges, window_radius, Some(root), seed);
    graph.skipped_mass = skipped_mass;
    Ok(graph)
}

/// Plant the Palm root `(0, U)` with `U` uniform on `(0, 1]`.
pub fn plant_palm_root(
    params: &ModelParams,
    graph: SampledGraph,
    mark_rng: &mut ChaCha8Rng,
    edge_rng: &mut ChaCha8Rng,
) -> Result<SampledGraph> {
    let mark = sample_mark(mark_rng);
    let origin = vec![0.0; params.dim as usize];
    plant_vertex(params, graph, &origin, mark, edge_rng)
}

pub(crate) mod cell_grid {
    //! Exact accelerated pair sampling.
    //!
    //! Vertices are binned into cells; cell pairs within a small Chebyshev
    //! range are sampled with per-pair bounds and geometric skip-ahead, while
    //! all farther pairs are covered by mark-band pairs with a single distance
    //! bound. Every pair is covered by exactly one phase, bounds dominate the
    //! true kernel value on the covered pairs, and accepted candidates are
    //! thinned to the exact probability, so the sampled law matches the naive
    //! pair loop.

    use super::*;

    /// Cell pairs within this Chebyshev distance are handled by the near
    /// phase; everything farther goes through the band phase.
    const NEAR_CHEB: i64 = 2;

    /// Reusable grid storage; a trial loop keeps one of these alive so the
    /// big per-trial vectors are allocated once.
    #[derive(Debug, Default)]
    pub(crate) struct GridScratch {
        dims: Vec<i64>,
        side: f64,
        /// CSR vertex lists per cell.
        starts: Vec<u32>,
        items: Vec<u32>,
        occupied: Vec<u32>,
        u_min: Vec<f64>,
        u_max: f64,
        /// Whether a cell holds any vertex inside the prune radius.
        cell_active: Vec<bool>,
        vertex_active: Vec<bool>,
        cell_coords: Vec<i32>,
        lo: Vec<f64>,
        hi: Vec<f64>,
        cell_of: Vec<u32>,
        coords_buf: Vec<i64>,
        bands: Vec<Vec<u32>>,
        offsets: Offsets,
    }

    /// The offset lattice [-C, C]^d with precomputed per-offset geometry and,
    /// for mark-free kernels, the connection bound.
    #[derive(Debug, Default)]
    struct Offsets {
        offsets: Vec<i64>,
        gap_sq: Vec<f64>,
        far_sq: Vec<f64>,
        p_bound: Vec<f64>,
        /// Whether the first nonzero coordinate is positive (or the offset is
        /// zero); the forward half covers each unordered cell pair once.
        forward: Vec<bool>,
        dim: usize,
    }

    impl GridScratch {
        fn rebuild(&mut self, params: &ModelParams, verts: &VertexSet, side: f64, prune: Option<f64>) {
            let d = verts.dim() as usize;
            let n = verts.len();
            self.side = side;
            self.lo.clear();
            self.lo.resize(d, f64::INFINITY);
            self.hi.clear();
            self.hi.resize(d, f64::NEG_INFINITY);
            for i in 0..n {
                for (a, x) in verts.position(i).iter().enumerate() {
                    self.lo[a] = self.lo[a].min(*x);
                    self.hi[a] = self.hi[a].max(*x);
                }
            }
            self.dims.clear();
            self.dims.extend(
                (0..d).map(|a| (((self.hi[a] - self.lo[a]) / side).floor() as i64 + 1).max(1)),
            );
            let cells: usize = self.dims.iter().product::<i64>() as usize;
            self.starts.clear();
            self.starts.resize(cells + 2, 0);
            self.cell_of.clear();
            self.cell_of.resize(n, 0);
            self.cell_coords.clear();
            self.cell_coords.resize(n * d, 0);
            for i in 0..n {
                let mut idx = 0i64;
                for a in 0..d {
                    let c = (((verts.position(i)[a] - self.lo[a]) / side).floor() as i64)
                        .clamp(0, self.dims[a] - 1);
                    self.cell_coords[i * d + a] = c as i32;
                    idx = idx * self.dims[a] + c;
                }
                self.cell_of[i] = idx as u32;
                self.starts[idx as usize + 2] += 1;
            }
            for c in 2..cells + 2 {
                self.starts[c] += self.starts[c - 1];
            }
            self.items.clear();
            self.items.resize(n, 0);
            for i in 0..n {
                let c = self.cell_of[i] as usize;
                self.items[self.starts[c + 1] as usize] = i as u32;
                self.starts[c + 1] += 1;
            }
            self.starts.pop();
            self.vertex_active.clear();
            match prune {
                Some(radius) => self
                    .vertex_active
                    .extend((0..n).map(|i| norm(verts.position(i)) < radius)),
                None => self.vertex_active.resize(n, true),
            }
            self.occupied.clear();
            self.u_min.clear();
            self.u_min.resize(cells, 1.0);
            self.cell_active.clear();
            self.cell_active.resize(cells, false);
            self.u_max = 0.0;
            for c in 0..cells {
                let (s, e) = (self.starts[c] as usize, self.starts[c + 1] as usize);
                if s < e {
                    self.occupied.push(c as u32);
                    for k in s..e {
                        let i = self.items[k] as usize;
                        self.u_min[c] = self.u_min[c].min(verts.mark(i));
                        self.cell_active[c] |= self.vertex_active[i];
                    }
                }
            }
            for i in 0..n {
                self.u_max = self.u_max.max(verts.mark(i));
            }
            self.rebuild_offsets(params, side, d);
        }

        fn rebuild_offsets(&mut self, params: &ModelParams, side: f64, d: usize) {
            let o = &mut self.offsets;
            o.dim = d;
            o.offsets.clear();
            o.gap_sq.clear();
            o.far_sq.clear();
            o.p_bound.clear();
            o.forward.clear();
            let mut cur = vec![-NEAR_CHEB; d];
            'outer: loop {
                let forward = cur
                    .iter()
                    .find(|&&x| x != 0)
                    .map_or(true, |&first_nonzero| first_nonzero > 0);
                let mut gap = 0.0;
                let mut far = 0.0;
                for &x in &cur {
                    let g = (x.abs() - 1).max(0) as f64 * side;
                    let f = (x.abs() + 1) as f64 * side;
                    gap += g * g;
                    far += f * f;
                }
                o.offsets.extend_from_slice(&cur);
                o.gap_sq.push(gap);
                o.far_sq.push(far);
                o.forward.push(forward);
                o.p_bound.push(if params.gamma == 0.0 {
                    params.connection_probability_sq(gap, 1.0, 1.0)
                } else {
                    f64::NAN
                });
                let mut a = 0;
                loop {
                    if a == d {
                        break 'outer;
                    }
                    cur[a] += 1;
                    if cur[a] <= NEAR_CHEB {
                        break;
                    }
                    cur[a] = -NEAR_CHEB;
                    a += 1;
                }
            }
        }

        fn members(&self, cell: u32) -> &[u32] {
            &self.items
                [self.starts[cell as usize] as usize..self.starts[cell as usize + 1] as usize]
        }

        fn decode_into(&self, cell: u32, coords: &mut Vec<i64>) {
            coords.clear();
            coords.resize(self.dims.len(), 0);
            let mut c = cell as i64;
            for a in (0..self.dims.len()).rev() {
                coords[a] = c % self.dims[a];
                c /= self.dims[a];
            }
        }

        fn encode_offset(&self, coords: &[i64], offset: &[i64]) -> Option<u32> {
            let mut idx = 0i64;
            for a in 0..coords.len() {
                let c = coords[a] + offset[a];
                if c < 0 || c >= self.dims[a] {
                    return None;
                }
                idx = idx * self.dims[a] + c;
            }
            Some(idx as u32)
        }

        fn cheb(&self, i: u32, j: u32) -> i64 {
            let d = self.dims.len();
            let (ci, cj) = (
                &self.cell_coords[i as usize * d..(i as usize + 1) * d],
                &self.cell_coords[j as usize * d..(j as usize + 1) * d],
            );
            ci.iter().zip(cj).map(|(a, b)| (*a as i64 - *b as i64).abs()).max().unwrap_or(0)
        }
    }

    /// First index >= 0 of a success in a Bernoulli(p) sequence.
    #[inline]
    fn geometric_skip(rng: &mut ChaCha8Rng, p: f64) -> u64 {
        if p >= 1.0 {
            return 0;
        }
        let u = rng.random::<f64>();
        let skip = u.ln() / (-p).ln_1p();
        if skip >= u64::MAX as f64 {
            u64::MAX
        } else {
            skip as u64
        }
    }

    /// Decode a linear index into the i<j pair (row-major triangular layout).
    fn decode_triangular(k: u64, m: u64) -> (u64, u64) {
        let mut i = (m as f64
            - 0.5
            - ((m as f64 - 0.5) * (m as f64 - 0.5) - 2.0 * k as f64).max(0.0).sqrt())
        .floor() as u64;
        // Guard the float estimate.
        let row_start = |i: u64| i * m - i * (i + 1) / 2;
        while i > 0 && row_start(i) > k {
            i -= 1;
        }
        while i + 1 < m && row_start(i + 1) <= k {
            i += 1;
        }
        let j = i + 1 + (k - row_start(i));
        (i, j)
    }

    pub(crate) fn sample_into(
        params: &ModelParams,
        verts: &VertexSet,
        rng: &mut ChaCha8Rng,
        prune: Option<f64>,
        scratch: &mut GridScratch,
        edges: &mut Vec<(u32, u32)>,
    ) -> f64 {
        let n = verts.len();
        if n < 2 {
            return 0.0;
        }
        // Aim for a handful of vertices per cell; never finer than unit cells.
        let side = (2.0 / params.lambda).powf(1.0 / params.dim as f64).max(1.0);
        scratch.rebuild(params, verts, side, prune);
        let mut skipped_mass = 0.0;
        near_phase(params, verts, scratch, rng, edges, &mut skipped_mass);
        band_phase(params, verts, scratch, rng, edges, &mut skipped_mass);
        skipped_mass
    }

    fn near_phase(
        params: &ModelParams,
        verts: &VertexSet,
        grid: &mut GridScratch,
        rng: &mut ChaCha8Rng,
        edges: &mut Vec<(u32, u32)>,
        skipped_mass: &mut f64,
    ) {
        let d = grid.offsets.dim;
        let hard_r0 = match params.profile {
            crate::model::Profile::Hard { r0 } => Some(r0),
            _ => None,
        };
        let mut coords_a = std::mem::take(&mut grid.coords_buf);
        // Iterating only cells with active vertices covers every pair with at
        // least one active endpoint exactly once: active-active pairs via the
        // forward offset half, active-inactive pairs from the active side in
        // both directions.
        for oi in 0..grid.occupied.len() {
            let cell_a = grid.occupied[oi];
            if !grid.cell_active[cell_a as usize] {
                continue;
            }
            grid.decode_into(cell_a, &mut coords_a);
            for k in 0..grid.offsets.gap_sq.len() {
                let offset = &grid.offsets.offsets[k * d..(k + 1) * d];
                let Some(cell_b) = grid.encode_offset(&coords_a, offset) else {
                    continue;
                };
                if grid.cell_active[cell_b as usize] && !grid.offsets.forward[k] {
                    continue;
                }
                if grid.members(cell_b).is_empty() {
                    continue;
                }
                near_cell_pair(
                    params,
                    verts,
                    grid,
                    cell_a,
                    cell_b,
                    grid.offsets.gap_sq[k],
                    grid.offsets.far_sq[k],
                    grid.offsets.p_bound[k],
                    hard_r0,
                    rng,
                    edges,
                    skipped_mass,
                );
            }
        }
        grid.coords_buf = coords_a;
    }

    #[allow(clippy::too_many_arguments)]
    fn near_cell_pair(
        params: &ModelParams,
        verts: &VertexSet,
        grid: &GridScratch,
        cell_a: u32,
        cell_b: u32,
        gap_sq: f64,
        far_sq: f64,
        cached_bound: f64,
        hard_r0: Option<f64>,
        rng: &mut ChaCha8Rng,
        edges: &mut Vec<(u32, u32)>,
        skipped_mass: &mut f64,
    ) {
        let ma = grid.members(cell_a);
        let mb = grid.members(cell_b);
        let same = cell_a == cell_b;
        let pair_count = if same {
            (ma.len() * (ma.len() - 1) / 2) as u64
        } else {
            (ma.len() * mb.len()) as u64
        };
        if pair_count == 0 {
            return;
        }
        let p_bound = if cached_bound.is_nan() {
            let u_bound = grid.u_min[cell_a as usize] * grid.u_min[cell_b as usize];
            params.connection_probability_sq(gap_sq, u_bound.min(1.0), 1.0)
        } else {
            cached_bound
        };
        if p_bound < CELL_GRID_FLOOR {
            *skipped_mass += pair_count as f64 * p_bound;
            return;
        }
        // Hard short-circuit: if even the farthest corners with the weakest
        // marks connect, the whole block is present with probability one.
        if let Some(r0) = hard_r0 {
            let arg = crate::geometry::dist_pow_d(far_sq, params.dim)
                * (grid.u_max * grid.u_max).powf(params.gamma);
            if arg <= r0 {
                if same {
                    for (ai, &i) in ma.iter().enumerate() {
                        for &j in &ma[ai + 1..] {
                            edges.push((i, j));
                        }
                    }
                } else {
                    for &i in ma {
                        for &j in mb {
                            edges.push((i, j));
                        }
                    }
                }
                return;
            }
        }
        // Geometric skip-ahead under the bound, thinned to the exact kernel.
        let mut idx = geometric_skip(rng, p_bound);
        while idx < pair_count {
            let (i, j) = if same {
                let (a, b) = decode_triangular(idx, ma.len() as u64);
                (ma[a as usize], ma[b as usize])
            } else {
                (ma[(idx / mb.len() as u64) as usize], mb[(idx % mb.len() as u64) as usize])
            };
            let p = params.connection_probability_sq(
                squared_distance(verts.position(i as usize), verts.position(j as usize)),
                verts.mark(i as usize),
                verts.mark(j as usize),
            );
            if p >= p_bound || rng.random::<f64>() * p_bound < p {
                edges.push((i, j));
            }
            idx += 1 + geometric_skip(rng, p_bound);
        }
    }

    fn band_phase(
        params: &ModelParams,
        verts: &VertexSet,
        grid: &mut GridScratch,
        rng: &mut ChaCha8Rng,
        edges: &mut Vec<(u32, u32)>,
        skipped_mass: &mut f64,
    ) {
        let n = verts.len();
        // Pairs beyond the near range are at distance >= NEAR_CHEB * side.
        let far_sq = (NEAR_CHEB as f64 * grid.side) * (NEAR_CHEB as f64 * grid.side);
        if params.gamma == 0.0 {
            // Marks are inert: a single band over all vertices, with the
            // identity mapping instead of materialized index lists.
            let p_bound = params.connection_probability_sq(far_sq, 1.0, 1.0);
            let pair_count = n as u64 * (n as u64 - 1) / 2;
            if pair_count == 0 {
                return;
            }
            if p_bound < CELL_GRID_FLOOR {
                *skipped_mass += pair_count as f64 * p_bound;
                return;
            }
            let mut idx = geometric_skip(rng, p_bound);
            while idx < pair_count {
                let (i, j) = decode_triangular(idx, n as u64);
                band_candidate(params, verts, grid, i as u32, j as u32, p_bound, rng, edges);
                idx += 1 + geometric_skip(rng, p_bound);
            }
            return;
        }
        // Mark bands 2^-(b+1) < u <= 2^-b.
        for band in grid.bands.iter_mut() {
            band.clear();
        }
        for i in 0..n {
            let b = (-verts.mark(i).log2()).floor().max(0.0) as usize;
            if grid.bands.len() <= b {
                grid.bands.resize(b + 1, Vec::new());
            }
            grid.bands[b].push(i as u32);
        }
        for b1 in 0..grid.bands.len() {
            if grid.bands[b1].is_empty() {
                continue;
            }
            for b2 in b1..grid.bands.len() {
                if grid.bands[b2].is_empty() {
                    continue;
                }
                let u_floor =
                    2f64.powi(-(b1 as i32 + 1)) * 2f64.powi(-(b2 as i32 + 1));
                let p_bound = params.connection_probability_sq(far_sq, u_floor.min(1.0), 1.0);
                let (ba, bb) = (&grid.bands[b1], &grid.bands[b2]);
                let same = b1 == b2;
                let pair_count = if same {
                    (ba.len() * (ba.len() - 1) / 2) as u64
                } else {
                    (ba.len() * bb.len()) as u64
                };
                if pair_count == 0 {
                    continue;
                }
                if p_bound < CELL_GRID_FLOOR {
                    *skipped_mass += pair_count as f64 * p_bound;
                    continue;
                }
                let mut idx = geometric_skip(rng, p_bound);
                while idx < pair_count {
                    let (i, j) = if same {
                        let (a, b) = decode_triangular(idx, ba.len() as u64);
                        (ba[a as usize], ba[b as usize])
                    } else {
                        (
                            ba[(idx / bb.len() as u64) as usize],
                            bb[(idx % bb.len() as u64) as usize],
                        )
                    };
                    band_candidate(params, verts, grid, i, j, p_bound, rng, edges);
                    idx += 1 + geometric_skip(rng, p_bound);
                }
            }
        }
    }

    /// Accept test for a band-phase candidate: near pairs were handled by the
    /// grid phase and fully pruned pairs are dropped.
    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn band_candidate(
        params: &ModelParams,
        verts: &VertexSet,
        grid: &GridScratch,
        i: u32,
        j: u32,
        p_bound: f64,
        rng: &mut ChaCha8Rng,
        edges: &mut Vec<(u32, u32)>,
    ) {
        if grid.cheb(i, j) <= NEAR_CHEB {
            return;
        }
        if !grid.vertex_active[i as usize] && !grid.vertex_active[j as usize] {
            return;
        }
        let p = params.connection_probability_sq(
            squared_distance(verts.position(i as usize), verts.position(j as usize)),
            verts.mark(i as usize),
            verts.mark(j as usize),
        );
        if p >= p_bound || rng.random::<f64>() * p_bound < p {
            edges.push((i.min(j), i.max(j)));
        }
    }

}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamLabel};

    fn soft(d: u32, lambda: f64, gamma: f64, delta: f64) -> ModelParams {
        ModelParams::soft(d, lambda, gamma, delta).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        stream(seed, 0, StreamLabel::Vertices)
    }

    #[test]
    fn vertex_counts_match_the_poisson_mean() {
        // d = 2, lambda = 1, W = 10: mean = 100 pi; d = 1, lambda = 0.5,
        // W = 8: mean = 8.
        for (params, w, mean) in [
            (soft(2, 1.0, 0.0, 3.0), 10.0, 100.0 * std::f64::consts::PI),
            (soft(1, 0.5, 0.0, 3.0), 8.0, 8.0),
        ] {
            let reps = 300;
            let mut total = 0usize;
            for t in 0..reps {
                let mut r = stream(11, t, StreamLabel::Vertices);
                total += sample_vertices(&params, w, &mut r).unwrap().len();
            }
            let avg = total as f64 / reps as f64;
            let sigma = (mean / reps as f64).sqrt();
            assert!(
                (avg - mean).abs() < 4.0 * sigma,
                "avg {avg} vs mean {mean} (sigma {sigma})"
            );
        }
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let params = soft(2, 1.0, 0.3, 3.0);
        let a = sample_vertices(&params, 6.0, &mut rng(5)).unwrap();
        let b = sample_vertices(&params, 6.0, &mut rng(5)).unwrap();
        assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            assert_eq!(a.position(i), b.position(i));
            assert_eq!(a.mark(i), b.mark(i));
        }
        let ea = sample_edges(&params, &a, &mut rng(6), EdgeStrategy::Naive);
        let eb = sample_edges(&params, &b, &mut rng(6), EdgeStrategy::Naive);
        assert_eq!(ea.edges, eb.edges);
    }

    #[test]
    fn vertices_stay_in_the_window_with_valid_marks() {
        for d in 1..=5u32 {
            let params = soft(d, 0.5, 0.2, 3.0);
            let w = 3.0;
            let verts = sample_vertices(&params, w, &mut rng(d as u64)).unwrap();
            for (pos, mark) in verts.iter() {
                assert!(norm(pos) <= w + 1e-12);
                assert!(mark > 0.0 && mark <= 1.0);
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let params = soft(3, 1000.0, 0.0, 3.0);
        let err = sample_vertices_capped(&params, 100.0, &mut rng(1), 1e6).unwrap_err();
        assert!(matches!(err, Error::ResourceExhausted { .. }));
    }

    #[test]
    fn edge_examples() {
        // Hard kernel below threshold connects with probability one.
        let params = ModelParams::hard(1, 1.0, 0.3, 1.0).unwrap();
        let verts = VertexSet::from_vertices(
            1,
            &[
                Vertex { position: vec![0.0], mark: 1.0 },
                Vertex { position: vec![0.5], mark: 1.0 },
            ],
        )
        .unwrap();
        let sample = sample_edges(&params, &verts, &mut rng(2), EdgeStrategy::Naive);
        assert_eq!(sample.edges, vec![(0, 1)]);

        // No pairs, no edges.
        let empty = VertexSet::new(1);
        assert!(sample_edges(&params, &empty, &mut rng(2), EdgeStrategy::Naive)
            .edges
            .is_empty());
        let single = VertexSet::from_vertices(
            1,
            &[Vertex { position: vec![0.1], mark: 0.5 }],
        )
        .unwrap();
        assert!(sample_edges(&params, &single, &mut rng(2), EdgeStrategy::Naive)
            .edges
            .is_empty());
    }

    #[test]
    fn soft_edge_frequency_matches_the_kernel() {
        // delta = 3, gamma = 0, d = 1, distance 2: p = 0.125.
        let params = soft(1, 1.0, 0.0, 3.0);
        let verts = VertexSet::from_vertices(
            1,
            &[
                Vertex { position: vec![0.0], mark: 0.7 },
                Vertex { position: vec![2.0], mark: 0.2 },
            ],
        )
        .unwrap();
        let m = 100_000;
        let mut hits = 0;
        for t in 0..m {
            let mut r = stream(77, t, StreamLabel::PairEdges);
            hits += sample_edges(&params, &verts, &mut r, EdgeStrategy::Naive).edges.len();
        }
        let p_hat = hits as f64 / m as f64;
        let sigma = (0.125 * 0.875 / m as f64).sqrt();
        assert!((p_hat - 0.125).abs() < 3.0 * sigma, "p_hat = {p_hat}");
    }

    #[test]
    fn plant_examples() {
        let params = ModelParams::hard(2, 1.0, 0.3, 1.0).unwrap();
        // Planting into an empty graph gives a single isolated root.
        let empty = SampledGraph::assemble(VertexSet::new(2), vec![], 4.0, None, 0);
        let rooted =
            plant_vertex(&params, empty, &[0.0, 0.0], 1.0, &mut rng(3)).unwrap();
        assert_eq!(rooted.vertex_count(), 1);
        assert_eq!(rooted.root_index, Some(0));
        assert!(rooted.edges().is_empty());

        // Same seed, same rooted graph.
        let base = || {
            let verts = sample_vertices(&soft(2, 0.5, 0.3, 3.0), 4.0, &mut rng(9)).unwrap();
            let edges = sample_edges(&soft(2, 0.5, 0.3, 3.0), &verts, &mut rng(10), EdgeStrategy::Naive);
            SampledGraph::assemble(verts, edges.edges, 4.0, None, 9)
        };
        let ra = plant_vertex(&soft(2, 0.5, 0.3, 3.0), base(), &[0.0, 0.0], 0.4, &mut rng(11)).unwrap();
        let rb = plant_vertex(&soft(2, 0.5, 0.3, 3.0), base(), &[0.0, 0.0], 0.4, &mut rng(11)).unwrap();
        assert_eq!(ra.edges(), rb.edges());

        // Out-of-window positions are rejected.
        let g = SampledGraph::assemble(VertexSet::new(2), vec![], 4.0, None, 0);
        assert!(plant_vertex(&params, g, &[5.0, 0.0], 1.0, &mut rng(3)).is_err());
    }

    #[test]
    fn palm_root_sits_at_origin_with_uniform_mark() {
        let params = soft(2, 0.2, 0.3, 3.0);
        let reps = 4000;
        let mut sum = 0.0;
        for t in 0..reps {
            let g = SampledGraph::assemble(VertexSet::new(2), vec![], 2.0, None, t);
            let mut mark_rng = stream(13, t, StreamLabel::RootMark);
            let mut edge_rng = stream(13, t, StreamLabel::RootEdges);
            let rooted = plant_palm_root(&params, g, &mut mark_rng, &mut edge_rng).unwrap();
            let (_, pos, mark) = rooted.root().unwrap();
            assert_eq!(pos, &[0.0, 0.0]);
            assert!(mark > 0.0 && mark <= 1.0);
            sum += mark;
        }
        let mean = sum / reps as f64;
        let sigma = (1.0 / 12.0f64 / reps as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "palm mark mean {mean}");
    }

    #[test]
    fn adjacency_is_normalized_and_symmetric() {
        let params = soft(2, 1.0, 0.3, 2.5);
        let verts = sample_vertices(&params, 5.0, &mut rng(21)).unwrap();
        let sample = sample_edges(&params, &verts, &mut rng(22), EdgeStrategy::Naive);
        let g = SampledGraph::assemble(verts, sample.edges, 5.0, None, 21);
        for &(a, b) in g.edges() {
            assert!(a < b);
            assert!(g.neighbors(a).contains(&b));
            assert!(g.neighbors(b).contains(&a));
        }
    }

    #[test]
    fn dump_round_trips_the_header() {
        let params = ModelParams::hard(2, 1.0, 0.25, 1.0).unwrap();
        let verts = sample_vertices(&params, 3.0, &mut rng(33)).unwrap();
        let n = verts.len();
        let g = SampledGraph::assemble(verts, vec![], 3.0, None, 33);
        let dump = g.dump(&params);
        let header: Vec<&str> = dump.lines().next().unwrap().split(' ').collect();
        assert_eq!(header[0], "girg");
        assert_eq!(header[1], "v1");
        assert_eq!(header[2], "2");
        assert_eq!(header[5], "inf");
        assert_eq!(header[8], n.to_string());
    }

    #[test]
    fn dump_round_trips_the_graph() {
        let params = soft(2, 0.8, 0.3, 2.5);
        let verts = sample_vertices(&params, 4.0, &mut rng(44)).unwrap();
        let edges = sample_edges(&params, &verts, &mut rng(45), EdgeStrategy::Naive);
        let g = SampledGraph::assemble(verts, edges.edges, 4.0, None, 44);
        let (params2, g2) = SampledGraph::from_dump(&g.dump(&params)).unwrap();
        assert_eq!(params2, params);
        assert_eq!(g2.vertex_count(), g.vertex_count());
        assert_eq!(g2.edges(), g.edges());
        assert_eq!(g2.window_radius, g.window_radius);
        assert_eq!(g2.seed, g.seed);
        for i in 0..g.vertex_count() {
            assert_eq!(g2.vertices().position(i), g.vertices().position(i));
            assert_eq!(g2.vertices().mark(i), g.vertices().mark(i));
        }

        assert!(SampledGraph::from_dump("nope").is_err());
    }
}
