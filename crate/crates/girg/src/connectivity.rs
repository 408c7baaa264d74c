//! Crossing and escape events on a sampled graph.
//!
//! A crossing event asks for a path of at most `k` edges from a source set
//! (every vertex strictly inside `B(0, r)`, or the planted root) to a vertex
//! at distance at least `R` from the origin. Any walk contains a path with no
//! more edges, so plain depth-capped reachability decides the event. The
//! source ball is open and the target region `B(0,R)^c` is closed, fixing the
//! measure-zero sphere cases deterministically.

use crate::error::{Error, Result};
use crate::sampler::SampledGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventSource {
    /// Every vertex with |x| < r, regardless of mark.
    Ball { r: f64 },
    /// The planted root vertex.
    Root,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeBudget {
    Limited(u32),
    Unbounded,
}

impl EdgeBudget {
    pub fn at_least(&self, k: u32) -> bool {
        match self {
            EdgeBudget::Limited(b) => *b >= k,
            EdgeBudget::Unbounded => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventSpec {
    pub source: EventSource,
    pub outer_radius: f64,
    pub edge_budget: EdgeBudget,
}

impl EventSpec {
    pub fn ball(r: f64, outer_radius: f64, edge_budget: EdgeBudget) -> Result<Self> {
        let spec = EventSpec { source: EventSource::Ball { r }, outer_radius, edge_budget };
        spec.validate()?;
        Ok(spec)
    }

    pub fn root(outer_radius: f64, edge_budget: EdgeBudget) -> Result<Self> {
        let spec = EventSpec { source: EventSource::Root, outer_radius, edge_budget };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.outer_radius > 0.0) || !self.outer_radius.is_finite() {
            return Err(Error::InvalidSpec("outer radius must be positive".into()));
        }
        if let EventSource::Ball { r } = self.source {
            if !(r > 0.0) {
                return Err(Error::InvalidSpec("inner radius must be positive".into()));
            }
            if r > self.outer_radius / 2.0 {
                return Err(Error::InvalidSpec(
                    "annulus events require R >= 2r".into(),
                ));
            }
        }
        if let EdgeBudget::Limited(0) = self.edge_budget {
            return Err(Error::InvalidSpec("edge budget must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_root(&self) -> bool {
        matches!(self.source, EventSource::Root)
    }
}

fn source_indices(graph: &SampledGraph, spec: &EventSpec) -> Result<Vec<u32>> {
    match spec.source {
        EventSource::Ball { r } => Ok((0..graph.vertex_count())
            .filter(|&i| graph.radial_distance(i) < r)
            .map(|i| i as u32)
            .collect()),
        EventSource::Root => {
            let root = graph.root_index.ok_or(Error::MissingRoot)?;
            Ok(vec![root])
        }
    }
}

/// True iff a path within the edge budget joins the source set to
/// `B(0, R)^c`. Breadth-first search with a depth cap; unbounded queries go
/// through union-find.
pub fn crosses(graph: &SampledGraph, spec: &EventSpec) -> Result<bool> {
    match spec.edge_budget {
        EdgeBudget::Unbounded => crosses_union_find(graph, spec),
        EdgeBudget::Limited(_) => crosses_bfs(graph, spec),
    }
}

/// Depth-capped multi-source BFS; handles unbounded budgets too, serving as
/// the independent route for union-find answers.
pub fn crosses_bfs(graph: &SampledGraph, spec: &EventSpec) -> Result<bool> {
    spec.validate()?;
    if spec.outer_radius > graph.window_radius {
        return Err(Error::InvalidSpec(
            "outer radius exceeds the sampled window; the event would be undercounted".into(),
        ));
    }
    let sources = source_indices(graph, spec)?;
    if sources.is_empty() {
        return Ok(false);
    }
    let n = graph.vertex_count();
    let cap = match spec.edge_budget {
        EdgeBudget::Limited(k) => k,
        EdgeBudget::Unbounded => u32::MAX,
    };
    let big_r = spec.outer_radius;
    let is_target = |i: u32| graph.radial_distance(i as usize) >= big_r;

    let mut visited = vec![false; n];
    let mut frontier = Vec::with_capacity(sources.len());
    for s in sources {
        if !visited[s as usize] {
            visited[s as usize] = true;
            frontier.push(s);
        }
    }
    let mut next = Vec::new();
    let mut depth = 0u32;
    while !frontier.is_empty() && depth < cap {
        depth += 1;
        next.clear();
        for &v in &frontier {
            for &w in graph.neighbors(v) {
                if !visited[w as usize] {
                    visited[w as usize] = true;
                    if is_target(w) {
                        return Ok(true);
                    }
                    next.push(w);
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
    }
    Ok(false)
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    fn find(&mut self, x: u32) -> u32 {
        let mut x = x;
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Union-find route for unbounded budgets.
pub fn crosses_union_find(graph: &SampledGraph, spec: &EventSpec) -> Result<bool> {
    spec.validate()?;
    if spec.outer_radius > graph.window_radius {
        return Err(Error::InvalidSpec(
            "outer radius exceeds the sampled window; the event would be undercounted".into(),
        ));
    }
    let sources = source_indices(graph, spec)?;
    if sources.is_empty() {
        return Ok(false);
    }
    let n = graph.vertex_count();
    let mut uf = UnionFind::new(n);
    for &(a, b) in graph.edges() {
        uf.union(a, b);
    }
    let mut source_root = vec![false; n];
    for s in sources {
        source_root[uf.find(s) as usize] = true;
    }
    let big_r = spec.outer_radius;
    for i in 0..n as u32 {
        if graph.radial_distance(i as usize) >= big_r && source_root[uf.find(i) as usize] {
            return Ok(true);
        }
    }
    Ok(false)
}

/// True iff a path of at most `edge_budget` edges leads from the planted root
/// to a vertex outside `B(0, R)`.
pub fn escapes(graph: &SampledGraph, outer_radius: f64, edge_budget: EdgeBudget) -> Result<bool> {
    crosses(graph, &EventSpec::root(outer_radius, edge_budget)?)
}

/// Whether the root's component reaches outside `B(0, R)`; the unbounded
/// escape, provided for one-arm experiments.
pub fn component_radius_exceeds(graph: &SampledGraph, outer_radius: f64) -> Result<bool> {
    escapes(graph, outer_radius, EdgeBudget::Unbounded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::rng::{stream, StreamLabel};
    use crate::sampler::{
        plant_vertex, sample_edges, sample_vertices, EdgeStrategy, SampledGraph, Vertex,
        VertexSet,
    };

    fn graph_1d(points: &[(f64, f64)], edges: &[(u32, u32)], w: f64) -> SampledGraph {
        let verts: Vec<Vertex> = points
            .iter()
            .map(|&(x, mark)| Vertex { position: vec![x], mark })
            .collect();
        SampledGraph::assemble(
            VertexSet::from_vertices(1, &verts).unwrap(),
            edges.to_vec(),
            w,
            None,
            0,
        )
    }

    #[test]
    fn three_vertex_path_fixture() {
        // s at |s| = 1, m at 3, t at 9, edges s-m and m-t.
        let g = graph_1d(&[(1.0, 1.0), (3.0, 1.0), (9.0, 1.0)], &[(0, 1), (1, 2)], 16.0);
        let two = EventSpec::ball(2.0, 8.0, EdgeBudget::Limited(2)).unwrap();
        let one = EventSpec::ball(2.0, 8.0, EdgeBudget::Limited(1)).unwrap();
        assert!(crosses(&g, &two).unwrap());
        assert!(!crosses(&g, &one).unwrap());
    }

    #[test]
    fn empty_graph_never_crosses() {
        let g = graph_1d(&[], &[], 16.0);
        for k in [EdgeBudget::Limited(1), EdgeBudget::Unbounded] {
            let spec = EventSpec::ball(2.0, 8.0, k).unwrap();
            assert!(!crosses(&g, &spec).unwrap());
        }
    }

    #[test]
    fn single_edge_crossing_holds_for_every_budget() {
        let g = graph_1d(&[(0.5, 1.0), (9.0, 1.0)], &[(0, 1)], 16.0);
        for k in [1, 2, 7] {
            let spec = EventSpec::ball(2.0, 8.0, EdgeBudget::Limited(k)).unwrap();
            assert!(crosses(&g, &spec).unwrap());
        }
        let spec = EventSpec::ball(2.0, 8.0, EdgeBudget::Unbounded).unwrap();
        assert!(crosses(&g, &spec).unwrap());
    }

    fn rooted_chain(positions: &[f64], w: f64) -> SampledGraph {
        // Root at the origin followed by a chain through the listed points.
        let mut verts = vec![Vertex { position: vec![0.0], mark: 0.5 }];
        verts.extend(positions.iter().map(|&x| Vertex { position: vec![x], mark: 0.5 }));
        let edges: Vec<(u32, u32)> = (0..positions.len() as u32).map(|i| (i, i + 1)).collect();
        let mut g = SampledGraph::assemble(
            VertexSet::from_vertices(1, &verts).unwrap(),
            edges,
            w,
            Some(0),
            0,
        );
        g.root_index = Some(0);
        g
    }

    #[test]
    fn escape_fixtures() {
        // Single neighbour beyond R escapes at k = 1.
        let g = rooted_chain(&[5.0], 16.0);
        assert!(escapes(&g, 4.0, EdgeBudget::Limited(1)).unwrap());

        // Isolated root never escapes.
        let g = rooted_chain(&[], 16.0);
        for k in [EdgeBudget::Limited(1), EdgeBudget::Limited(5), EdgeBudget::Unbounded] {
            assert!(!escapes(&g, 4.0, k).unwrap());
        }

        // root - a - b with |a| < R < |b|: needs two edges.
        let g = rooted_chain(&[2.0, 6.0], 16.0);
        assert!(!escapes(&g, 4.0, EdgeBudget::Limited(1)).unwrap());
        assert!(escapes(&g, 4.0, EdgeBudget::Limited(2)).unwrap());
        assert!(component_radius_exceeds(&g, 4.0).unwrap());
    }

    #[test]
    fn missing_root_is_an_error() {
        let g = graph_1d(&[(1.0, 1.0)], &[], 16.0);
        assert!(matches!(
            escapes(&g, 4.0, EdgeBudget::Limited(1)),
            Err(Error::MissingRoot)
        ));
    }

    #[test]
    fn oversized_outer_radius_is_rejected() {
        let g = graph_1d(&[(1.0, 1.0)], &[], 4.0);
        let spec = EventSpec::ball(2.0, 8.0, EdgeBudget::Limited(1)).unwrap();
        assert!(matches!(crosses(&g, &spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(EventSpec::ball(5.0, 8.0, EdgeBudget::Limited(1)).is_err());
        assert!(EventSpec::ball(0.0, 8.0, EdgeBudget::Limited(1)).is_err());
        assert!(EventSpec::ball(2.0, 8.0, EdgeBudget::Limited(0)).is_err());
        assert!(EventSpec::root(-1.0, EdgeBudget::Limited(1)).is_err());
    }

    #[test]
    fn sphere_boundary_conventions() {
        // A vertex exactly on |x| = r is outside the open source ball; a
        // vertex exactly on |x| = R is a target.
        let g = graph_1d(&[(2.0, 1.0), (8.0, 1.0)], &[(0, 1)], 16.0);
        let spec = EventSpec::ball(2.0, 8.0, EdgeBudget::Limited(1)).unwrap();
        assert!(!crosses(&g, &spec).unwrap(), "|x| = r must not be a source");

        let g = graph_1d(&[(1.0, 1.0), (8.0, 1.0)], &[(0, 1)], 16.0);
        assert!(crosses(&g, &spec).unwrap(), "|x| = R must be a target");
    }

    fn random_graph(seed: u64) -> SampledGraph {
        let params = ModelParams::soft(2, 0.6, 0.35, 2.6).unwrap();
        let verts =
            sample_vertices(&params, 12.0, &mut stream(seed, 0, StreamLabel::Vertices)).unwrap();
        let edges = sample_edges(
            &params,
            &verts,
            &mut stream(seed, 0, StreamLabel::PairEdges),
            EdgeStrategy::Naive,
        );
        SampledGraph::assemble(verts, edges.edges, 12.0, None, seed)
    }

    #[test]
    fn budget_chain_is_monotone_pathwise() {
        for seed in 0..40 {
            let g = random_graph(seed);
            let mut prev = false;
            for budget in [
                EdgeBudget::Limited(1),
                EdgeBudget::Limited(2),
                EdgeBudget::Limited(3),
                EdgeBudget::Unbounded,
            ] {
                let spec = EventSpec::ball(3.0, 9.0, budget).unwrap();
                let now = crosses(&g, &spec).unwrap();
                assert!(!prev || now, "budget monotonicity violated (seed {seed})");
                prev = now;
            }
        }
    }

    #[test]
    fn radius_monotonicity_pathwise() {
        for seed in 0..40 {
            let g = random_graph(seed);
            let k = EdgeBudget::Limited(2);
            // Larger source ball can only help.
            let small = crosses(&g, &EventSpec::ball(2.0, 10.0, k).unwrap()).unwrap();
            let large = crosses(&g, &EventSpec::ball(4.0, 10.0, k).unwrap()).unwrap();
            assert!(!small || large, "inner-radius monotonicity (seed {seed})");
            // Larger outer radius can only hurt.
            let far = crosses(&g, &EventSpec::ball(3.0, 12.0, k).unwrap()).unwrap();
            let near = crosses(&g, &EventSpec::ball(3.0, 8.0, k).unwrap()).unwrap();
            assert!(!far || near, "outer-radius anti-monotonicity (seed {seed})");
        }
    }

    #[test]
    fn bfs_and_union_find_agree_on_unbounded_queries() {
        for seed in 0..60 {
            let g = random_graph(seed);
            let spec = EventSpec::ball(3.0, 9.0, EdgeBudget::Unbounded).unwrap();
            assert_eq!(
                crosses_bfs(&g, &spec).unwrap(),
                crosses_union_find(&g, &spec).unwrap(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn lowering_the_root_mark_only_adds_edges() {
        // Reusing the same edge uniforms at a lower mark keeps every edge and
        // may add more, so escape events are monotone under the coupling.
        let params = ModelParams::hard(1, 0.5, 1.0 / 3.0, 1.0).unwrap();
        for seed in 0..30 {
            let verts =
                sample_vertices(&params, 16.0, &mut stream(seed, 0, StreamLabel::Vertices))
                    .unwrap();
            let base = || SampledGraph::assemble(verts.clone(), vec![], 16.0, None, seed);
            let hi = plant_vertex(
                &params,
                base(),
                &[0.0],
                0.9,
                &mut stream(seed, 0, StreamLabel::RootEdges),
            )
            .unwrap();
            let lo = plant_vertex(
                &params,
                base(),
                &[0.0],
                0.1,
                &mut stream(seed, 0, StreamLabel::RootEdges),
            )
            .unwrap();
            let hi_edges: std::collections::BTreeSet<_> = hi.edges().iter().collect();
            let lo_edges: std::collections::BTreeSet<_> = lo.edges().iter().collect();
            assert!(hi_edges.is_subset(&lo_edges), "coupling must be monotone");
            for r in [2.0, 4.0, 8.0] {
                let e_hi = escapes(&hi, r, EdgeBudget::Limited(1)).unwrap();
                let e_lo = escapes(&lo, r, EdgeBudget::Limited(1)).unwrap();
                assert!(!e_hi || e_lo, "escape monotone in the root mark");
            }
        }
    }
}
