//! Geodesic neighborhoods, quadric curvature and per-point topology
//! descriptors.
//!
//! Descriptor channel layout (fixed for a run, recorded in archive metadata):
//! `t1.xyz, t2.xyz, ring_mean[r]…, ring_spread[r]…, mean_curvature,
//! gaussian_curvature`, i.e. `8 + 2·|radii|` channels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{solve_dense, Mat3, Real, Vec3};
use crate::surface::SurfaceMesh;

pub const DEFAULT_RADII: [f64; 2] = [1.0, 2.0];
pub const DEFAULT_GEODESIC_CUTOFF: f64 = 3.0;
/// Ring at radius r collects vertices with geodesic distance in [0.8 r, 1.2 r].
pub const RING_LOW: f64 = 0.8;
pub const RING_HIGH: f64 = 1.2;

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField<T> {
    pub source: usize,
    /// Infinite beyond the cutoff.
    pub distances: Vec<T>,
    pub cutoff: T,
}

/// Edge graph of a mesh plus, for every interior edge, the segment joining
/// the two opposite vertices of its incident triangles.
#[derive(Debug, Clone)]
pub struct GeodesicGraph<T> {
    adjacency: Vec<Vec<(usize, T)>>,
}

#[derive(Copy, Clone, PartialEq)]
struct Frontier<T>(T, usize);

impl<T: PartialOrd> Eq for Frontier<T> {}

impl<T: PartialOrd> PartialOrd for Frontier<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: PartialOrd> Ord for Frontier<T> {
    // min-heap on distance, then on vertex index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl<T: Real> GeodesicGraph<T> {
    pub fn new(mesh: &SurfaceMesh<T>) -> Self {
        let n = mesh.vertices.len();
        let mut opposite: std::collections::HashMap<(usize, usize), Vec<usize>> = Default::default();
        for &[a, b, c] in &mesh.triangles {
            for (u, v, w) in [(a, b, c), (b, c, a), (c, a, b)] {
                opposite.entry((u.min(v), u.max(v))).or_default().push(w);
            }
        }
        let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(opposite.len() * 2);
        for (&(u, v), opp) in &opposite {
            pairs.push((u, v));
            if opp.len() == 2 && opp[0] != opp[1] {
                pairs.push((opp[0].min(opp[1]), opp[0].max(opp[1])));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in pairs {
            let d = mesh.vertices[u].dist(&mesh.vertices[v]);
            adjacency[u].push((v, d));
            adjacency[v].push((u, d));
        }
        GeodesicGraph { adjacency }
    }

    /// Dijkstra from `source`, not expanding past `cutoff`.
    pub fn distances_from(&self, source: usize, cutoff: T) -> GeodesicField<T> {
        let n = self.adjacency.len();
        let mut dist = vec![T::infinity(); n];
        let mut heap = BinaryHeap::new();
        dist[source] = T::zero();
        heap.push(Frontier(T::zero(), source));
        while let Some(Frontier(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd <= cutoff && nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Frontier(nd, v));
                }
            }
        }
        GeodesicField {
            source,
            distances: dist,
            cutoff,
        }
    }
}

/// Approximate geodesic distances from `source` (see [`GeodesicGraph`]).
pub fn geodesic_distances<T: Real>(mesh: &SurfaceMesh<T>, source: usize, cutoff: T) -> Result<GeodesicField<T>> {
    if source >= mesh.vertices.len() {
        return Err(Error::invalid(format!("source vertex {source} out of range")));
    }
    Ok(GeodesicGraph::new(mesh).distances_from(source, cutoff))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature<T> {
    /// Positive on convex regions when normals point outward.
    pub mean: T,
    pub gaussian: T,
    /// Principal direction of the larger-magnitude curvature (unit, tangent).
    pub direction: Vec3<T>,
    /// Curvature along `direction`.
    pub principal: T,
}

/// Vertices within two edge hops of `v`, excluding `v`.
fn two_ring(neighbors: &[Vec<usize>], v: usize) -> Vec<usize> {
    let mut out: Vec<usize> = neighbors[v].clone();
    for &u in &neighbors[v] {
        out.extend_from_slice(&neighbors[u]);
    }
    out.sort_unstable();
    out.dedup();
    out.retain(|&u| u != v);
    out
}

/// Least-squares fit of `h = a x² + b xy + c y²` over the 2-ring in the
/// tangent frame of `vertex`, with `h` measured along the vertex normal.
pub fn estimate_curvature<T: Real>(mesh: &SurfaceMesh<T>, vertex: usize) -> Result<Curvature<T>> {
    let neighbors = mesh.vertex_neighbors();
    curvature_with(mesh, &neighbors, vertex)
}

fn curvature_with<T: Real>(mesh: &SurfaceMesh<T>, neighbors: &[Vec<usize>], vertex: usize) -> Result<Curvature<T>> {
    let ring = two_ring(neighbors, vertex);
    if ring.len() < 5 {
        return Err(Error::invalid(format!("vertex {vertex} has only {} 2-ring neighbors", ring.len())));
    }
    let p = mesh.vertices[vertex];
    let n = mesh.vertex_normals[vertex];
    // Tangent frame tied to the mesh, not to world axes, so the fit itself
    // rotates with the surface.
    let e1 = ring
        .iter()
        .find_map(|&u| {
            let d = mesh.vertices[u] - p;
            (d - n * d.dot(&n)).normalized()
        })
        .unwrap_or_else(|| n.any_orthogonal());
    let e2 = n.cross(&e1);
    let mut ata = vec![vec![T::zero(); 3]; 3];
    let mut atb = vec![T::zero(); 3];
    for &u in &ring {
        let d = mesh.vertices[u] - p;
        let (x, y, h) = (d.dot(&e1), d.dot(&e2), d.dot(&n));
        let row = [x * x, x * y, y * y];
        for r in 0..3 {
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
            atb[r] += row[r] * h;
        }
    }
    let coef = solve_dense(&ata, &atb, T::lit(1e-10))
        .ok_or_else(|| Error::invalid(format!("rank-deficient quadric fit at vertex {vertex}")))?;
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    // Shape operator with convex-positive sign: the surface bends away from
    // the outward normal on a convex patch.
    let two = T::lit(2.0);
    let s = [[-two * a, -b], [-b, -two * c]];
    let tr = s[0][0] + s[1][1];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let disc = ((s[0][0] - s[1][1]) * (s[0][0] - s[1][1]) / T::lit(4.0) + s[0][1] * s[0][1]).sqrt();
    let half = tr / two;
    let (k1, k2) = (half + disc, half - disc);
    let principal = if k1.abs() >= k2.abs() { k1 } else { k2 };
    // eigenvector of the 2x2 shape operator for `principal`
    let (ux, uy) = if s[0][1].abs() > T::epsilon() * (s[0][0].abs() + s[1][1].abs() + T::one()) {
        (principal - s[1][1], s[0][1])
    } else if (s[0][0] - principal).abs() <= (s[1][1] - principal).abs() {
        (T::one(), T::zero())
    } else {
        (T::zero(), T::one())
    };
    let mut dir = (e1 * ux + e2 * uy).normalized().unwrap_or(e1);
    // Orient by the third moment of the 2-ring along the direction so the
    // sign follows the geometry rather than the frame construction.
    let m3: T = ring
        .iter()
        .map(|&u| {
            let t = (mesh.vertices[u] - p).dot(&dir);
            t * t * t
        })
        .sum();
    if m3 < T::zero() {
        dir = -dir;
    }
    Ok(Curvature {
        mean: tr / two,
        gaussian: det,
        direction: dir,
        principal,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoDescriptor<T> {
    /// Unit outward normal.
    pub t1: Vec3<T>,
    /// Principal direction scaled by its curvature.
    pub t2: Vec3<T>,
    /// Mean signed height of each geodesic ring over the tangent plane;
    /// negative on hills, positive in valleys.
    pub ring_height_mean: Vec<T>,
    pub ring_height_spread: Vec<T>,
    pub mean_curvature: T,
    pub gaussian_curvature: T,
    /// At least one ring had no vertices.
    pub empty_ring: bool,
    /// The quadric fit failed and curvature channels are zero.
    pub curvature_failed: bool,
}

impl<T: Real> TopoDescriptor<T> {
    pub fn channel_count(n_radii: usize) -> usize {
        8 + 2 * n_radii
    }

    pub fn channels(&self) -> Vec<T> {
        let mut c = Vec::with_capacity(Self::channel_count(self.ring_height_mean.len()));
        c.extend_from_slice(&self.t1.0);
        c.extend_from_slice(&self.t2.0);
        c.extend_from_slice(&self.ring_height_mean);
        c.extend_from_slice(&self.ring_height_spread);
        c.push(self.mean_curvature);
        c.push(self.gaussian_curvature);
        c
    }
}

/// Names of the descriptor channels for the given radii.
pub fn channel_layout(radii: &[f64]) -> Vec<String> {
    let mut names: Vec<String> = ["t1.x", "t1.y", "t1.z", "t2.x", "t2.y", "t2.z"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend(radii.iter().map(|r| format!("ring_mean@{r}")));
    names.extend(radii.iter().map(|r| format!("ring_spread@{r}")));
    names.push("mean_curvature".into());
    names.push("gaussian_curvature".into());
    names
}

/// Shared, read-only state for computing descriptors on one mesh.
pub struct TopologyContext<'a, T> {
    mesh: &'a SurfaceMesh<T>,
    graph: GeodesicGraph<T>,
    neighbors: Vec<Vec<usize>>,
    radii: Vec<T>,
    cutoff: T,
}

impl<'a, T: Real> TopologyContext<'a, T> {
    pub fn new(mesh: &'a SurfaceMesh<T>, radii: &[T], cutoff: T) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::invalid("at least one ring radius is required"));
        }
        if radii.windows(2).any(|w| !(w[0] < w[1])) || radii[0] <= T::zero() {
            return Err(Error::invalid("ring radii must be positive and strictly ascending"));
        }
        if radii[radii.len() - 1] > cutoff {
            return Err(Error::invalid("ring radii must not exceed the geodesic cutoff"));
        }
        Ok(TopologyContext {
            mesh,
            graph: GeodesicGraph::new(mesh),
            neighbors: mesh.vertex_neighbors(),
            radii: radii.to_vec(),
            cutoff,
        })
    }

    pub fn descriptor(&self, vertex: usize) -> TopoDescriptor<T> {
        let mesh = self.mesh;
        let p = mesh.vertices[vertex];
        let t1 = mesh.vertex_normals[vertex];
        let reach = (self.radii[self.radii.len() - 1] * T::lit(RING_HIGH)).min(self.cutoff);
        let field = self.graph.distances_from(vertex, reach);
        let mut means = Vec::with_capacity(self.radii.len());
        let mut spreads = Vec::with_capacity(self.radii.len());
        let mut empty_ring = false;
        for &r in &self.radii {
            let (lo, hi) = (r * T::lit(RING_LOW), r * T::lit(RING_HIGH));
            let heights: Vec<T> = field
                .distances
                .iter()
                .enumerate()
                .filter(|(_, &d)| d >= lo && d <= hi)
                .map(|(u, _)| (mesh.vertices[u] - p).dot(&t1))
                .collect();
            if heights.is_empty() {
                empty_ring = true;
                means.push(T::zero());
                spreads.push(T::zero());
                continue;
            }
            let n = T::from_usize_lossy(heights.len());
            let mean = heights.iter().copied().sum::<T>() / n;
            let var = heights.iter().map(|h| (*h - mean) * (*h - mean)).sum::<T>() / n;
            means.push(mean);
            spreads.push(var.sqrt());
        }
        let (t2, mean_curvature, gaussian_curvature, curvature_failed) =
            match curvature_with(mesh, &self.neighbors, vertex) {
                Ok(c) => (c.direction * c.principal, c.mean, c.gaussian, false),
                Err(_) => (Vec3::zero(), T::zero(), T::zero(), true),
            };
        TopoDescriptor {
            t1,
            t2,
            ring_height_mean: means,
            ring_height_spread: spreads,
            mean_curvature,
            gaussian_curvature,
            empty_ring,
            curvature_failed,
        }
    }

    /// Descriptors for many vertices, computed in parallel, in input order.
    pub fn descriptors(&self, vertices: &[usize]) -> Vec<TopoDescriptor<T>> {
        vertices.par_iter().map(|&v| self.descriptor(v)).collect()
    }
}

/// Descriptor of a single vertex. Prefer [`TopologyContext`] for many points.
pub fn topology_vectors<T: Real>(mesh: &SurfaceMesh<T>, point_vertex: usize, radii: &[T]) -> Result<TopoDescriptor<T>> {
    if point_vertex >= mesh.vertices.len() {
        return Err(Error::invalid(format!("vertex {point_vertex} out of range")));
    }
    let cutoff = T::lit(DEFAULT_GEODESIC_CUTOFF).max(radii.last().copied().unwrap_or(T::zero()) * T::lit(RING_HIGH));
    Ok(TopologyContext::new(mesh, radii, cutoff)?.descriptor(point_vertex))
}

/// Rotates the vector channels of a descriptor.
pub fn rotate_descriptor<T: Real>(d: &TopoDescriptor<T>, r: &Mat3<T>) -> TopoDescriptor<T> {
    TopoDescriptor {
        t1: r.mul_vec(&d.t1),
        t2: r.mul_vec(&d.t2),
        ..d.clone()
    }
}

/// Summary flags raised while describing a point set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyFlags {
    pub empty_rings: usize,
    pub curvature_failures: usize,
}

impl TopologyFlags {
    pub fn tally<T>(descs: &[TopoDescriptor<T>]) -> Self {
        TopologyFlags {
            empty_rings: descs.iter().filter(|d| d.empty_ring).count(),
            curvature_failures: descs.iter().filter(|d| d.curvature_failed).count(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Regular grid patch of `n x n` vertices with spacing `h`, heights from `f`.
    pub(crate) fn height_patch(n: usize, h: f64, f: impl Fn(f64, f64) -> f64) -> SurfaceMesh<f64> {
        let mut v = Vec::new();
        let off = (n as f64 - 1.0) * h / 2.0;
        for j in 0..n {
            for i in 0..n {
                let (x, y) = (i as f64 * h - off, j as f64 * h - off);
                v.push(Vec3::new(x, y, f(x, y)));
            }
        }
        let mut t = Vec::new();
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let a = j * n + i;
                t.push([a, a + 1, a + n + 1]);
                t.push([a, a + n + 1, a + n]);
            }
        }
        let mut m = SurfaceMesh::from_triangles(v, t).unwrap();
        // analytic upward normals
        let eps = 1e-6;
        m.vertex_normals = m
            .vertices
            .iter()
            .map(|p| {
                let fx = (f(p.x() + eps, p.y()) - f(p.x() - eps, p.y())) / (2.0 * eps);
                let fy = (f(p.x(), p.y() + eps) - f(p.x(), p.y() - eps)) / (2.0 * eps);
                Vec3::new(-fx, -fy, 1.0).normalized().unwrap()
            })
            .collect();
        m
    }

    #[test]
    fn source_distance_zero_and_strip_exact() {
        let m = height_patch(6, 0.5, |_, _| 0.0);
        let f = geodesic_distances(&m, 0, f64::INFINITY).unwrap();
        assert_eq!(f.distances[0], 0.0);
        // straight row of edges along x
        assert!((f.distances[5] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn cutoff_marks_far_vertices_infinite() {
        let m = height_patch(6, 0.5, |_, _| 0.0);
        let f = geodesic_distances(&m, 0, 1.0).unwrap();
        assert!(f.distances[5].is_infinite());
        assert!(f.distances[1].is_finite());
    }

    #[test]
    fn plane_curvature_is_zero() {
        let m = height_patch(7, 0.3, |_, _| 0.0);
        let c = estimate_curvature(&m, 24).unwrap();
        assert!(c.mean.abs() < 1e-6 && c.gaussian.abs() < 1e-6);
    }

    #[test]
    fn saddle_has_negative_gaussian() {
        let m = height_patch(9, 0.1, |x, y| x * x - y * y);
        let c = estimate_curvature(&m, 40).unwrap();
        assert!(c.gaussian < 0.0, "K = {}", c.gaussian);
        assert!(c.mean.abs() < 1e-6);
    }

    #[test]
    fn cap_curvature_matches_sphere() {
        let r = 2.0;
        let m = height_patch(9, 0.1, |x, y| (r * r - x * x - y * y).sqrt() - r);
        let c = estimate_curvature(&m, 40).unwrap();
        assert!((c.mean - 1.0 / r).abs() < 0.05 / r, "H = {}", c.mean);
        assert!((c.gaussian - 1.0 / (r * r)).abs() < 0.1 / (r * r), "K = {}", c.gaussian);
    }

    #[test]
    fn collinear_neighbourhood_fails() {
        let m = SurfaceMesh::from_triangles(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(estimate_curvature(&m, 0).is_err());
    }

    #[test]
    fn plane_rings_are_flat() {
        let m = height_patch(31, 0.1, |_, _| 0.0);
        let d = topology_vectors(&m, 15 * 31 + 15, &[0.5, 1.0]).unwrap();
        assert!(d.ring_height_mean.iter().all(|h| h.abs() < 1e-12));
        assert!(!d.empty_ring);
        assert_eq!(d.channels().len(), TopoDescriptor::<f64>::channel_count(2));
    }

    #[test]
    fn hill_below_and_bowl_above() {
        let r = 3.0;
        let hill = height_patch(31, 0.1, |x, y| (r * r - x * x - y * y).sqrt() - r);
        let centre = 15 * 31 + 15;
        let d = topology_vectors(&hill, centre, &[0.5, 1.0]).unwrap();
        assert!(d.ring_height_mean.iter().all(|h| *h < 0.0));
        let bowl = height_patch(31, 0.1, |x, y| r - (r * r - x * x - y * y).sqrt());
        let d = topology_vectors(&bowl, centre, &[0.5, 1.0]).unwrap();
        assert!(d.ring_height_mean.iter().all(|h| *h > 0.0));
    }

    #[test]
    fn empty_ring_flagged() {
        let m = height_patch(5, 0.1, |_, _| 0.0);
        let d = topology_vectors(&m, 12, &[1.0, 2.0]).unwrap();
        assert!(d.empty_ring);
        assert_eq!(d.ring_height_mean, vec![0.0, 0.0]);
    }

    #[test]
    fn radii_validation() {
        let m = height_patch(5, 0.1, |_, _| 0.0);
        assert!(TopologyContext::new(&m, &[2.0, 1.0], 3.0).is_err());
        assert!(TopologyContext::new(&m, &[1.0, 4.0], 3.0).is_err());
        assert!(TopologyContext::<f64>::new(&m, &[], 3.0).is_err());
    }

    #[test]
    fn layout_has_twelve_channels_at_defaults() {
        assert_eq!(channel_layout(&DEFAULT_RADII).len(), 12);
        assert_eq!(TopoDescriptor::<f64>::channel_count(2), 12);
    }
}
