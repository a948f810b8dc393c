//! Isosurface extraction, vertex annotation, per-molecule normalization and
//! fixed-size surface sampling.

mod marching;
mod ply;
mod sampling;
mod tables;

pub use marching::{marching_cubes, DEGENERATE_AREA};
pub use ply::{export_ply, parse_ply};
pub use sampling::{farthest_point_sample, SampledSurface};

use crate::error::{Error, Result};
use crate::fieldgen::{trilinear_sample, ScalarGrid};
use crate::numeric::{Real, Vec3};

/// Isovalue as a fraction of the density maximum.
pub const DEFAULT_ISOVALUE_FACTOR: f64 = 0.04;
pub const DEFAULT_POINT_COUNT: usize = 1024;
pub const LIGHT_POINT_COUNT: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub triangles: Vec<[usize; 3]>,
    pub vertex_scalars: Vec<T>,
    pub vertex_normals: Vec<Vec3<T>>,
}

impl<T: Real> SurfaceMesh<T> {
    /// Mesh with zero scalars and area-weighted normals.
    pub fn from_triangles(vertices: Vec<Vec3<T>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&v| v >= vertices.len())) {
            return Err(Error::invalid(format!("triangle {t:?} references a missing vertex")));
        }
        let mut mesh = SurfaceMesh {
            vertex_scalars: vec![T::zero(); vertices.len()],
            vertex_normals: Vec::new(),
            vertices,
            triangles,
        };
        mesh.vertex_normals = mesh.area_weighted_vertex_normals();
        Ok(mesh)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_area(&self, t: &[usize; 3]) -> T {
        let [a, b, c] = *t;
        (self.vertices[b] - self.vertices[a])
            .cross(&(self.vertices[c] - self.vertices[a]))
            .norm()
            * T::lit(0.5)
    }

    pub fn area(&self) -> T {
        self.triangles.iter().map(|t| self.triangle_area(t)).sum()
    }

    pub fn centroid(&self) -> Vec3<T> {
        let mut c = Vec3::zero();
        for v in &self.vertices {
            c += *v;
        }
        c / T::from_usize_lossy(self.vertices.len().max(1))
    }

    /// One third of the area of every incident triangle.
    pub fn vertex_areas(&self) -> Vec<T> {
        let mut a = vec![T::zero(); self.vertices.len()];
        let third = T::one() / T::lit(3.0);
        for t in &self.triangles {
            let share = self.triangle_area(t) * third;
            for &v in t {
                a[v] += share;
            }
        }
        a
    }

    /// Unit normals from the area-weighted sum of incident face normals.
    pub fn area_weighted_vertex_normals(&self) -> Vec<Vec3<T>> {
        let mut acc = vec![Vec3::zero(); self.vertices.len()];
        for &[a, b, c] in &self.triangles {
            let n = (self.vertices[b] - self.vertices[a]).cross(&(self.vertices[c] - self.vertices[a]));
            acc[a] += n;
            acc[b] += n;
            acc[c] += n;
        }
        acc.into_iter()
            .map(|n| n.normalized().unwrap_or(Vec3::new(T::zero(), T::zero(), T::one())))
            .collect()
    }

    /// Sorted, deduplicated undirected edges.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(u, v)| if u < v { (u, v) } else { (v, u) })
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// One-ring neighbor lists, sorted.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (u, v) in self.edges() {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Vertex sets of the edge-connected components, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c)] {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru != rv {
                    parent[ru.max(rv)] = ru.min(rv);
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for v in 0..n {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v);
        }
        groups.into_values().collect()
    }

    /// V − E + F for each component, in the order of [`Self::components`].
    pub fn euler_characteristics(&self) -> Vec<i64> {
        let comps = self.components();
        let mut label = vec![0usize; self.vertices.len()];
        for (ci, c) in comps.iter().enumerate() {
            for &v in c {
                label[v] = ci;
            }
        }
        let mut chi: Vec<i64> = comps.iter().map(|c| c.len() as i64).collect();
        for (u, _) in self.edges() {
            chi[label[u]] -= 1;
        }
        for t in &self.triangles {
            chi[label[t[0]]] += 1;
        }
        chi
    }

    /// True when every edge is shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        let mut count: std::collections::HashMap<(usize, usize), u32> = Default::default();
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                *count.entry((u.min(v), u.max(v))).or_default() += 1;
            }
        }
        count.values().all(|&c| c == 2)
    }

    /// Rigidly moves the mesh (normals are rotated, scalars untouched).
    pub fn transformed(&self, rotation: &crate::numeric::Mat3<T>, translation: Vec3<T>) -> Self {
        SurfaceMesh {
            vertices: self.vertices.iter().map(|v| rotation.mul_vec(v) + translation).collect(),
            triangles: self.triangles.clone(),
            vertex_scalars: self.vertex_scalars.clone(),
            vertex_normals: self.vertex_normals.iter().map(|n| rotation.mul_vec(n)).collect(),
        }
    }
}

/// Samples `property_grid` at every vertex.
pub fn annotate_scalars<T: Real>(mesh: &SurfaceMesh<T>, property_grid: &ScalarGrid<T>) -> Result<SurfaceMesh<T>> {
    let scalars = mesh
        .vertices
        .iter()
        .map(|v| trilinear_sample(property_grid, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfaceMesh {
        vertex_scalars: scalars,
        ..mesh.clone()
    })
}

/// Anything carrying one scalar per point.
pub trait ScalarCarrier {
    type Scalar: Real;
    fn scalars_mut(&mut self) -> &mut [Self::Scalar];
}

impl<T: Real> ScalarCarrier for SurfaceMesh<T> {
    type Scalar = T;
    fn scalars_mut(&mut self) -> &mut [T] {
        &mut self.vertex_scalars
    }
}

impl<T: Real> ScalarCarrier for SampledSurface<T> {
    type Scalar = T;
    fn scalars_mut(&mut self) -> &mut [T] {
        &mut self.scalars
    }
}

/// Divides every scalar by the largest magnitude, keeping signs. All-zero
/// input is returned unchanged.
pub fn normalize_scalars<S: ScalarCarrier>(mut item: S) -> S {
    normalize_in_place(item.scalars_mut());
    item
}

pub fn normalize_in_place<T: Real>(values: &mut [T]) {
    let m = values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if m > T::zero() && m.is_finite() {
        for v in values.iter_mut() {
            // exact ±1 at the extremes keeps the map idempotent
            *v = if v.abs() == m { v.signum() } else { *v / m };
        }
    }
}
