use std::collections::HashMap;

use super::tables::{CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE};
use super::SurfaceMesh;
use crate::error::{Error, Result};
use crate::fieldgen::ScalarGrid;
use crate::numeric::{Real, Vec3};

/// Triangles with area below this (Å²) are dropped.
pub const DEGENERATE_AREA: f64 = 1e-12;
/// Fractional edge position below which a crossing is snapped to the node.
const EDGE_SNAP: f64 = 1e-5;
const NODE_KEY: u8 = 3;

/// Extracts the `isovalue` level set of `grid`.
///
/// Vertices on shared cube edges are merged, triangles are wound so their
/// normals point toward decreasing field values (outward for a density), and
/// vertex normals are the normalized negative field gradient.
pub fn marching_cubes<T: Real>(grid: &ScalarGrid<T>, isovalue: T) -> Result<SurfaceMesh<T>> {
    let (lo, hi) = grid.min_max();
    if !(isovalue > lo && isovalue < hi) {
        return Err(Error::IsovalueOutOfRange {
            iso: isovalue.as_f64(),
            min: lo.as_f64(),
            max: hi.as_f64(),
        });
    }
    let g = &grid.geometry;
    let [nx, ny, nz] = g.dims;
    let gradients = node_gradients(grid);
    let snap = T::lit(EDGE_SNAP);

    let mut edge_vertex: HashMap<(usize, u8), usize> = HashMap::new();
    let mut vertices: Vec<Vec3<T>> = Vec::new();
    let mut vgrad: Vec<Vec3<T>> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut case = 0usize;
                let mut nodes = [0usize; 8];
                for (c, off) in CORNER_OFFSETS.iter().enumerate() {
                    let idx = g.index(i + off[0], j + off[1], k + off[2]);
                    nodes[c] = idx;
                    if grid.values[idx] < isovalue {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRI_TABLE[case];
                let mut t = 0;
                while t < 16 && row[t] >= 0 {
                    let mut tri = [0usize; 3];
                    for (s, slot) in tri.iter_mut().enumerate() {
                        let edge = row[t + s] as usize;
                        let [ca, cb] = EDGE_CORNERS[edge];
                        let (na, nb) = if nodes[ca] < nodes[cb] {
                            (nodes[ca], nodes[cb])
                        } else {
                            (nodes[cb], nodes[ca])
                        };
                        let (va, vb) = (grid.values[na], grid.values[nb]);
                        let u = ((isovalue - va) / (vb - va)).max(T::zero()).min(T::one());
                        // Crossings within SNAP of a node collapse onto the node so
                        // neighbouring cubes agree on the shared vertex.
                        let key = if u < snap {
                            (na, NODE_KEY)
                        } else if u > T::one() - snap {
                            (nb, NODE_KEY)
                        } else {
                            (na, axis_of(nb - na, nx, ny))
                        };
                        *slot = *edge_vertex.entry(key).or_insert_with(|| {
                            let (pos, grad) = match key.1 {
                                NODE_KEY => (node_position(g, key.0), gradients[key.0]),
                                _ => {
                                    let pa = node_position(g, na);
                                    let pb = node_position(g, nb);
                                    (pa + (pb - pa) * u, gradients[na] + (gradients[nb] - gradients[na]) * u)
                                }
                            };
                            vertices.push(pos);
                            vgrad.push(grad);
                            vertices.len() - 1
                        });
                    }
                    triangles.push(tri);
                    t += 3;
                }
            }
        }
    }

    // Orient and drop degenerate faces.
    let min_area = T::lit(DEGENERATE_AREA);
    let mut kept = Vec::with_capacity(triangles.len());
    for [a, b, c] in triangles {
        if a == b || b == c || a == c {
            continue;
        }
        let n = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
        if n.norm() * T::lit(0.5) < min_area {
            continue;
        }
        let outward = -(vgrad[a] + vgrad[b] + vgrad[c]);
        if n.dot(&outward) < T::zero() {
            kept.push([a, c, b]);
        } else {
            kept.push([a, b, c]);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyMesh);
    }

    // Compact away vertices no longer referenced.
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut out_vertices = Vec::new();
    let mut out_grad = Vec::new();
    for tri in kept.iter_mut() {
        for v in tri.iter_mut() {
            if remap[*v] == usize::MAX {
                remap[*v] = out_vertices.len();
                out_vertices.push(vertices[*v]);
                out_grad.push(vgrad[*v]);
            }
            *v = remap[*v];
        }
    }
    let mut mesh = SurfaceMesh {
        vertices: out_vertices,
        triangles: kept,
        vertex_scalars: Vec::new(),
        vertex_normals: Vec::new(),
    };
    let face_normals = mesh.area_weighted_vertex_normals();
    mesh.vertex_normals = out_grad
        .iter()
        .zip(face_normals)
        .map(|(gr, fallback)| (-*gr).normalized().unwrap_or(fallback))
        .collect();
    mesh.vertex_scalars = vec![T::zero(); mesh.vertices.len()];
    Ok(mesh)
}

#[inline]
fn axis_of(step: usize, nx: usize, ny: usize) -> u8 {
    if step == 1 {
        0
    } else if step == nx {
        1
    } else {
        debug_assert_eq!(step, nx * ny);
        2
    }
}

fn node_position<T: Real>(g: &crate::fieldgen::GridGeometry<T>, flat: usize) -> Vec3<T> {
    let [nx, ny, _] = g.dims;
    let i = flat % nx;
    let j = (flat / nx) % ny;
    let k = flat / (nx * ny);
    g.node(i, j, k)
}

/// Central-difference gradient at every node (one-sided on the boundary).
fn node_gradients<T: Real>(grid: &ScalarGrid<T>) -> Vec<Vec3<T>> {
    let g = &grid.geometry;
    let [nx, ny, nz] = g.dims;
    let h = g.spacing;
    let mut out = Vec::with_capacity(g.len());
    let diff = |lo: usize, hi: usize, steps: T| (grid.values[hi] - grid.values[lo]) / (steps * h);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let mut v = Vec3::zero();
                let idx = [i, j, k];
                for axis in 0..3 {
                    let n = g.dims[axis];
                    let (a, b) = if idx[axis] == 0 {
                        (0, 1)
                    } else if idx[axis] == n - 1 {
                        (n - 2, n - 1)
                    } else {
                        (idx[axis] - 1, idx[axis] + 1)
                    };
                    let mut ia = idx;
                    let mut ib = idx;
                    ia[axis] = a;
                    ib[axis] = b;
                    let steps = T::from_usize_lossy(b - a);
                    v[axis] = diff(g.index(ia[0], ia[1], ia[2]), g.index(ib[0], ib[1], ib[2]), steps);
                }
                out.push(v);
            }
        }
    }
    out
}
