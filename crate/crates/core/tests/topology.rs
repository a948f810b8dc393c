use std::collections::HashMap;

use amptcr_core::chemio::{Atom, Element, Molecule};
use amptcr_core::fieldgen::{build_density_grid, density_sigma};
use amptcr_core::surface::{marching_cubes, SurfaceMesh};
use amptcr_core::topology::{estimate_curvature, geodesic_distances, topology_vectors, TopologyContext};
use amptcr_core::{Mat3, Vec3};

fn icosphere(radius: f64, levels: usize) -> SurfaceMesh<f64> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3<f64>> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3(*p).normalized().unwrap())
    .collect();
    let mut f: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(f.len() * 4);
        for [a, b, c] in f {
            let mut m = |i: usize, j: usize| {
                *mid.entry((i.min(j), i.max(j))).or_insert_with(|| {
                    v.push(((v[i] + v[j]) * 0.5).normalized().unwrap());
                    v.len() - 1
                })
            };
            let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = next;
    }
    let mut mesh = SurfaceMesh::from_triangles(v.iter().map(|p| *p * radius).collect(), f).unwrap();
    mesh.vertex_normals = v;
    mesh
}

fn carbon_sphere() -> SurfaceMesh<f64> {
    let m = Molecule::new("c", vec![Atom::new(Element::C, Vec3::new(0.013, -0.021, 0.007))]).unwrap();
    let g = build_density_grid(&m, 0.2, 2.0).unwrap();
    marching_cubes(&g, 6.0 * (-0.5f64).exp()).unwrap()
}

fn bumpy_mesh() -> SurfaceMesh<f64> {
    let m = Molecule::new(
        "bumpy",
        vec![
            Atom::new(Element::O, Vec3::new(0.0, 0.0, 0.1)),
            Atom::new(Element::C, Vec3::new(1.3, 0.2, -0.1)),
            Atom::new(Element::H, Vec3::new(-0.5, 0.9, -0.3)),
            Atom::new(Element::S, Vec3::new(1.9, -1.4, 0.6)),
        ],
    )
    .unwrap();
    let g = build_density_grid(&m, 0.3, 3.0).unwrap();
    marching_cubes(&g, 0.04 * g.min_max().1).unwrap()
}

#[test]
fn antipodal_geodesic_on_carbon_sphere() {
    let mesh = carbon_sphere();
    let sigma = density_sigma(Element::C);
    let c = mesh.centroid();
    // source: vertex furthest along +z; target: the vertex most opposite
    let dir = |i: usize| (mesh.vertices[i] - c).normalized().unwrap();
    let src = (0..mesh.vertices.len()).max_by(|&a, &b| dir(a).z().total_cmp(&dir(b).z())).unwrap();
    let dst = (0..mesh.vertices.len())
        .min_by(|&a, &b| dir(a).dot(&dir(src)).total_cmp(&dir(b).dot(&dir(src))))
        .unwrap();
    let f = geodesic_distances(&mesh, src, f64::INFINITY).unwrap();
    let exact = std::f64::consts::PI * sigma;
    let rel = (f.distances[dst] - exact).abs() / exact;
    assert!(rel < 0.05, "geodesic {} vs {exact}", f.distances[dst]);
}

#[test]
fn geodesic_never_shorter_than_straight_line() {
    let mesh = bumpy_mesh();
    for src in [0, mesh.vertices.len() / 3, mesh.vertices.len() - 1] {
        let f = geodesic_distances(&mesh, src, f64::INFINITY).unwrap();
        assert_eq!(f.distances[src], 0.0);
        for (v, d) in f.distances.iter().enumerate() {
            assert!(*d >= mesh.vertices[src].dist(&mesh.vertices[v]));
        }
    }
}

#[test]
fn icosphere_curvature() {
    let r = 2.0;
    let mesh = icosphere(r, 4);
    for v in [0, 100, 1000, 2000] {
        let c = estimate_curvature(&mesh, v).unwrap();
        assert!((c.mean - 1.0 / r).abs() < 0.05 / r, "H = {}", c.mean);
        assert!((c.gaussian - 1.0 / (r * r)).abs() < 0.1 / (r * r), "K = {}", c.gaussian);
    }
}

#[test]
fn sphere_rings_lie_below_tangent_plane() {
    let mesh = icosphere(3.0, 4);
    let d = topology_vectors(&mesh, 7, &[1.0, 2.0]).unwrap();
    assert!(!d.empty_ring);
    assert!(d.ring_height_mean.iter().all(|h| *h < 0.0));
}

#[test]
fn descriptor_invariants_on_molecular_surface() {
    let mesh = bumpy_mesh();
    let ctx = TopologyContext::new(&mesh, &[1.0, 2.0], 3.0).unwrap();
    for v in (0..mesh.vertices.len()).step_by(97) {
        let d = ctx.descriptor(v);
        assert!((d.t1.norm() - 1.0).abs() < 1e-6);
        assert!(d.t1.dot(&d.t2).abs() < 1e-6);
    }
}

#[test]
fn descriptors_rotate_with_the_mesh() {
    let mesh = bumpy_mesh();
    let r = Mat3::axis_angle(&Vec3::new(0.3, -0.8, 0.52).normalized().unwrap(), 1.1);
    let moved = mesh.transformed(&r, Vec3::new(0.4, 1.0, -2.0));
    let a = TopologyContext::new(&mesh, &[1.0, 2.0], 3.0).unwrap();
    let b = TopologyContext::new(&moved, &[1.0, 2.0], 3.0).unwrap();
    for v in (0..mesh.vertices.len()).step_by(53) {
        let (da, db) = (a.descriptor(v), b.descriptor(v));
        assert!(r.mul_vec(&da.t1).dist(&db.t1) < 1e-6);
        assert!(r.mul_vec(&da.t2).dist(&db.t2) < 1e-6, "vertex {v}: {:?} vs {:?}", r.mul_vec(&da.t2), db.t2);
        for (x, y) in da.ring_height_mean.iter().zip(&db.ring_height_mean) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in da.ring_height_spread.iter().zip(&db.ring_height_spread) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!((da.mean_curvature - db.mean_curvature).abs() < 1e-9);
        assert!((da.gaussian_curvature - db.gaussian_curvature).abs() < 1e-9, "{} vs {}", da.gaussian_curvature, db.gaussian_curvature);
    }
}

#[test]
fn flipping_normals_flips_ring_heights() {
    let mesh = bumpy_mesh();
    let mut flipped = mesh.clone();
    for n in flipped.vertex_normals.iter_mut() {
        *n = -*n;
    }
    let a = TopologyContext::new(&mesh, &[1.0, 2.0], 3.0).unwrap();
    let b = TopologyContext::new(&flipped, &[1.0, 2.0], 3.0).unwrap();
    for v in (0..mesh.vertices.len()).step_by(71) {
        let (da, db) = (a.descriptor(v), b.descriptor(v));
        for (x, y) in da.ring_height_mean.iter().zip(&db.ring_height_mean) {
            assert!((x + y).abs() < 1e-12);
        }
    }
}
