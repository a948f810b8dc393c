use amptcr_core::chemio::{Atom, Element, Molecule};
use amptcr_core::fieldgen::{build_density_grid, density_sigma};
use amptcr_core::surface::{farthest_point_sample, marching_cubes, normalize_in_place, SurfaceMesh};
use amptcr_core::{Mat3, Vec3};
use proptest::prelude::*;

fn lone(el: Element, at: Vec3<f64>) -> Molecule<f64> {
    Molecule::new("x", vec![Atom::new(el, at)]).unwrap()
}

/// Single-atom sphere at the one-sigma level `Z·e^(-1/2)`.
fn sphere(el: Element, spacing: f64) -> SurfaceMesh<f64> {
    let m = lone(el, Vec3::new(0.013, -0.021, 0.007));
    let g = build_density_grid(&m, spacing, 2.0).unwrap();
    let iso = el.atomic_number() as f64 * (-0.5f64).exp();
    marching_cubes(&g, iso).unwrap()
}

#[test]
fn carbon_sphere_area_within_two_percent() {
    let s = density_sigma(Element::C);
    let mesh = sphere(Element::C, 0.2);
    let exact = 4.0 * std::f64::consts::PI * s * s;
    let rel = (mesh.area() - exact).abs() / exact;
    assert!(rel < 0.02, "relative area error {rel}");
    assert!(mesh.is_closed());
    assert_eq!(mesh.euler_characteristics(), vec![2]);
}

#[test]
fn halving_spacing_changes_area_by_under_one_percent() {
    let a = sphere(Element::C, 0.1).area();
    let b = sphere(Element::C, 0.05).area();
    assert!((a - b).abs() / b < 0.01, "{a} vs {b}");
}

#[test]
fn vertex_normals_point_outward() {
    let mesh = sphere(Element::O, 0.2);
    let c = mesh.centroid();
    for (v, n) in mesh.vertices.iter().zip(&mesh.vertex_normals) {
        assert!((*v - c).dot(n) > 0.0);
        assert!((n.norm() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn separated_atoms_give_two_closed_components() {
    let m = Molecule::new(
        "pair",
        vec![
            Atom::new(Element::C, Vec3::new(0.0, 0.0, 0.0)),
            Atom::new(Element::C, Vec3::new(8.0, 0.0, 0.0)),
        ],
    )
    .unwrap();
    let g = build_density_grid(&m, 0.25, 2.0).unwrap();
    let mesh = marching_cubes(&g, 6.0 * (-0.5f64).exp()).unwrap();
    assert_eq!(mesh.components().len(), 2);
    assert_eq!(mesh.euler_characteristics(), vec![2, 2]);
}

#[test]
fn isovalue_outside_range_is_rejected() {
    let g = build_density_grid(&lone(Element::C, Vec3::zero()), 0.3, 2.0).unwrap();
    let (lo, hi) = g.min_max();
    assert!(marching_cubes(&g, hi + 1.0).is_err());
    assert!(marching_cubes(&g, lo).is_err());
}

/// Largest distance from a vertex of `a` to its nearest vertex in `b`.
fn max_nearest(a: &SurfaceMesh<f64>, b: &SurfaceMesh<f64>) -> f64 {
    a.vertices
        .iter()
        .map(|p| b.vertices.iter().map(|q| p.dist(q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn water() -> Molecule<f64> {
    Molecule::new(
        "water",
        vec![
            Atom::new(Element::O, Vec3::new(0.0, 0.0, 0.117)),
            Atom::new(Element::H, Vec3::new(0.0, 0.757, -0.467)),
            Atom::new(Element::H, Vec3::new(0.0, -0.757, -0.467)),
        ],
    )
    .unwrap()
}

fn assert_moves_rigidly(r: Mat3<f64>, t: Vec3<f64>) {
    let mol = water();
    let g = build_density_grid(&mol, 0.3, 3.0).unwrap();
    let base = marching_cubes(&g, 0.04 * g.min_max().1).unwrap();
    let moved_mol = mol.map_positions(|p| r.mul_vec(&p) + t);
    let g2 = build_density_grid(&moved_mol, 0.3, 3.0).unwrap();
    let moved = marching_cubes(&g2, 0.04 * g2.min_max().1).unwrap();
    let expected = base.transformed(&r, t);
    assert_eq!(expected.vertices.len(), moved.vertices.len());
    assert!(max_nearest(&expected, &moved) < 1e-9);
    assert!(max_nearest(&moved, &expected) < 1e-9);
    if r == Mat3::identity() {
        assert!((base.area() - moved.area()).abs() < 1e-9);
    } else {
        // ambiguous cube cases triangulate differently once axes swap
        assert!((base.area() - moved.area()).abs() / base.area() < 1e-2);
    }
}

#[test]
fn translation_moves_mesh_rigidly() {
    assert_moves_rigidly(Mat3::identity(), Vec3::new(1.25, -3.5, 0.75));
}

#[test]
fn grid_aligned_rotation_moves_mesh_rigidly() {
    let quarter_turn = Mat3::from_rows(
        Vec3::new(0.0, -1.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    );
    assert_moves_rigidly(quarter_turn, Vec3::new(0.5, 0.0, -2.0));
}

fn point_mesh(points: Vec<[f64; 3]>) -> SurfaceMesh<f64> {
    let n = points.len();
    let tris = (1..n - 1).map(|i| [0, i, i + 1]).collect();
    SurfaceMesh::from_triangles(points.into_iter().map(Vec3).collect(), tris).unwrap()
}

fn min_pairwise(points: &[Vec3<f64>]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            m = m.min(points[i].dist(&points[j]));
        }
    }
    m
}

fn best_subset_spread(points: &[Vec3<f64>], n: usize) -> f64 {
    fn rec(points: &[Vec3<f64>], n: usize, start: usize, chosen: &mut Vec<Vec3<f64>>, best: &mut f64) {
        if chosen.len() == n {
            *best = best.max(min_pairwise(chosen));
            return;
        }
        for i in start..points.len() {
            chosen.push(points[i]);
            rec(points, n, i + 1, chosen, best);
            chosen.pop();
        }
    }
    let mut best = 0.0;
    rec(points, n, 0, &mut Vec::new(), &mut best);
    best
}

proptest! {
    #[test]
    fn fps_spread_within_greedy_factor(
        pts in prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), 5..=12),
        n in 2usize..=4,
        seed in any::<u64>(),
    ) {
        let mesh = point_mesh(pts);
        let s = farthest_point_sample(&mesh, n, seed).unwrap();
        let opt = best_subset_spread(&mesh.vertices, n);
        prop_assert!(min_pairwise(&s.positions) >= opt / 2.0 - 1e-12);
    }

    #[test]
    fn normalization_is_idempotent_and_keeps_signs(v in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let mut once = v.clone();
        normalize_in_place(&mut once);
        let mut twice = once.clone();
        normalize_in_place(&mut twice);
        prop_assert_eq!(&once, &twice);
        for (a, b) in v.iter().zip(&once) {
            prop_assert_eq!(a.signum() * (*a != 0.0) as i32 as f64, b.signum() * (*b != 0.0) as i32 as f64);
            prop_assert!(b.abs() <= 1.0);
        }
    }
}
