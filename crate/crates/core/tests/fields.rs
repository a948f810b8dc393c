use amptcr_core::chemio::{
    assign_charges, derive_bonds, parse_structure, Atom, ChargeScheme, Element, Molecule, StructureFormat,
};
use amptcr_core::fieldgen::{
    build_density_grid, build_esp_grid, build_fukui_dual_grid, perturbed_charges, GridGeometry, ESP_SOFTENING,
};
use amptcr_core::{Mat3, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ELEMENTS: [Element; 6] = [Element::C, Element::N, Element::O, Element::S, Element::F, Element::H];

fn random_cluster(seed: u64, n: usize) -> Molecule<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut atoms: Vec<Atom<f64>> = Vec::new();
    while atoms.len() < n {
        let p = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        if atoms.iter().all(|a| a.position.dist(&p) > 1.0) {
            atoms.push(Atom::new(ELEMENTS[rng.random_range(0..ELEMENTS.len())], p));
        }
    }
    derive_bonds(&Molecule::new("cluster", atoms).unwrap(), 1.2)
}

fn charged_cluster(seed: u64, n: usize) -> Molecule<f64> {
    assign_charges(&random_cluster(seed, n), ChargeScheme::Electronegativity).unwrap()
}

fn direct_esp(mol: &Molecule<f64>, x: Vec3<f64>) -> f64 {
    mol.atoms()
        .iter()
        .map(|a| a.partial_charge / (x - a.position).norm().max(ESP_SOFTENING))
        .sum()
}

#[test]
fn esp_matches_direct_sum_at_random_nodes() {
    let mol = charged_cluster(3, 12);
    let geom = GridGeometry::enclosing(&mol, 0.4, 3.0, 10_000_000).unwrap();
    let grid = build_esp_grid(&mol, &geom).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let [nx, ny, nz] = geom.dims;
        let (i, j, k) = (rng.random_range(0..nx), rng.random_range(0..ny), rng.random_range(0..nz));
        let want = direct_esp(&mol, geom.node(i, j, k));
        assert!((grid.at(i, j, k) - want).abs() < 1e-12);
    }
}

#[test]
fn fukui_matches_three_grid_definition() {
    let mol = charged_cluster(5, 10);
    let geom = GridGeometry::enclosing(&mol, 0.5, 3.0, 10_000_000).unwrap();
    let delta = 0.1;
    let f2 = build_fukui_dual_grid(&mol, &geom, delta).unwrap();
    let with = |q: Vec<f64>| {
        let atoms = mol.atoms().iter().zip(q).map(|(a, q)| a.clone().with_charge(q)).collect();
        let m = Molecule::with_bonds("p", atoms, mol.bonds().to_vec()).unwrap();
        build_esp_grid(&m, &geom).unwrap()
    };
    let plus = with(perturbed_charges(&mol, delta).unwrap());
    let base = with(perturbed_charges(&mol, 0.0).unwrap());
    let minus = with(perturbed_charges(&mol, -delta).unwrap());
    let mut nonzero = false;
    for idx in 0..geom.len() {
        let want = (plus.values[idx] - 2.0 * base.values[idx] + minus.values[idx]) / (delta * delta);
        assert!((f2.values[idx] - want).abs() < 1e-10);
        nonzero |= want.abs() > 1e-8;
    }
    assert!(nonzero, "asymmetric molecule should give a nonzero surrogate");
}

#[test]
fn zero_delta_is_rejected() {
    let mol = charged_cluster(1, 5);
    let geom = GridGeometry::enclosing(&mol, 0.5, 2.0, 10_000_000).unwrap();
    assert!(build_fukui_dual_grid(&mol, &geom, 0.0).is_err());
}

#[test]
fn density_positive_and_cation_potential_positive_far_away() {
    let mol = random_cluster(8, 8);
    let g = build_density_grid(&mol, 0.5, 3.0).unwrap();
    assert!(g.values.iter().all(|&v| v > 0.0));

    let atoms = mol.atoms().iter().map(|a| a.clone().with_charge(0.125)).collect();
    let cation = Molecule::new("c", atoms).unwrap();
    let far = GridGeometry::new(Vec3::new(40.0, 40.0, 40.0), 1.0, [2, 2, 2]).unwrap();
    assert!(build_esp_grid(&cation, &far).unwrap().values.iter().all(|&v| v > 0.0));
}

#[test]
fn zero_charges_raise_warning_not_error() {
    let mol = random_cluster(2, 4);
    let geom = GridGeometry::enclosing(&mol, 0.5, 2.0, 10_000_000).unwrap();
    let g = build_esp_grid(&mol, &geom).unwrap();
    assert!(g.zero_charge_warning);
    assert!(g.values.iter().all(|&v| v == 0.0));
}

#[test]
fn voxel_budget_enforced() {
    let mol = random_cluster(2, 4);
    assert!(GridGeometry::enclosing(&mol, 0.01, 4.0, 10_000_000).is_err());
}

fn rotation(seed: u64) -> Mat3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.3).normalized().unwrap();
    Mat3::axis_angle(&axis, rng.random_range(0.0..6.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn esp_translation_covariant(seed in 0u64..1000, t in prop::array::uniform3(-5.0f64..5.0)) {
        let mol = charged_cluster(seed, 6);
        let t = Vec3(t);
        let geom = GridGeometry::enclosing(&mol, 0.6, 2.0, 10_000_000).unwrap();
        let moved = mol.map_positions(|p| p + t);
        let geom2 = GridGeometry::new(geom.origin + t, geom.spacing, geom.dims).unwrap();
        let a = build_esp_grid(&mol, &geom).unwrap();
        let b = build_esp_grid(&moved, &geom2).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-12 * x.abs().max(1.0) * 10.0);
        }
    }

    #[test]
    fn charges_conserved_and_rigid_invariant(seed in 0u64..1000, n in 2usize..25, fc in -2i32..=2) {
        let mut mol = random_cluster(seed, n);
        let mut atoms = mol.atoms().to_vec();
        atoms[0].formal_charge = fc;
        mol = Molecule::with_bonds("m", atoms, mol.bonds().to_vec()).unwrap();
        let q = assign_charges(&mol, ChargeScheme::Electronegativity).unwrap();
        let total: f64 = q.atoms().iter().map(|a| a.partial_charge).sum();
        prop_assert!((total - fc as f64).abs() < 1e-9);

        let r = rotation(seed);
        let moved = mol.map_positions(|p| r.mul_vec(&p) + Vec3::new(1.0, 2.0, -3.0));
        let q2 = assign_charges(&moved, ChargeScheme::Electronegativity).unwrap();
        for (a, b) in q.atoms().iter().zip(q2.atoms()) {
            prop_assert_eq!(a.partial_charge, b.partial_charge);
        }
    }

    #[test]
    fn bonds_follow_relabelling(seed in 0u64..1000, n in 2usize..20, perm_seed in any::<u64>()) {
        let mol = random_cluster(seed, n);
        let mut perm: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        // new atom k is old atom perm[k]
        let atoms = perm.iter().map(|&i| mol.atoms()[i].clone()).collect();
        let relabelled = derive_bonds(&Molecule::new("p", atoms).unwrap(), 1.2);
        let mut inv = vec![0; n];
        for (k, &i) in perm.iter().enumerate() {
            inv[i] = k;
        }
        let mut expected: Vec<(usize, usize)> = mol
            .bonds()
            .iter()
            .map(|&(i, j)| (inv[i].min(inv[j]), inv[i].max(inv[j])))
            .collect();
        expected.sort();
        let mut got = relabelled.bonds().to_vec();
        got.sort();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn parsing_is_deterministic(seed in 0u64..1000) {
        let mol = random_cluster(seed, 7);
        let mut text = format!("{}\nrandom\n", mol.len());
        for a in mol.atoms() {
            text.push_str(&format!("{} {} {} {}\n", a.element.symbol(), a.position.x(), a.position.y(), a.position.z()));
        }
        let a = parse_structure::<f64>(&text, StructureFormat::Xyz).unwrap();
        let b = parse_structure::<f64>(&text, StructureFormat::Xyz).unwrap();
        prop_assert_eq!(a, b);
    }
}
