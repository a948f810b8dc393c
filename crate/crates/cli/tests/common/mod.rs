#![allow(dead_code)]

use std::path::{Path, PathBuf};

use amptcr_cli::PipelineConfig;
use amptcr_core::chemio::{molecular_weight, Atom, Element, Molecule};
use amptcr_core::evalkit::{FoldMode, Task};
use amptcr_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ELEMENTS: [(Element, f64); 3] = [(Element::C, 0.6), (Element::N, 0.2), (Element::O, 0.2)];

fn pick_element(rng: &mut ChaCha8Rng) -> Element {
    let mut u: f64 = rng.random();
    for (e, w) in ELEMENTS {
        if u < w {
            return e;
        }
        u -= w;
    }
    Element::C
}

/// Branched random walk of `n` atoms: each new atom sits 1.3 to 1.6 Å from a
/// random earlier atom and at least 1.1 Å from every other.
pub fn random_cluster(name: &str, n: usize, seed: u64) -> Molecule<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut atoms = vec![Atom::new(pick_element(&mut rng), Vec3::new(0.0, 0.0, 0.0))];
    while atoms.len() < n {
        let anchor = atoms[rng.random_range(0..atoms.len())].position;
        let dir = loop {
            let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let l = v.norm();
            if l > 0.1 && l <= 1.0 {
                break v * (1.0 / l);
            }
        };
        let p = anchor + dir * rng.random_range(1.3..1.6);
        if atoms.iter().all(|a| a.position.dist(&p) >= 1.1) {
            atoms.push(Atom::new(pick_element(&mut rng), p));
        }
    }
    Molecule::new(name, atoms).unwrap()
}

pub fn to_xyz(mol: &Molecule<f64>) -> String {
    let mut s = format!("{}\n{}\n", mol.len(), mol.name);
    for a in mol.atoms() {
        let p = a.position;
        s.push_str(&format!("{} {:.6} {:.6} {:.6}\n", a.element.symbol(), p.x(), p.y(), p.z()));
    }
    s
}

/// Writes `count` clusters of 5 to 25 atoms plus a labels CSV of their
/// molecular weights. Returns (structure dir, labels path).
pub fn write_mw_dataset(dir: &Path, count: usize, seed: u64) -> (PathBuf, PathBuf) {
    let structures = dir.join("structures");
    std::fs::create_dir_all(&structures).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = String::from("name,value\n");
    for i in 0..count {
        let name = format!("mol{i:03}");
        let mol = random_cluster(&name, rng.random_range(5..=25), rng.random());
        std::fs::write(structures.join(format!("{name}.xyz")), to_xyz(&mol)).unwrap();
        labels.push_str(&format!("{name},{}\n", molecular_weight(&mol)));
    }
    let labels_path = dir.join("labels.csv");
    std::fs::write(&labels_path, labels).unwrap();
    (structures, labels_path)
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

/// Desk-scale regression protocol: 256-point clouds, graph off (k = 1),
/// six folds of 30 epochs.
pub fn desk_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.seed = 1;
    cfg.cloud.n_points = 256;
    cfg.model.task = Task::Regression;
    cfg.model.k_nn = 1;
    cfg.model.width = 16;
    cfg.model.heads = 2;
    cfg.model.layers = 1;
    cfg.model.edge_layers = 1;
    cfg.model.epochs = 30;
    cfg.model.fp_weight = Some(0.0);
    cfg.folds.mode = FoldMode::Random;
    cfg.folds.folds = 6;
    cfg.folds.train_fraction = 0.95;
    cfg.calibrate = true;
    cfg
}

/// Small enough for end-to-end checks in a few seconds.
pub fn quick_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.seed = 5;
    cfg.cloud.n_points = 64;
    cfg.model.k_nn = 4;
    cfg.model.width = 16;
    cfg.model.heads = 2;
    cfg.model.layers = 1;
    cfg.model.edge_layers = 1;
    cfg.model.epochs = 2;
    cfg.folds.folds = 3;
    cfg
}
