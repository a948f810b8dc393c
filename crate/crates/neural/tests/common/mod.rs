#![allow(dead_code)]

use amptcr_core::cloudstore::{AmptcrCloud, CloudMeta, FORMAT_VERSION};
use amptcr_core::topology::{channel_layout, DEFAULT_RADII};
use amptcr_neural::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rows: usize, cols: usize, scale: f64, seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-scale..scale)).collect())
}

pub fn random_points(n: usize, scale: f64, seed: u64) -> Vec<[f64; 3]> {
    let mut r = rng(seed);
    (0..n).map(|_| [0; 3].map(|_| r.random_range(-scale..scale))).collect()
}

pub fn unit_vectors(n: usize, seed: u64) -> Vec<[f64; 3]> {
    random_points(n, 1.0, seed)
        .into_iter()
        .map(|p| {
            let l = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            p.map(|v| v / l)
        })
        .collect()
}

/// Random cloud of `n` points on a sphere of radius `radius`.
pub fn toy_cloud(name: &str, n: usize, radius: f64, seed: u64) -> AmptcrCloud {
    let layout = channel_layout(&DEFAULT_RADII);
    let c = layout.len();
    let dirs = unit_vectors(n, seed);
    let mut r = rng(seed ^ 0x55);
    let positions = dirs.iter().map(|d| d.map(|v| (v * radius) as f32)).collect();
    let scalars = (0..n).map(|_| r.random_range(-1.0f32..1.0)).collect();
    let mut topo = Vec::with_capacity(n * c);
    for d in &dirs {
        topo.extend(d.iter().map(|&v| v as f32));
        topo.extend((3..c).map(|_| r.random_range(-0.5f32..0.5)));
    }
    AmptcrCloud {
        positions,
        scalars,
        topo,
        meta: CloudMeta {
            name: name.into(),
            scalar_kind: "esp".into(),
            n_points: n,
            channel_layout: layout,
            config_hash: "0000000000000000".into(),
            format_version: FORMAT_VERSION,
        },
    }
}
