use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SurfaceMesh;
use crate::error::{Error, Result};
use crate::numeric::{Real, Vec3};

/// Fixed-size point set drawn from mesh vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSurface<T> {
    pub positions: Vec<Vec3<T>>,
    pub scalars: Vec<T>,
    /// Mesh vertex each point was taken from.
    pub source_vertex: Vec<usize>,
}

impl<T: Real> SampledSurface<T> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Greedy farthest-point sampling over mesh vertices.
///
/// The first pick is the vertex farthest from the vertex centroid; each
/// subsequent pick maximizes the distance to the already chosen set. The
/// seed only matters when several vertices tie exactly.
pub fn farthest_point_sample<T: Real>(mesh: &SurfaceMesh<T>, n: usize, seed: u64) -> Result<SampledSurface<T>> {
    let verts = &mesh.vertices;
    if n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    if n > verts.len() {
        return Err(Error::invalid(format!(
            "requested {n} samples from a mesh with {} vertices",
            verts.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroid = mesh.centroid();
    let from_centroid: Vec<T> = verts.iter().map(|v| (*v - centroid).norm_sq()).collect();
    let mut chosen = Vec::with_capacity(n);
    chosen.push(pick_max(&from_centroid, &mut rng));

    let mut min_d: Vec<T> = verts.iter().map(|v| (*v - verts[chosen[0]]).norm_sq()).collect();
    while chosen.len() < n {
        let next = pick_max(&min_d, &mut rng);
        chosen.push(next);
        let p: Vec3<T> = verts[next];
        for (d, v) in min_d.iter_mut().zip(verts.iter()) {
            let dn = (*v - p).norm_sq();
            if dn < *d {
                *d = dn;
            }
        }
    }
    Ok(SampledSurface {
        positions: chosen.iter().map(|&i| verts[i]).collect(),
        scalars: chosen
            .iter()
            .map(|&i| mesh.vertex_scalars.get(i).copied().unwrap_or(T::zero()))
            .collect(),
        source_vertex: chosen,
    })
}

fn pick_max<T: Real>(values: &[T], rng: &mut ChaCha8Rng) -> usize {
    let best = values.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let ties: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .map(|(i, _)| i)
        .collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}
