//! Canonical frames for sampled surface clouds and the rotation challenge
//! used to measure how stable they are under input pose.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chemio::Molecule;
use crate::error::{Error, Result};
use crate::numeric::{symmetric_eigen3, Mat3, Real, Vec3};
use crate::pipeline::{build_cloud, CloudConfig};
use crate::surface::SurfaceMesh;
use crate::topology::TopoDescriptor;

/// Relative eigenvalue gap below which the principal axes are not unique.
pub const EIGEN_GAP: f64 = 1e-12;
/// Third moments smaller than this fall through to the next sign rule.
pub const MOMENT_TIE: f64 = 1e-9;
pub const DEFAULT_RMSD_THRESHOLD: f64 = 0.05;
/// Bucket size (Å) of the nearest-surface index.
const SURFACE_CELL: f64 = 0.5;

/// `x' = R (x + t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalFrame<T> {
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> CanonicalFrame<T> {
    pub fn identity() -> Self {
        CanonicalFrame {
            rotation: Mat3::identity(),
            translation: Vec3::zero(),
        }
    }

    pub fn apply(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(&(*p + self.translation))
    }

    pub fn inverse(&self) -> Self {
        // x = Rᵀx' − t  =  Rᵀ(x' − R t)
        CanonicalFrame {
            rotation: self.rotation.transpose(),
            translation: -self.rotation.mul_vec(&self.translation),
        }
    }
}

/// Points with one scalar each and optional topology descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceCloud<T> {
    pub positions: Vec<Vec3<T>>,
    pub scalars: Vec<T>,
    pub topo: Vec<TopoDescriptor<T>>,
}

impl<T: Real> SurfaceCloud<T> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn centroid(&self) -> Vec3<T> {
        let mut c = Vec3::zero();
        for p in &self.positions {
            c += *p;
        }
        c / T::from_usize_lossy(self.positions.len().max(1))
    }

    pub fn bounding_radius(&self) -> T {
        let c = self.centroid();
        self.positions.iter().fold(T::zero(), |m, p| m.max(p.dist(&c)))
    }
}

/// Principal-axis frame with third-moment sign fixing.
///
/// Axes are the position-covariance eigenvectors in descending eigenvalue
/// order. Each axis points where the scalar-weighted third moment is
/// non-negative, falling back to the purely geometric third moment when the
/// weighted one is below [`MOMENT_TIE`]. The third axis is then flipped if
/// needed to make the frame right-handed.
pub fn canonical_frame<T: Real>(positions: &[Vec3<T>], scalars: &[T]) -> Result<CanonicalFrame<T>> {
    canonical_frame_weighted(positions, scalars, &vec![T::one(); positions.len()])
}

/// [`canonical_frame`] with a non-negative weight per point, e.g. vertex
/// areas so the moments approximate surface integrals.
pub fn canonical_frame_weighted<T: Real>(positions: &[Vec3<T>], scalars: &[T], weights: &[T]) -> Result<CanonicalFrame<T>> {
    if positions.len() != scalars.len() {
        return Err(Error::LengthMismatch(positions.len(), scalars.len()));
    }
    if positions.len() != weights.len() {
        return Err(Error::LengthMismatch(positions.len(), weights.len()));
    }
    if positions.len() < 4 {
        return Err(Error::invalid("canonical frame needs at least 4 points"));
    }
    if weights.iter().any(|w| !(*w >= T::zero())) {
        return Err(Error::invalid("frame weights must be non-negative"));
    }
    let n: T = weights.iter().copied().sum();
    if !(n > T::zero()) {
        return Err(Error::invalid("frame weights sum to zero"));
    }
    let mut c = Vec3::zero();
    for (p, w) in positions.iter().zip(weights) {
        c += *p * *w;
    }
    c = c / n;
    let mut cov = Mat3::<T>::zero();
    for (p, w) in positions.iter().zip(weights) {
        let d = *p - c;
        for i in 0..3 {
            for j in 0..3 {
                cov.0[i][j] += *w * d[i] * d[j];
            }
        }
    }
    for row in cov.0.iter_mut() {
        for v in row.iter_mut() {
            *v = *v / n;
        }
    }
    let (vals, vecs) = symmetric_eigen3(&cov);
    let scale = vals[0].abs().max(T::min_positive_value());
    let gap = T::lit(EIGEN_GAP) * scale;
    if vals[0] - vals[1] < gap || vals[1] - vals[2] < gap || vals[2] < gap {
        return Err(Error::AmbiguousAlignment(format!(
            "covariance eigenvalues {:.3e}, {:.3e}, {:.3e} are degenerate",
            vals[0].as_f64(),
            vals[1].as_f64(),
            vals[2].as_f64()
        )));
    }
    let tie = T::lit(MOMENT_TIE);
    let mut axes = vecs;
    for axis in axes.iter_mut().take(2) {
        if axis_sign(positions, scalars, weights, &c, axis, tie) < T::zero() {
            *axis = -*axis;
        }
    }
    let third = axes[0].cross(&axes[1]);
    axes[2] = third;
    let rotation = Mat3::from_rows(axes[0], axes[1], axes[2]);
    Ok(CanonicalFrame {
        rotation,
        translation: -c,
    })
}

/// Sign of the third moment along `axis`: scalar-weighted first, geometric
/// second, positive if both vanish.
fn axis_sign<T: Real>(positions: &[Vec3<T>], scalars: &[T], weights: &[T], c: &Vec3<T>, axis: &Vec3<T>, tie: T) -> T {
    let mut weighted = T::zero();
    let mut plain = T::zero();
    for ((p, s), w) in positions.iter().zip(scalars).zip(weights) {
        let t = (*p - *c).dot(axis);
        let t3 = *w * t * t * t;
        weighted += *s * t3;
        plain += t3;
    }
    if weighted.abs() >= tie {
        weighted
    } else if plain.abs() >= tie {
        plain
    } else {
        T::one()
    }
}

/// Moves positions into the frame and rotates `t1`/`t2`; scalars are
/// untouched.
pub fn apply_frame<T: Real>(cloud: &SurfaceCloud<T>, frame: &CanonicalFrame<T>) -> SurfaceCloud<T> {
    SurfaceCloud {
        positions: cloud.positions.iter().map(|p| frame.apply(p)).collect(),
        scalars: cloud.scalars.clone(),
        topo: cloud
            .topo
            .iter()
            .map(|d| crate::topology::rotate_descriptor(d, &frame.rotation))
            .collect(),
    }
}

/// Uniform random rotation from a normalized Gaussian quaternion.
pub fn random_rotation<T: Real, R: Rng>(rng: &mut R) -> Mat3<T> {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-6 {
            return Mat3::from_quaternion(T::lit(q[0] / n), T::lit(q[1] / n), T::lit(q[2] / n), T::lit(q[3] / n));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeReport {
    /// Trials that completed the pipeline.
    pub trials: usize,
    pub failed_trials: usize,
    /// Over all unordered pairs of completed trials; each aligned cloud is
    /// matched to the nearest point of the other trial's aligned surface.
    pub mean_rmsd: f64,
    pub max_rmsd: f64,
    /// Per canonical axis, trials whose axis points against trial 0's.
    pub sign_flips: [usize; 3],
    pub success_rate: f64,
    pub rmsd_threshold: f64,
}

impl ChallengeReport {
    pub fn total_sign_flips(&self) -> usize {
        self.sign_flips.iter().sum()
    }
}

/// Symmetric nearest-neighbour RMSD between two point sets.
pub fn nearest_neighbor_rmsd<T: Real>(a: &[Vec3<T>], b: &[Vec3<T>]) -> f64 {
    fn one_way<T: Real>(from: &[Vec3<T>], to: &[Vec3<T>]) -> f64 {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| (*p - *q).norm_sq().as_f64())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    ((one_way(a, b) + one_way(b, a)) / (a.len() + b.len()) as f64).sqrt()
}

/// Closest point to `p` on triangle `abc`.
pub fn closest_point_on_triangle(p: Vec3<f64>, a: Vec3<f64>, b: Vec3<f64>, c: Vec3<f64>) -> Vec3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Triangle buckets on a uniform grid for nearest-surface queries.
pub struct SurfaceIndex<'a> {
    mesh: &'a SurfaceMesh<f64>,
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl<'a> SurfaceIndex<'a> {
    pub fn new(mesh: &'a SurfaceMesh<f64>, cell: f64) -> Self {
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let mut lo = [i64::MAX; 3];
            let mut hi = [i64::MIN; 3];
            for &v in tri {
                for k in 0..3 {
                    let c = (mesh.vertices[v][k] / cell).floor() as i64;
                    lo[k] = lo[k].min(c);
                    hi[k] = hi[k].max(c);
                }
            }
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        buckets.entry([x, y, z]).or_default().push(t);
                    }
                }
            }
        }
        SurfaceIndex { mesh, cell, buckets }
    }

    fn triangle_dist_sq(&self, p: &Vec3<f64>, t: usize) -> f64 {
        let [a, b, c] = self.mesh.triangles[t];
        let v = &self.mesh.vertices;
        (closest_point_on_triangle(*p, v[a], v[b], v[c]) - *p).norm_sq()
    }

    /// Squared distance from `p` to the surface.
    pub fn distance_sq(&self, p: &Vec3<f64>) -> f64 {
        let home = [0, 1, 2].map(|k| (p[k] / self.cell).floor() as i64);
        let mut best = f64::INFINITY;
        // Shell r covers every point within r·cell of p, so stop once the
        // best distance is inside the searched radius.
        for r in 0..=4i64 {
            for x in -r..=r {
                for y in -r..=r {
                    for z in -r..=r {
                        if x.abs().max(y.abs()).max(z.abs()) != r {
                            continue;
                        }
                        if let Some(ts) = self.buckets.get(&[home[0] + x, home[1] + y, home[2] + z]) {
                            for &t in ts {
                                best = best.min(self.triangle_dist_sq(p, t));
                            }
                        }
                    }
                }
            }
            let reach = r as f64 * self.cell;
            if best <= reach * reach {
                return best;
            }
        }
        (0..self.mesh.triangles.len())
            .map(|t| self.triangle_dist_sq(p, t))
            .fold(best, f64::min)
    }
}

/// Symmetric point-to-surface RMSD: each cloud against the other's mesh.
pub fn cloud_surface_rmsd(
    a: &[Vec3<f64>],
    a_surface: &SurfaceIndex<'_>,
    b: &[Vec3<f64>],
    b_surface: &SurfaceIndex<'_>,
) -> f64 {
    let ab: f64 = a.iter().map(|p| b_surface.distance_sq(p)).sum();
    let ba: f64 = b.iter().map(|p| a_surface.distance_sq(p)).sum();
    ((ab + ba) / (a.len() + b.len()) as f64).sqrt()
}

struct Trial {
    positions: Vec<Vec3<f64>>,
    /// Mesh moved by the same frame as the cloud.
    mesh: SurfaceMesh<f64>,
    /// Canonical axes expressed in the molecule's original orientation.
    axes: [Vec3<f64>; 3],
}

/// Runs the full cloud pipeline from each pose (rotation about the
/// molecule's centroid) and compares the aligned clouds.
pub fn rotation_challenge_with_poses(
    mol: &Molecule<f64>,
    config: &CloudConfig,
    poses: &[Mat3<f64>],
    rmsd_threshold: f64,
) -> Result<ChallengeReport> {
    if poses.len() < 2 {
        return Err(Error::invalid("a rotation challenge needs at least 2 trials"));
    }
    let centre = mol.centroid();
    let runs: Vec<Option<Trial>> = poses
        .par_iter()
        .map(|pose| {
            let posed = mol.map_positions(|p| pose.mul_vec(&(p - centre)) + centre);
            let built = build_cloud(&posed, config).ok()?;
            let r = built.frame.rotation.mul_mat(pose);
            let f = built.frame;
            Some(Trial {
                positions: built.cloud.positions,
                mesh: built.mesh.transformed(&f.rotation, f.rotation.mul_vec(&f.translation)),
                axes: [r.row(0), r.row(1), r.row(2)],
            })
        })
        .collect();
    let failed_trials = runs.iter().filter(|r| r.is_none()).count();
    let ok: Vec<Trial> = runs.into_iter().flatten().collect();
    if ok.len() < 2 {
        return Err(Error::invalid(format!(
            "only {} of {} challenge trials completed",
            ok.len(),
            poses.len()
        )));
    }
    let mut sign_flips = [0usize; 3];
    for t in &ok[1..] {
        for (k, flips) in sign_flips.iter_mut().enumerate() {
            if t.axes[k].dot(&ok[0].axes[k]) < 0.0 {
                *flips += 1;
            }
        }
    }
    let pairs: Vec<(usize, usize)> = (0..ok.len())
        .flat_map(|i| (i + 1..ok.len()).map(move |j| (i, j)))
        .collect();
    let index: Vec<SurfaceIndex<'_>> = ok.iter().map(|t| SurfaceIndex::new(&t.mesh, SURFACE_CELL)).collect();
    let rmsds: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| cloud_surface_rmsd(&ok[i].positions, &index[i], &ok[j].positions, &index[j]))
        .collect();
    let passed = rmsds.iter().filter(|&&r| r < rmsd_threshold).count();
    Ok(ChallengeReport {
        trials: ok.len(),
        failed_trials,
        mean_rmsd: rmsds.iter().sum::<f64>() / rmsds.len() as f64,
        max_rmsd: rmsds.iter().copied().fold(0.0, f64::max),
        sign_flips,
        success_rate: passed as f64 / rmsds.len() as f64,
        rmsd_threshold,
    })
}

/// [`rotation_challenge_with_poses`] from `n_trials` uniformly random poses.
pub fn rotation_challenge(
    mol: &Molecule<f64>,
    config: &CloudConfig,
    n_trials: usize,
    seed: u64,
    rmsd_threshold: f64,
) -> Result<ChallengeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poses: Vec<Mat3<f64>> = (0..n_trials).map(|_| random_rotation(&mut rng)).collect();
    rotation_challenge_with_poses(mol, config, &poses, rmsd_threshold)
}
