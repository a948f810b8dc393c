//! Axis-aligned scalar grids: a Gaussian pseudo-density for isosurfacing and
//! Coulomb-type property fields for surface annotation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chemio::{equalize_from, Molecule};
use crate::error::{Error, Result};
use crate::numeric::{Real, Vec3};

pub const DEFAULT_SPACING: f64 = 0.4;
pub const DEFAULT_PADDING: f64 = 4.0;
pub const DEFAULT_VOXEL_BUDGET: usize = 10_000_000;
/// Distance floor for the Coulomb sum, Å.
pub const ESP_SOFTENING: f64 = 0.1;
pub const DEFAULT_FUKUI_DELTA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Density,
    Esp,
    FukuiDual,
}

/// Placement of a regular grid: node `(i, j, k)` sits at
/// `origin + spacing * (i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry<T> {
    pub origin: Vec3<T>,
    pub spacing: T,
    pub dims: [usize; 3],
}

impl<T: Real> GridGeometry<T> {
    pub fn new(origin: Vec3<T>, spacing: T, dims: [usize; 3]) -> Result<Self> {
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::invalid(format!("grid dims {dims:?} must be >= 2 on every axis")));
        }
        if !origin.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(GridGeometry { origin, spacing, dims })
    }

    /// Bounding box of `mol` grown by `padding`, sampled at `spacing`. The
    /// rounded-up node lattice is centred on the box, so rotations that map
    /// the box onto itself also map the lattice onto itself.
    pub fn enclosing(mol: &Molecule<T>, spacing: T, padding: T, voxel_budget: usize) -> Result<Self> {
        if !(spacing > T::zero()) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        if padding < T::zero() {
            return Err(Error::invalid("padding must be non-negative"));
        }
        let mut lo = mol.atoms()[0].position;
        let mut hi = lo;
        for a in mol.atoms() {
            for k in 0..3 {
                lo[k] = lo[k].min(a.position[k]);
                hi[k] = hi[k].max(a.position[k]);
            }
        }
        let mut dims = [0usize; 3];
        let mut origin = Vec3::zero();
        let half = T::lit(0.5);
        for k in 0..3 {
            let extent = (hi[k] - lo[k] + padding + padding) / spacing;
            let n = extent.ceil().to_usize().unwrap_or(usize::MAX).saturating_add(1);
            dims[k] = n.max(2);
            let centre = (lo[k] + hi[k]) * half;
            origin[k] = centre - spacing * T::from_usize_lossy(dims[k] - 1) * half;
        }
        let voxels = dims.iter().fold(1usize, |acc, &d| acc.saturating_mul(d));
        if voxels > voxel_budget {
            return Err(Error::VoxelBudget { voxels, budget: voxel_budget });
        }
        Self::new(origin, spacing, dims)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3<T> {
        self.origin
            + Vec3::new(
                T::from_usize_lossy(i) * self.spacing,
                T::from_usize_lossy(j) * self.spacing,
                T::from_usize_lossy(k) * self.spacing,
            )
    }

    /// Far corner of the grid.
    pub fn max_corner(&self) -> Vec3<T> {
        self.node(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1)
    }

    pub fn contains(&self, p: &Vec3<T>) -> bool {
        let hi = self.max_corner();
        let tol = self.spacing * T::lit(1e-9);
        (0..3).all(|k| p[k] >= self.origin[k] - tol && p[k] <= hi[k] + tol)
    }

    /// Evaluates `f` at every node in parallel over z-slices.
    pub fn evaluate<F>(&self, f: F) -> Vec<T>
    where
        F: Fn(Vec3<T>) -> T + Sync,
    {
        let [nx, ny, nz] = self.dims;
        let slices: Vec<Vec<T>> = (0..nz)
            .into_par_iter()
            .map(|k| {
                let mut out = Vec::with_capacity(nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        out.push(f(self.node(i, j, k)));
                    }
                }
                out
            })
            .collect();
        slices.concat()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid<T> {
    pub geometry: GridGeometry<T>,
    pub values: Vec<T>,
    pub kind: FieldKind,
    /// Set when the molecule carried no charge at all, so the field is zero.
    pub zero_charge_warning: bool,
}

impl<T: Real> ScalarGrid<T> {
    pub fn new(geometry: GridGeometry<T>, values: Vec<T>, kind: FieldKind) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::LengthMismatch(values.len(), geometry.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid values must be finite"));
        }
        Ok(ScalarGrid {
            geometry,
            values,
            kind,
            zero_charge_warning: false,
        })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.geometry.index(i, j, k)]
    }

    pub fn min_max(&self) -> (T, T) {
        self.values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Trilinear interpolation of the eight nodes around `p`.
    pub fn sample(&self, p: &Vec3<T>) -> Result<T> {
        trilinear_sample(self, p)
    }
}

/// Trilinear interpolation; errors for points outside the grid box.
pub fn trilinear_sample<T: Real>(grid: &ScalarGrid<T>, p: &Vec3<T>) -> Result<T> {
    let g = &grid.geometry;
    if !p.is_finite() || !g.contains(p) {
        return Err(Error::OutsideGrid(p.x().as_f64(), p.y().as_f64(), p.z().as_f64()));
    }
    let mut cell = [0usize; 3];
    let mut frac = [T::zero(); 3];
    for k in 0..3 {
        let u = ((p[k] - g.origin[k]) / g.spacing).max(T::zero());
        let max_cell = g.dims[k] - 2;
        let c = u.floor().to_usize().unwrap_or(0).min(max_cell);
        cell[k] = c;
        frac[k] = (u - T::from_usize_lossy(c)).min(T::one());
    }
    let [i, j, k] = cell;
    let [tx, ty, tz] = frac;
    let one = T::one();
    let lerp = |a: T, b: T, t: T| a * (one - t) + b * t;
    let c00 = lerp(grid.at(i, j, k), grid.at(i + 1, j, k), tx);
    let c10 = lerp(grid.at(i, j + 1, k), grid.at(i + 1, j + 1, k), tx);
    let c01 = lerp(grid.at(i, j, k + 1), grid.at(i + 1, j, k + 1), tx);
    let c11 = lerp(grid.at(i, j + 1, k + 1), grid.at(i + 1, j + 1, k + 1), tx);
    Ok(lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz))
}

/// Width of an atom's Gaussian: half its van der Waals radius.
pub fn density_sigma(element: crate::chemio::Element) -> f64 {
    element.vdw_radius() / 2.0
}

/// Gaussian pseudo-density `Σ Z_a exp(-|x - r_a|² / 2σ_a²)` on a padded box
/// around the molecule.
pub fn build_density_grid<T: Real>(mol: &Molecule<T>, spacing: T, padding: T) -> Result<ScalarGrid<T>> {
    let geom = GridGeometry::enclosing(mol, spacing, padding, DEFAULT_VOXEL_BUDGET)?;
    build_density_on(mol, &geom)
}

pub fn build_density_on<T: Real>(mol: &Molecule<T>, geom: &GridGeometry<T>) -> Result<ScalarGrid<T>> {
    let terms: Vec<(Vec3<T>, T, T)> = mol
        .atoms()
        .iter()
        .map(|a| {
            let s = T::lit(density_sigma(a.element));
            let inv = T::one() / (T::lit(2.0) * s * s);
            (a.position, T::from_u8(a.element.atomic_number()).unwrap(), inv)
        })
        .collect();
    let values = geom.evaluate(|x| {
        let mut acc = T::zero();
        for (r, w, inv) in &terms {
            acc += *w * (-(x - *r).norm_sq() * *inv).exp();
        }
        acc
    });
    ScalarGrid::new(*geom, values, FieldKind::Density)
}

fn coulomb_sum<T: Real>(charges: &[(Vec3<T>, T)], x: Vec3<T>) -> T {
    let eps = T::lit(ESP_SOFTENING);
    let mut acc = T::zero();
    for (r, q) in charges {
        acc += *q / (x - *r).norm().max(eps);
    }
    acc
}

fn esp_values<T: Real>(positions: &[Vec3<T>], charges: &[T], geom: &GridGeometry<T>) -> Vec<T> {
    let pairs: Vec<(Vec3<T>, T)> = positions.iter().copied().zip(charges.iter().copied()).collect();
    geom.evaluate(|x| coulomb_sum(&pairs, x))
}

/// Softened Coulomb potential `Σ q_a / max(|x - r_a|, ε)` in e/Å.
pub fn build_esp_grid<T: Real>(mol: &Molecule<T>, geom: &GridGeometry<T>) -> Result<ScalarGrid<T>> {
    let positions: Vec<_> = mol.atoms().iter().map(|a| a.position).collect();
    let charges: Vec<_> = mol.atoms().iter().map(|a| a.partial_charge).collect();
    let mut grid = ScalarGrid::new(*geom, esp_values(&positions, &charges, geom), FieldKind::Esp)?;
    grid.zero_charge_warning = charges.iter().all(|q| *q == T::zero());
    Ok(grid)
}

/// Distribution of a unit change in total charge across atoms: proportional
/// to `|q_a|`, or uniform when every charge is zero.
pub fn perturbation_weights<T: Real>(mol: &Molecule<T>) -> Vec<f64> {
    let abs: Vec<f64> = mol.atoms().iter().map(|a| a.partial_charge.as_f64().abs()).collect();
    let total: f64 = abs.iter().sum();
    if total > 0.0 {
        abs.iter().map(|a| a / total).collect()
    } else {
        vec![1.0 / abs.len() as f64; abs.len()]
    }
}

/// Charges of the molecule after shifting its total charge by `shift` and
/// letting the bond network respond.
pub fn perturbed_charges<T: Real>(mol: &Molecule<T>, shift: f64) -> Result<Vec<f64>> {
    let w = perturbation_weights(mol);
    let start: Vec<f64> = mol
        .atoms()
        .iter()
        .zip(&w)
        .map(|(a, wi)| a.partial_charge.as_f64() + shift * wi)
        .collect();
    equalize_from(mol, &start)
}

/// Dual-Fukui surrogate: the second difference of the ESP with respect to
/// total molecular charge, `[V(+δ) − 2V(0) + V(−δ)] / δ²`.
pub fn build_fukui_dual_grid<T: Real>(mol: &Molecule<T>, geom: &GridGeometry<T>, delta: T) -> Result<ScalarGrid<T>> {
    if !(delta > T::zero()) {
        return Err(Error::invalid("fukui perturbation delta must be positive"));
    }
    let d = delta.as_f64();
    let positions: Vec<_> = mol.atoms().iter().map(|a| a.position).collect();
    let to_t = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    let plus = esp_values(&positions, &to_t(perturbed_charges(mol, d)?), geom);
    let base = esp_values(&positions, &to_t(perturbed_charges(mol, 0.0)?), geom);
    let minus = esp_values(&positions, &to_t(perturbed_charges(mol, -d)?), geom);
    let two = T::lit(2.0);
    let d2 = delta * delta;
    let values = plus
        .iter()
        .zip(&base)
        .zip(&minus)
        .map(|((p, b), m)| (*p - two * *b + *m) / d2)
        .collect();
    let mut grid = ScalarGrid::new(*geom, values, FieldKind::FukuiDual)?;
    grid.zero_charge_warning = mol.atoms().iter().all(|a| a.partial_charge == T::zero());
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemio::{derive_bonds, Atom, Element};

    fn lone(sym: &str) -> Molecule<f64> {
        Molecule::new("a", vec![Atom::new(Element::from_symbol(sym).unwrap(), Vec3::zero())]).unwrap()
    }

    #[test]
    fn density_at_nucleus_is_atomic_number() {
        let m = lone("H");
        let g = GridGeometry::new(Vec3::new(-1.0, -1.0, -1.0), 0.5, [5, 5, 5]).unwrap();
        let grid = build_density_on(&m, &g).unwrap();
        assert_eq!(grid.at(2, 2, 2), 1.0);
    }

    #[test]
    fn density_at_one_sigma() {
        let m = lone("C");
        let s = density_sigma(Element::C);
        let g = GridGeometry::new(Vec3::new(0.0, 0.0, -s), s, [2, 2, 2]).unwrap();
        let grid = build_density_on(&m, &g).unwrap();
        assert!((grid.at(0, 0, 0) - 6.0 * (-0.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn density_superposition_midpoint() {
        // two carbons 2d apart: midpoint = 2 * single-atom value at distance d
        let d = 0.9;
        let m = Molecule::new(
            "cc",
            vec![
                Atom::new(Element::C, Vec3::new(-d, 0.0, 0.0)),
                Atom::new(Element::C, Vec3::new(d, 0.0, 0.0)),
            ],
        )
        .unwrap();
        let g = GridGeometry::new(Vec3::zero(), 0.1, [2, 2, 2]).unwrap();
        let grid = build_density_on(&m, &g).unwrap();
        let s = density_sigma(Element::C);
        let single = 6.0 * (-(d * d) / (2.0 * s * s)).exp();
        assert!((grid.at(0, 0, 0) - 2.0 * single).abs() < 1e-13);
    }

    #[test]
    fn voxel_budget_enforced() {
        let m = lone("C");
        let e = GridGeometry::enclosing(&m, 0.01, 4.0, 1000).unwrap_err();
        assert!(matches!(e, Error::VoxelBudget { .. }));
    }

    #[test]
    fn esp_unit_charge_at_one_angstrom() {
        let m = Molecule::new("q", vec![Atom::new(Element::H, Vec3::zero()).with_charge(1.0)]).unwrap();
        let g = GridGeometry::new(Vec3::new(1.0, 0.0, 0.0), 1.0, [2, 2, 2]).unwrap();
        let grid = build_esp_grid(&m, &g).unwrap();
        assert_eq!(grid.at(0, 0, 0), 1.0);
        assert!(!grid.zero_charge_warning);
    }

    #[test]
    fn esp_dipole_midpoint_vanishes() {
        let m = Molecule::new(
            "dip",
            vec![
                Atom::new(Element::H, Vec3::new(-1.0, 0.0, 0.0)).with_charge(0.5),
                Atom::new(Element::H, Vec3::new(1.0, 0.0, 0.0)).with_charge(-0.5),
            ],
        )
        .unwrap();
        let g = GridGeometry::new(Vec3::zero(), 1.0, [2, 2, 2]).unwrap();
        assert_eq!(build_esp_grid(&m, &g).unwrap().at(0, 0, 0), 0.0);
    }

    #[test]
    fn esp_zero_charge_warning() {
        let g = GridGeometry::new(Vec3::zero(), 1.0, [2, 2, 2]).unwrap();
        assert!(build_esp_grid(&lone("C"), &g).unwrap().zero_charge_warning);
    }

    #[test]
    fn fukui_single_atom_is_zero() {
        let g = GridGeometry::new(Vec3::new(-2.0, -2.0, -2.0), 1.0, [5, 5, 5]).unwrap();
        let f = build_fukui_dual_grid(&lone("O"), &g, 0.1).unwrap();
        assert!(f.values.iter().all(|v| v.abs() < 1e-9));
        assert!(build_fukui_dual_grid(&lone("O"), &g, 0.0).is_err());
    }

    #[test]
    fn fukui_of_polar_molecule_changes_sign() {
        let th = 104.5f64.to_radians() / 2.0;
        let m = Molecule::new(
            "w",
            vec![
                Atom::new(Element::O, Vec3::zero()),
                Atom::new(Element::H, Vec3::new(0.96 * th.sin(), 0.96 * th.cos(), 0.0)),
                Atom::new(Element::H, Vec3::new(-0.96 * th.sin(), 0.96 * th.cos(), 0.0)),
            ],
        )
        .unwrap();
        let m = crate::chemio::assign_charges(&derive_bonds(&m, 1.2), crate::chemio::ChargeScheme::Electronegativity)
            .unwrap();
        let g = GridGeometry::enclosing(&m, 0.5, 3.0, DEFAULT_VOXEL_BUDGET).unwrap();
        let f = build_fukui_dual_grid(&m, &g, 0.1).unwrap();
        let (lo, hi) = f.min_max();
        assert!(lo < -1e-6 && hi > 1e-6, "range {lo} {hi}");
    }

    #[test]
    fn trilinear_on_node_and_outside() {
        let g = GridGeometry::new(Vec3::zero(), 0.5, [3, 3, 3]).unwrap();
        let values: Vec<f64> = (0..27).map(|i| i as f64).collect();
        let grid = ScalarGrid::new(g, values, FieldKind::Esp).unwrap();
        assert_eq!(trilinear_sample(&grid, &Vec3::new(0.5, 0.5, 0.5)).unwrap(), grid.at(1, 1, 1));
        assert_eq!(trilinear_sample(&grid, &Vec3::new(1.0, 1.0, 1.0)).unwrap(), 26.0);
        assert!(matches!(
            trilinear_sample(&grid, &Vec3::new(1.1, 0.0, 0.0)),
            Err(Error::OutsideGrid(..))
        ));
    }

    #[test]
    fn trilinear_constant_grid() {
        let g = GridGeometry::new(Vec3::new(-1.0, 2.0, 0.0), 0.3, [4, 5, 6]).unwrap();
        let grid = ScalarGrid::new(g, vec![2.5; g.len()], FieldKind::Esp).unwrap();
        for p in [Vec3::new(-0.77, 2.1, 0.4), Vec3::new(-0.1, 3.19, 1.5)] {
            assert_eq!(trilinear_sample(&grid, &p).unwrap(), 2.5);
        }
    }

    #[test]
    fn geometry_validation() {
        assert!(GridGeometry::new(Vec3::zero(), 0.0, [2, 2, 2]).is_err());
        assert!(GridGeometry::new(Vec3::zero(), 1.0, [1, 2, 2]).is_err());
        let g = GridGeometry::new(Vec3::zero(), 1.0, [2, 2, 2]).unwrap();
        assert!(ScalarGrid::new(g, vec![0.0; 7], FieldKind::Esp).is_err());
        assert!(ScalarGrid::new(g, vec![f64::NAN; 8], FieldKind::Esp).is_err());
    }
}
