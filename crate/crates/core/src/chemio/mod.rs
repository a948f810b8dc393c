//! Molecule model and structure-file ingestion.

mod charges;
pub mod elements;
mod parse;

pub use charges::{assign_charges, equalize_from, ChargeScheme, EQUILIBRATION_TOLERANCE, MAX_EQUILIBRATION_ITERATIONS};
pub use elements::Element;
pub use parse::{parse_structure, StructureFormat};

use crate::error::{Error, Result};
use crate::numeric::{Real, Vec3};

/// Default scale applied to covalent-radius sums when perceiving bonds.
pub const DEFAULT_BOND_TOLERANCE: f64 = 1.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom<T> {
    pub element: Element,
    pub position: Vec3<T>,
    /// Partial charge in elementary-charge units.
    pub partial_charge: T,
    pub formal_charge: i32,
    /// Radius column from PQR input, when present.
    pub radius: Option<T>,
}

impl<T: Real> Atom<T> {
    pub fn new(element: Element, position: Vec3<T>) -> Self {
        Atom {
            element,
            position,
            partial_charge: T::zero(),
            formal_charge: 0,
            radius: None,
        }
    }

    pub fn with_charge(mut self, q: T) -> Self {
        self.partial_charge = q;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Molecule<T> {
    pub name: String,
    atoms: Vec<Atom<T>>,
    bonds: Vec<(usize, usize)>,
}

impl<T: Real> Molecule<T> {
    /// Builds a molecule without bonds. Fails for an empty atom list or
    /// non-finite coordinates.
    pub fn new(name: impl Into<String>, atoms: Vec<Atom<T>>) -> Result<Self> {
        Self::with_bonds(name, atoms, Vec::new())
    }

    pub fn with_bonds(name: impl Into<String>, atoms: Vec<Atom<T>>, bonds: Vec<(usize, usize)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMolecule("molecule has no atoms".into()));
        }
        if let Some(i) = atoms.iter().position(|a| !a.position.is_finite() || !a.partial_charge.is_finite()) {
            return Err(Error::InvalidMolecule(format!("atom {i} has non-finite data")));
        }
        let mut seen = std::collections::HashSet::new();
        for &(i, j) in &bonds {
            if i >= j {
                return Err(Error::InvalidMolecule(format!("bond ({i}, {j}) is not ordered i < j")));
            }
            if j >= atoms.len() {
                return Err(Error::InvalidMolecule(format!("bond ({i}, {j}) out of range")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidMolecule(format!("duplicate bond ({i}, {j})")));
            }
        }
        Ok(Molecule {
            name: name.into(),
            atoms,
            bonds,
        })
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Neighbor lists derived from the bond set.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for &(i, j) in &self.bonds {
            adj[i].push(j);
            adj[j].push(i);
        }
        for n in adj.iter_mut() {
            n.sort_unstable();
        }
        adj
    }

    pub fn total_charge(&self) -> T {
        self.atoms.iter().map(|a| a.partial_charge).sum()
    }

    pub fn centroid(&self) -> Vec3<T> {
        let mut c = Vec3::zero();
        for a in &self.atoms {
            c += a.position;
        }
        c / T::from_usize_lossy(self.atoms.len())
    }

    /// Applies `f` to every atom position; bonds and charges are kept.
    pub fn map_positions(&self, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        let mut out = self.clone();
        for a in out.atoms.iter_mut() {
            a.position = f(a.position);
        }
        out
    }

    pub(crate) fn atoms_mut(&mut self) -> &mut [Atom<T>] {
        &mut self.atoms
    }
}

/// Perceives bonds geometrically: `(i, j)` is bonded when the distance is at
/// most `tolerance` times the sum of covalent radii. Existing bonds are
/// replaced.
pub fn derive_bonds<T: Real>(mol: &Molecule<T>, tolerance: T) -> Molecule<T> {
    let atoms = &mol.atoms;
    let mut bonds = Vec::new();
    for i in 0..atoms.len() {
        let ri = T::lit(atoms[i].element.covalent_radius());
        for j in i + 1..atoms.len() {
            let rj = T::lit(atoms[j].element.covalent_radius());
            let cutoff = tolerance * (ri + rj);
            if atoms[i].position.dist(&atoms[j].position) <= cutoff {
                bonds.push((i, j));
            }
        }
    }
    Molecule {
        name: mol.name.clone(),
        atoms: mol.atoms.clone(),
        bonds,
    }
}

/// Sum of standard atomic masses in amu.
pub fn molecular_weight<T: Real>(mol: &Molecule<T>) -> f64 {
    mol.atoms.iter().map(|a| a.element.mass()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(sym: &str, x: f64, y: f64, z: f64) -> Atom<f64> {
        Atom::new(Element::from_symbol(sym).unwrap(), Vec3::new(x, y, z))
    }

    #[test]
    fn hydrogen_molecule_bonds_at_074() {
        // 2 * 0.31 * 1.2 = 0.744 >= 0.74
        let m = Molecule::new("h2", vec![atom("H", 0.0, 0.0, 0.0), atom("H", 0.0, 0.0, 0.74)]).unwrap();
        assert_eq!(derive_bonds(&m, 1.2).bonds(), &[(0, 1)]);
    }

    #[test]
    fn far_atoms_do_not_bond() {
        let m = Molecule::new("x", vec![atom("C", 0.0, 0.0, 0.0), atom("C", 10.0, 0.0, 0.0)]).unwrap();
        assert!(derive_bonds(&m, 1.2).bonds().is_empty());
    }

    #[test]
    fn water_has_two_oh_bonds() {
        // O-H 0.96 Å, H-O-H 104.5°; H-H ~1.52 Å > 1.2 * 0.62
        let th = 104.5f64.to_radians() / 2.0;
        let m = Molecule::new(
            "water",
            vec![
                atom("O", 0.0, 0.0, 0.0),
                atom("H", 0.96 * th.sin(), 0.96 * th.cos(), 0.0),
                atom("H", -0.96 * th.sin(), 0.96 * th.cos(), 0.0),
            ],
        )
        .unwrap();
        assert_eq!(derive_bonds(&m, 1.2).bonds(), &[(0, 1), (0, 2)]);
    }

    #[test]
    fn weights() {
        let w = Molecule::new("w", vec![atom("O", 0.0, 0.0, 0.0), atom("H", 1.0, 0.0, 0.0), atom("H", 0.0, 1.0, 0.0)])
            .unwrap();
        assert!((molecular_weight(&w) - 18.015).abs() < 0.01);
        let h = Molecule::new("h", vec![atom("H", 0.0, 0.0, 0.0)]).unwrap();
        assert_eq!(molecular_weight(&h), 1.008);
    }

    #[test]
    fn molecule_invariants_enforced() {
        assert!(Molecule::<f64>::new("e", vec![]).is_err());
        let a = vec![atom("H", 0.0, 0.0, 0.0), atom("H", 1.0, 0.0, 0.0)];
        assert!(Molecule::with_bonds("b", a.clone(), vec![(1, 0)]).is_err());
        assert!(Molecule::with_bonds("b", a.clone(), vec![(0, 0)]).is_err());
        assert!(Molecule::with_bonds("b", a.clone(), vec![(0, 2)]).is_err());
        assert!(Molecule::with_bonds("b", a.clone(), vec![(0, 1), (0, 1)]).is_err());
        assert!(Molecule::new("nan", vec![atom("H", f64::NAN, 0.0, 0.0)]).is_err());
    }
}
