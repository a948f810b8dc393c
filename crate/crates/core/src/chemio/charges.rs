use super::Molecule;
use crate::error::{Error, Result};
use crate::numeric::Real;

/// Stop once no atom's charge moved by more than this in an iteration.
pub const EQUILIBRATION_TOLERANCE: f64 = 1e-6;
pub const MAX_EQUILIBRATION_ITERATIONS: usize = 500;

/// Electronegativity response to charge, χ(q) = χ₀ + η·q + κ·q².
const HARDNESS: f64 = 5.0;
const HARDNESS_CURVATURE: f64 = 1.5;
/// Divides the electronegativity gap into a charge transfer.
const TRANSFER_SCALE: f64 = 10.0;
/// Geometric damping of successive transfers.
const DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargeScheme {
    /// Keep whatever charges the input carried (e.g. PQR).
    #[default]
    None,
    /// Damped bond-wise electronegativity equalization starting from formal charges.
    Electronegativity,
}

/// Assigns partial charges.
///
/// The electronegativity scheme moves charge along bonds from the less to the
/// more electronegative partner, with transfers damped geometrically per
/// iteration, so total charge is conserved exactly and the result depends
/// only on the bond graph.
pub fn assign_charges<T: Real>(mol: &Molecule<T>, scheme: ChargeScheme) -> Result<Molecule<T>> {
    match scheme {
        ChargeScheme::None => Ok(mol.clone()),
        ChargeScheme::Electronegativity => equilibrate(mol),
    }
}

fn equilibrate<T: Real>(mol: &Molecule<T>) -> Result<Molecule<T>> {
    let start: Vec<f64> = mol.atoms().iter().map(|a| a.formal_charge as f64).collect();
    let q = equalize_from(mol, &start)?;
    let mut out = mol.clone();
    for (a, qi) in out.atoms_mut().iter_mut().zip(q) {
        a.partial_charge = T::lit(qi);
    }
    Ok(out)
}

/// Runs the damped equalization from arbitrary starting charges and returns
/// the relaxed charges. The map is nonlinear in `start` (χ is quadratic in
/// q) but conserves `Σ start` exactly up to rounding.
pub fn equalize_from<T: Real>(mol: &Molecule<T>, start: &[f64]) -> Result<Vec<f64>> {
    if start.len() != mol.len() {
        return Err(Error::LengthMismatch(start.len(), mol.len()));
    }
    let chi0: Vec<f64> = mol.atoms().iter().map(|a| a.element.electronegativity()).collect();
    let mut q = start.to_vec();
    let mut damping = 1.0;
    let mut converged = false;
    for _ in 0..MAX_EQUILIBRATION_ITERATIONS {
        damping *= DAMPING;
        let chi: Vec<f64> = chi0
            .iter()
            .zip(&q)
            .map(|(c, qi)| c + HARDNESS * qi + HARDNESS_CURVATURE * qi * qi)
            .collect();
        let mut delta = vec![0.0; q.len()];
        for &(i, j) in mol.bonds() {
            // positive when j pulls electrons from i
            let t = damping * (chi[j] - chi[i]) / TRANSFER_SCALE;
            delta[i] += t;
            delta[j] -= t;
        }
        let max_update = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if !max_update.is_finite() {
            break;
        }
        for (qi, d) in q.iter_mut().zip(&delta) {
            *qi += d;
        }
        if max_update < EQUILIBRATION_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(MAX_EQUILIBRATION_ITERATIONS));
    }
    Ok(q)
}
