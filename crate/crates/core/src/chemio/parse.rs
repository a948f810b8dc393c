use std::str::FromStr;

use super::{Atom, Element, Molecule};
use crate::error::{Error, Result};
use crate::numeric::{Real, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureFormat {
    Pdb,
    Pqr,
    Xyz,
}

impl StructureFormat {
    /// Guess from a file extension (case-insensitive).
    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "pdb" | "ent" => Some(Self::Pdb),
            "pqr" => Some(Self::Pqr),
            "xyz" => Some(Self::Xyz),
            _ => None,
        }
    }
}

impl FromStr for StructureFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::from_extension(s).ok_or_else(|| Error::invalid(format!("unknown structure format {s:?}")))
    }
}

/// Parses structure text into a molecule without bonds.
///
/// PDB input leaves partial charges at zero; PQR reads charge and radius from
/// the two trailing columns.
pub fn parse_structure<T: Real>(text: &str, format: StructureFormat) -> Result<Molecule<T>> {
    if text.trim().is_empty() {
        return Err(Error::parse(0, "empty input"));
    }
    match format {
        StructureFormat::Pdb => parse_pdb(text),
        StructureFormat::Pqr => parse_pqr(text),
        StructureFormat::Xyz => parse_xyz(text),
    }
}

fn is_atom_record(line: &str) -> bool {
    line.starts_with("ATOM  ") || line.starts_with("HETATM") || line == "ATOM" || line == "HETATM"
}

/// 1-based inclusive column slice, clipped to the line length.
fn cols(line: &str, from: usize, to: usize) -> &str {
    let start = (from - 1).min(line.len());
    let end = to.min(line.len());
    line.get(start..end).unwrap_or("")
}

fn parse_coord<T: Real>(field: &str, lineno: usize, what: &str) -> Result<T> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(lineno, format!("bad {what} field {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(lineno, format!("non-finite {what}")));
    }
    Ok(T::lit(v))
}

/// Infers an element from a PDB atom name (columns 13-16).
fn element_from_atom_name(name_field: &str) -> Option<Element> {
    let bytes = name_field.as_bytes();
    if bytes.is_empty() {
        return None;
    }
    // Two-letter elements are left-justified into column 13.
    if bytes[0].is_ascii_alphabetic() && bytes.len() >= 2 && bytes[1].is_ascii_alphabetic() {
        let two = &name_field[0..2];
        if let Some(e) = Element::from_symbol(two) {
            if !matches!(two.to_ascii_uppercase().as_str(), "HD" | "HE" | "HG" | "HO" | "HF" | "HS") {
                return Some(e);
            }
        }
    }
    let first = name_field.trim().chars().find(|c| c.is_ascii_alphabetic())?;
    Element::from_symbol(&first.to_string())
}

/// PQR names lose PDB justification, so only unambiguous two-letter
/// prefixes are honored.
fn element_from_pqr_name(name: &str) -> Option<Element> {
    let upper = name.to_ascii_uppercase();
    for two in ["CL", "BR", "NA", "MG", "ZN", "FE"] {
        if upper.starts_with(two) && (upper.len() == 2 || two == "CL" || two == "BR") {
            return Element::from_symbol(two);
        }
    }
    let first = name.chars().find(|c| c.is_ascii_alphabetic())?;
    Element::from_symbol(&first.to_string())
}

fn parse_formal_charge(field: &str) -> i32 {
    let f = field.trim();
    if f.len() != 2 {
        return 0;
    }
    let (mag, sign) = f.split_at(1);
    match (mag.parse::<i32>(), sign) {
        (Ok(m), "+") => m,
        (Ok(m), "-") => -m,
        _ => 0,
    }
}

fn parse_pdb<T: Real>(text: &str) -> Result<Molecule<T>> {
    let mut atoms = Vec::new();
    let mut name = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r');
        if name.is_empty() && (line.starts_with("COMPND") || line.starts_with("HEADER")) {
            name = cols(line, 11, 80).trim().to_string();
        }
        if !is_atom_record(line) {
            continue;
        }
        if line.len() < 54 {
            return Err(Error::parse(lineno, "atom record shorter than 54 columns"));
        }
        let x = parse_coord(cols(line, 31, 38), lineno, "x")?;
        let y = parse_coord(cols(line, 39, 46), lineno, "y")?;
        let z = parse_coord(cols(line, 47, 54), lineno, "z")?;
        let elem_field = cols(line, 77, 78).trim();
        let element = if !elem_field.is_empty() {
            Element::from_symbol(elem_field).ok_or_else(|| Error::UnknownElement(elem_field.to_string()))?
        } else {
            let atom_name = cols(line, 13, 16);
            element_from_atom_name(atom_name).ok_or_else(|| Error::UnknownElement(atom_name.trim().to_string()))?
        };
        let mut atom = Atom::new(element, Vec3::new(x, y, z));
        atom.formal_charge = parse_formal_charge(cols(line, 79, 80));
        atoms.push(atom);
    }
    if atoms.is_empty() {
        return Err(Error::parse(0, "no ATOM/HETATM records found"));
    }
    Molecule::new(name, atoms)
}

fn parse_pqr<T: Real>(text: &str) -> Result<Molecule<T>> {
    let mut atoms = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r');
        if !is_atom_record(line) {
            continue;
        }
        // PQR is whitespace-delimited: record serial name resName [chain] resSeq x y z charge radius
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 10 {
            return Err(Error::parse(lineno, format!("PQR record has {} fields, need at least 10", toks.len())));
        }
        let n = toks.len();
        let x = parse_coord(toks[n - 5], lineno, "x")?;
        let y = parse_coord(toks[n - 4], lineno, "y")?;
        let z = parse_coord(toks[n - 3], lineno, "z")?;
        let q: T = parse_coord(toks[n - 2], lineno, "charge")?;
        let r: T = parse_coord(toks[n - 1], lineno, "radius")?;
        let element = element_from_pqr_name(toks[2]).ok_or_else(|| Error::UnknownElement(toks[2].to_string()))?;
        let mut atom = Atom::new(element, Vec3::new(x, y, z)).with_charge(q);
        atom.radius = Some(r);
        atoms.push(atom);
    }
    if atoms.is_empty() {
        return Err(Error::parse(0, "no ATOM/HETATM records found"));
    }
    Molecule::new("", atoms)
}

fn parse_xyz<T: Real>(text: &str) -> Result<Molecule<T>> {
    let mut lines = text.lines();
    let count_line = lines.next().unwrap_or("");
    let count: usize = count_line
        .trim()
        .parse()
        .map_err(|_| Error::parse(1, format!("expected atom count, got {count_line:?}")))?;
    let name = lines.next().unwrap_or("").trim().to_string();
    let mut atoms = Vec::with_capacity(count);
    for (idx, raw) in lines.enumerate() {
        let lineno = idx + 3;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if atoms.len() == count {
            return Err(Error::parse(lineno, format!("more coordinate lines than declared count {count}")));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 4 {
            return Err(Error::parse(lineno, "coordinate line needs symbol x y z"));
        }
        let element = Element::from_symbol(toks[0]).ok_or_else(|| Error::UnknownElement(toks[0].to_string()))?;
        let x = parse_coord(toks[1], lineno, "x")?;
        let y = parse_coord(toks[2], lineno, "y")?;
        let z = parse_coord(toks[3], lineno, "z")?;
        atoms.push(Atom::new(element, Vec3::new(x, y, z)));
    }
    if atoms.len() != count {
        return Err(Error::parse(0, format!("declared {count} atoms, found {}", atoms.len())));
    }
    Molecule::new(name, atoms)
}
