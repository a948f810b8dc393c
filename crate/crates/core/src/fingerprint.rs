//! Morgan-style circular fingerprints over the heavy-atom graph.
//!
//! Hydrogens are folded into their heavy neighbour's invariant as an
//! attached-H count. Bond orders are not perceived, so every bond hashes with
//! the same placeholder.

use serde::{Deserialize, Serialize};

use crate::chemio::{Element, Molecule};
use crate::error::{Error, Result};
use crate::numeric::{fnv1a64, Real};

pub const DEFAULT_RADIUS: usize = 2;
pub const DEFAULT_NBITS: usize = 2048;
const BOND_PLACEHOLDER: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    words: Vec<u64>,
    nbits: usize,
    pub radius: usize,
}

impl Fingerprint {
    pub fn empty(nbits: usize, radius: usize) -> Result<Self> {
        if nbits == 0 || !nbits.is_power_of_two() {
            return Err(Error::invalid(format!("fingerprint length {nbits} is not a power of two")));
        }
        Ok(Fingerprint {
            words: vec![0; nbits.div_ceil(64)],
            nbits,
            radius,
        })
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(|&b| self.get(b))
    }

    /// Bits as 0.0 / 1.0, e.g. for a model input.
    pub fn to_dense(&self) -> Vec<f64> {
        (0..self.nbits).map(|b| if self.get(b) { 1.0 } else { 0.0 }).collect()
    }

    /// Lower-case hex, least significant word first, each word little-endian.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.nbits / 4);
        for w in &self.words {
            for byte in w.to_le_bytes().iter().take(self.nbits.min(64).div_ceil(8)) {
                s.push_str(&format!("{byte:02x}"));
            }
        }
        s
    }

    pub fn from_hex(hex: &str, nbits: usize, radius: usize) -> Result<Self> {
        let mut fp = Fingerprint::empty(nbits, radius)?;
        let bytes_per_word = nbits.min(64).div_ceil(8);
        if hex.len() != fp.words.len() * bytes_per_word * 2 {
            return Err(Error::invalid("hex length does not match fingerprint size"));
        }
        for (wi, chunk) in hex.as_bytes().chunks(bytes_per_word * 2).enumerate() {
            let mut le = [0u8; 8];
            for (bi, pair) in chunk.chunks(2).enumerate() {
                let s = std::str::from_utf8(pair).map_err(|_| Error::invalid("bad hex"))?;
                le[bi] = u8::from_str_radix(s, 16).map_err(|_| Error::invalid("bad hex"))?;
            }
            fp.words[wi] = u64::from_le_bytes(le);
        }
        Ok(fp)
    }
}

fn initial_invariant(z: u8, degree: usize, formal_charge: i32, hydrogens: usize) -> u64 {
    let mut b = Vec::with_capacity(10);
    b.push(z);
    b.push(degree.min(255) as u8);
    b.extend_from_slice(&formal_charge.to_le_bytes());
    b.push(hydrogens.min(255) as u8);
    fnv1a64(&b)
}

/// Sets one bit per (heavy atom, iteration) invariant.
pub fn morgan_fingerprint<T: Real>(mol: &Molecule<T>, radius: usize, nbits: usize) -> Result<Fingerprint> {
    let mut fp = Fingerprint::empty(nbits, radius)?;
    let adj = mol.adjacency();
    let atoms = mol.atoms();
    let heavy: Vec<bool> = atoms.iter().map(|a| a.element != Element::H).collect();
    let mut inv: Vec<u64> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let degree = adj[i].iter().filter(|&&j| heavy[j]).count();
            let h = adj[i].iter().filter(|&&j| !heavy[j]).count();
            initial_invariant(a.element.atomic_number(), degree, a.formal_charge, h)
        })
        .collect();
    let emit = |fp: &mut Fingerprint, inv: &[u64]| {
        for (i, v) in inv.iter().enumerate() {
            if heavy[i] {
                fp.set((*v % nbits as u64) as usize);
            }
        }
    };
    emit(&mut fp, &inv);
    for _ in 0..radius {
        let next: Vec<u64> = (0..atoms.len())
            .map(|i| {
                let mut env: Vec<u64> = adj[i].iter().filter(|&&j| heavy[j]).map(|&j| inv[j]).collect();
                env.sort_unstable();
                let mut b = Vec::with_capacity(8 + env.len() * 9);
                b.extend_from_slice(&inv[i].to_le_bytes());
                for e in env {
                    b.push(BOND_PLACEHOLDER);
                    b.extend_from_slice(&e.to_le_bytes());
                }
                fnv1a64(&b)
            })
            .collect();
        inv = next;
        emit(&mut fp, &inv);
    }
    Ok(fp)
}

/// `|a ∧ b| / |a ∨ b|`, with two empty fingerprints scoring 1.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64> {
    if a.nbits != b.nbits {
        return Err(Error::LengthMismatch(a.nbits, b.nbits));
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}
