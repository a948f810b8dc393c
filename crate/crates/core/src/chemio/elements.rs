//! Periodic table data, H through Og.
//!
//! Columns: symbol, standard atomic mass (amu), single-bond covalent radius
//! (Å), van der Waals radius (Å), Pauling electronegativity (0 = undefined).

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementData {
    pub symbol: &'static str,
    pub atomic_number: u8,
    pub mass: f64,
    pub covalent_radius: f64,
    pub vdw_radius: f64,
    pub electronegativity: f64,
}

/// Electronegativity used where the table has none (noble gases, superheavies).
pub const FALLBACK_ELECTRONEGATIVITY: f64 = 2.0;

#[rustfmt::skip]
const TABLE: [(&str, f64, f64, f64, f64); 118] = [
    ("H", 1.008, 0.31, 1.20, 2.20),
    ("He", 4.0026, 0.28, 1.40, 0.0),
    ("Li", 6.94, 1.28, 1.82, 0.98),
    ("Be", 9.0122, 0.96, 1.53, 1.57),
    ("B", 10.81, 0.84, 1.92, 2.04),
    ("C", 12.011, 0.76, 1.70, 2.55),
    ("N", 14.007, 0.71, 1.55, 3.04),
    ("O", 15.999, 0.66, 1.52, 3.44),
    ("F", 18.998, 0.57, 1.47, 3.98),
    ("Ne", 20.180, 0.58, 1.54, 0.0),
    ("Na", 22.990, 1.66, 2.27, 0.93),
    ("Mg", 24.305, 1.41, 1.73, 1.31),
    ("Al", 26.982, 1.21, 1.84, 1.61),
    ("Si", 28.085, 1.11, 2.10, 1.90),
    ("P", 30.974, 1.07, 1.80, 2.19),
    ("S", 32.06, 1.05, 1.80, 2.58),
    ("Cl", 35.45, 1.02, 1.75, 3.16),
    ("Ar", 39.948, 1.06, 1.88, 0.0),
    ("K", 39.098, 2.03, 2.75, 0.82),
    ("Ca", 40.078, 1.76, 2.31, 1.00),
    ("Sc", 44.956, 1.70, 2.11, 1.36),
    ("Ti", 47.867, 1.60, 2.00, 1.54),
    ("V", 50.942, 1.53, 2.00, 1.63),
    ("Cr", 51.996, 1.39, 2.00, 1.66),
    ("Mn", 54.938, 1.39, 2.00, 1.55),
    ("Fe", 55.845, 1.32, 2.00, 1.83),
    ("Co", 58.933, 1.26, 2.00, 1.88),
    ("Ni", 58.693, 1.24, 1.63, 1.91),
    ("Cu", 63.546, 1.32, 1.40, 1.90),
    ("Zn", 65.38, 1.22, 1.39, 1.65),
    ("Ga", 69.723, 1.22, 1.87, 1.81),
    ("Ge", 72.630, 1.20, 2.11, 2.01),
    ("As", 74.922, 1.19, 1.85, 2.18),
    ("Se", 78.971, 1.20, 1.90, 2.55),
    ("Br", 79.904, 1.20, 1.85, 2.96),
    ("Kr", 83.798, 1.16, 2.02, 3.00),
    ("Rb", 85.468, 2.20, 3.03, 0.82),
    ("Sr", 87.62, 1.95, 2.49, 0.95),
    ("Y", 88.906, 1.90, 2.00, 1.22),
    ("Zr", 91.224, 1.75, 2.00, 1.33),
    ("Nb", 92.906, 1.64, 2.00, 1.60),
    ("Mo", 95.95, 1.54, 2.00, 2.16),
    ("Tc", 98.0, 1.47, 2.00, 1.90),
    ("Ru", 101.07, 1.46, 2.00, 2.20),
    ("Rh", 102.91, 1.42, 2.00, 2.28),
    ("Pd", 106.42, 1.39, 1.63, 2.20),
    ("Ag", 107.87, 1.45, 1.72, 1.93),
    ("Cd", 112.41, 1.44, 1.58, 1.69),
    ("In", 114.82, 1.42, 1.93, 1.78),
    ("Sn", 118.71, 1.39, 2.17, 1.96),
    ("Sb", 121.76, 1.39, 2.06, 2.05),
    ("Te", 127.60, 1.38, 2.06, 2.10),
    ("I", 126.90, 1.39, 1.98, 2.66),
    ("Xe", 131.29, 1.40, 2.16, 2.60),
    ("Cs", 132.91, 2.44, 3.43, 0.79),
    ("Ba", 137.33, 2.15, 2.68, 0.89),
    ("La", 138.91, 2.07, 2.00, 1.10),
    ("Ce", 140.12, 2.04, 2.00, 1.12),
    ("Pr", 140.91, 2.03, 2.00, 1.13),
    ("Nd", 144.24, 2.01, 2.00, 1.14),
    ("Pm", 145.0, 1.99, 2.00, 1.13),
    ("Sm", 150.36, 1.98, 2.00, 1.17),
    ("Eu", 151.96, 1.98, 2.00, 1.20),
    ("Gd", 157.25, 1.96, 2.00, 1.20),
    ("Tb", 158.93, 1.94, 2.00, 1.10),
    ("Dy", 162.50, 1.92, 2.00, 1.22),
    ("Ho", 164.93, 1.92, 2.00, 1.23),
    ("Er", 167.26, 1.89, 2.00, 1.24),
    ("Tm", 168.93, 1.90, 2.00, 1.25),
    ("Yb", 173.05, 1.87, 2.00, 1.10),
    ("Lu", 174.97, 1.87, 2.00, 1.27),
    ("Hf", 178.49, 1.75, 2.00, 1.30),
    ("Ta", 180.95, 1.70, 2.00, 1.50),
    ("W", 183.84, 1.62, 2.00, 2.36),
    ("Re", 186.21, 1.51, 2.00, 1.90),
    ("Os", 190.23, 1.44, 2.00, 2.20),
    ("Ir", 192.22, 1.41, 2.00, 2.20),
    ("Pt", 195.08, 1.36, 1.75, 2.28),
    ("Au", 196.97, 1.36, 1.66, 2.54),
    ("Hg", 200.59, 1.32, 1.55, 2.00),
    ("Tl", 204.38, 1.45, 1.96, 1.62),
    ("Pb", 207.2, 1.46, 2.02, 2.33),
    ("Bi", 208.98, 1.48, 2.07, 2.02),
    ("Po", 209.0, 1.40, 1.97, 2.00),
    ("At", 210.0, 1.50, 2.02, 2.20),
    ("Rn", 222.0, 1.50, 2.20, 0.0),
    ("Fr", 223.0, 2.60, 3.48, 0.70),
    ("Ra", 226.0, 2.21, 2.83, 0.90),
    ("Ac", 227.0, 2.15, 2.00, 1.10),
    ("Th", 232.04, 2.06, 2.00, 1.30),
    ("Pa", 231.04, 2.00, 2.00, 1.50),
    ("U", 238.03, 1.96, 1.86, 1.38),
    ("Np", 237.0, 1.90, 2.00, 1.36),
    ("Pu", 244.0, 1.87, 2.00, 1.28),
    ("Am", 243.0, 1.80, 2.00, 1.13),
    ("Cm", 247.0, 1.69, 2.00, 1.28),
    ("Bk", 247.0, 1.68, 2.00, 1.30),
    ("Cf", 251.0, 1.68, 2.00, 1.30),
    ("Es", 252.0, 1.65, 2.00, 1.30),
    ("Fm", 257.0, 1.67, 2.00, 1.30),
    ("Md", 258.0, 1.73, 2.00, 1.30),
    ("No", 259.0, 1.76, 2.00, 1.30),
    ("Lr", 262.0, 1.61, 2.00, 1.30),
    ("Rf", 267.0, 1.57, 2.00, 0.0),
    ("Db", 268.0, 1.49, 2.00, 0.0),
    ("Sg", 269.0, 1.43, 2.00, 0.0),
    ("Bh", 270.0, 1.41, 2.00, 0.0),
    ("Hs", 277.0, 1.34, 2.00, 0.0),
    ("Mt", 278.0, 1.29, 2.00, 0.0),
    ("Ds", 281.0, 1.28, 2.00, 0.0),
    ("Rg", 282.0, 1.21, 2.00, 0.0),
    ("Cn", 285.0, 1.22, 2.00, 0.0),
    ("Nh", 286.0, 1.36, 2.00, 0.0),
    ("Fl", 289.0, 1.43, 2.00, 0.0),
    ("Mc", 290.0, 1.62, 2.00, 0.0),
    ("Lv", 293.0, 1.75, 2.00, 0.0),
    ("Ts", 294.0, 1.65, 2.00, 0.0),
    ("Og", 294.0, 1.57, 2.00, 0.0),
];

/// Chemical element, stored by atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

impl Element {
    pub const H: Element = Element(1);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const F: Element = Element(9);
    pub const S: Element = Element(16);
    pub const CL: Element = Element(17);

    pub fn from_atomic_number(z: u8) -> Option<Self> {
        (1..=118).contains(&z).then_some(Element(z))
    }

    /// Case-insensitive symbol lookup ("cl", "CL" and "Cl" all match chlorine).
    pub fn from_symbol(sym: &str) -> Option<Self> {
        let s = sym.trim();
        TABLE
            .iter()
            .position(|row| row.0.eq_ignore_ascii_case(s))
            .map(|i| Element(i as u8 + 1))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn data(self) -> ElementData {
        let (symbol, mass, cov, vdw, en) = TABLE[self.0 as usize - 1];
        ElementData {
            symbol,
            atomic_number: self.0,
            mass,
            covalent_radius: cov,
            vdw_radius: vdw,
            electronegativity: en,
        }
    }

    pub fn symbol(self) -> &'static str {
        TABLE[self.0 as usize - 1].0
    }

    pub fn mass(self) -> f64 {
        TABLE[self.0 as usize - 1].1
    }

    pub fn covalent_radius(self) -> f64 {
        TABLE[self.0 as usize - 1].2
    }

    pub fn vdw_radius(self) -> f64 {
        TABLE[self.0 as usize - 1].3
    }

    pub fn electronegativity(self) -> f64 {
        match TABLE[self.0 as usize - 1].4 {
            x if x > 0.0 => x,
            _ => FALLBACK_ELECTRONEGATIVITY,
        }
    }
}

impl std::fmt::Display for Element {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_ordered_and_complete() {
        assert_eq!(Element::from_symbol("H").unwrap().atomic_number(), 1);
        assert_eq!(Element::from_symbol("og").unwrap().atomic_number(), 118);
        assert_eq!(Element::from_symbol("Fe").unwrap().atomic_number(), 26);
        assert_eq!(Element::from_symbol("Xe").unwrap().atomic_number(), 54);
        assert_eq!(Element::from_symbol("Au").unwrap().atomic_number(), 79);
        assert_eq!(Element::from_symbol("U").unwrap().atomic_number(), 92);
        assert!(Element::from_symbol("Xx").is_none());
        for w in TABLE.windows(2) {
            assert!(w[0].1 < w[1].1 + 2.0, "masses roughly increase: {} {}", w[0].0, w[1].0);
        }
    }

    #[test]
    fn symbols_unique() {
        let mut s: Vec<_> = TABLE.iter().map(|r| r.0.to_ascii_lowercase()).collect();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 118);
    }
}
