use amptcr_core::chemio::{Atom, Element, Molecule};
use amptcr_core::fingerprint::{morgan_fingerprint, tanimoto, Fingerprint};
use amptcr_core::Vec3;
use proptest::prelude::*;

const ELEMENTS: [&str; 5] = ["C", "N", "O", "S", "H"];

/// Random tree plus a few extra edges; positions are irrelevant here.
fn graph() -> impl Strategy<Value = (Vec<usize>, Vec<(usize, usize)>)> {
    (2usize..20).prop_flat_map(|n| {
        (
            prop::collection::vec(0usize..ELEMENTS.len(), n),
            prop::collection::vec(any::<prop::sample::Index>(), n - 1),
            prop::collection::vec((0..n, 0..n), 0..3),
        )
            .prop_map(|(el, parents, extra)| {
                let mut bonds: Vec<(usize, usize)> = parents.iter().enumerate().map(|(i, p)| (p.index(i + 1), i + 1)).collect();
                for (a, b) in extra {
                    let e = (a.min(b), a.max(b));
                    if a != b && !bonds.contains(&e) && !bonds.contains(&(e.1, e.0)) {
                        bonds.push(e);
                    }
                }
                (el, bonds)
            })
    })
}

fn build(el: &[usize], bonds: Vec<(usize, usize)>) -> Molecule<f64> {
    let atoms = el
        .iter()
        .enumerate()
        .map(|(i, &e)| Atom::new(Element::from_symbol(ELEMENTS[e]).unwrap(), Vec3([i as f64 * 3.0, 0.0, 0.0])))
        .collect();
    Molecule::with_bonds("g", atoms, bonds).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]
    #[test]
    fn atom_order_does_not_matter((el, bonds) in graph(), perm_seed in any::<u64>()) {
        let n = el.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = perm_seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let mut el2 = vec![0; n];
        for i in 0..n { el2[perm[i]] = el[i]; }
        let bonds2 = bonds.iter().map(|&(a, b)| (perm[a].min(perm[b]), perm[a].max(perm[b]))).collect();
        let a = morgan_fingerprint(&build(&el, bonds), 2, 2048).unwrap();
        let b = morgan_fingerprint(&build(&el2, bonds2), 2, 2048).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn tanimoto_matches_popcount(xa in prop::collection::btree_set(0usize..256, 0..40),
                                 xb in prop::collection::btree_set(0usize..256, 0..40)) {
        let mut a = Fingerprint::empty(256, 0).unwrap();
        let mut b = Fingerprint::empty(256, 0).unwrap();
        xa.iter().for_each(|&i| a.set(i));
        xb.iter().for_each(|&i| b.set(i));
        let inter = xa.intersection(&xb).count();
        let union = xa.union(&xb).count();
        let expected = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
        prop_assert_eq!(tanimoto(&a, &b).unwrap(), expected);
        prop_assert_eq!(tanimoto(&a, &b).unwrap(), tanimoto(&b, &a).unwrap());
    }

    #[test]
    fn bits_stay_in_range((el, bonds) in graph(), log in 3u32..12) {
        let nbits = 1usize << log;
        let fp = morgan_fingerprint(&build(&el, bonds), 2, nbits).unwrap();
        prop_assert!(fp.ones().all(|b| b < nbits));
        prop_assert!(fp.count_ones() >= 1 || el.iter().all(|&e| ELEMENTS[e] == "H"));
    }
}
