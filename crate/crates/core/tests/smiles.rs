mod common;

use qtkit_core::ingest::parse_smiles;
use qtkit_core::synthetic::generate_molecules;

const HAND_WRITTEN: &[&str] = &[
    "C", "CC", "CCO", "C=O", "C#N", "CC(=O)NC=N", "c1ccccc1", "C1CC1C", "Cc1ccccc1", "c1ccncc1", "c1ccoc1",
    "c1cc[nH]c1", "[CH4]", "[NH3]", "[OH2]", "C%10CCCC%10", "C1CC2CCC1C2", "c1ccc2ccccc2c1", "OC1CCOC1",
    "N#CC(C)(C)O", "C=CC=O", "CC(C)(C)C", "C1=CC=CC=C1", "O=C1CCC(=O)N1", "C1CC1.C1CC1", "CCO.O",
    "C1CCC2(CC1)CC2", "NC(=O)c1ccccn1", "C-C-C", "c1:c:c:c:c:c:1",
];

#[test]
fn counts_match_tokenizer_oracle_on_100_strings() {
    let generated = generate_molecules(70, 11).unwrap();
    let corpus: Vec<&str> = HAND_WRITTEN.iter().copied().chain(generated.iter().map(|m| m.smiles.as_str())).collect();
    assert_eq!(corpus.len(), 100);
    for s in corpus {
        let (atoms, bonds) = common::smiles_counts(s).unwrap_or_else(|| panic!("oracle rejected {s}"));
        let g = parse_smiles(s).unwrap_or_else(|e| panic!("{s}: {e}"));
        assert_eq!(g.n_atoms(), atoms, "{s}");
        assert_eq!(g.bonds.len(), bonds, "{s}");
        assert_eq!(g.n_rings() + atoms, bonds + g.n_components(), "{s}");
    }
}

#[test]
fn malformed_strings_are_rejected_by_both() {
    for s in ["C(C", "CC)", "C1CC", "C%1", "[CH4"] {
        assert!(parse_smiles(s).is_err(), "{s}");
        assert!(common::smiles_counts(s).is_none(), "{s}");
    }
}
