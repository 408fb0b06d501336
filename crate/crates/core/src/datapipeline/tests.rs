use super::*;
use crate::simulator::{simulate, SimConfig};
use proptest::prelude::*;

fn data(seed: u64, n_bb: usize, n_tags: usize) -> (Library, Dataset) {
    let sim = simulate(&SimConfig { n_bb_per_cycle: n_bb, n_tags, n_external: 5, seed, ..SimConfig::default() }).unwrap();
    (sim.library, Dataset::observed(sim.tags))
}

#[test]
fn no_negatives_leaves_dataset_unchanged() {
    let (lib, ds) = data(1, 6, 100);
    assert_eq!(augment_negatives(&ds, &lib, 0, 0, 3).unwrap(), ds);
}

#[test]
fn augmented_records_satisfy_their_predicates() {
    let (lib, ds) = data(2, 8, 200);
    let aug = augment_negatives(&ds, &lib, 40, 30, 5).unwrap();
    assert_eq!(aug.len(), 270);
    assert_eq!(&aug.records[..200], &ds.records[..]);
    let mut triples = HashSet::new();
    for r in &aug.records {
        assert!(triples.insert(r.tag.bb.clone()), "duplicate triple");
        let c = &r.tag.counts;
        match r.provenance {
            Provenance::Observed => {}
            Provenance::NtcOnly => assert!(c.c_target == 0 && c.c_ntc > 0),
            Provenance::Unsequenced => assert!(c.c_target == 0 && c.c_ntc == 0 && c.c_promiscuity == 0.0),
        }
        lib.validate_tag(&r.tag).unwrap();
    }
    assert_eq!(aug.records.iter().filter(|r| r.provenance == Provenance::NtcOnly).count(), 40);
}

#[test]
fn exhausted_pool_is_reported() {
    let (lib, ds) = data(3, 4, 60);
    match augment_negatives(&ds, &lib, 3, 2, 0) {
        Err(DataError::PoolExhausted { requested: 5, available: 4 }) => {}
        other => panic!("{other:?}"),
    }
    assert!(augment_negatives(&ds, &lib, 2, 2, 0).is_ok());
}

#[test]
fn paper_ratio_is_two_parts_per_four() {
    assert_eq!(paper_ratio(20_000), (5_000, 5_000));
}

#[test]
fn split_is_building_block_disjoint() {
    let (_, ds) = data(4, 10, 600);
    let s = split(&ds, 0.2, 9).unwrap();
    assert_eq!(s.heldout_bb_ids.len(), 2);
    assert_eq!(s.train.len() + s.test.len(), ds.len());
    let test: HashSet<&String> = s.test.iter().collect();
    for t in ds.tags() {
        let held = s.heldout_bb_ids.contains(&t.bb[1]);
        assert_eq!(held, test.contains(&t.tag_id));
    }
    assert_eq!(s, split(&ds, 0.2, 9).unwrap());
    assert_ne!(s.heldout_bb_ids, split(&ds, 0.2, 10).unwrap().heldout_bb_ids);
}

#[test]
fn tiny_fraction_still_holds_out_one_block() {
    let (_, ds) = data(5, 10, 300);
    let s = split(&ds, 1e-9, 1).unwrap();
    assert_eq!(s.heldout_bb_ids.len(), 1);
    assert!(!s.test.is_empty());
    let s = split(&ds, 0.999, 1).unwrap();
    assert_eq!(s.heldout_bb_ids.len(), 9);
    assert!(matches!(split(&ds, 0.0, 1), Err(DataError::InvalidFraction(_))));
}

#[test]
fn split_file_round_trips() {
    let (_, ds) = data(6, 6, 100);
    let s = split(&ds, 0.3, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("split.tsv");
    write_split(&p, &s).unwrap();
    assert_eq!(read_split(&p).unwrap(), s);
}

#[test]
fn examples_follow_the_arm() {
    let (lib, ds) = data(7, 5, 40);
    let tags: Vec<&LibraryTag> = ds.tags().collect();
    let tri = build_examples(&lib, tags.iter().copied(), Arm::TriOnly, false).unwrap();
    assert!(tri.iter().all(|e| e.products.len() == 1 && e.products[0].graph.is_none()));
    let full = build_examples(&lib, tags.iter().copied(), Arm::Full, true).unwrap();
    assert!(full.iter().all(|e| e.products.len() == 4 && e.products.iter().all(|p| p.graph.is_some())));
    let p: f64 = full[0].p_lab.iter().sum();
    assert!(p > 0.0 && p <= 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn sides_never_overlap(seed in 0u64..1000, frac in 0.05f64..0.95) {
        let (_, ds) = data(11, 6, 120);
        let s = split(&ds, frac, seed).unwrap();
        let train: HashSet<&String> = s.train.iter().collect();
        prop_assert!(s.test.iter().all(|t| !train.contains(t)));
    }
}
