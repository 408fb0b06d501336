use super::*;
use crate::library::{format_tags, read_fragments, read_tags};

fn small(seed: u64) -> SimConfig {
    SimConfig { n_bb_per_cycle: 8, n_tags: 300, n_external: 20, binder_pair_fraction: 0.1, privileged_fraction: 1.0, seed, ..SimConfig::default() }
}

fn block_set(keys: impl Iterator<Item = String>) -> HashSet<String> {
    keys.collect()
}

fn moments(xs: &[u64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn nb_sample_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs: Vec<u64> = (0..1_000_000).map(|_| nb_sample(10.0, 0.5, &mut rng)).collect();
    let (mean, var) = moments(&xs);
    assert!((mean - 10.0).abs() < 0.1, "mean {mean}");
    assert!((var - 60.0).abs() < 2.0, "var {var}");
}

#[test]
fn nb_sample_geometric_case() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 200_000;
    let zeros = (0..n).filter(|_| nb_sample(1.0, 1.0, &mut rng) == 0).count();
    assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.005);
}

#[test]
fn nb_sample_poisson_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<u64> = (0..100_000).map(|_| nb_sample(5.0, 1e-6, &mut rng)).collect();
    let (mean, var) = moments(&xs);
    assert!((mean - 5.0).abs() < 0.05, "mean {mean}");
    assert!((var / mean - 1.0).abs() < 0.03, "var {var}");
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_outputs(a.path(), &simulate(&small(5)).unwrap()).unwrap();
    write_outputs(b.path(), &simulate(&small(5)).unwrap()).unwrap();
    for f in [FRAGMENTS, TAGS, GROUND_TRUTH, TRUE_YIELDS, EXTERNAL] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert!(!x.is_empty(), "{f} is empty");
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let c = simulate(&small(6)).unwrap();
    assert_ne!(format_tags(&c.tags), std::fs::read_to_string(a.path().join(TAGS)).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate(&small(9)).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.tags, b.tags);
    assert_eq!(a.tag_means, b.tag_means);
}

#[test]
fn zero_noise_reports_true_yields() {
    let sim = simulate(&SimConfig { noise_on_reported_yields: 0.0, ..small(4) }).unwrap();
    assert_eq!(sim.truth.true_yields, sim.truth.reported_yields);
    for b in sim.library.blocks() {
        assert_eq!(b.yield_, sim.truth.true_yields[&b.id]);
    }
    let noisy = simulate(&small(4)).unwrap();
    assert_ne!(noisy.truth.true_yields, noisy.truth.reported_yields);
    assert!(noisy.truth.reported_yields.values().all(|y| (0.0..=1.0).contains(y)));
}

#[test]
fn means_reproduce_from_ground_truth() {
    let sim = simulate(&small(7)).unwrap();
    let lib = sim.truth.true_library(&sim.library).unwrap();
    for (tag, mu) in sim.tags.iter().zip(&sim.tag_means) {
        let re = recompute_means(&sim.truth, &lib, tag).unwrap();
        assert!((re[0] - mu[0]).abs() <= 1e-12 * mu[0] && (re[1] - mu[1]).abs() <= 1e-12 * mu[1]);
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(&small(8)).unwrap();
    write_outputs(dir.path(), &sim).unwrap();
    assert_eq!(read_tags(&dir.path().join(TAGS)).unwrap(), sim.tags);
    let lib = read_fragments(&dir.path().join(FRAGMENTS)).unwrap();
    assert_eq!(lib.blocks().len(), 24);
    let gt = read_ground_truth(&dir.path().join(GROUND_TRUTH)).unwrap();
    assert_eq!(gt.beta_target, sim.config.beta_target);
    for tag in &sim.tags {
        for &k in Arm::Full.kinds() {
            let ids: Vec<String> = k.cycles().iter().map(|&c| tag.bb[c].clone()).collect();
            assert_eq!(gt.enrichment(k, &ids), sim.truth.enrichment(&ids));
        }
    }
    let ext = read_external(&dir.path().join(EXTERNAL)).unwrap();
    assert_eq!(ext, sim.external);
}

#[test]
fn binders_raise_expected_counts() {
    let sim = simulate(&small(10)).unwrap();
    let lib = sim.truth.true_library(&sim.library).unwrap();
    let blank = GroundTruth { pair_effects: BTreeMap::new(), triple_effects: BTreeMap::new(), ..sim.truth.clone() };
    let mut seen = 0;
    for tag in &sim.tags {
        if sim.truth.is_target_binder(&tag.bb) {
            let with = recompute_means(&sim.truth, &lib, tag).unwrap();
            let without = recompute_means(&blank, &lib, tag).unwrap();
            assert!(with[0] > without[0]);
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn external_set_uses_novel_triples() {
    let sim = simulate(&small(11)).unwrap();
    assert_eq!(sim.external.len(), 20);
    let used: HashSet<Vec<String>> = sim.tags.iter().map(|t| t.bb.to_vec()).collect();
    for m in &sim.external {
        assert!(!used.contains(m.bb_ids.as_ref().unwrap()));
        assert_eq!(m.is_binder, sim.truth.is_target_binder(m.bb_ids.as_ref().unwrap()));
        assert!(!m.graph.has_attachment_atoms());
    }
    assert!(sim.external.iter().any(|m| m.is_binder));
}

#[test]
fn invalid_configs_name_the_key() {
    let cases: [(SimConfig, &str); 4] = [
        (SimConfig { yield_distribution: YieldDistribution::Uniform(0.9, 0.4), ..small(0) }, "yield_distribution"),
        (SimConfig { n_tags: 10_000, ..small(0) }, "n_tags"),
        (SimConfig { binder_pair_fraction: 1.5, ..small(0) }, "binder_pair_fraction"),
        (SimConfig { alpha_target: 0.0, ..small(0) }, "alpha_target"),
    ];
    for (cfg, key) in cases {
        match simulate(&cfg) {
            Err(SimError::ConfigInvalid { key: k, .. }) => assert_eq!(k, key),
            other => panic!("expected ConfigInvalid for {key}, got {other:?}"),
        }
    }
    assert!("uniform(0.9,0.4)".parse::<YieldDistribution>().is_err());
    assert_eq!("uniform(0.4, 0.95)".parse::<YieldDistribution>().unwrap(), YieldDistribution::Uniform(0.4, 0.95));
}

#[test]
fn stage_seeds_differ() {
    assert_ne!(derive_seed(1, "tags"), derive_seed(1, "blocks"));
    assert_ne!(derive_seed(1, "tags"), derive_seed(2, "tags"));
    assert_eq!(derive_seed(1, "tags"), derive_seed(1, "tags"));
}

#[test]
fn fragments_have_requested_arity() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for arity in [1, 2] {
        for _ in 0..50 {
            let f = random_fragment(arity, &mut rng);
            assert_eq!(f.arity(), arity);
            assert!(f.graph().is_connected());
        }
    }
}

#[test]
fn binding_pairs_use_privileged_blocks_only() {
    let cfg = SimConfig { n_bb_per_cycle: 20, n_tags: 500, n_external: 5, binder_pair_fraction: 0.02, ntc_pair_fraction: 0.0, seed: 3, ..SimConfig::default() };
    let k = cfg.privileged_count();
    assert_eq!(k, 3);
    let sim = simulate(&cfg).unwrap();
    let pairs: Vec<&(String, String)> = sim.truth.pair_effects.iter().filter(|(_, e)| e[0] > 0.0).map(|(p, _)| p).collect();
    assert!(!pairs.is_empty());
    for cycle in 1..=3u8 {
        let prefix = format!("bb{cycle}_");
        let blocks = block_set(pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).filter(|id| id.starts_with(&prefix)));
        assert!(blocks.len() <= k, "cycle {cycle}: {blocks:?}");
    }
}
