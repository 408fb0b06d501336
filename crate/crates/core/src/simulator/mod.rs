//! Synthetic DEL screens with known ground truth.
//!
//! Binding is driven by a sparse set of building-block pairs (and optionally
//! triples). A product's true enrichment is the sum of the effects of every
//! binder pair or triple it contains, so a trisynthon inherits the effects
//! of its three disynthons. Counts are drawn from the same mixture model the
//! count model fits, using the true yields.

mod files;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::countmodel::{predict_tag, Arm, CountModelParams, Covariates, ProportionMode};
use crate::library::{
    enumerate_with, BuildingBlock, CountRecord, EnumerateOptions, Library, LibraryError, LibraryTag,
};
use crate::molgraph::{assemble, AtomRecord, Bond, BondOrder, Element, Fragment, MolGraph};
use crate::evaluation::ExternalMolecule;
use crate::predictors::PredictorOutput;

pub use files::{
    format_ground_truth, read_external, read_ground_truth, write_outputs, GroundTruthFile, EXTERNAL, FRAGMENTS, GROUND_TRUTH,
    TAGS, TRUE_YIELDS,
};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: `{key}` {msg}")]
    ConfigInvalid { key: &'static str, msg: String },
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
}

/// Derives an independent seed for a named stage from the run seed.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    // FNV-1a over the stage name, folded into the seed and finished with splitmix64
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent RNG stream `index` of a stage; results do not depend on
/// the order in which streams are consumed.
pub fn stream_rng(stage_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed);
    rng.set_stream(index);
    rng
}

/// Negative-binomial draw with mean `mu` and variance `mu + alpha·mu²`,
/// as a gamma-mixed Poisson.
pub fn nb_sample<R: Rng + ?Sized>(mu: f64, alpha: f64, rng: &mut R) -> u64 {
    assert!(mu > 0.0 && alpha > 0.0, "nb_sample needs mu > 0 and alpha > 0 (got {mu}, {alpha})");
    let shape = 1.0 / alpha;
    let rate = Gamma::new(shape, alpha * mu).expect("valid gamma parameters").sample(rng);
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive Poisson rate").sample(rng) as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum YieldDistribution {
    Uniform(f64, f64),
    Fixed(f64),
}

impl fmt::Display for YieldDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YieldDistribution::Uniform(a, b) => write!(f, "uniform({a},{b})"),
            YieldDistribution::Fixed(v) => write!(f, "fixed({v})"),
        }
    }
}

impl FromStr for YieldDistribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let args = |prefix: &str| -> Option<Vec<f64>> {
            let inner = s.strip_prefix(prefix)?.strip_suffix(')')?;
            inner.split(',').map(|x| x.trim().parse().ok()).collect()
        };
        let d = if let Some(v) = args("uniform(") {
            match v[..] {
                [a, b] => YieldDistribution::Uniform(a, b),
                _ => return Err(format!("`{s}`: uniform takes two bounds")),
            }
        } else if let Some(v) = args("fixed(") {
            match v[..] {
                [a] => YieldDistribution::Fixed(a),
                _ => return Err(format!("`{s}`: fixed takes one value")),
            }
        } else {
            return Err(format!("`{s}`: expected uniform(a,b) or fixed(v)"));
        };
        d.validate()?;
        Ok(d)
    }
}

impl TryFrom<String> for YieldDistribution {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<YieldDistribution> for String {
    fn from(d: YieldDistribution) -> Self {
        d.to_string()
    }
}

impl YieldDistribution {
    fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            YieldDistribution::Uniform(a, b) => (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) && a < b,
            YieldDistribution::Fixed(v) => (0.0..=1.0).contains(&v),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("`{self}` must lie within [0, 1] with a < b"))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            YieldDistribution::Uniform(a, b) => rng.gen_range(a..b),
            YieldDistribution::Fixed(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_bb_per_cycle: usize,
    pub n_tags: usize,
    pub yield_distribution: YieldDistribution,
    /// Chance that a building-block pair from two different cycles binds the target.
    pub binder_pair_fraction: f64,
    /// Fraction of each cycle's blocks able to take part in a binding pair;
    /// binding pairs are drawn among these. 1 spreads them uniformly. When the
    /// privileged pairs are too few for the requested pair fraction, all of
    /// them bind.
    pub privileged_fraction: f64,
    /// Chance that a building-block triple carries its own extra effect.
    pub binder_triple_fraction: f64,
    pub enrichment_scale: f64,
    pub ntc_pair_fraction: f64,
    pub ntc_scale: f64,
    pub noise_on_reported_yields: f64,
    pub alpha_target: f64,
    pub alpha_ntc: f64,
    /// `[β_ntc, β_dls, β_prom, β_c]`
    pub beta_target: [f64; 4],
    /// `[β'_dls, β'_prom, β'_c]`
    pub beta_ntc: [f64; 3],
    /// Median pre-selection abundance of a tag.
    pub dls_median: f64,
    pub n_external: usize,
    /// Fraction of the external set built around known binder pairs.
    pub external_binder_fraction: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_bb_per_cycle: 50,
            n_tags: 20_000,
            yield_distribution: YieldDistribution::Uniform(0.4, 0.95),
            binder_pair_fraction: 0.02,
            privileged_fraction: 0.15,
            binder_triple_fraction: 0.0,
            enrichment_scale: 30.0,
            ntc_pair_fraction: 0.01,
            ntc_scale: 3.0,
            noise_on_reported_yields: 0.1,
            alpha_target: 0.5,
            alpha_ntc: 0.5,
            beta_target: [0.5, 0.8, 0.3, -1.5],
            beta_ntc: [0.8, 0.3, -2.0],
            dls_median: 20.0,
            n_external: 150,
            external_binder_fraction: 0.3,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |key: &'static str, msg: String| Err(SimError::ConfigInvalid { key, msg });
        if self.n_bb_per_cycle < 2 {
            return bad("n_bb_per_cycle", format!("must be at least 2 (got {})", self.n_bb_per_cycle));
        }
        let space = self.n_bb_per_cycle.pow(3);
        if self.n_tags == 0 || self.n_tags > space {
            return bad("n_tags", format!("must be in 1..={space} (got {})", self.n_tags));
        }
        if let Err(m) = self.yield_distribution.validate() {
            return bad("yield_distribution", m);
        }
        for (key, v) in [
            ("binder_pair_fraction", self.binder_pair_fraction),
            ("binder_triple_fraction", self.binder_triple_fraction),
            ("ntc_pair_fraction", self.ntc_pair_fraction),
            ("external_binder_fraction", self.external_binder_fraction),
            ("privileged_fraction", self.privileged_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(key, format!("must be in [0, 1] (got {v})"));
            }
        }
        for (key, v) in [
            ("enrichment_scale", self.enrichment_scale),
            ("ntc_scale", self.ntc_scale),
            ("noise_on_reported_yields", self.noise_on_reported_yields),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(key, format!("must be non-negative (got {v})"));
            }
        }
        for (key, v) in [("alpha_target", self.alpha_target), ("alpha_ntc", self.alpha_ntc), ("dls_median", self.dls_median)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(key, format!("must be positive (got {v})"));
            }
        }
        if self.beta_target.iter().chain(&self.beta_ntc).any(|b| !b.is_finite()) {
            return bad("beta_target", "weights must be finite".into());
        }
        Ok(())
    }

    /// Privileged blocks per cycle (at least one).
    pub fn privileged_count(&self) -> usize {
        ((self.privileged_fraction * self.n_bb_per_cycle as f64).round() as usize).clamp(1, self.n_bb_per_cycle)
    }

    /// Count-model parameters that generated the data.
    pub fn true_params(&self) -> CountModelParams {
        CountModelParams {
            beta_target: self.beta_target,
            beta_ntc: self.beta_ntc,
            alpha_target: self.alpha_target,
            alpha_ntc: self.alpha_ntc,
            gamma: 0.0,
            proportion_mode: ProportionMode::LabFixed,
            arm: Arm::Full,
            covariates: Covariates::Log1p,
        }
    }
}

/// Sparse binding effects, `[target, ntc]` per key. Keys hold building-block
/// ids in cycle order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub true_yields: BTreeMap<String, f64>,
    pub reported_yields: BTreeMap<String, f64>,
    pub pair_effects: BTreeMap<(String, String), [f64; 2]>,
    pub triple_effects: BTreeMap<(String, String, String), [f64; 2]>,
    pub beta_target: [f64; 4],
    pub beta_ntc: [f64; 3],
    pub alpha_target: f64,
    pub alpha_ntc: f64,
}

impl GroundTruth {
    /// True `[R_target, R_ntc]` of a product given its block ids in cycle order.
    pub fn enrichment(&self, bb_ids: &[String]) -> [f64; 2] {
        let mut r = [0.0; 2];
        let mut add = |e: Option<&[f64; 2]>| {
            if let Some(e) = e {
                r[0] += e[0];
                r[1] += e[1];
            }
        };
        for i in 0..bb_ids.len() {
            for j in i + 1..bb_ids.len() {
                add(self.pair_effects.get(&(bb_ids[i].clone(), bb_ids[j].clone())));
            }
        }
        if let [a, b, c] = bb_ids {
            add(self.triple_effects.get(&(a.clone(), b.clone(), c.clone())));
        }
        r
    }

    pub fn is_target_binder(&self, bb_ids: &[String]) -> bool {
        self.enrichment(bb_ids)[0] > 0.0
    }
}

/// Everything a simulation produces.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub config: SimConfig,
    /// Library with reported (noisy) yields, as an experimenter sees it.
    pub library: Library,
    pub tags: Vec<LibraryTag>,
    pub truth: GroundTruth,
    /// Per tag `[μ_target, μ_ntc]` under the true parameters.
    pub tag_means: Vec<[f64; 2]>,
    pub external: Vec<ExternalMolecule>,
}

const ELEMENTS: [(Element, u32); 6] =
    [(Element::C, 60), (Element::N, 15), (Element::O, 12), (Element::S, 5), (Element::F, 4), (Element::Cl, 4)];

fn random_element<R: Rng>(rng: &mut R) -> Element {
    let total: u32 = ELEMENTS.iter().map(|e| e.1).sum();
    let mut x = rng.gen_range(0..total);
    for &(e, w) in &ELEMENTS {
        if x < w {
            return e;
        }
        x -= w;
    }
    Element::C
}

/// A random connected fragment of 3–8 heavy atoms with `arity` `*` atoms.
pub fn random_fragment<R: Rng>(arity: usize, rng: &mut R) -> Fragment {
    let n = rng.gen_range(3..=8);
    let mut atoms: Vec<AtomRecord> = (0..n).map(|_| AtomRecord::new(random_element(rng))).collect();
    let mut bonds = Vec::new();
    for j in 1..n {
        let order = if rng.gen_bool(0.8) { BondOrder::Single } else { BondOrder::Double };
        bonds.push(Bond { i: rng.gen_range(0..j), j, order });
    }
    if n >= 5 && rng.gen_bool(0.4) {
        // close a ring over the first atoms of the chain
        let ring = rng.gen_range(3..n.min(6));
        let path_ok = (1..ring).all(|k| bonds.iter().any(|b| (b.i, b.j) == (k - 1, k)));
        if path_ok && !bonds.iter().any(|b| (b.i, b.j) == (0, ring - 1)) {
            bonds.push(Bond { i: 0, j: ring - 1, order: BondOrder::Single });
            for a in atoms.iter_mut().take(ring) {
                a.in_ring = true;
            }
        }
    }
    let anchors: Vec<usize> = sample(rng, n, arity.min(n)).into_vec();
    for (k, &a) in anchors.iter().enumerate() {
        atoms.push(AtomRecord::new(Element::Attach));
        bonds.push(Bond { i: a, j: n + k, order: BondOrder::Single });
    }
    let g = MolGraph::new(atoms, bonds).expect("generated graph is valid");
    Fragment::from_graph(g).expect("generated attachments are valid")
}

pub fn bb_id(cycle: u8, i: usize) -> String {
    format!("bb{cycle}_{i:03}")
}

fn arity_of(cycle: u8) -> usize {
    if cycle == 2 {
        2
    } else {
        1
    }
}

fn triple_ids(n: usize, code: usize) -> [String; 3] {
    [bb_id(1, code / (n * n)), bb_id(2, (code / n) % n), bb_id(3, code % n)]
}

pub fn simulate(cfg: &SimConfig) -> Result<Simulation, SimError> {
    cfg.validate()?;
    let n = cfg.n_bb_per_cycle;

    // building blocks and yields
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "blocks"));
    let noise = Normal::new(0.0, cfg.noise_on_reported_yields.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut truth = GroundTruth {
        beta_target: cfg.beta_target,
        beta_ntc: cfg.beta_ntc,
        alpha_target: cfg.alpha_target,
        alpha_ntc: cfg.alpha_ntc,
        ..GroundTruth::default()
    };
    let mut true_blocks = Vec::with_capacity(3 * n);
    let mut reported_blocks = Vec::with_capacity(3 * n);
    for cycle in 1..=3u8 {
        for i in 0..n {
            let id = bb_id(cycle, i);
            let frag = random_fragment(arity_of(cycle), &mut rng);
            let y = cfg.yield_distribution.sample(&mut rng);
            let eps = noise.sample(&mut rng);
            let reported = if cfg.noise_on_reported_yields > 0.0 { (y + eps).clamp(0.0, 1.0) } else { y };
            truth.true_yields.insert(id.clone(), y);
            truth.reported_yields.insert(id.clone(), reported);
            true_blocks.push(BuildingBlock::new(id.clone(), cycle, y, frag.clone())?);
            reported_blocks.push(BuildingBlock::new(id, cycle, reported, frag)?);
        }
    }
    let true_library = Library::new(true_blocks)?;
    let library = Library::new(reported_blocks)?;

    // sparse binding effects among privileged blocks
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "effects"));
    let k = cfg.privileged_count();
    let privileged = |rng: &mut ChaCha8Rng| -> Vec<Vec<bool>> {
        (0..3)
            .map(|_| {
                let mut mask = vec![false; n];
                sample(rng, n, k).into_iter().for_each(|i| mask[i] = true);
                mask
            })
            .collect()
    };
    let (priv_t, priv_n) = (privileged(&mut rng), privileged(&mut rng));
    let share = (n * n) as f64 / (k * k) as f64;
    let (p_t, p_n) = ((cfg.binder_pair_fraction * share).min(1.0), (cfg.ntc_pair_fraction * share).min(1.0));
    for (ca, cb) in [(1u8, 2u8), (1, 3), (2, 3)] {
        let (a, b) = (ca as usize - 1, cb as usize - 1);
        for i in 0..n {
            for j in 0..n {
                let t = rng.gen_bool(if priv_t[a][i] && priv_t[b][j] { p_t } else { 0.0 });
                let t_eff = cfg.enrichment_scale * rng.gen_range(0.5..1.5);
                let c = rng.gen_bool(if priv_n[a][i] && priv_n[b][j] { p_n } else { 0.0 });
                let c_eff = cfg.ntc_scale * rng.gen_range(0.5..1.5);
                if t || c {
                    let e = [if t { t_eff } else { 0.0 }, if c { c_eff } else { 0.0 }];
                    truth.pair_effects.insert((bb_id(ca, i), bb_id(cb, j)), e);
                }
            }
        }
    }
    if cfg.binder_triple_fraction > 0.0 {
        let k = ((n * n * n) as f64 * cfg.binder_triple_fraction).round() as usize;
        for code in sample(&mut rng, n * n * n, k).into_iter() {
            let [a, b, c] = triple_ids(n, code);
            truth.triple_effects.insert((a, b, c), [cfg.enrichment_scale * rng.gen_range(0.5..1.5), 0.0]);
        }
    }

    // tags: distinct triples
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "tags"));
    let mut codes = sample(&mut rng, n * n * n, cfg.n_tags).into_vec();
    codes.sort_unstable();
    let params = cfg.true_params();
    let count_seed = derive_seed(cfg.seed, "counts");
    let ln_median = cfg.dls_median.ln();
    let opts = EnumerateOptions { kinds: Arm::Full.kinds().to_vec(), assemble_graphs: false };
    let generated: Vec<Result<(LibraryTag, [f64; 2]), SimError>> = codes
        .par_iter()
        .enumerate()
        .map(|(t, &code)| {
            let mut rng = stream_rng(count_seed, t as u64);
            let bb = triple_ids(n, code);
            let abundance = (ln_median + 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal)).exp();
            let c_dls = nb_sample(abundance, 0.1, &mut rng);
            let c_prom = nb_sample(1.0, 1.0, &mut rng) as f64;
            let mut tag = LibraryTag { tag_id: format!("T{t:06}"), bb, counts: CountRecord::new(0, 0, c_dls, c_prom)? };
            let mix = enumerate_with(&true_library, &tag, &opts)?;
            let outputs: Vec<PredictorOutput> = mix
                .products
                .iter()
                .map(|p| {
                    let [rt, rn] = truth.enrichment(&p.bb_ids);
                    PredictorOutput { r_target: rt, r_ntc: rn, p_adjust: None }
                })
                .collect();
            let pred = predict_tag(&mix, &outputs, &tag.counts, &params).expect("full mixture with valid parameters");
            tag.counts.c_target = nb_sample(pred.mu_target, cfg.alpha_target, &mut rng);
            tag.counts.c_ntc = nb_sample(pred.mu_ntc, cfg.alpha_ntc, &mut rng);
            Ok((tag, [pred.mu_target, pred.mu_ntc]))
        })
        .collect();
    let mut tags = Vec::with_capacity(cfg.n_tags);
    let mut tag_means = Vec::with_capacity(cfg.n_tags);
    for g in generated {
        let (tag, mu) = g?;
        tags.push(tag);
        tag_means.push(mu);
    }

    let used: HashSet<usize> = codes.into_iter().collect();
    let external = external_set(cfg, &library, &truth, &used)?;
    Ok(Simulation { config: cfg.clone(), library, tags, truth, tag_means, external })
}

/// Novel triples (absent from the tag list), about `external_binder_fraction`
/// of them built around a known binder pair, labelled by their true
/// trisynthon enrichment.
fn external_set(cfg: &SimConfig, library: &Library, truth: &GroundTruth, used: &HashSet<usize>) -> Result<Vec<ExternalMolecule>, SimError> {
    let n = cfg.n_bb_per_cycle;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "external"));
    let index_of = |id: &str| -> usize { id[4..].parse().expect("simulator id") };
    let binder_pairs: Vec<&(String, String)> = truth.pair_effects.iter().filter(|(_, e)| e[0] > 0.0).map(|(k, _)| k).collect();
    let n_binders = (cfg.n_external as f64 * cfg.external_binder_fraction).round() as usize;
    let space = n * n * n;
    let mut chosen: HashSet<usize> = HashSet::new();
    let mut codes = Vec::with_capacity(cfg.n_external);
    let mut attempts = 0;
    while codes.len() < cfg.n_external && attempts < 100 * cfg.n_external.max(1) + space {
        attempts += 1;
        let code = if codes.len() < n_binders && !binder_pairs.is_empty() {
            let (a, b) = binder_pairs[rng.gen_range(0..binder_pairs.len())];
            let mut slots = [rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)];
            for id in [a, b] {
                let cycle = (id.as_bytes()[2] - b'1') as usize;
                slots[cycle] = index_of(id);
            }
            slots[0] * n * n + slots[1] * n + slots[2]
        } else {
            rng.gen_range(0..space)
        };
        if used.contains(&code) || !chosen.insert(code) {
            continue;
        }
        codes.push(code);
    }
    codes
        .into_iter()
        .enumerate()
        .map(|(k, code)| {
            let bb = triple_ids(n, code);
            let frags: Vec<&Fragment> = bb.iter().map(|id| library.get(id).map(|b| &b.fragment)).collect::<Result<_, _>>()?;
            let graph = assemble(&frags).map_err(LibraryError::from)?;
            Ok(ExternalMolecule {
                id: format!("X{k:04}"),
                is_binder: truth.is_target_binder(&bb),
                bb_ids: Some(bb.to_vec()),
                graph,
            })
        })
        .collect()
}

impl GroundTruth {
    /// `library` with every block's yield replaced by its true yield.
    pub fn true_library(&self, library: &Library) -> Result<Library, LibraryError> {
        let yields: HashMap<String, f64> = self.true_yields.iter().map(|(k, v)| (k.clone(), *v)).collect();
        library.with_yields(&yields)
    }

    pub fn true_params(&self) -> CountModelParams {
        CountModelParams {
            beta_target: self.beta_target,
            beta_ntc: self.beta_ntc,
            alpha_target: self.alpha_target,
            alpha_ntc: self.alpha_ntc,
            ..CountModelParams::default()
        }
    }
}

/// Recomputes a tag's `[μ_target, μ_ntc]` from the ground truth;
/// `true_library` must carry the true yields.
pub fn recompute_means(truth: &GroundTruth, true_library: &Library, tag: &LibraryTag) -> Result<[f64; 2], LibraryError> {
    let opts = EnumerateOptions { kinds: Arm::Full.kinds().to_vec(), assemble_graphs: false };
    let mix = enumerate_with(true_library, tag, &opts)?;
    let outputs: Vec<PredictorOutput> = mix
        .products
        .iter()
        .map(|p| {
            let [rt, rn] = truth.enrichment(&p.bb_ids);
            PredictorOutput { r_target: rt, r_ntc: rn, p_adjust: None }
        })
        .collect();
    let p = predict_tag(&mix, &outputs, &tag.counts, &truth.true_params()).expect("full mixture with valid parameters");
    Ok([p.mu_target, p.mu_ntc])
}

#[cfg(test)]
mod tests;
