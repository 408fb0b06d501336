//! Dataset assembly: negative augmentation, building-block-disjoint
//! splitting, and conversion of tags into model examples.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::countmodel::{Arm, TagExample};
use crate::library::{
    enumerate_with, read_text, tsv_records, write_text, CountRecord, EnumerateOptions, Library, LibraryError, LibraryTag,
    ProductKind,
};
use crate::molgraph::MolGraphError;
use crate::predictors::{GraphTensors, ProductInput};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("requested {requested} negatives but only {available} unused building-block triples exist")]
    PoolExhausted { requested: usize, available: usize },
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("holdout fraction must lie strictly between 0 and 1 (got {0})")]
    InvalidFraction(f64),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Graph(#[from] MolGraphError),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    Observed,
    /// Bound only the no-target control.
    NtcOnly,
    /// Present in the starting library but never sequenced after selection.
    Unsequenced,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataRecord {
    pub tag: LibraryTag,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<DataRecord>,
}

impl Dataset {
    pub fn observed(tags: Vec<LibraryTag>) -> Self {
        Self { records: tags.into_iter().map(|tag| DataRecord { tag, provenance: Provenance::Observed }).collect() }
    }

    pub fn tags(&self) -> impl Iterator<Item = &LibraryTag> {
        self.records.iter().map(|r| &r.tag)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Negative counts matching two negatives of each kind per four observed
/// records, the dataset's published proportions.
pub fn paper_ratio(n_observed: usize) -> (usize, usize) {
    let each = (n_observed as f64 * 0.25).round() as usize;
    (each, each)
}

fn pick<R: Rng, T: Copy>(rng: &mut R, pool: &[T], fallback: T) -> T {
    pool.choose(rng).copied().unwrap_or(fallback)
}

/// Appends `n_ntc_only` NTC-only and `n_unsequenced` unsequenced records on
/// building-block triples that no existing record uses. Nuisance counts are
/// resampled from the observed records.
pub fn augment_negatives(
    dataset: &Dataset,
    library: &Library,
    n_ntc_only: usize,
    n_unsequenced: usize,
    seed: u64,
) -> Result<Dataset, DataError> {
    let mut out = dataset.clone();
    let requested = n_ntc_only + n_unsequenced;
    if requested == 0 {
        return Ok(out);
    }
    let cycles: Vec<Vec<&str>> = (1..=3u8).map(|c| library.cycle_blocks(c).map(|b| b.id.as_str()).collect()).collect();
    let sizes = [cycles[0].len(), cycles[1].len(), cycles[2].len()];
    let space = sizes.iter().product::<usize>();
    let used: HashSet<[&str; 3]> = dataset.tags().map(|t| [t.bb[0].as_str(), t.bb[1].as_str(), t.bb[2].as_str()]).collect();
    let decode = |code: usize| -> [&str; 3] {
        [cycles[0][code / (sizes[1] * sizes[2])], cycles[1][(code / sizes[2]) % sizes[1]], cycles[2][code % sizes[2]]]
    };
    let used_in_space = (0..space).filter(|&c| used.contains(&decode(c))).count();
    let available = space - used_in_space;
    if requested > available {
        return Err(DataError::PoolExhausted { requested, available });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free: Vec<usize> = (0..space).filter(|&c| !used.contains(&decode(c))).collect();
    let chosen: Vec<usize> = sample(&mut rng, free.len(), requested).into_iter().map(|i| free[i]).collect();

    let observed: Vec<&CountRecord> = dataset.records.iter().filter(|r| r.provenance == Provenance::Observed).map(|r| &r.tag.counts).collect();
    let ntc_pos: Vec<u64> = observed.iter().map(|c| c.c_ntc).filter(|&c| c > 0).collect();
    let dls: Vec<u64> = observed.iter().map(|c| c.c_dls).collect();
    let prom: Vec<f64> = observed.iter().map(|c| c.c_promiscuity).collect();

    for (k, code) in chosen.into_iter().enumerate() {
        let bb = decode(code).map(str::to_string);
        let c_dls = pick(&mut rng, &dls, 1);
        let (tag_id, counts, provenance) = if k < n_ntc_only {
            let c_ntc = pick(&mut rng, &ntc_pos, 1);
            let c_prom = pick(&mut rng, &prom, 0.0);
            (format!("N{k:06}"), CountRecord::new(0, c_ntc, c_dls, c_prom)?, Provenance::NtcOnly)
        } else {
            (format!("U{:06}", k - n_ntc_only), CountRecord::new(0, 0, c_dls, 0.0)?, Provenance::Unsequenced)
        };
        out.records.push(DataRecord { tag: LibraryTag { tag_id, bb, counts }, provenance });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub heldout_bb_ids: BTreeSet<String>,
    pub seed: u64,
    pub holdout_fraction: f64,
}

/// Holds out a random `holdout_fraction` of the cycle-2 building blocks
/// (at least one, never all); every tag using one of them goes to test.
pub fn split(dataset: &Dataset, holdout_fraction: f64, seed: u64) -> Result<DatasetSplit, DataError> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(DataError::InvalidFraction(holdout_fraction));
    }
    let blocks: Vec<&str> = dataset.tags().map(|t| t.bb[1].as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    if blocks.len() < 2 {
        return Err(DataError::DegenerateSplit(format!("need at least 2 cycle-2 building blocks, found {}", blocks.len())));
    }
    let n_hold = ((holdout_fraction * blocks.len() as f64).round() as usize).clamp(1, blocks.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heldout_bb_ids: BTreeSet<String> = sample(&mut rng, blocks.len(), n_hold).into_iter().map(|i| blocks[i].to_string()).collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for t in dataset.tags() {
        if heldout_bb_ids.contains(&t.bb[1]) {
            test.push(t.tag_id.clone());
        } else {
            train.push(t.tag_id.clone());
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(DataError::DegenerateSplit("one side of the split is empty".into()));
    }
    Ok(DatasetSplit { train, test, heldout_bb_ids, seed, holdout_fraction })
}

pub fn format_split(s: &DatasetSplit) -> String {
    let mut out = String::new();
    writeln!(out, "# seed {}", s.seed).unwrap();
    writeln!(out, "# holdout_fraction {}", s.holdout_fraction).unwrap();
    writeln!(out, "# heldout {}", s.heldout_bb_ids.iter().cloned().collect::<Vec<_>>().join(",")).unwrap();
    for id in &s.train {
        writeln!(out, "{id}\ttrain").unwrap();
    }
    for id in &s.test {
        writeln!(out, "{id}\ttest").unwrap();
    }
    out
}

pub fn write_split(path: &Path, s: &DatasetSplit) -> Result<(), DataError> {
    Ok(write_text(path, &format_split(s))?)
}

pub fn read_split(path: &Path) -> Result<DatasetSplit, DataError> {
    let text = read_text(path)?;
    let src = path.display().to_string();
    let perr = |line: usize, msg: String| DataError::Parse { path: src.clone(), line, msg };
    let mut s = DatasetSplit { train: vec![], test: vec![], heldout_bb_ids: BTreeSet::new(), seed: 0, holdout_fraction: 0.0 };
    for (i, l) in text.lines().enumerate() {
        let Some(rest) = l.strip_prefix("# ") else { continue };
        match rest.split_once(' ') {
            Some(("seed", v)) => s.seed = v.parse().map_err(|_| perr(i + 1, "bad seed".into()))?,
            Some(("holdout_fraction", v)) => s.holdout_fraction = v.parse().map_err(|_| perr(i + 1, "bad fraction".into()))?,
            Some(("heldout", v)) => s.heldout_bb_ids = v.split(',').filter(|x| !x.is_empty()).map(str::to_string).collect(),
            _ => {}
        }
    }
    for (line, f) in tsv_records(&text) {
        match f[..] {
            [id, "train"] => s.train.push(id.to_string()),
            [id, "test"] => s.test.push(id.to_string()),
            _ => return Err(perr(line, "expected `tag_id<TAB>train|test`".into())),
        }
    }
    Ok(s)
}

/// Converts tags into model examples for `arm`. Graphs are assembled and
/// featurized only when `with_graphs` is set; shared products reuse one
/// featurization.
pub fn build_examples<'a, I>(library: &Library, tags: I, arm: Arm, with_graphs: bool) -> Result<Vec<TagExample>, DataError>
where
    I: IntoIterator<Item = &'a LibraryTag>,
{
    let opts = EnumerateOptions { kinds: arm.kinds().to_vec(), assemble_graphs: false };
    let mut cache: HashMap<(ProductKind, Vec<String>), Arc<GraphTensors>> = HashMap::new();
    let mut out = Vec::new();
    for tag in tags {
        let mix = enumerate_with(library, tag, &opts)?;
        let mut products = Vec::with_capacity(mix.products.len());
        let mut p_lab = Vec::with_capacity(mix.products.len());
        for p in mix.products {
            let graph = if with_graphs {
                let key = (p.kind, p.bb_ids.clone());
                let g = match cache.get(&key) {
                    Some(g) => g.clone(),
                    None => {
                        let frags: Vec<_> =
                            p.bb_ids.iter().map(|id| library.get(id).map(|b| &b.fragment)).collect::<Result<_, _>>()?;
                        let g = Arc::new(GraphTensors::from_graph(&crate::molgraph::assemble(&frags)?)?);
                        cache.insert(key, g.clone());
                        g
                    }
                };
                Some(g)
            } else {
                None
            };
            p_lab.push(p.p_lab);
            products.push(ProductInput { kind: p.kind, bb_ids: p.bb_ids, graph });
        }
        out.push(TagExample { tag_id: tag.tag_id.clone(), counts: tag.counts.clone(), products, p_lab });
    }
    Ok(out)
}

/// Tags of `dataset` in the order listed by `ids`.
pub fn select<'a>(dataset: &'a Dataset, ids: &[String]) -> Vec<&'a LibraryTag> {
    let by_id: HashMap<&str, &LibraryTag> = dataset.tags().map(|t| (t.tag_id.as_str(), t)).collect();
    ids.iter().filter_map(|id| by_id.get(id.as_str()).copied()).collect()
}

#[cfg(test)]
mod tests;
