//! Simulation output files.
//!
//! `ground_truth.tsv`: `# key value` header lines with the generating
//! parameters, then `kind<TAB>bb_ids<TAB>r_target<TAB>r_ntc` for every
//! trisynthon and disynthon in the tag list with a non-zero enrichment.
//! `true_yields.tsv`: `id<TAB>true_yield<TAB>reported_yield`.
//! `external.tsv`: `id<TAB>is_binder<TAB>bb_ids<TAB>graph`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{SimError, Simulation};
use crate::countmodel::{Arm, CountModelParams};
use crate::evaluation::ExternalMolecule;
use crate::library::{format_fragments, format_tags, read_text, tsv_records, write_text, ProductKind};
use crate::molgraph::{format_graph, parse_graph};

pub const FRAGMENTS: &str = "fragments.tsv";
pub const TAGS: &str = "tags.tsv";
pub const GROUND_TRUTH: &str = "ground_truth.tsv";
pub const TRUE_YIELDS: &str = "true_yields.tsv";
pub const EXTERNAL: &str = "external.tsv";

fn join_f64(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn format_ground_truth(sim: &Simulation) -> String {
    let t = &sim.truth;
    let mut out = String::new();
    writeln!(out, "# alpha_target {}", t.alpha_target).unwrap();
    writeln!(out, "# alpha_ntc {}", t.alpha_ntc).unwrap();
    writeln!(out, "# beta_target {}", join_f64(&t.beta_target)).unwrap();
    writeln!(out, "# beta_ntc {}", join_f64(&t.beta_ntc)).unwrap();
    let mut rows = BTreeSet::new();
    for tag in &sim.tags {
        for &kind in Arm::Full.kinds() {
            let ids: Vec<String> = kind.cycles().iter().map(|&c| tag.bb[c].clone()).collect();
            let r = t.enrichment(&ids);
            if r != [0.0, 0.0] {
                rows.insert((kind, ids.join(","), r[0].to_bits(), r[1].to_bits()));
            }
        }
    }
    for (kind, ids, rt, rn) in rows {
        writeln!(out, "{kind}\t{ids}\t{}\t{}", f64::from_bits(rt), f64::from_bits(rn)).unwrap();
    }
    out
}

pub fn write_outputs(dir: &Path, sim: &Simulation) -> Result<(), SimError> {
    std::fs::create_dir_all(dir).map_err(|source| SimError::Io { path: dir.display().to_string(), source })?;
    write_text(&dir.join(FRAGMENTS), &format_fragments(&sim.library))?;
    write_text(&dir.join(TAGS), &format_tags(&sim.tags))?;
    write_text(&dir.join(GROUND_TRUTH), &format_ground_truth(sim))?;

    let mut yields = String::new();
    for (id, y) in &sim.truth.true_yields {
        writeln!(yields, "{id}\t{y}\t{}", sim.truth.reported_yields[id]).unwrap();
    }
    write_text(&dir.join(TRUE_YIELDS), &yields)?;

    let mut ext = String::new();
    for m in &sim.external {
        let ids = m.bb_ids.as_deref().unwrap_or_default().join(",");
        writeln!(ext, "{}\t{}\t{ids}\t{}", m.id, u8::from(m.is_binder), format_graph(&m.graph)).unwrap();
    }
    write_text(&dir.join(EXTERNAL), &ext)?;
    Ok(())
}

/// Parsed `ground_truth.tsv`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthFile {
    pub alpha_target: f64,
    pub alpha_ntc: f64,
    pub beta_target: [f64; 4],
    pub beta_ntc: [f64; 3],
    pub products: BTreeMap<(ProductKind, Vec<String>), [f64; 2]>,
}

impl GroundTruthFile {
    /// Listed enrichment, zero for unlisted products.
    pub fn enrichment(&self, kind: ProductKind, bb_ids: &[String]) -> [f64; 2] {
        self.products.get(&(kind, bb_ids.to_vec())).copied().unwrap_or([0.0, 0.0])
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

fn parse_floats<const N: usize>(s: &str) -> Option<[f64; N]> {
    let v: Vec<f64> = s.split(',').map(|x| x.parse().ok()).collect::<Option<_>>()?;
    v.try_into().ok()
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruthFile, SimError> {
    let text = read_text(path)?;
    let src = path.display().to_string();
    let perr = |line: usize, msg: String| SimError::Parse { path: src.clone(), line, msg };
    let mut header: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, l) in text.lines().enumerate() {
        if let Some(rest) = l.strip_prefix("# ") {
            let (k, v) = rest.split_once(' ').ok_or_else(|| perr(i + 1, "header needs a key and value".into()))?;
            header.insert(k, v);
        }
    }
    let get = |k: &str| header.get(k).copied().ok_or_else(|| perr(1, format!("missing header `{k}`")));
    let num = |k: &str| -> Result<f64, SimError> { get(k)?.parse().map_err(|_| perr(1, format!("bad header `{k}`"))) };
    let gt = GroundTruthFile {
        alpha_target: num("alpha_target")?,
        alpha_ntc: num("alpha_ntc")?,
        beta_target: parse_floats(get("beta_target")?).ok_or_else(|| perr(1, "bad beta_target".into()))?,
        beta_ntc: parse_floats(get("beta_ntc")?).ok_or_else(|| perr(1, "bad beta_ntc".into()))?,
        products: BTreeMap::new(),
    };
    let mut gt = gt;
    for (line, f) in tsv_records(&text) {
        if f.len() != 4 {
            return Err(perr(line, format!("expected 4 fields, found {}", f.len())));
        }
        let kind: ProductKind = f[0].parse().map_err(|e| perr(line, e))?;
        let ids = f[1].split(',').map(str::to_string).collect();
        let r = [f[2], f[3]].map(|x| x.parse::<f64>());
        match r {
            [Ok(a), Ok(b)] => {
                gt.products.insert((kind, ids), [a, b]);
            }
            _ => return Err(perr(line, "bad enrichment value".into())),
        }
    }
    Ok(gt)
}

pub fn read_external(path: &Path) -> Result<Vec<ExternalMolecule>, SimError> {
    let text = read_text(path)?;
    let src = path.display().to_string();
    let perr = |line: usize, msg: String| SimError::Parse { path: src.clone(), line, msg };
    tsv_records(&text)
        .map(|(line, f)| {
            if f.len() != 4 {
                return Err(perr(line, format!("expected 4 fields, found {}", f.len())));
            }
            let is_binder = match f[1] {
                "1" => true,
                "0" => false,
                other => return Err(perr(line, format!("is_binder must be 0 or 1, found `{other}`"))),
            };
            let bb_ids = if f[2].is_empty() { None } else { Some(f[2].split(',').map(str::to_string).collect()) };
            let graph = parse_graph(f[3]).map_err(|e| perr(line, e.to_string()))?;
            Ok(ExternalMolecule { id: f[0].to_string(), graph, bb_ids, is_binder })
        })
        .collect()
}
