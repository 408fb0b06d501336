//! Building blocks, DNA tags, and the per-tag product mixture with
//! yield-derived proportions.

mod io;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::molgraph::{assemble, Fragment, MolGraph, MolGraphError};

pub use io::{format_fragments, format_tags, parse_fragments, parse_tags, read_fragments, read_tags, write_fragments, write_tags};
pub(crate) use io::{read_text, tsv_records, write_text};

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("yield {0} outside [0, 1]")]
    YieldOutOfRange(f64),
    #[error("unknown building block `{0}`")]
    UnknownBuildingBlock(String),
    #[error("building block `{id}` is cycle {found}, expected cycle {expected}")]
    CycleMismatch { id: String, expected: u8, found: u8 },
    #[error("duplicate building block id `{0}`")]
    DuplicateId(String),
    #[error("invalid cycle {0}; expected 1, 2 or 3")]
    InvalidCycle(u8),
    #[error("negative or non-finite promiscuity count {0}")]
    InvalidCount(f64),
    #[error(transparent)]
    Graph(#[from] MolGraphError),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuildingBlock {
    pub id: String,
    pub cycle: u8,
    pub yield_: f64,
    pub fragment: Fragment,
}

impl BuildingBlock {
    pub fn new(id: impl Into<String>, cycle: u8, yield_: f64, fragment: Fragment) -> Result<Self, LibraryError> {
        if !(1..=3).contains(&cycle) {
            return Err(LibraryError::InvalidCycle(cycle));
        }
        check_yield(yield_)?;
        Ok(Self { id: id.into(), cycle, yield_, fragment })
    }
}

fn check_yield(y: f64) -> Result<(), LibraryError> {
    if (0.0..=1.0).contains(&y) {
        Ok(())
    } else {
        Err(LibraryError::YieldOutOfRange(y))
    }
}

/// Building blocks indexed by id.
#[derive(Clone, Debug, Default)]
pub struct Library {
    blocks: Vec<BuildingBlock>,
    index: HashMap<String, usize>,
}

impl Library {
    pub fn new(blocks: Vec<BuildingBlock>) -> Result<Self, LibraryError> {
        let mut index = HashMap::with_capacity(blocks.len());
        for (i, b) in blocks.iter().enumerate() {
            if index.insert(b.id.clone(), i).is_some() {
                return Err(LibraryError::DuplicateId(b.id.clone()));
            }
        }
        Ok(Self { blocks, index })
    }

    pub fn blocks(&self) -> &[BuildingBlock] {
        &self.blocks
    }

    pub fn get(&self, id: &str) -> Result<&BuildingBlock, LibraryError> {
        self.index
            .get(id)
            .map(|&i| &self.blocks[i])
            .ok_or_else(|| LibraryError::UnknownBuildingBlock(id.to_string()))
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn cycle_blocks(&self, cycle: u8) -> impl Iterator<Item = &BuildingBlock> {
        self.blocks.iter().filter(move |b| b.cycle == cycle)
    }

    /// Checks that each referenced block exists and sits in its cycle.
    pub fn validate_tag(&self, tag: &LibraryTag) -> Result<[&BuildingBlock; 3], LibraryError> {
        let lookup = |c: usize| -> Result<&BuildingBlock, LibraryError> {
            let id = &tag.bb[c];
            let b = self.get(id)?;
            let expected = c as u8 + 1;
            if b.cycle != expected {
                return Err(LibraryError::CycleMismatch { id: id.clone(), expected, found: b.cycle });
            }
            Ok(b)
        };
        Ok([lookup(0)?, lookup(1)?, lookup(2)?])
    }

    /// Replaces each block's yield, e.g. with true instead of reported values.
    pub fn with_yields(&self, yields: &HashMap<String, f64>) -> Result<Library, LibraryError> {
        let mut blocks = self.blocks.clone();
        for b in &mut blocks {
            if let Some(&y) = yields.get(&b.id) {
                check_yield(y)?;
                b.yield_ = y;
            }
        }
        Library::new(blocks)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountRecord {
    pub c_target: u64,
    pub c_ntc: u64,
    pub c_dls: u64,
    pub c_promiscuity: f64,
}

impl CountRecord {
    pub fn new(c_target: u64, c_ntc: u64, c_dls: u64, c_promiscuity: f64) -> Result<Self, LibraryError> {
        if !(c_promiscuity >= 0.0 && c_promiscuity.is_finite()) {
            return Err(LibraryError::InvalidCount(c_promiscuity));
        }
        Ok(Self { c_target, c_ntc, c_dls, c_promiscuity })
    }
}

/// One DNA barcode: a building block per cycle and its observed counts.
#[derive(Clone, Debug, PartialEq)]
pub struct LibraryTag {
    pub tag_id: String,
    pub bb: [String; 3],
    pub counts: CountRecord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProductKind {
    Tri,
    Di12,
    Di13,
    Di23,
    Mono1,
    Mono2,
    Mono3,
}

impl ProductKind {
    pub const ALL: [ProductKind; 7] = [
        ProductKind::Tri,
        ProductKind::Di12,
        ProductKind::Di13,
        ProductKind::Di23,
        ProductKind::Mono1,
        ProductKind::Mono2,
        ProductKind::Mono3,
    ];
    pub const DISYNTHONS: [ProductKind; 3] = [ProductKind::Di12, ProductKind::Di13, ProductKind::Di23];
    pub const MONOSYNTHONS: [ProductKind; 3] = [ProductKind::Mono1, ProductKind::Mono2, ProductKind::Mono3];

    /// Zero-based cycle positions whose building block is present.
    pub fn cycles(self) -> &'static [usize] {
        match self {
            ProductKind::Tri => &[0, 1, 2],
            ProductKind::Di12 => &[0, 1],
            ProductKind::Di13 => &[0, 2],
            ProductKind::Di23 => &[1, 2],
            ProductKind::Mono1 => &[0],
            ProductKind::Mono2 => &[1],
            ProductKind::Mono3 => &[2],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ProductKind::Tri => "tri",
            ProductKind::Di12 => "di_12",
            ProductKind::Di13 => "di_13",
            ProductKind::Di23 => "di_23",
            ProductKind::Mono1 => "mono_1",
            ProductKind::Mono2 => "mono_2",
            ProductKind::Mono3 => "mono_3",
        }
    }

    pub fn is_disynthon(self) -> bool {
        Self::DISYNTHONS.contains(&self)
    }
}

impl fmt::Display for ProductKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProductKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProductKind::ALL.iter().copied().find(|k| k.name() == s).ok_or_else(|| format!("unknown product kind `{s}`"))
    }
}

/// Proportions of all 2³ success/failure outcomes of a three-cycle synthesis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proportions {
    by_kind: [f64; 7],
    /// All three cycles failed.
    pub none: f64,
}

impl Proportions {
    pub fn get(&self, kind: ProductKind) -> f64 {
        self.by_kind[kind.index()]
    }

    pub fn total(&self) -> f64 {
        self.by_kind.iter().sum::<f64>() + self.none
    }
}

/// Each cycle succeeds independently with its yield; an outcome's proportion
/// is the product of `y` over succeeded and `1 − y` over failed cycles.
pub fn yield_proportions(y1: f64, y2: f64, y3: f64) -> Result<Proportions, LibraryError> {
    let y = [y1, y2, y3];
    for &v in &y {
        check_yield(v)?;
    }
    let outcome = |present: &[usize]| -> f64 {
        (0..3).map(|c| if present.contains(&c) { y[c] } else { 1.0 - y[c] }).product()
    };
    let mut by_kind = [0.0; 7];
    for k in ProductKind::ALL {
        by_kind[k.index()] = outcome(k.cycles());
    }
    Ok(Proportions { by_kind, none: outcome(&[]) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Product {
    pub kind: ProductKind,
    /// Building block ids in cycle order.
    pub bb_ids: Vec<String>,
    /// Assembled structure; absent when enumeration skipped graph assembly.
    pub graph: Option<MolGraph>,
    pub p_lab: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductMixture {
    pub products: Vec<Product>,
}

impl ProductMixture {
    pub fn get(&self, kind: ProductKind) -> Option<&Product> {
        self.products.iter().find(|p| p.kind == kind)
    }

    pub fn total_proportion(&self) -> f64 {
        self.products.iter().map(|p| p.p_lab).sum()
    }
}

/// Which products to enumerate and whether to assemble their graphs.
#[derive(Clone, Debug)]
pub struct EnumerateOptions {
    pub kinds: Vec<ProductKind>,
    pub assemble_graphs: bool,
}

impl EnumerateOptions {
    pub fn standard(include_mono: bool) -> Self {
        let mut kinds = vec![ProductKind::Tri];
        kinds.extend(ProductKind::DISYNTHONS);
        if include_mono {
            kinds.extend(ProductKind::MONOSYNTHONS);
        }
        Self { kinds, assemble_graphs: true }
    }
}

/// Trisynthon plus the three disynthons (and monosynthons when asked),
/// with proportions from the library's building-block yields.
pub fn enumerate_products(library: &Library, tag: &LibraryTag, include_mono: bool) -> Result<ProductMixture, LibraryError> {
    enumerate_with(library, tag, &EnumerateOptions::standard(include_mono))
}

pub fn enumerate_with(library: &Library, tag: &LibraryTag, opts: &EnumerateOptions) -> Result<ProductMixture, LibraryError> {
    let blocks = library.validate_tag(tag)?;
    let props = yield_proportions(blocks[0].yield_, blocks[1].yield_, blocks[2].yield_)?;
    let products = opts
        .kinds
        .iter()
        .map(|&kind| {
            let members: Vec<&BuildingBlock> = kind.cycles().iter().map(|&c| blocks[c]).collect();
            let graph = if opts.assemble_graphs {
                let frags: Vec<&Fragment> = members.iter().map(|b| &b.fragment).collect();
                Some(assemble(&frags)?)
            } else {
                None
            };
            Ok(Product {
                kind,
                bb_ids: members.iter().map(|b| b.id.clone()).collect(),
                graph,
                p_lab: props.get(kind),
            })
        })
        .collect::<Result<Vec<_>, LibraryError>>()?;
    Ok(ProductMixture { products })
}
