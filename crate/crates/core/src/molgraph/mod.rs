//! Attributed molecular graphs, building-block assembly at attachment
//! points, and fixed-width atom/bond featurization.

mod text;

use std::collections::BTreeMap;
use std::fmt;

use crate::diffengine::Matrix;

pub use text::{format_graph, parse_graph};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MolGraphError {
    #[error("fragment {fragment} needs {needed} attachment point(s), has {found}")]
    ArityMismatch { fragment: usize, needed: usize, found: usize },
    #[error("fragment {fragment} is internally disconnected")]
    Disconnected { fragment: usize },
    #[error("graph still contains attachment atoms `*`")]
    UnassembledGraph,
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("invalid bond {i}-{j}: {reason}")]
    InvalidBond { i: usize, j: usize, reason: &'static str },
    #[error("invalid attachment point {atom}: {reason}")]
    InvalidAttachment { atom: usize, reason: &'static str },
    #[error("graph parse error: {0}")]
    Parse(String),
}

/// Element alphabet. The order fixes the one-hot layout of atom features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    C,
    N,
    O,
    S,
    F,
    Cl,
    Br,
    P,
    H,
    /// Attachment point of an unassembled fragment.
    Attach,
}

impl Element {
    pub const ALL: [Element; 10] = [
        Element::C,
        Element::N,
        Element::O,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::P,
        Element::H,
        Element::Attach,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::P => "P",
            Element::H => "H",
            Element::Attach => "*",
        }
    }

    pub fn from_symbol(s: &str) -> Result<Self, MolGraphError> {
        Element::ALL
            .iter()
            .copied()
            .find(|e| e.symbol() == s)
            .ok_or_else(|| MolGraphError::UnknownElement(s.to_string()))
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub const ALL: [BondOrder; 4] = [BondOrder::Single, BondOrder::Double, BondOrder::Triple, BondOrder::Aromatic];

    /// Text code: 1, 2, 3, or 4 for aromatic.
    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        BondOrder::ALL.get((code as usize).wrapping_sub(1)).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AtomRecord {
    pub element: Element,
    pub formal_charge: i32,
    pub in_ring: bool,
}

impl AtomRecord {
    pub fn new(element: Element) -> Self {
        Self { element, formal_charge: 0, in_ring: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
}

/// Atoms plus undirected typed bonds.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MolGraph {
    atoms: Vec<AtomRecord>,
    bonds: Vec<Bond>,
}

impl MolGraph {
    /// Validates bond endpoints, self-loops and duplicate pairs.
    pub fn new(atoms: Vec<AtomRecord>, bonds: Vec<Bond>) -> Result<Self, MolGraphError> {
        let n = atoms.len();
        let mut seen = std::collections::HashSet::new();
        for b in &bonds {
            if b.i >= n || b.j >= n {
                return Err(MolGraphError::InvalidBond { i: b.i, j: b.j, reason: "endpoint out of range" });
            }
            if b.i == b.j {
                return Err(MolGraphError::InvalidBond { i: b.i, j: b.j, reason: "self loop" });
            }
            if !seen.insert((b.i.min(b.j), b.i.max(b.j))) {
                return Err(MolGraphError::InvalidBond { i: b.i, j: b.j, reason: "duplicate pair" });
            }
        }
        Ok(Self { atoms, bonds })
    }

    pub fn atoms(&self) -> &[AtomRecord] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.atoms.len()];
        for b in &self.bonds {
            deg[b.i] += 1;
            deg[b.j] += 1;
        }
        deg
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for b in &self.bonds {
            adj[b.i].push(b.j);
            adj[b.j].push(b.i);
        }
        adj
    }

    pub fn has_attachment_atoms(&self) -> bool {
        self.atoms.iter().any(|a| a.element == Element::Attach)
    }

    /// True for the empty graph and for any single connected component.
    pub fn is_connected(&self) -> bool {
        if self.atoms.is_empty() {
            return true;
        }
        let adj = self.neighbors();
        let mut seen = vec![false; self.atoms.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.atoms.len()
    }

    /// Relabels atoms so that old atom `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = self.atoms.clone();
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = self.atoms[old];
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond { i: perm[b.i], j: perm[b.j], order: b.order })
            .collect();
        MolGraph { atoms, bonds }
    }

    /// Isomorphism-invariant signature from colour refinement: the sorted
    /// multiset of atom colours after `rounds` rounds, each colour being the
    /// atom record plus the sorted multiset of (bond order, neighbour colour).
    ///
    /// Equal graphs (up to relabeling) always share a signature; at the small
    /// sizes used here distinct graphs practically never do.
    pub fn signature(&self, rounds: usize) -> Vec<u64> {
        let mut adj: Vec<Vec<(usize, BondOrder)>> = vec![Vec::new(); self.atoms.len()];
        for b in &self.bonds {
            adj[b.i].push((b.j, b.order));
            adj[b.j].push((b.i, b.order));
        }
        let mut colours: Vec<u64> = self
            .atoms
            .iter()
            .map(|a| hash_u64(&(a.element, a.formal_charge, a.in_ring)))
            .collect();
        for _ in 0..rounds {
            colours = (0..self.atoms.len())
                .map(|v| {
                    let mut nb: Vec<(u8, u64)> = adj[v].iter().map(|&(w, o)| (o.code(), colours[w])).collect();
                    nb.sort_unstable();
                    hash_u64(&(colours[v], nb))
                })
                .collect();
        }
        colours.sort_unstable();
        colours
    }
}

fn hash_u64<T: std::hash::Hash>(x: &T) -> u64 {
    use std::hash::Hasher;
    // SipHash with fixed keys, stable within a build
    let mut h = std::collections::hash_map::DefaultHasher::new();
    x.hash(&mut h);
    h.finish()
}

/// A building-block graph with ordered `*` attachment atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct Fragment {
    graph: MolGraph,
    attachment_points: Vec<usize>,
}

impl Fragment {
    /// Attachment points are taken as every `*` atom, in atom order.
    pub fn from_graph(graph: MolGraph) -> Result<Self, MolGraphError> {
        let attachment_points: Vec<usize> = graph
            .atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.element == Element::Attach)
            .map(|(i, _)| i)
            .collect();
        Self::new(graph, attachment_points)
    }

    pub fn new(graph: MolGraph, attachment_points: Vec<usize>) -> Result<Self, MolGraphError> {
        let deg = graph.degrees();
        let n_star = graph.atoms.iter().filter(|a| a.element == Element::Attach).count();
        if n_star != attachment_points.len() {
            return Err(MolGraphError::InvalidAttachment {
                atom: attachment_points.first().copied().unwrap_or(0),
                reason: "attachment points must enumerate every `*` atom",
            });
        }
        for &p in &attachment_points {
            if p >= graph.atoms.len() || graph.atoms[p].element != Element::Attach {
                return Err(MolGraphError::InvalidAttachment { atom: p, reason: "not a `*` atom" });
            }
            if deg[p] != 1 {
                return Err(MolGraphError::InvalidAttachment { atom: p, reason: "`*` must have exactly one neighbour" });
            }
        }
        Ok(Self { graph, attachment_points })
    }

    pub fn graph(&self) -> &MolGraph {
        &self.graph
    }

    pub fn attachment_points(&self) -> &[usize] {
        &self.attachment_points
    }

    pub fn arity(&self) -> usize {
        self.attachment_points.len()
    }

    /// The heavy atom bonded to attachment atom `star`.
    fn anchor(&self, star: usize) -> usize {
        self.graph
            .bonds
            .iter()
            .find_map(|b| {
                if b.i == star {
                    Some(b.j)
                } else if b.j == star {
                    Some(b.i)
                } else {
                    None
                }
            })
            .expect("validated attachment has one neighbour")
    }
}

/// Joins a chain of fragments: fragment k's outgoing point (its last
/// attachment) bonds to fragment k+1's incoming point (its first) with a
/// single bond between the two anchor atoms. Every `*` atom, used or not,
/// is removed from the result.
pub fn assemble(fragments: &[&Fragment]) -> Result<MolGraph, MolGraphError> {
    let n = fragments.len();
    for (k, f) in fragments.iter().enumerate() {
        if !f.graph.is_connected() {
            return Err(MolGraphError::Disconnected { fragment: k });
        }
        let needed = usize::from(k > 0) + usize::from(k + 1 < n);
        if f.arity() < needed {
            return Err(MolGraphError::ArityMismatch { fragment: k, needed, found: f.arity() });
        }
    }

    let mut atoms = Vec::new();
    let mut bonds = Vec::new();
    let mut offsets = Vec::with_capacity(n);
    for f in fragments {
        let off = atoms.len();
        offsets.push(off);
        atoms.extend_from_slice(&f.graph.atoms);
        bonds.extend(f.graph.bonds.iter().map(|b| Bond { i: b.i + off, j: b.j + off, order: b.order }));
    }
    for k in 0..n.saturating_sub(1) {
        let (a, b) = (fragments[k], fragments[k + 1]);
        let out_star = *a.attachment_points.last().unwrap();
        let in_star = b.attachment_points[0];
        bonds.push(Bond {
            i: a.anchor(out_star) + offsets[k],
            j: b.anchor(in_star) + offsets[k + 1],
            order: BondOrder::Single,
        });
    }

    // drop every `*` and reindex
    let mut remap = vec![usize::MAX; atoms.len()];
    let mut kept = Vec::with_capacity(atoms.len());
    for (i, a) in atoms.iter().enumerate() {
        if a.element != Element::Attach {
            remap[i] = kept.len();
            kept.push(*a);
        }
    }
    let bonds = bonds
        .into_iter()
        .filter(|b| remap[b.i] != usize::MAX && remap[b.j] != usize::MAX)
        .map(|b| Bond { i: remap[b.i], j: remap[b.j], order: b.order })
        .collect();
    let g = MolGraph { atoms: kept, bonds };
    debug_assert!(g.is_connected());
    Ok(g)
}

pub const N_ELEMENTS: usize = 10;
pub const MAX_DEGREE: usize = 5;
/// element one-hot (10) + degree one-hot 0..=5 (6) + formal charge + ring flag
pub const ATOM_FEATURES: usize = N_ELEMENTS + MAX_DEGREE + 1 + 2;
pub const BOND_FEATURES: usize = 4;

/// Per-atom and per-bond feature rows in graph order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub atom_features: Matrix,
    pub bond_features: Matrix,
}

pub fn featurize(g: &MolGraph) -> Result<FeatureMatrix, MolGraphError> {
    if g.has_attachment_atoms() {
        return Err(MolGraphError::UnassembledGraph);
    }
    let deg = g.degrees();
    let mut atom_features = Matrix::zeros(g.n_atoms(), ATOM_FEATURES);
    for (i, a) in g.atoms.iter().enumerate() {
        let row = atom_features.row_mut(i);
        row[a.element.index()] = 1.0;
        row[N_ELEMENTS + deg[i].min(MAX_DEGREE)] = 1.0;
        row[N_ELEMENTS + MAX_DEGREE + 1] = a.formal_charge as f64;
        row[N_ELEMENTS + MAX_DEGREE + 2] = if a.in_ring { 1.0 } else { 0.0 };
    }
    let mut bond_features = Matrix::zeros(g.n_bonds(), BOND_FEATURES);
    for (k, b) in g.bonds.iter().enumerate() {
        bond_features.set(k, b.order as usize, 1.0);
    }
    Ok(FeatureMatrix { atom_features, bond_features })
}

/// Element counts, handy for quick structural comparisons and debugging.
pub fn composition(g: &MolGraph) -> BTreeMap<Element, usize> {
    let mut m = BTreeMap::new();
    for a in &g.atoms {
        *m.entry(a.element).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn atom(e: Element) -> AtomRecord {
        AtomRecord::new(e)
    }

    fn single(i: usize, j: usize) -> Bond {
        Bond { i, j, order: BondOrder::Single }
    }

    fn frag(elements: &[Element], bonds: &[(usize, usize)]) -> Fragment {
        let g = MolGraph::new(
            elements.iter().map(|&e| atom(e)).collect(),
            bonds.iter().map(|&(i, j)| single(i, j)).collect(),
        )
        .unwrap();
        Fragment::from_graph(g).unwrap()
    }

    /// Random tree fragment with `arity` attachment atoms on distinct anchors.
    fn random_fragment(rng: &mut ChaCha8Rng, arity: usize) -> Fragment {
        let heavy = rng.gen_range(arity.max(1)..6);
        let palette = [Element::C, Element::C, Element::N, Element::O, Element::S];
        let mut atoms: Vec<AtomRecord> = (0..heavy).map(|_| atom(palette[rng.gen_range(0..palette.len())])).collect();
        let mut bonds: Vec<Bond> = (1..heavy).map(|v| single(rng.gen_range(0..v), v)).collect();
        for k in 0..arity {
            atoms.push(atom(Element::Attach));
            bonds.push(single(k, atoms.len() - 1));
        }
        Fragment::from_graph(MolGraph::new(atoms, bonds).unwrap()).unwrap()
    }

    #[test]
    fn rejects_invalid_bonds() {
        let atoms = vec![atom(Element::C), atom(Element::C)];
        assert!(MolGraph::new(atoms.clone(), vec![single(0, 2)]).is_err());
        assert!(MolGraph::new(atoms.clone(), vec![single(1, 1)]).is_err());
        assert!(MolGraph::new(atoms, vec![single(0, 1), single(1, 0)]).is_err());
    }

    #[test]
    fn single_fragment_drops_stars() {
        let f = frag(&[Element::C, Element::O, Element::Attach], &[(0, 1), (0, 2)]);
        let g = assemble(&[&f]).unwrap();
        assert_eq!(g.n_atoms(), 2);
        assert_eq!(g.bonds(), &[single(0, 1)]);
        assert!(!g.has_attachment_atoms());
    }

    #[test]
    fn two_carbon_join() {
        let a = frag(&[Element::C, Element::Attach], &[(0, 1)]);
        let b = frag(&[Element::Attach, Element::C], &[(0, 1)]);
        let g = assemble(&[&a, &b]).unwrap();
        assert_eq!(g.atoms(), &[atom(Element::C), atom(Element::C)]);
        assert_eq!(g.bonds(), &[single(0, 1)]);
    }

    #[test]
    fn middle_fragment_needs_two_points() {
        let a = frag(&[Element::C, Element::Attach], &[(0, 1)]);
        let mid = frag(&[Element::N, Element::Attach], &[(0, 1)]);
        let c = frag(&[Element::Attach, Element::O], &[(0, 1)]);
        assert_eq!(
            assemble(&[&a, &mid, &c]),
            Err(MolGraphError::ArityMismatch { fragment: 1, needed: 2, found: 1 })
        );
        let bare = frag(&[Element::C], &[]);
        assert!(matches!(assemble(&[&a, &bare]), Err(MolGraphError::ArityMismatch { fragment: 1, .. })));
    }

    #[test]
    fn disconnected_fragment_rejected() {
        let broken = frag(&[Element::C, Element::Attach, Element::O], &[(0, 1)]);
        let b = frag(&[Element::Attach, Element::C], &[(0, 1)]);
        assert_eq!(assemble(&[&broken, &b]), Err(MolGraphError::Disconnected { fragment: 0 }));
    }

    #[test]
    fn star_needs_one_neighbour() {
        let g = MolGraph::new(vec![atom(Element::Attach), atom(Element::C), atom(Element::C)], vec![single(0, 1), single(0, 2)])
            .unwrap();
        assert!(matches!(Fragment::from_graph(g), Err(MolGraphError::InvalidAttachment { .. })));
    }

    #[test]
    fn random_three_fragment_chains_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let fs = [random_fragment(&mut rng, 2), random_fragment(&mut rng, 2), random_fragment(&mut rng, 1)];
            let g = assemble(&[&fs[0], &fs[1], &fs[2]]).unwrap();
            assert!(g.is_connected());
            assert!(!g.has_attachment_atoms());
            let total: usize = fs.iter().map(|f| f.graph().n_atoms() - f.arity()).sum();
            assert_eq!(g.n_atoms(), total);
            let bonds: usize = fs.iter().map(|f| f.graph().n_bonds() - f.arity()).sum();
            assert_eq!(g.n_bonds(), bonds + 2);
        }
    }

    #[test]
    fn chain_assembly_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let a = random_fragment(&mut rng, 1);
            let b = random_fragment(&mut rng, 2);
            let c = random_fragment(&mut rng, 1);
            let abc = assemble(&[&a, &b, &c]).unwrap();

            // rebuild AB keeping B's outgoing point, then attach C
            let mut atoms = a.graph().atoms().to_vec();
            let off = atoms.len();
            atoms.extend_from_slice(b.graph().atoms());
            let mut bonds: Vec<Bond> = a.graph().bonds().to_vec();
            bonds.extend(b.graph().bonds().iter().map(|x| Bond { i: x.i + off, j: x.j + off, order: x.order }));
            let a_out = a.attachment_points()[0];
            let b_in = b.attachment_points()[0];
            bonds.push(single(a.anchor(a_out), b.anchor(b_in) + off));
            let drop = [a_out, b_in + off];
            let keep: Vec<usize> = (0..atoms.len()).filter(|i| !drop.contains(i)).collect();
            let remap: std::collections::HashMap<usize, usize> = keep.iter().enumerate().map(|(n, &o)| (o, n)).collect();
            let ab_atoms = keep.iter().map(|&i| atoms[i]).collect();
            let ab_bonds = bonds
                .iter()
                .filter(|x| remap.contains_key(&x.i) && remap.contains_key(&x.j))
                .map(|x| Bond { i: remap[&x.i], j: remap[&x.j], order: x.order })
                .collect();
            let ab = Fragment::from_graph(MolGraph::new(ab_atoms, ab_bonds).unwrap()).unwrap();
            let ab_c = assemble(&[&ab, &c]).unwrap();
            assert_eq!(ab_c.signature(4), abc.signature(4));
        }
    }

    #[test]
    fn featurize_single_carbon() {
        let g = MolGraph::new(vec![atom(Element::C)], vec![]).unwrap();
        let fm = featurize(&g).unwrap();
        assert_eq!(fm.atom_features.shape(), (1, ATOM_FEATURES));
        assert_eq!(ATOM_FEATURES, 18);
        let row = fm.atom_features.row(0);
        assert_eq!(row[0], 1.0);
        assert_eq!(row[N_ELEMENTS], 1.0);
        assert_eq!(row.iter().sum::<f64>(), 2.0);
        assert_eq!(fm.bond_features.shape(), (0, BOND_FEATURES));
    }

    #[test]
    fn featurize_benzene_ring() {
        let atoms = (0..6).map(|_| AtomRecord { element: Element::C, formal_charge: 0, in_ring: true }).collect();
        let bonds = (0..6).map(|i| Bond { i, j: (i + 1) % 6, order: BondOrder::Aromatic }).collect();
        let fm = featurize(&MolGraph::new(atoms, bonds).unwrap()).unwrap();
        for r in 0..6 {
            let row = fm.atom_features.row(r);
            assert_eq!(row[N_ELEMENTS + 2], 1.0, "degree 2");
            assert_eq!(row[ATOM_FEATURES - 1], 1.0, "in ring");
            assert_eq!(row[N_ELEMENTS..N_ELEMENTS + 6].iter().sum::<f64>(), 1.0);
        }
        for k in 0..6 {
            assert_eq!(fm.bond_features.row(k), &[0.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn featurize_rejects_stars() {
        let g = MolGraph::new(vec![atom(Element::C), atom(Element::Attach)], vec![single(0, 1)]).unwrap();
        assert_eq!(featurize(&g), Err(MolGraphError::UnassembledGraph));
    }

    #[test]
    fn high_degree_clamps() {
        let mut atoms = vec![atom(Element::C)];
        atoms.extend((0..7).map(|_| atom(Element::F)));
        let bonds = (1..8).map(|j| single(0, j)).collect();
        let fm = featurize(&MolGraph::new(atoms, bonds).unwrap()).unwrap();
        assert_eq!(fm.atom_features.get(0, N_ELEMENTS + MAX_DEGREE), 1.0);
    }

    proptest! {
        #[test]
        fn permuting_atoms_permutes_rows(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = [random_fragment(&mut rng, 1), random_fragment(&mut rng, 1)];
            let g = assemble(&[&f[0], &f[1]]).unwrap();
            let mut perm: Vec<usize> = (0..g.n_atoms()).collect();
            for i in (1..perm.len()).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let pg = g.permuted(&perm);
            let (a, b) = (featurize(&g).unwrap(), featurize(&pg).unwrap());
            for old in 0..g.n_atoms() {
                prop_assert_eq!(a.atom_features.row(old), b.atom_features.row(perm[old]));
            }
            prop_assert_eq!(g.signature(3), pg.signature(3));
        }

        #[test]
        fn one_hot_blocks_sum_to_one(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = [random_fragment(&mut rng, 1), random_fragment(&mut rng, 2), random_fragment(&mut rng, 1)];
            let g = assemble(&[&f[0], &f[1], &f[2]]).unwrap();
            let fm = featurize(&g).unwrap();
            for r in 0..g.n_atoms() {
                let row = fm.atom_features.row(r);
                prop_assert_eq!(row[..N_ELEMENTS].iter().sum::<f64>(), 1.0);
                prop_assert_eq!(row[N_ELEMENTS..N_ELEMENTS + 6].iter().sum::<f64>(), 1.0);
            }
            for r in 0..g.n_bonds() {
                prop_assert_eq!(fm.bond_features.row(r).iter().sum::<f64>(), 1.0);
            }
        }
    }
}
