//! `atoms=C,N,*;charges=0,0,0;rings=0,0,0;bonds=0-1:1,1-2:1`

use super::{AtomRecord, Bond, BondOrder, Element, MolGraph, MolGraphError};

fn perr(msg: impl Into<String>) -> MolGraphError {
    MolGraphError::Parse(msg.into())
}

fn list(s: &str) -> Vec<&str> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split(',').collect()
    }
}

pub fn parse_graph(s: &str) -> Result<MolGraph, MolGraphError> {
    let mut atoms_f = None;
    let mut charges_f = None;
    let mut rings_f = None;
    let mut bonds_f = None;
    for part in s.trim().split(';') {
        let (key, value) = part.split_once('=').ok_or_else(|| perr(format!("expected key=value, got `{part}`")))?;
        let slot = match key {
            "atoms" => &mut atoms_f,
            "charges" => &mut charges_f,
            "rings" => &mut rings_f,
            "bonds" => &mut bonds_f,
            other => return Err(perr(format!("unknown field `{other}`"))),
        };
        if slot.replace(value).is_some() {
            return Err(perr(format!("duplicate field `{key}`")));
        }
    }
    let elements = list(atoms_f.ok_or_else(|| perr("missing atoms"))?)
        .into_iter()
        .map(Element::from_symbol)
        .collect::<Result<Vec<_>, _>>()?;
    let charges = list(charges_f.ok_or_else(|| perr("missing charges"))?)
        .into_iter()
        .map(|c| c.parse::<i32>().map_err(|_| perr(format!("bad charge `{c}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let rings = list(rings_f.ok_or_else(|| perr("missing rings"))?)
        .into_iter()
        .map(|r| match r {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(perr(format!("bad ring flag `{r}`"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if charges.len() != elements.len() || rings.len() != elements.len() {
        return Err(perr("atoms, charges and rings lengths differ"));
    }
    let bonds = list(bonds_f.ok_or_else(|| perr("missing bonds"))?)
        .into_iter()
        .map(|b| {
            let (pair, code) = b.split_once(':').ok_or_else(|| perr(format!("bad bond `{b}`")))?;
            let (i, j) = pair.split_once('-').ok_or_else(|| perr(format!("bad bond `{b}`")))?;
            let i = i.parse().map_err(|_| perr(format!("bad bond `{b}`")))?;
            let j = j.parse().map_err(|_| perr(format!("bad bond `{b}`")))?;
            let order = code
                .parse::<u8>()
                .ok()
                .and_then(BondOrder::from_code)
                .ok_or_else(|| perr(format!("bad bond order in `{b}`")))?;
            Ok(Bond { i, j, order })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let atoms = elements
        .into_iter()
        .zip(charges)
        .zip(rings)
        .map(|((element, formal_charge), in_ring)| AtomRecord { element, formal_charge, in_ring })
        .collect();
    MolGraph::new(atoms, bonds)
}

pub fn format_graph(g: &MolGraph) -> String {
    let join = |it: Vec<String>| it.join(",");
    format!(
        "atoms={};charges={};rings={};bonds={}",
        join(g.atoms().iter().map(|a| a.element.symbol().to_string()).collect()),
        join(g.atoms().iter().map(|a| a.formal_charge.to_string()).collect()),
        join(g.atoms().iter().map(|a| u8::from(a.in_ring).to_string()).collect()),
        join(g.bonds().iter().map(|b| format!("{}-{}:{}", b.i, b.j, b.order.code())).collect()),
    )
}
