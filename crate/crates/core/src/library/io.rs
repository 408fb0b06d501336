//! Tab-separated fragment and tag files.
//!
//! Fragments: `id<TAB>cycle<TAB>yield<TAB>graph`
//! Tags: `tag_id<TAB>bb1<TAB>bb2<TAB>bb3<TAB>c_target<TAB>c_ntc<TAB>c_dls<TAB>c_promiscuity`
//!
//! Blank lines and lines starting with `#` are skipped on read.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BuildingBlock, CountRecord, Library, LibraryError, LibraryTag};
use crate::molgraph::{format_graph, parse_graph, Fragment};

pub(crate) fn read_text(path: &Path) -> Result<String, LibraryError> {
    fs::read_to_string(path).map_err(|source| LibraryError::Io { path: path.display().to_string(), source })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), LibraryError> {
    fs::write(path, text).map_err(|source| LibraryError::Io { path: path.display().to_string(), source })
}

pub(crate) fn tsv_records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split('\t').collect()))
}

pub fn parse_fragments(text: &str, source: &str) -> Result<Library, LibraryError> {
    let perr = |line, msg: String| LibraryError::Parse { path: source.to_string(), line, msg };
    let mut blocks = Vec::new();
    for (line, f) in tsv_records(text) {
        if f.len() != 4 {
            return Err(perr(line, format!("expected 4 fields, found {}", f.len())));
        }
        let cycle: u8 = f[1].parse().map_err(|_| perr(line, format!("bad cycle `{}`", f[1])))?;
        let y: f64 = f[2].parse().map_err(|_| perr(line, format!("bad yield `{}`", f[2])))?;
        let graph = parse_graph(f[3]).map_err(|e| perr(line, e.to_string()))?;
        let fragment = Fragment::from_graph(graph).map_err(|e| perr(line, e.to_string()))?;
        blocks.push(BuildingBlock::new(f[0], cycle, y, fragment)?);
    }
    Library::new(blocks)
}

pub fn read_fragments(path: &Path) -> Result<Library, LibraryError> {
    parse_fragments(&read_text(path)?, &path.display().to_string())
}

pub fn format_fragments(library: &Library) -> String {
    let mut out = String::new();
    for b in library.blocks() {
        writeln!(out, "{}\t{}\t{}\t{}", b.id, b.cycle, b.yield_, format_graph(b.fragment.graph())).unwrap();
    }
    out
}

pub fn write_fragments(path: &Path, library: &Library) -> Result<(), LibraryError> {
    write_text(path, &format_fragments(library))
}

pub fn parse_tags(text: &str, source: &str) -> Result<Vec<LibraryTag>, LibraryError> {
    let perr = |line, msg: String| LibraryError::Parse { path: source.to_string(), line, msg };
    let mut tags = Vec::new();
    for (line, f) in tsv_records(text) {
        if f.len() != 8 {
            return Err(perr(line, format!("expected 8 fields, found {}", f.len())));
        }
        let int = |s: &str, what: &str| s.parse::<u64>().map_err(|_| perr(line, format!("bad {what} `{s}`")));
        let prom: f64 = f[7].parse().map_err(|_| perr(line, format!("bad c_promiscuity `{}`", f[7])))?;
        let counts = CountRecord::new(int(f[4], "c_target")?, int(f[5], "c_ntc")?, int(f[6], "c_dls")?, prom)
            .map_err(|e| perr(line, e.to_string()))?;
        tags.push(LibraryTag {
            tag_id: f[0].to_string(),
            bb: [f[1].to_string(), f[2].to_string(), f[3].to_string()],
            counts,
        });
    }
    Ok(tags)
}

pub fn read_tags(path: &Path) -> Result<Vec<LibraryTag>, LibraryError> {
    parse_tags(&read_text(path)?, &path.display().to_string())
}

pub fn format_tags(tags: &[LibraryTag]) -> String {
    let mut out = String::new();
    for t in tags {
        let c = &t.counts;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            t.tag_id, t.bb[0], t.bb[1], t.bb[2], c.c_target, c.c_ntc, c.c_dls, c.c_promiscuity
        )
        .unwrap();
    }
    out
}

pub fn write_tags(path: &Path, tags: &[LibraryTag]) -> Result<(), LibraryError> {
    write_text(path, &format_tags(tags))
}
