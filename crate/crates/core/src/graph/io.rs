//! Canonical triplet TSV: a `N<TAB>R` header, then one `head<TAB>rel<TAB>tail`
//! line per triplet in sorted order, LF-terminated.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::multigraph::{Multigraph, Triplet};
use crate::error::{Error, Result};

pub fn to_tsv(graph: &Multigraph) -> String {
    let mut s = format!("{}\t{}\n", graph.num_nodes(), graph.num_relations());
    for t in graph.triplets() {
        s.push_str(&format!("{}\t{}\t{}\n", t.head, t.rel, t.tail));
    }
    s
}

pub fn write_tsv(graph: &Multigraph, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(to_tsv(graph).as_bytes())?;
    Ok(())
}

pub fn read_tsv(path: &Path) -> Result<Multigraph> {
    let text = fs::read_to_string(path)?;
    parse_tsv(&text, path)
}

/// Parses canonical TSV text; `origin` only labels error messages.
pub fn parse_tsv(text: &str, origin: &Path) -> Result<Multigraph> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hl, header) = lines
        .next()
        .ok_or_else(|| err(1, "missing `N<TAB>R` header".into()))?;
    let dims = parse_fields::<2>(header).map_err(|m| err(hl, m))?;
    let (n, r) = (dims[0], dims[1]);

    let mut triplets = Vec::new();
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        let [h, rel, t] = parse_fields::<3>(line).map_err(|m| err(ln, m))?;
        triplets.push(Triplet::new(h, rel, t));
    }
    Multigraph::new(n, r, triplets)
}

fn parse_fields<const K: usize>(line: &str) -> std::result::Result<[usize; K], String> {
    let parts: Vec<&str> = line.split('\t').collect();
    if parts.len() != K {
        return Err(format!("expected {K} tab-separated fields, found {}", parts.len()));
    }
    let mut out = [0usize; K];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .parse()
            .map_err(|_| format!("`{p}` is not a non-negative integer"))?;
    }
    Ok(out)
}
