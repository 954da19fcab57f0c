//! Tab-separated triple files and one-token-per-line vocabulary files.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{KnowledgeGraph, Triple, Vocab};
use crate::error::{Error, Result};

/// A loaded graph plus the number of duplicate lines that were dropped.
#[derive(Debug)]
pub struct LoadedGraph {
    pub graph: KnowledgeGraph,
    pub duplicates: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_vocab(path: &Path) -> Result<Vocab> {
    let text = read(path)?;
    Vocab::from_names(text.lines().map(|l| l.trim_end_matches('\r')).filter(|l| !l.is_empty()))
}

/// Loads `head<TAB>relation<TAB>tail` lines.
///
/// Without vocabulary files, ids follow first appearance. With them, every
/// token must already be listed.
pub fn load_triples(
    path: &Path,
    entity_vocab: Option<&Path>,
    relation_vocab: Option<&Path>,
) -> Result<LoadedGraph> {
    let text = read(path)?;
    let fixed_e = entity_vocab.map(read_vocab).transpose()?;
    let fixed_r = relation_vocab.map(read_vocab).transpose()?;
    let frozen_e = fixed_e.is_some();
    let frozen_r = fixed_r.is_some();
    let mut ents = fixed_e.unwrap_or_default();
    let mut rels = fixed_r.unwrap_or_default();

    let mut triples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let lookup = |v: &mut Vocab, frozen: bool, tok: &str, what: &str| -> Result<usize> {
            if frozen {
                v.id(tok).ok_or_else(|| {
                    Error::Vocabulary(format!("line {}: {what} {tok:?} not in vocabulary", i + 1))
                })
            } else {
                Ok(v.get_or_insert(tok))
            }
        };
        let h = lookup(&mut ents, frozen_e, fields[0], "entity")?;
        let r = lookup(&mut rels, frozen_r, fields[1], "relation")?;
        let t = lookup(&mut ents, frozen_e, fields[2], "entity")?;
        triples.push(Triple::new(h, r, t));
    }
    let raw_count = triples.len();
    let graph = KnowledgeGraph::new(ents, rels, triples)?;
    let duplicates = raw_count - graph.len();
    if duplicates > 0 {
        log::warn!("{}: dropped {duplicates} duplicate triple lines", path.display());
    }
    Ok(LoadedGraph { graph, duplicates })
}

/// Writes triples as TSV using the graph's token names.
pub fn write_triples(path: &Path, kg: &KnowledgeGraph, triples: &[Triple]) -> Result<()> {
    let mut out = Vec::new();
    for t in triples {
        let name = |v: &Vocab, id: usize| {
            v.name(id)
                .map(str::to_string)
                .ok_or_else(|| Error::Vocabulary(format!("id {id} out of range")))
        };
        writeln!(
            out,
            "{}\t{}\t{}",
            name(kg.entities(), t.head)?,
            name(kg.relations(), t.rel)?,
            name(kg.entities(), t.tail)?
        )
        .expect("writing to a Vec cannot fail");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
