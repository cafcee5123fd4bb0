//! Tab-separated triple files (`head<TAB>relation<TAB>tail`) and
//! attribute-entity maps (`attribute<TAB>entity`).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};

use super::{KnowledgeGraph, Triple};

#[derive(Default)]
struct Vocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }
}

fn split_fields<'a>(path: &Path, line_no: usize, line: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != n || fields.iter().any(|f| f.is_empty()) {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: line_no,
            message: format!("expected {n} non-empty tab-separated fields"),
        });
    }
    Ok(fields)
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Loads a graph. Vocabularies follow first appearance in the triple file.
/// `map_path` may be omitted for an untied graph; otherwise every attribute
/// named there must be one of `attribute_names`.
pub fn load_kg(triples_path: &Path, map_path: Option<&Path>, attribute_names: &[String]) -> Result<KnowledgeGraph> {
    let text = read_to_string(triples_path)?;
    let mut entities = Vocab::default();
    let mut relations = Vocab::default();
    let mut positives = Vec::new();
    let mut seen = HashSet::new();
    for (line_no, line) in lines(&text) {
        let f = split_fields(triples_path, line_no, line, 3)?;
        let t = Triple::new(entities.intern(f[0]), relations.intern(f[1]), entities.intern(f[2]));
        if seen.insert(t) {
            positives.push(t);
        } else {
            log::warn!("{}:{line_no}: duplicate tuple dropped", triples_path.display());
        }
    }

    let mut attribute_entity = BTreeMap::new();
    if let Some(map_path) = map_path {
        let attr_index: HashMap<&str, usize> = attribute_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let text = read_to_string(map_path)?;
        for (line_no, line) in lines(&text) {
            let f = split_fields(map_path, line_no, line, 2)?;
            let attr = *attr_index
                .get(f[0])
                .ok_or_else(|| Error::UnknownAttribute(f[0].to_owned()))?;
            let ent = *entities.index.get(f[1]).ok_or_else(|| Error::Parse {
                path: map_path.to_owned(),
                line: line_no,
                message: format!("entity `{}` does not occur in the triple file", f[1]),
            })?;
            if attribute_entity.insert(attr, ent).is_some() {
                return Err(Error::Parse {
                    path: map_path.to_owned(),
                    line: line_no,
                    message: format!("attribute `{}` mapped twice", f[0]),
                });
            }
        }
    }

    let kg = KnowledgeGraph::new(entities.names, relations.names, positives, attribute_entity)?;
    kg.check_attribute_coverage()?;
    Ok(kg)
}

pub fn save_triples(kg: &KnowledgeGraph, path: &Path) -> Result<()> {
    let mut out = String::new();
    for t in kg.positives() {
        let (h, r, tl) = kg.describe(t);
        writeln!(out, "{h}\t{r}\t{tl}").unwrap();
    }
    write_atomic(path, out.as_bytes())
}

pub fn save_attribute_map(kg: &KnowledgeGraph, attribute_names: &[String], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (&attr, &ent) in kg.attribute_entity() {
        let name = attribute_names.get(attr).ok_or_else(|| {
            Error::Config(format!(
                "attribute index {attr} outside the {} dataset columns",
                attribute_names.len()
            ))
        })?;
        writeln!(out, "{name}\t{}", kg.entities()[ent]).unwrap();
    }
    write_atomic(path, out.as_bytes())
}
