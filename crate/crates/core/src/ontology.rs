//! Data-object ontology: synonym classes plus a hypernym/hyponym DAG.
//!
//! Terms from policies and traffic rarely match the 32 label items verbatim
//! ("IDFA", "GPS coordinates", "subject line"). The ontology aligns them by
//! subsumption: a term is relevant to an item when one subsumes the other or
//! they are synonyms.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};
use crate::taxonomy::DataItem;

pub const ONTOLOGY_JSON: &str = include_str!("../data/ontology.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Synonym,
    /// The first term subsumes the second.
    Hypernym,
    /// The first term is subsumed by the second.
    Hyponym,
    Unrelated,
}

impl Relation {
    /// Synonym, hypernym or hyponym.
    pub fn is_comparable(self) -> bool {
        !matches!(self, Relation::Unrelated)
    }
}

/// Lowercases, trims, and collapses runs of `-`, `_`, `.` and spaces.
pub fn normalize_term(term: &str) -> String {
    let mut out = String::with_capacity(term.len());
    let mut pending_sep = false;
    for ch in term.trim().chars() {
        if matches!(ch, '-' | '_' | '.' | ' ') || ch.is_whitespace() {
            pending_sep = true;
            continue;
        }
        if pending_sep && !out.is_empty() {
            out.push(' ');
        }
        pending_sep = false;
        out.extend(ch.to_lowercase());
    }
    out
}

/// On-disk ontology format.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OntologyFile {
    #[serde(default)]
    pub synonyms: Vec<Vec<String>>,
    #[serde(default)]
    pub edges: Vec<[String; 2]>,
    #[serde(default)]
    pub canonical: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Ontology {
    class_of: BTreeMap<String, usize>,
    members: Vec<BTreeSet<String>>,
    children: Vec<BTreeSet<usize>>,
    /// Strict descendants of each class.
    descendants: Vec<BTreeSet<usize>>,
    canonical: BTreeMap<DataItem, usize>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

impl Ontology {
    pub fn bundled() -> Self {
        Self::from_json(ONTOLOGY_JSON).expect("bundled ontology is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: OntologyFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }

    pub fn from_file(file: &OntologyFile) -> Result<Self> {
        let mut term_ids: BTreeMap<String, usize> = BTreeMap::new();
        let intern = |term: &str, ids: &mut BTreeMap<String, usize>| -> Result<usize> {
            let norm = normalize_term(term);
            if norm.is_empty() {
                return Err(Error::Validation("empty ontology term".into()));
            }
            let next = ids.len();
            Ok(*ids.entry(norm).or_insert(next))
        };

        let mut groups: Vec<Vec<usize>> = Vec::new();
        for group in &file.synonyms {
            let ids = group
                .iter()
                .map(|t| intern(t, &mut term_ids))
                .collect::<Result<Vec<_>>>()?;
            groups.push(ids);
        }
        let mut canonical_terms = Vec::new();
        for name in &file.canonical {
            let item = DataItem::ALL
                .iter()
                .copied()
                .find(|i| normalize_term(i.name()) == normalize_term(name))
                .ok_or_else(|| Error::unknown("data item", name.clone()))?;
            canonical_terms.push((item, intern(name, &mut term_ids)?));
        }
        let mut edge_ids = Vec::new();
        for [hyper, hypo] in &file.edges {
            let lookup = |t: &str| {
                term_ids
                    .get(&normalize_term(t))
                    .copied()
                    .ok_or_else(|| Error::DanglingEdge(t.to_string()))
            };
            edge_ids.push((lookup(hyper)?, lookup(hypo)?));
        }

        let mut uf = UnionFind((0..term_ids.len()).collect());
        for group in &groups {
            for pair in group.windows(2) {
                uf.union(pair[0], pair[1]);
            }
        }

        // Dense class numbering in order of each class's smallest term.
        let mut root_to_class: BTreeMap<usize, usize> = BTreeMap::new();
        let mut class_of = BTreeMap::new();
        let mut members: Vec<BTreeSet<String>> = Vec::new();
        for (term, &id) in &term_ids {
            let root = uf.find(id);
            let class = *root_to_class.entry(root).or_insert_with(|| {
                members.push(BTreeSet::new());
                members.len() - 1
            });
            members[class].insert(term.clone());
            class_of.insert(term.clone(), class);
        }
        let id_class = |id: usize, uf: &mut UnionFind| root_to_class[&uf.find(id)];

        let mut children: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); members.len()];
        for (hyper, hypo) in edge_ids {
            let (a, b) = (id_class(hyper, &mut uf), id_class(hypo, &mut uf));
            if a == b {
                let rep = members[a].iter().next().cloned().unwrap_or_default();
                return Err(Error::OntologyCycle(vec![rep.clone(), rep]));
            }
            children[a].insert(b);
        }

        let mut canonical = BTreeMap::new();
        for (item, id) in canonical_terms {
            canonical.insert(item, id_class(id, &mut uf));
        }

        if let Some(cycle) = find_cycle(&children) {
            return Err(Error::OntologyCycle(
                cycle
                    .into_iter()
                    .map(|c| members[c].iter().next().cloned().unwrap_or_default())
                    .collect(),
            ));
        }
        let descendants = closure(&children);

        Ok(Ontology {
            class_of,
            members,
            children,
            descendants,
            canonical,
        })
    }

    pub fn contains(&self, term: &str) -> bool {
        self.class_of.contains_key(&normalize_term(term))
    }

    pub fn node_count(&self) -> usize {
        self.class_of.len()
    }

    pub fn class_count(&self) -> usize {
        self.members.len()
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(BTreeSet::len).sum()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.class_of.keys().map(String::as_str)
    }

    /// Synonyms of `term` (normalized), including the term itself.
    pub fn synonyms_of(&self, term: &str) -> BTreeSet<String> {
        match self.class_of.get(&normalize_term(term)) {
            Some(&class) => self.members[class].clone(),
            None => BTreeSet::new(),
        }
    }

    pub fn canonical_items(&self) -> impl Iterator<Item = DataItem> + '_ {
        self.canonical.keys().copied()
    }

    pub fn relate(&self, u: &str, v: &str) -> Relation {
        let (u, v) = (normalize_term(u), normalize_term(v));
        if u == v {
            return Relation::Synonym;
        }
        match (self.class_of.get(&u), self.class_of.get(&v)) {
            (Some(&a), Some(&b)) => self.relate_classes(a, b),
            _ => Relation::Unrelated,
        }
    }

    fn relate_classes(&self, a: usize, b: usize) -> Relation {
        if a == b {
            Relation::Synonym
        } else if self.descendants[a].contains(&b) {
            Relation::Hypernym
        } else if self.descendants[b].contains(&a) {
            Relation::Hyponym
        } else {
            Relation::Unrelated
        }
    }

    /// Canonical items comparable with `term` under subsumption.
    pub fn align_to_items(&self, term: &str) -> BTreeSet<DataItem> {
        let norm = normalize_term(term);
        let Some(&class) = self.class_of.get(&norm) else {
            return BTreeSet::new();
        };
        self.canonical
            .iter()
            .filter(|(_, &c)| self.relate_classes(class, c).is_comparable())
            .map(|(&item, _)| item)
            .collect()
    }

    /// Relation between an arbitrary term and a canonical item.
    pub fn relate_item(&self, term: &str, item: DataItem) -> Relation {
        self.relate(term, item.name())
    }
}

/// Returns one cycle as a class path (first == last) if the graph has any.
fn find_cycle(children: &[BTreeSet<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut marks = vec![Mark::New; children.len()];
    for start in 0..children.len() {
        if marks[start] != Mark::New {
            continue;
        }
        // Iterative DFS; the stack holds (node, remaining children).
        let mut path = vec![start];
        let mut stack = vec![children[start].iter()];
        marks[start] = Mark::Active;
        while let Some(iter) = stack.last_mut() {
            match iter.next() {
                Some(&next) => match marks[next] {
                    Mark::Active => {
                        let pos = path.iter().position(|&n| n == next).unwrap();
                        let mut cycle = path[pos..].to_vec();
                        cycle.push(next);
                        return Some(cycle);
                    }
                    Mark::New => {
                        marks[next] = Mark::Active;
                        path.push(next);
                        stack.push(children[next].iter());
                    }
                    Mark::Done => {}
                },
                None => {
                    stack.pop();
                    let done = path.pop().unwrap();
                    marks[done] = Mark::Done;
                }
            }
        }
    }
    None
}

fn closure(children: &[BTreeSet<usize>]) -> Vec<BTreeSet<usize>> {
    let n = children.len();
    let mut memo: Vec<Option<BTreeSet<usize>>> = vec![None; n];
    fn visit(node: usize, children: &[BTreeSet<usize>], memo: &mut Vec<Option<BTreeSet<usize>>>) {
        if memo[node].is_some() {
            return;
        }
        let mut acc = BTreeSet::new();
        for &child in &children[node] {
            visit(child, children, memo);
            acc.insert(child);
            acc.extend(memo[child].as_ref().unwrap().iter().copied());
        }
        memo[node] = Some(acc);
    }
    for node in 0..n {
        visit(node, children, &mut memo);
    }
    memo.into_iter().map(Option::unwrap).collect()
}
