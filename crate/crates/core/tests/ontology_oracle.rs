//! `relate` against brute-force reachability on random term graphs.

use std::collections::BTreeSet;

use labelint_core::ontology::{Ontology, OntologyFile, Relation};
use labelint_core::Error;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    synonyms: Vec<(usize, usize)>,
}

fn term(i: usize) -> String {
    format!("node {i}")
}

fn random_dag(rng: &mut StdRng, merge: bool) -> Graph {
    let n = rng.random_range(2..=50);
    let p = rng.random_range(0.02..0.2);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b));
            }
        }
    }
    let mut synonyms = Vec::new();
    if merge {
        for _ in 0..rng.random_range(0..4) {
            synonyms.push((rng.random_range(0..n), rng.random_range(0..n)));
        }
    }
    Graph { n, edges, synonyms }
}

fn to_file(g: &Graph) -> OntologyFile {
    let mut groups: Vec<Vec<String>> = (0..g.n).map(|i| vec![term(i)]).collect();
    for &(a, b) in &g.synonyms {
        groups.push(vec![term(a), term(b)]);
    }
    OntologyFile {
        synonyms: groups,
        edges: g.edges.iter().map(|&(a, b)| [term(a), term(b)]).collect(),
        canonical: Vec::new(),
    }
}

/// Synonym classes by repeated relabelling, then reachability by
/// Floyd-Warshall over the quotient graph.
struct Oracle {
    class: Vec<usize>,
    reach: Vec<Vec<bool>>,
}

impl Oracle {
    fn new(g: &Graph) -> Self {
        let mut class: Vec<usize> = (0..g.n).collect();
        loop {
            let mut changed = false;
            for &(a, b) in &g.synonyms {
                let (ca, cb) = (class[a], class[b]);
                if ca != cb {
                    let lo = ca.min(cb);
                    for c in class.iter_mut() {
                        if *c == ca || *c == cb {
                            *c = lo;
                        }
                    }
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut reach = vec![vec![false; g.n]; g.n];
        for &(a, b) in &g.edges {
            reach[class[a]][class[b]] = true;
        }
        for k in 0..g.n {
            for i in 0..g.n {
                for j in 0..g.n {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        Oracle { class, reach }
    }

    fn cyclic(&self) -> bool {
        (0..self.reach.len()).any(|c| self.reach[c][c])
    }

    fn relate(&self, u: usize, v: usize) -> Relation {
        let (cu, cv) = (self.class[u], self.class[v]);
        if cu == cv {
            Relation::Synonym
        } else if self.reach[cu][cv] {
            Relation::Hypernym
        } else if self.reach[cv][cu] {
            Relation::Hyponym
        } else {
            Relation::Unrelated
        }
    }
}

fn check(g: &Graph) {
    let oracle = Oracle::new(g);
    match Ontology::from_file(&to_file(g)) {
        Err(Error::OntologyCycle(path)) => {
            assert!(oracle.cyclic(), "spurious cycle {path:?}");
        }
        Err(other) => panic!("unexpected error {other}"),
        Ok(o) => {
            assert!(!oracle.cyclic(), "missed a cycle");
            for u in 0..g.n {
                for v in 0..g.n {
                    assert_eq!(
                        o.relate(&term(u), &term(v)),
                        oracle.relate(u, v),
                        "relate({u}, {v}) edges={:?} syn={:?}",
                        g.edges,
                        g.synonyms
                    );
                }
            }
        }
    }
}

#[test]
fn relate_matches_closure_oracle_on_random_dags() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    for _ in 0..100 {
        check(&random_dag(&mut rng, false));
    }
}

#[test]
fn synonym_merges_match_oracle_including_cycles() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    let mut cyclic = 0;
    for _ in 0..200 {
        let g = random_dag(&mut rng, true);
        cyclic += usize::from(Oracle::new(&g).cyclic());
        check(&g);
    }
    assert!(cyclic > 0, "generator never produced a cycle");
}

#[test]
fn duplicate_edges_are_idempotent() {
    let g = Graph {
        n: 3,
        edges: vec![(0, 1), (1, 2)],
        synonyms: Vec::new(),
    };
    let mut doubled = to_file(&g);
    doubled.edges.extend(to_file(&g).edges);
    let a = Ontology::from_file(&to_file(&g)).unwrap();
    let b = Ontology::from_file(&doubled).unwrap();
    assert_eq!(a.edge_count(), b.edge_count());
    let terms: BTreeSet<String> = (0..3).map(term).collect();
    for u in &terms {
        for v in &terms {
            assert_eq!(a.relate(u, v), b.relate(u, v));
        }
    }
}
