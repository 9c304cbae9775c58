//! The weighted directed ragam transition network.
//!
//! Every adjacent pair `(m, n)` in a concert adds one to the weight of the
//! directed edge `m -> n`. Parallel transitions collapse into one edge; the
//! per-concert provenance lives in each node's concert-id list instead.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use thiserror::Error;

use crate::corpus::{Corpus, RagamId, RagamMeta};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("node {node} out of range for a network of {n_nodes} nodes")]
    IndexOutOfRange { node: RagamId, n_nodes: usize },
    #[error("edge list line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Attribute set carried by each node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeAttributes {
    pub meta: Option<RagamMeta>,
    /// Concert ids containing this ragam, in corpus order, without duplicates.
    pub concerts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaagaNetwork {
    n_nodes: usize,
    /// Out-edges per source, sorted by destination id.
    adjacency: Vec<Vec<(RagamId, u64)>>,
    node_attrs: Vec<NodeAttributes>,
}

impl RaagaNetwork {
    pub fn build(corpus: &Corpus) -> Self {
        let n = corpus.vocabulary.len();
        let mut counts: Vec<BTreeMap<RagamId, u64>> = vec![BTreeMap::new(); n];
        let mut node_attrs: Vec<NodeAttributes> = corpus
            .vocabulary
            .metas()
            .iter()
            .map(|m| NodeAttributes {
                meta: Some(m.clone()),
                concerts: Vec::new(),
            })
            .collect();

        for concert in &corpus.concerts {
            for pair in concert.items.windows(2) {
                *counts[pair[0].index()].entry(pair[1]).or_insert(0) += 1;
            }
            let distinct: BTreeSet<RagamId> = concert.items.iter().copied().collect();
            for id in distinct {
                node_attrs[id.index()].concerts.push(concert.concert_id.clone());
            }
        }

        Self {
            n_nodes: n,
            adjacency: counts.into_iter().map(|m| m.into_iter().collect()).collect(),
            node_attrs,
        }
    }

    /// A network from explicit weighted edges; repeated pairs accumulate and
    /// zero weights are dropped. Node attributes are left empty.
    pub fn from_edges(n_nodes: usize, edges: &[(RagamId, RagamId, u64)]) -> Result<Self, NetworkError> {
        let mut counts: Vec<BTreeMap<RagamId, u64>> = vec![BTreeMap::new(); n_nodes];
        for &(src, dst, w) in edges {
            for node in [src, dst] {
                if node.index() >= n_nodes {
                    return Err(NetworkError::IndexOutOfRange { node, n_nodes });
                }
            }
            if w > 0 {
                *counts[src.index()].entry(dst).or_insert(0) += w;
            }
        }
        Ok(Self {
            n_nodes,
            adjacency: counts.into_iter().map(|m| m.into_iter().collect()).collect(),
            node_attrs: vec![NodeAttributes::default(); n_nodes],
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Out-neighbors of `v` in ascending destination order.
    pub fn out_neighbors(&self, v: RagamId) -> Result<&[(RagamId, u64)], NetworkError> {
        self.adjacency
            .get(v.index())
            .map(Vec::as_slice)
            .ok_or(NetworkError::IndexOutOfRange {
                node: v,
                n_nodes: self.n_nodes,
            })
    }

    /// Unchecked variant for hot loops where `v` is known valid.
    pub(crate) fn neighbors(&self, v: usize) -> &[(RagamId, u64)] {
        &self.adjacency[v]
    }

    pub fn weight(&self, src: RagamId, dst: RagamId) -> u64 {
        self.adjacency
            .get(src.index())
            .and_then(|out| {
                out.binary_search_by_key(&dst, |&(d, _)| d)
                    .ok()
                    .map(|i| out[i].1)
            })
            .unwrap_or(0)
    }

    pub fn has_edge(&self, src: RagamId, dst: RagamId) -> bool {
        self.weight(src, dst) > 0
    }

    pub fn out_degree(&self, v: RagamId) -> usize {
        self.adjacency.get(v.index()).map_or(0, Vec::len)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn total_weight(&self) -> u64 {
        self.adjacency.iter().flatten().map(|&(_, w)| w).sum()
    }

    /// All edges as `(src, dst, weight)`, ordered by source then destination.
    pub fn edges(&self) -> impl Iterator<Item = (RagamId, RagamId, u64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(src, out)| out.iter().map(move |&(dst, w)| (RagamId::from(src), dst, w)))
    }

    pub fn node_attrs(&self, v: RagamId) -> Option<&NodeAttributes> {
        self.node_attrs.get(v.index())
    }

    /// Every concert id that contributed to this network.
    pub fn source_concerts(&self) -> BTreeSet<&str> {
        self.node_attrs
            .iter()
            .flat_map(|a| a.concerts.iter().map(String::as_str))
            .collect()
    }

    /// Writes the edge list as `src,dst,weight` CSV with numeric ids.
    pub fn write_edge_csv<W: Write>(&self, mut sink: W) -> Result<(), NetworkError> {
        writeln!(sink, "src,dst,weight")?;
        for (src, dst, w) in self.edges() {
            writeln!(sink, "{src},{dst},{w}")?;
        }
        sink.flush()?;
        Ok(())
    }

    /// Reads an edge list written by [`write_edge_csv`](Self::write_edge_csv).
    /// Without `n_nodes` the node count is one past the largest id seen.
    pub fn read_edge_csv<R: Read>(source: R, n_nodes: Option<usize>) -> Result<Self, NetworkError> {
        let mut text = String::new();
        let mut source = source;
        source.read_to_string(&mut text)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "src,dst,weight" => {}
            _ => {
                return Err(NetworkError::Malformed {
                    line: 1,
                    message: "expected header src,dst,weight".into(),
                })
            }
        }
        let mut edges = Vec::new();
        let mut max_id = None;
        for (i, line) in lines {
            let line_no = i as u64 + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(NetworkError::Malformed {
                    line: line_no,
                    message: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<u64>().map_err(|_| NetworkError::Malformed {
                    line: line_no,
                    message: format!("not a non-negative integer: {s:?}"),
                })
            };
            let (src, dst, w) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
            max_id = max_id.max(Some(src.max(dst)));
            edges.push((RagamId(src as u32), RagamId(dst as u32), w));
        }
        let n = n_nodes.unwrap_or_else(|| max_id.map_or(0, |m| m as usize + 1));
        Self::from_edges(n, &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Concert, Corpus, RagamType, Vocabulary};

    fn vocab(n: usize) -> Vocabulary {
        Vocabulary::new(
            (0..n)
                .map(|i| RagamMeta {
                    id: RagamId::from(i),
                    name: format!("r{i}"),
                    is_janya: true,
                    mela_number: None,
                    mela_category: None,
                    ragam_type: RagamType::Audava,
                    combo: None,
                    vakram: false,
                })
                .collect(),
        )
        .unwrap()
    }

    fn corpus(n: usize, concerts: &[&[u32]]) -> Corpus {
        Corpus {
            vocabulary: vocab(n),
            concerts: concerts
                .iter()
                .enumerate()
                .map(|(i, items)| Concert {
                    concert_id: format!("C{}", i + 1),
                    date: None,
                    items: items.iter().map(|&x| RagamId(x)).collect(),
                })
                .collect(),
        }
    }

    const A: RagamId = RagamId(0);
    const B: RagamId = RagamId(1);
    const C: RagamId = RagamId(2);
    const D: RagamId = RagamId(3);

    #[test]
    fn counts_shared_prefix() {
        let net = RaagaNetwork::build(&corpus(4, &[&[0, 1, 2], &[0, 1, 3]]));
        let edges: Vec<_> = net.edges().collect();
        assert_eq!(edges, vec![(A, B, 2), (B, C, 1), (B, D, 1)]);
        assert_eq!(net.node_attrs(A).unwrap().concerts, vec!["C1", "C2"]);
        assert_eq!(net.node_attrs(C).unwrap().concerts, vec!["C1"]);
        assert_eq!(net.node_attrs(D).unwrap().concerts, vec!["C2"]);
    }

    #[test]
    fn empty_corpus_has_isolated_nodes() {
        let net = RaagaNetwork::build(&corpus(5, &[]));
        assert_eq!(net.n_nodes(), 5);
        assert_eq!(net.edge_count(), 0);
        assert!(net.out_neighbors(RagamId(4)).unwrap().is_empty());
    }

    #[test]
    fn alternating_concert_counts_both_directions() {
        let net = RaagaNetwork::build(&corpus(2, &[&[0, 1, 0, 1]]));
        assert_eq!(net.weight(A, B), 2);
        assert_eq!(net.weight(B, A), 1);
        assert_eq!(net.total_weight(), 3);
        assert_eq!(net.node_attrs(A).unwrap().concerts, vec!["C1"]);
    }

    #[test]
    fn adjacent_repeat_is_a_self_loop() {
        let net = RaagaNetwork::build(&corpus(2, &[&[0, 0, 1]]));
        assert_eq!(net.weight(A, A), 1);
        assert_eq!(net.weight(A, B), 1);
    }

    #[test]
    fn out_neighbors_examples() {
        let net = RaagaNetwork::from_edges(3, &[(A, B, 2), (B, C, 1)]).unwrap();
        assert_eq!(net.out_neighbors(A).unwrap(), &[(B, 2)]);
        assert_eq!(net.out_neighbors(C).unwrap(), &[]);
        assert_eq!(net.out_neighbors(B).unwrap(), &[(C, 1)]);
        assert!(matches!(
            net.out_neighbors(RagamId(3)),
            Err(NetworkError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn edge_csv_round_trip() {
        let net = RaagaNetwork::build(&corpus(5, &[&[0, 1, 2], &[2, 1, 0, 3]]));
        let mut buf = Vec::new();
        net.write_edge_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("src,dst,weight\n0,1,1\n"));
        let back = RaagaNetwork::read_edge_csv(&buf[..], Some(5)).unwrap();
        assert_eq!(back.edges().collect::<Vec<_>>(), net.edges().collect::<Vec<_>>());
        assert_eq!(back.n_nodes(), 5);
        assert_eq!(RaagaNetwork::read_edge_csv(&buf[..], None).unwrap().n_nodes(), 4);
    }
}
