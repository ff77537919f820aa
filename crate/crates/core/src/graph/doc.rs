use ndarray::Array2;

use super::corpus::{CorpusGraph, UnseenDoc};
use crate::error::{Error, Result};
use crate::preprocess::TokenIdSequence;

/// Which document supplied row and column 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocNode {
    Train(usize),
    Unseen,
}

/// Dense `L_S x L_S` slice of the normalized adjacency for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DocAdjacency {
    pub matrix: Array2<f64>,
    pub doc: DocNode,
}

impl DocAdjacency {
    pub fn identity(seq_len: usize) -> Self {
        DocAdjacency {
            matrix: Array2::eye(seq_len),
            doc: DocNode::Unseen,
        }
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Doc,
    Word(usize, u32),
    Pad,
}

fn slots(graph: &CorpusGraph, seq: &TokenIdSequence) -> Vec<Slot> {
    seq.ids
        .iter()
        .enumerate()
        .map(|(p, &id)| {
            if p == 0 {
                Slot::Doc
            } else if p < seq.true_length {
                graph
                    .word_node(id)
                    .map_or(Slot::Pad, |node| Slot::Word(node, id))
            } else {
                Slot::Pad
            }
        })
        .collect()
}

fn fill(
    graph: &CorpusGraph,
    seq: &TokenIdSequence,
    doc_self: f64,
    doc_word: impl Fn(usize, u32) -> f64,
) -> Array2<f64> {
    let slots = slots(graph, seq);
    let a = graph.normalized();
    let n = slots.len();
    Array2::from_shape_fn((n, n), |(p, q)| match (slots[p], slots[q]) {
        (Slot::Pad, _) | (_, Slot::Pad) => {
            if p == q {
                1.0
            } else {
                0.0
            }
        }
        (Slot::Doc, Slot::Doc) => doc_self,
        (Slot::Doc, Slot::Word(w, id)) | (Slot::Word(w, id), Slot::Doc) => doc_word(w, id),
        (Slot::Word(u, _), Slot::Word(v, _)) => a.get(u, v),
    })
}

/// Restricts the normalized adjacency to the nodes of training document
/// `doc`: position 0 is the document node, the remaining real tokens are
/// their word nodes. Padding and unknown tokens only keep a unit
/// self-loop.
pub fn extract_document_adjacency(
    graph: &CorpusGraph,
    doc: usize,
    seq: &TokenIdSequence,
) -> Result<DocAdjacency> {
    if doc >= graph.num_docs() {
        return Err(Error::invalid(format!(
            "document {doc} out of range (graph has {})",
            graph.num_docs()
        )));
    }
    let a = graph.normalized();
    let matrix = fill(graph, seq, a.get(doc, doc), |w, _| a.get(doc, w));
    Ok(DocAdjacency {
        matrix,
        doc: DocNode::Train(doc),
    })
}

impl CorpusGraph {
    /// Adjacency for a document that is not a graph node; its `[cls]`
    /// row comes from [`CorpusGraph::unseen_doc`].
    pub fn extract_unseen(&self, unseen: &UnseenDoc, seq: &TokenIdSequence) -> DocAdjacency {
        let matrix = fill(self, seq, unseen.self_loop, |_, id| {
            unseen.words.get(&id).copied().unwrap_or(0.0)
        });
        DocAdjacency {
            matrix,
            doc: DocNode::Unseen,
        }
    }
}
