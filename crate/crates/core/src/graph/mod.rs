//! Corpus graph over document and word nodes.
//!
//! Word-word edges carry positive PMI from sliding-window co-occurrence,
//! document-word edges carry TF-IDF, every node has a unit self-loop, and
//! the whole matrix is normalized symmetrically by its degrees. Each
//! document then gets a dense `L_S x L_S` slice of the normalized matrix
//! for the GCAN encoder.

mod corpus;
mod doc;
mod sparse;
mod windows;

pub use corpus::{build_adjacency, tfidf, CorpusGraph};
pub use doc::{extract_document_adjacency, DocAdjacency, DocNode};
pub use sparse::SymCsr;
pub use windows::{count_windows, pmi, WindowStats};
