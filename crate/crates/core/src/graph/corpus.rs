use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::sparse::SymCsr;
use super::windows::{pmi, WindowStats};
use crate::error::{Error, Result};
use crate::preprocess::{Vocabulary, UNK};

/// The corpus graph over `[D_1..D_nD, W_1..W_nW]`.
///
/// `raw` holds the unnormalized adjacency (self-loops, positive PMI,
/// TF-IDF) and `normalized` the matrix `D^{-1/2} A D^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusGraph {
    num_docs: usize,
    num_words: usize,
    raw: SymCsr,
    normalized: SymCsr,
    degree: Vec<f64>,
    /// Training document frequency per word node; empty when the graph was
    /// loaded from a file.
    doc_freq: Vec<u64>,
}

/// Normalized weights for a document that is not a node of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct UnseenDoc {
    pub self_loop: f64,
    pub words: HashMap<u32, f64>,
}

fn document_frequencies(corpus: &[Vec<u32>], num_words: usize) -> Vec<u64> {
    let mut df = vec![0u64; num_words];
    let mut seen = vec![usize::MAX; num_words];
    for (k, doc) in corpus.iter().enumerate() {
        for &t in doc {
            if let Some(w) = word_index(t, num_words) {
                if seen[w] != k {
                    seen[w] = k;
                    df[w] += 1;
                }
            }
        }
    }
    df
}

fn word_index(id: u32, num_words: usize) -> Option<usize> {
    if id <= UNK {
        return None;
    }
    let w = (id - UNK - 1) as usize;
    (w < num_words).then_some(w)
}

fn term_counts(doc: &[u32], num_words: usize) -> BTreeMap<usize, u64> {
    let mut tf = BTreeMap::new();
    for &t in doc {
        if let Some(w) = word_index(t, num_words) {
            *tf.entry(w).or_insert(0) += 1;
        }
    }
    tf
}

fn idf(num_docs: usize, df: u64) -> f64 {
    if df == 0 {
        0.0
    } else {
        (num_docs as f64 / df as f64).ln()
    }
}

/// Raw term count of `token` in document `doc` times `ln(n_D / df)`.
/// Zero when the token is absent from the document or from the corpus.
pub fn tfidf(corpus: &[Vec<u32>], doc: usize, token: u32) -> f64 {
    let tf = corpus[doc].iter().filter(|&&t| t == token).count();
    if tf == 0 {
        return 0.0;
    }
    let df = corpus.iter().filter(|d| d.contains(&token)).count();
    tf as f64 * idf(corpus.len(), df as u64)
}

/// Assembles the adjacency from window statistics and TF-IDF, then
/// normalizes it by its degrees. There are no document-document edges.
pub fn build_adjacency(
    corpus: &[Vec<u32>],
    stats: &WindowStats,
    vocab: &Vocabulary,
) -> Result<CorpusGraph> {
    if vocab.is_empty() {
        return Err(Error::Empty("vocabulary"));
    }
    let num_docs = corpus.len();
    let num_words = vocab.num_words();
    let n = num_docs + num_words;
    let doc_freq = document_frequencies(corpus, num_words);

    let mut upper = BTreeMap::new();
    for i in 0..n {
        upper.insert((i, i), 1.0);
    }
    for (k, doc) in corpus.iter().enumerate() {
        for (w, count) in term_counts(doc, num_words) {
            let v = count as f64 * idf(num_docs, doc_freq[w]);
            if v != 0.0 {
                upper.insert((k, num_docs + w), v);
            }
        }
    }
    for &(a, b) in stats.pair_windows.keys() {
        let (Some(wa), Some(wb)) = (word_index(a, num_words), word_index(b, num_words)) else {
            continue;
        };
        let v = pmi(stats, a, b);
        if v > 0.0 {
            let (i, j) = (num_docs + wa.min(wb), num_docs + wa.max(wb));
            upper.insert((i, j), v);
        }
    }

    let raw = SymCsr::from_upper(n, &upper);
    Ok(CorpusGraph::from_parts(num_docs, num_words, raw, doc_freq))
}

impl CorpusGraph {
    fn from_parts(num_docs: usize, num_words: usize, raw: SymCsr, doc_freq: Vec<u64>) -> Self {
        let degree = raw.row_sums();
        let normalized = raw.scaled_symmetric(&degree);
        CorpusGraph {
            num_docs,
            num_words,
            raw,
            normalized,
            degree,
            doc_freq,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }

    pub fn raw(&self) -> &SymCsr {
        &self.raw
    }

    pub fn normalized(&self) -> &SymCsr {
        &self.normalized
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// Node index of a vocabulary id, `None` for reserved or unknown ids.
    pub fn word_node(&self, id: u32) -> Option<usize> {
        word_index(id, self.num_words).map(|w| self.num_docs + w)
    }

    /// Normalized `[cls]` weights for a document outside the graph, using
    /// training document frequencies and training degrees. The unseen node
    /// has degree `1 + sum(tfidf)`; word degrees are left unchanged.
    pub fn unseen_doc(&self, doc: &[u32]) -> Result<UnseenDoc> {
        if self.doc_freq.is_empty() {
            return Err(Error::invalid(
                "graph has no document frequencies (loaded from file)",
            ));
        }
        let weights: Vec<(usize, f64)> = term_counts(doc, self.num_words)
            .into_iter()
            .map(|(w, c)| (w, c as f64 * idf(self.num_docs, self.doc_freq[w])))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        let deg = 1.0 + weights.iter().map(|&(_, v)| v).sum::<f64>();
        let inv = 1.0 / deg.sqrt();
        let words = weights
            .into_iter()
            .map(|(w, v)| {
                let node = self.num_docs + w;
                let id = (w + UNK as usize + 1) as u32;
                (id, v * (inv * (1.0 / self.degree[node].sqrt())))
            })
            .collect();
        Ok(UnseenDoc {
            self_loop: 1.0 * (inv * inv),
            words,
        })
    }

    /// Writes the upper triangle of the raw adjacency:
    /// `TEXTGCN v1 n_D n_W nnz` then one `row col value` line per entry.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let entries: Vec<_> = self.raw.upper().collect();
        let io = |e| Error::io(path, e);
        writeln!(
            w,
            "TEXTGCN v1 {} {} {}",
            self.num_docs,
            self.num_words,
            entries.len()
        )
        .map_err(io)?;
        for (i, j, v) in entries {
            writeln!(w, "{i} {j} {v:.16e}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Reads a graph written by [`CorpusGraph::write`]. Document
    /// frequencies are not part of the file, so the result cannot score
    /// unseen documents.
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let parse_err = |line: usize, msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        };
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "TEXTGCN" || fields[1] != "v1" {
            return Err(parse_err(1, "expected `TEXTGCN v1 n_D n_W nnz`"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| parse_err(1, "bad count"));
        let (num_docs, num_words, nnz) = (num(fields[2])?, num(fields[3])?, num(fields[4])?);
        let n = num_docs + num_words;

        let mut upper = BTreeMap::new();
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                [i, j, v] => i
                    .parse::<usize>()
                    .ok()
                    .zip(j.parse::<usize>().ok())
                    .zip(v.parse::<f64>().ok()),
                _ => None,
            };
            let ((i, j), v) = parsed.ok_or_else(|| parse_err(lineno, "expected `row col value`"))?;
            if i > j || j >= n {
                return Err(parse_err(lineno, "entry outside the upper triangle"));
            }
            upper.insert((i, j), v);
        }
        if upper.len() != nnz {
            return Err(parse_err(1, "entry count does not match header"));
        }
        let raw = SymCsr::from_upper(n, &upper);
        Ok(CorpusGraph::from_parts(num_docs, num_words, raw, Vec::new()))
    }
}
