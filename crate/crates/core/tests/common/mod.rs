//! Independent dense oracles shared by the integration tests. Nothing in
//! here calls into the sparse or batched code paths it checks.
#![allow(dead_code)]

pub mod grad;

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Dense {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

pub fn to_dense(a: &ndarray::Array2<f64>) -> Dense {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = b[0].len();
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| row.iter().enumerate().map(|(k, v)| v * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn transpose(a: &Dense) -> Dense {
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Dense TextGCN adjacency straight from the definitions: enumerate every
/// window, count memberships, and fill an `(n_D + n_W)^2` matrix.
pub struct DenseGraph {
    pub raw: Dense,
    pub normalized: Dense,
}

pub fn dense_graph(corpus: &[Vec<u32>], num_words: usize, window: usize) -> DenseGraph {
    let nd = corpus.len();
    let n = nd + num_words;
    let word = |id: u32| (id >= 3 && ((id - 3) as usize) < num_words).then(|| (id - 3) as usize);

    let mut windows: Vec<BTreeSet<usize>> = Vec::new();
    for doc in corpus {
        let spans: Vec<&[u32]> = if doc.len() <= window {
            vec![&doc[..]]
        } else {
            (0..=doc.len() - window).map(|s| &doc[s..s + window]).collect()
        };
        for span in spans {
            windows.push(span.iter().filter_map(|&t| word(t)).collect());
        }
    }
    let total = windows.len() as f64;
    let count = |pred: &dyn Fn(&BTreeSet<usize>) -> bool| windows.iter().filter(|w| pred(w)).count() as f64;

    let mut a = vec![vec![0.0; n]; n];
    for i in 0..num_words {
        for j in 0..num_words {
            if i == j {
                continue;
            }
            let nij = count(&|w| w.contains(&i) && w.contains(&j));
            if nij == 0.0 {
                continue;
            }
            let ni = count(&|w| w.contains(&i));
            let nj = count(&|w| w.contains(&j));
            let pmi = ((nij / total) / ((ni / total) * (nj / total))).ln();
            if pmi > 0.0 {
                a[nd + i][nd + j] = pmi;
            }
        }
    }
    for (k, doc) in corpus.iter().enumerate() {
        let mut tf: HashMap<usize, f64> = HashMap::new();
        for &t in doc {
            if let Some(w) = word(t) {
                *tf.entry(w).or_default() += 1.0;
            }
        }
        for (w, c) in tf {
            let df = corpus
                .iter()
                .filter(|d| d.iter().any(|&t| word(t) == Some(w)))
                .count() as f64;
            let v = c * (nd as f64 / df).ln();
            a[k][nd + w] = v;
            a[nd + w][k] = v;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let normalized = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| a[i][j] / deg[i].sqrt() / deg[j].sqrt())
                .collect()
        })
        .collect();
    DenseGraph { raw: a, normalized }
}

pub fn softmax_row(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Dense per-head self-attention, computed step by step.
pub fn dense_attention(x: &Dense, wq: &Dense, wk: &Dense, wv: &Dense, heads: usize) -> Vec<Dense> {
    let q = matmul(x, &transpose(wq));
    let k = matmul(x, &transpose(wk));
    let v = matmul(x, &transpose(wv));
    let dk = wq.len() / heads;
    let l = x.len();
    (0..heads)
        .map(|h| {
            let cols = h * dk..(h + 1) * dk;
            let mut out = vec![vec![0.0; dk]; l];
            for i in 0..l {
                let logits: Vec<f64> = (0..l)
                    .map(|j| {
                        cols.clone().map(|c| q[i][c] * k[j][c]).sum::<f64>() / (dk as f64).sqrt()
                    })
                    .collect();
                let a = softmax_row(&logits);
                for (o, c) in out[i].iter_mut().zip(cols.clone()) {
                    *o = (0..l).map(|j| a[j] * v[j][c]).sum();
                }
            }
            out
        })
        .collect()
}

pub struct DenseLayer {
    pub wq: Dense,
    pub wk: Dense,
    pub wv: Dense,
    pub wo: Dense,
    pub bo: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub heads: usize,
    pub is_last: bool,
}

/// `LN(X + FC(fuse(A alpha_j)))` with loops.
pub fn dense_gcan_layer(x: &Dense, adj: &Dense, p: &DenseLayer) -> Dense {
    let heads = dense_attention(x, &p.wq, &p.wk, &p.wv, p.heads);
    let weighted: Vec<Dense> = heads.iter().map(|h| matmul(adj, h)).collect();
    let l = x.len();
    let fused: Dense = (0..l)
        .map(|i| {
            if p.is_last {
                let dk = weighted[0][0].len();
                (0..dk)
                    .map(|c| weighted.iter().map(|w| w[i][c]).sum::<f64>() / p.heads as f64)
                    .collect()
            } else {
                weighted.iter().flat_map(|w| w[i].clone()).collect()
            }
        })
        .collect();
    let proj = matmul(&fused, &transpose(&p.wo));
    (0..l)
        .map(|i| {
            let z: Vec<f64> = (0..x[i].len()).map(|c| x[i][c] + proj[i][c] + p.bo[c]).collect();
            let d = z.len() as f64;
            let mean = z.iter().sum::<f64>() / d;
            let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
            z.iter()
                .enumerate()
                .map(|(c, v)| (v - mean) / (var + 1e-5).sqrt() * p.gamma[c] + p.beta[c])
                .collect()
        })
        .collect()
}

pub fn dense_layer_from(layer: &gcan_fusion::nn::GcanLayer) -> DenseLayer {
    DenseLayer {
        wq: to_dense(&layer.attention.w_query),
        wk: to_dense(&layer.attention.w_key),
        wv: to_dense(&layer.attention.w_value),
        wo: to_dense(&layer.projection.weight),
        bo: layer.projection.bias.to_vec(),
        gamma: layer.norm.gamma.to_vec(),
        beta: layer.norm.beta.to_vec(),
        heads: layer.attention.heads,
        is_last: layer.is_last,
    }
}

/// Random symmetric matrix with entries in (0, 1] on used rows.
pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> ndarray::Array2<f64> {
    let mut a = ndarray::Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(0.0..1.0);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    a
}

/// Random corpus of word ids `3..3+vocab` with `docs` documents of length
/// `0..=max_len`.
pub fn random_corpus(rng: &mut ChaCha8Rng, docs: usize, vocab: u32, max_len: usize) -> Vec<Vec<u32>> {
    (0..docs)
        .map(|_| {
            let len = rng.gen_range(0..=max_len);
            (0..len).map(|_| rng.gen_range(3..3 + vocab)).collect()
        })
        .collect()
}
