use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::preprocess::Vocabulary;

/// Sliding-window co-occurrence counts.
///
/// `token_windows[t]` counts windows that contain `t` at least once and
/// `pair_windows[(a, b)]` (with `a < b`) windows that contain both.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WindowStats {
    pub num_windows: u64,
    pub token_windows: HashMap<u32, u64>,
    pub pair_windows: HashMap<(u32, u32), u64>,
    pub window_len: usize,
}

impl WindowStats {
    pub fn token_count(&self, t: u32) -> u64 {
        self.token_windows.get(&t).copied().unwrap_or(0)
    }

    pub fn pair_count(&self, a: u32, b: u32) -> u64 {
        if a == b {
            return self.token_count(a);
        }
        let key = if a < b { (a, b) } else { (b, a) };
        self.pair_windows.get(&key).copied().unwrap_or(0)
    }

    /// Adds the counts of another shard of the same corpus.
    pub fn merge(&mut self, other: &WindowStats) {
        self.num_windows += other.num_windows;
        for (&t, &n) in &other.token_windows {
            *self.token_windows.entry(t).or_default() += n;
        }
        for (&p, &n) in &other.pair_windows {
            *self.pair_windows.entry(p).or_default() += n;
        }
    }
}

/// Counts windows of `window_len` consecutive tokens with step 1. A
/// document shorter than the window contributes a single whole-document
/// window. Reserved ids (`PAD`, `CLS`, `UNK`) take up positions but are not
/// counted as words.
pub fn count_windows(corpus: &[Vec<u32>], window_len: usize) -> Result<WindowStats> {
    if window_len == 0 {
        return Err(Error::invalid("window length must be at least 1"));
    }
    let mut stats = WindowStats {
        window_len,
        ..Default::default()
    };
    let mut distinct: Vec<u32> = Vec::with_capacity(window_len);
    for doc in corpus {
        let windows: Vec<&[u32]> = if doc.len() <= window_len {
            vec![doc.as_slice()]
        } else {
            doc.windows(window_len).collect()
        };
        for window in windows {
            stats.num_windows += 1;
            distinct.clear();
            distinct.extend(window.iter().copied().filter(|&t| Vocabulary::is_word(t)));
            distinct.sort_unstable();
            distinct.dedup();
            for (i, &a) in distinct.iter().enumerate() {
                *stats.token_windows.entry(a).or_default() += 1;
                for &b in &distinct[i + 1..] {
                    *stats.pair_windows.entry((a, b)).or_default() += 1;
                }
            }
        }
    }
    Ok(stats)
}

/// `ln(p(i,j) / (p(i) p(j)))` with window probabilities. Returns negative
/// infinity when the pair never co-occurs, which callers treat as "no
/// edge".
pub fn pmi(stats: &WindowStats, i: u32, j: u32) -> f64 {
    let n = stats.num_windows as f64;
    let nij = stats.pair_count(i, j);
    if nij == 0 || n == 0.0 {
        return f64::NEG_INFINITY;
    }
    let pij = nij as f64 / n;
    let pi = stats.token_count(i) as f64 / n;
    let pj = stats.token_count(j) as f64 / n;
    (pij / (pi * pj)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: u32 = 3;
    const B: u32 = 4;
    const C: u32 = 5;

    #[test]
    fn three_token_doc() {
        let s = count_windows(&[vec![A, B, C]], 2).unwrap();
        assert_eq!(s.num_windows, 2);
        assert_eq!(s.token_count(A), 1);
        assert_eq!(s.token_count(B), 2);
        assert_eq!(s.pair_count(A, B), 1);
        assert_eq!(s.pair_count(B, A), 1);
        assert_eq!(s.pair_count(A, C), 0);
    }

    #[test]
    fn short_document_is_one_window() {
        let s = count_windows(&[vec![A]], 10).unwrap();
        assert_eq!(s.num_windows, 1);
        assert_eq!(s.token_count(A), 1);
    }

    #[test]
    fn repeated_documents() {
        let s = count_windows(&[vec![A, B], vec![A, B]], 2).unwrap();
        assert_eq!(s.num_windows, 2);
        assert_eq!(s.pair_count(A, B), 2);
    }

    #[test]
    fn membership_not_occurrence() {
        let s = count_windows(&[vec![A, A, A]], 3).unwrap();
        assert_eq!(s.token_count(A), 1);
    }

    #[test]
    fn reserved_ids_are_skipped() {
        let s = count_windows(&[vec![crate::preprocess::UNK, A]], 2).unwrap();
        assert_eq!(s.token_windows.len(), 1);
        assert!(s.pair_windows.is_empty());
    }

    #[test]
    fn zero_window_rejected() {
        assert!(count_windows(&[vec![A]], 0).is_err());
    }

    #[test]
    fn pmi_values() {
        let mut s = WindowStats {
            num_windows: 8,
            window_len: 2,
            ..Default::default()
        };
        s.token_windows.insert(A, 2);
        s.token_windows.insert(B, 4);
        s.pair_windows.insert((A, B), 2);
        assert!((pmi(&s, A, B) - 2f64.ln()).abs() < 1e-12);

        // independence: 1/8 = (2/8) * (4/8)
        s.pair_windows.insert((A, B), 1);
        assert_eq!(pmi(&s, A, B), 0.0);

        s.pair_windows.clear();
        assert_eq!(pmi(&s, A, B), f64::NEG_INFINITY);
        assert_eq!(pmi(&s, A, 99), f64::NEG_INFINITY);
    }

    #[test]
    fn merge_is_additive() {
        let docs = vec![vec![A, B, C], vec![C, A], vec![B]];
        let whole = count_windows(&docs, 2).unwrap();
        let mut left = count_windows(&docs[..1], 2).unwrap();
        left.merge(&count_windows(&docs[1..], 2).unwrap());
        assert_eq!(whole, left);
    }
}
