use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const CLS: u32 = 1;
pub const UNK: u32 = 2;

const RESERVED: [&str; 3] = ["<pad>", "<cls>", "<unk>"];

/// Token/id map over the training corpus. Ids 0..3 are the reserved
/// `PAD`, `CLS` and `UNK` tokens; word ids follow in frequency order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    num_docs: usize,
}

impl Vocabulary {
    /// Keeps tokens seen at least `min_freq` times, most frequent first with
    /// lexicographic tie-breaking, truncated to `max_size` word tokens.
    pub fn build<S: AsRef<str>>(
        corpus: &[Vec<S>],
        min_freq: usize,
        max_size: Option<usize>,
    ) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("vocabulary corpus"));
        }
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for doc in corpus {
            for tok in doc {
                let tok = tok.as_ref();
                if !RESERVED.contains(&tok) {
                    *freq.entry(tok).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> = freq
            .into_iter()
            .filter(|&(_, n)| n >= min_freq.max(1))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        if let Some(max) = max_size {
            ranked.truncate(max);
        }

        let id_to_token: Vec<String> = RESERVED
            .iter()
            .copied()
            .chain(ranked.iter().map(|&(t, _)| t))
            .map(str::to_string)
            .collect();
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
            num_docs: corpus.len(),
        })
    }

    /// Rebuilds a vocabulary from its word list (reserved ids excluded).
    pub fn from_words(words: Vec<String>, num_docs: usize) -> Self {
        let id_to_token: Vec<String> = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(words)
            .collect();
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            token_to_id,
            id_to_token,
            num_docs,
        }
    }

    /// Number of word tokens (reserved ids excluded).
    pub fn num_words(&self) -> usize {
        self.id_to_token.len() - RESERVED.len()
    }

    /// Number of documents the vocabulary was built from.
    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    /// Total id count including reserved ids.
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.num_words() == 0
    }

    pub fn id(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn is_word(id: u32) -> bool {
        id > UNK
    }

    /// Word tokens in id order.
    pub fn words(&self) -> &[String] {
        &self.id_to_token[RESERVED.len()..]
    }

    /// Maps tokens to ids without the `[cls]` prefix or padding.
    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

/// Fixed-length id sequence: `[cls]`, the document tokens, then padding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenIdSequence {
    pub ids: Vec<u32>,
    pub true_length: usize,
}

impl TokenIdSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Tokens at positions `1..true_length`, decoded through `vocab`.
    pub fn decode<'v>(&self, vocab: &'v Vocabulary) -> Vec<&'v str> {
        self.ids[1..self.true_length]
            .iter()
            .filter_map(|&id| vocab.token(id))
            .collect()
    }
}

/// Prepends `[cls]`, maps out-of-vocabulary tokens to `UNK`, truncates to
/// `seq_len` and pads with `PAD`.
pub fn encode_document<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    seq_len: usize,
) -> Result<TokenIdSequence> {
    if seq_len < 2 {
        return Err(Error::invalid(format!(
            "sequence length must be at least 2, got {seq_len}"
        )));
    }
    let mut ids = Vec::with_capacity(seq_len);
    ids.push(CLS);
    ids.extend(tokens.iter().take(seq_len - 1).map(|t| vocab.id(t.as_ref())));
    let true_length = ids.len();
    ids.resize(seq_len, PAD);
    Ok(TokenIdSequence { ids, true_length })
}
