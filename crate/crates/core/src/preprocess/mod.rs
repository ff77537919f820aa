//! Turning raw dataset rows into model-ready token sequences and image
//! tensors.

mod image;
mod text;
mod vocab;

pub use self::image::{normalize_image, ImageTensor, RgbImage};
pub use self::text::{clean_text, combine_texts, tokenize, PUNCTUATION};
pub use self::vocab::{encode_document, TokenIdSequence, Vocabulary, CLS, PAD, UNK};

/// Binary labels of one sample: the misogyny flag and the four
/// sub-categories (shaming, stereotype, objectification, violence).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LabelVector {
    pub mis: bool,
    pub shm: bool,
    pub ste: bool,
    pub obj: bool,
    pub vio: bool,
}

impl LabelVector {
    pub fn from_sub_labels(sub: [bool; 4]) -> Self {
        LabelVector {
            mis: sub.iter().any(|&b| b),
            shm: sub[0],
            ste: sub[1],
            obj: sub[2],
            vio: sub[3],
        }
    }

    pub fn sub_labels(&self) -> [bool; 4] {
        [self.shm, self.ste, self.obj, self.vio]
    }

    /// Sub-categories only apply to misogynous samples.
    pub fn is_valid(&self) -> bool {
        self.mis || !self.sub_labels().iter().any(|&b| b)
    }

    /// Targets for a model with `n` outputs: `[mis]` for one output, the
    /// four sub-categories for four.
    pub fn targets(&self, n: usize) -> Vec<f64> {
        let f = |b: bool| if b { 1.0 } else { 0.0 };
        match n {
            1 => vec![f(self.mis)],
            _ => self.sub_labels().iter().map(|&b| f(b)).collect(),
        }
    }
}

/// One dataset row together with its decoded image.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub id: String,
    pub ocr_text: String,
    pub captions: Vec<String>,
    pub image: RgbImage,
    pub labels: LabelVector,
}

impl RawSample {
    /// Cleaned OCR text merged with the cleaned captions.
    pub fn merged_text(&self) -> String {
        let captions: Vec<String> = self.captions.iter().map(|c| clean_text(c)).collect();
        combine_texts(&clean_text(&self.ocr_text), &captions)
    }
}
