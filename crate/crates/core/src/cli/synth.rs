//! Seeded synthetic meme data where every label needs both modalities.
//!
//! Each sample has a text class `t` (one keyword in the OCR text) and an
//! image class `v` (a colored square in the image). With probability
//! `match_prob` the two agree; otherwise `v` is drawn uniformly from the
//! other three classes. Sub-label `c` is set iff `t == c` and `v == c`.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::write_dataset;
use crate::error::{Error, Result};
use crate::preprocess::{LabelVector, RawSample, RgbImage};

pub const CLASS_WORDS: [[&str; 3]; 4] = [
    ["amber", "apricot", "almond"],
    ["birch", "basil", "bramble"],
    ["cobalt", "cedar", "clover"],
    ["dune", "dahlia", "driftwood"],
];

pub const MOTIF_COLORS: [[u8; 3]; 4] = [[220, 40, 40], [40, 190, 60], [40, 70, 220], [225, 205, 40]];

const FILLER: [&str; 32] = [
    "when", "you", "the", "monday", "coffee", "meeting", "weekend", "friends", "again", "really",
    "that", "feeling", "cat", "morning", "just", "said", "nobody", "me", "every", "time", "work",
    "home", "late", "night", "finally", "look", "at", "this", "my", "face", "so", "true",
];

const NOISE_TOKENS: [&str; 4] = ["@user", "#meme", "http://t.co/x1", "www.memes.example"];

const CAPTIONS: [&str; 5] = [
    "a picture of a wall",
    "a close up of a screen",
    "an image with some text",
    "a photo of a room",
    "a blurry picture",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_train: usize,
    pub n_test: usize,
    /// Probability that the image class equals the text class.
    pub match_prob: f64,
    pub image_side: usize,
    pub motif_side: usize,
    /// Half-width of the uniform per-channel pixel noise.
    pub pixel_noise: u8,
    pub min_filler: usize,
    pub max_filler: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_train: 1000,
            n_test: 200,
            match_prob: 0.6,
            image_side: 40,
            motif_side: 12,
            pixel_noise: 30,
            min_filler: 3,
            max_filler: 7,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || !(0.0..=1.0).contains(&self.match_prob) {
            return Err(Error::invalid("n_train must be positive and match_prob in [0, 1]"));
        }
        if self.motif_side == 0 || self.image_side < self.motif_side + 8 {
            return Err(Error::invalid(format!(
                "image side {} leaves no room for a {}-pixel motif",
                self.image_side, self.motif_side
            )));
        }
        if self.min_filler > self.max_filler {
            return Err(Error::invalid("min_filler exceeds max_filler"));
        }
        Ok(())
    }

    /// Joint probability of every `(text class, image class)` pair.
    pub fn rule_table(&self) -> Vec<((usize, usize), f64)> {
        let mut table = Vec::with_capacity(16);
        for t in 0..4 {
            for v in 0..4 {
                let p = if t == v { self.match_prob } else { (1.0 - self.match_prob) / 3.0 };
                table.push(((t, v), 0.25 * p));
            }
        }
        table
    }
}

pub fn labels_for(t: usize, v: usize) -> LabelVector {
    let mut sub = [false; 4];
    if t == v {
        sub[t] = true;
    }
    LabelVector::from_sub_labels(sub)
}

/// Bayes-optimal exact-match accuracy of the label vector when seeing
/// only the text class, only the image class, or both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesAccuracy {
    pub text: f64,
    pub image: f64,
    pub joint: f64,
}

pub fn bayes_accuracy(spec: &SynthSpec) -> BayesAccuracy {
    let table = spec.rule_table();
    let best = |key: &dyn Fn(usize, usize) -> usize| {
        let mut mass: HashMap<(usize, LabelVector), f64> = HashMap::new();
        for &((t, v), p) in &table {
            *mass.entry((key(t, v), labels_for(t, v))).or_default() += p;
        }
        let mut per_obs: HashMap<usize, f64> = HashMap::new();
        for ((obs, _), p) in mass {
            let e = per_obs.entry(obs).or_default();
            *e = e.max(p);
        }
        per_obs.values().sum::<f64>()
    };
    BayesAccuracy {
        text: best(&|t, _| t),
        image: best(&|_, v| v),
        joint: best(&|t, v| t * 4 + v),
    }
}

fn text_for(rng: &mut ChaCha8Rng, spec: &SynthSpec, class: usize) -> String {
    let n = rng.gen_range(spec.min_filler..=spec.max_filler);
    let mut words: Vec<&str> = (0..n).map(|_| *FILLER.choose(rng).expect("filler")).collect();
    let keyword = CLASS_WORDS[class].choose(rng).expect("keyword");
    let at = rng.gen_range(0..=words.len());
    words.insert(at, keyword);
    if rng.gen_bool(0.3) {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, NOISE_TOKENS.choose(rng).expect("noise"));
    }
    let mut text = words.join(" ");
    if rng.gen_bool(0.5) {
        text = text.to_uppercase();
    }
    text
}

fn image_for(rng: &mut ChaCha8Rng, spec: &SynthSpec, class: usize) -> RgbImage {
    let side = spec.image_side;
    let noise = spec.pixel_noise as i32;
    let jitter = |base: u8, rng: &mut ChaCha8Rng| -> u8 {
        (base as i32 + rng.gen_range(-noise..=noise)).clamp(0, 255) as u8
    };
    let mut img = RgbImage::filled(side, side, [0, 0, 0]);
    for y in 0..side {
        for x in 0..side {
            let rgb = [jitter(128, rng), jitter(128, rng), jitter(128, rng)];
            img.set(x, y, rgb);
        }
    }
    // keep the motif away from the border so center crops retain it
    let margin = 4;
    let x0 = rng.gen_range(margin..=side - margin - spec.motif_side);
    let y0 = rng.gen_range(margin..=side - margin - spec.motif_side);
    let color = MOTIF_COLORS[class];
    for y in y0..y0 + spec.motif_side {
        for x in x0..x0 + spec.motif_side {
            let rgb = [jitter(color[0], rng), jitter(color[1], rng), jitter(color[2], rng)];
            img.set(x, y, rgb);
        }
    }
    img
}

fn sample(rng: &mut ChaCha8Rng, spec: &SynthSpec, id: String) -> RawSample {
    let t = rng.gen_range(0..4);
    let v = if rng.gen_bool(spec.match_prob) {
        t
    } else {
        let other = rng.gen_range(0..3);
        if other >= t {
            other + 1
        } else {
            other
        }
    };
    let captions = (0..rng.gen_range(1..=2))
        .map(|_| CAPTIONS.choose(rng).expect("caption").to_string())
        .collect();
    RawSample {
        ocr_text: text_for(rng, spec, t),
        captions,
        image: image_for(rng, spec, v),
        labels: labels_for(t, v),
        id,
    }
}

/// Train and test samples, deterministic in `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<(Vec<RawSample>, Vec<RawSample>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let train = (0..spec.n_train)
        .map(|i| sample(&mut rng, spec, format!("tr{i:06}")))
        .collect();
    let test = (0..spec.n_test)
        .map(|i| sample(&mut rng, spec, format!("te{i:06}")))
        .collect();
    Ok((train, test))
}

/// Writes `train/` and `test/` dataset directories under `out`.
pub fn gen_synth(spec: &SynthSpec, out: &Path) -> Result<()> {
    let (train, test) = generate(spec)?;
    write_dataset(&out.join("train"), &train)?;
    write_dataset(&out.join("test"), &test)
}
