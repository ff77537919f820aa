/// Punctuation kept by [`clean_text`] and split off by [`tokenize`].
pub const PUNCTUATION: [char; 5] = ['.', ',', '!', '?', '\''];

fn is_link(token: &str) -> bool {
    token.starts_with("http://") || token.starts_with("https://") || token.starts_with("www.")
}

fn keep_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || PUNCTUATION.contains(&c)
}

/// Lowercases and filters OCR text down to ASCII letters, digits, spaces
/// and `. , ! ? '`.
///
/// Whitespace tokens that are links (`http://`, `https://`, `www.`),
/// mentions (`@...`) or hashtags (`#...`) are removed whole. Every other
/// character outside the kept set is dropped, so `"à¶´abc"` becomes
/// `"abc"`. A token that only turns into a link after filtering is removed
/// as well, which keeps the function idempotent.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for token in raw.split_whitespace() {
        let lower = token.to_lowercase();
        if lower.starts_with('@') || lower.starts_with('#') || is_link(&lower) {
            continue;
        }
        let kept: String = lower.chars().filter(|&c| keep_char(c)).collect();
        if kept.is_empty() || is_link(&kept) {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&kept);
    }
    out
}

/// Joins captions with `" and "` and appends them to the OCR text after a
/// `". "` separator, closing with a period.
///
/// Empty captions are skipped. A separator period is not added when the
/// preceding text already ends with one.
pub fn combine_texts(ocr: &str, captions: &[String]) -> String {
    let captions: Vec<&str> = captions
        .iter()
        .map(|c| c.trim())
        .filter(|c| !c.is_empty())
        .collect();
    if captions.is_empty() {
        return ocr.to_string();
    }
    let joined = captions.join(" and ");
    let mut out = String::with_capacity(ocr.len() + joined.len() + 3);
    if !ocr.is_empty() {
        out.push_str(ocr);
        if !ocr.ends_with('.') {
            out.push('.');
        }
        out.push(' ');
    }
    out.push_str(&joined);
    if !joined.ends_with('.') {
        out.push('.');
    }
    out
}

/// Whitespace tokenizer that also splits each punctuation character into
/// its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        for c in word.chars() {
            if PUNCTUATION.contains(&c) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}
