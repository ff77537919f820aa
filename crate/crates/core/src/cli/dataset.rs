//! Dataset directories: `data.tsv` plus one binary PPM per sample under
//! `images/`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::preprocess::{LabelVector, RawSample, RgbImage};

pub const DATA_FILE: &str = "data.tsv";
pub const IMAGE_DIR: &str = "images";
pub const HEADER: &str = "id\tocr_text\tcaptions\tmis\tshm\tste\tobj\tvio";

pub fn image_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(IMAGE_DIR).join(format!("{id}.ppm"))
}

/// Encodes an image as binary PPM (`P6`, maxval 255).
pub fn ppm_bytes(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    fs::write(path, ppm_bytes(img)).map_err(|e| Error::io(path, e))
}

/// Decodes a binary PPM with 8-bit samples; `#` comments are allowed in
/// the header.
pub fn parse_ppm(bytes: &[u8]) -> std::result::Result<RgbImage, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P6" {
        return Err(format!("expected magic P6, found {}", fields[0]));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| format!("bad header number `{s}`"));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(format!("only maxval 255 is supported, found {maxval}"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = w * h * 3;
    if bytes.len() < pos + need {
        return Err(format!("raster has {} bytes, expected {need}", bytes.len().saturating_sub(pos)));
    }
    RgbImage::new(w, h, bytes[pos..pos + need].to_vec()).map_err(|e| e.to_string())
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ppm(&bytes).map_err(|msg| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg,
    })
}

fn flag(s: &str) -> Option<bool> {
    match s {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

fn parse_row(line: &str) -> std::result::Result<(String, String, Vec<String>, LabelVector), String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 8 {
        return Err(format!("expected 8 tab-separated columns, found {}", cols.len()));
    }
    if cols[0].is_empty() || cols[0].contains(['/', '\\']) {
        return Err(format!("invalid sample id `{}`", cols[0]));
    }
    let mut bits = [false; 5];
    for (b, col) in bits.iter_mut().zip(&cols[3..]) {
        *b = flag(col).ok_or_else(|| format!("label `{col}` is not 0 or 1"))?;
    }
    let captions = if cols[2].is_empty() {
        Vec::new()
    } else {
        cols[2].split('|').map(str::to_string).collect()
    };
    let labels = LabelVector {
        mis: bits[0],
        shm: bits[1],
        ste: bits[2],
        obj: bits[3],
        vio: bits[4],
    };
    Ok((cols[0].to_string(), cols[1].to_string(), captions, labels))
}

/// Reads and validates a dataset directory. Samples are returned sorted
/// by id.
pub fn ingest(dir: &Path) -> Result<Vec<RawSample>> {
    let path = dir.join(DATA_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.clone(),
        line,
        msg,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end_matches('\r') == HEADER => {}
        _ => return Err(parse_err(1, format!("missing header `{HEADER}`"))),
    }
    let mut samples = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (id, ocr_text, captions, labels) = parse_row(line).map_err(|m| parse_err(line_no, m))?;
        if !labels.is_valid() {
            return Err(Error::Validation(format!(
                "line {line_no} (id {id}): sub-category set while mis = 0"
            )));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::Validation(format!("line {line_no}: duplicate id {id}")));
        }
        let img_path = image_path(dir, &id);
        if !img_path.exists() {
            return Err(Error::Validation(format!(
                "image for sample {id} not found at {}",
                img_path.display()
            )));
        }
        samples.push(RawSample {
            image: read_ppm(&img_path)?,
            id,
            ocr_text,
            captions,
            labels,
        });
    }
    samples.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(samples)
}

/// Writes `data.tsv` and the images of `samples` into `dir`.
pub fn write_dataset(dir: &Path, samples: &[RawSample]) -> Result<()> {
    let images = dir.join(IMAGE_DIR);
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let mut tsv = String::from(HEADER);
    tsv.push('\n');
    for s in samples {
        if [&s.ocr_text].into_iter().chain(&s.captions).any(|t| t.contains(['\t', '\n', '|'])) {
            return Err(Error::invalid(format!("sample {} has a tab, newline or `|` in its text", s.id)));
        }
        let l = s.labels;
        let b = |x: bool| if x { '1' } else { '0' };
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            s.id,
            s.ocr_text,
            s.captions.join("|"),
            b(l.mis),
            b(l.shm),
            b(l.ste),
            b(l.obj),
            b(l.vio)
        ));
        write_ppm(&image_path(dir, &s.id), &s.image)?;
    }
    let path = dir.join(DATA_FILE);
    fs::write(&path, tsv).map_err(|e| Error::io(&path, e))
}
