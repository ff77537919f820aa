use crate::error::{Error, Result};

/// 8-bit RGB raster, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height * 3 {
            return Err(Error::shape(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        RgbImage {
            width,
            height,
            pixels,
        }
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * 3 + c]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Standardized `3 x side x side` image, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub side: usize,
    pub values: Vec<f64>,
}

impl ImageTensor {
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.side + y) * self.side + x]
    }
}

/// Bilinear sample position for output index `i` when scaling `from` to
/// `to` pixels, using pixel centers (`(i + 0.5) * from / to - 0.5`)
/// clamped to the source range. Returns the two source indices and the
/// weight of the second.
fn source_coord(i: usize, from: usize, to: usize) -> (usize, usize, f64) {
    let s = ((i as f64 + 0.5) * from as f64 / to as f64 - 0.5).clamp(0.0, (from - 1) as f64);
    let lo = s.floor() as usize;
    let hi = (lo + 1).min(from - 1);
    (lo, hi, s - lo as f64)
}

/// Bilinear resize to `side x side`, center crop to `crop x crop`, scale to
/// `[0, 1]`, then standardize with the mean and population standard
/// deviation over all `3 * crop * crop` values. A constant image has zero
/// variance and is divided by 1, giving an all-zero tensor.
pub fn normalize_image(img: &RgbImage, side: usize, crop: usize) -> Result<ImageTensor> {
    if img.width == 0 || img.height == 0 || img.pixels.len() != img.width * img.height * 3 {
        return Err(Error::invalid(format!(
            "degenerate image {}x{}",
            img.width, img.height
        )));
    }
    if crop == 0 || crop > side {
        return Err(Error::invalid(format!(
            "crop {crop} must be in 1..={side}"
        )));
    }
    let off = (side - crop) / 2;
    let xs: Vec<_> = (0..crop)
        .map(|x| source_coord(x + off, img.width, side))
        .collect();
    let ys: Vec<_> = (0..crop)
        .map(|y| source_coord(y + off, img.height, side))
        .collect();

    let mut values = vec![0.0; 3 * crop * crop];
    for c in 0..3 {
        for (y, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
                let p = |xx, yy| img.get(xx, yy, c) as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                values[(c * crop + y) * crop + x] = (top * (1.0 - fy) + bottom * fy) / 255.0;
            }
        }
    }

    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    for v in &mut values {
        *v = (*v - mean) / std;
    }
    Ok(ImageTensor { side: crop, values })
}
