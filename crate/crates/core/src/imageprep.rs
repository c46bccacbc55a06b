//! Image inputs for encoders: every post gets four image slots, absent ones
//! filled with zeros. Slots are either stitched into one 224x224 tile of
//! four 112x112 quadrants (row-major: top-left, top-right, bottom-left,
//! bottom-right) or resized individually to 224x224.
//!
//! All resizes are bilinear with corner-aligned sampling: destination pixel
//! `i` of `n` samples source coordinate `i * (m - 1) / (n - 1)`.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::Path;

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelMap, Label, Post, MAX_IMAGES};
use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;
pub const TARGET: usize = 224;
pub const QUADRANT: usize = TARGET / 2;

/// Row-major 8-bit RGB image.
#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Raster({}x{})", self.height, self.width)
    }
}

impl Raster {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width * CHANNELS {
            return Err(Error::InvalidInput(format!(
                "raster {height}x{width} needs {} bytes, got {}",
                height * width * CHANNELS,
                data.len()
            )));
        }
        Ok(Raster {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Raster {
            height,
            width,
            data: vec![0; height * width * CHANNELS],
        }
    }

    pub fn uniform(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        Self::from_fn(height, width, |_, _| rgb)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(y, x));
            }
        }
        Raster {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn set_pixel(&mut self, y: usize, x: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * CHANNELS;
        self.data[i..i + CHANNELS].copy_from_slice(&rgb);
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&b| b == 0)
    }

    /// Copies the `height` x `width` window whose top-left corner is `(y, x)`.
    pub fn crop(&self, y: usize, x: usize, height: usize, width: usize) -> Raster {
        Raster::from_fn(height, width, |r, c| self.pixel(y + r, x + c))
    }

    pub fn resize(&self, height: usize, width: usize) -> Raster {
        resize_bilinear(self, height, width)
    }

    pub fn decode(bytes: &[u8]) -> Result<Raster> {
        let img = image::load_from_memory(bytes)
            .map_err(|e| Error::InvalidInput(format!("image decode: {e}")))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Raster::new(h as usize, w as usize, img.into_raw())
    }

    pub fn to_png(&self) -> Vec<u8> {
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length matches dimensions");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)
            .expect("png encoding to memory");
        out.into_inner()
    }

    pub fn to_png_base64(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(self.to_png())
    }
}

/// Splits `dst` output samples over `src` input samples: for each output
/// index, the lower source index and the interpolation weight of the next
/// one as an exact fraction `num / den`.
fn sample_positions(src: usize, dst: usize) -> Vec<(usize, u64, u64)> {
    (0..dst)
        .map(|i| {
            if dst == 1 || src == 1 {
                return (0, 0, 1);
            }
            let num = (i * (src - 1)) as u64;
            let den = (dst - 1) as u64;
            ((num / den) as usize, num % den, den)
        })
        .collect()
}

pub fn resize_bilinear(src: &Raster, height: usize, width: usize) -> Raster {
    if src.height == height && src.width == width {
        return src.clone();
    }
    let ys = sample_positions(src.height, height);
    let xs = sample_positions(src.width, width);
    let mut out = Raster::zeros(height, width);
    for (oy, &(y0, fy_num, fy_den)) in ys.iter().enumerate() {
        let y1 = (y0 + 1).min(src.height - 1);
        let fy = fy_num as f64 / fy_den as f64;
        for (ox, &(x0, fx_num, fx_den)) in xs.iter().enumerate() {
            let x1 = (x0 + 1).min(src.width - 1);
            let fx = fx_num as f64 / fx_den as f64;
            let (p00, p01, p10, p11) = (
                src.pixel(y0, x0),
                src.pixel(y0, x1),
                src.pixel(y1, x0),
                src.pixel(y1, x1),
            );
            let mut rgb = [0u8; 3];
            for c in 0..CHANNELS {
                let top = p00[c] as f64 * (1.0 - fx) + p01[c] as f64 * fx;
                let bottom = p10[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                rgb[c] = v.round().clamp(0.0, 255.0) as u8;
            }
            out.set_pixel(oy, ox, rgb);
        }
    }
    out
}

/// Four image slots; present slots come first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBundle {
    slots: [Raster; MAX_IMAGES],
    present: [bool; MAX_IMAGES],
}

impl ImageBundle {
    pub fn slots(&self) -> &[Raster; MAX_IMAGES] {
        &self.slots
    }

    pub fn present_mask(&self) -> [bool; MAX_IMAGES] {
        self.present
    }

    pub fn present_count(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }
}

/// Places up to four images in order and zero-fills the remaining slots at
/// 224x224.
pub fn pad_with_empty(images: Vec<Raster>) -> Result<ImageBundle> {
    if images.len() > MAX_IMAGES {
        return Err(Error::Invariant(format!(
            "{} images for one post (max {MAX_IMAGES})",
            images.len()
        )));
    }
    let mut present = [false; MAX_IMAGES];
    let mut it = images.into_iter();
    let slots = std::array::from_fn(|i| match it.next() {
        Some(r) => {
            present[i] = true;
            r
        }
        None => Raster::zeros(TARGET, TARGET),
    });
    Ok(ImageBundle { slots, present })
}

/// One 224x224 tile of four 112x112 quadrants.
pub fn stitch(bundle: &ImageBundle) -> Raster {
    let mut out = Raster::zeros(TARGET, TARGET);
    for (i, slot) in bundle.slots.iter().enumerate() {
        if !bundle.present[i] {
            continue;
        }
        let q = slot.resize(QUADRANT, QUADRANT);
        let (oy, ox) = ((i / 2) * QUADRANT, (i % 2) * QUADRANT);
        for y in 0..QUADRANT {
            let dst = ((oy + y) * TARGET + ox) * CHANNELS;
            let src = y * QUADRANT * CHANNELS;
            out.data[dst..dst + QUADRANT * CHANNELS]
                .copy_from_slice(&q.data[src..src + QUADRANT * CHANNELS]);
        }
    }
    out
}

/// Four 224x224 inputs in slot order; absent slots stay zero.
pub fn concat_layout(bundle: &ImageBundle) -> [Raster; MAX_IMAGES] {
    std::array::from_fn(|i| {
        if bundle.present[i] {
            bundle.slots[i].resize(TARGET, TARGET)
        } else {
            Raster::zeros(TARGET, TARGET)
        }
    })
}

/// Decodes a PNG or JPEG file. Failures are logged and yield `None`.
pub fn load_raster(path: &Path) -> Option<Raster> {
    let decoded = std::fs::read(path)
        .map_err(|e| Error::io(path, e))
        .and_then(|bytes| Raster::decode(&bytes));
    match decoded {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("image {} marked absent: {e}", path.display());
            None
        }
    }
}

/// Loads a post's images relative to `media_root`; undecodable images are
/// dropped and the rest shift forward.
pub fn bundle_for_post(post: &Post, media_root: &Path) -> ImageBundle {
    let images: Vec<Raster> = post
        .image_refs
        .iter()
        .filter_map(|r| load_raster(&media_root.join(r)))
        .take(MAX_IMAGES)
        .collect();
    pad_with_empty(images).expect("at most four images")
}

/// Posts per image count (0 to 4) for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageCountHistogram {
    pub counts: [usize; MAX_IMAGES + 1],
}

impl ImageCountHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn fraction(&self, images: usize) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.counts[images] as f64 / total as f64
        }
    }

    /// Non-empty bins only.
    pub fn nonzero(&self) -> BTreeMap<usize, usize> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
            .collect()
    }
}

/// Image-count histogram for each class that has labeled posts.
pub fn image_count_distribution(
    corpus: &Corpus,
    labels: &LabelMap,
) -> BTreeMap<Label, ImageCountHistogram> {
    let mut out: BTreeMap<Label, ImageCountHistogram> = BTreeMap::new();
    for post in corpus.posts() {
        if let Some(&label) = labels.get(&post.post_id) {
            out.entry(label).or_default().counts[post.image_refs.len().min(MAX_IMAGES)] += 1;
        }
    }
    out
}
