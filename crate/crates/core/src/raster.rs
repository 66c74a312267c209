//! Image and class-mask value types plus lossless PNG I/O.
//!
//! Images are 8-bit RGB PNGs. Masks are 8-bit grayscale PNGs whose sample
//! value is the class id itself. Both round-trip bit-exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Cursor;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::profile::{Profile, CLASS_TABLE_VERSION};

/// Default side length of rasters produced by the built-in backends.
pub const DEFAULT_SIZE: u32 = 128;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RgbImage {
    /// Builds an image from row-major RGB triples (`3 * width * height` bytes).
    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "expected {expected} bytes for {width}x{height} RGB, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.pixels
    }

    /// Pixels in row-major order.
    pub fn pixels(&self) -> impl ExactSizeIterator<Item = [u8; 3]> + '_ {
        self.pixels.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn mirrored(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
            .expect("dimensions already validated")
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        encode(self.width, self.height, png::ColorType::Rgb, &self.pixels)
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let (width, height, color, data) = decode(bytes)?;
        if color != png::ColorType::Rgb {
            return Err(Error::Malformed(format!(
                "expected 8-bit RGB image, found {color:?}"
            )));
        }
        Self::from_raw(width, height, data)
    }
}

/// Mapping from class id to class name, shipped per profile.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassTable {
    classes: BTreeMap<u8, String>,
}

impl ClassTable {
    pub fn new(entries: impl IntoIterator<Item = (u8, String)>) -> Result<Self> {
        let classes: BTreeMap<u8, String> = entries.into_iter().collect();
        if classes.is_empty() {
            return Err(Error::Config("class table is empty".into()));
        }
        Ok(Self { classes })
    }

    pub fn for_profile(profile: Profile) -> Self {
        Self {
            classes: profile
                .class_names()
                .iter()
                .map(|(id, name)| (*id, (*name).to_string()))
                .collect(),
        }
    }

    pub fn contains(&self, id: u8) -> bool {
        self.classes.contains_key(&id)
    }

    pub fn name(&self, id: u8) -> Option<&str> {
        self.classes.get(&id).map(String::as_str)
    }

    pub fn ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.classes.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Plain-text `key=value` sidecar: a version line followed by one `id=name` per class.
    pub fn to_sidecar(&self) -> String {
        let mut out = format!("version={CLASS_TABLE_VERSION}\n");
        for (id, name) in &self.classes {
            let _ = writeln!(out, "{id}={name}");
        }
        out
    }

    pub fn from_sidecar(text: &str) -> Result<Self> {
        let mut classes = BTreeMap::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Malformed(format!("class table line `{line}`")))?;
            if key == "version" {
                continue;
            }
            let id: u8 = key
                .parse()
                .map_err(|_| Error::Malformed(format!("class id `{key}`")))?;
            classes.insert(id, value.to_string());
        }
        Self::new(classes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_sidecar()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_sidecar(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassMask {
    width: u32,
    height: u32,
    labels: Vec<u8>,
    table: Arc<ClassTable>,
}

impl ClassMask {
    pub fn from_raw(width: u32, height: u32, labels: Vec<u8>, table: Arc<ClassTable>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize;
        if labels.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "expected {expected} labels for {width}x{height} mask, got {}",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|l| !table.contains(**l)) {
            return Err(Error::InvalidRaster(format!(
                "label {bad} is not in the class table"
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            table,
        })
    }

    pub fn filled(width: u32, height: u32, class_id: u8, table: Arc<ClassTable>) -> Result<Self> {
        let n = width as usize * height as usize;
        Self::from_raw(width, height, vec![class_id; n], table)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn class_table(&self) -> &Arc<ClassTable> {
        &self.table
    }

    pub fn same_dims<T: Dimensions>(&self, other: &T) -> bool {
        self.width == other.dims().0 && self.height == other.dims().1
    }

    /// Fraction of pixels labelled `class_id`; zero when the class is absent.
    pub fn class_proportion(&self, class_id: u8) -> f64 {
        let count = self.labels.iter().filter(|&&l| l == class_id).count();
        count as f64 / self.labels.len() as f64
    }

    pub fn class_count(&self, class_id: u8) -> usize {
        self.labels.iter().filter(|&&l| l == class_id).count()
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        encode(self.width, self.height, png::ColorType::Grayscale, &self.labels)
    }

    pub fn decode_png(bytes: &[u8], table: Arc<ClassTable>) -> Result<Self> {
        let (width, height, color, data) = decode(bytes)?;
        if color != png::ColorType::Grayscale {
            return Err(Error::Malformed(format!(
                "mask must have exactly one channel, found {color:?}"
            )));
        }
        Self::from_raw(width, height, data, table)
    }
}

/// Shared width/height accessor so dimension checks work across raster kinds.
pub trait Dimensions {
    fn dims(&self) -> (u32, u32);
}

impl Dimensions for RgbImage {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

impl Dimensions for ClassMask {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

pub fn ensure_same_dims(a: &impl Dimensions, b: &impl Dimensions, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

pub fn mask_class_proportion(mask: &ClassMask, class_id: u8) -> f64 {
    mask.class_proportion(class_id)
}

pub fn save_image(image: &RgbImage, path: &Path) -> Result<()> {
    let bytes = image.encode_png()?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_image(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    RgbImage::decode_png(&bytes)
}

pub fn save_mask(mask: &ClassMask, path: &Path) -> Result<()> {
    let bytes = mask.encode_png()?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_mask(path: &Path, table: Arc<ClassTable>) -> Result<ClassMask> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ClassMask::decode_png(&bytes, table)
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidRaster(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

fn encode(width: u32, height: u32, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width, height);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Malformed(format!("png encode: {e}")))?;
        writer
            .write_image_data(data)
            .map_err(|e| Error::Malformed(format!("png encode: {e}")))?;
    }
    Ok(out)
}

fn decode(bytes: &[u8]) -> Result<(u32, u32, png::ColorType, Vec<u8>)> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Malformed(format!("png header: {e}")))?;
    let info = reader.info();
    let (width, height, color, depth) = (info.width, info.height, info.color_type, info.bit_depth);
    if depth != png::BitDepth::Eight {
        return Err(Error::Malformed(format!("expected 8-bit samples, found {depth:?}")));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Malformed("png too large".into()))?;
    let mut buf = vec![0; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Malformed(format!("png data: {e}")))?;
    buf.truncate(frame.buffer_size());
    Ok((width, height, color, buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::urban;
    use proptest::prelude::*;

    fn table() -> Arc<ClassTable> {
        Arc::new(ClassTable::for_profile(Profile::Urban))
    }

    #[test]
    fn proportion_saturated_and_empty() {
        let all_car = ClassMask::filled(4, 4, urban::CAR, table()).unwrap();
        assert_eq!(mask_class_proportion(&all_car, urban::CAR), 1.0);
        let no_car = ClassMask::filled(4, 4, urban::ROAD, table()).unwrap();
        assert_eq!(mask_class_proportion(&no_car, urban::CAR), 0.0);
    }

    #[test]
    fn proportion_quarter() {
        let mut labels = vec![urban::ROAD; 16];
        for i in [0, 5, 10, 15] {
            labels[i] = urban::CAR;
        }
        let mask = ClassMask::from_raw(4, 4, labels.clone(), table()).unwrap();
        let oracle = labels.iter().filter(|&&l| l == urban::CAR).count() as f64 / 16.0;
        assert_eq!(mask_class_proportion(&mask, urban::CAR), oracle);
        assert_eq!(oracle, 0.25);
    }

    #[test]
    fn rejects_bad_dimensions_and_labels() {
        assert!(RgbImage::from_raw(0, 3, vec![]).is_err());
        assert!(RgbImage::from_raw(2, 2, vec![0; 11]).is_err());
        assert!(ClassMask::from_raw(2, 1, vec![0, 9], table()).is_err());
    }

    #[test]
    fn minimal_image_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.png");
        let img = RgbImage::from_raw(1, 1, vec![1, 2, 3]).unwrap();
        save_image(&img, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), img);
    }

    #[test]
    fn truncated_file_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.png");
        let img = RgbImage::filled(8, 8, [10, 20, 30]).unwrap();
        let bytes = img.encode_png().unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_image(&path), Err(Error::Malformed(_))));
    }

    #[test]
    fn mask_loader_rejects_rgb_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        save_image(&RgbImage::filled(2, 2, [0, 0, 0]).unwrap(), &path).unwrap();
        assert!(matches!(load_mask(&path, table()), Err(Error::Malformed(_))));
    }

    #[test]
    fn sidecar_round_trip() {
        let t = ClassTable::for_profile(Profile::Mars);
        let parsed = ClassTable::from_sidecar(&t.to_sidecar()).unwrap();
        assert_eq!(parsed, t);
        assert_eq!(parsed.name(1), Some("rock"));
    }

    proptest! {
        #[test]
        fn image_png_round_trip(w in 1u32..12, h in 1u32..12, seed in any::<u64>()) {
            let mut s = seed;
            let img = RgbImage::from_fn(w, h, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let b = (s >> 33).to_le_bytes();
                [b[0], b[1], b[2]]
            }).unwrap();
            let back = RgbImage::decode_png(&img.encode_png().unwrap()).unwrap();
            prop_assert_eq!(back, img);
        }

        #[test]
        fn mask_png_round_trip(labels in prop::collection::vec(0u8..5, 1..100)) {
            let w = labels.len() as u32;
            let mask = ClassMask::from_raw(w, 1, labels, table()).unwrap();
            let back = ClassMask::decode_png(&mask.encode_png().unwrap(), table()).unwrap();
            prop_assert_eq!(back, mask);
        }

        #[test]
        fn proportions_sum_to_one(labels in prop::collection::vec(0u8..5, 1..200)) {
            let n = labels.len() as u32;
            let mask = ClassMask::from_raw(n, 1, labels, table()).unwrap();
            let total: f64 = (0..5).map(|c| mask.class_proportion(c)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
