//! Built-in realizer (stylizer), model under test (a deliberately flawed
//! nearest-color segmenter) and feature extractor.

use std::sync::Arc;

use super::noise::{unit, value_noise};
use super::{FeatureExtractor, Predictor, Realizer, SceneData};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::profile::{mars, urban, Profile};
use crate::raster::{ensure_same_dims, ClassMask, ClassTable, RgbImage};

pub const FEATURE_DIM: usize = 64;

const HIST_BINS: usize = 16;
const GRID: u32 = 4;
const SALIENT: usize = 3;
/// Histogram and occupancy entries are scaled so both blocks span comparable ranges.
const OCCUPANCY_WEIGHT: f64 = 4.0;

/// The predictor's engineered limitations, keyed on one class, and the
/// stylizer defect that makes some realistic images unfaithful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weakness {
    pub class: u8,
    /// Components of `class` smaller than this many pixels are relabelled `small_fallback`.
    pub area_threshold: usize,
    pub small_fallback: u8,
    /// Pixels of `class` where a fixed screen-space noise field exceeds
    /// `spot_cutoff` are relabelled `spot_fallback`.
    pub spot_cutoff: f64,
    pub spot_fallback: u8,
    /// Lattice spacing (pixels) of the blind-spot field.
    pub spot_cell: u32,
    /// Per-channel color shift of the stylizer's glare on `class` pixels, at full strength.
    pub glare: [f64; 3],
    /// Glare is present only where its noise field exceeds this level.
    pub glare_floor: f64,
    /// Lattice spacing (pixels) of the glare field.
    pub glare_cell: u32,
}

impl Weakness {
    /// Whether the predictor is blind to `class` at screen position `(x, y)`.
    pub fn blind_at(&self, x: u32, y: u32) -> bool {
        value_noise(x, y, self.spot_cell, 0xB11D) > self.spot_cutoff
    }

    /// Glare strength in `[0, 1]` at screen position `(x, y)`.
    pub fn glare_at(&self, x: u32, y: u32) -> f64 {
        let v = value_noise(x, y, self.glare_cell, 0xC1A5);
        ((v - self.glare_floor) / (1.0 - self.glare_floor)).max(0.0)
    }
}

/// Texture bands of a profile: base color per class plus stylizer noise settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    pub profile: Profile,
    pub bands: Vec<(u8, [u8; 3])>,
    /// Half-width of the uniform per-channel jitter added by the stylizer.
    pub jitter: f64,
    pub weakness: Weakness,
    /// Classes whose spatial occupancy enters the feature vector.
    pub salient: [u8; SALIENT],
}

impl Palette {
    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Urban => Self {
                profile,
                bands: vec![
                    (urban::ROAD, [92, 92, 98]),
                    (urban::CAR, [172, 30, 40]),
                    (urban::BUILDING, [150, 120, 80]),
                    (urban::SKY, [120, 170, 230]),
                    (urban::TERRAIN, [60, 130, 50]),
                ],
                jitter: 10.0,
                weakness: Weakness {
                    class: urban::CAR,
                    area_threshold: 30,
                    small_fallback: urban::ROAD,
                    spot_cutoff: 0.7,
                    spot_fallback: urban::BUILDING,
                    spot_cell: 24,
                    glare: [0.0, 110.0, 50.0],
                    glare_floor: 0.95,
                    glare_cell: 20,
                },
                salient: [urban::CAR, urban::BUILDING, urban::SKY],
            },
            Profile::Mars => Self {
                profile,
                bands: vec![
                    (mars::SOIL, [160, 96, 62]),
                    (mars::ROCK, [70, 56, 50]),
                    (mars::SAND, [210, 166, 110]),
                    (mars::BEDROCK, [126, 114, 106]),
                    (mars::SKY, [190, 192, 212]),
                ],
                jitter: 8.0,
                weakness: Weakness {
                    class: mars::ROCK,
                    area_threshold: 30,
                    small_fallback: mars::SOIL,
                    spot_cutoff: 0.7,
                    spot_fallback: mars::BEDROCK,
                    spot_cell: 24,
                    glare: [60.0, 60.0, 60.0],
                    glare_floor: 0.95,
                    glare_cell: 20,
                },
                salient: [mars::ROCK, mars::SAND, mars::BEDROCK],
            },
        }
    }

    pub fn band(&self, class: u8) -> Option<[u8; 3]> {
        self.bands.iter().find(|(c, _)| *c == class).map(|(_, rgb)| *rgb)
    }

    /// Inclusive per-channel range a stylized pixel of `class` can take.
    pub fn band_range(&self, class: u8) -> Option<([f64; 3], [f64; 3])> {
        let base = self.band(class)?;
        let glare = if class == self.weakness.class {
            self.weakness.glare
        } else {
            [0.0; 3]
        };
        let lo = std::array::from_fn(|k| (base[k] as f64 - self.jitter).max(0.0));
        let hi = std::array::from_fn(|k| (base[k] as f64 + self.jitter + glare[k]).min(255.0));
        Some((lo, hi))
    }
}

/// Nearest-band pixel classifier shared by the predictor and the extractor.
#[derive(Debug, Clone)]
pub struct BandClassifier {
    bands: Vec<(u8, [i32; 3])>,
}

impl BandClassifier {
    pub fn new(palette: &Palette) -> Self {
        Self {
            bands: palette
                .bands
                .iter()
                .map(|(c, rgb)| (*c, rgb.map(i32::from)))
                .collect(),
        }
    }

    /// Class of the closest band color; ties go to the earlier band.
    pub fn classify(&self, rgb: [u8; 3]) -> u8 {
        let p = rgb.map(i32::from);
        let mut best = (i32::MAX, self.bands[0].0);
        for (class, b) in &self.bands {
            let d = (p[0] - b[0]).pow(2) + (p[1] - b[1]).pow(2) + (p[2] - b[2]).pow(2);
            if d < best.0 {
                best = (d, *class);
            }
        }
        best.1
    }
}

/// Built-in realizer: every ground-truth class becomes a noisy texture band.
/// The output depends on the mask alone.
#[derive(Debug, Clone)]
pub struct BuiltinStylizer {
    palette: Palette,
}

impl BuiltinStylizer {
    pub fn new(palette: Palette) -> Self {
        Self { palette }
    }

    pub fn stylize(&self, mask: &ClassMask) -> Result<RgbImage> {
        let p = &self.palette;
        let w = &p.weakness;
        let mut bases = [[0u8; 3]; 256];
        for (c, rgb) in &p.bands {
            bases[*c as usize] = *rgb;
        }
        RgbImage::from_fn(mask.width(), mask.height(), |x, y| {
            let class = mask.get(x, y);
            let base = bases[class as usize];
            let glare = if class == w.class { w.glare_at(x, y) } else { 0.0 };
            std::array::from_fn(|k| {
                let jitter = (2.0 * unit(x as u64, y as u64, class as u64, k as u64) - 1.0) * p.jitter;
                let glare = if class == w.class { glare * w.glare[k] } else { 0.0 };
                (base[k] as f64 + jitter + glare).round().clamp(0.0, 255.0) as u8
            })
        })
    }
}

impl Realizer for BuiltinStylizer {
    fn realize(&self, scene: &SceneData) -> Result<RgbImage> {
        ensure_same_dims(&scene.simulated, &scene.ground_truth, "scene data")?;
        self.stylize(&scene.ground_truth)
    }
}

/// Realizer that returns the simulated frame unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRealizer;

impl Realizer for IdentityRealizer {
    fn realize(&self, scene: &SceneData) -> Result<RgbImage> {
        ensure_same_dims(&scene.simulated, &scene.ground_truth, "scene data")?;
        Ok(scene.simulated.clone())
    }
}

/// Built-in model under test: nearest-band segmentation with two flaws on the
/// weak class. It is blind to it in fixed screen regions, and it drops small
/// connected components.
#[derive(Debug, Clone)]
pub struct BuiltinPredictor {
    palette: Palette,
    classifier: BandClassifier,
    table: Arc<ClassTable>,
}

impl BuiltinPredictor {
    pub fn new(palette: Palette) -> Self {
        let classifier = BandClassifier::new(&palette);
        let table = Arc::new(ClassTable::for_profile(palette.profile));
        Self {
            palette,
            classifier,
            table,
        }
    }
}

impl Predictor for BuiltinPredictor {
    fn predict(&self, image: &RgbImage) -> Result<ClassMask> {
        let w = &self.palette.weakness;
        let width = image.width();
        let mut labels: Vec<u8> = image
            .pixels()
            .enumerate()
            .map(|(i, rgb)| {
                let class = self.classifier.classify(rgb);
                let (x, y) = (i as u32 % width, i as u32 / width);
                if class == w.class && w.blind_at(x, y) {
                    w.spot_fallback
                } else {
                    class
                }
            })
            .collect();
        drop_small_components(&mut labels, image.width() as usize, w.class, w.area_threshold, w.small_fallback);
        ClassMask::from_raw(image.width(), image.height(), labels, self.table.clone())
    }
}

/// Relabels 4-connected components of `class` with fewer than `min_area` pixels.
fn drop_small_components(labels: &mut [u8], width: usize, class: u8, min_area: usize, fallback: u8) {
    let mut seen = vec![false; labels.len()];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..labels.len() {
        if seen[start] || labels[start] != class {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        component.clear();
        while let Some(i) = stack.pop() {
            component.push(i);
            let (x, y) = (i % width, i / width);
            let mut visit = |j: usize| {
                if !seen[j] && labels[j] == class {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if i + width < labels.len() {
                visit(i + width);
            }
        }
        if component.len() < min_area {
            for &i in &component {
                labels[i] = fallback;
            }
        }
    }
}

/// Built-in feature extractor: a 16-bin coarse color histogram followed by
/// the 4x4-grid occupancy of three salient bands.
#[derive(Debug, Clone)]
pub struct BuiltinExtractor {
    palette: Palette,
    classifier: BandClassifier,
}

impl BuiltinExtractor {
    pub fn new(palette: Palette) -> Self {
        let classifier = BandClassifier::new(&palette);
        Self {
            palette,
            classifier,
        }
    }
}

impl FeatureExtractor for BuiltinExtractor {
    fn extract_features(&self, image: &RgbImage) -> Result<FeatureVector> {
        let (w, h) = (image.width(), image.height());
        let mut out = vec![0.0; FEATURE_DIM];
        let mut cell_sizes = [0usize; (GRID * GRID) as usize];
        for y in 0..h {
            for x in 0..w {
                let rgb = image.get(x, y);
                let bin = ((rgb[0] >> 6) as usize) << 2 | ((rgb[1] >> 7) as usize) << 1 | (rgb[2] >> 7) as usize;
                out[bin] += 1.0;
                let cell = ((y * GRID / h) * GRID + x * GRID / w) as usize;
                cell_sizes[cell] += 1;
                let class = self.classifier.classify(rgb);
                if let Some(s) = self.palette.salient.iter().position(|&c| c == class) {
                    out[HIST_BINS + s * (GRID * GRID) as usize + cell] += 1.0;
                }
            }
        }
        let total = image.pixel_count() as f64;
        for v in &mut out[..HIST_BINS] {
            *v /= total;
        }
        for s in 0..SALIENT {
            for (cell, &size) in cell_sizes.iter().enumerate() {
                let v = &mut out[HIST_BINS + s * (GRID * GRID) as usize + cell];
                *v = if size == 0 { 0.0 } else { OCCUPANCY_WEIGHT * *v / size as f64 };
            }
        }
        FeatureVector::new(out).map_err(|e| Error::Backend(e.to_string()))
    }
}
