//! Segmentation scores and raster distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, ClassMask, Dimensions, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    IouSingleClass,
    MeanIou,
}

/// A segmentation performance value in `[0, 1]`, 1 being a perfect prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfScore {
    pub value: f64,
    pub kind: ScoreKind,
}

/// Pixel-level confusion counts for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn union(&self) -> usize {
        self.tp + self.fp + self.fn_
    }

    /// IoU, with vacuous agreement (class absent from both masks) scored as 1.
    pub fn iou(&self) -> f64 {
        match self.union() {
            0 => 1.0,
            u => self.tp as f64 / u as f64,
        }
    }
}

pub fn confusion(pred: &ClassMask, gt: &ClassMask, class_id: u8) -> Result<Confusion> {
    ensure_same_dims(pred, gt, "prediction vs ground truth")?;
    let mut c = Confusion::default();
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        match (p == class_id, g == class_id) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

pub fn iou_class(pred: &ClassMask, gt: &ClassMask, class_id: u8) -> Result<PerfScore> {
    Ok(PerfScore {
        value: confusion(pred, gt, class_id)?.iou(),
        kind: ScoreKind::IouSingleClass,
    })
}

/// Mean IoU over the listed classes that occur in at least one of the two masks.
pub fn mean_iou(pred: &ClassMask, gt: &ClassMask, class_ids: &[u8]) -> Result<PerfScore> {
    ensure_same_dims(pred, gt, "prediction vs ground truth")?;
    if class_ids.is_empty() {
        return Err(Error::InsufficientData("mean IoU needs at least one class".into()));
    }
    // One pass: per-class counts indexed by label byte.
    let mut tp = [0usize; 256];
    let mut pred_n = [0usize; 256];
    let mut gt_n = [0usize; 256];
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        pred_n[p as usize] += 1;
        gt_n[g as usize] += 1;
        if p == g {
            tp[p as usize] += 1;
        }
    }
    let mut sum = 0.0;
    let mut present = 0usize;
    for &c in class_ids {
        let c = c as usize;
        let union = pred_n[c] + gt_n[c] - tp[c];
        if union == 0 {
            continue;
        }
        sum += tp[c] as f64 / union as f64;
        present += 1;
    }
    if present == 0 {
        return Err(Error::NoClassPresent);
    }
    Ok(PerfScore {
        value: sum / present as f64,
        kind: ScoreKind::MeanIou,
    })
}

/// Rasters that can be compared pixel by pixel.
pub trait PixelRaster: Dimensions {
    fn bytes_per_pixel(&self) -> usize;
    fn raw_bytes(&self) -> &[u8];
}

impl PixelRaster for RgbImage {
    fn bytes_per_pixel(&self) -> usize {
        3
    }

    fn raw_bytes(&self) -> &[u8] {
        self.as_raw()
    }
}

impl PixelRaster for ClassMask {
    fn bytes_per_pixel(&self) -> usize {
        1
    }

    fn raw_bytes(&self) -> &[u8] {
        self.labels()
    }
}

/// Fraction of pixels that do not match exactly.
pub fn pixel_distance<R: PixelRaster>(a: &R, b: &R) -> Result<f64> {
    ensure_same_dims(a, b, "pixel distance")?;
    let bpp = a.bytes_per_pixel();
    let mismatched = a
        .raw_bytes()
        .chunks_exact(bpp)
        .zip(b.raw_bytes().chunks_exact(bpp))
        .filter(|(x, y)| x != y)
        .count();
    let (w, h) = a.dims();
    Ok(mismatched as f64 / (w as f64 * h as f64))
}

/// Simulated-image score minus realistic-image score.
pub fn delta_performance(simulated: PerfScore, realistic: PerfScore) -> Result<f64> {
    if simulated.kind != realistic.kind {
        return Err(Error::KindMismatch(format!(
            "{:?} vs {:?}",
            simulated.kind, realistic.kind
        )));
    }
    Ok(simulated.value - realistic.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{urban, Profile};
    use crate::raster::ClassTable;
    use proptest::prelude::*;
    use std::collections::HashSet;
    use std::sync::Arc;

    fn table() -> Arc<ClassTable> {
        Arc::new(ClassTable::for_profile(Profile::Urban))
    }

    fn mask(w: u32, labels: Vec<u8>) -> ClassMask {
        let h = labels.len() as u32 / w;
        ClassMask::from_raw(w, h, labels, table()).unwrap()
    }

    fn set_oracle(pred: &ClassMask, gt: &ClassMask, c: u8) -> f64 {
        let p: HashSet<usize> = (0..pred.pixel_count()).filter(|&i| pred.labels()[i] == c).collect();
        let g: HashSet<usize> = (0..gt.pixel_count()).filter(|&i| gt.labels()[i] == c).collect();
        let union = p.union(&g).count();
        if union == 0 {
            1.0
        } else {
            p.intersection(&g).count() as f64 / union as f64
        }
    }

    #[test]
    fn iou_perfect_and_disjoint() {
        let gt = mask(4, vec![1, 1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(iou_class(&gt, &gt, urban::CAR).unwrap().value, 1.0);
        let pred = mask(4, vec![0, 0, 1, 1, 0, 0, 0, 0]);
        assert_eq!(iou_class(&pred, &gt, urban::CAR).unwrap().value, 0.0);
    }

    #[test]
    fn iou_partial_overlap() {
        // gt: 4 car pixels; pred covers 2 of them plus 2 elsewhere.
        let gt = mask(4, vec![1, 1, 1, 1, 0, 0, 0, 0]);
        let pred = mask(4, vec![1, 1, 0, 0, 1, 1, 0, 0]);
        let got = iou_class(&pred, &gt, urban::CAR).unwrap().value;
        let c = confusion(&pred, &gt, urban::CAR).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (2, 2, 2));
        assert_eq!(got, set_oracle(&pred, &gt, urban::CAR));
        assert!((got - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_absent_class_is_vacuous_one() {
        let gt = mask(2, vec![0, 0]);
        assert_eq!(iou_class(&gt, &gt, urban::CAR).unwrap().value, 1.0);
    }

    #[test]
    fn iou_dimension_mismatch() {
        let a = mask(2, vec![0, 0]);
        let b = mask(1, vec![0, 0]);
        assert!(matches!(iou_class(&a, &b, 0), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn mean_iou_examples() {
        let gt = mask(2, vec![0, 0, 1, 1]);
        assert_eq!(mean_iou(&gt, &gt, &[0, 1]).unwrap().value, 1.0);

        // class 0 matched perfectly, class 1 vs class 2 disjoint.
        let gt = mask(2, vec![0, 0, 1, 1]);
        let pred = mask(2, vec![0, 0, 2, 2]);
        let got = mean_iou(&pred, &gt, &[0, 1]).unwrap().value;
        assert_eq!(got, (set_oracle(&pred, &gt, 0) + set_oracle(&pred, &gt, 1)) / 2.0);
        assert_eq!(got, 0.5);

        // only classes 0, 1, 2 appear among the five listed
        let got = mean_iou(&pred, &gt, &[0, 1, 2, 3, 4]).unwrap().value;
        let oracle = [0, 1, 2].iter().map(|&c| set_oracle(&pred, &gt, c)).sum::<f64>() / 3.0;
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn mean_iou_no_class_present() {
        let gt = mask(2, vec![0, 0]);
        assert!(matches!(mean_iou(&gt, &gt, &[3]), Err(Error::NoClassPresent)));
        assert!(mean_iou(&gt, &gt, &[]).is_err());
    }

    #[test]
    fn pixel_distance_examples() {
        let a = RgbImage::from_raw(2, 2, vec![0; 12]).unwrap();
        assert_eq!(pixel_distance(&a, &a).unwrap(), 0.0);
        let b = RgbImage::from_raw(2, 2, vec![1; 12]).unwrap();
        assert_eq!(pixel_distance(&a, &b).unwrap(), 1.0);
        let mut raw = vec![0; 12];
        raw[0] = 9;
        raw[11] = 9;
        let c = RgbImage::from_raw(2, 2, raw).unwrap();
        assert_eq!(pixel_distance(&a, &c).unwrap(), 0.5);
    }

    #[test]
    fn delta_examples() {
        let s = |v| PerfScore { value: v, kind: ScoreKind::IouSingleClass };
        assert!((delta_performance(s(0.8), s(0.7)).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(delta_performance(s(0.4), s(0.4)).unwrap(), 0.0);
        assert_eq!(delta_performance(s(0.0), s(1.0)).unwrap(), -1.0);
        let m = PerfScore { value: 0.5, kind: ScoreKind::MeanIou };
        assert!(matches!(delta_performance(s(0.5), m), Err(Error::KindMismatch(_))));
    }

    fn labels_strategy(n: usize) -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..5, n)
    }

    proptest! {
        #[test]
        fn iou_is_symmetric(a in labels_strategy(36), b in labels_strategy(36), c in 0u8..5) {
            let (a, b) = (mask(6, a), mask(6, b));
            prop_assert_eq!(iou_class(&a, &b, c).unwrap().value, iou_class(&b, &a, c).unwrap().value);
        }

        #[test]
        fn scores_in_unit_interval(a in labels_strategy(25), b in labels_strategy(25), c in 0u8..5) {
            let (a, b) = (mask(5, a), mask(5, b));
            let v = iou_class(&a, &b, c).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&v));
            let m = mean_iou(&a, &b, &[0, 1, 2, 3, 4]).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&m));
            let d = pixel_distance(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn mean_iou_one_iff_equal(a in labels_strategy(16), b in labels_strategy(16)) {
            let (a, b) = (mask(4, a), mask(4, b));
            let m = mean_iou(&a, &b, &[0, 1, 2, 3, 4]).unwrap().value;
            prop_assert_eq!(m == 1.0, a == b);
        }

        #[test]
        fn pixel_distance_is_a_metric(
            a in labels_strategy(16), b in labels_strategy(16), c in labels_strategy(16)
        ) {
            let (a, b, c) = (mask(4, a), mask(4, b), mask(4, c));
            let ab = pixel_distance(&a, &b).unwrap();
            prop_assert_eq!(ab, pixel_distance(&b, &a).unwrap());
            prop_assert_eq!(ab == 0.0, a == b);
            let ac = pixel_distance(&a, &c).unwrap();
            let cb = pixel_distance(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }
    }
}
