//! The accuracy and similarity objectives, their relevance gates, and the
//! calibration of the two thresholds they depend on.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{Genome, Ports, SceneData};
use crate::error::{Error, Result};
use crate::features::{
    distance_from_closest, pairwise_feature_distances, pairwise_pixel_distances, DistanceMetric,
    FeatureVector,
};
use crate::metrics::{delta_performance, iou_class, mean_iou, PerfScore};
use crate::profile::Profile;
use crate::raster::{mask_class_proportion, ClassMask, RgbImage};
use crate::stats::{median, percentile};

/// Objective value assigned to individuals outside the region of interest.
/// Both objectives are minimized and otherwise lie in `[0, 1]`.
pub const PENALTY: f64 = 2.0;

/// Percentile of the delta distribution used as the relevance threshold.
pub const RELEVANCE_PERCENTILE: f64 = 3.0;

/// Number of random images used by both calibrations.
pub const DEFAULT_CALIBRATION_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessPair {
    pub f_accuracy: f64,
    pub f_similarity: f64,
}

impl FitnessPair {
    pub fn is_relevant(&self) -> bool {
        self.f_accuracy != PENALTY
    }
}

/// Calibrated thresholds, stored as a `key=value` text file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub profile: Profile,
    /// Distance the diversity threshold was calibrated for.
    pub metric: DistanceMetric,
    pub t_diversity: f64,
    /// Absent for profiles that do not use the delta gate.
    pub t_relevance: Option<f64>,
}

impl Thresholds {
    pub fn new(
        profile: Profile,
        metric: DistanceMetric,
        t_diversity: f64,
        t_relevance: Option<f64>,
    ) -> Result<Self> {
        if !(t_diversity.is_finite() && t_diversity >= 0.0) {
            return Err(Error::Config(format!("t_diversity must be a non-negative number, got {t_diversity}")));
        }
        if let Some(t) = t_relevance {
            if !t.is_finite() {
                return Err(Error::Config(format!("t_relevance must be finite, got {t}")));
            }
        }
        Ok(Self {
            profile,
            metric,
            t_diversity,
            t_relevance,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "profile={}", self.profile);
        let _ = writeln!(out, "metric={}", self.metric);
        let _ = writeln!(out, "t_diversity={}", self.t_diversity);
        if let Some(t) = self.t_relevance {
            let _ = writeln!(out, "t_relevance={t}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (mut profile, mut metric, mut t_div, mut t_rel) = (None, DistanceMetric::Feature, None, None);
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Malformed(format!("thresholds line {}: expected key=value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let number = || {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::Malformed(format!("thresholds line {}: `{value}` is not a number", n + 1)))
            };
            match key {
                "profile" => profile = Some(value.parse::<Profile>()?),
                "metric" => metric = value.parse()?,
                "t_diversity" => t_div = Some(number()?),
                "t_relevance" => t_rel = Some(number()?),
                other => return Err(Error::Malformed(format!("thresholds: unknown key `{other}`"))),
            }
        }
        let profile = profile.ok_or_else(|| Error::Malformed("thresholds: missing `profile`".into()))?;
        let t_div = t_div.ok_or_else(|| Error::Malformed("thresholds: missing `t_diversity`".into()))?;
        Self::new(profile, metric, t_div, t_rel)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Relevance gates applied before an accuracy score is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    /// Class whose proportion is gated and, for the urban profile, whose IoU is scored.
    pub class_of_interest: u8,
    pub proportion_lo: f64,
    pub proportion_hi: f64,
    pub use_delta_gate: bool,
    pub use_on_road_gate: bool,
}

impl GateConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let urban = profile == Profile::Urban;
        Self {
            class_of_interest: profile.default_gated_class(),
            proportion_lo: 0.0,
            proportion_hi: profile.default_proportion_hi(),
            use_delta_gate: urban,
            use_on_road_gate: urban,
        }
    }

    pub fn validate(&self, profile: Profile) -> Result<()> {
        let (lo, hi) = (self.proportion_lo, self.proportion_hi);
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Config(format!("proportion bounds must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})")));
        }
        if !profile.class_ids().contains(&self.class_of_interest) {
            return Err(Error::Config(format!(
                "class {} is not in the {profile} class table",
                self.class_of_interest
            )));
        }
        Ok(())
    }
}

/// Which gate declared an individual irrelevant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Proportion,
    OffRoad,
    Delta,
}

/// Everything the accuracy objective looks at for one individual.
#[derive(Debug, Clone, Copy)]
pub struct EvaluationBundle<'a> {
    pub scene: &'a SceneData,
    pub realistic: &'a RgbImage,
    pub prediction: &'a ClassMask,
    /// Needed only when the delta gate is enabled.
    pub prediction_simulated: Option<&'a ClassMask>,
}

/// The accuracy objective with the intermediate values behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub f_accuracy: f64,
    pub perf_realistic: f64,
    pub perf_simulated: Option<f64>,
    pub delta: Option<f64>,
    pub proportion: f64,
    pub gate: Option<Gate>,
}

/// IoU of the class of interest for the urban profile, mean IoU otherwise.
pub fn performance(profile: Profile, class_of_interest: u8, pred: &ClassMask, gt: &ClassMask) -> Result<PerfScore> {
    match profile {
        Profile::Urban => iou_class(pred, gt, class_of_interest),
        Profile::Mars => mean_iou(pred, gt, &profile.class_ids()),
    }
}

pub fn assess(bundle: &EvaluationBundle<'_>, gates: &GateConfig, thresholds: &Thresholds) -> Result<Assessment> {
    let gt = &bundle.scene.ground_truth;
    let profile = thresholds.profile;
    let perf = performance(profile, gates.class_of_interest, bundle.prediction, gt)?;
    let proportion = mask_class_proportion(gt, gates.class_of_interest);

    let (mut perf_simulated, mut delta) = (None, None);
    if gates.use_delta_gate {
        let pred_sim = bundle
            .prediction_simulated
            .ok_or_else(|| Error::Config("delta gate enabled but no prediction on the simulated image".into()))?;
        let sim = performance(profile, gates.class_of_interest, pred_sim, gt)?;
        perf_simulated = Some(sim.value);
        delta = Some(delta_performance(sim, perf)?);
    }

    let gate = if !(proportion > gates.proportion_lo && proportion < gates.proportion_hi) {
        Some(Gate::Proportion)
    } else if gates.use_on_road_gate && !bundle.scene.on_road {
        Some(Gate::OffRoad)
    } else if let Some(d) = delta {
        let t = thresholds
            .t_relevance
            .ok_or_else(|| Error::Config("delta gate enabled but thresholds lack t_relevance".into()))?;
        (d > t).then_some(Gate::Delta)
    } else {
        None
    };
    Ok(Assessment {
        f_accuracy: if gate.is_some() { PENALTY } else { perf.value },
        perf_realistic: perf.value,
        perf_simulated,
        delta,
        proportion,
        gate,
    })
}

pub fn f_accuracy(bundle: &EvaluationBundle<'_>, gates: &GateConfig, thresholds: &Thresholds) -> Result<f64> {
    Ok(assess(bundle, gates, thresholds)?.f_accuracy)
}

/// Similarity objective from the distance to the closest archive member;
/// `+inf` stands for an empty archive and yields 0.
pub fn similarity_from_distance(distance: f64, t_diversity: f64) -> f64 {
    if distance < t_diversity {
        PENALTY
    } else {
        1.0 / (1.0 + distance)
    }
}

pub fn f_similarity(feature: &FeatureVector, archive: &[FeatureVector], thresholds: &Thresholds) -> Result<f64> {
    let d = distance_from_closest(feature, archive)?;
    Ok(similarity_from_distance(d, thresholds.t_diversity))
}

/// `n` genomes drawn uniformly from the ports' bounds.
pub fn sample_genomes(ports: &Ports, n: usize, seed: u64) -> Vec<Genome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| ports.bounds.sample(&mut rng)).collect()
}

fn need_two(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InsufficientData(format!("calibration needs n >= 2, got {n}")));
    }
    Ok(())
}

/// One random image evaluated for calibration.
struct CalibrationSample {
    realistic: RgbImage,
    feature: Option<FeatureVector>,
    delta: Option<f64>,
}

fn calibration_samples(
    ports: &Ports,
    n: usize,
    seed: u64,
    with_features: bool,
    delta_class: Option<u8>,
) -> Result<Vec<CalibrationSample>> {
    sample_genomes(ports, n, seed)
        .par_iter()
        .map(|g| {
            let scene = ports.generate_scene(g)?;
            let realistic = ports.realize(&scene)?;
            let feature = with_features.then(|| ports.extract_features(&realistic)).transpose()?;
            let delta = match delta_class {
                Some(class) => {
                    let gt = &scene.ground_truth;
                    let real = performance(ports.profile, class, &ports.predict(&realistic)?, gt)?;
                    let sim = performance(ports.profile, class, &ports.predict(&scene.simulated)?, gt)?;
                    Some(delta_performance(sim, real)?)
                }
                None => None,
            };
            Ok(CalibrationSample {
                realistic,
                feature,
                delta,
            })
        })
        .collect()
}

/// Median of all pairwise feature distances.
pub fn t_diversity_from_features(features: &[FeatureVector]) -> Result<f64> {
    median(&pairwise_feature_distances(features)?)
}

/// Median of all pairwise pixel distances.
pub fn t_diversity_from_images(images: &[RgbImage]) -> Result<f64> {
    median(&pairwise_pixel_distances(images)?)
}

/// Nearest-rank 3rd percentile of the deltas.
pub fn t_relevance_from_deltas(deltas: &[f64]) -> Result<f64> {
    percentile(deltas, RELEVANCE_PERCENTILE)
}

fn diversity_of(samples: &[CalibrationSample], metric: DistanceMetric) -> Result<f64> {
    match metric {
        DistanceMetric::Feature => {
            let f: Vec<FeatureVector> = samples.iter().filter_map(|s| s.feature.clone()).collect();
            t_diversity_from_features(&f)
        }
        DistanceMetric::Pixel => {
            let images: Vec<RgbImage> = samples.iter().map(|s| s.realistic.clone()).collect();
            t_diversity_from_images(&images)
        }
    }
}

fn relevance_of(samples: &[CalibrationSample]) -> Result<f64> {
    let deltas: Vec<f64> = samples.iter().filter_map(|s| s.delta).collect();
    t_relevance_from_deltas(&deltas)
}

/// Median pairwise distance between `n` random realistic images.
pub fn calibrate_t_diversity(n: usize, metric: DistanceMetric, ports: &Ports, seed: u64) -> Result<f64> {
    need_two(n)?;
    let samples = calibration_samples(ports, n, seed, metric == DistanceMetric::Feature, None)?;
    diversity_of(&samples, metric)
}

/// Nearest-rank 3rd percentile of simulated-minus-realistic performance over `n` random scenes.
pub fn calibrate_t_relevance(n: usize, ports: &Ports, gates: &GateConfig, seed: u64) -> Result<f64> {
    need_two(n)?;
    let samples = calibration_samples(ports, n, seed, false, Some(gates.class_of_interest))?;
    relevance_of(&samples)
}

/// Both calibrations over one shared set of `n` random images. The relevance
/// threshold is computed only when the delta gate is enabled.
pub fn calibrate(
    n: usize,
    metric: DistanceMetric,
    ports: &Ports,
    gates: &GateConfig,
    seed: u64,
) -> Result<Thresholds> {
    need_two(n)?;
    let delta_class = gates.use_delta_gate.then_some(gates.class_of_interest);
    let samples = calibration_samples(ports, n, seed, metric == DistanceMetric::Feature, delta_class)?;
    let t_div = diversity_of(&samples, metric)?;
    let t_rel = match delta_class {
        Some(_) => Some(relevance_of(&samples)?),
        None => None,
    };
    Thresholds::new(ports.profile, metric, t_div, t_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{mars, urban};
    use crate::raster::ClassTable;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn urban_thresholds(t_rel: f64) -> Thresholds {
        Thresholds::new(Profile::Urban, DistanceMetric::Feature, 0.5, Some(t_rel)).unwrap()
    }

    /// A 10x10 urban scene with `cars` car pixels in the top rows, rest road.
    fn scene(cars: usize, on_road: bool) -> SceneData {
        let table = Arc::new(ClassTable::for_profile(Profile::Urban));
        let labels: Vec<u8> = (0..100).map(|i| if i < cars { urban::CAR } else { urban::ROAD }).collect();
        let gt = ClassMask::from_raw(10, 10, labels, table).unwrap();
        SceneData::new(RgbImage::filled(10, 10, [0, 0, 0]).unwrap(), gt, on_road).unwrap()
    }

    /// Prediction that gets the first `hits` of the car pixels right and labels the rest road.
    fn prediction(hits: usize) -> ClassMask {
        let table = Arc::new(ClassTable::for_profile(Profile::Urban));
        let labels: Vec<u8> = (0..100).map(|i| if i < hits { urban::CAR } else { urban::ROAD }).collect();
        ClassMask::from_raw(10, 10, labels, table).unwrap()
    }

    fn bundle<'a>(s: &'a SceneData, real: &'a ClassMask, sim: &'a ClassMask) -> EvaluationBundle<'a> {
        EvaluationBundle {
            scene: s,
            realistic: &s.simulated,
            prediction: real,
            prediction_simulated: Some(sim),
        }
    }

    #[test]
    fn proportion_gate_is_an_open_interval() {
        let gates = GateConfig::for_profile(Profile::Urban);
        let th = urban_thresholds(0.1);
        for (cars, expect_gate) in [(0, true), (40, true), (50, true), (39, false), (1, false)] {
            let s = scene(cars, true);
            let p = prediction(cars);
            let a = assess(&bundle(&s, &p, &p), &gates, &th).unwrap();
            assert_eq!(a.gate.is_some(), expect_gate, "cars={cars}");
        }
    }

    #[test]
    fn off_road_and_pass_through() {
        let gates = GateConfig::for_profile(Profile::Urban);
        let th = urban_thresholds(0.1);
        let off = scene(20, false);
        let p = prediction(20);
        assert_eq!(f_accuracy(&bundle(&off, &p, &p), &gates, &th).unwrap(), PENALTY);

        // 14 of 20 car pixels found: IoU 0.7 on both images
        let on = scene(20, true);
        let p = prediction(14);
        let v = f_accuracy(&bundle(&on, &p, &p), &gates, &th).unwrap();
        assert!((v - 0.7).abs() < 1e-12);
    }

    #[test]
    fn delta_gate_is_strict() {
        let gates = GateConfig::for_profile(Profile::Urban);
        let s = scene(20, true);
        let (real, sim) = (prediction(14), prediction(20));
        // delta = 1.0 - 0.7
        let delta = 1.0 - 14.0 / 20.0;
        let at = urban_thresholds(delta);
        assert_eq!(assess(&bundle(&s, &real, &sim), &gates, &at).unwrap().gate, None);
        let below = urban_thresholds(delta - 1e-9);
        assert_eq!(assess(&bundle(&s, &real, &sim), &gates, &below).unwrap().gate, Some(Gate::Delta));
    }

    #[test]
    fn mars_gates_on_sky_and_scores_miou() {
        let table = Arc::new(ClassTable::for_profile(Profile::Mars));
        let gates = GateConfig::for_profile(Profile::Mars);
        assert!(!gates.use_delta_gate && !gates.use_on_road_gate);
        let th = Thresholds::new(Profile::Mars, DistanceMetric::Feature, 1.0, None).unwrap();
        let mk = |sky: usize| {
            let labels: Vec<u8> = (0..100).map(|i| if i < sky { mars::SKY } else { mars::SOIL }).collect();
            ClassMask::from_raw(10, 10, labels, table.clone()).unwrap()
        };
        let s = SceneData::new(RgbImage::filled(10, 10, [0; 3]).unwrap(), mk(75), false).unwrap();
        let p = mk(75);
        let b = EvaluationBundle {
            scene: &s,
            realistic: &s.simulated,
            prediction: &p,
            prediction_simulated: None,
        };
        assert_eq!(f_accuracy(&b, &gates, &th).unwrap(), PENALTY);

        let s = SceneData::new(RgbImage::filled(10, 10, [0; 3]).unwrap(), mk(50), false).unwrap();
        let p = mk(40);
        let b = EvaluationBundle {
            scene: &s,
            realistic: &s.simulated,
            prediction: &p,
            prediction_simulated: None,
        };
        // sky 40/50, soil 50/60
        let expect = (40.0 / 50.0 + 50.0 / 60.0) / 2.0;
        assert!((f_accuracy(&b, &gates, &th).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn similarity_examples() {
        let th = urban_thresholds(0.1);
        let f = FeatureVector::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(f_similarity(&f, &[f.clone()], &th).unwrap(), PENALTY);
        assert_eq!(f_similarity(&f, &[], &th).unwrap(), 0.0);
        let g = FeatureVector::new(vec![1.0, 3.0]).unwrap();
        assert_eq!(f_similarity(&f, &[g], &th).unwrap(), 0.5);
    }

    #[test]
    fn thresholds_file_round_trip() {
        let th = urban_thresholds(0.0123456789);
        assert_eq!(Thresholds::from_text(&th.to_text()).unwrap(), th);
        let mars = Thresholds::new(Profile::Mars, DistanceMetric::Pixel, 0.25, None).unwrap();
        let text = mars.to_text();
        assert!(!text.contains("t_relevance"));
        assert_eq!(Thresholds::from_text(&text).unwrap(), mars);
        assert!(Thresholds::from_text("profile=urban\n").is_err());
        assert!(Thresholds::from_text("profile=urban\nt_diversity=-1\n").is_err());
        assert!(Thresholds::from_text("profile=urban\nt_diversity=1\nbogus=2\n").is_err());
    }

    #[test]
    fn calibration_is_deterministic_and_consistent() {
        let ports = Ports::builtin(Profile::Urban, 32);
        let gates = GateConfig::for_profile(Profile::Urban);
        let a = calibrate(12, DistanceMetric::Feature, &ports, &gates, 7).unwrap();
        let b = calibrate(12, DistanceMetric::Feature, &ports, &gates, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.t_diversity, calibrate_t_diversity(12, DistanceMetric::Feature, &ports, 7).unwrap());
        assert_eq!(a.t_relevance, Some(calibrate_t_relevance(12, &ports, &gates, 7).unwrap()));
        assert!(calibrate_t_diversity(1, DistanceMetric::Feature, &ports, 7).is_err());
    }

    proptest! {
        #[test]
        fn similarity_is_antitone_off_the_gate(t in 0.0..5.0f64, d1 in 0.0..50.0f64, gap in 1e-6..50.0f64) {
            let d1 = d1.max(t);
            let d2 = d1 + gap;
            prop_assert!(similarity_from_distance(d1, t) > similarity_from_distance(d2, t));
            prop_assert!(similarity_from_distance(d1, t) <= 1.0);
        }

        #[test]
        fn accuracy_range_and_gate_monotonicity(
            cars in 0usize..60, hits_real in 0usize..60, hits_sim in 0usize..60,
            on_road: bool, t_rel in -0.5..0.5f64,
        ) {
            let (hits_real, hits_sim) = (hits_real.min(cars), hits_sim.min(cars));
            let s = scene(cars, on_road);
            let (real, sim) = (prediction(hits_real), prediction(hits_sim));
            let th = urban_thresholds(t_rel);
            let with = GateConfig::for_profile(Profile::Urban);
            let without = GateConfig { use_delta_gate: false, ..with };
            let a = f_accuracy(&bundle(&s, &real, &sim), &with, &th).unwrap();
            let b = f_accuracy(&bundle(&s, &real, &sim), &without, &th).unwrap();
            prop_assert!(a == PENALTY || (0.0..=1.0).contains(&a));
            prop_assert!(b == PENALTY || (0.0..=1.0).contains(&b));
            // dropping a gate can only turn a penalty into a score
            if b == PENALTY {
                prop_assert_eq!(a, PENALTY);
            } else if a != PENALTY {
                prop_assert_eq!(a, b);
            }
        }
    }
}
