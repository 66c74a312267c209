//! The four ports a campaign composes (scene generator, realizer, predictor,
//! feature extractor), deterministic built-in implementations of each, and an
//! adapter that drives ports living in an external process.

mod builtin;
pub mod external;
mod noise;
mod world;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::profile::Profile;
use crate::raster::{ensure_same_dims, ClassMask, ClassTable, RgbImage};

pub use builtin::{
    BandClassifier, BuiltinExtractor, BuiltinPredictor, BuiltinStylizer, IdentityRealizer, Palette,
    Weakness, FEATURE_DIM,
};
pub use external::{ExternalBackend, ExternalPool, LaunchSpec, PROTOCOL_VERSION};
pub use world::{mars_world, urban_world, BuiltinSceneGenerator, Camera, Solid, World};

/// Closed interval for one genome dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("invalid bound [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Per-dimension bounds of the simulator parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bounds(Vec<Bound>);

impl Bounds {
    pub fn new(dims: Vec<Bound>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Config("genome needs at least one dimension".into()));
        }
        for b in &dims {
            Bound::new(b.lo, b.hi)?;
        }
        Ok(Self(dims))
    }

    /// Default ego-pose bounds (x, y, theta) of the built-in worlds.
    pub fn for_profile(profile: Profile) -> Self {
        World::for_profile(profile).genome_bounds()
    }

    pub fn dims(&self) -> &[Bound] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// A genome drawn uniformly from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Genome {
        Genome(self.0.iter().map(|b| rng.gen_range(b.lo..=b.hi)).collect())
    }

    pub fn check(&self, genome: &Genome) -> Result<()> {
        if genome.len() != self.len() {
            return Err(Error::GenomeOutOfBounds(format!(
                "expected {} dimensions, got {}",
                self.len(),
                genome.len()
            )));
        }
        for (i, (v, b)) in genome.values().iter().zip(&self.0).enumerate() {
            if !b.contains(*v) {
                return Err(Error::GenomeOutOfBounds(format!(
                    "dimension {i} = {v} outside [{}, {}]",
                    b.lo, b.hi
                )));
            }
        }
        Ok(())
    }
}

/// Simulator parameter vector; for the built-in worlds `[x, y, theta]` of the ego pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome(Vec<f64>);

impl Genome {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn pose(x: f64, y: f64, theta: f64) -> Self {
        Self(vec![x, y, theta])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| format!("{v:.4}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Output of the scene generator: a rendered frame, its ground truth, and
/// whether the pose satisfies the simulator's validity constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneData {
    pub simulated: RgbImage,
    pub ground_truth: ClassMask,
    pub on_road: bool,
}

impl SceneData {
    pub fn new(simulated: RgbImage, ground_truth: ClassMask, on_road: bool) -> Result<Self> {
        ensure_same_dims(&simulated, &ground_truth, "scene image vs ground truth")?;
        Ok(Self {
            simulated,
            ground_truth,
            on_road,
        })
    }
}

pub trait SceneGenerator: Send + Sync {
    fn generate_scene(&self, genome: &Genome) -> Result<SceneData>;
}

pub trait Realizer: Send + Sync {
    fn realize(&self, scene: &SceneData) -> Result<RgbImage>;
}

pub trait Predictor: Send + Sync {
    fn predict(&self, image: &RgbImage) -> Result<ClassMask>;
}

pub trait FeatureExtractor: Send + Sync {
    fn extract_features(&self, image: &RgbImage) -> Result<FeatureVector>;
}

/// How one port is provided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PortBinding {
    #[default]
    Builtin,
    /// Identity realizer: the simulated image is used as the realistic one.
    Identity,
    External(LaunchSpec),
}

/// Selection of an implementation for every port.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct BackendBinding {
    #[serde(default)]
    pub scene: PortBinding,
    #[serde(default)]
    pub realizer: PortBinding,
    #[serde(default)]
    pub predictor: PortBinding,
    #[serde(default)]
    pub extractor: PortBinding,
}

/// Number of calls made through each port.
#[derive(Debug, Default)]
pub struct PortCalls {
    pub generate_scene: AtomicU64,
    pub realize: AtomicU64,
    pub predict: AtomicU64,
    pub extract_features: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PortCallCounts {
    pub generate_scene: u64,
    pub realize: u64,
    pub predict: u64,
    pub extract_features: u64,
}

impl PortCalls {
    pub fn snapshot(&self) -> PortCallCounts {
        PortCallCounts {
            generate_scene: self.generate_scene.load(Ordering::Relaxed),
            realize: self.realize.load(Ordering::Relaxed),
            predict: self.predict.load(Ordering::Relaxed),
            extract_features: self.extract_features.load(Ordering::Relaxed),
        }
    }
}

/// A bound set of ports plus the search space they accept.
#[derive(Clone)]
pub struct Ports {
    pub profile: Profile,
    pub bounds: Bounds,
    pub class_table: Arc<ClassTable>,
    scene: Arc<dyn SceneGenerator>,
    realizer: Arc<dyn Realizer>,
    predictor: Arc<dyn Predictor>,
    extractor: Arc<dyn FeatureExtractor>,
    calls: Arc<PortCalls>,
}

impl fmt::Debug for Ports {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ports")
            .field("profile", &self.profile)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

impl Ports {
    pub fn new(
        profile: Profile,
        bounds: Bounds,
        scene: Arc<dyn SceneGenerator>,
        realizer: Arc<dyn Realizer>,
        predictor: Arc<dyn Predictor>,
        extractor: Arc<dyn FeatureExtractor>,
    ) -> Self {
        Self {
            profile,
            bounds,
            class_table: Arc::new(ClassTable::for_profile(profile)),
            scene,
            realizer,
            predictor,
            extractor,
            calls: Arc::new(PortCalls::default()),
        }
    }

    /// All four built-in ports for `profile` at the given raster size.
    pub fn builtin(profile: Profile, size: u32) -> Self {
        let world = Arc::new(World::for_profile(profile));
        let palette = Palette::for_profile(profile);
        Self::new(
            profile,
            world.genome_bounds(),
            Arc::new(BuiltinSceneGenerator::new(world, size)),
            Arc::new(BuiltinStylizer::new(palette.clone())),
            Arc::new(BuiltinPredictor::new(palette.clone())),
            Arc::new(BuiltinExtractor::new(palette)),
        )
    }

    /// Resolves a binding: built-in ports directly, external ones through a
    /// pool of `workers` processes per distinct launch spec.
    pub fn from_binding(
        profile: Profile,
        size: u32,
        bounds: Option<Bounds>,
        binding: &BackendBinding,
        workers: usize,
    ) -> Result<Self> {
        let builtin = Self::builtin(profile, size);
        let mut pools: Vec<(LaunchSpec, Arc<ExternalPool>)> = Vec::new();
        let mut pool_for = |spec: &LaunchSpec| -> Result<Arc<ExternalPool>> {
            if let Some((_, p)) = pools.iter().find(|(s, _)| s == spec) {
                return Ok(p.clone());
            }
            let pool = Arc::new(ExternalPool::spawn(spec, workers.max(1), builtin.class_table.clone())?);
            pools.push((spec.clone(), pool.clone()));
            Ok(pool)
        };

        let scene: Arc<dyn SceneGenerator> = match &binding.scene {
            PortBinding::Builtin => builtin.scene.clone(),
            PortBinding::External(spec) => pool_for(spec)?.require("generate_scene")?,
            PortBinding::Identity => {
                return Err(Error::Config("identity binding only applies to the realizer".into()))
            }
        };
        let realizer: Arc<dyn Realizer> = match &binding.realizer {
            PortBinding::Builtin => builtin.realizer.clone(),
            PortBinding::Identity => Arc::new(IdentityRealizer),
            PortBinding::External(spec) => pool_for(spec)?.require("realize")?,
        };
        let predictor: Arc<dyn Predictor> = match &binding.predictor {
            PortBinding::Builtin => builtin.predictor.clone(),
            PortBinding::External(spec) => pool_for(spec)?.require("predict")?,
            PortBinding::Identity => {
                return Err(Error::Config("identity binding only applies to the realizer".into()))
            }
        };
        let extractor: Arc<dyn FeatureExtractor> = match &binding.extractor {
            PortBinding::Builtin => builtin.extractor.clone(),
            PortBinding::External(spec) => pool_for(spec)?.require("extract_features")?,
            PortBinding::Identity => {
                return Err(Error::Config("identity binding only applies to the realizer".into()))
            }
        };
        Ok(Self::new(
            profile,
            bounds.unwrap_or(builtin.bounds),
            scene,
            realizer,
            predictor,
            extractor,
        ))
    }

    /// Same ports with the realizer replaced by the identity.
    pub fn without_realizer(&self) -> Self {
        let mut p = self.clone();
        p.realizer = Arc::new(IdentityRealizer);
        p.calls = Arc::new(PortCalls::default());
        p
    }

    /// Same ports with fresh call counters.
    pub fn fresh_counters(&self) -> Self {
        let mut p = self.clone();
        p.calls = Arc::new(PortCalls::default());
        p
    }

    pub fn calls(&self) -> PortCallCounts {
        self.calls.snapshot()
    }

    pub fn generate_scene(&self, genome: &Genome) -> Result<SceneData> {
        self.bounds.check(genome)?;
        self.calls.generate_scene.fetch_add(1, Ordering::Relaxed);
        self.scene.generate_scene(genome)
    }

    pub fn realize(&self, scene: &SceneData) -> Result<RgbImage> {
        self.calls.realize.fetch_add(1, Ordering::Relaxed);
        self.realizer.realize(scene)
    }

    /// Realizes unless the bound realizer is the identity, which is not counted as a call.
    pub fn realize_or_identity(&self, scene: &SceneData, identity: bool) -> Result<RgbImage> {
        if identity {
            Ok(scene.simulated.clone())
        } else {
            self.realize(scene)
        }
    }

    pub fn predict(&self, image: &RgbImage) -> Result<ClassMask> {
        self.calls.predict.fetch_add(1, Ordering::Relaxed);
        self.predictor.predict(image)
    }

    pub fn extract_features(&self, image: &RgbImage) -> Result<FeatureVector> {
        self.calls.extract_features.fetch_add(1, Ordering::Relaxed);
        self.extractor.extract_features(image)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_validation() {
        assert!(Bound::new(1.0, 1.0).is_err());
        assert!(Bound::new(0.0, f64::INFINITY).is_err());
        let b = Bounds::new(vec![Bound::new(0.0, 1.0).unwrap()]).unwrap();
        assert!(b.check(&Genome::new(vec![0.5])).is_ok());
        assert!(matches!(b.check(&Genome::new(vec![1.5])), Err(Error::GenomeOutOfBounds(_))));
        assert!(b.check(&Genome::new(vec![0.5, 0.5])).is_err());
    }

    #[test]
    fn out_of_bounds_genome_is_rejected_by_ports() {
        let ports = Ports::builtin(Profile::Urban, 32);
        let far = Genome::pose(1e6, 0.0, 0.0);
        assert!(matches!(ports.generate_scene(&far), Err(Error::GenomeOutOfBounds(_))));
    }

    #[test]
    fn counters_track_calls() {
        let ports = Ports::builtin(Profile::Urban, 32);
        let scene = ports.generate_scene(&Genome::pose(5.0, -1.75, 0.0)).unwrap();
        let real = ports.realize(&scene).unwrap();
        ports.predict(&real).unwrap();
        ports.extract_features(&real).unwrap();
        let c = ports.calls();
        assert_eq!((c.generate_scene, c.realize, c.predict, c.extract_features), (1, 1, 1, 1));
        assert_eq!(ports.without_realizer().calls().realize, 0);
    }

    #[test]
    fn binding_json_shape() {
        let b: BackendBinding = serde_json::from_str(
            r#"{"scene":"builtin","realizer":{"external":{"command":["python3","backend.py"]}}}"#,
        )
        .unwrap();
        assert_eq!(b.scene, PortBinding::Builtin);
        assert!(matches!(b.realizer, PortBinding::External(_)));
        assert_eq!(b.predictor, PortBinding::Builtin);
    }
}
