//! Built-in scene generator: fixed worlds of axis-aligned solids on a ground
//! plane, ray-cast from the ego pose `(x, y, theta)`.
//!
//! The ground-truth mask comes from the same ray hits as the rendered colors,
//! never from the rendered pixels.

use std::f64::consts::PI;
use std::sync::Arc;

use super::noise::unit;
use super::{Bound, Bounds, Genome, SceneData, SceneGenerator};
use crate::error::Result;
use crate::profile::{mars, urban, Profile};
use crate::raster::{ClassMask, ClassTable, RgbImage};

/// Scene constants of the urban world.
pub mod urban_world {
    /// The road is the strip `|y| <= ROAD_HALF_WIDTH`, two lanes split at `y = 0`.
    pub const ROAD_HALF_WIDTH: f64 = 3.5;
    pub const LANE_CENTER: f64 = 1.75;
    pub const ROAD_X_RANGE: (f64, f64) = (-80.0, 260.0);
    pub const CAR_SIZE: [f64; 3] = [4.4, 1.8, 1.5];
    /// Car centers; negative `y` is the ego lane, positive the oncoming lane.
    pub const CARS: [(f64, f64); 14] = [
        (-14.0, -1.75),
        (-6.0, 1.75),
        (24.0, -1.75),
        (33.0, 1.75),
        (47.0, 1.75),
        (60.0, -1.75),
        (74.0, 1.75),
        (90.0, -1.75),
        (101.0, 1.75),
        (118.0, -1.75),
        (131.0, 1.75),
        (146.0, -1.75),
        (162.0, 1.75),
        (180.0, -1.75),
    ];
    /// Building rows start this far from the road axis and extend `BUILDING_DEPTH` outward.
    pub const BUILDING_OFFSET: f64 = 9.0;
    pub const BUILDING_DEPTH: f64 = 10.0;
    /// Block length, gap, and the repeating height pattern along each row.
    pub const BUILDING_BLOCK: f64 = 16.0;
    pub const BUILDING_GAP: f64 = 7.0;
    pub const BUILDING_HEIGHTS: [f64; 5] = [9.0, 14.0, 7.0, 12.0, 16.0];
    pub const EGO_X: (f64, f64) = (0.0, 150.0);
    pub const EGO_Y: (f64, f64) = (-5.0, 5.0);
    pub const EGO_THETA: (f64, f64) = (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    pub const CAMERA_HEIGHT: f64 = 1.4;
    pub const CAMERA_PITCH: f64 = -0.06;
}

/// Scene constants of the Mars world.
pub mod mars_world {
    pub const ROCK_COUNT: usize = 70;
    pub const ROCK_SEED: u64 = 0x4d41_5253;
    pub const ROCK_FIELD_X: (f64, f64) = (-20.0, 110.0);
    pub const ROCK_FIELD_Y: (f64, f64) = (-35.0, 35.0);
    /// Rock edge length is `ROCK_MIN + ROCK_SPREAD * u^2` for uniform `u`.
    pub const ROCK_MIN: f64 = 0.35;
    pub const ROCK_SPREAD: f64 = 1.6;
    pub const PATCH_COUNT: usize = 10;
    pub const PATCH_RADIUS: (f64, f64) = (3.0, 11.0);
    /// Ego must stay this far outside any rock footprint to count as traversable.
    pub const ROCK_CLEARANCE: f64 = 0.5;
    pub const EGO_X: (f64, f64) = (0.0, 90.0);
    pub const EGO_Y: (f64, f64) = (-25.0, 25.0);
    pub const EGO_THETA: (f64, f64) = (-std::f64::consts::PI, std::f64::consts::PI);
    pub const CAMERA_HEIGHT: f64 = 1.6;
    pub const CAMERA_PITCH: f64 = -0.16;
}

/// Axis-aligned box carrying one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solid {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub class: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum GroundPatch {
    Strip { y_half: f64, x: (f64, f64), class: u8 },
    Ellipse { center: [f64; 2], radii: [f64; 2], class: u8 },
}

impl GroundPatch {
    fn contains(&self, x: f64, y: f64) -> Option<u8> {
        match *self {
            GroundPatch::Strip { y_half, x: (lo, hi), class } => {
                (y.abs() <= y_half && x >= lo && x <= hi).then_some(class)
            }
            GroundPatch::Ellipse { center, radii, class } => {
                let dx = (x - center[0]) / radii[0];
                let dy = (y - center[1]) / radii[1];
                (dx * dx + dy * dy <= 1.0).then_some(class)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Validity {
    /// Inside the road strip.
    Road,
    /// Clear of every solid footprint by the given margin.
    ClearOfSolids(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub height: f64,
    pub pitch: f64,
    pub hfov: f64,
}

/// A fixed world explored only through the ego pose.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub profile: Profile,
    pub camera: Camera,
    pub solids: Vec<Solid>,
    ground: Vec<GroundPatch>,
    ground_default: u8,
    sky: u8,
    validity: Validity,
    bounds: [(f64, f64); 3],
    flat_colors: Vec<(u8, [u8; 3])>,
}

impl World {
    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Urban => Self::urban(),
            Profile::Mars => Self::mars(),
        }
    }

    pub fn urban() -> Self {
        use urban_world::*;
        let [len, wid, hgt] = CAR_SIZE;
        let mut solids: Vec<Solid> = CARS
            .iter()
            .map(|&(cx, cy)| Solid {
                min: [cx - len / 2.0, cy - wid / 2.0, 0.0],
                max: [cx + len / 2.0, cy + wid / 2.0, hgt],
                class: urban::CAR,
            })
            .collect();
        let (x0, x1) = ROAD_X_RANGE;
        for side in [-1.0, 1.0] {
            let mut x = x0;
            let mut k = if side < 0.0 { 2 } else { 0 };
            while x < x1 {
                let (ya, yb) = (side * BUILDING_OFFSET, side * (BUILDING_OFFSET + BUILDING_DEPTH));
                solids.push(Solid {
                    min: [x, ya.min(yb), 0.0],
                    max: [x + BUILDING_BLOCK, ya.max(yb), BUILDING_HEIGHTS[k % BUILDING_HEIGHTS.len()]],
                    class: urban::BUILDING,
                });
                x += BUILDING_BLOCK + BUILDING_GAP;
                k += 1;
            }
        }
        Self {
            profile: Profile::Urban,
            camera: Camera {
                height: CAMERA_HEIGHT,
                pitch: CAMERA_PITCH,
                hfov: PI / 2.0,
            },
            solids,
            ground: vec![GroundPatch::Strip {
                y_half: ROAD_HALF_WIDTH,
                x: ROAD_X_RANGE,
                class: urban::ROAD,
            }],
            ground_default: urban::TERRAIN,
            sky: urban::SKY,
            validity: Validity::Road,
            bounds: [EGO_X, EGO_Y, EGO_THETA],
            flat_colors: vec![
                (urban::ROAD, [104, 104, 110]),
                (urban::CAR, [188, 38, 46]),
                (urban::BUILDING, [162, 128, 88]),
                (urban::SKY, [138, 182, 236]),
                (urban::TERRAIN, [72, 142, 62]),
            ],
        }
    }

    pub fn mars() -> Self {
        use mars_world::*;
        let lerp = |(lo, hi): (f64, f64), u: f64| lo + (hi - lo) * u;
        let solids = (0..ROCK_COUNT as u64)
            .map(|i| {
                let cx = lerp(ROCK_FIELD_X, unit(ROCK_SEED, i, 0, 0));
                let cy = lerp(ROCK_FIELD_Y, unit(ROCK_SEED, i, 1, 0));
                let s = ROCK_MIN + ROCK_SPREAD * unit(ROCK_SEED, i, 2, 0).powi(2);
                let aspect = 0.7 + 0.6 * unit(ROCK_SEED, i, 3, 0);
                Solid {
                    min: [cx - s / 2.0, cy - s * aspect / 2.0, 0.0],
                    max: [cx + s / 2.0, cy + s * aspect / 2.0, s * 0.65],
                    class: mars::ROCK,
                }
            })
            .collect();
        let ground = (0..PATCH_COUNT as u64)
            .map(|i| GroundPatch::Ellipse {
                center: [
                    lerp(ROCK_FIELD_X, unit(ROCK_SEED, i, 4, 1)),
                    lerp(ROCK_FIELD_Y, unit(ROCK_SEED, i, 5, 1)),
                ],
                radii: [
                    lerp(PATCH_RADIUS, unit(ROCK_SEED, i, 6, 1)),
                    lerp(PATCH_RADIUS, unit(ROCK_SEED, i, 7, 1)),
                ],
                class: if i % 2 == 0 { mars::SAND } else { mars::BEDROCK },
            })
            .collect();
        Self {
            profile: Profile::Mars,
            camera: Camera {
                height: CAMERA_HEIGHT,
                pitch: CAMERA_PITCH,
                hfov: PI / 2.0,
            },
            solids,
            ground,
            ground_default: mars::SOIL,
            sky: mars::SKY,
            validity: Validity::ClearOfSolids(ROCK_CLEARANCE),
            bounds: [EGO_X, EGO_Y, EGO_THETA],
            flat_colors: vec![
                (mars::SOIL, [168, 100, 66]),
                (mars::ROCK, [76, 60, 54]),
                (mars::SAND, [214, 168, 112]),
                (mars::BEDROCK, [128, 116, 108]),
                (mars::SKY, [196, 196, 214]),
            ],
        }
    }

    pub fn genome_bounds(&self) -> Bounds {
        Bounds::new(
            self.bounds
                .iter()
                .map(|&(lo, hi)| Bound { lo, hi })
                .collect(),
        )
        .expect("world bounds are valid constants")
    }

    /// Whether the ego position satisfies the world's placement constraint.
    pub fn is_valid_position(&self, x: f64, y: f64) -> bool {
        match self.validity {
            Validity::Road => self.ground.iter().any(|g| {
                matches!(g, GroundPatch::Strip { .. }) && g.contains(x, y).is_some()
            }),
            Validity::ClearOfSolids(margin) => self.solids.iter().all(|s| {
                x < s.min[0] - margin || x > s.max[0] + margin || y < s.min[1] - margin || y > s.max[1] + margin
            }),
        }
    }

    fn ground_class(&self, x: f64, y: f64) -> u8 {
        self.ground
            .iter()
            .find_map(|g| g.contains(x, y))
            .unwrap_or(self.ground_default)
    }

    fn flat_color(&self, class: u8) -> [u8; 3] {
        self.flat_colors
            .iter()
            .find(|(c, _)| *c == class)
            .map(|(_, rgb)| *rgb)
            .unwrap_or([0, 0, 0])
    }

    /// Ray-casts the world from `genome = [x, y, theta]` into a `size x size` frame.
    pub fn render(&self, genome: &Genome, size: u32, table: Arc<ClassTable>) -> Result<SceneData> {
        self.render_with(genome, size, table, true)
    }

    fn render_with(&self, genome: &Genome, size: u32, table: Arc<ClassTable>, cull: bool) -> Result<SceneData> {
        let g = genome.values();
        let (ox, oy, theta) = (g[0], g[1], g[2]);
        let origin = [ox, oy, self.camera.height];
        let (cp, sp) = (self.camera.pitch.cos(), self.camera.pitch.sin());
        let (ct, st) = (theta.cos(), theta.sin());
        let fwd = [ct * cp, st * cp, sp];
        let right = [st, -ct, 0.0];
        let up = [-ct * sp, -st * sp, cp];
        let half = size as f64 / 2.0;
        let focal = half / (self.camera.hfov / 2.0).tan();

        // screen-space bounding boxes for culling; None = could be anywhere
        let project = |rel: [f64; 3]| {
            let z = dot(rel, fwd);
            (half + focal * dot(rel, right) / z, half - focal * dot(rel, up) / z)
        };
        let visible: Vec<(&Solid, Option<[f64; 4]>)> = self
            .solids
            .iter()
            .filter_map(|s| {
                if !cull || (0..3).all(|k| origin[k] >= s.min[k] && origin[k] <= s.max[k]) {
                    return Some((s, None));
                }
                let rel: [[f64; 3]; 8] = std::array::from_fn(|corner| {
                    std::array::from_fn(|k| if corner >> k & 1 == 0 { s.min[k] } else { s.max[k] } - origin[k])
                });
                let z: [f64; 8] = std::array::from_fn(|i| dot(rel[i], fwd));
                let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
                let mut include = |(u, v): (f64, f64)| {
                    bbox = [bbox[0].min(u), bbox[1].min(v), bbox[2].max(u), bbox[3].max(v)];
                };
                // clip the box against the near plane: corners in front plus edge crossings
                for i in 0..8 {
                    if z[i] > NEAR {
                        include(project(rel[i]));
                    }
                    for k in 0..3 {
                        let j = i | 1 << k;
                        if j != i && (z[i] > NEAR) != (z[j] > NEAR) {
                            let t = (NEAR - z[i]) / (z[j] - z[i]);
                            include(project(std::array::from_fn(|c| rel[i][c] + t * (rel[j][c] - rel[i][c]))));
                        }
                    }
                }
                if bbox[0] > bbox[2] {
                    return None; // wholly behind the camera
                }
                if bbox[2] < 0.0 || bbox[3] < 0.0 || bbox[0] > size as f64 || bbox[1] > size as f64 {
                    return None;
                }
                Some((s, Some(bbox)))
            })
            .collect();

        let n = size as usize * size as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        let mut labels = Vec::with_capacity(n);
        for v in 0..size {
            let pv = v as f64 + 0.5;
            let row: Vec<(&Solid, [f64; 2])> = visible
                .iter()
                .filter(|(_, b)| b.map_or(true, |b| pv >= b[1] - 1.0 && pv <= b[3] + 1.0))
                .map(|(s, b)| (*s, b.map_or([f64::NEG_INFINITY, f64::INFINITY], |b| [b[0] - 1.0, b[2] + 1.0])))
                .collect();
            for u in 0..size {
                let pu = u as f64 + 0.5;
                let a = (pu - half) / focal;
                let b = (half - pv) / focal;
                let dir = [
                    fwd[0] + a * right[0] + b * up[0],
                    fwd[1] + a * right[1] + b * up[1],
                    fwd[2] + a * right[2] + b * up[2],
                ];
                let mut best_t = f64::INFINITY;
                let mut class = self.sky;
                let mut shade = 1.0;
                if dir[2] < 0.0 {
                    let t = -origin[2] / dir[2];
                    best_t = t;
                    class = self.ground_class(origin[0] + t * dir[0], origin[1] + t * dir[1]);
                }
                for (s, span) in &row {
                    if pu < span[0] || pu > span[1] {
                        continue;
                    }
                    if let Some((t, axis)) = ray_box(origin, dir, s) {
                        if t < best_t {
                            best_t = t;
                            class = s.class;
                            shade = [0.92, 0.84, 1.0][axis];
                        }
                    }
                }
                let base = self.flat_color(class);
                pixels.extend(base.iter().map(|&c| (c as f64 * shade).round() as u8));
                labels.push(class);
            }
        }
        let simulated = RgbImage::from_raw(size, size, pixels)?;
        let ground_truth = ClassMask::from_raw(size, size, labels, table)?;
        SceneData::new(simulated, ground_truth, self.is_valid_position(ox, oy))
    }
}

/// Depth of the clipping plane used for screen-space culling.
const NEAR: f64 = 1e-3;

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Slab test; returns the entry distance (0 when starting inside) and the entry axis.
fn ray_box(o: [f64; 3], d: [f64; 3], s: &Solid) -> Option<(f64, usize)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut axis = 2;
    for k in 0..3 {
        if d[k].abs() < 1e-12 {
            if o[k] < s.min[k] || o[k] > s.max[k] {
                return None;
            }
            continue;
        }
        let t1 = (s.min[k] - o[k]) / d[k];
        let t2 = (s.max[k] - o[k]) / d[k];
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        if lo > t_near {
            t_near = lo;
            axis = k;
        }
        t_far = t_far.min(hi);
    }
    if t_far < t_near.max(0.0) {
        return None;
    }
    if t_near < 0.0 {
        return Some((0.0, 2));
    }
    Some((t_near, axis))
}

/// Scene generator backed by a built-in [`World`].
#[derive(Debug, Clone)]
pub struct BuiltinSceneGenerator {
    world: Arc<World>,
    size: u32,
    table: Arc<ClassTable>,
}

impl BuiltinSceneGenerator {
    pub fn new(world: Arc<World>, size: u32) -> Self {
        let table = Arc::new(ClassTable::for_profile(world.profile));
        Self { world, size, table }
    }

    pub fn world(&self) -> &World {
        &self.world
    }
}

impl SceneGenerator for BuiltinSceneGenerator {
    fn generate_scene(&self, genome: &Genome) -> Result<SceneData> {
        self.world.genome_bounds().check(genome)?;
        self.world.render(genome, self.size, self.table.clone())
    }
}
