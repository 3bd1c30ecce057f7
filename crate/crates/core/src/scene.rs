//! Scenario synthesis and the region-of-interest grid.
//!
//! A [`Scenario`] is a self-contained experiment input: a rectangular scene
//! extent, static box occluders, candidate sensor mounts on the periphery,
//! and a sequence of traffic frames with oriented vehicle boxes. Scenarios
//! are generated procedurally around a cross intersection (two perpendicular
//! roads, two lanes each, right-hand traffic, constant-speed vehicles on
//! straight and turning routes) and are fully determined by `(seed, params)`.
//!
//! Coordinate conventions used throughout the crate:
//! * the scene frame has its origin at the intersection center, z up,
//!   ground at z = 0;
//! * a mount's sensor frame is its ground-projected pose ([`CandidateMount::frame`]):
//!   x along the sensor's facing, origin at the mast base, so the ground is
//!   z = 0 in every frame and the sensor head sits at `(0, 0, mast height)`;
//! * grid cell `(i, j)` covers the half-open square
//!   `[x0 + j*c, x0 + (j+1)*c) x [y0 + i*c, y0 + (i+1)*c)`.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;
use crate::jsonio;
use crate::seeding;

/// Candidate mounts are addressed by dense small-integer ids `0..N-1`.
pub type MountId = u32;

/// Scenario file format version accepted by [`load_scenario`].
pub const SCENARIO_VERSION: u32 = 1;

/// Normalizes an angle to the half-open interval `[-pi, pi)`.
pub fn normalize_yaw(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = a - two_pi * ((a + PI) / two_pi).floor();
    // Guard the representable edge: the subtraction above can land exactly
    // on +pi for inputs a hair below an odd multiple of pi.
    if y >= PI {
        y -= two_pi;
    }
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Position plus heading (rotation about z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Pose {
            position,
            yaw: normalize_yaw(yaw),
        }
    }

    /// The scene frame itself: zero translation, zero yaw.
    pub fn identity() -> Self {
        Pose {
            position: Vec3::new(0.0, 0.0, 0.0),
            yaw: 0.0,
        }
    }
}

/// Box with yaw-only orientation; `center` is the geometric center and
/// `half_extents` the positive half side lengths along the box axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub yaw: f64,
}

impl OrientedBox {
    pub fn new(center: Vec3, half_extents: Vec3, yaw: f64) -> Self {
        OrientedBox {
            center,
            half_extents,
            yaw: normalize_yaw(yaw),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.center.is_finite() && self.half_extents.is_finite() && self.yaw.is_finite()) {
            return Err(Error::Validation(format!("{what}: non-finite field")));
        }
        if self.half_extents.x <= 0.0 || self.half_extents.y <= 0.0 || self.half_extents.z <= 0.0 {
            return Err(Error::Validation(format!(
                "{what}: half extents must be positive"
            )));
        }
        if !(-PI..PI).contains(&self.yaw) {
            return Err(Error::Validation(format!(
                "{what}: yaw {} outside [-pi, pi)",
                self.yaw
            )));
        }
        Ok(())
    }
}

/// Axis-aligned scene bounds in the scene frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Extent {
    pub fn square(half: f64) -> Self {
        Extent {
            x_min: -half,
            x_max: half,
            y_min: -half,
            y_max: half,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

/// A place a sensor could be installed. `pose.position` is the sensor head
/// (z is the mast height above ground); yaw is the facing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateMount {
    pub id: MountId,
    pub pose: Pose,
}

impl CandidateMount {
    /// The mount's sensor coordinate frame: the pose projected to the
    /// ground, so z in this frame equals height above ground.
    pub fn frame(&self) -> Pose {
        Pose {
            position: Vec3::new(self.pose.position.x, self.pose.position.y, 0.0),
            yaw: self.pose.yaw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u32,
    pub bbox: OrientedBox,
}

/// One time step of traffic: every vehicle's oriented box. Vehicle ids are
/// stable across the frames of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficFrame {
    pub index: u32,
    pub vehicles: Vec<Vehicle>,
}

/// Region-of-interest raster over the scene extent; row `i` advances along
/// +y, column `j` along +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub height: usize,
    pub width: usize,
}

impl GridSpec {
    /// Smallest grid with the given cell size whose union of cells covers
    /// `extent`, anchored at the extent minimum corner.
    pub fn cover(extent: &Extent, cell_size: f64) -> Result<GridSpec> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::Param(format!("cell size {cell_size} must be > 0")));
        }
        if !(extent.x_min < extent.x_max && extent.y_min < extent.y_max) {
            return Err(Error::Param("degenerate extent".into()));
        }
        let width = ((extent.x_max - extent.x_min) / cell_size).ceil() as usize;
        let height = ((extent.y_max - extent.y_min) / cell_size).ceil() as usize;
        Ok(GridSpec {
            origin_x: extent.x_min,
            origin_y: extent.y_min,
            cell_size,
            height,
            width,
        })
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    /// Row-major flat index of cell `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.height && j < self.width);
        i * self.width + j
    }

    /// Cell containing the point, or `None` outside the grid.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fj = (x - self.origin_x) / self.cell_size;
        let fi = (y - self.origin_y) / self.cell_size;
        if !(fi.is_finite() && fj.is_finite()) || fi < 0.0 || fj < 0.0 {
            return None;
        }
        let i = fi.floor() as usize;
        let j = fj.floor() as usize;
        if i < self.height && j < self.width {
            Some((i, j))
        } else {
            None
        }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin_x + (j as f64 + 0.5) * self.cell_size,
            self.origin_y + (i as f64 + 0.5) * self.cell_size,
        )
    }

    /// `((x_lo, x_hi), (y_lo, y_hi))` of cell `(i, j)`.
    pub fn cell_bounds(&self, i: usize, j: usize) -> ((f64, f64), (f64, f64)) {
        let x0 = self.origin_x + j as f64 * self.cell_size;
        let y0 = self.origin_y + i as f64 * self.cell_size;
        (
            (x0, x0 + self.cell_size),
            (y0, y0 + self.cell_size),
        )
    }
}

/// A complete experiment input. See the module docs for the frame and grid
/// conventions; [`Scenario::validate`] states the invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub extent: Extent,
    pub occluders: Vec<OrientedBox>,
    pub mounts: Vec<CandidateMount>,
    pub frames: Vec<TrafficFrame>,
    pub grid: GridSpec,
}

impl Scenario {
    pub fn mount(&self, id: MountId) -> Result<&CandidateMount> {
        self.mounts
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| Error::Param(format!("unknown mount id {id}")))
    }

    pub fn mount_ids(&self) -> Vec<MountId> {
        self.mounts.iter().map(|m| m.id).collect()
    }

    pub fn frame(&self, index: usize) -> Result<&TrafficFrame> {
        self.frames
            .get(index)
            .ok_or_else(|| Error::Param(format!("frame index {index} out of range")))
    }

    /// Checks every structural invariant; load and generation both go
    /// through this.
    pub fn validate(&self) -> Result<()> {
        if !(self.extent.x_min < self.extent.x_max && self.extent.y_min < self.extent.y_max) {
            return Err(Error::Validation("degenerate extent".into()));
        }
        if self.mounts.is_empty() {
            return Err(Error::Validation("scenario has no mounts".into()));
        }
        if self.frames.is_empty() {
            return Err(Error::Validation("scenario has no frames".into()));
        }
        if !(self.grid.cell_size > 0.0) || self.grid.cells() == 0 {
            return Err(Error::Validation("empty grid".into()));
        }
        // Mount ids must be exactly 0..N-1; selection results and trace
        // files identify mounts by these ids.
        let mut ids: Vec<MountId> = self.mounts.iter().map(|m| m.id).collect();
        ids.sort_unstable();
        for (k, id) in ids.iter().enumerate() {
            if *id != k as MountId {
                return Err(Error::Validation(format!(
                    "mount ids must be dense 0..{}, found {id}",
                    self.mounts.len() - 1
                )));
            }
        }
        for m in &self.mounts {
            if !(m.pose.position.is_finite() && m.pose.yaw.is_finite()) {
                return Err(Error::Validation(format!("mount {}: non-finite pose", m.id)));
            }
            if m.pose.position.z <= 0.0 {
                return Err(Error::Validation(format!(
                    "mount {}: mast height must be positive",
                    m.id
                )));
            }
            if !(-PI..PI).contains(&m.pose.yaw) {
                return Err(Error::Validation(format!(
                    "mount {}: yaw outside [-pi, pi)",
                    m.id
                )));
            }
        }
        for (k, o) in self.occluders.iter().enumerate() {
            o.validate(&format!("occluder {k}"))?;
        }
        for (k, f) in self.frames.iter().enumerate() {
            if f.index as usize != k {
                return Err(Error::Validation(format!(
                    "frame {k}: index field {} out of order",
                    f.index
                )));
            }
            let mut seen = std::collections::BTreeSet::new();
            for v in &f.vehicles {
                if !seen.insert(v.id) {
                    return Err(Error::Validation(format!(
                        "frame {k}: duplicate vehicle id {}",
                        v.id
                    )));
                }
                v.bbox.validate(&format!("frame {k} vehicle {}", v.id))?;
                for [cx, cy] in geom::bev_corners(&v.bbox) {
                    if !self.extent.contains_xy(cx, cy) {
                        return Err(Error::Validation(format!(
                            "frame {k}: vehicle {} leaves the scene extent",
                            v.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Generator knobs. `Default` gives the standard desk-scale scene: a
/// 160 m x 160 m extent, 8 mounts, 10 vehicles, 10 frames at 2 Hz, 4
/// occluder blocks, 2 m grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub n_mounts: usize,
    pub n_vehicles: usize,
    pub n_frames: usize,
    pub n_occluders: usize,
    /// Scene half side length; the extent is the square `[-h, h]^2`.
    pub half_extent: f64,
    pub cell_size: f64,
    pub mast_height: f64,
    /// Seconds between consecutive frames.
    pub frame_dt: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            n_mounts: 8,
            n_vehicles: 10,
            n_frames: 10,
            n_occluders: 4,
            half_extent: 80.0,
            cell_size: 2.0,
            mast_height: 5.0,
            frame_dt: 0.5,
        }
    }
}

// Road geometry constants shared by the route builder and the occluder
// placer. Lanes sit at +-LANE_OFFSET from the road axis; occluders must
// keep OCCLUDER_ROAD_GAP clear of the road edge so they never overlap a
// lane, and OCCLUDER_EDGE_GAP clear of the mount ring on the periphery.
const LANE_OFFSET: f64 = 1.75;
const ROAD_HALF_WIDTH: f64 = 3.5;
const OCCLUDER_ROAD_GAP: f64 = 4.0;
const OCCLUDER_EDGE_GAP: f64 = 8.0;
const MOUNT_INSET: f64 = 3.0;
const ROUTE_END_MARGIN: f64 = 6.0;
const RIGHT_TURN_RADIUS: f64 = 6.0;
const LEFT_TURN_RADIUS: f64 = LANE_OFFSET + 7.25;
const SPEED_RANGE: (f64, f64) = (8.0, 14.0);

enum Seg {
    Line { a: [f64; 2], b: [f64; 2] },
    /// Circular arc from angle `a0` to `a1` (clockwise when `a1 < a0`).
    Arc { c: [f64; 2], r: f64, a0: f64, a1: f64 },
}

impl Seg {
    fn len(&self) -> f64 {
        match self {
            Seg::Line { a, b } => ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt(),
            Seg::Arc { r, a0, a1, .. } => r * (a1 - a0).abs(),
        }
    }

    /// Position and travel heading at arc length `s` into the segment.
    fn sample(&self, s: f64) -> ([f64; 2], f64) {
        match self {
            Seg::Line { a, b } => {
                let len = self.len();
                let t = if len > 0.0 { s / len } else { 0.0 };
                let heading = (b[1] - a[1]).atan2(b[0] - a[0]);
                (
                    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
                    heading,
                )
            }
            Seg::Arc { c, r, a0, a1 } => {
                let dir = if a1 >= a0 { 1.0 } else { -1.0 };
                let ang = a0 + dir * s / r;
                let heading = ang + dir * std::f64::consts::FRAC_PI_2;
                ([c[0] + r * ang.cos(), c[1] + r * ang.sin()], heading)
            }
        }
    }
}

struct Route {
    segs: Vec<Seg>,
    len: f64,
    /// Quarter turns applied to the base (northbound-entry) geometry.
    rot: usize,
}

impl Route {
    fn new(segs: Vec<Seg>, rot: usize) -> Self {
        let len = segs.iter().map(Seg::len).sum();
        Route { segs, len, rot }
    }

    fn sample(&self, s: f64) -> ([f64; 2], f64) {
        let mut s = s.rem_euclid(self.len);
        for seg in &self.segs {
            let l = seg.len();
            if s <= l {
                let (p, h) = seg.sample(s);
                let (p, h) = rotate_quarter(p, h, self.rot);
                return (p, normalize_yaw(h));
            }
            s -= l;
        }
        let (p, h) = self.segs.last().unwrap().sample(self.segs.last().unwrap().len());
        let (p, h) = rotate_quarter(p, h, self.rot);
        (p, normalize_yaw(h))
    }
}

fn rotate_quarter(p: [f64; 2], heading: f64, k: usize) -> ([f64; 2], f64) {
    let mut q = p;
    for _ in 0..(k % 4) {
        q = [-q[1], q[0]];
    }
    (q, heading + (k % 4) as f64 * std::f64::consts::FRAC_PI_2)
}

/// The twelve lane routes of the cross intersection: for each of the four
/// entry arms, go straight, turn right, or turn left.
fn build_routes(half_extent: f64) -> Vec<Route> {
    let l = half_extent - ROUTE_END_MARGIN;
    let rr = RIGHT_TURN_RADIUS;
    let rl = LEFT_TURN_RADIUS;
    let x = LANE_OFFSET;
    let mut routes = Vec::new();
    for rot in 0..4 {
        routes.push(Route::new(
            vec![Seg::Line {
                a: [x, -l],
                b: [x, l],
            }],
            rot,
        ));
        routes.push(Route::new(
            vec![
                Seg::Line {
                    a: [x, -l],
                    b: [x, -x - rr],
                },
                Seg::Arc {
                    c: [x + rr, -x - rr],
                    r: rr,
                    a0: PI,
                    a1: PI / 2.0,
                },
                Seg::Line {
                    a: [x + rr, -x],
                    b: [l, -x],
                },
            ],
            rot,
        ));
        routes.push(Route::new(
            vec![
                Seg::Line {
                    a: [x, -l],
                    b: [x, x - rl],
                },
                Seg::Arc {
                    c: [x - rl, x - rl],
                    r: rl,
                    a0: 0.0,
                    a1: PI / 2.0,
                },
                Seg::Line {
                    a: [x - rl, x],
                    b: [-l, x],
                },
            ],
            rot,
        ));
    }
    routes
}

/// Builds the scenario determined by `(seed, params)`.
///
/// The generator is a pure function of its arguments: vehicle routes,
/// speeds and spawn phases, occluder layout, and mount spacing jitter each
/// draw from an independent sub-stream of `seed`, so regenerating with the
/// same inputs reproduces the scenario bit for bit.
pub fn generate_scene(seed: u64, params: &SceneParams) -> Result<Scenario> {
    if params.n_mounts == 0 {
        return Err(Error::Param("need at least one mount".into()));
    }
    if params.n_frames == 0 {
        return Err(Error::Param("need at least one frame".into()));
    }
    if !(params.half_extent.is_finite() && params.half_extent >= 20.0) {
        return Err(Error::Param(format!(
            "half extent {} must be >= 20 m to fit the intersection",
            params.half_extent
        )));
    }
    if !(params.cell_size.is_finite() && params.cell_size > 0.0) {
        return Err(Error::Param("cell size must be positive".into()));
    }
    if !(params.mast_height.is_finite() && params.mast_height > 0.0) {
        return Err(Error::Param("mast height must be positive".into()));
    }
    if !(params.frame_dt.is_finite() && params.frame_dt > 0.0) {
        return Err(Error::Param("frame dt must be positive".into()));
    }

    let extent = Extent::square(params.half_extent);
    let grid = GridSpec::cover(&extent, params.cell_size)?;
    let routes = build_routes(params.half_extent);

    // Occluders: blocks in the four quadrants, clear of both roads and the
    // mount ring by construction.
    let mut occ_rng = ChaCha8Rng::seed_from_u64(seeding::mix(&[seed, 0xA]));
    let lo = ROAD_HALF_WIDTH + OCCLUDER_ROAD_GAP;
    let hi = params.half_extent - OCCLUDER_EDGE_GAP;
    let half_span = 0.5 * (hi - lo);
    let mut occluders = Vec::with_capacity(params.n_occluders);
    for k in 0..params.n_occluders {
        let quadrant = k % 4;
        let (sx, sy) = match quadrant {
            0 => (1.0, 1.0),
            1 => (-1.0, 1.0),
            2 => (-1.0, -1.0),
            _ => (1.0, -1.0),
        };
        let cap = (half_span - 0.5) / std::f64::consts::SQRT_2;
        let hx = occ_rng.gen_range(3.0..10.0f64).min(cap);
        let hy = occ_rng.gen_range(3.0..10.0f64).min(cap);
        let hz = occ_rng.gen_range(1.5..4.0);
        let yaw = occ_rng.gen_range(-PI..PI);
        let rho = hx.hypot(hy);
        let cx = lo + rho + occ_rng.gen_range(0.0..1.0) * (hi - lo - 2.0 * rho);
        let cy = lo + rho + occ_rng.gen_range(0.0..1.0) * (hi - lo - 2.0 * rho);
        occluders.push(OrientedBox::new(
            Vec3::new(sx * cx, sy * cy, hz),
            Vec3::new(hx, hy, hz),
            yaw,
        ));
    }

    // Mounts: roughly even spacing around the periphery ring, jittered so
    // no two seeds share an exactly symmetric layout, facing the center.
    let mut mount_rng = ChaCha8Rng::seed_from_u64(seeding::mix(&[seed, 0xB]));
    let ring = params.half_extent - MOUNT_INSET;
    let perimeter = 8.0 * ring;
    let (cx0, cy0) = extent.center();
    let mut mounts = Vec::with_capacity(params.n_mounts);
    for i in 0..params.n_mounts {
        let jitter = mount_rng.gen_range(-0.2..0.2f64);
        let s = (i as f64 + 0.5 + jitter) / params.n_mounts as f64 * perimeter;
        let (x, y) = perimeter_point(ring, s);
        let yaw = (cy0 - y).atan2(cx0 - x);
        mounts.push(CandidateMount {
            id: i as MountId,
            pose: Pose::new(Vec3::new(x, y, params.mast_height), yaw),
        });
    }

    // Vehicles: route, speed, spawn phase, and body size per vehicle.
    let mut veh_rng = ChaCha8Rng::seed_from_u64(seeding::mix(&[seed, 0xC]));
    struct Veh {
        route: usize,
        speed: f64,
        phase: f64,
        half: Vec3,
    }
    let vehicles: Vec<Veh> = (0..params.n_vehicles)
        .map(|_| {
            let route = veh_rng.gen_range(0..routes.len());
            let speed = veh_rng.gen_range(SPEED_RANGE.0..SPEED_RANGE.1);
            let phase = veh_rng.gen_range(0.0..routes[route].len);
            let half = Vec3::new(
                2.25 * (1.0 + veh_rng.gen_range(-0.1..0.1f64)),
                0.95 * (1.0 + veh_rng.gen_range(-0.1..0.1f64)),
                0.80 * (1.0 + veh_rng.gen_range(-0.1..0.1f64)),
            );
            Veh {
                route,
                speed,
                phase,
                half,
            }
        })
        .collect();

    let mut frames = Vec::with_capacity(params.n_frames);
    for f in 0..params.n_frames {
        let t = f as f64 * params.frame_dt;
        let mut vs = Vec::with_capacity(vehicles.len());
        for (vid, v) in vehicles.iter().enumerate() {
            let ([x, y], heading) = routes[v.route].sample(v.phase + v.speed * t);
            vs.push(Vehicle {
                id: vid as u32,
                bbox: OrientedBox::new(Vec3::new(x, y, v.half.z), v.half, heading),
            });
        }
        frames.push(TrafficFrame {
            index: f as u32,
            vehicles: vs,
        });
    }

    let scenario = Scenario {
        seed,
        extent,
        occluders,
        mounts,
        frames,
        grid,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Point at arc length `s` along the periphery square of half side `ring`,
/// starting at the bottom-left corner and walking counterclockwise.
fn perimeter_point(ring: f64, s: f64) -> (f64, f64) {
    let side = 2.0 * ring;
    let s = s.rem_euclid(4.0 * side);
    if s < side {
        (-ring + s, -ring)
    } else if s < 2.0 * side {
        (ring, -ring + (s - side))
    } else if s < 3.0 * side {
        (ring - (s - 2.0 * side), ring)
    } else {
        (-ring, ring - (s - 3.0 * side))
    }
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    version: u32,
    seed: u64,
    extent: Extent,
    occluders: Vec<OrientedBox>,
    mounts: Vec<CandidateMount>,
    frames: Vec<TrafficFrame>,
    grid: GridSpec,
}

/// Writes the scenario as canonical JSON (sorted keys, version tag).
pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    let file = ScenarioFile {
        version: SCENARIO_VERSION,
        seed: scenario.seed,
        extent: scenario.extent,
        occluders: scenario.occluders.clone(),
        mounts: scenario.mounts.clone(),
        frames: scenario.frames.clone(),
        grid: scenario.grid,
    };
    jsonio::write_canonical(&file, path)
}

/// Reads and fully validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    match value.get("version").and_then(|v| v.as_u64()) {
        None => {
            return Err(Error::Parse(format!(
                "{}: missing version tag",
                path.display()
            )))
        }
        Some(v) if v != SCENARIO_VERSION as u64 => {
            return Err(Error::Version(format!(
                "{}: scenario version {v}, expected {SCENARIO_VERSION}",
                path.display()
            )))
        }
        Some(_) => {}
    }
    let file: ScenarioFile = serde_json::from_value(value)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let scenario = Scenario {
        seed: file.seed,
        extent: file.extent,
        occluders: file.occluders,
        mounts: file.mounts,
        frames: file.frames,
        grid: file.grid,
    };
    scenario.validate()?;
    Ok(scenario)
}
