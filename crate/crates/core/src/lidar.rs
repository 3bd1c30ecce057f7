//! Ray-cast LiDAR simulation and point-cloud plumbing.
//!
//! [`cast_frame`] shoots one ray per (channel, azimuth) pair from a mount's
//! sensor head and keeps the nearest hit among the ground plane, the
//! occluder boxes, and the frame's vehicle boxes, labeling each point with
//! what it struck. Returned clouds are expressed in the mount's sensor
//! frame (ground-projected pose, see [`crate::scene::CandidateMount::frame`]),
//! so the ground is z = 0 and the sensor head sits at `(0, 0, mast height)`.
//!
//! The remaining operations are the plumbing multi-sensor processing needs:
//! rigid re-expression between frames ([`transform_cloud`]), fusion of
//! clouds that share a frame ([`fuse_clouds`]), removal of vehicle returns
//! ([`strip_vehicle_points`]), and a fixed rectangular range crop
//! ([`crop_to_range`]).
//!
//! Ties between equidistant surfaces break toward the lower primitive
//! index; primitives are enumerated ground first, then occluders in
//! scenario order, then vehicles in frame order. Casting is deterministic:
//! same scenario, frame, mount, and spec produce the identical cloud.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;
use crate::scene::{CandidateMount, MountId, OrientedBox, Pose, Scenario, Vec3};
use crate::seeding;

/// Point-cloud binary format version accepted by [`read_cloud`].
pub const CLOUD_VERSION: u32 = 1;
const CLOUD_MAGIC: &[u8; 4] = b"RLPC";

/// Hits closer than this along the ray are treated as self-intersections
/// and ignored.
const T_MIN: f64 = 1e-9;

/// Sensor model. Elevation angles are evenly spaced over the vertical
/// field of view (endpoints included); azimuths step around the full
/// circle starting at the mount's facing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarSpec {
    pub channels: u32,
    /// (lowest, highest) elevation in degrees.
    pub vertical_fov_deg: (f64, f64),
    pub azimuth_step_deg: f64,
    /// Hits farther than this are discarded (meters).
    pub max_range: f64,
    /// Standard deviation of optional Gaussian range noise in meters;
    /// zero (the default) disables noise entirely.
    pub range_sigma: f64,
}

impl Default for LidarSpec {
    fn default() -> Self {
        LidarSpec {
            channels: 32,
            vertical_fov_deg: (-30.0, 10.0),
            azimuth_step_deg: 0.45,
            max_range: 120.0,
            range_sigma: 0.0,
        }
    }
}

impl LidarSpec {
    fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::Param("lidar needs at least one channel".into()));
        }
        if !(self.azimuth_step_deg.is_finite() && self.azimuth_step_deg > 0.0) {
            return Err(Error::Param("azimuth step must be positive".into()));
        }
        if !(self.vertical_fov_deg.0 <= self.vertical_fov_deg.1) {
            return Err(Error::Param("vertical fov must be ordered".into()));
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return Err(Error::Param("max range must be positive".into()));
        }
        if !(self.range_sigma.is_finite() && self.range_sigma >= 0.0) {
            return Err(Error::Param("range sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Azimuth positions per revolution.
    pub fn azimuth_count(&self) -> usize {
        // The small slack absorbs representation error when the step
        // divides 360 exactly in the reals (0.45 -> 800).
        (360.0 / self.azimuth_step_deg + 1e-9).floor() as usize
    }

    /// Rays emitted per frame: channels x azimuth positions.
    pub fn ray_count(&self) -> usize {
        self.channels as usize * self.azimuth_count()
    }

    /// Elevation of `channel` in radians.
    fn elevation_rad(&self, channel: u32) -> f64 {
        let (lo, hi) = self.vertical_fov_deg;
        let deg = if self.channels <= 1 {
            0.5 * (lo + hi)
        } else {
            lo + channel as f64 * (hi - lo) / (self.channels - 1) as f64
        };
        deg.to_radians()
    }
}

/// What a LiDAR return struck.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLabel {
    Static,
    Vehicle(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub pos: Vec3,
    pub label: PointLabel,
}

/// Coordinate frame tag carried by every cloud; transforms check it so a
/// cloud is never re-expressed from a frame it is not in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameName {
    Mount(MountId),
    /// The fusion hub: the first mount of the active placement.
    Ego,
    /// The scenario's world frame, which anchors the ROI grid.
    Scene,
}

impl fmt::Display for FrameName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameName::Mount(id) => write!(f, "mount:{id}"),
            FrameName::Ego => write!(f, "ego"),
            FrameName::Scene => write!(f, "scene"),
        }
    }
}

/// A named coordinate frame: the tag plus the pose of that frame in the
/// scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub name: FrameName,
    pub pose: Pose,
}

impl Frame {
    /// The mount's sensor frame.
    pub fn mount(m: &CandidateMount) -> Frame {
        Frame {
            name: FrameName::Mount(m.id),
            pose: m.frame(),
        }
    }

    /// The same pose re-tagged as the ego fusion frame.
    pub fn ego(m: &CandidateMount) -> Frame {
        Frame {
            name: FrameName::Ego,
            pose: m.frame(),
        }
    }

    pub fn scene() -> Frame {
        Frame {
            name: FrameName::Scene,
            pose: Pose::identity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    /// Index of the traffic frame this cloud was sensed at.
    pub frame_id: u64,
    /// Coordinate frame the points are expressed in.
    pub frame: FrameName,
    pub points: Vec<LabeledPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points labeled with the given vehicle id.
    pub fn vehicle_point_count(&self, vehicle_id: u32) -> usize {
        self.points
            .iter()
            .filter(|p| p.label == PointLabel::Vehicle(vehicle_id))
            .count()
    }
}

/// Rectangular per-sensor crop: keeps points with `|x - cx| <= l/2`,
/// `|y - cy| <= w/2`, and `0 <= z - cz <= h` (all bounds closed). z is
/// measured from the box base, so the default box keeps the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeBox {
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub center: Vec3,
}

impl Default for RangeBox {
    fn default() -> Self {
        RangeBox {
            l: 140.0,
            w: 40.0,
            h: 4.0,
            center: Vec3::new(0.0, 0.0, 0.0),
        }
    }
}

/// Casts every ray of `spec` from the mount at traffic frame `frame_index`
/// and returns the labeled returns in the mount's sensor frame.
///
/// Point order is channel-major, azimuth-minor; rays that hit nothing
/// within `max_range` contribute no point. With `range_sigma > 0` hit
/// distances are perturbed by Gaussian noise drawn from a stream seeded by
/// `(scenario seed, frame index, mount id)`, keeping the cloud a pure
/// function of its inputs.
pub fn cast_frame(
    scenario: &Scenario,
    frame_index: usize,
    mount: &CandidateMount,
    spec: &LidarSpec,
) -> Result<PointCloud> {
    spec.validate()?;
    let frame = scenario.frame(frame_index)?;
    let origin = mount.pose.position;
    let base = mount.frame();
    let (sin_yaw, cos_yaw) = base.yaw.sin_cos();

    let mut noise = if spec.range_sigma > 0.0 {
        let seed = seeding::mix(&[scenario.seed, frame_index as u64, mount.id as u64, 0xCA57]);
        Some((
            ChaCha8Rng::seed_from_u64(seed),
            Normal::new(0.0, spec.range_sigma).map_err(|e| Error::Param(e.to_string()))?,
        ))
    } else {
        None
    };

    let n_az = spec.azimuth_count();
    let step = spec.azimuth_step_deg.to_radians();
    let mut points = Vec::new();
    for ch in 0..spec.channels {
        let el = spec.elevation_rad(ch);
        let (sin_el, cos_el) = el.sin_cos();
        for k in 0..n_az {
            let az = base.yaw + k as f64 * step;
            let (sin_az, cos_az) = az.sin_cos();
            let dir = Vec3::new(cos_el * cos_az, cos_el * sin_az, sin_el);

            // Nearest primitive: ground is index 0, occluders follow in
            // scenario order, vehicles in frame order. Strict `<` keeps
            // the lower index on exact distance ties.
            let mut best: Option<(f64, PointLabel)> = None;
            if let Some(t) = geom::ray_ground_intersection(origin, dir, T_MIN) {
                best = Some((t, PointLabel::Static));
            }
            for o in &scenario.occluders {
                if let Some(t) = geom::ray_box_intersection(origin, dir, o, T_MIN) {
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, PointLabel::Static));
                    }
                }
            }
            for v in &frame.vehicles {
                if let Some(t) = geom::ray_box_intersection(origin, dir, &v.bbox, T_MIN) {
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, PointLabel::Vehicle(v.id)));
                    }
                }
            }

            let Some((mut t, label)) = best else { continue };
            if t > spec.max_range {
                continue;
            }
            if let Some((rng, normal)) = noise.as_mut() {
                t = (t + normal.sample(rng)).max(T_MIN);
            }
            let wx = origin.x + t * dir.x;
            let wy = origin.y + t * dir.y;
            let wz = origin.z + t * dir.z;
            // Express in the mount's sensor frame.
            let dx = wx - base.position.x;
            let dy = wy - base.position.y;
            points.push(LabeledPoint {
                pos: Vec3::new(
                    cos_yaw * dx + sin_yaw * dy,
                    -sin_yaw * dx + cos_yaw * dy,
                    wz,
                ),
                label,
            });
        }
    }

    Ok(PointCloud {
        frame_id: frame_index as u64,
        frame: FrameName::Mount(mount.id),
        points,
    })
}

/// Re-expresses a cloud from frame `from` into frame `to`: rotation about
/// z by the yaw difference, then translation. Rigid, so all pairwise
/// distances are preserved.
pub fn transform_cloud(cloud: &PointCloud, from: &Frame, to: &Frame) -> Result<PointCloud> {
    if cloud.frame != from.name {
        return Err(Error::Frame(format!(
            "cloud is in frame {}, not {}",
            cloud.frame, from.name
        )));
    }
    let dyaw = from.pose.yaw - to.pose.yaw;
    let (s, c) = dyaw.sin_cos();
    let (ts, tc) = to.pose.yaw.sin_cos();
    // Translation of the from-origin expressed in the to-frame.
    let ox = from.pose.position.x - to.pose.position.x;
    let oy = from.pose.position.y - to.pose.position.y;
    let oz = from.pose.position.z - to.pose.position.z;
    let tx = tc * ox + ts * oy;
    let ty = -ts * ox + tc * oy;
    let points = cloud
        .points
        .iter()
        .map(|p| LabeledPoint {
            pos: Vec3::new(
                c * p.pos.x - s * p.pos.y + tx,
                s * p.pos.x + c * p.pos.y + ty,
                p.pos.z + oz,
            ),
            label: p.label,
        })
        .collect();
    Ok(PointCloud {
        frame_id: cloud.frame_id,
        frame: to.name,
        points,
    })
}

/// Concatenates clouds that share a frame tag and a frame id. The result
/// is the multiset union in input order.
pub fn fuse_clouds(clouds: &[PointCloud]) -> Result<PointCloud> {
    let first = clouds
        .first()
        .ok_or_else(|| Error::Param("fuse needs at least one cloud".into()))?;
    let mut points = Vec::with_capacity(clouds.iter().map(|c| c.len()).sum());
    for c in clouds {
        if c.frame != first.frame {
            return Err(Error::Frame(format!(
                "cannot fuse clouds in frames {} and {}",
                first.frame, c.frame
            )));
        }
        if c.frame_id != first.frame_id {
            return Err(Error::Frame(format!(
                "cannot fuse clouds from traffic frames {} and {}",
                first.frame_id, c.frame_id
            )));
        }
        points.extend_from_slice(&c.points);
    }
    Ok(PointCloud {
        frame_id: first.frame_id,
        frame: first.frame,
        points,
    })
}

/// Drops every vehicle-labeled point, keeping order.
pub fn strip_vehicle_points(cloud: &PointCloud) -> PointCloud {
    PointCloud {
        frame_id: cloud.frame_id,
        frame: cloud.frame,
        points: cloud
            .points
            .iter()
            .filter(|p| p.label == PointLabel::Static)
            .copied()
            .collect(),
    }
}

/// Keeps exactly the points inside the range box (closed bounds; see
/// [`RangeBox`]).
pub fn crop_to_range(cloud: &PointCloud, range: &RangeBox) -> PointCloud {
    debug_assert!(range.l > 0.0 && range.w > 0.0 && range.h > 0.0);
    PointCloud {
        frame_id: cloud.frame_id,
        frame: cloud.frame,
        points: cloud
            .points
            .iter()
            .filter(|p| {
                (p.pos.x - range.center.x).abs() <= range.l / 2.0
                    && (p.pos.y - range.center.y).abs() <= range.w / 2.0
                    && p.pos.z - range.center.z >= 0.0
                    && p.pos.z - range.center.z <= range.h
            })
            .copied()
            .collect(),
    }
}

/// [`cast_frame`] followed by the standard per-sensor crop in the mount's
/// own frame. This is the sensing step every pipeline stage shares.
pub fn cast_cropped(
    scenario: &Scenario,
    frame_index: usize,
    mount: &CandidateMount,
    spec: &LidarSpec,
    crop: &RangeBox,
) -> Result<PointCloud> {
    Ok(crop_to_range(
        &cast_frame(scenario, frame_index, mount, spec)?,
        crop,
    ))
}

/// A placement must list at least one known mount id, each at most once.
pub fn validate_placement(scenario: &Scenario, placement: &[MountId]) -> Result<()> {
    if placement.is_empty() {
        return Err(Error::Param("placement must not be empty".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for &id in placement {
        scenario.mount(id)?;
        if !seen.insert(id) {
            return Err(Error::Param(format!("mount {id} listed twice")));
        }
    }
    Ok(())
}

/// Senses one traffic frame with every mount of a placement and fuses the
/// clouds in the ego frame (the placement's first mount). Labels are kept;
/// points appear in placement order, ray order within each mount.
pub fn fuse_placement(
    scenario: &Scenario,
    frame_index: usize,
    placement: &[MountId],
    spec: &LidarSpec,
    crop: &RangeBox,
) -> Result<PointCloud> {
    validate_placement(scenario, placement)?;
    let ego = Frame::ego(scenario.mount(placement[0])?);
    let mut clouds = Vec::with_capacity(placement.len());
    for &id in placement {
        let m = scenario.mount(id)?;
        let cloud = cast_cropped(scenario, frame_index, m, spec, crop)?;
        clouds.push(transform_cloud(&cloud, &Frame::mount(m), &ego)?);
    }
    fuse_clouds(&clouds)
}

/// Multi-frame vehicle-free fusion: static returns of `target`, plus the
/// static returns of `fillers` (clouds of the same mount at other traffic
/// frames) that fall inside the given vehicle footprints. Fills in ground
/// occluded by vehicles at the target frame; not used by the default
/// pipeline, which strips labels instead.
pub fn fuse_static_across_frames(
    target: &PointCloud,
    fillers: &[PointCloud],
    footprints: &[OrientedBox],
) -> Result<PointCloud> {
    let mut out = strip_vehicle_points(target);
    for f in fillers {
        if f.frame != target.frame {
            return Err(Error::Frame(format!(
                "filler cloud in frame {}, target in {}",
                f.frame, target.frame
            )));
        }
        out.points.extend(
            f.points
                .iter()
                .filter(|p| {
                    p.label == PointLabel::Static
                        && footprints
                            .iter()
                            .any(|b| geom::point_in_bev(b, p.pos.x, p.pos.y))
                })
                .copied(),
        );
    }
    Ok(out)
}

fn label_to_i32(label: PointLabel) -> i32 {
    match label {
        PointLabel::Static => -1,
        PointLabel::Vehicle(id) => id as i32,
    }
}

fn label_from_i32(v: i32) -> PointLabel {
    if v < 0 {
        PointLabel::Static
    } else {
        PointLabel::Vehicle(v as u32)
    }
}

/// Writes the cloud in the binary format: magic `RLPC`, little-endian
/// `u32` version, `u64` point count, `u64` frame id, then one record per
/// point of `f32` x, y, z and `i32` label (-1 = static, otherwise the
/// vehicle id).
pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + cloud.len() * 16);
    buf.extend_from_slice(CLOUD_MAGIC);
    buf.extend_from_slice(&CLOUD_VERSION.to_le_bytes());
    buf.extend_from_slice(&(cloud.len() as u64).to_le_bytes());
    buf.extend_from_slice(&cloud.frame_id.to_le_bytes());
    for p in &cloud.points {
        buf.extend_from_slice(&(p.pos.x as f32).to_le_bytes());
        buf.extend_from_slice(&(p.pos.y as f32).to_le_bytes());
        buf.extend_from_slice(&(p.pos.z as f32).to_le_bytes());
        buf.extend_from_slice(&label_to_i32(p.label).to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Reads a cloud written by [`write_cloud`]. The format carries no frame
/// tag, so the caller states which frame the cloud is expressed in.
pub fn read_cloud(path: &Path, frame: FrameName) -> Result<PointCloud> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 24 || &bytes[0..4] != CLOUD_MAGIC {
        return Err(Error::Parse(format!(
            "{}: not a point-cloud file",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CLOUD_VERSION {
        return Err(Error::Version(format!(
            "{}: cloud version {version}, expected {CLOUD_VERSION}",
            path.display()
        )));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let frame_id = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let need = 24 + count * 16;
    if bytes.len() != need {
        return Err(Error::Parse(format!(
            "{}: truncated or oversized record region ({} bytes, expected {need})",
            path.display(),
            bytes.len()
        )));
    }
    let mut points = Vec::with_capacity(count);
    for k in 0..count {
        let at = 24 + k * 16;
        let x = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let y = f32::from_le_bytes(bytes[at + 4..at + 8].try_into().unwrap());
        let z = f32::from_le_bytes(bytes[at + 8..at + 12].try_into().unwrap());
        let label = i32::from_le_bytes(bytes[at + 12..at + 16].try_into().unwrap());
        points.push(LabeledPoint {
            pos: Vec3::new(x as f64, y as f64, z as f64),
            label: label_from_i32(label),
        });
    }
    Ok(PointCloud {
        frame_id,
        frame,
        points,
    })
}

/// Writes the same records as [`write_cloud`] as CSV with an `x,y,z,label`
/// header, for eyeballing clouds in other tools.
pub fn write_cloud_csv(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut s = String::from("x,y,z,label\n");
    for p in &cloud.points {
        // Serialize the f32-truncated values so the CSV mirrors the
        // binary records exactly.
        s.push_str(&format!(
            "{},{},{},{}\n",
            p.pos.x as f32,
            p.pos.y as f32,
            p.pos.z as f32,
            label_to_i32(p.label)
        ));
    }
    std::fs::write(path, s)?;
    Ok(())
}
