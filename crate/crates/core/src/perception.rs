//! From point clouds to perception ability maps.
//!
//! The perception model answers one question per ROI grid cell: if a
//! vehicle stood here, how well would the current sensor set perceive it?
//! The answer is a logistic read-out over four cheap cell features of the
//! vehicle-free fused cloud:
//!
//! * `f1` log(1 + point count),
//! * `f2` mean point height,
//! * `f3` height span,
//! * `f4` fraction of occupied neighbor cells in the one-cell ring
//!   (empty cells carry all-zero features).
//!
//! Supervision comes from a surrogate detection confidence map `C`: each
//! vehicle writes `1 - exp(-n/20)` (n = its labeled points in the fused
//! cloud) into the cells its footprint overlaps. Cells with `C > threshold`
//! form the mask `K`, and training minimizes masked mean absolute error
//! plus `gamma` times a four-neighbor smoothness penalty, by full-batch
//! gradient descent with analytic gradients. Everything here is
//! deterministic; there is no data-dependent randomness.
//!
//! The sum of an ability map is the perception score that placement
//! optimization maximizes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;
use crate::jsonio;
use crate::lidar::{
    self, cast_cropped, strip_vehicle_points, transform_cloud, Frame, LidarSpec, PointCloud,
    PointLabel, RangeBox,
};
use crate::scene::{GridSpec, MountId, Scenario};
use crate::seeding;

/// Model file format version accepted by [`load_model`].
pub const MODEL_VERSION: u32 = 1;

/// Count scale of the saturating confidence curve: roughly the labeled
/// point count at which a detection is trusted at 1 - 1/e.
pub const CONFIDENCE_N0: f64 = 20.0;

/// Ability values are clamped this far inside (0, 1) so saturated logits
/// still satisfy the open-interval contract.
const SIGMOID_CLAMP: f64 = 1e-12;

pub const FEATURE_COUNT: usize = 4;

/// Saturating confidence for a labeled point count.
pub fn confidence_from_count(n: usize, n0: f64) -> f64 {
    1.0 - (-(n as f64) / n0).exp()
}

fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
}

/// Sign with an exact zero at ties; `f64::signum` maps +0 to 1, which
/// would put spurious gradient on cells sitting exactly on a kink.
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub grid: GridSpec,
    /// Row-major `[f1, f2, f3, f4]` per cell.
    pub cells: Vec<[f64; FEATURE_COUNT]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbilityMap {
    pub grid: GridSpec,
    /// Row-major values, each strictly inside (0, 1).
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    pub grid: GridSpec,
    /// Row-major values in [0, 1].
    pub values: Vec<f64>,
}

/// Binary supervision mask; only masked cells contribute to the
/// supervised loss.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionMask {
    pub grid: GridSpec,
    pub cells: Vec<bool>,
}

impl SupervisionMask {
    pub fn masked_count(&self) -> usize {
        self.cells.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: u32,
    pub lr: f64,
}

/// The logistic read-out: four weights and a bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorModel {
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
    pub train_meta: TrainMeta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Smoothness weight.
    pub gamma: f64,
    /// Mask threshold on the confidence map, strict.
    pub threshold: f64,
    pub lr: f64,
    pub epochs: u32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.1,
            threshold: 0.2,
            lr: 0.1,
            epochs: 150,
            seed: 0,
        }
    }
}

/// How a placement's clouds combine into one ability map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerMode {
    /// Fuse clouds first, predict once on the fused features.
    Fused,
    /// Predict per mount, then combine cellwise as a noisy-or. Monotone
    /// and submodular in the placement by construction.
    NoisyOr,
}

impl ScorerMode {
    pub fn name(&self) -> &'static str {
        match self {
            ScorerMode::Fused => "fused",
            ScorerMode::NoisyOr => "noisyor",
        }
    }

    pub fn parse(s: &str) -> Result<ScorerMode> {
        match s {
            "fused" => Ok(ScorerMode::Fused),
            "noisyor" => Ok(ScorerMode::NoisyOr),
            other => Err(Error::Param(format!(
                "unknown scorer mode '{other}' (expected fused or noisyor)"
            ))),
        }
    }
}

/// Bins a vehicle-free cloud into per-cell features on `grid`. The cloud
/// must be expressed in the frame the grid is anchored in (the scene frame
/// in the standard pipeline); points outside the grid are ignored.
///
/// Vehicle-labeled points violate the contract: strip them first.
pub fn extract_features(cloud: &PointCloud, grid: &GridSpec) -> Result<FeatureGrid> {
    let n = grid.cells();
    let mut count = vec![0usize; n];
    let mut z_sum = vec![0.0f64; n];
    let mut z_min = vec![f64::INFINITY; n];
    let mut z_max = vec![f64::NEG_INFINITY; n];
    for p in &cloud.points {
        if let PointLabel::Vehicle(id) = p.label {
            return Err(Error::Contract(format!(
                "feature extraction requires a vehicle-free cloud (found vehicle {id})"
            )));
        }
        if let Some((i, j)) = grid.world_to_cell(p.pos.x, p.pos.y) {
            let at = grid.index(i, j);
            count[at] += 1;
            z_sum[at] += p.pos.z;
            z_min[at] = z_min[at].min(p.pos.z);
            z_max[at] = z_max[at].max(p.pos.z);
        }
    }

    let mut cells = vec![[0.0; FEATURE_COUNT]; n];
    for i in 0..grid.height {
        for j in 0..grid.width {
            let at = grid.index(i, j);
            if count[at] == 0 {
                continue;
            }
            let mut ring_total = 0usize;
            let mut ring_occupied = 0usize;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ni = i as i64 + di;
                    let nj = j as i64 + dj;
                    if ni < 0 || nj < 0 || ni >= grid.height as i64 || nj >= grid.width as i64 {
                        continue;
                    }
                    ring_total += 1;
                    if count[grid.index(ni as usize, nj as usize)] > 0 {
                        ring_occupied += 1;
                    }
                }
            }
            cells[at] = [
                (1.0 + count[at] as f64).ln(),
                z_sum[at] / count[at] as f64,
                z_max[at] - z_min[at],
                ring_occupied as f64 / ring_total as f64,
            ];
        }
    }
    Ok(FeatureGrid {
        grid: *grid,
        cells,
    })
}

/// Applies the logistic read-out to every cell.
pub fn predict_ability(model: &PredictorModel, feats: &FeatureGrid) -> AbilityMap {
    let values = feats
        .cells
        .iter()
        .map(|f| {
            let z = model.bias
                + model.weights[0] * f[0]
                + model.weights[1] * f[1]
                + model.weights[2] * f[2]
                + model.weights[3] * f[3];
            sigmoid(z)
        })
        .collect();
    AbilityMap {
        grid: feats.grid,
        values,
    }
}

/// Builds the surrogate detection confidence map for a placement at one
/// traffic frame: each vehicle's saturating confidence, written into every
/// cell its BEV footprint overlaps (cellwise max where footprints overlap).
pub fn surrogate_confidence(
    scenario: &Scenario,
    frame_index: usize,
    placement: &[MountId],
    spec: &LidarSpec,
    grid: &GridSpec,
) -> Result<ConfidenceMap> {
    let fused = lidar::fuse_placement(scenario, frame_index, placement, spec, &RangeBox::default())?;
    let frame = scenario.frame(frame_index)?;
    let mut values = vec![0.0f64; grid.cells()];
    for v in &frame.vehicles {
        let n = fused.vehicle_point_count(v.id);
        if n == 0 {
            continue;
        }
        let c = confidence_from_count(n, CONFIDENCE_N0);
        for at in footprint_cells(grid, &v.bbox) {
            values[at] = values[at].max(c);
        }
    }
    Ok(ConfidenceMap {
        grid: *grid,
        values,
    })
}

/// Row-major indices of the cells a BEV footprint overlaps.
fn footprint_cells(grid: &GridSpec, bbox: &crate::scene::OrientedBox) -> Vec<usize> {
    let corners = geom::bev_corners(bbox);
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for [x, y] in corners {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let j0 = (((x0 - grid.origin_x) / grid.cell_size).floor().max(0.0)) as usize;
    let i0 = (((y0 - grid.origin_y) / grid.cell_size).floor().max(0.0)) as usize;
    let j1 = (((x1 - grid.origin_x) / grid.cell_size).floor()).min(grid.width as f64 - 1.0);
    let i1 = (((y1 - grid.origin_y) / grid.cell_size).floor()).min(grid.height as f64 - 1.0);
    if j1 < 0.0 || i1 < 0.0 {
        return Vec::new();
    }
    let (j1, i1) = (j1 as usize, i1 as usize);
    let mut out = Vec::new();
    for i in i0..=i1.min(grid.height - 1) {
        for j in j0..=j1.min(grid.width - 1) {
            let (xb, yb) = grid.cell_bounds(i, j);
            if geom::bev_overlaps_cell(bbox, xb, yb) {
                out.push(grid.index(i, j));
            }
        }
    }
    out
}

/// Cells with confidence strictly above `threshold` become supervision.
pub fn build_mask(confidence: &ConfidenceMap, threshold: f64) -> SupervisionMask {
    debug_assert!(threshold > 0.0 && threshold < 1.0);
    SupervisionMask {
        grid: confidence.grid,
        cells: confidence.values.iter().map(|&c| c > threshold).collect(),
    }
}

/// Masked mean absolute error between confidence and ability. Zero when
/// the mask is empty.
pub fn loss_sup(
    ability: &AbilityMap,
    confidence: &ConfidenceMap,
    mask: &SupervisionMask,
) -> Result<f64> {
    if ability.grid != confidence.grid || ability.grid != mask.grid {
        return Err(Error::Shape("loss_sup: grids disagree".into()));
    }
    let mut acc = 0.0;
    let mut n = 0usize;
    for ((&a, &c), &m) in ability
        .values
        .iter()
        .zip(confidence.values.iter())
        .zip(mask.cells.iter())
    {
        if m {
            acc += (c - a).abs();
            n += 1;
        }
    }
    Ok(acc / (n.max(1) as f64))
}

/// Four-neighbor smoothness: the mean over cells of the summed absolute
/// differences to in-bounds neighbors (each unordered pair is counted from
/// both sides). Grids need at least 2 cells per axis.
pub fn loss_smooth(ability: &AbilityMap) -> Result<f64> {
    let g = &ability.grid;
    if g.height < 2 || g.width < 2 {
        return Err(Error::Shape(format!(
            "loss_smooth: grid {}x{} is smaller than 2x2",
            g.height, g.width
        )));
    }
    let mut acc = 0.0;
    for i in 0..g.height {
        for j in 0..g.width {
            let a = ability.values[g.index(i, j)];
            if i + 1 < g.height {
                acc += (a - ability.values[g.index(i + 1, j)]).abs();
            }
            if i > 0 {
                acc += (a - ability.values[g.index(i - 1, j)]).abs();
            }
            if j + 1 < g.width {
                acc += (a - ability.values[g.index(i, j + 1)]).abs();
            }
            if j > 0 {
                acc += (a - ability.values[g.index(i, j - 1)]).abs();
            }
        }
    }
    Ok(acc / (g.height * g.width) as f64)
}

/// Mean training loss over prepared samples at parameters `(weights, bias)`.
pub fn training_loss(
    features: &[FeatureGrid],
    confidences: &[ConfidenceMap],
    masks: &[SupervisionMask],
    weights: &[f64; FEATURE_COUNT],
    bias: f64,
    gamma: f64,
) -> Result<f64> {
    let model = PredictorModel {
        weights: *weights,
        bias,
        train_meta: TrainMeta {
            seed: 0,
            epochs: 0,
            lr: 0.0,
        },
    };
    let mut total = 0.0;
    for ((f, c), k) in features.iter().zip(confidences).zip(masks) {
        let a = predict_ability(&model, f);
        total += loss_sup(&a, c, k)? + gamma * loss_smooth(&a)?;
    }
    Ok(total / features.len().max(1) as f64)
}

/// Analytic gradient of [`training_loss`] in `(weights..., bias)` order.
pub fn training_gradient(
    features: &[FeatureGrid],
    confidences: &[ConfidenceMap],
    masks: &[SupervisionMask],
    weights: &[f64; FEATURE_COUNT],
    bias: f64,
    gamma: f64,
) -> Result<[f64; FEATURE_COUNT + 1]> {
    let model = PredictorModel {
        weights: *weights,
        bias,
        train_meta: TrainMeta {
            seed: 0,
            epochs: 0,
            lr: 0.0,
        },
    };
    let mut grad = [0.0; FEATURE_COUNT + 1];
    for ((f, c), k) in features.iter().zip(confidences).zip(masks) {
        if f.grid != c.grid || f.grid != k.grid {
            return Err(Error::Shape("training_gradient: grids disagree".into()));
        }
        let g = &f.grid;
        let a = predict_ability(&model, f);
        let masked = k.masked_count().max(1) as f64;
        let hw = (g.height * g.width) as f64;
        for i in 0..g.height {
            for j in 0..g.width {
                let at = g.index(i, j);
                let av = a.values[at];
                // dL/dA at this cell: supervised term ...
                let mut da = if k.cells[at] {
                    -sgn(c.values[at] - av) / masked
                } else {
                    0.0
                };
                // ... plus the smoothness term; each neighbor pair appears
                // in the loss from both sides, hence the factor 2.
                let mut diffs = 0.0;
                if i + 1 < g.height {
                    diffs += sgn(av - a.values[g.index(i + 1, j)]);
                }
                if i > 0 {
                    diffs += sgn(av - a.values[g.index(i - 1, j)]);
                }
                if j + 1 < g.width {
                    diffs += sgn(av - a.values[g.index(i, j + 1)]);
                }
                if j > 0 {
                    diffs += sgn(av - a.values[g.index(i, j - 1)]);
                }
                da += gamma * 2.0 * diffs / hw;
                if da == 0.0 {
                    continue;
                }
                let dz = da * av * (1.0 - av);
                for w in 0..FEATURE_COUNT {
                    grad[w] += dz * f.cells[at][w];
                }
                grad[FEATURE_COUNT] += dz;
            }
        }
    }
    let n = features.len().max(1) as f64;
    for g in &mut grad {
        *g /= n;
    }
    Ok(grad)
}

/// Trained model plus the recorded loss sequence: `losses[e]` is the loss
/// before the e-th step, with the post-training loss appended last.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: PredictorModel,
    pub losses: Vec<f64>,
}

/// Fits the predictor by full-batch gradient descent from zero-initialized
/// parameters. Deterministic given the sample order and config.
///
/// Each sample pairs a vehicle-free cloud (scene frame) with the surrogate
/// confidence of the same placement and traffic frame; the mask is derived
/// here with `cfg.threshold`.
pub fn train_predictor(
    samples: &[(PointCloud, ConfidenceMap)],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(Error::Param("training needs at least one sample".into()));
    }
    if !(cfg.gamma.is_finite() && cfg.gamma >= 0.0) {
        return Err(Error::Param("gamma must be >= 0".into()));
    }
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(Error::Param("threshold must lie in (0, 1)".into()));
    }
    if !(cfg.lr.is_finite() && cfg.lr > 0.0) {
        return Err(Error::Param("learning rate must be positive".into()));
    }
    if cfg.epochs == 0 {
        return Err(Error::Param("epochs must be >= 1".into()));
    }

    let mut features = Vec::with_capacity(samples.len());
    let mut confidences = Vec::with_capacity(samples.len());
    let mut masks = Vec::with_capacity(samples.len());
    for (cloud, conf) in samples {
        features.push(extract_features(cloud, &conf.grid)?);
        masks.push(build_mask(conf, cfg.threshold));
        confidences.push(conf.clone());
    }

    let mut weights = [0.0; FEATURE_COUNT];
    let mut bias = 0.0;
    let mut losses = Vec::with_capacity(cfg.epochs as usize + 1);
    for _ in 0..cfg.epochs {
        let loss = training_loss(&features, &confidences, &masks, &weights, bias, cfg.gamma)?;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("non-finite loss {loss}")));
        }
        losses.push(loss);
        let grad = training_gradient(&features, &confidences, &masks, &weights, bias, cfg.gamma)?;
        for w in 0..FEATURE_COUNT {
            weights[w] -= cfg.lr * grad[w];
        }
        bias -= cfg.lr * grad[FEATURE_COUNT];
    }
    let final_loss = training_loss(&features, &confidences, &masks, &weights, bias, cfg.gamma)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence(format!("non-finite loss {final_loss}")));
    }
    losses.push(final_loss);

    Ok(TrainOutcome {
        model: PredictorModel {
            weights,
            bias,
            train_meta: TrainMeta {
                seed: cfg.seed,
                epochs: cfg.epochs,
                lr: cfg.lr,
            },
        },
        losses,
    })
}

/// Draws a training set from a scenario: each sample pairs the vehicle-free
/// scene-frame cloud of a random placement with that placement's surrogate
/// confidence map.
///
/// Sample `k` walks traffic frame `k mod F` and draws its placement from an
/// independent sub-stream of `seed`: size uniform in `1..=N`, members a
/// uniform subset of the mounts. The ego of each fused cloud is the
/// placement's first (randomly ordered) mount. Pure in all arguments.
pub fn sample_training_set(
    scenario: &Scenario,
    spec: &LidarSpec,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<(PointCloud, ConfidenceMap)>> {
    use rand::Rng;
    use rand::SeedableRng;
    use rayon::prelude::*;

    if n_samples == 0 {
        return Err(Error::Param("need at least one training sample".into()));
    }
    let mut ids = scenario.mount_ids();
    ids.sort_unstable();
    (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seeding::mix(&[
                seed, k as u64, 0x7541,
            ]));
            let size = rng.gen_range(1..=ids.len());
            let mut pool = ids.clone();
            for i in 0..size {
                let j = rng.gen_range(i..pool.len());
                pool.swap(i, j);
            }
            let placement = &pool[..size];
            let frame = k % scenario.frames.len();
            let fused =
                lidar::fuse_placement(scenario, frame, placement, spec, &RangeBox::default())?;
            let ego = Frame::ego(scenario.mount(placement[0])?);
            let cloud =
                transform_cloud(&strip_vehicle_points(&fused), &ego, &Frame::scene())?;
            let conf = surrogate_confidence(scenario, frame, placement, spec, &scenario.grid)?;
            Ok((cloud, conf))
        })
        .collect()
}

/// Total perception score: the sum of the ability map.
pub fn perception_score(ability: &AbilityMap) -> f64 {
    ability.values.iter().sum()
}

/// Ability map of a single mount at one traffic frame, on the scenario
/// grid in the scene frame.
pub fn mount_ability(
    scenario: &Scenario,
    frame_index: usize,
    mount: MountId,
    model: &PredictorModel,
    spec: &LidarSpec,
) -> Result<AbilityMap> {
    let m = scenario.mount(mount)?;
    let cloud = cast_cropped(scenario, frame_index, m, spec, &RangeBox::default())?;
    let in_scene = transform_cloud(&cloud, &Frame::mount(m), &Frame::scene())?;
    let feats = extract_features(&strip_vehicle_points(&in_scene), &scenario.grid)?;
    Ok(predict_ability(model, &feats))
}

/// Ability map of a placement at one traffic frame.
///
/// `Fused` follows the full projection pipeline: per-mount clouds are
/// re-expressed in the ego frame (first mount of the placement), fused,
/// stripped of vehicle returns, mapped to the scene frame, and predicted
/// once. `NoisyOr` predicts per mount and combines cellwise as
/// `1 - prod(1 - a_p)`. A single-mount placement yields the identical map
/// under both modes.
pub fn ability_for_placement(
    scenario: &Scenario,
    frame_index: usize,
    placement: &[MountId],
    model: &PredictorModel,
    mode: ScorerMode,
    spec: &LidarSpec,
) -> Result<AbilityMap> {
    match mode {
        ScorerMode::Fused => {
            let fused = lidar::fuse_placement(
                scenario,
                frame_index,
                placement,
                spec,
                &RangeBox::default(),
            )?;
            let stripped = strip_vehicle_points(&fused);
            let ego = Frame::ego(scenario.mount(placement[0])?);
            let in_scene = transform_cloud(&stripped, &ego, &Frame::scene())?;
            let feats = extract_features(&in_scene, &scenario.grid)?;
            Ok(predict_ability(model, &feats))
        }
        ScorerMode::NoisyOr => {
            lidar::validate_placement(scenario, placement)?;
            // One mount is returned as-is; routing it through 1 - (1 - a)
            // would cost a rounding step and break exact mode agreement.
            if placement.len() == 1 {
                return mount_ability(scenario, frame_index, placement[0], model, spec);
            }
            let mut acc: Option<Vec<f64>> = None;
            for &p in placement {
                let a = mount_ability(scenario, frame_index, p, model, spec)?;
                match acc.as_mut() {
                    None => acc = Some(a.values.iter().map(|v| 1.0 - v).collect()),
                    Some(misses) => {
                        for (m, v) in misses.iter_mut().zip(a.values.iter()) {
                            *m *= 1.0 - v;
                        }
                    }
                }
            }
            Ok(AbilityMap {
                grid: scenario.grid,
                values: acc.unwrap().into_iter().map(|m| 1.0 - m).collect(),
            })
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    weights: Vec<f64>,
    bias: f64,
    train_meta: TrainMeta,
}

/// Writes the model as canonical JSON with a version tag.
pub fn save_model(model: &PredictorModel, path: &Path) -> Result<()> {
    jsonio::write_canonical(
        &ModelFile {
            version: MODEL_VERSION,
            weights: model.weights.to_vec(),
            bias: model.bias,
            train_meta: model.train_meta,
        },
        path,
    )
}

pub fn load_model(path: &Path) -> Result<PredictorModel> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if file.version != MODEL_VERSION {
        return Err(Error::Version(format!(
            "{}: model version {}, expected {MODEL_VERSION}",
            path.display(),
            file.version
        )));
    }
    if file.weights.len() != FEATURE_COUNT {
        return Err(Error::Validation(format!(
            "{}: expected {FEATURE_COUNT} weights, found {}",
            path.display(),
            file.weights.len()
        )));
    }
    if !(file.weights.iter().all(|w| w.is_finite()) && file.bias.is_finite()) {
        return Err(Error::Validation(format!(
            "{}: non-finite parameters",
            path.display()
        )));
    }
    let mut weights = [0.0; FEATURE_COUNT];
    weights.copy_from_slice(&file.weights);
    Ok(PredictorModel {
        weights,
        bias: file.bias,
        train_meta: file.train_meta,
    })
}

/// Writes a grid as CSV, one row of cells per line, row-major.
pub fn write_grid_csv(grid: &GridSpec, values: &[f64], path: &Path) -> Result<()> {
    if values.len() != grid.cells() {
        return Err(Error::Shape("grid CSV: value count mismatch".into()));
    }
    let mut s = String::new();
    for i in 0..grid.height {
        for j in 0..grid.width {
            if j > 0 {
                s.push(',');
            }
            s.push_str(&values[grid.index(i, j)].to_string());
        }
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Writes a grid as binary 8-bit PGM; each byte is `round(255 * value)`,
/// clamped to [0, 255].
pub fn write_grid_pgm(grid: &GridSpec, values: &[f64], path: &Path) -> Result<()> {
    if values.len() != grid.cells() {
        return Err(Error::Shape("grid PGM: value count mismatch".into()));
    }
    let mut bytes = format!("P5\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    for i in 0..grid.height {
        for j in 0..grid.width {
            let v = (values[grid.index(i, j)] * 255.0).round().clamp(0.0, 255.0);
            bytes.push(v as u8);
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

impl AbilityMap {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_grid_csv(&self.grid, &self.values, path)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_grid_pgm(&self.grid, &self.values, path)
    }
}

impl ConfidenceMap {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_grid_csv(&self.grid, &self.values, path)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_grid_pgm(&self.grid, &self.values, path)
    }
}

impl SupervisionMask {
    fn as_f64(&self) -> Vec<f64> {
        self.cells.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_grid_csv(&self.grid, &self.as_f64(), path)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_grid_pgm(&self.grid, &self.as_f64(), path)
    }
}
