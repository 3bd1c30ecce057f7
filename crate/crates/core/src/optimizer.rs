//! Placement search over a finite candidate set.
//!
//! Selection algorithms are registered behind the [`SelectionStrategy`]
//! trait and chosen by name at runtime (`greedy`, `brute`, `random`,
//! `covdens`). They share the [`Scorer`] contract: a deterministic score
//! for any non-empty placement, with the empty placement scoring 0 by
//! convention.
//!
//! The greedy method adds, at each step, the candidate with the largest
//! perceptual gain (score after minus score before), breaking ties toward
//! the smallest mount id. Brute force enumerates every M-subset under a
//! hard evaluation budget and serves as the upper bound. Random and
//! coverage/density selections are the baselines placements are compared
//! against.
//!
//! [`submodularity_audit`] measures how close a scorer is to diminishing
//! returns: a prerequisite for greedy's (1 - 1/e) guarantee, exact for the
//! noisy-or scorer and only empirical for the fused one.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lidar::{
    self, cast_cropped, fuse_clouds, strip_vehicle_points, transform_cloud, Frame, LidarSpec,
    PointCloud, PointLabel, RangeBox,
};
use crate::perception::{
    extract_features, mount_ability, perception_score, predict_ability, PredictorModel,
    ScorerMode,
};
use crate::scene::{MountId, Scenario};

/// Hard cap on brute-force evaluations.
pub const DEFAULT_BRUTE_BUDGET: u64 = 1_000_000;

/// How many evenly spaced traffic frames a scorer averages by default.
pub const DEFAULT_SCORE_FRAME_COUNT: usize = 5;

/// Deterministic placement evaluation, safe for concurrent use.
pub trait Scorer: Sync {
    /// Score of a non-empty placement; larger is better. The same
    /// placement must always produce the same value.
    fn score(&self, placement: &[MountId]) -> Result<f64>;
}

/// Evenly spaced frame indices (first and last included) used when the
/// caller does not pin a frame subset.
pub fn default_score_frames(total_frames: usize) -> Vec<usize> {
    let want = DEFAULT_SCORE_FRAME_COUNT.min(total_frames).max(1);
    if want == 1 {
        return vec![0];
    }
    let mut out: Vec<usize> = (0..want)
        .map(|k| (k as f64 * (total_frames - 1) as f64 / (want - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

/// Scores a placement as the mean perception score over a fixed frame
/// subset. Per-mount work (ray casts for `Fused`, whole ability maps for
/// `NoisyOr`) is precomputed once, so repeated scoring during search stays
/// cheap. Scores are bit-identical to composing
/// [`crate::perception::ability_for_placement`] with
/// [`perception_score`] frame by frame.
pub struct PerceptionScorer<'a> {
    scenario: &'a Scenario,
    model: &'a PredictorModel,
    mode: ScorerMode,
    frames: Vec<usize>,
    /// Mount position in `scenario.mounts` by mount id.
    pos_of: Vec<usize>,
    /// NoisyOr: `ability[frame][mount position]` is the mount's cellwise ability.
    ability: Vec<Vec<Vec<f64>>>,
    /// Fused: cropped clouds in each mount's own frame.
    clouds: Vec<Vec<PointCloud>>,
}

impl<'a> PerceptionScorer<'a> {
    pub fn new(
        scenario: &'a Scenario,
        model: &'a PredictorModel,
        mode: ScorerMode,
        spec: &LidarSpec,
        frames: Option<&[usize]>,
    ) -> Result<Self> {
        let frames = match frames {
            Some(f) => {
                if f.is_empty() {
                    return Err(Error::Param("scorer needs at least one frame".into()));
                }
                for &i in f {
                    scenario.frame(i)?;
                }
                let mut sorted = f.to_vec();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != f.len() {
                    return Err(Error::Param("scorer frame list repeats an index".into()));
                }
                f.to_vec()
            }
            None => default_score_frames(scenario.frames.len()),
        };

        let n = scenario.mounts.len();
        let mut pos_of = vec![0usize; n];
        for (pos, m) in scenario.mounts.iter().enumerate() {
            pos_of[m.id as usize] = pos;
        }

        let pairs: Vec<(usize, usize)> = frames
            .iter()
            .flat_map(|&f| (0..n).map(move |pos| (f, pos)))
            .collect();
        let (ability, clouds) = match mode {
            ScorerMode::NoisyOr => {
                let flat: Vec<Vec<f64>> = pairs
                    .par_iter()
                    .map(|&(f, pos)| {
                        let a =
                            mount_ability(scenario, f, scenario.mounts[pos].id, model, spec)?;
                        Ok(a.values)
                    })
                    .collect::<Result<_>>()?;
                let per_frame = flat.chunks(n).map(|c| c.to_vec()).collect();
                (per_frame, Vec::new())
            }
            ScorerMode::Fused => {
                let flat: Vec<PointCloud> = pairs
                    .par_iter()
                    .map(|&(f, pos)| {
                        cast_cropped(
                            scenario,
                            f,
                            &scenario.mounts[pos],
                            spec,
                            &RangeBox::default(),
                        )
                    })
                    .collect::<Result<_>>()?;
                let per_frame = flat.chunks(n).map(|c| c.to_vec()).collect();
                (Vec::new(), per_frame)
            }
        };

        Ok(PerceptionScorer {
            scenario,
            model,
            mode,
            frames,
            pos_of,
            ability,
            clouds,
        })
    }

    pub fn frames(&self) -> &[usize] {
        &self.frames
    }

    pub fn mode(&self) -> ScorerMode {
        self.mode
    }
}

impl Scorer for PerceptionScorer<'_> {
    fn score(&self, placement: &[MountId]) -> Result<f64> {
        lidar::validate_placement(self.scenario, placement)?;
        let mut total = 0.0;
        for (fi, _) in self.frames.iter().enumerate() {
            total += match self.mode {
                ScorerMode::NoisyOr => {
                    let maps = &self.ability[fi];
                    let cells = self.scenario.grid.cells();
                    let mut sum = 0.0;
                    if placement.len() == 1 {
                        // Single mount reads the ability map directly, the same
                        // shortcut the map builder takes, so both stay bit-equal.
                        let a = &maps[self.pos_of[placement[0] as usize]];
                        for at in 0..cells {
                            sum += a[at];
                        }
                    } else {
                        for at in 0..cells {
                            let mut miss = 1.0;
                            for &p in placement {
                                miss *= 1.0 - maps[self.pos_of[p as usize]][at];
                            }
                            sum += 1.0 - miss;
                        }
                    }
                    sum
                }
                ScorerMode::Fused => {
                    let ego = Frame::ego(self.scenario.mount(placement[0])?);
                    let mut in_ego = Vec::with_capacity(placement.len());
                    for &p in placement {
                        let m = self.scenario.mount(p)?;
                        let cloud = &self.clouds[fi][self.pos_of[p as usize]];
                        in_ego.push(transform_cloud(cloud, &Frame::mount(m), &ego)?);
                    }
                    let fused = fuse_clouds(&in_ego)?;
                    let stripped = strip_vehicle_points(&fused);
                    let in_scene = transform_cloud(&stripped, &ego, &Frame::scene())?;
                    let feats = extract_features(&in_scene, &self.scenario.grid)?;
                    perception_score(&predict_ability(self.model, &feats))
                }
            };
        }
        Ok(total / self.frames.len() as f64)
    }
}

/// Wraps a scorer and counts its calls; test and audit instrumentation.
pub struct CountingScorer<'a> {
    inner: &'a dyn Scorer,
    calls: AtomicU64,
}

impl<'a> CountingScorer<'a> {
    pub fn new(inner: &'a dyn Scorer) -> Self {
        CountingScorer {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Scorer for CountingScorer<'_> {
    fn score(&self, placement: &[MountId]) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.score(placement)
    }
}

/// One greedy step: the score before the pick, after it, and their exact
/// difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainStep {
    pub chosen: MountId,
    pub before: f64,
    pub after: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GainTrace {
    pub steps: Vec<GainStep>,
}

impl GainTrace {
    /// CSV with one row per selection step.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("step,chosen_id,k_before,k_after,gain\n");
        for (i, st) in self.steps.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                i, st.chosen, st.before, st.after, st.gain
            ));
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// What a selection strategy hands back: the placement in selection order,
/// its score, how many scorer calls it spent, and (for greedy) the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub placement: Vec<MountId>,
    pub score: f64,
    pub evaluations: u64,
    pub trace: GainTrace,
}

fn validate_candidates(candidates: &[MountId], m: usize) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::Param("candidate set must not be empty".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for &c in candidates {
        if !seen.insert(c) {
            return Err(Error::Param(format!("candidate {c} listed twice")));
        }
    }
    if m < 1 || m > candidates.len() {
        return Err(Error::Param(format!(
            "m = {m} outside 1..={}",
            candidates.len()
        )));
    }
    Ok(())
}

/// Score increase from adding `p` to `base`; the empty base scores 0.
pub fn perceptual_gain(scorer: &dyn Scorer, base: &[MountId], p: MountId) -> Result<f64> {
    if base.contains(&p) {
        return Err(Error::Param(format!("mount {p} is already selected")));
    }
    let mut with = base.to_vec();
    with.push(p);
    let after = scorer.score(&with)?;
    let before = if base.is_empty() {
        0.0
    } else {
        scorer.score(base)?
    };
    Ok(after - before)
}

/// Greedy max-gain selection. Each of the `m` iterations scores every
/// remaining candidate joined to the current set, keeps the best (ties to
/// the smallest id), then re-scores the grown set once for the trace; the
/// total is sum(N - i) + m scorer calls.
pub fn greedy_select(
    scorer: &dyn Scorer,
    candidates: &[MountId],
    m: usize,
) -> Result<SelectionOutcome> {
    validate_candidates(candidates, m)?;
    let mut remaining = candidates.to_vec();
    remaining.sort_unstable();
    let mut selected: Vec<MountId> = Vec::with_capacity(m);
    let mut steps = Vec::with_capacity(m);
    let mut evaluations = 0u64;
    let mut before = 0.0;
    for _ in 0..m {
        let mut best: Option<(usize, f64)> = None;
        for (idx, &c) in remaining.iter().enumerate() {
            selected.push(c);
            let after = scorer.score(&selected)?;
            selected.pop();
            evaluations += 1;
            if best.map_or(true, |(_, b)| after > b) {
                best = Some((idx, after));
            }
        }
        let (idx, _) = best.expect("at least one candidate remains");
        let chosen = remaining.remove(idx);
        selected.push(chosen);
        let after = scorer.score(&selected)?;
        evaluations += 1;
        steps.push(GainStep {
            chosen,
            before,
            after,
            gain: after - before,
        });
        before = after;
    }
    Ok(SelectionOutcome {
        placement: selected,
        score: before,
        evaluations,
        trace: GainTrace { steps },
    })
}

/// C(n, k), saturating at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Scores every M-subset in lexicographic order over ascending ids and
/// returns the best (ties to the lexicographically smallest subset).
/// Refuses instances whose C(N, M) exceeds `budget` before doing any work.
pub fn brute_force_select(
    scorer: &dyn Scorer,
    candidates: &[MountId],
    m: usize,
    budget: u64,
) -> Result<SelectionOutcome> {
    validate_candidates(candidates, m)?;
    let mut ids = candidates.to_vec();
    ids.sort_unstable();
    let n = ids.len();
    let total = binomial(n as u64, m as u64);
    if total > budget {
        return Err(Error::Budget(format!(
            "C({n}, {m}) = {total} exceeds the budget of {budget} evaluations"
        )));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    let mut best: Option<(Vec<MountId>, f64)> = None;
    let mut evaluations = 0u64;
    loop {
        let subset: Vec<MountId> = idx.iter().map(|&i| ids[i]).collect();
        let score = scorer.score(&subset)?;
        evaluations += 1;
        if best.as_ref().map_or(true, |(_, b)| score > *b) {
            best = Some((subset, score));
        }
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    let (placement, score) = best.expect("at least one subset was scored");
    Ok(SelectionOutcome {
        placement,
        score,
        evaluations,
        trace: GainTrace::default(),
    })
}

/// Advances index vector `idx` to the next M-combination of `0..n` in
/// lexicographic order; false once exhausted.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let m = idx.len();
    let mut k = m;
    while k > 0 {
        k -= 1;
        if idx[k] < n - m + k {
            idx[k] += 1;
            for j in k + 1..m {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Uniform M-subset of the candidates, drawn as the prefix of a seeded
/// partial shuffle. The same seed always yields the same placement.
pub fn random_select(candidates: &[MountId], m: usize, seed: u64) -> Result<Vec<MountId>> {
    validate_candidates(candidates, m)?;
    let mut pool = candidates.to_vec();
    pool.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..m {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(m);
    Ok(pool)
}

/// Per-candidate coverage statistics at one traffic frame: which grid
/// cells receive at least one static return, and how many static returns
/// arrive in total.
fn coverage_stats(
    scenario: &Scenario,
    frame_index: usize,
    ids: &[MountId],
    spec: &LidarSpec,
) -> Result<Vec<(Vec<bool>, u64)>> {
    ids.par_iter()
        .map(|&id| {
            let m = scenario.mount(id)?;
            let cloud = cast_cropped(scenario, frame_index, m, spec, &RangeBox::default())?;
            let in_scene = transform_cloud(&cloud, &Frame::mount(m), &Frame::scene())?;
            let grid = &scenario.grid;
            let mut covered = vec![false; grid.cells()];
            let mut points = 0u64;
            for p in &in_scene.points {
                if p.label != PointLabel::Static {
                    continue;
                }
                points += 1;
                if let Some((i, j)) = grid.world_to_cell(p.pos.x, p.pos.y) {
                    covered[grid.index(i, j)] = true;
                }
            }
            Ok((covered, points))
        })
        .collect()
}

/// Greedy over precomputed per-candidate stats: maximize newly covered
/// cells, break ties by total static return count, then by smallest id.
/// Returns positions into `stats`.
fn greedy_by_coverage(stats: &[(Vec<bool>, u64)], m: usize) -> Vec<usize> {
    let cells = stats.first().map_or(0, |(c, _)| c.len());
    let mut union = vec![false; cells];
    let mut density = 0u64;
    let mut remaining: Vec<usize> = (0..stats.len()).collect();
    let mut picked = Vec::with_capacity(m);
    for _ in 0..m {
        let mut best: Option<(usize, usize, u64)> = None;
        for (slot, &cand) in remaining.iter().enumerate() {
            let coverage = union
                .iter()
                .zip(stats[cand].0.iter())
                .filter(|(&u, &c)| u || c)
                .count();
            let dens = density + stats[cand].1;
            let better = match best {
                None => true,
                Some((_, bc, bd)) => coverage > bc || (coverage == bc && dens > bd),
            };
            if better {
                best = Some((slot, coverage, dens));
            }
        }
        let (slot, _, dens) = best.expect("m <= remaining.len()");
        let cand = remaining.remove(slot);
        for (u, &c) in union.iter_mut().zip(stats[cand].0.iter()) {
            *u = *u || c;
        }
        density = dens;
        picked.push(cand);
    }
    picked
}

/// Coverage-then-density baseline on the first traffic frame: greedily
/// maximize the number of grid cells receiving static returns from the
/// fused placement cloud; coverage ties fall back to the larger total
/// static return count, then to the smaller id.
pub fn coverage_density_select(
    scenario: &Scenario,
    candidates: &[MountId],
    m: usize,
    spec: &LidarSpec,
) -> Result<Vec<MountId>> {
    validate_candidates(candidates, m)?;
    let mut ids = candidates.to_vec();
    ids.sort_unstable();
    let stats = coverage_stats(scenario, 0, &ids, spec)?;
    Ok(greedy_by_coverage(&stats, m)
        .into_iter()
        .map(|pos| ids[pos])
        .collect())
}

/// Diminishing-returns audit of a scorer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Sampled (S ⊆ T, p ∉ T) triples, always equal to the requested count.
    pub checks: u64,
    /// Triples with gain(S, p) < gain(T, p) - 1e-9.
    pub violations: u64,
    /// Triples where either gain fell below -1e-9.
    pub monotonicity_violations: u64,
    /// Largest observed gain(T, p) - gain(S, p), floored at 0; values at
    /// rounding scale (below 1e-9) do not count as violations.
    pub max_violation: f64,
}

/// Samples random nested-set triples and counts submodularity and
/// monotonicity violations beyond a 1e-9 tolerance.
pub fn submodularity_audit(
    scorer: &dyn Scorer,
    candidates: &[MountId],
    n_samples: u64,
    seed: u64,
) -> Result<AuditReport> {
    validate_candidates(candidates, 1)?;
    if candidates.len() < 3 {
        return Err(Error::Param(
            "submodularity audit needs at least 3 candidates".into(),
        ));
    }
    let mut ids = candidates.to_vec();
    ids.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gain = |base: &[MountId], p: MountId| -> Result<f64> {
        let mut with = base.to_vec();
        with.push(p);
        let after = scorer.score(&with)?;
        let before = if base.is_empty() {
            0.0
        } else {
            scorer.score(base)?
        };
        Ok(after - before)
    };
    let mut report = AuditReport {
        checks: 0,
        violations: 0,
        monotonicity_violations: 0,
        max_violation: 0.0,
    };
    for _ in 0..n_samples {
        let mut pool = ids.clone();
        for i in 0..pool.len() {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        let p = pool[0];
        let t_size = rng.gen_range(0..pool.len());
        let t = &pool[1..1 + t_size];
        let s = &t[..rng.gen_range(0..=t_size)];
        let gs = gain(s, p)?;
        let gt = gain(t, p)?;
        report.checks += 1;
        if gs < gt - 1e-9 {
            report.violations += 1;
        }
        if gs < -1e-9 || gt < -1e-9 {
            report.monotonicity_violations += 1;
        }
        report.max_violation = report.max_violation.max(gt - gs);
    }
    Ok(report)
}

/// Everything a strategy may need; strategies ignore the parts they
/// don't use (`seed` only matters to `random`, `spec` to `covdens`).
pub struct SelectionContext<'a> {
    pub scenario: &'a Scenario,
    pub scorer: &'a dyn Scorer,
    pub candidates: &'a [MountId],
    pub m: usize,
    pub seed: u64,
    pub spec: &'a LidarSpec,
}

/// A placement algorithm selectable by name at runtime.
pub trait SelectionStrategy: Sync {
    fn name(&self) -> &'static str;
    fn select(&self, ctx: &SelectionContext) -> Result<SelectionOutcome>;
}

struct GreedyStrategy;

impl SelectionStrategy for GreedyStrategy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn select(&self, ctx: &SelectionContext) -> Result<SelectionOutcome> {
        greedy_select(ctx.scorer, ctx.candidates, ctx.m)
    }
}

struct BruteForceStrategy;

impl SelectionStrategy for BruteForceStrategy {
    fn name(&self) -> &'static str {
        "brute"
    }

    fn select(&self, ctx: &SelectionContext) -> Result<SelectionOutcome> {
        brute_force_select(ctx.scorer, ctx.candidates, ctx.m, DEFAULT_BRUTE_BUDGET)
    }
}

struct RandomStrategy;

impl SelectionStrategy for RandomStrategy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn select(&self, ctx: &SelectionContext) -> Result<SelectionOutcome> {
        let placement = random_select(ctx.candidates, ctx.m, ctx.seed)?;
        let score = ctx.scorer.score(&placement)?;
        Ok(SelectionOutcome {
            placement,
            score,
            evaluations: 1,
            trace: GainTrace::default(),
        })
    }
}

struct CoverageDensityStrategy;

impl SelectionStrategy for CoverageDensityStrategy {
    fn name(&self) -> &'static str {
        "covdens"
    }

    fn select(&self, ctx: &SelectionContext) -> Result<SelectionOutcome> {
        let placement = coverage_density_select(ctx.scenario, ctx.candidates, ctx.m, ctx.spec)?;
        let score = ctx.scorer.score(&placement)?;
        Ok(SelectionOutcome {
            placement,
            score,
            evaluations: 1,
            trace: GainTrace::default(),
        })
    }
}

static REGISTRY: [&dyn SelectionStrategy; 4] = [
    &GreedyStrategy,
    &BruteForceStrategy,
    &RandomStrategy,
    &CoverageDensityStrategy,
];

pub fn strategies() -> &'static [&'static dyn SelectionStrategy] {
    &REGISTRY
}

pub fn strategy_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|s| s.name()).collect()
}

pub fn strategy_by_name(name: &str) -> Result<&'static dyn SelectionStrategy> {
    REGISTRY
        .iter()
        .copied()
        .find(|s| s.name() == name)
        .ok_or_else(|| {
            Error::Param(format!(
                "unknown method '{name}' (expected one of {})",
                strategy_names().join(", ")
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{ability_for_placement, TrainMeta};
    use crate::scene::{
        generate_scene, CandidateMount, Extent, GridSpec, Pose, SceneParams, TrafficFrame, Vec3,
    };
    use std::collections::HashMap;

    /// Coverage-style toy scorer: each id contributes a fixed bitmask and
    /// the score is the size of the union. Monotone and submodular.
    struct MaskScorer {
        masks: Vec<u32>,
    }

    impl Scorer for MaskScorer {
        fn score(&self, placement: &[MountId]) -> Result<f64> {
            let mut acc = 0u32;
            for &p in placement {
                acc |= self.masks[p as usize];
            }
            Ok(acc.count_ones() as f64)
        }
    }

    /// Supermodular toy: score = |S|^2, so gains grow with set size and
    /// every nested sample with |S| < |T| violates diminishing returns.
    struct SquareScorer;

    impl Scorer for SquareScorer {
        fn score(&self, placement: &[MountId]) -> Result<f64> {
            Ok((placement.len() * placement.len()) as f64)
        }
    }

    fn test_model() -> PredictorModel {
        PredictorModel {
            weights: [0.4, 0.1, 0.2, 0.5],
            bias: -1.0,
            train_meta: TrainMeta {
                seed: 0,
                epochs: 0,
                lr: 0.0,
            },
        }
    }

    fn coarse_spec() -> LidarSpec {
        LidarSpec {
            channels: 16,
            azimuth_step_deg: 3.0,
            ..LidarSpec::default()
        }
    }

    #[test]
    fn greedy_on_masks_picks_hand_checked_order() {
        let scorer = MaskScorer {
            masks: vec![0b0000111, 0b0011100, 0b1100000],
        };
        let out = greedy_select(&scorer, &[0, 1, 2], 3).unwrap();
        // id 0 adds 3 cells; ids 1 and 2 then both add 2, so the smaller
        // id wins the tie.
        assert_eq!(out.placement, vec![0, 1, 2]);
        assert_eq!(out.score, 7.0);
        let gains: Vec<f64> = out.trace.steps.iter().map(|s| s.gain).collect();
        assert_eq!(gains, vec![3.0, 2.0, 2.0]);
        for s in &out.trace.steps {
            assert_eq!(s.gain, s.after - s.before);
        }
    }

    #[test]
    fn greedy_call_count_is_exact() {
        let scorer = MaskScorer {
            masks: (0..8).map(|i| 1 << i).collect(),
        };
        let counter = CountingScorer::new(&scorer);
        let out = greedy_select(&counter, &[0, 1, 2, 3, 4, 5, 6, 7], 3).unwrap();
        // (8 + 7 + 6) candidate evaluations plus 3 bookkeeping calls.
        assert_eq!(counter.calls(), 24);
        assert_eq!(out.evaluations, 24);
    }

    #[test]
    fn greedy_exhausts_and_rejects_bad_m() {
        let scorer = MaskScorer {
            masks: vec![0b1, 0b10, 0b100],
        };
        let out = greedy_select(&scorer, &[2, 0, 1], 3).unwrap();
        let mut sorted = out.placement.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
        assert!(matches!(
            greedy_select(&scorer, &[0, 1], 3),
            Err(Error::Param(_))
        ));
        assert!(matches!(
            greedy_select(&scorer, &[0, 1], 0),
            Err(Error::Param(_))
        ));
        assert!(matches!(
            greedy_select(&scorer, &[0, 0], 1),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn perceptual_gain_conventions() {
        let scorer = MaskScorer {
            masks: vec![0b11, 0b110],
        };
        // Empty base: gain is the singleton score.
        assert_eq!(perceptual_gain(&scorer, &[], 0).unwrap(), 2.0);
        // One new cell on top of {0}.
        assert_eq!(perceptual_gain(&scorer, &[0], 1).unwrap(), 1.0);
        assert!(matches!(
            perceptual_gain(&scorer, &[0], 0),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn binomial_matches_known_values() {
        assert_eq!(binomial(15, 2), 105);
        assert_eq!(binomial(30, 4), 27_405);
        assert_eq!(binomial(50, 6), 15_890_700);
        assert_eq!(binomial(6, 0), 1);
        assert_eq!(binomial(6, 6), 1);
        assert_eq!(binomial(5, 9), 0);
        // Saturates instead of overflowing.
        assert_eq!(binomial(200, 100), u64::MAX);
    }

    #[test]
    fn brute_force_counts_and_budget() {
        let scorer = MaskScorer {
            masks: (0..15).map(|i| 1 << i).collect(),
        };
        let ids: Vec<MountId> = (0..15).collect();
        let counter = CountingScorer::new(&scorer);
        let out = brute_force_select(&counter, &ids, 2, DEFAULT_BRUTE_BUDGET).unwrap();
        assert_eq!(counter.calls(), 105);
        assert_eq!(out.evaluations, 105);
        // All pairs tie at 2 covered cells; the lexicographically smallest
        // subset wins.
        assert_eq!(out.placement, vec![0, 1]);

        // M = N is a single evaluation.
        let counter = CountingScorer::new(&scorer);
        let out = brute_force_select(&counter, &ids, 15, DEFAULT_BRUTE_BUDGET).unwrap();
        assert_eq!(counter.calls(), 1);
        assert_eq!(out.placement, ids);

        // C(50, 6) = 15,890,700 blows the default budget.
        let ids: Vec<MountId> = (0..50).collect();
        let scorer = MaskScorer {
            masks: (0..50).map(|i| 1 << (i % 30)).collect(),
        };
        assert!(matches!(
            brute_force_select(&scorer, &ids, 6, DEFAULT_BRUTE_BUDGET),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn greedy_matches_brute_on_modular_scorer() {
        // With disjoint masks the score is modular, so greedy is optimal.
        let scorer = MaskScorer {
            masks: vec![0b1, 0b110, 0b111000, 0b1111000000, 0b10000000000],
        };
        let ids: Vec<MountId> = (0..5).collect();
        let g = greedy_select(&scorer, &ids, 3).unwrap();
        let b = brute_force_select(&scorer, &ids, 3, DEFAULT_BRUTE_BUDGET).unwrap();
        assert_eq!(g.score, b.score);
        // M = 1: identical choice for any scorer.
        let g1 = greedy_select(&scorer, &ids, 1).unwrap();
        let b1 = brute_force_select(&scorer, &ids, 1, DEFAULT_BRUTE_BUDGET).unwrap();
        assert_eq!(g1.placement, b1.placement);
        assert_eq!(g1.score, b1.score);
    }

    #[test]
    fn random_select_is_seeded_and_uniform() {
        let ids: Vec<MountId> = (0..5).collect();
        assert_eq!(
            random_select(&ids, 2, 99).unwrap(),
            random_select(&ids, 2, 99).unwrap()
        );
        let mut all = random_select(&ids, 5, 7).unwrap();
        all.sort_unstable();
        assert_eq!(all, ids);

        // Frequency over 10,000 seeds: each of the C(5,2) = 10 pairs
        // should appear about 1,000 times.
        let mut counts: HashMap<(MountId, MountId), u32> = HashMap::new();
        for seed in 0..10_000u64 {
            let mut p = random_select(&ids, 2, seed).unwrap();
            p.sort_unstable();
            *counts.entry((p[0], p[1])).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 10);
        for (&pair, &n) in &counts {
            let freq = n as f64 / 10_000.0;
            assert!(
                (freq - 0.1).abs() <= 0.01,
                "pair {pair:?} occurred with frequency {freq}"
            );
        }
    }

    #[test]
    fn coverage_greedy_prefers_new_cells_then_density() {
        // Candidate 0 covers 4 cells, 1 covers 4 different cells, 2
        // repeats candidate 0's cells with more points.
        let cells = |ids: &[usize]| {
            let mut v = vec![false; 10];
            for &i in ids {
                v[i] = true;
            }
            v
        };
        let stats = vec![
            (cells(&[0, 1, 2, 3]), 40),
            (cells(&[4, 5, 6, 7]), 30),
            (cells(&[0, 1, 2, 3]), 90),
        ];
        assert_eq!(greedy_by_coverage(&stats, 2), vec![2, 1]);

        // Equal coverage, unequal density: density breaks the tie.
        let stats = vec![(cells(&[0, 1]), 10), (cells(&[2, 3]), 25)];
        assert_eq!(greedy_by_coverage(&stats, 1), vec![1]);

        // Full tie falls to the smallest position.
        let stats = vec![(cells(&[0, 1]), 10), (cells(&[2, 3]), 10)];
        assert_eq!(greedy_by_coverage(&stats, 1), vec![0]);
    }

    #[test]
    fn coverage_density_picks_complementary_mounts() {
        // Mounts 0 and 2 stand together on the west side; mount 1 stands
        // east. The second pick must be the east mount, not the redundant
        // twin.
        let extent = Extent::square(80.0);
        let grid = GridSpec::cover(&extent, 2.0).unwrap();
        let mount = |id, x: f64, y: f64, yaw: f64| CandidateMount {
            id,
            pose: Pose::new(Vec3::new(x, y, 5.0), yaw),
        };
        let scenario = Scenario {
            seed: 0,
            extent,
            occluders: vec![],
            mounts: vec![
                mount(0, -70.0, 0.0, 0.0),
                mount(1, 70.0, 0.0, std::f64::consts::PI),
                mount(2, -70.0, 2.0, 0.0),
            ],
            frames: vec![TrafficFrame {
                index: 0,
                vehicles: vec![],
            }],
            grid,
        };
        scenario.validate().unwrap();
        let picked = coverage_density_select(&scenario, &[0, 1, 2], 2, &coarse_spec()).unwrap();
        let mut sorted = picked.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1]);

        // Direct recount: the picked pair covers strictly more cells than
        // the redundant pair {0, 2}.
        let stats = coverage_stats(&scenario, 0, &[0, 1, 2], &coarse_spec()).unwrap();
        let union_count = |a: &Vec<bool>, b: &Vec<bool>| {
            a.iter().zip(b.iter()).filter(|(&x, &y)| x || y).count()
        };
        assert!(union_count(&stats[0].0, &stats[1].0) > union_count(&stats[0].0, &stats[2].0));
    }

    #[test]
    fn audit_counts_checks_and_flags_supermodularity() {
        let scorer = MaskScorer {
            masks: vec![0b111, 0b11100, 0b1110000, 0b110011, 0b1010101],
        };
        let ids: Vec<MountId> = (0..5).collect();
        let report = submodularity_audit(&scorer, &ids, 300, 5).unwrap();
        assert_eq!(report.checks, 300);
        assert_eq!(report.violations, 0);
        assert_eq!(report.monotonicity_violations, 0);

        let report = submodularity_audit(&SquareScorer, &ids, 300, 5).unwrap();
        assert_eq!(report.checks, 300);
        assert!(report.violations > 0);
        assert!(report.max_violation > 0.0);

        assert!(matches!(
            submodularity_audit(&scorer, &[0, 1], 10, 0),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn noisy_or_scorer_is_exhaustively_submodular() {
        let params = SceneParams {
            n_mounts: 6,
            ..SceneParams::default()
        };
        let s = generate_scene(51, &params).unwrap();
        let model = test_model();
        let scorer =
            PerceptionScorer::new(&s, &model, ScorerMode::NoisyOr, &coarse_spec(), None).unwrap();
        // Score every non-empty subset of the 6 mounts once.
        let mut k = vec![0.0f64; 64];
        for mask in 1u32..64 {
            let subset: Vec<MountId> = (0..6).filter(|i| mask >> i & 1 == 1).collect();
            k[mask as usize] = scorer.score(&subset).unwrap();
        }
        // Monotone and submodular over every (S ⊆ T, p ∉ T) triple.
        for t in 0u32..64 {
            for p in 0..6u32 {
                if t >> p & 1 == 1 {
                    continue;
                }
                let pbit = 1 << p;
                let gain_t = k[(t | pbit) as usize] - k[t as usize];
                assert!(gain_t >= -1e-9, "negative gain at T={t:#b}, p={p}");
                let mut s = t;
                loop {
                    let gain_s = k[(s | pbit) as usize] - k[s as usize];
                    assert!(
                        gain_s >= gain_t - 1e-9,
                        "submodularity violated: S={s:#b} T={t:#b} p={p}"
                    );
                    if s == 0 {
                        break;
                    }
                    s = (s - 1) & t;
                }
            }
        }
    }

    #[test]
    fn noisy_or_greedy_trace_gains_never_increase() {
        let s = generate_scene(52, &SceneParams::default()).unwrap();
        let model = test_model();
        let scorer =
            PerceptionScorer::new(&s, &model, ScorerMode::NoisyOr, &coarse_spec(), None).unwrap();
        let ids = s.mount_ids();
        let out = greedy_select(&scorer, &ids, 4).unwrap();
        for w in out.trace.steps.windows(2) {
            assert!(
                w[1].gain <= w[0].gain,
                "gain rose from {} to {}",
                w[0].gain,
                w[1].gain
            );
        }
    }

    #[test]
    fn scorer_matches_ability_composition() {
        let s = generate_scene(53, &SceneParams::default()).unwrap();
        let model = test_model();
        let spec = coarse_spec();
        for mode in [ScorerMode::NoisyOr, ScorerMode::Fused] {
            let scorer = PerceptionScorer::new(&s, &model, mode, &spec, None).unwrap();
            let placement = vec![2u32, 5];
            let direct = scorer.score(&placement).unwrap();
            let mut total = 0.0;
            for &f in scorer.frames() {
                let a = ability_for_placement(&s, f, &placement, &model, mode, &spec).unwrap();
                total += perception_score(&a);
            }
            let composed = total / scorer.frames().len() as f64;
            assert_eq!(direct, composed, "mode {:?}", mode);
        }
    }

    #[test]
    fn scorer_frame_selection_and_validation() {
        assert_eq!(default_score_frames(1), vec![0]);
        assert_eq!(default_score_frames(3), vec![0, 1, 2]);
        assert_eq!(default_score_frames(5), vec![0, 1, 2, 3, 4]);
        assert_eq!(default_score_frames(10), vec![0, 2, 5, 7, 9]);

        let s = generate_scene(54, &SceneParams::default()).unwrap();
        let model = test_model();
        let bad = PerceptionScorer::new(
            &s,
            &model,
            ScorerMode::NoisyOr,
            &coarse_spec(),
            Some(&[0, 99]),
        );
        assert!(bad.is_err());
        let empty: &[usize] = &[];
        assert!(
            PerceptionScorer::new(&s, &model, ScorerMode::NoisyOr, &coarse_spec(), Some(empty))
                .is_err()
        );
    }

    #[test]
    fn greedy_reaches_brute_force_on_small_noisy_or_instance() {
        let params = SceneParams {
            n_mounts: 6,
            ..SceneParams::default()
        };
        let s = generate_scene(55, &params).unwrap();
        let model = test_model();
        let scorer =
            PerceptionScorer::new(&s, &model, ScorerMode::NoisyOr, &coarse_spec(), None).unwrap();
        let ids = s.mount_ids();
        let g = greedy_select(&scorer, &ids, 2).unwrap();
        let b = brute_force_select(&scorer, &ids, 2, DEFAULT_BRUTE_BUDGET).unwrap();
        assert!(b.score >= g.score);
        assert!(
            g.score >= (1.0 - 1.0 / std::f64::consts::E) * b.score,
            "greedy {} fell below the guarantee against {}",
            g.score,
            b.score
        );
    }

    #[test]
    fn trace_csv_layout() {
        let trace = GainTrace {
            steps: vec![
                GainStep {
                    chosen: 4,
                    before: 0.0,
                    after: 2.5,
                    gain: 2.5,
                },
                GainStep {
                    chosen: 1,
                    before: 2.5,
                    after: 3.0,
                    gain: 0.5,
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        trace.write_csv(&path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "step,chosen_id,k_before,k_after,gain\n0,4,0,2.5,2.5\n1,1,2.5,3,0.5\n"
        );
    }

    #[test]
    fn registry_finds_every_strategy() {
        assert_eq!(strategy_names(), vec!["greedy", "brute", "random", "covdens"]);
        for name in strategy_names() {
            assert_eq!(strategy_by_name(name).unwrap().name(), name);
        }
        assert!(matches!(strategy_by_name("annealing"), Err(Error::Param(_))));
    }

    #[test]
    fn every_strategy_returns_distinct_ids() {
        let params = SceneParams {
            n_mounts: 5,
            n_frames: 4,
            ..SceneParams::default()
        };
        let s = generate_scene(56, &params).unwrap();
        let model = test_model();
        let spec = coarse_spec();
        let scorer = PerceptionScorer::new(&s, &model, ScorerMode::NoisyOr, &spec, None).unwrap();
        let ids = s.mount_ids();
        let ctx = SelectionContext {
            scenario: &s,
            scorer: &scorer,
            candidates: &ids,
            m: 2,
            seed: 11,
            spec: &spec,
        };
        for strat in strategies() {
            let out = strat.select(&ctx).unwrap();
            assert_eq!(out.placement.len(), 2, "{}", strat.name());
            assert_ne!(out.placement[0], out.placement[1], "{}", strat.name());
            assert!(out.score.is_finite());
            if strat.name() == "greedy" {
                assert_eq!(out.trace.steps.len(), 2);
            } else {
                assert!(out.trace.steps.is_empty());
            }
        }
    }
}
