//! Track labelling: edge costs, Hungarian self-labelling (HSL and its
//! clustering variant HCSL) and the direct-matching / percentile baselines.
//!
//! Costs between a track and an actor cloud are mean pairwise squared
//! distances (`EUC`), optionally centered over actors per track (`NC`):
//! `w_i = d_i − mean_k d_k`. Self-labelling repeatedly solves an
//! actors × remaining-tracks assignment, moves every accepted track (cost
//! below λ) into its actor's cloud and stops once an iteration accepts
//! nothing.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_min_assignment, CostMatrix};
use crate::descriptor::{
    check_dims, mean_pairwise_sqdist, sq_dist_unchecked, FaceDescriptor, FaceSetStats,
};
use crate::error::{Error, Result};
use crate::profile::{ActorProfile, ProfileConfig};
use crate::tracker::Track;

/// Reserved label for tracks of people without templates.
pub const SIDE_ACTOR: &str = "SIDE_ACTOR";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Actor(String),
    SideActor,
}

impl Label {
    pub fn actor(name: impl Into<String>) -> Self {
        Label::Actor(name.into())
    }

    pub fn is_side_actor(&self) -> bool {
        matches!(self, Label::SideActor)
    }

    pub fn as_str(&self) -> &str {
        match self {
            Label::Actor(name) => name,
            Label::SideActor => SIDE_ACTOR,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "" => Err(Error::InvalidInput("empty label".into())),
            SIDE_ACTOR => Ok(Label::SideActor),
            name => Ok(Label::Actor(name.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeCost {
    #[serde(rename = "EUC")]
    Euclidean,
    #[serde(rename = "NC")]
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "HSL")]
    Hsl,
    #[serde(rename = "HCSL")]
    Hcsl,
    #[serde(rename = "AVG")]
    Avg,
    #[serde(rename = "NN1")]
    Nn1,
    #[serde(rename = "TOPTEN")]
    TopTen,
}

impl Method {
    pub fn is_self_labelling(self) -> bool {
        matches!(self, Method::Hsl | Method::Hcsl | Method::TopTen)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelerConfig {
    pub edge_cost: EdgeCost,
    pub method: Method,
    /// Acceptance threshold on the active edge cost. Defaults to 0 under NC;
    /// required under EUC.
    pub lambda: Option<f64>,
    /// Cost above which direct matching and TopTen emit SIDE_ACTOR. `None`
    /// disables the cut.
    pub side_actor_threshold: Option<f64>,
    pub topten_percentile: f64,
    /// Filled from the pipeline's `profile` section.
    #[serde(skip)]
    pub profile: ProfileConfig,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        LabelerConfig {
            edge_cost: EdgeCost::Normalized,
            method: Method::Hsl,
            lambda: None,
            side_actor_threshold: None,
            topten_percentile: 0.10,
            profile: ProfileConfig::default(),
        }
    }
}

impl LabelerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.topten_percentile > 0.0 && self.topten_percentile <= 1.0) {
            return Err(Error::InvalidConfig(
                "labeler.topten_percentile must lie in (0, 1]".into(),
            ));
        }
        if matches!(self.method, Method::Hsl | Method::Hcsl) {
            self.effective_lambda()?;
        }
        if self.method == Method::Hcsl {
            self.profile.validate()?;
        }
        Ok(())
    }

    pub fn effective_lambda(&self) -> Result<f64> {
        match (self.lambda, self.edge_cost) {
            (Some(l), _) if l.is_finite() => Ok(l),
            (Some(_), _) => Err(Error::InvalidConfig("labeler.lambda must be finite".into())),
            (None, EdgeCost::Normalized) => Ok(0.0),
            (None, EdgeCost::Euclidean) => Err(Error::InvalidConfig(
                "labeler.lambda must be set when edge_cost is EUC".into(),
            )),
        }
    }
}

/// Which faces of a cloud enter the cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CostSet {
    /// Templates and every acquired face.
    Acquired,
    /// Templates and the profile representatives.
    Profile,
}

/// An actor's evolving face set, seeded from templates.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCloud {
    name: String,
    template_faces: Vec<FaceDescriptor>,
    acquired_faces: Vec<FaceDescriptor>,
    template_stats: FaceSetStats,
    acquired_stats: FaceSetStats,
    profile: Option<ActorProfile>,
    active: FaceSetStats,
}

impl ActorCloud {
    pub fn new(name: impl Into<String>, templates: Vec<FaceDescriptor>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name == SIDE_ACTOR {
            return Err(Error::InvalidInput(format!(
                "'{name}' is not a valid actor name"
            )));
        }
        let Some(first) = templates.first() else {
            return Err(Error::EmptyTemplates { actor: name });
        };
        let dim = first.dim();
        let template_stats = FaceSetStats::from_faces(dim, &templates)?;
        Ok(ActorCloud {
            name,
            acquired_stats: FaceSetStats::empty(dim),
            active: template_stats.clone(),
            template_stats,
            template_faces: templates,
            acquired_faces: Vec::new(),
            profile: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.template_stats.dim()
    }

    pub fn template_faces(&self) -> &[FaceDescriptor] {
        &self.template_faces
    }

    pub fn acquired_faces(&self) -> &[FaceDescriptor] {
        &self.acquired_faces
    }

    pub fn template_stats(&self) -> &FaceSetStats {
        &self.template_stats
    }

    /// Stats of the face set currently used for costs.
    pub fn stats(&self) -> &FaceSetStats {
        &self.active
    }

    pub fn profile(&self) -> Option<&ActorProfile> {
        self.profile.as_ref()
    }

    /// Clears acquired faces and the profile, keeping the templates.
    pub fn reset(&mut self) {
        self.acquired_faces.clear();
        self.acquired_stats = FaceSetStats::empty(self.dim());
        self.profile = None;
        self.active = self.template_stats.clone();
    }

    fn absorb(&mut self, track: &Track, set: CostSet, profile_cfg: &ProfileConfig) -> Result<()> {
        check_dims(self.dim(), track.stats.dim())?;
        self.acquired_faces.extend(track.faces.iter().cloned());
        self.acquired_stats.merge(&track.stats)?;
        match set {
            CostSet::Acquired => {
                self.active = self.template_stats.merged(&self.acquired_stats)?;
            }
            CostSet::Profile => {
                let dim = self.dim();
                let profile = self
                    .profile
                    .get_or_insert_with(|| ActorProfile::new(self.name.clone(), dim));
                for f in &track.faces {
                    profile.add_face(f, profile_cfg)?;
                }
                let reps = profile.representatives(profile_cfg);
                let rep_stats = FaceSetStats::from_faces(dim, &reps)?;
                self.active = self.template_stats.merged(&rep_stats)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelEntry {
    pub label: Label,
    pub cost: f64,
    /// Self-labelling iteration that accepted the track; `None` for direct
    /// methods and side actors.
    pub iteration: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Labeling {
    pub entries: BTreeMap<u64, LabelEntry>,
    /// Number of assignment rounds that were solved.
    pub iterations: usize,
}

impl Labeling {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, track_id: u64) -> Option<&LabelEntry> {
        self.entries.get(&track_id)
    }

    pub fn labels(&self) -> BTreeMap<u64, Label> {
        self.entries
            .iter()
            .map(|(id, e)| (*id, e.label.clone()))
            .collect()
    }
}

/// One assignment round of HSL/HCSL/TopTen.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// (actor index, track id, cost) of every accepted track.
    pub accepted: Vec<(usize, u64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SelfLabelOutcome {
    pub labeling: Labeling,
    pub clouds: Vec<ActorCloud>,
    pub trace: Vec<IterationRecord>,
}

/// Mean pairwise squared distance between a track and a cloud's active set.
pub fn avg_cost(track: &Track, cloud: &ActorCloud) -> Result<f64> {
    mean_pairwise_sqdist(&track.stats, cloud.stats())
}

/// Subtracts the mean over actors from a track's cost vector.
pub fn center_costs(d: &[f64]) -> Vec<f64> {
    if d.is_empty() {
        return Vec::new();
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.iter().map(|x| x - mean).collect()
}

pub fn normalized_costs(track: &Track, clouds: &[ActorCloud]) -> Result<Vec<f64>> {
    if clouds.is_empty() {
        return Err(Error::EmptySet);
    }
    let d = clouds
        .iter()
        .map(|c| avg_cost(track, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(center_costs(&d))
}

fn validate_inputs(tracks: &[Track], clouds: &[ActorCloud]) -> Result<()> {
    if clouds.is_empty() {
        return Err(Error::EmptySet);
    }
    let dim = clouds[0].dim();
    let mut names = HashSet::new();
    for c in clouds {
        if c.template_faces.is_empty() {
            return Err(Error::EmptyTemplates {
                actor: c.name.clone(),
            });
        }
        check_dims(dim, c.dim())?;
        if !names.insert(c.name.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate actor '{}'", c.name)));
        }
    }
    let mut ids = HashSet::new();
    for t in tracks {
        if t.is_empty() || t.stats.count() != t.faces.len() {
            return Err(Error::InvalidInput(format!(
                "track {} has no faces or inconsistent stats",
                t.id
            )));
        }
        check_dims(dim, t.stats.dim())?;
        if !ids.insert(t.id) {
            return Err(Error::InvalidInput(format!("duplicate track id {}", t.id)));
        }
    }
    Ok(())
}

/// Track indices ordered by track id.
fn pool_by_id(tracks: &[Track]) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..tracks.len()).collect();
    pool.sort_by_key(|&i| tracks[i].id);
    pool
}

/// Cache of d(track, cloud) for every (actor, track) pair; rows are
/// recomputed only for clouds that changed.
struct DistanceCache {
    d: Vec<Vec<f64>>,
}

impl DistanceCache {
    fn new(tracks: &[Track], clouds: &[ActorCloud]) -> Result<Self> {
        let mut cache = DistanceCache {
            d: vec![vec![0.0; tracks.len()]; clouds.len()],
        };
        let all: Vec<usize> = (0..tracks.len()).collect();
        for (i, cloud) in clouds.iter().enumerate() {
            cache.refresh(i, tracks, cloud, &all)?;
        }
        Ok(cache)
    }

    fn refresh(
        &mut self,
        actor: usize,
        tracks: &[Track],
        cloud: &ActorCloud,
        pool: &[usize],
    ) -> Result<()> {
        let values = pool
            .par_iter()
            .map(|&t| avg_cost(&tracks[t], cloud))
            .collect::<Result<Vec<_>>>()?;
        let row = &mut self.d[actor];
        for (&t, v) in pool.iter().zip(values) {
            row[t] = v;
        }
        Ok(())
    }

    /// Active edge cost of (actor, track) for every actor.
    fn column(&self, track: usize, edge: EdgeCost) -> Vec<f64> {
        let d: Vec<f64> = self.d.iter().map(|row| row[track]).collect();
        match edge {
            EdgeCost::Euclidean => d,
            EdgeCost::Normalized => center_costs(&d),
        }
    }
}

fn cost_matrix(
    cache: &DistanceCache,
    pool: &[usize],
    n_actors: usize,
    edge: EdgeCost,
) -> CostMatrix {
    let mut entries = vec![0.0; n_actors * pool.len()];
    for (c, &t) in pool.iter().enumerate() {
        for (i, w) in cache.column(t, edge).into_iter().enumerate() {
            entries[i * pool.len() + c] = w;
        }
    }
    CostMatrix::new(n_actors, pool.len(), entries).expect("finite costs over a non-empty pool")
}

/// Hungarian self-labelling (HSL, or HCSL when `cfg.method` is HCSL).
pub fn run_hsl(tracks: &[Track], clouds: &[ActorCloud], cfg: &LabelerConfig) -> Result<Labeling> {
    self_label(tracks, clouds, cfg).map(|o| o.labeling)
}

/// [`run_hsl`] returning the final clouds and the per-iteration trace.
pub fn self_label(
    tracks: &[Track],
    clouds: &[ActorCloud],
    cfg: &LabelerConfig,
) -> Result<SelfLabelOutcome> {
    let set = match cfg.method {
        Method::Hsl => CostSet::Acquired,
        Method::Hcsl => CostSet::Profile,
        other => {
            return Err(Error::InvalidConfig(format!(
                "self-labelling requires HSL or HCSL, got {other:?}"
            )))
        }
    };
    cfg.validate()?;
    let lambda = cfg.effective_lambda()?;
    validate_inputs(tracks, clouds)?;

    let mut clouds = clouds.to_vec();
    let n_actors = clouds.len();
    let mut cache = DistanceCache::new(tracks, &clouds)?;
    let mut pool = pool_by_id(tracks);
    let mut labeling = Labeling::default();
    let mut trace = Vec::new();
    let mut last_matrix: Option<CostMatrix> = None;

    while !pool.is_empty() {
        let iteration = labeling.iterations;
        let matrix = cost_matrix(&cache, &pool, n_actors, cfg.edge_cost);
        let assignment = solve_min_assignment(&matrix)?;
        labeling.iterations += 1;

        let accepted: Vec<(usize, usize, f64)> = assignment
            .pairs
            .iter()
            .map(|&(i, c)| (i, c, matrix.get(i, c)))
            .filter(|&(_, _, w)| w < lambda)
            .collect();
        if accepted.is_empty() {
            debug!("iteration {iteration}: no track below lambda {lambda}");
            last_matrix = Some(matrix);
            break;
        }

        let mut record = IterationRecord {
            iteration,
            accepted: Vec::with_capacity(accepted.len()),
        };
        let mut taken = vec![false; pool.len()];
        for &(i, c, w) in &accepted {
            let t = pool[c];
            clouds[i].absorb(&tracks[t], set, &cfg.profile)?;
            taken[c] = true;
            labeling.entries.insert(
                tracks[t].id,
                LabelEntry {
                    label: Label::actor(clouds[i].name()),
                    cost: w,
                    iteration: Some(iteration),
                },
            );
            record.accepted.push((i, tracks[t].id, w));
        }
        info!(
            "iteration {iteration}: accepted {}",
            format_accepted(&record, &clouds)
        );
        trace.push(record);

        let mut k = 0;
        pool.retain(|_| {
            k += 1;
            !taken[k - 1]
        });
        for &(i, _, _) in &accepted {
            cache.refresh(i, tracks, &clouds[i], &pool)?;
        }
    }

    if let Some(matrix) = last_matrix {
        for (c, &t) in pool.iter().enumerate() {
            let best = (0..n_actors)
                .map(|i| matrix.get(i, c))
                .fold(f64::INFINITY, f64::min);
            labeling.entries.insert(
                tracks[t].id,
                LabelEntry {
                    label: Label::SideActor,
                    cost: best,
                    iteration: None,
                },
            );
        }
    }

    Ok(SelfLabelOutcome {
        labeling,
        clouds,
        trace,
    })
}

fn format_accepted(record: &IterationRecord, clouds: &[ActorCloud]) -> String {
    record
        .accepted
        .iter()
        .map(|(i, t, w)| format!("({}, {t}, {w:.6})", clouds[*i].name()))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Lowest cost and its actor index; ties go to the lowest index.
fn argmin(costs: &[f64]) -> (usize, f64) {
    let mut best = (0, costs[0]);
    for (i, &c) in costs.iter().enumerate().skip(1) {
        if c < best.1 {
            best = (i, c);
        }
    }
    best
}

fn direct_label(clouds: &[ActorCloud], costs: &[f64], threshold: Option<f64>) -> LabelEntry {
    let (i, cost) = argmin(costs);
    let label = match threshold {
        Some(thr) if cost > thr => Label::SideActor,
        _ => Label::actor(clouds[i].name()),
    };
    LabelEntry {
        label,
        cost,
        iteration: None,
    }
}

fn run_direct<F>(
    tracks: &[Track],
    clouds: &[ActorCloud],
    cfg: &LabelerConfig,
    cost: F,
) -> Result<Labeling>
where
    F: Fn(&Track, &ActorCloud) -> Result<f64> + Sync,
{
    validate_inputs(tracks, clouds)?;
    let entries = tracks
        .par_iter()
        .map(|t| {
            let costs = clouds
                .iter()
                .map(|c| cost(t, c))
                .collect::<Result<Vec<_>>>()?;
            Ok((t.id, direct_label(clouds, &costs, cfg.side_actor_threshold)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Labeling {
        entries: entries.into_iter().collect(),
        iterations: 0,
    })
}

/// Closest average actor over the templates only.
pub fn run_avg_baseline(
    tracks: &[Track],
    clouds: &[ActorCloud],
    cfg: &LabelerConfig,
) -> Result<Labeling> {
    run_direct(tracks, clouds, cfg, |t, c| {
        mean_pairwise_sqdist(&t.stats, c.template_stats())
    })
}

/// Squared distance of the closest (track face, template face) pair.
pub fn min_face_sqdist(track: &Track, templates: &[FaceDescriptor]) -> f64 {
    let mut best = f64::INFINITY;
    for f in &track.faces {
        for g in templates {
            best = best.min(sq_dist_unchecked(f.as_slice(), g.as_slice()));
        }
    }
    best
}

/// Nearest template face.
pub fn run_1nn_baseline(
    tracks: &[Track],
    clouds: &[ActorCloud],
    cfg: &LabelerConfig,
) -> Result<Labeling> {
    run_direct(tracks, clouds, cfg, |t, c| {
        Ok(min_face_sqdist(t, c.template_faces()))
    })
}

/// Number of tracks accepted per TopTen round out of `remaining`.
pub fn topten_batch(percentile: f64, remaining: usize) -> usize {
    // The epsilon keeps products like 0.1 × 30 = 3.0000000000000004 at 3.
    let k = (percentile * remaining as f64 - 1e-9).ceil() as usize;
    k.clamp(1, remaining.max(1))
}

/// Percentile self-labelling: every round accepts the cheapest
/// `⌈p · remaining⌉` tracks to their best actor.
pub fn run_topten_baseline(
    tracks: &[Track],
    clouds: &[ActorCloud],
    cfg: &LabelerConfig,
) -> Result<Labeling> {
    cfg.validate()?;
    validate_inputs(tracks, clouds)?;
    let mut clouds = clouds.to_vec();
    let mut cache = DistanceCache::new(tracks, &clouds)?;
    let mut pool = pool_by_id(tracks);
    let mut labeling = Labeling::default();

    while !pool.is_empty() {
        let iteration = labeling.iterations;
        let mut ranked: Vec<(f64, u64, usize, usize)> = pool
            .iter()
            .map(|&t| {
                let (i, w) = argmin(&cache.column(t, cfg.edge_cost));
                (w, tracks[t].id, t, i)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = topten_batch(cfg.topten_percentile, pool.len());
        labeling.iterations += 1;

        let mut dirty = vec![false; clouds.len()];
        let mut taken = HashSet::new();
        for &(w, id, t, i) in &ranked[..k] {
            clouds[i].absorb(&tracks[t], CostSet::Acquired, &cfg.profile)?;
            dirty[i] = true;
            taken.insert(t);
            labeling.entries.insert(
                id,
                LabelEntry {
                    label: Label::actor(clouds[i].name()),
                    cost: w,
                    iteration: Some(iteration),
                },
            );
        }
        debug!(
            "topten iteration {iteration}: accepted {k} of {}",
            pool.len()
        );
        pool.retain(|t| !taken.contains(t));
        for (i, d) in dirty.iter().enumerate() {
            if *d {
                cache.refresh(i, tracks, &clouds[i], &pool)?;
            }
        }
    }

    if let Some(thr) = cfg.side_actor_threshold {
        for e in labeling.entries.values_mut() {
            if e.cost > thr {
                e.label = Label::SideActor;
                e.iteration = None;
            }
        }
    }
    Ok(labeling)
}

/// Runs the method selected in `cfg`.
pub fn label_tracks(
    tracks: &[Track],
    clouds: &[ActorCloud],
    cfg: &LabelerConfig,
) -> Result<Labeling> {
    match cfg.method {
        Method::Hsl | Method::Hcsl => run_hsl(tracks, clouds, cfg),
        Method::Avg => run_avg_baseline(tracks, clouds, cfg),
        Method::Nn1 => run_1nn_baseline(tracks, clouds, cfg),
        Method::TopTen => run_topten_baseline(tracks, clouds, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::tests::random_unit;
    use crate::synth::{generate, ScenarioConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd(v: &[f64]) -> FaceDescriptor {
        FaceDescriptor::new(v.to_vec())
    }

    fn track(id: u64, faces: Vec<FaceDescriptor>) -> Track {
        let frames = (0..faces.len() as u64).collect();
        Track::new(id, frames, faces).unwrap()
    }

    fn cloud(name: &str, faces: Vec<FaceDescriptor>) -> ActorCloud {
        ActorCloud::new(name, faces).unwrap()
    }

    fn naive_avg(a: &[FaceDescriptor], b: &[FaceDescriptor]) -> f64 {
        let mut total = 0.0;
        for x in a {
            for y in b {
                total += sq_dist_unchecked(x.as_slice(), y.as_slice());
            }
        }
        total / (a.len() * b.len()) as f64
    }

    fn small_scenario(seed: u64) -> crate::synth::Scenario {
        generate(&ScenarioConfig {
            dim: 16,
            n_actors: 3,
            tracks_per_actor: 6,
            faces_per_track_range: (3, 6),
            seed,
            ..ScenarioConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn avg_cost_examples() {
        let t = track(0, vec![fd(&[1.0, 0.0])]);
        assert_eq!(
            avg_cost(&t, &cloud("a", vec![fd(&[1.0, 0.0])])).unwrap(),
            0.0
        );
        let c = cloud("a", vec![fd(&[0.0, 1.0]), fd(&[-1.0, 0.0])]);
        // (2 + 4) / 2
        assert!((avg_cost(&t, &c).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn avg_cost_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let dim = rng.random_range(1..=64);
            let n = rng.random_range(1..=30);
            let m = rng.random_range(1..=30);
            let a: Vec<_> = (0..n).map(|_| random_unit(&mut rng, dim)).collect();
            let b: Vec<_> = (0..m).map(|_| random_unit(&mut rng, dim)).collect();
            let got = avg_cost(&track(0, a.clone()), &cloud("x", b.clone())).unwrap();
            let want = naive_avg(&a, &b);
            assert!(
                (got - want).abs() <= 1e-9 * want.abs().max(1e-12),
                "{got} vs {want}"
            );
        }
    }

    #[test]
    fn center_costs_examples() {
        assert_eq!(center_costs(&[2.0, 4.0]), vec![-1.0, 1.0]);
        assert_eq!(center_costs(&[3.7]), vec![0.0]);
    }

    #[test]
    fn dims_must_agree() {
        let t = track(0, vec![fd(&[1.0, 0.0, 0.0])]);
        let c = cloud("a", vec![fd(&[1.0, 0.0])]);
        assert!(matches!(
            avg_cost(&t, &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn centered_costs_sum_to_zero(d in prop::collection::vec(0.0f64..10.0, 1..12)) {
            let w = center_costs(&d);
            let scale = d.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            prop_assert!(w.iter().sum::<f64>().abs() <= 1e-9 * scale);
        }

        #[test]
        fn centered_costs_ignore_offsets(
            d in prop::collection::vec(0.0f64..10.0, 1..12),
            c in -5.0f64..5.0,
        ) {
            let shifted: Vec<f64> = d.iter().map(|x| x + c).collect();
            for (a, b) in center_costs(&d).iter().zip(center_costs(&shifted)) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn empty_templates_rejected() {
        assert!(matches!(
            ActorCloud::new("a", vec![]),
            Err(Error::EmptyTemplates { .. })
        ));
        assert!(ActorCloud::new(SIDE_ACTOR, vec![fd(&[1.0])]).is_err());
    }

    #[test]
    fn euc_requires_lambda() {
        let cfg = LabelerConfig {
            edge_cost: EdgeCost::Euclidean,
            ..LabelerConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        assert_eq!(LabelerConfig::default().effective_lambda().unwrap(), 0.0);
    }

    #[test]
    fn two_actors_two_tracks_in_one_iteration() {
        let clouds = vec![
            cloud("a", vec![fd(&[1.0, 0.0])]),
            cloud("b", vec![fd(&[0.0, 1.0])]),
        ];
        let tracks = vec![
            track(7, vec![fd(&[0.0, 1.0])]),
            track(3, vec![fd(&[1.0, 0.0])]),
        ];
        let l = run_hsl(&tracks, &clouds, &LabelerConfig::default()).unwrap();
        assert_eq!(l.get(3).unwrap().label, Label::actor("a"));
        assert_eq!(l.get(7).unwrap().label, Label::actor("b"));
        assert_eq!(l.get(3).unwrap().iteration, Some(0));
        assert_eq!(l.get(3).unwrap().cost, -1.0);
        assert_eq!(l.iterations, 1);
    }

    #[test]
    fn lone_actor_under_nc_rejects_everything() {
        // With a single actor every centered cost is exactly 0, never below λ = 0.
        let clouds = vec![cloud("a", vec![fd(&[1.0, 0.0])])];
        let tracks = vec![track(0, vec![fd(&[1.0, 0.0])])];
        let l = run_hsl(&tracks, &clouds, &LabelerConfig::default()).unwrap();
        assert_eq!(l.iterations, 1);
        let e = l.get(0).unwrap();
        assert_eq!(e.label, Label::SideActor);
        assert_eq!(e.iteration, None);
        assert_eq!(e.cost, 0.0);
    }

    #[test]
    fn no_tracks_no_iterations() {
        let clouds = vec![cloud("a", vec![fd(&[1.0, 0.0])])];
        let l = run_hsl(&[], &clouds, &LabelerConfig::default()).unwrap();
        assert!(l.is_empty());
        assert_eq!(l.iterations, 0);
    }

    #[test]
    fn duplicate_track_ids_rejected() {
        let clouds = vec![cloud("a", vec![fd(&[1.0, 0.0])])];
        let tracks = vec![
            track(1, vec![fd(&[1.0, 0.0])]),
            track(1, vec![fd(&[0.0, 1.0])]),
        ];
        assert!(run_hsl(&tracks, &clouds, &LabelerConfig::default()).is_err());
        assert!(matches!(
            run_hsl(&tracks, &[], &LabelerConfig::default()),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn each_actor_takes_at_most_one_track_per_iteration() {
        for seed in 0..5 {
            let sc = small_scenario(seed);
            let clouds = sc.clouds().unwrap();
            let out = self_label(&sc.tracks, &clouds, &LabelerConfig::default()).unwrap();
            let mut prev_remaining = sc.tracks.len();
            for rec in &out.trace {
                let actors: HashSet<usize> = rec.accepted.iter().map(|a| a.0).collect();
                assert_eq!(actors.len(), rec.accepted.len());
                assert!(!rec.accepted.is_empty());
                prev_remaining -= rec.accepted.len();
            }
            assert!(out.labeling.iterations <= sc.tracks.len().max(1));
            let side = out
                .labeling
                .entries
                .values()
                .filter(|e| e.label.is_side_actor())
                .count();
            assert_eq!(side, prev_remaining);
        }
    }

    #[test]
    fn faces_are_conserved() {
        let sc = small_scenario(11);
        let clouds = sc.clouds().unwrap();
        let cfg = LabelerConfig {
            lambda: Some(-0.3),
            ..LabelerConfig::default()
        };
        let out = self_label(&sc.tracks, &clouds, &cfg).unwrap();
        let absorbed: usize = out.clouds.iter().map(|c| c.acquired_faces().len()).sum();
        let side: usize = sc
            .tracks
            .iter()
            .filter(|t| out.labeling.get(t.id).unwrap().label.is_side_actor())
            .map(|t| t.len())
            .sum();
        let total: usize = sc.tracks.iter().map(Track::len).sum();
        assert_eq!(absorbed + side, total);
        assert_eq!(out.labeling.len(), sc.tracks.len());
        for c in &out.clouds {
            let owned: usize = sc
                .tracks
                .iter()
                .filter(|t| out.labeling.get(t.id).unwrap().label.as_str() == c.name())
                .map(|t| t.len())
                .sum();
            assert_eq!(owned, c.acquired_faces().len());
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let sc = small_scenario(5);
        let clouds = sc.clouds().unwrap();
        for method in [
            Method::Hsl,
            Method::Hcsl,
            Method::TopTen,
            Method::Avg,
            Method::Nn1,
        ] {
            let cfg = LabelerConfig {
                method,
                ..LabelerConfig::default()
            };
            let a = label_tracks(&sc.tracks, &clouds, &cfg).unwrap();
            let b = label_tracks(&sc.tracks, &clouds, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn track_order_does_not_matter() {
        let sc = small_scenario(6);
        let clouds = sc.clouds().unwrap();
        let mut reversed = sc.tracks.clone();
        reversed.reverse();
        let cfg = LabelerConfig::default();
        assert_eq!(
            run_hsl(&sc.tracks, &clouds, &cfg).unwrap(),
            run_hsl(&reversed, &clouds, &cfg).unwrap()
        );
    }

    #[test]
    fn bridged_clouds_label_correctly() {
        // Clouds that already hold every in-video face of their actor.
        let sc = generate(&ScenarioConfig {
            dim: 32,
            n_actors: 4,
            tracks_per_actor: 8,
            seed: 9,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let clouds: Vec<ActorCloud> = sc
            .templates
            .iter()
            .map(|(name, templates)| {
                let mut faces = templates.clone();
                for t in &sc.tracks {
                    if sc.ground_truth[&t.id].as_str() == name {
                        faces.extend(t.faces.iter().cloned());
                    }
                }
                cloud(name, faces)
            })
            .collect();
        let l = run_hsl(&sc.tracks, &clouds, &LabelerConfig::default()).unwrap();
        assert_eq!(l.labels(), sc.ground_truth);
    }

    #[test]
    fn hcsl_costs_use_templates_and_representatives() {
        let sc = small_scenario(2);
        let clouds = sc.clouds().unwrap();
        let cfg = LabelerConfig {
            method: Method::Hcsl,
            ..LabelerConfig::default()
        };
        let out = self_label(&sc.tracks, &clouds, &cfg).unwrap();
        for c in &out.clouds {
            let Some(p) = c.profile() else { continue };
            let reps = p.representatives(&cfg.profile);
            assert_eq!(p.len(), c.acquired_faces().len());
            let expected = c
                .template_stats()
                .merged(&FaceSetStats::from_faces(c.dim(), &reps).unwrap())
                .unwrap();
            assert_eq!(c.stats().count(), c.template_faces().len() + reps.len());
            assert!((expected.sqnorm_sum() - c.stats().sqnorm_sum()).abs() < 1e-9);
        }
    }

    #[test]
    fn hcsl_ignores_isolated_faces() {
        // Far-away faces open singleton clusters that never become representatives.
        let clouds = vec![
            cloud("a", vec![fd(&[1.0, 0.0, 0.0])]),
            cloud("b", vec![fd(&[0.0, 1.0, 0.0])]),
        ];
        let mut faces = vec![fd(&[1.0, 0.0, 0.0]); 6];
        faces.push(fd(&[0.0, 0.0, 1.0]));
        let tracks = vec![track(0, faces), track(1, vec![fd(&[0.0, 1.0, 0.0])])];
        let cfg = LabelerConfig {
            method: Method::Hcsl,
            ..LabelerConfig::default()
        };
        let out = self_label(&tracks, &clouds, &cfg).unwrap();
        let a = &out.clouds[0];
        let reps = a.profile().unwrap().representatives(&cfg.profile);
        assert_eq!(reps, vec![fd(&[1.0, 0.0, 0.0])]);
        assert_eq!(a.stats().count(), 2);
    }

    #[test]
    fn avg_examples() {
        let clouds = vec![
            cloud("a", vec![fd(&[1.0, 0.0])]),
            cloud("b", vec![fd(&[0.0, 1.0])]),
        ];
        let tracks = vec![
            track(0, vec![fd(&[1.0, 0.0])]),
            track(1, vec![fd(&[-1.0, 0.0])]),
        ];
        let cfg = LabelerConfig {
            method: Method::Avg,
            side_actor_threshold: Some(1.5),
            ..LabelerConfig::default()
        };
        let l = run_avg_baseline(&tracks, &clouds, &cfg).unwrap();
        assert_eq!(l.get(0).unwrap().label, Label::actor("a"));
        assert_eq!(l.get(0).unwrap().cost, 0.0);
        assert_eq!(l.get(1).unwrap().label, Label::SideActor);
        assert_eq!(l.get(1).unwrap().iteration, None);
    }

    #[test]
    fn direct_ties_go_to_lowest_actor() {
        let clouds = vec![
            cloud("a", vec![fd(&[1.0, 0.0])]),
            cloud("b", vec![fd(&[-1.0, 0.0])]),
        ];
        let tracks = vec![track(0, vec![fd(&[0.0, 1.0])])];
        let cfg = LabelerConfig::default();
        assert_eq!(
            run_avg_baseline(&tracks, &clouds, &cfg)
                .unwrap()
                .get(0)
                .unwrap()
                .label,
            Label::actor("a")
        );
        assert_eq!(
            run_1nn_baseline(&tracks, &clouds, &cfg)
                .unwrap()
                .get(0)
                .unwrap()
                .label,
            Label::actor("a")
        );
    }

    #[test]
    fn nn1_can_disagree_with_avg() {
        // One face sits on b's template, the rest lean towards a.
        let clouds = vec![
            cloud("a", vec![fd(&[1.0, 0.0])]),
            cloud("b", vec![fd(&[0.0, 1.0])]),
        ];
        let s = 0.5f64.sqrt();
        let mut faces = vec![fd(&[0.0, 1.0])];
        faces.extend(vec![fd(&[0.8, 0.6]); 8]);
        let tracks = vec![track(0, faces), track(1, vec![fd(&[s, s])])];
        let cfg = LabelerConfig::default();
        let avg = run_avg_baseline(&tracks, &clouds, &cfg).unwrap();
        let nn = run_1nn_baseline(&tracks, &clouds, &cfg).unwrap();
        assert_eq!(avg.get(0).unwrap().label, Label::actor("a"));
        assert_eq!(nn.get(0).unwrap().label, Label::actor("b"));
        assert_eq!(nn.get(0).unwrap().cost, 0.0);
    }

    #[test]
    fn direct_methods_match_per_track_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let sc = small_scenario(4);
        let clouds = sc.clouds().unwrap();
        let threshold = rng.random_range(1.0..2.0);
        let cfg = LabelerConfig {
            side_actor_threshold: Some(threshold),
            ..LabelerConfig::default()
        };
        let avg = run_avg_baseline(&sc.tracks, &clouds, &cfg).unwrap();
        let nn = run_1nn_baseline(&sc.tracks, &clouds, &cfg).unwrap();
        for t in &sc.tracks {
            for (labeling, cost) in [
                (
                    &avg,
                    &(|c: &ActorCloud| naive_avg(&t.faces, c.template_faces()))
                        as &dyn Fn(&ActorCloud) -> f64,
                ),
                (&nn, &|c: &ActorCloud| {
                    let mut best = f64::INFINITY;
                    for f in &t.faces {
                        for g in c.template_faces() {
                            let d: f64 = f
                                .as_slice()
                                .iter()
                                .zip(g.as_slice())
                                .map(|(x, y)| (x - y) * (x - y))
                                .sum();
                            best = best.min(d);
                        }
                    }
                    best
                }),
            ] {
                let costs: Vec<f64> = clouds.iter().map(cost).collect();
                let mut best = 0;
                for i in 1..costs.len() {
                    if costs[i] < costs[best] {
                        best = i;
                    }
                }
                let e = labeling.get(t.id).unwrap();
                assert!((e.cost - costs[best]).abs() < 1e-9);
                let want = if costs[best] > threshold {
                    Label::SideActor
                } else {
                    Label::actor(clouds[best].name())
                };
                assert_eq!(e.label, want);
            }
        }
    }

    #[test]
    fn topten_batch_sizes() {
        assert_eq!(topten_batch(0.1, 10), 1);
        assert_eq!(topten_batch(0.1, 30), 3);
        assert_eq!(topten_batch(0.1, 31), 4);
        assert_eq!(topten_batch(0.1, 1), 1);
        assert_eq!(topten_batch(1.0, 7), 7);
    }

    #[test]
    fn topten_ten_tracks_ten_iterations() {
        let sc = generate(&ScenarioConfig {
            dim: 8,
            n_actors: 2,
            tracks_per_actor: 5,
            faces_per_track_range: (2, 3),
            seed: 1,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let cfg = LabelerConfig {
            method: Method::TopTen,
            ..LabelerConfig::default()
        };
        let l = run_topten_baseline(&sc.tracks, &sc.clouds().unwrap(), &cfg).unwrap();
        assert_eq!(l.iterations, 10);
        let mut its: Vec<usize> = l.entries.values().map(|e| e.iteration.unwrap()).collect();
        its.sort();
        assert_eq!(its, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn topten_single_track() {
        let clouds = vec![
            cloud("a", vec![fd(&[1.0, 0.0])]),
            cloud("b", vec![fd(&[0.0, 1.0])]),
        ];
        let tracks = vec![track(4, vec![fd(&[0.0, 1.0])])];
        let l = run_topten_baseline(&tracks, &clouds, &LabelerConfig::default()).unwrap();
        assert_eq!(l.get(4).unwrap().label, Label::actor("b"));
        assert_eq!(l.get(4).unwrap().iteration, Some(0));
    }

    /// Straightforward TopTen: full recomputation from raw faces every round.
    fn reference_topten(
        tracks: &[Track],
        clouds: &[ActorCloud],
        cfg: &LabelerConfig,
    ) -> BTreeMap<u64, (Label, f64)> {
        let mut sets: Vec<Vec<FaceDescriptor>> =
            clouds.iter().map(|c| c.template_faces().to_vec()).collect();
        let mut remaining: Vec<&Track> = tracks.iter().collect();
        remaining.sort_by_key(|t| t.id);
        let mut out = BTreeMap::new();
        while !remaining.is_empty() {
            let mut scored: Vec<(f64, u64, usize)> = remaining
                .iter()
                .map(|t| {
                    let d: Vec<f64> = sets.iter().map(|s| naive_avg(&t.faces, s)).collect();
                    let mean = d.iter().sum::<f64>() / d.len() as f64;
                    let w: Vec<f64> = match cfg.edge_cost {
                        EdgeCost::Normalized => d.iter().map(|x| x - mean).collect(),
                        EdgeCost::Euclidean => d,
                    };
                    let mut best = 0;
                    for i in 1..w.len() {
                        if w[i] < w[best] {
                            best = i;
                        }
                    }
                    (w[best], t.id, best)
                })
                .collect();
            scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let k = ((cfg.topten_percentile * remaining.len() as f64) - 1e-9)
                .ceil()
                .max(1.0) as usize;
            for &(w, id, i) in &scored[..k] {
                let t = remaining.iter().find(|t| t.id == id).unwrap();
                sets[i].extend(t.faces.iter().cloned());
                out.insert(id, (Label::actor(clouds[i].name()), w));
            }
            let taken: HashSet<u64> = scored[..k].iter().map(|s| s.1).collect();
            remaining.retain(|t| !taken.contains(&t.id));
        }
        out
    }

    #[test]
    fn topten_matches_reference_loop() {
        let sc = generate(&ScenarioConfig {
            dim: 32,
            n_actors: 4,
            tracks_per_actor: 10,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let clouds = sc.clouds().unwrap();
        for edge_cost in [EdgeCost::Normalized, EdgeCost::Euclidean] {
            let cfg = LabelerConfig {
                method: Method::TopTen,
                edge_cost,
                ..LabelerConfig::default()
            };
            let got = run_topten_baseline(&sc.tracks, &clouds, &cfg).unwrap();
            let want = reference_topten(&sc.tracks, &clouds, &cfg);
            assert_eq!(got.len(), want.len());
            for (id, (label, cost)) in want {
                let e = got.get(id).unwrap();
                assert_eq!(e.label, label);
                assert!((e.cost - cost).abs() <= 1e-6 * cost.abs().max(1e-9));
            }
        }
    }

    #[test]
    fn topten_threshold_relabels_side_actors() {
        let clouds = vec![cloud("a", vec![fd(&[1.0, 0.0])])];
        let tracks = vec![
            track(0, vec![fd(&[1.0, 0.0])]),
            track(1, vec![fd(&[-1.0, 0.0])]),
        ];
        let cfg = LabelerConfig {
            method: Method::TopTen,
            edge_cost: EdgeCost::Euclidean,
            side_actor_threshold: Some(1.0),
            ..LabelerConfig::default()
        };
        let l = run_topten_baseline(&tracks, &clouds, &cfg).unwrap();
        assert_eq!(l.get(0).unwrap().label, Label::actor("a"));
        assert_eq!(l.get(1).unwrap().label, Label::SideActor);
        assert_eq!(l.get(1).unwrap().iteration, None);
    }

    #[test]
    fn label_display_round_trips() {
        for l in [Label::actor("x"), Label::SideActor] {
            assert_eq!(l.to_string().parse::<Label>().unwrap(), l);
        }
        assert!("".parse::<Label>().is_err());
    }
}
