//! Seeded generator of domain-shift labelling scenarios.
//!
//! Every identity has an anchor on the unit sphere. Templates scatter around
//! the anchor; in-video appearances scatter around a shifted anchor
//! `normalize(u + s)` with a fixed per-actor shift `‖s‖ = shift_magnitude`
//! orthogonal to `u`, so every actor's appearance is rotated by
//! `atan(shift_magnitude)` away from its templates in a random direction.
//! Side actors have appearances but no templates.
//!
//! Noise vectors are isotropic Gaussians with per-coordinate standard
//! deviation `σ / √dim`, so `σ` is the expected norm of the perturbation and
//! compares directly with the shift magnitude.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::descriptor::{l2_normalize, FaceDescriptor};
use crate::error::{Error, Result};
use crate::labeler::{ActorCloud, Label};
use crate::tracker::{BBox, Detection, FrameDetections, Track};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dim: usize,
    pub n_actors: usize,
    pub n_side: usize,
    pub templates_per_actor: usize,
    pub tracks_per_actor: usize,
    pub tracks_per_side: usize,
    /// Inclusive range of faces per track.
    pub faces_per_track_range: (usize, usize),
    pub sigma_source: f64,
    pub shift_magnitude: f64,
    pub sigma_track: f64,
    pub sigma_face: f64,
    /// Each track draws its within-track noise uniformly from
    /// `[sigma_face, sigma_face + sigma_face_spread]`, so tracks differ in quality.
    pub sigma_face_spread: f64,
    pub outlier_rate: f64,
    pub seed: u64,
    /// Frames left empty between consecutive tracks on the timeline.
    pub gap_frames: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            dim: 64,
            n_actors: 5,
            n_side: 0,
            templates_per_actor: 18,
            tracks_per_actor: 30,
            tracks_per_side: 20,
            faces_per_track_range: (8, 24),
            sigma_source: 0.1,
            shift_magnitude: 3.0,
            sigma_track: 0.3,
            sigma_face: 0.1,
            sigma_face_spread: 0.5,
            outlier_rate: 0.0,
            seed: 42,
            gap_frames: 5,
        }
    }
}

impl ScenarioConfig {
    /// Sum of the noise scales, counting the noisiest possible track.
    pub fn noise_scale(&self) -> f64 {
        self.sigma_source + self.sigma_track + self.sigma_face + self.sigma_face_spread
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.dim < 2 {
            return bad("synth.dim must be at least 2");
        }
        if self.n_actors == 0 {
            return bad("synth.n_actors must be positive");
        }
        if self.templates_per_actor == 0 {
            return bad("synth.templates_per_actor must be positive");
        }
        let (lo, hi) = self.faces_per_track_range;
        if lo == 0 || lo > hi {
            return bad("synth.faces_per_track_range must satisfy 1 <= min <= max");
        }
        for (name, v) in [
            ("sigma_source", self.sigma_source),
            ("sigma_track", self.sigma_track),
            ("sigma_face", self.sigma_face),
            ("sigma_face_spread", self.sigma_face_spread),
            ("shift_magnitude", self.shift_magnitude),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "synth.{name} must be finite and non-negative"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return bad("synth.outlier_rate must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn actor_name(i: usize) -> String {
        format!("actor_{i:02}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Templates per actor, in actor order.
    pub templates: Vec<(String, Vec<FaceDescriptor>)>,
    pub tracks: Vec<Track>,
    pub ground_truth: BTreeMap<u64, Label>,
    /// Every face that was replaced by a random false detection.
    pub outliers: Vec<FaceDescriptor>,
}

impl Scenario {
    pub fn clouds(&self) -> Result<Vec<ActorCloud>> {
        self.templates
            .iter()
            .map(|(name, faces)| ActorCloud::new(name.clone(), faces.clone()))
            .collect()
    }
}

/// Shared identity geometry of a scenario.
struct Identities {
    /// Target-domain anchors; main actors first, then side actors.
    targets: Vec<Vec<f64>>,
    templates: Vec<(String, Vec<FaceDescriptor>)>,
    labels: Vec<Label>,
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    cfg: &'a ScenarioConfig,
}

impl Sampler<'_> {
    fn gaussian(&mut self, scale: f64) -> Vec<f64> {
        let sd = scale / (self.cfg.dim as f64).sqrt();
        (0..self.cfg.dim)
            .map(|_| sd * self.rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn unit(&mut self) -> Vec<f64> {
        loop {
            let v = self.gaussian(1.0);
            if let Ok(u) = l2_normalize(&v) {
                return u.into_inner();
            }
        }
    }

    /// Random unit vector orthogonal to the unit vector `axis`.
    fn orthogonal_unit(&mut self, axis: &[f64]) -> Vec<f64> {
        loop {
            let v = self.gaussian(1.0);
            let along: f64 = v.iter().zip(axis).map(|(a, b)| a * b).sum();
            let w: Vec<f64> = v.iter().zip(axis).map(|(a, b)| a - along * b).collect();
            if let Ok(u) = l2_normalize(&w) {
                return u.into_inner();
            }
        }
    }

    /// `normalize(base + σ ε)`; returns `base` untouched when σ = 0.
    fn perturb(&mut self, base: &[f64], sigma: f64) -> Vec<f64> {
        if sigma == 0.0 {
            return base.to_vec();
        }
        loop {
            let noise = self.gaussian(sigma);
            let v: Vec<f64> = base.iter().zip(&noise).map(|(b, e)| b + e).collect();
            if let Ok(u) = l2_normalize(&v) {
                return u.into_inner();
            }
        }
    }

    fn identities(&mut self) -> Identities {
        let cfg = self.cfg;
        let anchors: Vec<Vec<f64>> = (0..cfg.n_actors + cfg.n_side)
            .map(|_| self.unit())
            .collect();
        let mut templates = Vec::with_capacity(cfg.n_actors);
        for (i, anchor) in anchors.iter().take(cfg.n_actors).enumerate() {
            let faces = (0..cfg.templates_per_actor)
                .map(|_| FaceDescriptor::new(self.perturb(anchor, cfg.sigma_source)))
                .collect();
            templates.push((ScenarioConfig::actor_name(i), faces));
        }
        let mut targets = Vec::with_capacity(anchors.len());
        for (i, anchor) in anchors.iter().enumerate() {
            if i < cfg.n_actors && cfg.shift_magnitude > 0.0 {
                let dir = self.orthogonal_unit(anchor);
                let shifted: Vec<f64> = anchor
                    .iter()
                    .zip(&dir)
                    .map(|(a, d)| a + cfg.shift_magnitude * d)
                    .collect();
                targets.push(
                    l2_normalize(&shifted)
                        .map(FaceDescriptor::into_inner)
                        .unwrap_or_else(|_| anchor.clone()),
                );
            } else {
                targets.push(anchor.clone());
            }
        }
        let labels = (0..anchors.len())
            .map(|i| {
                if i < cfg.n_actors {
                    Label::actor(ScenarioConfig::actor_name(i))
                } else {
                    Label::SideActor
                }
            })
            .collect();
        Identities {
            targets,
            templates,
            labels,
        }
    }

    /// One in-video face around `center`; false detections are recorded.
    fn face(
        &mut self,
        center: &[f64],
        sigma: f64,
        outliers: &mut Vec<FaceDescriptor>,
    ) -> FaceDescriptor {
        if self.cfg.outlier_rate > 0.0 && self.rng.random::<f64>() < self.cfg.outlier_rate {
            let f = FaceDescriptor::new(self.unit());
            outliers.push(f.clone());
            return f;
        }
        FaceDescriptor::new(self.perturb(center, sigma))
    }

    fn track_sigma(&mut self) -> f64 {
        let spread = self.cfg.sigma_face_spread;
        if spread > 0.0 {
            self.cfg.sigma_face + spread * self.rng.random::<f64>()
        } else {
            self.cfg.sigma_face
        }
    }

    fn track_length(&mut self) -> usize {
        let (lo, hi) = self.cfg.faces_per_track_range;
        self.rng.random_range(lo..=hi)
    }
}

/// Generates templates, ready-made tracks and ground truth.
pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cfg,
    };
    let ids = s.identities();

    let mut owners: Vec<usize> = Vec::new();
    for i in 0..cfg.n_actors {
        owners.extend(std::iter::repeat_n(i, cfg.tracks_per_actor));
    }
    for j in 0..cfg.n_side {
        owners.extend(std::iter::repeat_n(cfg.n_actors + j, cfg.tracks_per_side));
    }
    owners.shuffle(&mut s.rng);

    let mut tracks = Vec::with_capacity(owners.len());
    let mut ground_truth = BTreeMap::new();
    let mut outliers = Vec::new();
    let mut next_frame = 0u64;
    for (id, &owner) in owners.iter().enumerate() {
        let id = id as u64;
        let center = s.perturb(&ids.targets[owner], cfg.sigma_track);
        let n = s.track_length();
        let sigma = s.track_sigma();
        let faces: Vec<_> = (0..n)
            .map(|_| s.face(&center, sigma, &mut outliers))
            .collect();
        let frames: Vec<u64> = (next_frame..next_frame + n as u64).collect();
        next_frame += n as u64 + cfg.gap_frames;
        tracks.push(Track::new(id, frames, faces)?);
        ground_truth.insert(id, ids.labels[owner].clone());
    }

    Ok(Scenario {
        templates: ids.templates,
        tracks,
        ground_truth,
        outliers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    pub shots: usize,
    /// Inclusive range of identities on screen per shot.
    pub identities_per_shot: (usize, usize),
    pub box_size: f64,
    pub crossing_rate: f64,
    pub hist_bins: usize,
    /// Write explicit `shot_boundary` flags instead of relying on histograms.
    pub emit_boundary_flags: bool,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            shots: 60,
            identities_per_shot: (1, 3),
            box_size: 120.0,
            crossing_rate: 0.2,
            hist_bins: 16,
            emit_boundary_flags: false,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self, scenario: &ScenarioConfig) -> Result<()> {
        let (lo, hi) = self.identities_per_shot;
        if lo == 0 || lo > hi || hi > scenario.n_actors + scenario.n_side {
            return Err(Error::InvalidConfig(
                "stream.identities_per_shot must satisfy 1 <= min <= max <= identities".into(),
            ));
        }
        if !(self.box_size > 0.0) || self.hist_bins < 4 {
            return Err(Error::InvalidConfig(
                "stream.box_size must be positive and stream.hist_bins at least 4".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.crossing_rate) {
            return Err(Error::InvalidConfig(
                "stream.crossing_rate must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// A frame-by-frame detection stream with per-detection ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionStream {
    pub templates: Vec<(String, Vec<FaceDescriptor>)>,
    pub frames: Vec<FrameDetections>,
    /// Ground-truth label of every detection, by stream index.
    pub detection_labels: Vec<Label>,
    /// Identity index of every detection (distinguishes side actors).
    pub detection_identities: Vec<usize>,
    /// First frame of every shot after the first.
    pub boundaries: Vec<u64>,
    pub outliers: Vec<FaceDescriptor>,
}

impl DetectionStream {
    pub fn clouds(&self) -> Result<Vec<ActorCloud>> {
        self.templates
            .iter()
            .map(|(name, faces)| ActorCloud::new(name.clone(), faces.clone()))
            .collect()
    }

    pub fn n_detections(&self) -> usize {
        self.detection_labels.len()
    }
}

fn peaked_hist(rng: &mut ChaCha8Rng, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let mut idx: Vec<usize> = (0..bins).collect();
    idx.shuffle(rng);
    for &i in idx.iter().take(bins / 4) {
        h[i] = rng.random_range(0.5..1.0);
    }
    let s: f64 = h.iter().sum();
    h.iter().map(|x| x / s).collect()
}

/// Generates a detection stream: shots of `faces_per_track_range` frames,
/// each showing a few identities in fixed, non-overlapping slots (crossing
/// pairs swap slots across the shot). Every appearance of an identity in a
/// shot is one ground-truth track.
pub fn generate_stream(cfg: &ScenarioConfig, stream: &StreamConfig) -> Result<DetectionStream> {
    cfg.validate()?;
    stream.validate(cfg)?;
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cfg,
    };
    let ids = s.identities();
    let n_ids = ids.targets.len();
    let spacing = stream.box_size * 1.5;

    let mut frames = Vec::new();
    let mut labels = Vec::new();
    let mut identities = Vec::new();
    let mut boundaries = Vec::new();
    let mut outliers = Vec::new();
    let mut prev_hist: Option<Vec<f64>> = None;
    let mut frame = 0u64;

    for shot in 0..stream.shots {
        let len = s.track_length();
        let (lo, hi) = stream.identities_per_shot;
        let k = s.rng.random_range(lo..=hi);
        let mut cast: Vec<usize> = (0..n_ids).collect();
        cast.shuffle(&mut s.rng);
        cast.truncate(k);
        let centers: Vec<Vec<f64>> = cast
            .iter()
            .map(|&id| s.perturb(&ids.targets[id], cfg.sigma_track))
            .collect();
        let sigmas: Vec<f64> = cast.iter().map(|_| s.track_sigma()).collect();
        let crossing = k >= 2 && len >= 4 && s.rng.random::<f64>() < stream.crossing_rate;

        let base_hist = loop {
            let h = peaked_hist(&mut s.rng, stream.hist_bins);
            let far = prev_hist.as_ref().is_none_or(|p| {
                crate::tracker::hist_distance(p, &h, crate::tracker::HistMetric::Intersection)
                    .map(|d| d > 0.9)
                    .unwrap_or(false)
            });
            if far {
                break h;
            }
        };
        prev_hist = Some(base_hist.clone());
        if shot > 0 {
            boundaries.push(frame);
        }

        for t in 0..len {
            let jittered: Vec<f64> = base_hist
                .iter()
                .map(|x| x * (1.0 + 0.02 * s.rng.random::<f64>()))
                .collect();
            let total: f64 = jittered.iter().sum();
            let hist: Vec<f64> = jittered.iter().map(|x| x / total).collect();

            let mut detections = Vec::with_capacity(k);
            for (slot, (&id, center)) in cast.iter().zip(&centers).enumerate() {
                let mut x = 100.0 + spacing * slot as f64;
                if crossing && slot < 2 {
                    let from = 100.0 + spacing * slot as f64;
                    let to = 100.0 + spacing * (1 - slot) as f64;
                    x = from + (to - from) * t as f64 / (len - 1) as f64;
                }
                let y = 300.0 + s.rng.random_range(-2.0..2.0);
                let descriptor = s.face(center, sigmas[slot], &mut outliers);
                detections.push(Detection {
                    frame,
                    bbox: BBox::new(x, y, stream.box_size, stream.box_size),
                    descriptor,
                    hist: Some(hist.clone()),
                    index: labels.len(),
                });
                labels.push(ids.labels[id].clone());
                identities.push(id);
            }
            let flag = if stream.emit_boundary_flags {
                Some(t == 0 && shot > 0)
            } else {
                None
            };
            frames.push(FrameDetections {
                frame,
                detections,
                shot_boundary: flag,
                hist: Some(hist),
            });
            frame += 1;
        }
    }

    Ok(DetectionStream {
        templates: ids.templates,
        frames,
        detection_labels: labels,
        detection_identities: identities,
        boundaries,
        outliers,
    })
}

/// Majority ground-truth label of each track's detections; ties go to the
/// smallest label.
pub fn track_ground_truth(
    tracks: &[Track],
    detection_labels: &[Label],
) -> Result<BTreeMap<u64, Label>> {
    let mut out = BTreeMap::new();
    for t in tracks {
        let mut votes: BTreeMap<&Label, usize> = BTreeMap::new();
        for &d in &t.detections {
            let label = detection_labels.get(d).ok_or_else(|| {
                Error::InvalidInput(format!("track {} references unknown detection {d}", t.id))
            })?;
            *votes.entry(label).or_default() += 1;
        }
        let best = votes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(l, _)| (*l).clone())
            .ok_or_else(|| {
                Error::InvalidInput(format!("track {} has no source detections", t.id))
            })?;
        out.insert(t.id, best);
    }
    Ok(out)
}
