//! Multi-target face tracker.
//!
//! Detections are associated to live tracks frame by frame. A (track,
//! detection) pair is a candidate when the boxes overlap (IoU above
//! `iou_min`) and the descriptor distance to the track's most recent face is
//! within `desc_dist_max`; candidates are resolved with the Hungarian solver.
//! Tracks end at shot boundaries and after `max_missed_frames` frames without
//! an update.

use serde::{Deserialize, Serialize};

use crate::assignment::{solve_min_assignment, CostMatrix};
use crate::descriptor::{check_dims, sq_dist_unchecked, FaceDescriptor, FaceSetStats};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.x.is_finite() && self.y.is_finite()
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        inter / (self.area() + other.area() - inter)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u64,
    pub bbox: BBox,
    pub descriptor: FaceDescriptor,
    pub hist: Option<Vec<f64>>,
    /// Position of the detection in its input stream; carried into the track
    /// so ground truth can be attached later.
    pub index: usize,
}

/// All detections of one frame plus the per-frame shot inputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameDetections {
    pub frame: u64,
    pub detections: Vec<Detection>,
    /// Explicit boundary flag; overrides the histogram test when present.
    pub shot_boundary: Option<bool>,
    pub hist: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub faces: Vec<FaceDescriptor>,
    pub frames: Vec<u64>,
    pub stats: FaceSetStats,
    pub last_bbox: Option<BBox>,
    /// Stream indices of the detections that make up the track (empty for
    /// tracks loaded from file).
    pub detections: Vec<usize>,
}

impl Track {
    /// Builds a track from faces and frames, validating the invariants.
    pub fn new(id: u64, frames: Vec<u64>, faces: Vec<FaceDescriptor>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::InvalidInput(format!("track {id} has no faces")));
        }
        if faces.len() != frames.len() {
            return Err(Error::InvalidInput(format!(
                "track {id}: {} frames but {} faces",
                frames.len(),
                faces.len()
            )));
        }
        if frames.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "track {id}: frames are not strictly increasing"
            )));
        }
        let dim = faces[0].dim();
        let stats = FaceSetStats::from_faces(dim, &faces)?;
        Ok(Track {
            id,
            faces,
            frames,
            stats,
            last_bbox: None,
            detections: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn first_frame(&self) -> u64 {
        self.frames[0]
    }

    pub fn last_frame(&self) -> u64 {
        *self.frames.last().expect("track has at least one face")
    }

    fn last_face(&self) -> &FaceDescriptor {
        self.faces.last().expect("track has at least one face")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistMetric {
    /// 1 − Σ min(p, q).
    Intersection,
    /// ½ Σ (p − q)² / (p + q), in [0, 1] for normalized histograms.
    ChiSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Maximum Euclidean descriptor distance for association. Kept small:
    /// splitting one actor's appearance into several tracks is harmless,
    /// merging two actors is not.
    pub desc_dist_max: f64,
    pub iou_min: f64,
    pub max_missed_frames: u64,
    pub shot_hist_dist_max: f64,
    pub hist_metric: HistMetric,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            desc_dist_max: 0.5,
            iou_min: 0.0,
            max_missed_frames: 10,
            shot_hist_dist_max: 0.5,
            hist_metric: HistMetric::Intersection,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.desc_dist_max > 0.0) {
            return Err(Error::InvalidConfig(
                "tracker.desc_dist_max must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.iou_min) {
            return Err(Error::InvalidConfig(
                "tracker.iou_min must lie in [0, 1]".into(),
            ));
        }
        if self.max_missed_frames == 0 {
            return Err(Error::InvalidConfig(
                "tracker.max_missed_frames must be positive".into(),
            ));
        }
        if !(self.shot_hist_dist_max > 0.0) {
            return Err(Error::InvalidConfig(
                "tracker.shot_hist_dist_max must be positive".into(),
            ));
        }
        Ok(())
    }
}

pub fn hist_distance(prev: &[f64], curr: &[f64], metric: HistMetric) -> Result<f64> {
    check_dims(prev.len(), curr.len())?;
    let d = match metric {
        HistMetric::Intersection => {
            1.0 - prev.iter().zip(curr).map(|(p, q)| p.min(*q)).sum::<f64>()
        }
        HistMetric::ChiSquare => {
            0.5 * prev
                .iter()
                .zip(curr)
                .filter(|(p, q)| **p + **q > 0.0)
                .map(|(p, q)| (p - q) * (p - q) / (p + q))
                .sum::<f64>()
        }
    };
    Ok(d)
}

pub fn detect_shot_boundary(prev: &[f64], curr: &[f64], cfg: &TrackerConfig) -> Result<bool> {
    Ok(hist_distance(prev, curr, cfg.hist_metric)? > cfg.shot_hist_dist_max)
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    dim: usize,
    live: Vec<Track>,
    next_id: u64,
    last_frame: Option<u64>,
    prev_hist: Option<Vec<f64>>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, dim: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Tracker {
            cfg,
            dim,
            live: Vec::new(),
            next_id: 0,
            last_frame: None,
            prev_hist: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn live_tracks(&self) -> &[Track] {
        &self.live
    }

    /// Resolves the frame's shot flag (explicit flag first, then histogram
    /// comparison against the previous frame) and steps the tracker.
    pub fn process_frame(&mut self, frame: FrameDetections) -> Result<Vec<Track>> {
        let hist = frame
            .hist
            .clone()
            .or_else(|| frame.detections.iter().find_map(|d| d.hist.clone()));
        let boundary = match (frame.shot_boundary, &self.prev_hist, &hist) {
            (Some(flag), _, _) => flag,
            (None, Some(prev), Some(curr)) => detect_shot_boundary(prev, curr, &self.cfg)?,
            _ => false,
        };
        if hist.is_some() {
            self.prev_hist = hist;
        }
        self.step(frame.frame, frame.detections, boundary)
    }

    /// Advances the tracker by one frame and returns the tracks that ended.
    pub fn step(
        &mut self,
        frame: u64,
        detections: Vec<Detection>,
        shot_boundary: bool,
    ) -> Result<Vec<Track>> {
        if let Some(prev) = self.last_frame {
            if frame < prev {
                return Err(Error::NonMonotonicFrame {
                    previous: prev,
                    current: frame,
                });
            }
        }
        for d in &detections {
            if d.frame != frame {
                return Err(Error::InvalidInput(format!(
                    "detection for frame {} passed with frame {frame}",
                    d.frame
                )));
            }
            if !d.bbox.is_valid() {
                return Err(Error::InvalidInput(format!(
                    "frame {frame}: bounding box {:?} must have positive size",
                    d.bbox
                )));
            }
            d.descriptor.check_dim(self.dim)?;
        }
        self.last_frame = Some(frame);

        let mut finished = Vec::new();
        if shot_boundary {
            finished.append(&mut self.live);
        }

        let max_missed = self.cfg.max_missed_frames;
        let (stale, live): (Vec<_>, Vec<_>) = std::mem::take(&mut self.live)
            .into_iter()
            .partition(|t| frame > t.last_frame() + max_missed + 1);
        finished.extend(stale);
        self.live = live;

        let matches = self.associate(frame, &detections);
        let mut det_track: Vec<Option<usize>> = vec![None; detections.len()];
        for &(ti, di) in &matches {
            det_track[di] = Some(ti);
        }

        for (det, slot) in detections.into_iter().zip(det_track) {
            match slot {
                Some(ti) => {
                    let track = &mut self.live[ti];
                    track.stats.push(&det.descriptor)?;
                    track.faces.push(det.descriptor);
                    track.frames.push(frame);
                    track.last_bbox = Some(det.bbox);
                    track.detections.push(det.index);
                }
                None => {
                    let id = self.next_id;
                    self.next_id += 1;
                    let mut stats = FaceSetStats::empty(self.dim);
                    stats.push(&det.descriptor)?;
                    self.live.push(Track {
                        id,
                        faces: vec![det.descriptor],
                        frames: vec![frame],
                        stats,
                        last_bbox: Some(det.bbox),
                        detections: vec![det.index],
                    });
                }
            }
        }

        let (expired, live): (Vec<_>, Vec<_>) = std::mem::take(&mut self.live)
            .into_iter()
            .partition(|t| frame - t.last_frame() > max_missed);
        finished.extend(expired);
        self.live = live;

        finished.sort_by_key(|t| t.id);
        Ok(finished)
    }

    pub fn finalize(&mut self) -> Vec<Track> {
        let mut out = std::mem::take(&mut self.live);
        out.sort_by_key(|t| t.id);
        self.prev_hist = None;
        out
    }

    /// Gated Hungarian association of live tracks to this frame's
    /// detections. Returns (live index, detection index) pairs.
    fn associate(&self, frame: u64, detections: &[Detection]) -> Vec<(usize, usize)> {
        let candidates: Vec<usize> = (0..self.live.len())
            .filter(|&i| self.live[i].last_frame() < frame)
            .collect();
        if candidates.is_empty() || detections.is_empty() {
            return Vec::new();
        }

        let max_dist = self.cfg.desc_dist_max;
        let mut dist = vec![None; candidates.len() * detections.len()];
        let mut gated_sum = 0.0;
        for (r, &ti) in candidates.iter().enumerate() {
            let track = &self.live[ti];
            let last = track.last_face().as_slice();
            for (c, det) in detections.iter().enumerate() {
                let overlap = track.last_bbox.map_or(0.0, |b| b.iou(&det.bbox));
                if overlap <= self.cfg.iou_min {
                    continue;
                }
                let d = sq_dist_unchecked(last, det.descriptor.as_slice()).sqrt();
                if d <= max_dist {
                    dist[r * detections.len() + c] = Some(d);
                    gated_sum += d;
                }
            }
        }
        if dist.iter().all(Option::is_none) {
            return Vec::new();
        }

        // Any sentinel above the sum of all gated costs makes the solver
        // maximize the number of gated pairs first.
        let sentinel = gated_sum + max_dist + 1.0;
        let entries = dist.iter().map(|d| d.unwrap_or(sentinel)).collect();
        let matrix = CostMatrix::new(candidates.len(), detections.len(), entries)
            .expect("finite, non-empty association matrix");
        let solution = solve_min_assignment(&matrix).expect("valid association matrix");
        solution
            .pairs
            .into_iter()
            .filter(|&(r, c)| dist[r * detections.len() + c].is_some_and(|d| d <= max_dist))
            .map(|(r, c)| (candidates[r], c))
            .collect()
    }
}

/// Runs the tracker over a whole stream and returns every track, by id.
pub fn track_stream(
    frames: impl IntoIterator<Item = FrameDetections>,
    cfg: &TrackerConfig,
    dim: usize,
) -> Result<Vec<Track>> {
    let mut tracker = Tracker::new(cfg.clone(), dim)?;
    let mut out = Vec::new();
    for frame in frames {
        out.extend(tracker.process_frame(frame)?);
    }
    out.extend(tracker.finalize());
    out.sort_by_key(|t| t.id);
    Ok(out)
}
