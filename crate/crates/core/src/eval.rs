//! Track-level scoring and the variable-length segment experiment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::{label_tracks, ActorCloud, Label, LabelerConfig, Labeling};
use crate::tracker::Track;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorBreakdown {
    /// `None` when the label has no ground-truth tracks.
    pub recall: Option<f64>,
    pub track_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub n_tracks: usize,
    /// True when there was nothing to score.
    pub empty: bool,
    /// Row/column order of `confusion`: actors sorted, then SIDE_ACTOR.
    pub labels: Vec<String>,
    /// `confusion[truth][predicted]` track counts.
    pub confusion: Vec<Vec<usize>>,
    pub per_actor: BTreeMap<String, ActorBreakdown>,
}

pub fn score(pred: &Labeling, gt: &BTreeMap<u64, Label>) -> Result<EvalReport> {
    score_labels(&pred.labels(), gt)
}

pub fn score_labels(pred: &BTreeMap<u64, Label>, gt: &BTreeMap<u64, Label>) -> Result<EvalReport> {
    let missing: Vec<u64> = gt
        .keys()
        .filter(|k| !pred.contains_key(k))
        .copied()
        .collect();
    let extra: Vec<u64> = pred
        .keys()
        .filter(|k| !gt.contains_key(k))
        .copied()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::KeyMismatch { missing, extra });
    }

    let mut set: BTreeSet<Label> = gt.values().chain(pred.values()).cloned().collect();
    set.insert(Label::SideActor);
    // Label's ordering puts every actor before SideActor.
    let labels: Vec<Label> = set.into_iter().collect();
    let index: BTreeMap<&Label, usize> = labels.iter().enumerate().map(|(i, l)| (l, i)).collect();

    let n = labels.len();
    let mut confusion = vec![vec![0usize; n]; n];
    for (id, truth) in gt {
        confusion[index[truth]][index[&pred[id]]] += 1;
    }

    let n_tracks = gt.len();
    let correct: usize = (0..n).map(|i| confusion[i][i]).sum();
    let per_actor = labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let count: usize = confusion[i].iter().sum();
            let recall = (count > 0).then(|| confusion[i][i] as f64 / count as f64);
            (
                l.to_string(),
                ActorBreakdown {
                    recall,
                    track_count: count,
                },
            )
        })
        .collect();

    Ok(EvalReport {
        overall_accuracy: if n_tracks == 0 {
            0.0
        } else {
            correct as f64 / n_tracks as f64
        },
        n_tracks,
        empty: n_tracks == 0,
        labels: labels.iter().map(ToString::to_string).collect(),
        confusion,
        per_actor,
    })
}

/// Plain-text summary: accuracy, per-label recall and the confusion matrix.
pub fn format_report(report: &EvalReport) -> String {
    let mut out = String::new();
    if report.empty {
        let _ = writeln!(out, "no tracks to score");
        return out;
    }
    let _ = writeln!(
        out,
        "accuracy {:.4} over {} tracks",
        report.overall_accuracy, report.n_tracks
    );
    let width = report
        .labels
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(5)
        .max(6);
    let _ = writeln!(out, "{:<width$} {:>8} {:>7}", "label", "tracks", "recall");
    for l in &report.labels {
        let b = &report.per_actor[l];
        let recall = b.recall.map_or("-".to_string(), |r| format!("{r:.4}"));
        let _ = writeln!(out, "{l:<width$} {:>8} {recall:>7}", b.track_count);
    }
    let _ = writeln!(out, "confusion (rows = truth, columns = predicted)");
    let _ = write!(out, "{:<width$}", "");
    for l in &report.labels {
        let _ = write!(out, " {l:>width$}");
    }
    let _ = writeln!(out);
    for (l, row) in report.labels.iter().zip(&report.confusion) {
        let _ = write!(out, "{l:<width$}");
        for v in row {
            let _ = write!(out, " {v:>width$}");
        }
        let _ = writeln!(out);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResult {
    /// Prefix length in seconds.
    pub length: f64,
    pub report: EvalReport,
}

/// Tracks whose first frame lies in `[0, length · fps)`.
pub fn tracks_in_prefix(tracks: &[Track], length: f64, fps: f64) -> Vec<Track> {
    let limit = length * fps;
    tracks
        .iter()
        .filter(|t| (t.first_frame() as f64) < limit)
        .cloned()
        .collect()
}

/// Runs the configured method on growing prefixes of the video.
pub fn segment_sweep(
    tracks: &[Track],
    clouds: &[ActorCloud],
    cfg: &LabelerConfig,
    gt: &BTreeMap<u64, Label>,
    fps: f64,
    lengths: &[f64],
) -> Result<Vec<SegmentResult>> {
    if !(fps > 0.0) {
        return Err(Error::InvalidConfig("fps must be positive".into()));
    }
    lengths
        .iter()
        .map(|&length| {
            if !(length >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "segment length {length} must be non-negative"
                )));
            }
            let subset = tracks_in_prefix(tracks, length, fps);
            let labeling = label_tracks(&subset, clouds, cfg)?;
            let sub_gt = subset
                .iter()
                .map(|t| {
                    gt.get(&t.id)
                        .map(|l| (t.id, l.clone()))
                        .ok_or_else(|| Error::KeyMismatch {
                            missing: vec![],
                            extra: vec![t.id],
                        })
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(SegmentResult {
                length,
                report: score(&labeling, &sub_gt)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn a(name: &str) -> Label {
        Label::actor(name)
    }

    #[test]
    fn perfect_prediction() {
        let gt: BTreeMap<u64, Label> = [(0, a("x")), (1, a("y")), (2, Label::SideActor)].into();
        let r = score_labels(&gt, &gt).unwrap();
        assert_eq!(r.overall_accuracy, 1.0);
        assert_eq!(r.labels, vec!["x", "y", "SIDE_ACTOR"]);
        assert_eq!(r.per_actor["x"].recall, Some(1.0));
    }

    #[test]
    fn all_side_actor_predictions() {
        let gt: BTreeMap<u64, Label> = [(0, a("x")), (1, a("y"))].into();
        let pred: BTreeMap<u64, Label> = [(0, Label::SideActor), (1, Label::SideActor)].into();
        let r = score_labels(&pred, &gt).unwrap();
        assert_eq!(r.overall_accuracy, 0.0);
        assert_eq!(r.per_actor["SIDE_ACTOR"].recall, None);
        assert_eq!(r.confusion[0][2], 1);
        assert_eq!(r.confusion[1][2], 1);
    }

    #[test]
    fn side_actor_row_always_present() {
        let gt: BTreeMap<u64, Label> = [(0, a("x"))].into();
        let r = score_labels(&gt, &gt).unwrap();
        assert_eq!(r.labels.last().unwrap(), "SIDE_ACTOR");
        assert_eq!(r.confusion.len(), 2);
    }

    #[test]
    fn key_mismatch_lists_ids() {
        let gt: BTreeMap<u64, Label> = [(0, a("x")), (1, a("x"))].into();
        let pred: BTreeMap<u64, Label> = [(1, a("x")), (5, a("x"))].into();
        match score_labels(&pred, &gt) {
            Err(Error::KeyMismatch { missing, extra }) => {
                assert_eq!(missing, vec![0]);
                assert_eq!(extra, vec![5]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn random_labels_match_hand_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pool = [a("p"), a("q"), a("r"), Label::SideActor];
        let mut gt = BTreeMap::new();
        let mut pred = BTreeMap::new();
        for id in 0..200u64 {
            gt.insert(id, pool[rng.random_range(0..4)].clone());
            pred.insert(id, pool[rng.random_range(0..4)].clone());
        }
        let mut hits = 0;
        for id in 0..200u64 {
            if gt[&id] == pred[&id] {
                hits += 1;
            }
        }
        let r = score_labels(&pred, &gt).unwrap();
        assert_eq!(r.overall_accuracy, hits as f64 / 200.0);
        let total: usize = r.confusion.iter().flatten().sum();
        assert_eq!(total, 200);
        let diag: usize = (0..r.labels.len()).map(|i| r.confusion[i][i]).sum();
        assert_eq!(diag, hits);
        for (i, l) in r.labels.iter().enumerate() {
            let truth = gt.values().filter(|g| g.to_string() == *l).count();
            assert_eq!(r.confusion[i].iter().sum::<usize>(), truth);
        }
    }

    #[test]
    fn empty_report() {
        let r = score_labels(&BTreeMap::new(), &BTreeMap::new()).unwrap();
        assert!(r.empty);
        assert_eq!(r.n_tracks, 0);
        assert!(format_report(&r).contains("no tracks"));
    }

    #[test]
    fn table_mentions_every_label() {
        let gt: BTreeMap<u64, Label> = [(0, a("alice")), (1, Label::SideActor)].into();
        let text = format_report(&score_labels(&gt, &gt).unwrap());
        assert!(text.contains("alice"));
        assert!(text.contains("SIDE_ACTOR"));
        assert!(text.contains("accuracy 1.0000"));
    }
}
