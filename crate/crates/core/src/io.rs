//! File formats and the pipeline configuration.
//!
//! Every format is UTF-8 and line oriented: JSON Lines for descriptors,
//! detections and tracks, CSV for labels and ground truth, pretty JSON for
//! reports. f64 values are written in shortest round-trip form, so a
//! save/load pair reproduces every value bitwise.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::descriptor::{l2_normalize, FaceDescriptor};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, SegmentResult};
use crate::labeler::{ActorCloud, Label, LabelEntry, LabelerConfig, Labeling};
use crate::profile::ProfileConfig;
use crate::synth::{ScenarioConfig, StreamConfig};
use crate::tracker::{BBox, Detection, FrameDetections, Track, TrackerConfig};

/// Default input and output locations; CLI flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub templates: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub tracks: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub detection_labels: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub profile_dump: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dim: usize,
    pub tracker: TrackerConfig,
    pub labeler: LabelerConfig,
    pub profile: ProfileConfig,
    /// Frames per second, used to turn sweep lengths into frame limits.
    pub fps: f64,
    /// Prefix lengths in seconds for the segment sweep.
    pub sweep_lengths: Vec<f64>,
    pub synth: ScenarioConfig,
    pub stream: StreamConfig,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dim: 64,
            tracker: TrackerConfig::default(),
            labeler: LabelerConfig::default(),
            profile: ProfileConfig::default(),
            fps: 25.0,
            sweep_lengths: vec![600.0, 1200.0, 1800.0, 2400.0],
            synth: ScenarioConfig::default(),
            stream: StreamConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be positive".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::InvalidConfig("fps must be positive".into()));
        }
        if self
            .sweep_lengths
            .iter()
            .any(|l| !(*l >= 0.0 && l.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "sweep_lengths must be finite and non-negative".into(),
            ));
        }
        if self.synth.dim != self.dim {
            return Err(Error::InvalidConfig(format!(
                "synth.dim {} differs from dim {}",
                self.synth.dim, self.dim
            )));
        }
        self.tracker.validate()?;
        self.labeler.validate()?;
        self.profile.validate()?;
        self.synth.validate()?;
        self.stream.validate(&self.synth)
    }

    /// Parses a config from JSON text, then applies `overrides`
    /// (dotted key, raw value) in order.
    pub fn from_json_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut value: Value = if text.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(text)
                .map_err(|e| Error::InvalidConfig(format!("config is not valid JSON: {e}")))?
        };
        if !value.is_object() {
            return Err(Error::InvalidConfig("config must be a JSON object".into()));
        }
        // A bare `dim` also sets the generator's dimension unless given.
        let dim = overrides
            .iter()
            .rev()
            .find(|(k, _)| k == "dim")
            .map(|(_, v)| parse_override_value(v))
            .or_else(|| value.get("dim").cloned());
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        if let Some(dim) = dim {
            let synth = value
                .as_object_mut()
                .expect("checked above")
                .entry("synth")
                .or_insert_with(|| Value::Object(Default::default()));
            if let Some(obj) = synth.as_object_mut() {
                obj.entry("dim").or_insert(dim);
            }
        }
        let mut cfg: PipelineConfig =
            serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.labeler.profile = cfg.profile.clone();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads the config file at `path` (or the defaults) and applies
    /// `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_json_str(&text, overrides)
    }
}

/// Values are parsed as JSON when possible, otherwise taken as strings, so
/// `-0.1`, `null`, `true` and `HCSL` all work unquoted.
pub fn parse_override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets `key` (dotted path such as `labeler.lambda`) inside `root`.
pub fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidConfig(format!(
            "malformed override key '{key}'"
        )));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("'{key}' does not name a config field")))?;
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| Error::InvalidConfig(format!("'{key}' does not name a config field")))?;
    obj.insert(
        parts[parts.len() - 1].to_string(),
        parse_override_value(raw),
    );
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Non-blank lines of a JSON Lines file, parsed into `T`, with their
/// 1-based line numbers.
fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e))?;
        out.push((i + 1, item));
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn expect_dim(dim: &mut Option<usize>, actual: usize) -> Result<()> {
    match *dim {
        Some(expected) if expected != actual => Err(Error::DimensionMismatch { expected, actual }),
        Some(_) => Ok(()),
        None => {
            *dim = Some(actual);
            Ok(())
        }
    }
}

fn check_finite(path: &Path, line: usize, what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::parse(
            path,
            line,
            format!("{what} contains non-finite values"),
        ))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateLine {
    descriptor: Vec<f64>,
}

/// Loads one cloud per `<actor>.jsonl` file in `dir`, in file-stem order.
/// Descriptors are L2-normalized unless already unit length.
pub fn load_templates(dir: &Path, dim: Option<usize>) -> Result<Vec<ActorCloud>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no <actor>.jsonl files in {}",
            dir.display()
        )));
    }

    let mut dim = dim;
    let mut clouds = Vec::with_capacity(files.len());
    for path in files {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::InvalidInput(format!("bad file name {}", path.display())))?
            .to_string();
        let mut faces = Vec::new();
        for (line, t) in read_jsonl::<TemplateLine>(&path)? {
            check_finite(&path, line, "descriptor", &t.descriptor)?;
            expect_dim(&mut dim, t.descriptor.len())?;
            faces.push(unit_descriptor(t.descriptor).map_err(|e| Error::parse(&path, line, e))?);
        }
        if faces.is_empty() {
            return Err(Error::EmptyActorFile { path });
        }
        clouds.push(ActorCloud::new(name, faces)?);
    }
    Ok(clouds)
}

fn unit_descriptor(v: Vec<f64>) -> Result<FaceDescriptor> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() < 1e-12 {
        Ok(FaceDescriptor::new(v))
    } else {
        l2_normalize(&v)
    }
}

/// Writes `<dir>/<actor>.jsonl` for every actor.
pub fn save_templates(dir: &Path, templates: &[(String, Vec<FaceDescriptor>)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, faces) in templates {
        let path = dir.join(format!("{name}.jsonl"));
        write_jsonl(
            &path,
            faces.iter().map(|f| TemplateLine {
                descriptor: f.as_slice().to_vec(),
            }),
        )?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionLine {
    frame: u64,
    bbox: [f64; 4],
    descriptor: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hist: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shot_boundary: Option<bool>,
}

/// Reads a detections file and groups consecutive lines by frame.
/// Detection indices follow line order.
pub fn load_detections(path: &Path, dim: Option<usize>) -> Result<Vec<FrameDetections>> {
    let mut dim = dim;
    let mut frames: Vec<FrameDetections> = Vec::new();
    for (index, (line, d)) in read_jsonl::<DetectionLine>(path)?.into_iter().enumerate() {
        if let Some(last) = frames.last() {
            if d.frame < last.frame {
                return Err(Error::parse(
                    path,
                    line,
                    format!("frame {} follows frame {}", d.frame, last.frame),
                ));
            }
        }
        let [x, y, w, h] = d.bbox;
        let bbox = BBox::new(x, y, w, h);
        if !bbox.is_valid() || !x.is_finite() || !y.is_finite() {
            return Err(Error::parse(
                path,
                line,
                "bbox must have positive width and height",
            ));
        }
        check_finite(path, line, "descriptor", &d.descriptor)?;
        if let Some(h) = &d.hist {
            check_finite(path, line, "hist", h)?;
        }
        expect_dim(&mut dim, d.descriptor.len())?;

        if frames.last().is_none_or(|f| f.frame != d.frame) {
            frames.push(FrameDetections {
                frame: d.frame,
                detections: Vec::new(),
                shot_boundary: None,
                hist: None,
            });
        }
        let frame = frames.last_mut().expect("pushed above");
        if frame.shot_boundary.is_none() {
            frame.shot_boundary = d.shot_boundary;
        }
        frame.detections.push(Detection {
            frame: d.frame,
            bbox,
            descriptor: FaceDescriptor::new(d.descriptor),
            hist: d.hist,
            index,
        });
    }
    Ok(frames)
}

/// Writes one line per detection. A frame's shot flag goes on its first
/// line; a frame-level histogram is used for detections without their own.
pub fn save_detections(path: &Path, frames: &[FrameDetections]) -> Result<()> {
    let lines = frames.iter().flat_map(|f| {
        f.detections
            .iter()
            .enumerate()
            .map(move |(k, d)| DetectionLine {
                frame: f.frame,
                bbox: [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h],
                descriptor: d.descriptor.as_slice().to_vec(),
                hist: d.hist.clone().or_else(|| f.hist.clone()),
                shot_boundary: if k == 0 { f.shot_boundary } else { None },
            })
    });
    write_jsonl(path, lines)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackLine {
    track_id: u64,
    frames: Vec<u64>,
    descriptors: Vec<Vec<f64>>,
}

pub fn load_tracks(path: &Path, dim: Option<usize>) -> Result<Vec<Track>> {
    let mut dim = dim;
    let mut seen = HashSet::new();
    let mut tracks = Vec::new();
    for (line, t) in read_jsonl::<TrackLine>(path)? {
        if !seen.insert(t.track_id) {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate track_id {}", t.track_id),
            ));
        }
        let mut faces = Vec::with_capacity(t.descriptors.len());
        for d in t.descriptors {
            check_finite(path, line, "descriptor", &d)?;
            expect_dim(&mut dim, d.len())?;
            faces.push(FaceDescriptor::new(d));
        }
        let track = Track::new(t.track_id, t.frames, faces).map_err(|e| match e {
            Error::DimensionMismatch { .. } => e,
            other => Error::parse(path, line, other),
        })?;
        tracks.push(track);
    }
    Ok(tracks)
}

pub fn save_tracks(path: &Path, tracks: &[Track]) -> Result<()> {
    write_jsonl(
        path,
        tracks.iter().map(|t| TrackLine {
            track_id: t.id,
            frames: t.frames.clone(),
            descriptors: t.faces.iter().map(|f| f.as_slice().to_vec()).collect(),
        }),
    )
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// Reads a CSV with the given header, handing each record and its line
/// number to `row`.
fn read_csv(
    path: &Path,
    header: &[&str],
    mut row: impl FnMut(usize, &csv::StringRecord) -> Result<()>,
) -> Result<()> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let found = r.headers().map_err(|e| csv_error(path, e))?;
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::parse(
            path,
            1,
            format!("expected header '{}'", header.join(",")),
        ));
    }
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        row(line, &rec)?;
    }
    Ok(())
}

fn field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    rec: &csv::StringRecord,
    i: usize,
    name: &str,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec
        .get(i)
        .ok_or_else(|| Error::parse(path, line, format!("missing {name}")))?;
    raw.parse()
        .map_err(|e| Error::parse(path, line, format!("bad {name} '{raw}': {e}")))
}

/// `track_id,label,cost,iteration`; iteration is empty for direct methods
/// and side actors.
pub fn save_labels(path: &Path, labeling: &Labeling) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| csv_error(path, e);
    w.write_record(["track_id", "label", "cost", "iteration"])
        .map_err(err)?;
    for (id, e) in &labeling.entries {
        let iteration = e.iteration.map(|i| i.to_string()).unwrap_or_default();
        w.write_record([
            id.to_string(),
            e.label.to_string(),
            e.cost.to_string(),
            iteration,
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a labels file. `iterations` is recovered as one past the largest
/// recorded iteration.
pub fn load_labels(path: &Path) -> Result<Labeling> {
    let mut labeling = Labeling::default();
    read_csv(
        path,
        &["track_id", "label", "cost", "iteration"],
        |line, rec| {
            let id: u64 = field(path, line, rec, 0, "track_id")?;
            let label: Label = field(path, line, rec, 1, "label")?;
            let cost: f64 = field(path, line, rec, 2, "cost")?;
            let iteration = match rec.get(3).unwrap_or("") {
                "" => None,
                _ => Some(field::<usize>(path, line, rec, 3, "iteration")?),
            };
            if let Some(i) = iteration {
                labeling.iterations = labeling.iterations.max(i + 1);
            }
            let entry = LabelEntry {
                label,
                cost,
                iteration,
            };
            if labeling.entries.insert(id, entry).is_some() {
                return Err(Error::parse(path, line, format!("duplicate track_id {id}")));
            }
            Ok(())
        },
    )?;
    Ok(labeling)
}

pub fn save_ground_truth(path: &Path, gt: &BTreeMap<u64, Label>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| csv_error(path, e);
    w.write_record(["track_id", "label"]).map_err(err)?;
    for (id, l) in gt {
        w.write_record([id.to_string(), l.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_ground_truth(path: &Path) -> Result<BTreeMap<u64, Label>> {
    let mut gt = BTreeMap::new();
    read_csv(path, &["track_id", "label"], |line, rec| {
        let id: u64 = field(path, line, rec, 0, "track_id")?;
        let label: Label = field(path, line, rec, 1, "label")?;
        if gt.insert(id, label).is_some() {
            return Err(Error::parse(path, line, format!("duplicate track_id {id}")));
        }
        Ok(())
    })?;
    Ok(gt)
}

/// `detection,label`: ground truth of every line of a detections file.
pub fn save_detection_labels(path: &Path, labels: &[Label]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| csv_error(path, e);
    w.write_record(["detection", "label"]).map_err(err)?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_detection_labels(path: &Path) -> Result<Vec<Label>> {
    let mut out = Vec::new();
    read_csv(path, &["detection", "label"], |line, rec| {
        let i: usize = field(path, line, rec, 0, "detection")?;
        if i != out.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected detection {}", out.len()),
            ));
        }
        out.push(field(path, line, rec, 1, "label")?);
        Ok(())
    })?;
    Ok(out)
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e))
}

pub fn save_report(path: &Path, report: &EvalReport) -> Result<()> {
    save_json(path, report)
}

pub fn load_report(path: &Path) -> Result<EvalReport> {
    load_json(path)
}

pub fn save_sweep(path: &Path, results: &[SegmentResult]) -> Result<()> {
    save_json(path, &results)
}

pub fn load_sweep(path: &Path) -> Result<Vec<SegmentResult>> {
    load_json(path)
}

/// Human-readable listing of every actor's clusters, sub-cluster sizes and
/// representative vectors.
pub fn format_profiles(clouds: &[ActorCloud], cfg: &ProfileConfig) -> String {
    let vec_text = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = String::new();
    for c in clouds {
        let Some(p) = c.profile() else {
            let _ = writeln!(out, "actor {} faces 0 clusters 0", c.name());
            continue;
        };
        let reps = p.representatives(cfg).len();
        let _ = writeln!(
            out,
            "actor {} faces {} clusters {} representatives {}",
            c.name(),
            p.len(),
            p.top_clusters().len(),
            reps
        );
        for (i, top) in p.top_clusters().iter().enumerate() {
            let kept = top.member_count() >= cfg.min_cluster_size;
            let _ = writeln!(
                out,
                "  cluster {i} members {} subclusters {}{}",
                top.member_count(),
                top.children().len(),
                if kept { "" } else { " outlier" }
            );
            for (j, sub) in top.children().iter().enumerate() {
                let _ = writeln!(out, "    sub {j} members {}", sub.member_count());
                if kept {
                    let _ = writeln!(out, "      representative {}", vec_text(sub.centroid()));
                }
            }
        }
    }
    out
}

pub fn save_profiles(path: &Path, clouds: &[ActorCloud], cfg: &ProfileConfig) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(format_profiles(clouds, cfg).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_values() {
        assert_eq!(parse_override_value("-0.1"), Value::from(-0.1));
        assert_eq!(parse_override_value("HCSL"), Value::from("HCSL"));
        assert_eq!(parse_override_value("null"), Value::Null);
        assert_eq!(parse_override_value("[1,2]"), serde_json::json!([1, 2]));
    }

    #[test]
    fn dotted_overrides_reach_nested_fields() {
        let cfg = PipelineConfig::from_json_str(
            r#"{"labeler": {"method": "HSL"}}"#,
            &[
                ("labeler.lambda".into(), "-0.25".into()),
                ("labeler.method".into(), "HCSL".into()),
                ("profile.theta_fine".into(), "0.2".into()),
                ("tracker.hist_metric".into(), "chi_square".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.labeler.lambda, Some(-0.25));
        assert_eq!(cfg.labeler.method, crate::labeler::Method::Hcsl);
        assert_eq!(cfg.labeler.profile.theta_fine, 0.2);
        assert_eq!(
            cfg.tracker.hist_metric,
            crate::tracker::HistMetric::ChiSquare
        );
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = PipelineConfig::from_json_str("{}", &[("labeler.lamda".into(), "1".into())]);
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
        assert!(PipelineConfig::from_json_str("{\"bogus\": 1}", &[]).is_err());
        assert!(PipelineConfig::from_json_str("[1]", &[]).is_err());
    }

    #[test]
    fn dim_propagates_to_generator() {
        let cfg = PipelineConfig::from_json_str("{\"dim\": 16}", &[]).unwrap();
        assert_eq!(cfg.synth.dim, 16);
        let cfg = PipelineConfig::from_json_str("{}", &[("dim".into(), "8".into())]).unwrap();
        assert_eq!(cfg.synth.dim, 8);
        assert!(PipelineConfig::from_json_str(r#"{"dim": 16, "synth": {"dim": 8}}"#, &[]).is_err());
    }

    #[test]
    fn euc_without_lambda_fails_validation() {
        let r = PipelineConfig::from_json_str(r#"{"labeler": {"edge_cost": "EUC"}}"#, &[]);
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
        let text = serde_json::to_string(&PipelineConfig::default()).unwrap();
        assert_eq!(
            PipelineConfig::from_json_str(&text, &[]).unwrap(),
            PipelineConfig::default()
        );
    }
}
