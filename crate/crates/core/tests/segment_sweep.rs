use std::collections::BTreeMap;

use castmatch::eval::{score, segment_sweep, tracks_in_prefix};
use castmatch::labeler::{label_tracks, LabelerConfig, Method};
use castmatch::synth::{generate, ScenarioConfig};

fn scenario() -> castmatch::synth::Scenario {
    generate(&ScenarioConfig {
        dim: 32,
        n_actors: 4,
        n_side: 1,
        tracks_per_actor: 12,
        tracks_per_side: 6,
        ..ScenarioConfig::default()
    })
    .unwrap()
}

const FPS: f64 = 25.0;

#[test]
fn full_length_equals_plain_run() {
    let sc = scenario();
    let clouds = sc.clouds().unwrap();
    let cfg = LabelerConfig::default();
    let end = sc.tracks.iter().map(|t| t.last_frame()).max().unwrap() as f64 / FPS + 1.0;
    let sweep = segment_sweep(&sc.tracks, &clouds, &cfg, &sc.ground_truth, FPS, &[end]).unwrap();
    let plain = score(
        &label_tracks(&sc.tracks, &clouds, &cfg).unwrap(),
        &sc.ground_truth,
    )
    .unwrap();
    assert_eq!(sweep[0].report, plain);
}

#[test]
fn zero_length_is_empty() {
    let sc = scenario();
    let sweep = segment_sweep(
        &sc.tracks,
        &sc.clouds().unwrap(),
        &LabelerConfig::default(),
        &sc.ground_truth,
        FPS,
        &[0.0],
    )
    .unwrap();
    assert!(sweep[0].report.empty);
    assert_eq!(sweep[0].report.n_tracks, 0);
}

#[test]
fn each_segment_equals_independent_run() {
    let sc = scenario();
    let clouds = sc.clouds().unwrap();
    let end = sc.tracks.iter().map(|t| t.last_frame()).max().unwrap() as f64 / FPS;
    let lengths = [end / 3.0, 2.0 * end / 3.0, end + 1.0];
    for method in [Method::Hsl, Method::Avg] {
        let cfg = LabelerConfig {
            method,
            ..LabelerConfig::default()
        };
        let sweep =
            segment_sweep(&sc.tracks, &clouds, &cfg, &sc.ground_truth, FPS, &lengths).unwrap();
        let mut sizes = Vec::new();
        for (result, &length) in sweep.iter().zip(&lengths) {
            let subset: Vec<_> = sc
                .tracks
                .iter()
                .filter(|t| (t.first_frame() as f64) < length * FPS)
                .cloned()
                .collect();
            assert_eq!(subset, tracks_in_prefix(&sc.tracks, length, FPS));
            let gt: BTreeMap<_, _> = subset
                .iter()
                .map(|t| (t.id, sc.ground_truth[&t.id].clone()))
                .collect();
            let want = score(&label_tracks(&subset, &clouds, &cfg).unwrap(), &gt).unwrap();
            assert_eq!(result.length, length);
            assert_eq!(result.report, want);
            sizes.push(result.report.n_tracks);
        }
        assert!(sizes[0] < sizes[1] && sizes[1] < sizes[2]);
        assert_eq!(sizes[2], sc.tracks.len());
    }
}

#[test]
fn invalid_sweep_inputs() {
    let sc = scenario();
    let clouds = sc.clouds().unwrap();
    let cfg = LabelerConfig::default();
    assert!(segment_sweep(&sc.tracks, &clouds, &cfg, &sc.ground_truth, 0.0, &[1.0]).is_err());
    assert!(segment_sweep(&sc.tracks, &clouds, &cfg, &sc.ground_truth, FPS, &[-1.0]).is_err());
    let mut partial = sc.ground_truth.clone();
    partial.remove(&0);
    assert!(segment_sweep(&sc.tracks, &clouds, &cfg, &partial, FPS, &[1e9]).is_err());
}
