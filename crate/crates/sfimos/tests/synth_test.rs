//! Synthetic dataset files: composition, determinism, readback.

use std::collections::BTreeMap;

use sfimos::manifest::{load_manifest, load_sidecar, resolve_wav_path};
use sfimos::synth::synth_dataset;
use sfimos::wav::read_wav;
use tempfile::tempdir;

#[test]
fn written_dataset_matches_track_composition_and_reads_back() {
    let dir = tempdir().unwrap();
    synth_dataset(dir.path(), 31).unwrap();

    let manifest_path = dir.path().join("manifest.csv");
    let records = load_manifest(&manifest_path).unwrap();
    assert_eq!(records.len(), 4_000);

    let mut utterances: BTreeMap<&str, u32> = BTreeMap::new();
    for r in &records {
        utterances.insert(&r.wav_path, r.sample_rate_hz);
    }
    assert_eq!(utterances.len(), 400);
    let mut by_rate: BTreeMap<u32, usize> = BTreeMap::new();
    for &rate in utterances.values() {
        *by_rate.entry(rate).or_default() += 1;
    }
    assert_eq!(by_rate[&16_000], 120);
    assert_eq!(by_rate[&24_000], 240);
    assert_eq!(by_rate[&48_000], 40);

    // every generated file reads back at its declared rate
    for (path, rate) in &utterances {
        let w = read_wav(resolve_wav_path(&manifest_path, path)).unwrap();
        assert_eq!(w.sample_rate_hz, *rate, "{path}");
        assert!(!w.is_empty());
    }

    let sidecar = load_sidecar(dir.path().join("systems.csv")).unwrap();
    assert_eq!(sidecar.len(), 20);
    assert!(sidecar.values().all(|&q| (1.0..=5.0).contains(&q)));
}
