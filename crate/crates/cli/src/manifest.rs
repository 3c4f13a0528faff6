//! Corpus persistence: WAV files plus a `manifest.txt` with one
//! `sample_id,speaker,split` line per utterance.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use surreptix_core::synth::Dataset;

use crate::wav;

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Write every utterance as `<sample_id>.wav` plus the manifest.
pub fn save_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = String::from("sample_id,speaker,split\n");
    for (idx, (wave, label)) in data.samples.iter().enumerate() {
        let split = if data.train.contains(&idx) { "train" } else { "test" };
        manifest.push_str(&format!("{idx},{label},{split}\n"));
        wav::write_wav(&dir.join(format!("{idx}.wav")), wave)?;
    }
    fs::write(dir.join(MANIFEST_NAME), manifest)
        .with_context(|| format!("writing manifest in {}", dir.display()))
}

/// Load a corpus directory produced by [`save_dataset`] (or any conforming
/// manifest + 16 kHz mono WAV layout).
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(dir.join(MANIFEST_NAME))
        .with_context(|| format!("reading manifest in {}", dir.display()))?;
    let mut samples = Vec::new();
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut max_label = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 && line.starts_with("sample_id") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            bail!("manifest line {} is malformed: `{line}`", lineno + 1);
        }
        let id: usize = parts[0].trim().parse().context("sample_id")?;
        let label: usize = parts[1].trim().parse().context("speaker")?;
        let split = parts[2].trim();
        let wave = wav::read_wav(&dir.join(format!("{id}.wav")))?;
        let idx = samples.len();
        samples.push((wave, label));
        match split {
            "train" => train.push(idx),
            "test" => test.push(idx),
            other => bail!("manifest line {}: unknown split `{other}`", lineno + 1),
        }
        max_label = max_label.max(label);
    }
    if samples.is_empty() {
        bail!("manifest in {} lists no samples", dir.display());
    }
    Ok(Dataset { samples, train, test, n_speakers: max_label + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use surreptix_core::synth::generate_corpus;

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let data = generate_corpus(3, 5, 0.5, 21).unwrap();
        save_dataset(dir.path(), &data).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.samples.len(), data.samples.len());
        assert_eq!(back.train, data.train);
        assert_eq!(back.test, data.test);
        assert_eq!(back.n_speakers, 3);
        // samples survive the 16-bit grid round trip
        for ((a, la), (b, lb)) in back.samples.iter().zip(data.samples.iter()) {
            assert_eq!(la, lb);
            for (x, y) in a.samples.iter().zip(b.samples.iter()) {
                assert!((x - y).abs() <= (2.0f64).powi(-15));
            }
        }
    }
}
