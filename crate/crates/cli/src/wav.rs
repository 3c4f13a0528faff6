//! RIFF/WAVE reader and writer for the one format the lab speaks: PCM,
//! 16-bit little-endian, mono, 16 kHz. Anything else is rejected with an
//! error naming the offending field.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use surreptix_core::dsp::{Waveform, DEFAULT_SAMPLE_RATE};

const SCALE: f64 = 32768.0;

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decode a WAV file, insisting on 16-bit LPCM mono at 16 kHz.
pub fn decode(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        bail!("not a RIFF/WAVE file");
    }
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // tag, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4) as usize;
        let body_end = at + 8 + size;
        if body_end > bytes.len() {
            bail!("chunk {:?} overruns the file", core::str::from_utf8(id).unwrap_or("????"));
        }
        let body = &bytes[at + 8..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    bail!("fmt chunk too short ({size} bytes)");
                }
                fmt = Some((u16_at(body, 0), u16_at(body, 2), u32_at(body, 4), u16_at(body, 14)));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        at = body_end + (size & 1); // chunks are word-aligned
    }
    let (tag, channels, rate, bits) = fmt.context("missing fmt chunk")?;
    if tag != 1 {
        bail!("unsupported encoding tag {tag}; only PCM (1) is accepted");
    }
    if channels != 1 {
        bail!("unsupported channel count {channels}; only mono is accepted");
    }
    if bits != 16 {
        bail!("unsupported bit depth {bits}; only 16-bit is accepted");
    }
    if rate != DEFAULT_SAMPLE_RATE {
        bail!("unsupported sample rate {rate} Hz; only {DEFAULT_SAMPLE_RATE} Hz is accepted");
    }
    let data = data.context("missing data chunk")?;
    if data.is_empty() || data.len() % 2 != 0 {
        bail!("data chunk has invalid length {}", data.len());
    }
    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / SCALE)
        .collect();
    Ok(Waveform::new(samples, rate)?)
}

/// Encode a waveform as canonical 44-byte-header 16-bit PCM mono WAV.
pub fn encode(w: &Waveform) -> Vec<u8> {
    let n = w.samples.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&w.sample_rate.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &v in &w.samples {
        let q = (v * SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn read_wav(path: &Path) -> Result<Waveform> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    fs::write(path, encode(w)).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact_on_grid_values() {
        let samples: Vec<f64> = (-5i32..=5).map(|i| i as f64 * 100.0 / SCALE).collect();
        let w = Waveform::new(samples.clone(), DEFAULT_SAMPLE_RATE).unwrap();
        let bytes = encode(&w);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.samples, samples);
        // encode(decode(bytes)) must be byte-identical
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn rejects_foreign_formats() {
        let w = Waveform::new(vec![0.0; 32], DEFAULT_SAMPLE_RATE).unwrap();
        let mut bytes = encode(&w);
        bytes[22] = 2; // stereo
        let err = format!("{:#}", decode(&bytes).unwrap_err());
        assert!(err.contains("channel"), "{err}");

        let mut bytes = encode(&w);
        bytes[24..28].copy_from_slice(&8000u32.to_le_bytes());
        let err = format!("{:#}", decode(&bytes).unwrap_err());
        assert!(err.contains("sample rate"), "{err}");

        let mut bytes = encode(&w);
        bytes[34] = 8; // bit depth
        assert!(decode(&bytes).is_err());

        assert!(decode(b"not a wav").is_err());
    }

    #[test]
    fn skips_unknown_chunks() {
        let w = Waveform::new(vec![0.25; 16], DEFAULT_SAMPLE_RATE).unwrap();
        let canonical = encode(&w);
        // splice a LIST chunk between fmt and data
        let mut bytes = canonical[..36].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(b"INFO");
        bytes.extend_from_slice(&canonical[36..]);
        let riff_len = (bytes.len() - 8) as u32;
        bytes[4..8].copy_from_slice(&riff_len.to_le_bytes());
        let back = decode(&bytes).unwrap();
        assert_eq!(back.samples.len(), 16);
    }
}
