//! Host-side companion to `surreptix-core`: WAV and container file formats,
//! corpus persistence, detector calibration, experiment sweeps and CSV
//! reporting.

pub mod calibrate;
pub mod manifest;
pub mod report;
pub mod spg;
pub mod srpx;
pub mod sweep;
pub mod wav;
