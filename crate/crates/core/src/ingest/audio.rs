//! PCM16 audio input and the energy-ratio voice activity detector.

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::model::{EntityRole, Millis, VoiceSegment};

pub const SUPPORTED_SAMPLE_RATES: [u32; 4] = [8000, 16000, 32000, 48000];

const NOISE_FLOOR_EPSILON: f64 = 1e-6;
const NOISE_FLOOR_PERCENTILE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioFrameStream {
    pub entity: EntityRole,
    pub sample_rate_hz: u32,
    pub samples: Vec<i16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VadParams {
    pub frame_ms: u32,
    pub energy_ratio_threshold: f64,
    pub min_segment_ms: u32,
    pub merge_gap_ms: u32,
}

impl Default for VadParams {
    fn default() -> Self {
        VadParams {
            frame_ms: 30,
            energy_ratio_threshold: 4.0,
            min_segment_ms: 200,
            merge_gap_ms: 300,
        }
    }
}

/// Reads a mono PCM16 WAV file.
pub fn parse_wav(entity: EntityRole, bytes: &[u8]) -> Result<AudioFrameStream, IngestError> {
    let reader = hound::WavReader::new(std::io::Cursor::new(bytes))
        .map_err(|e| IngestError::UnsupportedAudio(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
    {
        return Err(IngestError::UnsupportedAudio(format!(
            "expected PCM16 mono, got {} channel(s) of {}-bit {:?}",
            spec.channels, spec.bits_per_sample, spec.sample_format
        )));
    }
    if !SUPPORTED_SAMPLE_RATES.contains(&spec.sample_rate) {
        return Err(IngestError::UnsupportedAudio(format!(
            "sample rate {} Hz",
            spec.sample_rate
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| IngestError::UnsupportedAudio(e.to_string()))?;
    Ok(AudioFrameStream {
        entity,
        sample_rate_hz: spec.sample_rate,
        samples,
    })
}

/// Frame RMS energies; the trailing partial frame is dropped.
pub(crate) fn frame_rms(audio: &AudioFrameStream, frame_ms: u32) -> Vec<f64> {
    let frame_len = (audio.sample_rate_hz as usize * frame_ms as usize) / 1000;
    if frame_len == 0 {
        return Vec::new();
    }
    audio
        .samples
        .chunks_exact(frame_len)
        .map(|frame| {
            let sum_sq: f64 = frame.iter().map(|&s| (s as f64) * (s as f64)).sum();
            (sum_sq / frame_len as f64).sqrt()
        })
        .collect()
}

/// A frame is voiced when its RMS exceeds `energy_ratio_threshold` times the
/// stream's noise floor (10th percentile of frame RMS). Voiced runs closer
/// than `merge_gap_ms` are joined, then runs shorter than `min_segment_ms`
/// are discarded.
pub fn run_vad(
    audio: &AudioFrameStream,
    params: &VadParams,
) -> Result<Vec<VoiceSegment>, IngestError> {
    if audio.samples.is_empty() {
        return Err(IngestError::EmptyAudio);
    }
    if !SUPPORTED_SAMPLE_RATES.contains(&audio.sample_rate_hz) {
        return Err(IngestError::UnsupportedAudio(format!(
            "sample rate {} Hz",
            audio.sample_rate_hz
        )));
    }
    let rms = frame_rms(audio, params.frame_ms);
    if rms.is_empty() {
        return Ok(Vec::new());
    }

    let mut sorted = rms.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((NOISE_FLOOR_PERCENTILE * sorted.len() as f64).ceil() as usize).max(1) - 1;
    let floor = sorted[rank].max(NOISE_FLOOR_EPSILON);
    let threshold = params.energy_ratio_threshold * floor;

    let frame_ms = params.frame_ms as Millis;
    let mut runs: Vec<(Millis, Millis)> = Vec::new();
    for (i, energy) in rms.iter().enumerate() {
        if *energy <= threshold {
            continue;
        }
        let (from, to) = (i as Millis * frame_ms, (i as Millis + 1) * frame_ms);
        match runs.last_mut() {
            Some(last) if last.1 == from => last.1 = to,
            _ => runs.push((from, to)),
        }
    }

    let mut merged: Vec<(Millis, Millis)> = Vec::with_capacity(runs.len());
    for run in runs {
        match merged.last_mut() {
            Some(last) if run.0 - last.1 < params.merge_gap_ms as Millis => last.1 = run.1,
            _ => merged.push(run),
        }
    }

    Ok(merged
        .into_iter()
        .filter(|(from, to)| to - from >= params.min_segment_ms as Millis)
        .map(|(from_ms, to_ms)| VoiceSegment {
            entity: audio.entity,
            from_ms,
            to_ms,
        })
        .collect())
}
