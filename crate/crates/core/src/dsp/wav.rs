//! Minimal RIFF/WAVE reader and writer for 16-bit mono PCM.

use std::fs;
use std::path::Path;

use super::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub format_code: u16,
    pub channels: u16,
    pub sample_rate: u32,
    pub bits_per_sample: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_wav_bytes(&bytes).map(|(audio, _)| audio)
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<(AudioBuffer, WavInfo)> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Wav("missing RIFF/WAVE header".into()));
    }
    let mut info: Option<WavInfo> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start.saturating_add(size).min(bytes.len());
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::Wav("fmt chunk shorter than 16 bytes".into()));
                }
                info = Some(WavInfo {
                    format_code: u16_at(body, 0),
                    channels: u16_at(body, 2),
                    sample_rate: u32_at(body, 4),
                    bits_per_sample: u16_at(body, 14),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_start.saturating_add(size + (size & 1));
    }
    let info = info.ok_or_else(|| Error::Wav("no fmt chunk".into()))?;
    if info.format_code != 1 {
        return Err(Error::Wav(format!(
            "format code {} is not supported (only PCM, format code 1)",
            info.format_code
        )));
    }
    if info.channels != 1 {
        return Err(Error::Wav(format!(
            "{} channels; only mono is supported",
            info.channels
        )));
    }
    if info.bits_per_sample != 16 {
        return Err(Error::Wav(format!(
            "{} bits per sample; only 16-bit is supported",
            info.bits_per_sample
        )));
    }
    if info.sample_rate == 0 {
        return Err(Error::Wav("sample rate is zero".into()));
    }
    let data = data.ok_or_else(|| Error::Wav("no data chunk".into()))?;
    let pcm: Vec<i16> = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok((AudioBuffer::from_pcm_i16(&pcm, info.sample_rate)?, info))
}

pub fn encode_wav(pcm: &[i16], sample_rate: u32) -> Vec<u8> {
    let data_len = (pcm.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + pcm.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in pcm {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, pcm: &[i16], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(pcm, sample_rate)).map_err(|e| Error::io(path, e))
}
