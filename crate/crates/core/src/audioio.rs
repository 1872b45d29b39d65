//! Mono RIFF/WAVE reading and writing (16/24-bit PCM, 32-bit float).

use std::path::Path;

use crate::domain::AudioBuffer;
use crate::error::{Error, Result};
use crate::fsutil;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitFormat {
    Pcm16,
    Pcm24,
    Float32,
}

impl BitFormat {
    fn bytes_per_sample(self) -> usize {
        match self {
            BitFormat::Pcm16 => 2,
            BitFormat::Pcm24 => 3,
            BitFormat::Float32 => 4,
        }
    }

    fn format_tag(self) -> u16 {
        match self {
            BitFormat::Pcm16 | BitFormat::Pcm24 => FORMAT_PCM,
            BitFormat::Float32 => FORMAT_IEEE_FLOAT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WavSpec {
    pub sample_rate: u32,
    pub bit_format: BitFormat,
    pub channels: u16,
}

impl WavSpec {
    pub fn mono(sample_rate: u32, bit_format: BitFormat) -> Self {
        Self {
            sample_rate,
            bit_format,
            channels: 1,
        }
    }

    /// The pipeline works at 24 kHz and 48 kHz; other rates are readable
    /// but flagged.
    pub fn is_pipeline_rate(&self) -> bool {
        matches!(self.sample_rate, 24_000 | 48_000)
    }

    fn validate(&self) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::invalid(format!(
                "only mono audio is supported, got {} channels",
                self.channels
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        Ok(())
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<WavSpec> {
    if body.len() < 16 {
        return Err(Error::Format(format!(
            "fmt chunk is {} bytes, need 16",
            body.len()
        )));
    }
    let mut tag = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let block_align = u16_at(body, 12);
    let bits = u16_at(body, 14);
    if tag == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then the sub-format GUID,
        // whose first two bytes carry the real format tag.
        if body.len() < 26 {
            return Err(Error::Format(
                "WAVE_FORMAT_EXTENSIBLE fmt chunk too short".into(),
            ));
        }
        tag = u16_at(body, 24);
    }
    let bit_format = match (tag, bits) {
        (FORMAT_PCM, 16) => BitFormat::Pcm16,
        (FORMAT_PCM, 24) => BitFormat::Pcm24,
        (FORMAT_IEEE_FLOAT, 32) => BitFormat::Float32,
        _ => {
            return Err(Error::Format(format!(
                "unsupported sample format (tag {tag}, {bits} bits)"
            )))
        }
    };
    if channels != 1 {
        return Err(Error::invalid(format!(
            "only mono audio is supported, got {channels} channels"
        )));
    }
    if sample_rate == 0 {
        return Err(Error::Format("sample rate is 0".into()));
    }
    if block_align as usize != bit_format.bytes_per_sample() {
        return Err(Error::Format(format!(
            "block align {block_align} does not match {bits}-bit mono"
        )));
    }
    Ok(WavSpec {
        sample_rate,
        bit_format,
        channels,
    })
}

fn decode_samples(data: &[u8], format: BitFormat) -> Vec<f64> {
    match format {
        BitFormat::Pcm16 => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32_768.0)
            .collect(),
        BitFormat::Pcm24 => data
            .chunks_exact(3)
            .map(|c| {
                let v = i32::from_le_bytes([0, c[0], c[1], c[2]]) >> 8;
                v as f64 / 8_388_608.0
            })
            .collect(),
        BitFormat::Float32 => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
    }
}

/// Parses a complete WAV file image. Chunks other than `fmt ` and `data` are
/// skipped.
pub fn decode_wav(bytes: &[u8]) -> Result<(AudioBuffer, WavSpec)> {
    if bytes.len() < 12 {
        return Err(Error::Truncated {
            expected: 12,
            found: bytes.len() as u64,
        });
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("not a RIFF/WAVE file".into()));
    }

    let mut spec: Option<WavSpec> = None;
    let mut pos = 12usize;
    while pos < bytes.len() {
        if bytes.len() - pos < 8 {
            return Err(Error::Truncated {
                expected: (pos + 8) as u64,
                found: bytes.len() as u64,
            });
        }
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let available = bytes.len() - body_start;
        if size > available {
            return Err(Error::Truncated {
                expected: (body_start as u64) + size as u64,
                found: bytes.len() as u64,
            });
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => spec = Some(parse_fmt(body)?),
            b"data" => {
                let spec =
                    spec.ok_or_else(|| Error::Format("data chunk before fmt chunk".into()))?;
                let width = spec.bit_format.bytes_per_sample();
                if !size.is_multiple_of(width) {
                    return Err(Error::Truncated {
                        expected: (body_start + size.next_multiple_of(width)) as u64,
                        found: (body_start + size) as u64,
                    });
                }
                let samples = decode_samples(body, spec.bit_format);
                let buffer = AudioBuffer::new(samples, spec.sample_rate)
                    .map_err(|e| Error::Format(e.to_string()))?;
                return Ok((buffer, spec));
            }
            _ => {}
        }
        // Chunks are padded to even length.
        pos = body_start + size + (size & 1);
    }
    Err(Error::Format(
        if spec.is_some() {
            "missing data chunk"
        } else {
            "missing fmt chunk"
        }
        .into(),
    ))
}

/// Result of [`encode_wav`]: the file image and how many samples fell
/// outside [-1, 1] and were clamped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedWav {
    pub bytes: Vec<u8>,
    pub clamped: usize,
}

pub fn encode_wav(buffer: &AudioBuffer, spec: &WavSpec) -> Result<EncodedWav> {
    spec.validate()?;
    if spec.sample_rate != buffer.sample_rate() {
        return Err(Error::SampleRate {
            what: "wav spec vs buffer",
            expected: buffer.sample_rate(),
            found: spec.sample_rate,
        });
    }
    let width = spec.bit_format.bytes_per_sample();
    let data_len = buffer
        .len()
        .checked_mul(width)
        .filter(|&n| n <= (u32::MAX as usize) - 64)
        .ok_or_else(|| Error::invalid("audio too long for a RIFF file"))?;
    let is_float = spec.bit_format == BitFormat::Float32;
    let fmt_len: u32 = if is_float { 18 } else { 16 };
    let fact_len: u32 = if is_float { 12 } else { 0 };
    let riff_len = 4 + (8 + fmt_len) + fact_len + 8 + data_len as u32 + (data_len as u32 & 1);

    let mut out = Vec::with_capacity(riff_len as usize + 8);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_len.to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&fmt_len.to_le_bytes());
    out.extend_from_slice(&spec.bit_format.format_tag().to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&spec.sample_rate.to_le_bytes());
    out.extend_from_slice(&(spec.sample_rate * width as u32).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&(8 * width as u16).to_le_bytes());
    if is_float {
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(b"fact");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&(buffer.len() as u32).to_le_bytes());
    }

    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    let mut clamped = 0;
    for &s in buffer.samples() {
        let x = if (-1.0..=1.0).contains(&s) {
            s
        } else {
            clamped += 1;
            s.clamp(-1.0, 1.0)
        };
        match spec.bit_format {
            BitFormat::Pcm16 => {
                let v = (x * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            BitFormat::Pcm24 => {
                let v = (x * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32;
                out.extend_from_slice(&v.to_le_bytes()[..3]);
            }
            BitFormat::Float32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
        }
    }
    if data_len & 1 == 1 {
        out.push(0);
    }
    Ok(EncodedWav {
        bytes: out,
        clamped,
    })
}

pub fn read_wav(path: &Path) -> Result<(AudioBuffer, WavSpec)> {
    let (buffer, spec) = decode_wav(&fsutil::read_bytes(path)?)?;
    if !spec.is_pipeline_rate() {
        log::warn!(
            "{}: sample rate {} Hz is neither 24000 nor 48000",
            path.display(),
            spec.sample_rate
        );
    }
    Ok((buffer, spec))
}

/// Writes `buffer` and returns the number of clamped samples.
pub fn write_wav(path: &Path, buffer: &AudioBuffer, spec: &WavSpec) -> Result<usize> {
    let encoded = encode_wav(buffer, spec)?;
    fsutil::write_atomic(path, &encoded.bytes)?;
    Ok(encoded.clamped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn buf(samples: &[f64], sr: u32) -> AudioBuffer {
        AudioBuffer::new(samples.to_vec(), sr).unwrap()
    }

    #[test]
    fn pcm16_normalization() {
        // hand-built file: header + {0, 16384, -32768}
        let mut bytes = encode_wav(
            &buf(&[0.0; 3], 24_000),
            &WavSpec::mono(24_000, BitFormat::Pcm16),
        )
        .unwrap()
        .bytes;
        let data = bytes.len() - 6;
        bytes[data..].copy_from_slice(&[0, 0, 0x00, 0x40, 0x00, 0x80]);
        let (b, spec) = decode_wav(&bytes).unwrap();
        assert_eq!(b.samples(), &[0.0, 0.5, -1.0]);
        assert_eq!(spec.bit_format, BitFormat::Pcm16);
        assert_eq!(spec.sample_rate, 24_000);
    }

    #[test]
    fn canonical_pcm16_header() {
        let bytes = encode_wav(&buf(&[], 48_000), &WavSpec::mono(48_000, BitFormat::Pcm16))
            .unwrap()
            .bytes;
        assert_eq!(bytes.len(), 44);
        assert_eq!(&bytes[36..40], b"data");
        assert_eq!(&bytes[40..44], &[0, 0, 0, 0]);
        let (b, _) = decode_wav(&bytes).unwrap();
        assert!(b.is_empty());
    }

    #[test]
    fn clamp_counts() {
        let e = encode_wav(
            &buf(&[2.0, 0.5, -1.0], 24_000),
            &WavSpec::mono(24_000, BitFormat::Pcm16),
        )
        .unwrap();
        assert_eq!(e.clamped, 1);
        let (b, _) = decode_wav(&e.bytes).unwrap();
        assert_eq!(b.samples()[0], 32_767.0 / 32_768.0);
    }

    #[test]
    fn pcm24_values() {
        let e = encode_wav(
            &buf(&[0.5, -1.0, 1.0], 48_000),
            &WavSpec::mono(48_000, BitFormat::Pcm24),
        )
        .unwrap();
        assert_eq!(e.clamped, 0);
        let (b, _) = decode_wav(&e.bytes).unwrap();
        assert_eq!(b.samples(), &[0.5, -1.0, 8_388_607.0 / 8_388_608.0]);
        // odd data length is padded
        assert_eq!(e.bytes.len() % 2, 0);
    }

    #[test]
    fn skips_unknown_chunks() {
        let e = encode_wav(
            &buf(&[0.25], 24_000),
            &WavSpec::mono(24_000, BitFormat::Float32),
        )
        .unwrap();
        let mut bytes = e.bytes[..12].to_vec();
        bytes.extend_from_slice(b"LIST\x03\x00\x00\x00abc\x00");
        bytes.extend_from_slice(&e.bytes[12..]);
        let (b, _) = decode_wav(&bytes).unwrap();
        assert_eq!(b.samples(), &[0.25]);
    }

    #[test]
    fn structured_errors() {
        assert!(matches!(
            decode_wav(b"RIFX\0\0\0\0WAVE"),
            Err(Error::Format(_))
        ));
        assert!(matches!(decode_wav(b"RIFF"), Err(Error::Truncated { .. })));

        let e = encode_wav(
            &buf(&[0.1, 0.2], 24_000),
            &WavSpec::mono(24_000, BitFormat::Pcm16),
        )
        .unwrap();
        let truncated = &e.bytes[..e.bytes.len() - 1];
        assert!(matches!(
            decode_wav(truncated),
            Err(Error::Truncated { .. })
        ));

        let mut stereo = e.bytes.clone();
        stereo[22] = 2;
        assert!(matches!(decode_wav(&stereo), Err(Error::Invalid(_))));

        let no_data = &e.bytes[..36];
        assert!(matches!(decode_wav(no_data), Err(Error::Format(_))));
        let mut no_fmt = e.bytes[..12].to_vec();
        no_fmt.extend_from_slice(&e.bytes[36..]);
        assert!(matches!(decode_wav(&no_fmt), Err(Error::Format(_))));
    }

    #[test]
    fn extensible_float() {
        let e = encode_wav(
            &buf(&[0.75], 48_000),
            &WavSpec::mono(48_000, BitFormat::Float32),
        )
        .unwrap();
        // rewrite fmt as WAVE_FORMAT_EXTENSIBLE (40-byte body)
        let mut fmt = Vec::new();
        fmt.extend_from_slice(&FORMAT_EXTENSIBLE.to_le_bytes());
        fmt.extend_from_slice(&e.bytes[22..36]);
        fmt.extend_from_slice(&22u16.to_le_bytes());
        fmt.extend_from_slice(&32u16.to_le_bytes());
        fmt.extend_from_slice(&4u32.to_le_bytes());
        fmt.extend_from_slice(&FORMAT_IEEE_FLOAT.to_le_bytes());
        fmt.extend_from_slice(&[0; 14]);
        let mut bytes = b"RIFF\0\0\0\0WAVEfmt ".to_vec();
        bytes.extend_from_slice(&(fmt.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&fmt);
        bytes.extend_from_slice(b"data\x04\x00\x00\x00");
        bytes.extend_from_slice(&0.75f32.to_le_bytes());
        let (b, spec) = decode_wav(&bytes).unwrap();
        assert_eq!(spec.bit_format, BitFormat::Float32);
        assert_eq!(b.samples(), &[0.75]);
    }

    proptest! {
        #[test]
        fn float32_roundtrip_exact(samples in proptest::collection::vec(-1.0f32..=1.0, 0..500)) {
            let b = AudioBuffer::new(samples.iter().map(|&s| s as f64).collect(), 48_000).unwrap();
            let e = encode_wav(&b, &WavSpec::mono(48_000, BitFormat::Float32)).unwrap();
            prop_assert_eq!(e.clamped, 0);
            let (back, _) = decode_wav(&e.bytes).unwrap();
            prop_assert_eq!(back, b);
        }

        #[test]
        fn pcm_roundtrip_within_lsb(samples in proptest::collection::vec(-1.0f64..=1.0, 0..300), wide in any::<bool>()) {
            let (format, lsb) = if wide { (BitFormat::Pcm24, 1.0 / 8_388_608.0) } else { (BitFormat::Pcm16, 1.0 / 32_768.0) };
            let b = AudioBuffer::new(samples, 24_000).unwrap();
            let e = encode_wav(&b, &WavSpec::mono(24_000, format)).unwrap();
            let (back, _) = decode_wav(&e.bytes).unwrap();
            for (x, y) in b.samples().iter().zip(back.samples()) {
                prop_assert!((x - y).abs() <= lsb);
            }
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..128)) {
            let _ = decode_wav(&bytes);
        }
    }
}
