use std::io::Cursor;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioSample;
use crate::{Error, Result};

/// Decodes a RIFF/WAVE linear-PCM container (8, 16 or 24 bit, mono or stereo).
///
/// Stereo is averaged down to mono and integer samples are scaled by
/// `2^(bits - 1)`, so 16-bit full scale maps to `32767 / 32768`. The returned
/// sample carries a zero capture time and an empty device id.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioSample> {
    let mut reader = WavReader::new(Cursor::new(bytes)).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int {
        return Err(Error::UnsupportedEncoding("floating-point samples".into()));
    }
    if !matches!(spec.bits_per_sample, 8 | 16 | 24) {
        return Err(Error::UnsupportedEncoding(format!(
            "{}-bit samples",
            spec.bits_per_sample
        )));
    }
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedEncoding(format!("{channels} channels")));
    }
    if spec.sample_rate == 0 {
        return Err(Error::MalformedWav("zero sampling rate".into()));
    }

    let scale = (1u32 << (spec.bits_per_sample - 1)) as f64;
    let raw = reader
        .samples::<i32>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(map_hound)?;
    if raw.len() % channels != 0 {
        return Err(Error::MalformedWav("truncated sample frame".into()));
    }
    let pcm = raw
        .chunks_exact(channels)
        .map(|frame| frame.iter().map(|&v| v as f64 / scale).sum::<f64>() / channels as f64)
        .collect();
    AudioSample::new(pcm, spec.sample_rate, 0, "")
}

/// Encodes a sample as 16-bit mono PCM WAV.
pub fn encode_wav(sample: &AudioSample) -> Result<Vec<u8>> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: sample.fs(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut out = Cursor::new(Vec::with_capacity(44 + sample.len() * 2));
    {
        let mut writer = WavWriter::new(&mut out, spec).map_err(map_hound)?;
        let mut i16_writer = writer.get_i16_writer(sample.len() as u32);
        for &v in sample.pcm() {
            i16_writer.write_sample(quantize_i16(v));
        }
        i16_writer.flush().map_err(map_hound)?;
        writer.finalize().map_err(map_hound)?;
    }
    Ok(out.into_inner())
}

/// Nearest 16-bit code for an amplitude in `[-1, 1]`, saturating at `+32767`.
pub fn quantize_i16(v: f64) -> i16 {
    (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::Unsupported => Error::UnsupportedEncoding("non-PCM format".into()),
        hound::Error::FormatError(msg) => Error::MalformedWav(msg.into()),
        hound::Error::IoError(e) => Error::MalformedWav(e.to_string()),
        other => Error::MalformedWav(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(spec: WavSpec, samples: &[i32]) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        let mut w = WavWriter::new(&mut out, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        out.into_inner()
    }

    fn int_spec(channels: u16, bits: u16, fs: u32) -> WavSpec {
        WavSpec {
            channels,
            sample_rate: fs,
            bits_per_sample: bits,
            sample_format: SampleFormat::Int,
        }
    }

    #[test]
    fn zero_samples_decode_to_zero() {
        let bytes = wav_bytes(int_spec(1, 16, 44_100), &[0; 100]);
        let s = decode_wav(&bytes).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.pcm().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_scale_16_bit() {
        let bytes = wav_bytes(int_spec(1, 16, 44_100), &[32767, -32768]);
        let s = decode_wav(&bytes).unwrap();
        assert_eq!(s.pcm()[0], 32767.0 / 32768.0);
        assert_eq!(s.pcm()[1], -1.0);
    }

    #[test]
    fn three_second_fixture_length() {
        let bytes = wav_bytes(int_spec(1, 16, 44_100), &vec![5; 3 * 44_100]);
        let s = decode_wav(&bytes).unwrap();
        assert_eq!(s.len(), 132_300);
        assert_eq!(s.fs(), 44_100);
        assert_eq!(s.duration_ms(), 3000);
    }

    #[test]
    fn stereo_is_averaged() {
        let bytes = wav_bytes(int_spec(2, 16, 8_000), &[16384, 0, -16384, -16384]);
        let s = decode_wav(&bytes).unwrap();
        assert_eq!(s.pcm(), &[0.25, -0.5]);
    }

    #[test]
    fn eight_and_twenty_four_bit() {
        let s8 = decode_wav(&wav_bytes(int_spec(1, 8, 8_000), &[64, -128])).unwrap();
        assert_eq!(s8.pcm(), &[0.5, -1.0]);
        let s24 = decode_wav(&wav_bytes(int_spec(1, 24, 8_000), &[1 << 22])).unwrap();
        assert_eq!(s24.pcm(), &[0.5]);
    }

    #[test]
    fn float_wav_is_unsupported() {
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8_000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut out = Cursor::new(Vec::new());
        let mut w = WavWriter::new(&mut out, spec).unwrap();
        w.write_sample(0.5f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            decode_wav(&out.into_inner()),
            Err(Error::UnsupportedEncoding(_))
        ));
    }

    #[test]
    fn garbage_is_malformed() {
        assert!(matches!(
            decode_wav(b"RIFX not a wave file"),
            Err(Error::MalformedWav(_))
        ));
        assert!(matches!(decode_wav(&[]), Err(Error::MalformedWav(_))));
    }

    #[test]
    fn encode_round_trips_within_quantization() {
        let pcm: Vec<f64> = (0..500).map(|i| ((i as f64) * 0.01).sin() * 0.9).collect();
        let s = AudioSample::new(pcm.clone(), 16_000, 0, "").unwrap();
        let back = decode_wav(&encode_wav(&s).unwrap()).unwrap();
        assert_eq!(back.fs(), 16_000);
        for (a, b) in pcm.iter().zip(back.pcm()) {
            assert!((a - b).abs() <= 0.5 / 32768.0 + 1e-12);
        }
    }
}
