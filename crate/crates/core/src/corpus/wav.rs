//! 16-bit PCM WAV I/O on top of `hound`.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::CorpusError;
use crate::scalar::Scalar;

const FULL_SCALE: f64 = 32768.0;

fn classify(path: &Path, e: hound::Error) -> CorpusError {
    let path = path.to_path_buf();
    match e {
        // hound reports short reads as `Other`
        hound::Error::IoError(source)
            if matches!(source.kind(), std::io::ErrorKind::UnexpectedEof | std::io::ErrorKind::Other) =>
        {
            CorpusError::Format {
                path,
                msg: format!("file ends early: {source}"),
            }
        }
        hound::Error::IoError(source) => CorpusError::Io { path, source },
        hound::Error::FormatError(msg) => CorpusError::Format { path, msg: msg.into() },
        hound::Error::UnfinishedSample => CorpusError::Format {
            path,
            msg: "data chunk ends inside a sample".into(),
        },
        other => CorpusError::Unsupported {
            path,
            msg: other.to_string(),
        },
    }
}

/// Reads a 16-bit integer PCM file. Sample `v` maps to `v / 32768`; for
/// multi-channel files only channel 0 is kept.
pub fn load_wav<T: Scalar>(path: &Path) -> Result<(Vec<T>, u32), CorpusError> {
    if !path.exists() {
        return Err(CorpusError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    let mut reader = WavReader::open(path).map_err(|e| classify(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(CorpusError::Unsupported {
            path: path.to_path_buf(),
            msg: format!("{:?} {}-bit samples, expected 16-bit integer PCM", spec.sample_format, spec.bits_per_sample),
        });
    }
    let channels = usize::from(spec.channels.max(1));
    let expected = reader.len() as usize;
    let mut samples = Vec::with_capacity(expected / channels);
    let scale = T::lit(1.0 / FULL_SCALE);
    for (i, s) in reader.samples::<i16>().enumerate() {
        // the header parsed, so a read failure here means the data is short
        let v = s.map_err(|e| CorpusError::Format {
            path: path.to_path_buf(),
            msg: format!("data chunk unreadable: {e}"),
        })?;
        if i % channels == 0 {
            samples.push(T::lit(f64::from(v)) * scale);
        }
    }
    if samples.len() * channels < expected {
        return Err(CorpusError::Format {
            path: path.to_path_buf(),
            msg: format!("header announces {expected} samples, found {}", samples.len() * channels),
        });
    }
    Ok((samples, spec.sample_rate))
}

/// Writes mono 16-bit PCM, rounding `x · 32768` to the nearest integer and
/// saturating at the format limits.
pub fn write_wav<T: Scalar>(path: &Path, samples: &[T], sample_rate: u32) -> Result<(), CorpusError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec).map_err(|e| classify(path, e))?;
    for &s in samples {
        let v = (s.to_f64_lossy() * FULL_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(v).map_err(|e| classify(path, e))?;
    }
    w.finalize().map_err(|e| classify(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn pcm_file(dir: &Path, name: &str, values: &[i16], channels: u16) -> std::path::PathBuf {
        let path = dir.join(name);
        let spec = WavSpec {
            channels,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        for &v in values {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        path
    }

    #[test]
    fn integer_samples_are_scaled_by_full_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = pcm_file(dir.path(), "a.wav", &[16384, 0, -32768, 32767], 1);
        let (x, rate) = load_wav::<f64>(&path).unwrap();
        assert_eq!(rate, 16000);
        assert_eq!(x, vec![0.5, 0.0, -1.0, 32767.0 / 32768.0]);
    }

    #[test]
    fn first_channel_is_kept() {
        let dir = tempfile::tempdir().unwrap();
        let path = pcm_file(dir.path(), "st.wav", &[100, -5, 200, -5, 300, -5], 2);
        let (x, _) = load_wav::<f64>(&path).unwrap();
        assert_eq!(x.len(), 3);
        assert_eq!(x[2], 300.0 / 32768.0);
    }

    #[test]
    fn truncated_data_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = pcm_file(dir.path(), "t.wav", &[1; 100], 1);
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.wav");
        std::fs::File::create(&cut).unwrap().write_all(&bytes[..bytes.len() - 51]).unwrap();
        assert!(matches!(load_wav::<f64>(&cut), Err(CorpusError::Format { .. })), "{:?}", load_wav::<f64>(&cut));
        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"RIFF....WAVEnope").unwrap();
        assert!(matches!(load_wav::<f64>(&junk), Err(CorpusError::Format { .. })));
    }

    #[test]
    fn other_depths_are_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        w.write_sample(0.25f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_wav::<f64>(&path), Err(CorpusError::Unsupported { .. })));
    }
}
