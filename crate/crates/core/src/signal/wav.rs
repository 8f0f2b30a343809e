use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioBuffer;
use crate::error::{Error, Result};

fn wav_err(path: &Path) -> impl FnOnce(hound::Error) -> Error + '_ {
    move |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads 16/24/32-bit PCM or 32-bit float WAV; multichannel input is averaged
/// down to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(wav_err(path))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err(path))?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err(path))?
        }
    };
    if channels > 1 {
        log::warn!("{}: downmixing {channels} channels to mono", path.display());
    }
    let mono = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    AudioBuffer::new(mono, spec.sample_rate)
}

/// Writes mono float32 WAV via a temporary file and rename.
pub fn write_wav_f32(path: impl AsRef<Path>, samples: &[f32], sample_rate: u32) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    write_atomic(path.as_ref(), spec, |w| {
        samples.iter().try_for_each(|&s| w.write_sample(s))
    })
}

/// Writes mono 16-bit PCM WAV, clipping to full scale.
pub fn write_wav_pcm16(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    write_atomic(path.as_ref(), spec, |w| {
        audio
            .samples()
            .iter()
            .try_for_each(|&s| w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16))
    })
}

pub fn write_audio_f32(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let samples: Vec<f32> = audio.samples().iter().map(|&s| s as f32).collect();
    write_wav_f32(path, &samples, audio.sample_rate())
}

fn write_atomic(
    path: &Path,
    spec: WavSpec,
    body: impl FnOnce(&mut WavWriter<std::io::BufWriter<std::fs::File>>) -> hound::Result<()>,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let tmp = path.with_extension("wav.tmp");
    let mut writer = WavWriter::create(&tmp, spec).map_err(wav_err(&tmp))?;
    body(&mut writer).map_err(wav_err(&tmp))?;
    writer.finalize().map_err(wav_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
