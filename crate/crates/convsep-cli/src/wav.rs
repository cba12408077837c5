//! RIFF/WAVE PCM 16-bit reading and writing. Stereo input is downmixed by
//! averaging; samples map to [-1, 1] by 1/32768 so the integer path is
//! lossless on round trips.

use crate::error::{CliError, Result};
use convsep::dsp::AudioSignal;
use std::fs;
use std::io::Write;
use std::path::Path;

const SCALE: f64 = 32768.0;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(CliError::data(format!(
                "truncated wav file while reading {what}"
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn tag(&mut self, what: &str) -> Result<[u8; 4]> {
        let s = self.take(4, what)?;
        Ok([s[0], s[1], s[2], s[3]])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let s = self.take(4, what)?;
        Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    }

    fn u16_at(bytes: &[u8], off: usize) -> u16 {
        u16::from_le_bytes([bytes[off], bytes[off + 1]])
    }
}

/// Loads a PCM 16-bit mono or stereo WAV file.
pub fn load_wav(path: &Path) -> Result<AudioSignal> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if &r.tag("RIFF header")? != b"RIFF" {
        return Err(CliError::data(format!(
            "{} is not a RIFF file",
            path.display()
        )));
    }
    r.u32("RIFF size")?;
    if &r.tag("WAVE tag")? != b"WAVE" {
        return Err(CliError::data(format!(
            "{} is not a WAVE file",
            path.display()
        )));
    }

    let mut format: Option<(u16, u16, u32, u16)> = None; // codec, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while r.pos < r.bytes.len() {
        let id = r.tag("chunk id")?;
        let size = r.u32("chunk size")? as usize;
        let body = r.take(size, &format!("'{}' chunk", String::from_utf8_lossy(&id)))?;
        match &id {
            b"fmt " => {
                if size < 16 {
                    return Err(CliError::data("'fmt ' chunk too small"));
                }
                format = Some((
                    Reader::u16_at(body, 0),
                    Reader::u16_at(body, 2),
                    u32::from_le_bytes([body[4], body[5], body[6], body[7]]),
                    Reader::u16_at(body, 14),
                ));
            }
            b"data" => data = Some(body),
            _ => {} // skip unknown chunks
        }
        if size % 2 == 1 && r.pos < r.bytes.len() {
            r.pos += 1; // chunks are word-aligned
        }
    }

    let (codec, channels, sample_rate, bits) =
        format.ok_or_else(|| CliError::data("missing 'fmt ' chunk"))?;
    if codec != 1 {
        return Err(CliError::data(format!(
            "unsupported encoding {codec} in 'fmt ' chunk (only PCM is supported)"
        )));
    }
    if bits != 16 {
        return Err(CliError::data(format!(
            "unsupported bit depth {bits} in 'fmt ' chunk (only 16-bit is supported)"
        )));
    }
    if channels == 0 || channels > 2 {
        return Err(CliError::data(format!(
            "unsupported channel count {channels} in 'fmt ' chunk"
        )));
    }
    let data = data.ok_or_else(|| CliError::data("missing 'data' chunk"))?;
    let bytes_per_frame = 2 * channels as usize;
    if data.len() % bytes_per_frame != 0 {
        return Err(CliError::data("truncated 'data' chunk"));
    }

    let frames = data.len() / bytes_per_frame;
    if frames == 0 {
        return Err(CliError::data("'data' chunk holds no samples"));
    }
    let mut samples = Vec::with_capacity(frames);
    for f in 0..frames {
        let mut acc = 0.0;
        for c in 0..channels as usize {
            let off = f * bytes_per_frame + 2 * c;
            let v = i16::from_le_bytes([data[off], data[off + 1]]);
            acc += v as f64 / SCALE;
        }
        samples.push(acc / channels as f64);
    }
    AudioSignal::new(samples, sample_rate).map_err(|e| CliError::data(e.to_string()))
}

/// Writes a mono PCM 16-bit WAV file; samples are clamped to [-1, 1).
pub fn write_wav(path: &Path, signal: &AudioSignal) -> Result<()> {
    let n = signal.len();
    let data_size = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_size).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&signal.sample_rate().to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_size.to_le_bytes());
    for &s in signal.samples() {
        let v = (s * SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))?;
    file.write_all(&out)?;
    Ok(())
}
