//! Byte-level persistence: framed, checksummed binary files and the
//! plain-text sweep trace format.
//!
//! Every binary artifact shares one frame: a 4-byte magic, a little-endian
//! `u16` format version, a reserved `u16`, a `u64` payload length, the
//! payload itself, and a trailing SHA-256 over everything before the digest.
//! Readers verify magic, version, length and digest before handing the
//! payload back, so truncation and corruption surface as typed errors
//! instead of garbage data.
//!
//! Sweep traces are text files with one `frequency_hz real imag` triple per
//! line, `#` comments and blank lines allowed; they exist so externally
//! measured sweeps can be fed to the same pipeline.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsp::FrequencySweep;
use crate::sim::SweepConfig;

/// Magic for dataset files.
pub const DATASET_MAGIC: [u8; 4] = *b"CIRD";
/// Magic for network checkpoint files.
pub const MODEL_MAGIC: [u8; 4] = *b"CIRM";
/// Magic for boosted-ensemble checkpoint files.
pub const GBT_MAGIC: [u8; 4] = *b"CIRG";
/// Current version of the binary frame layout.
pub const FORMAT_VERSION: u16 = 1;

const DIGEST_LEN: usize = 32;
const HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected:?}, got {got:?}")]
    BadMagic { expected: [u8; 4], got: [u8; 4] },
    #[error("unsupported format version {got} (supported: {supported})")]
    UnsupportedVersion { got: u16, supported: u16 },
    #[error("file truncated: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("checksum mismatch: file is corrupt")]
    ChecksumMismatch,
    #[error("malformed payload at byte {offset}: {what}")]
    Malformed { offset: usize, what: String },
    #[error("{path}:{line}: malformed trace line: {what}")]
    MalformedLine {
        path: String,
        line: usize,
        what: String,
    },
    #[error("{path}:{line}: frequency grid mismatch: expected {expected_hz} Hz, got {got_hz} Hz")]
    GridMismatch {
        path: String,
        line: usize,
        expected_hz: f64,
        got_hz: f64,
    },
    #[error("{path}: trace has {got} samples, sweep config expects {expected}")]
    TraceLength { path: String, got: usize, expected: usize },
}

/// Wraps `payload` in the magic/version/length/SHA-256 frame and writes it.
pub fn write_framed(path: &Path, magic: [u8; 4], payload: &[u8]) -> Result<(), IoError> {
    let mut buf = Vec::with_capacity(HEADER_LEN + payload.len() + DIGEST_LEN);
    buf.extend_from_slice(&magic);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    buf.extend_from_slice(payload);
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Reads a framed file, verifying magic, version, length and digest.
pub fn read_framed(path: &Path, magic: [u8; 4]) -> Result<Vec<u8>, IoError> {
    let bytes = fs::read(path)?;
    if bytes.len() < HEADER_LEN + DIGEST_LEN {
        return Err(IoError::Truncated {
            needed: HEADER_LEN + DIGEST_LEN,
            have: bytes.len(),
        });
    }
    let got_magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if got_magic != magic {
        return Err(IoError::BadMagic {
            expected: magic,
            got: got_magic,
        });
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(IoError::UnsupportedVersion {
            got: version,
            supported: FORMAT_VERSION,
        });
    }
    let payload_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let total = HEADER_LEN + payload_len + DIGEST_LEN;
    if bytes.len() != total {
        return Err(IoError::Truncated {
            needed: total,
            have: bytes.len(),
        });
    }
    let body = &bytes[..HEADER_LEN + payload_len];
    let digest = Sha256::digest(body);
    if digest.as_slice() != &bytes[HEADER_LEN + payload_len..] {
        return Err(IoError::ChecksumMismatch);
    }
    Ok(bytes[HEADER_LEN..HEADER_LEN + payload_len].to_vec())
}

/// Little-endian payload builder.
#[derive(Default)]
pub struct PayloadWriter {
    buf: Vec<u8>,
}

impl PayloadWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64_slice(&mut self, vs: &[f64]) {
        self.put_u64(vs.len() as u64);
        for &v in vs {
            self.put_f64(v);
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

/// Little-endian payload cursor; every read is bounds-checked.
pub struct PayloadReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        if self.pos + n > self.buf.len() {
            return Err(IoError::Malformed {
                offset: self.pos,
                what: format!("need {n} bytes, {} left", self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn get_u8(&mut self) -> Result<u8, IoError> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_u64(&mut self) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_f64(&mut self) -> Result<f64, IoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_f64_vec(&mut self) -> Result<Vec<f64>, IoError> {
        let n = self.get_u64()? as usize;
        if n > self.buf.len() / 8 + 1 {
            return Err(IoError::Malformed {
                offset: self.pos,
                what: format!("claimed slice length {n} exceeds payload"),
            });
        }
        let mut vs = Vec::with_capacity(n);
        for _ in 0..n {
            vs.push(self.get_f64()?);
        }
        Ok(vs)
    }

    /// Fails unless the whole payload was consumed.
    pub fn finish(self) -> Result<(), IoError> {
        if self.pos != self.buf.len() {
            return Err(IoError::Malformed {
                offset: self.pos,
                what: format!("{} trailing bytes", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }

    pub fn malformed(&self, what: impl Into<String>) -> IoError {
        IoError::Malformed {
            offset: self.pos,
            what: what.into(),
        }
    }
}

/// Writes one link's sweep as `frequency_hz real imag` lines.
///
/// Floats use shortest round-trip formatting, so an export/import cycle
/// reproduces the sweep bit-exactly.
pub fn export_sweep_trace(path: &Path, sweep: &FrequencySweep) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str("# frequency_hz real imag\n");
    for (i, s) in sweep.samples.iter().enumerate() {
        let f = sweep.cfg.frequency(i);
        out.push_str(&format!("{} {} {}\n", f, s.re, s.im));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parses one link's trace file, validating the grid against `cfg`.
///
/// Frequencies must be strictly increasing and match `cfg`'s grid to within
/// half a grid step of round-off. The sample count must equal
/// `cfg.num_points`.
pub fn import_sweep_trace(
    path: &Path,
    cfg: &SweepConfig,
    link_id: usize,
) -> Result<FrequencySweep, IoError> {
    let text = fs::read_to_string(path)?;
    let pstr = path.display().to_string();
    let mut samples = Vec::new();
    let mut prev_f = f64::NEG_INFINITY;
    let tol = cfg.frequency_step() * 0.5;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut field = |name: &str| -> Result<f64, IoError> {
            let tok = fields.next().ok_or_else(|| IoError::MalformedLine {
                path: pstr.clone(),
                line: lineno + 1,
                what: format!("missing {name}"),
            })?;
            tok.parse::<f64>().map_err(|_| IoError::MalformedLine {
                path: pstr.clone(),
                line: lineno + 1,
                what: format!("bad {name} {tok:?}"),
            })
        };
        let f = field("frequency_hz")?;
        let re = field("real")?;
        let im = field("imag")?;
        if fields.next().is_some() {
            return Err(IoError::MalformedLine {
                path: pstr,
                line: lineno + 1,
                what: "extra fields".into(),
            });
        }
        if !(f.is_finite() && f > prev_f) {
            return Err(IoError::GridMismatch {
                path: pstr,
                line: lineno + 1,
                expected_hz: prev_f,
                got_hz: f,
            });
        }
        let expected = cfg.frequency(samples.len().min(cfg.num_points.saturating_sub(1)));
        if (f - expected).abs() > tol {
            return Err(IoError::GridMismatch {
                path: pstr,
                line: lineno + 1,
                expected_hz: expected,
                got_hz: f,
            });
        }
        prev_f = f;
        samples.push(Complex64::new(re, im));
    }
    if samples.len() != cfg.num_points {
        return Err(IoError::TraceLength {
            path: pstr,
            got: samples.len(),
            expected: cfg.num_points,
        });
    }
    Ok(FrequencySweep {
        samples,
        cfg: cfg.clone(),
        link_id,
    })
}

/// Imports one trace file per link, assigning link ids in order.
pub fn import_sweep_traces(
    paths: &[impl AsRef<Path>],
    cfg: &SweepConfig,
) -> Result<Vec<FrequencySweep>, IoError> {
    paths
        .iter()
        .enumerate()
        .map(|(link, p)| import_sweep_trace(p.as_ref(), cfg, link))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("cirsense-io-tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn frame_round_trip() {
        let p = tmp("frame.bin");
        let payload = vec![1u8, 2, 3, 4, 5];
        write_framed(&p, DATASET_MAGIC, &payload).unwrap();
        assert_eq!(read_framed(&p, DATASET_MAGIC).unwrap(), payload);
    }

    #[test]
    fn empty_payload_round_trip() {
        let p = tmp("empty.bin");
        write_framed(&p, DATASET_MAGIC, &[]).unwrap();
        assert_eq!(read_framed(&p, DATASET_MAGIC).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn wrong_magic_rejected() {
        let p = tmp("magic.bin");
        write_framed(&p, DATASET_MAGIC, &[9]).unwrap();
        assert!(matches!(
            read_framed(&p, MODEL_MAGIC),
            Err(IoError::BadMagic { .. })
        ));
    }

    #[test]
    fn corrupt_byte_fails_checksum() {
        let p = tmp("corrupt.bin");
        write_framed(&p, DATASET_MAGIC, &[10, 20, 30]).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes[HEADER_LEN + 1] ^= 0xff;
        fs::write(&p, bytes).unwrap();
        assert!(matches!(
            read_framed(&p, DATASET_MAGIC),
            Err(IoError::ChecksumMismatch)
        ));
    }

    #[test]
    fn truncated_file_rejected() {
        let p = tmp("trunc.bin");
        write_framed(&p, DATASET_MAGIC, &[10, 20, 30]).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            read_framed(&p, DATASET_MAGIC),
            Err(IoError::Truncated { .. })
        ));
    }

    #[test]
    fn future_version_rejected() {
        let p = tmp("version.bin");
        write_framed(&p, DATASET_MAGIC, &[1]).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes[4] = 0xff;
        // re-seal so only the version check can fire
        let body_len = bytes.len() - DIGEST_LEN;
        let digest = Sha256::digest(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&digest);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(
            read_framed(&p, DATASET_MAGIC),
            Err(IoError::UnsupportedVersion { .. })
        ));
    }

    #[test]
    fn payload_reader_round_trip_and_overrun() {
        let mut w = PayloadWriter::new();
        w.put_u8(7);
        w.put_u32(1234);
        w.put_u64(u64::MAX);
        w.put_f64(-0.125);
        w.put_f64_slice(&[1.0, 2.5]);
        let bytes = w.into_bytes();
        let mut r = PayloadReader::new(&bytes);
        assert_eq!(r.get_u8().unwrap(), 7);
        assert_eq!(r.get_u32().unwrap(), 1234);
        assert_eq!(r.get_u64().unwrap(), u64::MAX);
        assert_eq!(r.get_f64().unwrap(), -0.125);
        assert_eq!(r.get_f64_vec().unwrap(), vec![1.0, 2.5]);
        assert!(r.finish().is_ok());

        let mut r = PayloadReader::new(&bytes[..3]);
        assert!(r.get_u64().is_err());
    }

    #[test]
    fn trailing_bytes_detected() {
        let mut w = PayloadWriter::new();
        w.put_u32(1);
        w.put_u8(2);
        let bytes = w.into_bytes();
        let mut r = PayloadReader::new(&bytes);
        r.get_u32().unwrap();
        assert!(matches!(r.finish(), Err(IoError::Malformed { .. })));
    }

    #[test]
    fn trace_round_trip_is_bit_exact() {
        use rand::Rng;
        let cfg = SweepConfig {
            num_points: 64,
            ..SweepConfig::default()
        };
        let mut rng = crate::seed::rng(99);
        let sweep = FrequencySweep {
            samples: (0..64)
                .map(|_| {
                    Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
                })
                .collect(),
            cfg: cfg.clone(),
            link_id: 2,
        };
        let p = tmp("trace.txt");
        export_sweep_trace(&p, &sweep).unwrap();
        let back = import_sweep_trace(&p, &cfg, 2).unwrap();
        assert_eq!(back.samples, sweep.samples);
        assert_eq!(back.link_id, 2);
    }

    #[test]
    fn three_line_trace_parses() {
        let cfg = SweepConfig {
            num_points: 3,
            ..SweepConfig::default()
        };
        let p = tmp("three.txt");
        let f0 = cfg.frequency(0);
        let f1 = cfg.frequency(1);
        let f2 = cfg.frequency(2);
        fs::write(
            &p,
            format!("# comment\n{f0} 1 0\n\n{f1} 0.5 -0.5  # inline\n{f2} 0 1\n"),
        )
        .unwrap();
        let sweep = import_sweep_trace(&p, &cfg, 0).unwrap();
        assert_eq!(sweep.samples.len(), 3);
        assert_eq!(sweep.samples[1], Complex64::new(0.5, -0.5));
    }

    #[test]
    fn non_monotone_frequencies_rejected() {
        let cfg = SweepConfig {
            num_points: 3,
            ..SweepConfig::default()
        };
        let p = tmp("mono.txt");
        let f0 = cfg.frequency(0);
        let f1 = cfg.frequency(1);
        fs::write(&p, format!("{f1} 1 0\n{f0} 1 0\n{f1} 1 0\n")).unwrap();
        assert!(matches!(
            import_sweep_trace(&p, &cfg, 0),
            Err(IoError::GridMismatch { .. })
        ));
    }

    #[test]
    fn malformed_line_reports_row() {
        let cfg = SweepConfig {
            num_points: 2,
            ..SweepConfig::default()
        };
        let p = tmp("bad.txt");
        fs::write(
            &p,
            format!("{} 1 0\n{} nope 0\n", cfg.frequency(0), cfg.frequency(1)),
        )
        .unwrap();
        match import_sweep_trace(&p, &cfg, 0) {
            Err(IoError::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected MalformedLine, got {other:?}"),
        }
    }

    #[test]
    fn wrong_grid_rejected() {
        let cfg = SweepConfig {
            num_points: 2,
            ..SweepConfig::default()
        };
        let p = tmp("offgrid.txt");
        fs::write(&p, "1e9 1 0\n2e9 1 0\n").unwrap();
        assert!(matches!(
            import_sweep_trace(&p, &cfg, 0),
            Err(IoError::GridMismatch { .. })
        ));
    }

    #[test]
    fn short_trace_rejected() {
        let cfg = SweepConfig {
            num_points: 5,
            ..SweepConfig::default()
        };
        let p = tmp("short.txt");
        fs::write(&p, format!("{} 1 0\n", cfg.frequency(0))).unwrap();
        assert!(matches!(
            import_sweep_trace(&p, &cfg, 0),
            Err(IoError::TraceLength { got: 1, expected: 5, .. })
        ));
    }
}
