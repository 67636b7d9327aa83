//! On-disk formats: the "LVTS" binary container for trajectories and
//! homodyne records, and commented CSV tables.
//!
//! Binary layout (little-endian), 64-byte header then payload:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "LVTS"
//! 4       2     format version (u16) = 1
//! 6       2     channel count (u16)
//! 8       8     sample interval dt [s] (f64)
//! 16      8     sample count (u64)
//! 24      8     transduction gain / aux scale (f64, 0 when unused)
//! 32      8     seed (u64)
//! 40      24    reserved (zeros)
//! 64      -     f64 frames, channels interleaved per sample
//! ```

use crate::error::{Error, Result};
use crate::dynamics::Trajectory;
use crate::readout::HomodyneRecord;
use nalgebra::Vector3;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"LVTS";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 64;

/// Decoded container: interleaved frames plus header metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LvtsRecord {
    pub channels: u16,
    pub dt: f64,
    pub gain: f64,
    pub seed: u64,
    /// Interleaved samples, length = count * channels.
    pub data: Vec<f64>,
}

impl LvtsRecord {
    pub fn sample_count(&self) -> usize {
        self.data.len() / self.channels.max(1) as usize
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::Format("channel count must be >= 1".into()));
        }
        if self.data.len() % self.channels as usize != 0 {
            return Err(Error::Format("data length not a multiple of channels".into()));
        }
        let mut header = [0u8; HEADER_LEN];
        header[0..4].copy_from_slice(MAGIC);
        header[4..6].copy_from_slice(&VERSION.to_le_bytes());
        header[6..8].copy_from_slice(&self.channels.to_le_bytes());
        header[8..16].copy_from_slice(&self.dt.to_le_bytes());
        header[16..24].copy_from_slice(&(self.sample_count() as u64).to_le_bytes());
        header[24..32].copy_from_slice(&self.gain.to_le_bytes());
        header[32..40].copy_from_slice(&self.seed.to_le_bytes());
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        if &header[0..4] != MAGIC {
            return Err(Error::Format("bad magic (not an LVTS file)".into()));
        }
        let version = u16::from_le_bytes(header[4..6].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let channels = u16::from_le_bytes(header[6..8].try_into().unwrap());
        let dt = f64::from_le_bytes(header[8..16].try_into().unwrap());
        let count = u64::from_le_bytes(header[16..24].try_into().unwrap());
        let gain = f64::from_le_bytes(header[24..32].try_into().unwrap());
        let seed = u64::from_le_bytes(header[32..40].try_into().unwrap());
        let n = count as usize * channels as usize;
        let mut payload = vec![0u8; n * 8];
        r.read_exact(&mut payload)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(LvtsRecord {
            channels,
            dt,
            gain,
            seed,
            data,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        Self::read_from(&mut f)
    }
}

/// Trajectory as a 6-channel container (position xyz, velocity xyz).
pub fn trajectory_to_record(traj: &Trajectory) -> LvtsRecord {
    let mut data = Vec::with_capacity(traj.len() * 6);
    for (p, v) in traj.positions.iter().zip(&traj.velocities) {
        data.extend_from_slice(&[p.x, p.y, p.z, v.x, v.y, v.z]);
    }
    LvtsRecord {
        channels: 6,
        dt: traj.dt,
        gain: 0.0,
        seed: traj.seed,
        data,
    }
}

pub fn record_to_trajectory(rec: &LvtsRecord, config_hash: &str) -> Result<Trajectory> {
    if rec.channels != 6 {
        return Err(Error::Format(format!(
            "expected 6 channels for a trajectory, got {}",
            rec.channels
        )));
    }
    let mut positions = Vec::with_capacity(rec.sample_count());
    let mut velocities = Vec::with_capacity(rec.sample_count());
    for frame in rec.data.chunks_exact(6) {
        positions.push(Vector3::new(frame[0], frame[1], frame[2]));
        velocities.push(Vector3::new(frame[3], frame[4], frame[5]));
    }
    Ok(Trajectory {
        dt: rec.dt,
        positions,
        velocities,
        seed: rec.seed,
        config_hash: config_hash.to_string(),
        escaped: false,
    })
}

/// Homodyne record as a single-channel container; the header gain field
/// carries the transduction gain.
pub fn homodyne_to_record(rec: &HomodyneRecord) -> LvtsRecord {
    LvtsRecord {
        channels: 1,
        dt: rec.dt,
        gain: rec.transduction_gain,
        seed: rec.seed,
        data: rec.samples.clone(),
    }
}

pub fn record_to_homodyne(rec: &LvtsRecord) -> Result<HomodyneRecord> {
    if rec.channels != 1 {
        return Err(Error::Format(format!(
            "expected 1 channel for a homodyne record, got {}",
            rec.channels
        )));
    }
    Ok(HomodyneRecord {
        dt: rec.dt,
        samples: rec.data.clone(),
        transduction_gain: rec.gain,
        seed: rec.seed,
    })
}

/// CSV with '#'-prefixed metadata lines, '.' decimals, '\n' line ends.
pub fn write_csv(
    w: &mut impl Write,
    metadata: &[(&str, String)],
    columns: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    for (k, v) in metadata {
        writeln!(w, "# {k} = {v}")?;
    }
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn roundtrip_basic() {
        let rec = LvtsRecord {
            channels: 2,
            dt: 2e-8,
            gain: 1.5e6,
            seed: 42,
            data: vec![1.0, -2.0, 3.5, f64::MIN_POSITIVE],
        };
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 64 + 4 * 8);
        let back = LvtsRecord::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(rec, back);
    }

    #[test]
    fn bad_magic_rejected() {
        let mut buf = vec![0u8; 64];
        buf[0..4].copy_from_slice(b"NOPE");
        assert!(LvtsRecord::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let rec = LvtsRecord {
            channels: 3,
            dt: 1.0,
            gain: 0.0,
            seed: 0,
            data: vec![1.0, 2.0], // not a multiple of 3
        };
        assert!(rec.write_to(&mut Vec::new()).is_err());
    }

    #[test]
    fn csv_has_metadata_and_header() {
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            &[("config_hash", "abc123".to_string())],
            &["f_hz", "psd"],
            vec![vec![1.0, 2.0]].into_iter(),
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# config_hash = abc123\nf_hz,psd\n"));
        assert!(!text.contains('\r'));
    }

    proptest! {
        #[test]
        fn roundtrip_any_payload(
            channels in 1u16..8,
            dt in 1e-12f64..1.0,
            gain in prop::num::f64::NORMAL,
            seed in any::<u64>(),
            frames in prop::collection::vec(prop::num::f64::ANY, 0..64),
        ) {
            let n = frames.len() - frames.len() % channels as usize;
            let rec = LvtsRecord {
                channels,
                dt,
                gain,
                seed,
                data: frames[..n].to_vec(),
            };
            let mut buf = Vec::new();
            rec.write_to(&mut buf).unwrap();
            let back = LvtsRecord::read_from(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(rec.channels, back.channels);
            prop_assert_eq!(rec.dt.to_bits(), back.dt.to_bits());
            prop_assert_eq!(rec.gain.to_bits(), back.gain.to_bits());
            prop_assert_eq!(rec.seed, back.seed);
            prop_assert_eq!(rec.data.len(), back.data.len());
            for (a, b) in rec.data.iter().zip(&back.data) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
