//! Binary trace of one realization, so it can be re-analyzed without
//! re-simulation.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content                          |
//! |-------|----------------------------------|
//! | 8     | magic `SURFTRC1`                 |
//! | 4     | `u32` length `L` of the spec     |
//! | L     | distribution spec, UTF-8         |
//! | 8     | `u64` seed                       |
//! | 8     | `u64` horizon `n`                |
//! | 8 n   | `u64` steps `Z_1..Z_n`           |

use std::io::{Read, Write};

use crate::error::{Result, SurfError};
use crate::forest::Forest;

pub const MAGIC: &[u8; 8] = b"SURFTRC1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub spec: String,
    pub seed: u64,
    pub steps: Vec<u64>,
}

impl Trace {
    pub fn from_forest(spec: &str, seed: u64, forest: &Forest) -> Trace {
        Trace { spec: spec.to_string(), seed, steps: forest.steps().to_vec() }
    }

    pub fn horizon(&self) -> u64 {
        self.steps.len() as u64
    }

    pub fn to_forest(&self) -> Result<Forest> {
        Forest::from_steps(self.steps.clone())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let spec = self.spec.as_bytes();
        let len = u32::try_from(spec.len()).map_err(|_| SurfError::Trace("spec string too long".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(spec)?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.horizon().to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * 8192);
        for chunk in self.steps.chunks(8192) {
            buf.clear();
            for z in chunk {
                buf.extend_from_slice(&z.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Trace> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(SurfError::Trace("not a trace file (bad magic)".into()));
        }
        let mut word = [0u8; 4];
        read_exact(&mut r, &mut word, "spec length")?;
        let len = u32::from_le_bytes(word) as usize;
        let mut spec = vec![0u8; len];
        read_exact(&mut r, &mut spec, "spec")?;
        let spec = String::from_utf8(spec).map_err(|_| SurfError::Trace("spec is not UTF-8".into()))?;
        let seed = read_u64(&mut r, "seed")?;
        let n = read_u64(&mut r, "horizon")?;
        let mut steps = Vec::with_capacity(n.min(1 << 24) as usize);
        let mut buf = vec![0u8; 8 * 8192];
        let mut left = n;
        while left > 0 {
            let take = left.min(8192) as usize;
            read_exact(&mut r, &mut buf[..8 * take], "steps")?;
            for b in buf[..8 * take].chunks_exact(8) {
                let z = u64::from_le_bytes(b.try_into().unwrap());
                if z == 0 {
                    return Err(SurfError::Trace("step value 0 in trace".into()));
                }
                steps.push(z);
            }
            left -= take as u64;
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(SurfError::Trace("trailing bytes after the last step".into()));
        }
        Ok(Trace { spec, seed, steps })
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => SurfError::Trace(format!("truncated trace while reading {what}")),
        _ => SurfError::Io(e),
    })
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::make_dist;

    #[test]
    fn round_trip() {
        let d = make_dist("zipf:0.5").unwrap();
        let f = Forest::build(&d, 20_000, 9).unwrap();
        let t = Trace::from_forest("zipf:0.5", 9, &f);
        let mut bytes = Vec::new();
        t.write(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 8 + 8 + 8 + 8 * 20_000);
        let back = Trace::read(bytes.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_forest().unwrap(), f);
    }

    #[test]
    fn header_layout() {
        let t = Trace { spec: "const:1".into(), seed: 7, steps: vec![1, 1] };
        let mut bytes = Vec::new();
        t.write(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"SURFTRC1");
        assert_eq!(&bytes[8..12], &7u32.to_le_bytes());
        assert_eq!(&bytes[12..19], b"const:1");
        assert_eq!(&bytes[19..27], &7u64.to_le_bytes());
        assert_eq!(&bytes[27..35], &2u64.to_le_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let t = Trace { spec: "const:1".into(), seed: 7, steps: vec![1, 1] };
        let mut bytes = Vec::new();
        t.write(&mut bytes).unwrap();
        assert!(Trace::read(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Trace::read(extra.as_slice()).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Trace::read(bad.as_slice()).is_err());
        let mut zero = bytes;
        let last = zero.len() - 8;
        zero[last..].copy_from_slice(&0u64.to_le_bytes());
        assert!(Trace::read(zero.as_slice()).is_err());
    }
}
