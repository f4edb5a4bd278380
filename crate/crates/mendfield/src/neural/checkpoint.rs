//! Versioned binary checkpoints: architectures, `f32` parameters, latent
//! code tables, optimizer state, and the training RNG position, so a run
//! can resume exactly where it stopped.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::neural::adam::AdamState;
use crate::neural::net::{Architecture, FeatureMask};

const MAGIC: &[u8; 8] = b"MENDCKPT";
const VERSION: u32 = 1;

/// A stopped training (or inference) state. Parameters and codes are held
/// as `f64` but stored as `f32`; optimizer moments keep full precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: u64,
    pub arch_c: Architecture,
    pub arch_b: Architecture,
    pub mask: FeatureMask,
    pub net_c: Vec<f64>,
    pub net_b: Vec<f64>,
    pub codes_c: Vec<Vec<f64>>,
    pub codes_b: Vec<Vec<f64>>,
    pub adam_net_c: AdamState,
    pub adam_net_b: AdamState,
    pub adam_codes_c: AdamState,
    pub adam_codes_b: AdamState,
    pub rng: RngSnapshot,
}

/// A ChaCha generator frozen mid-stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngSnapshot {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngSnapshot {
    pub fn capture(rng: &ChaCha20Rng) -> Self {
        RngSnapshot {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

impl Checkpoint {
    /// Fails with the stored vs expected shapes when this checkpoint was
    /// produced by differently shaped networks.
    pub fn expect_arch(&self, arch_c: &Architecture, arch_b: &Architecture) -> Result<()> {
        if self.arch_c != *arch_c || self.arch_b != *arch_b {
            return Err(Error::ArchitectureMismatch(format!(
                "checkpoint holds C {:?} / B {:?}, expected C {:?} / B {:?}",
                self.arch_c, self.arch_b, arch_c, arch_b
            )));
        }
        Ok(())
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Sink {
            out: BufWriter::new(file),
            path,
        };
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.u64(self.epoch)?;
        w.arch(&self.arch_c)?;
        w.arch(&self.arch_b)?;
        w.bytes(&[
            u8::from(self.mask.occ),
            u8::from(self.mask.sdf),
            u8::from(self.mask.nf),
        ])?;
        w.f32_vec(&self.net_c)?;
        w.f32_vec(&self.net_b)?;
        w.code_table(&self.codes_c)?;
        w.code_table(&self.codes_b)?;
        for adam in [
            &self.adam_net_c,
            &self.adam_net_b,
            &self.adam_codes_c,
            &self.adam_codes_b,
        ] {
            w.adam(adam)?;
        }
        w.bytes(&self.rng.seed)?;
        w.u64(self.rng.stream)?;
        w.bytes(&self.rng.word_pos.to_le_bytes())?;
        w.out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: &Path) -> Result<Checkpoint> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = Source {
            input: BufReader::new(file),
            path,
        };
        let mut magic = [0u8; 8];
        r.bytes(&mut magic)?;
        if &magic != MAGIC {
            return Err(r.parse_err(format!(
                "bad checkpoint magic {:?}",
                String::from_utf8_lossy(&magic)
            )));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.parse_err(format!(
                "unsupported checkpoint version {version} (expected {VERSION})"
            )));
        }
        let epoch = r.u64()?;
        let arch_c = r.arch()?;
        let arch_b = r.arch()?;
        let mut mask_bytes = [0u8; 3];
        r.bytes(&mut mask_bytes)?;
        let mask = FeatureMask {
            occ: mask_bytes[0] != 0,
            sdf: mask_bytes[1] != 0,
            nf: mask_bytes[2] != 0,
        };
        let net_c = r.f32_vec()?;
        let net_b = r.f32_vec()?;
        let codes_c = r.code_table()?;
        let codes_b = r.code_table()?;
        let adam_net_c = r.adam()?;
        let adam_net_b = r.adam()?;
        let adam_codes_c = r.adam()?;
        let adam_codes_b = r.adam()?;
        let mut seed = [0u8; 32];
        r.bytes(&mut seed)?;
        let stream = r.u64()?;
        let mut wp = [0u8; 16];
        r.bytes(&mut wp)?;
        let rng = RngSnapshot {
            seed,
            stream,
            word_pos: u128::from_le_bytes(wp),
        };

        let ckpt = Checkpoint {
            epoch,
            arch_c,
            arch_b,
            mask,
            net_c,
            net_b,
            codes_c,
            codes_b,
            adam_net_c,
            adam_net_b,
            adam_codes_c,
            adam_codes_b,
            rng,
        };
        ckpt.check_consistency()
            .map_err(|msg| Error::ArchitectureMismatch(msg))?;
        Ok(ckpt)
    }

    /// Stored vector lengths must match the declared architectures.
    fn check_consistency(&self) -> std::result::Result<(), String> {
        for (arch, net, codes, which) in [
            (&self.arch_c, &self.net_c, &self.codes_c, "complete"),
            (&self.arch_b, &self.net_b, &self.codes_b, "break"),
        ] {
            arch.validate().map_err(|e| e.to_string())?;
            if net.len() != arch.param_count() {
                return Err(format!(
                    "{which} network holds {} parameters, architecture wants {}",
                    net.len(),
                    arch.param_count()
                ));
            }
            if let Some(bad) = codes.iter().find(|c| c.len() != arch.code_dim) {
                return Err(format!(
                    "{which} code table entry of length {} does not match code_dim {}",
                    bad.len(),
                    arch.code_dim
                ));
            }
        }
        if self.codes_c.len() != self.codes_b.len() {
            return Err(format!(
                "code tables disagree on shape count: {} vs {}",
                self.codes_c.len(),
                self.codes_b.len()
            ));
        }
        Ok(())
    }
}

struct Sink<'a> {
    out: BufWriter<File>,
    path: &'a Path,
}

impl Sink<'_> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.out.write_all(b).map_err(|e| Error::io(self.path, e))
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn arch(&mut self, a: &Architecture) -> Result<()> {
        for v in [a.code_dim, a.hidden_width, a.depth, a.skip_layer] {
            self.u32(v as u32)?;
        }
        Ok(())
    }
    fn f32_vec(&mut self, v: &[f64]) -> Result<()> {
        self.u64(v.len() as u64)?;
        for &x in v {
            self.bytes(&(x as f32).to_le_bytes())?;
        }
        Ok(())
    }
    fn code_table(&mut self, codes: &[Vec<f64>]) -> Result<()> {
        self.u32(codes.len() as u32)?;
        self.u32(codes.first().map_or(0, |c| c.len()) as u32)?;
        for code in codes {
            for &x in code {
                self.bytes(&(x as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }
    fn adam(&mut self, a: &AdamState) -> Result<()> {
        self.f64(a.lr)?;
        self.u64(a.t)?;
        self.u64(a.m.len() as u64)?;
        for &x in &a.m {
            self.f64(x)?;
        }
        for &x in &a.v {
            self.f64(x)?;
        }
        Ok(())
    }
}

struct Source<'a> {
    input: BufReader<File>,
    path: &'a Path,
}

impl Source<'_> {
    fn parse_err(&self, msg: String) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: 0,
            msg,
        }
    }
    fn bytes(&mut self, b: &mut [u8]) -> Result<()> {
        self.input
            .read_exact(b)
            .map_err(|_| self.parse_err("checkpoint truncated".into()))
    }
    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn f32(&mut self) -> Result<f32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b)?;
        Ok(f32::from_le_bytes(b))
    }
    fn arch(&mut self) -> Result<Architecture> {
        Ok(Architecture {
            code_dim: self.u32()? as usize,
            hidden_width: self.u32()? as usize,
            depth: self.u32()? as usize,
            skip_layer: self.u32()? as usize,
        })
    }
    fn f32_vec(&mut self) -> Result<Vec<f64>> {
        let len = self.u64()? as usize;
        if len > (1 << 32) {
            return Err(self.parse_err(format!("implausible vector length {len}")));
        }
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            v.push(f64::from(self.f32()?));
        }
        Ok(v)
    }
    fn code_table(&mut self) -> Result<Vec<Vec<f64>>> {
        let count = self.u32()? as usize;
        let dim = self.u32()? as usize;
        let mut codes = Vec::with_capacity(count);
        for _ in 0..count {
            let mut c = Vec::with_capacity(dim);
            for _ in 0..dim {
                c.push(f64::from(self.f32()?));
            }
            codes.push(c);
        }
        Ok(codes)
    }
    fn adam(&mut self) -> Result<AdamState> {
        let lr = self.f64()?;
        let t = self.u64()?;
        let len = self.u64()? as usize;
        if len > (1 << 32) {
            return Err(self.parse_err(format!("implausible Adam length {len}")));
        }
        let mut m = Vec::with_capacity(len);
        for _ in 0..len {
            m.push(self.f64()?);
        }
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            v.push(self.f64()?);
        }
        Ok(AdamState { m, v, t, lr })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha20Rng;

    fn tiny_arch(code_dim: usize) -> Architecture {
        Architecture {
            code_dim,
            hidden_width: 8,
            depth: 3,
            skip_layer: 1,
        }
    }

    /// Values that survive the f32 narrowing unchanged.
    fn f32_exact(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| f64::from(rng.gen::<f32>() - 0.5)).collect()
    }

    fn sample_checkpoint() -> Checkpoint {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let arch_c = tiny_arch(4);
        let arch_b = tiny_arch(2);
        let nc = arch_c.param_count();
        let nb = arch_b.param_count();
        let mut training_rng = ChaCha20Rng::seed_from_u64(77);
        training_rng.set_stream(3);
        let _: u64 = training_rng.gen(); // advance mid-stream
        Checkpoint {
            epoch: 42,
            arch_c,
            arch_b,
            mask: FeatureMask::all(),
            net_c: f32_exact(&mut rng, nc),
            net_b: f32_exact(&mut rng, nb),
            codes_c: (0..3).map(|_| f32_exact(&mut rng, 4)).collect(),
            codes_b: (0..3).map(|_| f32_exact(&mut rng, 2)).collect(),
            adam_net_c: AdamState::new(nc, 5e-4),
            adam_net_b: AdamState::new(nb, 5e-4),
            adam_codes_c: AdamState::new(12, 1e-3),
            adam_codes_b: AdamState::new(6, 1e-3),
            rng: RngSnapshot::capture(&training_rng),
        }
    }

    #[test]
    fn round_trips_exactly() {
        let ckpt = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        ckpt.write_to(&path).unwrap();
        let back = Checkpoint::read_from(&path).unwrap();
        assert_eq!(ckpt, back);
    }

    #[test]
    fn rng_snapshot_resumes_the_stream() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        rng.set_stream(2);
        let _: [u64; 5] = rng.gen();
        let snap = RngSnapshot::capture(&rng);
        let expected: [u64; 4] = rng.gen();
        let mut resumed = snap.restore();
        let got: [u64; 4] = resumed.gen();
        assert_eq!(expected, got);
    }

    #[test]
    fn bad_magic_and_version_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTACKPT________").unwrap();
        assert!(matches!(
            Checkpoint::read_from(&path),
            Err(Error::Parse { .. })
        ));

        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&99u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = Checkpoint::read_from(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn truncated_files_are_rejected() {
        let ckpt = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        ckpt.write_to(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(Checkpoint::read_from(&path).is_err());
    }

    #[test]
    fn architecture_mismatch_is_rejected() {
        let ckpt = sample_checkpoint();
        let other = tiny_arch(7);
        let err = ckpt.expect_arch(&other, &ckpt.arch_b).unwrap_err();
        assert!(matches!(err, Error::ArchitectureMismatch(_)));
        assert!(ckpt.expect_arch(&ckpt.arch_c, &ckpt.arch_b).is_ok());
    }

    #[test]
    fn inconsistent_parameter_lengths_are_rejected() {
        let mut ckpt = sample_checkpoint();
        ckpt.net_c.pop();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        ckpt.write_to(&path).unwrap();
        let err = Checkpoint::read_from(&path).unwrap_err();
        assert!(matches!(err, Error::ArchitectureMismatch(_)), "{err}");
    }
}
