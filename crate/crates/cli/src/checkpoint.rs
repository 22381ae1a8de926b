//! Versioned binary checkpoints: a fixed header, a shape manifest, then the
//! flat 64-bit little-endian parameter arrays in manifest order.
//!
//! Loading is self-describing — the manifest governs, not whatever config
//! the current process happens to hold — and rejects version, shape or
//! length mismatches without producing a partial result.

use std::fs;
use std::path::Path;

use crashcoach_core::learner::{LearnerDims, LearnerParams, MixerKind};
use crashcoach_core::rng::{substream, Stream};

use crate::{CliError, Result};

const MAGIC: &[u8; 8] = b"CCQ1CKPT";
const VERSION: u32 = 1;

pub fn save_checkpoint(params: &LearnerParams, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<LearnerParams> {
    decode_checkpoint(&fs::read(path)?)
}

pub fn encode_checkpoint(params: &LearnerParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());

    let d = &params.dims;
    for v in [
        d.obs_dim,
        d.n_agents,
        d.action_count,
        d.state_dim,
        d.hidden,
        d.embed,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.push(match d.mixer {
        MixerKind::VdnSum => 0,
        MixerKind::QmixMono => 1,
    });
    out.push(d.include_prev_action as u8);
    out.extend_from_slice(&[0u8; 2]);
    out.extend_from_slice(&params.gamma.to_le_bytes());
    out.extend_from_slice(&params.updates.to_le_bytes());

    let tensors = params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, data) in &tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(data.len() as u64).to_le_bytes());
    }
    for (_, data) in &tensors {
        for v in *data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(CliError::Checkpoint(format!(
                "truncated while reading {what}"
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<LearnerParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(CliError::Checkpoint("bad magic".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(CliError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }

    let obs_dim = r.u32("obs_dim")? as usize;
    let n_agents = r.u32("n_agents")? as usize;
    let action_count = r.u32("action_count")? as usize;
    let state_dim = r.u32("state_dim")? as usize;
    let hidden = r.u32("hidden")? as usize;
    let embed = r.u32("embed")? as usize;
    let mixer = match r.u8("mixer kind")? {
        0 => MixerKind::VdnSum,
        1 => MixerKind::QmixMono,
        other => {
            return Err(CliError::Checkpoint(format!("unknown mixer kind {other}")));
        }
    };
    let include_prev_action = match r.u8("flags")? {
        0 => false,
        1 => true,
        other => return Err(CliError::Checkpoint(format!("bad flag byte {other}"))),
    };
    r.take(2, "padding")?;
    let gamma = r.f64("gamma")?;
    let updates = r.u64("updates")?;

    let dims = LearnerDims {
        obs_dim,
        n_agents,
        action_count,
        state_dim,
        hidden,
        embed,
        mixer,
        include_prev_action,
    };
    // Build a correctly-shaped params object; every tensor is overwritten
    // from the payload below.
    let mut params = LearnerParams::init_from_dims(dims, gamma, &mut substream(0, Stream::Init, 0));
    params.updates = updates;

    let count = r.u32("tensor count")? as usize;
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u16("tensor name length")? as usize;
        let name = core::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| CliError::Checkpoint("tensor name is not utf-8".into()))?
            .to_string();
        let len = r.u64("tensor length")? as usize;
        manifest.push((name, len));
    }

    {
        let mut expected = params.tensors_mut();
        if manifest.len() != expected.len() {
            return Err(CliError::Checkpoint(format!(
                "manifest lists {} tensors, shapes require {}",
                manifest.len(),
                expected.len()
            )));
        }
        for ((name, len), (want_name, tensor)) in manifest.iter().zip(expected.iter_mut()) {
            if name != want_name || *len != tensor.len() {
                return Err(CliError::Checkpoint(format!(
                    "shape mismatch: file has {name}[{len}], shapes require {want_name}[{}]",
                    tensor.len()
                )));
            }
            for slot in tensor.iter_mut() {
                *slot = r.f64(name)?;
            }
        }
    }

    if r.pos != bytes.len() {
        return Err(CliError::Checkpoint(format!(
            "{} trailing bytes after payload",
            bytes.len() - r.pos
        )));
    }
    Ok(params)
}
