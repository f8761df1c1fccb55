//! Binary policy checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//!   b"CBFNAVPL"            magic
//!   u32                    format version (1)
//!   3 x { u32 n, n x u32 } widths of the agent, obstacle and update MLPs
//!   u32                    log_std width
//!   u64                    parameter count
//!   count x f64            parameters
//! ```

use std::path::Path;

use super::{GnnArch, MlpSpec, PolicyParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CBFNAVPL";
pub const VERSION: u32 = 1;

pub fn encode(params: &PolicyParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * params.theta.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for spec in [&params.arch.agent_msg, &params.arch.obstacle_msg, &params.arch.update] {
        out.extend_from_slice(&(spec.widths.len() as u32).to_le_bytes());
        for w in &spec.widths {
            out.extend_from_slice(&(*w as u32).to_le_bytes());
        }
    }
    out.extend_from_slice(&(params.arch.log_std_dim as u32).to_le_bytes());
    out.extend_from_slice(&(params.theta.len() as u64).to_le_bytes());
    for v in &params.theta {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn spec(&mut self) -> Result<MlpSpec> {
        let n = self.u32()? as usize;
        if !(2..=64).contains(&n) {
            return Err(Error::Checkpoint(format!("implausible layer count {n}")));
        }
        let widths = (0..n)
            .map(|_| self.u32().map(|w| w as usize))
            .collect::<Result<Vec<_>>>()?;
        Ok(MlpSpec { widths })
    }
}

pub fn decode(bytes: &[u8]) -> Result<PolicyParams> {
    let mut r = Reader { buf: bytes };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let arch = GnnArch {
        agent_msg: r.spec()?,
        obstacle_msg: r.spec()?,
        update: r.spec()?,
        log_std_dim: r.u32()? as usize,
    };
    arch.validate()
        .map_err(|e| Error::Checkpoint(format!("bad architecture: {e}")))?;
    let count = r.u64()? as usize;
    if count != arch.param_count() {
        return Err(Error::Checkpoint(format!(
            "architecture needs {} parameters, file has {count}",
            arch.param_count()
        )));
    }
    let theta = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if !r.buf.is_empty() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    PolicyParams::new(arch, theta)
}

pub fn save(params: &PolicyParams, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode(params))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<PolicyParams> {
    decode(&std::fs::read(path)?)
}
