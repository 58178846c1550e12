//! Binary policy checkpoints.
//!
//! Layout (all integers `u32` little-endian, values `f64` little-endian):
//!
//! ```text
//! magic      b"DSCP"
//! version    1
//! n_tokens, hidden
//! n_tensors
//! repeated n_tensors times:
//!     name_len, name (UTF-8), rows, cols, rows*cols values (row-major)
//! ```

use std::io::{Read, Write};

use super::net::PolicyNet;
use super::PolicyError;

pub const MAGIC: &[u8; 4] = b"DSCP";
pub const VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32, PolicyError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
    Ok(u32::from_le_bytes(b))
}

pub fn write_checkpoint<W: Write>(net: &PolicyNet, mut w: W) -> Result<(), PolicyError> {
    let io = |e: std::io::Error| PolicyError::Checkpoint(e.to_string());
    w.write_all(MAGIC).map_err(io)?;
    put_u32(&mut w, VERSION).map_err(io)?;
    put_u32(&mut w, net.n_tokens() as u32).map_err(io)?;
    put_u32(&mut w, net.hidden_size() as u32).map_err(io)?;
    let tensors = net.tensors();
    put_u32(&mut w, tensors.len() as u32).map_err(io)?;
    for t in &tensors {
        put_u32(&mut w, t.name.len() as u32).map_err(io)?;
        w.write_all(t.name.as_bytes()).map_err(io)?;
        put_u32(&mut w, t.rows as u32).map_err(io)?;
        put_u32(&mut w, t.cols as u32).map_err(io)?;
        for v in &net.params()[t.offset..t.offset + t.len()] {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<PolicyNet, PolicyError> {
    let bad = |m: &str| PolicyError::Checkpoint(m.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| bad(&e.to_string()))?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(PolicyError::Checkpoint(format!("unsupported version {version}")));
    }
    let n_tokens = get_u32(&mut r)? as usize;
    let hidden = get_u32(&mut r)? as usize;
    let layout = PolicyNet::layout(n_tokens, hidden);
    let count = get_u32(&mut r)? as usize;
    if count != layout.len() {
        return Err(bad("tensor count does not match layout"));
    }
    let mut params = Vec::new();
    for t in &layout {
        let name_len = get_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(|e| bad(&e.to_string()))?;
        let rows = get_u32(&mut r)? as usize;
        let cols = get_u32(&mut r)? as usize;
        if name != t.name.as_bytes() || rows != t.rows || cols != t.cols {
            return Err(PolicyError::Checkpoint(format!(
                "unexpected tensor {:?} ({rows}x{cols}), wanted {} ({}x{})",
                String::from_utf8_lossy(&name),
                t.name,
                t.rows,
                t.cols
            )));
        }
        for _ in 0..rows * cols {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(|e| bad(&e.to_string()))?;
            params.push(f64::from_le_bytes(b));
        }
    }
    PolicyNet::from_params(n_tokens, hidden, params)
}
