//! Versioned binary container for trained parameters.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! magic      8 bytes  "IGCNPRM\0"
//! version    u32      1
//! variant    u32      0 full, 1 no-attention, 2 mlp-head
//! tensors    u32      2p + 2
//! shapes     tensors × (rows u64, cols u64)
//! data       every tensor row-major as f64
//! ```
//!
//! Tensors appear as `W_1..W_p`, `W_a`, `b` (1×1), `W̄_1..W̄_p`.

use std::path::Path;

use igcn_core::{DenseMatrix, ModelParams, Variant};

use crate::error::{format_err, io_err, Result};

pub const MAGIC: &[u8; 8] = b"IGCNPRM\0";
pub const VERSION: u32 = 1;

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let slices = params.slices();
    let mut shapes: Vec<(usize, usize)> = params.gcn_weights.iter().map(|w| w.shape()).collect();
    shapes.push(params.attn_weight.shape());
    shapes.push((1, 1));
    shapes.extend(params.head_weights.iter().map(|w| w.shape()));

    let mut out = Vec::with_capacity(20 + 16 * shapes.len() + 8 * params.num_scalars());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&params.variant.code().to_le_bytes());
    out.extend_from_slice(&(shapes.len() as u32).to_le_bytes());
    for (r, c) in &shapes {
        out.extend_from_slice(&(*r as u64).to_le_bytes());
        out.extend_from_slice(&(*c as u64).to_le_bytes());
    }
    for s in slices {
        for v in s {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<ModelParams, String> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err("not a parameter file (bad magic)".into());
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let code = cur.u32()?;
    let variant = Variant::from_code(code).ok_or_else(|| format!("unknown variant code {code}"))?;
    let count = cur.u32()? as usize;
    if count < 4 || !count.is_multiple_of(2) {
        return Err(format!("{count} tensors is not 2p + 2"));
    }
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let r = usize::try_from(cur.u64()?).map_err(|e| e.to_string())?;
        let c = usize::try_from(cur.u64()?).map_err(|e| e.to_string())?;
        shapes.push((r, c));
    }
    let mut tensors = Vec::with_capacity(count);
    for &(r, c) in &shapes {
        let n = r.checked_mul(c).ok_or("shape overflows")?;
        if n > (bytes.len() - cur.pos) / 8 {
            return Err(format!("truncated tensor of shape {r}×{c}"));
        }
        let data = (0..n).map(|_| cur.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
        tensors.push(DenseMatrix::from_vec(r, c, data).map_err(|e| e.to_string())?);
    }
    if cur.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - cur.pos));
    }

    let p = (count - 2) / 2;
    let head_weights = tensors.split_off(p + 2);
    let bias = tensors.pop().expect("count >= 4");
    let attn_weight = tensors.pop().expect("count >= 4");
    if bias.shape() != (1, 1) {
        return Err(format!("attention bias has shape {:?}", bias.shape()));
    }
    let params = ModelParams {
        gcn_weights: tensors,
        attn_weight,
        attn_bias: bias.get(0, 0),
        head_weights,
        variant,
    };
    let h = params.hidden_width();
    let c = params.num_classes();
    let consistent = params.attn_weight.cols() == 1
        && params.gcn_weights.iter().all(|w| w.cols() == h)
        && params.head_weights.iter().all(|w| w.shape() == (h, c));
    if !consistent {
        return Err("tensor shapes are inconsistent".into());
    }
    Ok(params)
}

pub fn save(path: &Path, params: &ModelParams) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, encode(params)).map_err(io_err(path))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode(&bytes).map_err(|msg| format_err(path, msg))
}
