//! Checkpoint files: a text header naming the configuration and tensor
//! extents, followed by flat little-endian f32 data.

use crate::error::{Error, Result};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &str = "RADIPRIOR-CKPT 1";

/// Writes named tensors with a JSON metadata header. Values are stored as
/// f32; save -> load -> save byte round-trips exactly.
pub fn save_checkpoint(
    path: &Path,
    meta: &serde_json::Value,
    tensors: &[(&str, &[f64])],
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = serde_json::json!({
        "meta": meta,
        "tensors": tensors
            .iter()
            .map(|(name, data)| serde_json::json!({"name": name, "len": data.len()}))
            .collect::<Vec<_>>(),
    });
    writeln!(w, "{MAGIC}").map_err(|e| Error::io(path, e))?;
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for (_, data) in tensors {
        for &v in *data {
            w.write_all(&(v as f32).to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint back as (metadata, named f64 tensors).
pub fn load_checkpoint(path: &Path) -> Result<(serde_json::Value, Vec<(String, Vec<f64>)>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let magic = read_line(&mut r, path)?;
    if magic.trim_end() != MAGIC {
        return Err(Error::format("checkpoint", "bad magic line"));
    }
    let header_line = read_line(&mut r, path)?;
    let header: serde_json::Value = serde_json::from_str(header_line.trim_end())
        .map_err(|e| Error::format("checkpoint header", e.to_string()))?;
    let meta = header.get("meta").cloned().unwrap_or(serde_json::Value::Null);
    let specs = header
        .get("tensors")
        .and_then(|t| t.as_array())
        .ok_or_else(|| Error::format("checkpoint header", "missing tensors list"))?;
    let mut tensors = Vec::new();
    for spec in specs {
        let name = spec
            .get("name")
            .and_then(|n| n.as_str())
            .ok_or_else(|| Error::format("checkpoint header", "tensor without name"))?
            .to_string();
        let len = spec
            .get("len")
            .and_then(|l| l.as_u64())
            .ok_or_else(|| Error::format("checkpoint header", "tensor without len"))?
            as usize;
        let mut bytes = vec![0u8; len * 4];
        r.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
        let values = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        tensors.push((name, values));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    if !rest.is_empty() {
        return Err(Error::format("checkpoint", "trailing bytes after tensors"));
    }
    Ok((meta, tensors))
}

fn read_line<R: Read>(r: &mut R, path: &Path) -> Result<String> {
    // byte-at-a-time so the binary payload position stays exact
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte).map_err(|e| Error::io(path, e))?;
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
    }
    String::from_utf8(line).map_err(|_| Error::format("checkpoint", "non-utf8 header"))
}
