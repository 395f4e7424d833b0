//! Checkpoint persistence.
//!
//! Layout: magic `TSGAN\0`, a little-endian u32 format version, a
//! little-endian u64 header length, a UTF-8 `key=value` header describing
//! the architecture, parameter-block shapes and byte offsets, then the raw
//! little-endian f64 parameter blocks (generator first, discriminator
//! second). Floats in the header are printed with Rust's shortest
//! round-trip formatting, so save/load is bit-exact.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{GanModel, ModelMeta};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"TSGAN\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialize a model. The write is atomic (temp file + rename).
pub fn save_checkpoint(model: &GanModel, path: &Path) -> Result<()> {
    let gen_flat = model.generator.flatten();
    let disc_flat = model.discriminator.flatten();
    let meta = &model.meta;

    let mut header = String::new();
    header.push_str(&format!("series_len={}\n", meta.series_len));
    header.push_str(&format!("num_classes={}\n", meta.num_classes));
    header.push_str(&format!("latent_dim={}\n", meta.latent_dim));
    header.push_str(&format!("units={}\n", meta.units));
    header.push_str(&format!("layers={}\n", meta.layers));
    match meta.norm_bounds {
        Some((lo, hi)) => {
            header.push_str(&format!("norm_min={lo}\n"));
            header.push_str(&format!("norm_max={hi}\n"));
        }
        None => header.push_str("norm_bounds=none\n"),
    }
    header.push_str(&format!("seed={}\n", meta.seed));
    header.push_str(&format!("epoch={}\n", meta.epoch));
    header.push_str(&format!("generator_params={}\n", gen_flat.len()));
    header.push_str(&format!("discriminator_params={}\n", disc_flat.len()));
    let mut offset = 0usize;
    for (name, range) in model
        .generator
        .param_layout()
        .blocks()
        .iter()
        .chain(model.discriminator.param_layout().blocks())
    {
        header.push_str(&format!("block={name}:{}:{}\n", range.len(), offset));
        offset += range.len() * 8;
    }

    let mut bytes = Vec::with_capacity(
        CHECKPOINT_MAGIC.len() + 12 + header.len() + 8 * (gen_flat.len() + disc_flat.len()),
    );
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
    bytes.extend_from_slice(header.as_bytes());
    for v in gen_flat.iter().chain(&disc_flat) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }

    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Restore a model saved by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<GanModel> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;

    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated file: needed {} bytes at offset {}, file has {}",
                n,
                *pos,
                bytes.len()
            )));
        }
        let out = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(out)
    };

    let magic = take(&mut pos, CHECKPOINT_MAGIC.len())?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}; not a checkpoint file",
            &magic
        )));
    }
    let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let header_len = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
    let header = std::str::from_utf8(take(&mut pos, header_len)?)
        .map_err(|e| Error::Checkpoint(format!("header is not UTF-8: {e}")))?
        .to_string();

    let mut fields: HashMap<&str, &str> = HashMap::new();
    for line in header.lines() {
        if line.is_empty() || line.starts_with("block=") {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("malformed header line '{line}'")))?;
        fields.insert(k, v);
    }
    let get = |k: &str| -> Result<&str> {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::Checkpoint(format!("missing header field '{k}'")))
    };
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|e| Error::Checkpoint(format!("field '{k}': {e}")))
    };

    let meta = ModelMeta {
        series_len: parse_usize("series_len")?,
        num_classes: parse_usize("num_classes")?,
        latent_dim: parse_usize("latent_dim")?,
        units: parse_usize("units")?,
        layers: parse_usize("layers")?,
        norm_bounds: if fields.contains_key("norm_min") {
            let lo: f64 = get("norm_min")?
                .parse()
                .map_err(|e| Error::Checkpoint(format!("field 'norm_min': {e}")))?;
            let hi: f64 = get("norm_max")?
                .parse()
                .map_err(|e| Error::Checkpoint(format!("field 'norm_max': {e}")))?;
            Some((lo, hi))
        } else {
            None
        },
        seed: get("seed")?
            .parse()
            .map_err(|e| Error::Checkpoint(format!("field 'seed': {e}")))?,
        epoch: parse_usize("epoch")?,
    };

    // Rebuild the architecture, then overwrite every parameter from the
    // payload, so any shape inconsistency surfaces as an explicit error.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    use rand::SeedableRng;
    let mut model = GanModel::new(
        meta.series_len,
        meta.num_classes,
        meta.latent_dim,
        meta.units,
        meta.layers,
        &mut rng,
    )
    .map_err(|e| Error::Checkpoint(format!("invalid architecture in header: {e}")))?;
    model.meta = meta;

    let gen_params = parse_usize("generator_params")?;
    let disc_params = parse_usize("discriminator_params")?;
    if gen_params != model.generator.param_count() || disc_params != model.discriminator.param_count()
    {
        return Err(Error::Checkpoint(format!(
            "shape inconsistency: header declares {gen_params}+{disc_params} parameters, architecture implies {}+{}",
            model.generator.param_count(),
            model.discriminator.param_count()
        )));
    }

    let payload = take(&mut pos, 8 * (gen_params + disc_params))?;
    if pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after payload",
            bytes.len() - pos
        )));
    }
    let mut values = Vec::with_capacity(gen_params + disc_params);
    for chunk in payload.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter in payload".into()));
        }
        values.push(v);
    }
    model
        .generator
        .load_flat(&values[..gen_params])
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    model
        .discriminator
        .load_flat(&values[gen_params..])
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(model)
}
