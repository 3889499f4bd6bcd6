//! Versioned binary checkpoints. A checkpoint stores the model configuration,
//! the data domain, content hashes of both vocabularies, and every parameter
//! tensor in canonical order; loading verifies all of it against the supplied
//! vocabularies.

use crate::data::{Domain, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelVariant, Seq2SeqModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"LLA1";
const VERSION: u32 = 1;

pub fn save_model(path: &Path, model: &Seq2SeqModel, domain: Domain) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[model.config.variant.tag(), domain.tag()])?;
    for dim in [model.config.hidden, model.config.embed, model.config.adversary_hidden] {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    w.write_all(&model.input_vocab.content_hash().to_le_bytes())?;
    w.write_all(&model.output_vocab.content_hash().to_le_bytes())?;
    let params = model.named_params();
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, tensor) in params {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&[tensor.shape.len() as u8])?;
        for &d in &tensor.shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in &tensor.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|_| bad("checkpoint is truncated"))?;
    Ok(buf)
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    Ok(u16::from_le_bytes(read_exact::<2>(r)?))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<4>(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<8>(r)?))
}

/// Loads a checkpoint, rebuilding the model against the supplied
/// vocabularies. The vocabularies must hash to the values recorded at save
/// time.
pub fn load_model(
    path: &Path,
    input_vocab: Vocabulary,
    output_vocab: Vocabulary,
) -> Result<(Seq2SeqModel, Domain)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    if &read_exact::<4>(&mut r)? != MAGIC {
        return Err(bad("not a model checkpoint (bad magic)"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let [variant_tag, domain_tag] = read_exact::<2>(&mut r)?;
    let variant = ModelVariant::from_tag(variant_tag)?;
    let domain = Domain::from_tag(domain_tag)?;
    let hidden = read_u32(&mut r)? as usize;
    let embed = read_u32(&mut r)? as usize;
    let adversary_hidden = read_u32(&mut r)? as usize;
    let in_hash = read_u64(&mut r)?;
    let out_hash = read_u64(&mut r)?;
    if in_hash != input_vocab.content_hash() {
        return Err(bad("input vocabulary does not match the checkpoint"));
    }
    if out_hash != output_vocab.content_hash() {
        return Err(bad("output vocabulary does not match the checkpoint"));
    }

    let config = ModelConfig { hidden, embed, adversary_hidden, variant };
    // Parameter values are about to be overwritten; the throwaway rng only
    // shapes the tensors.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = Seq2SeqModel::new(config, input_vocab, output_vocab, &mut rng)?;

    let n_tensors = read_u32(&mut r)? as usize;
    let params = model.named_params_mut();
    if n_tensors != params.len() {
        return Err(bad(format!(
            "checkpoint holds {n_tensors} tensors, model expects {}",
            params.len()
        )));
    }
    for (name, tensor) in params {
        let name_len = read_u16(&mut r)? as usize;
        let mut name_buf = vec![0u8; name_len];
        r.read_exact(&mut name_buf).map_err(|_| bad("checkpoint is truncated"))?;
        let stored = String::from_utf8(name_buf).map_err(|_| bad("tensor name is not UTF-8"))?;
        if stored != name {
            return Err(bad(format!("tensor order mismatch: expected {name}, found {stored}")));
        }
        let rank = read_exact::<1>(&mut r)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r)? as usize);
        }
        if shape != tensor.shape {
            return Err(bad(format!(
                "tensor {name} has shape {shape:?}, model expects {:?}",
                tensor.shape
            )));
        }
        for slot in tensor.data.iter_mut() {
            *slot = f64::from_le_bytes(read_exact::<8>(&mut r)?);
        }
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(bad("trailing bytes after final tensor"));
    }
    Ok((model, domain))
}
