//! Versioned text checkpoints for decoder parameters.
//!
//! The format is line-oriented: a magic version line, the RNG seed, the
//! decoder dimensions, then every tensor in visitor order as a
//! `tensor <name> <dims...>` line followed by its row-major values (matrices
//! one row per line). Floats are written with Rust's shortest-roundtrip
//! formatting, so save -> load reproduces every coordinate exactly and two
//! identical parameter sets serialize to identical bytes.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::decoder::{DecoderDims, DecoderParams};
use crate::error::{Error, Result};

const MAGIC: &str = "CAPFORGE-CKPT v1";

/// Decoder parameters plus the seed they were initialized from.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: DecoderParams,
    pub seed: u64,
}

pub fn write_checkpoint<W: Write>(mut w: W, checkpoint: &Checkpoint) -> std::io::Result<()> {
    let dims = checkpoint.params.dims;
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "seed {}", checkpoint.seed)?;
    writeln!(
        w,
        "dims vocab={} embed={} hidden={} annot={} attn={}",
        dims.vocab, dims.embed, dims.hidden, dims.annot, dims.attn
    )?;
    for tensor in checkpoint.params.visit() {
        let shape: Vec<String> = tensor.shape.iter().map(|d| d.to_string()).collect();
        writeln!(w, "tensor {} {}", tensor.name, shape.join(" "))?;
        let row_len = *tensor.shape.last().expect("rank >= 1");
        for row in tensor.data.chunks(row_len) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Checkpoint> {
    let mut lines = r.lines();
    let mut next_line = |context: &str| -> Result<String> {
        match lines.next() {
            Some(line) => line.map_err(|e| Error::parse(e.to_string())),
            None => Err(Error::Truncated {
                context: context.into(),
            }),
        }
    };

    let magic = next_line("version line")?;
    if magic.trim() != MAGIC {
        return Err(Error::VersionMismatch {
            expected: MAGIC.into(),
            found: magic,
        });
    }

    let seed_line = next_line("seed line")?;
    let seed: u64 = seed_line
        .strip_prefix("seed ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::parse(format!("bad seed line `{seed_line}`")))?;

    let dims_line = next_line("dims line")?;
    let dims = parse_dims(&dims_line)?;
    let mut params = DecoderParams::zeros(dims);

    for tensor in params.visit_mut() {
        let header = next_line(&format!("tensor header for `{}`", tensor.name))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("tensor") {
            return Err(Error::parse(format!("expected tensor header, found `{header}`")));
        }
        let name = fields
            .next()
            .ok_or_else(|| Error::parse("tensor header missing name"))?;
        if name != tensor.name {
            return Err(Error::parse(format!(
                "expected tensor `{}`, found `{name}`",
                tensor.name
            )));
        }
        let declared: Vec<usize> = fields
            .map(|f| f.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(format!("bad shape in `{header}`")))?;
        if declared != tensor.shape {
            return Err(Error::ShapeMismatch {
                name: name.into(),
                expected: tensor.shape.clone(),
                found: declared,
            });
        }

        let row_len = *tensor.shape.last().expect("rank >= 1");
        for row in tensor.data.chunks_mut(row_len) {
            let line = next_line(&format!("values of tensor `{name}`"))?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(format!("bad value in tensor `{name}`: {e}")))?;
            if values.len() != row_len {
                return Err(Error::ShapeMismatch {
                    name: name.into(),
                    expected: tensor.shape.clone(),
                    found: vec![values.len()],
                });
            }
            row.copy_from_slice(&values);
        }
    }

    for extra in lines {
        let extra = extra.map_err(|e| Error::parse(e.to_string()))?;
        if !extra.trim().is_empty() {
            return Err(Error::parse(format!("trailing content `{extra}`")));
        }
    }
    Ok(Checkpoint { params, seed })
}

fn parse_dims(line: &str) -> Result<DecoderDims> {
    let rest = line
        .strip_prefix("dims ")
        .ok_or_else(|| Error::parse(format!("bad dims line `{line}`")))?;
    let mut vocab = None;
    let mut embed = None;
    let mut hidden = None;
    let mut annot = None;
    let mut attn = None;
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("bad dims field `{field}`")))?;
        let value: usize = value
            .parse()
            .map_err(|_| Error::parse(format!("bad dims value `{field}`")))?;
        match key {
            "vocab" => vocab = Some(value),
            "embed" => embed = Some(value),
            "hidden" => hidden = Some(value),
            "annot" => annot = Some(value),
            "attn" => attn = Some(value),
            other => return Err(Error::parse(format!("unknown dims key `{other}`"))),
        }
    }
    match (vocab, embed, hidden, annot, attn) {
        (Some(v), Some(m), Some(h), Some(d), Some(a)) => Ok(DecoderDims::new(v, m, h, d, a)),
        _ => Err(Error::parse(format!("incomplete dims line `{line}`"))),
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, checkpoint).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file)).map_err(|e| e.with_path(path))
}
