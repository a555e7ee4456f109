//! The `capforge` command line: wires corpora, features, configuration,
//! training, decoding, and evaluation together.
//!
//! Subcommands: `build-vocab`, `featurize`, `train`, `caption`, `evaluate`,
//! `gradcheck`, `attn-trace`. Every run writes a `<output>.manifest` sidecar
//! before doing work, every output file starts with a version or manifest
//! line, and all outputs are written atomically (temp file + rename).
//! Everything is deterministic given the flags and seed; the `CAPFORGE_SEED`
//! environment variable overrides the config seed for `train`.

pub mod coco;
pub mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use capforge::annotation::{
    build_annotation_set, load_feature_file, write_feature_file, AnnotationSet, BoundingBox,
    ImageBuffer, SyntheticExtractor,
};
use capforge::checkpoint::{load_checkpoint, write_checkpoint, Checkpoint};
use capforge::decoder::{forward_sequence, DecoderDims, DecoderParams};
use capforge::decoding::{beam_search, greedy_decode, DecodeConfig};
use capforge::metrics::{evaluate, write_results, EvalCorpus, EvalItem};
use capforge::training::{grad_check, train, write_loss_history, TrainConfig, TrainExample};
use capforge::vocab::{load_corpus, CaptionRecord, Vocabulary};

use manifest::RunManifest;

pub const SEED_ENV_VAR: &str = "CAPFORGE_SEED";

#[derive(Parser)]
#[command(
    name = "capforge",
    version,
    about = "Soft-attention LSTM captioning pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Build a token vocabulary from a caption file.
    BuildVocab {
        /// Caption corpus: `image_id<TAB>caption` lines, or a COCO captions
        /// JSON file (detected by the .json extension).
        #[arg(long)]
        captions: PathBuf,
        /// Keep tokens occurring at least this often.
        #[arg(long, default_value_t = 5)]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build annotation matrices with the deterministic synthetic extractor.
    Featurize {
        /// Directory holding one image per image id (png/jpg/jpeg/bmp).
        #[arg(long)]
        images: PathBuf,
        /// Box file: `image_id x y w h score` lines.
        #[arg(long)]
        boxes: PathBuf,
        #[arg(long)]
        synthetic_seed: u64,
        /// Keep this many highest-scoring boxes per image.
        #[arg(long, default_value_t = 5)]
        top_n: usize,
        /// Width of each synthetic feature vector (annotation rows are twice
        /// this wide).
        #[arg(long, default_value_t = 64)]
        feat_dim: usize,
        /// Per-channel mean pixel used to blank masked regions, e.g. "0.5,0.5,0.5".
        #[arg(long, default_value = "0.5,0.5,0.5")]
        mean_pixel: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the decoder on precomputed features and captions.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        captions: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// `key = value` training config file.
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// `iter<TAB>loss` history output path.
        #[arg(long)]
        loss_log: PathBuf,
        #[arg(long, default_value_t = 1000)]
        embed_dim: usize,
        #[arg(long, default_value_t = 1000)]
        hidden_dim: usize,
        /// Attention MLP width; defaults to the hidden width.
        #[arg(long)]
        attn_dim: Option<usize>,
        /// Captions are truncated to this many tokens before the terminator.
        #[arg(long, default_value_t = 50)]
        max_caption_len: usize,
    },
    /// Generate captions for every image in a feature file.
    Caption {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Beam width.
        #[arg(long, default_value_t = 4, conflicts_with = "greedy")]
        beam: usize,
        /// Greedy decoding instead of beam search.
        #[arg(long)]
        greedy: bool,
        #[arg(long, default_value_t = 50)]
        max_len: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score candidate captions against references.
    Evaluate {
        /// Candidate captions: `image_id<TAB>caption` lines.
        #[arg(long)]
        candidates: PathBuf,
        /// References: caption corpus or COCO JSON.
        #[arg(long)]
        references: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check analytic gradients against central finite differences.
    Gradcheck {
        /// Instance dimensions, e.g. "V=12,m=5,H=8,D=6,L=4,K=5" (optionally
        /// ",a=<attention width>", default a=H).
        #[arg(long, default_value = "V=12,m=5,H=8,D=6,L=4,K=5")]
        dims: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit per-word attention weights over annotation rows.
    AttnTrace {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, default_value_t = 4)]
        beam: usize,
        #[arg(long, default_value_t = 50)]
        max_len: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Writes `bytes` to `path` atomically: temp file in the same directory,
/// then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp~");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Caption records from either a TSV corpus or a COCO JSON file.
pub fn load_captions_any(path: &Path) -> Result<Vec<CaptionRecord>> {
    if path.extension().is_some_and(|ext| ext == "json") {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        coco::import_coco_captions(&text)
    } else {
        Ok(load_corpus(path)?)
    }
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV_VAR) {
        Ok(value) => {
            let seed = value
                .trim()
                .parse::<u64>()
                .map_err(|_| anyhow!("{SEED_ENV_VAR} must be an unsigned integer, got `{value}`"))?;
            Ok(Some(seed))
        }
        Err(_) => Ok(None),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildVocab {
            captions,
            min_count,
            out,
        } => cmd_build_vocab(&captions, min_count, &out),
        Command::Featurize {
            images,
            boxes,
            synthetic_seed,
            top_n,
            feat_dim,
            mean_pixel,
            out,
        } => cmd_featurize(
            &images,
            &boxes,
            synthetic_seed,
            top_n,
            feat_dim,
            &mean_pixel,
            &out,
        ),
        Command::Train {
            features,
            captions,
            vocab,
            config,
            out,
            loss_log,
            embed_dim,
            hidden_dim,
            attn_dim,
            max_caption_len,
        } => cmd_train(
            &features,
            &captions,
            &vocab,
            &config,
            &out,
            &loss_log,
            embed_dim,
            hidden_dim,
            attn_dim,
            max_caption_len,
        ),
        Command::Caption {
            features,
            checkpoint,
            vocab,
            beam,
            greedy,
            max_len,
            out,
        } => cmd_caption(&features, &checkpoint, &vocab, beam, greedy, max_len, &out),
        Command::Evaluate {
            candidates,
            references,
            out,
        } => cmd_evaluate(&candidates, &references, &out),
        Command::Gradcheck { dims, seed } => cmd_gradcheck(&dims, seed),
        Command::AttnTrace {
            features,
            checkpoint,
            vocab,
            beam,
            max_len,
            out,
        } => cmd_attn_trace(&features, &checkpoint, &vocab, beam, max_len, &out),
    }
}

fn cmd_build_vocab(captions: &Path, min_count: u64, out: &Path) -> Result<()> {
    if min_count < 1 {
        bail!("--min-count must be >= 1");
    }
    RunManifest::new("build-vocab")
        .arg("captions", captions.display())
        .arg("min_count", min_count)
        .arg("out", out.display())
        .write_sidecar(out)?;
    let records = load_captions_any(captions)?;
    let vocab = Vocabulary::build(&records, min_count);
    let mut bytes = Vec::new();
    vocab.write_to(&mut bytes)?;
    write_atomic(out, &bytes)?;
    println!("vocabulary of {} tokens from {} captions", vocab.size(), records.len());
    Ok(())
}

fn parse_mean_pixel(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("bad mean pixel component `{f}`"))
        })
        .collect()
}

fn read_boxes_file(path: &Path) -> Result<BTreeMap<String, Vec<BoundingBox>>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut boxes: BTreeMap<String, Vec<BoundingBox>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            bail!(
                "{}:{}: expected `image_id x y w h score`",
                path.display(),
                idx + 1
            );
        }
        let parse_coord = |f: &str, what: &str| -> Result<usize> {
            f.parse()
                .map_err(|_| anyhow!("{}:{}: bad {what} `{f}`", path.display(), idx + 1))
        };
        let bbox = BoundingBox {
            x: parse_coord(fields[1], "x")?,
            y: parse_coord(fields[2], "y")?,
            w: parse_coord(fields[3], "w")?,
            h: parse_coord(fields[4], "h")?,
            score: fields[5]
                .parse()
                .map_err(|_| anyhow!("{}:{}: bad score `{}`", path.display(), idx + 1, fields[5]))?,
        };
        boxes.entry(fields[0].to_owned()).or_default().push(bbox);
    }
    Ok(boxes)
}

fn load_image(dir: &Path, image_id: &str) -> Result<ImageBuffer> {
    let mut tried = Vec::new();
    for ext in ["png", "jpg", "jpeg", "bmp"] {
        let candidate = dir.join(format!("{image_id}.{ext}"));
        if candidate.exists() {
            let dynamic = image::open(&candidate)
                .with_context(|| format!("decoding {}", candidate.display()))?;
            let rgb = dynamic.to_rgb8();
            let (width, height) = rgb.dimensions();
            let mut buffer = ImageBuffer::new(height as usize, width as usize, 3, 0.0);
            for (x, y, pixel) in rgb.enumerate_pixels() {
                for c in 0..3 {
                    buffer.pixels[(y as usize, x as usize, c)] = pixel.0[c] as f64 / 255.0;
                }
            }
            return Ok(buffer);
        }
        tried.push(candidate);
    }
    bail!(
        "no image found for id `{image_id}` (tried {})",
        tried
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_featurize(
    images: &Path,
    boxes_path: &Path,
    synthetic_seed: u64,
    top_n: usize,
    feat_dim: usize,
    mean_pixel: &str,
    out: &Path,
) -> Result<()> {
    if top_n < 1 {
        bail!("--top-n must be >= 1");
    }
    if feat_dim < 1 {
        bail!("--feat-dim must be >= 1");
    }
    RunManifest::new("featurize")
        .seed(synthetic_seed)
        .arg("images", images.display())
        .arg("boxes", boxes_path.display())
        .arg("top_n", top_n)
        .arg("feat_dim", feat_dim)
        .arg("mean_pixel", mean_pixel)
        .arg("out", out.display())
        .write_sidecar(out)?;

    let mean = parse_mean_pixel(mean_pixel)?;
    let boxes = read_boxes_file(boxes_path)?;
    if boxes.is_empty() {
        bail!("box file {} lists no boxes", boxes_path.display());
    }
    let obj_extractor = SyntheticExtractor::new(synthetic_seed, feat_dim);
    let loc_extractor = SyntheticExtractor::new(synthetic_seed.wrapping_add(1), feat_dim);

    let mut sets = BTreeMap::new();
    for (image_id, image_boxes) in &boxes {
        let image = load_image(images, image_id)?;
        if mean.len() != image.channels() {
            bail!(
                "--mean-pixel has {} components but images have {} channels",
                mean.len(),
                image.channels()
            );
        }
        let set = build_annotation_set(
            &image,
            image_boxes,
            top_n,
            &obj_extractor,
            &loc_extractor,
            &mean,
        )
        .with_context(|| format!("building annotations for `{image_id}`"))?;
        sets.insert(image_id.clone(), set);
    }

    let mut bytes = Vec::new();
    write_feature_file(&mut bytes, &sets)?;
    write_atomic(out, &bytes)?;
    println!("featurized {} images", sets.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    features_path: &Path,
    captions: &Path,
    vocab_path: &Path,
    config_path: &Path,
    out: &Path,
    loss_log: &Path,
    embed_dim: usize,
    hidden_dim: usize,
    attn_dim: Option<usize>,
    max_caption_len: usize,
) -> Result<()> {
    let mut config = TrainConfig::load(config_path)?;
    if let Some(seed) = seed_override()? {
        config.seed = seed;
    }
    let attn_dim = attn_dim.unwrap_or(hidden_dim);

    let manifest = RunManifest::new("train")
        .seed(config.seed)
        .arg("features", features_path.display())
        .arg("captions", captions.display())
        .arg("vocab", vocab_path.display())
        .arg("config", config_path.display())
        .arg("embed_dim", embed_dim)
        .arg("hidden_dim", hidden_dim)
        .arg("attn_dim", attn_dim)
        .arg("max_caption_len", max_caption_len)
        .arg("out", out.display())
        .arg("loss_log", loss_log.display());
    manifest.write_sidecar(out)?;

    let features = load_feature_file(features_path)?;
    let vocab = Vocabulary::load(vocab_path)?;
    let records = load_captions_any(captions)?;
    if records.is_empty() {
        bail!("caption file {} holds no usable captions", captions.display());
    }

    let annot_dim = features
        .values()
        .next()
        .ok_or_else(|| anyhow!("feature file {} is empty", features_path.display()))?
        .width();

    let mut dataset = Vec::with_capacity(records.len());
    for record in &records {
        let annotations = features.get(&record.image_id).ok_or_else(|| {
            anyhow!(
                "caption references image `{}` absent from {}",
                record.image_id,
                features_path.display()
            )
        })?;
        dataset.push(TrainExample {
            annotations: annotations.clone(),
            target_ids: vocab.encode(&record.tokens, max_caption_len),
        });
    }

    let dims = DecoderDims::new(vocab.size(), embed_dim, hidden_dim, annot_dim, attn_dim);
    let params = DecoderParams::init(dims, config.seed);
    let (trained, history) = train(&dataset, &config, params, vocab.end_id())?;

    let mut ckpt_bytes = Vec::new();
    write_checkpoint(
        &mut ckpt_bytes,
        &Checkpoint {
            params: trained,
            seed: config.seed,
        },
    )?;
    write_atomic(out, &ckpt_bytes)?;

    let mut log_bytes = format!("{}\n", manifest.comment_line()).into_bytes();
    write_loss_history(&mut log_bytes, &history)?;
    write_atomic(loss_log, &log_bytes)?;

    if let Some((iter, last)) = history.last() {
        println!("trained {} iterations, final batch loss {last}", iter + 1);
    } else {
        println!("trained 0 iterations");
    }
    Ok(())
}

fn load_decode_inputs(
    features_path: &Path,
    checkpoint_path: &Path,
    vocab_path: &Path,
) -> Result<(BTreeMap<String, AnnotationSet>, Checkpoint, Vocabulary)> {
    let features = load_feature_file(features_path)?;
    let checkpoint = load_checkpoint(checkpoint_path)?;
    let vocab = Vocabulary::load(vocab_path)?;
    if vocab.size() != checkpoint.params.dims.vocab {
        bail!(
            "vocabulary size {} does not match checkpoint vocabulary {}",
            vocab.size(),
            checkpoint.params.dims.vocab
        );
    }
    if let Some(set) = features.values().next() {
        if set.width() != checkpoint.params.dims.annot {
            bail!(
                "feature width {} does not match checkpoint annotation width {}",
                set.width(),
                checkpoint.params.dims.annot
            );
        }
    }
    Ok((features, checkpoint, vocab))
}

fn cmd_caption(
    features_path: &Path,
    checkpoint_path: &Path,
    vocab_path: &Path,
    beam: usize,
    greedy: bool,
    max_len: usize,
    out: &Path,
) -> Result<()> {
    if beam < 1 {
        bail!("--beam must be >= 1");
    }
    let manifest = RunManifest::new("caption")
        .arg("features", features_path.display())
        .arg("checkpoint", checkpoint_path.display())
        .arg("vocab", vocab_path.display())
        .arg("mode", if greedy { "greedy".to_owned() } else { format!("beam {beam}") })
        .arg("max_len", max_len)
        .arg("out", out.display());
    manifest.write_sidecar(out)?;

    let (features, checkpoint, vocab) =
        load_decode_inputs(features_path, checkpoint_path, vocab_path)?;

    let mut lines = format!("{}\n", manifest.comment_line());
    for (image_id, annotations) in &features {
        let ids = if greedy {
            greedy_decode(annotations, &checkpoint.params, &vocab, max_len)?
        } else {
            let config = DecodeConfig {
                beam_width: beam,
                max_len,
            };
            beam_search(annotations, &checkpoint.params, &vocab, &config)?.0
        };
        let tokens = vocab.decode(&ids)?;
        lines.push_str(&format!("{image_id}\t{}\n", tokens.join(" ")));
    }
    write_atomic(out, lines.as_bytes())?;
    println!("captioned {} images", features.len());
    Ok(())
}

fn cmd_evaluate(candidates_path: &Path, references_path: &Path, out: &Path) -> Result<()> {
    let manifest = RunManifest::new("evaluate")
        .arg("candidates", candidates_path.display())
        .arg("references", references_path.display())
        .arg("out", out.display());
    manifest.write_sidecar(out)?;

    let candidates = load_corpus(candidates_path)?;
    let references = load_captions_any(references_path)?;
    let mut by_image: BTreeMap<&str, Vec<Vec<String>>> = BTreeMap::new();
    for record in &references {
        by_image
            .entry(record.image_id.as_str())
            .or_default()
            .push(record.tokens.clone());
    }

    let mut items = Vec::with_capacity(candidates.len());
    let mut seen = std::collections::HashSet::new();
    for candidate in &candidates {
        if !seen.insert(&candidate.image_id) {
            bail!("duplicate candidate for image `{}`", candidate.image_id);
        }
        let references = by_image.get(candidate.image_id.as_str()).ok_or_else(|| {
            anyhow!(
                "no references for image `{}` in {}",
                candidate.image_id,
                references_path.display()
            )
        })?;
        items.push(EvalItem {
            image_id: candidate.image_id.clone(),
            candidate: candidate.tokens.clone(),
            references: references.clone(),
        });
    }
    let corpus = EvalCorpus::new(items)?;
    let result = evaluate(&corpus)?;

    let mut bytes = format!("{}\n", manifest.comment_line()).into_bytes();
    write_results(&mut bytes, &result)?;
    write_atomic(out, &bytes)?;

    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

/// Dimensions of a gradient-check instance, parsed from
/// `V=..,m=..,H=..,D=..,L=..,K=..[,a=..]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradcheckDims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub annot: usize,
    pub rows: usize,
    pub steps: usize,
    pub attn: usize,
}

pub fn parse_gradcheck_dims(text: &str) -> Result<GradcheckDims> {
    let mut fields: BTreeMap<&str, usize> = BTreeMap::new();
    for part in text.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("bad dims field `{part}`"))?;
        let value = value
            .trim()
            .parse::<usize>()
            .map_err(|_| anyhow!("bad dims value `{part}`"))?;
        if fields.insert(key.trim(), value).is_some() {
            bail!("duplicate dims key `{}`", key.trim());
        }
    }
    let take = |key: &str| -> Result<usize> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| anyhow!("dims string is missing `{key}=`"))
    };
    let hidden = take("H")?;
    let dims = GradcheckDims {
        vocab: take("V")?,
        embed: take("m")?,
        hidden,
        annot: take("D")?,
        rows: take("L")?,
        steps: take("K")?,
        attn: fields.get("a").copied().unwrap_or(hidden),
    };
    for key in fields.keys() {
        if !["V", "m", "H", "D", "L", "K", "a"].contains(key) {
            bail!("unknown dims key `{key}`");
        }
    }
    if dims.vocab < 2 || dims.rows < 1 || dims.steps < 1 {
        bail!("dims must satisfy V >= 2, L >= 1, K >= 1");
    }
    Ok(dims)
}

/// Builds the seeded random instance used by `gradcheck`: Glorot-initialized
/// parameters, a synthetic annotation matrix, and a target sequence over
/// ids 1..V terminated by id 0.
pub fn gradcheck_instance(
    dims: &GradcheckDims,
    seed: u64,
) -> (DecoderParams, TrainExample, usize) {
    use capforge::annotation::{AnnotationSet, FeatureExtractor};

    let decoder_dims = DecoderDims::new(dims.vocab, dims.embed, dims.hidden, dims.annot, dims.attn);
    let params = DecoderParams::init(decoder_dims, seed);

    // Annotation rows and word draws come from the synthetic extractor, so
    // the instance depends only on dims and seed.
    let row_extractor = SyntheticExtractor::new(seed.wrapping_add(100), dims.annot);
    let mut matrix = ndarray::Array2::zeros((dims.rows, dims.annot));
    for r in 0..dims.rows {
        let probe = ImageBuffer::new(1, 1, 1, r as f64);
        matrix.row_mut(r).assign(&row_extractor.extract(&probe));
    }
    let annotations = AnnotationSet::from_rows(matrix).expect("finite synthetic rows");

    let end_id = 0usize;
    let word_extractor = SyntheticExtractor::new(seed.wrapping_add(200), dims.steps);
    let draws = word_extractor.extract(&ImageBuffer::new(1, 2, 1, 0.5));
    let mut target_ids: Vec<usize> = draws
        .iter()
        .take(dims.steps - 1)
        .map(|&v| {
            // Map [-1, 1] onto 1..V so the terminator id stays distinct.
            let unit = (v + 1.0) / 2.0;
            1 + ((unit * (dims.vocab - 1) as f64) as usize).min(dims.vocab - 2)
        })
        .collect();
    target_ids.push(end_id);

    (
        params,
        TrainExample {
            annotations,
            target_ids,
        },
        end_id,
    )
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const GRADCHECK_EPSILON: f64 = 1e-5;
pub const GRADCHECK_LAMBDAS: [f64; 2] = [0.0, 5.0];

fn cmd_gradcheck(dims_text: &str, seed: u64) -> Result<()> {
    let dims = parse_gradcheck_dims(dims_text)?;
    let (params, example, end_id) = gradcheck_instance(&dims, seed);
    let mut worst = 0.0f64;
    for lambda in GRADCHECK_LAMBDAS {
        let err = grad_check(&params, &example, end_id, lambda, GRADCHECK_EPSILON)?;
        println!("lambda={lambda} max_rel_error={err:e}");
        worst = worst.max(err);
    }
    println!("max relative error: {worst:e}");
    if worst >= GRADCHECK_TOLERANCE {
        bail!("gradient check failed: {worst:e} >= {GRADCHECK_TOLERANCE:e}");
    }
    Ok(())
}

fn cmd_attn_trace(
    features_path: &Path,
    checkpoint_path: &Path,
    vocab_path: &Path,
    beam: usize,
    max_len: usize,
    out: &Path,
) -> Result<()> {
    let manifest = RunManifest::new("attn-trace")
        .arg("features", features_path.display())
        .arg("checkpoint", checkpoint_path.display())
        .arg("vocab", vocab_path.display())
        .arg("beam", beam)
        .arg("max_len", max_len)
        .arg("out", out.display());
    manifest.write_sidecar(out)?;

    let (features, checkpoint, vocab) =
        load_decode_inputs(features_path, checkpoint_path, vocab_path)?;

    let mut text = format!("{}\n", manifest.comment_line());
    for (image_id, annotations) in &features {
        let config = DecodeConfig {
            beam_width: beam,
            max_len,
        };
        let (ids, _) = beam_search(annotations, &checkpoint.params, &vocab, &config)?;
        text.push_str(&format!("# image {image_id}\n"));
        if ids.is_empty() {
            continue;
        }
        // Re-run the generated caption teacher-forced to recover the
        // attention weights that produced each word.
        let mut targets = ids.clone();
        targets.push(vocab.end_id());
        let traces = forward_sequence(
            annotations,
            &targets,
            &checkpoint.params,
            vocab.end_id(),
        )?;
        for (word_id, trace) in ids.iter().zip(&traces) {
            let word = vocab
                .token(*word_id)
                .ok_or_else(|| anyhow!("id {word_id} missing from vocabulary"))?;
            let weights: Vec<String> = trace.alpha.iter().map(|w| w.to_string()).collect();
            text.push_str(&format!("{word}\t{}\n", weights.join(" ")));
        }
    }
    write_atomic(out, text.as_bytes())?;
    println!("traced {} images", features.len());
    Ok(())
}
