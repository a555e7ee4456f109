//! Token vocabulary with count thresholding, truncation, and special tokens.
//!
//! Captions are lowercased, stripped of punctuation, and whitespace-split.
//! The vocabulary keeps every token that occurs at least `min_count` times,
//! plus two specials: `<end>` (sequence terminator, id 0) and `<unk>`
//! (out-of-vocabulary placeholder, id 1). Ids are contiguous and assigned
//! deterministically: specials first, then tokens by descending count with
//! lexicographic tie-breaks.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Sequence terminator. Also serves as the begin-of-sequence marker fed to
/// the decoder at the first step, so no extra special is needed.
pub const END_TOKEN: &str = "<end>";
/// Placeholder for tokens below the count threshold or unseen at build time.
pub const UNK_TOKEN: &str = "<unk>";

/// Characters removed before whitespace splitting.
const PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':', '"', '(', ')'];

/// One captioned image: an opaque image id plus the tokenized caption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionRecord {
    pub image_id: String,
    pub tokens: Vec<String>,
}

impl CaptionRecord {
    /// Tokenizes `text` and builds a record. Returns `None` when tokenization
    /// leaves nothing (e.g. the caption was all punctuation).
    pub fn new(image_id: impl Into<String>, text: &str) -> Option<Self> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return None;
        }
        Some(CaptionRecord {
            image_id: image_id.into(),
            tokens,
        })
    }
}

/// Lowercases, removes punctuation characters, and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .filter(|c| !PUNCTUATION.contains(c))
        .collect::<String>()
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

/// Bidirectional token/id map with `<end>` and `<unk>` specials.
///
/// Immutable after construction; shared reads are safe.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    counts: HashMap<String, u64>,
    end_id: usize,
    unk_id: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from a caption corpus.
    ///
    /// Keeps every token with count >= `min_count`. Specials get ids 0 and 1;
    /// the rest follow in descending-count order, ties broken lexicographically,
    /// so two builds from the same corpus assign identical ids.
    pub fn build(corpus: &[CaptionRecord], min_count: u64) -> Vocabulary {
        assert!(min_count >= 1, "min_count must be >= 1");
        let mut counts: HashMap<String, u64> = HashMap::new();
        for record in corpus {
            for token in &record.tokens {
                *counts.entry(token.clone()).or_insert(0) += 1;
            }
        }

        let mut kept: Vec<(&String, u64)> = counts
            .iter()
            .filter(|(token, &count)| {
                count >= min_count && token.as_str() != END_TOKEN && token.as_str() != UNK_TOKEN
            })
            .map(|(token, &count)| (token, count))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut id_to_token = vec![END_TOKEN.to_owned(), UNK_TOKEN.to_owned()];
        id_to_token.extend(kept.into_iter().map(|(token, _)| token.clone()));
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(id, token)| (token.clone(), id))
            .collect();

        Vocabulary {
            token_to_id,
            id_to_token,
            counts,
            end_id: 0,
            unk_id: 1,
        }
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn end_id(&self) -> usize {
        self.end_id
    }

    pub fn unk_id(&self) -> usize {
        self.unk_id
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    /// Occurrence count recorded at build time (0 for unseen tokens).
    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    /// Maps the first `min(len, max_len)` tokens to ids (unknown tokens map
    /// to `<unk>`) and appends `<end>`. The result always terminates with
    /// `end_id` and never exceeds `max_len + 1` ids.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S], max_len: usize) -> Vec<usize> {
        assert!(max_len >= 1, "max_len must be >= 1");
        let mut ids: Vec<usize> = tokens
            .iter()
            .take(max_len)
            .map(|t| self.id_of(t.as_ref()).unwrap_or(self.unk_id))
            .collect();
        ids.push(self.end_id);
        ids
    }

    /// Inverse of [`encode`](Self::encode): tokens up to but excluding the
    /// first `<end>`. Out-of-range ids signal corrupt input.
    pub fn decode(&self, ids: &[usize]) -> Result<Vec<String>> {
        let mut tokens = Vec::new();
        for &id in ids {
            if id == self.end_id {
                break;
            }
            let token = self.token(id).ok_or(Error::IdOutOfRange {
                id,
                size: self.size(),
            })?;
            tokens.push(token.to_owned());
        }
        Ok(tokens)
    }

    /// Writes the vocabulary as a version line followed by
    /// `id<TAB>token<TAB>count` lines in id order.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "CAPFORGE-VOCAB v1")?;
        for (id, token) in self.id_to_token.iter().enumerate() {
            writeln!(w, "{id}\t{token}\t{}", self.count(token))?;
        }
        Ok(())
    }

    /// Parses the format written by [`write_to`](Self::write_to).
    pub fn read_from<R: BufRead>(r: R) -> Result<Vocabulary> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::parse("empty vocabulary file"))?;
        let first = first.map_err(|e| Error::parse(e.to_string()))?;
        if first.trim() != "CAPFORGE-VOCAB v1" {
            return Err(Error::VersionMismatch {
                expected: "CAPFORGE-VOCAB v1".into(),
                found: first,
            });
        }

        let mut id_to_token = Vec::new();
        let mut counts = HashMap::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::parse_at(idx + 1, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.splitn(3, '\t');
            let id: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::parse_at(idx + 1, "bad id field"))?;
            let token = fields
                .next()
                .ok_or_else(|| Error::parse_at(idx + 1, "missing token field"))?;
            let count: u64 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::parse_at(idx + 1, "bad count field"))?;
            if id != id_to_token.len() {
                return Err(Error::parse_at(
                    idx + 1,
                    format!("ids not contiguous: expected {}, found {id}", id_to_token.len()),
                ));
            }
            id_to_token.push(token.to_owned());
            counts.insert(token.to_owned(), count);
        }

        let token_to_id: HashMap<String, usize> = id_to_token
            .iter()
            .enumerate()
            .map(|(id, token)| (token.clone(), id))
            .collect();
        if token_to_id.len() != id_to_token.len() {
            return Err(Error::parse("duplicate token in vocabulary file"));
        }
        let end_id = token_to_id
            .get(END_TOKEN)
            .copied()
            .ok_or_else(|| Error::parse("vocabulary file lacks <end>"))?;
        let unk_id = token_to_id
            .get(UNK_TOKEN)
            .copied()
            .ok_or_else(|| Error::parse("vocabulary file lacks <unk>"))?;
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
            counts,
            end_id,
            unk_id,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Vocabulary> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file)).map_err(|e| e.with_path(path))
    }
}

/// Reads a caption corpus: newline-delimited `image_id<TAB>caption text`
/// records. Lines that are empty or start with `#` are skipped, as are
/// captions that tokenize to nothing.
pub fn read_corpus<R: BufRead>(r: R) -> Result<Vec<CaptionRecord>> {
    let mut records = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::parse_at(idx + 1, e.to_string()))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (image_id, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse_at(idx + 1, "expected `image_id<TAB>caption`"))?;
        if let Some(record) = CaptionRecord::new(image_id, text) {
            records.push(record);
        }
    }
    Ok(records)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CaptionRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file)).map_err(|e| e.with_path(path))
}
