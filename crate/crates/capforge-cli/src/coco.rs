//! COCO caption JSON ingestion.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use std::collections::HashSet;

use capforge::vocab::CaptionRecord;

#[derive(Debug, Deserialize)]
struct CocoCaptionFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
}

#[derive(Debug, Deserialize)]
struct CocoImage {
    id: i64,
    #[serde(default)]
    #[allow(dead_code)]
    file_name: String,
}

#[derive(Debug, Deserialize)]
struct CocoAnnotation {
    image_id: i64,
    caption: String,
}

/// Parses a COCO captions JSON document into caption records, one per
/// annotation in annotation order. Every annotation must reference a listed
/// image; captions that tokenize to nothing are dropped.
pub fn import_coco_captions(json: &str) -> Result<Vec<CaptionRecord>> {
    let file: CocoCaptionFile =
        serde_json::from_str(json).context("malformed COCO captions JSON")?;
    let known: HashSet<i64> = file.images.iter().map(|image| image.id).collect();
    let mut records = Vec::with_capacity(file.annotations.len());
    for annotation in &file.annotations {
        if !known.contains(&annotation.image_id) {
            bail!(
                "annotation references unknown image id `{}`",
                annotation.image_id
            );
        }
        if let Some(record) =
            CaptionRecord::new(annotation.image_id.to_string(), &annotation.caption)
        {
            records.push(record);
        }
    }
    Ok(records)
}
