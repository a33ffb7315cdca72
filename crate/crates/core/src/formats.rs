//! On-disk formats: annotation JSON, proposal CSV and heatmap output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{Heatmap, Proposal};
use crate::geometry::{BBox, ImageExtent};

/// Reading or writing a data file failed; every variant names the
/// offending record.
#[derive(Debug)]
pub enum FormatError {
    Io(std::io::Error),
    MalformedJson {
        path: String,
        source: serde_json::Error,
    },
    DanglingImageId {
        annotation_index: usize,
        image_id: u64,
    },
    BadImageDims {
        image_id: u64,
        width: i64,
        height: i64,
    },
    BadAnnotationDims {
        annotation_index: usize,
        image_id: u64,
        w: f64,
        h: f64,
    },
    DuplicateImageId {
        image_id: u64,
    },
    BadProposalRow {
        path: String,
        line: usize,
        reason: String,
    },
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::Io(e) => write!(f, "i/o error: {e}"),
            FormatError::MalformedJson { path, source } => {
                write!(f, "malformed JSON in {path}: {source}")
            }
            FormatError::DanglingImageId {
                annotation_index,
                image_id,
            } => write!(
                f,
                "annotation {annotation_index} references unknown image id {image_id}"
            ),
            FormatError::BadImageDims {
                image_id,
                width,
                height,
            } => write!(
                f,
                "image {image_id} has non-positive dimensions {width}x{height}"
            ),
            FormatError::BadAnnotationDims {
                annotation_index,
                image_id,
                w,
                h,
            } => write!(
                f,
                "annotation {annotation_index} (image {image_id}) has non-positive bbox size {w}x{h}"
            ),
            FormatError::DuplicateImageId { image_id } => {
                write!(f, "duplicate image id {image_id}")
            }
            FormatError::BadProposalRow { path, line, reason } => {
                write!(f, "bad proposal row at {path}:{line}: {reason}")
            }
        }
    }
}

impl std::error::Error for FormatError {}

impl From<std::io::Error> for FormatError {
    fn from(e: std::io::Error) -> Self {
        FormatError::Io(e)
    }
}

/// Minimal annotation schema: images with sizes, annotations with
/// corner-plus-size boxes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<AnnotationRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub width: i64,
    pub height: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image_id: u64,
    /// `[x, y, w, h]`
    pub bbox: [f64; 4],
    pub category_id: u32,
}

/// Ground truth of one image after validation.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGt {
    pub extent: ImageExtent,
    pub gts: Vec<(BBox, u32)>,
}

/// Validated ground-truth index keyed by image id.
pub type GtIndex = BTreeMap<u64, ImageGt>;

/// Parse and validate an annotation file into a per-image index.
pub fn read_annotations(path: &Path) -> Result<GtIndex, FormatError> {
    let text = fs::read_to_string(path)?;
    let file: AnnotationFile =
        serde_json::from_str(&text).map_err(|source| FormatError::MalformedJson {
            path: path.display().to_string(),
            source,
        })?;
    index_annotations(&file)
}

/// Validate an in-memory annotation file.
pub fn index_annotations(file: &AnnotationFile) -> Result<GtIndex, FormatError> {
    let mut index = GtIndex::new();
    for img in &file.images {
        if img.width <= 0 || img.height <= 0 {
            return Err(FormatError::BadImageDims {
                image_id: img.id,
                width: img.width,
                height: img.height,
            });
        }
        let prev = index.insert(
            img.id,
            ImageGt {
                extent: ImageExtent::new(img.width as u32, img.height as u32),
                gts: Vec::new(),
            },
        );
        if prev.is_some() {
            return Err(FormatError::DuplicateImageId { image_id: img.id });
        }
    }
    for (i, ann) in file.annotations.iter().enumerate() {
        let [x, y, w, h] = ann.bbox;
        let entry = index
            .get_mut(&ann.image_id)
            .ok_or(FormatError::DanglingImageId {
                annotation_index: i,
                image_id: ann.image_id,
            })?;
        if w <= 0.0 || h <= 0.0 {
            return Err(FormatError::BadAnnotationDims {
                annotation_index: i,
                image_id: ann.image_id,
                w,
                h,
            });
        }
        entry.gts.push((BBox::from_xywh(x, y, w, h), ann.category_id));
    }
    Ok(index)
}

pub fn write_annotations(path: &Path, file: &AnnotationFile) -> Result<(), FormatError> {
    let json = serde_json::to_string_pretty(file).expect("annotation serialization");
    fs::write(path, json)?;
    Ok(())
}

const PROPOSAL_HEADER: &str = "image_id,x1,y1,x2,y2,score";

/// Write proposals as CSV, grouped by ascending image id, score-descending
/// within each group (the order the engine emits).
pub fn write_proposals(
    path: &Path,
    per_image: &BTreeMap<u64, Vec<Proposal>>,
) -> Result<(), FormatError> {
    let mut out = String::new();
    out.push_str(PROPOSAL_HEADER);
    out.push('\n');
    for (id, props) in per_image {
        for p in props {
            let b = &p.bbox;
            out.push_str(&format!(
                "{id},{},{},{},{},{}\n",
                b.x1, b.y1, b.x2, b.y2, p.score
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parse a proposal CSV back into per-image groups, validating every row.
pub fn read_proposals(path: &Path) -> Result<BTreeMap<u64, Vec<Proposal>>, FormatError> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == PROPOSAL_HEADER => {}
        Some((_, other)) => {
            return Err(FormatError::BadProposalRow {
                path: display,
                line: 1,
                reason: format!("expected header '{PROPOSAL_HEADER}', found '{other}'"),
            })
        }
        None => {
            return Err(FormatError::BadProposalRow {
                path: display,
                line: 1,
                reason: "empty file".into(),
            })
        }
    }
    let mut out: BTreeMap<u64, Vec<Proposal>> = BTreeMap::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row = i + 1; // 1-based for diagnostics
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(FormatError::BadProposalRow {
                path: display,
                line: row,
                reason: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let id: u64 = fields[0].parse().map_err(|_| FormatError::BadProposalRow {
            path: display.clone(),
            line: row,
            reason: format!("unparseable image id '{}'", fields[0]),
        })?;
        let mut nums = [0.0f64; 5];
        for (k, field) in fields[1..].iter().enumerate() {
            nums[k] = field.parse().map_err(|_| FormatError::BadProposalRow {
                path: display.clone(),
                line: row,
                reason: format!("unparseable number '{field}'"),
            })?;
        }
        let [x1, y1, x2, y2, score] = nums;
        if x2 < x1 || y2 < y1 {
            return Err(FormatError::BadProposalRow {
                path: display,
                line: row,
                reason: format!("inverted box [{x1}, {y1}, {x2}, {y2}]"),
            });
        }
        if !score.is_finite() {
            return Err(FormatError::BadProposalRow {
                path: display,
                line: row,
                reason: format!("non-finite score {score}"),
            });
        }
        out.entry(id).or_default().push(Proposal {
            bbox: BBox::new(x1, y1, x2, y2),
            score,
        });
    }
    Ok(out)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum HeatmapFormat {
    Pgm,
    Csv,
}

/// Write a heatmap as binary PGM (P5, maxval 255, values quantized as
/// `round(v * 255)`) or as CSV floats.
pub fn write_heatmap(
    grid: &Heatmap,
    path: &Path,
    format: HeatmapFormat,
) -> Result<(), FormatError> {
    match format {
        HeatmapFormat::Pgm => {
            let mut bytes = Vec::with_capacity(32 + grid.values.len());
            write!(bytes, "P5\n{} {}\n255\n", grid.width, grid.height)?;
            bytes.extend(
                grid.values
                    .iter()
                    .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
            );
            fs::write(path, bytes)?;
        }
        HeatmapFormat::Csv => {
            let mut out = String::new();
            for row in grid.values.chunks(grid.width) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
            fs::write(path, out)?;
        }
    }
    Ok(())
}

/// Read back a CSV heatmap (testing aid; PGM is write-only).
pub fn read_heatmap_csv(path: &Path) -> Result<Heatmap, FormatError> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut width = 0;
    let mut height = 0;
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.parse().unwrap_or(f64::NAN))
            .collect();
        width = row.len();
        height += 1;
        values.extend(row);
    }
    Ok(Heatmap {
        width,
        height,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Instant;

    fn sample_annotations() -> AnnotationFile {
        AnnotationFile {
            images: vec![
                ImageRecord {
                    id: 1,
                    width: 100,
                    height: 80,
                },
                ImageRecord {
                    id: 2,
                    width: 64,
                    height: 64,
                },
            ],
            annotations: vec![
                AnnotationRecord {
                    image_id: 1,
                    bbox: [10.0, 10.0, 30.0, 20.0],
                    category_id: 3,
                },
                AnnotationRecord {
                    image_id: 2,
                    bbox: [0.0, 0.0, 16.0, 16.0],
                    category_id: 0,
                },
            ],
        }
    }

    #[test]
    fn annotations_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.json");
        let file = sample_annotations();
        write_annotations(&path, &file).unwrap();
        let index = read_annotations(&path).unwrap();
        assert_eq!(index.len(), 2);
        assert_eq!(index[&1].extent, ImageExtent::new(100, 80));
        assert_eq!(index[&1].gts[0].0, BBox::new(10.0, 10.0, 40.0, 30.0));
        assert_eq!(index[&2].gts[0].1, 0);
    }

    #[test]
    fn dangling_image_id_is_named() {
        let mut file = sample_annotations();
        file.annotations[1].image_id = 99;
        let err = index_annotations(&file).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("annotation 1"), "{msg}");
        assert!(msg.contains("99"), "{msg}");
    }

    #[test]
    fn negative_dims_are_named() {
        let mut file = sample_annotations();
        file.images[0].height = -5;
        let msg = index_annotations(&file).unwrap_err().to_string();
        assert!(msg.contains("image 1"), "{msg}");

        let mut file = sample_annotations();
        file.annotations[0].bbox = [0.0, 0.0, 10.0, 0.0];
        let msg = index_annotations(&file).unwrap_err().to_string();
        assert!(msg.contains("annotation 0"), "{msg}");
    }

    #[test]
    fn malformed_json_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{ not json").unwrap();
        let err = read_annotations(&path).unwrap_err();
        assert!(matches!(err, FormatError::MalformedJson { .. }));
    }

    #[test]
    fn large_annotation_file_parses_quickly() {
        let images: Vec<ImageRecord> = (0..5000)
            .map(|i| ImageRecord {
                id: i,
                width: 640,
                height: 480,
            })
            .collect();
        let annotations: Vec<AnnotationRecord> = (0..5000)
            .flat_map(|i| {
                (0..5).map(move |k| AnnotationRecord {
                    image_id: i,
                    bbox: [k as f64 * 10.0, 5.0, 20.0, 20.0],
                    category_id: k,
                })
            })
            .collect();
        let file = AnnotationFile {
            images,
            annotations,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.json");
        write_annotations(&path, &file).unwrap();
        let start = Instant::now();
        let index = read_annotations(&path).unwrap();
        let elapsed = start.elapsed();
        assert_eq!(index.len(), 5000);
        assert!(elapsed.as_secs_f64() < 5.0, "parse took {elapsed:?}");
    }

    #[test]
    fn proposals_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("props.csv");
        let mut groups = BTreeMap::new();
        groups.insert(
            7u64,
            vec![
                Proposal {
                    bbox: BBox::new(1.25, 2.5, 10.125, 20.0625),
                    score: 0.987654321,
                },
                Proposal {
                    bbox: BBox::new(0.1, 0.2, 0.3, 0.4),
                    score: 0.5,
                },
            ],
        );
        groups.insert(
            9u64,
            vec![Proposal {
                bbox: BBox::new(5.0, 5.0, 6.0, 6.0),
                score: 7.25,
            }],
        );
        write_proposals(&path, &groups).unwrap();
        let back = read_proposals(&path).unwrap();
        assert_eq!(back, groups);
    }

    #[test]
    fn bad_proposal_rows_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        fs::write(&path, "image_id,x1,y1,x2,y2,score\n1,0,0,10,10,0.5\n1,5,5,2,9,0.5\n").unwrap();
        let msg = read_proposals(&path).unwrap_err().to_string();
        assert!(msg.contains(":3"), "{msg}");
        assert!(msg.contains("inverted"), "{msg}");

        fs::write(&path, "image_id,x1,y1,x2,y2,score\n1,0,0,ten,10,0.5\n").unwrap();
        let msg = read_proposals(&path).unwrap_err().to_string();
        assert!(msg.contains(":2"), "{msg}");

        fs::write(&path, "wrong,header\n").unwrap();
        let msg = read_proposals(&path).unwrap_err().to_string();
        assert!(msg.contains("header"), "{msg}");
    }

    #[test]
    fn heatmap_pgm_bytes_are_quantized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.pgm");
        let grid = Heatmap {
            width: 2,
            height: 2,
            values: vec![0.0, 1.0, 0.5, 0.25],
        };
        write_heatmap(&grid, &path, HeatmapFormat::Pgm).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        assert_eq!(&bytes[11..], &[0u8, 255, 128, 64]);
    }

    #[test]
    fn heatmap_all_zero_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.pgm");
        let grid = Heatmap {
            width: 3,
            height: 1,
            values: vec![0.0; 3],
        };
        write_heatmap(&grid, &path, HeatmapFormat::Pgm).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[bytes.len() - 3..], &[0u8, 0, 0]);
    }

    #[test]
    fn heatmap_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let grid = Heatmap {
            width: 3,
            height: 2,
            values: vec![0.0, 0.125, 1.0, 0.3333333333333333, 0.5, 0.9999999],
        };
        write_heatmap(&grid, &path, HeatmapFormat::Csv).unwrap();
        let back = read_heatmap_csv(&path).unwrap();
        assert_eq!(back.width, 3);
        assert_eq!(back.height, 2);
        for (a, b) in grid.values.iter().zip(&back.values) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
