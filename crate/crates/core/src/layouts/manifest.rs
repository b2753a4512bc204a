//! JSON manifest reader and writer.
//!
//! ```json
//! {"categories": [{"id": 1, "name": "person"}],
//!  "images": [{"id": "000001", "file": "000001.png", "width": 128, "height": 128,
//!              "objects": [{"bbox": [4.0, 8.5, 30.0, 40.0], "category_id": 1}]}]}
//! ```
//!
//! Unknown keys are ignored. Boxes that spill over the image border are
//! clamped and reported as warnings.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde_json::{json, Map, Value};
use thiserror::Error;

use super::{BBox, Category, Layout, LayoutObject};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("field `{field}` has the wrong type (expected {expected})")]
    WrongType { field: String, expected: &'static str },
    #[error("field `{field}` is invalid: {reason}")]
    Invalid { field: String, reason: String },
    #[error("`{field}` refers to undeclared category {id}")]
    UnknownCategory { field: String, id: i64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ManifestWarning {
    /// Box extended past the image border and was clamped.
    Clamped {
        image_id: String,
        index: usize,
        original: BBox,
        clamped: BBox,
    },
    /// Box had no area inside the image and was dropped.
    Dropped { image_id: String, index: usize, original: BBox },
}

impl std::fmt::Display for ManifestWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ManifestWarning::Clamped {
                image_id,
                index,
                original,
                clamped,
            } => write!(
                f,
                "image {image_id} object {index}: box {:?} clamped to {:?}",
                [original.x, original.y, original.w, original.h],
                [clamped.x, clamped.y, clamped.w, clamped.h]
            ),
            ManifestWarning::Dropped { image_id, index, original } => write!(
                f,
                "image {image_id} object {index}: box {:?} has no area inside the image, dropped",
                [original.x, original.y, original.w, original.h]
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedManifest {
    pub categories: Vec<Category>,
    pub layouts: Vec<Layout>,
    pub warnings: Vec<ManifestWarning>,
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, ManifestError> {
    obj.get(key).ok_or_else(|| ManifestError::MissingField(join(path, key)))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ManifestError> {
    v.as_object().ok_or_else(|| ManifestError::WrongType {
        field: path.to_string(),
        expected: "object",
    })
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, ManifestError> {
    v.as_array().ok_or_else(|| ManifestError::WrongType {
        field: path.to_string(),
        expected: "array",
    })
}

fn as_i64(v: &Value, path: &str) -> Result<i64, ManifestError> {
    v.as_i64().ok_or_else(|| ManifestError::WrongType {
        field: path.to_string(),
        expected: "integer",
    })
}

fn as_f64(v: &Value, path: &str) -> Result<f64, ManifestError> {
    v.as_f64().ok_or_else(|| ManifestError::WrongType {
        field: path.to_string(),
        expected: "number",
    })
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, ManifestError> {
    v.as_str().ok_or_else(|| ManifestError::WrongType {
        field: path.to_string(),
        expected: "string",
    })
}

fn dimension(v: &Value, path: &str) -> Result<u32, ManifestError> {
    let n = as_i64(v, path)?;
    u32::try_from(n)
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ManifestError::Invalid {
            field: path.to_string(),
            reason: format!("{n} is not a positive pixel count"),
        })
}

/// Parses manifest bytes into unfiltered layouts, objects in manifest order.
pub fn parse_manifest(bytes: &[u8]) -> Result<ParsedManifest, ManifestError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| ManifestError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let root = as_object(&root, "<root>")?;

    let mut categories = Vec::new();
    let mut known = BTreeSet::new();
    for (i, c) in as_array(field(root, "categories", "")?, "categories")?.iter().enumerate() {
        let path = format!("categories[{i}]");
        let c = as_object(c, &path)?;
        let id = as_i64(field(c, "id", &path)?, &join(&path, "id"))?;
        let name = as_str(field(c, "name", &path)?, &join(&path, "name"))?.to_string();
        known.insert(id);
        categories.push(Category { id, name });
    }

    let mut layouts = Vec::new();
    let mut warnings = Vec::new();
    for (i, img) in as_array(field(root, "images", "")?, "images")?.iter().enumerate() {
        let path = format!("images[{i}]");
        let img = as_object(img, &path)?;
        let image_id = match field(img, "id", &path)? {
            Value::String(s) => s.clone(),
            Value::Number(n) if n.is_i64() || n.is_u64() => n.to_string(),
            _ => {
                return Err(ManifestError::WrongType {
                    field: join(&path, "id"),
                    expected: "string",
                })
            }
        };
        let file = PathBuf::from(as_str(field(img, "file", &path)?, &join(&path, "file"))?);
        let width = dimension(field(img, "width", &path)?, &join(&path, "width"))?;
        let height = dimension(field(img, "height", &path)?, &join(&path, "height"))?;

        let mut objects = Vec::new();
        let objs_path = join(&path, "objects");
        for (j, obj) in as_array(field(img, "objects", &path)?, &objs_path)?.iter().enumerate() {
            let opath = format!("{objs_path}[{j}]");
            let obj = as_object(obj, &opath)?;
            let bpath = join(&opath, "bbox");
            let coords = as_array(field(obj, "bbox", &opath)?, &bpath)?;
            if coords.len() != 4 {
                return Err(ManifestError::Invalid {
                    field: bpath,
                    reason: format!("expected [x, y, w, h], got {} values", coords.len()),
                });
            }
            let mut v = [0f64; 4];
            for (k, c) in coords.iter().enumerate() {
                v[k] = as_f64(c, &format!("{bpath}[{k}]"))?;
            }
            let bbox = BBox::new(v[0], v[1], v[2], v[3]);
            if !(bbox.w > 0.0 && bbox.h > 0.0) {
                return Err(ManifestError::Invalid {
                    field: bpath,
                    reason: "box width and height must be positive".into(),
                });
            }
            let cpath = join(&opath, "category_id");
            let class_id = as_i64(field(obj, "category_id", &opath)?, &cpath)?;
            if !known.contains(&class_id) {
                return Err(ManifestError::UnknownCategory {
                    field: cpath,
                    id: class_id,
                });
            }

            match bbox.clamp_to(width, height) {
                Some(clamped) => {
                    if clamped != bbox {
                        warnings.push(ManifestWarning::Clamped {
                            image_id: image_id.clone(),
                            index: j,
                            original: bbox,
                            clamped,
                        });
                    }
                    objects.push(LayoutObject {
                        bbox: clamped,
                        class_id,
                    });
                }
                None => warnings.push(ManifestWarning::Dropped {
                    image_id: image_id.clone(),
                    index: j,
                    original: bbox,
                }),
            }
        }

        layouts.push(Layout {
            image_id,
            file,
            width,
            height,
            objects,
        });
    }

    Ok(ParsedManifest {
        categories,
        layouts,
        warnings,
    })
}

/// Writes layouts back out in the manifest dialect.
pub fn serialize_manifest(categories: &[Category], layouts: &[Layout]) -> String {
    let doc = json!({
        "categories": categories.iter().map(|c| json!({"id": c.id, "name": c.name})).collect::<Vec<_>>(),
        "images": layouts.iter().map(|l| json!({
            "id": l.image_id,
            "file": l.file.to_string_lossy(),
            "width": l.width,
            "height": l.height,
            "objects": l.objects.iter().map(|o| json!({
                "bbox": [o.bbox.x, o.bbox.y, o.bbox.w, o.bbox.h],
                "category_id": o.class_id,
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&doc).expect("manifest values are always serializable")
}
