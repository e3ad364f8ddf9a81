use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    /// 1-based row number in the source file (CSV: line number; JSON: array position).
    pub row: usize,
    pub document_path: PathBuf,
    pub ground_truth_path: Option<PathBuf>,
    pub config_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
    pub config_ref: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestFormat {
    Csv,
    Json,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRow {
    document_path: String,
    #[serde(default)]
    ground_truth_path: Option<String>,
    #[serde(default)]
    config_ref: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawJson {
    Rows(Vec<RawRow>),
    Wrapped { rows: Vec<RawRow> },
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}

/// Parses manifest text. Relative paths are resolved against `base_dir`;
/// nothing is checked on disk.
pub fn parse_manifest(text: &str, format: ManifestFormat, base_dir: &Path) -> Result<Manifest> {
    let mut raw_rows: Vec<(usize, RawRow)> = Vec::new();
    match format {
        ManifestFormat::Json => {
            let raw: RawJson =
                serde_json::from_str(text).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
            let rows = match raw {
                RawJson::Rows(r) | RawJson::Wrapped { rows: r } => r,
            };
            raw_rows.extend(rows.into_iter().enumerate().map(|(i, r)| (i + 1, r)));
        }
        ManifestFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            let headers = reader
                .headers()
                .map_err(|e| Error::Parse(format!("manifest header: {e}")))?
                .clone();
            if !headers.iter().any(|h| h == "document_path") {
                return Err(Error::Validation(
                    "manifest row 1: missing document_path column".into(),
                ));
            }
            for rec in reader.records() {
                let rec = rec.map_err(|e| {
                    let line = e.position().map_or(0, |p| p.line());
                    Error::Validation(format!("manifest row {line}: {e}"))
                })?;
                let line = rec.position().map_or(0, |p| p.line()) as usize;
                let row: RawRow = rec
                    .deserialize(Some(&headers))
                    .map_err(|e| Error::Validation(format!("manifest row {line}: {e}")))?;
                raw_rows.push((line, row));
            }
        }
    }

    let resolve = |p: &str| {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            base_dir.join(p)
        }
    };
    let mut rows = Vec::with_capacity(raw_rows.len());
    let mut config_ref: Option<String> = None;
    for (row, r) in raw_rows {
        let document_path = non_empty(Some(r.document_path)).ok_or_else(|| {
            Error::Validation(format!("manifest row {row}: document_path is empty"))
        })?;
        let cref = non_empty(r.config_ref);
        if let Some(c) = &cref {
            match &config_ref {
                Some(existing) if existing != c => {
                    return Err(Error::Validation(format!(
                        "manifest row {row}: config_ref {c:?} differs from {existing:?}; a manifest may name one configuration"
                    )))
                }
                _ => config_ref = Some(c.clone()),
            }
        }
        rows.push(ManifestRow {
            row,
            document_path: resolve(&document_path),
            ground_truth_path: non_empty(r.ground_truth_path).map(|p| resolve(&p)),
            config_ref: cref,
        });
    }
    if rows.is_empty() {
        return Err(Error::Validation("manifest: no rows".into()));
    }
    Ok(Manifest { rows, config_ref })
}

/// Loads a manifest (`.json` as JSON, anything else as CSV) and checks that
/// every referenced file exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => ManifestFormat::Json,
        _ => ManifestFormat::Csv,
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let manifest = parse_manifest(&read_to_string(path)?, format, base)?;
    let mut missing = Vec::new();
    for r in &manifest.rows {
        if !r.document_path.is_file() {
            missing.push(format!(
                "manifest row {}: document not found: {}",
                r.row,
                r.document_path.display()
            ));
        }
        if let Some(gt) = &r.ground_truth_path {
            if !gt.is_file() {
                missing.push(format!(
                    "manifest row {}: ground truth not found: {}",
                    r.row,
                    gt.display()
                ));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Validation(missing.join("; ")));
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_resolve_relative_to_base() {
        let text =
            "document_path,ground_truth_path,config_ref\np/a.json,gt/a.json,\n/abs/b.json,,\n";
        let m = parse_manifest(text, ManifestFormat::Csv, Path::new("/data")).unwrap();
        assert_eq!(m.rows.len(), 2);
        assert_eq!(m.rows[0].row, 2);
        assert_eq!(m.rows[0].document_path, PathBuf::from("/data/p/a.json"));
        assert_eq!(
            m.rows[0].ground_truth_path,
            Some(PathBuf::from("/data/gt/a.json"))
        );
        assert_eq!(m.rows[1].document_path, PathBuf::from("/abs/b.json"));
        assert_eq!(m.rows[1].ground_truth_path, None);
    }

    #[test]
    fn json_forms() {
        let a = parse_manifest(
            r#"[{"document_path":"x.json"}]"#,
            ManifestFormat::Json,
            Path::new("."),
        )
        .unwrap();
        let b = parse_manifest(
            r#"{"rows":[{"document_path":"x.json"}]}"#,
            ManifestFormat::Json,
            Path::new("."),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors_carry_row_numbers() {
        let text = "document_path,config_ref\na.json,one\n,one\n";
        let e = parse_manifest(text, ManifestFormat::Csv, Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("row 3"), "{e}");
        let text = "document_path,config_ref\na.json,one\nb.json,two\n";
        let e = parse_manifest(text, ManifestFormat::Csv, Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("row 3"), "{e}");
        assert!(parse_manifest("path\nx\n", ManifestFormat::Csv, Path::new(".")).is_err());
        assert!(parse_manifest("document_path\n", ManifestFormat::Csv, Path::new(".")).is_err());
    }

    #[test]
    fn missing_files_are_reported_by_row() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.json"), "{}").unwrap();
        let m = dir.path().join("m.csv");
        std::fs::write(&m, "document_path\na.json\nmissing.json\n").unwrap();
        let e = load_manifest(&m).unwrap_err().to_string();
        assert!(e.contains("row 3") && e.contains("missing.json"), "{e}");
    }
}
