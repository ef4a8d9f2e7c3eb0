//! Tabular datasets: feature rows, optional labels, split tags and
//! provenance, stored as a CSV file plus a `<stem>.meta.json` sidecar.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{AnnotateError, ErrorCode, Labels};
use crate::design_space::{parse_space, DesignSpace, DesignVector, FeatureKind};
use crate::sampling::{Method, SampleBatch};

pub const LABEL_COLUMNS: [&str; 4] = ["working", "eta_tt", "pr_tt", "error"];

/// Which partition a row belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitTag {
    None,
    Train,
    Test(String),
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitTag::None => f.write_str("none"),
            SplitTag::Train => f.write_str("train"),
            SplitTag::Test(name) => write!(f, "test:{name}"),
        }
    }
}

impl FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(SplitTag::None),
            "train" => Ok(SplitTag::Train),
            _ => match s.strip_prefix("test:") {
                Some(name) if !name.is_empty() => Ok(SplitTag::Test(name.to_string())),
                _ => Err(format!("invalid split tag `{s}`")),
            },
        }
    }
}

impl Serialize for SplitTag {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SplitTag {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A contiguous block of rows produced by one generator call. Rows keep
/// their segment id through subsetting and merging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub method: Method,
    pub seed: u64,
    pub rows: usize,
    #[serde(default)]
    pub clip_events: usize,
    /// Free-form origin of the parent designs (augmentation and grids).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parents_source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub segments: Vec<Segment>,
    /// Segment of each row.
    pub row_segment: Vec<u32>,
    /// Parent index of each row within its segment's parent list.
    pub row_parent: Vec<Option<u32>>,
    pub evaluator: Option<String>,
    pub toolkit_version: String,
    /// Seconds since the epoch; the only field that differs between
    /// otherwise identical runs.
    pub created_unix: u64,
}

impl Provenance {
    fn single(segment: Segment, parents: Option<&[usize]>) -> Self {
        let n = segment.rows;
        Provenance {
            segments: vec![segment],
            row_segment: vec![0; n],
            row_parent: match parents {
                Some(p) => p.iter().map(|&i| Some(i as u32)).collect(),
                None => vec![None; n],
            },
            evaluator: None,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: now_unix(),
        }
    }

    pub fn method_of(&self, row: usize) -> Method {
        self.segments[self.row_segment[row] as usize].method
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub space: DesignSpace,
    pub rows: Vec<DesignVector>,
    pub labels: Option<Vec<Labels>>,
    pub splits: Vec<SplitTag>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    name: String,
    space: String,
    rows: usize,
    labeled: bool,
    splits: Vec<SplitTag>,
    provenance: Provenance,
}

/// `dir/stem.csv` -> `dir/stem.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

impl Dataset {
    /// Unlabeled rows from a single generator.
    pub fn new(
        name: &str,
        space: DesignSpace,
        rows: Vec<DesignVector>,
        method: Method,
        seed: u64,
    ) -> Self {
        let segment = Segment {
            method,
            seed,
            rows: rows.len(),
            clip_events: 0,
            parents_source: None,
        };
        Dataset {
            name: name.to_string(),
            splits: vec![SplitTag::None; rows.len()],
            provenance: Provenance::single(segment, None),
            space,
            rows,
            labels: None,
        }
    }

    pub fn from_batch(name: &str, batch: &SampleBatch) -> Self {
        let segment = Segment {
            method: batch.method,
            seed: batch.seed,
            rows: batch.len(),
            clip_events: batch.clip_events,
            parents_source: None,
        };
        Dataset {
            name: name.to_string(),
            space: batch.space.clone(),
            rows: batch.rows.clone(),
            labels: None,
            splits: vec![SplitTag::None; batch.len()],
            provenance: Provenance::single(segment, batch.parents.as_deref()),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// Working flag of every row.
    pub fn working(&self) -> Result<Vec<bool>, AnnotateError> {
        let labels = self.labels.as_ref().ok_or(AnnotateError::MissingLabels)?;
        Ok(labels.iter().map(|l| l.working).collect())
    }

    /// Rows mapped onto `[0, 1]` by the space.
    pub fn normalized(&self) -> Result<Vec<Vec<f64>>, AnnotateError> {
        Ok(crate::sampling::normalize_rows(&self.space, &self.rows)?)
    }

    /// Row indices carrying `tag`.
    pub fn indices_with(&self, tag: &SplitTag) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| &self.splits[i] == tag)
            .collect()
    }

    /// Distinct test-set names in first-appearance order.
    pub fn test_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for tag in &self.splits {
            if let SplitTag::Test(n) = tag {
                if !names.contains(n) {
                    names.push(n.clone());
                }
            }
        }
        names
    }

    /// Rows at `indices` (in that order), keeping labels, tags and
    /// per-row provenance.
    pub fn subset(&self, name: &str, indices: &[usize]) -> Result<Dataset, AnnotateError> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(AnnotateError::format(
                "subset",
                format!("row {bad} out of range for {} rows", self.len()),
            ));
        }
        let mut provenance = self.provenance.clone();
        provenance.row_segment = indices
            .iter()
            .map(|&i| self.provenance.row_segment[i])
            .collect();
        provenance.row_parent = indices
            .iter()
            .map(|&i| self.provenance.row_parent[i])
            .collect();
        Ok(Dataset {
            name: name.to_string(),
            space: self.space.clone(),
            rows: indices.iter().map(|i| self.rows[*i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            splits: indices.iter().map(|&i| self.splits[i].clone()).collect(),
            provenance,
        })
    }

    /// Concatenate rows of datasets over the same space. Labels must be
    /// present in all parts or in none.
    pub fn concat(name: &str, parts: &[&Dataset]) -> Result<Dataset, AnnotateError> {
        let first = parts
            .first()
            .ok_or_else(|| AnnotateError::Incompatible("nothing to merge".into()))?;
        let labeled = first.is_labeled();
        let mut out = Dataset {
            name: name.to_string(),
            space: first.space.clone(),
            rows: Vec::new(),
            labels: labeled.then(Vec::new),
            splits: Vec::new(),
            provenance: Provenance {
                segments: Vec::new(),
                row_segment: Vec::new(),
                row_parent: Vec::new(),
                evaluator: first.provenance.evaluator.clone(),
                toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
                created_unix: now_unix(),
            },
        };
        for part in parts {
            if part.space.names() != out.space.names() {
                return Err(AnnotateError::Incompatible(format!(
                    "`{}` and `{}` have different features",
                    first.name, part.name
                )));
            }
            if part.is_labeled() != labeled {
                return Err(AnnotateError::Incompatible(
                    "some parts are labeled and others are not".into(),
                ));
            }
            if labeled && part.provenance.evaluator != out.provenance.evaluator {
                return Err(AnnotateError::Incompatible(
                    "parts were labeled by different evaluators".into(),
                ));
            }
            let offset = out.provenance.segments.len() as u32;
            out.provenance
                .segments
                .extend(part.provenance.segments.iter().cloned());
            out.provenance
                .row_segment
                .extend(part.provenance.row_segment.iter().map(|s| s + offset));
            out.provenance
                .row_parent
                .extend(part.provenance.row_parent.iter().copied());
            out.rows.extend(part.rows.iter().cloned());
            out.splits.extend(part.splits.iter().cloned());
            if let (Some(dst), Some(src)) = (out.labels.as_mut(), part.labels.as_ref()) {
                dst.extend(src.iter().copied());
            }
        }
        Ok(out)
    }

    /// Structural consistency of the in-memory record.
    pub fn check(&self) -> Result<(), AnnotateError> {
        let n = self.len();
        let bad = |what: &str, len: usize| {
            Err(AnnotateError::format(
                format!("dataset `{}`", self.name),
                format!("{what} has {len} entries for {n} rows"),
            ))
        };
        if self.splits.len() != n {
            return bad("split list", self.splits.len());
        }
        if let Some(l) = &self.labels {
            if l.len() != n {
                return bad("label list", l.len());
            }
        }
        let p = &self.provenance;
        if p.row_segment.len() != n {
            return bad("row segment list", p.row_segment.len());
        }
        if p.row_parent.len() != n {
            return bad("row parent list", p.row_parent.len());
        }
        if let Some(&s) = p
            .row_segment
            .iter()
            .find(|&&s| s as usize >= p.segments.len())
        {
            return Err(AnnotateError::format(
                "provenance",
                format!("unknown segment {s}"),
            ));
        }
        let d = self.space.dim();
        if let Some(row) = self.rows.iter().find(|r| r.len() != d) {
            return Err(AnnotateError::format(
                "rows",
                format!("row with {} values in a {d}-feature space", row.len()),
            ));
        }
        Ok(())
    }

    fn header(&self) -> Vec<String> {
        let mut header = self.space.names();
        if self.is_labeled() {
            header.extend(LABEL_COLUMNS.iter().map(|s| s.to_string()));
        }
        header
    }

    /// The CSV text. Categorical values are written by name, numbers in
    /// their shortest round-trip decimal form.
    pub fn to_csv_string(&self) -> Result<String, AnnotateError> {
        self.check()?;
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(self.header())?;
        let mut record: Vec<String> = Vec::with_capacity(self.space.dim() + 4);
        for (i, row) in self.rows.iter().enumerate() {
            record.clear();
            for (feature, &v) in self.space.features.iter().zip(row.iter()) {
                record.push(match feature.kind {
                    FeatureKind::Categorical => {
                        feature.categories.get(v as usize).cloned().ok_or_else(|| {
                            AnnotateError::format(
                                "rows",
                                format!("bad category index {v} for `{}`", feature.name),
                            )
                        })?
                    }
                    _ => v.to_string(),
                });
            }
            if let Some(labels) = &self.labels {
                let l = labels[i];
                record.push(if l.working { "1" } else { "0" }.to_string());
                record.push(l.eta_tt.to_string());
                record.push(l.pr_tt.to_string());
                record.push(l.error.map(|e| e.as_str().to_string()).unwrap_or_default());
            }
            writer.write_record(&record)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| AnnotateError::format("csv", e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| AnnotateError::format("csv", e.to_string()))
    }

    /// Parse CSV text written for `space`. The header must list the space's
    /// features in order, optionally followed by all four label columns.
    /// Values are not checked against the bounds; see
    /// [`DesignSpace::validate_vector`]. The rows get a single provenance
    /// segment of method `uniform` and seed 0.
    pub fn from_csv_str(
        name: &str,
        space: DesignSpace,
        text: &str,
    ) -> Result<Dataset, AnnotateError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let names = space.names();
        let d = names.len();
        let labeled = match header.len() {
            n if n == d => false,
            n if n == d + LABEL_COLUMNS.len() => true,
            _ => {
                return Err(AnnotateError::format(
                    "csv header",
                    format!(
                        "expected {d} feature columns (plus optional labels), got {}",
                        header.len()
                    ),
                ))
            }
        };
        if header[..d] != names[..] {
            return Err(AnnotateError::format(
                "csv header",
                format!(
                    "columns do not match the features of space `{}`",
                    space.name
                ),
            ));
        }
        if labeled && header[d..] != LABEL_COLUMNS {
            return Err(AnnotateError::format(
                "csv header",
                format!("label columns must be {}", LABEL_COLUMNS.join(",")),
            ));
        }
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let line = i + 2;
            let context = || format!("csv line {line}");
            if record.len() != header.len() {
                return Err(AnnotateError::format(context(), "wrong number of fields"));
            }
            let mut row = Vec::with_capacity(d);
            for (feature, field) in space.features.iter().zip(record.iter()) {
                let field = field.trim();
                let value = match feature.kind {
                    FeatureKind::Categorical => feature
                        .category_index(field)
                        .map(|c| c as f64)
                        .ok_or_else(|| {
                            AnnotateError::format(
                                context(),
                                format!("unknown category `{field}` for `{}`", feature.name),
                            )
                        })?,
                    kind => {
                        let v = parse_number(field).ok_or_else(|| {
                            AnnotateError::format(
                                context(),
                                format!("`{field}` is not a number ({})", feature.name),
                            )
                        })?;
                        if kind == FeatureKind::Integer && v.fract() != 0.0 {
                            return Err(AnnotateError::format(
                                context(),
                                format!("`{}` must be a whole number", feature.name),
                            ));
                        }
                        v
                    }
                };
                row.push(value);
            }
            rows.push(DesignVector(row));
            if labeled {
                labels.push(
                    parse_labels(&record, d).map_err(|m| AnnotateError::format(context(), m))?,
                );
            }
        }
        let mut dataset = Dataset::new(name, space, rows, Method::Uniform, 0);
        dataset.labels = labeled.then_some(labels);
        Ok(dataset)
    }

    fn sidecar_json(&self) -> Result<String, AnnotateError> {
        let sidecar = Sidecar {
            name: self.name.clone(),
            space: self.space.to_document(),
            rows: self.len(),
            labeled: self.is_labeled(),
            splits: self.splits.clone(),
            provenance: self.provenance.clone(),
        };
        Ok(serde_json::to_string_pretty(&sidecar)? + "\n")
    }

    /// Rebuild a dataset from CSV text and its sidecar JSON.
    pub fn from_parts(csv_text: &str, sidecar_json: &str) -> Result<Dataset, AnnotateError> {
        let sidecar: Sidecar = serde_json::from_str(sidecar_json)?;
        let space = parse_space(&sidecar.space)?;
        let mut dataset = Dataset::from_csv_str(&sidecar.name, space, csv_text)?;
        if dataset.len() != sidecar.rows || dataset.is_labeled() != sidecar.labeled {
            return Err(AnnotateError::format(
                "sidecar",
                format!(
                    "describes {} {} rows, csv holds {} {} rows",
                    sidecar.rows,
                    if sidecar.labeled {
                        "labeled"
                    } else {
                        "unlabeled"
                    },
                    dataset.len(),
                    if dataset.is_labeled() {
                        "labeled"
                    } else {
                        "unlabeled"
                    },
                ),
            ));
        }
        dataset.splits = sidecar.splits;
        dataset.provenance = sidecar.provenance;
        dataset.check()?;
        Ok(dataset)
    }

    /// Write `path` and its sidecar.
    pub fn write(&self, path: &Path) -> Result<(), AnnotateError> {
        let csv_text = self.to_csv_string()?;
        let sidecar = self.sidecar_json()?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, csv_text)?;
        fs::write(sidecar_path(path), sidecar)?;
        Ok(())
    }

    /// Read a CSV file and its sidecar.
    pub fn read(path: &Path) -> Result<Dataset, AnnotateError> {
        let csv_text = fs::read_to_string(path)?;
        let meta = sidecar_path(path);
        let sidecar = fs::read_to_string(&meta).map_err(|e| {
            AnnotateError::format(
                meta.display().to_string(),
                format!("cannot read sidecar: {e}"),
            )
        })?;
        Dataset::from_parts(&csv_text, &sidecar)
    }

    /// Read a CSV file, using its sidecar when present and `space`
    /// otherwise. Rows read without a sidecar get a single provenance
    /// segment of method `uniform` and seed 0.
    pub fn read_with_space(path: &Path, space: &DesignSpace) -> Result<Dataset, AnnotateError> {
        if sidecar_path(path).exists() {
            return Dataset::read(path);
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        let text = fs::read_to_string(path)?;
        let mut ds = Dataset::from_csv_str(&name, space.clone(), &text)?;
        ds.provenance.segments[0].parents_source = Some(path.display().to_string());
        Ok(ds)
    }
}

fn parse_number(field: &str) -> Option<f64> {
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_labels(record: &csv::StringRecord, d: usize) -> Result<Labels, String> {
    let field = |k: usize| record.get(d + k).unwrap_or("").trim();
    let working = match field(0) {
        "1" | "true" => true,
        "0" | "false" => false,
        other => return Err(format!("`{other}` is not a working flag")),
    };
    // Label values may be non-finite; postprocessing flags them.
    let number = |k: usize| {
        field(k)
            .parse::<f64>()
            .map_err(|_| format!("`{}` is not a number ({})", field(k), LABEL_COLUMNS[k]))
    };
    let error = match field(3) {
        "" => None,
        code => Some(code.parse::<ErrorCode>()?),
    };
    Ok(Labels {
        working,
        eta_tt: number(1)?,
        pr_tt: number(2)?,
        error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{augment, sample_uniform};

    fn labeled_sample(n: usize) -> Dataset {
        let space = DesignSpace::compressor();
        let mut ds = Dataset::from_batch("sample", &sample_uniform(&space, n, 2).unwrap());
        ds.labels = Some(
            (0..n)
                .map(|i| match i % 3 {
                    0 => Labels::working(0.7 + i as f64 * 1e-3, 1.9),
                    1 => Labels::failed(ErrorCode::Surge),
                    _ => Labels::failed(ErrorCode::Condensation),
                })
                .collect(),
        );
        ds.provenance.evaluator = Some("compressor-meanline".into());
        ds
    }

    #[test]
    fn split_tag_text_round_trip() {
        for tag in [
            SplitTag::None,
            SplitTag::Train,
            SplitTag::Test("uniform".into()),
        ] {
            assert_eq!(tag.to_string().parse::<SplitTag>().unwrap(), tag);
        }
        assert!("test:".parse::<SplitTag>().is_err());
        assert!("val".parse::<SplitTag>().is_err());
    }

    #[test]
    fn csv_header_and_categorical_names() {
        let ds = labeled_sample(4);
        let text = ds.to_csv_string().unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("r4,beta2,beta4"));
        assert!(header.ends_with("Pr1,working,eta_tt,pr_tt,error"));
        let fluid = ds.space.index_of("fluid").unwrap();
        let first = text.lines().nth(1).unwrap();
        let name = &ds.space.features[fluid].categories[ds.rows[0][fluid] as usize];
        assert_eq!(first.split(',').nth(fluid).unwrap(), name);
    }

    #[test]
    fn file_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = labeled_sample(50);
        ds.splits[3] = SplitTag::Test("uniform".into());
        ds.splits[4] = SplitTag::Train;
        let path = dir.path().join("sub/sample.csv");
        ds.write(&path).unwrap();
        assert!(dir.path().join("sub/sample.meta.json").exists());
        let back = Dataset::read(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn unlabeled_round_trip_and_foreign_csv() {
        let space = DesignSpace::compressor();
        let ds = Dataset::from_batch("u", &sample_uniform(&space, 5, 9).unwrap());
        let text = ds.to_csv_string().unwrap();
        let back = Dataset::from_csv_str("u", space.clone(), &text).unwrap();
        assert_eq!(back.rows, ds.rows);
        assert!(back.labels.is_none());

        let wrong = text.replacen("r4,", "radius,", 1);
        assert!(Dataset::from_csv_str("u", space.clone(), &wrong).is_err());
        let bad_fluid = text.replacen("air", "helium", 1);
        if bad_fluid != text {
            assert!(Dataset::from_csv_str("u", space, &bad_fluid).is_err());
        }
    }

    #[test]
    fn subset_and_concat_keep_provenance() {
        let space = DesignSpace::compressor();
        let base = sample_uniform(&space, 6, 1).unwrap();
        let aug = augment(&space, &base.rows[..2], 4, 0.01, 5).unwrap();
        let a = Dataset::from_batch("a", &base);
        let b = Dataset::from_batch("b", &aug);
        let merged = Dataset::concat("m", &[&a, &b]).unwrap();
        assert_eq!(merged.len(), 10);
        assert_eq!(merged.provenance.method_of(0), Method::Uniform);
        assert_eq!(merged.provenance.method_of(7), Method::Augment);
        assert_eq!(
            merged.provenance.row_parent[6..],
            b.provenance.row_parent[..]
        );

        let sub = merged.subset("s", &[8, 1]).unwrap();
        assert_eq!(
            sub.rows,
            vec![merged.rows[8].clone(), merged.rows[1].clone()]
        );
        assert_eq!(sub.provenance.method_of(0), Method::Augment);
        assert!(merged.subset("s", &[10]).is_err());

        let labeled = labeled_sample(3);
        assert!(Dataset::concat("x", &[&a, &labeled]).is_err());
    }

    #[test]
    fn sidecar_row_count_must_match() {
        let ds = labeled_sample(3);
        let text = ds.to_csv_string().unwrap();
        let meta = ds.sidecar_json().unwrap();
        let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(Dataset::from_parts(&truncated, &meta).is_err());
        assert!(Dataset::from_parts(&text, &meta).is_ok());
    }
}
