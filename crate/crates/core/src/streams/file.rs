//! Eager CSV and ARFF ingestion.
//!
//! The whole file is parsed up front so malformed rows are reported with
//! their line number before any learning starts. The last column is the
//! class. Values `?` and empty fields are missing.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttributeKind, Schema, StreamSource};
use crate::error::{Error, Result};
use crate::mdp::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Csv,
    Arff,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(FileFormat::Csv),
            "arff" => Some(FileFormat::Arff),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NominalEncoding {
    #[default]
    Index,
    OneHot,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingValues {
    #[default]
    Error,
    ZeroFill,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FileOptions {
    /// Inferred from the extension when absent.
    #[serde(default)]
    pub format: Option<FileFormat>,
    #[serde(default)]
    pub nominal_encoding: NominalEncoding,
    #[serde(default)]
    pub missing: MissingValues,
    /// Declared class labels for CSV. Without it, labels are numbered in
    /// order of first appearance.
    #[serde(default)]
    pub classes: Option<Vec<String>>,
}

/// Attribute as declared or inferred, before encoding.
#[derive(Debug, Clone)]
enum Column {
    Numeric,
    Nominal(Vec<String>),
}

impl Column {
    fn lookup(&self) -> HashMap<&str, usize> {
        match self {
            Column::Numeric => HashMap::new(),
            Column::Nominal(v) => v.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect(),
        }
    }
}

/// In-memory source produced by [`ingest_file`].
#[derive(Debug, Clone)]
pub struct FileSource {
    schema: Schema,
    instances: Vec<Instance>,
    class_names: Vec<String>,
    next: usize,
}

impl FileSource {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }
}

impl StreamSource for FileSource {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let x = self.instances.get(self.next).cloned();
        self.next += 1;
        Ok(x)
    }
}

pub fn ingest_file(path: &Path, options: &FileOptions) -> Result<FileSource> {
    let format = options
        .format
        .or_else(|| FileFormat::from_path(path))
        .ok_or_else(|| {
            Error::InvalidConfig(format!("cannot infer format of {}", path.display()))
        })?;
    let text = fs::read_to_string(path)?;
    match format {
        FileFormat::Csv => ingest_csv(&text, options),
        FileFormat::Arff => ingest_arff(&text, options),
    }
}

fn is_missing(v: &str) -> bool {
    v.is_empty() || v == "?"
}

/// Raw rows with their 1-based line numbers.
type Rows = Vec<(usize, Vec<String>)>;

pub(crate) fn ingest_csv(text: &str, options: &FileOptions) -> Result<FileSource> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if names.len() < 2 {
        return Err(Error::parse(
            1,
            "header needs at least one attribute and a class column",
        ));
    }
    let mut rows: Rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    let d = names.len() - 1;
    let columns: Vec<Column> = (0..d)
        .map(|j| {
            let numeric = rows
                .iter()
                .all(|(_, r)| is_missing(&r[j]) || r[j].parse::<f64>().is_ok());
            if numeric {
                Column::Numeric
            } else {
                let mut seen = Vec::new();
                for (_, r) in &rows {
                    if !is_missing(&r[j]) && !seen.contains(&r[j]) {
                        seen.push(r[j].clone());
                    }
                }
                Column::Nominal(seen)
            }
        })
        .collect();
    let (classes, open) = match &options.classes {
        Some(c) => (c.clone(), false),
        None => (Vec::new(), true),
    };
    build(names[..d].to_vec(), columns, classes, open, rows, options)
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['\'', '"'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

/// Splits an ARFF data row on commas outside quotes.
fn split_row(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    for c in line.chars() {
        match (quote, c) {
            (None, '\'' | '"') => {
                quote = Some(c);
                cur.push(c);
            }
            (Some(q), c) if c == q => {
                quote = None;
                cur.push(c);
            }
            (None, ',') => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out.into_iter().map(|v| unquote(&v).to_string()).collect()
}

/// Parses `@attribute name type`, where the name may be quoted.
fn parse_attribute(rest: &str, line: usize) -> Result<(String, Column)> {
    let rest = rest.trim();
    let (name, ty) = match rest.chars().next() {
        Some(q @ ('\'' | '"')) => {
            let end = rest[1..]
                .find(q)
                .ok_or_else(|| Error::parse(line, "unterminated attribute name"))?
                + 1;
            (rest[1..end].to_string(), rest[end + 1..].trim())
        }
        _ => {
            let end = rest
                .find(char::is_whitespace)
                .ok_or_else(|| Error::parse(line, "attribute without a type"))?;
            (rest[..end].to_string(), rest[end..].trim())
        }
    };
    if let Some(body) = ty.strip_prefix('{') {
        let body = body
            .strip_suffix('}')
            .ok_or_else(|| Error::parse(line, "unterminated nominal value list"))?;
        let values: Vec<String> = split_row(body)
            .into_iter()
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(Error::parse(line, "nominal attribute without values"));
        }
        return Ok((name, Column::Nominal(values)));
    }
    match ty.to_ascii_lowercase().as_str() {
        "numeric" | "real" | "integer" => Ok((name, Column::Numeric)),
        other => Err(Error::parse(
            line,
            format!("unsupported attribute type `{other}`"),
        )),
    }
}

pub(crate) fn ingest_arff(text: &str, options: &FileOptions) -> Result<FileSource> {
    let mut attrs: Vec<(String, Column)> = Vec::new();
    let mut rows: Rows = Vec::new();
    let mut in_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('%') {
            continue;
        }
        if in_data {
            if l.starts_with('{') {
                return Err(Error::parse(line, "sparse ARFF rows are not supported"));
            }
            rows.push((line, split_row(l)));
            continue;
        }
        let lower = l.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            continue;
        } else if lower.starts_with("@attribute") {
            attrs.push(parse_attribute(&l["@attribute".len()..], line)?);
        } else if lower.starts_with("@data") {
            in_data = true;
        } else {
            return Err(Error::parse(line, format!("unexpected header line `{l}`")));
        }
    }
    if !in_data {
        return Err(Error::parse(text.lines().count(), "missing @data section"));
    }
    let Some((_, Column::Nominal(classes))) = attrs.pop() else {
        return Err(Error::InvalidConfig(
            "the last ARFF attribute must be a nominal class".into(),
        ));
    };
    if attrs.is_empty() {
        return Err(Error::InvalidConfig(
            "ARFF file declares no features".into(),
        ));
    }
    let (names, columns) = attrs.into_iter().unzip();
    build(names, columns, classes, false, rows, options)
}

fn build(
    names: Vec<String>,
    columns: Vec<Column>,
    mut classes: Vec<String>,
    open_classes: bool,
    rows: Rows,
    options: &FileOptions,
) -> Result<FileSource> {
    let d = columns.len();
    let lookups: Vec<HashMap<&str, usize>> = columns.iter().map(Column::lookup).collect();
    let mut class_index: HashMap<String, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();
    let one_hot = options.nominal_encoding == NominalEncoding::OneHot;

    let mut instances = Vec::with_capacity(rows.len());
    for (line, row) in &rows {
        let line = *line;
        if row.len() != d + 1 {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", d + 1, row.len()),
            ));
        }
        let mut x = Vec::with_capacity(d);
        for (j, v) in row[..d].iter().enumerate() {
            let missing = is_missing(v);
            if missing && options.missing == MissingValues::Error {
                return Err(Error::parse(
                    line,
                    format!("missing value for `{}`", names[j]),
                ));
            }
            match &columns[j] {
                Column::Numeric => {
                    let value = if missing {
                        0.0
                    } else {
                        v.parse::<f64>().map_err(|_| {
                            Error::parse(line, format!("`{v}` is not numeric ({})", names[j]))
                        })?
                    };
                    x.push(value);
                }
                Column::Nominal(values) => {
                    let idx = if missing {
                        None
                    } else {
                        let idx = lookups[j].get(v.as_str()).ok_or_else(|| {
                            Error::parse(line, format!("unknown value `{v}` for `{}`", names[j]))
                        })?;
                        Some(*idx)
                    };
                    if one_hot {
                        x.extend((0..values.len()).map(|k| if Some(k) == idx { 1.0 } else { 0.0 }));
                    } else {
                        x.push(idx.unwrap_or(0) as f64);
                    }
                }
            }
        }
        let label_text = &row[d];
        if is_missing(label_text) {
            return Err(Error::parse(line, "missing class label"));
        }
        let label = match class_index.get(label_text) {
            Some(&c) => c,
            None if open_classes => {
                classes.push(label_text.clone());
                class_index.insert(label_text.clone(), classes.len() - 1);
                classes.len() - 1
            }
            None => {
                return Err(Error::parse(
                    line,
                    format!("unknown class label `{label_text}`"),
                ))
            }
        };
        instances.push(Instance::new(x, label));
    }
    if instances.is_empty() {
        return Err(Error::EmptyStream);
    }
    if classes.len() < 2 {
        return Err(Error::InvalidConfig(
            "a classification stream needs at least two classes".into(),
        ));
    }

    let mut attributes = Vec::new();
    let mut out_names = Vec::new();
    for (name, col) in names.iter().zip(&columns) {
        match col {
            Column::Numeric => {
                attributes.push(AttributeKind::Numeric);
                out_names.push(name.clone());
            }
            Column::Nominal(values) if one_hot => {
                for v in values {
                    attributes.push(AttributeKind::Numeric);
                    out_names.push(format!("{name}={v}"));
                }
            }
            Column::Nominal(values) => {
                attributes.push(AttributeKind::Nominal {
                    values: values.len(),
                });
                out_names.push(name.clone());
            }
        }
    }
    let schema = Schema {
        attributes,
        classes: classes.len(),
        names: out_names,
    };
    Ok(FileSource {
        schema,
        instances,
        class_names: classes,
        next: 0,
    })
}
