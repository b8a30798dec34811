//! Text dataset format: a `# xmodal-dataset v1 dim=<D>` header, then one
//! `sample_id,identity,modality,f1,...,fD` record per line.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::scalar::Real;

const HEADER_PREFIX: &str = "# xmodal-dataset v1 dim=";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_dataset<T: Real>(text: &str) -> Result<Dataset<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (header_line, header) = lines.by_ref().find(|(_, l)| !l.is_empty()).ok_or(Error::EmptyDataset)?;
    let dim: usize = header
        .strip_prefix(HEADER_PREFIX)
        .ok_or_else(|| parse_err(header_line, format!("expected header `{HEADER_PREFIX}<D>`")))?
        .trim()
        .parse()
        .map_err(|_| parse_err(header_line, "header dimension is not a positive integer"))?;
    if dim == 0 {
        return Err(parse_err(header_line, "header dimension must be at least 1"));
    }

    let mut samples = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, content) in lines {
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if fields.len() != dim + 3 {
            return Err(parse_err(
                line,
                format!(
                    "expected {} fields (3 labels + {dim} features), found {}",
                    dim + 3,
                    fields.len()
                ),
            ));
        }
        let sample_id: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad sample id `{}`", fields[0])))?;
        let identity: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad identity `{}`", fields[1])))?;
        let modality = match fields[2] {
            "V" => Modality::Visible,
            "T" => Modality::Thermal,
            other => {
                return Err(parse_err(
                    line,
                    format!("unknown modality tag `{other}` (expected V or T)"),
                ))
            }
        };
        let mut feature = Vec::with_capacity(dim);
        for f in &fields[3..] {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(line, format!("bad feature value `{f}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite feature value `{f}`")));
            }
            feature.push(T::lit(v));
        }
        if !seen.insert(sample_id) {
            return Err(parse_err(line, format!("duplicate sample id {sample_id}")));
        }
        samples.push(Sample {
            sample_id,
            identity,
            modality,
            feature,
        });
    }
    Dataset::new(dim, samples)
}

pub fn format_dataset<T: Real>(dataset: &Dataset<T>) -> String {
    let mut out = format!("{HEADER_PREFIX}{}\n", dataset.dim());
    for s in dataset.samples() {
        write!(out, "{},{},{}", s.sample_id, s.identity, s.modality.tag()).unwrap();
        for v in &s.feature {
            write!(out, ",{}", v.as_f64()).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn load_dataset<T: Real>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text).map_err(|e| e.context(path.display().to_string()))
}

pub fn save_dataset<T: Real>(dataset: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_dataset(dataset)).map_err(|e| Error::io(path, e))
}
