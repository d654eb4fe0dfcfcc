//! CSV ingestion and output.
//!
//! Two layouts are accepted. The generic one names columns `x1_1..x1_p1, a1,
//! x2_1..x2_p2, a2, y` in any order. The named trial layout uses `qids0,
//! slope0, A1, qids1, slope1, A2, Y` and maps to `x1 = (qids0, slope0)`,
//! `x2 = (qids1, slope1)`. Lines starting with `#` are metadata and skipped.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::domain::{validate_dataset, Dataset, RawRow};
use crate::error::{Error, Result};

pub const STARD_COLUMNS: [&str; 7] = ["qids0", "slope0", "A1", "qids1", "slope1", "A2", "Y"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schema {
    Generic { p1: usize, p2: usize },
    Stard,
}

/// Formats with 9 significant digits, then drops redundant digits so that
/// equal values always print identically.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    format!("{rounded}")
}

/// `# key: value` metadata lines written above every table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata {
    pub entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.entries.push((key.into(), value.into()));
        self
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        for (k, v) in &self.entries {
            // Keep each entry on one line.
            writeln!(w, "# {k}: {}", v.replace('\n', " "))?;
        }
        Ok(())
    }

    /// Reads the leading `# key: value` lines of a file's text.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .filter_map(|l| {
                let (k, v) = l.trim_start_matches('#').trim_start().split_once(": ")?;
                Some((k.to_string(), v.to_string()))
            })
            .collect();
        Metadata { entries }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn detect_schema(headers: &[String]) -> Result<(Schema, Vec<usize>)> {
    let find = |name: &str| headers.iter().position(|h| h == name);
    if STARD_COLUMNS.iter().all(|c| find(c).is_some()) {
        let idx = STARD_COLUMNS.iter().map(|c| find(c).unwrap()).collect();
        return Ok((Schema::Stard, idx));
    }
    let count = |prefix: &str| {
        let mut k = 0;
        while find(&format!("{prefix}_{}", k + 1)).is_some() {
            k += 1;
        }
        k
    };
    let (p1, p2) = (count("x1"), count("x2"));
    let mut idx = Vec::with_capacity(p1 + p2 + 3);
    let mut need = |name: String| -> Result<()> {
        let i = find(&name).ok_or_else(|| {
            Error::Schema(format!(
                "missing column `{name}`; expected x1_1.., a1, x2_1.., a2, y or {}",
                STARD_COLUMNS.join(", ")
            ))
        })?;
        idx.push(i);
        Ok(())
    };
    for k in 1..=p1 {
        need(format!("x1_{k}"))?;
    }
    need("a1".into())?;
    for k in 1..=p2 {
        need(format!("x2_{k}"))?;
    }
    need("a2".into())?;
    need("y".into())?;
    if p1 == 0 || p2 == 0 {
        return Err(Error::Schema("need at least one x1_k and one x2_k column".into()));
    }
    Ok((Schema::Generic { p1, p2 }, idx))
}

/// Parses a dataset from CSV text in either layout.
pub fn read_dataset_from<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let (schema, idx) = detect_schema(&headers)?;
    let (p1, p2) = match schema {
        Schema::Generic { p1, p2 } => (p1, p2),
        Schema::Stard => (2, 2),
    };
    let mut raw = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = idx
            .iter()
            .map(|&i| {
                let s = rec.get(i).unwrap_or("");
                s.parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    column: headers[i].clone(),
                    value: s.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        raw.push(RawRow {
            x1: vals[..p1].to_vec(),
            a1: vals[p1],
            x2: vals[p1 + 1..p1 + 1 + p2].to_vec(),
            a2: vals[p1 + 1 + p2],
            y: vals[p1 + 2 + p2],
        });
    }
    validate_dataset(raw)
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    read_dataset_from(open(path)?)
}

/// Writes a dataset in the generic layout.
pub fn write_dataset<W: Write>(w: &mut W, data: &Dataset, meta: &Metadata) -> Result<()> {
    meta.write(w)?;
    let mut header: Vec<String> = (1..=data.p1()).map(|k| format!("x1_{k}")).collect();
    header.push("a1".into());
    header.extend((1..=data.p2()).map(|k| format!("x2_{k}")));
    header.push("a2".into());
    header.push("y".into());
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(&header)?;
    for r in data.rows() {
        let mut rec: Vec<String> = r.x1.iter().map(|v| fmt_num(*v)).collect();
        rec.push(r.a1.code().to_string());
        rec.extend(r.x2.iter().map(|v| fmt_num(*v)));
        rec.push(r.a2.code().to_string());
        rec.push(fmt_num(r.y));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Rounds every value to what [`write_dataset`] prints.
pub fn rounded(data: &Dataset) -> Dataset {
    let r = |x: f64| fmt_num(x).parse::<f64>().expect("formatted number parses");
    let raw = data
        .to_raw()
        .into_iter()
        .map(|row| RawRow {
            x1: row.x1.iter().map(|v| r(*v)).collect(),
            x2: row.x2.iter().map(|v| r(*v)).collect(),
            y: r(row.y),
            ..row
        })
        .collect();
    validate_dataset(raw).expect("rounding keeps a valid dataset valid")
}
