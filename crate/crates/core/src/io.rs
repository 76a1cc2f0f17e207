//! Function files: JSON `{"breakpoints": [[x, y], ...], "phase": bool}` or
//! two-column CSV with an `x,y` header.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plfn::{PLFunction, PhaseFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionFile {
    pub breakpoints: Vec<[f64; 2]>,
    #[serde(default)]
    pub phase: bool,
}

impl FunctionFile {
    pub fn from_function(f: &PLFunction, phase: bool) -> Self {
        Self { breakpoints: f.breakpoints().map(|(x, y)| [x, y]).collect(), phase }
    }

    pub fn function(&self) -> Result<PLFunction> {
        PLFunction::new(self.breakpoints.iter().map(|p| (p[0], p[1])))
    }

    pub fn phase_function(&self) -> Result<PhaseFunction> {
        PhaseFunction::new(self.function()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

pub fn parse_json(text: &str) -> Result<FunctionFile> {
    let file: FunctionFile = serde_json::from_str(text)?;
    file.function()?;
    Ok(file)
}

pub fn to_json(file: &FunctionFile) -> String {
    serde_json::to_string(file).expect("function files always serialize")
}

/// Reads `x,y` rows. CSV carries no phase flag; it is reported as `false`.
pub fn parse_csv<R: Read>(reader: R) -> Result<FunctionFile> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(Error::InvalidFunction(format!("expected header x,y, got {headers:?}")));
    }
    let mut breakpoints = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::InvalidFunction(format!("bad number {s:?}: {e}")))
        };
        breakpoints.push([parse(&rec[0])?, parse(&rec[1])?]);
    }
    let file = FunctionFile { breakpoints, phase: false };
    file.function()?;
    Ok(file)
}

pub fn write_csv<W: Write>(file: &FunctionFile, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y"])?;
    let mut bx = ryu::Buffer::new();
    let mut by = ryu::Buffer::new();
    for p in &file.breakpoints {
        w.write_record([fmt_f64(&mut bx, p[0]), fmt_f64(&mut by, p[1])])?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_f64(buf: &mut ryu::Buffer, v: f64) -> &str {
    if v.is_finite() {
        buf.format_finite(v)
    } else if v.is_nan() {
        "nan"
    } else if v > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

/// Shortest round-trip decimal, with `inf`/`nan` sentinels.
pub fn format_number(v: f64) -> String {
    fmt_f64(&mut ryu::Buffer::new(), v).to_string()
}

pub fn read_function_file(path: &Path) -> Result<FunctionFile> {
    let text = std::fs::read_to_string(path)?;
    match Format::from_path(path) {
        Format::Json => parse_json(&text),
        Format::Csv => parse_csv(text.as_bytes()),
    }
}

pub fn write_function_file(path: &Path, file: &FunctionFile) -> Result<()> {
    match Format::from_path(path) {
        Format::Json => std::fs::write(path, to_json(file) + "\n")?,
        Format::Csv => write_csv(file, std::fs::File::create(path)?)?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn json_shape() {
        let f = PLFunction::new([(0.0, 0.0), (0.1, 1e-300), (1.0, 0.3)]).unwrap();
        let text = to_json(&FunctionFile::from_function(&f, true));
        assert_eq!(text, r#"{"breakpoints":[[0.0,0.0],[0.1,1e-300],[1.0,0.3]],"phase":true}"#);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_order() {
        assert!(parse_json(r#"{"breakpoints":[[0,0],[1,1]],"extra":1}"#).is_err());
        assert!(parse_json(r#"{"breakpoints":[[1,0],[0,1]]}"#).is_err());
        assert!(!parse_json(r#"{"breakpoints":[[0,0],[1,1]]}"#).unwrap().phase);
    }

    #[test]
    fn csv_requires_header() {
        assert!(parse_csv("a,b\n0,0\n1,1\n".as_bytes()).is_err());
        let f = parse_csv("x,y\n0,0\n0.5,2\n1,1\n".as_bytes()).unwrap();
        assert_eq!(f.breakpoints.len(), 3);
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(ys in prop::collection::vec(-1e6f64..1e6, 2..20), tiny in 1e-300f64..1e-200) {
            let n = ys.len();
            let pts: Vec<[f64; 2]> = ys.iter().enumerate()
                .map(|(i, &y)| [i as f64 / (n - 1) as f64, y * tiny.sqrt()]).collect();
            let file = FunctionFile { breakpoints: pts, phase: false };
            let back = parse_json(&to_json(&file)).unwrap();
            prop_assert_eq!(&back, &file);
            let mut buf = Vec::new();
            write_csv(&file, &mut buf).unwrap();
            let back = parse_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, file);
        }
    }
}
