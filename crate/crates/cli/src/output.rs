use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Failure, Outcome};

/// Pretty JSON with every float written at 17 significant digits.
struct FullPrecision<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", format_float(value))
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json<T: Serialize>(value: &T) -> Outcome<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Failure::Other(format!("JSON encoding failed: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Outcome<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Failure::Config(format!("output path {} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, contents: &str) -> Outcome<()> {
    match path {
        Some(p) => write_atomic(p, contents.as_bytes()),
        None => {
            io::stdout().write_all(contents.as_bytes())?;
            Ok(())
        }
    }
}

pub fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

pub struct CsvTable {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Outcome<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(csv_fail)?;
        Ok(CsvTable { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Outcome<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(csv_fail)
    }

    pub fn finish(self) -> Outcome<String> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| Failure::Other(format!("CSV encoding failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
    }
}

fn csv_fail(e: csv::Error) -> Failure {
    Failure::Other(format!("CSV encoding failed: {e}"))
}

/// Dataset CSV: `y` first, then predictors `x1..xp` in column order.
pub fn dataset_csv(y: &[f64], x: &DMatrix<f64>) -> Outcome<String> {
    let mut header = vec!["y".to_string()];
    header.extend((1..=x.ncols()).map(|j| format!("x{j}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = CsvTable::new(&refs)?;
    for (i, yi) in y.iter().enumerate() {
        let mut row = vec![format_float(*yi)];
        row.extend(x.row(i).iter().map(|v| format_float(*v)));
        t.row(row)?;
    }
    t.finish()
}

pub struct ParsedCsv {
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    pub predictors: Vec<String>,
}

/// Reads a dataset CSV. The header must contain exactly one `y` column;
/// every other column is a predictor, in left-to-right order.
pub fn read_dataset(path: &Path) -> Outcome<ParsedCsv> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Csv(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Failure::Csv(format!("{}: {e}", path.display())))?
        .clone();
    let y_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| *h == "y")
        .map(|(i, _)| i)
        .collect();
    if y_cols.len() != 1 {
        return Err(Failure::Csv(format!(
            "{}: header needs exactly one \"y\" column, found {}",
            path.display(),
            y_cols.len()
        )));
    }
    let y_col = y_cols[0];
    let predictors: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != y_col)
        .map(|(_, h)| h.to_string())
        .collect();
    let mut y = Vec::new();
    let mut flat = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Failure::Csv(format!("{}: {e}", path.display())))?;
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Failure::Csv(format!(
                    "{}: data row {}, column \"{}\": {:?} is not a number",
                    path.display(),
                    line + 1,
                    &headers[i],
                    field
                ))
            })?;
            if !v.is_finite() {
                return Err(Failure::Csv(format!(
                    "{}: data row {}, column \"{}\" is not finite",
                    path.display(),
                    line + 1,
                    &headers[i]
                )));
            }
            if i == y_col {
                y.push(v);
            } else {
                flat.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Failure::Csv(format!("{}: no data rows", path.display())));
    }
    let x = DMatrix::from_row_slice(y.len(), predictors.len(), &flat);
    Ok(ParsedCsv { y, x, predictors })
}
