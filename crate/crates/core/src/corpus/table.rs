use std::collections::HashMap;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use super::CorpusError;

/// A record type persisted as one CSV row under a fixed header.
///
/// Floats are written with Rust's shortest round-trip formatting, so a save
/// followed by a load reproduces every value bit for bit.
pub trait TableRow: Sized {
    fn columns() -> Vec<String>;
    fn to_fields(&self) -> Vec<String>;
    fn from_fields(fields: &FieldReader<'_>) -> Result<Self, String>;
}

/// Named access to the fields of one CSV record.
pub struct FieldReader<'a> {
    index: &'a HashMap<String, usize>,
    record: &'a csv::StringRecord,
}

impl FieldReader<'_> {
    pub fn str(&self, column: &str) -> Result<&str, String> {
        let i = self
            .index
            .get(column)
            .ok_or_else(|| format!("missing column `{column}`"))?;
        self.record
            .get(*i)
            .ok_or_else(|| format!("short record, no `{column}`"))
    }

    pub fn parse<T: FromStr>(&self, column: &str) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.str(column)?;
        raw.parse::<T>()
            .map_err(|e| format!("column `{column}`: cannot parse `{raw}`: {e}"))
    }

    /// Empty cells read as `None`.
    pub fn opt<T: FromStr>(&self, column: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.str(column)?;
        if raw.is_empty() {
            Ok(None)
        } else {
            self.parse(column).map(Some)
        }
    }
}

pub fn save_table<R: TableRow>(rows: &[R], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| CorpusError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| CorpusError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(R::columns()).map_err(csv_err)?;
    for row in rows {
        writer.write_record(row.to_fields()).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_table<R: TableRow>(path: impl AsRef<Path>) -> Result<Vec<R>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_rows(file, path)
}

/// CSV text with a header line, as [`save_table`] writes it.
pub fn table_to_csv<R: TableRow>(rows: &[R]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut put = |fields: Vec<String>| writer.write_record(fields).expect("writing to memory");
    put(R::columns());
    for row in rows {
        put(row.to_fields());
    }
    String::from_utf8(writer.into_inner().expect("flushing to memory")).expect("fields are utf-8")
}

/// Parses CSV text; `origin` names the source in errors.
pub fn table_from_csv<R: TableRow>(text: &str, origin: impl AsRef<Path>) -> Result<Vec<R>, CorpusError> {
    read_rows(text.as_bytes(), origin.as_ref())
}

fn read_rows<R: TableRow>(source: impl std::io::Read, path: &Path) -> Result<Vec<R>, CorpusError> {
    let csv_err = |e: csv::Error| CorpusError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let index: HashMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    if let Some(missing) = R::columns().into_iter().find(|c| !index.contains_key(c)) {
        return Err(CorpusError::MissingColumn {
            path: path.to_path_buf(),
            column: missing,
        });
    }

    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let reader = FieldReader {
            index: &index,
            record: &record,
        };
        let row = R::from_fields(&reader).map_err(|message| CorpusError::BadField {
            path: path.to_path_buf(),
            line: n + 2,
            message,
        })?;
        rows.push(row);
    }
    Ok(rows)
}
