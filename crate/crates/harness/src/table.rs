use std::fs;
use std::path::Path;

use crate::error::{io, HarnessError, Result};

/// `{:.16e}`: seventeen significant digits, enough to round-trip any double.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn opt_bool(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

/// A CSV document built in memory, with `# key=value` lines after the data.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    comments: Vec<String>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            comments: Vec::new(),
        }
    }

    pub fn row(&mut self, fields: Vec<String>) {
        debug_assert_eq!(fields.len(), self.header.len());
        self.rows.push(fields);
    }

    pub fn comment(&mut self, text: impl Into<String>) {
        self.comments.push(text.into());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let mut out = w
            .into_inner()
            .map_err(|e| csv::Error::from(e.into_error()))?;
        for c in &self.comments {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes().map_err(|source| HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        fs::write(path, bytes).map_err(io(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn comments_follow_the_data() {
        let mut t = Table::new(&["a", "b"]);
        t.row(vec!["1".into(), opt_bool(Some(true))]);
        t.row(vec![opt_num(None), "x".into()]);
        t.comment("status=converged");
        assert_eq!(
            String::from_utf8(t.to_bytes().unwrap()).unwrap(),
            "a,b\n1,true\n,x\n# status=converged\n"
        );
    }
}
