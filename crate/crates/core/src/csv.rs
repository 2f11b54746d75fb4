//! CSV emission with `#` metadata lines and round-trippable floats.

use std::io::{self, Write};

/// Scientific notation with 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        // `+ 0.0` folds −0 into 0.
        format!("{:.16e}", x + 0.0)
    }
}

/// Writes `# key = value` lines, then the header and rows.
pub fn write_table<W: Write>(
    out: &mut W,
    metadata: &[(String, String)],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> io::Result<()> {
    for (k, v) in metadata {
        writeln!(out, "# {k} = {}", v.replace('\n', " "))?;
    }
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Parsed table: metadata lines (without `# `), header and string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r.get(k)?.parse().ok()).collect()
    }
}

pub fn read_table(text: &str) -> Result<Table, String> {
    let mut metadata = Vec::new();
    let mut lines = text.lines();
    let mut header = None;
    for line in lines.by_ref() {
        if let Some(meta) = line.strip_prefix('#') {
            metadata.push(meta.trim().to_string());
        } else {
            header = Some(line.split(',').map(str::to_string).collect::<Vec<_>>());
            break;
        }
    }
    let header = header.ok_or("missing header")?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.starts_with('#') {
            return Err(format!("metadata line after header at data row {i}"));
        }
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(format!("row {i} has {} fields, header has {}", row.len(), header.len()));
        }
        rows.push(row);
    }
    Ok(Table { metadata, header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 2f64.sqrt() - 1.0, 123456.789e10, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_f64(-0.0), fmt_f64(0.0));
    }

    #[test]
    fn table_round_trip() {
        let mut buf = Vec::new();
        let meta = vec![("model".to_string(), "rotation".to_string())];
        let rows = vec![vec![fmt_f64(0.5), "1".into()], vec![fmt_f64(0.25), "0".into()]];
        write_table(&mut buf, &meta, &["alpha", "j"], rows).unwrap();
        let t = read_table(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(t.metadata, vec!["model = rotation"]);
        assert_eq!(t.column("alpha").unwrap(), vec![0.5, 0.25]);
    }
}
