//! CSV corpus loading with multi-reference grouping.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::mr::{parse_mr, MeaningRepresentation};
use super::tokenize::{detokenize, tokenize};
use super::DataError;

/// One MR with all of its tokenized references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub mr: MeaningRepresentation,
    pub references: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Reject attribute keys outside the restaurant-domain inventory.
    pub strict_schema: bool,
}

/// Loads a `mr,ref` CSV file. Rows sharing the same MR text become one
/// example; examples keep the order in which their MR first appears.
pub fn load_dataset(path: &Path, options: LoadOptions) -> Result<Vec<Example>, DataError> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, options)
}

pub fn read_dataset<R: Read>(reader: R, options: LoadOptions) -> Result<Vec<Example>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (mr_col, ref_col) = match (column("mr"), column("ref")) {
        (Some(m), Some(r)) => (m, r),
        _ => return Err(DataError::BadHeader(headers.iter().collect::<Vec<_>>().join(","))),
    };

    let mut examples: Vec<Example> = Vec::new();
    let mut by_mr: HashMap<String, usize> = HashMap::new();
    for (i, record) in rdr.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let record = record?;
        let at_row = |source: DataError| DataError::AtRow {
            row,
            source: Box::new(source),
        };
        let mr_text = record.get(mr_col).unwrap_or_default();
        let ref_text = record.get(ref_col).unwrap_or_default();
        let reference = tokenize(ref_text);
        if reference.is_empty() {
            return Err(at_row(DataError::EmptyReference));
        }
        match by_mr.get(mr_text) {
            Some(&idx) => examples[idx].references.push(reference),
            None => {
                let mr = parse_mr(mr_text).map_err(at_row)?;
                if options.strict_schema {
                    mr.check_schema().map_err(at_row)?;
                }
                by_mr.insert(mr_text.to_string(), examples.len());
                examples.push(Example {
                    mr,
                    references: vec![reference],
                });
            }
        }
    }
    Ok(examples)
}

/// Writes examples back as a `mr,ref` CSV, one row per reference.
pub fn write_dataset<W: Write>(writer: W, examples: &[Example]) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["mr", "ref"])?;
    for ex in examples {
        let mr = ex.mr.to_bracketed();
        for reference in &ex.references {
            wtr.write_record([mr.as_str(), detokenize(reference).as_str()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_dataset(path: &Path, examples: &[Example]) -> Result<(), DataError> {
    write_dataset(std::fs::File::create(path)?, examples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Vec<Example>, DataError> {
        read_dataset(text.as_bytes(), LoadOptions::default())
    }

    #[test]
    fn groups_identical_mrs() {
        let csv = "mr,ref\n\"name[x], area[riverside]\",X is by the river.\n\"name[x], area[riverside]\",\"Riverside, X.\"\n";
        let data = load(csv).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data[0].references.len(), 2);
        assert_eq!(data[0].references[1], vec!["riverside", ",", "x", "."]);
    }

    #[test]
    fn empty_file() {
        assert!(load("mr,ref\n").unwrap().is_empty());
    }

    #[test]
    fn first_occurrence_order() {
        let csv = "mr,ref\nname[b],b\nname[a],a\nname[b],bb\n";
        let data = load(csv).unwrap();
        let names: Vec<_> = data.iter().map(|e| e.mr.get("name").unwrap()[0].clone()).collect();
        assert_eq!(names, vec!["b", "a"]);
    }

    #[test]
    fn eighty_one_rows_ten_mrs() {
        let mut csv = String::from("mr,ref\n");
        for row in 0..81 {
            let mr = row % 10;
            csv.push_str(&format!("name[n{mr}],ref {row}\n"));
        }
        let data = load(&csv).unwrap();
        assert_eq!(data.len(), 10);
        let total: usize = data.iter().map(|e| e.references.len()).sum();
        assert!((total as f64 / data.len() as f64 - 8.1).abs() < 1e-12);
    }

    #[test]
    fn malformed_mr_reports_row() {
        let err = load("mr,ref\nname[x],fine\narea[],bad\n").unwrap_err();
        match err {
            DataError::AtRow { row, source } => {
                assert_eq!(row, 3);
                assert!(matches!(*source, DataError::MalformedMr(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strict_schema_rejects_unknown_keys() {
        let csv = "mr,ref\nstars[5],five stars\n";
        assert!(load(csv).is_ok());
        let err = read_dataset(csv.as_bytes(), LoadOptions { strict_schema: true }).unwrap_err();
        assert!(matches!(err, DataError::AtRow { .. }));
    }

    #[test]
    fn missing_header_columns() {
        assert!(matches!(load("a,b\nx,y\n"), Err(DataError::BadHeader(_))));
    }

    #[test]
    fn write_then_read() {
        let csv = "mr,ref\n\"name[x], near[y z]\",\"x, near y z.\"\n\"name[x], near[y z]\",other\n";
        let data = load(csv).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        assert_eq!(load(std::str::from_utf8(&buf).unwrap()).unwrap(), data);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_dataset(Path::new("/nonexistent/x.csv"), LoadOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::Io(_)));
    }
}
