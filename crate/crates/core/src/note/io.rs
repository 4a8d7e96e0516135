//! JSON Lines corpus files: one record per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Note, NoteError};

/// Reads JSONL records, running `validate` on each. Blank lines are skipped;
/// reported line numbers are 1-based.
pub fn read_jsonl<T, F>(path: impl AsRef<Path>, mut validate: F) -> Result<Vec<T>, NoteError>
where
    T: DeserializeOwned,
    F: FnMut(&T) -> Result<(), String>,
{
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| NoteError::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| NoteError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| NoteError::Schema {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let record: T = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        validate(&record).map_err(schema)?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_jsonl<T: Serialize>(records: &[T], path: impl AsRef<Path>) -> Result<(), NoteError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| NoteError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut out, record)
            .map_err(|e| NoteError::io(path, std::io::Error::other(e)))?;
        out.write_all(b"\n").map_err(|e| NoteError::io(path, e))?;
    }
    out.flush().map_err(|e| NoteError::io(path, e))
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Note>, NoteError> {
    read_jsonl(path, Note::validate)
}

pub fn write_corpus(notes: &[Note], path: impl AsRef<Path>) -> Result<(), NoteError> {
    write_jsonl(notes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::note::{PhiCategory, PhiSpan};
    use proptest::prelude::*;

    fn sample_notes() -> Vec<Note> {
        let mut a = Note::new("a", "Nursing", vec!["Mary Smith visited MGH.".into()]);
        a.phi_spans = vec![
            PhiSpan::new(0, 0, 10, PhiCategory::PatientName),
            PhiSpan::new(0, 19, 22, PhiCategory::Hospital),
        ];
        let b = Note::new("b", "Radiology", vec![]);
        let mut c = Note::new("c", "Echo", vec!["x".into(), "2150-1-1 ok".into()]);
        c.phi_spans = vec![PhiSpan {
            placeholder: Some("2150-1-1".into()),
            ..PhiSpan::new(1, 0, 8, PhiCategory::Date)
        }];
        vec![a, b, c]
    }

    #[test]
    fn round_trip_three_notes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let notes = sample_notes();
        write_corpus(&notes, &path).unwrap();
        assert_eq!(read_corpus(&path).unwrap(), notes);
    }

    #[test]
    fn record_format() {
        let line = serde_json::to_string(&sample_notes()[0]).unwrap();
        assert_eq!(
            line,
            r#"{"note_id":"a","category":"Nursing","lines":["Mary Smith visited MGH."],"phi":[{"line":0,"begin":0,"end":10,"type":"PATIENT_NAME"},{"line":0,"begin":19,"end":22,"type":"HOSPITAL"}]}"#
        );
    }

    #[test]
    fn missing_note_id_is_schema_error_on_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"note_id\":\"a\",\"category\":\"c\",\"lines\":[],\"phi\":[]}\n{\"category\":\"c\",\"lines\":[],\"phi\":[]}\n",
        )
        .unwrap();
        let err = read_corpus(&path).unwrap_err();
        assert!(matches!(err, NoteError::Schema { line: 2, .. }), "{err}");
    }

    #[test]
    fn invalid_span_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"note_id\":\"a\",\"category\":\"c\",\"lines\":[\"ab\"],\"phi\":[{\"line\":0,\"begin\":1,\"end\":5,\"type\":\"ID\"}]}\n",
        )
        .unwrap();
        assert!(matches!(read_corpus(&path), Err(NoteError::Schema { line: 1, .. })));
    }

    #[test]
    fn empty_file_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(read_corpus(&path).unwrap().is_empty());
        assert!(matches!(
            read_corpus(dir.path().join("nope.jsonl")),
            Err(NoteError::Io { .. })
        ));
    }

    fn arb_note() -> impl Strategy<Value = Note> {
        (
            "[a-z0-9]{1,8}",
            "[A-Za-z ]{0,12}",
            proptest::collection::vec("[ -~é]{0,30}", 0..4),
        )
            .prop_map(|(id, cat, lines)| {
                let mut note = Note::new(id, cat, lines);
                // one span per non-empty line, covering its first character
                note.phi_spans = note
                    .lines
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| !l.is_empty())
                    .map(|(i, _)| PhiSpan::new(i, 0, 1, PhiCategory::ALL[i % 5]))
                    .collect();
                note
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn read_write_identity(notes in proptest::collection::vec(arb_note(), 0..6)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("c.jsonl");
            write_corpus(&notes, &path).unwrap();
            prop_assert_eq!(read_corpus(&path).unwrap(), notes);
        }
    }
}
