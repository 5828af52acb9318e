use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::example::{Example, Genre, LITERAL, METAPHOR};
use crate::error::{Error, Result};

/// Column order of the classification CSV.
pub const CSV_HEADER: [&str; 6] = ["id", "genre", "tokens", "pos", "verb_index", "label"];

/// Reads the classification CSV (`id,genre,tokens,pos,verb_index,label`).
///
/// Tokens and POS tags are single-space-joined. Every token other than the
/// target verb is labeled literal. Extra columns are ignored.
pub fn load_classification_csv(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let mut columns = [0usize; 6];
    for (slot, name) in columns.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::parse(path, 1, format!("missing column '{name}'")))?;
    }
    let [c_id, c_genre, c_tokens, c_pos, c_index, c_label] = columns;

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |c: usize| record.get(c).unwrap_or("");
        let err = |msg: String| Error::parse(path, line, msg);

        let tokens: Vec<String> = split_field(field(c_tokens));
        let pos = split_field(field(c_pos));
        let verb_index: usize = field(c_index)
            .trim()
            .parse()
            .map_err(|_| err(format!("verb_index '{}' is not a non-negative integer", field(c_index))))?;
        let label = match field(c_label).trim() {
            "0" => LITERAL,
            "1" => METAPHOR,
            other => return Err(err(format!("label '{other}' is not 0 or 1"))),
        };
        if verb_index >= tokens.len() {
            return Err(err(format!(
                "verb_index {verb_index} out of range for {} tokens",
                tokens.len()
            )));
        }
        let mut labels = vec![LITERAL; tokens.len()];
        labels[verb_index] = label;
        let example = Example {
            id: field(c_id).to_string(),
            genre: parse_genre(field(c_genre)).map_err(err)?,
            pos: (!pos.is_empty()).then_some(pos),
            tokens,
            labels,
            target_index: Some(verb_index),
        };
        example.validate().map_err(err)?;
        out.push(example);
    }
    Ok(out)
}

fn split_field(s: &str) -> Vec<String> {
    s.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect()
}

fn parse_genre(s: &str) -> std::result::Result<Option<Genre>, String> {
    let s = s.trim();
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

/// Writes examples in the classification CSV format. Examples must carry a
/// target index. When `predictions` is given, a trailing `pred` column is
/// added (the loader ignores it).
pub fn write_classification_csv(path: impl AsRef<Path>, examples: &[Example], predictions: Option<&[u8]>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let to_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if predictions.is_some() {
        header.push("pred");
    }
    writer.write_record(&header).map_err(to_err)?;
    for (i, ex) in examples.iter().enumerate() {
        let target = ex
            .target_index
            .ok_or_else(|| Error::Domain(format!("example {} has no target index", ex.id)))?;
        let mut row = vec![
            ex.id.clone(),
            ex.genre.map(|g| g.to_string()).unwrap_or_default(),
            ex.tokens.join(" "),
            ex.pos.as_ref().map(|p| p.join(" ")).unwrap_or_default(),
            target.to_string(),
            ex.labels[target].to_string(),
        ];
        if let Some(preds) = predictions {
            row.push(preds[i].to_string());
        }
        writer.write_record(&row).map_err(to_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SequenceRecord {
    id: String,
    #[serde(default)]
    genre: Option<String>,
    tokens: Vec<String>,
    #[serde(default)]
    pos: Option<Vec<String>>,
    #[serde(default)]
    labels: Option<Vec<u8>>,
}

/// Reads the sequence-labeling JSONL format; labels are required.
pub fn load_sequence_jsonl(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    read_sequence_jsonl(path, true)
}

/// Like [`load_sequence_jsonl`], but with `require_labels = false` records
/// without `labels` are accepted and labeled all-literal.
pub fn read_sequence_jsonl(path: impl AsRef<Path>, require_labels: bool) -> Result<Vec<Example>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::parse(path, line_no, msg);
        let record: SequenceRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let labels = match record.labels {
            Some(l) => l,
            None if !require_labels => vec![LITERAL; record.tokens.len()],
            None => return Err(err("missing field 'labels'".into())),
        };
        let example = Example {
            id: record.id,
            genre: parse_genre(record.genre.as_deref().unwrap_or("")).map_err(err)?,
            tokens: record.tokens,
            pos: record.pos.filter(|p| !p.is_empty()),
            labels,
            target_index: None,
        };
        example.validate().map_err(err)?;
        out.push(example);
    }
    Ok(out)
}

pub fn write_sequence_jsonl(path: impl AsRef<Path>, examples: &[Example]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for ex in examples {
        let record = SequenceRecord {
            id: ex.id.clone(),
            genre: ex.genre.map(|g| g.to_string()),
            tokens: ex.tokens.clone(),
            pos: ex.pos.clone(),
            labels: Some(ex.labels.clone()),
        };
        let line = serde_json::to_string(&record).map_err(|e| Error::Domain(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Dispatches on extension: `.csv` is the classification format, anything
/// else the sequence JSONL format.
pub fn load_examples(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let path = path.as_ref();
    if is_csv(path) {
        load_classification_csv(path)
    } else {
        load_sequence_jsonl(path)
    }
}

pub(crate) fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;
    use tempfile::TempDir;

    fn write(dir: &TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn csv_well_formed() {
        let dir = TempDir::new().unwrap();
        let p = write(
            &dir,
            "a.csv",
            "id,genre,tokens,pos,verb_index,label\n\
             s1,news,He drowned in debt,PRON VERB ADP NOUN,1,1\n\
             s2,,She sat down,,1,0\n",
        );
        let ex = load_classification_csv(&p).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].labels, vec![0, 1, 0, 0]);
        assert_eq!(ex[0].genre, Some(Genre::News));
        assert_eq!(ex[0].pos.as_ref().unwrap().len(), 4);
        assert_eq!(ex[1].genre, None);
        assert_eq!(ex[1].pos, None);
        assert_eq!(ex[1].target_label(), Some(0));
        assert!(ex.iter().all(|e| e.labels.len() == e.tokens.len()));
    }

    #[test]
    fn csv_errors_name_line() {
        let dir = TempDir::new().unwrap();
        let cases = [
            ("id,genre,tokens,pos,verb_index,label\ns1,,a b c,,3,1\n", ":2:"),
            ("id,genre,tokens,pos,verb_index,label\ns1,,a b,,0,1\ns2,,a b,,x,1\n", ":3:"),
            ("id,genre,tokens,pos,verb_index,label\ns1,,a b,,0,2\n", ":2:"),
            ("id,genre,tokens,pos,label\ns1,,a b,,1\n", ":1:"),
            ("id,genre,tokens,pos,verb_index,label\ns1,,a b,X,0,1\n", ":2:"),
            ("id,genre,tokens,pos,verb_index,label\ns1,poetry,a b,,0,1\n", ":2:"),
        ];
        for (body, needle) in cases {
            let p = write(&dir, "bad.csv", body);
            let msg = load_classification_csv(&p).unwrap_err().to_string();
            assert!(msg.contains(needle), "{msg}");
        }
    }

    #[test]
    fn jsonl_records() {
        let dir = TempDir::new().unwrap();
        let p = write(
            &dir,
            "a.jsonl",
            r#"{"id":"s1","genre":"fiction","tokens":["a","b","c","d","e"],"pos":["X","X","X","X","X"],"labels":[0,1,0,0,1]}"#,
        );
        let ex = load_sequence_jsonl(&p).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].genre, Some(Genre::Fiction));
        assert_eq!(ex[0].target_index, None);

        let p = write(
            &dir,
            "b.jsonl",
            "{\"id\":\"s1\",\"genre\":\"news\",\"tokens\":[\"a\"],\"labels\":[0]}\n\
             {\"id\":\"s2\",\"genre\":\"news\",\"tokens\":[\"a\",\"b\",\"c\",\"d\",\"e\"],\"labels\":[0,1,0,0]}\n",
        );
        let msg = load_sequence_jsonl(&p).unwrap_err().to_string();
        assert!(msg.contains(":2:"), "{msg}");

        let p = write(&dir, "c.jsonl", r#"{"id":"s1","genre":"blog","tokens":["a"],"labels":[0]}"#);
        assert!(load_sequence_jsonl(&p).is_err());

        let p = write(&dir, "d.jsonl", r#"{"id":"s1","tokens":["a","b"]}"#);
        assert!(load_sequence_jsonl(&p).is_err());
        let ex = read_sequence_jsonl(&p, false).unwrap();
        assert_eq!(ex[0].labels, vec![0, 0]);
    }

    fn arb_example(with_target: bool) -> impl Strategy<Value = Example> {
        (1usize..8).prop_flat_map(move |n| {
            (
                "[a-z]{1,4}",
                proptest::option::of(prop_oneof![
                    Just(Genre::Academic),
                    Just(Genre::Conversation),
                    Just(Genre::Fiction),
                    Just(Genre::News)
                ]),
                proptest::collection::vec("[A-Za-z,.']{1,6}", n),
                proptest::option::of(proptest::collection::vec("[A-Z]{1,4}", n)),
                proptest::collection::vec(0u8..=1, n),
                0..n,
            )
                .prop_map(move |(id, genre, tokens, pos, mut labels, t)| {
                    let target_index = if with_target {
                        let gold = labels[t];
                        labels = vec![0; labels.len()];
                        labels[t] = gold;
                        Some(t)
                    } else {
                        None
                    };
                    Example {
                        id,
                        genre,
                        tokens,
                        pos,
                        labels,
                        target_index,
                    }
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn csv_round_trip(examples in proptest::collection::vec(arb_example(true), 1..6)) {
            let dir = TempDir::new().unwrap();
            let p = dir.path().join("rt.csv");
            write_classification_csv(&p, &examples, None).unwrap();
            prop_assert_eq!(load_classification_csv(&p).unwrap(), examples);
        }

        #[test]
        fn jsonl_round_trip(examples in proptest::collection::vec(arb_example(false), 1..6)) {
            let dir = TempDir::new().unwrap();
            let p = dir.path().join("rt.jsonl");
            write_sequence_jsonl(&p, &examples).unwrap();
            prop_assert_eq!(load_sequence_jsonl(&p).unwrap(), examples);
        }
    }
}
