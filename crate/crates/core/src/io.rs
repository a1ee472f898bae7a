//! CSV readers for score tables, embeddings and identity lists.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::data_model::{Dissimilarity, IdentityId, Instance, MatchDataset, ScoreRecord};
use crate::error::{Error, Result};

fn parse_error(line: Option<u64>, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(std::io::Error::other(e)),
        _ => parse_error(line, e.to_string()),
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(parse_error(Some(1), "empty file"));
    }
    for (k, name) in expected.iter().enumerate() {
        if header.get(k) != Some(*name) {
            return Err(parse_error(
                Some(1),
                format!("expected header starting with {}, got {:?}", expected.join(","), header),
            ));
        }
    }
    Ok(())
}

fn parse_f64(field: &str, line: u64, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_error(Some(line), format!("{what} '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(Some(line), format!("{what} '{field}' is not finite")));
    }
    Ok(v)
}

/// Rows of `id_a,instance_a,id_b,instance_b,score`. With `negate`, scores
/// are similarities and are flipped into dissimilarities.
pub fn read_scores<R: Read>(input: R, negate: bool) -> Result<Vec<ScoreRecord>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["id_a", "instance_a", "id_b", "instance_b", "score"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 5 {
            return Err(parse_error(Some(line), format!("expected 5 fields, found {}", rec.len())));
        }
        let score = parse_f64(&rec[4], line, "score")?;
        out.push(ScoreRecord {
            id_a: rec[0].to_string(),
            instance_a: rec[1].to_string(),
            id_b: rec[2].to_string(),
            instance_b: rec[3].to_string(),
            score: if negate { -score } else { score },
        });
    }
    if out.is_empty() {
        return Err(parse_error(Some(1), "no score rows"));
    }
    Ok(out)
}

/// Rows of `id,instance,v0,...,v{d-1}`.
pub fn read_embeddings<R: Read>(input: R) -> Result<Vec<Instance>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["id", "instance"])?;
    let dim = rdr.headers().map_err(csv_error)?.len() - 2;
    if dim == 0 {
        return Err(parse_error(Some(1), "no embedding columns"));
    }
    let mut out = Vec::new();
    let mut index_of = std::collections::HashMap::<String, usize>::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != dim + 2 {
            return Err(parse_error(Some(line), format!("expected {} fields, found {}", dim + 2, rec.len())));
        }
        let values = (2..rec.len())
            .map(|k| parse_f64(&rec[k], line, "embedding value"))
            .collect::<Result<Vec<_>>>()?;
        let idx: usize = rec[1]
            .parse()
            .map_err(|_| parse_error(Some(line), format!("instance '{}' is not a non-negative integer", &rec[1])))?;
        let seen = index_of.entry(format!("{}\u{0}{}", &rec[0], idx)).or_insert(line as usize);
        if *seen != line as usize {
            return Err(Error::Data(format!("duplicate instance {}/{} (lines {} and {line})", &rec[0], idx, seen)));
        }
        out.push(Instance {
            identity: IdentityId(rec[0].to_string()),
            index: idx,
            embedding: Some(values),
        });
    }
    if out.is_empty() {
        return Err(parse_error(Some(1), "no embedding rows"));
    }
    Ok(out)
}

/// Rows of `id,instances`.
pub fn read_identity_counts<R: Read>(input: R) -> Result<Vec<(IdentityId, usize)>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["id", "instances"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 2 {
            return Err(parse_error(Some(line), format!("expected 2 fields, found {}", rec.len())));
        }
        let m: usize = rec[1]
            .parse()
            .map_err(|_| parse_error(Some(line), format!("instance count '{}' is not an integer", &rec[1])))?;
        out.push((IdentityId(rec[0].to_string()), m));
    }
    if out.is_empty() {
        return Err(parse_error(Some(1), "no identities"));
    }
    Ok(out)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn load_scores(path: &Path, negate: bool) -> Result<MatchDataset> {
    MatchDataset::from_score_records(read_scores(open(path)?, negate)?)
}

pub fn load_embeddings(path: &Path, dissimilarity: Dissimilarity) -> Result<MatchDataset> {
    MatchDataset::from_instances(read_embeddings(open(path)?)?, dissimilarity)
}

pub fn load_identity_counts(path: &Path) -> Result<Vec<(IdentityId, usize)>> {
    read_identity_counts(open(path)?)
}
