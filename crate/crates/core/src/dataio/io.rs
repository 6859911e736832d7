//! Wide-table score file reading and writing.
//!
//! Header: `sample_id,split,label,group,member_id,task_score,group_score:<g0>,...`,
//! one row per (sample, member). An empty `label` cell marks an unlabeled sample.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::dataio::folds::FoldAssignment;
use crate::dataio::table::{MemberScores, Sample, SampleRecord, ScoreTable, Split};
use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 6] = [
    "sample_id",
    "split",
    "label",
    "group",
    "member_id",
    "task_score",
];
const GROUP_PREFIX: &str = "group_score:";

pub fn load_score_table(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::MalformedFile(format!("cannot open {}: {e}", path.display())))?;
    read_score_table(file)
}

pub fn read_score_table<R: Read>(reader: R) -> Result<ScoreTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::MalformedFile(format!("unreadable header: {e}")))?
        .clone();
    let group_set = parse_header(&header)?;
    let width = FIXED_COLUMNS.len() + group_set.len();

    struct Partial {
        record: SampleRecord,
        scores: Vec<Option<MemberScores>>,
    }
    let mut order: Vec<Partial> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut max_member = 0usize;

    for (line, row) in rdr.records().enumerate() {
        let line = line + 2;
        let row = row.map_err(|e| Error::MalformedFile(format!("line {line}: {e}")))?;
        if row.len() != width {
            return Err(Error::MalformedFile(format!(
                "line {line}: expected {width} fields, found {}",
                row.len()
            )));
        }
        let sample_id = row[0].to_string();
        if sample_id.is_empty() {
            return Err(Error::MalformedFile(format!("line {line}: empty sample_id")));
        }
        let split: Split = row[1]
            .parse()
            .map_err(|_| Error::MalformedFile(format!("line {line}: bad split `{}`", &row[1])))?;
        let label = match &row[2] {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => {
                return Err(Error::InvariantViolation(format!(
                    "line {line}: label `{other}` is not 0 or 1"
                )))
            }
        };
        let group = group_set
            .iter()
            .position(|g| g == &row[3])
            .ok_or_else(|| Error::UnknownGroup(row[3].to_string()))?;
        let member_id: usize = row[4]
            .parse()
            .map_err(|_| Error::MalformedFile(format!("line {line}: bad member_id `{}`", &row[4])))?;
        let task_score = parse_f64(&row[5], line)?;
        let group_scores = (0..group_set.len())
            .map(|g| parse_f64(&row[FIXED_COLUMNS.len() + g], line))
            .collect::<Result<Vec<_>>>()?;
        let scores = MemberScores {
            member_id,
            task_score,
            group_scores,
        };
        scores.validate(group_set.len()).map_err(|e| match e {
            Error::InvariantViolation(m) => Error::InvariantViolation(format!("line {line}: {m}")),
            other => other,
        })?;
        max_member = max_member.max(member_id);

        let record = SampleRecord {
            sample_id: sample_id.clone(),
            label,
            group,
            split,
        };
        let idx = match by_id.get(&sample_id) {
            Some(&idx) => {
                if order[idx].record != record {
                    return Err(Error::InvariantViolation(format!(
                        "line {line}: sample `{sample_id}` has inconsistent split/label/group across rows"
                    )));
                }
                idx
            }
            None => {
                by_id.insert(sample_id, order.len());
                order.push(Partial {
                    record,
                    scores: Vec::new(),
                });
                order.len() - 1
            }
        };
        let slots = &mut order[idx].scores;
        if slots.len() <= member_id {
            slots.resize(member_id + 1, None);
        }
        if slots[member_id].is_some() {
            return Err(Error::InvariantViolation(format!(
                "line {line}: duplicate row for sample `{}` member {member_id}",
                order[idx].record.sample_id
            )));
        }
        slots[member_id] = Some(scores);
    }

    if order.is_empty() {
        return Err(Error::MalformedFile("no data rows".into()));
    }
    let n_members = max_member + 1;
    let samples = order
        .into_iter()
        .map(|p| {
            let mut scores = p.scores;
            scores.resize(n_members, None);
            let scores = scores
                .into_iter()
                .enumerate()
                .map(|(m, s)| {
                    s.ok_or_else(|| {
                        Error::InvariantViolation(format!(
                            "sample `{}` is missing member {m}",
                            p.record.sample_id
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Sample {
                record: p.record,
                scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ScoreTable::new(group_set, n_members, samples)
}

fn parse_header(header: &csv::StringRecord) -> Result<Vec<String>> {
    if header.len() < FIXED_COLUMNS.len() + 2 {
        return Err(Error::MalformedFile(format!(
            "header has {} columns; need the fixed columns plus at least two group columns",
            header.len()
        )));
    }
    for (i, want) in FIXED_COLUMNS.iter().enumerate() {
        if &header[i] != *want {
            return Err(Error::MalformedFile(format!(
                "header column {i} is `{}`, expected `{want}`",
                &header[i]
            )));
        }
    }
    header
        .iter()
        .skip(FIXED_COLUMNS.len())
        .map(|col| {
            col.strip_prefix(GROUP_PREFIX)
                .filter(|g| !g.is_empty())
                .map(str::to_string)
                .ok_or_else(|| Error::MalformedFile(format!("bad group column `{col}`")))
        })
        .collect()
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::MalformedFile(format!("line {line}: `{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::InvariantViolation(format!("line {line}: non-finite value `{s}`")));
    }
    Ok(v)
}

pub fn save_score_table(table: &ScoreTable, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut w = std::io::BufWriter::new(file);
    write_score_table(table, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Floats are written with `Display`, which is the shortest round-trip form.
pub fn write_score_table<W: Write>(table: &ScoreTable, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(table.group_set().iter().map(|g| format!("{GROUP_PREFIX}{g}")));
    w.write_record(&header).map_err(csv_err)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for s in table.samples() {
        for ms in &s.scores {
            row.clear();
            row.push(s.record.sample_id.clone());
            row.push(s.record.split.to_string());
            row.push(match s.record.label {
                Some(true) => "1".into(),
                Some(false) => "0".into(),
                None => String::new(),
            });
            row.push(table.group_set()[s.record.group].clone());
            row.push(ms.member_id.to_string());
            row.push(ms.task_score.to_string());
            row.extend(ms.group_scores.iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `sample_id,fold` rows in table order; test samples are omitted.
pub fn write_fold_assignment<W: Write>(
    table: &ScoreTable,
    folds: &FoldAssignment,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["sample_id", "fold"]).map_err(csv_err)?;
    for s in table.samples() {
        if let Some(f) = folds.fold_of(&s.record.sample_id) {
            w.write_record([s.record.sample_id.as_str(), &f.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
