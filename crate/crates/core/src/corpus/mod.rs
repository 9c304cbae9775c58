//! Concert logs and ragam metadata.
//!
//! Metadata is a CSV file with one ragam per row; ids are assigned by row
//! order. Concert logs are JSON Lines, one concert per line, referencing
//! ragams by name.

mod synthetic;

pub use synthetic::{chakra_of, generate_synthetic, planted_chain, SyntheticConfig};

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const METADATA_HEADER: [&str; 7] = [
    "name",
    "is_janya",
    "mela_number",
    "mela_category",
    "type",
    "combo",
    "vakram",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate ragam name {name:?} on line {line}")]
    DuplicateName { name: String, line: u64 },
    #[error("line {line}: {message}")]
    Domain { line: u64, message: String },
    #[error("line {line}: malformed row: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("concert {concert_id:?} references unknown ragam {name:?}")]
    UnknownRagam { concert_id: String, name: String },
    #[error("concert {0:?} has no items")]
    EmptyConcert(String),
    #[error("duplicate concert id {0:?}")]
    DuplicateConcertId(String),
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense index of a ragam in the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RagamId(pub u32);

impl RagamId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for RagamId {
    fn from(i: usize) -> Self {
        RagamId(i as u32)
    }
}

impl fmt::Display for RagamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Scale type by note count: 5, 6 or 7 notes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RagamType {
    Audava,
    Shadava,
    Sampoorna,
}

impl RagamType {
    pub const ALL: [RagamType; 3] = [RagamType::Audava, RagamType::Shadava, RagamType::Sampoorna];

    pub fn as_str(self) -> &'static str {
        match self {
            RagamType::Audava => "audava",
            RagamType::Shadava => "shadava",
            RagamType::Sampoorna => "sampoorna",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for RagamType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "audava" => Ok(RagamType::Audava),
            "shadava" => Ok(RagamType::Shadava),
            "sampoorna" => Ok(RagamType::Sampoorna),
            other => Err(format!("unknown ragam type {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RagamMeta {
    pub id: RagamId,
    pub name: String,
    pub is_janya: bool,
    pub mela_number: Option<u8>,
    pub mela_category: Option<String>,
    pub ragam_type: RagamType,
    pub combo: Option<RagamType>,
    pub vakram: bool,
}

impl RagamMeta {
    /// Checks the domain rules every metadata row must satisfy.
    pub fn validate(&self) -> Result<(), String> {
        if let Some(m) = self.mela_number {
            if !(1..=72).contains(&m) {
                return Err(format!("mela_number {m} outside 1..=72"));
            }
        }
        if !self.is_janya {
            if self.ragam_type != RagamType::Sampoorna {
                return Err(format!(
                    "melakarta {:?} must be sampoorna, got {}",
                    self.name,
                    self.ragam_type.as_str()
                ));
            }
            if self.vakram {
                return Err(format!("melakarta {:?} cannot be vakra", self.name));
            }
        }
        if self.combo == Some(self.ragam_type) {
            return Err(format!("combo of {:?} repeats its own type", self.name));
        }
        Ok(())
    }
}

/// Ragam metadata indexed by id and by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    metas: Vec<RagamMeta>,
    by_name: HashMap<String, RagamId>,
}

impl Vocabulary {
    /// Builds a vocabulary, rejecting duplicate names, non-contiguous ids and
    /// rows that break the domain rules.
    pub fn new(metas: Vec<RagamMeta>) -> Result<Self, CorpusError> {
        let mut by_name = HashMap::with_capacity(metas.len());
        for (i, meta) in metas.iter().enumerate() {
            let line = i as u64 + 2;
            if meta.id.index() != i {
                return Err(CorpusError::Domain {
                    line,
                    message: format!("id {} is not contiguous (expected {i})", meta.id),
                });
            }
            meta.validate()
                .map_err(|message| CorpusError::Domain { line, message })?;
            if by_name.insert(meta.name.clone(), meta.id).is_some() {
                return Err(CorpusError::DuplicateName {
                    name: meta.name.clone(),
                    line,
                });
            }
        }
        Ok(Self { metas, by_name })
    }

    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }

    pub fn get(&self, id: RagamId) -> Option<&RagamMeta> {
        self.metas.get(id.index())
    }

    pub fn meta(&self, id: RagamId) -> &RagamMeta {
        &self.metas[id.index()]
    }

    pub fn name(&self, id: RagamId) -> &str {
        &self.metas[id.index()].name
    }

    pub fn lookup(&self, name: &str) -> Option<RagamId> {
        self.by_name.get(name).copied()
    }

    pub fn metas(&self) -> &[RagamMeta] {
        &self.metas
    }

    pub fn ids(&self) -> impl Iterator<Item = RagamId> + '_ {
        (0..self.metas.len()).map(RagamId::from)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concert {
    pub concert_id: String,
    pub date: Option<String>,
    pub items: Vec<RagamId>,
}

impl Concert {
    /// True if some ragam appears more than once.
    pub fn has_repeats(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.items.len());
        !self.items.iter().all(|id| seen.insert(*id))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub vocabulary: Vocabulary,
    pub concerts: Vec<Concert>,
}

impl Corpus {
    /// Same vocabulary, subset of concerts.
    pub fn with_concerts(&self, concerts: Vec<Concert>) -> Corpus {
        Corpus {
            vocabulary: self.vocabulary.clone(),
            concerts,
        }
    }

    pub fn concert_ids(&self) -> impl Iterator<Item = &str> {
        self.concerts.iter().map(|c| c.concert_id.as_str())
    }

    pub fn transition_count(&self) -> usize {
        self.concerts
            .iter()
            .map(|c| c.items.len().saturating_sub(1))
            .sum()
    }
}

fn parse_bool(field: &str, column: &str, line: u64) -> Result<bool, CorpusError> {
    match field {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(CorpusError::MalformedRow {
            line,
            message: format!("{column}: expected true/false, got {other:?}"),
        }),
    }
}

fn non_empty(field: &str) -> Option<&str> {
    if field.is_empty() {
        None
    } else {
        Some(field)
    }
}

/// Parses the metadata CSV. Ids follow row order starting at 0.
pub fn parse_metadata<R: Read>(source: R) -> Result<Vec<RagamMeta>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);

    let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let header: Vec<&str> = headers.iter().map(str::trim).collect();
    if header != METADATA_HEADER {
        return Err(CorpusError::MalformedRow {
            line: 1,
            message: format!("expected header {:?}, got {:?}", METADATA_HEADER.join(","), header.join(",")),
        });
    }

    let mut metas = Vec::new();
    let mut seen = HashSet::new();
    for (row, record) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let record = record.map_err(|e| csv_error(e, line))?;
        if record.len() != METADATA_HEADER.len() {
            return Err(CorpusError::MalformedRow {
                line,
                message: format!("expected {} fields, got {}", METADATA_HEADER.len(), record.len()),
            });
        }
        let field = |i: usize| record.get(i).unwrap_or("").trim();

        let name = field(0);
        if name.is_empty() {
            return Err(CorpusError::MalformedRow {
                line,
                message: "empty name".into(),
            });
        }
        if !seen.insert(name.to_string()) {
            return Err(CorpusError::DuplicateName {
                name: name.to_string(),
                line,
            });
        }
        let is_janya = parse_bool(field(1), "is_janya", line)?;
        let mela_number = match non_empty(field(2)) {
            None => None,
            Some(s) => {
                let n: i64 = s.parse().map_err(|_| CorpusError::MalformedRow {
                    line,
                    message: format!("mela_number: not an integer: {s:?}"),
                })?;
                if !(1..=72).contains(&n) {
                    return Err(CorpusError::Domain {
                        line,
                        message: format!("mela_number {n} outside 1..=72"),
                    });
                }
                Some(n as u8)
            }
        };
        let mela_category = non_empty(field(3)).map(str::to_string);
        let ragam_type = field(4)
            .parse::<RagamType>()
            .map_err(|message| CorpusError::Domain { line, message })?;
        let combo = match non_empty(field(5)) {
            None => None,
            Some(s) => Some(
                s.parse::<RagamType>()
                    .map_err(|message| CorpusError::Domain { line, message })?,
            ),
        };
        let vakram = parse_bool(field(6), "vakram", line)?;

        let meta = RagamMeta {
            id: RagamId::from(metas.len()),
            name: name.to_string(),
            is_janya,
            mela_number,
            mela_category,
            ragam_type,
            combo,
            vakram,
        };
        meta.validate()
            .map_err(|message| CorpusError::Domain { line, message })?;
        metas.push(meta);
    }
    Ok(metas)
}

fn csv_error(e: csv::Error, line: u64) -> CorpusError {
    let line = e.position().map(|p| p.line()).unwrap_or(line);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CorpusError::Io(io),
        other => CorpusError::MalformedRow {
            line,
            message: format!("{other:?}"),
        },
    }
}

pub fn write_metadata<W: Write>(vocab: &Vocabulary, sink: W) -> Result<(), CorpusError> {
    let mut writer = csv::WriterBuilder::new().from_writer(sink);
    let io = |e: csv::Error| CorpusError::Io(std::io::Error::other(e));
    writer.write_record(METADATA_HEADER).map_err(io)?;
    for m in vocab.metas() {
        let mela = m.mela_number.map(|n| n.to_string()).unwrap_or_default();
        writer
            .write_record([
                m.name.as_str(),
                if m.is_janya { "true" } else { "false" },
                mela.as_str(),
                m.mela_category.as_deref().unwrap_or(""),
                m.ragam_type.as_str(),
                m.combo.map(RagamType::as_str).unwrap_or(""),
                if m.vakram { "true" } else { "false" },
            ])
            .map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}

/// One line of the concert log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcertRecord {
    pub concert_id: String,
    pub date: Option<String>,
    pub items: Vec<String>,
}

impl ConcertRecord {
    pub fn from_concert(concert: &Concert, vocab: &Vocabulary) -> Self {
        Self {
            concert_id: concert.concert_id.clone(),
            date: concert.date.clone(),
            items: concert.items.iter().map(|&id| vocab.name(id).to_string()).collect(),
        }
    }

    /// The record as a single JSON line, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("concert record serializes")
    }
}

/// Parses a JSON Lines concert log against an already-parsed vocabulary.
/// Blank lines are skipped.
pub fn parse_corpus<R: Read>(source: R, vocab: Vec<RagamMeta>) -> Result<Corpus, CorpusError> {
    let vocabulary = Vocabulary::new(vocab)?;
    let reader = std::io::BufReader::new(source);
    let mut concerts = Vec::new();
    let mut ids = HashSet::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ConcertRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRow {
                line: line_no,
                message: e.to_string(),
            })?;
        if !ids.insert(record.concert_id.clone()) {
            return Err(CorpusError::DuplicateConcertId(record.concert_id));
        }
        if record.items.is_empty() {
            return Err(CorpusError::EmptyConcert(record.concert_id));
        }
        let items = record
            .items
            .iter()
            .map(|name| {
                vocabulary
                    .lookup(name)
                    .ok_or_else(|| CorpusError::UnknownRagam {
                        concert_id: record.concert_id.clone(),
                        name: name.clone(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let concert = Concert {
            concert_id: record.concert_id,
            date: record.date,
            items,
        };
        if concert.has_repeats() {
            log::warn!(
                "concert {:?} repeats a ragam; kept as logged",
                concert.concert_id
            );
        }
        concerts.push(concert);
    }

    Ok(Corpus {
        vocabulary,
        concerts,
    })
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut sink: W) -> Result<(), CorpusError> {
    for concert in &corpus.concerts {
        let line = ConcertRecord::from_concert(concert, &corpus.vocabulary).to_json_line();
        writeln!(sink, "{line}")?;
    }
    sink.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const META: &str = "name,is_janya,mela_number,mela_category,type,combo,vakram\n\
        Kalyani,false,65,shankarabharanam-chakra-analog,sampoorna,,false\n\
        Mohanam,true,28,,audava,,false\n";

    fn abc_vocab() -> Vec<RagamMeta> {
        let csv = "name,is_janya,mela_number,mela_category,type,combo,vakram\n\
            A,true,,,audava,,false\nB,true,,,shadava,,true\nC,false,1,x,sampoorna,,false\n";
        parse_metadata(csv.as_bytes()).unwrap()
    }

    #[test]
    fn parses_melakarta_and_janya_rows() {
        let metas = parse_metadata(META.as_bytes()).unwrap();
        assert_eq!(metas.len(), 2);
        let k = &metas[0];
        assert_eq!(k.id, RagamId(0));
        assert!(!k.is_janya);
        assert_eq!(k.mela_number, Some(65));
        assert_eq!(k.ragam_type, RagamType::Sampoorna);
        assert!(!k.vakram);
        assert_eq!(k.mela_category.as_deref(), Some("shankarabharanam-chakra-analog"));
        let m = &metas[1];
        assert_eq!(m.id, RagamId(1));
        assert!(m.is_janya);
        assert_eq!(m.ragam_type, RagamType::Audava);
        assert_eq!(m.mela_category, None);
        assert_eq!(m.combo, None);
    }

    #[test]
    fn mela_number_out_of_range_is_domain_error() {
        let csv = "name,is_janya,mela_number,mela_category,type,combo,vakram\nX,true,99,,audava,,false\n";
        assert!(matches!(
            parse_metadata(csv.as_bytes()),
            Err(CorpusError::Domain { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_type_token_is_domain_error() {
        let csv = "name,is_janya,mela_number,mela_category,type,combo,vakram\nX,true,,,heptatonic,,false\n";
        assert!(matches!(parse_metadata(csv.as_bytes()), Err(CorpusError::Domain { .. })));
    }

    #[test]
    fn melakarta_rules_are_enforced() {
        let audava_mela = "name,is_janya,mela_number,mela_category,type,combo,vakram\nX,false,3,,audava,,false\n";
        assert!(matches!(parse_metadata(audava_mela.as_bytes()), Err(CorpusError::Domain { .. })));
        let vakra_mela = "name,is_janya,mela_number,mela_category,type,combo,vakram\nX,false,3,,sampoorna,,true\n";
        assert!(matches!(parse_metadata(vakra_mela.as_bytes()), Err(CorpusError::Domain { .. })));
        let same_combo = "name,is_janya,mela_number,mela_category,type,combo,vakram\nX,true,3,,audava,audava,false\n";
        assert!(matches!(parse_metadata(same_combo.as_bytes()), Err(CorpusError::Domain { .. })));
    }

    #[test]
    fn duplicate_names_and_bad_rows() {
        let dup = "name,is_janya,mela_number,mela_category,type,combo,vakram\nX,true,,,audava,,false\nX,true,,,audava,,false\n";
        assert!(matches!(
            parse_metadata(dup.as_bytes()),
            Err(CorpusError::DuplicateName { line: 3, .. })
        ));
        let short = "name,is_janya,mela_number,mela_category,type,combo,vakram\nX,true,,audava\n";
        assert!(matches!(parse_metadata(short.as_bytes()), Err(CorpusError::MalformedRow { .. })));
        let bad_bool = "name,is_janya,mela_number,mela_category,type,combo,vakram\nX,yes,,,audava,,false\n";
        assert!(matches!(parse_metadata(bad_bool.as_bytes()), Err(CorpusError::MalformedRow { .. })));
        let bad_header = "name,janya\nX,true\n";
        assert!(matches!(parse_metadata(bad_header.as_bytes()), Err(CorpusError::MalformedRow { line: 1, .. })));
    }

    #[test]
    fn parses_two_concerts() {
        let log = r#"{"concert_id":"C1","date":"2019-01-05","items":["A","B","C"]}
{"concert_id":"C2","date":null,"items":["A","C"]}
"#;
        let corpus = parse_corpus(log.as_bytes(), abc_vocab()).unwrap();
        assert_eq!(corpus.concerts.len(), 2);
        assert_eq!(corpus.concerts[0].items, vec![RagamId(0), RagamId(1), RagamId(2)]);
        assert_eq!(corpus.concerts[0].date.as_deref(), Some("2019-01-05"));
        assert_eq!(corpus.concerts[1].items, vec![RagamId(0), RagamId(2)]);
        assert_eq!(corpus.concerts[1].date, None);
    }

    #[test]
    fn concert_errors() {
        let unknown = r#"{"concert_id":"C1","date":null,"items":["A","Zzz"]}"#;
        assert!(matches!(
            parse_corpus(unknown.as_bytes(), abc_vocab()),
            Err(CorpusError::UnknownRagam { ref name, .. }) if name == "Zzz"
        ));
        let empty = r#"{"concert_id":"C1","date":null,"items":[]}"#;
        assert!(matches!(parse_corpus(empty.as_bytes(), abc_vocab()), Err(CorpusError::EmptyConcert(_))));
        let dup = "{\"concert_id\":\"C1\",\"date\":null,\"items\":[\"A\"]}\n{\"concert_id\":\"C1\",\"date\":null,\"items\":[\"B\"]}\n";
        assert!(matches!(parse_corpus(dup.as_bytes(), abc_vocab()), Err(CorpusError::DuplicateConcertId(_))));
    }

    #[test]
    fn empty_log_is_valid() {
        let corpus = parse_corpus("".as_bytes(), abc_vocab()).unwrap();
        assert!(corpus.concerts.is_empty());
        assert_eq!(corpus.vocabulary.len(), 3);
    }

    #[test]
    fn repeats_are_kept() {
        let log = r#"{"concert_id":"C1","date":null,"items":["A","B","A"]}"#;
        let corpus = parse_corpus(log.as_bytes(), abc_vocab()).unwrap();
        assert!(corpus.concerts[0].has_repeats());
        assert_eq!(corpus.concerts[0].items.len(), 3);
    }

    #[test]
    fn metadata_and_log_round_trip() {
        let vocab = abc_vocab();
        let log = "{\"concert_id\":\"C1\",\"date\":\"2001-02-03\",\"items\":[\"C\",\"A\"]}\n";
        let corpus = parse_corpus(log.as_bytes(), vocab).unwrap();

        let mut meta_out = Vec::new();
        write_metadata(&corpus.vocabulary, &mut meta_out).unwrap();
        let mut log_out = Vec::new();
        write_corpus(&corpus, &mut log_out).unwrap();
        assert_eq!(String::from_utf8(log_out.clone()).unwrap(), log);

        let reparsed = parse_corpus(&log_out[..], parse_metadata(&meta_out[..]).unwrap()).unwrap();
        assert_eq!(reparsed, corpus);
    }
}
