//! Output files. Every artifact carries the configuration hash and seed:
//! JSON documents as top-level fields, JSONL as a header line, CSV as
//! leading `#` comment lines. Numbers are printed in shortest round-trip
//! form, so identical runs give identical bytes.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rhp_core::events::{EventKind, EventStream};
use serde::Serialize;

/// Where a run came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug)]
pub struct OutputError {
    pub path: PathBuf,
    pub source: io::Error,
}

impl std::fmt::Display for OutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for OutputError {}

/// Buffered writer on `path`, or stdout when no path is given; I/O errors
/// carry the path.
pub struct Sink {
    path: PathBuf,
    inner: Box<dyn Write>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> Result<Self, OutputError> {
        match path {
            None => Ok(Self {
                path: PathBuf::from("<stdout>"),
                inner: Box::new(BufWriter::new(io::stdout())),
            }),
            Some(p) => {
                let file = File::create(p).map_err(|source| OutputError {
                    path: p.to_path_buf(),
                    source,
                })?;
                Ok(Self {
                    path: p.to_path_buf(),
                    inner: Box::new(BufWriter::new(file)),
                })
            }
        }
    }

    fn wrap(&self, source: io::Error) -> OutputError {
        OutputError {
            path: self.path.clone(),
            source,
        }
    }

    pub fn write_str(&mut self, s: &str) -> Result<(), OutputError> {
        self.inner.write_all(s.as_bytes()).map_err(|e| self.wrap(e))
    }

    pub fn finish(mut self) -> Result<(), OutputError> {
        self.inner.flush().map_err(|e| self.wrap(e))
    }
}

/// Shortest round-trip decimal form, shared by all formats.
pub fn number(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite floats serialize")
    } else {
        "null".into()
    }
}

#[derive(Serialize)]
struct EventLine<'a> {
    t: f64,
    kind: &'a str,
    gen: u32,
    parent: Option<usize>,
    cluster: usize,
    rep: usize,
}

fn kind_name(kind: EventKind) -> &'static str {
    match kind {
        EventKind::Immigrant => "immigrant",
        EventKind::Offspring => "offspring",
    }
}

/// Run metadata written ahead of event records.
#[derive(Debug, Clone, Serialize)]
pub struct EventHeader<'a> {
    #[serde(flatten)]
    pub provenance: &'a Provenance,
    pub method: &'a str,
    pub horizon: f64,
    pub reps: usize,
    pub count_origin: bool,
}

/// One JSON object per line: a header, then events sorted by `(rep, t)`
/// with schema `{"t","kind","gen","parent","cluster","rep"}`.
pub fn write_events_jsonl(sink: &mut Sink, header: &EventHeader, streams: &[EventStream]) -> Result<(), OutputError> {
    sink.write_str(&serde_json::to_string(header).expect("header serializes"))?;
    sink.write_str("\n")?;
    for s in streams {
        for e in &s.events {
            let line = EventLine {
                t: e.time,
                kind: kind_name(e.kind),
                gen: e.generation,
                parent: e.parent,
                cluster: e.cluster_id,
                rep: e.replicate,
            };
            sink.write_str(&serde_json::to_string(&line).expect("event serializes"))?;
            sink.write_str("\n")?;
        }
    }
    Ok(())
}

fn csv_comments(sink: &mut Sink, pairs: &[(&str, String)]) -> Result<(), OutputError> {
    for (k, v) in pairs {
        sink.write_str(&format!("# {k}={v}\n"))?;
    }
    Ok(())
}

/// Same content as [`write_events_jsonl`]; an absent parent is an empty
/// field.
pub fn write_events_csv(sink: &mut Sink, header: &EventHeader, streams: &[EventStream]) -> Result<(), OutputError> {
    csv_comments(
        sink,
        &[
            ("config_hash", header.provenance.config_hash.clone()),
            ("seed", header.provenance.seed.to_string()),
            ("method", header.method.to_string()),
            ("horizon", number(header.horizon)),
            ("reps", header.reps.to_string()),
            ("count_origin", header.count_origin.to_string()),
        ],
    )?;
    sink.write_str("t,kind,gen,parent,cluster,rep\n")?;
    for s in streams {
        for e in &s.events {
            let parent = e.parent.map(|p| p.to_string()).unwrap_or_default();
            sink.write_str(&format!(
                "{},{},{},{},{},{}\n",
                number(e.time),
                kind_name(e.kind),
                e.generation,
                parent,
                e.cluster_id,
                e.replicate
            ))?;
        }
    }
    Ok(())
}

/// Numeric table with provenance comments.
pub fn write_csv_table(
    sink: &mut Sink,
    provenance: &Provenance,
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<(), OutputError> {
    csv_comments(
        sink,
        &[
            ("config_hash", provenance.config_hash.clone()),
            ("seed", provenance.seed.to_string()),
        ],
    )?;
    sink.write_str(&columns.join(","))?;
    sink.write_str("\n")?;
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(number).collect();
        sink.write_str(&cells.join(","))?;
        sink.write_str("\n")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON object with the provenance fields first.
pub fn write_json<T: Serialize>(sink: &mut Sink, provenance: &Provenance, body: &T) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(&Document { provenance, body }).expect("document serializes");
    sink.write_str(&text)?;
    sink.write_str("\n")
}
