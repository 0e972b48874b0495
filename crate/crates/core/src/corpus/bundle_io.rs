//! JSONL bundle format.
//!
//! Line 1 is a header record; it is followed by exactly `M * N` answer
//! records in row-major order. Every line carries `"schema": "sdm_bundle_v1"`.
//!
//! ```text
//! {"schema":"sdm_bundle_v1","record":"header","original_prompt":"...","paraphrases":[...],"m":10,"n":4,...}
//! {"schema":"sdm_bundle_v1","record":"answer","m":0,"n":0,"text":"..."}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CorpusError, RunBundle};

pub const BUNDLE_SCHEMA: &str = "sdm_bundle_v1";

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Header {
        schema: String,
        original_prompt: String,
        paraphrases: Vec<String>,
        m: usize,
        n: usize,
        model_id: String,
        sampling_temperature: f64,
        created_at: DateTime<Utc>,
        provider_trace: serde_json::Value,
    },
    Answer {
        schema: String,
        m: usize,
        n: usize,
        text: String,
    },
}

/// Serializes `bundle` as JSONL into `out`.
pub fn write_bundle(bundle: &RunBundle, mut out: impl Write) -> std::io::Result<()> {
    let header = Record::Header {
        schema: BUNDLE_SCHEMA.to_string(),
        original_prompt: bundle.original_prompt().to_string(),
        paraphrases: bundle.paraphrases().to_vec(),
        m: bundle.m(),
        n: bundle.n(),
        model_id: bundle.model_id().to_string(),
        sampling_temperature: bundle.sampling_temperature(),
        created_at: bundle.created_at(),
        provider_trace: bundle.provider_trace().clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for (m, row) in bundle.answers().iter().enumerate() {
        for (n, text) in row.iter().enumerate() {
            let rec = Record::Answer { schema: BUNDLE_SCHEMA.to_string(), m, n, text: text.clone() };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()
}

/// Writes the bundle atomically (temp file in the same directory, then rename).
pub fn save_bundle(bundle: &RunBundle, path: &Path) -> Result<(), CorpusError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write_bundle(bundle, std::io::BufWriter::new(tmp.as_file_mut()))?;
    tmp.persist(path).map_err(|e| CorpusError::Io(e.error))?;
    Ok(())
}

fn schema_err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Schema { line, message: message.into() }
}

pub fn load_bundle(path: &Path) -> Result<RunBundle, CorpusError> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();

    let first = lines.next().ok_or_else(|| schema_err(1, "empty file"))??;
    let header: Record =
        serde_json::from_str(&first).map_err(|e| schema_err(1, format!("malformed header: {e}")))?;
    let Record::Header {
        schema,
        original_prompt,
        paraphrases,
        m,
        n,
        model_id,
        sampling_temperature,
        created_at,
        provider_trace,
    } = header
    else {
        return Err(schema_err(1, "first record must be the header"));
    };
    if schema != BUNDLE_SCHEMA {
        return Err(schema_err(1, format!("unsupported schema version {schema:?}")));
    }
    if paraphrases.len() != m || m == 0 || n == 0 {
        return Err(schema_err(1, format!("header declares m={m}, n={n} with {} paraphrases", paraphrases.len())));
    }
    if paraphrases[0] != original_prompt {
        return Err(schema_err(1, "paraphrase 0 must be the original prompt"));
    }

    let mut grid: Vec<Vec<Option<String>>> = vec![vec![None; n]; m];
    let mut seen = 0usize;
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| schema_err(lineno, format!("malformed record: {e}")))?;
        let Record::Answer { schema, m: i, n: j, text } = rec else {
            return Err(schema_err(lineno, "unexpected second header"));
        };
        if schema != BUNDLE_SCHEMA {
            return Err(schema_err(lineno, format!("unsupported schema version {schema:?}")));
        }
        let cell = grid
            .get_mut(i)
            .and_then(|row| row.get_mut(j))
            .ok_or_else(|| schema_err(lineno, format!("cell ({i}, {j}) outside {m}x{n} grid")))?;
        if cell.replace(text).is_some() {
            return Err(schema_err(lineno, format!("duplicate cell ({i}, {j})")));
        }
        seen += 1;
    }
    if seen != m * n {
        return Err(schema_err(seen + 2, format!("expected {} answer records, found {seen}", m * n)));
    }

    let answers = grid.into_iter().map(|row| row.into_iter().map(Option::unwrap).collect()).collect();
    RunBundle::new(paraphrases, answers, model_id, sampling_temperature, created_at, provider_trace)
        .map_err(|e| schema_err(1, e.to_string()))
}
