//! Counts files and error-model parameter documents.
//!
//! Counts file: comma-separated, one record per line,
//! `alice,basis,pe_nominal,c10,c11,c01,c00[,duration_s]` with counts in
//! `(Bob bit, Eve bit)` cell order. `#` starts a comment line and a header
//! line beginning with `alice` is skipped.
//!
//! Parameter document: a flat JSON object with the ten keys of
//! [`PARAM_KEYS`], angles in degrees. The extra keys written by a fit
//! (`residual`, `evaluations`, `converged`, `warnings`) are accepted and
//! ignored so a fit output can seed another run.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{FpbError, Result};
use crate::error_model::{ErrorModelParams, N_PARAMS, PARAM_KEYS};
use crate::fit::FitResult;
use crate::montecarlo::CountsRecord;

pub const COUNTS_HEADER: [&str; 8] = [
    "alice",
    "basis",
    "pe_nominal",
    "c10",
    "c11",
    "c01",
    "c00",
    "duration_s",
];

const FIT_EXTRA_KEYS: [&str; 4] = ["residual", "evaluations", "converged", "warnings"];

pub fn parse_counts<R: Read>(reader: R) -> Result<Vec<CountsRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |message: String| FpbError::Parse { line, message };
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.get(0).is_some_and(|f| f.eq_ignore_ascii_case("alice")) {
            continue;
        }
        if row.len() != 7 && row.len() != 8 {
            return Err(err(format!("expected 7 or 8 fields, found {}", row.len())));
        }
        let alice = row[0].parse().map_err(|e: FpbError| err(e.to_string()))?;
        let bob_basis = row[1].parse().map_err(|e: FpbError| err(e.to_string()))?;
        let pe_nominal: f64 = row[2]
            .parse()
            .map_err(|_| err(format!("invalid pe '{}'", &row[2])))?;
        let mut counts = [0u64; 4];
        for (i, c) in counts.iter_mut().enumerate() {
            let field = &row[3 + i];
            *c = field
                .parse()
                .map_err(|_| err(format!("invalid count '{field}'")))?;
        }
        let duration_s = match row.get(7) {
            Some("") | None => None,
            Some(f) => Some(
                f.parse::<f64>()
                    .map_err(|_| err(format!("invalid duration '{f}'")))?,
            ),
        };
        let record = CountsRecord {
            alice,
            bob_basis,
            pe_nominal,
            counts,
            duration_s,
        };
        record.validate().map_err(|e| err(e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_counts(path: &Path) -> Result<Vec<CountsRecord>> {
    parse_counts(BufReader::new(File::open(path)?))
}

/// Writes records with a header line. `pe_nominal` uses the shortest
/// representation that parses back to the same value.
pub fn write_counts<W: Write>(writer: W, records: &[CountsRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    w.write_record(COUNTS_HEADER)?;
    for r in records {
        let mut fields = vec![
            r.alice.to_string(),
            r.bob_basis.to_string(),
            format!("{}", r.pe_nominal),
        ];
        fields.extend(r.counts.iter().map(u64::to_string));
        fields.push(r.duration_s.map(|d| d.to_string()).unwrap_or_default());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn params_to_json(params: &ErrorModelParams) -> Map<String, Value> {
    let mut m = Map::new();
    for (k, v) in PARAM_KEYS.iter().zip(params.to_degrees()) {
        m.insert((*k).to_string(), Value::from(clean_zero(v)));
    }
    m
}

pub fn fit_result_to_json(fit: &FitResult) -> Map<String, Value> {
    let mut m = params_to_json(&fit.params);
    m.insert("residual".into(), Value::from(fit.residual));
    m.insert("evaluations".into(), Value::from(fit.evaluations));
    m.insert("converged".into(), Value::from(fit.converged));
    m.insert(
        "warnings".into(),
        Value::Array(fit.warnings.iter().cloned().map(Value::from).collect()),
    );
    m
}

pub fn params_from_json(doc: &Value) -> Result<ErrorModelParams> {
    let obj = doc.as_object().ok_or_else(|| {
        FpbError::InvalidArgument("parameter document must be a JSON object".into())
    })?;
    for k in obj.keys() {
        if !PARAM_KEYS.contains(&k.as_str()) && !FIT_EXTRA_KEYS.contains(&k.as_str()) {
            return Err(FpbError::InvalidArgument(format!(
                "unknown parameter key '{k}'"
            )));
        }
    }
    let mut deg = [0.0; N_PARAMS];
    for (slot, key) in deg.iter_mut().zip(PARAM_KEYS) {
        *slot = obj
            .get(key)
            .ok_or_else(|| FpbError::InvalidArgument(format!("missing parameter '{key}'")))?
            .as_f64()
            .filter(|v| v.is_finite())
            .ok_or_else(|| {
                FpbError::InvalidArgument(format!("parameter '{key}' must be a finite number"))
            })?;
    }
    Ok(ErrorModelParams::from_degrees(deg))
}

pub fn read_params(path: &Path) -> Result<ErrorModelParams> {
    let doc: Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    params_from_json(&doc)
}

pub fn write_params<W: Write>(mut writer: W, params: &ErrorModelParams) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, &Value::Object(params_to_json(params)))?;
    writeln!(writer)?;
    Ok(())
}

fn clean_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}
