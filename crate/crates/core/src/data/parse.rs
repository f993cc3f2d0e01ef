use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, EncodingScheme, RatingEvent, RatingScale, UNKNOWN_CODE};
use crate::error::{Error, Result};

/// The twelve contextual variables of LDOS-CoMoDa.
pub const COMODA_CONTEXT_COLUMNS: [&str; 12] = [
    "time",
    "daytype",
    "season",
    "location",
    "weather",
    "social",
    "endEmo",
    "dominantEmo",
    "mood",
    "physical",
    "decision",
    "interaction",
];

/// Which header names hold ids, ratings and context codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub user_column: String,
    pub item_column: String,
    pub rating_column: String,
    pub context_columns: Vec<String>,
    pub scheme: EncodingScheme,
    pub rating_min: f64,
    pub r_max: f64,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            user_column: "userID".into(),
            item_column: "itemID".into(),
            rating_column: "rating".into(),
            context_columns: COMODA_CONTEXT_COLUMNS.iter().map(|s| s.to_string()).collect(),
            scheme: EncodingScheme::OneHot,
            rating_min: 1.0,
            r_max: 5.0,
        }
    }
}

impl ColumnMapping {
    pub fn scale(&self) -> RatingScale {
        RatingScale {
            rating_min: self.rating_min,
            r_max: self.r_max,
        }
    }
}

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowDiagnostic {
    /// 1-based line number in the file; the header is line 1.
    pub line: u64,
    pub reason: String,
}

impl std::fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub dataset: Dataset,
    pub diagnostics: Vec<RowDiagnostic>,
    pub rows_read: usize,
}

impl ParseOutcome {
    pub fn rows_skipped(&self) -> usize {
        self.diagnostics.len()
    }
}

fn parse_code(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Some(UNKNOWN_CODE);
    }
    raw.parse::<i64>().ok().or_else(|| {
        let f: f64 = raw.parse().ok()?;
        (f.fract() == 0.0 && f.abs() < 1e15).then_some(f as i64)
    })
}

/// Reads an LDOS-CoMoDa-style CSV. Malformed rows are skipped and reported;
/// only a missing file, a missing column or an empty result is an error.
pub fn parse_comoda(path: &Path, mapping: &ColumnMapping) -> Result<ParseOutcome> {
    let scale = mapping.scale();
    scale.validate()?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let user_col = find(&mapping.user_column)?;
    let item_col = find(&mapping.item_column)?;
    let rating_col = find(&mapping.rating_column)?;
    let ctx_cols = mapping
        .context_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut events = Vec::new();
    let mut diagnostics = Vec::new();
    let mut rows_read = 0;
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line() + 1;
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                rows_read += 1;
                diagnostics.push(RowDiagnostic {
                    line,
                    reason: e.to_string(),
                });
                // a broken record may leave the reader unable to advance
                if e.is_io_error() {
                    break;
                }
                continue;
            }
        }
        rows_read += 1;
        let line = record.position().map_or(line, |p| p.line());
        match row_to_event(&record, user_col, item_col, rating_col, &ctx_cols, mapping, &scale) {
            Ok(ev) => events.push(ev),
            Err(reason) => diagnostics.push(RowDiagnostic { line, reason }),
        }
    }

    if events.is_empty() {
        return Err(Error::NoValidRows(path.to_path_buf()));
    }
    let dataset = Dataset::fit(events, mapping.context_columns.clone(), mapping.scheme, scale)?;
    Ok(ParseOutcome {
        dataset,
        diagnostics,
        rows_read,
    })
}

fn row_to_event(
    record: &csv::StringRecord,
    user_col: usize,
    item_col: usize,
    rating_col: usize,
    ctx_cols: &[usize],
    mapping: &ColumnMapping,
    scale: &RatingScale,
) -> std::result::Result<RatingEvent, String> {
    let field = |idx: usize, name: &str| -> std::result::Result<&str, String> {
        record
            .get(idx)
            .map(str::trim)
            .ok_or_else(|| format!("missing field `{name}`"))
    };
    let user_id = field(user_col, &mapping.user_column)?;
    let item_id = field(item_col, &mapping.item_column)?;
    if user_id.is_empty() {
        return Err(format!("empty `{}`", mapping.user_column));
    }
    if item_id.is_empty() {
        return Err(format!("empty `{}`", mapping.item_column));
    }
    let raw_rating = field(rating_col, &mapping.rating_column)?;
    let rating: f64 = raw_rating
        .parse()
        .map_err(|_| format!("unparseable rating `{raw_rating}`"))?;
    if !scale.contains(rating) {
        return Err(format!(
            "rating {rating} outside [{}, {}]",
            scale.rating_min, scale.r_max
        ));
    }
    let mut context_attrs = Vec::with_capacity(ctx_cols.len());
    for (&idx, name) in ctx_cols.iter().zip(&mapping.context_columns) {
        let raw = field(idx, name)?;
        let code = parse_code(raw).ok_or_else(|| format!("unparseable context `{name}` = `{raw}`"))?;
        context_attrs.push(code);
    }
    Ok(RatingEvent {
        user_id: user_id.to_string(),
        item_id: item_id.to_string(),
        rating,
        context_attrs,
    })
}

/// Writes `dataset` in the same CSV layout [`parse_comoda`] reads.
pub fn write_csv<W: Write>(dataset: &Dataset, mapping: &ColumnMapping, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec![
        mapping.user_column.as_str(),
        mapping.item_column.as_str(),
        mapping.rating_column.as_str(),
    ];
    header.extend(mapping.context_columns.iter().map(String::as_str));
    writer.write_record(&header)?;
    for ev in dataset.events() {
        let mut row = vec![ev.user_id.clone(), ev.item_id.clone(), ev.rating.to_string()];
        row.extend(ev.context_attrs.iter().map(|c| c.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
