use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::ReturnsSeries;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinuteBar {
    pub timestamp: NaiveDateTime,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: u64,
}

impl MinuteBar {
    /// Positivity and `low ≤ open, close ≤ high`.
    pub fn check(&self) -> std::result::Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close];
        if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(format!("price {p} is not positive"));
        }
        if self.low > self.open.min(self.close) || self.high < self.open.max(self.close) {
            return Err(format!(
                "open/close outside [low, high]: o={} h={} l={} c={}",
                self.open, self.high, self.low, self.close
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Date,
    Time,
    /// Date and time in one field.
    DateTime,
    Open,
    High,
    Low,
    Close,
    Volume,
    Skip,
}

impl Column {
    fn accepts(self, header: &str) -> bool {
        let h = header
            .trim()
            .trim_matches(|c| c == '<' || c == '>')
            .to_ascii_lowercase();
        match self {
            Column::Date => h == "date",
            Column::Time => h == "time",
            Column::DateTime => matches!(h.as_str(), "datetime" | "timestamp"),
            Column::Open => h == "open",
            Column::High => h == "high",
            Column::Low => h == "low",
            Column::Close => h == "close",
            Column::Volume => matches!(h.as_str(), "volume" | "vol"),
            Column::Skip => true,
        }
    }
}

/// Layout of a bar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub columns: Vec<Column>,
    /// `None` picks `;` when the first line contains one, `,` otherwise.
    pub delimiter: Option<char>,
    /// `None` treats the first line as a header when its open price does not parse.
    pub has_header: Option<bool>,
    /// chrono formats tried in order.
    pub date_formats: Vec<String>,
    pub time_formats: Vec<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            columns: vec![
                Column::Date,
                Column::Time,
                Column::Open,
                Column::High,
                Column::Low,
                Column::Close,
                Column::Volume,
            ],
            delimiter: None,
            has_header: None,
            date_formats: ["%Y-%m-%d", "%Y%m%d", "%Y.%m.%d", "%d/%m/%Y"]
                .map(String::from)
                .to_vec(),
            time_formats: ["%H:%M:%S", "%H%M%S", "%H:%M"].map(String::from).to_vec(),
        }
    }
}

impl ColumnMap {
    /// `<TICKER>,<PER>,<DATE>,<TIME>,<OPEN>,<HIGH>,<LOW>,<CLOSE>,<VOL>` exports.
    pub fn ticker_export() -> Self {
        let mut columns = vec![Column::Skip, Column::Skip];
        columns.extend(ColumnMap::default().columns);
        ColumnMap {
            columns,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let count = |c| self.columns.iter().filter(|&&x| x == c).count();
        let split = count(Column::Date) == 1 && count(Column::Time) == 1;
        let joined = count(Column::DateTime) == 1 && count(Column::Date) + count(Column::Time) == 0;
        if !(split || joined) {
            return Err(Error::Config(
                "column map needs either date and time or a single datetime column".into(),
            ));
        }
        for c in [
            Column::Open,
            Column::High,
            Column::Low,
            Column::Close,
            Column::Volume,
        ] {
            if count(c) != 1 {
                return Err(Error::Config(format!(
                    "column map needs exactly one {c:?} column"
                )));
            }
        }
        Ok(())
    }

    fn position(&self, c: Column) -> Option<usize> {
        self.columns.iter().position(|&x| x == c)
    }

    fn parse_date(&self, s: &str) -> Option<NaiveDate> {
        self.date_formats
            .iter()
            .find_map(|f| NaiveDate::parse_from_str(s, f).ok())
    }

    fn parse_time(&self, s: &str) -> Option<NaiveTime> {
        self.time_formats
            .iter()
            .find_map(|f| NaiveTime::parse_from_str(s, f).ok())
    }

    fn parse_datetime(&self, s: &str) -> Option<NaiveDateTime> {
        let (d, t) = s.trim().split_once([' ', 'T'])?;
        Some(
            self.parse_date(d.trim())?
                .and_time(self.parse_time(t.trim())?),
        )
    }
}

/// Bars and located row errors of a lenient ingest.
#[derive(Debug, Default)]
pub struct IngestReport {
    pub bars: Vec<MinuteBar>,
    pub errors: Vec<Error>,
    /// Data rows seen, header excluded.
    pub rows: usize,
}

impl IngestReport {
    /// Every row became a bar or an error.
    pub fn is_total(&self) -> bool {
        self.rows == self.bars.len() + self.errors.len()
    }
}

fn clean(field: &str) -> &str {
    field.trim().trim_matches('\u{feff}').trim_matches('"')
}

fn parse_row(map: &ColumnMap, fields: &[&str], path: &Path, line: u64) -> Result<MinuteBar> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if fields.len() != map.columns.len() {
        return Err(parse_err(format!(
            "expected {} fields, found {}",
            map.columns.len(),
            fields.len()
        )));
    }
    let field = |c: Column| clean(fields[map.position(c).expect("validated map")]);
    let number = |c: Column| -> Result<f64> {
        let s = field(c);
        s.parse::<f64>()
            .map_err(|_| parse_err(format!("{c:?} field {s:?} is not a number")))
    };
    let timestamp = if map.position(Column::DateTime).is_some() {
        let s = field(Column::DateTime);
        map.parse_datetime(s)
            .ok_or_else(|| parse_err(format!("unrecognized datetime {s:?}")))?
    } else {
        let (d, t) = (field(Column::Date), field(Column::Time));
        let date = map
            .parse_date(d)
            .ok_or_else(|| parse_err(format!("unrecognized date {d:?}")))?;
        let time = map
            .parse_time(t)
            .ok_or_else(|| parse_err(format!("unrecognized time {t:?}")))?;
        date.and_time(time)
    };
    let vol = field(Column::Volume);
    let volume = vol
        .parse::<u64>()
        .or_else(|_| match vol.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 => Ok(v as u64),
            _ => Err(()),
        })
        .map_err(|_| parse_err(format!("volume {vol:?} is not a nonnegative integer")))?;
    let bar = MinuteBar {
        timestamp,
        open: number(Column::Open)?,
        high: number(Column::High)?,
        low: number(Column::Low)?,
        close: number(Column::Close)?,
        volume,
    };
    bar.check().map_err(|message| Error::Validation {
        path: path.to_path_buf(),
        line,
        message,
    })?;
    Ok(bar)
}

/// Ingest rows one by one; `strict` stops at the first bad row.
fn ingest<R: Read>(
    mut reader: R,
    path: &Path,
    map: &ColumnMap,
    strict: bool,
) -> Result<IngestReport> {
    map.validate()?;
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let delimiter = map.delimiter.unwrap_or_else(|| {
        let first = text.lines().next().unwrap_or("");
        if first.contains(';') {
            ';'
        } else {
            ','
        }
    });
    if !delimiter.is_ascii() {
        return Err(Error::Config(format!(
            "delimiter {delimiter:?} is not ASCII"
        )));
    }
    let mut records = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(delimiter as u8)
        .from_reader(text.as_bytes());

    let mut report = IngestReport::default();
    let mut last: Option<NaiveDateTime> = None;
    let mut first = true;
    for record in records.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = record.iter().collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }

        if std::mem::take(&mut first) {
            let open_at = map.position(Column::Open).expect("validated map");
            let is_header = map.has_header.unwrap_or_else(|| {
                fields
                    .get(open_at)
                    .is_none_or(|f| clean(f).parse::<f64>().is_err())
            });
            if is_header {
                let matches = fields.len() == map.columns.len()
                    && map.columns.iter().zip(&fields).all(|(c, f)| c.accepts(f));
                if !matches {
                    return Err(Error::Validation {
                        path: path.to_path_buf(),
                        line,
                        message: format!("header {fields:?} does not match the column map"),
                    });
                }
                continue;
            }
        }

        report.rows += 1;
        let parsed = parse_row(map, &fields, path, line).and_then(|bar| match last {
            Some(prev) if bar.timestamp <= prev => Err(Error::Validation {
                path: path.to_path_buf(),
                line,
                message: format!("timestamp {} does not follow {prev}", bar.timestamp),
            }),
            _ => Ok(bar),
        });
        match parsed {
            Ok(bar) => {
                last = Some(bar.timestamp);
                report.bars.push(bar);
            }
            Err(e) if strict => return Err(e),
            Err(e) => report.errors.push(e),
        }
    }
    Ok(report)
}

/// Parse a bar file, failing on the first malformed or out-of-order row.
pub fn ingest_minutes(path: impl AsRef<Path>, map: &ColumnMap) -> Result<Vec<MinuteBar>> {
    let path = path.as_ref();
    Ok(ingest(File::open(path)?, path, map, true)?.bars)
}

/// Parse a bar file, collecting row errors instead of stopping.
pub fn ingest_minutes_lenient(path: impl AsRef<Path>, map: &ColumnMap) -> Result<IngestReport> {
    let path = path.as_ref();
    ingest(File::open(path)?, path, map, false)
}

/// Parse bars from any reader; `name` is used in error locations.
pub fn read_bars<R: Read>(reader: R, name: &str, map: &ColumnMap) -> Result<Vec<MinuteBar>> {
    Ok(ingest(reader, &PathBuf::from(name), map, true)?.bars)
}

/// Normalized store: `date,time,open,high,low,close,volume`, ISO date and time.
///
/// Readable back with [`ColumnMap::default`].
pub fn write_bars<W: Write>(mut w: W, bars: &[MinuteBar]) -> Result<()> {
    writeln!(w, "date,time,open,high,low,close,volume")?;
    for b in bars {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            b.timestamp.date().format("%Y-%m-%d"),
            b.timestamp.time().format("%H:%M:%S"),
            b.open,
            b.high,
            b.low,
            b.close,
            b.volume
        )?;
    }
    Ok(())
}

/// How returns treat consecutive bars from different calendar days.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    /// Every consecutive pair of bars gives a return.
    #[default]
    Ignore,
    /// Pairs spanning a date change are dropped and the window extended.
    SkipSessionBreaks,
}

/// `n` close-to-close log returns starting at bar `offset`.
///
/// Always yields exactly `n` returns or an error.
pub fn historical_returns(
    bars: &[MinuteBar],
    offset: usize,
    n: usize,
    policy: GapPolicy,
) -> Result<ReturnsSeries> {
    if n == 0 {
        return Err(Error::Input("window length must be positive".into()));
    }
    let mut values = Vec::with_capacity(n);
    let mut k = offset;
    while values.len() < n {
        let (Some(prev), Some(next)) = (bars.get(k), bars.get(k + 1)) else {
            return Err(Error::Input(format!(
                "window of {n} returns at offset {offset} overruns {} bars",
                bars.len()
            )));
        };
        k += 1;
        if policy == GapPolicy::SkipSessionBreaks && prev.timestamp.date() != next.timestamp.date()
        {
            continue;
        }
        values.push((next.close / prev.close).ln());
    }
    Ok(ReturnsSeries::historical(values, "minute-bars", offset))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, map: &ColumnMap) -> Result<Vec<MinuteBar>> {
        read_bars(text.as_bytes(), "mem.csv", map)
    }

    fn bar(ts: &str, close: f64) -> MinuteBar {
        MinuteBar {
            timestamp: NaiveDateTime::parse_from_str(ts, "%Y-%m-%d %H:%M").unwrap(),
            open: close,
            high: close,
            low: close,
            close,
            volume: 1,
        }
    }

    const THREE: &str = "date,time,open,high,low,close,volume\n\
        2007-03-01,09:31:00,2400.5,2401,2399.75,2400,1200\n\
        2007-03-01,09:32:00,2400,2402,2399,2401.25,900\n\
        2007-03-01,09:33:00,2401.25,2401.5,2400,2400.5,1000\n";

    #[test]
    fn three_rows_in_order() {
        let bars = read(THREE, &ColumnMap::default()).unwrap();
        assert_eq!(bars.len(), 3);
        assert_eq!(bars[1].close, 2401.25);
        assert!(bars.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
    }

    #[test]
    fn semicolons_without_header() {
        let text = "20070301;093100;2400.5;2401;2399.75;2400;1200\n20070301;093200;2400;2402;2399;2401.25;900\n";
        let bars = read(text, &ColumnMap::default()).unwrap();
        assert_eq!(bars.len(), 2);
        assert_eq!(bars[0].timestamp.format("%H:%M").to_string(), "09:31");
    }

    #[test]
    fn ticker_layout() {
        let text = "<TICKER>,<PER>,<DATE>,<TIME>,<OPEN>,<HIGH>,<LOW>,<CLOSE>,<VOL>\n\
            NDX,1,20070301,093100,2400.5,2401,2399.75,2400,1200\n";
        let bars = read(text, &ColumnMap::ticker_export()).unwrap();
        assert_eq!(bars[0].volume, 1200);
    }

    #[test]
    fn nonpositive_close_names_the_line() {
        let text = THREE
            .replace("2401.25,900", "0,900")
            .replace("2399,0", "0,0");
        match read(&text, &ColumnMap::default()) {
            Err(Error::Validation { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_is_parse_error() {
        let text = THREE.replace("2402", "x");
        assert!(matches!(
            read(&text, &ColumnMap::default()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn non_monotonic_timestamps() {
        let text = THREE.replace("09:33:00", "09:31:00");
        assert!(matches!(
            read(&text, &ColumnMap::default()),
            Err(Error::Validation { line: 4, .. })
        ));
    }

    #[test]
    fn header_must_match_map() {
        let text = THREE.replace("open,high", "high,open");
        assert!(matches!(
            read(&text, &ColumnMap::default()),
            Err(Error::Validation { line: 1, .. })
        ));
    }

    #[test]
    fn lenient_ingest_accounts_for_every_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bars.csv");
        let text = format!(
            "{THREE}garbage\n2007-03-01,09:30:00,1,1,1,1,1\n2007-03-01,09:40:00,1,1,1,1,1\n"
        );
        std::fs::write(&path, text).unwrap();
        let report = ingest_minutes_lenient(&path, &ColumnMap::default()).unwrap();
        assert_eq!(report.rows, 6);
        assert_eq!(report.bars.len(), 4);
        assert_eq!(report.errors.len(), 2);
        assert!(report.is_total());
        assert!(ingest_minutes(&path, &ColumnMap::default()).is_err());
    }

    #[test]
    fn export_round_trip() {
        let bars = read(THREE, &ColumnMap::default()).unwrap();
        let mut out = Vec::new();
        write_bars(&mut out, &bars).unwrap();
        let back = read(std::str::from_utf8(&out).unwrap(), &ColumnMap::default()).unwrap();
        assert_eq!(back, bars);
    }

    #[test]
    fn flat_and_log_returns() {
        let flat = [
            bar("2007-03-01 09:31", 100.0),
            bar("2007-03-01 09:32", 100.0),
            bar("2007-03-01 09:33", 100.0),
        ];
        let r = historical_returns(&flat, 0, 2, GapPolicy::Ignore).unwrap();
        assert_eq!(r.values, vec![0.0, 0.0]);
        let up = [
            bar("2007-03-01 09:31", 100.0),
            bar("2007-03-01 09:32", 100.0 * 0.01f64.exp()),
        ];
        let r = historical_returns(&up, 0, 1, GapPolicy::Ignore).unwrap();
        assert!((r.values[0] - 0.01).abs() < 1e-12);
        assert!(matches!(
            historical_returns(&up, 0, 2, GapPolicy::Ignore),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn session_break_policies_differ_only_after_gap() {
        let closes = [100.0, 101.0, 100.5, 102.0, 99.0, 99.5, 100.0, 98.0];
        let stamps = [
            "2007-03-01 15:57",
            "2007-03-01 15:58",
            "2007-03-01 15:59",
            "2007-03-01 16:00",
            "2007-03-02 09:31",
            "2007-03-02 09:32",
            "2007-03-02 09:33",
            "2007-03-02 09:34",
        ];
        let bars: Vec<_> = stamps.iter().zip(closes).map(|(t, c)| bar(t, c)).collect();
        let ignore = historical_returns(&bars, 0, 5, GapPolicy::Ignore).unwrap();
        let skip = historical_returns(&bars, 0, 5, GapPolicy::SkipSessionBreaks).unwrap();
        assert_eq!(ignore.len(), 5);
        assert_eq!(skip.len(), 5);
        // the overnight pair is return index 3
        assert_eq!(ignore.values[..3], skip.values[..3]);
        assert!((ignore.values[3] - (99.0f64 / 102.0).ln()).abs() < 1e-15);
        assert!((skip.values[3] - (99.5f64 / 99.0).ln()).abs() < 1e-15);
        assert!(historical_returns(&bars, 0, 7, GapPolicy::SkipSessionBreaks).is_err());
        assert!(historical_returns(&bars, 0, 7, GapPolicy::Ignore).is_ok());
    }
}
