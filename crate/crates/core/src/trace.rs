//! Session traces: CSV ingestion, gap handling, imputation, and synthesis.
//!
//! The on-disk format is UTF-8 CSV with a header naming at least
//! `session_id,timestamp_s,rsrp_dbm,sinr_db`; extra columns are ignored.
//! Empty cells mark missing measurements. Rows are grouped by session id,
//! sorted by timestamp, and gaps in the 1 Hz grid are filled with
//! fully-missing records so downstream smoothing sees uniform sampling.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{LqeError, Result};
use crate::seed::mix_seed;

/// Feature order in every trace: RSRP first (the estimation target), SINR second.
pub const FEATURE_NAMES: [&str; 2] = ["rsrp_dbm", "sinr_db"];

const SESSION_COL: &str = "session_id";
const TIMESTAMP_COL: &str = "timestamp_s";

/// Upper bound on records created by gap filling, to catch traces whose
/// timestamp column is not actually on a seconds grid.
const MAX_FILLED_RECORDS: i64 = 50_000_000;

/// One 1 Hz measurement: per-feature values plus missing flags.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    /// Seconds on the session's 1 Hz grid.
    pub timestamp: i64,
    /// Per-feature values; a flagged-missing slot must not be read before imputation.
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl MetricRecord {
    fn fully_missing(timestamp: i64, n_features: usize) -> Self {
        MetricRecord {
            timestamp,
            values: vec![0.0; n_features],
            missing: vec![true; n_features],
        }
    }
}

/// One drive-test session: time-ordered records of link metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub session_id: String,
    pub records: Vec<MetricRecord>,
    pub feature_names: Vec<String>,
}

impl SessionTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Per-feature contiguous series. Fails if any value is still flagged
    /// missing; run [`impute_missing`] first.
    pub fn feature_series(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.n_features();
        let mut series = vec![Vec::with_capacity(self.records.len()); n];
        for record in &self.records {
            for (j, column) in series.iter_mut().enumerate() {
                if record.missing[j] {
                    return Err(LqeError::Validation(format!(
                        "session `{}` has an unimputed missing value for `{}` at t={}",
                        self.session_id, self.feature_names[j], record.timestamp
                    )));
                }
                column.push(record.values[j]);
            }
        }
        Ok(series)
    }
}

/// Parse session-grouped traces from CSV.
///
/// Sessions come back in order of first appearance, internally sorted by
/// timestamp, with 1 Hz gaps filled by fully-missing records.
pub fn parse_trace_csv<R: Read>(source: R) -> Result<Vec<SessionTrace>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LqeError::MissingColumn(name.to_string()))
    };
    let session_col = column(SESSION_COL)?;
    let timestamp_col = column(TIMESTAMP_COL)?;
    let feature_cols = [column(FEATURE_NAMES[0])?, column(FEATURE_NAMES[1])?];

    // Sessions keyed by first appearance.
    let mut order: Vec<String> = Vec::new();
    let mut by_session: Vec<Vec<MetricRecord>> = Vec::new();

    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());

        let session = row.get(session_col).unwrap_or("").to_string();
        if session.is_empty() {
            return Err(LqeError::Parse {
                line,
                message: "empty session_id".into(),
            });
        }
        let raw_ts = row.get(timestamp_col).unwrap_or("");
        let timestamp: i64 = raw_ts.parse().map_err(|_| LqeError::Parse {
            line,
            message: format!("unparsable {TIMESTAMP_COL} value `{raw_ts}`"),
        })?;

        let mut values = Vec::with_capacity(feature_cols.len());
        let mut missing = Vec::with_capacity(feature_cols.len());
        for (j, &col) in feature_cols.iter().enumerate() {
            let cell = row.get(col).unwrap_or("");
            if cell.is_empty() {
                values.push(0.0);
                missing.push(true);
            } else {
                let value: f64 = cell.parse().map_err(|_| LqeError::Parse {
                    line,
                    message: format!("unparsable {} value `{cell}`", FEATURE_NAMES[j]),
                })?;
                values.push(value);
                missing.push(false);
            }
        }

        let idx = match order.iter().position(|s| s == &session) {
            Some(idx) => idx,
            None => {
                order.push(session);
                by_session.push(Vec::new());
                order.len() - 1
            }
        };
        by_session[idx].push(MetricRecord {
            timestamp,
            values,
            missing,
        });
    }

    let mut traces = Vec::with_capacity(order.len());
    for (session_id, mut records) in order.into_iter().zip(by_session) {
        records.sort_by_key(|r| r.timestamp);
        for pair in records.windows(2) {
            if pair[0].timestamp == pair[1].timestamp {
                return Err(LqeError::Validation(format!(
                    "duplicate timestamp {} in session `{session_id}`",
                    pair[0].timestamp
                )));
            }
        }
        traces.push(SessionTrace {
            session_id,
            records: fill_grid_gaps(records)?,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(traces)
}

/// Insert fully-missing records wherever the 1 s grid has holes.
fn fill_grid_gaps(records: Vec<MetricRecord>) -> Result<Vec<MetricRecord>> {
    let (Some(first), Some(last)) = (records.first(), records.last()) else {
        return Ok(records);
    };
    let span = last
        .timestamp
        .checked_sub(first.timestamp)
        .and_then(|d| d.checked_add(1))
        .filter(|&s| s <= MAX_FILLED_RECORDS)
        .ok_or_else(|| {
            LqeError::Validation(format!(
                "timestamp span {}..{} exceeds the gap-fill limit; is {TIMESTAMP_COL} in seconds?",
                first.timestamp, last.timestamp
            ))
        })?;
    if span == records.len() as i64 {
        return Ok(records); // already contiguous
    }
    let n_features = first.values.len();
    let mut filled = Vec::with_capacity(span as usize);
    let mut next_ts = first.timestamp;
    for record in records {
        while next_ts < record.timestamp {
            filled.push(MetricRecord::fully_missing(next_ts, n_features));
            next_ts += 1;
        }
        next_ts = record.timestamp + 1;
        filled.push(record);
    }
    Ok(filled)
}

/// Serialize traces back to the CSV input format (empty cell = missing).
pub fn write_trace_csv<W: Write>(traces: &[SessionTrace], sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record([SESSION_COL, TIMESTAMP_COL, FEATURE_NAMES[0], FEATURE_NAMES[1]])?;
    for trace in traces {
        if trace.feature_names != FEATURE_NAMES {
            return Err(LqeError::Validation(format!(
                "trace `{}` does not use the standard feature set",
                trace.session_id
            )));
        }
        for record in &trace.records {
            let mut row = vec![trace.session_id.clone(), record.timestamp.to_string()];
            for j in 0..record.values.len() {
                if record.missing[j] {
                    row.push(String::new());
                } else {
                    row.push(record.values[j].to_string());
                }
            }
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Replace every flagged-missing value with 0.0 and clear the flag.
///
/// Non-missing values are returned bit-identical; the operation is idempotent.
pub fn impute_missing(trace: &SessionTrace) -> SessionTrace {
    let records = trace
        .records
        .iter()
        .map(|record| MetricRecord {
            timestamp: record.timestamp,
            values: record
                .values
                .iter()
                .zip(&record.missing)
                .map(|(&v, &m)| if m { 0.0 } else { v })
                .collect(),
            missing: vec![false; record.missing.len()],
        })
        .collect();
    SessionTrace {
        session_id: trace.session_id.clone(),
        records,
        feature_names: trace.feature_names.clone(),
    }
}

/// Marginal statistics and temporal correlation for one synthetic feature.
#[derive(Debug, Clone)]
pub struct FeatureSynthSpec {
    pub name: String,
    pub mean: f64,
    pub std_dev: f64,
    /// First-order autocorrelation in `[0, 1)`.
    pub autocorr: f64,
}

impl FeatureSynthSpec {
    pub fn new(name: &str, mean: f64, std_dev: f64, autocorr: f64) -> Self {
        FeatureSynthSpec {
            name: name.to_string(),
            mean,
            std_dev,
            autocorr,
        }
    }
}

/// Specification for a synthetic AR(1) Gaussian trace.
///
/// Defaults reproduce the marginal statistics of a representative highway
/// drive: RSRP mean -87.17 dBm (SD 14.94), SINR mean 8.62 dB (SD 9.67).
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub session_id: String,
    pub length: usize,
    pub features: Vec<FeatureSynthSpec>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            session_id: "synthetic-0".to_string(),
            length: 5000,
            features: vec![
                FeatureSynthSpec::new(FEATURE_NAMES[0], -87.17, 14.94, 0.99),
                FeatureSynthSpec::new(FEATURE_NAMES[1], 8.62, 9.67, 0.95),
            ],
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(LqeError::Validation("synthetic length must be >= 1".into()));
        }
        if self.features.is_empty() {
            return Err(LqeError::Validation(
                "synthetic spec needs at least one feature".into(),
            ));
        }
        for f in &self.features {
            if !f.mean.is_finite() || !f.std_dev.is_finite() || f.std_dev < 0.0 {
                return Err(LqeError::Validation(format!(
                    "feature `{}` needs a finite mean and std_dev >= 0",
                    f.name
                )));
            }
            if !(0.0..1.0).contains(&f.autocorr) {
                return Err(LqeError::Validation(format!(
                    "feature `{}` autocorrelation must be in [0, 1)",
                    f.name
                )));
            }
        }
        Ok(())
    }
}

/// Generate a stationary AR(1) Gaussian trace; deterministic per seed.
///
/// Each feature follows `x_t = mean + rho * (x_{t-1} - mean) + e_t` with the
/// innovation variance chosen so the stationary marginal matches the
/// requested mean and standard deviation.
pub fn generate_synthetic_trace(spec: &SyntheticSpec) -> Result<SessionTrace> {
    spec.validate()?;
    let n = spec.features.len();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (j, feature) in spec.features.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, j as u64));
        let rho = feature.autocorr;
        let innovation_sd = feature.std_dev * (1.0 - rho * rho).sqrt();
        let mut column = Vec::with_capacity(spec.length);
        let mut prev = feature.mean + feature.std_dev * unit.sample(&mut rng);
        column.push(prev);
        for _ in 1..spec.length {
            prev = feature.mean + rho * (prev - feature.mean) + innovation_sd * unit.sample(&mut rng);
            column.push(prev);
        }
        columns.push(column);
    }

    let records = (0..spec.length)
        .map(|t| MetricRecord {
            timestamp: t as i64,
            values: columns.iter().map(|c| c[t]).collect(),
            missing: vec![false; n],
        })
        .collect();
    Ok(SessionTrace {
        session_id: spec.session_id.clone(),
        records,
        feature_names: spec.features.iter().map(|f| f.name.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "session_id,timestamp_s,rsrp_dbm,sinr_db\n";

    fn parse(body: &str) -> Result<Vec<SessionTrace>> {
        parse_trace_csv(format!("{HEADER}{body}").as_bytes())
    }

    #[test]
    fn parses_complete_rows_into_one_session() {
        let traces = parse("a,0,-90.5,8.0\na,1,-91,7.5\na,2,-92,7\n").unwrap();
        assert_eq!(traces.len(), 1);
        let t = &traces[0];
        assert_eq!(t.session_id, "a");
        assert_eq!(t.len(), 3);
        assert!(t.records.iter().all(|r| r.missing.iter().all(|&m| !m)));
        assert_eq!(t.records[0].values, vec![-90.5, 8.0]);
    }

    #[test]
    fn empty_cell_sets_missing_flag() {
        let traces = parse("a,0,-90.5,\n").unwrap();
        let record = &traces[0].records[0];
        assert!(!record.missing[0]);
        assert!(record.missing[1]);
    }

    #[test]
    fn interleaved_sessions_are_split_and_sorted() {
        // Hand-constructed 6-row fixture with shuffled timestamps.
        let traces = parse(
            "a,2,-90,1\nb,11,-100,2\na,0,-91,3\nb,10,-101,4\na,1,-92,5\nb,12,-102,6\n",
        )
        .unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].session_id, "a");
        assert_eq!(traces[1].session_id, "b");
        let ts_a: Vec<i64> = traces[0].records.iter().map(|r| r.timestamp).collect();
        let ts_b: Vec<i64> = traces[1].records.iter().map(|r| r.timestamp).collect();
        assert_eq!(ts_a, vec![0, 1, 2]);
        assert_eq!(ts_b, vec![10, 11, 12]);
        assert_eq!(traces[0].records[0].values[0], -91.0);
    }

    #[test]
    fn missing_header_column_is_a_schema_error() {
        let err = parse_trace_csv("session_id,timestamp_s,rsrp_dbm\na,0,-90\n".as_bytes())
            .unwrap_err();
        assert!(matches!(err, LqeError::MissingColumn(ref c) if c == "sinr_db"));
    }

    #[test]
    fn unparsable_cell_reports_line_number() {
        let err = parse("a,0,-90,1\na,1,oops,2\n").unwrap_err();
        match err {
            LqeError::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("rsrp_dbm"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_timestamp_is_rejected() {
        let err = parse("a,5,-90,1\na,5,-91,2\n").unwrap_err();
        assert!(matches!(err, LqeError::Validation(ref m) if m.contains("duplicate")));
    }

    #[test]
    fn extra_columns_are_ignored() {
        let csv = "rssi,session_id,timestamp_s,sinr_db,rsrp_dbm\n-60,a,0,8,-90\n";
        let traces = parse_trace_csv(csv.as_bytes()).unwrap();
        assert_eq!(traces[0].records[0].values, vec![-90.0, 8.0]);
    }

    #[test]
    fn gaps_are_filled_with_missing_records() {
        let traces = parse("a,0,-90,1\na,3,-93,4\n").unwrap();
        let t = &traces[0];
        assert_eq!(t.len(), 4);
        assert_eq!(t.records[1].timestamp, 1);
        assert!(t.records[1].missing.iter().all(|&m| m));
        assert!(t.records[2].missing.iter().all(|&m| m));
        assert!(!t.records[3].missing[0]);
    }

    #[test]
    fn impute_zero_pads_missing_values() {
        let traces = parse("a,0,-90,\n").unwrap();
        let imputed = impute_missing(&traces[0]);
        assert_eq!(imputed.records[0].values, vec![-90.0, 0.0]);
        assert!(imputed.records[0].missing.iter().all(|&m| !m));
    }

    #[test]
    fn impute_is_identity_without_missing_flags() {
        let traces = parse("a,0,-90,1\na,1,-91,2\n").unwrap();
        let imputed = impute_missing(&traces[0]);
        assert_eq!(imputed, traces[0]);
    }

    #[test]
    fn impute_handles_fully_missing_column() {
        let traces = parse("a,0,-90,\na,1,-91,\n").unwrap();
        let imputed = impute_missing(&traces[0]);
        assert!(imputed.records.iter().all(|r| r.values[1] == 0.0));
    }

    #[test]
    fn impute_is_idempotent() {
        let traces = parse("a,0,,\na,1,-91,2\n").unwrap();
        let once = impute_missing(&traces[0]);
        let twice = impute_missing(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn feature_series_requires_imputation() {
        let traces = parse("a,0,-90,\n").unwrap();
        assert!(traces[0].feature_series().is_err());
        assert!(impute_missing(&traces[0]).feature_series().is_ok());
    }

    #[test]
    fn synthetic_is_deterministic_per_seed() {
        let spec = SyntheticSpec {
            length: 200,
            ..SyntheticSpec::default()
        };
        let a = generate_synthetic_trace(&spec).unwrap();
        let b = generate_synthetic_trace(&spec).unwrap();
        assert_eq!(a, b);
        let different = generate_synthetic_trace(&SyntheticSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a, different);
    }

    #[test]
    fn synthetic_honours_length() {
        let spec = SyntheticSpec {
            length: 500,
            ..SyntheticSpec::default()
        };
        assert_eq!(generate_synthetic_trace(&spec).unwrap().len(), 500);
    }

    #[test]
    fn synthetic_rejects_zero_length() {
        let spec = SyntheticSpec {
            length: 0,
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic_trace(&spec).is_err());
    }

    #[test]
    fn synthetic_marginals_match_spec() {
        // Sample-statistics oracle: iid case, n = 100000.
        let spec = SyntheticSpec {
            length: 100_000,
            features: vec![
                FeatureSynthSpec::new("rsrp_dbm", -87.17, 14.94, 0.0),
                FeatureSynthSpec::new("sinr_db", 8.62, 9.67, 0.0),
            ],
            seed: 7,
            ..SyntheticSpec::default()
        };
        let trace = generate_synthetic_trace(&spec).unwrap();
        let series = trace.feature_series().unwrap();
        let n = series[0].len() as f64;
        let mean: f64 = series[0].iter().sum::<f64>() / n;
        let sd = (series[0].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((mean - -87.17).abs() < 0.5, "sample mean {mean}");
        assert!((sd - 14.94).abs() < 0.5, "sample sd {sd}");
    }

    #[test]
    fn csv_round_trip_preserves_trace() {
        let traces = parse("a,0,-90.125,\na,1,,7.25\nb,4,-101,0.5\n").unwrap();
        let mut buffer = Vec::new();
        write_trace_csv(&traces, &mut buffer).unwrap();
        let reparsed = parse_trace_csv(buffer.as_slice()).unwrap();
        assert_eq!(traces, reparsed);
    }

    mod round_trip {
        use super::*;
        use proptest::prelude::*;

        fn arb_trace() -> impl Strategy<Value = SessionTrace> {
            (
                "[a-z]{1,8}",
                -100i64..100,
                proptest::collection::vec(
                    ((-1e6f64..1e6, any::<bool>()), (-1e6f64..1e6, any::<bool>())),
                    1..30,
                ),
            )
                .prop_map(|(session_id, base_ts, rows)| SessionTrace {
                    session_id,
                    records: rows
                        .into_iter()
                        .enumerate()
                        .map(|(i, ((rsrp, m0), (sinr, m1)))| MetricRecord {
                            timestamp: base_ts + i as i64,
                            values: vec![if m0 { 0.0 } else { rsrp }, if m1 { 0.0 } else { sinr }],
                            missing: vec![m0, m1],
                        })
                        .collect(),
                    feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
                })
        }

        proptest! {
            #[test]
            fn write_then_parse_is_identity(trace in arb_trace()) {
                let mut buffer = Vec::new();
                write_trace_csv(std::slice::from_ref(&trace), &mut buffer).unwrap();
                let reparsed = parse_trace_csv(buffer.as_slice()).unwrap();
                prop_assert_eq!(&reparsed[..], std::slice::from_ref(&trace));
                for pair in reparsed[0].records.windows(2) {
                    prop_assert!(pair[0].timestamp < pair[1].timestamp);
                }
            }
        }
    }
}
