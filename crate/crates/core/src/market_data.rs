//! Price ingestion, zonal aggregation, resampling and rolling features.
//!
//! Everything downstream consumes a [`PriceSeries`]: UTC timestamps, finite
//! prices (negative values allowed) and a sampling step in hours.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, HOURS_PER_YEAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Currency {
    #[default]
    Eur,
    Usd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    timestamps: Vec<DateTime<Utc>>,
    values: Vec<f64>,
    resolution_hours: f64,
    currency: Currency,
}

impl PriceSeries {
    pub fn new(
        timestamps: Vec<DateTime<Utc>>,
        values: Vec<f64>,
        resolution_hours: f64,
        currency: Currency,
    ) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::invalid("timestamps and values differ in length"));
        }
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if !(resolution_hours.is_finite() && resolution_hours > 0.0) {
            return Err(Error::invalid("resolution must be positive"));
        }
        if let Some(w) = timestamps.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotonicAfterSort(w[1].to_rfc3339()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("price values must be finite"));
        }
        Ok(Self {
            timestamps,
            values,
            resolution_hours,
            currency,
        })
    }

    /// Uniform grid starting at `start` with the given step.
    pub fn from_values(
        start: DateTime<Utc>,
        resolution_hours: f64,
        values: Vec<f64>,
        currency: Currency,
    ) -> Result<Self> {
        let step = chrono::Duration::milliseconds((resolution_hours * 3_600_000.0).round() as i64);
        let timestamps = (0..values.len()).map(|i| start + step * i as i32).collect();
        Self::new(timestamps, values, resolution_hours, currency)
    }

    /// Hourly series starting 2019-01-01T00:00Z. Handy for synthetic data.
    pub fn hourly(values: Vec<f64>) -> Result<Self> {
        Self::from_values(default_origin(), 1.0, values, Currency::Eur)
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn resolution_hours(&self) -> f64 {
        self.resolution_hours
    }

    /// Sampling step in years (the model layer's time unit).
    pub fn dt_years(&self) -> f64 {
        self.resolution_hours / HOURS_PER_YEAR
    }

    pub fn currency(&self) -> Currency {
        self.currency
    }

    pub fn is_uniform(&self) -> bool {
        let step = (self.resolution_hours * 3_600_000.0).round() as i64;
        self.timestamps
            .windows(2)
            .all(|w| (w[1] - w[0]).num_milliseconds() == step)
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.timestamps.clone(),
            values,
            self.resolution_hours,
            self.currency,
        )
    }

    /// Sub-series `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        Self::new(
            self.timestamps[start..end].to_vec(),
            self.values[start..end].to_vec(),
            self.resolution_hours,
            self.currency,
        )
    }
}

pub(crate) fn default_origin() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicatePolicy {
    /// Duplicate timestamps are an error.
    #[default]
    Reject,
    /// Duplicates (e.g. the repeated DST hour) are averaged.
    Average,
}

/// Column mapping and parsing options for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub timestamp_column: String,
    pub price_column: String,
    pub delimiter: char,
    /// chrono format string; ISO-8601 variants are tried when absent.
    pub timestamp_format: Option<String>,
    pub currency: Currency,
    pub duplicates: DuplicatePolicy,
    /// Overrides the inferred (median) sampling step.
    pub resolution_hours: Option<f64>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp_column: "timestamp".into(),
            price_column: "price".into(),
            delimiter: ',',
            timestamp_format: None,
            currency: Currency::Eur,
            duplicates: DuplicatePolicy::Reject,
            resolution_hours: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub series: PriceSeries,
    pub skipped_rows: usize,
    pub duplicates_merged: usize,
}

fn parse_timestamp(raw: &str, format: Option<&str>) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Some(fmt) = format {
        if let Ok(t) = DateTime::parse_from_str(raw, fmt) {
            return Some(t.with_timezone(&Utc));
        }
        if let Ok(t) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(Utc.from_utc_datetime(&t));
        }
        return NaiveDate::parse_from_str(raw, fmt)
            .ok()
            .map(|d| Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).unwrap()));
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(Utc.from_utc_datetime(&t));
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .map(|d| Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).unwrap()))
}

/// Read a price series from a delimited text file.
///
/// Rows whose timestamp or price cannot be parsed are skipped and counted.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_reader(file, schema)
}

pub fn load_csv_reader<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let ts_idx = col(&schema.timestamp_column)?;
    let px_idx = col(&schema.price_column)?;

    let mut rows: Vec<(DateTime<Utc>, f64)> = Vec::new();
    let mut skipped = 0usize;
    for record in rdr.records() {
        let record = record?;
        let ts = record
            .get(ts_idx)
            .and_then(|s| parse_timestamp(s, schema.timestamp_format.as_deref()));
        let px = record
            .get(px_idx)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite());
        match (ts, px) {
            (Some(t), Some(p)) => rows.push((t, p)),
            _ => skipped += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptySeries);
    }
    rows.sort_by_key(|r| r.0);

    let mut merged: Vec<(DateTime<Utc>, f64, usize)> = Vec::with_capacity(rows.len());
    let mut duplicates = 0usize;
    for (t, p) in rows {
        match merged.last_mut() {
            Some(last) if last.0 == t => match schema.duplicates {
                DuplicatePolicy::Reject => {
                    return Err(Error::NonMonotonicAfterSort(t.to_rfc3339()));
                }
                DuplicatePolicy::Average => {
                    last.1 += p;
                    last.2 += 1;
                    duplicates += 1;
                }
            },
            _ => merged.push((t, p, 1)),
        }
    }
    if merged.len() < 2 {
        return Err(Error::EmptySeries);
    }
    let timestamps: Vec<_> = merged.iter().map(|m| m.0).collect();
    let values: Vec<_> = merged.iter().map(|m| m.1 / m.2 as f64).collect();
    let resolution = match schema.resolution_hours {
        Some(r) => r,
        None => median_step_hours(&timestamps),
    };
    Ok(LoadReport {
        series: PriceSeries::new(timestamps, values, resolution, schema.currency)?,
        skipped_rows: skipped,
        duplicates_merged: duplicates,
    })
}

fn median_step_hours(ts: &[DateTime<Utc>]) -> f64 {
    let mut steps: Vec<i64> = ts
        .windows(2)
        .map(|w| (w[1] - w[0]).num_milliseconds())
        .collect();
    steps.sort_unstable();
    steps[steps.len() / 2] as f64 / 3_600_000.0
}

/// Write `(timestamp, price)` rows with `decimals` fractional digits.
pub fn write_csv<W: std::io::Write>(series: &PriceSeries, out: W, decimals: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "price"])?;
    for (t, v) in series.timestamps.iter().zip(&series.values) {
        w.write_record([
            t.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            format!("{v:.decimals$}"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: String,
    pub series: PriceSeries,
    pub weights: Vec<f64>,
}

/// Several zonal price series on one timestamp grid, with load weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalSeries {
    zones: Vec<Zone>,
}

impl ZonalSeries {
    pub fn new(zones: Vec<Zone>) -> Result<Self> {
        let first = zones.first().ok_or(Error::EmptySeries)?;
        for z in &zones {
            if z.series.timestamps != first.series.timestamps {
                return Err(Error::MisalignedZones);
            }
            if z.weights.len() != z.series.len() {
                return Err(Error::invalid(format!(
                    "zone {} has {} weights for {} prices",
                    z.id,
                    z.weights.len(),
                    z.series.len()
                )));
            }
            if z.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::invalid(format!("zone {} has a negative weight", z.id)));
            }
        }
        Ok(Self { zones })
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }
}

/// Load-weighted average price across zones at every timestamp.
pub fn weighted_zonal_average(z: &ZonalSeries) -> Result<PriceSeries> {
    let grid = &z.zones[0].series;
    let mut out = Vec::with_capacity(grid.len());
    for t in 0..grid.len() {
        let total: f64 = z.zones.iter().map(|zone| zone.weights[t]).sum();
        if !(total > 0.0) {
            return Err(Error::WeightSumZero(t));
        }
        // normalized weights keep a lone zone (or lone nonzero weight) exact
        let v = z
            .zones
            .iter()
            .map(|zone| (zone.weights[t] / total) * zone.series.values[t])
            .sum();
        out.push(v);
    }
    grid.with_values(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleReport {
    pub series: PriceSeries,
    /// Buckets with no observations, filled by linear interpolation.
    pub gaps: usize,
}

/// Bucket means on a coarser grid aligned to the Unix epoch.
pub fn resample(s: &PriceSeries, target_hours: f64) -> Result<ResampleReport> {
    if target_hours < s.resolution_hours * (1.0 - 1e-9) {
        return Err(Error::UpsamplingRequested {
            native: s.resolution_hours,
            target: target_hours,
        });
    }
    let width = (target_hours * 3_600_000.0).round() as i64;
    let bucket = |t: &DateTime<Utc>| t.timestamp_millis().div_euclid(width);
    let first = bucket(&s.timestamps[0]);
    let last = bucket(s.timestamps.last().unwrap());
    let n = (last - first + 1) as usize;

    let mut sums: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for (t, v) in s.timestamps.iter().zip(&s.values) {
        let e = sums.entry(bucket(t)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let mut values: Vec<Option<f64>> = vec![None; n];
    for (b, (sum, count)) in &sums {
        values[(b - first) as usize] = Some(sum / *count as f64);
    }
    let gaps = values.iter().filter(|v| v.is_none()).count();
    if gaps as f64 > 0.05 * n as f64 {
        return Err(Error::TooManyGaps { gaps, buckets: n });
    }
    let filled = interpolate_gaps(&values);
    let timestamps = (0..n)
        .map(|i| Utc.timestamp_millis_opt((first + i as i64) * width).unwrap())
        .collect();
    Ok(ResampleReport {
        series: PriceSeries::new(timestamps, filled, target_hours, s.currency)?,
        gaps,
    })
}

fn interpolate_gaps(values: &[Option<f64>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut prev: Option<(usize, f64)> = None;
    for (i, x) in values.iter().enumerate() {
        let Some(x) = *x else { continue };
        if let Some((pi, pv)) = prev {
            for k in pi + 1..i {
                let w = (k - pi) as f64 / (i - pi) as f64;
                out.push(pv + w * (x - pv));
            }
        }
        out.push(x);
        prev = Some((i, x));
    }
    out
}

/// Trailing-window features used for regime counting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingFeatures {
    pub window_days: f64,
    pub window_len: usize,
    /// Shift added before taking logs (0 when every price is positive).
    pub log_shift: f64,
    pub mean: Vec<Option<f64>>,
    pub volatility: Vec<Option<f64>>,
    pub log_return: Vec<Option<f64>>,
}

impl RollingFeatures {
    /// Indices and `[mean, volatility, log_return]` rows where all are defined.
    pub fn defined_rows(&self) -> (Vec<usize>, Vec<Vec<f64>>) {
        let mut idx = Vec::new();
        let mut rows = Vec::new();
        for i in 0..self.mean.len() {
            if let (Some(m), Some(v), Some(r)) = (self.mean[i], self.volatility[i], self.log_return[i]) {
                idx.push(i);
                rows.push(vec![m, v, r]);
            }
        }
        (idx, rows)
    }
}

/// Trailing mean, population volatility and window log-return.
///
/// The log-return over a window is `ln((p_t + c) / (p_{t-w+1} + c))`, where
/// `c = |min p| + 1` if any price is non-positive and 0 otherwise.
pub fn rolling_features(s: &PriceSeries, window_days: f64) -> Result<RollingFeatures> {
    let w = ((window_days * 24.0) / s.resolution_hours).round() as usize;
    let n = s.len();
    if w < 2 || n <= w {
        return Err(Error::WindowTooLarge { window: w, len: n });
    }
    let min = s.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = if min <= 0.0 { min.abs() + 1.0 } else { 0.0 };

    let mut mean = vec![None; n];
    let mut vol = vec![None; n];
    let mut ret = vec![None; n];
    for t in (w - 1)..n {
        let window = &s.values[t + 1 - w..=t];
        let (m, var) = numeric::mean_var(window);
        mean[t] = Some(m);
        vol[t] = Some(var.max(0.0).sqrt());
        ret[t] = Some(((s.values[t] + shift) / (s.values[t + 1 - w] + shift)).ln());
    }
    Ok(RollingFeatures {
        window_days,
        window_len: w,
        log_shift: shift,
        mean,
        volatility: vol,
        log_return: ret,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LoadReport> {
        load_csv_reader(text.as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn three_row_csv() {
        let r = parse(
            "timestamp,price\n2019-01-01T00:00,50.0\n2019-01-01T01:00,55.0\n2019-01-01T02:00,45.0\n",
        )
        .unwrap();
        assert_eq!(r.series.len(), 3);
        assert_eq!(r.series.resolution_hours(), 1.0);
        assert_eq!(r.series.values(), &[50.0, 55.0, 45.0]);
        assert_eq!(r.skipped_rows, 0);
    }

    #[test]
    fn malformed_row_is_skipped_and_counted() {
        let mut text = String::from("timestamp,price\n");
        for h in 0..10 {
            let px = if h == 4 { "n/a".to_string() } else { format!("{}.5", 40 + h) };
            text.push_str(&format!("2019-01-01T{h:02}:00,{px}\n"));
        }
        let r = parse(&text).unwrap();
        assert_eq!(r.series.len(), 9);
        assert_eq!(r.skipped_rows, 1);
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let r = parse("timestamp,price\n2019-01-01T02:00,3\n2019-01-01T00:00,1\n2019-01-01T01:00,2\n")
            .unwrap();
        assert_eq!(r.series.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn missing_column_and_duplicates() {
        let err = parse("time,price\n2019-01-01T00:00,1\n").unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "timestamp"));

        let dup = "timestamp,price\n2019-01-01T00:00,1\n2019-01-01T00:00,3\n2019-01-01T01:00,2\n";
        assert!(matches!(parse(dup), Err(Error::NonMonotonicAfterSort(_))));

        let schema = CsvSchema {
            duplicates: DuplicatePolicy::Average,
            ..Default::default()
        };
        let r = load_csv_reader(dup.as_bytes(), &schema).unwrap();
        assert_eq!(r.series.values(), &[2.0, 2.0]);
        assert_eq!(r.duplicates_merged, 1);
    }

    #[test]
    fn empty_file() {
        assert!(matches!(parse("timestamp,price\n"), Err(Error::EmptySeries)));
    }

    #[test]
    fn semicolon_delimiter_and_custom_format() {
        let schema = CsvSchema {
            timestamp_column: "Datum".into(),
            price_column: "Preis".into(),
            delimiter: ';',
            timestamp_format: Some("%d.%m.%Y %H:%M".into()),
            ..Default::default()
        };
        let text = "Datum;Preis\n01.01.2019 00:00;28.32\n01.01.2019 01:00;10.07\n01.01.2019 02:00;-4.08\n";
        let r = load_csv_reader(text.as_bytes(), &schema).unwrap();
        assert_eq!(r.series.values(), &[28.32, 10.07, -4.08]);
    }

    #[test]
    fn zonal_average_examples() {
        let grid = |vals: Vec<f64>| PriceSeries::hourly(vals).unwrap();
        let zone = |id: &str, p: Vec<f64>, w: Vec<f64>| Zone {
            id: id.into(),
            series: grid(p),
            weights: w,
        };
        let z = ZonalSeries::new(vec![
            zone("a", vec![40.0, 0.0], vec![1.0, 0.0]),
            zone("b", vec![60.0, 80.0], vec![1.0, 3.0]),
        ])
        .unwrap();
        let avg = weighted_zonal_average(&z).unwrap();
        assert_eq!(avg.values(), &[50.0, 80.0]);

        let z = ZonalSeries::new(vec![
            zone("a", vec![10.0, 1.0], vec![1.0, 1.0]),
            zone("b", vec![20.0, 1.0], vec![2.0, 1.0]),
            zone("c", vec![30.0, 1.0], vec![3.0, 1.0]),
        ])
        .unwrap();
        let avg = weighted_zonal_average(&z).unwrap();
        assert!((avg.values()[0] - 140.0 / 6.0).abs() < 1e-12);

        let z = ZonalSeries::new(vec![zone("a", vec![1.0, 2.0], vec![0.0, 1.0])]).unwrap();
        assert!(matches!(weighted_zonal_average(&z), Err(Error::WeightSumZero(0))));
    }

    #[test]
    fn misaligned_zones_rejected() {
        let a = PriceSeries::hourly(vec![1.0, 2.0]).unwrap();
        let b = PriceSeries::from_values(default_origin(), 2.0, vec![1.0, 2.0], Currency::Eur).unwrap();
        let res = ZonalSeries::new(vec![
            Zone { id: "a".into(), series: a, weights: vec![1.0, 1.0] },
            Zone { id: "b".into(), series: b, weights: vec![1.0, 1.0] },
        ]);
        assert!(matches!(res, Err(Error::MisalignedZones)));
    }

    fn five_minute(values: Vec<f64>) -> PriceSeries {
        PriceSeries::from_values(default_origin(), 5.0 / 60.0, values, Currency::Usd).unwrap()
    }

    #[test]
    fn resample_examples() {
        let r = resample(&five_minute(vec![30.0; 12]), 1.0).unwrap();
        assert_eq!(r.series.values(), &[30.0]);

        let r = resample(&five_minute((0..12).map(|i| i as f64).collect()), 1.0).unwrap();
        assert_eq!(r.series.values(), &[5.5]);

        let hourly = PriceSeries::hourly(vec![1.0, 4.0, 2.0]).unwrap();
        let r = resample(&hourly, 1.0).unwrap();
        assert_eq!(r.series, hourly);
        assert_eq!(r.gaps, 0);

        assert!(matches!(
            resample(&hourly, 0.5),
            Err(Error::UpsamplingRequested { .. })
        ));
    }

    #[test]
    fn resample_interpolates_gaps() {
        let start = default_origin();
        let hour = chrono::Duration::hours(1);
        let mut ts: Vec<_> = (0..40).map(|i| start + hour * i).collect();
        let mut vals: Vec<f64> = (0..40).map(|i| i as f64).collect();
        ts.remove(10);
        vals.remove(10);
        let s = PriceSeries::new(ts, vals, 1.0, Currency::Eur).unwrap();
        let r = resample(&s, 1.0).unwrap();
        assert_eq!(r.gaps, 1);
        assert_eq!(r.series.values()[10], 10.0);

        let ts: Vec<_> = [0, 1, 5, 6].iter().map(|&i| start + hour * i).collect();
        let s = PriceSeries::new(ts, vec![1.0; 4], 1.0, Currency::Eur).unwrap();
        assert!(matches!(resample(&s, 1.0), Err(Error::TooManyGaps { gaps: 3, buckets: 7 })));
    }

    #[test]
    fn rolling_examples() {
        let s = PriceSeries::hourly(vec![100.0; 200]).unwrap();
        let f = rolling_features(&s, 2.0).unwrap();
        assert_eq!(f.window_len, 48);
        assert!(f.mean[46].is_none() && f.mean[47].is_some());
        for t in 47..200 {
            assert_eq!(f.mean[t], Some(100.0));
            assert_eq!(f.volatility[t], Some(0.0));
            assert_eq!(f.log_return[t], Some(0.0));
        }

        let daily = PriceSeries::from_values(default_origin(), 24.0, vec![10.0, 30.0, 30.0], Currency::Eur)
            .unwrap();
        let f = rolling_features(&daily, 2.0).unwrap();
        assert_eq!(f.mean[1], Some(20.0));
        assert_eq!(f.volatility[1], Some(10.0));
        assert!((f.log_return[1].unwrap() - 3f64.ln()).abs() < 1e-15);

        assert!(matches!(
            rolling_features(&daily, 3.0),
            Err(Error::WindowTooLarge { .. })
        ));
    }

    #[test]
    fn negative_prices_use_shift() {
        let daily =
            PriceSeries::from_values(default_origin(), 24.0, vec![-5.0, 5.0, 0.0], Currency::Eur).unwrap();
        let f = rolling_features(&daily, 2.0).unwrap();
        assert_eq!(f.log_shift, 6.0);
        assert!((f.log_return[1].unwrap() - 11f64.ln()).abs() < 1e-15);
    }
}
