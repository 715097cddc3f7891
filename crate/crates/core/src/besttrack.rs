//! Best-track ingestion: ATCF b-deck and simplified CSV readers, basin/season
//! filters and year-based train/test splits.
//!
//! Longitudes are kept in `[0, 360)` so the South Pacific box (130°E–130°W)
//! is a single interval. A cyclone's basin, season and filter membership are
//! all decided by its genesis (first) point.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Best-track cadence.
pub const STEP_HOURS: i64 = 6;

/// Exact header of the simplified track CSV.
pub const TRACK_CSV_HEADER: [&str; 6] = [
    "cyclone_id",
    "basin",
    "timestamp",
    "lat_deg",
    "lon_deg",
    "vmax_kt",
];

const TIMESTAMP_FORMAT: &str = "%Y%m%d%H";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basin {
    SouthPacific,
    SouthIndian,
    Other,
}

impl Basin {
    pub fn code(self) -> &'static str {
        match self {
            Basin::SouthPacific => "SP",
            Basin::SouthIndian => "SI",
            Basin::Other => "OTHER",
        }
    }

    /// Basin box preset covering the Nov–Apr seasons 1980–2013.
    pub fn preset_filter(self) -> Option<BasinFilter> {
        match self {
            Basin::SouthPacific => Some(BasinFilter::south_pacific()),
            Basin::SouthIndian => Some(BasinFilter::south_indian()),
            Basin::Other => None,
        }
    }

    /// Southern-hemisphere basin containing a genesis longitude.
    pub fn from_longitude(lon_deg: f64) -> Basin {
        let lon = wrap_longitude(lon_deg);
        if (30.0..130.0).contains(&lon) {
            Basin::SouthIndian
        } else if (130.0..230.0).contains(&lon) {
            Basin::SouthPacific
        } else {
            Basin::Other
        }
    }
}

impl fmt::Display for Basin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.code())
    }
}

impl FromStr for Basin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SP" | "SOUTHPACIFIC" => Ok(Basin::SouthPacific),
            "SI" | "SOUTHINDIAN" => Ok(Basin::SouthIndian),
            "OTHER" => Ok(Basin::Other),
            other => Err(Error::Config(format!("unknown basin `{other}`"))),
        }
    }
}

/// Maps any longitude onto `[0, 360)`.
pub fn wrap_longitude(lon_deg: f64) -> f64 {
    let lon = lon_deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if lon >= 360.0 {
        0.0
    } else {
        lon
    }
}

/// Season label of a timestamp: austral seasons are labeled by the calendar
/// year in which they start (July–June, so a Nov–Apr season gets its November year).
pub fn season_of(ts: NaiveDateTime) -> i32 {
    if ts.month() >= 7 {
        ts.year()
    } else {
        ts.year() - 1
    }
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

/// Parses `YYYYMMDDHH`.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if s.len() != 10 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let year: i32 = s[0..4].parse().ok()?;
    let month: u32 = s[4..6].parse().ok()?;
    let day: u32 = s[6..8].parse().ok()?;
    let hour: u32 = s[8..10].parse().ok()?;
    NaiveDate::from_ymd_opt(year, month, day)?.and_hms_opt(hour, 0, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub timestamp: NaiveDateTime,
    /// Degrees, south negative.
    pub lat_deg: f64,
    /// Degrees east in `[0, 360)`.
    pub lon_deg: f64,
    pub vmax_kt: u16,
}

impl TrackPoint {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(-90.0..=90.0).contains(&self.lat_deg) {
            return Err(format!("latitude {} outside [-90, 90]", self.lat_deg));
        }
        if !(0.0..360.0).contains(&self.lon_deg) {
            return Err(format!("longitude {} outside [0, 360)", self.lon_deg));
        }
        Ok(())
    }
}

/// One cyclone's best-track series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycloneTrack {
    pub cyclone_id: String,
    pub basin: Basin,
    pub points: Vec<TrackPoint>,
}

impl CycloneTrack {
    pub fn genesis(&self) -> Option<&TrackPoint> {
        self.points.first()
    }

    pub fn season(&self) -> Option<i32> {
        self.genesis().map(|p| season_of(p.timestamp))
    }

    /// Number of 6-hour records.
    pub fn duration_steps(&self) -> usize {
        self.points.len()
    }

    pub fn intensities(&self) -> Vec<u16> {
        self.points.iter().map(|p| p.vmax_kt).collect()
    }

    /// Checks the point and ordering invariants. Gaps are allowed; see [`Self::gaps`].
    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidTrack {
            id: self.cyclone_id.clone(),
            message,
        };
        if self.points.is_empty() {
            return Err(invalid("no points".into()));
        }
        for (i, p) in self.points.iter().enumerate() {
            p.validate()
                .map_err(|m| invalid(format!("point {i}: {m}")))?;
        }
        for (i, pair) in self.points.windows(2).enumerate() {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(invalid(format!(
                    "point {} at {} is not after {}",
                    i + 1,
                    format_timestamp(pair[1].timestamp),
                    format_timestamp(pair[0].timestamp)
                )));
            }
        }
        Ok(())
    }

    /// Indices `i` where the step from point `i` to `i + 1` is not exactly 6 hours.
    pub fn gaps(&self) -> Vec<usize> {
        let step = Duration::hours(STEP_HOURS);
        self.points
            .windows(2)
            .enumerate()
            .filter(|(_, pair)| pair[1].timestamp - pair[0].timestamp != step)
            .map(|(i, _)| i)
            .collect()
    }

    /// Splits the track into runs of exactly 6-hourly points.
    ///
    /// A track without gaps is returned unchanged; otherwise each piece keeps
    /// the parent id with a `-<n>` suffix (1-based).
    pub fn segments(&self) -> Vec<CycloneTrack> {
        let gaps = self.gaps();
        if gaps.is_empty() {
            return vec![self.clone()];
        }
        let mut out = Vec::with_capacity(gaps.len() + 1);
        let mut start = 0;
        for cut in gaps.into_iter().map(|g| g + 1).chain([self.points.len()]) {
            out.push(CycloneTrack {
                cyclone_id: format!("{}-{}", self.cyclone_id, out.len() + 1),
                basin: self.basin,
                points: self.points[start..cut].to_vec(),
            });
            start = cut;
        }
        out
    }

    fn sort_and_dedup(&mut self) -> usize {
        let before = self.points.len();
        self.points.sort_by_key(|p| p.timestamp);
        self.points.dedup_by_key(|p| p.timestamp);
        before - self.points.len()
    }
}

/// What a reader does with a malformed record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorPolicy {
    #[default]
    SkipAndWarn,
    Abort,
}

/// Tracks read from a file together with any non-fatal diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Parsed {
    pub tracks: Vec<CycloneTrack>,
    pub warnings: Vec<String>,
}

fn record_problem(
    policy: ErrorPolicy,
    warnings: &mut Vec<String>,
    line: usize,
    message: String,
) -> Result<()> {
    match policy {
        ErrorPolicy::Abort => Err(Error::Record { line, message }),
        ErrorPolicy::SkipAndWarn => {
            warnings.push(format!("line {line}: {message} (skipped)"));
            Ok(())
        }
    }
}

/// Decodes an ATCF coordinate in tenths of a degree with a hemisphere suffix,
/// e.g. `141S` → −14.1 or `1723E` → 172.3. West longitudes map into `[0, 360)`.
pub fn decode_atcf_coordinate(field: &str, is_latitude: bool) -> Option<f64> {
    let field = field.trim();
    let last = field.chars().last()?;
    let hemi = last.to_ascii_uppercase();
    let digits = &field[..field.len() - last.len_utf8()];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let value = digits.parse::<u32>().ok()? as f64 / 10.0;
    match (is_latitude, hemi) {
        (true, 'N') => Some(value),
        (true, 'S') => Some(-value),
        (false, 'E') => Some(wrap_longitude(value)),
        (false, 'W') => Some(wrap_longitude(-value)),
        _ => None,
    }
}

struct BdeckRecord {
    basin_code: String,
    number: u32,
    point: TrackPoint,
}

fn parse_bdeck_line(line: &str) -> std::result::Result<BdeckRecord, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 9 {
        return Err(format!(
            "expected at least 9 fields, found {}",
            fields.len()
        ));
    }
    let basin_code = fields[0].to_ascii_uppercase();
    if basin_code.is_empty() {
        return Err("empty basin field".into());
    }
    let number = fields[1]
        .parse::<u32>()
        .map_err(|_| format!("bad cyclone number `{}`", fields[1]))?;
    let timestamp =
        parse_timestamp(fields[2]).ok_or_else(|| format!("bad datetime `{}`", fields[2]))?;
    let lat_deg = decode_atcf_coordinate(fields[6], true)
        .ok_or_else(|| format!("bad latitude `{}`", fields[6]))?;
    let lon_deg = decode_atcf_coordinate(fields[7], false)
        .ok_or_else(|| format!("bad longitude `{}`", fields[7]))?;
    let vmax_kt = fields[8]
        .parse::<u16>()
        .map_err(|_| format!("bad wind intensity `{}`", fields[8]))?;
    let point = TrackPoint {
        timestamp,
        lat_deg,
        lon_deg,
        vmax_kt,
    };
    point.validate()?;
    Ok(BdeckRecord {
        basin_code,
        number,
        point,
    })
}

/// Parses ATCF b-deck text into one track per (basin, cyclone number, season).
///
/// Duplicate timestamps (one line per wind-radii threshold is common) collapse
/// to their first occurrence. Records off the 00/06/12/18 UTC synoptic hours
/// are dropped with a warning. A `SH` basin code is resolved to South
/// Indian or South Pacific from the genesis longitude.
pub fn parse_atcf_bdeck(text: &str, policy: ErrorPolicy) -> Result<Parsed> {
    let mut warnings = Vec::new();
    let mut order: Vec<(String, u32, i32)> = Vec::new();
    let mut groups: HashMap<(String, u32, i32), Vec<TrackPoint>> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record = match parse_bdeck_line(raw) {
            Ok(r) => r,
            Err(message) => {
                record_problem(policy, &mut warnings, line_no, message)?;
                continue;
            }
        };
        if record.point.timestamp.hour() % STEP_HOURS as u32 != 0 {
            warnings.push(format!(
                "line {line_no}: off-synoptic time {} dropped",
                format_timestamp(record.point.timestamp)
            ));
            continue;
        }
        let key = (
            record.basin_code,
            record.number,
            season_of(record.point.timestamp),
        );
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(record.point);
    }

    if order.is_empty() {
        warnings.push("no best-track records found".into());
    }

    let mut tracks = Vec::with_capacity(order.len());
    for key in order {
        let points = groups.remove(&key).unwrap_or_default();
        let (code, number, season) = key;
        let mut track = CycloneTrack {
            cyclone_id: format!("{code}{number:02}{season}"),
            basin: Basin::Other,
            points,
        };
        let dropped = track.sort_and_dedup();
        if dropped > 0 {
            warnings.push(format!(
                "{}: {dropped} duplicate timestamp(s) collapsed",
                track.cyclone_id
            ));
        }
        track.basin = match code.as_str() {
            "SP" => Basin::SouthPacific,
            "SI" => Basin::SouthIndian,
            "SH" => Basin::from_longitude(track.points[0].lon_deg),
            _ => Basin::Other,
        };
        let gaps = track.gaps().len();
        if gaps > 0 {
            warnings.push(format!(
                "{}: {gaps} gap(s) in the 6-hour record",
                track.cyclone_id
            ));
        }
        tracks.push(track);
    }
    Ok(Parsed { tracks, warnings })
}

fn parse_csv_row(
    record: &csv::StringRecord,
    columns: &[usize; 6],
) -> std::result::Result<(String, Basin, TrackPoint), String> {
    let get = |i: usize| record.get(columns[i]).unwrap_or("").trim();
    let id = get(0).to_string();
    if id.is_empty() {
        return Err("empty cyclone_id".into());
    }
    let basin = get(1).parse::<Basin>().map_err(|e| e.to_string())?;
    let timestamp = parse_timestamp(get(2)).ok_or_else(|| format!("bad timestamp `{}`", get(2)))?;
    let lat_deg = get(3)
        .parse::<f64>()
        .map_err(|_| format!("non-numeric lat_deg `{}`", get(3)))?;
    let lon_deg = get(4)
        .parse::<f64>()
        .map_err(|_| format!("non-numeric lon_deg `{}`", get(4)))?;
    let vmax_kt = get(5)
        .parse::<u16>()
        .map_err(|_| format!("non-numeric vmax_kt `{}`", get(5)))?;
    let point = TrackPoint {
        timestamp,
        lat_deg,
        lon_deg,
        vmax_kt,
    };
    point.validate()?;
    Ok((id, basin, point))
}

/// Parses the simplified track CSV. Rows are grouped by `cyclone_id` in order
/// of first appearance and each track's points are sorted by time.
pub fn parse_track_csv(text: &str, policy: ErrorPolicy) -> Result<Parsed> {
    let mut warnings = Vec::new();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut columns = [0usize; 6];
    for (slot, name) in columns.iter_mut().zip(TRACK_CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, CycloneTrack> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        match parse_csv_row(&record, &columns) {
            Ok((id, basin, point)) => {
                groups
                    .entry(id.clone())
                    .or_insert_with(|| {
                        order.push(id.clone());
                        CycloneTrack {
                            cyclone_id: id,
                            basin,
                            points: Vec::new(),
                        }
                    })
                    .points
                    .push(point);
            }
            Err(message) => record_problem(policy, &mut warnings, line, message)?,
        }
    }

    let mut tracks = Vec::with_capacity(order.len());
    for id in order {
        let mut track = groups.remove(&id).expect("grouped id");
        let dropped = track.sort_and_dedup();
        if dropped > 0 {
            warnings.push(format!("{id}: {dropped} duplicate timestamp(s) collapsed"));
        }
        tracks.push(track);
    }
    if tracks.is_empty() {
        warnings.push("no track rows found".into());
    }
    Ok(Parsed { tracks, warnings })
}

/// Writes tracks in the simplified CSV format, header included.
pub fn export_csv(tracks: &[CycloneTrack]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(TRACK_CSV_HEADER)?;
    for track in tracks {
        for p in &track.points {
            writer.write_record([
                track.cyclone_id.clone(),
                track.basin.code().to_string(),
                format_timestamp(p.timestamp),
                p.lat_deg.to_string(),
                p.lon_deg.to_string(),
                p.vmax_kt.to_string(),
            ])?;
        }
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Inclusive range of season years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!("empty year range {start}-{end}")));
        }
        Ok(YearRange { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn overlaps(&self, other: &YearRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

impl FromStr for YearRange {
    type Err = Error;

    /// Accepts `1985-2005` or a single year.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad year range `{s}`"));
        let (a, b) = match s.trim().split_once('-') {
            Some((a, b)) => (a, b),
            None => (s.trim(), s.trim()),
        };
        let start = a.trim().parse().map_err(|_| bad())?;
        let end = b.trim().parse().map_err(|_| bad())?;
        YearRange::new(start, end)
    }
}

/// Geographic box plus season window used to select cyclones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinFilter {
    /// Inclusive latitude bounds.
    pub lat_min: f64,
    pub lat_max: f64,
    /// Half-open longitude interval `[lon_min, lon_max)` in `[0, 360)` degrees.
    pub lon_min: f64,
    pub lon_max: f64,
    /// Calendar months (1–12) in which genesis must fall.
    pub months: BTreeSet<u32>,
    pub years: YearRange,
}

impl BasinFilter {
    pub fn new(
        lat: (f64, f64),
        lon: (f64, f64),
        months: impl IntoIterator<Item = u32>,
        years: YearRange,
    ) -> Result<Self> {
        let months: BTreeSet<u32> = months.into_iter().collect();
        if lat.0 > lat.1 {
            return Err(Error::Config(format!("empty latitude range {lat:?}")));
        }
        if lon.0 >= lon.1 {
            return Err(Error::Config(format!("empty longitude range {lon:?}")));
        }
        if months.is_empty() || months.iter().any(|m| !(1..=12).contains(m)) {
            return Err(Error::Config(format!("invalid season months {months:?}")));
        }
        Ok(BasinFilter {
            lat_min: lat.0,
            lat_max: lat.1,
            lon_min: lon.0,
            lon_max: lon.1,
            months,
            years,
        })
    }

    /// Nov–Apr.
    pub fn austral_summer() -> BTreeSet<u32> {
        [11, 12, 1, 2, 3, 4].into_iter().collect()
    }

    /// 0–30°S, 30°E–130°E, Nov–Apr seasons 1980–2013.
    pub fn south_indian() -> Self {
        BasinFilter {
            lat_min: -30.0,
            lat_max: 0.0,
            lon_min: 30.0,
            lon_max: 130.0,
            months: Self::austral_summer(),
            years: YearRange {
                start: 1980,
                end: 2013,
            },
        }
    }

    /// 0–30°S, 130°E–130°W, Nov–Apr seasons 1980–2013.
    pub fn south_pacific() -> Self {
        BasinFilter {
            lat_min: -30.0,
            lat_max: 0.0,
            lon_min: 130.0,
            lon_max: 230.0,
            months: Self::austral_summer(),
            years: YearRange {
                start: 1980,
                end: 2013,
            },
        }
    }

    pub fn with_years(mut self, years: YearRange) -> Self {
        self.years = years;
        self
    }

    pub fn accepts(&self, track: &CycloneTrack) -> bool {
        let Some(g) = track.genesis() else {
            return false;
        };
        let lon = wrap_longitude(g.lon_deg);
        (self.lat_min..=self.lat_max).contains(&g.lat_deg)
            && (self.lon_min..self.lon_max).contains(&lon)
            && self.months.contains(&g.timestamp.month())
            && self.years.contains(season_of(g.timestamp))
    }
}

pub fn filter_tracks(tracks: &[CycloneTrack], filter: &BasinFilter) -> Vec<CycloneTrack> {
    tracks
        .iter()
        .filter(|t| filter.accepts(t))
        .cloned()
        .collect()
}

/// Partitions tracks by season year. Tracks outside both ranges are dropped.
pub fn split_by_years(
    tracks: &[CycloneTrack],
    train: YearRange,
    test: YearRange,
) -> Result<(Vec<CycloneTrack>, Vec<CycloneTrack>)> {
    if train.overlaps(&test) {
        return Err(Error::OverlappingYears {
            train_start: train.start,
            train_end: train.end,
            test_start: test.start,
            test_end: test.end,
        });
    }
    let mut train_set = Vec::new();
    let mut test_set = Vec::new();
    for track in tracks {
        match track.season() {
            Some(y) if train.contains(y) => train_set.push(track.clone()),
            Some(y) if test.contains(y) => test_set.push(track.clone()),
            _ => {}
        }
    }
    Ok((train_set, test_set))
}

/// Cyclone count per season label, ascending by season.
pub fn season_counts(tracks: &[CycloneTrack]) -> Vec<(i32, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for season in tracks.iter().filter_map(CycloneTrack::season) {
        *counts.entry(season).or_insert(0usize) += 1;
    }
    counts.into_iter().collect()
}
