//! Minute-level activity ingestion: wear-time quality control, day validity,
//! windowing and the log(x+1) transform.
//!
//! Rules applied, in order:
//! 1. a minute is non-wear iff it lies in a run of >= 90 consecutive zero-count
//!    minutes (runs never bridge midnight; each day is processed independently);
//! 2. a day is valid iff its wear fraction is strictly greater than 0.90;
//! 3. a subject is retained iff it has at least 3 valid days;
//! 4. retained minutes are those in the 8am-8pm window (minutes 481..=1200,
//!    minute 1 = 00:00-00:01) of valid days that are not non-wear;
//! 5. counts are transformed by x -> log(x + 1).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: usize = 1440;
/// Zero-count run length at which minutes are declared non-wear.
pub const NONWEAR_RUN_MINUTES: usize = 90;
/// Strict lower bound on the wear fraction of a valid day.
pub const VALID_DAY_WEAR_FRACTION: f64 = 0.90;
/// Minimum number of valid days for a subject to be retained.
pub const MIN_VALID_DAYS: usize = 3;
/// 8am-8pm window, 1-based minutes of day, both ends inclusive.
pub const WINDOW_START_MINUTE: usize = 481;
pub const WINDOW_END_MINUTE: usize = 1200;

/// One minute-level record in long format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinuteRecord {
    pub subject_id: String,
    pub day_index: u32,
    pub minute_of_day: u32,
    pub count: u64,
}

/// All days of one subject, plus wear masks and validity flags.
#[derive(Debug, Clone)]
pub struct SubjectSeries {
    pub subject_id: String,
    /// One 1440-vector of counts per day, in day order.
    pub days: Vec<Vec<u64>>,
    /// Parallel to `days`; true = worn.
    pub wear_mask: Vec<Vec<bool>>,
    pub valid_day_flags: Vec<bool>,
    pub covariates: BTreeMap<String, String>,
    pub outcome: Option<f64>,
}

/// Retained, windowed, log-transformed observations for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub subject_id: String,
    pub values: Vec<f64>,
    pub outcome: f64,
}

/// CSV layout for minute-level input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvFormat {
    /// `subject_id,day,MIN1,...,MIN1440`
    Wide,
    /// `subject_id,day,minute,count`
    Long,
}

impl std::str::FromStr for CsvFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wide" => Ok(CsvFormat::Wide),
            "long" => Ok(CsvFormat::Long),
            other => Err(Error::Config(format!("unknown csv format `{other}`"))),
        }
    }
}

/// Flag the non-wear minutes of one day.
///
/// A minute is non-wear iff it belongs to a maximal run of at least
/// [`NONWEAR_RUN_MINUTES`] consecutive zero-count minutes.
pub fn detect_nonwear(day: &[u64]) -> Result<Vec<bool>> {
    if day.len() != MINUTES_PER_DAY {
        return Err(Error::Shape(format!(
            "day must have {MINUTES_PER_DAY} minutes, got {}",
            day.len()
        )));
    }
    let mut nonwear = vec![false; MINUTES_PER_DAY];
    let mut run_start = 0usize;
    let mut i = 0usize;
    while i <= MINUTES_PER_DAY {
        let in_zero_run = i < MINUTES_PER_DAY && day[i] == 0;
        if !in_zero_run {
            let run_len = i - run_start;
            if run_len >= NONWEAR_RUN_MINUTES {
                for flag in &mut nonwear[run_start..i] {
                    *flag = true;
                }
            }
            run_start = i + 1;
        }
        i += 1;
    }
    Ok(nonwear)
}

/// A day is valid iff its wear fraction exceeds [`VALID_DAY_WEAR_FRACTION`]
/// strictly (1297 of 1440 wear minutes).
pub fn classify_valid_day(day: &[u64], nonwear: &[bool]) -> Result<bool> {
    if day.len() != MINUTES_PER_DAY || nonwear.len() != MINUTES_PER_DAY {
        return Err(Error::Shape(format!(
            "day and mask must have {MINUTES_PER_DAY} minutes"
        )));
    }
    let wear_minutes = nonwear.iter().filter(|&&nw| !nw).count();
    Ok(wear_minutes as f64 / MINUTES_PER_DAY as f64 > VALID_DAY_WEAR_FRACTION)
}

impl SubjectSeries {
    /// Build a series from raw day vectors, deriving wear masks and validity flags.
    pub fn from_days(subject_id: impl Into<String>, days: Vec<Vec<u64>>) -> Result<Self> {
        let mut wear_mask = Vec::with_capacity(days.len());
        let mut valid_day_flags = Vec::with_capacity(days.len());
        for day in &days {
            let nonwear = detect_nonwear(day)?;
            valid_day_flags.push(classify_valid_day(day, &nonwear)?);
            wear_mask.push(nonwear.iter().map(|&nw| !nw).collect());
        }
        Ok(SubjectSeries {
            subject_id: subject_id.into(),
            days,
            wear_mask,
            valid_day_flags,
            covariates: BTreeMap::new(),
            outcome: None,
        })
    }

    pub fn n_valid_days(&self) -> usize {
        self.valid_day_flags.iter().filter(|&&v| v).count()
    }
}

/// Window, filter and transform a subject's series into an [`ObservationSet`].
///
/// Keeps minutes 481..=1200 of valid days, drops non-wear minutes inside the
/// window, applies x -> log(x+1). Rejects subjects with fewer than 3 valid days.
pub fn build_observation_set(series: &SubjectSeries) -> Result<ObservationSet> {
    if series.n_valid_days() < MIN_VALID_DAYS {
        return Err(Error::SubjectRejected {
            subject_id: series.subject_id.clone(),
            reason: format!(
                "only {} valid days (need >= {MIN_VALID_DAYS})",
                series.n_valid_days()
            ),
        });
    }
    let mut values = Vec::new();
    for (d, day) in series.days.iter().enumerate() {
        if !series.valid_day_flags[d] {
            continue;
        }
        let wear = &series.wear_mask[d];
        for m in (WINDOW_START_MINUTE - 1)..WINDOW_END_MINUTE {
            if wear[m] {
                values.push(((day[m] as f64) + 1.0).ln());
            }
        }
    }
    let outcome = series.outcome.ok_or_else(|| Error::DataIntegrity(format!(
        "subject {} has no outcome attached",
        series.subject_id
    )))?;
    if values.is_empty() {
        return Err(Error::Degenerate(format!(
            "subject {} has no retained minutes",
            series.subject_id
        )));
    }
    Ok(ObservationSet {
        subject_id: series.subject_id.clone(),
        values,
        outcome,
    })
}

/// Read minute-level activity data into per-subject series, sorted by subject id.
///
/// Wide format: `subject_id,day,MIN1,...,MIN1440`; long format:
/// `subject_id,day,minute,count`. Duplicate (subject, day, minute) cells are a
/// data-integrity error.
pub fn read_minute_csv(path: &Path, format: CsvFormat) -> Result<Vec<SubjectSeries>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    // (subject, day) -> counts; Option tracks which cells were filled.
    let mut cells: BTreeMap<(String, u32), Vec<Option<u64>>> = BTreeMap::new();

    match format {
        CsvFormat::Wide => {
            for (idx, row) in reader.records().enumerate() {
                let line = idx + 2; // 1-based, after header
                let row = row?;
                if row.len() != 2 + MINUTES_PER_DAY {
                    return Err(Error::Parse {
                        line,
                        msg: format!(
                            "expected {} columns, got {}",
                            2 + MINUTES_PER_DAY,
                            row.len()
                        ),
                    });
                }
                let subject_id = row[0].to_string();
                let day: u32 = row[1].parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad day `{}`", &row[1]),
                })?;
                let key = (subject_id.clone(), day);
                if cells.contains_key(&key) {
                    return Err(Error::DataIntegrity(format!(
                        "duplicate (subject {subject_id}, day {day})"
                    )));
                }
                let mut counts = Vec::with_capacity(MINUTES_PER_DAY);
                for m in 0..MINUTES_PER_DAY {
                    let raw = &row[2 + m];
                    let c: u64 = raw.parse().map_err(|_| Error::Parse {
                        line,
                        msg: format!("bad count `{raw}` at MIN{}", m + 1),
                    })?;
                    counts.push(Some(c));
                }
                cells.insert(key, counts);
            }
        }
        CsvFormat::Long => {
            for (idx, row) in reader.records().enumerate() {
                let line = idx + 2;
                let row = row?;
                if row.len() != 4 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected 4 columns, got {}", row.len()),
                    });
                }
                let subject_id = row[0].to_string();
                let day: u32 = row[1].parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad day `{}`", &row[1]),
                })?;
                let minute: usize = row[2].parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad minute `{}`", &row[2]),
                })?;
                if minute < 1 || minute > MINUTES_PER_DAY {
                    return Err(Error::Parse {
                        line,
                        msg: format!("minute {minute} outside [1, {MINUTES_PER_DAY}]"),
                    });
                }
                let count: u64 = row[3].parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad count `{}`", &row[3]),
                })?;
                let entry = cells
                    .entry((subject_id.clone(), day))
                    .or_insert_with(|| vec![None; MINUTES_PER_DAY]);
                if entry[minute - 1].is_some() {
                    return Err(Error::DataIntegrity(format!(
                        "duplicate (subject {subject_id}, day {day}, minute {minute})"
                    )));
                }
                entry[minute - 1] = Some(count);
            }
        }
    }

    // Group consecutive days per subject; missing long-format minutes read as 0.
    let mut by_subject: BTreeMap<String, Vec<(u32, Vec<u64>)>> = BTreeMap::new();
    for ((subject_id, day), counts) in cells {
        let counts: Vec<u64> = counts.into_iter().map(|c| c.unwrap_or(0)).collect();
        by_subject.entry(subject_id).or_default().push((day, counts));
    }
    let mut out = Vec::with_capacity(by_subject.len());
    for (subject_id, mut days) in by_subject {
        days.sort_by_key(|(d, _)| *d);
        let day_vecs = days.into_iter().map(|(_, c)| c).collect();
        out.push(SubjectSeries::from_days(subject_id, day_vecs)?);
    }
    Ok(out)
}

/// Parsed `subject_id,edss,age,sex` row.
#[derive(Debug, Clone)]
pub struct OutcomeRecord {
    pub subject_id: String,
    pub edss: f64,
    pub age: Option<f64>,
    pub sex: Option<String>,
}

pub fn read_outcomes_csv(path: &Path) -> Result<Vec<OutcomeRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut out = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row?;
        if row.len() < 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected at least 2 columns, got {}", row.len()),
            });
        }
        let edss: f64 = row[1].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad edss `{}`", &row[1]),
        })?;
        let age = row.get(2).and_then(|s| s.parse().ok());
        let sex = row.get(3).map(|s| s.to_string());
        out.push(OutcomeRecord {
            subject_id: row[0].to_string(),
            edss,
            age,
            sex,
        });
    }
    Ok(out)
}

/// Attach outcomes (and age/sex covariates) to matching series in place.
pub fn attach_outcomes(series: &mut [SubjectSeries], outcomes: &[OutcomeRecord]) {
    let by_id: BTreeMap<&str, &OutcomeRecord> = outcomes
        .iter()
        .map(|o| (o.subject_id.as_str(), o))
        .collect();
    for s in series.iter_mut() {
        if let Some(o) = by_id.get(s.subject_id.as_str()) {
            s.outcome = Some(o.edss);
            if let Some(age) = o.age {
                s.covariates.insert("age".into(), age.to_string());
            }
            if let Some(sex) = &o.sex {
                s.covariates.insert("sex".into(), sex.clone());
            }
        }
    }
}

/// Run QC end to end: attach outcomes, build observation sets, and report
/// rejections as (subject_id, reason) pairs.
pub fn ingest_series(
    series: &[SubjectSeries],
) -> (Vec<ObservationSet>, Vec<(String, String)>) {
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for s in series {
        match build_observation_set(s) {
            Ok(obs) => accepted.push(obs),
            Err(e) => rejected.push((s.subject_id.clone(), e.to_string())),
        }
    }
    (accepted, rejected)
}

/// Write observation sets as line-delimited JSON, one record per subject.
pub fn write_subjects_file(path: &Path, subjects: &[ObservationSet]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for obs in subjects {
        serde_json::to_writer(&mut file, obs)?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a line-delimited JSON subjects file.
pub fn read_subjects_file(path: &Path) -> Result<Vec<ObservationSet>> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let obs: ObservationSet = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        out.push(obs);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent run-length scan used as the oracle for detect_nonwear.
    fn nonwear_oracle(day: &[u64]) -> Vec<bool> {
        let mut flags = vec![false; day.len()];
        for start in 0..day.len() {
            if day[start] != 0 || (start > 0 && day[start - 1] == 0) {
                continue;
            }
            let mut end = start;
            while end < day.len() && day[end] == 0 {
                end += 1;
            }
            if end - start >= NONWEAR_RUN_MINUTES {
                for f in &mut flags[start..end] {
                    *f = true;
                }
            }
        }
        flags
    }

    #[test]
    fn all_zero_day_is_all_nonwear() {
        let day = vec![0u64; MINUTES_PER_DAY];
        let flags = detect_nonwear(&day).unwrap();
        assert!(flags.iter().all(|&f| f));
    }

    #[test]
    fn run_of_89_is_not_flagged() {
        let mut day = vec![5u64; MINUTES_PER_DAY];
        for m in 100..189 {
            day[m] = 0;
        }
        let flags = detect_nonwear(&day).unwrap();
        assert!(flags.iter().all(|&f| !f));
    }

    #[test]
    fn leading_run_of_90_flags_exactly_minutes_1_to_90() {
        let mut day = vec![3u64; MINUTES_PER_DAY];
        for m in 0..90 {
            day[m] = 0;
        }
        let flags = detect_nonwear(&day).unwrap();
        assert_eq!(flags, nonwear_oracle(&day));
        assert!(flags[..90].iter().all(|&f| f));
        assert!(flags[90..].iter().all(|&f| !f));
    }

    #[test]
    fn nonwear_matches_oracle_on_random_days() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let day: Vec<u64> = (0..MINUTES_PER_DAY)
                .map(|_| if rng.gen_bool(0.7) { 0 } else { rng.gen_range(1..100) })
                .collect();
            assert_eq!(detect_nonwear(&day).unwrap(), nonwear_oracle(&day));
        }
    }

    #[test]
    fn wrong_length_is_shape_error() {
        assert!(matches!(detect_nonwear(&[0; 100]), Err(Error::Shape(_))));
    }

    #[test]
    fn valid_day_boundary_is_strict() {
        let day = vec![1u64; MINUTES_PER_DAY];
        // 0 non-wear minutes: valid.
        let mask = vec![false; MINUTES_PER_DAY];
        assert!(classify_valid_day(&day, &mask).unwrap());
        // 144 non-wear: wear fraction exactly 0.90, invalid under strict >.
        let mut mask144 = vec![false; MINUTES_PER_DAY];
        for f in mask144.iter_mut().take(144) {
            *f = true;
        }
        assert!(!classify_valid_day(&day, &mask144).unwrap());
        // 143 non-wear: 1297/1440 > 0.90, valid.
        let mut mask143 = vec![false; MINUTES_PER_DAY];
        for f in mask143.iter_mut().take(143) {
            *f = true;
        }
        assert!(classify_valid_day(&day, &mask143).unwrap());
    }

    fn worn_day(count: u64) -> Vec<u64> {
        vec![count; MINUTES_PER_DAY]
    }

    #[test]
    fn two_valid_days_is_rejected() {
        let mut series = SubjectSeries::from_days("s1", vec![worn_day(2), worn_day(2)]).unwrap();
        series.outcome = Some(1.0);
        assert!(matches!(
            build_observation_set(&series),
            Err(Error::SubjectRejected { .. })
        ));
    }

    #[test]
    fn three_fully_worn_days_give_2160_values() {
        let mut series =
            SubjectSeries::from_days("s1", vec![worn_day(2), worn_day(3), worn_day(4)]).unwrap();
        series.outcome = Some(1.0);
        let obs = build_observation_set(&series).unwrap();
        assert_eq!(obs.values.len(), 3 * 720);
    }

    #[test]
    fn log_transform_values() {
        let mut series = SubjectSeries::from_days(
            "s1",
            vec![worn_day(14880), worn_day(0), worn_day(1), worn_day(1)],
        )
        .unwrap();
        series.outcome = Some(1.0);
        // day of zeros is invalid (all non-wear); three valid days remain
        let obs = build_observation_set(&series).unwrap();
        assert!((obs.values[0] - 14881f64.ln()).abs() < 1e-12);
        assert!((obs.values[0] - 9.608).abs() < 1e-3);
        assert_eq!(obs.values.len(), 3 * 720);
    }

    #[test]
    fn rejection_is_monotone_in_valid_days() {
        // Removing a valid day never converts a rejected subject into an accepted one.
        let days: Vec<Vec<u64>> = (0..4).map(|_| worn_day(2)).collect();
        for n in 0..=days.len() {
            let mut s = SubjectSeries::from_days("s", days[..n].to_vec()).unwrap();
            s.outcome = Some(0.0);
            let accepted = build_observation_set(&s).is_ok();
            if n > 0 {
                let mut fewer = SubjectSeries::from_days("s", days[..n - 1].to_vec()).unwrap();
                fewer.outcome = Some(0.0);
                let accepted_fewer = build_observation_set(&fewer).is_ok();
                assert!(accepted || !accepted_fewer);
            }
            assert_eq!(accepted, n >= MIN_VALID_DAYS);
        }
    }

    #[test]
    fn nonwear_window_minutes_are_dropped() {
        // Non-wear run placed inside the 8am-8pm window of an otherwise worn day.
        let mut day = worn_day(2);
        for m in 500..600 {
            day[m] = 0; // 100-minute zero run inside the window
        }
        let mut series =
            SubjectSeries::from_days("s1", vec![day, worn_day(2), worn_day(2)]).unwrap();
        series.outcome = Some(1.0);
        let obs = build_observation_set(&series).unwrap();
        assert_eq!(obs.values.len(), 3 * 720 - 100);
    }

    #[test]
    fn wide_and_long_roundtrip_and_permutation_invariance() {
        use std::io::Write as _;
        let dir = tempfile::tempdir().unwrap();

        // wide file: 1 subject, 1 day
        let wide_path = dir.path().join("wide.csv");
        {
            let mut f = std::fs::File::create(&wide_path).unwrap();
            let mut header = String::from("subject_id,day");
            for m in 1..=MINUTES_PER_DAY {
                header.push_str(&format!(",MIN{m}"));
            }
            writeln!(f, "{header}").unwrap();
            let mut row = String::from("a,1");
            for m in 0..MINUTES_PER_DAY {
                row.push_str(&format!(",{}", m % 7));
            }
            writeln!(f, "{row}").unwrap();
        }
        let series = read_minute_csv(&wide_path, CsvFormat::Wide).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].days.len(), 1);
        assert_eq!(series[0].days[0][3], 3);

        // long file, shuffled, must equal its sorted counterpart
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rows: Vec<String> = (1..=MINUTES_PER_DAY)
            .map(|m| format!("a,1,{m},{}", (m - 1) % 7))
            .collect();
        let sorted_path = dir.path().join("long_sorted.csv");
        std::fs::write(
            &sorted_path,
            format!("subject_id,day,minute,count\n{}\n", rows.join("\n")),
        )
        .unwrap();
        rows.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(3));
        let shuffled_path = dir.path().join("long_shuffled.csv");
        std::fs::write(
            &shuffled_path,
            format!("subject_id,day,minute,count\n{}\n", rows.join("\n")),
        )
        .unwrap();
        let a = read_minute_csv(&sorted_path, CsvFormat::Long).unwrap();
        let b = read_minute_csv(&shuffled_path, CsvFormat::Long).unwrap();
        assert_eq!(a[0].days, b[0].days);
        assert_eq!(a[0].days, series[0].days);
    }

    #[test]
    fn header_only_file_gives_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "subject_id,day,minute,count\n").unwrap();
        assert!(read_minute_csv(&path, CsvFormat::Long).unwrap().is_empty());
    }

    #[test]
    fn duplicate_cell_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.csv");
        std::fs::write(&path, "subject_id,day,minute,count\na,1,5,1\na,1,5,2\n").unwrap();
        assert!(matches!(
            read_minute_csv(&path, CsvFormat::Long),
            Err(Error::DataIntegrity(_))
        ));
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "subject_id,day,minute,count\na,1,5,1\na,1,notanum,2\n").unwrap();
        match read_minute_csv(&path, CsvFormat::Long) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
