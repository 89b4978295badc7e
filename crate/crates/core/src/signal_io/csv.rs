use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Record, RecordSet, Unit};
use crate::error::{Error, Result};

/// Relative tolerance between an inferred and a user-supplied sampling rate.
const FS_TOLERANCE: f64 = 1e-3;

fn is_time_header(name: &str) -> bool {
    let n = name.trim().to_ascii_lowercase();
    n == "time" || n == "t"
}

/// Loads a comma-separated file with a header row naming the channels.
///
/// A leading column named `time` or `t` is taken as the time axis; the
/// sampling rate is then inferred from the median sample spacing and checked
/// against `fs_override` when both are present. Without a time column
/// `fs_override` is required.
pub fn load_csv(path: impl AsRef<Path>, fs_override: Option<f64>) -> Result<RecordSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(::csv::Trim::All)
        .from_reader(file);

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: "missing header row".into(),
        });
    }
    let has_time = is_time_header(&headers[0]);
    let first_channel = usize::from(has_time);
    if headers.len() <= first_channel {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: "no channel columns".into(),
        });
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        for (c, cell) in row.iter().enumerate() {
            let value = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumericCell {
                    path: path.to_path_buf(),
                    row: line,
                    column: c + 1,
                })?;
            columns[c].push(value);
        }
    }
    if columns[0].is_empty() {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            line: 2,
            message: "no data rows".into(),
        });
    }

    let (fs, t0) = if has_time {
        let t = &columns[0];
        if let Some(i) = t.windows(2).position(|w| w[1] <= w[0]) {
            // header is line 1, first data row line 2
            return Err(Error::NonMonotoneTime {
                path: path.to_path_buf(),
                row: i + 3,
            });
        }
        match (median_spacing(t), fs_override) {
            (Some(dt), Some(given)) => {
                let inferred = 1.0 / dt;
                if ((inferred - given) / given).abs() > FS_TOLERANCE {
                    return Err(Error::SamplingRateMismatch { inferred, given });
                }
                (given, t[0])
            }
            (Some(dt), None) => (1.0 / dt, t[0]),
            (None, Some(given)) => (given, t[0]),
            (None, None) => return Err(Error::MissingSamplingRate(path.to_path_buf())),
        }
    } else {
        let fs = fs_override.ok_or_else(|| Error::MissingSamplingRate(path.to_path_buf()))?;
        (fs, 0.0)
    };

    let records = headers
        .into_iter()
        .zip(columns)
        .skip(first_channel)
        .map(|(name, samples)| {
            Record::new(name, Unit::Dimensionless, fs, samples).map(|r| r.with_t0(t0))
        })
        .collect::<Result<Vec<_>>>()?;
    RecordSet::new(records, path.display().to_string())
}

fn median_spacing(t: &[f64]) -> Option<f64> {
    if t.len() < 2 {
        return None;
    }
    let mut d: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    let n = d.len();
    Some(if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    })
}

fn csv_error(path: &Path, e: ::csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        ::csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::InconsistentRow {
            path: path.to_path_buf(),
            row: line,
            expected: expected_len as usize,
            found: len as usize,
        },
        ::csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Malformed {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Writes a record set as `t,<channel>...` with 17 significant digits, which
/// reloads bit-identically through [`load_csv`].
pub fn write_csv(set: &RecordSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let write_err = |source| Error::Write {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(write_err)?;
    let mut out = BufWriter::new(file);
    let records = set.records();
    let Some(first) = records.first() else {
        return Err(Error::InvalidRecord("cannot write an empty record set".into()));
    };
    if let Some(r) = records.iter().find(|r| r.len() != first.len()) {
        return Err(Error::InvalidRecord(format!(
            "channel '{}' has {} samples, expected {}",
            r.channel_id(),
            r.len(),
            first.len()
        )));
    }

    let mut header = String::from("t");
    for r in records {
        header.push(',');
        header.push_str(r.channel_id());
    }
    writeln!(out, "{header}").map_err(write_err)?;
    for k in 0..first.len() {
        write!(out, "{:.16e}", first.time_of(k)).map_err(write_err)?;
        for r in records {
            write!(out, ",{:.16e}", r.samples()[k]).map_err(write_err)?;
        }
        writeln!(out).map_err(write_err)?;
    }
    out.flush().map_err(write_err)
}
