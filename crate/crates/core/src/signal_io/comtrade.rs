//! IEEE C37.111-1991 COMTRADE, ASCII data files only.
//!
//! The `.cfg` layout read here:
//!
//! ```text
//! station_name,rec_dev_id
//! TT,##A,##D
//! An,ch_id,ph,ccbm,uu,a,b,skew,min,max     (one line per analog channel)
//! Dn,ch_id,normal_state                     (one line per digital channel)
//! lf
//! nrates
//! samp,endsamp                              (nrates lines)
//! dd/mm/yyyy,hh:mm:ss.ssssss                (first sample)
//! dd/mm/yyyy,hh:mm:ss.ssssss                (trigger)
//! ASCII
//! ```
//!
//! Each `.dat` line is `n,timestamp,A1..Ak,D1..Dm`. Analog values are scaled
//! as `a * raw + b`; digital channels are skipped.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Record, RecordSet, Unit};
use crate::error::{Error, Result};

struct AnalogChannel {
    id: String,
    unit: Unit,
    a: f64,
    b: f64,
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        loop {
            match self.inner.next() {
                Some((_, line)) if line.trim().is_empty() => continue,
                Some((i, line)) => return Ok((i + 1, line.split(',').map(str::trim).collect())),
                None => {
                    return Err(Error::Malformed {
                        path: self.path.to_path_buf(),
                        line: 0,
                        message: format!("unexpected end of file, expected {what}"),
                    })
                }
            }
        }
    }
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, fields: &[&str], i: usize, what: &str) -> Result<T> {
    fields
        .get(i)
        .and_then(|f| f.parse::<T>().ok())
        .ok_or_else(|| malformed(path, line, format!("bad or missing {what}")))
}

fn count_field(path: &Path, line: usize, s: &str, suffix: char) -> Result<usize> {
    s.strip_suffix(suffix)
        .or_else(|| s.strip_suffix(suffix.to_ascii_lowercase()))
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| malformed(path, line, format!("bad channel count '{s}'")))
}

fn companion_dat(cfg: &Path) -> PathBuf {
    for ext in ["dat", "DAT", "Dat"] {
        let p = cfg.with_extension(ext);
        if p.exists() {
            return p;
        }
    }
    cfg.with_extension("dat")
}

/// Loads the analog channels of a 1991 ASCII COMTRADE `.cfg`/`.dat` pair.
pub fn load_comtrade_1991_ascii(cfg_path: impl AsRef<Path>) -> Result<RecordSet> {
    let cfg_path = cfg_path.as_ref();
    let text = fs::read_to_string(cfg_path).map_err(|source| Error::Io {
        path: cfg_path.to_path_buf(),
        source,
    })?;
    let mut lines = Lines {
        path: cfg_path,
        inner: text.lines().enumerate(),
    };

    let _station = lines.next_fields("station line")?;

    let (ln, counts) = lines.next_fields("channel counts")?;
    if counts.len() < 3 {
        return Err(malformed(cfg_path, ln, "expected TT,##A,##D"));
    }
    let total: usize = field(cfg_path, ln, &counts, 0, "total channel count")?;
    let n_analog = count_field(cfg_path, ln, counts[1], 'A')?;
    let n_digital = count_field(cfg_path, ln, counts[2], 'D')?;
    if total != n_analog + n_digital {
        return Err(malformed(
            cfg_path,
            ln,
            format!("total {total} != {n_analog}A + {n_digital}D"),
        ));
    }

    let mut analog = Vec::with_capacity(n_analog);
    for _ in 0..n_analog {
        let (ln, f) = lines.next_fields("analog channel line")?;
        if f.len() < 7 {
            return Err(malformed(cfg_path, ln, "analog channel line needs at least 7 fields"));
        }
        analog.push(AnalogChannel {
            id: f[1].to_string(),
            unit: Unit::from_label(f[4]),
            a: field(cfg_path, ln, &f, 5, "multiplier a")?,
            b: field(cfg_path, ln, &f, 6, "offset b")?,
        });
    }
    for _ in 0..n_digital {
        lines.next_fields("digital channel line")?;
    }

    let _line_freq = lines.next_fields("line frequency")?;
    let (ln, f) = lines.next_fields("number of sampling rates")?;
    let nrates: usize = field(cfg_path, ln, &f, 0, "number of sampling rates")?;
    if nrates > 1 {
        return Err(Error::MultiRate);
    }
    if nrates == 0 {
        return Err(malformed(cfg_path, ln, "no sampling rate declared"));
    }
    let (ln, f) = lines.next_fields("sampling rate line")?;
    let fs: f64 = field(cfg_path, ln, &f, 0, "sampling rate")?;
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(malformed(cfg_path, ln, "sampling rate must be positive"));
    }

    let _first = lines.next_fields("first sample timestamp")?;
    let _trigger = lines.next_fields("trigger timestamp")?;
    // Some writers drop the file-type line; 1991 data defaults to ASCII.
    if let Ok((ln, f)) = lines.next_fields("file type") {
        match f[0].to_ascii_uppercase().as_str() {
            "ASCII" => {}
            "BINARY" => return Err(Error::BinaryComtrade),
            other => return Err(malformed(cfg_path, ln, format!("unknown file type '{other}'"))),
        }
    }

    let dat_path = companion_dat(cfg_path);
    let dat = fs::read_to_string(&dat_path).map_err(|source| Error::Io {
        path: dat_path.clone(),
        source,
    })?;
    let expected = 2 + n_analog + n_digital;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_analog];
    for (i, line) in dat.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ln = i + 1;
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != expected {
            return Err(malformed(
                &dat_path,
                ln,
                format!("expected {expected} fields, found {}", f.len()),
            ));
        }
        for (c, ch) in analog.iter().enumerate() {
            let raw: f64 = f[2 + c]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| malformed(&dat_path, ln, format!("non-numeric value in column {}", c + 3)))?;
            columns[c].push(ch.a * raw + ch.b);
        }
    }

    let records = analog
        .into_iter()
        .zip(columns)
        .map(|(ch, samples)| Record::new(ch.id, ch.unit, fs, samples))
        .collect::<Result<Vec<_>>>()?;
    RecordSet::new(records, cfg_path.display().to_string())
}
