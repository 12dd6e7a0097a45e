//! CSV formats: per-patient signal files, the epoch sidecar and the
//! clinical table.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Channel, ChannelKind, ClinicalRecord, EpochSpec, Outcome, Recording, Span};
use crate::error::{Error, Result};

/// Parsed signal file: a uniform time column plus the five channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTable {
    pub start_time_s: f64,
    pub rate_hz: f64,
    pub columns: BTreeMap<ChannelKind, Vec<f64>>,
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn parse_f64(field: &str, what: &str, line: u64) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: {what} value {field:?} is not a number")))
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.eq_ignore_ascii_case(name))
}

/// Reads a `t,rcg,abd,ecg,ppg,sat` file; column order is free and extra
/// columns are ignored.
pub fn read_signal_table(path: impl AsRef<Path>) -> Result<SignalTable> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let t_col = column_index(&headers, "t").ok_or_else(|| Error::Parse("missing t column".into()))?;
    let mut cols = Vec::with_capacity(5);
    for kind in ChannelKind::ALL {
        let idx = column_index(&headers, kind.column()).ok_or(Error::MissingChannel(kind))?;
        cols.push((kind, idx));
    }

    let mut t = Vec::new();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); 5];
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| Error::Parse(format!("line {line}: too few fields")))
        };
        t.push(parse_f64(field(t_col)?, "t", line)?);
        for (slot, (kind, idx)) in cols.iter().enumerate() {
            let v = parse_f64(field(*idx)?, kind.column(), line)?;
            if !v.is_finite() {
                return Err(Error::NonFiniteSample {
                    channel: *kind,
                    index: data[slot].len(),
                });
            }
            data[slot].push(v);
        }
    }
    if t.len() < 2 {
        return Err(Error::NonUniformRate("fewer than two samples".into()));
    }
    let span = t[t.len() - 1] - t[0];
    let dt = span / (t.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::NonUniformRate("time does not increase".into()));
    }
    // time stamps are decimal text, allow for their rounding
    let tol = 1e-3 * dt + 1e-6;
    for (i, w) in t.windows(2).enumerate() {
        if (w[1] - w[0] - dt).abs() > tol {
            return Err(Error::NonUniformRate(format!(
                "step {} -> {} is {} s, expected {dt} s",
                i,
                i + 1,
                w[1] - w[0]
            )));
        }
    }
    Ok(SignalTable {
        start_time_s: t[0],
        rate_hz: 1.0 / dt,
        columns: cols.iter().map(|(k, _)| *k).zip(data).collect(),
    })
}

/// Loads one patient's signal file. The patient id is the file stem.
pub fn load_recording(path: impl AsRef<Path>, epochs: &EpochSpec) -> Result<Recording> {
    let path = path.as_ref();
    let table = read_signal_table(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let rate = table.rate_hz;
    Recording::new(
        id,
        table.start_time_s,
        table.columns.into_iter().map(|(k, v)| (k, Channel::new(v, rate))),
        *epochs,
    )
}

/// Writes a recording whose channels share one rate. Values are written
/// with six decimals.
pub fn write_signal_csv(path: impl AsRef<Path>, rec: &Recording) -> Result<()> {
    let path = path.as_ref();
    let rate = rec.channel(ChannelKind::Rcg).rate_hz;
    let n = rec.channel(ChannelKind::Rcg).samples.len();
    for kind in ChannelKind::ALL {
        let ch = rec.channel(kind);
        if ch.rate_hz != rate || ch.samples.len() != n {
            return Err(Error::InvalidRate(format!(
                "signal CSV needs one shared rate; {kind} is {} Hz",
                ch.rate_hz
            )));
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let chans: Vec<&[f64]> = ChannelKind::ALL
        .iter()
        .map(|k| rec.channel(*k).samples.as_slice())
        .collect();
    let io = |e| Error::io(path, e);
    writeln!(w, "t,rcg,abd,ecg,ppg,sat").map_err(io)?;
    for i in 0..n {
        let t = rec.start_time_s() + i as f64 / rate;
        writeln!(
            w,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            t, chans[0][i], chans[1][i], chans[2][i], chans[3][i], chans[4][i]
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_epochs(path: impl AsRef<Path>) -> Result<BTreeMap<String, EpochSpec>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let want = ["patient_id", "imv_start_s", "imv_end_s", "ettcpap_start_s", "ettcpap_end_s"];
    let idx: Vec<usize> = want
        .iter()
        .map(|name| {
            column_index(&headers, name)
                .ok_or_else(|| Error::Parse(format!("epoch file lacks column {name}")))
        })
        .collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |i: usize| rec.get(idx[i]).unwrap_or("");
        let num = |i: usize| parse_f64(get(i), want[i], line);
        let id = get(0).to_string();
        let spec = EpochSpec {
            imv: Span::new(num(1)?, num(2)?),
            ettcpap: Span::new(num(3)?, num(4)?),
        };
        if out.insert(id.clone(), spec).is_some() {
            return Err(Error::DuplicatePatient(id));
        }
    }
    Ok(out)
}

pub fn write_epochs<'a>(
    path: impl AsRef<Path>,
    epochs: impl IntoIterator<Item = (&'a str, &'a EpochSpec)>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["patient_id", "imv_start_s", "imv_end_s", "ettcpap_start_s", "ettcpap_end_s"])?;
    for (id, e) in epochs {
        w.write_record([
            id.to_string(),
            e.imv.start_s.to_string(),
            e.imv.end_s.to_string(),
            e.ettcpap.start_s.to_string(),
            e.ettcpap.end_s.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

pub fn read_clinical(path: impl AsRef<Path>) -> Result<Vec<ClinicalRecord>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let want = ["patient_id", "bw_g", "ga_weeks", "outcome"];
    let idx: Vec<usize> = want
        .iter()
        .map(|name| {
            column_index(&headers, name)
                .ok_or_else(|| Error::Parse(format!("clinical file lacks column {name}")))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |i: usize| rec.get(idx[i]).unwrap_or("");
        out.push(ClinicalRecord::new(
            get(0),
            parse_f64(get(1), "bw_g", line)?,
            parse_f64(get(2), "ga_weeks", line)?,
            get(3).parse::<Outcome>()?,
        )?);
    }
    Ok(out)
}

pub fn write_clinical(path: impl AsRef<Path>, records: &[ClinicalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["patient_id", "bw_g", "ga_weeks", "outcome"])?;
    for r in records {
        w.write_record([
            r.patient_id.clone(),
            r.bw_g.to_string(),
            r.ga_weeks.to_string(),
            r.outcome.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::Epoch;
    use std::fmt::Write as _;

    fn write_file(dir: &Path, name: &str, header: &str, rows: usize, rate: f64) -> std::path::PathBuf {
        let mut s = String::from(header);
        s.push('\n');
        let ncols = header.split(',').count();
        for i in 0..rows {
            write!(s, "{:.6}", i as f64 / rate).unwrap();
            for c in 1..ncols {
                write!(s, ",{}", (i % 7) as f64 + c as f64).unwrap();
            }
            s.push('\n');
        }
        let p = dir.join(name);
        std::fs::write(&p, s).unwrap();
        p
    }

    fn epochs(ett: (f64, f64)) -> EpochSpec {
        EpochSpec {
            imv: Span::new(0.0, ett.0),
            ettcpap: Span::new(ett.0, ett.1),
        }
    }

    #[test]
    fn loads_well_formed_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "p01.csv", "t,rcg,abd,ecg,ppg,sat", 3300 * 10, 10.0);
        let rec = load_recording(&p, &epochs((3000.0, 3300.0))).unwrap();
        assert_eq!(rec.patient_id(), "p01");
        assert!((rec.channel(ChannelKind::Sat).rate_hz - 10.0).abs() < 1e-9);
        let ett = rec.slice_epoch(Epoch::EttCpap).unwrap();
        assert_eq!(ett.samples(ChannelKind::Ecg).len(), 3000);
    }

    #[test]
    fn missing_sat_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "p.csv", "t,rcg,abd,ecg,ppg", 1000, 10.0);
        assert!(matches!(
            load_recording(&p, &epochs((10.0, 100.0))),
            Err(Error::MissingChannel(ChannelKind::Sat))
        ));
    }

    #[test]
    fn short_ettcpap_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "p.csv", "t,rcg,abd,ecg,ppg,sat", 2000, 10.0);
        assert!(matches!(
            load_recording(&p, &epochs((100.0, 190.0))),
            Err(Error::ShortEttCpap(_))
        ));
    }

    #[test]
    fn irregular_time_and_nan_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "t,rcg,abd,ecg,ppg,sat\n0,1,1,1,1,1\n0.1,1,1,1,1,1\n0.35,1,1,1,1,1\n").unwrap();
        assert!(matches!(read_signal_table(&p), Err(Error::NonUniformRate(_))));
        std::fs::write(&p, "t,rcg,abd,ecg,ppg,sat\n0,1,1,1,1,1\n0.1,1,NaN,1,1,1\n").unwrap();
        assert!(matches!(
            read_signal_table(&p),
            Err(Error::NonFiniteSample { channel: ChannelKind::Abd, index: 1 })
        ));
    }

    #[test]
    fn sidecars_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let e = epochs((3000.0, 3300.0));
        let ep = dir.path().join("epochs.csv");
        write_epochs(&ep, [("a", &e)]).unwrap();
        assert_eq!(read_epochs(&ep).unwrap()["a"], e);

        let cp = dir.path().join("clinical.csv");
        let recs = vec![
            ClinicalRecord::new("a", 850.0, 25.5, Outcome::Failure).unwrap(),
            ClinicalRecord::new("b", 1100.0, 28.0, Outcome::Unknown).unwrap(),
        ];
        write_clinical(&cp, &recs).unwrap();
        assert_eq!(read_clinical(&cp).unwrap(), recs);
    }
}
