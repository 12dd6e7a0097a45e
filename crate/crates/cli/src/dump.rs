//! Per-patient debug tables for `extract --dump-*`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

use crvar_core::features::PatientAnalysis;
use crvar_core::signals::ANALYSIS_RATE_HZ;

fn create(dir: &Path, id: &str, suffix: &str) -> Result<(BufWriter<File>, std::path::PathBuf)> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{id}.{suffix}.csv"));
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((BufWriter::new(file), path))
}

/// One row per analysis sample; invalid metric samples are empty cells.
pub fn metrics(dir: &Path, a: &PatientAnalysis) -> Result<()> {
    let (mut w, path) = create(dir, &a.patient_id, "metrics")?;
    let series: Vec<_> = a.metrics.iter().collect();
    let mut header = String::from("t");
    for s in &series {
        header.push(',');
        header.push_str(&s.kind.to_string());
    }
    writeln!(w, "{header}")?;
    let n = series.iter().map(|s| s.len()).max().unwrap_or(0);
    for i in 0..n {
        write!(w, "{:.2}", a.start_s + i as f64 / ANALYSIS_RATE_HZ)?;
        for s in &series {
            match (s.values.get(i), s.valid.get(i)) {
                (Some(v), Some(true)) => write!(w, ",{v:?}")?,
                _ => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

/// Detected R-peak times in recording seconds.
pub fn peaks(dir: &Path, a: &PatientAnalysis) -> Result<()> {
    let (mut w, path) = create(dir, &a.patient_id, "peaks")?;
    writeln!(w, "peak_time_s")?;
    for t in a.peaks.iter().flat_map(|p| p.times()) {
        writeln!(w, "{:.4}", a.start_s + t)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

/// Respiratory label and event flags per sample over the whole epoch;
/// `in_stats` marks the samples the pattern features were computed from.
pub fn patterns(dir: &Path, a: &PatientAnalysis) -> Result<()> {
    let (mut w, path) = create(dir, &a.patient_id, "patterns")?;
    writeln!(w, "t,label,bdy,dst,in_stats")?;
    for (i, label) in a.labels.iter().enumerate() {
        let flag = |v: Option<&bool>| u8::from(v.copied().unwrap_or(false));
        writeln!(
            w,
            "{:.2},{label},{},{},{}",
            a.start_s + i as f64 / ANALYSIS_RATE_HZ,
            flag(a.bdy.active.get(i)),
            flag(a.dst.active.get(i)),
            u8::from(i >= a.pattern_offset),
        )?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}
