use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::config::ExperimentConfig;
use super::run::{Analysis, ReplicateRecord, RunReport, SampleSet};
use super::HarnessError;
use crate::models::{kappa, tail_constant_w1};
use crate::stablelim::{self, ArSpec, StableSpec};

/// First line of every CSV artifact, followed by the hex config digest.
pub const DIGEST_PREFIX: &str = "# config_digest: ";

/// Shortest text that parses back to the same `f64`.
fn fmt(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn csv_writer(path: &Path, digest: &str) -> Result<csv::Writer<BufWriter<File>>, HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{DIGEST_PREFIX}{digest}")?;
    Ok(csv::Writer::from_writer(out))
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Format(e.to_string())
}

fn header(samples: &SampleSet) -> Vec<String> {
    let mut h = vec!["replicate".to_string()];
    h.extend(samples.generations.iter().map(|g| format!("w_theta_{g}")));
    h.extend(samples.generations.iter().map(|g| format!("w_alpha_{g}")));
    h.extend(samples.lags.iter().map(|r| format!("fluct_lag_{r}")));
    if samples.has_series {
        h.push("series".into());
    }
    h.extend(["extinct_at", "capped", "pruned_mass_bound"].map(String::from));
    h
}

/// Raw per-replicate CSV: a digest comment line, a header, one row per replicate.
pub fn write_samples(path: &Path, digest: &str, samples: &SampleSet) -> Result<(), HarnessError> {
    let mut w = csv_writer(path, digest)?;
    w.write_record(header(samples)).map_err(csv_err)?;
    let mut row: Vec<String> = Vec::new();
    for r in &samples.records {
        row.clear();
        row.push(r.replicate.to_string());
        row.extend(r.w_theta.iter().map(|&x| fmt(x)));
        row.extend(r.w_alpha.iter().map(|&x| fmt(x)));
        row.extend(r.fluctuations.iter().map(|&x| fmt(x)));
        if let Some(s) = r.series {
            row.push(fmt(s));
        }
        row.push(r.extinct_at.map(|g| g.to_string()).unwrap_or_default());
        row.push(r.capped.to_string());
        row.push(fmt(r.pruned_mass_bound));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn read_digest(reader: &mut impl BufRead) -> Result<String, HarnessError> {
    let mut first = String::new();
    reader.read_line(&mut first)?;
    first
        .trim_end()
        .strip_prefix(DIGEST_PREFIX)
        .map(str::to_string)
        .ok_or_else(|| HarnessError::Format("missing config digest line".into()))
}

fn suffix_numbers(header: &csv::StringRecord, prefix: &str) -> Result<Vec<usize>, HarnessError> {
    header
        .iter()
        .filter_map(|h| h.strip_prefix(prefix))
        .map(|n| n.parse().map_err(|_| HarnessError::Format(format!("bad column {prefix}{n}"))))
        .collect()
}

/// Reads a file written by [`write_samples`], returning its digest and samples.
pub fn read_samples(path: &Path) -> Result<(String, SampleSet), HarnessError> {
    let mut reader = BufReader::new(File::open(path)?);
    let digest = read_digest(&mut reader)?;
    let mut csv = csv::Reader::from_reader(reader);
    let head = csv.headers().map_err(csv_err)?.clone();
    let generations = suffix_numbers(&head, "w_theta_")?;
    let lags = suffix_numbers(&head, "fluct_lag_")?;
    let has_series = head.iter().any(|h| h == "series");
    let g = generations.len();
    let expected = 1 + 2 * g + lags.len() + usize::from(has_series) + 3;
    if head.len() != expected || suffix_numbers(&head, "w_alpha_")? != generations {
        return Err(HarnessError::Format("unexpected header".into()));
    }
    let num = |s: &str| -> Result<f64, HarnessError> {
        s.parse().map_err(|_| HarnessError::Format(format!("not a number: {s:?}")))
    };
    let mut records = Vec::new();
    for row in csv.records() {
        let row = row.map_err(csv_err)?;
        let field: Vec<&str> = row.iter().collect();
        let mut i = 0;
        let mut take = |count: usize| {
            let slice = &field[i..i + count];
            i += count;
            slice
        };
        let replicate = take(1)[0]
            .parse()
            .map_err(|_| HarnessError::Format("bad replicate index".into()))?;
        let w_theta = take(g).iter().map(|s| num(s)).collect::<Result<_, _>>()?;
        let w_alpha = take(g).iter().map(|s| num(s)).collect::<Result<_, _>>()?;
        let fluctuations = take(lags.len()).iter().map(|s| num(s)).collect::<Result<_, _>>()?;
        let series = if has_series { Some(num(take(1)[0])?) } else { None };
        let tail = take(3);
        let extinct_at = match tail[0] {
            "" => None,
            s => Some(s.parse().map_err(|_| HarnessError::Format(format!("bad extinct_at {s:?}")))?),
        };
        let capped = tail[1]
            .parse()
            .map_err(|_| HarnessError::Format(format!("bad capped flag {:?}", tail[1])))?;
        records.push(ReplicateRecord {
            replicate,
            w_theta,
            w_alpha,
            fluctuations,
            series,
            extinct_at,
            capped,
            pruned_mass_bound: num(tail[2])?,
        });
    }
    Ok((
        digest,
        SampleSet {
            generations,
            lags,
            has_series,
            records,
        },
    ))
}

/// Reads mixing weights: either a sample file (column `w_alpha_<n>`) or plain
/// text with one number per line (`#` lines are skipped).
pub fn read_weights(path: &Path, horizon: usize) -> Result<Vec<f64>, HarnessError> {
    let text = fs::read_to_string(path)?;
    let is_sample_file = text
        .lines()
        .nth(1)
        .is_some_and(|l| l.starts_with("replicate,"));
    if is_sample_file {
        let (_, samples) = read_samples(path)?;
        return samples
            .w_alpha(horizon)
            .ok_or_else(|| HarnessError::Format(format!("no column w_alpha_{horizon}")));
    }
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse().map_err(|_| HarnessError::Format(format!("not a weight: {l:?}"))))
        .collect()
}

pub fn write_report(path: &Path, report: &RunReport) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    // The digest is the first key of the document.
    serde_json::to_writer_pretty(&mut out, report).map_err(|e| HarnessError::Format(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn write_cf_rows(
    path: &Path,
    digest: &str,
    columns: &[&str],
    grid: &[f64],
    values: &[&[Complex64]],
) -> Result<(), HarnessError> {
    let mut w = csv_writer(path, digest)?;
    w.write_record(columns).map_err(csv_err)?;
    for (i, t) in grid.iter().enumerate() {
        let mut row = vec![fmt(*t)];
        for v in values {
            row.push(fmt(v[i].re));
            row.push(fmt(v[i].im));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

pub(crate) fn write_artifacts(
    config: &ExperimentConfig,
    samples: &SampleSet,
    analysis: &Analysis,
    report: &RunReport,
) -> Result<(), HarnessError> {
    let dir = &config.output_dir;
    let digest = config.digest();
    write_samples(&dir.join("samples.csv"), &digest, samples)?;
    write_report(&dir.join("report.json"), report)?;
    for table in &analysis.cf_tables {
        write_cf_rows(
            &dir.join(format!("cf_{}.csv", file_safe(&table.check))),
            &digest,
            &["t", "re_empirical", "im_empirical", "re_theoretical", "im_theoretical"],
            &table.grid,
            &[&table.empirical, &table.theoretical],
        )?;
    }
    Ok(())
}

/// Writes `cf_q.csv`, `cf_u0.csv` and, when mixing weights are given,
/// `mixture.csv` (columns `t,re,im`) on the config's grid.
pub fn export_cf_tables(
    config: &ExperimentConfig,
    dir: &Path,
    weights: Option<&[f64]>,
) -> Result<Vec<PathBuf>, HarnessError> {
    config.validate()?;
    let c = tail_constant_w1(&config.law, config.theta, config.alpha)?;
    let k = kappa(&config.law, config.theta, config.alpha)?;
    let spec = StableSpec::new(config.alpha, c).map_err(|e| HarnessError::Config(e.to_string()))?;
    let ar = ArSpec::from_kappa(k, spec).map_err(|e| HarnessError::Config(e.to_string()))?;
    let grid = config.grid.points();
    let digest = config.digest();
    let mut tables: Vec<(&str, Vec<Complex64>)> = vec![
        ("cf_q.csv", grid.iter().map(|&t| stablelim::cf_q(&spec, t)).collect()),
        ("cf_u0.csv", grid.iter().map(|&t| stablelim::cf_u0(&ar, t)).collect()),
    ];
    if let Some(w) = weights {
        let values = grid
            .iter()
            .map(|&t| stablelim::mixture_cf(&spec, k, w, t))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        tables.push(("mixture.csv", values));
    }
    let mut written = Vec::new();
    for (name, values) in tables {
        let path = dir.join(name);
        write_cf_rows(&path, &digest, &["t", "re", "im"], &grid, &[&values])?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::{analyze, simulate};
    use crate::harness::scenarios::{gw_heyde, infinite_points, series_alternating};

    #[test]
    fn float_text_round_trips() {
        for x in [0.0, -0.0, 1.0, 1e-300, 5e-324, 1.7976931348623157e308, 0.1 + 0.2, -3.25e-7, 123456.789] {
            assert_eq!(fmt(x).parse::<f64>().unwrap().to_bits(), x.to_bits(), "{x}");
        }
    }

    #[test]
    fn samples_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        for mut config in [gw_heyde(), series_alternating(), infinite_points()] {
            config.replicates = 40;
            let samples = simulate(&config, None).unwrap();
            let path = dir.path().join(format!("{}.csv", config.scenario));
            write_samples(&path, &config.digest(), &samples).unwrap();
            let (digest, back) = read_samples(&path).unwrap();
            assert_eq!(digest, config.digest());
            assert_eq!(back, samples);
            assert_eq!(analyze(&config, &back), analyze(&config, &samples));
        }
    }

    #[test]
    fn weights_from_text_and_sample_files() {
        let dir = tempfile::tempdir().unwrap();
        let text = dir.path().join("w.txt");
        fs::write(&text, "# weights\n1.5\n0.25\n\n2\n").unwrap();
        assert_eq!(read_weights(&text, 12).unwrap(), [1.5, 0.25, 2.0]);
        let mut config = gw_heyde();
        config.replicates = 10;
        let samples = simulate(&config, None).unwrap();
        let csv = dir.path().join("s.csv");
        write_samples(&csv, "abc", &samples).unwrap();
        assert_eq!(read_weights(&csv, 12).unwrap(), samples.w_alpha(12).unwrap());
    }

    #[test]
    fn missing_digest_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "replicate,w_theta_0\n0,1\n").unwrap();
        assert!(matches!(read_samples(&path), Err(HarnessError::Format(_))));
    }

    fn read_table(path: &Path) -> (String, Vec<(f64, f64, f64)>) {
        let text = fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        let digest = lines.next().unwrap().to_string();
        assert_eq!(lines.next().unwrap(), "t,re,im");
        let rows = lines
            .map(|l| {
                let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
                (v[0], v[1], v[2])
            })
            .collect();
        (digest, rows)
    }

    #[test]
    fn cf_tables_are_normalized_and_hermitian() {
        let dir = tempfile::tempdir().unwrap();
        let config = gw_heyde();
        let weights = [0.5, 1.0, 2.5];
        let files = export_cf_tables(&config, dir.path(), Some(&weights)).unwrap();
        assert_eq!(files.len(), 3);
        for file in files {
            let (digest, rows) = read_table(&file);
            assert_eq!(digest, format!("{DIGEST_PREFIX}{}", config.digest()));
            assert_eq!(rows.len(), 81);
            let zero = rows.iter().find(|r| r.0 == 0.0).unwrap();
            assert_eq!((zero.1, zero.2), (1.0, 0.0));
            for (a, b) in rows.iter().zip(rows.iter().rev()) {
                assert_eq!(a.0, -b.0);
                assert_eq!(a.1, b.1);
                assert_eq!(a.2, -b.2);
            }
        }
    }

    #[test]
    fn mixture_table_needs_weights() {
        let dir = tempfile::tempdir().unwrap();
        let files = export_cf_tables(&gw_heyde(), dir.path(), None).unwrap();
        assert_eq!(files.len(), 2);
        assert!(!dir.path().join("mixture.csv").exists());
    }
}
