use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::selector::{extract_features, Provenance, TrainingSample};

pub const SAMPLES_HEADER: [&str; 18] = [
    "I",
    "R",
    "J",
    "f4",
    "f5",
    "f6",
    "f7",
    "f8",
    "f9",
    "f10",
    "time_eig_s",
    "time_als_s",
    "label",
    "tie_flag",
    "dims",
    "ranks",
    "mode",
    "seed",
];

fn join_shape(v: &[usize]) -> String {
    v.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

fn parse_shape(s: &str, line: u64) -> Result<Vec<usize>> {
    s.split('x')
        .map(|t| {
            t.parse()
                .map_err(|_| Error::SchemaMismatch(format!("row {line}: bad shape {s:?}")))
        })
        .collect()
}

pub fn write_samples_to<W: Write>(w: W, samples: &[TrainingSample]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(SAMPLES_HEADER)?;
    for s in samples {
        let mut row: Vec<String> = s.features.0.iter().map(|v| v.to_string()).collect();
        row.extend([
            s.time_eig.to_string(),
            s.time_als.to_string(),
            s.label.to_string(),
            u8::from(s.tie).to_string(),
            join_shape(&s.provenance.dims),
            join_shape(&s.provenance.ranks),
            s.provenance.mode.to_string(),
            s.provenance.seed.to_string(),
        ]);
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_samples_csv(path: impl AsRef<Path>, samples: &[TrainingSample]) -> Result<()> {
    write_samples_to(std::fs::File::create(path)?, samples)
}

/// Reads samples, checking the header and that every row's derived features
/// and label agree with its shape and times.
pub fn read_samples_from<R: Read>(r: R) -> Result<Vec<TrainingSample>> {
    let mut csv = csv::Reader::from_reader(r);
    let header = csv.headers()?.clone();
    if header.iter().ne(SAMPLES_HEADER.iter().copied()) {
        return Err(Error::SchemaMismatch(format!(
            "unexpected samples header {:?}",
            header
        )));
    }
    let mut out = Vec::new();
    for rec in csv.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |k: usize| -> Result<f64> {
            rec[k].parse().map_err(|_| {
                Error::SchemaMismatch(format!(
                    "row {line}: bad number {:?} in {}",
                    &rec[k], SAMPLES_HEADER[k]
                ))
            })
        };
        let int = |k: usize| -> Result<u64> {
            rec[k].parse().map_err(|_| {
                Error::SchemaMismatch(format!(
                    "row {line}: bad integer {:?} in {}",
                    &rec[k], SAMPLES_HEADER[k]
                ))
            })
        };
        let mut f = [0.0; 10];
        for (k, v) in f.iter_mut().enumerate() {
            *v = num(k)?;
        }
        let (i, r, j) = (f[0], f[1], f[2]);
        if [i, r, j].iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
            return Err(Error::SchemaMismatch(format!(
                "row {line}: I, R, J must be positive integers"
            )));
        }
        let features = extract_features(i as usize, r as usize, j as usize);
        if !crate::selector::FeatureVector(f).is_consistent(1e-9) {
            return Err(Error::SchemaMismatch(format!(
                "row {line}: derived features disagree with I, R, J"
            )));
        }
        let (time_eig, time_als) = (num(10)?, num(11)?);
        let label = int(12)?;
        if label > 1 {
            return Err(Error::SchemaMismatch(format!("row {line}: label {label}")));
        }
        out.push(TrainingSample {
            features,
            time_eig,
            time_als,
            label: label as u8,
            tie: int(13)? != 0,
            provenance: Provenance {
                dims: parse_shape(&rec[14], line)?,
                ranks: parse_shape(&rec[15], line)?,
                mode: int(16)? as usize,
                seed: int(17)?,
            },
        });
    }
    Ok(out)
}

pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<Vec<TrainingSample>> {
    read_samples_from(std::fs::File::open(path)?)
}
