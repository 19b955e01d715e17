use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{median, timed};
use crate::driver::{relative_error, sthosvd, ModeReport, Strategy};
use crate::error::{Error, Result};
use crate::solvers::{AlsOptions, SolverKind};
use crate::tensor::{random_tensor, read_dten, synth_lowrank, DenseTensor, Distribution};

pub const BENCH_SCHEMA_VERSION: u32 = 1;

/// One input for a comparison sweep.
#[derive(Debug, Clone)]
pub struct BenchCase {
    pub name: String,
    pub tensor: DenseTensor,
    pub ranks: Vec<usize>,
}

/// JSON description of the cases, as read by the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub schema_version: u32,
    pub cases: Vec<BenchCaseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCaseSpec {
    pub name: String,
    pub ranks: Vec<usize>,
    /// Read the tensor from this `.dten` file (relative to the spec file).
    #[serde(default)]
    pub path: Option<String>,
    /// Otherwise generate a tensor of these dims.
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
    /// `uniform`, `normal`, or `lowrank` (exact multilinear rank `ranks`).
    #[serde(default = "default_kind")]
    pub kind: String,
}

fn default_kind() -> String {
    "uniform".into()
}

impl BenchSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Vec<BenchCase>> {
        let path = path.as_ref();
        let spec: BenchSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if spec.schema_version != BENCH_SCHEMA_VERSION {
            return Err(Error::SchemaMismatch(format!(
                "bench spec schema {} (expected {BENCH_SCHEMA_VERSION})",
                spec.schema_version
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        spec.cases.iter().map(|c| c.materialize(base)).collect()
    }
}

impl BenchCaseSpec {
    fn materialize(&self, base: &Path) -> Result<BenchCase> {
        let tensor = match (&self.path, &self.dims) {
            (Some(p), _) => read_dten(base.join(p))?,
            (None, Some(dims)) => match self.kind.as_str() {
                "uniform" => random_tensor(dims, self.seed, Distribution::Uniform)?,
                "normal" => random_tensor(dims, self.seed, Distribution::Normal)?,
                "lowrank" => synth_lowrank(dims, &self.ranks, self.seed)?,
                k => {
                    return Err(Error::InvalidArgument(format!(
                        "case {}: unknown kind {k:?}",
                        self.name
                    )))
                }
            },
            (None, None) => {
                return Err(Error::InvalidArgument(format!(
                    "case {} needs a path or dims",
                    self.name
                )));
            }
        };
        Ok(BenchCase {
            name: self.name.clone(),
            tensor,
            ranks: self.ranks.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub repeats: usize,
    pub warmup: bool,
    pub als: AlsOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            repeats: 3,
            warmup: true,
            als: AlsOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub case: String,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub strategy: String,
    /// Median wall time of the whole decomposition, seconds.
    pub total_time: f64,
    pub relative_error: Option<f64>,
    pub solvers: Vec<SolverKind>,
    pub mode_reports: Vec<ModeReport>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub cases_ok: usize,
    pub mean_time: f64,
    /// Geometric mean over shared cases of `time(other) / time(this)`.
    pub speedup_vs: BTreeMap<String, f64>,
    /// Fraction of cases within 10% of the fastest fixed strategy.
    pub within_10pct_of_best_fixed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub rows: Vec<BenchRow>,
    pub summary: Vec<StrategySummary>,
    pub notes: Vec<String>,
}

fn is_fixed(name: &str) -> bool {
    name == "eig" || name == "als"
}

/// Runs every strategy on every case, interleaving strategies within each
/// repeat so timer drift is shared. Failures are recorded per row.
pub fn bench_compare(
    cases: &[BenchCase],
    strategies: &[Strategy],
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    if strategies.is_empty() {
        return Err(Error::InvalidArgument("no strategies to compare".into()));
    }
    if cfg.repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(cases.len() * strategies.len());
    for case in cases {
        let run = |s: &Strategy| sthosvd(&case.tensor, &case.ranks, s, &cfg.als);
        let mut times = vec![Vec::with_capacity(cfg.repeats); strategies.len()];
        let mut last: Vec<Option<Result<_>>> = strategies.iter().map(|_| None).collect();
        if cfg.warmup {
            for (k, s) in strategies.iter().enumerate() {
                if let Err(e) = run(s) {
                    last[k] = Some(Err(e));
                }
            }
        }
        for _ in 0..cfg.repeats {
            for (k, s) in strategies.iter().enumerate() {
                if matches!(last[k], Some(Err(_))) {
                    continue;
                }
                let (res, t) = timed(|| run(s));
                times[k].push(t);
                last[k] = Some(res);
            }
        }
        for (k, s) in strategies.iter().enumerate() {
            let base = BenchRow {
                case: case.name.clone(),
                dims: case.tensor.dims().to_vec(),
                ranks: case.ranks.clone(),
                strategy: s.name(),
                total_time: 0.0,
                relative_error: None,
                solvers: Vec::new(),
                mode_reports: Vec::new(),
                failure: None,
            };
            let row = match last[k].take().expect("ran at least once") {
                Ok((t, reports)) => match relative_error(&case.tensor, &t) {
                    Ok(err) => BenchRow {
                        total_time: median(&times[k]),
                        relative_error: Some(err),
                        solvers: reports.iter().map(|r| r.solver_used).collect(),
                        mode_reports: reports,
                        ..base
                    },
                    Err(e) => BenchRow {
                        failure: Some(e.to_string()),
                        ..base
                    },
                },
                Err(e) => BenchRow {
                    failure: Some(e.to_string()),
                    ..base
                },
            };
            if let Some(f) = &row.failure {
                log::warn!("case {} strategy {}: {f}", row.case, row.strategy);
            }
            rows.push(row);
        }
    }
    let summary = summarize(&rows, strategies);
    Ok(BenchReport {
        schema_version: BENCH_SCHEMA_VERSION,
        rows,
        summary,
        notes: Vec::new(),
    })
}

fn summarize(rows: &[BenchRow], strategies: &[Strategy]) -> Vec<StrategySummary> {
    let names: Vec<String> = strategies.iter().map(Strategy::name).collect();
    // case -> strategy -> time, successful rows only
    let mut by_case: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.failure.is_none()) {
        by_case
            .entry(&r.case)
            .or_default()
            .insert(&r.strategy, r.total_time);
    }
    let any_fixed = names.iter().any(|n| is_fixed(n));
    names
        .iter()
        .map(|name| {
            let mine: Vec<(&str, f64)> = by_case
                .iter()
                .filter_map(|(c, m)| m.get(name.as_str()).map(|t| (*c, *t)))
                .collect();
            let cases_ok = mine.len();
            let mean_time = if cases_ok == 0 {
                0.0
            } else {
                mine.iter().map(|(_, t)| t).sum::<f64>() / cases_ok as f64
            };
            let mut speedup_vs = BTreeMap::new();
            for other in &names {
                let logs: Vec<f64> = mine
                    .iter()
                    .filter_map(|(c, t)| by_case[c].get(other.as_str()).map(|o| (o / t).ln()))
                    .collect();
                if !logs.is_empty() {
                    speedup_vs.insert(
                        other.clone(),
                        (logs.iter().sum::<f64>() / logs.len() as f64).exp(),
                    );
                }
            }
            let within = mine
                .iter()
                .filter(|(c, t)| {
                    let best = by_case[c]
                        .iter()
                        .filter(|(n, _)| !any_fixed || is_fixed(n))
                        .map(|(_, v)| *v)
                        .fold(f64::INFINITY, f64::min);
                    *t <= 1.10 * best
                })
                .count();
            StrategySummary {
                strategy: name.clone(),
                cases_ok,
                mean_time,
                speedup_vs,
                within_10pct_of_best_fixed: if cases_ok == 0 {
                    0.0
                } else {
                    within as f64 / cases_ok as f64
                },
            }
        })
        .collect()
}

impl BenchReport {
    pub fn strategy(&self, name: &str) -> Option<&StrategySummary> {
        self.summary.iter().find(|s| s.strategy == name)
    }

    pub fn any_succeeded(&self) -> bool {
        self.rows.iter().any(|r| r.failure.is_none())
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&serde_json::to_value(self)?)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn write_csv_to<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record([
            "case",
            "dims",
            "ranks",
            "strategy",
            "total_time_s",
            "relative_error",
            "solvers",
            "failure",
        ])?;
        let shape = |v: &[usize]| {
            v.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("x")
        };
        for r in &self.rows {
            csv.write_record([
                r.case.clone(),
                shape(&r.dims),
                shape(&r.ranks),
                r.strategy.clone(),
                r.total_time.to_string(),
                r.relative_error.map(|e| e.to_string()).unwrap_or_default(),
                r.solvers
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(","),
                r.failure.clone().unwrap_or_default(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }
}
