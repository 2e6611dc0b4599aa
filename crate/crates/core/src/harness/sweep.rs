use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::exec::{map_indexed, Execution};

use super::episode::{run_episode, EpisodeConfig, EpisodeResult, MethodKind};
use super::world::World;
use super::HarnessError;

/// Parameter grid, episode count, and the seed of episode 0.
///
/// Episode `i` of every grid point uses seed `seed_base + i`, so different
/// parameters and methods see the same task draws and expert noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub params: Vec<f64>,
    pub episodes: usize,
    pub seed_base: u64,
}

impl SweepConfig {
    pub fn new(params: Vec<f64>, episodes: usize, seed_base: u64) -> Result<Self, HarnessError> {
        if params.is_empty() {
            return Err(HarnessError::Config("parameter grid is empty".into()));
        }
        if episodes == 0 {
            return Err(HarnessError::Config("episodes per point must be positive".into()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(HarnessError::Config("parameter grid has a non-finite value".into()));
        }
        Ok(Self {
            params,
            episodes,
            seed_base,
        })
    }

    pub fn seed(&self, episode: usize) -> u64 {
        self.seed_base.wrapping_add(episode as u64)
    }
}

/// `start, start·e^step, start·e^(2·step), ...` up to and including `stop`.
/// Default spacing of sweep grids in log space: consecutive values differ
/// by a factor of 1.05.
pub fn default_step_log() -> f64 {
    1.05f64.ln()
}

pub fn log_grid(start: f64, stop: f64, step_log: f64) -> Result<Vec<f64>, HarnessError> {
    if !(start > 0.0 && stop >= start && step_log > 0.0) || !stop.is_finite() {
        return Err(HarnessError::Config(format!(
            "invalid log grid: start {start}, stop {stop}, step {step_log}"
        )));
    }
    let span = (stop / start).ln();
    let n = (span / step_log + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start * (k as f64 * step_log).exp()).collect())
}

/// `n` log-spaced points from `start` to `stop`, both included.
pub fn log_points(start: f64, stop: f64, n: usize) -> Result<Vec<f64>, HarnessError> {
    if !(start > 0.0 && stop >= start && n > 0) || !stop.is_finite() {
        return Err(HarnessError::Config(format!(
            "invalid log range: start {start}, stop {stop}, {n} points"
        )));
    }
    if n == 1 {
        return Ok(vec![start]);
    }
    let step = (stop / start).ln() / (n - 1) as f64;
    Ok((0..n)
        .map(|k| {
            if k + 1 == n {
                stop
            } else {
                start * (k as f64 * step).exp()
            }
        })
        .collect())
}

/// One episode's metrics, as persisted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub method: MethodKind,
    pub param: f64,
    pub seed: u64,
    pub score: f64,
    pub n_queries: usize,
    pub n_repetitive: usize,
    pub steps: usize,
}

impl EpisodeRecord {
    pub fn new(method: MethodKind, param: f64, seed: u64, result: &EpisodeResult) -> Self {
        Self {
            method,
            param,
            seed,
            score: result.score,
            n_queries: result.n_queries,
            n_repetitive: result.n_repetitive,
            steps: result.steps,
        }
    }
}

/// Aggregate over the episodes of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: MethodKind,
    pub param: f64,
    pub episodes: usize,
    pub mean_score: f64,
    pub se_score: f64,
    pub mean_queries: f64,
    pub se_queries: f64,
    pub mean_repetitive: f64,
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`);
/// the error is 0 for a single observation.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl SweepRow {
    pub fn aggregate(method: MethodKind, param: f64, records: &[EpisodeRecord]) -> Self {
        let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
        let queries: Vec<f64> = records.iter().map(|r| r.n_queries as f64).collect();
        let (mean_score, se_score) = mean_se(&scores);
        let (mean_queries, se_queries) = mean_se(&queries);
        let mean_repetitive =
            records.iter().map(|r| r.n_repetitive as f64).sum::<f64>() / records.len() as f64;
        Self {
            method,
            param,
            episodes: records.len(),
            mean_score,
            se_score,
            mean_queries,
            se_queries,
            mean_repetitive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SweepOutput {
    /// Sorted by parameter, then seed.
    pub records: Vec<EpisodeRecord>,
    /// One per grid point, sorted by parameter.
    pub rows: Vec<SweepRow>,
}

/// Runs `sweep.episodes` episodes at every grid point of `method`.
///
/// `template` supplies everything but the method and seed. Episodes are
/// independent and run according to `exec`; the output does not depend on it.
pub fn sweep_pareto<W: World>(
    world: &W,
    method: MethodKind,
    template: &EpisodeConfig,
    sweep: &SweepConfig,
    exec: Execution,
) -> Result<SweepOutput, HarnessError> {
    if sweep.params.is_empty() {
        return Err(HarnessError::Config("parameter grid is empty".into()));
    }
    let mut params = sweep.params.clone();
    params.sort_by(f64::total_cmp);
    for &p in &params {
        method.with_param(p).querier(template.n_samples)?;
    }
    let per = sweep.episodes;
    let results = map_indexed(params.len() * per, exec, |k| {
        let (pi, ei) = (k / per, k % per);
        let cfg = EpisodeConfig {
            method: method.with_param(params[pi]),
            seed: sweep.seed(ei),
            ..template.clone()
        };
        run_episode(world, &cfg)
            .map(|r| EpisodeRecord::new(method, params[pi], cfg.seed, &r))
    });
    let records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let rows = records
        .chunks(per)
        .zip(&params)
        .map(|(chunk, &p)| SweepRow::aggregate(method, p, chunk))
        .collect();
    Ok(SweepOutput { records, rows })
}

/// Best mean score per unit-width bin of mean query count.
pub fn frontier(rows: &[SweepRow]) -> BTreeMap<i64, &SweepRow> {
    let mut bins: BTreeMap<i64, &SweepRow> = BTreeMap::new();
    for row in rows {
        let bin = row.mean_queries.floor() as i64;
        let entry = bins.entry(bin).or_insert(row);
        if row.mean_score > entry.mean_score {
            *entry = row;
        }
    }
    bins
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinComparison {
    pub bin: i64,
    pub challenger: f64,
    pub incumbent: f64,
    pub incumbent_se: f64,
}

impl BinComparison {
    /// Challenger at least matches the incumbent up to one standard error.
    pub fn holds(&self) -> bool {
        self.challenger >= self.incumbent - self.incumbent_se
    }
}

/// Compares two frontiers at every bin both populate.
pub fn compare_frontiers(challenger: &[SweepRow], incumbent: &[SweepRow]) -> Vec<BinComparison> {
    let a = frontier(challenger);
    let b = frontier(incumbent);
    a.iter()
        .filter_map(|(bin, ra)| {
            b.get(bin).map(|rb| BinComparison {
                bin: *bin,
                challenger: ra.mean_score,
                incumbent: rb.mean_score,
                incumbent_se: rb.se_score,
            })
        })
        .collect()
}
