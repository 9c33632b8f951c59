use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{residual, CandidateFamily, ObstructionError};

/// Seed of the sample points shared by every candidate of an experiment.
pub const SAMPLE_SEED: u64 = 0x05a4_d1e5;
const SAMPLE_COUNT: usize = 6;
const RESTART_DIAMETER: f64 = 1e-10;
const RESTART_RANGE: f64 = 2.0;
const INITIAL_STEP: f64 = 0.5;
const REFRESH_MIN: f64 = 1e-6;
/// A simplex whose best vertex gains less than `STALL_GAIN` (relative) over
/// `STALL_FACTOR * (P + 1)` evaluations is rebuilt around that vertex, or
/// abandoned for a random restart when the previous rebuild gained nothing.
const STALL_FACTOR: usize = 10;
const STALL_GAIN: f64 = 1e-3;
/// Required gap between the dimension-3 and dimension-5 floors.
const ORDERS_OF_MAGNITUDE: f64 = 1e3;

/// The fixed quadrature points in `[-1, 1]^dim`.
pub fn sample_points(dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED ^ dim as u64);
    (0..SAMPLE_COUNT).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub best_params: Vec<f64>,
    pub best_residual: f64,
    /// `(evaluation index, best residual so far)`, recorded on improvement.
    pub trace: Vec<(usize, f64)>,
    pub seed: u64,
    pub evaluations: usize,
}

/// Budgeted objective that remembers the best point it has seen.
struct Objective<'a> {
    fam: &'a CandidateFamily,
    points: &'a [Vec<f64>],
    budget: usize,
    evals: usize,
    best: f64,
    best_x: Vec<f64>,
    trace: Vec<(usize, f64)>,
}

impl Objective<'_> {
    fn exhausted(&self) -> bool {
        self.evals >= self.budget
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = residual(self.fam, x, self.points).unwrap_or(f64::INFINITY);
        if v < self.best {
            self.best = v;
            self.best_x = x.to_vec();
            self.trace.push((self.evals, v));
        }
        v
    }
}

/// Restarted Nelder–Mead with dimension-adaptive coefficients. Random
/// restarts draw from `[-2, 2]^P` and happen when the simplex collapses
/// below diameter `1e-10` or stalls twice in a row.
pub fn minimize(
    fam: &CandidateFamily,
    points: &[Vec<f64>],
    seed: u64,
    budget: usize,
) -> Result<SearchResult, ObstructionError> {
    if budget < 100 {
        return Err(ObstructionError::Budget(budget));
    }
    let n = fam.param_count();
    super::check_points(points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obj = Objective {
        fam,
        points,
        budget,
        evals: 0,
        best: f64::INFINITY,
        best_x: vec![0.0; n],
        trace: Vec::new(),
    };
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let stall = STALL_FACTOR * (n + 1);
    let mut refresh: Option<(Vec<f64>, f64, f64)> = None;
    'restart: while !obj.exhausted() {
        let (x0, f0, step) = match refresh.take() {
            Some(r) => r,
            None => {
                let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-RESTART_RANGE..=RESTART_RANGE)).collect();
                if obj.exhausted() {
                    break;
                }
                let f0 = obj.eval(&x0);
                (x0, f0, INITIAL_STEP)
            }
        };
        let start_value = f0;
        let mut simplex = vec![x0.clone()];
        let mut values = vec![f0];
        for k in 0..n {
            if obj.exhausted() {
                break 'restart;
            }
            let mut x = x0.clone();
            x[k] += step;
            values.push(obj.eval(&x));
            simplex.push(x);
        }
        let mut mark = (obj.evals, values.iter().copied().fold(f64::INFINITY, f64::min));
        let mut sum = vec![0.0; n];
        for x in &simplex {
            for (s, v) in sum.iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut iter = 0usize;
        loop {
            // best, worst and second worst by value, ties broken by index
            let (mut lo, mut hi) = (0, 0);
            for k in 1..=n {
                if values[k] < values[lo] {
                    lo = k;
                }
                if values[k] >= values[hi] {
                    hi = k;
                }
            }
            let mut nh = if hi == 0 { 1 } else { 0 };
            for k in 0..=n {
                if k != hi && values[k] >= values[nh] {
                    nh = k;
                }
            }
            iter += 1;
            if iter.is_multiple_of(16) {
                let diam = simplex
                    .iter()
                    .map(|x| x.iter().zip(&simplex[lo]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                    .fold(0.0, f64::max);
                if diam < RESTART_DIAMETER {
                    continue 'restart;
                }
                if values[lo] < mark.1 * (1.0 - STALL_GAIN) {
                    mark = (obj.evals, values[lo]);
                } else if obj.evals - mark.0 > stall {
                    // stalled without collapsing: rebuild the simplex around the best
                    // vertex, or start afresh when the previous rebuild gained nothing
                    if values[lo] < start_value * (1.0 - STALL_GAIN) {
                        refresh = Some((simplex[lo].clone(), values[lo], diam.clamp(REFRESH_MIN, INITIAL_STEP)));
                    }
                    continue 'restart;
                }
            }
            let centroid: Vec<f64> = sum.iter().zip(&simplex[hi]).map(|(s, w)| (s - w) / nf).collect();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[hi]).map(|(c, w)| c + t * (c - w)).collect()
            };
            if obj.exhausted() {
                break 'restart;
            }
            let xr = along(alpha);
            let fr = obj.eval(&xr);
            let (mut new_x, mut new_f) = (None, 0.0);
            if fr < values[lo] {
                if obj.exhausted() {
                    break 'restart;
                }
                let xe = along(alpha * beta);
                let fe = obj.eval(&xe);
                if fe < fr {
                    new_x = Some(xe);
                    new_f = fe;
                } else {
                    new_x = Some(xr);
                    new_f = fr;
                }
            } else if fr < values[nh] {
                new_x = Some(xr);
                new_f = fr;
            } else {
                if obj.exhausted() {
                    break 'restart;
                }
                let (xc, fc, accept) = if fr < values[hi] {
                    let xc = along(alpha * gamma);
                    let fc = obj.eval(&xc);
                    let ok = fc <= fr;
                    (xc, fc, ok)
                } else {
                    let xc = along(-gamma);
                    let fc = obj.eval(&xc);
                    let ok = fc < values[hi];
                    (xc, fc, ok)
                };
                if accept {
                    new_x = Some(xc);
                    new_f = fc;
                }
            }
            match new_x {
                Some(x) => {
                    for ((s, a), b) in sum.iter_mut().zip(&x).zip(&simplex[hi]) {
                        *s += a - b;
                    }
                    simplex[hi] = x;
                    values[hi] = new_f;
                }
                None => {
                    // shrink towards the best vertex
                    let best = simplex[lo].clone();
                    for k in 0..=n {
                        if k == lo {
                            continue;
                        }
                        if obj.exhausted() {
                            break 'restart;
                        }
                        for (v, b) in simplex[k].iter_mut().zip(&best) {
                            *v = b + delta * (*v - b);
                        }
                        values[k] = obj.eval(&simplex[k]);
                    }
                    sum = vec![0.0; n];
                    for x in &simplex {
                        for (s, v) in sum.iter_mut().zip(x) {
                            *s += v;
                        }
                    }
                }
            }
        }
    }
    Ok(SearchResult {
        best_params: obj.best_x,
        best_residual: obj.best,
        trace: obj.trace,
        seed,
        evaluations: obj.evals,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub dim: usize,
    pub seed: u64,
    pub best_residual: f64,
    pub evaluations: usize,
    /// Wall time in milliseconds, only when timings were requested.
    pub wall_ms: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ExperimentVerdict {
    Consistent,
    Inconclusive,
}

impl ExperimentVerdict {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentVerdict::Consistent => "CONSISTENT",
            ExperimentVerdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// The empirical dimension-5 floor threshold. It is derived from the
/// dimension-3 runs, not from any theoretical bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub kind: &'static str,
    /// Ten times the largest dimension-3 terminal residual.
    pub threshold: f64,
    pub dim3_floor: f64,
    pub dim5_floor: f64,
    /// Every dimension-5 seed stays at or above the threshold.
    pub dim5_above_threshold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub budget: usize,
    pub sample_seed: u64,
    pub rows: Vec<ExperimentRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<ExperimentVerdict>,
}

/// Runs every `(dim, seed)` cell. Rows are ordered by `(dim, seed)`; the
/// verdict needs both dimensions. CONSISTENT means the smallest
/// dimension-5 residual is at least a thousand times the smallest
/// dimension-3 residual.
pub fn experiment(
    dims: &[usize],
    seeds: &[u64],
    budget: usize,
    timings: bool,
) -> Result<ExperimentReport, ObstructionError> {
    let mut dims = dims.to_vec();
    dims.sort_unstable();
    dims.dedup();
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let fams = dims.iter().map(|&d| CandidateFamily::new(d)).collect::<Result<Vec<_>, _>>()?;
    if budget < 100 {
        return Err(ObstructionError::Budget(budget));
    }
    let cells: Vec<(usize, u64)> =
        (0..fams.len()).flat_map(|f| seeds.iter().map(move |&s| (f, s))).collect();
    let rows = cells
        .par_iter()
        .map(|&(f, seed)| {
            let fam = &fams[f];
            let pts = sample_points(fam.dim());
            let start = Instant::now();
            let r = minimize(fam, &pts, seed, budget)?;
            Ok(ExperimentRow {
                dim: fam.dim(),
                seed,
                best_residual: r.best_residual,
                evaluations: r.evaluations,
                wall_ms: timings.then(|| start.elapsed().as_secs_f64() * 1e3),
            })
        })
        .collect::<Result<Vec<_>, ObstructionError>>()?;
    let (calibration, verdict) = summarize(&rows);
    Ok(ExperimentReport { budget, sample_seed: SAMPLE_SEED, rows, calibration, verdict })
}

/// Calibration and verdict of a finished table; both need dimensions 3 and 5.
pub(crate) fn summarize(rows: &[ExperimentRow]) -> (Option<Calibration>, Option<ExperimentVerdict>) {
    let floor = |d: usize, pick: fn(f64, f64) -> f64| {
        rows.iter().filter(|r| r.dim == d).map(|r| r.best_residual).reduce(pick)
    };
    match (floor(3, f64::min), floor(3, f64::max), floor(5, f64::min)) {
        (Some(d3), Some(d3_max), Some(d5)) => {
            let threshold = 10.0 * d3_max;
            let cal = Calibration {
                kind: "calibrated",
                threshold,
                dim3_floor: d3,
                dim5_floor: d5,
                dim5_above_threshold: d5 >= threshold,
            };
            let consistent = d5 > 0.0 && d5 >= ORDERS_OF_MAGNITUDE * d3;
            let v = if consistent { ExperimentVerdict::Consistent } else { ExperimentVerdict::Inconclusive };
            (Some(cal), Some(v))
        }
        _ => (None, None),
    }
}
