//! Experiment harness: synthetic matrices with prescribed spectra, single
//! trials, deterministic sweeps, and CSV emission.
//!
//! A trial synthesizes A = U diag(sigma) V^T from random orthonormal factors,
//! runs the randomized iteration, and compares the measured residual against
//! (1+eps) sigma_{k+1}. The sketch G always comes from (seed, stream); the
//! synthesis factors come from a far-offset substream of the same seed, so a
//! trial is a pure function of its configuration.

use crate::error::{Error, Result};
use crate::matrix::{fmt_f64, Matrix};
use crate::norms::spectral_norm_seeded;
use crate::rng::{gaussian_matrix, random_orthonormal, RngStream};
use crate::subspace::{approximate_topk, choose_t, IterationConfig};
use crate::svd::jacobi_svd;
use crate::tracer::{min_t_for_bound, split_blocks, trace};
use rayon::prelude::*;
use std::io::Write;

/// Stream offset separating matrix-synthesis draws from the sketch draw of
/// the same (seed, stream) pair.
const MATRIX_STREAM_OFFSET: u64 = 1 << 32;

/// Residual at or below `EXACT_CAPTURE_TOL * sigma_1` counts as success when
/// sigma_{k+1} = 0 (the bound degenerates to zero).
const EXACT_CAPTURE_TOL: f64 = 1e-8;

/// Multiplicative slack on the bound check, absorbing the power-method
/// measurement tolerance.
const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumSpec {
    Flat {
        value: f64,
        length: usize,
    },
    /// `high` for the first `position` values, `low` afterwards.
    Step {
        position: usize,
        high: f64,
        low: f64,
        length: usize,
    },
    Geometric {
        first: f64,
        ratio: f64,
        length: usize,
    },
    /// `head` above the knee, the knee value at positions k and k+1 (bitwise
    /// equal, so sigma_k = sigma_{k+1} exactly), geometric decay below.
    ZeroGapAtK {
        k: usize,
        head: f64,
        knee: f64,
        tail_ratio: f64,
        length: usize,
    },
    Custom {
        values: Vec<f64>,
    },
}

impl SpectrumSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SpectrumSpec::Flat { .. } => "flat",
            SpectrumSpec::Step { .. } => "step",
            SpectrumSpec::Geometric { .. } => "geometric",
            SpectrumSpec::ZeroGapAtK { .. } => "zero-gap-at-k",
            SpectrumSpec::Custom { .. } => "custom",
        }
    }
}

/// Realizes a spectrum spec as a descending non-negative vector.
pub fn make_spectrum(spec: &SpectrumSpec) -> Result<Vec<f64>> {
    let sigma = match spec {
        SpectrumSpec::Flat { value, length } => {
            require(*value >= 0.0, "flat value must be >= 0")?;
            require(*length >= 1, "spectrum length must be >= 1")?;
            vec![*value; *length]
        }
        SpectrumSpec::Step {
            position,
            high,
            low,
            length,
        } => {
            require(*length >= 1, "spectrum length must be >= 1")?;
            require(*position <= *length, "step position exceeds length")?;
            require(*high >= *low && *low >= 0.0, "step needs high >= low >= 0")?;
            let mut v = vec![*low; *length];
            for x in v.iter_mut().take(*position) {
                *x = *high;
            }
            v
        }
        SpectrumSpec::Geometric {
            first,
            ratio,
            length,
        } => {
            require(*length >= 1, "spectrum length must be >= 1")?;
            require(*first >= 0.0, "geometric first value must be >= 0")?;
            require(
                *ratio > 0.0 && *ratio <= 1.0,
                "geometric ratio must lie in (0 1]",
            )?;
            let mut v = Vec::with_capacity(*length);
            let mut x = *first;
            for _ in 0..*length {
                v.push(x);
                x *= ratio;
            }
            v
        }
        SpectrumSpec::ZeroGapAtK {
            k,
            head,
            knee,
            tail_ratio,
            length,
        } => {
            require(*k >= 1, "zero-gap k must be >= 1")?;
            require(*length >= k + 1, "zero-gap needs length >= k+1")?;
            require(*head >= *knee && *knee >= 0.0, "zero-gap needs head >= knee >= 0")?;
            require(
                *tail_ratio > 0.0 && *tail_ratio <= 1.0,
                "zero-gap tail ratio must lie in (0 1]",
            )?;
            let mut v = Vec::with_capacity(*length);
            let mut tail = *knee;
            for i in 1..=*length {
                if i < *k {
                    v.push(*head);
                } else if i <= *k + 1 {
                    v.push(*knee);
                } else {
                    tail *= tail_ratio;
                    v.push(tail);
                }
            }
            v
        }
        SpectrumSpec::Custom { values } => {
            require(!values.is_empty(), "custom spectrum must be non-empty")?;
            require(
                values.iter().all(|&v| v >= 0.0),
                "custom spectrum must be non-negative",
            )?;
            require(
                values.windows(2).all(|w| w[0] >= w[1]),
                "custom spectrum must be non-increasing",
            )?;
            values.clone()
        }
    };
    debug_assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
    Ok(sigma)
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(msg.to_string()))
    }
}

/// Parses a CLI spectrum string. Formats:
/// `flat:VALUE`, `step:POSITION:HIGH:LOW`, `geometric:FIRST:RATIO`,
/// `zero-gap:HEAD:KNEE:TAIL_RATIO` (knee position taken from `k`),
/// `custom:V1,V2,...`. `length` is the realized spectrum length.
pub fn parse_spectrum(text: &str, length: usize, k: usize) -> Result<SpectrumSpec> {
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("spectrum '{}' needs kind:params", text)))?;
    let floats = |s: &str, n: usize| -> Result<Vec<f64>> {
        let vals: Vec<f64> = s
            .split(':')
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number '{}' in spectrum", t)))
            })
            .collect::<Result<_>>()?;
        if vals.len() != n {
            return Err(Error::Parse(format!(
                "spectrum kind '{}' needs {} parameters",
                kind, n
            )));
        }
        Ok(vals)
    };
    match kind {
        "flat" => {
            let p = floats(rest, 1)?;
            Ok(SpectrumSpec::Flat {
                value: p[0],
                length,
            })
        }
        "step" => {
            let p = floats(rest, 3)?;
            Ok(SpectrumSpec::Step {
                position: p[0] as usize,
                high: p[1],
                low: p[2],
                length,
            })
        }
        "geometric" => {
            let p = floats(rest, 2)?;
            Ok(SpectrumSpec::Geometric {
                first: p[0],
                ratio: p[1],
                length,
            })
        }
        "zero-gap" => {
            let p = floats(rest, 3)?;
            Ok(SpectrumSpec::ZeroGapAtK {
                k,
                head: p[0],
                knee: p[1],
                tail_ratio: p[2],
                length,
            })
        }
        "custom" => {
            let values: Vec<f64> = rest
                .split(',')
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number '{}' in spectrum", t)))
                })
                .collect::<Result<_>>()?;
            Ok(SpectrumSpec::Custom { values })
        }
        other => Err(Error::Parse(format!("unknown spectrum kind '{}'", other))),
    }
}

/// The stream used for matrix synthesis by `run_trial`, exposed so `gen`
/// can reproduce the exact same matrix.
pub fn synthesis_rng(seed: u64, stream: u64) -> RngStream {
    RngStream::new(seed, stream.wrapping_add(MATRIX_STREAM_OFFSET))
}

/// A = U diag(sigma) V^T with Haar-ish orthonormal U (n x r) and V (m x r),
/// r = len(sigma), returned together with the factors.
pub fn synthesize_with_factors(
    sigma: &[f64],
    n: usize,
    m: usize,
    rng: &mut RngStream,
) -> Result<(Matrix, Matrix, Matrix)> {
    let r = sigma.len();
    if r > n.min(m) {
        return Err(Error::invalid(format!(
            "spectrum length {} exceeds min({} {})",
            r, n, m
        )));
    }
    require(r >= 1, "spectrum must be non-empty")?;
    require(
        sigma.windows(2).all(|w| w[0] >= w[1]) && sigma.iter().all(|&s| s >= 0.0),
        "spectrum must be descending and non-negative",
    )?;
    let u = random_orthonormal(n, r, rng)?;
    let v = random_orthonormal(m, r, rng)?;
    let a = u.scale_columns(sigma)?.matmul(&v.transpose())?;
    Ok((a, u, v))
}

pub fn synthesize_matrix(sigma: &[f64], n: usize, m: usize, rng: &mut RngStream) -> Result<Matrix> {
    synthesize_with_factors(sigma, n, m, rng).map(|(a, _, _)| a)
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub epsilon: f64,
    pub c: f64,
    pub t_override: Option<usize>,
    pub reorth_period: usize,
    pub seed: u64,
    pub stream: u64,
    pub spectrum: SpectrumSpec,
    pub with_trace: bool,
    pub exact_residual: bool,
}

/// One CSV row: a trial's inputs and every measured output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub epsilon: f64,
    pub c: f64,
    pub t: usize,
    pub seed: u64,
    pub stream: u64,
    pub spectrum_kind: String,
    pub sigma_kplus1: f64,
    pub residual: Option<f64>,
    /// residual / sigma_{k+1}, or the raw residual when sigma_{k+1} = 0.
    pub ratio: Option<f64>,
    pub bound_ok: bool,
    pub kprime: Option<usize>,
    pub g2_norm: Option<f64>,
    pub g1_inv_norm: Option<f64>,
    pub min_t: Option<f64>,
    pub worst_margin: Option<f64>,
    pub tail: Option<f64>,
    pub tail_limit: Option<f64>,
    pub status: String,
}

pub const CSV_HEADER: &str = "n,m,k,epsilon,c,t,seed,stream,spectrum,sigma_kp1,residual,ratio,bound_ok,kprime,g2_norm,g1_inv_norm,min_t,worst_margin,tail,tail_limit,status";

impl ExperimentRecord {
    pub fn csv_row(&self) -> String {
        let opt_f = |v: &Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let opt_u = |v: &Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.n.to_string(),
            self.m.to_string(),
            self.k.to_string(),
            fmt_f64(self.epsilon),
            fmt_f64(self.c),
            self.t.to_string(),
            self.seed.to_string(),
            self.stream.to_string(),
            self.spectrum_kind.clone(),
            fmt_f64(self.sigma_kplus1),
            opt_f(&self.residual),
            opt_f(&self.ratio),
            self.bound_ok.to_string(),
            opt_u(&self.kprime),
            opt_f(&self.g2_norm),
            opt_f(&self.g1_inv_norm),
            opt_f(&self.min_t),
            opt_f(&self.worst_margin),
            opt_f(&self.tail),
            opt_f(&self.tail_limit),
            self.status.replace(',', ";"),
        ]
        .join(",")
    }
}

/// Runs one synthesized trial. Never panics on numeric failure: errors land
/// in the record's status column so a sweep can continue.
pub fn run_trial(cfg: &TrialConfig) -> ExperimentRecord {
    let t_planned = cfg
        .t_override
        .unwrap_or_else(|| choose_t(cfg.n, cfg.epsilon, cfg.c));
    let mut record = ExperimentRecord {
        n: cfg.n,
        m: cfg.m,
        k: cfg.k,
        epsilon: cfg.epsilon,
        c: cfg.c,
        t: t_planned,
        seed: cfg.seed,
        stream: cfg.stream,
        spectrum_kind: cfg.spectrum.kind_name().to_string(),
        sigma_kplus1: 0.0,
        residual: None,
        ratio: None,
        bound_ok: false,
        kprime: None,
        g2_norm: None,
        g1_inv_norm: None,
        min_t: None,
        worst_margin: None,
        tail: None,
        tail_limit: None,
        status: "ok".to_string(),
    };
    if let Err(e) = run_trial_inner(cfg, &mut record) {
        record.status = e.to_string();
    }
    record
}

fn run_trial_inner(cfg: &TrialConfig, record: &mut ExperimentRecord) -> Result<()> {
    let sigma = make_spectrum(&cfg.spectrum)?;
    let mut mrng = synthesis_rng(cfg.seed, cfg.stream);
    let (a, _u, v) = synthesize_with_factors(&sigma, cfg.n, cfg.m, &mut mrng)?;
    measure_trial(cfg, &a, &sigma, Some(&v), record)
}

/// Trial on an externally supplied matrix; ground truth comes from the Jacobi
/// oracle (desk scale only).
pub fn run_trial_on_matrix(cfg: &TrialConfig, a: &Matrix) -> ExperimentRecord {
    let t_planned = cfg
        .t_override
        .unwrap_or_else(|| choose_t(a.rows(), cfg.epsilon, cfg.c));
    let mut record = ExperimentRecord {
        n: a.rows(),
        m: a.cols(),
        k: cfg.k,
        epsilon: cfg.epsilon,
        c: cfg.c,
        t: t_planned,
        seed: cfg.seed,
        stream: cfg.stream,
        spectrum_kind: "file".to_string(),
        sigma_kplus1: 0.0,
        residual: None,
        ratio: None,
        bound_ok: false,
        kprime: None,
        g2_norm: None,
        g1_inv_norm: None,
        min_t: None,
        worst_margin: None,
        tail: None,
        tail_limit: None,
        status: "ok".to_string(),
    };
    let outcome = (|| -> Result<()> {
        let svd = jacobi_svd(a)?;
        measure_trial(cfg, a, &svd.sigma, Some(&svd.v), &mut record)
    })();
    if let Err(e) = outcome {
        record.status = e.to_string();
    }
    record
}

fn measure_trial(
    cfg: &TrialConfig,
    a: &Matrix,
    sigma_truth: &[f64],
    v: Option<&Matrix>,
    record: &mut ExperimentRecord,
) -> Result<()> {
    let icfg = IterationConfig {
        k: cfg.k,
        epsilon: cfg.epsilon,
        c: cfg.c,
        t_override: Some(record.t),
        reorth_period: cfg.reorth_period,
        seed: cfg.seed,
        stream_index: cfg.stream,
    };
    let approx = approximate_topk(a, &icfg)?;
    let mut residual = approx.residual;
    if cfg.exact_residual {
        let zta = approx.z.transpose().matmul(a)?;
        let b = a.sub(&approx.z.matmul(&zta)?)?;
        residual = jacobi_svd(&b)?.sigma[0];
    }
    let sigma1 = sigma_truth.first().copied().unwrap_or(0.0);
    let sigma_kplus1 = if cfg.k < sigma_truth.len() {
        sigma_truth[cfg.k]
    } else {
        0.0
    };
    record.sigma_kplus1 = sigma_kplus1;
    record.residual = Some(residual);
    if sigma_kplus1 > 0.0 {
        record.ratio = Some(residual / sigma_kplus1);
        record.bound_ok = residual <= (1.0 + cfg.epsilon) * sigma_kplus1 * (1.0 + BOUND_SLACK);
    } else {
        record.ratio = Some(residual);
        record.bound_ok = residual <= EXACT_CAPTURE_TOL * sigma1;
    }

    // Cheap sketch-block diagnostics from the known right factor; the full
    // tracer recomputes these against the oracle when requested.
    if let Some(v) = v {
        let mut srng = RngStream::new(cfg.seed, cfg.stream);
        let g = gaussian_matrix(a.cols(), cfg.k, &mut srng);
        let g_rot = v.transpose().matmul(&g)?;
        if g_rot.rows() >= cfg.k {
            let (g1, g2) = split_blocks(&g_rot, cfg.k)?;
            match crate::svd::min_singular_value(&g1) {
                Ok(smin) if smin >= 1e-300 => {
                    let g2n = if g2.rows() == 0 {
                        0.0
                    } else {
                        spectral_norm_seeded(&g2, 1e-10, 50_000, 0)?
                    };
                    record.g2_norm = Some(g2n);
                    record.g1_inv_norm = Some(1.0 / smin);
                    record.min_t = Some(min_t_for_bound(g2n, 1.0 / smin, cfg.k, cfg.epsilon));
                }
                Ok(smin) => {
                    record.status = format!("ok; singular sketch block (sigma_min = {:e})", smin);
                }
                Err(e) => {
                    record.status = format!("ok; sketch diagnostics failed: {}", e);
                }
            }
        }
    }

    if cfg.with_trace {
        let report = trace(a, &icfg)?;
        record.kprime = report.kprime;
        record.g2_norm = Some(report.g2_norm);
        record.g1_inv_norm = Some(report.g1_inv_norm);
        record.min_t = Some(report.min_t);
        record.worst_margin = report.worst_margin();
        record.tail = Some(report.tail_sum);
        record.tail_limit = Some(report.tail_limit);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub c: f64,
    pub epsilons: Vec<f64>,
    /// Each multiplier scales the scheduled t; the result is clamped to >= 1.
    pub t_multipliers: Vec<f64>,
    pub spectra: Vec<SpectrumSpec>,
    /// Number of trials per cell; stream indices 0..seeds.
    pub seeds: u64,
    pub seed: u64,
    pub reorth_period: usize,
    pub with_trace: bool,
    pub exact_residual: bool,
}

#[derive(Debug, Clone)]
pub struct CellSummary {
    pub spectrum_kind: String,
    pub epsilon: f64,
    pub t_multiplier: f64,
    pub t: usize,
    pub trials: usize,
    pub errors: usize,
    /// Mean of (not bound_ok) over all rows of the cell.
    pub failure_fraction: f64,
    pub median_ratio: Option<f64>,
    pub median_block_condition: Option<f64>,
}

/// Runs the full grid (spectra x epsilons x t-multipliers x streams) in
/// parallel. Output order is deterministic: grid order, then stream order,
/// independent of scheduling.
pub fn sweep(cfg: &SweepConfig) -> Result<(Vec<ExperimentRecord>, Vec<CellSummary>)> {
    if cfg.spectra.is_empty() || cfg.epsilons.is_empty() || cfg.t_multipliers.is_empty() || cfg.seeds == 0 {
        return Err(Error::invalid("sweep grid must be non-empty".to_string()));
    }
    let mut cells: Vec<(SpectrumSpec, f64, f64, usize)> = Vec::new();
    for spectrum in &cfg.spectra {
        for &eps in &cfg.epsilons {
            let base_t = choose_t(cfg.n, eps, cfg.c);
            for &mult in &cfg.t_multipliers {
                let t = ((mult * base_t as f64).round() as i64).max(1) as usize;
                cells.push((spectrum.clone(), eps, mult, t));
            }
        }
    }
    let mut trial_cfgs: Vec<(usize, TrialConfig)> = Vec::new();
    for (cell_idx, (spectrum, eps, _mult, t)) in cells.iter().enumerate() {
        for stream in 0..cfg.seeds {
            trial_cfgs.push((
                cell_idx,
                TrialConfig {
                    n: cfg.n,
                    m: cfg.m,
                    k: cfg.k,
                    epsilon: *eps,
                    c: cfg.c,
                    t_override: Some(*t),
                    reorth_period: cfg.reorth_period,
                    seed: cfg.seed,
                    stream,
                    spectrum: spectrum.clone(),
                    with_trace: cfg.with_trace,
                    exact_residual: cfg.exact_residual,
                },
            ));
        }
    }
    let records: Vec<(usize, ExperimentRecord)> = trial_cfgs
        .par_iter()
        .map(|(cell_idx, tc)| (*cell_idx, run_trial(tc)))
        .collect();

    let mut summaries = Vec::with_capacity(cells.len());
    for (cell_idx, (spectrum, eps, mult, t)) in cells.iter().enumerate() {
        let cell_records: Vec<&ExperimentRecord> = records
            .iter()
            .filter(|(c, _)| *c == cell_idx)
            .map(|(_, r)| r)
            .collect();
        let trials = cell_records.len();
        let errors = cell_records
            .iter()
            .filter(|r| !r.status.starts_with("ok"))
            .count();
        let failures = cell_records.iter().filter(|r| !r.bound_ok).count();
        let ratios: Vec<f64> = cell_records.iter().filter_map(|r| r.ratio).collect();
        let conditions: Vec<f64> = cell_records
            .iter()
            .filter_map(|r| match (r.g2_norm, r.g1_inv_norm) {
                (Some(a), Some(b)) => Some(a * b),
                _ => None,
            })
            .collect();
        summaries.push(CellSummary {
            spectrum_kind: spectrum.kind_name().to_string(),
            epsilon: *eps,
            t_multiplier: *mult,
            t: *t,
            trials,
            errors,
            failure_fraction: failures as f64 / trials.max(1) as f64,
            median_ratio: median(ratios),
            median_block_condition: median(conditions),
        });
    }
    Ok((records.into_iter().map(|(_, r)| r).collect(), summaries))
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn write_csv(records: &[ExperimentRecord], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{}", CSV_HEADER)?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn render_summary(summaries: &[CellSummary]) -> String {
    let mut s = String::new();
    s.push_str("cell summary (spectrum epsilon t_mult t trials errors fail_frac median_ratio median_block_cond):\n");
    for c in summaries {
        s.push_str(&format!(
            "  {} eps={} t_mult={} t={} trials={} errors={} fail_frac={:.4} median_ratio={} median_block_cond={}\n",
            c.spectrum_kind,
            c.epsilon,
            c.t_multiplier,
            c.t,
            c.trials,
            c.errors,
            c.failure_fraction,
            c.median_ratio.map(|v| format!("{:.6}", v)).unwrap_or_else(|| "-".into()),
            c.median_block_condition
                .map(|v| format!("{:.6}", v))
                .unwrap_or_else(|| "-".into()),
        ));
    }
    s
}
