//! Experiment drivers: every sweep point is run for a number of
//! independent trials, each trial regenerating its data from a seed
//! derived from the run seed, the experiment and the trial index.
//! Output rows are therefore identical no matter how trials are
//! scheduled across threads.

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::report::{ReportRow, RunOutput, TimingRow, TraceRow};
use crate::CliError;
use bcs_core::bases::{dct_basis, identity_basis, BasisCatalog};
use bcs_core::fbcs::{fbcs_ensemble, RecoveryMode, REL_RESIDUAL_TOL};
use bcs_core::matrix::DenseMatrix;
use bcs_core::obd::{block_orthogonal_dl, obd_bcs, ObdOptions, ObdResult};
use bcs_core::sparse::{omp, omp_batch, SparseVector};
use bcs_core::sparse_bcs::sparse_bcs_direct;
use bcs_core::structured::BlockDiagOrthoBasis;
use bcs_core::synth::{
    add_noise_snr, derive_seed, gen_block_diag_basis, gen_gaussian_matrix, gen_sparse_matrix,
    gen_union_ortho, recon_error, seeded_rng, BlockBasisKind, SupportSize,
};
use bcs_core::Error;
use rayon::prelude::*;
use std::time::Instant;

#[derive(Debug, Clone, Copy)]
struct Point {
    snr: f64,
    k: usize,
    signals: usize,
}

#[derive(Debug, Default)]
struct TrialOut {
    rows: Vec<ReportRow>,
    timings: Vec<TimingRow>,
    traces: Vec<TraceRow>,
}

fn sweep_points(cfg: &ExperimentConfig) -> Vec<Point> {
    let mut points = Vec::new();
    for &k in &cfg.k_list {
        for &signals in &cfg.signals_list {
            for &snr in &cfg.snr_list {
                points.push(Point { snr, k, signals });
            }
        }
    }
    points
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::ConfigInvalid(format!("cannot build a {}-thread pool: {e}", cfg.jobs)))?;
    let points = sweep_points(cfg);
    let mut jobs = Vec::with_capacity(points.len() * cfg.trials);
    for (pi, point) in points.iter().enumerate() {
        for trial in 0..cfg.trials {
            jobs.push((pi, *point, trial));
        }
    }
    let outcomes: Vec<Result<TrialOut, Error>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(pi, point, trial)| {
                let seed = derive_seed(
                    cfg.seed,
                    (cfg.experiment.stream_id() << 32) | pi as u64,
                    trial as u64,
                );
                run_trial(cfg, point, trial, seed)
            })
            .collect()
    });
    let mut run = RunOutput::default();
    for outcome in outcomes {
        let out = outcome.map_err(CliError::Solver)?;
        run.rows.extend(out.rows);
        run.timings.extend(out.timings);
        run.traces.extend(out.traces);
    }
    Ok(run)
}

fn run_trial(
    cfg: &ExperimentConfig,
    point: Point,
    trial: usize,
    seed: u64,
) -> Result<TrialOut, Error> {
    use ExperimentKind::*;
    match cfg.experiment {
        FbcsNoise | FbcsKsweep => trial_fbcs(cfg, point, trial, seed),
        SparseKsweep | SparseNoise => trial_sparse(cfg, point, trial, seed),
        ObdNsweep | ObdKsweep | ObdNoise => trial_obd(cfg, point, trial, seed),
        Comparative => trial_comparative(cfg, point, trial, seed),
    }
}

fn row(
    cfg: &ExperimentConfig,
    point: Point,
    trial: usize,
    method: &'static str,
    mean_error_pct: f64,
    miss_detected_pct: f64,
    iterations: usize,
) -> ReportRow {
    ReportRow {
        experiment: cfg.experiment.name(),
        trial,
        snr_db: point.snr,
        k: point.k,
        signals: point.signals,
        method,
        mean_error_pct,
        miss_detected_pct,
        iterations,
    }
}

fn timing(point: Point, trial: usize, method: &'static str, seconds: f64) -> TimingRow {
    TimingRow {
        trial,
        snr_db: point.snr,
        k: point.k,
        signals: point.signals,
        method,
        seconds,
    }
}

/// Plurality recovery over the standard catalog with a planted
/// Biorthogonal-2.2 basis, against a pursuit that knows the basis.
fn trial_fbcs(
    cfg: &ExperimentConfig,
    point: Point,
    trial: usize,
    seed: u64,
) -> Result<TrialOut, Error> {
    let mut rng = seeded_rng(seed);
    let catalog = BasisCatalog::standard(cfg.m)?;
    let planted = catalog
        .position("bior2.2")
        .expect("standard catalog plants bior2.2");
    let p = catalog.basis(planted);
    let a = gen_gaussian_matrix(cfg.n, cfg.m, &mut rng)?;
    let s = gen_sparse_matrix(cfg.m, point.signals, SupportSize::UpTo(point.k), &mut rng)?;
    let x = s.left_mul(p);
    let b = add_noise_snr(&a.matmul(&x), point.snr, &mut rng)?;
    let mode = if point.snr == f64::INFINITY {
        RecoveryMode::SparsestFirst
    } else {
        RecoveryMode::MinResidual
    };

    let t0 = Instant::now();
    let blind = fbcs_ensemble(&a, &catalog, &b, point.k, mode)?;
    let blind_secs = t0.elapsed().as_secs_f64();
    let err = recon_error(&x, &blind.x_hat)?;
    let correct: Vec<usize> = blind
        .per_signal
        .iter()
        .enumerate()
        .filter(|(_, v)| v.basis_vote == planted)
        .map(|(j, _)| j)
        .collect();
    let miss_pct = 100.0 * (point.signals - correct.len()) as f64 / point.signals as f64;
    // a signal voting for the wrong basis is counted as missed, not as
    // a reconstruction error
    let blind_err_pct = if correct.is_empty() {
        100.0
    } else {
        100.0 * correct.iter().map(|&j| err.per_column[j]).sum::<f64>() / correct.len() as f64
    };

    let t0 = Instant::now();
    let oracle = omp_batch(&a.matmul(p), &b, point.k, 0.0)?;
    let oracle_secs = t0.elapsed().as_secs_f64();
    let oracle_err_pct = 100.0 * recon_error(&x, &oracle.coeffs.left_mul(p))?.mean;

    Ok(TrialOut {
        rows: vec![
            row(cfg, point, trial, "fbcs", blind_err_pct, miss_pct, 0),
            row(cfg, point, trial, "oracle-cs", oracle_err_pct, 0.0, 0),
        ],
        timings: vec![
            timing(point, trial, "fbcs", blind_secs),
            timing(point, trial, "oracle-cs", oracle_secs),
        ],
        traces: Vec::new(),
    })
}

/// Recovery under a basis that is itself sparse over the DCT, against a
/// pursuit that knows the composed basis.
fn trial_sparse(
    cfg: &ExperimentConfig,
    point: Point,
    trial: usize,
    seed: u64,
) -> Result<TrialOut, Error> {
    let mut rng = seeded_rng(seed);
    let phi = dct_basis(cfg.m)?;
    let a = gen_gaussian_matrix(cfg.n, cfg.m, &mut rng)?;
    let z = gen_sparse_matrix(cfg.m, cfg.m, SupportSize::UpTo(cfg.k_p), &mut rng)?;
    let p = z.left_mul(&phi);
    let s = gen_sparse_matrix(cfg.m, point.signals, SupportSize::Exactly(point.k), &mut rng)?;
    let x = s.left_mul(&p);
    let b = add_noise_snr(&a.matmul(&x), point.snr, &mut rng)?;

    let t0 = Instant::now();
    let blind = sparse_bcs_direct(&a, &phi, &b, point.k, cfg.k_p)?;
    let blind_secs = t0.elapsed().as_secs_f64();
    let blind_err_pct = 100.0 * recon_error(&x, &blind.x_hat)?.mean;

    let t0 = Instant::now();
    let oracle = omp_batch(&a.matmul(&p), &b, point.k, 0.0)?;
    let oracle_secs = t0.elapsed().as_secs_f64();
    let oracle_err_pct = 100.0 * recon_error(&x, &oracle.coeffs.left_mul(&p))?.mean;

    Ok(TrialOut {
        rows: vec![
            row(cfg, point, trial, "sparse-bcs", blind_err_pct, 0.0, 0),
            row(cfg, point, trial, "oracle-cs", oracle_err_pct, 0.0, 0),
        ],
        timings: vec![
            timing(point, trial, "sparse-bcs", blind_secs),
            timing(point, trial, "oracle-cs", oracle_secs),
        ],
        traces: Vec::new(),
    })
}

fn obd_trace_rows(point: Point, trial: usize, res: &ObdResult) -> Vec<TraceRow> {
    res.trace
        .iter()
        .map(|it| TraceRow {
            trial,
            snr_db: point.snr,
            k: point.k,
            signals: point.signals,
            iteration: it.iteration,
            coding_objective: it.objective_after_coding,
            update_objective: it.objective_after_update,
        })
        .collect()
}

/// Alternating basis learning on a union of two orthogonal bases,
/// against a pursuit that knows the planted block basis.
fn trial_obd(
    cfg: &ExperimentConfig,
    point: Point,
    trial: usize,
    seed: u64,
) -> Result<TrialOut, Error> {
    let mut rng = seeded_rng(seed);
    let a = gen_union_ortho(cfg.n, cfg.l, &mut rng)?;
    let p = gen_block_diag_basis(cfg.n, cfg.l, BlockBasisKind::Random, &mut rng)?;
    let s = gen_sparse_matrix(cfg.m, point.signals, SupportSize::Exactly(point.k), &mut rng)?;
    let x = p.mul_ksparse(&s);
    let a_dense = a.to_dense();
    let b = add_noise_snr(&a_dense.matmul(&x), point.snr, &mut rng)?;
    let init = BlockDiagOrthoBasis::identity(cfg.n, cfg.l)?;

    let t0 = Instant::now();
    let blind = obd_bcs(&a, &b, point.k, &init, &ObdOptions::default())?;
    let blind_secs = t0.elapsed().as_secs_f64();
    let blind_err_pct = 100.0 * recon_error(&x, &blind.x_hat)?.mean;

    let p_dense = p.to_dense();
    let t0 = Instant::now();
    let oracle = omp_batch(&a_dense.matmul(&p_dense), &b, point.k, 0.0)?;
    let oracle_secs = t0.elapsed().as_secs_f64();
    let oracle_err_pct = 100.0 * recon_error(&x, &oracle.coeffs.left_mul(&p_dense))?.mean;

    Ok(TrialOut {
        rows: vec![
            row(cfg, point, trial, "obd-bcs", blind_err_pct, 0.0, blind.trace.len()),
            row(cfg, point, trial, "oracle-cs", oracle_err_pct, 0.0, 0),
        ],
        timings: vec![
            timing(point, trial, "obd-bcs", blind_secs),
            timing(point, trial, "oracle-cs", oracle_secs),
        ],
        traces: obd_trace_rows(point, trial, &blind),
    })
}

/// All approaches on one dataset: a tiled-rotation basis measured
/// through a union of two orthogonal bases, with a disjoint training
/// set for the learned-basis baseline.
fn trial_comparative(
    cfg: &ExperimentConfig,
    point: Point,
    trial: usize,
    seed: u64,
) -> Result<TrialOut, Error> {
    let mut rng = seeded_rng(seed);
    let a = gen_union_ortho(cfg.n, cfg.l, &mut rng)?;
    let p = gen_block_diag_basis(cfg.n, cfg.l, BlockBasisKind::TiledRotation, &mut rng)?;
    let s_eval = gen_sparse_matrix(cfg.m, point.signals, SupportSize::Exactly(point.k), &mut rng)?;
    let x_eval = p.mul_ksparse(&s_eval);
    let s_train = gen_sparse_matrix(cfg.m, point.signals, SupportSize::Exactly(point.k), &mut rng)?;
    let x_train = p.mul_ksparse(&s_train);
    let a_dense = a.to_dense();
    let b = add_noise_snr(&a_dense.matmul(&x_eval), point.snr, &mut rng)?;
    let p_dense = p.to_dense();

    let mut rows = Vec::new();
    let mut timings = Vec::new();

    let t0 = Instant::now();
    let oracle = omp_batch(&a_dense.matmul(&p_dense), &b, point.k, 0.0)?;
    let err = 100.0 * recon_error(&x_eval, &oracle.coeffs.left_mul(&p_dense))?.mean;
    timings.push(timing(point, trial, "oracle-cs", t0.elapsed().as_secs_f64()));
    rows.push(row(cfg, point, trial, "oracle-cs", err, 0.0, 0));

    // learn the basis from clean training signals, then run the
    // pursuit with the learned basis
    let t0 = Instant::now();
    let dl = block_orthogonal_dl(&x_train, cfg.n, cfg.l, point.k, 500, 1e-12)?;
    let learned = dl.basis.to_dense();
    let cs = omp_batch(&a_dense.matmul(&learned), &b, point.k, 0.0)?;
    let err = 100.0 * recon_error(&x_eval, &cs.coeffs.left_mul(&learned))?.mean;
    timings.push(timing(point, trial, "cs-learned", t0.elapsed().as_secs_f64()));
    rows.push(row(cfg, point, trial, "cs-learned", err, 0.0, dl.objective_trace.len()));

    let t0 = Instant::now();
    let init = BlockDiagOrthoBasis::identity(cfg.n, cfg.l)?;
    let obd = obd_bcs(&a, &b, point.k, &init, &ObdOptions::default())?;
    let err = 100.0 * recon_error(&x_eval, &obd.x_hat)?.mean;
    timings.push(timing(point, trial, "obd-bcs", t0.elapsed().as_secs_f64()));
    rows.push(row(cfg, point, trial, "obd-bcs", err, 0.0, obd.trace.len()));

    let t0 = Instant::now();
    let blind = sparse_bcs_direct(&a_dense, &identity_basis(cfg.m)?, &b, point.k, cfg.k_p)?;
    let err = 100.0 * recon_error(&x_eval, &blind.x_hat)?.mean;
    timings.push(timing(point, trial, "sparse-bcs", t0.elapsed().as_secs_f64()));
    rows.push(row(cfg, point, trial, "sparse-bcs", err, 0.0, 0));

    // the planted basis is not in the catalog, so every signal settles
    // on whichever catalog basis fits it best at twice the sparsity;
    // signals voting off the plurality keep their own reconstruction
    let t0 = Instant::now();
    let catalog = BasisCatalog::standard(cfg.m)?;
    let dicts: Vec<DenseMatrix> = catalog.iter().map(|(_, p)| a_dense.matmul(p)).collect();
    let mut votes = vec![0usize; catalog.len()];
    let mut x_fb = DenseMatrix::zeros(cfg.m, point.signals);
    for j in 0..point.signals {
        let col = b.col_slice(j);
        let tol = REL_RESIDUAL_TOL * col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut best: Option<(f64, usize, SparseVector)> = None;
        for (bi, d) in dicts.iter().enumerate() {
            let out = omp(d, col, 2 * point.k, tol)?;
            if best.as_ref().is_none_or(|(r, _, _)| out.residual_norm < *r) {
                best = Some((out.residual_norm, bi, out.coeffs));
            }
        }
        let (_, bi, coeffs) = best.expect("catalog is not empty");
        votes[bi] += 1;
        let p = catalog.basis(bi);
        let mut xj = vec![0.0; cfg.m];
        for (idx, v) in coeffs.iter() {
            for (xi, pi) in xj.iter_mut().zip(p.col_slice(idx)) {
                *xi += v * pi;
            }
        }
        x_fb.set_col(j, &xj);
    }
    let plurality = votes
        .iter()
        .enumerate()
        .max_by(|(ia, ca), (ib, cb)| ca.cmp(cb).then(ib.cmp(ia)))
        .map(|(i, _)| i)
        .expect("catalog is not empty");
    let err = 100.0 * recon_error(&x_eval, &x_fb)?.mean;
    let miss = 100.0 * (point.signals - votes[plurality]) as f64 / point.signals as f64;
    timings.push(timing(point, trial, "fbcs", t0.elapsed().as_secs_f64()));
    rows.push(row(cfg, point, trial, "fbcs", err, miss, 0));

    Ok(TrialOut { rows, timings, traces: obd_trace_rows(point, trial, &obd) })
}
