//! Power-allocation Monte-Carlo sweep for the communication receiver.
//!
//! Trial seeds depend only on (master_seed, trial index), so every sweep point
//! sees the same payloads and noise realisations. Trials run on the rayon pool
//! of the caller and are reduced in index order.

use rayon::prelude::*;
use std::fmt::Write as _;

use crate::comms::{
    compute_ber_report, demodulate, estimate_channel, perfect_estimate, BerReport, DetectionMode,
    EstimationMethod, SyncReference,
};
use crate::error::{IsacError, Result};
use crate::ofdm_channel::{add_awgn, apply_channel_freq, OfdmParams, Target};
use crate::resource_grid::{build_grid, GridLayout, PowerSplit};

use super::{derive_seed, ScenarioConfig};

const PAYLOAD_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const ERASURE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub sqrt_gamma_c: f64,
    pub comb_size: usize,
    pub snr_db: f64,
    pub report: BerReport,
}

struct TrialSetup<'a> {
    layout: &'a GridLayout,
    split: PowerSplit,
    params: &'a OfdmParams,
    targets: &'a [Target],
    snr_db: f64,
    method: EstimationMethod,
}

fn run_trial(setup: &TrialSetup<'_>, master_seed: u64, trial: u64) -> Result<BerReport> {
    let grid = build_grid(setup.layout, setup.split, derive_seed(master_seed, trial, PAYLOAD_STREAM))?;
    let clean = apply_channel_freq(&grid.combined, setup.targets, setup.params);
    let noisy = add_awgn(
        &clean,
        setup.snr_db,
        derive_seed(master_seed, trial, NOISE_STREAM),
        &grid.allocated_mask(),
    )?;
    let sync = SyncReference::strongest_path(setup.targets, setup.params);
    let y = sync.apply(&noisy, setup.params);
    let est = match setup.method {
        EstimationMethod::LsInterp => estimate_channel(&y, &grid)?,
        EstimationMethod::Perfect => perfect_estimate(setup.targets, setup.params, &sync, y.dim()),
    };
    let erasure_seed = derive_seed(master_seed, trial, ERASURE_STREAM);
    let nic = demodulate(&y, &est, &grid, DetectionMode::Nic, erasure_seed)?;
    let ic = demodulate(&y, &est, &grid, DetectionMode::Ic, erasure_seed)?;
    compute_ber_report(&grid.tx_bits, &nic.bits, &ic.bits, &setup.layout.dims)
}

/// Runs `trial_count` trials for every (sqrt_gamma_c, comb) pair, comb-major.
pub fn sweep_power(cfg: &ScenarioConfig, sqrt_gamma_c: &[f64]) -> Result<Vec<SweepPoint>> {
    for &a in sqrt_gamma_c {
        if !(a > 0.0 && a < 1.0) {
            return Err(IsacError::config("sqrt_gamma_c", format!("{a} outside (0, 1)")));
        }
    }
    let params = cfg.params()?;
    let targets = cfg.targets()?;
    let layouts = cfg
        .sweep_comb_sizes
        .iter()
        .map(|&k| cfg.layout_with_comb(k))
        .collect::<Result<Vec<_>>>()?;
    let splits = sqrt_gamma_c
        .iter()
        .map(|&a| PowerSplit::from_sqrt_gamma_c(a))
        .collect::<Result<Vec<_>>>()?;

    let points: Vec<(usize, usize)> = (0..layouts.len())
        .flat_map(|c| (0..splits.len()).map(move |s| (c, s)))
        .collect();
    let trials = cfg.trial_count as u64;
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..trials).map(move |t| (p, t)))
        .collect();

    let results: Vec<Result<BerReport>> = jobs
        .par_iter()
        .map(|&(p, trial)| {
            let (c, s) = points[p];
            let setup = TrialSetup {
                layout: &layouts[c],
                split: splits[s],
                params: &params,
                targets: &targets,
                snr_db: cfg.snr_db,
                method: cfg.channel_estimation,
            };
            run_trial(&setup, cfg.master_seed, trial).map_err(|e| {
                IsacError::Runtime(format!(
                    "trial failed at sqrt_gamma_c={}, comb={}, trial={trial}: {e}",
                    sqrt_gamma_c[s], cfg.sweep_comb_sizes[c]
                ))
            })
        })
        .collect();

    let mut out = Vec::with_capacity(points.len());
    for (p, chunk) in results.chunks(cfg.trial_count).enumerate() {
        let reports = chunk.iter().cloned().collect::<Result<Vec<_>>>()?;
        let (c, s) = points[p];
        out.push(SweepPoint {
            sqrt_gamma_c: sqrt_gamma_c[s],
            comb_size: cfg.sweep_comb_sizes[c],
            snr_db: cfg.snr_db,
            report: BerReport::pooled(&reports),
        });
    }
    Ok(out)
}

/// Same as [`sweep_power`] on a dedicated pool of `threads` workers.
pub fn sweep_power_with_threads(cfg: &ScenarioConfig, sqrt_gamma_c: &[f64], threads: usize) -> Result<Vec<SweepPoint>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| IsacError::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| sweep_power(cfg, sqrt_gamma_c))
}

/// `sqrt_gamma_c,comb_size,snr_db,ber_nic,ber_ic,goodput_nic,goodput_ic,total_bits`
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("sqrt_gamma_c,comb_size,snr_db,ber_nic,ber_ic,goodput_nic,goodput_ic,total_bits\n");
    for p in points {
        let r = &p.report;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.sqrt_gamma_c, p.comb_size, p.snr_db, r.ber_nic, r.ber_ic, r.goodput_proxy_nic, r.goodput_proxy_ic, r.total_bits
        );
    }
    out
}
