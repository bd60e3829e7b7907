use crate::error::{IsacError, Result};
use crate::ofdm_channel::{add_awgn, apply_channel_freq};
use crate::resource_grid::{build_grid, ResourceGrid};
use crate::sensing::{
    alg1_profile, alg2_profile, detect_peaks, doppler_profile, estimate_ranges, gated_doppler_profile,
    range_profile, reciprocal_filter, ProfileKind, RangeProfile, SensingResult, VelocityProfile,
};
use crate::CMatrix;

use super::ScenarioConfig;

#[derive(Debug, Clone)]
pub struct SenseOutput {
    pub result: SensingResult,
    /// Profile of the selected estimator, unnormalised.
    pub range_profile: RangeProfile,
    /// PRS-only profile, kept for comparison.
    pub prs_profile: RangeProfile,
    /// Row-averaged Doppler periodogram after compensating the first range estimate.
    pub velocity_profile: VelocityProfile,
    pub grid: ResourceGrid,
    pub received: CMatrix,
}

impl SenseOutput {
    pub fn summary(&self) -> String {
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.3}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "estimator={} ranges_m={} velocities_mps={} range_bins={} doppler_bins={}",
            self.result.kind.name(),
            fmt(&self.result.ranges),
            fmt(&self.result.velocities),
            self.result
                .range_bins
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
            self.result
                .doppler_bins
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
        )
    }
}

fn context(stage: &'static str) -> impl Fn(IsacError) -> IsacError {
    move |e| IsacError::Runtime(format!("{stage}: {e}"))
}

/// Grid -> channel -> noise -> selected range estimator -> per-target Doppler.
pub fn run_sense(cfg: &ScenarioConfig) -> Result<SenseOutput> {
    let params = cfg.params()?;
    let layout = cfg.layout()?;
    let split = cfg.split()?;
    let channel = cfg.channel()?;
    let num_targets = channel.targets.len();

    let grid = build_grid(&layout, split, cfg.payload_seed)?;
    let clean = apply_channel_freq(&grid.combined, &channel.targets, &params);
    let received = add_awgn(&clean, channel.snr_db, channel.noise_seed, &grid.allocated_mask())?;

    let g_prs = reciprocal_filter(&received, &grid.prs_layer)?;
    let prs_profile = range_profile(&g_prs, &layout.prs_columns(), &params).map_err(context("PRS range profile"))?;
    let profile = match cfg.algorithm {
        ProfileKind::PrsOnly => prs_profile.clone(),
        ProfileKind::Alg1 => {
            let g_dmrs = reciprocal_filter(&received, &grid.dmrs_layer)?;
            let dmrs_profile =
                range_profile(&g_dmrs, &layout.dmrs_columns(), &params).map_err(context("DMRS range profile"))?;
            alg1_profile(&prs_profile, &dmrs_profile)?
        }
        ProfileKind::Alg2 => {
            let g_dmrs = reciprocal_filter(&received, &grid.dmrs_layer)?;
            alg2_profile(&g_prs, &g_dmrs, &layout, &params).map_err(context("alg2 profile"))?
        }
    };
    let ranges = estimate_ranges(&profile, num_targets, cfg.min_separation_bins)
        .map_err(context("range estimation"))?;

    let rows: Vec<usize> = (0..layout.dims.subcarriers())
        .filter(|&m| g_prs.row(m).iter().any(|v| v.norm_sqr() > 0.0))
        .collect();
    let mut doppler_bins = Vec::with_capacity(num_targets);
    let mut velocities = Vec::with_capacity(num_targets);
    for &range in &ranges.ranges {
        let delay = range / crate::C0;
        let gated = gated_doppler_profile(&g_prs, &rows, delay, &params, cfg.doppler_time_base)
            .map_err(context("Doppler estimation"))?;
        let bin = detect_peaks(&gated.magnitudes, 1, cfg.min_separation_bins)
            .map_err(context("Doppler estimation"))?[0];
        doppler_bins.push(bin);
        velocities.push(gated.velocity_of_bin(bin));
    }
    let velocity_profile = doppler_profile(
        &g_prs,
        &rows,
        ranges.ranges[0] / crate::C0,
        &params,
        cfg.doppler_time_base,
    )
    .map_err(context("Doppler profile"))?;

    Ok(SenseOutput {
        result: SensingResult {
            kind: cfg.algorithm,
            range_bins: ranges.bins,
            ranges: ranges.ranges,
            doppler_bins,
            velocities,
        },
        range_profile: profile,
        prs_profile,
        velocity_profile,
        grid,
        received,
    })
}
