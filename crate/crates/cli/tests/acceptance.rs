//! Exit criteria for the simulator. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Run alone with `cargo test -p isac-cli --test acceptance -- --nocapture --test-threads 1`.

use std::process::Command;
use std::time::{Duration, Instant};

use isac_core::comms::{compute_ber_report, demodulate, perfect_estimate};
use isac_core::harness::{ambiguity_table, run_sense, sweep_power, ScenarioConfig, SweepPoint, TargetSpec};
use isac_core::num_complex::Complex64;
use isac_core::ofdm_channel::{apply_channel_freq, apply_channel_time, ofdm_demodulate, ofdm_modulate};
use isac_core::resource_grid::build_grid;
use isac_core::sensing::{
    estimate_velocities, ghost_suppression, local_maxima, range_profile,
    reciprocal_filter, SuppressionReport,
};
use isac_core::{CMatrix, DetectionMode, EstimationMethod, OfdmParams, PowerSplit, ProfileKind, SyncReference, Target, C0};

/// Ranges of the two-target scenario, meters.
const TRUE_RANGES: [f64; 2] = [711.0, 846.0];
const PEAK_TOLERANCE_BINS: f64 = 1.0;
const SUPPRESSION_RATIO: f64 = 0.5;

fn report(id: u32, pass: bool, detail: &str) {
    println!("criterion {id}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn scenario(algorithm: ProfileKind, comb: usize, sqrt_gamma_s: f64) -> ScenarioConfig {
    let split = PowerSplit::from_sqrt_gamma_s(sqrt_gamma_s).unwrap();
    ScenarioConfig {
        algorithm,
        prs_comb_size: comb,
        gamma_s: split.gamma_s(),
        gamma_c: split.gamma_c(),
        ..ScenarioConfig::default()
    }
}

fn suppression(cfg: &ScenarioConfig) -> SuppressionReport {
    let out = run_sense(cfg).unwrap();
    let width = out.range_profile.bin_width;
    let true_bins: Vec<f64> = TRUE_RANGES.iter().map(|r| r / width).collect();
    ghost_suppression(&out.range_profile, &true_bins, PEAK_TOLERANCE_BINS, cfg.min_separation_bins).unwrap()
}

fn describe(r: &SuppressionReport) -> String {
    format!(
        "peaks {:?}, on target {}, spurious/smaller {:.4} at bin {:?}",
        r.peaks,
        r.peaks_on_target,
        r.spurious_ratio(),
        r.spurious_bin
    )
}

#[test]
fn criterion_01_ambiguity_table() {
    let published: [[u64; 4]; 5] = [
        [4996, 2498, 1665, 832],
        [2498, 1249, 832, 416],
        [1250, 624, 416, 208],
        [624, 312, 208, 104],
        [312, 156, 104, 52],
    ];
    let started = Instant::now();
    let table = ambiguity_table();
    let elapsed = started.elapsed();
    let mut worst = 0.0f64;
    for (cell, want) in table.iter().zip(published.iter().flatten()) {
        worst = worst.max((cell.spec.interval_two_way - *want as f64).abs());
    }
    let pass = table.len() == 20 && worst <= 1.0 && within(elapsed, 1.0);
    report(1, pass, &format!("20 cells, max deviation {worst:.3} m, {elapsed:?}"));
    assert!(pass);
}

#[test]
fn criterion_02_ghost_periodicity() {
    let started = Instant::now();
    let cfg = ScenarioConfig {
        gamma_s: 1.0,
        gamma_c: 0.0,
        snr_db: f64::INFINITY,
        ..ScenarioConfig::default()
    };
    let params = cfg.params().unwrap();
    let layout = cfg.layout().unwrap();
    let m_count = layout.dims.subcarriers();
    assert_eq!(m_count, 3264);
    let period = m_count / 4;
    let bin = 300;
    let target = Target::unit(bin as f64 * C0 / (params.delta_f() * m_count as f64), 0.0).unwrap();
    let grid = build_grid(&layout, cfg.split().unwrap(), 1).unwrap();
    let y = apply_channel_freq(&grid.combined, &[target], &params);
    let g = reciprocal_filter(&y, &grid.prs_layer).unwrap();
    let profile = range_profile(&g, &layout.prs_columns(), &params).unwrap();

    let mags = &profile.magnitudes;
    let maxima = local_maxima(mags);
    let replicas: Vec<usize> = (0..4).map(|i| bin + i * period).collect();
    let peak = mags[bin];
    let equal = replicas.iter().all(|&b| (mags[b] - peak).abs() <= 0.01 * peak);
    let at_shifts = replicas.iter().all(|b| maxima.contains(b));
    // no other maximum comes close to the replica height
    let others = maxima
        .iter()
        .filter(|b| !replicas.contains(b))
        .map(|&b| mags[b])
        .fold(0.0, f64::max);
    let spacing_m = period as f64 * profile.bin_width;
    let two_way_table = ambiguity_table()
        .into_iter()
        .find(|c| c.scs_hz == 120e3 && c.spec.comb_size == 4)
        .unwrap()
        .spec
        .interval_two_way;
    let spacing_ok = (spacing_m - 624.0).abs() <= 1.0 && (spacing_m - 2.0 * two_way_table).abs() < 1e-6;
    let elapsed = started.elapsed();
    let pass = equal && at_shifts && others < 0.5 * peak && spacing_ok && within(elapsed, 5.0);
    report(
        2,
        pass,
        &format!(
            "replicas at {replicas:?}, equal within 1%: {equal}, spacing {spacing_m:.2} m, {elapsed:?}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_alg1_resolves_ghosts() {
    let started = Instant::now();
    let r = suppression(&scenario(ProfileKind::Alg1, 4, 0.5));
    let elapsed = started.elapsed();
    let pass = r.suppressed(SUPPRESSION_RATIO) && within(elapsed, 30.0);
    report(3, pass, &format!("comb 4, sqrt_gamma_s 0.5: {}, {elapsed:?}", describe(&r)));
    assert!(pass);
}

#[test]
fn criterion_04_alg1_low_sensing_power_fails() {
    let r = suppression(&scenario(ProfileKind::Alg1, 4, 0.1));
    let violated = !r.suppressed(SUPPRESSION_RATIO);
    let dominated = r.strongest_spurious >= r.smaller_true_peak || !r.peaks_on_target;
    let pass = violated && dominated;
    report(4, pass, &format!("comb 4, sqrt_gamma_s 0.1: {}", describe(&r)));
    assert!(pass);
}

#[test]
fn criterion_05_alg2_success_and_failure() {
    let good = suppression(&scenario(ProfileKind::Alg2, 12, 0.5));
    let bad = suppression(&scenario(ProfileKind::Alg2, 12, 0.1));
    let pass = good.suppressed(SUPPRESSION_RATIO) && !bad.suppressed(SUPPRESSION_RATIO);
    report(
        5,
        pass,
        &format!(
            "comb 12, sqrt_gamma_s 0.5: {}; sqrt_gamma_s 0.1: {}",
            describe(&good),
            describe(&bad)
        ),
    );
    assert!(pass);
}

/// Range and Doppler bin found for a single noiseless target.
fn single_target_bins(cfg: &ScenarioConfig) -> (usize, usize, usize, f64, f64) {
    let out = run_sense(cfg).unwrap();
    let noncoherent = estimate_velocities(&out.velocity_profile, 1, cfg.min_separation_bins).unwrap();
    (
        out.result.range_bins[0],
        out.result.doppler_bins[0],
        noncoherent.bins[0],
        out.range_profile.bin_width,
        out.velocity_profile.bin_width,
    )
}

fn single_target(range_bin: f64, doppler_bin: f64, algorithm: ProfileKind, gamma_s: f64) -> ScenarioConfig {
    let base = ScenarioConfig::default();
    let params = base.params().unwrap();
    let m_count = base.layout().unwrap().dims.subcarriers();
    let n_count = base.layout().unwrap().dims.symbols();
    let range = range_bin * C0 / (params.delta_f() * m_count as f64);
    let velocity = doppler_bin * C0 / (2.0 * params.t_0() * params.f_c() * n_count as f64);
    ScenarioConfig {
        targets: vec![TargetSpec {
            range_m: range,
            velocity_mps: velocity,
            alpha: Complex64::ONE,
        }],
        snr_db: f64::INFINITY,
        algorithm,
        gamma_s,
        gamma_c: 1.0 - gamma_s,
        ..base
    }
}

#[test]
fn criterion_06_estimator_accuracy() {
    let started = Instant::now();

    // PRS alone is only unambiguous inside the first comb period.
    let (r_prs, d_prs, d_prs_nc, ..) = single_target_bins(&single_target(300.0, 3.0, ProfileKind::PrsOnly, 1.0));
    let prs_exact = r_prs == 300 && d_prs == 3 && d_prs_nc == 3;
    let (r_on, d_on, d_on_nc, ..) = single_target_bins(&single_target(929.0, 3.0, ProfileKind::Alg1, 0.25));
    let on_exact = r_on == 929 && d_on == 3 && d_on_nc == 3;

    let (true_r, true_d) = (1105.37, 2.4);
    let off = single_target(true_r, true_d, ProfileKind::Alg1, 0.25);
    let (r_off, d_off, _, range_width, velocity_width) = single_target_bins(&off);
    let range_err_m = (r_off as f64 * range_width - off.targets[0].range_m).abs();
    let vel_err = (d_off as f64 * velocity_width - off.targets[0].velocity_mps).abs();
    let off_ok = range_err_m <= range_width && vel_err <= velocity_width;

    let elapsed = started.elapsed();
    let pass = prs_exact && on_exact && off_ok && (range_width - 0.766).abs() < 1e-3 && within(elapsed, 5.0);
    report(
        6,
        pass,
        &format!(
            "on-grid prs_only bins ({r_prs},{d_prs}), alg1 bins ({r_on},{d_on}); off-grid errors {range_err_m:.3} m / {vel_err:.3} m/s vs bins {range_width:.3} m / {velocity_width:.3} m/s, {elapsed:?}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_exact_cancellation() {
    let mut worst = 0u64;
    let mut bits = u64::MAX;
    for sqrt_gc in [0.05, 0.3, 0.7, 0.99] {
        let split = PowerSplit::from_sqrt_gamma_c(sqrt_gc).unwrap();
        let cfg = ScenarioConfig {
            gamma_s: split.gamma_s(),
            gamma_c: split.gamma_c(),
            snr_db: f64::INFINITY,
            ..ScenarioConfig::default()
        };
        let params = cfg.params().unwrap();
        let layout = cfg.layout().unwrap();
        let targets = cfg.targets().unwrap();
        let grid = build_grid(&layout, split, 7).unwrap();
        let sync = SyncReference::strongest_path(&targets, &params);
        let y = sync.apply(&apply_channel_freq(&grid.combined, &targets, &params), &params);
        let est = perfect_estimate(&targets, &params, &sync, y.dim());
        let nic = demodulate(&y, &est, &grid, DetectionMode::Nic, 0).unwrap();
        let ic = demodulate(&y, &est, &grid, DetectionMode::Ic, 0).unwrap();
        let r = compute_ber_report(&grid.tx_bits, &nic.bits, &ic.bits, &layout.dims).unwrap();
        worst = worst.max(r.error_bits_ic);
        bits = bits.min(r.total_bits);
    }
    let pass = worst == 0 && bits >= 100_000;
    report(7, pass, &format!("{worst} IC bit errors, {bits} bits per split"));
    assert!(pass);
}

fn sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn check_trends(points: &[SweepPoint]) -> Result<(), String> {
    let mut strict = false;
    for p in points {
        let r = &p.report;
        if r.total_bits < 100_000 {
            return Err(format!("only {} bits at {:?}", r.total_bits, (p.sqrt_gamma_c, p.comb_size)));
        }
        if r.ber_ic > r.ber_nic {
            return Err(format!("ber_ic {} > ber_nic {} at {:?}", r.ber_ic, r.ber_nic, (p.sqrt_gamma_c, p.comb_size)));
        }
        strict |= r.ber_ic < r.ber_nic;
    }
    if !strict {
        return Err("IC never strictly better".into());
    }
    for comb in [2, 12] {
        let curve: Vec<&SweepPoint> = points.iter().filter(|p| p.comb_size == comb).collect();
        for w in curve.windows(2) {
            let (a, b) = (&w[0].report, &w[1].report);
            for (pa, pb) in [(a.ber_nic, b.ber_nic), (a.ber_ic, b.ber_ic)] {
                let tol = 3.0 * (sigma(pa, a.total_bits).powi(2) + sigma(pb, b.total_bits).powi(2)).sqrt();
                if pb > pa + tol {
                    return Err(format!("BER rises from {pa} to {pb} at comb {comb}, sqrt_gamma_c {}", w[1].sqrt_gamma_c));
                }
            }
        }
    }
    for p2 in points.iter().filter(|p| p.comb_size == 2) {
        let p12 = points
            .iter()
            .find(|p| p.comb_size == 12 && p.sqrt_gamma_c == p2.sqrt_gamma_c)
            .ok_or("missing comb 12 point")?;
        if p2.report.ber_nic < p12.report.ber_nic {
            return Err(format!("comb 2 NIC below comb 12 at sqrt_gamma_c {}", p2.sqrt_gamma_c));
        }
    }
    Ok(())
}

#[test]
fn criterion_08_ic_dominance_and_trends() {
    let started = Instant::now();
    let cfg = ScenarioConfig {
        trial_count: 2,
        channel_estimation: EstimationMethod::LsInterp,
        ..ScenarioConfig::default()
    };
    assert_eq!(cfg.snr_db, 15.0);
    let points = sweep_power(&cfg, &[0.5, 0.6, 0.7, 0.8, 0.9]).unwrap();
    let elapsed = started.elapsed();
    let verdict = check_trends(&points);
    let pass = verdict.is_ok() && points.len() == 10 && within(elapsed, 300.0);
    let summary: Vec<String> = points
        .iter()
        .map(|p| format!("k{}@{}:{:.4}/{:.4}", p.comb_size, p.sqrt_gamma_c, p.report.ber_nic, p.report.ber_ic))
        .collect();
    report(
        8,
        pass,
        &format!("{} nic/ic [{}], {elapsed:?}", verdict.err().unwrap_or_default(), summary.join(" ")),
    );
    assert!(pass);
}

fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

#[test]
fn criterion_09_ofdm_round_trip() {
    let started = Instant::now();
    let cfg = ScenarioConfig::default();
    let params: OfdmParams = cfg.params().unwrap();
    let layout = cfg.layout().unwrap();
    let grid = build_grid(&layout, cfg.split().unwrap(), 3).unwrap();
    let m_count = layout.dims.subcarriers();
    let os = 1;

    let stream = ofdm_modulate(&grid.combined, &params, os).unwrap();
    let back = ofdm_demodulate(&stream, &params, grid.combined.dim(), os).unwrap();
    let round_trip = rel_err(&back, &grid.combined);

    let cp = params.cp_samples(m_count, os);
    let ts = 1.0 / params.sample_rate(m_count, os);
    let targets: Vec<Target> = [(5usize, Complex64::new(1.0, 0.0)), (40, Complex64::new(0.3, -0.5)), (cp - 1, Complex64::new(-0.2, 0.1))]
        .iter()
        .map(|&(d, a)| Target::new(d as f64 * ts * C0, 0.0, a).unwrap())
        .collect();
    let rx = apply_channel_time(&stream, &targets, &params, m_count, os).unwrap();
    let via_time = ofdm_demodulate(&rx, &params, grid.combined.dim(), os).unwrap();
    let via_freq = apply_channel_freq(&grid.combined, &targets, &params);
    let paths = rel_err(&via_time, &via_freq);

    let elapsed = started.elapsed();
    let pass = round_trip < 1e-9 && paths < 1e-6 && within(elapsed, 10.0);
    report(
        9,
        pass,
        &format!("round trip {round_trip:.2e}, time vs frequency {paths:.2e} (cp {cp} samples), {elapsed:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_thread_count_invariance() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.conf");
    std::fs::write(&config, "grid.prb_count=24\ngrid.slots=2\nseeds.trial_count=6\nseeds.master_seed=99\n").unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_isac"))
            .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads])
            .arg("sweep-power")
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("ber_sweep.csv")).unwrap()
    };
    let one = run("1");
    let four = run("4");
    let seven = run("7");
    let pass = !one.is_empty() && one == four && one == seven;
    report(10, pass, &format!("{} bytes, threads 1/4/7 identical: {pass}", one.len()));
    assert!(pass);
}
