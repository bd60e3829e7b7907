//! Periodogram range/Doppler estimation, comb ambiguity analytics and the two
//! PRS+DMRS ghost-suppression profiles.
//!
//! Range profiles are averaged only over columns that carry the reference
//! signal; all-zero columns would merely rescale the average.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::dsp;
use crate::error::{IsacError, Result};
use crate::ofdm_channel::{OfdmParams, C0};
use crate::resource_grid::{GridLayout, COMB_SIZES, SYMBOLS_PER_SLOT};
use crate::CMatrix;

pub const DEFAULT_MIN_SEPARATION_BINS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub magnitudes: Vec<f64>,
    /// Meters per bin on the bistatic axis.
    pub bin_width: f64,
}

impl RangeProfile {
    pub fn range_of_bin(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width
    }

    /// Copy scaled to a maximum of 1 (all-zero stays zero).
    pub fn normalized(&self) -> Self {
        Self {
            magnitudes: normalize_max(&self.magnitudes),
            bin_width: self.bin_width,
        }
    }

    /// `bin,range_m,magnitude`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,range_m,magnitude\n");
        for (l, v) in self.magnitudes.iter().enumerate() {
            out.push_str(&format!("{l},{},{v}\n", self.range_of_bin(l)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub magnitudes: Vec<f64>,
    /// m/s per Doppler bin.
    pub bin_width: f64,
}

impl VelocityProfile {
    pub fn velocity_of_bin(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width
    }

    /// Largest representable velocity, N bins times the bin width.
    pub fn max_velocity(&self) -> f64 {
        self.magnitudes.len() as f64 * self.bin_width
    }

    pub fn normalized(&self) -> Self {
        Self {
            magnitudes: normalize_max(&self.magnitudes),
            bin_width: self.bin_width,
        }
    }

    /// `bin,velocity_mps,magnitude`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,velocity_mps,magnitude\n");
        for (d, v) in self.magnitudes.iter().enumerate() {
            out.push_str(&format!("{d},{},{v}\n", self.velocity_of_bin(d)));
        }
        out
    }
}

fn normalize_max(values: &[f64]) -> Vec<f64> {
    let peak = values.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        values.iter().map(|v| v / peak).collect()
    } else {
        values.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    PrsOnly,
    Alg1,
    Alg2,
}

impl ProfileKind {
    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::PrsOnly => "prs_only",
            ProfileKind::Alg1 => "alg1",
            ProfileKind::Alg2 => "alg2",
        }
    }
}

/// Time base used to map Doppler bins to frequency: f = d / (T N).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DopplerTimeBase {
    /// Full symbol duration including CP, consistent with the channel phase term.
    #[default]
    T0,
    /// Useful symbol duration only.
    Ts,
}

impl DopplerTimeBase {
    pub fn duration(self, params: &OfdmParams) -> f64 {
        match self {
            DopplerTimeBase::T0 => params.t_0(),
            DopplerTimeBase::Ts => params.t_s(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DopplerTimeBase::T0 => "t0",
            DopplerTimeBase::Ts => "ts",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeEstimates {
    pub bins: Vec<usize>,
    pub ranges: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityEstimates {
    pub bins: Vec<usize>,
    pub velocities: Vec<f64>,
    pub resolution: f64,
    pub max_velocity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingResult {
    pub kind: ProfileKind,
    pub range_bins: Vec<usize>,
    pub ranges: Vec<f64>,
    pub doppler_bins: Vec<usize>,
    pub velocities: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguitySpec {
    pub comb_size: usize,
    pub delta_f: f64,
    /// c0 / (2 K df)
    pub interval_two_way: f64,
    /// c0 / (K df), the ghost spacing on the bistatic profile axis.
    pub interval_profile_axis: f64,
}

/// g = y / ref where ref is nonzero, 0 elsewhere.
pub fn reciprocal_filter(y: &CMatrix, reference: &CMatrix) -> Result<CMatrix> {
    if y.dim() != reference.dim() {
        return Err(IsacError::ShapeMismatch {
            left: y.dim(),
            right: reference.dim(),
        });
    }
    let mut g = CMatrix::zeros(y.dim());
    ndarray::Zip::from(&mut g)
        .and(y)
        .and(reference)
        .for_each(|g, &y, &r| {
            if r != Complex64::ZERO {
                *g = y / r;
            }
        });
    Ok(g)
}

pub fn range_resolution(params: &OfdmParams, subcarriers: usize) -> f64 {
    C0 / (params.delta_f() * subcarriers as f64)
}

pub fn max_range(params: &OfdmParams) -> f64 {
    C0 / params.delta_f()
}

/// Average over `columns` of |IDFT_M(g(., n))|.
pub fn range_profile(g: &CMatrix, columns: &[usize], params: &OfdmParams) -> Result<RangeProfile> {
    if columns.is_empty() {
        return Err(IsacError::EmptySelection("column"));
    }
    let m_count = g.nrows();
    let plan = dsp::plan_inverse(m_count);
    let mut acc = vec![0.0; m_count];
    let mut buf = vec![Complex64::ZERO; m_count];
    for &n in columns {
        buf.iter_mut().zip(g.column(n).iter()).for_each(|(b, &v)| *b = v);
        dsp::idft(plan.as_ref(), &mut buf);
        acc.iter_mut().zip(&buf).for_each(|(a, v)| *a += v.norm());
    }
    let inv = 1.0 / columns.len() as f64;
    Ok(RangeProfile {
        magnitudes: acc.into_iter().map(|v| v * inv).collect(),
        bin_width: range_resolution(params, m_count),
    })
}

pub fn estimate_ranges(profile: &RangeProfile, num_targets: usize, min_separation_bins: usize) -> Result<RangeEstimates> {
    let bins = detect_peaks(&profile.magnitudes, num_targets, min_separation_bins)?;
    let ranges = bins.iter().map(|&b| profile.range_of_bin(b)).collect();
    Ok(RangeEstimates { bins, ranges })
}

pub fn ambiguity_interval(comb_size: usize, delta_f: f64) -> Result<AmbiguitySpec> {
    if !COMB_SIZES.contains(&comb_size) {
        return Err(IsacError::config("comb_size", format!("{comb_size} not in {{2,4,6,12}}")));
    }
    let profile_axis = C0 / (comb_size as f64 * delta_f);
    Ok(AmbiguitySpec {
        comb_size,
        delta_f,
        interval_two_way: profile_axis / 2.0,
        interval_profile_axis: profile_axis,
    })
}

pub fn velocity_bin_width(params: &OfdmParams, symbols: usize, time_base: DopplerTimeBase) -> f64 {
    C0 / (2.0 * time_base.duration(params) * params.f_c() * symbols as f64)
}

fn delay_compensation(m: usize, params: &OfdmParams, delay: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * m as f64 * params.delta_f() * delay)
}

/// Average over `rows` of |DFT_N(g(m, .))| after removing `compensated_delay`.
pub fn doppler_profile(
    g: &CMatrix,
    rows: &[usize],
    compensated_delay: f64,
    params: &OfdmParams,
    time_base: DopplerTimeBase,
) -> Result<VelocityProfile> {
    if rows.is_empty() {
        return Err(IsacError::EmptySelection("row"));
    }
    let n_count = g.ncols();
    let plan = dsp::plan_forward(n_count);
    let mut acc = vec![0.0; n_count];
    let mut buf = vec![Complex64::ZERO; n_count];
    for &m in rows {
        let comp = delay_compensation(m, params, compensated_delay);
        buf.iter_mut().zip(g.row(m).iter()).for_each(|(b, &v)| *b = v * comp);
        plan.process(&mut buf);
        acc.iter_mut().zip(&buf).for_each(|(a, v)| *a += v.norm());
    }
    let inv = 1.0 / (rows.len() * n_count) as f64;
    Ok(VelocityProfile {
        magnitudes: acc.into_iter().map(|v| v * inv).collect(),
        bin_width: velocity_bin_width(params, n_count, time_base),
    })
}

/// Range-gated variant: rows are summed coherently after delay compensation,
/// which isolates the path at `compensated_delay` from paths at other ranges.
pub fn gated_doppler_profile(
    g: &CMatrix,
    rows: &[usize],
    compensated_delay: f64,
    params: &OfdmParams,
    time_base: DopplerTimeBase,
) -> Result<VelocityProfile> {
    if rows.is_empty() {
        return Err(IsacError::EmptySelection("row"));
    }
    let n_count = g.ncols();
    let mut buf = vec![Complex64::ZERO; n_count];
    for &m in rows {
        let comp = delay_compensation(m, params, compensated_delay);
        buf.iter_mut().zip(g.row(m).iter()).for_each(|(b, &v)| *b += v * comp);
    }
    dsp::plan_forward(n_count).process(&mut buf);
    let inv = 1.0 / (rows.len() * n_count) as f64;
    Ok(VelocityProfile {
        magnitudes: buf.iter().map(|v| v.norm() * inv).collect(),
        bin_width: velocity_bin_width(params, n_count, time_base),
    })
}

pub fn estimate_velocities(profile: &VelocityProfile, num_targets: usize, min_separation_bins: usize) -> Result<VelocityEstimates> {
    let bins = detect_peaks(&profile.magnitudes, num_targets, min_separation_bins)?;
    let velocities = bins.iter().map(|&b| profile.velocity_of_bin(b)).collect();
    Ok(VelocityEstimates {
        bins,
        velocities,
        resolution: profile.bin_width,
        max_velocity: profile.max_velocity(),
    })
}

/// Hadamard product of the PRS and DMRS range profiles.
pub fn alg1_profile(r_prs: &RangeProfile, r_dmrs: &RangeProfile) -> Result<RangeProfile> {
    if r_prs.magnitudes.len() != r_dmrs.magnitudes.len() {
        return Err(IsacError::LengthMismatch {
            left: r_prs.magnitudes.len(),
            right: r_dmrs.magnitudes.len(),
        });
    }
    Ok(RangeProfile {
        magnitudes: r_prs
            .magnitudes
            .iter()
            .zip(&r_dmrs.magnitudes)
            .map(|(a, b)| a * b)
            .collect(),
        bin_width: r_prs.bin_width,
    })
}

fn normalize_by_peak(values: &mut [Complex64]) -> bool {
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak > 0.0 {
        values.iter_mut().for_each(|v| *v /= peak);
        true
    } else {
        false
    }
}

/// Per slot: sum the PRS columns, normalize it and the DMRS column by their
/// peak magnitudes, take |IDFT_M| of the sum; accumulate over slots.
pub fn alg2_profile(g_prs: &CMatrix, g_dmrs: &CMatrix, layout: &GridLayout, params: &OfdmParams) -> Result<RangeProfile> {
    if g_prs.dim() != g_dmrs.dim() {
        return Err(IsacError::ShapeMismatch {
            left: g_prs.dim(),
            right: g_dmrs.dim(),
        });
    }
    if g_prs.dim() != layout.dims.shape() {
        return Err(IsacError::ShapeMismatch {
            left: g_prs.dim(),
            right: layout.dims.shape(),
        });
    }
    if !matches!(layout.prs.comb_size(), 6 | 12) {
        log::warn!(
            "second ghost-suppression profile used with comb {}; it targets combs 6 and 12",
            layout.prs.comb_size()
        );
    }
    let m_count = g_prs.nrows();
    let plan = dsp::plan_inverse(m_count);
    let mut acc = vec![0.0; m_count];
    let mut used = 0usize;
    for s in 0..layout.dims.slots() {
        let base = s * SYMBOLS_PER_SLOT;
        let mut prs_sum = vec![Complex64::ZERO; m_count];
        for sym in (0..SYMBOLS_PER_SLOT).filter(|&sym| layout.prs.contains_symbol(sym)) {
            prs_sum
                .iter_mut()
                .zip(g_prs.column(base + sym).iter())
                .for_each(|(a, &v)| *a += v);
        }
        let mut dmrs: Vec<Complex64> = g_dmrs.column(base + layout.dmrs.symbol_index()).to_vec();
        let has_prs = normalize_by_peak(&mut prs_sum);
        let has_dmrs = normalize_by_peak(&mut dmrs);
        if !has_prs && !has_dmrs {
            log::warn!("slot {s} carries no reference energy; skipped");
            continue;
        }
        used += 1;
        let mut buf: Vec<Complex64> = prs_sum.iter().zip(&dmrs).map(|(a, b)| a + b).collect();
        dsp::idft(plan.as_ref(), &mut buf);
        acc.iter_mut().zip(&buf).for_each(|(a, v)| *a += v.norm());
    }
    if used == 0 {
        return Err(IsacError::Runtime("every slot has zero reference energy".into()));
    }
    Ok(RangeProfile {
        magnitudes: acc,
        bin_width: range_resolution(params, m_count),
    })
}

fn circular_distance(a: usize, b: usize, len: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(len - d)
}

/// Bins that rise above their left neighbour and are not below their right
/// neighbour (circularly), so each plateau is reported once.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let len = values.len();
    match len {
        0 => Vec::new(),
        1 => (values[0] > 0.0).then_some(0).into_iter().collect(),
        _ => (0..len)
            .filter(|&i| {
                let v = values[i];
                let left = values[(i + len - 1) % len];
                let right = values[(i + 1) % len];
                v > 0.0 && v > left && v >= right
            })
            .collect(),
    }
}

/// Greedy selection of the highest local maxima at least `min_separation_bins`
/// apart (circular distance); ties go to the lower bin.
pub fn detect_peaks(values: &[f64], count: usize, min_separation_bins: usize) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(IsacError::config("num_targets", "at least one target"));
    }
    let mut candidates = local_maxima(values);
    candidates.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = Vec::with_capacity(count);
    for c in candidates {
        if picked
            .iter()
            .all(|&p| circular_distance(p, c, values.len()) >= min_separation_bins)
        {
            picked.push(c);
            if picked.len() == count {
                return Ok(picked);
            }
        }
    }
    Err(IsacError::InsufficientPeaks {
        wanted: count,
        found: picked.len(),
    })
}

/// Outcome of comparing a profile against known target bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SuppressionReport {
    /// Detected peak bins, strongest first.
    pub peaks: Vec<usize>,
    /// Every true bin has a distinct detected peak within tolerance.
    pub peaks_on_target: bool,
    pub smaller_true_peak: f64,
    /// Largest local maximum other than the detected peaks.
    pub strongest_spurious: f64,
    pub spurious_bin: Option<usize>,
}

impl SuppressionReport {
    /// Ratio of the strongest spurious maximum to the smaller detected peak.
    pub fn spurious_ratio(&self) -> f64 {
        if self.smaller_true_peak > 0.0 {
            self.strongest_spurious / self.smaller_true_peak
        } else {
            f64::INFINITY
        }
    }

    /// Peaks on target and every other maximum below `ratio` times the smaller one.
    pub fn suppressed(&self, ratio: f64) -> bool {
        self.peaks_on_target && self.strongest_spurious < ratio * self.smaller_true_peak
    }
}

pub fn ghost_suppression(
    profile: &RangeProfile,
    true_bins: &[f64],
    tolerance_bins: f64,
    min_separation_bins: usize,
) -> Result<SuppressionReport> {
    let values = &profile.magnitudes;
    let len = values.len();
    let peaks = detect_peaks(values, true_bins.len(), min_separation_bins)?;

    let mut unmatched = peaks.clone();
    let mut on_target = true;
    for &t in true_bins {
        let dist = |p: usize| {
            let d = (p as f64 - t).abs();
            d.min(len as f64 - d)
        };
        match unmatched
            .iter()
            .enumerate()
            .filter(|(_, &p)| dist(p) <= tolerance_bins)
            .min_by(|a, b| dist(*a.1).total_cmp(&dist(*b.1)))
        {
            Some((i, _)) => {
                unmatched.swap_remove(i);
            }
            None => on_target = false,
        }
    }

    let smaller_true_peak = peaks.iter().map(|&p| values[p]).fold(f64::INFINITY, f64::min);
    let spurious = local_maxima(values)
        .into_iter()
        .filter(|b| !peaks.contains(b))
        .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)));
    Ok(SuppressionReport {
        peaks,
        peaks_on_target: on_target,
        smaller_true_peak,
        strongest_spurious: spurious.map_or(0.0, |b| values[b]),
        spurious_bin: spurious,
    })
}
