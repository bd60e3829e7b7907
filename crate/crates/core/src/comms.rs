//! Communication receiver: DMRS least-squares channel estimation, PRS
//! reconstruction and cancellation, zero-forcing QPSK detection and BER
//! bookkeeping.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{IsacError, Result};
use crate::ofdm_channel::{channel_response, path_phasor, OfdmParams, Target};
use crate::resource_grid::{dmrs_re_pattern, GridDims, ResourceGrid, SYMBOLS_PER_SLOT};
use crate::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EstimationMethod {
    #[default]
    LsInterp,
    Perfect,
}

impl EstimationMethod {
    pub fn name(self) -> &'static str {
        match self {
            EstimationMethod::LsInterp => "ls_interp",
            EstimationMethod::Perfect => "perfect",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: CMatrix,
    pub method: EstimationMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectionMode {
    /// No interference cancellation.
    Nic,
    /// PRS reconstructed from the channel estimate and subtracted first.
    Ic,
}

/// Ideal timing and frequency synchronisation on one reference path.
///
/// The strongest path (first on ties) defines the receiver's timing and
/// carrier reference; its delay and Doppler are removed from every RE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncReference {
    pub delay: f64,
    pub doppler: f64,
}

impl SyncReference {
    pub fn none() -> Self {
        Self { delay: 0.0, doppler: 0.0 }
    }

    pub fn strongest_path(targets: &[Target], params: &OfdmParams) -> Self {
        targets
            .iter()
            .fold(None::<&Target>, |best, t| match best {
                Some(b) if b.alpha.norm() >= t.alpha.norm() => Some(b),
                _ => Some(t),
            })
            .map_or(Self::none(), |t| Self {
                delay: t.delay(),
                doppler: t.doppler(params),
            })
    }

    pub fn apply(&self, y: &CMatrix, params: &OfdmParams) -> CMatrix {
        let mut out = y.clone();
        out.indexed_iter_mut()
            .for_each(|((m, n), v)| *v *= path_phasor(self.delay, self.doppler, m, n, params).conj());
        out
    }
}

/// True per-RE channel seen after synchronisation.
pub fn perfect_estimate(targets: &[Target], params: &OfdmParams, sync: &SyncReference, shape: (usize, usize)) -> ChannelEstimate {
    ChannelEstimate {
        h_hat: sync.apply(&channel_response(targets, params, shape), params),
        method: EstimationMethod::Perfect,
    }
}

/// LS at DMRS REs, linear in frequency between them (edge-held), constant
/// over all symbols of the slot.
pub fn estimate_channel(y: &CMatrix, grid: &ResourceGrid) -> Result<ChannelEstimate> {
    let amplitude = grid.split.comm_amplitude();
    if amplitude == 0.0 {
        return Err(IsacError::Unobservable);
    }
    if y.dim() != grid.combined.dim() {
        return Err(IsacError::ShapeMismatch {
            left: y.dim(),
            right: grid.combined.dim(),
        });
    }
    let dims = grid.dims();
    let m_count = dims.subcarriers();
    let pilots = dmrs_re_pattern(m_count);
    let mut h_hat = CMatrix::zeros(y.dim());
    let mut column = vec![Complex64::ZERO; m_count];
    for s in 0..dims.slots() {
        let n_d = s * SYMBOLS_PER_SLOT + grid.layout.dmrs.symbol_index();
        let ls: Vec<Complex64> = pilots
            .iter()
            .map(|&m| y[[m, n_d]] / (grid.dmrs_layer[[m, n_d]] * amplitude))
            .collect();
        interpolate_linear(&pilots, &ls, &mut column);
        for n in s * SYMBOLS_PER_SLOT..(s + 1) * SYMBOLS_PER_SLOT {
            h_hat.column_mut(n).iter_mut().zip(&column).for_each(|(h, &c)| *h = c);
        }
    }
    Ok(ChannelEstimate {
        h_hat,
        method: EstimationMethod::LsInterp,
    })
}

/// `positions` must be strictly increasing.
fn interpolate_linear(positions: &[usize], values: &[Complex64], out: &mut [Complex64]) {
    let (first, last) = (positions[0], positions[positions.len() - 1]);
    out[..=first].iter_mut().for_each(|v| *v = values[0]);
    out[last..].iter_mut().for_each(|v| *v = values[values.len() - 1]);
    for (w, pair) in positions.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let (va, vb) = (values[w], values[w + 1]);
        let span = (b - a) as f64;
        for m in a..=b {
            let t = (m - a) as f64 / span;
            out[m] = va * (1.0 - t) + vb * t;
        }
    }
}

/// y_hat(m, n) = H_hat(m, n) sqrt(gamma_s) s_s(m, n)
pub fn reconstruct_prs(est: &ChannelEstimate, grid: &ResourceGrid) -> CMatrix {
    let a_s = grid.split.sensing_amplitude();
    &est.h_hat * &grid.prs_layer.mapv(|v| v * a_s)
}

pub fn cancel_interference(y: &CMatrix, y_hat: &CMatrix) -> Result<CMatrix> {
    if y.dim() != y_hat.dim() {
        return Err(IsacError::ShapeMismatch {
            left: y.dim(),
            right: y_hat.dim(),
        });
    }
    Ok(y - y_hat)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bits: Vec<u8>,
    /// Data REs whose channel estimate was exactly zero; their bits are coin flips.
    pub erased_res: usize,
}

/// Zero-forcing equalisation and hard QPSK decisions over the grid's data REs.
pub fn demodulate(
    y: &CMatrix,
    est: &ChannelEstimate,
    grid: &ResourceGrid,
    mode: DetectionMode,
    erasure_seed: u64,
) -> Result<Detection> {
    let amplitude = grid.split.comm_amplitude();
    if amplitude == 0.0 {
        return Err(IsacError::Unobservable);
    }
    let cancelled;
    let y_used = match mode {
        DetectionMode::Nic => y,
        DetectionMode::Ic => {
            cancelled = cancel_interference(y, &reconstruct_prs(est, grid))?;
            &cancelled
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(erasure_seed);
    let mut bits = Vec::with_capacity(2 * grid.data_res.len());
    let mut erased_res = 0;
    for &(m, n) in &grid.data_res {
        let h = est.h_hat[[m, n]];
        if h == Complex64::ZERO {
            erased_res += 1;
            bits.push(rng.random_range(0..=1u8));
            bits.push(rng.random_range(0..=1u8));
            continue;
        }
        let z = y_used[[m, n]] / (h * amplitude);
        bits.push(u8::from(z.re < 0.0));
        bits.push(u8::from(z.im < 0.0));
    }
    Ok(Detection { bits, erased_res })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerReport {
    pub total_bits: u64,
    pub error_bits_nic: u64,
    pub error_bits_ic: u64,
    pub slots: u64,
    pub ber_nic: f64,
    pub ber_ic: f64,
    /// bits_per_slot (1 - BER)
    pub goodput_proxy_nic: f64,
    pub goodput_proxy_ic: f64,
}

impl BerReport {
    pub fn from_counts(total_bits: u64, error_bits_nic: u64, error_bits_ic: u64, slots: u64) -> Self {
        let ratio = |e: u64| if total_bits == 0 { 0.0 } else { e as f64 / total_bits as f64 };
        let (ber_nic, ber_ic) = (ratio(error_bits_nic), ratio(error_bits_ic));
        let bits_per_slot = if slots == 0 { 0.0 } else { total_bits as f64 / slots as f64 };
        Self {
            total_bits,
            error_bits_nic,
            error_bits_ic,
            slots,
            ber_nic,
            ber_ic,
            goodput_proxy_nic: bits_per_slot * (1.0 - ber_nic),
            goodput_proxy_ic: bits_per_slot * (1.0 - ber_ic),
        }
    }

    /// Pools counts; the result is independent of the order of `reports`.
    pub fn pooled<'a>(reports: impl IntoIterator<Item = &'a BerReport>) -> Self {
        let (t, a, b, s) = reports.into_iter().fold((0, 0, 0, 0), |acc, r| {
            (
                acc.0 + r.total_bits,
                acc.1 + r.error_bits_nic,
                acc.2 + r.error_bits_ic,
                acc.3 + r.slots,
            )
        });
        Self::from_counts(t, a, b, s)
    }
}

fn hamming(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

pub fn compute_ber_report(tx_bits: &[u8], rx_nic: &[u8], rx_ic: &[u8], dims: &GridDims) -> Result<BerReport> {
    for rx in [rx_nic, rx_ic] {
        if rx.len() != tx_bits.len() {
            return Err(IsacError::LengthMismatch {
                left: tx_bits.len(),
                right: rx.len(),
            });
        }
    }
    Ok(BerReport::from_counts(
        tx_bits.len() as u64,
        hamming(tx_bits, rx_nic),
        hamming(tx_bits, rx_ic),
        dims.slots() as u64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm_channel::{add_awgn, apply_channel_freq};
    use crate::resource_grid::{build_grid, DmrsConfig, GridLayout, PdschConfig, PowerSplit, PrsConfig};

    fn params() -> OfdmParams {
        OfdmParams::new(120e3, 25e9).unwrap()
    }

    fn layout(comb: usize) -> GridLayout {
        GridLayout {
            dims: GridDims::new(24, 2).unwrap(),
            prs: PrsConfig::new(comb, 1, 12, 0, 0).unwrap(),
            dmrs: DmrsConfig::new(0, 0).unwrap(),
            pdsch: PdschConfig::new(0..=12).unwrap(),
        }
    }

    #[test]
    fn identity_channel_estimate_is_one() {
        let grid = build_grid(&layout(4), PowerSplit::from_sqrt_gamma_s(0.5).unwrap(), 1).unwrap();
        let y = grid.combined.clone();
        let est = estimate_channel(&y, &grid).unwrap();
        assert!(est.h_hat.iter().all(|h| (h - Complex64::ONE).norm() < 1e-12));
    }

    #[test]
    fn ls_matches_channel_at_pilots() {
        let p = params();
        let grid = build_grid(&layout(4), PowerSplit::from_sqrt_gamma_s(0.5).unwrap(), 1).unwrap();
        let target = Target::new(40.0, 7.0, Complex64::new(0.6, 0.3)).unwrap();
        let y = apply_channel_freq(&grid.combined, &[target], &p);
        let est = estimate_channel(&y, &grid).unwrap();
        for n_d in [0, 14] {
            for m in dmrs_re_pattern(288) {
                let h = target.alpha * path_phasor(target.delay(), target.doppler(&p), m, n_d, &p);
                assert!((est.h_hat[[m, n_d]] - h).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolation_is_linear_and_edge_held() {
        let mut out = vec![Complex64::ZERO; 10];
        interpolate_linear(&[2, 6], &[Complex64::new(1.0, 0.0), Complex64::new(5.0, 4.0)], &mut out);
        assert_eq!(out[0], Complex64::new(1.0, 0.0));
        assert_eq!(out[4], Complex64::new(3.0, 2.0));
        assert_eq!(out[9], Complex64::new(5.0, 4.0));
    }

    #[test]
    fn unobservable_without_comm_power() {
        let grid = build_grid(&layout(4), PowerSplit::new(1.0, 0.0).unwrap(), 1).unwrap();
        assert_eq!(estimate_channel(&grid.combined, &grid), Err(IsacError::Unobservable));
    }

    #[test]
    fn reconstruction_and_cancellation_algebra() {
        let p = params();
        let split = PowerSplit::from_sqrt_gamma_s(0.6).unwrap();
        let grid = build_grid(&layout(2), split, 2).unwrap();
        let targets = [Target::unit(500.0, 3.0).unwrap(), Target::unit(520.0, -4.0).unwrap()];
        let y = apply_channel_freq(&grid.combined, &targets, &p);
        let perfect = perfect_estimate(&targets, &p, &SyncReference::none(), y.dim());

        let y_hat = reconstruct_prs(&perfect, &grid);
        let prs_part = apply_channel_freq(&grid.prs_layer.mapv(|v| v * split.sensing_amplitude()), &targets, &p);
        for (a, b) in y_hat.iter().zip(prs_part.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        let y_tilde = cancel_interference(&y, &y_hat).unwrap();
        let comm_part = apply_channel_freq(&grid.data_layer.mapv(|v| v * split.comm_amplitude()), &targets, &p);
        for &(m, n) in &grid.data_res {
            assert!((y_tilde[[m, n]] - comm_part[[m, n]]).norm() < 1e-12);
        }
        assert_eq!(cancel_interference(&y, &CMatrix::zeros(y.dim())).unwrap(), y);
        let twice = cancel_interference(&y_tilde, &y_hat).unwrap();
        let expect = &y - &y_hat.mapv(|v| v * 2.0);
        assert!(twice.iter().zip(expect.iter()).all(|(a, b)| (a - b).norm() < 1e-12));

        let none = build_grid(&layout(2), PowerSplit::new(0.0, 1.0).unwrap(), 2).unwrap();
        assert!(reconstruct_prs(&perfect, &none).iter().all(|v| *v == Complex64::ZERO));
    }

    #[test]
    fn perfect_ic_is_error_free() {
        let p = params();
        for sqrt_gc in [0.3, 0.7, 0.95] {
            let split = PowerSplit::from_sqrt_gamma_c(sqrt_gc).unwrap();
            let grid = build_grid(&layout(2), split, 3).unwrap();
            let targets = [Target::unit(711.0, 2.0).unwrap(), Target::unit(846.0, 10.0).unwrap()];
            let sync = SyncReference::strongest_path(&targets, &p);
            let y = sync.apply(&apply_channel_freq(&grid.combined, &targets, &p), &p);
            let est = perfect_estimate(&targets, &p, &sync, y.dim());
            let det = demodulate(&y, &est, &grid, DetectionMode::Ic, 0).unwrap();
            assert_eq!(det.bits, grid.tx_bits);
        }
    }

    #[test]
    fn noiseless_comm_only_identity() {
        let grid = build_grid(&layout(12), PowerSplit::new(0.0, 1.0).unwrap(), 4).unwrap();
        let est = estimate_channel(&grid.combined, &grid).unwrap();
        let det = demodulate(&grid.combined, &est, &grid, DetectionMode::Nic, 0).unwrap();
        assert_eq!(det.bits, grid.tx_bits);
        assert_eq!(det.erased_res, 0);
    }

    #[test]
    fn zero_estimate_erases() {
        let grid = build_grid(&layout(12), PowerSplit::new(0.0, 1.0).unwrap(), 4).unwrap();
        let est = ChannelEstimate { h_hat: CMatrix::zeros(grid.combined.dim()), method: EstimationMethod::LsInterp };
        let det = demodulate(&grid.combined, &est, &grid, DetectionMode::Nic, 9).unwrap();
        assert_eq!(det.erased_res, grid.data_res.len());
        assert_eq!(det.bits, demodulate(&grid.combined, &est, &grid, DetectionMode::Nic, 9).unwrap().bits);
    }

    #[test]
    fn reconstruction_error_falls_with_snr() {
        let p = params();
        let split = PowerSplit::from_sqrt_gamma_c(0.7).unwrap();
        let grid = build_grid(&layout(2), split, 5).unwrap();
        let targets = [Target::unit(711.0, 2.0).unwrap(), Target::unit(846.0, 10.0).unwrap()];
        let sync = SyncReference::strongest_path(&targets, &p);
        let clean = sync.apply(&apply_channel_freq(&grid.combined, &targets, &p), &p);
        let truth = reconstruct_prs(&perfect_estimate(&targets, &p, &sync, clean.dim()), &grid);
        let mask = grid.allocated_mask();
        let errors: Vec<f64> = [0.0, 15.0, 30.0]
            .iter()
            .map(|&snr| {
                let y = add_awgn(&clean, snr, 11, &mask).unwrap();
                let est = estimate_channel(&y, &grid).unwrap();
                let y_hat = reconstruct_prs(&est, &grid);
                y_hat.iter().zip(truth.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
            })
            .collect();
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    }

    #[test]
    fn ber_report_cases() {
        let dims = GridDims::new(24, 2).unwrap();
        let tx: Vec<u8> = (0..10_000).map(|i| ((i * 7919) % 3 % 2) as u8).collect();
        let r = compute_ber_report(&tx, &tx, &tx, &dims).unwrap();
        assert_eq!(r.ber_nic, 0.0);
        assert_eq!(r.goodput_proxy_ic, 5000.0);
        let inv: Vec<u8> = tx.iter().map(|b| 1 - b).collect();
        let r = compute_ber_report(&tx, &inv, &tx, &dims).unwrap();
        assert_eq!(r.ber_nic, 1.0);
        assert_eq!(r.goodput_proxy_nic, 0.0);
        assert!(compute_ber_report(&tx, &tx[1..], &tx, &dims).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let tx: Vec<u8> = (0..20_000).map(|_| rng.random_range(0..=1)).collect();
        let rx: Vec<u8> = (0..20_000).map(|_| rng.random_range(0..=1)).collect();
        let r = compute_ber_report(&tx, &rx, &rx, &dims).unwrap();
        let sigma = (0.25f64 / 20_000.0).sqrt();
        assert!((r.ber_nic - 0.5).abs() < 3.0 * sigma);
    }
}
