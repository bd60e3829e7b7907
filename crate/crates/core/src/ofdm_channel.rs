//! OFDM numerology, CP-OFDM modulation and the multi-target bistatic channel.
//!
//! The frequency-domain path applies
//! y(m,n) = sum_k alpha_k exp(j2pi n T0 fd_k) exp(-j2pi m df tau_k) x(m,n)
//! without an ISI term. The time-domain path delays and Doppler-shifts the
//! sample stream and exists to cross-check the frequency-domain one.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::dsp;
use crate::error::{IsacError, Result};
use crate::CMatrix;

/// Speed of light in m/s.
pub const C0: f64 = 299_792_458.0;

/// Normal cyclic prefix proportion: 144 samples per 2048.
pub const NORMAL_CP_FRACTION: f64 = 144.0 / 2048.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmParams {
    delta_f: f64,
    t_cp: f64,
    f_c: f64,
}

impl OfdmParams {
    /// Normal CP.
    pub fn new(delta_f: f64, f_c: f64) -> Result<Self> {
        Self::with_cp(delta_f, f_c, NORMAL_CP_FRACTION / delta_f)
    }

    pub fn with_cp(delta_f: f64, f_c: f64, t_cp: f64) -> Result<Self> {
        if !(delta_f.is_finite() && delta_f > 0.0) {
            return Err(IsacError::config("ofdm.delta_f_hz", "must be positive"));
        }
        if !(f_c.is_finite() && f_c > 0.0) {
            return Err(IsacError::config("ofdm.f_c_hz", "must be positive"));
        }
        if !(t_cp.is_finite() && t_cp >= 0.0) {
            return Err(IsacError::config("ofdm.t_cp_s", "must be non-negative"));
        }
        Ok(Self { delta_f, t_cp, f_c })
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    /// Useful symbol duration T_s = 1/df.
    pub fn t_s(&self) -> f64 {
        1.0 / self.delta_f
    }

    pub fn t_cp(&self) -> f64 {
        self.t_cp
    }

    /// Total symbol duration T_0 = T_s + T_cp.
    pub fn t_0(&self) -> f64 {
        self.t_s() + self.t_cp
    }

    pub fn f_c(&self) -> f64 {
        self.f_c
    }

    pub fn cp_samples(&self, subcarriers: usize, oversample: usize) -> usize {
        (self.t_cp / self.t_s() * (subcarriers * oversample) as f64).round() as usize
    }

    pub fn sample_rate(&self, subcarriers: usize, oversample: usize) -> f64 {
        (subcarriers * oversample) as f64 * self.delta_f
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub alpha: Complex64,
    /// Transmitter -> target -> receiver path length in meters.
    pub bistatic_range: f64,
    /// m/s
    pub velocity: f64,
}

impl Target {
    pub fn new(bistatic_range: f64, velocity: f64, alpha: Complex64) -> Result<Self> {
        if !(bistatic_range.is_finite() && bistatic_range >= 0.0) {
            return Err(IsacError::config(
                "channel.targets",
                format!("bistatic range {bistatic_range} must be finite and >= 0"),
            ));
        }
        if !velocity.is_finite() || !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(IsacError::config("channel.targets", "non-finite target parameter"));
        }
        Ok(Self {
            alpha,
            bistatic_range,
            velocity,
        })
    }

    pub fn unit(bistatic_range: f64, velocity: f64) -> Result<Self> {
        Self::new(bistatic_range, velocity, Complex64::ONE)
    }

    pub fn delay(&self) -> f64 {
        self.bistatic_range / C0
    }

    pub fn doppler(&self, params: &OfdmParams) -> f64 {
        velocity_to_doppler(self.velocity, params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub targets: Vec<Target>,
    /// `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub noise_seed: u64,
}

impl ChannelConfig {
    pub fn noiseless(targets: Vec<Target>) -> Self {
        Self {
            targets,
            snr_db: f64::INFINITY,
            noise_seed: 0,
        }
    }
}

/// f_d = 2 v f_c / c0
pub fn velocity_to_doppler(velocity: f64, params: &OfdmParams) -> f64 {
    2.0 * velocity * params.f_c / C0
}

/// Unit-modulus phasor of a single path on RE (m, n), alpha excluded.
#[inline]
pub fn path_phasor(delay: f64, doppler: f64, m: usize, n: usize, params: &OfdmParams) -> Complex64 {
    let phase = 2.0 * PI * (n as f64 * params.t_0() * doppler - m as f64 * params.delta_f * delay);
    Complex64::from_polar(1.0, phase)
}

/// Per-RE channel factor H(m, n) summed over all targets.
pub fn channel_response(targets: &[Target], params: &OfdmParams, shape: (usize, usize)) -> CMatrix {
    let mut h = CMatrix::zeros(shape);
    for t in targets {
        let (tau, fd) = (t.delay(), t.doppler(params));
        h.indexed_iter_mut()
            .for_each(|((m, n), v)| *v += t.alpha * path_phasor(tau, fd, m, n, params));
    }
    h
}

/// Frequency-domain channel on an arbitrary grid; the ISI term is not modeled.
pub fn apply_channel_freq(grid: &CMatrix, targets: &[Target], params: &OfdmParams) -> CMatrix {
    channel_response(targets, params, grid.dim()) * grid
}

/// Adds circular complex Gaussian noise with 2 sigma^2 = P_sig / 10^(snr/10),
/// P_sig being the mean power of `y` over `allocated` REs.
pub fn add_awgn(y: &CMatrix, snr_db: f64, seed: u64, allocated: &Array2<bool>) -> Result<CMatrix> {
    if snr_db == f64::INFINITY {
        return Ok(y.clone());
    }
    if !snr_db.is_finite() {
        return Err(IsacError::config("channel.snr_db", format!("{snr_db} is not usable")));
    }
    if y.dim() != allocated.dim() {
        return Err(IsacError::ShapeMismatch {
            left: y.dim(),
            right: allocated.dim(),
        });
    }
    let (sum, count) = y
        .iter()
        .zip(allocated.iter())
        .filter(|(_, &a)| a)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v.norm_sqr(), c + 1));
    if count == 0 {
        return Ok(y.clone());
    }
    let noise_power = sum / count as f64 / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(y.mapv(|v| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        v + Complex64::new(re, im) * sigma
    }))
}

/// CP-OFDM modulation with a unitary inverse transform of size M * oversample.
pub fn ofdm_modulate(grid: &CMatrix, params: &OfdmParams, oversample: usize) -> Result<Vec<Complex64>> {
    if oversample == 0 {
        return Err(IsacError::config("oversample", "must be >= 1"));
    }
    let (m_count, n_count) = grid.dim();
    let nfft = m_count * oversample;
    let cp = params.cp_samples(m_count, oversample);
    let plan = dsp::plan_inverse(nfft);
    let scale = 1.0 / (nfft as f64).sqrt();
    let mut out = Vec::with_capacity(n_count * (nfft + cp));
    let mut buf = vec![Complex64::ZERO; nfft];
    for col in grid.columns() {
        buf.iter_mut().for_each(|v| *v = Complex64::ZERO);
        buf[..m_count].iter_mut().zip(col.iter()).for_each(|(b, &x)| *b = x * scale);
        plan.process(&mut buf);
        out.extend_from_slice(&buf[nfft - cp..]);
        out.extend_from_slice(&buf);
    }
    Ok(out)
}

pub fn ofdm_demodulate(
    stream: &[Complex64],
    params: &OfdmParams,
    shape: (usize, usize),
    oversample: usize,
) -> Result<CMatrix> {
    if oversample == 0 {
        return Err(IsacError::config("oversample", "must be >= 1"));
    }
    let (m_count, n_count) = shape;
    let nfft = m_count * oversample;
    let cp = params.cp_samples(m_count, oversample);
    let sym_len = nfft + cp;
    if stream.len() != n_count * sym_len {
        return Err(IsacError::LengthMismatch {
            left: stream.len(),
            right: n_count * sym_len,
        });
    }
    let plan = dsp::plan_forward(nfft);
    let scale = 1.0 / (nfft as f64).sqrt();
    let mut grid = CMatrix::zeros(shape);
    let mut buf = vec![Complex64::ZERO; nfft];
    for n in 0..n_count {
        let start = n * sym_len + cp;
        buf.copy_from_slice(&stream[start..start + nfft]);
        plan.process(&mut buf);
        for m in 0..m_count {
            grid[[m, n]] = buf[m] * scale;
        }
    }
    Ok(grid)
}

/// Time-domain channel: each path is delayed by an integer number of samples
/// and rotated by exp(j2pi fd t). Validation use only.
pub fn apply_channel_time(
    stream: &[Complex64],
    targets: &[Target],
    params: &OfdmParams,
    subcarriers: usize,
    oversample: usize,
) -> Result<Vec<Complex64>> {
    let fs = params.sample_rate(subcarriers, oversample);
    let mut out = vec![Complex64::ZERO; stream.len()];
    for t in targets {
        let exact = t.delay() * fs;
        let shift = exact.round();
        if (exact - shift).abs() > 1e-6 {
            return Err(IsacError::config(
                "channel.targets",
                format!("delay of {exact} samples is not an integer sample"),
            ));
        }
        let shift = shift as usize;
        if shift > stream.len() {
            return Err(IsacError::Runtime(format!(
                "delay of {shift} samples exceeds stream length {}",
                stream.len()
            )));
        }
        let fd = t.doppler(params);
        for i in shift..stream.len() {
            let rot = Complex64::from_polar(1.0, 2.0 * PI * fd * i as f64 / fs);
            out[i] += t.alpha * stream[i - shift] * rot;
        }
    }
    Ok(out)
}
