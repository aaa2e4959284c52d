use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{DspError, FeatureSequence, SPEECH_RATE};
use crate::nn::Matrix;
use crate::scalar::Scalar;
use crate::seed::fnv1a;

/// Front-end settings. Only the coefficient count is fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct MfccConfig {
    pub sample_rate: u32,
    /// Seconds.
    pub frame_len: f64,
    /// Seconds.
    pub hop: f64,
    /// `None` picks the next power of two at or above the frame length.
    pub n_fft: Option<usize>,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            sample_rate: SPEECH_RATE,
            frame_len: 0.025,
            hop: 0.010,
            n_fft: None,
            n_mels: 26,
            n_coeffs: 13,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn frame_samples(&self) -> usize {
        (self.frame_len * f64::from(self.sample_rate)).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop * f64::from(self.sample_rate)).round() as usize
    }

    pub fn fft_size(&self) -> usize {
        self.n_fft.unwrap_or_else(|| self.frame_samples().next_power_of_two())
    }

    pub fn validate(&self) -> Result<(), DspError> {
        let bad = |m: String| Err(DspError::Config(m));
        if self.sample_rate == 0 {
            return bad("sample rate must be positive".into());
        }
        if self.n_coeffs != 13 {
            return bad(format!("exactly 13 coefficients are produced, got {}", self.n_coeffs));
        }
        if self.n_coeffs > self.n_mels {
            return bad(format!("{} coefficients need at least as many mel filters, got {}", self.n_coeffs, self.n_mels));
        }
        if self.frame_samples() < 2 || self.hop_samples() == 0 {
            return bad("frame and hop must each span at least one sample (frames two)".into());
        }
        if self.frame_len < self.hop {
            return bad(format!("frame length {} s is shorter than the hop {} s", self.frame_len, self.hop));
        }
        if self.fft_size() < self.frame_samples() {
            return bad(format!("n_fft {} is below the frame length {}", self.fft_size(), self.frame_samples()));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return bad("log floor must be positive".into());
        }
        Ok(())
    }

    /// Short stable digest identifying the settings in feature dumps.
    pub fn hash(&self) -> u64 {
        let canon = format!(
            "sr={};frame={:?};hop={:?};nfft={};mels={};coeffs={};floor={:?};window=hamming;dct=ortho",
            self.sample_rate,
            self.frame_len,
            self.hop,
            self.fft_size(),
            self.n_mels,
            self.n_coeffs,
            self.log_floor
        );
        fnv1a(canon.as_bytes())
    }
}

/// `1 + floor((n - frame) / hop)`, or `None` if the signal is shorter than
/// one frame.
pub fn frame_count(n: usize, frame: usize, hop: usize) -> Option<usize> {
    (n >= frame && hop > 0).then(|| 1 + (n - frame) / hop)
}

/// Overlapping frames; the tail remainder is dropped.
pub fn frame_signal<T>(samples: &[T], frame: usize, hop: usize) -> Result<Vec<&[T]>, DspError> {
    if hop == 0 || frame == 0 {
        return Err(DspError::Size("frame and hop must be positive".into()));
    }
    let t = frame_count(samples.len(), frame, hop).ok_or(DspError::TooShort {
        needed: frame,
        found: samples.len(),
    })?;
    Ok((0..t).map(|i| &samples[i * hop..i * hop + frame]).collect())
}

/// `w[n] = 0.54 − 0.46·cos(2πn/(L−1))`.
pub fn hamming_window<T: Scalar>(len: usize) -> Result<Vec<T>, DspError> {
    if len < 2 {
        return Err(DspError::Size(format!("window length must be at least 2, got {len}")));
    }
    let denom = (len - 1) as f64;
    Ok((0..len)
        .map(|n| T::lit(0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos()))
        .collect())
}

/// `|DFT_k|² / n_fft` for `k = 0..=n_fft/2`, zero-padding the frame.
pub fn power_spectrum<T: Scalar>(frame: &[T], n_fft: usize) -> Result<Vec<T>, DspError> {
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let mut buf = Vec::new();
    power_spectrum_with(fft.as_ref(), frame, &mut buf)
}

fn power_spectrum_with<T: Scalar>(
    fft: &dyn Fft<T>,
    frame: &[T],
    buf: &mut Vec<Complex<T>>,
) -> Result<Vec<T>, DspError> {
    let n_fft = fft.len();
    if n_fft < 2 || frame.len() > n_fft {
        return Err(DspError::Size(format!("frame of {} samples does not fit n_fft {n_fft}", frame.len())));
    }
    buf.clear();
    buf.extend(frame.iter().map(|&x| Complex::new(x, T::zero())));
    buf.resize(n_fft, Complex::new(T::zero(), T::zero()));
    fft.process(buf);
    let scale = T::one() / T::from_usize_lossy(n_fft);
    Ok(buf[..=n_fft / 2].iter().map(|c| c.norm_sqr() * scale).collect())
}

pub fn mel(f_hz: f64) -> f64 {
    2595.0 * (1.0 + f_hz / 700.0).log10()
}

pub fn mel_inv(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters with edges equally spaced on the mel scale from 0 Hz
/// to Nyquist, evaluated at the FFT bin frequencies and scaled so each
/// peaks at 1.
pub fn mel_filterbank<T: Scalar>(n_mels: usize, n_fft: usize, sample_rate: u32) -> Result<Matrix<T>, DspError> {
    if n_mels < 2 {
        return Err(DspError::Filterbank(format!("need at least 2 filters, got {n_mels}")));
    }
    if n_fft < 2 {
        return Err(DspError::Filterbank(format!("n_fft {n_fft} too small")));
    }
    let sr = f64::from(sample_rate);
    let top = mel(sr / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_inv(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let n_bins = n_fft / 2 + 1;
    let mut fb = Matrix::zeros(n_mels, n_bins);
    for m in 0..n_mels {
        let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
        let row: Vec<f64> = (0..n_bins)
            .map(|k| {
                let f = k as f64 * sr / n_fft as f64;
                if f > l && f <= c {
                    (f - l) / (c - l)
                } else if f > c && f < r {
                    (r - f) / (r - c)
                } else {
                    0.0
                }
            })
            .collect();
        let peak = row.iter().copied().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(DspError::Filterbank(format!(
                "filter {m} ({l:.1}–{r:.1} Hz) contains no FFT bin; use fewer filters or a larger n_fft"
            )));
        }
        for (k, v) in row.into_iter().enumerate() {
            fb[(m, k)] = T::lit(v / peak);
        }
    }
    Ok(fb)
}

fn dct_matrix(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for k in 0..n {
        let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            c[k * n + i] = s * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos();
        }
    }
    c
}

/// Orthonormal DCT-II.
pub fn dct_ii<T: Scalar>(x: &[T]) -> Vec<T> {
    let n = x.len();
    let c = dct_matrix(n);
    (0..n)
        .map(|k| (0..n).fold(T::zero(), |acc, i| acc + T::lit(c[k * n + i]) * x[i]))
        .collect()
}

/// Orthonormal DCT-III, the inverse of [`dct_ii`].
pub fn dct_iii<T: Scalar>(x: &[T]) -> Vec<T> {
    let n = x.len();
    let c = dct_matrix(n);
    (0..n)
        .map(|i| (0..n).fold(T::zero(), |acc, k| acc + T::lit(c[k * n + i]) * x[k]))
        .collect()
}

/// Precomputed window, FFT plan, filterbank and DCT rows. Immutable once
/// built and shareable across threads.
pub struct Mfcc<T: Scalar> {
    config: MfccConfig,
    window: Vec<T>,
    fft: Arc<dyn Fft<T>>,
    filterbank: Matrix<T>,
    dct: Matrix<T>,
}

impl<T: Scalar> Mfcc<T> {
    pub fn new(config: MfccConfig) -> Result<Self, DspError> {
        config.validate()?;
        let window = hamming_window(config.frame_samples())?;
        let fft = FftPlanner::new().plan_fft_forward(config.fft_size());
        let filterbank = mel_filterbank(config.n_mels, config.fft_size(), config.sample_rate)?;
        let full = dct_matrix(config.n_mels);
        let dct = Matrix::from_vec(
            config.n_coeffs,
            config.n_mels,
            full[..config.n_coeffs * config.n_mels].iter().map(|&v| T::lit(v)).collect(),
        )
        .map_err(|e| DspError::Config(e.to_string()))?;
        Ok(Self {
            config,
            window,
            fft,
            filterbank,
            dct,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &Matrix<T> {
        &self.filterbank
    }

    /// Mel filter outputs per frame, `T × n_mels`, before the log.
    pub fn mel_energies(&self, samples: &[T]) -> Result<Matrix<T>, DspError> {
        let frames = frame_signal(samples, self.config.frame_samples(), self.config.hop_samples())?;
        let n_mels = self.config.n_mels;
        let mut out = Matrix::zeros(frames.len(), n_mels);
        let mut windowed = vec![T::zero(); self.window.len()];
        let mut buf = Vec::with_capacity(self.config.fft_size());
        for (t, frame) in frames.iter().enumerate() {
            for ((w, &x), &h) in windowed.iter_mut().zip(frame.iter()).zip(&self.window) {
                *w = x * h;
            }
            let spec = power_spectrum_with(self.fft.as_ref(), &windowed, &mut buf)?;
            let row = &mut out.as_mut_slice()[t * n_mels..(t + 1) * n_mels];
            self.filterbank.matvec_acc(&spec, row);
        }
        Ok(out)
    }

    pub fn compute(&self, samples: &[T], utterance_id: &str) -> Result<FeatureSequence<T>, DspError> {
        let energies = self.mel_energies(samples)?;
        let floor = T::lit(self.config.log_floor);
        let n_c = self.config.n_coeffs;
        let mut frames = Matrix::zeros(energies.rows(), n_c);
        let mut logs = vec![T::zero(); self.config.n_mels];
        for t in 0..energies.rows() {
            for (l, &e) in logs.iter_mut().zip(energies.row(t)) {
                *l = e.max(floor).ln();
            }
            self.dct.matvec_acc(&logs, &mut frames.as_mut_slice()[t * n_c..(t + 1) * n_c]);
        }
        FeatureSequence::new(frames, utterance_id)
    }
}

/// One-shot MFCC extraction; build an [`Mfcc`] to reuse the setup.
pub fn mfcc<T: Scalar>(samples: &[T], config: &MfccConfig, utterance_id: &str) -> Result<FeatureSequence<T>, DspError> {
    Mfcc::new(config.clone())?.compute(samples, utterance_id)
}
