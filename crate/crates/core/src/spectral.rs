//! Spectral analysis: Welch PSD estimation, Lorentzian oscillator fits, and
//! peak finding. All PSDs are one-sided on the ordinary-frequency axis, so
//! integrating a spectrum over f recovers the series variance.

use crate::error::{Error, Result};
use crate::optim::nelder_mead;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    pub fn parse(name: &str) -> Result<Window> {
        match name {
            "hann" => Ok(Window::Hann),
            "rect" | "rectangular" => Ok(Window::Rectangular),
            other => Err(Error::config(format!("unknown window '{other}'"))),
        }
    }

    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| {
                    let x = std::f64::consts::PI * i as f64 / n as f64;
                    x.sin() * x.sin()
                })
                .collect(),
        }
    }
}

/// One-sided power spectral density on a uniform ordinary-frequency grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Psd {
    /// [Hz], ascending, uniform, starting at 0.
    pub frequencies: Vec<f64>,
    /// [unit^2/Hz].
    pub values: Vec<f64>,
    pub n_averages: usize,
    pub window: Window,
}

impl Psd {
    pub fn df(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    /// Band power by rectangle rule, [f_lo, f_hi] inclusive.
    pub fn integrate(&self, f_lo: f64, f_hi: f64) -> f64 {
        let df = self.df();
        self.frequencies
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
            .map(|(_, v)| v * df)
            .sum()
    }

    /// Total power excluding the DC bin.
    pub fn total_power(&self) -> f64 {
        let df = self.df();
        self.values.iter().skip(1).map(|v| v * df).sum()
    }

    fn band_indices(&self, f_lo: f64, f_hi: f64) -> Vec<usize> {
        self.frequencies
            .iter()
            .enumerate()
            .filter(|(_, f)| **f >= f_lo && **f <= f_hi)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Damped-oscillator fit result. Frequencies are stored angular;
/// `area` is the band-integrated peak power so that
/// S(f) = area * 4 gamma omega0^2 / ((W^2 - omega0^2)^2 + gamma^2 W^2) + background,
/// with W = 2 pi f, integrates (over f, 0..inf) to exactly `area` above
/// background.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LorentzianFit {
    /// Resonance [rad/s].
    pub omega0: f64,
    /// Full linewidth [rad/s].
    pub gamma: f64,
    /// Integrated peak power [unit^2].
    pub area: f64,
    /// White background [unit^2/Hz].
    pub background: f64,
    /// Covariance of (omega0, gamma, area, background), Gauss-Newton estimate.
    pub covariance: [[f64; 4]; 4],
}

impl LorentzianFit {
    /// Model evaluation at ordinary frequency f [Hz].
    pub fn eval(&self, f: f64) -> f64 {
        lorentzian(f, self.omega0, self.gamma, self.area) + self.background
    }

    pub fn omega0_std(&self) -> f64 {
        self.covariance[0][0].max(0.0).sqrt()
    }
}

/// Normalized oscillator line: integrates over f in (0, inf) to `area`.
fn lorentzian(f: f64, omega0: f64, gamma: f64, area: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f;
    let d = w * w - omega0 * omega0;
    area * 4.0 * gamma * omega0 * omega0 / (d * d + gamma * gamma * w * w)
}

/// Welch PSD: mean modified periodogram over overlapping windowed segments.
/// One-sided, window-power normalized; unit-variance white noise sampled at
/// 1/dt comes out flat at 2 dt (= sigma^2 / f_Nyquist).
pub fn welch(
    series: &[f64],
    dt: f64,
    segment_length: usize,
    overlap: f64,
    window: Window,
) -> Result<Psd> {
    if !(dt > 0.0) {
        return Err(Error::domain("dt must be > 0"));
    }
    if segment_length < 4 || segment_length % 2 != 0 {
        return Err(Error::domain("segment_length must be even and >= 4"));
    }
    if series.len() < segment_length {
        return Err(Error::domain("series too short for requested segment length"));
    }
    if !(0.0..=0.9).contains(&overlap) {
        return Err(Error::domain("overlap must be in [0, 0.9]"));
    }

    let n = segment_length;
    let hop = ((n as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let coeffs = window.coefficients(n);
    let win_power: f64 = coeffs.iter().map(|w| w * w).sum();
    let fs = 1.0 / dt;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut acc = vec![0.0f64; n / 2 + 1];
    let mut n_averages = 0usize;
    let mut buf: Vec<Complex<f64>> = vec![Complex::default(); n];

    let mut start = 0usize;
    while start + n <= series.len() {
        for i in 0..n {
            buf[i] = Complex::new(series[start + i] * coeffs[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            let mag2 = buf[k].norm_sqr();
            // one-sided: double all interior bins
            let scale = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            *a += scale * mag2 / (fs * win_power);
        }
        n_averages += 1;
        start += hop;
    }

    let df = fs / n as f64;
    Ok(Psd {
        frequencies: (0..=n / 2).map(|k| k as f64 * df).collect(),
        values: acc.iter().map(|a| a / n_averages as f64).collect(),
        n_averages,
        window,
    })
}

/// Fit a single damped-oscillator line plus white background inside
/// `[f_lo, f_hi]`, by least squares on log(PSD) (variance-stabilizing for
/// averaged periodograms). Parameters are searched in log space.
pub fn fit_lorentzian(psd: &Psd, f_lo: f64, f_hi: f64) -> Result<LorentzianFit> {
    let idx = psd.band_indices(f_lo, f_hi);
    if idx.len() < 8 {
        return Err(Error::fit("band too narrow for a 4-parameter fit"));
    }
    let band_f: Vec<f64> = idx.iter().map(|&i| psd.frequencies[i]).collect();
    let band_v: Vec<f64> = idx.iter().map(|&i| psd.values[i].max(1e-300)).collect();

    // initial guesses from the raw peak
    let mut sorted = band_v.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let bg0 = sorted[sorted.len() / 2].max(1e-300);
    let (k_peak, &peak) = band_v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if peak < 3.0 * bg0 {
        return Err(Error::fit("no peak in band"));
    }
    let f0 = band_f[k_peak];
    // half-height width on the raw samples
    let half = bg0 + (peak - bg0) / 2.0;
    let mut k_left = k_peak;
    while k_left > 0 && band_v[k_left] > half {
        k_left -= 1;
    }
    let mut k_right = k_peak;
    while k_right + 1 < band_v.len() && band_v[k_right] > half {
        k_right += 1;
    }
    let fwhm = (band_f[k_right] - band_f[k_left]).max(psd.df());
    let omega0_0 = 2.0 * std::f64::consts::PI * f0;
    let gamma0 = 2.0 * std::f64::consts::PI * fwhm;
    let area0 = ((peak - bg0) * gamma0 / 4.0).max(1e-300);

    let model = |theta: &[f64], f: f64| -> f64 {
        lorentzian(f, theta[0].exp(), theta[1].exp(), theta[2].exp()) + theta[3].exp()
    };
    let objective = |theta: &[f64]| -> f64 {
        let mut sse = 0.0;
        for (f, v) in band_f.iter().zip(&band_v) {
            let m = model(theta, *f);
            if !(m > 0.0) || !m.is_finite() {
                return f64::INFINITY;
            }
            let r = m.ln() - v.ln();
            sse += r * r;
        }
        sse
    };

    let theta0 = [omega0_0.ln(), gamma0.ln(), area0.ln(), bg0.ln()];
    let result = nelder_mead(objective, &theta0, &[0.05, 0.5, 0.5, 0.5], 1e-12, 40_000);
    if !result.converged {
        return Err(Error::fit("fit did not converge"));
    }
    let omega0 = result.x[0].exp();
    let gamma = result.x[1].exp();
    let area = result.x[2].exp();
    let background = result.x[3].exp();
    if !(2.0 * std::f64::consts::PI * f_lo <= omega0
        && omega0 <= 2.0 * std::f64::consts::PI * f_hi)
    {
        return Err(Error::fit("fitted resonance left the band"));
    }

    // Gauss-Newton covariance in natural parameters: cov = s^2 (J^T J)^-1,
    // J_ij = d log-model / d p_j scaled back by p_j (log-space Jacobian).
    let p = [omega0, gamma, area, background];
    let n_pts = band_f.len();
    let mut jtj = nalgebra::Matrix4::<f64>::zeros();
    let mut sse = 0.0;
    for (f, v) in band_f.iter().zip(&band_v) {
        let m0 = lorentzian(*f, p[0], p[1], p[2]) + p[3];
        let r = m0.ln() - v.ln();
        sse += r * r;
        let mut row = [0.0f64; 4];
        for j in 0..4 {
            let h = p[j] * 1e-6;
            let mut pp = p;
            pp[j] += h;
            let mp = lorentzian(*f, pp[0], pp[1], pp[2]) + pp[3];
            row[j] = (mp.ln() - m0.ln()) / h;
        }
        for a in 0..4 {
            for b in 0..4 {
                jtj[(a, b)] += row[a] * row[b];
            }
        }
    }
    let dof = (n_pts.saturating_sub(4)).max(1) as f64;
    let s2 = sse / dof;
    let cov_m = jtj
        .try_inverse()
        .map(|inv| inv * s2)
        .unwrap_or_else(nalgebra::Matrix4::zeros);
    let mut covariance = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            covariance[a][b] = cov_m[(a, b)];
        }
    }

    Ok(LorentzianFit {
        omega0,
        gamma,
        area,
        background,
        covariance,
    })
}

/// Local maxima with at least `min_prominence` over the higher of the two
/// flanking key saddles; returned sorted by frequency as
/// (frequency, height, prominence).
pub fn find_peaks(psd: &Psd, min_prominence: f64) -> Vec<(f64, f64, f64)> {
    let v = &psd.values;
    let n = v.len();
    let mut out = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(v[i] > v[i - 1] && v[i] >= v[i + 1]) {
            continue;
        }
        // walk left/right to the nearest higher point (or edge), tracking the
        // minimum along the way
        let mut left_min = v[i];
        let mut j = i;
        while j > 0 {
            j -= 1;
            left_min = left_min.min(v[j]);
            if v[j] > v[i] {
                break;
            }
        }
        let mut right_min = v[i];
        let mut j = i;
        while j + 1 < n {
            j += 1;
            right_min = right_min.min(v[j]);
            if v[j] > v[i] {
                break;
            }
        }
        let prominence = v[i] - left_min.max(right_min);
        if prominence >= min_prominence {
            out.push((psd.frequencies[i], v[i], prominence));
        }
    }
    out
}
