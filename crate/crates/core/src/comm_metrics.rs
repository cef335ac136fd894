//! Spectral-efficiency bound, Monte-Carlo ergodic rate, and the WMMSE
//! receiver/weight quantities.
//!
//! Rates are computed in nats internally and converted to bits only at the
//! reporting boundary.

use rand::Rng;

use crate::channel::{los_gain, sample_nlos_gain, StatCsi};
use crate::scenario::SystemConfig;
use crate::{C64, CMat};

/// Per-subcarrier equivalent precoders `W_n` (N_t x K), aligned with the
/// retained subcarrier grid of the [`StatCsi`] they are used with.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    /// One `N_t x K` matrix per retained subcarrier.
    pub w: Vec<CMat>,
}

impl PrecoderSet {
    /// All-zero precoders.
    pub fn zeros(num_tx: usize, num_uts: usize, num_subcarriers: usize) -> Self {
        PrecoderSet { w: vec![CMat::zeros(num_tx, num_uts); num_subcarriers] }
    }

    /// Total transmit power `sum_n ||W_n||_F^2`.
    pub fn power(&self) -> f64 {
        self.w.iter().map(|w| w.norm_squared()).sum()
    }

    /// Scale every precoder by a common real factor.
    pub fn scale(&mut self, factor: f64) {
        let f = C64::new(factor, 0.0);
        for w in &mut self.w {
            *w *= f;
        }
    }
}

/// MMSE receivers and weights, per terminal and subcarrier.
#[derive(Debug, Clone)]
pub struct WmmseState {
    /// Linear receivers `u_{k,n}`, indexed `[k][n]`.
    pub receivers: Vec<Vec<C64>>,
    /// Positive weights `omega_{k,n}`, indexed `[k][n]`.
    pub weights: Vec<Vec<f64>>,
}

/// Beamforming gains `|hbar_k^T w_{n,i}|^2` for terminal `k` at subcarrier
/// position `n_pos`, one entry per stream.
fn stream_gains(stat: &StatCsi, w: &PrecoderSet, k: usize, n_pos: usize) -> Vec<f64> {
    let hbar = &stat.uts[k].hbar[n_pos];
    let r = w.w[n_pos].transpose() * hbar;
    r.iter().map(|x| x.norm_sqr()).collect()
}

/// Ergodic-rate upper bound in nats, indexed `[k][n]`:
/// `log(1 + |hbar^T w_k|^2 / (sum_{l != k} |hbar^T w_l|^2 + N0))`.
pub fn rate_upper_bound(stat: &StatCsi, w: &PrecoderSet, n0: f64) -> Vec<Vec<f64>> {
    (0..stat.num_uts())
        .map(|k| {
            (0..stat.subcarriers.len())
                .map(|n_pos| {
                    let gains = stream_gains(stat, w, k, n_pos);
                    let signal = gains[k];
                    let interference: f64 =
                        gains.iter().enumerate().filter(|(l, _)| *l != k).map(|(_, g)| g).sum();
                    (1.0 + signal / (interference + n0)).ln()
                })
                .collect()
        })
        .collect()
}

/// Sum of the rate bound over terminals and retained subcarriers, in nats,
/// including the subsampling weight but not the `f_s / B_w` constant.
pub fn sum_rate_bound_nats(stat: &StatCsi, w: &PrecoderSet, n0: f64) -> f64 {
    let rates = rate_upper_bound(stat, w, n0);
    stat.subcarriers.weight * rates.iter().flatten().sum::<f64>()
}

/// Spectral efficiency in bits/s/Hz: `(f_s / B_w) sum_k sum_n R_{k,n}`.
pub fn spectral_efficiency(stat: &StatCsi, w: &PrecoderSet, n0: f64, cfg: &SystemConfig) -> f64 {
    cfg.subcarrier_spacing_hz / cfg.bandwidth_hz * sum_rate_bound_nats(stat, w, n0)
        / std::f64::consts::LN_2
}

/// MMSE receivers `u_{k,n} = hbar^T w_k / (sum_i |hbar^T w_i|^2 + N0)`.
pub fn mmse_receiver(stat: &StatCsi, w: &PrecoderSet, n0: f64) -> Vec<Vec<C64>> {
    (0..stat.num_uts())
        .map(|k| {
            (0..stat.subcarriers.len())
                .map(|n_pos| {
                    let hbar = &stat.uts[k].hbar[n_pos];
                    let r = w.w[n_pos].transpose() * hbar;
                    let total: f64 = r.iter().map(|x| x.norm_sqr()).sum();
                    r[k] / C64::new(total + n0, 0.0)
                })
                .collect()
        })
        .collect()
}

/// MSE of the linear estimate `u^* y` for terminal `k` at subcarrier position
/// `n_pos`.
pub fn mse(stat: &StatCsi, w: &PrecoderSet, u: C64, k: usize, n_pos: usize, n0: f64) -> f64 {
    let hbar = &stat.uts[k].hbar[n_pos];
    let r = w.w[n_pos].transpose() * hbar;
    let mut eps = (u.conj() * r[k] - C64::new(1.0, 0.0)).norm_sqr();
    for (i, ri) in r.iter().enumerate() {
        if i != k {
            eps += (u.conj() * ri).norm_sqr();
        }
    }
    eps + n0 * u.norm_sqr()
}

/// Optimal WMMSE weights `omega = 1 / eps` at the given receivers.
pub fn mmse_weights(
    stat: &StatCsi,
    w: &PrecoderSet,
    u: &[Vec<C64>],
    n0: f64,
) -> Vec<Vec<f64>> {
    (0..stat.num_uts())
        .map(|k| {
            (0..stat.subcarriers.len())
                .map(|n_pos| 1.0 / mse(stat, w, u[k][n_pos], k, n_pos, n0))
                .collect()
        })
        .collect()
}

/// Receivers and weights bundled together.
pub fn wmmse_state(stat: &StatCsi, w: &PrecoderSet, n0: f64) -> WmmseState {
    let receivers = mmse_receiver(stat, w, n0);
    let weights = mmse_weights(stat, w, &receivers, n0);
    WmmseState { receivers, weights }
}

/// Monte-Carlo estimate of the ergodic rate.
#[derive(Debug, Clone)]
pub struct McRateEstimate {
    /// Sample-mean rate in nats, indexed `[k][n]`.
    pub mean_nats: Vec<Vec<f64>>,
    /// Standard error of each sample mean, in nats.
    pub std_err_nats: Vec<Vec<f64>>,
    /// Number of draws.
    pub draws: usize,
}

impl McRateEstimate {
    /// Aggregate to spectral efficiency in bits/s/Hz with its standard error.
    pub fn spectral_efficiency(&self, stat: &StatCsi, cfg: &SystemConfig) -> (f64, f64) {
        let factor = cfg.subcarrier_spacing_hz / cfg.bandwidth_hz * stat.subcarriers.weight
            / std::f64::consts::LN_2;
        let total: f64 = self.mean_nats.iter().flatten().sum();
        let var: f64 = self.std_err_nats.iter().flatten().map(|s| s * s).sum();
        (factor * total, factor * var.sqrt())
    }
}

/// Sample-mean ergodic rate over seeded Rician channel draws.
///
/// Per draw only the scalar composite gain is redrawn; the beamforming gains
/// are deterministic given the statistics, which keeps the estimator cheap
/// without changing its law.
pub fn monte_carlo_rate<R: Rng>(
    stat: &StatCsi,
    w: &PrecoderSet,
    n0: f64,
    cfg: &SystemConfig,
    num_draws: usize,
    rng: &mut R,
) -> McRateEstimate {
    assert!(num_draws >= 1, "need at least one draw");
    let kn = stat.num_uts();
    let nn = stat.subcarriers.len();
    let mut sum = vec![vec![0.0; nn]; kn];
    let mut sum_sq = vec![vec![0.0; nn]; kn];
    // Deterministic per-(k, n) quantities.
    let mut signal = vec![vec![0.0; nn]; kn];
    let mut interf = vec![vec![0.0; nn]; kn];
    let mut g_los = vec![vec![C64::new(0.0, 0.0); nn]; kn];
    for k in 0..kn {
        for n_pos in 0..nn {
            let gains = stream_gains(stat, w, k, n_pos);
            // stream_gains folds gamma into hbar; normalize back to the unit
            // response so the per-draw composite gain carries the power.
            let gamma = stat.uts[k].gamma();
            signal[k][n_pos] = gains[k] / gamma;
            interf[k][n_pos] =
                gains.iter().enumerate().filter(|(l, _)| *l != k).map(|(_, g)| g).sum::<f64>()
                    / gamma;
            g_los[k][n_pos] =
                los_gain(&stat.uts[k].params, 0, stat.subcarriers.indices[n_pos], cfg);
        }
    }
    for _ in 0..num_draws {
        for k in 0..kn {
            let nlos_power = stat.uts[k].nlos_power();
            for n_pos in 0..nn {
                let g = g_los[k][n_pos] + sample_nlos_gain(nlos_power, rng);
                let p = g.norm_sqr();
                let sinr = p * signal[k][n_pos] / (p * interf[k][n_pos] + n0);
                let rate = (1.0 + sinr).ln();
                sum[k][n_pos] += rate;
                sum_sq[k][n_pos] += rate * rate;
            }
        }
    }
    let d = num_draws as f64;
    let mut mean = vec![vec![0.0; nn]; kn];
    let mut se = vec![vec![0.0; nn]; kn];
    for k in 0..kn {
        for n_pos in 0..nn {
            let m = sum[k][n_pos] / d;
            mean[k][n_pos] = m;
            let var = (sum_sq[k][n_pos] / d - m * m).max(0.0);
            se[k][n_pos] = if num_draws > 1 { (var / (d - 1.0)).sqrt() } else { 0.0 };
        }
    }
    McRateEstimate { mean_nats: mean, std_err_nats: se, draws: num_draws }
}
