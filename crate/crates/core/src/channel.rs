//! UPA array responses, their analytic angle derivatives, statistical CSI, and
//! Rician channel realizations.
//!
//! The array response at baseband frequency `f` factorizes as a Kronecker
//! product of the two axis responses with phase slope `pi (1 + f / f_c)`.
//! Large-scale statistics (gain, Rician factor, AoD) are treated as constant
//! across subcarriers.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::IcalError;
use crate::scenario::{link_geometry, Scenario, SystemConfig};
use crate::{C64, CVec};

/// Retained subcarrier grid. `indices` are 1-based positions on the full grid;
/// `weight` is the extrapolation factor `N_sc / retained` applied to sums over
/// subcarriers so that bounds keep their full-band structure.
#[derive(Debug, Clone)]
pub struct SubcarrierSet {
    /// 1-based subcarrier indices.
    pub indices: Vec<usize>,
    /// `N_sc / indices.len()`.
    pub weight: f64,
}

impl SubcarrierSet {
    /// Every subcarrier of the configured grid.
    pub fn full(cfg: &SystemConfig) -> Self {
        SubcarrierSet { indices: (1..=cfg.num_subcarriers).collect(), weight: 1.0 }
    }

    /// `count` subcarriers uniformly spaced over the grid, symmetric about the
    /// band center.
    pub fn subsample(cfg: &SystemConfig, count: usize) -> Self {
        let count = count.clamp(1, cfg.num_subcarriers);
        let indices: Vec<usize> = (0..count)
            .map(|i| ((i as f64 + 0.5) * cfg.num_subcarriers as f64 / count as f64).floor() as usize + 1)
            .collect();
        let weight = cfg.num_subcarriers as f64 / count as f64;
        SubcarrierSet { indices, weight }
    }

    /// Number of retained subcarriers.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    /// True when no subcarrier is retained.
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// UPA response at one subcarrier, kept in factored and composed form.
#[derive(Debug, Clone)]
pub struct ArrayResponse {
    /// 1-based subcarrier index.
    pub subcarrier: usize,
    /// Composed response `v = v_x kron v_y`, unit norm.
    pub vector: CVec,
    /// Axis factor along x.
    pub axis_x: CVec,
    /// Axis factor along y.
    pub axis_y: CVec,
}

/// Frequency-dependent phase slope `pi (1 + f_n / f_c)`.
fn phase_slope(cfg: &SystemConfig, n: usize) -> f64 {
    PI * (1.0 + cfg.subcarrier_freq_hz(n) / cfg.carrier_freq_hz)
}

fn axis_vector(len: usize, step_phase: f64) -> CVec {
    let scale = 1.0 / (len as f64).sqrt();
    DVector::from_fn(len, |i, _| C64::from_polar(scale, -step_phase * i as f64))
}

/// UPA response for the AoD pair at the 1-based subcarrier `n`.
pub fn array_response(theta_x: f64, theta_y: f64, n: usize, cfg: &SystemConfig) -> ArrayResponse {
    let w = phase_slope(cfg, n);
    let axis_x = axis_vector(cfg.num_tx_x, w * theta_y.sin() * theta_x.cos());
    let axis_y = axis_vector(cfg.num_tx_y, w * theta_y.cos());
    let vector = axis_x.kronecker(&axis_y);
    ArrayResponse { subcarrier: n, vector, axis_x, axis_y }
}

/// Analytic derivatives of the composed response with respect to the AoD pair.
pub fn array_response_derivatives(
    theta_x: f64,
    theta_y: f64,
    n: usize,
    cfg: &SystemConfig,
) -> (CVec, CVec) {
    let w = phase_slope(cfg, n);
    let r = array_response(theta_x, theta_y, n, cfg);
    let j = C64::new(0.0, 1.0);
    // Phase of element i is -w * i * sin(ty) cos(tx) along x and
    // -w * i * cos(ty) along y; differentiate the exponents.
    let dx_dtx = DVector::from_fn(cfg.num_tx_x, |i, _| {
        r.axis_x[i] * j * (w * i as f64 * theta_y.sin() * theta_x.sin())
    });
    let dx_dty = DVector::from_fn(cfg.num_tx_x, |i, _| {
        r.axis_x[i] * j * (-w * i as f64 * theta_y.cos() * theta_x.cos())
    });
    let dy_dty = DVector::from_fn(cfg.num_tx_y, |i, _| {
        r.axis_y[i] * j * (w * i as f64 * theta_y.sin())
    });
    let d_theta_x = dx_dtx.kronecker(&r.axis_y);
    let d_theta_y = dx_dty.kronecker(&r.axis_y) + r.axis_x.kronecker(&dy_dty);
    (d_theta_x, d_theta_y)
}

/// Slow-varying channel parameters of one terminal, as seen by the estimator.
#[derive(Debug, Clone, Copy)]
pub struct ChannelParams {
    /// AoD components in radians.
    pub theta_x_rad: f64,
    /// Second AoD component in radians.
    pub theta_y_rad: f64,
    /// LoS propagation delay in seconds.
    pub delay_s: f64,
    /// LoS Doppler shift in Hz.
    pub doppler_hz: f64,
    /// Complex LoS gain `alpha = sqrt(kappa gamma / (1 + kappa)) e^{j phi}`.
    pub alpha: C64,
    /// LoS phase in radians.
    pub phase_rad: f64,
}

impl ChannelParams {
    /// Assemble the parameter vector from link statistics and the LoS phase.
    pub fn new(
        theta_x_rad: f64,
        theta_y_rad: f64,
        delay_s: f64,
        doppler_hz: f64,
        gamma: f64,
        kappa: f64,
        phase_rad: f64,
    ) -> Self {
        let magnitude = (kappa * gamma / (1.0 + kappa)).sqrt();
        ChannelParams {
            theta_x_rad,
            theta_y_rad,
            delay_s,
            doppler_hz,
            alpha: C64::from_polar(magnitude, phase_rad),
            phase_rad,
        }
    }
}

/// Statistical CSI of one terminal over the retained subcarriers.
#[derive(Debug, Clone)]
pub struct UtStat {
    /// Terminal position and velocity.
    pub terminal: crate::scenario::UserTerminal,
    /// Link geometry (distance, gain, delay, Doppler, AoD).
    pub geometry: crate::scenario::LinkGeometry,
    /// Channel parameter vector (with the per-scenario LoS phase folded in).
    pub params: ChannelParams,
    /// Rician factor (linear).
    pub kappa: f64,
    /// Array responses, one per retained subcarrier.
    pub responses: Vec<ArrayResponse>,
    /// Effective mean channels `hbar = sqrt(gamma) v`, one per subcarrier.
    pub hbar: Vec<CVec>,
}

impl UtStat {
    /// Average channel power gain (flat across subcarriers).
    pub fn gamma(&self) -> f64 {
        self.geometry.gain_linear
    }

    /// NLoS power `gamma / (1 + kappa)`.
    pub fn nlos_power(&self) -> f64 {
        self.gamma() / (1.0 + self.kappa)
    }
}

/// Statistical CSI for a whole scenario.
#[derive(Debug, Clone)]
pub struct StatCsi {
    /// Satellite state the statistics were derived for.
    pub sat: crate::scenario::SatelliteState,
    /// Retained subcarrier grid.
    pub subcarriers: SubcarrierSet,
    /// Per-terminal statistics.
    pub uts: Vec<UtStat>,
}

impl StatCsi {
    /// Derive the statistical CSI of a scenario on the given subcarrier grid.
    pub fn build(
        cfg: &SystemConfig,
        scenario: &Scenario,
        subcarriers: SubcarrierSet,
    ) -> Result<Self, IcalError> {
        let mut uts = Vec::with_capacity(scenario.uts.len());
        for (k, ut) in scenario.uts.iter().enumerate() {
            let geometry = link_geometry(ut, &scenario.sat, cfg)?;
            let params = ChannelParams::new(
                geometry.theta_x_rad,
                geometry.theta_y_rad,
                geometry.delay_s,
                geometry.doppler_hz,
                geometry.gain_linear,
                cfg.rician_factor_linear,
                scenario.los_phase_rad[k],
            );
            let responses: Vec<ArrayResponse> = subcarriers
                .indices
                .iter()
                .map(|&n| array_response(geometry.theta_x_rad, geometry.theta_y_rad, n, cfg))
                .collect();
            let hbar = responses
                .iter()
                .map(|r| r.vector.map(|x| x * geometry.gain_linear.sqrt()))
                .collect();
            uts.push(UtStat {
                terminal: *ut,
                geometry,
                params,
                kappa: cfg.rician_factor_linear,
                responses,
                hbar,
            });
        }
        Ok(StatCsi { sat: scenario.sat, subcarriers, uts })
    }

    /// Number of terminals.
    pub fn num_uts(&self) -> usize {
        self.uts.len()
    }
}

/// Deterministic LoS gain at CP-inclusive symbol `m` and 1-based subcarrier
/// `n`: `alpha exp(j 2 pi (nu m T - n f_s tau))`.
pub fn los_gain(params: &ChannelParams, m: usize, n: usize, cfg: &SystemConfig) -> C64 {
    let phase = 2.0 * PI
        * (params.doppler_hz * m as f64 * cfg.symbol_duration_s()
            - n as f64 * cfg.subcarrier_spacing_hz * params.delay_s);
    params.alpha * C64::from_polar(1.0, phase)
}

/// Draw one scalar NLoS gain, `CN(0, gamma / (1 + kappa))`.
pub fn sample_nlos_gain<R: Rng>(nlos_power: f64, rng: &mut R) -> C64 {
    let sigma = (nlos_power / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * sigma, im * sigma)
}

/// One Rician channel realization `h = (g_los + g_nlos) v` for terminal `k` at
/// the retained subcarrier position `n_pos` and symbol `m`.
pub fn sample_channel<R: Rng>(
    stat: &StatCsi,
    k: usize,
    m: usize,
    n_pos: usize,
    cfg: &SystemConfig,
    rng: &mut R,
) -> CVec {
    let ut = &stat.uts[k];
    let n = stat.subcarriers.indices[n_pos];
    let g = los_gain(&ut.params, m, n, cfg) + sample_nlos_gain(ut.nlos_power(), rng);
    ut.responses[n_pos].vector.map(|x| x * g)
}
