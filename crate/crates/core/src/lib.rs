//! Hybrid precoding for integrated communications and localization (ICAL) on a
//! wideband massive-MIMO LEO satellite downlink, driven by statistical CSI.
//!
//! The crate covers the full design pipeline:
//!
//! - [`scenario`]: satellite/terminal geometry, rotation and angle-of-departure
//!   algebra, spherical-Earth link budget, and seeded random scenario generation.
//! - [`channel`]: frequency-dependent UPA array responses with analytic angle
//!   derivatives, statistical CSI, and Rician channel realizations.
//! - [`comm_metrics`]: spectral-efficiency upper bound, Monte-Carlo ergodic
//!   rates, and the WMMSE receiver/weight closed forms.
//! - [`fim_speb`]: Fisher information of the channel parameters under pilot
//!   transmission, the position-domain transformation, and SPEB/APEB bounds.
//! - [`sdp`]: a self-contained first-order solver for small dense SDPs with
//!   trace objectives, trace inequalities, and affine PSD (LMI) constraints.
//! - [`loc_precoder`]: SPEB-minimizing fully digital precoders via subspace
//!   reduction, majorization-minimization, per-iteration SDPs, and rank-K
//!   recovery.
//! - [`hybrid_admm`]: consensus-ADMM design of the analog/digital precoder pair
//!   trading weighted MSE (communications) against distance to the
//!   localization precoder, plus the codebook and fully digital baselines.

pub mod channel;
pub mod comm_metrics;
pub mod error;
pub mod fim_speb;
pub mod hybrid_admm;
pub mod loc_precoder;
pub mod scenario;
pub mod sdp;

pub use channel::{ArrayResponse, ChannelParams, StatCsi, SubcarrierSet, UtStat};
pub use error::IcalError;
pub use scenario::{LinkGeometry, SatelliteState, Scenario, SystemConfig, UserTerminal};

/// Complex scalar used throughout the crate.
pub type C64 = nalgebra::Complex<f64>;

/// Complex dynamic matrix.
pub type CMat = nalgebra::DMatrix<C64>;

/// Complex dynamic vector.
pub type CVec = nalgebra::DVector<C64>;

/// Real dynamic matrix.
pub type RMat = nalgebra::DMatrix<f64>;

/// Real dynamic vector.
pub type RVec = nalgebra::DVector<f64>;
