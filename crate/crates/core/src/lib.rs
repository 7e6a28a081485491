//! Outage and ergodic-rate analytics for a full-duplex decode-and-forward
//! relay that may transmit improper Gaussian signals over Nakagami-m fading.

pub mod quad;
pub mod specfun;
pub mod model;
pub mod outage;
pub mod rates;
pub mod ergodic;
pub mod optimize;
pub mod montecarlo;
pub mod validation;
