//! Explicit-state model checking and strategy synthesis for turn-based
//! stochastic multi-player games, plus a generator for a trust and
//! virtual-currency cooperation game.

pub mod engine;
pub mod oracle;
pub mod rpatl;
pub mod scalar;
pub mod smg;
pub mod trust;

pub use scalar::Scalar;

pub type Smg64 = smg::Smg<f64>;
pub type Smg32 = smg::Smg<f32>;
pub type Engine64 = engine::Engine<f64>;
pub type Engine32 = engine::Engine<f32>;
pub type TrustGame64 = trust::TrustGame<f64>;
