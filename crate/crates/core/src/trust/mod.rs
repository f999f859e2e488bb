//! The reputation and virtual-currency cooperation mechanism: parameters,
//! trust levels, pricing, and the game generator.

mod config;
pub use config::KEYS as PARAM_KEYS;
mod game;

use num_rational::Rational64;
use thiserror::Error;

use crate::smg::SmgError;

pub use game::{build_trust_game, heuristic_sharing_strategy, Phase, TrustGame, TrustState};

#[derive(Debug, Error)]
pub enum TrustError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("no provider {0}")]
    BadProvider(usize),
    #[error("trust game exceeds {cap} states")]
    StateExplosion { cap: usize },
    #[error("heuristic sharing needs a game built with strategic sharing")]
    WrongScheme,
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Smg(#[from] SmgError),
}

/// How far a provider's direct trust drops after an unpaid service.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrustDecrease {
    Units(u32),
    /// Trust is reset to zero.
    Reset,
}

impl TrustDecrease {
    pub fn apply(self, trust: u32) -> u32 {
        match self {
            TrustDecrease::Units(d) => trust.saturating_sub(d),
            TrustDecrease::Reset => 0,
        }
    }
}

impl std::fmt::Display for TrustDecrease {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrustDecrease::Units(d) => write!(f, "{d}"),
            TrustDecrease::Reset => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for TrustDecrease {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "inf" | "∞" => Ok(TrustDecrease::Reset),
            t => t
                .parse()
                .map(TrustDecrease::Units)
                .map_err(|_| format!("bad trust decrease `{t}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pricing {
    Original,
    /// Original cost plus the largest gap between this provider's trust and
    /// any other provider's.
    MaxDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sharing {
    Automatic,
    /// Providers decide after each payment decision whether to push their
    /// own trust value to the others.
    Strategic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustParams {
    pub n_providers: usize,
    pub alpha: Rational64,
    pub td: Vec<TrustDecrease>,
    pub st: Vec<u32>,
    /// Negotiation cancel probability.
    pub c: Vec<f64>,
    pub c_min: u32,
    pub c_max: u32,
    pub t_prime: u32,
    pub trust_init: u32,
    pub trust_max: u32,
    pub k: u32,
    pub pricing: Pricing,
    pub sharing: Sharing,
    pub state_cap: usize,
}

impl Default for TrustParams {
    fn default() -> Self {
        TrustParams {
            n_providers: 3,
            alpha: Rational64::new(4, 5),
            td: vec![TrustDecrease::Units(2); 3],
            st: vec![5; 3],
            c: vec![0.05; 3],
            c_min: 2,
            c_max: 10,
            t_prime: 8,
            trust_init: 5,
            trust_max: 10,
            k: 1,
            pricing: Pricing::Original,
            sharing: Sharing::Automatic,
            state_cap: 5_000_000,
        }
    }
}

impl TrustParams {
    /// Sets the provider count, resizing per-provider vectors by repeating
    /// their first entry.
    pub fn with_providers(mut self, n: usize) -> Self {
        self.n_providers = n;
        let td = self.td[0];
        let st = self.st[0];
        let c = self.c[0];
        self.td = vec![td; n];
        self.st = vec![st; n];
        self.c = vec![c; n];
        self
    }

    pub fn with_td(mut self, td: TrustDecrease) -> Self {
        self.td = vec![td; self.n_providers];
        self
    }

    pub fn with_alpha(mut self, alpha: Rational64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self) -> Result<(), TrustError> {
        let bad = |m: String| Err(TrustError::Invalid(m));
        let n = self.n_providers;
        if n == 0 {
            return bad("need at least one provider".into());
        }
        if self.td.len() != n || self.st.len() != n || self.c.len() != n {
            return bad(format!("per-provider parameters must have {n} entries"));
        }
        let zero = Rational64::from_integer(0);
        let one = Rational64::from_integer(1);
        if self.alpha < zero || self.alpha > one {
            return bad(format!("alpha {} outside [0,1]", self.alpha));
        }
        if let Some(st) = self.st.iter().find(|&&st| st > self.trust_max) {
            return bad(format!("st {st} above trust_max {}", self.trust_max));
        }
        if let Some(c) = self.c.iter().find(|c| !(0.0..1.0).contains(*c)) {
            return bad(format!("cancel probability {c} outside [0,1)"));
        }
        if self.c_min > self.c_max {
            return bad(format!("c_min {} above c_max {}", self.c_min, self.c_max));
        }
        if self.t_prime == 0 || self.t_prime > self.trust_max {
            return bad(format!("t_prime {} outside (0, trust_max]", self.t_prime));
        }
        if self.trust_init > self.trust_max {
            return bad(format!("trust_init {} above trust_max", self.trust_init));
        }
        if self.trust_max > u8::MAX as u32 {
            return bad(format!("trust_max {} above {}", self.trust_max, u8::MAX));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        Ok(())
    }

    fn check_provider(&self, trust: &[u32], i: usize) -> Result<(), TrustError> {
        if i >= self.n_providers || trust.len() != self.n_providers {
            return Err(TrustError::BadProvider(i));
        }
        Ok(())
    }
}

/// `α·trust[i] + (1−α)·recs`, where recs is the mean trust of the other
/// providers (a lone provider counts as its own recommender).
pub fn trust_level(p: &TrustParams, trust: &[u32], i: usize) -> Result<Rational64, TrustError> {
    p.check_provider(trust, i)?;
    let own = Rational64::from_integer(trust[i] as i64);
    let others = trust.len() as i64 - 1;
    let recs = if others == 0 {
        own
    } else {
        let sum: i64 = trust.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &t)| t as i64).sum();
        Rational64::new(sum, others)
    };
    Ok(p.alpha * own + (Rational64::from_integer(1) - p.alpha) * recs)
}

pub fn service_cost(p: &TrustParams, trust: &[u32], i: usize) -> Result<Rational64, TrustError> {
    p.check_provider(trust, i)?;
    let t = trust[i] as i64;
    let (c_min, c_max, tp) = (p.c_min as i64, p.c_max as i64, p.t_prime as i64);
    let original = if t < tp {
        Rational64::from_integer(c_min) + Rational64::new(c_max - c_min, tp) * (tp - t)
    } else {
        Rational64::from_integer(c_min)
    };
    Ok(match p.pricing {
        Pricing::Original => original,
        Pricing::MaxDifference => {
            let gap = trust.iter().map(|&o| (t - o as i64).abs()).max().unwrap_or(0);
            original + gap
        }
    })
}

/// Per provider: can a requester who never pays this provider still be
/// served by it once the others trust it fully?
pub fn attack_feasible(p: &TrustParams) -> Vec<bool> {
    let cap = (Rational64::from_integer(1) - p.alpha) * p.trust_max as i64;
    p.st.iter().map(|&st| Rational64::from_integer(st as i64) <= cap).collect()
}

/// Parses `0.8`, `4/5` or `1` exactly.
pub fn parse_ratio(s: &str) -> Result<Rational64, String> {
    let s = s.trim();
    let err = || format!("bad number `{s}`");
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| err())?;
        let d: i64 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Rational64::new(n, d));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 15 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let negative = int.starts_with('-');
    let whole: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| err())? };
    let scale = 10i64.pow(frac.len() as u32);
    let f: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
    let mag = whole.abs() * scale + f;
    Ok(Rational64::new(if negative { -mag } else { mag }, scale))
}
