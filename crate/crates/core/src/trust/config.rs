//! Plain `key = value` parameter files. Keys are the [`TrustParams`] field
//! names; per-provider fields take one value for all providers or a comma
//! separated list.

use super::{parse_ratio, Pricing, Sharing, TrustDecrease, TrustError, TrustParams};

pub const KEYS: &[&str] = &[
    "n_providers",
    "alpha",
    "td",
    "st",
    "c",
    "c_min",
    "c_max",
    "t_prime",
    "trust_init",
    "trust_max",
    "k",
    "pricing",
    "sharing",
    "state_cap",
];

fn per_provider<V: Clone>(value: &str, n: usize, parse: impl Fn(&str) -> Result<V, String>) -> Result<Vec<V>, String> {
    let items: Vec<V> = value.split(',').map(|s| parse(s.trim())).collect::<Result<_, _>>()?;
    match items.len() {
        1 => Ok(vec![items[0].clone(); n]),
        m if m == n => Ok(items),
        m => Err(format!("expected 1 or {n} values, got {m}")),
    }
}

fn resize<V: Clone>(v: &mut Vec<V>, n: usize) {
    if v.len() != n {
        let first = v[0].clone();
        *v = vec![first; n];
    }
}

fn int<V: std::str::FromStr>(s: &str) -> Result<V, String> {
    s.parse().map_err(|_| format!("bad integer `{s}`"))
}

impl TrustParams {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        let n = self.n_providers;
        match key {
            "n_providers" => {
                let m: usize = int(value)?;
                if m == 0 {
                    return Err("n_providers must be positive".into());
                }
                self.n_providers = m;
                resize(&mut self.td, m);
                resize(&mut self.st, m);
                resize(&mut self.c, m);
            }
            "alpha" => self.alpha = parse_ratio(value)?,
            "td" => self.td = per_provider(value, n, |s| s.parse::<TrustDecrease>())?,
            "st" => self.st = per_provider(value, n, int)?,
            "c" => self.c = per_provider(value, n, |s| s.parse::<f64>().map_err(|_| format!("bad probability `{s}`")))?,
            "c_min" => self.c_min = int(value)?,
            "c_max" => self.c_max = int(value)?,
            "t_prime" => self.t_prime = int(value)?,
            "trust_init" => self.trust_init = int(value)?,
            "trust_max" => self.trust_max = int(value)?,
            "k" => self.k = int(value)?,
            "pricing" => {
                self.pricing = match value {
                    "original" => Pricing::Original,
                    "max-difference" | "max_difference" => Pricing::MaxDifference,
                    v => return Err(format!("unknown pricing `{v}`")),
                }
            }
            "sharing" => {
                self.sharing = match value {
                    "automatic" => Sharing::Automatic,
                    "strategic" => Sharing::Strategic,
                    v => return Err(format!("unknown sharing `{v}`")),
                }
            }
            "state_cap" => self.state_cap = int(value)?,
            k => return Err(format!("unknown key `{k}`")),
        }
        Ok(())
    }

    /// Applies a config file on top of `self`.
    pub fn apply_config(&mut self, text: &str) -> Result<(), TrustError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| TrustError::Config { line: i + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            self.set(key.trim(), value).map_err(err)?;
        }
        Ok(())
    }

    pub fn from_config(text: &str) -> Result<Self, TrustError> {
        let mut p = TrustParams::default();
        p.apply_config(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_config(&self) -> String {
        fn list<V: ToString>(v: &[V]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let pricing = match self.pricing {
            Pricing::Original => "original",
            Pricing::MaxDifference => "max-difference",
        };
        let sharing = match self.sharing {
            Sharing::Automatic => "automatic",
            Sharing::Strategic => "strategic",
        };
        format!(
            "n_providers = {}\nalpha = {}\ntd = {}\nst = {}\nc = {}\nc_min = {}\nc_max = {}\nt_prime = {}\ntrust_init = {}\ntrust_max = {}\nk = {}\npricing = {pricing}\nsharing = {sharing}\nstate_cap = {}\n",
            self.n_providers,
            self.alpha,
            list(&self.td),
            list(&self.st),
            list(&self.c),
            self.c_min,
            self.c_max,
            self.t_prime,
            self.trust_init,
            self.trust_max,
            self.k,
            self.state_cap,
        )
    }
}
