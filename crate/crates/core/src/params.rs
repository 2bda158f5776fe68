//! Public parameters and the named parameter sets shipped with the tool.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha3::{Digest, Sha3_256};

use crate::error::{Error, Result};

/// Tail multiplier used for the default modulus and norm bounds.
pub const TAIL_T: f64 = 9.5;

/// Confidence multiplier for probability 0.9999.
pub const DEFAULT_OMEGA: f64 = 3.8905;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `z = y + (2u + c) s`.
    Generic,
    /// `z = y + (zeta u + c) s` with the revised key shape.
    Module,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeParams {
    pub variant: Variant,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub q: i64,
    pub eta: i64,
    pub sigma: f64,
    pub sigma_u: f64,
    /// Secret-key norm bound (generic keygen).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_s: Option<f64>,
    /// Signature norm bound (generic verification).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_z: Option<f64>,
    pub omega: f64,
    /// b-decomposition selector, module variant only.
    #[serde(default)]
    pub d: u8,
    /// Signature norm bound, module variant only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Keygen bound `S` on `sigma_1(zeta s)`, module variant only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_bound: Option<f64>,
}

impl SchemeParams {
    /// Generic-variant parameters with the default modulus and norm bounds.
    pub fn generic(n: usize, k: usize, m: usize, eta: i64, sigma: f64, sigma_u: f64) -> Self {
        let sz = sigma_z_max(n, eta, sigma, sigma_u);
        let b_s = ((n as f64) * (1.0 + (k as f64 - 1.0) * (eta * eta) as f64)).sqrt() + 3.0;
        let b_z = TAIL_T * ((n * k) as f64).sqrt() * sz;
        SchemeParams {
            variant: Variant::Generic,
            n,
            k,
            m,
            q: default_modulus(n, eta, sigma, sigma_u),
            eta,
            sigma,
            sigma_u,
            b_s: Some(b_s),
            b_z: Some(b_z),
            omega: DEFAULT_OMEGA,
            d: 0,
            gamma: None,
            s_bound: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn module(
        n: usize,
        k: usize,
        m: usize,
        q: i64,
        eta: i64,
        sigma: f64,
        sigma_u: f64,
        gamma: f64,
        s_bound: Option<f64>,
        d: u8,
    ) -> Self {
        SchemeParams {
            variant: Variant::Module,
            n,
            k,
            m,
            q,
            eta,
            sigma,
            sigma_u,
            b_s: None,
            b_z: None,
            omega: DEFAULT_OMEGA,
            d,
            gamma: Some(gamma),
            s_bound,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n < 2 || !self.n.is_power_of_two() {
            return bad(format!("n = {} must be a power of two >= 2", self.n));
        }
        if self.k <= self.m + 1 || self.m == 0 {
            return bad(format!("need k > m + 1 and m >= 1 (k = {}, m = {})", self.k, self.m));
        }
        if self.q < 3 || !is_prime(self.q) {
            return bad(format!("q = {} must be an odd prime", self.q));
        }
        if self.q >= 1 << 30 {
            return bad(format!("q = {} exceeds the 2^30 serialization width", self.q));
        }
        if self.eta < 0 {
            return bad("eta must be non-negative".into());
        }
        if !(self.sigma_u > 0.0 && self.sigma > self.sigma_u) {
            return bad(format!(
                "need sigma > sigma_u > 0 (sigma = {}, sigma_u = {})",
                self.sigma, self.sigma_u
            ));
        }
        if self.omega.is_nan() || self.omega <= 0.0 {
            return bad("omega must be positive".into());
        }
        match self.variant {
            Variant::Generic => {
                if self.b_s.is_none() || self.b_z.is_none() {
                    return bad("generic parameters need b_s and b_z".into());
                }
            }
            Variant::Module => {
                if self.gamma.is_none() {
                    return bad("module parameters need gamma".into());
                }
                if self.d > 1 {
                    return bad(format!("d = {} must be 0 or 1", self.d));
                }
            }
        }
        Ok(())
    }

    /// Number of free challenge bits: n (generic) or n/2 (module).
    pub fn challenge_bits(&self) -> usize {
        match self.variant {
            Variant::Generic => self.n,
            Variant::Module => self.n / 2,
        }
    }

    /// Verification bound on `||z||`.
    pub fn norm_bound(&self) -> f64 {
        match self.variant {
            Variant::Generic => self.b_z.unwrap_or(f64::INFINITY),
            Variant::Module => self.gamma.unwrap_or(f64::INFINITY),
        }
    }

    pub fn dim(&self) -> usize {
        self.n * self.k
    }

    /// Hex SHA3-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("params serialize");
        hex::encode(Sha3_256::digest(&json))
    }
}

/// `sqrt(sigma^2 + 3 sigma_u^2 eta (eta + 1) n)`, a per-coefficient bound on
/// the signature standard deviation.
pub fn sigma_z_max(n: usize, eta: i64, sigma: f64, sigma_u: f64) -> f64 {
    (sigma * sigma + 3.0 * sigma_u * sigma_u * (eta * (eta + 1)) as f64 * n as f64).sqrt()
}

/// Smallest prime above `2 t sigma_z_max` with `t = 9.5`.
pub fn default_modulus(n: usize, eta: i64, sigma: f64, sigma_u: f64) -> i64 {
    let bound = 2.0 * TAIL_T * sigma_z_max(n, eta, sigma, sigma_u);
    let mut q = bound.floor() as i64 + 1;
    while !is_prime(q) {
        q += 1;
    }
    q
}

pub fn is_prime(x: i64) -> bool {
    if x < 2 {
        return false;
    }
    if x % 2 == 0 {
        return x == 2;
    }
    let mut d = 3;
    while d * d <= x {
        if x % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// A named parameter set with run defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSet {
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub params: SchemeParams,
}

fn default_workers() -> usize {
    1
}

fn default_seed() -> u64 {
    1
}

/// The on-disk collection of named parameter sets (TOML).
///
/// ```toml
/// [sets.my-set]
/// description = "..."
/// workers = 4
/// seed = 7
///
/// [sets.my-set.params]
/// variant = "generic"
/// n = 16
/// # ...
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSetFile {
    pub sets: BTreeMap<String, ParamSet>,
}

impl ParamSetFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ParamSetFile = toml::from_str(text)?;
        for (name, set) in &file.sets {
            set.params
                .validate()
                .map_err(|e| Error::InvalidParams(format!("set {name}: {e}")))?;
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("param sets serialize")
    }

    pub fn builtin() -> Self {
        let mut sets = BTreeMap::new();
        let mut add = |name: &str, description: &str, workers: usize, params: SchemeParams| {
            sets.insert(
                name.to_string(),
                ParamSet {
                    description: description.to_string(),
                    workers,
                    seed: 1,
                    params,
                },
            );
        };
        add(
            "table2-col1",
            "ratio attack proof of concept, n = 64",
            8,
            SchemeParams::generic(64, 3, 1, 1, 15.0, 1.0),
        );
        add(
            "table2-col2",
            "ratio attack proof of concept, n = 128, sigma_u = 0.4",
            8,
            SchemeParams::generic(128, 3, 1, 1, 9.5, 0.4),
        );
        add(
            "table2-col3",
            "ratio attack proof of concept, n = 128, sigma_u = 1",
            8,
            SchemeParams::generic(128, 3, 1, 1, 24.0, 1.0),
        );
        add(
            "ci-n16",
            "desk-scale generic set for fast end-to-end runs",
            1,
            SchemeParams::generic(16, 3, 1, 1, 8.0, 1.0),
        );
        add(
            "table3-120",
            "module variant, 120-bit column (d = 1)",
            1,
            SchemeParams::module(256, 7, 3, 64513, 1, 664.18, 14.22, 31972.19, Some(82.74), 1),
        );
        add(
            "table3-180",
            "module variant, 180-bit column (d = 1)",
            1,
            SchemeParams::module(256, 9, 4, 50177, 1, 727.68, 14.22, 39405.92, Some(90.65), 1),
        );
        add(
            "table3-256",
            "module variant, 256-bit column (d = 0)",
            1,
            SchemeParams::module(256, 11, 4, 202753, 1, 640.14, 14.22, 38437.36, Some(79.75), 0),
        );
        let (n, k, sigma, sigma_u) = (64usize, 3usize, 30.0, 1.0);
        add(
            "ci-module-n64",
            "scaled module set with a positive-definite covariance (d = 0)",
            1,
            SchemeParams::module(
                n,
                k,
                1,
                default_modulus(n, 1, sigma, sigma_u),
                1,
                sigma,
                sigma_u,
                10.0 * sigma * ((n * k) as f64).sqrt(),
                None,
                0,
            ),
        );
        ParamSetFile { sets }
    }

    pub fn get(&self, name: &str) -> Result<&ParamSet> {
        self.sets
            .get(name)
            .ok_or_else(|| Error::UnknownName(format!("parameter set {name:?}")))
    }

    /// Built-in sets overlaid with the sets from `path`, if given.
    pub fn with_overrides(path: Option<&Path>) -> Result<Self> {
        let mut all = Self::builtin();
        if let Some(p) = path {
            all.sets.extend(Self::load(p)?.sets);
        }
        Ok(all)
    }
}
