//! Deployment configuration, read from TOML.

use std::path::{Path, PathBuf};

use rfpop::error::{Error, Result};
use rfpop::ma::MaParams;
use rfpop::pop::Impl;
use serde::{Deserialize, Serialize};

/// Names the config file used when no `--config` is given.
pub const CONFIG_ENV: &str = "RFPOP_CONFIG";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ma,
    Mapop,
}

/// Signature instantiation of one role.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigImpl {
    Impl1,
    Impl2,
    Impl3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lengths {
    pub l_k: usize,
    pub l_r: usize,
    pub l_u: usize,
    pub l_v: usize,
}

impl Default for Lengths {
    fn default() -> Self {
        Self {
            l_k: 256,
            l_r: 256,
            l_u: 256,
            l_v: 256,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Signatures {
    pub reader: SigImpl,
    pub tag: SigImpl,
}

impl Default for Signatures {
    fn default() -> Self {
        Self {
            reader: SigImpl::Impl1,
            tag: SigImpl::Impl1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub mode: Mode,
    pub seed: u64,
    pub lengths: Lengths,
    pub signature: Signatures,
    /// Signatures per tag key under impl3.
    #[serde(rename = "K")]
    pub k: u32,
    /// Precomputed nonce pairs per tag under impl2.
    pub pool: u32,
    /// Expected sessions per tag, which is also the tag lifetime.
    pub s: u64,
    pub listen: String,
    pub timeout_ticks: u64,
    /// Wall-clock length of one tick on the socket layer.
    pub tick_ms: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            mode: Mode::Mapop,
            seed: 0,
            lengths: Lengths::default(),
            signature: Signatures::default(),
            k: 30,
            pool: 30,
            s: 30,
            listen: "127.0.0.1:7464".into(),
            timeout_ticks: 50,
            tick_ms: 100,
        }
    }
}

impl Config {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// `path`, else the file named by [`CONFIG_ENV`], else the defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => Self::load(&PathBuf::from(p)),
                None => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ma_params().validate()?;
        if self.signature.reader != SigImpl::Impl1 {
            return Err(Error::Config("the reader must sign with impl1".into()));
        }
        if self.s == 0 {
            return Err(Error::Config("s must be at least 1".into()));
        }
        if self.timeout_ticks == 0 || self.tick_ms == 0 {
            return Err(Error::Config("timeout_ticks and tick_ms must be positive".into()));
        }
        match self.signature.tag {
            SigImpl::Impl1 => {}
            SigImpl::Impl2 if u64::from(self.pool) < self.s => {
                return Err(Error::Config(format!(
                    "impl2 needs at least s = {} precomputed pairs, have {}",
                    self.s, self.pool
                )));
            }
            SigImpl::Impl3 if u64::from(self.k) < self.s => {
                return Err(Error::Config(format!(
                    "impl3 needs K of at least s = {}, have {}",
                    self.s, self.k
                )));
            }
            _ => {}
        }
        Ok(())
    }

    /// `l_d = l_u + l_r + l_v` and `l_p = l_d − l_r`.
    pub fn ma_params(&self) -> MaParams {
        let l = self.lengths;
        let l_d = l.l_u + l.l_r + l.l_v;
        MaParams {
            l_k: l.l_k,
            l_d,
            l_p: l_d.saturating_sub(l.l_r),
            l_v: l.l_v,
            l_r: l.l_r,
            l_u: l.l_u,
            pad: None,
        }
        .with_zero_pad()
    }

    pub fn tag_impl(&self) -> Impl {
        match self.signature.tag {
            SigImpl::Impl1 => Impl::Imp1,
            SigImpl::Impl2 => Impl::Imp2 { pool: self.pool },
            SigImpl::Impl3 => Impl::Imp3 { k: self.k },
        }
    }
}
