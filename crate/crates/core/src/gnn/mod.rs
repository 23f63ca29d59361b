//! Graph encoders with mean-pool readout and a linear classification head.
//!
//! | arch      | layer update                                                    |
//! |-----------|-----------------------------------------------------------------|
//! | `gcn`     | `H' = σ(D̃^{-1/2} Ã D̃^{-1/2} H Θ + b)`, `Ã = A + I`              |
//! | `fcn`     | `H' = σ(H Θ + b)`                                               |
//! | `gin`     | `h' = MLP((1 + ε) h + Σ_{u∈N(v)} h_u)`, learnable `ε`           |
//! | `chebnet` | `H' = σ(Σ_k T_k(L̂) H Θ_k + b)`, `L̂ = L_norm − I`               |
//! | `fagcn`   | `h_i' = ε h_i⁰ + Σ_j tanh(gᵀ[h_i‖h_j]) / √(d_i d_j) · h_j`       |
//!
//! `σ` (ReLU) and dropout are applied between layers; the last layer's
//! output is left linear.

mod filter;
mod model;

pub use filter::{spectral_filter_response, ChebBasis, FilterKernel};
pub use model::{readout, readout_rows, AttrVocab, GnnModel, Mode, PreparedGraph};

use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    Gcn,
    Gin,
    ChebNet,
    Fagcn,
    Fcn,
}

impl Arch {
    pub const ALL: [Arch; 5] = [Arch::Gcn, Arch::Gin, Arch::ChebNet, Arch::Fagcn, Arch::Fcn];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Gcn => "gcn",
            Arch::Gin => "gin",
            Arch::ChebNet => "chebnet",
            Arch::Fagcn => "fagcn",
            Arch::Fcn => "fcn",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown architecture `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnnConfig {
    pub arch: Arch,
    pub layers: usize,
    pub hidden_dim: usize,
    /// Number of Chebyshev terms `K` (orders `0..K`).
    pub cheb_order: usize,
    /// Weight of the initial representation in FAGCN.
    pub fagcn_eps: f64,
    pub dropout: f64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            arch: Arch::Gin,
            layers: 5,
            hidden_dim: 300,
            cheb_order: 3,
            fagcn_eps: 0.3,
            dropout: 0.5,
        }
    }
}

impl GnnConfig {
    /// Small settings for single-machine experiments.
    pub fn desk(arch: Arch) -> Self {
        GnnConfig {
            arch,
            layers: 2,
            hidden_dim: 64,
            ..GnnConfig::default()
        }
    }

    /// Large-scale settings (five layers, 300 hidden units).
    pub fn paper(arch: Arch) -> Self {
        GnnConfig {
            arch,
            ..GnnConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::InvalidConfig("layers must be >= 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidConfig("hidden_dim must be >= 1".into()));
        }
        if self.cheb_order == 0 {
            return Err(Error::InvalidConfig("cheb_order must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(alloc::format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}
