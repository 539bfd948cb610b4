//! Scalar parameters of the economy.

use serde::{Deserialize, Serialize};

use crate::error::{check_open, check_range, Error, Result};

/// Which input quantities enter the production function when a supplier
/// rations its buyers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProductionInputs {
    /// Quantities actually received after proportional rationing.
    #[default]
    Delivered,
    /// Quantities ordered, `share * wealth / price`, regardless of rationing.
    Intended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Labor share in the input mix, in (0, 1).
    pub alpha: f64,
    /// Substitution parameter; the elasticity of substitution is `1 / (1 - theta)`.
    pub theta: f64,
    /// Price adjustment speed.
    pub tau_p: f64,
    /// Technology (input share) adjustment speed.
    pub tau_w: f64,
    /// Share of revenue paid out as dividends (the mark-up rate).
    pub lambda: f64,
    /// Per-firm, per-period probability of a supplier switching opportunity.
    pub rho_chg: f64,
    /// Per-period entry probability of each inactive firm slot.
    pub p_new: f64,
    /// Maximal number of firms.
    pub m: usize,
    /// Target mean number of suppliers per firm.
    pub mean_out_degree: f64,
    /// Refund rationed buyers instead of destroying their unspent money.
    pub conserve_money: bool,
    pub production_inputs: ProductionInputs,
    /// Cap on the market-clearing price of a seller with an empty stock,
    /// as a multiple of its previous price.
    pub price_cap_factor: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            theta: 0.5,
            tau_p: 0.5,
            tau_w: 0.5,
            lambda: 0.05,
            rho_chg: 0.0,
            p_new: 0.0,
            m: 200,
            mean_out_degree: 5.0,
            conserve_money: false,
            production_inputs: ProductionInputs::Delivered,
            price_cap_factor: 10.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        check_open("alpha", self.alpha, "(0, 1)")?;
        check_open("lambda", self.lambda, "(0, 1)")?;
        check_range("theta", self.theta, 0.0, 1.0, "[0, 1]")?;
        check_range("tau_p", self.tau_p, 0.0, 1.0, "[0, 1]")?;
        check_range("tau_w", self.tau_w, 0.0, 1.0, "[0, 1]")?;
        check_range("rho_chg", self.rho_chg, 0.0, 1.0, "[0, 1]")?;
        check_range("p_new", self.p_new, 0.0, 1.0, "[0, 1]")?;
        if self.m == 0 {
            return Err(Error::Config("m must be positive".into()));
        }
        if !(self.mean_out_degree.is_finite() && self.mean_out_degree > 0.0) {
            return Err(Error::Domain {
                name: "mean_out_degree",
                value: self.mean_out_degree,
                range: "(0, inf)",
            });
        }
        if !(self.price_cap_factor.is_finite() && self.price_cap_factor >= 1.0) {
            return Err(Error::Domain {
                name: "price_cap_factor",
                value: self.price_cap_factor,
                range: "[1, inf)",
            });
        }
        Ok(())
    }

    /// The CES technology implied by `alpha` and `theta`.
    pub fn technology(&self) -> crate::ces::Technology {
        crate::ces::Technology {
            alpha: self.alpha,
            theta: self.theta,
        }
    }
}
