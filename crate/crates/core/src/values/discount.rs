use std::fmt;
use std::str::FromStr;

use num_traits::{One, Pow, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::{self, serde_q, Q};
use crate::{Error, Result};

/// A summable discount function `gamma(1), gamma(2), ...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscountSchedule {
    /// `gamma(i) = ratio^i` with `0 < ratio < 1`.
    Geometric {
        #[serde(with = "serde_q")]
        ratio: Q,
    },
    /// `gamma(i)` read from the table for `i <= len`, zero afterwards.
    Table {
        #[serde(with = "table_q")]
        gammas: Vec<Q>,
    },
}

mod table_q {
    use super::Q;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(values: &[Q], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(values.iter().map(crate::rational::to_string))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|t| crate::rational::parse(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

impl Default for DiscountSchedule {
    fn default() -> Self {
        DiscountSchedule::Geometric { ratio: rational::half() }
    }
}

impl DiscountSchedule {
    pub fn geometric(ratio: Q) -> Result<Self> {
        let d = DiscountSchedule::Geometric { ratio };
        d.validate()?;
        Ok(d)
    }

    pub fn table(gammas: Vec<Q>) -> Result<Self> {
        let d = DiscountSchedule::Table { gammas };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DiscountSchedule::Geometric { ratio } => {
                if !ratio.is_positive() || ratio >= &Q::one() {
                    return Err(Error::InvalidArgument(format!("geometric ratio {ratio} must lie in (0, 1)")));
                }
            }
            DiscountSchedule::Table { gammas } => {
                if gammas.iter().any(|g| g.is_negative()) {
                    return Err(Error::InvalidArgument("discount table entries must be nonnegative".into()));
                }
            }
        }
        Ok(())
    }

    /// `gamma(t)` for `t >= 1`.
    pub fn gamma(&self, t: u64) -> Q {
        match self {
            DiscountSchedule::Geometric { ratio } => ratio.clone().pow(t),
            DiscountSchedule::Table { gammas } => table_entry(gammas, t),
        }
    }

    /// `Gamma_t = sum_{i >= t} gamma(i)`.
    pub fn tail(&self, t: u64) -> Q {
        match self {
            DiscountSchedule::Geometric { ratio } => self.gamma(t) / (Q::one() - ratio),
            DiscountSchedule::Table { gammas } => {
                let start = (t.max(1) - 1) as usize;
                gammas.iter().skip(start).fold(Q::zero(), |acc, g| acc + g)
            }
        }
    }

    /// `Gamma_{t+k} / Gamma_t`, or `None` when `Gamma_t = 0`.
    pub fn tail_ratio(&self, t: u64, k: u64) -> Option<Q> {
        match self {
            DiscountSchedule::Geometric { ratio } => Some(ratio.clone().pow(k)),
            DiscountSchedule::Table { .. } => {
                let base = self.tail(t);
                (!base.is_zero()).then(|| self.tail(t + k) / base)
            }
        }
    }

    /// `gamma(m) / Gamma_t` for `m >= t`, or `None` when `Gamma_t = 0`.
    pub fn weight(&self, t: u64, m: u64) -> Option<Q> {
        debug_assert!(m >= t);
        match self {
            DiscountSchedule::Geometric { ratio } => {
                Some(ratio.clone().pow(m - t) * (Q::one() - ratio))
            }
            DiscountSchedule::Table { gammas } => {
                let base = self.tail(t);
                (!base.is_zero()).then(|| table_entry(gammas, m) / base)
            }
        }
    }

    pub fn is_geometric(&self) -> bool {
        matches!(self, DiscountSchedule::Geometric { .. })
    }
}

fn table_entry(gammas: &[Q], t: u64) -> Q {
    if t == 0 {
        return Q::zero();
    }
    gammas.get((t - 1) as usize).cloned().unwrap_or_else(Q::zero)
}

/// The effective horizon `H_t(eps) = min { k : Gamma_{t+k} / Gamma_t <= eps }`.
pub fn effective_horizon(discount: &DiscountSchedule, t: u64, eps: &Q) -> Result<u64> {
    if !eps.is_positive() {
        return Err(Error::InvalidArgument("horizon accuracy must be positive".into()));
    }
    if eps >= &Q::one() {
        return match discount.tail_ratio(t, 0) {
            Some(_) => Ok(0),
            None => Err(Error::UndefinedHorizon(t)),
        };
    }
    match discount {
        DiscountSchedule::Geometric { ratio } => {
            // ratio^k <= eps  <=>  k >= ln eps / ln ratio; the float guess is
            // then corrected with exact comparisons.
            let guess = (rational::to_f64(eps).ln() / rational::to_f64(ratio).ln()).ceil();
            let mut k = if guess.is_finite() && guess > 0.0 { guess as u64 } else { 0 };
            let fits = |k: u64| ratio.clone().pow(k) <= *eps;
            while k > 0 && fits(k - 1) {
                k -= 1;
            }
            while !fits(k) {
                k += 1;
            }
            Ok(k)
        }
        DiscountSchedule::Table { gammas } => {
            let base = discount.tail(t);
            if base.is_zero() {
                return Err(Error::UndefinedHorizon(t));
            }
            let end = gammas.len() as u64 + 1;
            let mut k = 0;
            loop {
                if discount.tail(t + k) <= eps * &base {
                    return Ok(k);
                }
                // Past the table every tail is zero, so the loop ends.
                debug_assert!(t + k < end);
                k += 1;
            }
        }
    }
}

impl fmt::Display for DiscountSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscountSchedule::Geometric { ratio } => write!(f, "geometric:{}", rational::to_string(ratio)),
            DiscountSchedule::Table { gammas } => {
                let items: Vec<String> = gammas.iter().map(rational::to_string).collect();
                write!(f, "table:{}", items.join(","))
            }
        }
    }
}

/// Parses `geometric:RATIO` or `table:G1,G2,...`.
impl FromStr for DiscountSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("discount `{s}`: expected geometric:R or table:G1,G2,...")))?;
        match kind.trim() {
            "geometric" => DiscountSchedule::geometric(rational::parse(rest.trim())?),
            "table" => {
                let gammas = rest
                    .split(',')
                    .filter(|x| !x.trim().is_empty())
                    .map(|x| rational::parse(x.trim()))
                    .collect::<Result<Vec<_>>>()?;
                DiscountSchedule::table(gammas)
            }
            other => Err(Error::Parse(format!("unknown discount kind `{other}`"))),
        }
    }
}
