//! Regime taxonomy and the scale functions `α_ε(t)`, `β_ε(t)`, `H_ε(t)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for deciding that two exponents of `m` are equal.
const EXPONENT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum Regime {
    Sub1,
    Sub2 { frak_c: f64 },
    Sub3,
    Crt1,
    Crt2 { limit_t: f64 },
    Sup,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Sub1 => "Sub-1",
            Regime::Sub2 { .. } => "Sub-2",
            Regime::Sub3 => "Sub-3",
            Regime::Crt1 => "Crt-1",
            Regime::Crt2 { .. } => "Crt-2",
            Regime::Sup => "Sup",
        }
    }

    /// Whether `ω` lies in the range this regime is defined for.
    pub fn admits(&self, omega: f64) -> bool {
        match self {
            Regime::Sub1 | Regime::Sub2 { .. } | Regime::Sub3 => omega > 0.0 && omega < 2.0,
            Regime::Crt1 | Regime::Crt2 { .. } => omega == 2.0,
            Regime::Sup => omega > 2.0,
        }
    }

    /// Whether `H_ε` is the Gaussian cumulant `t²γ_ε(0)/2` in this regime.
    pub fn has_cumulant_term(&self) -> bool {
        matches!(self, Regime::Sub1 | Regime::Crt1 | Regime::Sup)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Sub2 { frak_c } => write!(f, "Sub-2 (c = {frak_c})"),
            Regime::Crt2 { limit_t } => write!(f, "Crt-2 (t = {limit_t})"),
            other => f.write_str(other.name()),
        }
    }
}

/// The sequence `coefficient · m^exponent` of the master parameter `m → ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn new(coefficient: f64, exponent: f64) -> Self {
        Self { coefficient, exponent }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(value, 0.0)
    }

    pub fn at(&self, m: f64) -> f64 {
        self.coefficient * m.powf(self.exponent)
    }
}

/// Scale functions of one regime row at fixed `(ε, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTriple {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

/// Classifies the pair of sequences `e(m) = a m^{-u}`, `t(m) = b m^{v}`.
///
/// Requires `u, v ≥ 0`, `a ∈ (0, 1]` (so `sup e ≤ 1`) and `b > 0` (so `inf t > 0`).
pub fn classify_regime(omega: f64, e: PowerLaw, t: PowerLaw) -> Result<Regime> {
    let (a, u) = (e.coefficient, -e.exponent);
    let (b, v) = (t.coefficient, t.exponent);
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
    }
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidParameter(format!("e must satisfy 0 < e ≤ 1, got coefficient {a}")));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must stay away from zero, got coefficient {b}")));
    }
    if u < 0.0 || v < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "e must be nonincreasing and t nondecreasing in m (got exponents {} and {v})",
            e.exponent
        )));
    }
    let e_vanishes = u > EXPONENT_TOL;
    let t_diverges = v > EXPONENT_TOL;
    let unclassifiable = |why: &str| Err(Error::UnclassifiableSequence(format!("omega = {omega}: {why}")));

    if omega < 2.0 {
        if !t_diverges {
            return unclassifiable("the subcritical regimes need t → ∞");
        }
        let growth = -u + v / (2.0 - omega);
        if growth > EXPONENT_TOL {
            Ok(Regime::Sub1)
        } else if growth < -EXPONENT_TOL {
            Ok(Regime::Sub3)
        } else {
            Ok(Regime::Sub2 { frak_c: a * b.powf(1.0 / (2.0 - omega)) })
        }
    } else if omega == 2.0 {
        if t_diverges {
            Ok(Regime::Crt1)
        } else if e_vanishes {
            Ok(Regime::Crt2 { limit_t: b })
        } else {
            unclassifiable("the critical regime needs t → ∞, or e → 0 with t bounded")
        }
    } else if e_vanishes || t_diverges {
        Ok(Regime::Sup)
    } else {
        unclassifiable("the supercritical regime needs e → 0 or t → ∞")
    }
}

/// `x^{num/den}`, exact when `x` is a power of two and the exponent of the result is an integer.
fn pow_ratio(x: f64, num: f64, den: f64) -> f64 {
    let l = x.log2();
    if l.fract() == 0.0 {
        (l * num / den).exp2()
    } else {
        x.powf(num / den)
    }
}

/// `(α_ε(t), β_ε(t), H_ε(t))` for the given regime row.
pub fn scaling_functions(regime: &Regime, epsilon: f64, t: f64, gamma1_at_0: f64, omega: f64) -> ScalingTriple {
    let (alpha, beta, h) = match regime {
        Regime::Sub1 | Regime::Sup => (
            pow_ratio(epsilon, 2.0 + omega, 4.0) * pow_ratio(t, -1.0, 4.0),
            pow_ratio(epsilon, -(2.0 + omega), 2.0) * pow_ratio(t, 3.0, 2.0),
            pow_ratio(epsilon, -omega, 1.0) * t * t * gamma1_at_0 / 2.0,
        ),
        Regime::Sub2 { .. } | Regime::Sub3 => {
            (pow_ratio(t, -1.0, 2.0 - omega), pow_ratio(t, 4.0 - omega, 2.0 - omega), 0.0)
        }
        Regime::Crt1 => (
            epsilon * pow_ratio(t, -1.0, 4.0),
            epsilon.powi(-2) * pow_ratio(t, 3.0, 2.0),
            epsilon.powi(-2) * t * t * gamma1_at_0 / 2.0,
        ),
        Regime::Crt2 { .. } => (epsilon, epsilon.powi(-2) * t, 0.0),
    };
    ScalingTriple { alpha, beta, h }
}

/// `H_ε(pt) − β_ε(pt) χ^p`.
pub fn predicted_log_moment(regime: &Regime, p: f64, t: f64, epsilon: f64, chi_p: f64, gamma1_at_0: f64, omega: f64) -> f64 {
    let tr = scaling_functions(regime, epsilon, p * t, gamma1_at_0, omega);
    tr.h - tr.beta * chi_p
}

/// One row of the CLI prediction table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeRecord {
    pub regime: Regime,
    pub name: String,
    pub epsilon: f64,
    pub t: f64,
    pub p: f64,
    pub omega: f64,
    pub gamma1_at_0: f64,
    #[serde(flatten)]
    pub triple: ScalingTriple,
    pub chi_p: Option<f64>,
    pub predicted_log_moment: Option<f64>,
}

impl RegimeRecord {
    pub fn new(regime: Regime, epsilon: f64, t: f64, p: f64, omega: f64, gamma1_at_0: f64, chi_p: Option<f64>) -> Self {
        let triple = scaling_functions(&regime, epsilon, p * t, gamma1_at_0, omega);
        Self {
            regime,
            name: regime.name().to_string(),
            epsilon,
            t,
            p,
            omega,
            gamma1_at_0,
            triple,
            chi_p,
            predicted_log_moment: chi_p.map(|c| predicted_log_moment(&regime, p, t, epsilon, c, gamma1_at_0, omega)),
        }
    }

    pub fn csv_header() -> &'static str {
        "regime,epsilon,t,p,omega,gamma1_at_0,alpha,beta,H,chi_p,predicted_log_moment"
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            self.name,
            self.epsilon,
            self.t,
            self.p,
            self.omega,
            self.gamma1_at_0,
            self.triple.alpha,
            self.triple.beta,
            self.triple.h,
            opt(self.chi_p),
            opt(self.predicted_log_moment)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(power: f64) -> PowerLaw {
        PowerLaw::new(1.0, power)
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_regime(1.0, m(-1.0), m(1.0)).unwrap(), Regime::Sub2 { frak_c: 1.0 });
        assert_eq!(classify_regime(1.0, PowerLaw::constant(1.0), m(1.0)).unwrap(), Regime::Sub1);
        assert_eq!(classify_regime(1.0, m(-2.0), m(1.0)).unwrap(), Regime::Sub3);
        assert_eq!(classify_regime(3.0, m(-1.0), PowerLaw::constant(1.0)).unwrap(), Regime::Sup);
        assert_eq!(classify_regime(2.0, m(-1.0), PowerLaw::constant(0.5)).unwrap(), Regime::Crt2 { limit_t: 0.5 });
        assert_eq!(classify_regime(2.0, PowerLaw::constant(1.0), m(0.5)).unwrap(), Regime::Crt1);
    }

    #[test]
    fn unclassifiable_and_invalid() {
        let r = classify_regime(2.0, PowerLaw::constant(0.5), PowerLaw::constant(1.0));
        assert!(matches!(r, Err(Error::UnclassifiableSequence(_))));
        let r = classify_regime(1.0, m(-1.0), PowerLaw::constant(3.0));
        assert!(matches!(r, Err(Error::UnclassifiableSequence(_))));
        assert!(classify_regime(1.0, PowerLaw::new(2.0, 0.0), m(1.0)).is_err());
        assert!(classify_regime(1.0, m(-1.0), PowerLaw::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn table_rows() {
        let s = scaling_functions(&Regime::Sub1, 1.0, 16.0, 1.0, 1.0);
        assert_eq!((s.alpha, s.beta, s.h), (0.5, 64.0, 128.0));
        let c = scaling_functions(&Regime::Crt2 { limit_t: 2.0 }, 0.1, 2.0, 1.0, 2.0);
        assert!((c.alpha - 0.1).abs() < 1e-15 && (c.beta - 200.0).abs() < 1e-10 && c.h == 0.0);
        let s3 = scaling_functions(&Regime::Sub3, 0.3, 8.0, 1.0, 1.0);
        assert_eq!((s3.alpha, s3.beta, s3.h), (0.125, 512.0, 0.0));
    }

    #[test]
    fn predictions() {
        let p = predicted_log_moment(&Regime::Sub1, 1.0, 16.0, 1.0, 0.0, 1.0, 1.0);
        assert_eq!(p, 128.0);
        let p = predicted_log_moment(&Regime::Sub1, 1.0, 16.0, 1.0, 0.25, 1.0, 1.0);
        assert_eq!(p, 128.0 - 64.0 * 0.25);
        let big_m = 0.7;
        let p = predicted_log_moment(&Regime::Sub3, 1.0, 8.0, 0.01, -big_m, 1.0, 1.0);
        assert!((p - 512.0 * big_m).abs() < 1e-12);
    }

    #[test]
    fn records_render() {
        let r = RegimeRecord::new(Regime::Sub1, 1.0, 16.0, 1.0, 1.0, 1.0, None);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"alpha\":0.5") && json.contains("\"H\":128.0"), "{json}");
        assert_eq!(r.csv_row().split(',').count(), RegimeRecord::csv_header().split(',').count());
    }
}
