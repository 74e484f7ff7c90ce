//! Smooth scalar test functions with exact derivatives of every order.
//!
//! Four families are supported.  All of them are analytic on the real line,
//! so besides point derivatives each family can hand out Taylor
//! coefficients `f^{(j)}(c) / j!` without overflow, which the divided
//! difference code relies on for clustered nodes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsfError};

/// Default derivative-order cap; every family supports arbitrary order.
pub const DEFAULT_MAX_DERIVATIVE_ORDER: u32 = 64;

/// Family tag plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "camelCase")]
pub enum FunctionFamily {
    /// `amplitude · exp(-(t - center)² / (2 width²))`
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `Σ coeffs[i] t^i`
    Polynomial { coeffs: Vec<f64> },
    /// `exp(i · frequency · t)`
    #[serde(rename = "complexExponential")]
    ComplexExponential { frequency: f64 },
    /// `(t - pole)^(-power)` with `Im pole ≠ 0`
    #[serde(rename = "resolventPower")]
    ResolventPower {
        #[serde(with = "complex_object")]
        pole: Complex64,
        power: u32,
    },
}

/// Serializes a complex number as `{"re": .., "im": ..}`.
pub mod complex_object {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Parts {
        re: f64,
        #[serde(default)]
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        Parts { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let p = Parts::deserialize(d)?;
        Ok(Complex64::new(p.re, p.im))
    }
}

fn one() -> f64 {
    1.0
}

/// A test function together with the highest derivative order callers may
/// request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothTestFunction {
    #[serde(flatten)]
    pub family: FunctionFamily,
    #[serde(default = "default_max_order", rename = "maxDerivativeOrder")]
    pub max_derivative_order: u32,
}

fn default_max_order() -> u32 {
    DEFAULT_MAX_DERIVATIVE_ORDER
}

impl SmoothTestFunction {
    pub fn new(family: FunctionFamily) -> Result<Self> {
        let f = Self {
            family,
            max_derivative_order: DEFAULT_MAX_DERIVATIVE_ORDER,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn gaussian(center: f64, width: f64) -> Self {
        Self::new(FunctionFamily::Gaussian {
            center,
            width,
            amplitude: 1.0,
        })
        .expect("gaussian parameters must be finite with positive width")
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self::new(FunctionFamily::Polynomial { coeffs }).expect("polynomial coefficients must be finite")
    }

    /// `t^n`.
    pub fn monomial(n: usize) -> Self {
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        Self::polynomial(c)
    }

    pub fn complex_exponential(frequency: f64) -> Self {
        Self::new(FunctionFamily::ComplexExponential { frequency }).expect("finite frequency")
    }

    pub fn resolvent_power(pole: Complex64, power: u32) -> Self {
        Self::new(FunctionFamily::ResolventPower { pole, power }).expect("pole off the real axis, power >= 1")
    }

    pub fn with_max_order(mut self, order: u32) -> Self {
        self.max_derivative_order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            FunctionFamily::Gaussian {
                center,
                width,
                amplitude,
            } => {
                if !(center.is_finite() && amplitude.is_finite() && width.is_finite() && *width > 0.0) {
                    return Err(SsfError::invalid("gaussian needs finite center/amplitude and width > 0"));
                }
            }
            FunctionFamily::Polynomial { coeffs } => {
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(SsfError::invalid("polynomial coefficients must be finite"));
                }
            }
            FunctionFamily::ComplexExponential { frequency } => {
                if !frequency.is_finite() {
                    return Err(SsfError::invalid("frequency must be finite"));
                }
            }
            FunctionFamily::ResolventPower { pole, power } => {
                if *power == 0 || pole.im == 0.0 || !pole.im.is_finite() || !pole.re.is_finite() {
                    return Err(SsfError::invalid("resolvent power needs Im(pole) != 0 and power >= 1"));
                }
            }
        }
        Ok(())
    }

    /// Whether the function is real on the real line.
    pub fn is_real(&self) -> bool {
        matches!(
            self.family,
            FunctionFamily::Gaussian { .. } | FunctionFamily::Polynomial { .. }
        ) || matches!(self.family, FunctionFamily::ComplexExponential { frequency } if frequency == 0.0)
    }

    pub fn value(&self, t: f64) -> Complex64 {
        self.taylor_coefficients(t, 1)[0]
    }

    /// `f^{(k)}(t)`; errors when `k` exceeds the declared maximal order.
    pub fn derivative(&self, k: u32, t: f64) -> Result<Complex64> {
        if k > self.max_derivative_order {
            return Err(SsfError::invalid(format!(
                "derivative of order {k} requested, function declares at most {}",
                self.max_derivative_order
            )));
        }
        Ok(self.derivative_unchecked(k, t))
    }

    pub(crate) fn derivative_unchecked(&self, k: u32, t: f64) -> Complex64 {
        let g = self.taylor_coefficients(t, k as usize + 1);
        g[k as usize] * factorial(k as usize)
    }

    /// `[f(c), f'(c), f''(c)/2!, …]`, `count` entries.
    pub fn taylor_coefficients(&self, c: f64, count: usize) -> Vec<Complex64> {
        let mut g = Vec::with_capacity(count);
        if count == 0 {
            return g;
        }
        match &self.family {
            FunctionFamily::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let y = (c - center) / width;
                let base = amplitude * (-0.5 * y * y).exp();
                // normalized probabilists' Hermite: e_j = He_j(y)/j!
                let mut prev = 0.0;
                let mut cur = 1.0;
                let mut pow = 1.0;
                for j in 0..count {
                    g.push(Complex64::new(base * pow * cur, 0.0));
                    let next = (y * cur - prev) / (j as f64 + 1.0);
                    prev = cur;
                    cur = next;
                    pow *= -1.0 / width;
                }
            }
            FunctionFamily::Polynomial { coeffs } => {
                // repeated synthetic division yields the shifted coefficients
                let mut a: Vec<f64> = coeffs.clone();
                for j in 0..count {
                    if j >= a.len() {
                        g.push(Complex64::new(0.0, 0.0));
                        continue;
                    }
                    let mut acc = 0.0;
                    for i in (j..a.len()).rev() {
                        acc = acc * c + a[i];
                        a[i] = acc;
                    }
                    g.push(Complex64::new(a[j], 0.0));
                }
            }
            FunctionFamily::ComplexExponential { frequency } => {
                let is = Complex64::new(0.0, *frequency);
                let mut term = Complex64::new(0.0, frequency * c).exp();
                for j in 0..count {
                    g.push(term);
                    term *= is / (j as f64 + 1.0);
                }
            }
            FunctionFamily::ResolventPower { pole, power } => {
                let w = Complex64::new(c, 0.0) - pole;
                let k = *power as f64;
                let mut term = w.powi(-(*power as i32));
                for j in 0..count {
                    g.push(term);
                    term *= -(k + j as f64) / ((j as f64 + 1.0) * w);
                }
            }
        }
        g
    }

    /// Length scale below which a Taylor expansion around any real point
    /// converges quickly; `f64::INFINITY` for polynomials.
    pub fn natural_scale(&self) -> f64 {
        match &self.family {
            FunctionFamily::Gaussian { width, .. } => *width,
            FunctionFamily::Polynomial { .. } => f64::INFINITY,
            FunctionFamily::ComplexExponential { frequency } => {
                if *frequency == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / frequency.abs()
                }
            }
            FunctionFamily::ResolventPower { pole, .. } => pole.im.abs(),
        }
    }

    /// Polynomial degree, if the function is a polynomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match &self.family {
            FunctionFamily::Polynomial { coeffs } => Some(
                coeffs
                    .iter()
                    .rposition(|&c| c != 0.0)
                    .unwrap_or(0),
            ),
            _ => None,
        }
    }

    /// `sup |f^{(n)}|` over `[a, b]`, or over the whole line when the family
    /// decays (`None`).  Polynomials need an interval.
    pub fn derivative_sup_norm(&self, n: u32, interval: Option<(f64, f64)>) -> Result<f64> {
        let (a, b) = match (interval, &self.family) {
            (Some(iv), _) => iv,
            (None, FunctionFamily::Gaussian { center, width, .. }) => {
                (center - (12.0 + n as f64) * width, center + (12.0 + n as f64) * width)
            }
            (None, FunctionFamily::ComplexExponential { frequency }) => {
                return Ok(frequency.abs().powi(n as i32));
            }
            (None, FunctionFamily::ResolventPower { pole, power }) => {
                // maximum of |t - z|^{-(k+n)} is at t = Re z
                let mut c = 1.0;
                for j in 0..n {
                    c *= (*power + j) as f64;
                }
                return Ok(c * pole.im.abs().powi(-((*power + n) as i32)));
            }
            (None, FunctionFamily::Polynomial { .. }) => {
                return Err(SsfError::invalid("sup norm of a polynomial derivative needs a bounded interval"));
            }
        };
        if !(a <= b) {
            return Err(SsfError::invalid("empty interval"));
        }
        let samples = 4096;
        let h = (b - a) / samples as f64;
        let g = |t: f64| self.derivative_unchecked(n, t).norm();
        let mut best = (g(a), a);
        for i in 1..=samples {
            let t = a + i as f64 * h;
            let v = g(t);
            if v > best.0 {
                best = (v, t);
            }
        }
        // golden-section refinement around the best sample
        let (mut lo, mut hi) = ((best.1 - h).max(a), (best.1 + h).min(b));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let x1 = hi - phi * (hi - lo);
            let x2 = lo + phi * (hi - lo);
            if g(x1) > g(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        Ok(best.0.max(g(0.5 * (lo + hi))))
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: &SmoothTestFunction, max_k: u32) {
        let h = 1e-5;
        for &t in &[-1.3, -0.2, 0.0, 0.45, 1.7] {
            for k in 1..=max_k {
                let d = f.derivative(k, t).unwrap();
                let fd = (f.derivative(k - 1, t + h).unwrap() - f.derivative(k - 1, t - h).unwrap()) / (2.0 * h);
                let scale = d.norm().max(1.0);
                assert!((d - fd).norm() <= 1e-6 * scale, "{f:?} k={k} t={t}: {d} vs {fd}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        fd_check(&SmoothTestFunction::gaussian(0.3, 0.8), 6);
        fd_check(&SmoothTestFunction::polynomial(vec![1.0, -2.0, 0.5, 3.0, 0.25]), 5);
        fd_check(&SmoothTestFunction::complex_exponential(1.7), 6);
        fd_check(&SmoothTestFunction::resolvent_power(Complex64::new(0.2, 1.5), 2), 5);
    }

    #[test]
    fn polynomial_taylor_shift() {
        // t^3 at c = 2: 8, 12, 6, 1
        let f = SmoothTestFunction::monomial(3);
        let g = f.taylor_coefficients(2.0, 5);
        let re: Vec<f64> = g.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![8.0, 12.0, 6.0, 1.0, 0.0]);
    }

    #[test]
    fn derivative_order_cap() {
        let f = SmoothTestFunction::gaussian(0.0, 1.0).with_max_order(2);
        assert!(f.derivative(2, 0.0).is_ok());
        assert!(f.derivative(3, 0.0).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(SmoothTestFunction::new(FunctionFamily::Gaussian {
            center: 0.0,
            width: 0.0,
            amplitude: 1.0
        })
        .is_err());
        assert!(SmoothTestFunction::new(FunctionFamily::ResolventPower {
            pole: Complex64::new(1.0, 0.0),
            power: 1
        })
        .is_err());
    }

    #[test]
    fn sup_norms() {
        let f = SmoothTestFunction::gaussian(0.0, 1.0);
        assert!((f.derivative_sup_norm(0, None).unwrap() - 1.0).abs() < 1e-12);
        // |f'| peaks at y = ±1 with value e^{-1/2}
        assert!((f.derivative_sup_norm(1, None).unwrap() - (-0.5f64).exp()).abs() < 1e-10);
        let p = SmoothTestFunction::monomial(3);
        assert!((p.derivative_sup_norm(1, Some((-2.0, 1.0))).unwrap() - 12.0).abs() < 1e-9);
    }

    #[test]
    fn serde_descriptor() {
        let f: SmoothTestFunction = serde_json::from_str(r#"{"family":"polynomial","coeffs":[0,0,1]}"#).unwrap();
        assert_eq!(f.polynomial_degree(), Some(2));
        let g: SmoothTestFunction =
            serde_json::from_str(r#"{"family":"gaussian","center":0.5,"width":2.0}"#).unwrap();
        assert_eq!(g.value(0.5).re, 1.0);
        let r: SmoothTestFunction =
            serde_json::from_str(r#"{"family":"resolventPower","pole":{"re":0,"im":1},"power":1}"#).unwrap();
        assert!((r.value(0.0) - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }
}
