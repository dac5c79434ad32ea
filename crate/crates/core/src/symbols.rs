//! Fourier multipliers of the ILW dispersion family.
//!
//! The linear part of every flow is `∂_t v̂ = iω(ξ) v̂`, i.e. multiplication by
//! `e^{itω(ξ)}`. Starting from `∂_t v − G̃_δ ∂²_x v = ∂_x(v²)` with
//! `iξ Ĝ̃_δ(ξ) = Λ_δ(ξ)` the dispersive term contributes `iξΛ_δ(ξ) v̂`, so
//!
//! | flow        | ω(ξ)             |
//! |-------------|------------------|
//! | KdV         | `ξ³`             |
//! | scaled ILW  | `ξ Λ_δ(ξ)`       |
//! | ILW         | `(δ/3) ξ Λ_δ(ξ)` |
//! | BO          | `ξ |ξ|`          |
//!
//! KdV follows from `−∂³_x ↦ iξ³`, BO from `H∂²_x ↦ i sgn(ξ) ξ²`.
//!
//! `Λ_δ` is normalised so that `Λ_δ(ξ) → ξ²` as `δ → 0`:
//! `Λ_δ(ξ) = 3δ^{-1}(ξ coth(δξ) − δ^{-1}) = 6ξ² Σ_{k≥1} (k²π² + δ²ξ²)^{-1}`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::Grid;

/// Coefficients `d_m` of `h(x) = Σ_{m≥0} d_m x^{2m+2}` where `x = δξ` and
/// `h = 1 − 3(x coth x − 1)/x²`. Successive ratios are about `−(x/π)²`.
const H_SERIES: [f64; 22] = [
    0.066666666666666666667,
    -0.0063492063492063492063,
    0.00063492063492063492064,
    -0.000064133397466730800064,
    6.4932128424191916255e-6,
    -6.5777843555621333399e-7,
    6.6643826369939037228e-8,
    -6.7523539550426978563e-9,
    6.8415453613776548598e-10,
    -6.9319297797007872290e-11,
    7.0235120459474651878e-12,
    -7.1163052200700962885e-13,
    7.2103245999923118537e-14,
    -7.3055862087550106193e-15,
    7.4021064135516224118e-16,
    -7.4999018313662426940e-17,
    7.5989893072219044946e-18,
    -7.6993859108478859834e-19,
    7.8011089380411820766e-20,
    -7.9041759132461404025e-21,
    8.0086045924721848604e-22,
    -8.1144129663270929713e-23,
];

/// Below this `|δξ|` the multipliers are evaluated from power series; above it the
/// closed forms have no cancellation.
const SERIES_BRANCH: f64 = 1.0;

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("depth parameter must be positive, got {delta}")))
    }
}

fn h_small(x: f64) -> f64 {
    let x2 = x * x;
    let poly = H_SERIES.iter().rev().fold(0.0, |acc, &d| acc * x2 + d);
    poly * x2
}

/// `Λ_δ(ξ)`, the multiplier of `G̃_δ ∂_x`.
pub fn lambda_delta(xi: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let x = delta * xi;
    if x.abs() < SERIES_BRANCH {
        Ok(xi * xi * (1.0 - h_small(x)))
    } else {
        Ok(3.0 / delta * (xi / x.tanh() - 1.0 / delta))
    }
}

/// `h(δ, ξ) = 1 − Λ_δ(ξ)/ξ²`, with `h(δ, 0) = 0`.
pub fn h_delta(xi: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let x = delta * xi;
    if x.abs() < SERIES_BRANCH {
        Ok(h_small(x))
    } else {
        Ok(1.0 - 3.0 * (x / x.tanh() - 1.0) / (x * x))
    }
}

/// `a_δ(ξ) = ξ + (e^{−2δξ} − 1)/(2δ)`, the symbol of the inverse free resolvent at
/// `κ = 0`. Nonnegative; `+∞` once `e^{−2δξ}` overflows.
pub fn a_delta(xi: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let y = -2.0 * delta * xi;
    if y.abs() < 0.5 {
        // (e^y − 1 − y) = y² Σ_{n≥0} y^n/(n+2)!
        let mut term = 0.5;
        let mut sum = 0.0;
        for n in 0..20 {
            sum += term;
            term *= y / (n as f64 + 3.0);
        }
        Ok(y * y * sum / (2.0 * delta))
    } else {
        Ok(xi + y.exp_m1() / (2.0 * delta))
    }
}

/// `Ξ_KdV(ξ, ξ1, ξ2) = −3ξξ1ξ2` (valid on `ξ = ξ1 + ξ2`).
pub fn resonance_kdv(xi: f64, xi1: f64, xi2: f64) -> f64 {
    -3.0 * xi * xi1 * xi2
}

fn check_triple(xi: f64, xi1: f64, xi2: f64) -> Result<()> {
    let scale = 1.0_f64.max(xi.abs()).max(xi1.abs()).max(xi2.abs());
    if (xi - xi1 - xi2).abs() > 1e-12 * scale {
        return Err(Error::Domain(format!(
            "frequencies must satisfy xi = xi1 + xi2, got ({xi}, {xi1}, {xi2})"
        )));
    }
    Ok(())
}

/// `Ξ_δ − Ξ_KdV = ξ³h(δ,ξ) − ξ1³h(δ,ξ1) − ξ2³h(δ,ξ2)`, evaluated without
/// cancellation between the two resonance functions.
pub fn resonance_gap(xi: f64, xi1: f64, xi2: f64, delta: f64) -> Result<f64> {
    check_triple(xi, xi1, xi2)?;
    Ok(xi.powi(3) * h_delta(xi, delta)?
        - xi1.powi(3) * h_delta(xi1, delta)?
        - xi2.powi(3) * h_delta(xi2, delta)?)
}

/// `φ_δ(t) = e^{itΞ_δ} − e^{itΞ_KdV}` for the scaled ILW resonance.
pub fn phi_delta(t: f64, xi: f64, xi1: f64, xi2: f64, delta: f64) -> Result<Complex64> {
    let gap = resonance_gap(xi, xi1, xi2, delta)?;
    Ok(phi_from_gap(t, resonance_kdv(xi, xi1, xi2), gap))
}

/// `e^{itΞ}(e^{itg} − 1)` written as `2i sin(tg/2) e^{it(Ξ + g/2)}`.
pub(crate) fn phi_from_gap(t: f64, xi_kdv: f64, gap: f64) -> Complex64 {
    let half = 0.5 * t * gap;
    Complex64::from_polar(2.0 * half.sin(), t * xi_kdv + half + 0.5 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    KdV,
    ScaledIlw,
    Ilw,
    BenjaminOno,
}

/// One member of the dispersion family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSymbol {
    kind: SymbolKind,
    delta: Option<f64>,
}

impl DispersionSymbol {
    pub fn new(kind: SymbolKind, delta: Option<f64>) -> Result<Self> {
        match (kind, delta) {
            (SymbolKind::ScaledIlw | SymbolKind::Ilw, None) => Err(Error::Config(format!(
                "{kind:?} requires a depth parameter delta"
            ))),
            (SymbolKind::ScaledIlw | SymbolKind::Ilw, Some(d)) => {
                check_delta(d)?;
                Ok(Self { kind, delta })
            }
            (_, _) => Ok(Self { kind, delta: None }),
        }
    }

    pub fn kdv() -> Self {
        Self {
            kind: SymbolKind::KdV,
            delta: None,
        }
    }

    pub fn benjamin_ono() -> Self {
        Self {
            kind: SymbolKind::BenjaminOno,
            delta: None,
        }
    }

    pub fn scaled_ilw(delta: f64) -> Result<Self> {
        Self::new(SymbolKind::ScaledIlw, Some(delta))
    }

    pub fn ilw(delta: f64) -> Result<Self> {
        Self::new(SymbolKind::Ilw, Some(delta))
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    /// Linear phase `ω(ξ)`; the free flow multiplies `v̂(ξ)` by `e^{itω(ξ)}`.
    pub fn phase(&self, xi: f64) -> f64 {
        match self.kind {
            SymbolKind::KdV => xi * xi * xi,
            SymbolKind::BenjaminOno => xi * xi.abs(),
            SymbolKind::ScaledIlw => {
                xi * lambda_delta(xi, self.delta.unwrap()).expect("validated delta")
            }
            SymbolKind::Ilw => {
                let d = self.delta.unwrap();
                d / 3.0 * xi * lambda_delta(xi, d).expect("validated delta")
            }
        }
    }

    /// `Ξ = −ω(ξ) + ω(ξ1) + ω(ξ2)` on `ξ = ξ1 + ξ2`. For KdV the factored form
    /// `−3ξξ1ξ2` is returned.
    pub fn resonance(&self, xi: f64, xi1: f64, xi2: f64) -> Result<f64> {
        check_triple(xi, xi1, xi2)?;
        Ok(match self.kind {
            SymbolKind::KdV => resonance_kdv(xi, xi1, xi2),
            _ => -self.phase(xi) + self.phase(xi1) + self.phase(xi2),
        })
    }
}

/// Free function form of [`DispersionSymbol::phase`].
pub fn phase(symbol: &DispersionSymbol, xi: f64) -> f64 {
    symbol.phase(xi)
}

/// `ω(ξ)` tabulated over a grid in storage order.
#[derive(Debug, Clone)]
pub struct MultiplierTable {
    grid: Grid,
    symbol: DispersionSymbol,
    omega: Vec<f64>,
}

impl MultiplierTable {
    pub fn new(grid: Grid, symbol: DispersionSymbol) -> Self {
        let omega = grid.frequencies().map(|xi| symbol.phase(xi as f64)).collect();
        Self {
            grid,
            symbol,
            omega,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn symbol(&self) -> DispersionSymbol {
        self.symbol
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn max_abs(&self) -> f64 {
        self.omega.iter().fold(0.0, |m, w| m.max(w.abs()))
    }
}

/// Σ_{k>n} 1/(k² + b²) by Euler–Maclaurin, error O(n^{-5}).
fn tail_inverse_quadratic(n: f64, b: f64) -> f64 {
    let integral = if b == 0.0 { 1.0 / n } else { (b / n).atan() / b };
    let q = n * n + b * b;
    let f = 1.0 / q;
    let df = -2.0 * n / (q * q);
    integral - 0.5 * f - df / 12.0
}

/// `6ξ² Σ_{k=1}^{terms} (k²π² + δ²ξ²)^{-1}` plus an Euler–Maclaurin estimate of the
/// remaining tail. Independent of the closed form used by [`lambda_delta`].
pub fn lambda_delta_series(xi: f64, delta: f64, terms: usize) -> f64 {
    let a2 = (delta * xi).powi(2);
    let partial: f64 = (1..=terms)
        .rev()
        .map(|k| {
            let kp = k as f64 * PI;
            1.0 / (kp * kp + a2)
        })
        .sum();
    let tail = tail_inverse_quadratic(terms as f64, delta * xi.abs() / PI) / (PI * PI);
    6.0 * xi * xi * (partial + tail)
}

/// `6δ²ξ² Σ_{k=1}^{terms} (k²π²(k²π² + δ²ξ²))^{-1}` plus the `1/(3n³π⁴)` tail.
pub fn h_delta_series(xi: f64, delta: f64, terms: usize) -> f64 {
    let a2 = (delta * xi).powi(2);
    let partial: f64 = (1..=terms)
        .rev()
        .map(|k| {
            let kp2 = (k as f64 * PI).powi(2);
            1.0 / (kp2 * (kp2 + a2))
        })
        .sum();
    let n = terms as f64;
    let tail = 1.0 / (3.0 * n * n * n * PI.powi(4));
    6.0 * a2 * (partial + tail)
}
