//! Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson).

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// Builds the interpolant. `xs` must be strictly increasing and `ys`
    /// monotone (either direction).
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(LabError::InvalidInput(
                "monotone table needs at least two (x, y) pairs of equal length".into(),
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) || xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(LabError::InvalidInput(
                "table abscissae must be finite and strictly increasing".into(),
            ));
        }
        let increasing = ys.windows(2).all(|w| w[1] >= w[0]);
        let decreasing = ys.windows(2).all(|w| w[1] <= w[0]);
        if !increasing && !decreasing {
            return Err(LabError::InvalidInput(
                "table values are not monotone".into(),
            ));
        }
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            slopes[i] = if secants[i - 1] * secants[i] <= 0.0 {
                0.0
            } else {
                0.5 * (secants[i - 1] + secants[i])
            };
        }
        for i in 0..n - 1 {
            let d = secants[i];
            if d == 0.0 {
                slopes[i] = 0.0;
                slopes[i + 1] = 0.0;
                continue;
            }
            let a = slopes[i] / d;
            let b = slopes[i + 1] / d;
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[i] = tau * a * d;
                slopes[i + 1] = tau * b * d;
            }
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    fn locate(&self, x: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(LabError::OutOfDomain(format!(
                "{x} outside table range [{lo}, {hi}]"
            )));
        }
        let i = self.xs.partition_point(|&v| v <= x);
        Ok(i.clamp(1, self.xs.len() - 1) - 1)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let i = self.locate(x)?;
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        Ok(h00 * self.ys[i]
            + h10 * h * self.slopes[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.slopes[i + 1])
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let i = self.locate(x)?;
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let d00 = 6.0 * s * s - 6.0 * s;
        let d10 = 3.0 * s * s - 4.0 * s + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * s * s - 2.0 * s;
        Ok((d00 * self.ys[i] + d01 * self.ys[i + 1]) / h
            + d10 * self.slopes[i]
            + d11 * self.slopes[i + 1])
    }
}
