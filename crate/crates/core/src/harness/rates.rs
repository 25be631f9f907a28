//! Least-squares rate fits in log-log coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Exponent `a` in `error ~ C parameter^a`.
    pub slope: f64,
    /// `log2 C`
    pub intercept: f64,
    /// Coefficient of determination; 1 when the residuals vanish.
    pub r_squared: f64,
    /// Root-mean-square residual in `log2` units.
    pub residual_rms: f64,
}

/// Fits `log2(error) = slope * log2(parameter) + intercept` over at least
/// three `(parameter, error)` pairs.
pub fn fit_rates(levels: &[(f64, f64)]) -> Result<RateFit> {
    if levels.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a rate fit needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    if let Some(&(p, e)) = levels.iter().find(|&&(p, e)| !(p > 0.0 && e > 0.0) || !p.is_finite() || !e.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rate fits need positive finite values, got parameter {p} and error {e}"
        )));
    }
    let xs: Vec<f64> = levels.iter().map(|l| l.0.log2()).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.1.log2()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit parameters must not all coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_res <= 1e-28 * (1.0 + ss_tot) {
        1.0
    } else if ss_tot == 0.0 {
        0.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        residual_rms: (ss_res / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(c: f64, base: f64) -> Vec<(f64, f64)> {
        (0..4).map(|l| (2f64.powi(-l), c * base.powi(-l))).collect()
    }

    #[test]
    fn examples() {
        let f = fit_rates(&series(3.0, 2.0)).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && f.r_squared == 1.0);
        assert!((f.intercept - 3f64.log2()).abs() < 1e-12);
        assert!((fit_rates(&series(3.0, 4.0)).unwrap().slope - 2.0).abs() < 1e-12);
        let flat = fit_rates(&series(0.7, 1.0)).unwrap();
        assert!(flat.slope.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_rates(&[(1.0, 1.0), (0.5, 0.5)]).is_err());
        assert!(fit_rates(&[(1.0, 1.0), (0.5, 0.0), (0.25, 0.1)]).is_err());
        assert!(fit_rates(&[(1.0, 1.0), (0.5, -1.0), (0.25, 0.1)]).is_err());
        assert!(fit_rates(&[(1.0, 1.0), (1.0, 0.5), (1.0, 0.1)]).is_err());
    }

    #[test]
    fn noisy_fit_quality_below_one() {
        let f = fit_rates(&[(1.0, 1.0), (0.5, 0.3), (0.25, 0.2), (0.125, 0.01)]).unwrap();
        assert!(f.r_squared < 1.0 && f.r_squared > 0.0 && f.residual_rms > 0.0);
    }

    proptest! {
        #[test]
        fn recovers_power_laws(a in -3.0f64..3.0, c in 1e-3f64..1e3, h0 in 0.01f64..1.0) {
            let levels: Vec<(f64, f64)> = (0..5).map(|l| {
                let h = h0 * 2f64.powi(-l);
                (h, c * h.powf(a))
            }).collect();
            let f = fit_rates(&levels).unwrap();
            prop_assert!((f.slope - a).abs() < 1e-10);
        }
    }
}
