//! Stand-alone studies: projection error rates and noise validation output.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::rates::{fit_rates, RateFit};
use crate::error::{Error, Result};
use crate::fem::{pressure_error, velocity_error, FeSpace, PressureProjector, VelocityProjector};
use crate::noise::ConditionReport;
use crate::schemes::{taylor_green, taylor_green_jacobian};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionRow {
    pub n: usize,
    pub h: f64,
    pub velocity_l2: f64,
    pub velocity_h1: f64,
    pub pressure_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionStudy {
    pub rows: Vec<ProjectionRow>,
    pub velocity_l2: RateFit,
    pub velocity_h1: RateFit,
    pub pressure_l2: RateFit,
}

/// Projection errors of `v = curl(sin x sin y)` onto the discretely
/// divergence-free space and of `p = cos x` onto the pressure space, with
/// slopes of the norms against `h`.
pub fn projection_rates(ns: &[usize]) -> Result<ProjectionStudy> {
    let v = |x: [f64; 2]| taylor_green(x, 0.0, 1.0, 1.0);
    let jac = |x: [f64; 2]| taylor_green_jacobian(x, 0.0, 1.0, 1.0);
    let p = |x: [f64; 2]| x[0].cos();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let space = FeSpace::taylor_hood(n)?;
        let vh = VelocityProjector::new(&space)?.project_fn(v)?;
        let ph = PressureProjector::new(&space).project_fn(p)?;
        let ev = velocity_error(&space, &vh.coeffs, v, jac);
        rows.push(ProjectionRow {
            n,
            h: space.h(),
            velocity_l2: ev.l2,
            velocity_h1: ev.h1,
            pressure_l2: pressure_error(&space, &ph.coeffs, p),
        });
    }
    let fit = |f: fn(&ProjectionRow) -> f64| fit_rates(&rows.iter().map(|r| (r.h, f(r))).collect::<Vec<_>>());
    Ok(ProjectionStudy {
        velocity_l2: fit(|r| r.velocity_l2)?,
        velocity_h1: fit(|r| r.velocity_h1)?,
        pressure_l2: fit(|r| r.pressure_l2)?,
        rows,
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

/// Writes `projection.csv`, `projection_rates.csv` and one plot-data file per norm.
pub fn emit_projection(study: &ProjectionStudy, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut table = String::from("n,h,velocity_l2,velocity_h1,pressure_l2\n");
    for r in &study.rows {
        let _ = writeln!(table, "{},{},{},{},{}", r.n, r.h, r.velocity_l2, r.velocity_h1, r.pressure_l2);
    }
    write(dir, "projection.csv", &table)?;
    let mut rates = String::from("norm,slope,intercept,r_squared,residual_rms\n");
    let fits = [
        ("velocity_l2", &study.velocity_l2, (|r: &ProjectionRow| r.velocity_l2) as fn(&ProjectionRow) -> f64),
        ("velocity_h1", &study.velocity_h1, |r: &ProjectionRow| r.velocity_h1),
        ("pressure_l2", &study.pressure_l2, |r: &ProjectionRow| r.pressure_l2),
    ];
    for (name, fit, get) in fits {
        let _ = writeln!(
            rates,
            "{name},{},{},{},{}",
            fit.slope, fit.intercept, fit.r_squared, fit.residual_rms
        );
        let mut plot = format!("# log2(h) log2({name})\n");
        for r in &study.rows {
            let _ = writeln!(plot, "{} {}", r.h.log2(), get(r).log2());
        }
        write(dir, &format!("projection_{name}.dat"), &plot)?;
    }
    write(dir, "projection_rates.csv", &rates)
}

/// Writes the growth-condition constants as `noise_validation.csv`.
pub fn emit_noise_validation(report: &ConditionReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut s = String::from("condition,constant_k,constant_2k,relative_change\n");
    for i in 0..report.constants.len() {
        let _ = writeln!(
            s,
            "\"{}\",{},{},{}",
            ConditionReport::LABELS[i],
            report.constants[i],
            report.doubled[i],
            report.relative_change[i]
        );
    }
    let _ = writeln!(s, "# modes {} passed {}", report.modes, report.passed);
    write(dir, "noise_validation.csv", &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_projection_rates() {
        let s = projection_rates(&[4, 8, 16]).unwrap();
        assert_eq!(s.rows.len(), 3);
        assert!(s.rows.windows(2).all(|w| w[1].velocity_l2 < w[0].velocity_l2));
        assert!(s.velocity_l2.slope > s.velocity_h1.slope);
        let dir = tempfile::tempdir().unwrap();
        emit_projection(&s, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("projection.csv")).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(projection_rates(&[4, 8]).is_err());
    }
}
