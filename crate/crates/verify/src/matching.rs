//! Pointwise matching of the initial data: `sup_K |f(t) − f_in| → 0` as `t → 0`.

use landau_core::field::DistributionField;
use landau_core::scalar::norm3;
use landau_core::{Error, Result};
use serde_json::json;

use crate::report::CheckReport;

/// Compact set on which the deviation is measured: all of the periodic
/// x-domain times the velocity ball of this radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompactRegion {
    pub v_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchingSeries {
    pub times: Vec<f64>,
    /// `s(t) = sup_K |f(t) − f_in|`.
    pub deviations: Vec<f64>,
    /// Smallest `C` with `s(t) ≤ C t` over the first decade of positive times.
    pub slope_bound: f64,
    /// `s` does not decrease along the first decade (it tends to 0 as `t → 0`).
    pub monotone: bool,
    /// Data are continuous; otherwise the claim does not apply and nothing is asserted.
    pub continuous_data: bool,
}

pub fn deviation(f: &DistributionField<f64>, f_in: &DistributionField<f64>, region: &CompactRegion) -> Result<f64> {
    if f.grid != f_in.grid {
        return Err(Error::GridMismatch("trajectory and initial data use different grids".into()));
    }
    let g = &f.grid;
    let inside: Vec<usize> = (0..g.v.len()).filter(|&i| norm3(g.v.velocity(i)) <= region.v_radius).collect();
    let mut s: f64 = 0.0;
    for ix in 0..g.x.len() {
        let (a, b) = (f.slice(ix), f_in.slice(ix));
        for &i in &inside {
            s = s.max((a[i] - b[i]).abs());
        }
    }
    Ok(s)
}

/// Deviation series over the trajectory; the first decade is the first ten
/// snapshots after `t = 0`.
pub fn initial_matching_series(
    trajectory: &[DistributionField<f64>],
    f_in: &DistributionField<f64>,
    region: &CompactRegion,
    continuous_data: bool,
) -> Result<MatchingSeries> {
    let t0 = f_in.time;
    let mut times = Vec::with_capacity(trajectory.len());
    let mut deviations = Vec::with_capacity(trajectory.len());
    for f in trajectory {
        times.push(f.time - t0);
        deviations.push(deviation(f, f_in, region)?);
    }
    let decade: Vec<usize> = (0..times.len()).filter(|&i| times[i] > 0.0).take(10).collect();
    let slope_bound = decade.iter().map(|&i| deviations[i] / times[i]).fold(0.0, f64::max);
    let monotone = decade.windows(2).all(|w| deviations[w[1]] >= deviations[w[0]] * (1.0 - 1e-12));
    Ok(MatchingSeries {
        times,
        deviations,
        slope_bound,
        monotone,
        continuous_data,
    })
}

/// Passes when `s(t) ≤ C t` with finite `C` on the first decade, the trend is
/// monotone, and the first positive-time deviation is at most `eps_match`.
/// Discontinuous data only report the series.
pub fn initial_matching_check(
    trajectory: &[DistributionField<f64>],
    f_in: &DistributionField<f64>,
    region: &CompactRegion,
    continuous_data: bool,
    eps_match: f64,
) -> CheckReport {
    let params = json!({"v_radius": region.v_radius, "continuous_data": continuous_data, "eps_match": eps_match});
    let s = match initial_matching_series(trajectory, f_in, region, continuous_data) {
        Ok(s) => s,
        Err(e) => return CheckReport::failed("initial_matching", params, 0, e),
    };
    let first = s.times.iter().position(|t| *t > 0.0).map_or(0.0, |i| s.deviations[i]);
    let witness = json!({
        "slope_bound": s.slope_bound,
        "monotone": s.monotone,
        "first_deviation": first,
        "times": s.times.iter().take(11).collect::<Vec<_>>(),
        "deviations": s.deviations.iter().take(11).collect::<Vec<_>>(),
        "scope": if continuous_data { "continuous data" } else { "claim scope: continuous data; not asserted" },
    });
    if !continuous_data {
        return CheckReport::new("initial_matching", params, 0).verdict(true, f64::NAN, witness);
    }
    let pass = s.slope_bound.is_finite() && s.monotone && first <= eps_match;
    CheckReport::new("initial_matching", params, 0).verdict(pass, eps_match - first, witness)
}

/// Largest grid radius `δ` with `|f_in(z) − f_in(z₀)| < η` for every node in
/// `B_δ(z₀)`: the continuity modulus measured from the data.
pub fn continuity_radius(f_in: &DistributionField<f64>, ix0: usize, iv0: usize, eta: f64) -> f64 {
    let g = &f_in.grid;
    let (x0, v0) = (g.x.position(ix0), g.v.velocity(iv0));
    let f0 = f_in.values[g.index(ix0, iv0)];
    let mut delta = f64::INFINITY;
    for ix in 0..g.x.len() {
        let dx = g.x.wrap(std::array::from_fn(|a| g.x.position(ix)[a] - x0[a]));
        for iv in 0..g.v.len() {
            if (f_in.values[g.index(ix, iv)] - f0).abs() >= eta {
                let v = g.v.velocity(iv);
                let d = (norm3(dx).powi(2) + (0..3).map(|a| (v[a] - v0[a]).powi(2)).sum::<f64>()).sqrt();
                delta = delta.min(d);
            }
        }
    }
    delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use landau_core::field::make_maxwellian;
    use landau_core::grid::PhaseGrid;

    fn grid() -> PhaseGrid<f64> {
        PhaseGrid::homogeneous(8, 3.0).unwrap()
    }

    #[test]
    fn stationary_zero_has_zero_deviation() {
        let z = DistributionField::zeros(grid());
        let traj: Vec<_> = (0..5).map(|i| z.clone().with_time(0.1 * i as f64)).collect();
        let s = initial_matching_series(&traj, &z, &CompactRegion { v_radius: 2.0 }, true).unwrap();
        assert!(s.deviations.iter().all(|d| *d == 0.0));
        assert!(initial_matching_check(&traj, &z, &CompactRegion { v_radius: 2.0 }, true, 0.0).pass);
    }

    #[test]
    fn linear_drift_gives_its_slope() {
        let f_in = make_maxwellian(grid(), 1.0, 1.0).unwrap();
        let traj: Vec<_> = (0..12)
            .map(|i| {
                let t = 0.01 * i as f64;
                let mut f = f_in.clone().with_time(t);
                f.values.iter_mut().for_each(|v| *v *= 1.0 + 0.5 * t);
                f
            })
            .collect();
        let s = initial_matching_series(&traj, &f_in, &CompactRegion { v_radius: 10.0 }, true).unwrap();
        assert!((s.slope_bound - 0.5 * f_in.sup()).abs() < 1e-12);
        assert!(s.monotone);
    }

    #[test]
    fn discontinuous_data_are_not_asserted() {
        let mut f_in = DistributionField::zeros(grid());
        f_in.values[0] = 1.0;
        let mut jump = f_in.clone().with_time(0.1);
        jump.values[0] = 0.0;
        let r = initial_matching_check(&[f_in.clone(), jump], &f_in, &CompactRegion { v_radius: 10.0 }, false, 1e-3);
        assert!(r.pass);
        assert!(r.witness["scope"].as_str().unwrap().contains("not asserted"));
    }

    #[test]
    fn continuity_radius_of_a_step() {
        let g = grid();
        let f_in = DistributionField::from_fn(g, |_, v| if v[0] > 0.0 { 1.0 } else { 0.0 }).unwrap();
        let iv0 = g.v.index(7, 4, 4);
        // Nearest node across the step is 4 cells away along v₁.
        let d = continuity_radius(&f_in, 0, iv0, 0.5);
        assert!((d - 4.0 * g.v.h()).abs() < 1e-12, "{d}");
    }
}
