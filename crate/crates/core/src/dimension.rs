//! Box-counting dimension estimation over realized-path censuses.
//!
//! Cover counts come from sampled laminations: every distinct realized
//! length-(2r+1) family is one cover set, of diameter controlled by the
//! scale schedule (exponentially small in r for the raw distance, like 1/r
//! after the log transform). The estimate is the least-squares slope of
//! log N against log(1/ε).

use rayon::prelude::*;
use thiserror::Error;

use crate::lamination::{Lamination, LaminationError};
use crate::torus::{farey_slopes, language_fingerprint, Slope};
use crate::track::TrainTrack;
use crate::zippers::{census_realized_families, enumerate_zipper_families, z_r_upper_bound, ZipperError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// ε_r = a·e^(−b·r): the raw-distance diameter decay.
    Exponential,
    /// ε_r = a/r: the d_log diameter decay.
    Reciprocal,
}

#[derive(Debug, Clone)]
pub struct ScaleSchedule {
    pub mode: ScheduleMode,
    pub a: f64,
    pub b: f64,
    /// (r, ε_r) with ε strictly decreasing.
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum DimensionError {
    #[error("schedule needs strictly decreasing scales")]
    DegenerateSchedule,
    #[error("need at least {need} scales, got {got}")]
    TooFewScales { need: usize, got: usize },
    #[error(transparent)]
    Lamination(#[from] LaminationError),
}

impl ScaleSchedule {
    pub fn exponential(a: f64, b: f64, rs: &[usize]) -> Result<ScaleSchedule, DimensionError> {
        assert!(a > 0.0 && b > 0.0);
        let entries: Vec<(usize, f64)> =
            rs.iter().map(|&r| (r, a * (-b * r as f64).exp())).collect();
        check_decreasing(&entries)?;
        Ok(ScaleSchedule { mode: ScheduleMode::Exponential, a, b, entries })
    }

    pub fn reciprocal(a: f64, rs: &[usize]) -> Result<ScaleSchedule, DimensionError> {
        assert!(a > 0.0);
        let entries: Vec<(usize, f64)> = rs.iter().map(|&r| (r, a / r as f64)).collect();
        check_decreasing(&entries)?;
        Ok(ScaleSchedule { mode: ScheduleMode::Reciprocal, a, b: 1.0, entries })
    }
}

fn check_decreasing(entries: &[(usize, f64)]) -> Result<(), DimensionError> {
    if entries.windows(2).any(|w| w[1].1 >= w[0].1) {
        return Err(DimensionError::DegenerateSchedule);
    }
    Ok(())
}

/// One cover-count row: (r, ε_r, N_r).
pub type CoverCount = (usize, f64, u64);

/// N_r = number of distinct realized length-(2r+1) families over the sample,
/// per schedule entry. Slope-backed samples on the torus go through the
/// fingerprint fast path; anything else takes the generic census.
pub fn cover_counts(
    track: &TrainTrack,
    sample: &[Lamination],
    schedule: &ScaleSchedule,
) -> Result<Vec<CoverCount>, DimensionError> {
    let slopes: Option<Vec<(u64, u64)>> = sample
        .iter()
        .map(|l| match l.slope() {
            Some(Slope::Rational { p, q }) => Some((*p, *q)),
            _ => None,
        })
        .collect();
    let mut out = Vec::with_capacity(schedule.entries.len());
    match slopes {
        Some(pq) if track.name == "torus" => {
            for &(r, eps) in &schedule.entries {
                let len = 2 * r + 1;
                let mut fps: Vec<u128> =
                    pq.par_iter().map(|&(p, q)| language_fingerprint(p, q, len)).collect();
                fps.sort_unstable();
                fps.dedup();
                out.push((r, eps, fps.len() as u64));
            }
        }
        _ => {
            for &(r, eps) in &schedule.entries {
                let census = census_realized_families(track, sample, r)?;
                out.push((r, eps, census.size() as u64));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountSource {
    Census,
    ZipperBound,
}

#[derive(Debug, Clone)]
pub struct DimensionEstimate {
    /// least-squares slope of log N against log(1/ε)
    pub slope: f64,
    /// root-mean-square residual of the fit
    pub residual: f64,
    /// (r_min, r_max) actually used
    pub scales: (usize, usize),
    pub source: CountSource,
}

/// Fit over the top `window` fraction of scales (finest scales), at least 4.
pub fn estimate_dimension(
    counts: &[CoverCount],
    window: f64,
    source: CountSource,
) -> Result<DimensionEstimate, DimensionError> {
    if counts.len() < 4 {
        return Err(DimensionError::TooFewScales { need: 4, got: counts.len() });
    }
    let keep = ((counts.len() as f64 * window).ceil() as usize).clamp(4, counts.len());
    let used = &counts[counts.len() - keep..];
    let eps: Vec<f64> = used.iter().map(|&(_, e, _)| e).collect();
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(DimensionError::DegenerateSchedule);
    }
    let xs: Vec<f64> = used.iter().map(|&(_, e, _)| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|&(_, _, n)| (n.max(1) as f64).ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let d = y - (slope * x + intercept);
            d * d
        })
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    Ok(DimensionEstimate {
        slope,
        residual,
        scales: (used[0].0, used[used.len() - 1].0),
        source,
    })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}

/// Estimates at each schedule point, each fitted over the scales in
/// (r_i/2, r_i]: the running view of convergence.
pub fn running_estimates(counts: &[CoverCount], source: CountSource) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for i in 0..counts.len() {
        let r_i = counts[i].0;
        let lo = counts[..=i].iter().position(|&(r, _, _)| 2 * r > r_i).unwrap_or(0);
        let window = &counts[lo..=i];
        if window.len() < 4 {
            continue;
        }
        if let Ok(est) = estimate_dimension(window, 1.0, source) {
            out.push((r_i, est.slope));
        }
    }
    out
}

/// Distinct truncated cutting-word languages over two nested Farey samples,
/// per requested length: (count over F_max_q, count over F_subset_q).
/// Computing both from one fingerprint pass makes census saturation visible.
pub fn torus_farey_census_with_subset(
    max_q: u64,
    subset_q: u64,
    lens: &[usize],
) -> Vec<(u64, u64)> {
    assert!(subset_q <= max_q);
    let pq: Vec<(u64, u64)> = farey_slopes(max_q)
        .into_iter()
        .map(|s| match s {
            Slope::Rational { p, q } => (p, q),
            _ => unreachable!(),
        })
        .collect();
    let mut out = Vec::with_capacity(lens.len());
    for &len in lens {
        let mut fps: Vec<(u128, bool)> = pq
            .par_iter()
            .map(|&(p, q)| (language_fingerprint(p, q, len), q <= subset_q))
            .collect();
        fps.sort_unstable();
        let mut total = 0u64;
        let mut in_subset = 0u64;
        let mut i = 0;
        while i < fps.len() {
            let mut any_subset = fps[i].1;
            let mut j = i + 1;
            while j < fps.len() && fps[j].0 == fps[i].0 {
                any_subset |= fps[j].1;
                j += 1;
            }
            total += 1;
            if any_subset {
                in_subset += 1;
            }
            i = j;
        }
        out.push((total, in_subset));
    }
    out
}

/// One row of the counting-bound table.
#[derive(Debug, Clone)]
pub struct BoundRow {
    pub r: usize,
    pub census: u64,
    /// #Z_r when enumeration completed under the cap
    pub z_count: Option<u64>,
    /// 2^p p^(p+q) r^(p+q)
    pub bound_coarse: u128,
    /// r^(9|χ|−1), the shape of the sharper bound (constant 1)
    pub bound_chi: u128,
}

#[derive(Debug, Clone)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
    /// fitted growth exponent of the census counts over the given range
    pub census_exponent: f64,
    /// 9|χ| − 1
    pub exponent_ceiling: u32,
    pub exponent_ok: bool,
}

/// Tabulate census lower bounds against enumerated #Z_r and the two counting
/// bounds; fit the census growth exponent and compare it to 9|χ|−1.
pub fn bound_report(
    track: &TrainTrack,
    sample: &[Lamination],
    rs: &[usize],
    z_cap: usize,
) -> Result<BoundReport, DimensionError> {
    let p = crate::zippers::cusps(track).len() as u32;
    let q = track.edges.len() as u32;
    let chi = track.euler_characteristic().unsigned_abs() as u32;
    let ceiling = 9 * chi - 1;
    let mut rows = Vec::new();
    for &r in rs {
        let census = census_realized_families(track, sample, r)?.size() as u64;
        let z_count = match enumerate_zipper_families(track, r, z_cap) {
            Ok(f) => Some(f.len() as u64),
            Err(ZipperError::EnumerationLimit { .. }) => None,
            Err(ZipperError::Lamination(e)) => return Err(e.into()),
            Err(_) => None,
        };
        rows.push(BoundRow {
            r,
            census,
            z_count,
            bound_coarse: z_r_upper_bound(p, q, r as u32),
            bound_chi: (r as u128).saturating_pow(ceiling),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|row| (row.r as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|row| (row.census.max(1) as f64).ln()).collect();
    let (census_exponent, _) = least_squares(&xs, &ys);
    Ok(BoundReport {
        rows,
        census_exponent,
        exponent_ceiling: ceiling,
        exponent_ok: census_exponent <= ceiling as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_counts(rs: &[usize], schedule: &ScaleSchedule, k: f64) -> Vec<CoverCount> {
        rs.iter()
            .zip(&schedule.entries)
            .map(|(&r, &(_, eps))| (r, eps, (r as f64).powf(k).round() as u64))
            .collect()
    }

    #[test]
    fn reciprocal_fit_recovers_exponent() {
        let rs: Vec<usize> = (20..=200).step_by(10).collect();
        let sched = ScaleSchedule::reciprocal(1.0, &rs).unwrap();
        // N_r = r^2 exactly: log N = 2 log r = 2 log(1/eps), slope exactly 2
        let counts: Vec<CoverCount> =
            sched.entries.iter().map(|&(r, eps)| (r, eps, (r * r) as u64)).collect();
        let est = estimate_dimension(&counts, 1.0, CountSource::Census).unwrap();
        assert!((est.slope - 2.0).abs() < 1e-9, "slope {}", est.slope);
        assert!(est.residual < 1e-9);
    }

    #[test]
    fn exponential_fit_decays_to_zero() {
        let rs: Vec<usize> = (20..=200).step_by(10).collect();
        let sched = ScaleSchedule::exponential(1.0, 1.0, &rs).unwrap();
        let counts = synthetic_counts(&rs, &sched, 2.0);
        // polynomial growth against exponential scales: estimate sinks; at
        // r = 200 (top half window) it is under 0.06
        let est = estimate_dimension(&counts, 0.5, CountSource::Census).unwrap();
        assert!(est.slope <= 0.06, "slope {}", est.slope);
        assert!(est.slope > 0.0);
        // and the running view is nonincreasing past the transient
        let running = running_estimates(&counts, CountSource::Census);
        let tail: Vec<f64> =
            running.iter().filter(|&&(r, _)| r >= 50).map(|&(_, s)| s).collect();
        assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{tail:?}");
    }

    #[test]
    fn b_rescales_estimates_linearly() {
        let rs: Vec<usize> = (10..=100).step_by(10).collect();
        for b in [0.5, 2.0, 3.0] {
            let s1 = ScaleSchedule::exponential(1.0, 1.0, &rs).unwrap();
            let sb = ScaleSchedule::exponential(1.0, b, &rs).unwrap();
            let c1 = synthetic_counts(&rs, &s1, 2.0);
            let cb = synthetic_counts(&rs, &sb, 2.0);
            let e1 = estimate_dimension(&c1, 0.5, CountSource::Census).unwrap();
            let eb = estimate_dimension(&cb, 0.5, CountSource::Census).unwrap();
            assert!((eb.slope - e1.slope / b).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_schedules_rejected() {
        assert_eq!(
            ScaleSchedule::reciprocal(1.0, &[5, 5, 5, 5]).unwrap_err(),
            DimensionError::DegenerateSchedule
        );
        let counts = vec![(1, 0.5, 1u64), (2, 0.5, 2), (3, 0.5, 3), (4, 0.5, 4)];
        assert_eq!(
            estimate_dimension(&counts, 1.0, CountSource::Census).unwrap_err(),
            DimensionError::DegenerateSchedule
        );
        assert!(matches!(
            estimate_dimension(&counts[..2], 1.0, CountSource::Census),
            Err(DimensionError::TooFewScales { .. })
        ));
    }

    #[test]
    fn single_lamination_counts_one() {
        let track = crate::torus::standard_track();
        let sample = vec![Lamination::from_slope(Slope::rational(2, 5).unwrap())];
        let rs: Vec<usize> = (1..=6).collect();
        let sched = ScaleSchedule::reciprocal(1.0, &rs).unwrap();
        let counts = cover_counts(&track, &sample, &sched).unwrap();
        assert!(counts.iter().all(|&(_, _, n)| n == 1));
    }

    #[test]
    fn fingerprint_census_matches_generic() {
        // the fast path must agree with the exact set census
        let track = crate::torus::standard_track();
        let slopes = farey_slopes(10);
        let sample: Vec<Lamination> = slopes.into_iter().map(Lamination::from_slope).collect();
        let rs: Vec<usize> = vec![1, 2, 3, 5, 8];
        let sched = ScaleSchedule::reciprocal(1.0, &rs).unwrap();
        let fast = cover_counts(&track, &sample, &sched).unwrap();
        for (&r, &(_, _, n)) in rs.iter().zip(&fast) {
            let generic = census_realized_families(&track, &sample, r).unwrap().size() as u64;
            assert_eq!(n, generic, "r={r}");
        }
    }

    #[test]
    fn census_count_nondecreasing_in_r_and_sample() {
        let track = crate::torus::standard_track();
        let big: Vec<Lamination> =
            farey_slopes(12).into_iter().map(Lamination::from_slope).collect();
        let small: Vec<Lamination> =
            farey_slopes(6).into_iter().map(Lamination::from_slope).collect();
        let rs: Vec<usize> = (1..=10).collect();
        let sched = ScaleSchedule::reciprocal(1.0, &rs).unwrap();
        let nb = cover_counts(&track, &big, &sched).unwrap();
        let ns = cover_counts(&track, &small, &sched).unwrap();
        for w in nb.windows(2) {
            assert!(w[1].2 >= w[0].2, "N_r not monotone in r");
        }
        for (b, s) in nb.iter().zip(&ns) {
            assert!(b.2 >= s.2, "N_r shrank with a larger sample");
        }
    }

    #[test]
    fn bound_report_on_torus() {
        let track = crate::torus::standard_track();
        let sample: Vec<Lamination> = farey_slopes(8)
            .into_iter()
            .filter(|s| matches!(s, Slope::Rational { p, q } if *p > 0 && *q > 0))
            .map(Lamination::from_slope)
            .collect();
        let rs: Vec<usize> = vec![1, 2, 3];
        let report = bound_report(&track, &sample, &rs, 200_000).unwrap();
        assert_eq!(report.exponent_ceiling, 8);
        assert!(report.exponent_ok);
        for row in &report.rows {
            if let Some(z) = row.z_count {
                assert!(row.census <= z, "census {} > #Z_{} = {z}", row.census, row.r);
                assert!((z as u128) <= row.bound_coarse);
            }
        }
    }
}
