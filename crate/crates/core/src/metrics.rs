//! The combinatorial ultrametric d_Θ, its log transform, and checkers.
//!
//! d_Θ(λ, λ′) = min{ 1/(r+1) : λ and λ′ realize the same edge paths of
//! length r }, with length-0 agreement always true. Values are exact
//! rationals of the form 1/(r+1); the scaled quantities (d_log and the
//! modeled Hausdorff distance) are 64-bit floats compared with 1e-12 slack.

use num::rational::Ratio;
use num::Zero;
use rayon::prelude::*;

use crate::lamination::{same_track, Lamination, LaminationError};
use crate::path::EdgePath;

pub type Rational = Ratio<i64>;

/// A floating-point distance derived from d_Θ (f64, documented 1e-12 slack).
pub type ScaledDistance = f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessSide {
    Lhs,
    Rhs,
}

/// An exact combinatorial distance together with its provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombDistance {
    /// 0 or 1/(r*+1) where r* is the last length at which the realized path
    /// sets agree.
    pub value: Rational,
    /// r* when the distance is positive.
    pub agree_len: Option<usize>,
    /// A shortest path realized on exactly one side, with that side.
    pub witness: Option<(EdgePath, WitnessSide)>,
    /// The value 0 was concluded at a finite cap without provable equality.
    pub capped: bool,
}

impl CombDistance {
    pub fn zero(capped: bool) -> CombDistance {
        CombDistance { value: Rational::zero(), agree_len: None, witness: None, capped }
    }
}

/// Combinatorial distance between two laminations on the same track,
/// scanning lengths 1..=r_max.
pub fn d_theta(
    a: &Lamination,
    b: &Lamination,
    r_max: usize,
) -> Result<CombDistance, LaminationError> {
    if !same_track(a, b) {
        return Err(LaminationError::TrackMismatch);
    }
    if a.provably_equal(b) {
        return Ok(CombDistance::zero(false));
    }
    for r in 1..=r_max {
        let sa = a.realized_paths(r)?;
        let sb = b.realized_paths(r)?;
        if sa != sb {
            // lexicographically smallest one-sided path as witness
            let witness = sa
                .paths()
                .iter()
                .filter(|p| !sb.contains(p))
                .map(|p| (p.clone(), WitnessSide::Lhs))
                .chain(
                    sb.paths()
                        .iter()
                        .filter(|p| !sa.contains(p))
                        .map(|p| (p.clone(), WitnessSide::Rhs)),
                )
                .min_by(|(p1, _), (p2, _)| p1.cmp(p2));
            return Ok(CombDistance {
                value: Rational::new(1, r as i64),
                agree_len: Some(r - 1),
                witness,
                capped: false,
            });
        }
    }
    Ok(CombDistance::zero(true))
}

/// The transform 1/|log(min(d, 1/4))|, natural log; 0 maps to 0. Values lie
/// in {0} ∪ (0, 1/log 4].
pub fn d_log_transform(d: f64) -> ScaledDistance {
    assert!(d >= 0.0, "distances are nonnegative");
    if d == 0.0 {
        0.0
    } else {
        1.0 / d.min(0.25).ln().abs()
    }
}

/// d_log of an exact combinatorial distance.
pub fn d_log_of(d: &CombDistance) -> ScaledDistance {
    if d.value.is_zero() {
        0.0
    } else {
        d_log_transform(*d.value.numer() as f64 / *d.value.denom() as f64)
    }
}

/// Stand-in for the geometric Hausdorff distance: exp(−b / d_Θ), 0 when
/// d_Θ = 0. A model, not the geometric quantity; the two are squeezed
/// between e^{−c/d_Θ} envelopes, so the model preserves every scaling
/// property used downstream.
pub fn model_hausdorff(
    a: &Lamination,
    b: &Lamination,
    b_const: f64,
    r_max: usize,
) -> Result<ScaledDistance, LaminationError> {
    assert!(b_const > 0.0);
    let d = d_theta(a, b, r_max)?;
    Ok(model_hausdorff_of(&d, b_const))
}

pub fn model_hausdorff_of(d: &CombDistance, b_const: f64) -> ScaledDistance {
    if d.value.is_zero() {
        0.0
    } else {
        let dv = *d.value.numer() as f64 / *d.value.denom() as f64;
        (-b_const / dv).exp()
    }
}

/// One failed ultrametric triple: max pairwise distance strictly exceeds the
/// second largest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UltrametricViolation {
    pub triple: (usize, usize, usize),
    pub distances: [Rational; 3],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UltrametricReport {
    pub points: usize,
    pub triples: usize,
    pub violations: Vec<UltrametricViolation>,
    /// min over triples of (second largest − largest); 0 when every maximum
    /// is attained twice, negative iff violations exist.
    pub worst_margin: Option<Rational>,
    /// pairs whose distance 0 was concluded only at the cap
    pub capped_pairs: usize,
}

impl UltrametricReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verify d(x,z) ≤ max(d(x,y), d(y,z)) for every triple, by exact rational
/// comparison. Distances are computed once per pair (in parallel) and the
/// triple scan is deterministic.
pub fn check_ultrametric(
    points: &[Lamination],
    r_max: usize,
) -> Result<UltrametricReport, LaminationError> {
    assert!(points.len() >= 3, "need at least three points");
    let n = points.len();
    let mut pair_list = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pair_list.push((i, j));
        }
    }
    let dists: Result<Vec<_>, LaminationError> = pair_list
        .par_iter()
        .map(|&(i, j)| d_theta(&points[i], &points[j], r_max))
        .collect();
    let dists = dists?;
    let mut matrix = vec![Rational::zero(); n * n];
    let mut capped_pairs = 0;
    for (&(i, j), d) in pair_list.iter().zip(&dists) {
        matrix[i * n + j] = d.value;
        matrix[j * n + i] = d.value;
        if d.capped {
            capped_pairs += 1;
        }
    }
    let mut report = check_ultrametric_matrix(n, &matrix);
    report.capped_pairs = capped_pairs;
    Ok(report)
}

/// Triple scan over a precomputed symmetric distance matrix. Split out so a
/// deliberately corrupted matrix (what an inconsistent backend would
/// produce) can be fed to it in tests.
pub fn check_ultrametric_matrix(n: usize, matrix: &[Rational]) -> UltrametricReport {
    let mut violations = Vec::new();
    let mut worst: Option<Rational> = None;
    let mut triples = 0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                triples += 1;
                let mut d = [matrix[i * n + j], matrix[j * n + k], matrix[i * n + k]];
                let orig = d;
                d.sort();
                let margin = d[1] - d[2]; // ≤ 0; 0 iff max attained twice
                if worst.is_none_or(|w| margin < w) {
                    worst = Some(margin);
                }
                if margin < Rational::zero() {
                    violations.push(UltrametricViolation { triple: (i, j, k), distances: orig });
                }
            }
        }
    }
    UltrametricReport { points: n, triples, violations, worst_margin: worst, capped_pairs: 0 }
}

/// Margin data for the subadditivity of f(u) = −1/log u on [0, 1/4].
#[derive(Debug, Clone, PartialEq)]
pub struct DlogTriangleReport {
    pub samples: usize,
    /// min of h(u,v) = f(u) + f(v) − f(u+v) over the samples
    pub min_margin: f64,
    /// h at the interior critical point (2^{−2−√2}, 2^{−2−√2})
    pub critical_value: f64,
    /// the exact critical value (3 − 2√2)/log 2
    pub critical_expected: f64,
}

fn f_log(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        -1.0 / u.ln()
    }
}

/// h(u,v) = f(u) + f(v) − f(u+v); nonnegative on the square is exactly the
/// triangle inequality for d_log.
pub fn dlog_margin(u: f64, v: f64) -> f64 {
    f_log(u) + f_log(v) - f_log(u + v)
}

/// Check subadditivity over the given (u, v) samples plus the analytic
/// critical point.
pub fn check_triangle_dlog(samples: &[(f64, f64)]) -> DlogTriangleReport {
    let mut min_margin = f64::INFINITY;
    for &(u, v) in samples {
        debug_assert!((0.0..=0.25).contains(&u) && (0.0..=0.25).contains(&v));
        let h = dlog_margin(u, v);
        if h < min_margin {
            min_margin = h;
        }
    }
    let ucrit = (2f64).powf(-2.0 - (2f64).sqrt());
    let critical_value = dlog_margin(ucrit, ucrit);
    let critical_expected = (3.0 - 2.0 * (2f64).sqrt()) / (2f64).ln();
    DlogTriangleReport { samples: samples.len(), min_margin, critical_value, critical_expected }
}

/// The (n+1) × (n+1) grid {k/(4n)}² over [0, 1/4]².
pub fn dlog_grid(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        for j in 0..=n {
            out.push((i as f64 / (4 * n) as f64, j as f64 / (4 * n) as f64));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lamination::RealizedPathSet;
    use crate::torus::Slope;

    fn lam(p: u64, q: u64) -> Lamination {
        Lamination::from_slope(Slope::rational(p, q).unwrap())
    }

    #[test]
    fn identical_laminations_at_zero() {
        let a = lam(1, 2);
        let d = d_theta(&a, &a.clone(), 64).unwrap();
        assert_eq!(d.value, Rational::zero());
        assert!(!d.capped);
    }

    #[test]
    fn extreme_slopes_at_distance_one() {
        let d = d_theta(&lam(0, 1), &lam(1, 1), 64).unwrap();
        assert_eq!(d.value, Rational::new(1, 1));
        assert_eq!(d.agree_len, Some(0));
        let (w, _) = d.witness.unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn half_vs_third() {
        // factor sets agree at lengths 1,2 and split at 3 on aaa
        let d = d_theta(&lam(1, 2), &lam(1, 3), 64).unwrap();
        assert_eq!(d.value, Rational::new(1, 3));
        assert_eq!(d.agree_len, Some(2));
        let t = crate::torus::standard_track();
        let (w, side) = d.witness.unwrap();
        assert_eq!(w, EdgePath::parse(&t, "a+ a+ a+").unwrap());
        assert_eq!(side, WitnessSide::Rhs);
    }

    #[test]
    fn symmetric_values() {
        for (x, y) in [((1u64, 2u64), (1u64, 3u64)), ((2, 3), (3, 4)), ((0, 1), (1, 5))] {
            let d1 = d_theta(&lam(x.0, x.1), &lam(y.0, y.1), 64).unwrap();
            let d2 = d_theta(&lam(y.0, y.1), &lam(x.0, x.1), 64).unwrap();
            assert_eq!(d1.value, d2.value);
            assert_eq!(d1.witness.is_some(), d2.witness.is_some());
        }
    }

    #[test]
    fn capped_zero_flags() {
        // distinct quadratic slopes agreeing past a tiny cap
        let a = Lamination::from_slope(Slope::cf(vec![0], vec![1]).unwrap());
        let b = Lamination::from_slope(Slope::cf(vec![0, 1, 1, 1, 1, 1, 1, 1, 1, 1], vec![2]).unwrap());
        let d = d_theta(&a, &b, 3).unwrap();
        assert_eq!(d.value, Rational::zero());
        assert!(d.capped);
    }

    #[test]
    fn dlog_transform_values() {
        assert_eq!(d_log_transform(0.0), 0.0);
        let clamp = 1.0 / (4f64).ln();
        assert!((d_log_transform(0.25) - clamp).abs() < 1e-15);
        assert!((d_log_transform(0.9) - clamp).abs() < 1e-15);
        assert!((d_log_transform((-10f64).exp()) - 0.1).abs() < 1e-15);
        // monotone, and constant on [1/4, ∞)
        let mut last = 0.0;
        for k in 1..=100 {
            let v = d_log_transform(k as f64 / 100.0);
            assert!(v >= last);
            assert!(v <= clamp + 1e-15);
            last = v;
        }
    }

    #[test]
    fn model_hausdorff_values() {
        let d1 = CombDistance {
            value: Rational::new(1, 1),
            agree_len: Some(0),
            witness: None,
            capped: false,
        };
        assert!((model_hausdorff_of(&d1, 2.0) - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(model_hausdorff_of(&CombDistance::zero(false), 2.0), 0.0);
    }

    #[test]
    fn model_hausdorff_monotone_in_dtheta() {
        // over a Farey sweep, smaller d_theta gives smaller model distance
        let slopes = crate::torus::farey_slopes(6);
        let base = lam(1, 2);
        let mut pairs: Vec<(Rational, f64)> = Vec::new();
        for s in &slopes {
            let other = Lamination::from_slope(s.clone());
            let d = d_theta(&base, &other, 64).unwrap();
            pairs.push((d.value, model_hausdorff_of(&d, 1.0)));
        }
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        for w in pairs.windows(2) {
            assert!(w[0].1 <= w[1].1 + 1e-15);
        }
    }

    #[test]
    fn lipschitz_band_between_dlog_and_dtheta() {
        // d_log(model d_H)/d_theta lies in [1/max(b, 2 ln 2), 1/min(b, 2 ln 2)]
        for b in [0.5f64, 1.0, 2.0, 5.0] {
            let lo = 1.0 / b.max(2.0 * (2f64).ln());
            let hi = 1.0 / b.min(2.0 * (2f64).ln());
            for r in 0..40usize {
                let d = CombDistance {
                    value: Rational::new(1, r as i64 + 1),
                    agree_len: Some(r),
                    witness: None,
                    capped: false,
                };
                let dv = 1.0 / (r as f64 + 1.0);
                let ratio = d_log_transform(model_hausdorff_of(&d, b)) / dv;
                assert!(
                    ratio >= lo - 1e-12 && ratio <= hi + 1e-12,
                    "b={b} r={r} ratio={ratio} not in [{lo},{hi}]"
                );
            }
        }
    }

    #[test]
    fn ultrametric_on_farey_8() {
        let pts: Vec<Lamination> =
            crate::torus::farey_slopes(8).into_iter().map(Lamination::from_slope).collect();
        let report = check_ultrametric(&pts, 64).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations);
        assert_eq!(report.capped_pairs, 0);
        assert_eq!(report.worst_margin, Some(Rational::zero()));
    }

    #[test]
    fn corrupted_matrix_is_caught() {
        // the distances any path-set backend can produce are tautologically
        // ultrametric (first-difference depths are transitive), so the
        // negative test corrupts the *matrix*, simulating a backend that
        // answers inconsistently across calls
        let pts: Vec<Lamination> = [(0u64, 1u64), (1, 2), (1, 1)]
            .into_iter()
            .map(|(p, q)| lam(p, q))
            .collect();
        let n = pts.len();
        let mut matrix = vec![Rational::zero(); n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = d_theta(&pts[i], &pts[j], 64).unwrap().value;
                matrix[i * n + j] = d;
                matrix[j * n + i] = d;
            }
        }
        assert!(check_ultrametric_matrix(n, &matrix).passed());
        // mutate one entry below the other two
        matrix[1] = Rational::new(1, 50);
        matrix[n] = Rational::new(1, 50);
        let report = check_ultrametric_matrix(n, &matrix);
        assert!(!report.passed());
        assert!(report.worst_margin.unwrap() < Rational::zero());
    }

    #[test]
    fn broken_backend_distances_stay_ultrametric() {
        // fault injection at the path-set level: even a backend violating
        // factor-closure yields ultrametric distances, which is exactly why
        // the checker is a canary for inconsistency rather than bad sets
        let t = crate::torus::standard_track();
        let base = lam(1, 2);
        let mut sets: Vec<RealizedPathSet> =
            (1..=6).map(|r| base.realized_paths(r).unwrap()).collect();
        // splice the 1/3 language in at length 4 only
        sets[3] = lam(1, 3).realized_paths(4).unwrap();
        let broken = Lamination::from_path_sets_unchecked(t, sets);
        let pts = vec![broken, lam(1, 2), lam(1, 3)];
        let report = check_ultrametric(&pts, 6).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn dlog_triangle_critical_point() {
        let report = check_triangle_dlog(&dlog_grid(200));
        assert!(report.min_margin >= -1e-12);
        assert!((report.critical_value - report.critical_expected).abs() < 1e-9);
        assert!((report.critical_expected - 0.2475273363).abs() < 1e-9);
        // boundary: h(0, v) = 0 exactly
        assert_eq!(dlog_margin(0.0, 0.17), 0.0);
        assert_eq!(dlog_margin(0.21, 0.0), 0.0);
    }
}
