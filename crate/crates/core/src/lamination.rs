//! Laminations as generators of their realized edge-path languages.
//!
//! A lamination never materializes geometric leaves: it is identified with
//! the family of edge paths its leaves trace on the host track. Backends
//! produce the set of realized paths of any requested length — a periodic
//! backend for carried multicurves, the slope backend for the torus model,
//! and an explicit finite-depth backend (mainly for fault injection in the
//! metric checkers).

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::path::{DirectedEdge, EdgePath};
use crate::torus::{self, Letter, Slope, SlopeError};
use crate::track::{EdgeId, TrainTrack};
use crate::weights::{multicurve_from_weights, CurveLoop, WeightError, WeightSystem};

/// A canonical set of realized edge paths of one length. Paths are stored as
/// the lexicographic minimum of the two orientations, sorted; membership
/// queries canonicalize first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RealizedPathSet {
    pub len: usize,
    paths: Vec<EdgePath>,
}

impl RealizedPathSet {
    pub fn from_paths(len: usize, iter: impl IntoIterator<Item = EdgePath>) -> RealizedPathSet {
        let set: BTreeSet<EdgePath> = iter
            .into_iter()
            .inspect(|p| debug_assert_eq!(p.len(), len))
            .map(|p| p.canonical())
            .collect();
        RealizedPathSet { len, paths: set.into_iter().collect() }
    }

    pub fn paths(&self) -> &[EdgePath] {
        &self.paths
    }

    pub fn contains(&self, p: &EdgePath) -> bool {
        self.paths.binary_search(&p.canonical()).is_ok()
    }

    pub fn size(&self) -> usize {
        self.paths.len()
    }

    /// One path per line, `id+`/`id-` tokens, sorted.
    pub fn serialize(&self, track: &TrainTrack) -> String {
        let mut out = String::new();
        for p in &self.paths {
            out.push_str(&p.display(track).to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LaminationError {
    #[error(transparent)]
    Slope(#[from] SlopeError),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error("explicit backend only trusted to depth {max}, requested {requested}")]
    DepthLimit { max: usize, requested: usize },
    #[error("laminations live on different tracks")]
    TrackMismatch,
}

#[derive(Debug, Clone)]
enum Backend {
    /// Carried multicurve: the loops of its canonical decomposition.
    Periodic { loops: Vec<CurveLoop> },
    /// Slope-indexed Sturmian model on the standard torus track.
    Slope(Slope),
    /// Explicit path sets for lengths 1..=max. No closure properties are
    /// enforced, which is the point: checkers must catch broken backends.
    Explicit { sets: Vec<RealizedPathSet> },
}

/// A lamination, symbolically: a backend plus its host track.
#[derive(Debug, Clone)]
pub struct Lamination {
    track: Arc<TrainTrack>,
    backend: Backend,
    label: String,
}

impl Lamination {
    /// Periodic lamination carried with the given integral weights.
    pub fn from_multicurve(
        track: Arc<TrainTrack>,
        weights: &WeightSystem,
    ) -> Result<Lamination, LaminationError> {
        let mut loops = multicurve_from_weights(&track, weights)?;
        loops.dedup(); // parallel copies realize the same paths
        let label = format!(
            "multicurve[{}]",
            weights.0.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
        );
        Ok(Lamination { track, backend: Backend::Periodic { loops }, label })
    }

    /// Periodic lamination with an explicit loop set (components of a
    /// multicurve, for instance).
    pub fn from_loops(track: Arc<TrainTrack>, loops: Vec<CurveLoop>) -> Lamination {
        Lamination { track, backend: Backend::Periodic { loops }, label: "loops".into() }
    }

    /// The slope model on the bundled torus track.
    pub fn from_slope(slope: Slope) -> Lamination {
        let label = slope.to_string();
        Lamination { track: torus::standard_track(), backend: Backend::Slope(slope), label }
    }

    /// Explicit sets for lengths 1..=sets.len(), trusted as given.
    pub fn from_path_sets_unchecked(
        track: Arc<TrainTrack>,
        sets: Vec<RealizedPathSet>,
    ) -> Lamination {
        Lamination { track, backend: Backend::Explicit { sets }, label: "explicit".into() }
    }

    pub fn track(&self) -> &Arc<TrainTrack> {
        &self.track
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn slope(&self) -> Option<&Slope> {
        match &self.backend {
            Backend::Slope(s) => Some(s),
            _ => None,
        }
    }

    pub fn loops(&self) -> Option<&[CurveLoop]> {
        match &self.backend {
            Backend::Periodic { loops } => Some(loops),
            _ => None,
        }
    }

    /// Does this lamination cross every edge of its track? Zipper
    /// constructions require it.
    pub fn crosses_every_edge(&self) -> bool {
        match &self.backend {
            Backend::Periodic { loops } => {
                let mut seen = vec![false; self.track.edges.len()];
                for lp in loops {
                    for d in lp.edges() {
                        seen[d.edge.0] = true;
                    }
                }
                seen.into_iter().all(|b| b)
            }
            Backend::Slope(Slope::Rational { p, q }) => *p > 0 && *q > 0,
            Backend::Slope(Slope::Cf(_)) => true,
            Backend::Explicit { sets } => {
                let mut seen = vec![false; self.track.edges.len()];
                if let Some(s) = sets.first() {
                    for p in s.paths() {
                        for d in &p.0 {
                            seen[d.edge.0] = true;
                        }
                    }
                }
                seen.into_iter().all(|b| b)
            }
        }
    }

    /// The set of length-`r` edge paths realized by the lamination's leaves.
    pub fn realized_paths(&self, r: usize) -> Result<RealizedPathSet, LaminationError> {
        assert!(r >= 1);
        match &self.backend {
            Backend::Periodic { loops } => Ok(periodic_paths(loops, r)),
            Backend::Slope(slope) => {
                let factors = torus::oriented_factors(slope, r)?;
                Ok(RealizedPathSet::from_paths(r, factors.into_iter().map(|w| word_to_path(&w))))
            }
            Backend::Explicit { sets } => sets
                .get(r - 1)
                .cloned()
                .ok_or(LaminationError::DepthLimit { max: sets.len(), requested: r }),
        }
    }

    /// True when the two laminations provably realize the same language:
    /// identical slopes or identical loop decompositions. Finite computation
    /// cannot certify language equality for arbitrary backends.
    pub fn provably_equal(&self, other: &Lamination) -> bool {
        if !same_track(self, other) {
            return false;
        }
        match (&self.backend, &other.backend) {
            (Backend::Periodic { loops: a }, Backend::Periodic { loops: b }) => a == b,
            (Backend::Slope(a), Backend::Slope(b)) => a == b,
            _ => false,
        }
    }
}

pub fn same_track(a: &Lamination, b: &Lamination) -> bool {
    Arc::ptr_eq(a.track(), b.track()) || a.track().as_ref() == b.track().as_ref()
}

fn word_to_path(w: &[Letter]) -> EdgePath {
    EdgePath(
        w.iter()
            .map(|l| match l {
                Letter::A => DirectedEdge::forward(EdgeId(0)),
                Letter::B => DirectedEdge::forward(EdgeId(1)),
            })
            .collect(),
    )
}

fn periodic_paths(loops: &[CurveLoop], r: usize) -> RealizedPathSet {
    let mut paths = Vec::new();
    for lp in loops {
        let n = lp.len();
        let edges = lp.edges();
        for s in 0..n {
            let mut p = Vec::with_capacity(r);
            for k in 0..r {
                p.push(edges[(s + k) % n]);
            }
            paths.push(EdgePath(p));
        }
    }
    RealizedPathSet::from_paths(r, paths)
}

/// True iff both laminations realize exactly the same paths at every length
/// 1..=r; by factor-closure this reduces to length r alone.
pub fn equal_up_to_depth(
    a: &Lamination,
    b: &Lamination,
    r: usize,
) -> Result<bool, LaminationError> {
    if !same_track(a, b) {
        return Err(LaminationError::TrackMismatch);
    }
    Ok(a.realized_paths(r)? == b.realized_paths(r)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::assets;

    fn torus_lam(p: u64, q: u64) -> Lamination {
        Lamination::from_slope(Slope::rational(p, q).unwrap())
    }

    fn path(track: &TrainTrack, s: &str) -> EdgePath {
        EdgePath::parse(track, s).unwrap()
    }

    #[test]
    fn single_loop_realizes_powers() {
        let t = torus::standard_track();
        let lam =
            Lamination::from_multicurve(t.clone(), &WeightSystem::from_integers(&[1, 0])).unwrap();
        let set = lam.realized_paths(3).unwrap();
        assert_eq!(set.paths(), &[path(&t, "a+ a+ a+")]);
        // reversal-closure is part of canonical membership
        assert!(set.contains(&path(&t, "a- a- a-")));
    }

    #[test]
    fn multicurve_21_realized_sets() {
        let t = torus::standard_track();
        let lam =
            Lamination::from_multicurve(t.clone(), &WeightSystem::from_integers(&[2, 1])).unwrap();
        let set = lam.realized_paths(3).unwrap();
        // loop <a,a,b>: the three rotations aab, aba, baa plus reversals give
        // three unoriented classes
        assert_eq!(
            set.paths(),
            &[path(&t, "a+ a+ b+"), path(&t, "a+ b+ a+"), path(&t, "a- a- b-")]
        );
        assert!(set.contains(&path(&t, "b- a- a-")));
        assert!(set.contains(&path(&t, "b+ a+ a+")));
    }

    #[test]
    fn slope_equals_multicurve_language() {
        let t = torus::standard_track();
        for (p, q) in [(0u64, 1u64), (1, 1), (1, 2), (2, 3), (3, 5), (1, 4)] {
            let slope = torus_lam(p, q);
            let curve = Lamination::from_multicurve(
                t.clone(),
                &WeightSystem::from_integers(&[q as i64, p as i64]),
            )
            .unwrap();
            for r in 1..=(2 * q as usize + 2) {
                assert!(equal_up_to_depth(&slope, &curve, r).unwrap(), "slope {p}/{q} at depth {r}");
            }
        }
    }

    #[test]
    fn two_component_multicurve_is_union() {
        let t = Arc::new(assets::four_punctured_sphere());
        let both = Lamination::from_multicurve(t.clone(), &WeightSystem::from_integers(&[1, 3, 2, 2]))
            .unwrap();
        let loops = both.loops().unwrap().to_vec();
        assert_eq!(loops.len(), 2);
        let l0 = Lamination::from_loops(t.clone(), vec![loops[0].clone()]);
        let l1 = Lamination::from_loops(t.clone(), vec![loops[1].clone()]);
        for r in 1..=6 {
            let union: BTreeSet<EdgePath> = l0
                .realized_paths(r)
                .unwrap()
                .paths()
                .iter()
                .chain(l1.realized_paths(r).unwrap().paths())
                .cloned()
                .collect();
            let got: BTreeSet<EdgePath> =
                both.realized_paths(r).unwrap().paths().iter().cloned().collect();
            assert_eq!(got, union, "depth {r}");
        }
    }

    #[test]
    fn factor_closure_and_extension() {
        for lam in [
            torus_lam(2, 5),
            torus_lam(1, 1),
            Lamination::from_slope(Slope::cf(vec![0], vec![1, 2]).unwrap()),
            Lamination::from_multicurve(
                Arc::new(assets::genus2()),
                &WeightSystem::from_integers(&[1, 1, 1, 1]),
            )
            .unwrap(),
        ] {
            for r in 2..=5usize {
                let big = lam.realized_paths(r).unwrap();
                let small = lam.realized_paths(r - 1).unwrap();
                for p in big.paths() {
                    let head = EdgePath(p.0[..r - 1].to_vec());
                    let tail = EdgePath(p.0[1..].to_vec());
                    assert!(small.contains(&head) && small.contains(&tail));
                }
                for p in small.paths() {
                    let extends = big.paths().iter().any(|b| {
                        let rev = p.reversed();
                        b.0[..r - 1] == p.0[..]
                            || b.0[1..] == p.0[..]
                            || b.0[..r - 1] == rev.0[..]
                            || b.0[1..] == rev.0[..]
                    });
                    assert!(extends, "{p:?} does not extend");
                }
            }
        }
    }

    #[test]
    fn periodic_sizes_plateau() {
        let t = torus::standard_track();
        let lam = Lamination::from_multicurve(t, &WeightSystem::from_integers(&[3, 2])).unwrap();
        let total: usize = lam.loops().unwrap().iter().map(|l| l.len()).sum();
        let mut sizes = Vec::new();
        for r in 1..=(2 * total) {
            let s = lam.realized_paths(r).unwrap().size();
            assert!(s <= 2 * total);
            sizes.push(s);
        }
        assert_eq!(sizes[total..].windows(2).filter(|w| w[0] != w[1]).count(), 0);
    }

    #[test]
    fn equality_depth_monotone() {
        let a = torus_lam(3, 8);
        let b = torus_lam(2, 5);
        let mut seen_false = false;
        for r in 1..=32 {
            let eq = equal_up_to_depth(&a, &b, r).unwrap();
            if seen_false {
                assert!(!eq, "equality cannot recover at depth {r}");
            }
            seen_false |= !eq;
        }
        assert!(seen_false);
    }

    #[test]
    fn explicit_backend_depth_limit() {
        let t = torus::standard_track();
        let base = torus_lam(1, 2);
        let sets: Vec<RealizedPathSet> = (1..=4).map(|r| base.realized_paths(r).unwrap()).collect();
        let lam = Lamination::from_path_sets_unchecked(t, sets);
        assert!(lam.realized_paths(4).is_ok());
        assert_eq!(lam.realized_paths(5), Err(LaminationError::DepthLimit { max: 4, requested: 5 }));
    }

    #[test]
    fn track_mismatch_detected() {
        let a = torus_lam(1, 2);
        let b = Lamination::from_multicurve(
            Arc::new(assets::genus2()),
            &WeightSystem::from_integers(&[1, 1, 1, 1]),
        )
        .unwrap();
        assert_eq!(equal_up_to_depth(&a, &b, 2), Err(LaminationError::TrackMismatch));
    }

    use crate::track::TrainTrack;
}
