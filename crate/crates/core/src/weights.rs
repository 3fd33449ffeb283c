//! Edge weight systems, switch relations, and carried multicurves.
//!
//! Weights are exact rationals. An integral weight system satisfying the
//! switch relations lays `w(e)` parallel strands in each edge; matching the
//! strand stacks across every switch outermost-to-outermost (the unique
//! crossing-free matching) closes them up into the carried multicurve.

use num::rational::Ratio;
use num::Zero;
use thiserror::Error;

use crate::path::{DirectedEdge, EdgePath};
use crate::track::{EdgeId, Side, SwitchId, TrainTrack};

pub type Weight = Ratio<i64>;

/// A weight per edge, indexed like [`TrainTrack::edges`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightSystem(pub Vec<Weight>);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WeightError {
    #[error("weight system has {got} entries, track has {want} edges")]
    WrongLength { got: usize, want: usize },
    #[error("switch relation violated at switch #{switch}")]
    RelationViolated { switch: usize },
    #[error("weight of edge #{edge} is negative")]
    Negative { edge: usize },
    #[error("multicurve weights must be integers (edge #{edge})")]
    NotIntegral { edge: usize },
    #[error("weight system is identically zero")]
    Zero,
}

impl WeightSystem {
    pub fn from_integers(values: &[i64]) -> WeightSystem {
        WeightSystem(values.iter().map(|&v| Weight::from_integer(v)).collect())
    }

    pub fn get(&self, e: EdgeId) -> Weight {
        self.0[e.0]
    }

    /// Verify nonnegativity and the switch relations exactly.
    pub fn check(&self, track: &TrainTrack) -> Result<(), WeightError> {
        if self.0.len() != track.edges.len() {
            return Err(WeightError::WrongLength { got: self.0.len(), want: track.edges.len() });
        }
        for (i, w) in self.0.iter().enumerate() {
            if *w < Weight::zero() {
                return Err(WeightError::Negative { edge: i });
            }
        }
        for (si, sw) in track.switches.iter().enumerate() {
            let total = |side: Side| -> Weight {
                sw.side(side).iter().map(|end| self.0[end.edge.0]).sum()
            };
            if total(Side::A) != total(Side::B) {
                return Err(WeightError::RelationViolated { switch: si });
            }
        }
        Ok(())
    }

    pub fn integral(&self) -> Result<Vec<u64>, WeightError> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, w)| {
                if w.is_integer() {
                    Ok(*w.numer() as u64)
                } else {
                    Err(WeightError::NotIntegral { edge: i })
                }
            })
            .collect()
    }
}

/// Dimension over the rationals of the space of edge weight systems
/// satisfying the switch relations: E minus the rank of the relation matrix.
pub fn weight_space_dimension(track: &TrainTrack) -> usize {
    let ne = track.edges.len();
    let mut rows: Vec<Vec<i128>> = Vec::new();
    for sw in &track.switches {
        let mut row = vec![0i128; ne];
        for end in sw.side(Side::A) {
            row[end.edge.0] += 1;
        }
        for end in sw.side(Side::B) {
            row[end.edge.0] -= 1;
        }
        rows.push(row);
    }
    ne - rank(&mut rows)
}

// Fraction-free Gaussian elimination; entries stay integral.
fn rank(rows: &mut [Vec<i128>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][c] != 0) else { continue };
        rows.swap(r, p);
        for i in r + 1..rows.len() {
            if rows[i][c] != 0 {
                let (a, b) = (rows[r][c], rows[i][c]);
                let g = gcd(a.unsigned_abs(), b.unsigned_abs()) as i128;
                let (fa, fb) = (b / g, a / g);
                for j in 0..ncols {
                    rows[i][j] = rows[i][j] * fb - rows[r][j] * fa;
                }
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    if a == 0 {
        1
    } else {
        a
    }
}

/// A strand: `index` is transverse position within its edge, in end-0-local
/// order, 0 outermost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Strand {
    pub edge: EdgeId,
    pub index: u64,
}

/// Transverse strand order of edge `e` as seen from end `end`: straight for
/// edges whose ends sit on opposite side kinds, reversed for same-side
/// (U-turn) edges seen from end 1.
pub fn end_local_index(track: &TrainTrack, e: EdgeId, end: u8, local: u64, count: u64) -> u64 {
    if end == 0 || track.edges[e.0].sides_opposite() {
        local
    } else {
        count - 1 - local
    }
}

/// The stack of strand slots along one side of a switch, outermost first:
/// each attached edge end contributes its strands in end-local order.
pub fn side_stack(track: &TrainTrack, w: &[u64], switch: SwitchId, side: Side) -> Vec<(Strand, u8)> {
    let mut stack = Vec::new();
    for end in track.switches[switch.0].side(side) {
        let count = w[end.edge.0];
        for j in 0..count {
            let canon = end_local_index(track, end.edge, end.end, j, count);
            stack.push((Strand { edge: end.edge, index: canon }, end.end));
        }
    }
    stack
}

/// Directed strand successor under the crossing-free matching: the strand
/// arrives at the head of `d` and continues through the tie at equal stack
/// height on the other side.
fn strand_successor(
    track: &TrainTrack,
    w: &[u64],
    d: DirectedEdge,
    strand: u64,
) -> (DirectedEdge, u64) {
    let head = d.head();
    let att = track.attachment(head);
    let arriving = side_stack(track, w, att.switch, att.side);
    let canon = strand;
    let here = arriving
        .iter()
        .position(|&(s, e)| s == Strand { edge: d.edge, index: canon } && e == head.end)
        .expect("strand present in its own stack");
    let departing = side_stack(track, w, att.switch, att.side.opposite());
    debug_assert_eq!(arriving.len(), departing.len(), "switch relations hold");
    let (next, end) = departing[here];
    (DirectedEdge::departing(crate::track::EdgeEnd { edge: next.edge, end }), next.index)
}

/// A loop of the carried multicurve: a cyclic legal edge path, stored in
/// canonical rotation (minimal over both orientations).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CurveLoop(pub EdgePath);

impl CurveLoop {
    fn canonical(seq: Vec<DirectedEdge>) -> CurveLoop {
        let mut best: Option<Vec<DirectedEdge>> = None;
        let rev: Vec<DirectedEdge> = seq.iter().rev().map(|d| d.reversed()).collect();
        for cand in [&seq, &rev] {
            for i in 0..cand.len() {
                let mut rot = cand[i..].to_vec();
                rot.extend_from_slice(&cand[..i]);
                if best.as_ref().is_none_or(|b| rot < *b) {
                    best = Some(rot);
                }
            }
        }
        CurveLoop(EdgePath(best.unwrap()))
    }

    pub fn edges(&self) -> &[DirectedEdge] {
        &self.0 .0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn display<'a>(&'a self, track: &'a TrainTrack) -> crate::path::PathDisplay<'a> {
        self.0.display(track)
    }
}

/// Decompose an integral relation-satisfying weight system into the loops of
/// its carried multicurve, sorted canonically. Parallel copies repeat.
pub fn multicurve_from_weights(
    track: &TrainTrack,
    weights: &WeightSystem,
) -> Result<Vec<CurveLoop>, WeightError> {
    weights.check(track)?;
    let w = weights.integral()?;
    if w.iter().all(|&x| x == 0) {
        return Err(WeightError::Zero);
    }
    let mut visited: std::collections::HashSet<Strand> = std::collections::HashSet::new();
    let mut loops = Vec::new();
    for e in 0..track.edges.len() {
        for t in 0..w[e] {
            let start = Strand { edge: EdgeId(e), index: t };
            if visited.contains(&start) {
                continue;
            }
            let mut seq = Vec::new();
            let mut cur = (DirectedEdge::forward(EdgeId(e)), t);
            loop {
                visited.insert(Strand { edge: cur.0.edge, index: cur.1 });
                seq.push(cur.0);
                cur = strand_successor(track, &w, cur.0, cur.1);
                if cur == (DirectedEdge::forward(EdgeId(e)), t) {
                    break;
                }
            }
            loops.push(CurveLoop::canonical(seq));
        }
    }
    loops.sort();
    Ok(loops)
}

/// Count strands per edge across a loop set; inverse of
/// [`multicurve_from_weights`] on its image.
pub fn measure_loops(track: &TrainTrack, loops: &[CurveLoop]) -> WeightSystem {
    let mut counts = vec![0i64; track.edges.len()];
    for lp in loops {
        for d in lp.edges() {
            counts[d.edge.0] += 1;
        }
    }
    WeightSystem::from_integers(&counts)
}
