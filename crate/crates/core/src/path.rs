//! Directed edges, legal turns, and edge paths.

use std::fmt;

use thiserror::Error;

use crate::track::{Attachment, EdgeEnd, EdgeId, Side, TrainTrack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    Forward,
    Backward,
}

/// An edge with a traversal direction. Forward runs from end 0 to end 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DirectedEdge {
    pub edge: EdgeId,
    pub dir: Dir,
}

impl DirectedEdge {
    pub fn forward(edge: EdgeId) -> Self {
        DirectedEdge { edge, dir: Dir::Forward }
    }

    pub fn backward(edge: EdgeId) -> Self {
        DirectedEdge { edge, dir: Dir::Backward }
    }

    pub fn reversed(self) -> Self {
        let dir = match self.dir {
            Dir::Forward => Dir::Backward,
            Dir::Backward => Dir::Forward,
        };
        DirectedEdge { edge: self.edge, dir }
    }

    /// The end this traversal runs into.
    pub fn head(self) -> EdgeEnd {
        EdgeEnd { edge: self.edge, end: if self.dir == Dir::Forward { 1 } else { 0 } }
    }

    /// The end this traversal departs from.
    pub fn tail(self) -> EdgeEnd {
        self.head().other()
    }

    /// The directed edge that departs a switch through the given end.
    pub fn departing(end: EdgeEnd) -> Self {
        if end.end == 0 {
            DirectedEdge::forward(end.edge)
        } else {
            DirectedEdge::backward(end.edge)
        }
    }
}

/// A sequence of directed edges in which every consecutive turn is legal.
/// Length counts edges with multiplicity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgePath(pub Vec<DirectedEdge>);

impl EdgePath {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reversed(&self) -> EdgePath {
        EdgePath(self.0.iter().rev().map(|d| d.reversed()).collect())
    }

    /// Lexicographic minimum of the path and its reversal; realized path sets
    /// store this form so unoriented leaves are not double counted.
    pub fn canonical(&self) -> EdgePath {
        let rev = self.reversed();
        if *self <= rev {
            self.clone()
        } else {
            rev
        }
    }

    pub fn is_legal(&self, track: &TrainTrack) -> bool {
        self.0
            .windows(2)
            .all(|w| legal_successors(track, w[0]).contains(&w[1]))
    }

    pub fn display<'a>(&'a self, track: &'a TrainTrack) -> PathDisplay<'a> {
        PathDisplay { path: self, track }
    }

    /// Parse the `id+`/`id-` token form (also accepts U+2212).
    pub fn parse(track: &TrainTrack, text: &str) -> Option<EdgePath> {
        let mut out = Vec::new();
        for tok in text.split_whitespace() {
            let tok = tok.replace('\u{2212}', "-");
            let (name, dir) = if let Some(n) = tok.strip_suffix('+') {
                (n.to_string(), Dir::Forward)
            } else if let Some(n) = tok.strip_suffix('-') {
                (n.to_string(), Dir::Backward)
            } else {
                return None;
            };
            let edge = track.edge_by_name(&name)?;
            out.push(DirectedEdge { edge, dir });
        }
        Some(EdgePath(out))
    }
}

pub struct PathDisplay<'a> {
    path: &'a EdgePath,
    track: &'a TrainTrack,
}

impl fmt::Display for PathDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.path.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            let sign = if d.dir == Dir::Forward { "+" } else { "-" };
            write!(f, "{}{}", self.track.edges[d.edge.0].name, sign)?;
        }
        Ok(())
    }
}

/// All directed edges that may legally follow `d`: those departing the
/// opposite side of the switch that `d` runs into, in side order.
pub fn legal_successors(track: &TrainTrack, d: DirectedEdge) -> Vec<DirectedEdge> {
    let Attachment { switch, side, .. } = track.attachment(d.head());
    track.switches[switch.0]
        .side(side.opposite())
        .iter()
        .map(|&end| DirectedEdge::departing(end))
        .collect()
}

/// Side on which a directed edge arrives at its head switch.
pub fn arrival_side(track: &TrainTrack, d: DirectedEdge) -> (crate::track::SwitchId, Side) {
    let att = track.attachment(d.head());
    (att.switch, att.side)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("enumeration cap of {cap} paths exceeded")]
    CapExceeded { cap: usize },
}

pub const DEFAULT_PATH_CAP: usize = 10_000_000;

/// All legal edge paths of length exactly `r`, sorted. Errors out when more
/// than `cap` paths would be produced.
pub fn enumerate_paths(
    track: &TrainTrack,
    r: usize,
    cap: usize,
) -> Result<Vec<EdgePath>, EnumerationError> {
    assert!(r >= 1, "path length must be positive");
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for e in 0..track.edges.len() {
        for dir in [Dir::Forward, Dir::Backward] {
            stack.push(DirectedEdge { edge: EdgeId(e), dir });
            extend(track, &mut stack, r, cap, &mut out)?;
            stack.pop();
        }
    }
    out.sort();
    Ok(out)
}

fn extend(
    track: &TrainTrack,
    stack: &mut Vec<DirectedEdge>,
    r: usize,
    cap: usize,
    out: &mut Vec<EdgePath>,
) -> Result<(), EnumerationError> {
    if stack.len() == r {
        if out.len() >= cap {
            return Err(EnumerationError::CapExceeded { cap });
        }
        out.push(EdgePath(stack.clone()));
        return Ok(());
    }
    for next in legal_successors(track, *stack.last().unwrap()) {
        stack.push(next);
        extend(track, stack, r, cap, out)?;
        stack.pop();
    }
    Ok(())
}
