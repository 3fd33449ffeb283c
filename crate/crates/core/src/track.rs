//! Combinatorial train tracks.
//!
//! A track is a graph of switches and edges together with ribbon data: every
//! edge end attaches to one of the two sides of a switch, at a position in
//! that side's linear order. Tangency is encoded by the side split — a path
//! through a switch must enter on one side and leave on the other. The
//! complement of the track in its surface is recovered purely combinatorially
//! by traversing the boundary of a ribbon neighborhood.

use std::fmt;

use thiserror::Error;

/// Index of a switch in [`TrainTrack::switches`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SwitchId(pub usize);

/// Index of an edge in [`TrainTrack::edges`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

/// The two sides of a switch. Edges attached on side A are tangent to one
/// direction of the switch line, edges on side B to the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::A => 0,
            Side::B => 1,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::A => write!(f, "A"),
            Side::B => write!(f, "B"),
        }
    }
}

/// One end of an edge: `end` is 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeEnd {
    pub edge: EdgeId,
    pub end: u8,
}

impl EdgeEnd {
    pub fn other(self) -> EdgeEnd {
        EdgeEnd { edge: self.edge, end: 1 - self.end }
    }
}

/// Where an edge end lands: switch, side, and position in the side order.
/// Position 0 is the outermost slot at the "top" of the tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Attachment {
    pub switch: SwitchId,
    pub side: Side,
    pub pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Switch {
    pub name: String,
    /// `sides[0]` = side A order, `sides[1]` = side B order.
    pub sides: [Vec<EdgeEnd>; 2],
}

impl Switch {
    pub fn side(&self, side: Side) -> &[EdgeEnd] {
        &self.sides[side.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub name: String,
    pub ends: [Attachment; 2],
}

impl Edge {
    /// True when the two ends land on opposite side kinds (A/B). Strand
    /// orders transfer straight through such an edge; same-side edges make a
    /// U-turn and reverse the transverse order.
    pub fn sides_opposite(&self) -> bool {
        self.ends[0].side != self.ends[1].side
    }
}

/// Declared complementary region kind. Peripheral regions contain a puncture
/// or a boundary component of the surface and are exempt from the spike
/// conditions; this cannot be inferred from the ribbon data, so asset files
/// declare it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RegionKind {
    Disc,
    Annular,
    Peripheral,
}

impl fmt::Display for RegionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionKind::Disc => write!(f, "disc"),
            RegionKind::Annular => write!(f, "annular"),
            RegionKind::Peripheral => write!(f, "peripheral"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainTrack {
    pub name: String,
    pub switches: Vec<Switch>,
    pub edges: Vec<Edge>,
    /// Region declarations from the asset file, as (spike count, kind).
    pub declared_regions: Vec<(usize, RegionKind)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrackError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("structural error: {0}")]
    Structural(String),
}

/// A complementary region, computed as one boundary walk of the ribbon
/// neighborhood. `walk` lists the arriving edge ends in traversal order; the
/// walk is rotated to start at its minimal element so output is canonical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplementaryRegion {
    pub walk: Vec<EdgeEnd>,
    pub spikes: usize,
    pub kind: RegionKind,
}

/// Validation findings. An empty list means the track satisfies all the
/// train-track conditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    /// Condition (2): a switch side carries no edge end.
    EmptySide { switch: SwitchId, side: Side },
    /// Condition (3): a disc region with fewer than 3 spikes.
    ForbiddenDisc { region: usize, spikes: usize },
    /// Condition (3): an annular region with no spike.
    UnspikedAnnulus { region: usize },
    /// Declared region lines do not match the computed boundary walks.
    RegionMismatch { computed: Vec<usize>, declared: Vec<usize> },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::EmptySide { switch, side } => {
                write!(f, "condition (2) violated: switch #{} has no edge end on side {}", switch.0, side)
            }
            Diagnostic::ForbiddenDisc { region, spikes } => {
                let name = match spikes {
                    0 => " (nullgon)",
                    1 => " (monogon)",
                    2 => " (bigon)",
                    _ => "",
                };
                write!(f, "condition (3) violated: region #{region} is a disc with {spikes} spikes{name}")
            }
            Diagnostic::UnspikedAnnulus { region } => {
                write!(f, "condition (3) violated: region #{region} is an annulus with no spike")
            }
            Diagnostic::RegionMismatch { computed, declared } => {
                write!(
                    f,
                    "declared regions {declared:?} do not match computed boundary walks {computed:?} (spike counts)"
                )
            }
        }
    }
}

impl TrainTrack {
    /// Build a track from raw records, checking structural well-formedness:
    /// every attachment resolves, and the positions on each switch side are
    /// exactly 0..n with no gaps or duplicates.
    pub fn from_records(
        name: &str,
        switch_names: Vec<String>,
        edge_records: Vec<(String, Attachment, Attachment)>,
        declared_regions: Vec<(usize, RegionKind)>,
    ) -> Result<TrainTrack, TrackError> {
        let nswitches = switch_names.len();
        let mut switches: Vec<Switch> = switch_names
            .into_iter()
            .map(|name| Switch { name, sides: [Vec::new(), Vec::new()] })
            .collect();

        // slot table: (switch, side) -> sparse position map
        let mut slots: Vec<[Vec<Option<EdgeEnd>>; 2]> = vec![[Vec::new(), Vec::new()]; nswitches];
        let mut edges = Vec::new();
        for (idx, (ename, a0, a1)) in edge_records.into_iter().enumerate() {
            for (which, att) in [(0u8, a0), (1u8, a1)] {
                if att.switch.0 >= nswitches {
                    return Err(TrackError::Structural(format!(
                        "edge {ename}: dangling switch reference #{}",
                        att.switch.0
                    )));
                }
                let v = &mut slots[att.switch.0][att.side.index()];
                if v.len() <= att.pos {
                    v.resize(att.pos + 1, None);
                }
                if v[att.pos].is_some() {
                    return Err(TrackError::Structural(format!(
                        "duplicate attachment at switch #{}, side {}, position {}",
                        att.switch.0, att.side, att.pos
                    )));
                }
                v[att.pos] = Some(EdgeEnd { edge: EdgeId(idx), end: which });
            }
            edges.push(Edge { name: ename, ends: [a0, a1] });
        }
        for (sw, sides) in slots.into_iter().enumerate() {
            for (sidx, v) in sides.into_iter().enumerate() {
                let mut filled = Vec::with_capacity(v.len());
                for (pos, slot) in v.into_iter().enumerate() {
                    match slot {
                        Some(end) => filled.push(end),
                        None => {
                            return Err(TrackError::Structural(format!(
                                "gap in side order: switch #{sw}, side {}, position {pos} unused",
                                if sidx == 0 { Side::A } else { Side::B }
                            )))
                        }
                    }
                }
                switches[sw].sides[sidx] = filled;
            }
        }
        Ok(TrainTrack { name: name.to_string(), switches, edges, declared_regions })
    }

    pub fn switch_by_name(&self, name: &str) -> Option<SwitchId> {
        self.switches.iter().position(|s| s.name == name).map(SwitchId)
    }

    pub fn edge_by_name(&self, name: &str) -> Option<EdgeId> {
        self.edges.iter().position(|e| e.name == name).map(EdgeId)
    }

    pub fn attachment(&self, end: EdgeEnd) -> Attachment {
        self.edges[end.edge.0].ends[end.end as usize]
    }

    /// Counterclockwise cyclic order of edge ends around a switch: side B in
    /// reversed position order, then side A in position order. Adjacent pairs
    /// on the same side are cusps of the complement; the two A/B junctions
    /// are the smooth top and bottom of the tie.
    pub fn ccw_order(&self, switch: SwitchId) -> Vec<EdgeEnd> {
        let sw = &self.switches[switch.0];
        let mut order: Vec<EdgeEnd> = sw.side(Side::B).iter().rev().copied().collect();
        order.extend(sw.side(Side::A).iter().copied());
        order
    }

    /// Complementary regions as boundary walks of the ribbon neighborhood.
    /// Every edge end is "arrived at" by exactly one walk. Kinds are taken
    /// from the declared regions when their spike multiset matches; otherwise
    /// every walk defaults to `Disc`.
    pub fn complementary_regions(&self) -> Vec<ComplementaryRegion> {
        let mut walks = self.boundary_walks();
        // canonical: rotate each walk to start at its minimum, sort walks
        for (walk, _) in walks.iter_mut() {
            let min_at = walk
                .iter()
                .enumerate()
                .min_by_key(|(_, e)| (e.edge, e.end))
                .map(|(i, _)| i)
                .unwrap_or(0);
            walk.rotate_left(min_at);
        }
        walks.sort();

        let mut regions: Vec<ComplementaryRegion> = walks
            .into_iter()
            .map(|(walk, spikes)| ComplementaryRegion { walk, spikes, kind: RegionKind::Disc })
            .collect();
        // attach declared kinds when the spike multisets agree
        if !self.declared_regions.is_empty() {
            let mut computed: Vec<usize> = regions.iter().map(|r| r.spikes).collect();
            let mut declared = self.declared_regions.clone();
            computed.sort_unstable();
            declared.sort();
            if computed == declared.iter().map(|d| d.0).collect::<Vec<_>>() {
                // assign kinds greedily by spike count; regions sorted by walk,
                // so sort indices by spikes to line up with declared order
                let mut idx: Vec<usize> = (0..regions.len()).collect();
                idx.sort_by_key(|&i| regions[i].spikes);
                for (slot, (_, kind)) in idx.into_iter().zip(declared.into_iter()) {
                    regions[slot].kind = kind;
                }
            }
        }
        regions
    }

    /// Raw boundary walks: (arriving edge ends in order, cusp count).
    fn boundary_walks(&self) -> Vec<(Vec<EdgeEnd>, usize)> {
        // For each switch, precompute the ccw cyclic order and the side of
        // each member for cusp detection.
        let ccw: Vec<Vec<EdgeEnd>> = (0..self.switches.len()).map(|i| self.ccw_order(SwitchId(i))).collect();

        let pos_in_ccw = |end: EdgeEnd| -> (usize, usize) {
            let att = self.attachment(end);
            let order = &ccw[att.switch.0];
            let p = order.iter().position(|&e| e == end).expect("end in ccw order");
            (att.switch.0, p)
        };

        let mut visited = vec![false; self.edges.len() * 2];
        let key = |end: EdgeEnd| end.edge.0 * 2 + end.end as usize;
        let mut out = Vec::new();
        for e in 0..self.edges.len() {
            for w in 0..2u8 {
                let start = EdgeEnd { edge: EdgeId(e), end: w };
                if visited[key(start)] {
                    continue;
                }
                let mut walk = Vec::new();
                let mut spikes = 0usize;
                let mut cur = start;
                loop {
                    visited[key(cur)] = true;
                    walk.push(cur);
                    // corner from cur to its ccw predecessor
                    let (sw, p) = pos_in_ccw(cur);
                    let order = &ccw[sw];
                    let prev = order[(p + order.len() - 1) % order.len()];
                    let side_cur = self.attachment(cur).side;
                    let side_prev = self.attachment(prev).side;
                    if side_cur == side_prev {
                        spikes += 1;
                    }
                    cur = prev.other();
                    if cur == start {
                        break;
                    }
                }
                out.push((walk, spikes));
            }
        }
        out
    }

    /// Train-track validity diagnostics; empty iff conditions (2) and (3)
    /// hold and any declared regions match the computed walks.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        for (i, sw) in self.switches.iter().enumerate() {
            for side in [Side::A, Side::B] {
                if sw.side(side).is_empty() {
                    diags.push(Diagnostic::EmptySide { switch: SwitchId(i), side });
                }
            }
        }
        let regions = self.complementary_regions();
        if !self.declared_regions.is_empty() {
            let mut computed: Vec<usize> = regions.iter().map(|r| r.spikes).collect();
            let mut declared: Vec<usize> = self.declared_regions.iter().map(|d| d.0).collect();
            computed.sort_unstable();
            declared.sort_unstable();
            if computed != declared {
                diags.push(Diagnostic::RegionMismatch { computed, declared });
            }
        }
        for (i, r) in regions.iter().enumerate() {
            match r.kind {
                RegionKind::Disc if r.spikes < 3 => {
                    diags.push(Diagnostic::ForbiddenDisc { region: i, spikes: r.spikes })
                }
                RegionKind::Annular if r.spikes == 0 => diags.push(Diagnostic::UnspikedAnnulus { region: i }),
                _ => {}
            }
        }
        diags
    }

    /// Euler characteristic of the filled surface: V − E plus one for every
    /// disc region. Annular and peripheral regions contribute nothing.
    pub fn euler_characteristic(&self) -> i64 {
        let discs = self
            .complementary_regions()
            .iter()
            .filter(|r| r.kind == RegionKind::Disc)
            .count() as i64;
        self.switches.len() as i64 - self.edges.len() as i64 + discs
    }

    /// Total cusp count, straight from the side orders. Equals the sum of
    /// region spike counts.
    pub fn cusp_count(&self) -> usize {
        self.switches
            .iter()
            .map(|s| {
                s.side(Side::A).len().saturating_sub(1) + s.side(Side::B).len().saturating_sub(1)
            })
            .sum()
    }

    /// Parse the line-oriented asset format. Records: `switch <id>`,
    /// `edge <id> <sw>,<side>,<pos> <sw>,<side>,<pos>`,
    /// `region <spikes> <annular|disc|peripheral>`. `#` starts a comment.
    pub fn parse(name: &str, text: &str) -> Result<TrainTrack, TrackError> {
        let mut switch_names: Vec<String> = Vec::new();
        let mut edge_records = Vec::new();
        let mut regions = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tok = line.split_whitespace();
            let kind = tok.next().unwrap();
            let err = |msg: &str| TrackError::Parse { line: lineno + 1, msg: msg.to_string() };
            match kind {
                "switch" => {
                    let id = tok.next().ok_or_else(|| err("switch needs an id"))?;
                    if switch_names.iter().any(|s| s == id) {
                        return Err(err("duplicate switch id"));
                    }
                    switch_names.push(id.to_string());
                }
                "edge" => {
                    let id = tok.next().ok_or_else(|| err("edge needs an id"))?;
                    let a0 = tok.next().ok_or_else(|| err("edge needs two attachments"))?;
                    let a1 = tok.next().ok_or_else(|| err("edge needs two attachments"))?;
                    let parse_att = |s: &str| -> Result<Attachment, TrackError> {
                        let parts: Vec<&str> = s.split(',').collect();
                        if parts.len() != 3 {
                            return Err(err("attachment must be switch,side,pos"));
                        }
                        let sw = switch_names
                            .iter()
                            .position(|n| n == parts[0])
                            .ok_or_else(|| err(&format!("unknown switch `{}`", parts[0])))?;
                        let side = match parts[1] {
                            "A" => Side::A,
                            "B" => Side::B,
                            other => return Err(err(&format!("bad side `{other}`"))),
                        };
                        let pos: usize =
                            parts[2].parse().map_err(|_| err(&format!("bad position `{}`", parts[2])))?;
                        Ok(Attachment { switch: SwitchId(sw), side, pos })
                    };
                    if edge_records.iter().any(|(n, _, _): &(String, _, _)| n == id) {
                        return Err(err("duplicate edge id"));
                    }
                    edge_records.push((id.to_string(), parse_att(a0)?, parse_att(a1)?));
                }
                "region" => {
                    let spikes: usize = tok
                        .next()
                        .ok_or_else(|| err("region needs a spike count"))?
                        .parse()
                        .map_err(|_| err("bad spike count"))?;
                    let kind = match tok.next().ok_or_else(|| err("region needs a kind"))? {
                        "disc" => RegionKind::Disc,
                        "annular" => RegionKind::Annular,
                        "peripheral" => RegionKind::Peripheral,
                        other => return Err(err(&format!("bad region kind `{other}`"))),
                    };
                    regions.push((spikes, kind));
                }
                other => return Err(err(&format!("unknown record `{other}`"))),
            }
            if tok.next().is_some() {
                return Err(err("trailing tokens"));
            }
        }
        TrainTrack::from_records(name, switch_names, edge_records, regions)
    }

    /// Canonical serialization; `parse(serialize(t))` reproduces `t` exactly.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for sw in &self.switches {
            out.push_str(&format!("switch {}\n", sw.name));
        }
        for e in &self.edges {
            let att = |a: &Attachment| format!("{},{},{}", self.switches[a.switch.0].name, a.side, a.pos);
            out.push_str(&format!("edge {} {} {}\n", e.name, att(&e.ends[0]), att(&e.ends[1])));
        }
        let mut regions = self.declared_regions.clone();
        regions.sort();
        for (spikes, kind) in regions {
            out.push_str(&format!("region {spikes} {kind}\n"));
        }
        out
    }
}

/// Bundled track assets used throughout the test suites and the CLI docs.
pub mod assets {
    use super::TrainTrack;

    pub const TORUS: &str = include_str!("../assets/torus.track");
    pub const FOUR_PUNCTURED_SPHERE: &str = include_str!("../assets/four_punctured_sphere.track");
    pub const GENUS2: &str = include_str!("../assets/genus2.track");

    pub fn torus() -> TrainTrack {
        TrainTrack::parse("torus", TORUS).expect("bundled torus asset parses")
    }

    pub fn four_punctured_sphere() -> TrainTrack {
        TrainTrack::parse("four_punctured_sphere", FOUR_PUNCTURED_SPHERE)
            .expect("bundled 4-punctured-sphere asset parses")
    }

    pub fn genus2() -> TrainTrack {
        TrainTrack::parse("genus2", GENUS2).expect("bundled genus-2 asset parses")
    }

    pub fn all() -> Vec<TrainTrack> {
        vec![torus(), four_punctured_sphere(), genus2()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_asset_valid() {
        let t = assets::torus();
        assert_eq!(t.validate(), vec![]);
        let regions = t.complementary_regions();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].spikes, 2);
        assert_eq!(regions[0].kind, RegionKind::Peripheral);
        assert_eq!(t.euler_characteristic(), -1);
        assert_eq!(t.cusp_count(), 2);
    }

    #[test]
    fn four_punctured_sphere_asset_valid() {
        let t = assets::four_punctured_sphere();
        assert_eq!(t.validate(), vec![]);
        let mut spikes: Vec<usize> = t.complementary_regions().iter().map(|r| r.spikes).collect();
        spikes.sort_unstable();
        assert_eq!(spikes, vec![0, 1, 1, 2]);
        assert_eq!(t.euler_characteristic(), -2);
    }

    #[test]
    fn genus2_asset_valid() {
        let t = assets::genus2();
        assert_eq!(t.validate(), vec![]);
        let regions = t.complementary_regions();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].spikes, 6);
        assert_eq!(regions[0].kind, RegionKind::Disc);
        assert_eq!(t.euler_characteristic(), -2);
        assert_eq!(t.cusp_count(), 6);
    }

    #[test]
    fn spike_totals_match_side_orders() {
        for t in assets::all() {
            let total: usize = t.complementary_regions().iter().map(|r| r.spikes).sum();
            assert_eq!(total, t.cusp_count(), "{}", t.name);
        }
    }

    #[test]
    fn empty_side_is_condition_2() {
        // single edge looping in and out of side A only
        let t = TrainTrack::parse("loop", "switch s\nedge a s,A,0 s,A,1\n").unwrap();
        let diags = t.validate();
        assert!(diags.contains(&Diagnostic::EmptySide { switch: SwitchId(0), side: Side::B }));
    }

    #[test]
    fn bigon_fixture_rejected() {
        let text = "switch s0\nswitch s1\nedge e s0,A,0 s1,B,0\nedge f s0,A,1 s1,B,1\n";
        let t = TrainTrack::parse("bigon", text).unwrap();
        let diags = t.validate();
        assert!(
            diags.iter().any(|d| matches!(d, Diagnostic::ForbiddenDisc { spikes: 2, .. })),
            "expected a bigon diagnostic, got {diags:?}"
        );
    }

    #[test]
    fn monogon_fixture_rejected() {
        let t = TrainTrack::parse("monogon", "switch s\nedge a s,A,0 s,A,1\n").unwrap();
        let diags = t.validate();
        assert!(diags.iter().any(|d| matches!(d, Diagnostic::ForbiddenDisc { spikes: 1, .. })));
    }

    #[test]
    fn nullgon_fixture_rejected() {
        // a smooth circle: one switch, one edge through it
        let t = TrainTrack::parse("circle", "switch s\nedge a s,A,0 s,B,0\n").unwrap();
        let diags = t.validate();
        assert!(diags.iter().any(|d| matches!(d, Diagnostic::ForbiddenDisc { spikes: 0, .. })));
    }

    #[test]
    fn region_mismatch_reported() {
        let text = "switch s\nedge a s,B,1 s,A,0\nedge b s,B,0 s,A,1\nregion 3 disc\n";
        let t = TrainTrack::parse("bad", text).unwrap();
        assert!(t.validate().iter().any(|d| matches!(d, Diagnostic::RegionMismatch { .. })));
    }

    #[test]
    fn structural_errors_detected() {
        assert!(matches!(
            TrainTrack::parse("x", "edge a s,A,0 s,B,0\n"),
            Err(TrackError::Parse { .. })
        ));
        // duplicate position
        assert!(matches!(
            TrainTrack::parse("x", "switch s\nedge a s,A,0 s,A,0\n"),
            Err(TrackError::Structural(_))
        ));
        // gap in positions
        assert!(matches!(
            TrainTrack::parse("x", "switch s\nedge a s,A,0 s,A,2\n"),
            Err(TrackError::Structural(_))
        ));
    }

    #[test]
    fn serialization_round_trips() {
        for t in assets::all() {
            let s1 = t.serialize();
            let t2 = TrainTrack::parse(&t.name, &s1).unwrap();
            assert_eq!(t, t2);
            assert_eq!(s1, t2.serialize());
        }
    }
}
