//! Exact slope-indexed model of laminations carried by the standard
//! once-punctured-torus track.
//!
//! A slope in [0, ∞] names the lamination whose cutting sequence against the
//! two edges is the two-sided mechanical word of that slope: a slope p/q
//! curve crosses edge `a` q times and edge `b` p times, and its realized
//! length-r edge paths are exactly the length-r factors of the corresponding
//! Christoffel word. Irrational slopes are given by continued fractions and
//! expanded through the standard-sequence recursion, so every factor set is
//! computed with integer arithmetic only.

use std::fmt;
use std::sync::{Arc, OnceLock};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::track::{assets, TrainTrack};

/// The two-letter cutting alphabet. `A` is a crossing of the horizontal
/// edge `a`, `B` of the edge `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    A,
    B,
}

impl Letter {
    pub fn swapped(self) -> Letter {
        match self {
            Letter::A => Letter::B,
            Letter::B => Letter::A,
        }
    }
}

pub type Word = Vec<Letter>;

/// An eventually-periodic or explicitly streamed continued fraction
/// `[a0; a1, a2, ...]`. An empty `periodic` part means the expansion is only
/// known up to the listed terms; requests past that depth fail rather than
/// truncate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContinuedFraction {
    pub initial: Vec<u64>,
    pub periodic: Vec<u64>,
}

impl ContinuedFraction {
    /// Canonical form: the periodic part is rolled back into the initial part
    /// as far as possible and reduced to its primitive period, so equal
    /// quadratic irrationals compare equal.
    pub fn canonical(&self) -> ContinuedFraction {
        let mut initial = self.initial.clone();
        let mut periodic = self.periodic.clone();
        if !periodic.is_empty() {
            // primitive period
            let n = periodic.len();
            for d in 1..n {
                if n % d == 0 && periodic.chunks(d).all(|c| c == &periodic[..d]) {
                    periodic.truncate(d);
                    break;
                }
            }
            while initial.len() > 1 && initial.last() == periodic.last() {
                initial.pop();
                periodic.rotate_right(1);
            }
        }
        ContinuedFraction { initial, periodic }
    }

    fn digit(&self, k: usize) -> Option<u64> {
        if k < self.initial.len() {
            Some(self.initial[k])
        } else if self.periodic.is_empty() {
            None
        } else {
            Some(self.periodic[(k - self.initial.len()) % self.periodic.len()])
        }
    }
}

/// A slope in [0, ∞]: a rational p/q in lowest terms (q = 0 encodes ∞), or a
/// continued fraction for a (quadratic or streamed) irrational.
#[derive(Debug, Clone, Eq, Hash)]
pub enum Slope {
    Rational { p: u64, q: u64 },
    Cf(ContinuedFraction),
}

impl PartialEq for Slope {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Slope::Rational { p, q }, Slope::Rational { p: p2, q: q2 }) => p == p2 && q == q2,
            (Slope::Cf(a), Slope::Cf(b)) => a.canonical() == b.canonical(),
            _ => false,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SlopeError {
    #[error("slope 0/0 is not a slope")]
    Indeterminate,
    #[error("continued fraction digit {value} at index {index} must be >= 1")]
    BadDigit { index: usize, value: u64 },
    #[error("continued fraction stream exhausted: factors of length {requested} need more terms")]
    DepthLimit { requested: usize },
    #[error("cannot parse slope `{0}`")]
    Parse(String),
}

impl Slope {
    pub fn rational(p: u64, q: u64) -> Result<Slope, SlopeError> {
        if p == 0 && q == 0 {
            return Err(SlopeError::Indeterminate);
        }
        let g = gcd(p, q);
        Ok(Slope::Rational { p: p / g, q: q / g })
    }

    pub fn infinity() -> Slope {
        Slope::Rational { p: 1, q: 0 }
    }

    pub fn cf(initial: Vec<u64>, periodic: Vec<u64>) -> Result<Slope, SlopeError> {
        if initial.is_empty() {
            return Err(SlopeError::Parse("empty continued fraction".into()));
        }
        for (i, &d) in initial.iter().enumerate().skip(1) {
            if d == 0 {
                return Err(SlopeError::BadDigit { index: i, value: d });
            }
        }
        for (i, &d) in periodic.iter().enumerate() {
            if d == 0 {
                return Err(SlopeError::BadDigit { index: initial.len() + i, value: d });
            }
        }
        if periodic.is_empty() && initial.len() < 2 {
            return Err(SlopeError::Parse(
                "streamed continued fraction needs at least one partial".into(),
            ));
        }
        Ok(Slope::Cf(ContinuedFraction { initial, periodic }))
    }

    /// Parse `p/q`, a bare integer, or `cf:[a0;a1,...,periodic:b1,...]`.
    pub fn parse(text: &str) -> Result<Slope, SlopeError> {
        let text = text.trim();
        if let Some(body) = text.strip_prefix("cf:") {
            let body = body
                .strip_prefix('[')
                .and_then(|b| b.strip_suffix(']'))
                .ok_or_else(|| SlopeError::Parse(text.into()))?;
            let (a0, rest) = body.split_once(';').ok_or_else(|| SlopeError::Parse(text.into()))?;
            let a0: u64 = a0.trim().parse().map_err(|_| SlopeError::Parse(text.into()))?;
            let mut initial = vec![a0];
            let mut periodic = Vec::new();
            let mut in_periodic = false;
            for tok in rest.split(',') {
                let mut tok = tok.trim();
                if tok.is_empty() {
                    continue;
                }
                if let Some(t) = tok.strip_prefix("periodic:") {
                    in_periodic = true;
                    tok = t.trim();
                }
                let d: u64 = tok.parse().map_err(|_| SlopeError::Parse(text.into()))?;
                if in_periodic {
                    periodic.push(d);
                } else {
                    initial.push(d);
                }
            }
            Slope::cf(initial, periodic)
        } else if let Some((p, q)) = text.split_once('/') {
            let p = p.trim().parse().map_err(|_| SlopeError::Parse(text.into()))?;
            let q = q.trim().parse().map_err(|_| SlopeError::Parse(text.into()))?;
            Slope::rational(p, q)
        } else {
            let p: u64 = text.parse().map_err(|_| SlopeError::Parse(text.into()))?;
            Slope::rational(p, 1)
        }
    }

    /// Edge crossing weights (w_a, w_b) = (q, p) for rational slopes.
    pub fn weights(&self) -> Option<(u64, u64)> {
        match self {
            Slope::Rational { p, q } => Some((*q, *p)),
            Slope::Cf(_) => None,
        }
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slope::Rational { p, q } => write!(f, "{p}/{q}"),
            Slope::Cf(cf) => {
                write!(f, "cf:[{};", cf.initial[0])?;
                let mut first = true;
                for d in &cf.initial[1..] {
                    if !first {
                        write!(f, ",")?;
                    }
                    write!(f, "{d}")?;
                    first = false;
                }
                if !cf.periodic.is_empty() {
                    if !first {
                        write!(f, ",")?;
                    }
                    write!(f, "periodic:")?;
                    for (i, d) in cf.periodic.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{d}")?;
                    }
                }
                write!(f, "]")
            }
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    if a == 0 {
        1
    } else {
        a
    }
}

/// The bundled once-punctured-torus track that hosts all slope laminations.
pub fn standard_track() -> Arc<TrainTrack> {
    static TRACK: OnceLock<Arc<TrainTrack>> = OnceLock::new();
    TRACK.get_or_init(|| Arc::new(assets::torus())).clone()
}

/// Lower mechanical word of rational rotation number p/q over one period:
/// letter(n) = B iff floor((n+1)p/q) - floor(np/q) = 1.
fn mechanical_period(p: u64, q: u64) -> Word {
    debug_assert!(q > 0 && p <= q);
    (0..q)
        .map(|n| {
            let step =
                (n + 1) as u128 * p as u128 / q as u128 - n as u128 * p as u128 / q as u128;
            if step == 1 {
                Letter::B
            } else {
                Letter::A
            }
        })
        .collect()
}

/// One period of the cutting word of a rational slope; a slope above 1 plays
/// the same word with the letters swapped.
pub fn slope_period_word(p: u64, q: u64) -> Word {
    if q == 0 {
        return vec![Letter::B]; // the vertical curve
    }
    if p == 0 {
        return vec![Letter::A];
    }
    if p <= q {
        mechanical_period(p, p + q)
    } else {
        mechanical_period(q, p + q).into_iter().map(Letter::swapped).collect()
    }
}

/// The rotation-number partials driving the standard sequence of a CF slope,
/// plus whether letters get swapped (slope > 1).
fn rotation_digits(
    cf: &ContinuedFraction,
) -> Result<(Vec<u64>, ContinuedFraction, bool), SlopeError> {
    let a0 = cf.initial[0];
    if a0 == 0 {
        // rho = alpha/(1+alpha) = [0; a1+1, a2, ...]
        match cf.digit(1) {
            Some(a1) => Ok((
                vec![a1 + 1],
                ContinuedFraction {
                    initial: cf.initial.get(2..).unwrap_or(&[]).to_vec(),
                    periodic: cf.periodic.clone(),
                },
                false,
            )),
            None => Err(SlopeError::DepthLimit { requested: 0 }),
        }
    } else {
        // alpha > 1: use 1/alpha with swapped letters; rho = [0; a0+1, a1, ...]
        Ok((
            vec![a0 + 1],
            ContinuedFraction { initial: cf.initial[1..].to_vec(), periodic: cf.periodic.clone() },
            true,
        ))
    }
}

/// Characteristic-word prefix of at least `min_len` letters for the rotation
/// number with partials `head ++ tail`, by the standard sequence
/// s_{-1} = b, s_0 = a, s_1 = a^{c1-1} b, s_k = s_{k-1}^{c_k} s_{k-2}.
/// Also returns the convergent denominators q_k = |s_k| produced so far.
fn standard_prefix(
    head: &[u64],
    tail: &ContinuedFraction,
    min_len: usize,
    requested: usize,
) -> Result<(Word, Vec<usize>), SlopeError> {
    let digit = |k: usize| -> Option<u64> {
        if k < head.len() {
            Some(head[k])
        } else {
            tail.digit(k - head.len())
        }
    };
    let c1 = digit(0).ok_or(SlopeError::DepthLimit { requested })?;
    let mut prev: Word = vec![Letter::A]; // s_0
    let mut cur: Word = vec![Letter::A; (c1 - 1) as usize];
    cur.push(Letter::B);
    let mut qs = vec![1usize, cur.len()];
    let mut k = 1usize;
    while cur.len() < min_len {
        k += 1;
        let c = digit(k - 1).ok_or(SlopeError::DepthLimit { requested })?;
        let mut next = Word::with_capacity(cur.len() * c as usize + prev.len());
        for _ in 0..c {
            next.extend_from_slice(&cur);
        }
        next.extend_from_slice(&prev);
        prev = cur;
        cur = next;
        qs.push(cur.len());
    }
    Ok((cur, qs))
}

/// The set of length-`n` factors of the two-sided cutting word of `slope`,
/// letters oriented as written. Mechanical-word languages are closed under
/// reversal, so this set already equals its own mirror.
pub fn oriented_factors(slope: &Slope, n: usize) -> Result<BTreeSet<Word>, SlopeError> {
    assert!(n >= 1);
    match slope {
        Slope::Rational { p, q } => {
            let w = slope_period_word(*p, *q);
            let period = w.len();
            let mut buf = Word::with_capacity(period + n - 1);
            while buf.len() < period + n - 1 {
                buf.push(w[buf.len() % period]);
            }
            let mut out = BTreeSet::new();
            for s in 0..period {
                out.insert(buf[s..s + n].to_vec());
            }
            Ok(out)
        }
        Slope::Cf(cf) => {
            let (head, tail, swap) = rotation_digits(cf)?;
            // Every length-n factor of a Sturmian word occurs in every window
            // of length q_{j+1} + q_j + n - 1 where q_j <= n < q_{j+1}; take
            // an extra convergent of slack.
            let (_, qs) = grow_denominators(&head, &tail, n)?;
            let j = qs.iter().position(|&q| q > n).unwrap();
            let window = n + qs[j] + qs[j.saturating_sub(1)] + qs[j];
            let (prefix, _) = standard_prefix(&head, &tail, window, n)?;
            let mut out = BTreeSet::new();
            for s in 0..=(prefix.len().min(window) - n) {
                let f = &prefix[s..s + n];
                if swap {
                    out.insert(f.iter().map(|l| l.swapped()).collect());
                } else {
                    out.insert(f.to_vec());
                }
            }
            Ok(out)
        }
    }
}

fn grow_denominators(
    head: &[u64],
    tail: &ContinuedFraction,
    n: usize,
) -> Result<(Word, Vec<usize>), SlopeError> {
    let mut len = n + 1;
    loop {
        let (w, qs) = standard_prefix(head, tail, len, n)?;
        if qs.iter().any(|&q| q > n) {
            return Ok((w, qs));
        }
        len = w.len() + 1;
    }
}

/// All rationals p/q in [0,1] with q <= max_q, in lowest terms, ascending.
pub fn farey_slopes(max_q: u64) -> Vec<Slope> {
    assert!(max_q >= 1);
    let mut out = vec![Slope::Rational { p: 0, q: 1 }];
    let (mut a, mut b, mut c, mut d) = (0u64, 1u64, 1u64, max_q);
    loop {
        out.push(Slope::Rational { p: c, q: d });
        if c == 1 && d == 1 {
            break;
        }
        let k = (max_q + b) / d;
        (a, b, c, d) = (c, d, k * c - a, k * d - b);
    }
    out
}

/// Result of comparing factor languages up to a depth cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divergence {
    /// Largest r at which the length-r factor sets still coincide (0 when
    /// they already differ at length 1).
    Depth(usize),
    /// No difference found up to the cap.
    IndistinguishableAt(usize),
}

/// Exact divergence depth of two slopes' factor languages, capped at `r_max`.
pub fn divergence_depth(a: &Slope, b: &Slope, r_max: usize) -> Result<Divergence, SlopeError> {
    if a == b {
        return Ok(Divergence::IndistinguishableAt(r_max));
    }
    for r in 1..=r_max {
        if oriented_factors(a, r)? != oriented_factors(b, r)? {
            return Ok(Divergence::Depth(r - 1));
        }
    }
    Ok(Divergence::IndistinguishableAt(r_max))
}

// ---------------------------------------------------------------------------
// Truncated-language fingerprints.
//
// Census sweeps over tens of thousands of slopes only need to count distinct
// truncated languages, not materialize them. The fingerprint hashes the set
// of length-n windows of the periodic cutting word, packed into bits, with a
// 128-bit mix; equal languages always collide, unequal ones don't in any
// realistic sweep.

fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// 128-bit fingerprint of the set of length-`n` factors of the rational
/// slope p/q: equal factor sets always agree, distinct ones collide only
/// with vanishing probability.
pub fn language_fingerprint(p: u64, q: u64, n: usize) -> u128 {
    let w = slope_period_word(p, q);
    let period = w.len();
    let total = period + n - 1;
    let mut bits = vec![0u64; total.div_ceil(64) + 1];
    for i in 0..total {
        if w[i % period] == Letter::B {
            bits[i / 64] |= 1u64 << (i % 64);
        }
    }
    let words = n.div_ceil(64);
    let last_mask = if n % 64 == 0 { u64::MAX } else { (1u64 << (n % 64)) - 1 };
    let mut hashes: Vec<(u64, u64)> = Vec::with_capacity(period);
    for s in 0..period {
        let mut h0 = mix64(n as u64);
        let mut h1 = mix64(n as u64 ^ 0xABCD_EF01_2345_6789);
        for wi in 0..words {
            let lo_bit = s + wi * 64;
            let word_idx = lo_bit / 64;
            let shift = (lo_bit % 64) as u32;
            let mut v = bits[word_idx] >> shift;
            if shift > 0 && word_idx + 1 < bits.len() {
                v |= bits[word_idx + 1] << (64 - shift);
            }
            if wi == words - 1 {
                v &= last_mask;
            }
            h0 = mix64(h0 ^ v);
            h1 = mix64(h1 ^ v.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        }
        hashes.push((h0, h1));
    }
    hashes.sort_unstable();
    hashes.dedup();
    let mut acc0 = mix64(hashes.len() as u64);
    let mut acc1 = mix64(!(hashes.len() as u64));
    for (h0, h1) in hashes {
        acc0 = mix64(acc0 ^ h0);
        acc1 = mix64(acc1 ^ h1);
    }
    ((acc0 as u128) << 64) | acc1 as u128
}
