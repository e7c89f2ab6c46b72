//! Finite unions of closed intervals and isolated points on the real line.

use serde::Serialize;

use crate::config::Closure;

/// Default gap below which neighbouring pieces are merged.
pub const DEFAULT_MERGE_TOL: f64 = 1e-9;

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Self {
        Interval {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, guard: f64) -> bool {
        x >= self.lo - guard && x <= self.hi + guard
    }

    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }
}

/// Sorted union of disjoint closed intervals and isolated points.
///
/// Pieces closer than `merge_tol` are fused on construction, so intervals are
/// separated by gaps larger than `merge_tol` and no point lies within
/// `merge_tol` of an interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSet {
    intervals: Vec<Interval>,
    points: Vec<f64>,
    #[serde(skip)]
    merge_tol: f64,
}

#[derive(Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    point: bool,
}

impl BandSet {
    pub fn empty(merge_tol: f64) -> Self {
        BandSet {
            intervals: Vec::new(),
            points: Vec::new(),
            merge_tol,
        }
    }

    pub fn from_parts(
        intervals: impl IntoIterator<Item = Interval>,
        points: impl IntoIterator<Item = f64>,
        merge_tol: f64,
    ) -> Self {
        let mut pieces: Vec<Piece> = intervals
            .into_iter()
            .map(|iv| Piece {
                lo: iv.lo,
                hi: iv.hi,
                point: false,
            })
            .chain(points.into_iter().map(|x| Piece {
                lo: x,
                hi: x,
                point: true,
            }))
            .filter(|p| p.lo.is_finite() && p.hi.is_finite())
            .collect();
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));

        let mut merged: Vec<Piece> = Vec::with_capacity(pieces.len());
        for piece in pieces {
            match merged.last_mut() {
                Some(last) if piece.lo <= last.hi + merge_tol => {
                    // points closer than the tolerance stay a point; anything wider is a band
                    let fused_point =
                        last.point && piece.point && piece.hi - last.lo <= merge_tol;
                    last.hi = last.hi.max(piece.hi);
                    last.point = fused_point;
                }
                _ => merged.push(piece),
            }
        }

        let mut out = BandSet::empty(merge_tol);
        for piece in merged {
            if piece.point {
                out.points.push(piece.lo);
            } else {
                out.intervals.push(Interval {
                    lo: piece.lo,
                    hi: piece.hi,
                });
            }
        }
        out
    }

    pub fn interval(lo: f64, hi: f64, merge_tol: f64) -> Self {
        BandSet::from_parts([Interval::new(lo, hi)], [], merge_tol)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn merge_tol(&self) -> f64 {
        self.merge_tol
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty() && self.points.is_empty()
    }

    pub fn union(&self, other: &BandSet) -> BandSet {
        BandSet::from_parts(
            self.intervals.iter().chain(&other.intervals).copied(),
            self.points.iter().chain(&other.points).copied(),
            self.merge_tol.max(other.merge_tol),
        )
    }

    pub fn union_all<'a>(sets: impl IntoIterator<Item = &'a BandSet>, merge_tol: f64) -> BandSet {
        let mut intervals = Vec::new();
        let mut points = Vec::new();
        for s in sets {
            intervals.extend_from_slice(&s.intervals);
            points.extend_from_slice(&s.points);
        }
        BandSet::from_parts(intervals, points, merge_tol)
    }

    pub fn min(&self) -> Option<f64> {
        let a = self.intervals.first().map(|iv| iv.lo);
        let b = self.points.first().copied();
        match (a, b) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn max(&self) -> Option<f64> {
        let a = self.intervals.last().map(|iv| iv.hi);
        let b = self.points.last().copied();
        match (a, b) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    /// Total length of the interval part.
    pub fn total_width(&self) -> f64 {
        self.intervals.iter().map(Interval::width).sum()
    }

    /// Distance from `x` to the nearest piece (`+∞` for the empty set).
    pub fn distance(&self, x: f64) -> f64 {
        self.intervals
            .iter()
            .map(|iv| iv.distance(x))
            .chain(self.points.iter().map(|p| (p - x).abs()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: f64, guard: f64) -> bool {
        self.distance(x) <= guard
    }

    /// The piece (as an interval, possibly degenerate) within `guard` of `x`.
    pub fn piece_near(&self, x: f64, guard: f64) -> Option<Interval> {
        self.intervals
            .iter()
            .copied()
            .find(|iv| iv.contains(x, guard))
            .or_else(|| {
                self.points
                    .iter()
                    .find(|&&p| (p - x).abs() <= guard)
                    .map(|&p| Interval { lo: p, hi: p })
            })
    }

    /// Every piece of `self` lies within `tol` of a single piece of `other`.
    pub fn is_subset_of(&self, other: &BandSet, tol: f64) -> bool {
        let covers = |lo: f64, hi: f64| {
            other
                .intervals
                .iter()
                .any(|o| lo >= o.lo - tol && hi <= o.hi + tol)
                || (hi - lo <= tol && other.points.iter().any(|&p| (p - lo).abs() <= tol))
        };
        self.intervals.iter().all(|iv| covers(iv.lo, iv.hi))
            && self.points.iter().all(|&p| covers(p, p))
    }

    /// Open gaps of the set inside the window `(lo, hi)`, in increasing order.
    pub fn complement_within(&self, lo: f64, hi: f64) -> Vec<Interval> {
        let mut pieces: Vec<(f64, f64)> = self
            .intervals
            .iter()
            .map(|iv| (iv.lo, iv.hi))
            .chain(self.points.iter().map(|&p| (p, p)))
            .collect();
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut gaps = Vec::new();
        let mut cursor = lo;
        for (a, b) in pieces {
            if a > cursor {
                gaps.push(Interval {
                    lo: cursor,
                    hi: a.min(hi),
                });
            }
            cursor = cursor.max(b);
            if cursor >= hi {
                break;
            }
        }
        if cursor < hi {
            gaps.push(Interval { lo: cursor, hi });
        }
        gaps.retain(|g| g.hi > g.lo);
        gaps
    }

    /// `sup_{x ∈ values} dist(x, self)`.
    pub fn excess_of(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .map(|&x| self.distance(x))
            .fold(0.0, f64::max)
    }

    /// `sup_{y ∈ self} dist(y, values)`; `values` need not be sorted.
    pub fn coverage_gap(&self, values: &[f64]) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        if values.is_empty() {
            return f64::INFINITY;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let nearest = |y: f64| {
            let i = sorted.partition_point(|&v| v < y);
            let mut d = f64::INFINITY;
            if i < sorted.len() {
                d = d.min(sorted[i] - y);
            }
            if i > 0 {
                d = d.min(y - sorted[i - 1]);
            }
            d
        };
        let mut worst: f64 = self.points.iter().map(|&p| nearest(p)).fold(0.0, f64::max);
        for iv in &self.intervals {
            worst = worst.max(nearest(iv.lo)).max(nearest(iv.hi));
            // the farthest interior point sits halfway between consecutive values
            let start = sorted.partition_point(|&v| v < iv.lo);
            let end = sorted.partition_point(|&v| v <= iv.hi);
            for w in sorted[start..end].windows(2) {
                worst = worst.max(0.5 * (w[1] - w[0]));
            }
        }
        worst
    }

    /// Symmetric Hausdorff distance between `self` and a finite set of values.
    pub fn hausdorff(&self, values: &[f64]) -> f64 {
        self.excess_of(values).max(self.coverage_gap(values))
    }
}

/// Closes root sets sampled at the nodes of a grid graph.
///
/// `roots[i]` lists the roots found at node `i` (one branch per entry, sorted)
/// and `neighbors(i)` the nodes adjacent to `i`. With [`Closure::Linked`] the
/// k-th roots of two adjacent nodes carrying the same number of roots are
/// joined into an interval; otherwise every root is kept as a point.
pub fn close_sampled_roots(
    roots: &[Vec<f64>],
    neighbors: impl Fn(usize) -> Vec<usize>,
    closure: Closure,
    merge_tol: f64,
) -> BandSet {
    let points: Vec<f64> = roots.iter().flatten().copied().collect();
    let mut intervals = Vec::new();
    if closure == Closure::Linked {
        for (i, here) in roots.iter().enumerate() {
            if here.is_empty() {
                continue;
            }
            for j in neighbors(i) {
                let there = &roots[j];
                if there.len() == here.len() {
                    intervals.extend(here.iter().zip(there).map(|(&a, &b)| Interval::new(a, b)));
                }
            }
        }
    }
    BandSet::from_parts(intervals, points, merge_tol)
}
