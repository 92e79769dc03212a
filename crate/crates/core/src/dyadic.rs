//! Exact dyadic geometry on integer scale/position pairs.

use std::fmt;

/// `2^k` as an `f64`; exact for every exponent used here.
#[inline]
pub fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

/// The dyadic interval `[n·2^k, (n+1)·2^k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct DyadicInterval {
    pub scale: i32,
    pub pos: i64,
}

impl DyadicInterval {
    pub const fn new(scale: i32, pos: i64) -> Self {
        Self { scale, pos }
    }

    pub fn length(&self) -> f64 {
        pow2(self.scale)
    }

    pub fn left(&self) -> f64 {
        self.pos as f64 * pow2(self.scale)
    }

    pub fn right(&self) -> f64 {
        (self.pos + 1) as f64 * pow2(self.scale)
    }

    pub fn center(&self) -> f64 {
        (self.pos as f64 + 0.5) * pow2(self.scale)
    }

    pub fn parent(&self) -> Self {
        Self::new(self.scale + 1, self.pos.div_euclid(2))
    }

    pub fn children(&self) -> [Self; 2] {
        [
            Self::new(self.scale - 1, 2 * self.pos),
            Self::new(self.scale - 1, 2 * self.pos + 1),
        ]
    }

    /// The ancestor at scale `k >= self.scale`.
    pub fn ancestor(&self, k: i32) -> Self {
        debug_assert!(k >= self.scale);
        let shift = (k - self.scale) as u32;
        Self::new(k, self.pos >> shift)
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &Self) -> bool {
        other.scale <= self.scale && other.ancestor(self.scale).pos == self.pos
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.contains(other) || other.contains(self)
    }

    /// Whether the point `x` lies in the interval.
    pub fn contains_point(&self, x: f64) -> bool {
        x >= self.left() && x < self.right()
    }

    /// Left endpoint and length in units of cells of scale `cell_scale`.
    pub fn cell_span(&self, cell_scale: i32) -> Option<(i64, i64)> {
        if self.scale < cell_scale {
            return None;
        }
        let shift = (self.scale - cell_scale) as u32;
        Some((self.pos << shift, 1i64 << shift))
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I(k={},n={})", self.scale, self.pos)
    }
}

/// `contains(a, b)`: true iff `b ⊆ a`.
pub fn contains(a: &DyadicInterval, b: &DyadicInterval) -> bool {
    a.contains(b)
}

/// A product `I × J` of dyadic intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct DyadicRectangle {
    pub x: DyadicInterval,
    pub y: DyadicInterval,
}

impl DyadicRectangle {
    pub const fn new(x: DyadicInterval, y: DyadicInterval) -> Self {
        Self { x, y }
    }

    pub fn area(&self) -> f64 {
        pow2(self.x.scale + self.y.scale)
    }

    pub fn contains(&self, other: &Self) -> bool {
        self.x.contains(&other.x) && self.y.contains(&other.y)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.x.intersects(&other.x) && self.y.intersects(&other.y)
    }
}

impl fmt::Display for DyadicRectangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R({} x {})", self.x, self.y)
    }
}

/// All dyadic subintervals of `[0, 2^box_exp)` with scales in `[k_min, k_max]`,
/// coarse scales first, then left to right.
pub fn enumerate_dyadic(box_exp: i32, k_min: i32, k_max: i32) -> Vec<DyadicInterval> {
    let mut out = Vec::new();
    if k_min > k_max {
        return out;
    }
    for k in (k_min..=k_max.min(box_exp)).rev() {
        let count = 1i64 << (box_exp - k);
        out.extend((0..count).map(|n| DyadicInterval::new(k, n)));
    }
    out
}

/// All products `I × J` of two interval lists, row-major in `xs`.
pub fn product_rectangles(xs: &[DyadicInterval], ys: &[DyadicInterval]) -> Vec<DyadicRectangle> {
    xs.iter()
        .flat_map(|&x| ys.iter().map(move |&y| DyadicRectangle::new(x, y)))
        .collect()
}

/// Exact area of a union of rectangles, in units of `cell²` where cells have
/// scale `cell_scale` on both axes.
pub fn union_area_cells(rects: &[DyadicRectangle], cell_scale_x: i32, cell_scale_y: i32) -> u64 {
    let spans: Vec<(i64, i64, i64, i64)> = rects
        .iter()
        .filter_map(|r| {
            let (x0, wx) = r.x.cell_span(cell_scale_x)?;
            let (y0, wy) = r.y.cell_span(cell_scale_y)?;
            Some((x0, x0 + wx, y0, y0 + wy))
        })
        .collect();
    if spans.is_empty() {
        return 0;
    }
    let mut xs: Vec<i64> = spans.iter().flat_map(|s| [s.0, s.1]).collect();
    xs.sort_unstable();
    xs.dedup();
    let mut total = 0u64;
    let mut segs: Vec<(i64, i64)> = Vec::new();
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        segs.clear();
        segs.extend(spans.iter().filter(|s| s.0 <= a && s.1 >= b).map(|s| (s.2, s.3)));
        if segs.is_empty() {
            continue;
        }
        segs.sort_unstable();
        let mut covered = 0i64;
        let (mut lo, mut hi) = segs[0];
        for &(s, e) in &segs[1..] {
            if s > hi {
                covered += hi - lo;
                lo = s;
                hi = e;
            } else if e > hi {
                hi = e;
            }
        }
        covered += hi - lo;
        total += (covered as u64) * ((b - a) as u64);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn containment_examples() {
        let unit = DyadicInterval::new(0, 0);
        assert!(contains(&unit, &DyadicInterval::new(-1, 0)));
        assert!(!contains(&unit, &DyadicInterval::new(0, 1)));
        // [0,4) ⊇ [2,3)
        assert!(contains(&DyadicInterval::new(2, 0), &DyadicInterval::new(0, 2)));
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(enumerate_dyadic(0, 0, 0), vec![DyadicInterval::new(0, 0)]);
        assert_eq!(
            enumerate_dyadic(0, -1, 0),
            vec![
                DyadicInterval::new(0, 0),
                DyadicInterval::new(-1, 0),
                DyadicInterval::new(-1, 1)
            ]
        );
        assert_eq!(enumerate_dyadic(1, -1, 1).len(), 7);
    }

    #[test]
    fn negative_positions_have_consistent_parents() {
        let i = DyadicInterval::new(-2, -3);
        assert_eq!(i.parent(), DyadicInterval::new(-1, -2));
        assert!(i.parent().contains(&i));
    }

    #[test]
    fn union_area_of_overlapping_rectangles() {
        let r1 = DyadicRectangle::new(DyadicInterval::new(1, 0), DyadicInterval::new(0, 0));
        let r2 = DyadicRectangle::new(DyadicInterval::new(0, 1), DyadicInterval::new(1, 0));
        // r1 = [0,2)x[0,1) area 2, r2 = [1,2)x[0,2) area 2, overlap [1,2)x[0,1) area 1
        assert_eq!(union_area_cells(&[r1, r2], 0, 0), 3);
        assert_eq!(union_area_cells(&[r1, r1], -1, -1), 8);
    }
}
