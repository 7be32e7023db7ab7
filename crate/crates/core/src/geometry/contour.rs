use std::collections::VecDeque;

use super::{GeometryError, Point};
use crate::imgio::BinaryMask;

/// Moore neighbourhood, clockwise as displayed, starting east.
const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Ordered closed boundary through pixel centers.
///
/// Traced contours run counter-clockwise as displayed (negative shoelace area in
/// raw image coordinates) and consecutive points are 8-neighbours. A one- or
/// two-pixel component yields a degenerate contour with fewer than three points.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub points: Vec<Point>,
    pub closed: bool,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.points.len() < 3
    }

    /// Shoelace sum in raw image coordinates (y down).
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        let mut s = 0.0;
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            s += a.x * b.y - b.x * a.y;
        }
        0.5 * s
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.points.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
        )
    }
}

/// One 8-connected foreground component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Label in the map returned by [`label_components`] (never 0).
    pub label: u32,
    pub area: usize,
    /// First pixel in row-major order.
    pub first: (usize, usize),
}

/// 8-connected labelling. Returns the label map (0 = background) and the
/// components sorted by descending area, ties by first pixel in row-major order.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<Component>) {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        let label = comps.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut area = 0;
        while let Some(i) = queue.pop_front() {
            area += 1;
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in DIRS {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if labels[j] == 0 {
                        labels[j] = label;
                        queue.push_back(j);
                    }
                }
            }
        }
        comps.push(Component {
            label,
            area,
            first: (start % w, start / w),
        });
    }
    // discovery order is row-major order of first pixels, so a stable sort keeps the tie-break
    comps.sort_by(|a, b| b.area.cmp(&a.area));
    (labels, comps)
}

/// Keeps only the largest 8-connected component.
pub fn largest_component(mask: &BinaryMask) -> Result<BinaryMask, GeometryError> {
    let (labels, comps) = label_components(mask);
    let best = comps.first().ok_or(GeometryError::EmptyInput)?.label;
    let (w, h) = mask.dims();
    let data = labels.iter().map(|&l| l == best).collect();
    Ok(BinaryMask::from_bits(w, h, data).expect("dimensions unchanged"))
}

/// Outer boundary of every 8-connected component, largest component first.
pub fn extract_contours(mask: &BinaryMask) -> Result<Vec<Contour>, GeometryError> {
    let (labels, comps) = label_components(mask);
    if comps.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let w = mask.width();
    let h = mask.height();
    Ok(comps
        .iter()
        .map(|c| trace(&labels, w, h, c))
        .collect())
}

/// Moore-neighbour tracing from the component's first row-major pixel, stopping
/// when the start pixel is re-entered with the same outgoing move.
fn trace(labels: &[u32], w: usize, h: usize, comp: &Component) -> Contour {
    let inside = |x: i64, y: i64| {
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && labels[y as usize * w + x as usize] == comp.label
    };
    let start = (comp.first.0 as i64, comp.first.1 as i64);
    let mut pixels = vec![start];
    let mut cur = start;
    // the west neighbour of the first row-major pixel is never part of the component
    let mut back = (start.0 - 1, start.1);
    let mut second: Option<(i64, i64)> = None;
    let limit = 4 * comp.area + 8;

    for _ in 0..limit {
        let bd = dir_index(back.0 - cur.0, back.1 - cur.1);
        let mut next = None;
        for k in 1..=8 {
            let d = (bd + k) % 8;
            let cand = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
            if inside(cand.0, cand.1) {
                let p = DIRS[(bd + k - 1) % 8];
                next = Some((cand, (cur.0 + p.0, cur.1 + p.1)));
                break;
            }
        }
        let Some((n, nb)) = next else {
            break; // isolated pixel
        };
        match second {
            None => second = Some(n),
            Some(s) if cur == start && n == s => break,
            Some(_) => {}
        }
        pixels.push(n);
        back = nb;
        cur = n;
    }
    if pixels.len() > 1 && pixels.last() == Some(&start) {
        pixels.pop();
    }
    // tracing ran clockwise as displayed; flip to counter-clockwise keeping the start first
    pixels[1..].reverse();
    Contour {
        points: pixels
            .into_iter()
            .map(|(x, y)| Point::new(x as f64, y as f64))
            .collect(),
        closed: true,
    }
}

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("backtrack pixel is always a Moore neighbour")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent flood-fill component sizes (recursive DFS over an explicit stack).
    fn oracle_components(mask: &BinaryMask) -> Vec<usize> {
        let (w, h) = mask.dims();
        let mut seen = vec![false; w * h];
        let mut sizes = vec![];
        for y in 0..h {
            for x in 0..w {
                if !mask.get(x, y) || seen[y * w + x] {
                    continue;
                }
                let mut stack = vec![(x, y)];
                seen[y * w + x] = true;
                let mut n = 0;
                while let Some((cx, cy)) = stack.pop() {
                    n += 1;
                    for ny in cy.saturating_sub(1)..=(cy + 1).min(h - 1) {
                        for nx in cx.saturating_sub(1)..=(cx + 1).min(w - 1) {
                            if mask.get(nx, ny) && !seen[ny * w + nx] {
                                seen[ny * w + nx] = true;
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
                sizes.push(n);
            }
        }
        sizes
    }

    fn random_mask(w: usize, h: usize, seed: u64, density: u64) -> BinaryMask {
        let mut s = seed | 1;
        BinaryMask::from_fn(w, h, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            s % 100 < density
        })
        .unwrap()
    }

    #[test]
    fn single_pixel_loop() {
        let m = BinaryMask::from_ascii("000\n010\n000").unwrap();
        let cs = extract_contours(&m).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].points, vec![Point::new(1., 1.)]);
        assert!(cs[0].is_degenerate());
    }

    #[test]
    fn filled_square_bbox() {
        let m = BinaryMask::from_fn(16, 16, |x, y| (3..13).contains(&x) && (2..12).contains(&y)).unwrap();
        let cs = extract_contours(&m).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].bbox(), (3., 2., 12., 11.));
        assert_eq!(cs[0].len(), 36);
        assert!(cs[0].signed_area() < 0.0);
    }

    #[test]
    fn two_squares_larger_first() {
        // 5x5 at left, 5x5 minus one corner at right
        let m = BinaryMask::from_fn(14, 7, |x, y| {
            let a = (1..6).contains(&x) && (1..6).contains(&y);
            let b = (8..13).contains(&x) && (1..6).contains(&y) && !(x == 8 && y == 1);
            a || b
        })
        .unwrap();
        let sizes = oracle_components(&m);
        assert_eq!(sizes, vec![25, 24]);
        let cs = extract_contours(&m).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].bbox().0, 1.0);
        assert_eq!(cs[1].bbox().0, 8.0);
    }

    #[test]
    fn empty_mask_errors() {
        let m = BinaryMask::new(4, 4).unwrap();
        assert_eq!(extract_contours(&m), Err(GeometryError::EmptyInput));
        assert_eq!(largest_component(&m), Err(GeometryError::EmptyInput));
    }

    #[test]
    fn largest_component_cases() {
        let single = BinaryMask::from_ascii("0110\n0110\n0000").unwrap();
        assert_eq!(largest_component(&single).unwrap(), single);

        let m = BinaryMask::from_ascii(
            "11111000
             11111001
             00000001
             00000001",
        )
        .unwrap();
        assert_eq!(oracle_components(&m), vec![10, 3]);
        let big = largest_component(&m).unwrap();
        assert_eq!(big.foreground_count(), 10);
        assert!(!big.get(7, 1));

        // equal sizes: the component containing (0,0) wins over the one at (0,5)
        let tie = BinaryMask::from_fn(3, 7, |x, y| (y == 0 || y == 5) && x < 2).unwrap();
        let kept = largest_component(&tie).unwrap();
        assert!(kept.get(0, 0) && !kept.get(0, 5));
    }

    #[test]
    fn thin_diagonal_line() {
        let m = BinaryMask::from_fn(6, 6, |x, y| x == y).unwrap();
        let cs = extract_contours(&m).unwrap();
        assert_eq!(cs.len(), 1);
        // out along the diagonal and back
        assert_eq!(cs[0].len(), 10);
    }

    proptest! {
        #[test]
        fn contour_invariants(w in 3usize..20, h in 3usize..20, seed in any::<u64>(), density in 20u64..70) {
            let m = random_mask(w, h, seed, density);
            prop_assume!(!m.is_blank());
            let cs = extract_contours(&m).unwrap();
            let sizes = oracle_components(&m);
            prop_assert_eq!(cs.len(), sizes.len());
            let (_, comps) = label_components(&m);
            let mut sorted = sizes.clone();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            prop_assert_eq!(comps.iter().map(|c| c.area).collect::<Vec<_>>(), sorted);
            for c in &cs {
                for (i, p) in c.points.iter().enumerate() {
                    let (x, y) = (p.x as i64, p.y as i64);
                    prop_assert!(m.get(x as usize, y as usize));
                    let on_border = x == 0 || y == 0 || x == w as i64 - 1 || y == h as i64 - 1;
                    let bg4 = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                        .iter()
                        .any(|(dx, dy)| !m.get_signed(x + dx, y + dy));
                    prop_assert!(on_border || bg4, "({x},{y}) is interior");
                    let q = c.points[(i + 1) % c.len()];
                    prop_assert!(p.dist(q) <= std::f64::consts::SQRT_2 + 1e-12);
                }
            }
        }

        #[test]
        fn blobs_trace_counter_clockwise(cx in 6.0f64..14.0, cy in 6.0f64..14.0, r in 3.0f64..5.5) {
            let m = BinaryMask::from_fn(20, 20, |x, y| {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                dx * dx + dy * dy <= r * r
            }).unwrap();
            let cs = extract_contours(&m).unwrap();
            prop_assert!(cs[0].signed_area() < 0.0);
        }
    }
}
