//! Exact k-nearest-neighbour queries over a uniform bucket grid.
//!
//! Results are ordered by `(squared distance, input index)`, so ties at the
//! k-th distance always resolve to the lower input index. A query scans
//! square rings of buckets outwards from the anchor and stops once no
//! unvisited bucket can hold a point closer than the current k-th.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geo::{dist2, PlanarPoint};

/// Target mean occupancy of a bucket.
const POINTS_PER_BUCKET: f64 = 8.0;

#[derive(Debug, Clone)]
pub struct PointIndex {
    points: Vec<PlanarPoint>,
    origin: PlanarPoint,
    bucket: f64,
    nx: usize,
    ny: usize,
    /// CSR offsets into `items`, one slot per bucket plus a sentinel.
    starts: Vec<u32>,
    items: Vec<u32>,
}

/// A neighbour hit: input index and squared distance to the anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: u32,
    pub dist2: f64,
}

impl Neighbor {
    pub fn dist(&self) -> f64 {
        libm::sqrt(self.dist2)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, u32);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PointIndex {
    /// Builds the index; points must be finite.
    pub fn new(points: Vec<PlanarPoint>) -> Self {
        let n = points.len();
        if n == 0 {
            return PointIndex {
                points,
                origin: PlanarPoint::default(),
                bucket: 1.0,
                nx: 1,
                ny: 1,
                starts: vec![0, 0],
                items: Vec::new(),
            };
        }
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in &points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let (w, h) = (hi.x - lo.x, hi.y - lo.y);
        let mut bucket = libm::sqrt(w * h * POINTS_PER_BUCKET / n as f64);
        if !(bucket > 0.0) {
            bucket = w.max(h) * POINTS_PER_BUCKET / n as f64;
        }
        if !(bucket > 0.0) {
            bucket = 1.0;
        }
        let dims = |b: f64| ((w / b) as usize + 1, (h / b) as usize + 1);
        let (mut nx, mut ny) = dims(bucket);
        while nx.saturating_mul(ny) > 4 * n + 16 {
            bucket *= 2.0;
            (nx, ny) = dims(bucket);
        }

        let mut index = PointIndex {
            points,
            origin: lo,
            bucket,
            nx,
            ny,
            starts: vec![0; nx * ny + 1],
            items: Vec::new(),
        };
        let slots: Vec<usize> = index.points.iter().map(|p| index.slot(*p)).collect();
        for &s in &slots {
            index.starts[s + 1] += 1;
        }
        for i in 0..nx * ny {
            index.starts[i + 1] += index.starts[i];
        }
        let mut fill = index.starts.clone();
        index.items = vec![0; n];
        for (i, &s) in slots.iter().enumerate() {
            index.items[fill[s] as usize] = i as u32;
            fill[s] += 1;
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[PlanarPoint] {
        &self.points
    }

    fn col(&self, x: f64) -> usize {
        let c = libm::floor((x - self.origin.x) / self.bucket);
        if c <= 0.0 { 0 } else { (c as usize).min(self.nx - 1) }
    }

    fn row(&self, y: f64) -> usize {
        let r = libm::floor((y - self.origin.y) / self.bucket);
        if r <= 0.0 { 0 } else { (r as usize).min(self.ny - 1) }
    }

    fn slot(&self, p: PlanarPoint) -> usize {
        self.row(p.y) * self.nx + self.col(p.x)
    }

    fn bucket_items(&self, col: usize, row: usize) -> &[u32] {
        let b = row * self.nx + col;
        &self.items[self.starts[b] as usize..self.starts[b + 1] as usize]
    }

    fn scan(&self, col: usize, row: usize, anchor: PlanarPoint, k: usize, heap: &mut BinaryHeap<Key>) {
        for &i in self.bucket_items(col, row) {
            let key = Key(dist2(self.points[i as usize], anchor), i);
            if heap.len() < k {
                heap.push(key);
            } else if key < *heap.peek().expect("heap holds k items") {
                heap.pop();
                heap.push(key);
            }
        }
    }

    /// The `k` nearest points to `anchor` (fewer if the index holds fewer),
    /// sorted by `(distance, index)`.
    pub fn nearest(&self, anchor: PlanarPoint, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let k = k.min(self.points.len());
        let mut heap: BinaryHeap<Key> = BinaryHeap::with_capacity(k + 1);
        let (cc, cr) = (self.col(anchor.x) as i64, self.row(anchor.y) as i64);
        let slack = 1e-9 * (self.bucket + anchor.x.abs() + anchor.y.abs() + self.origin.x.abs() + self.origin.y.abs());
        let mut ring = 0i64;
        loop {
            let (c0, c1) = (cc - ring, cc + ring);
            let (r0, r1) = (cr - ring, cr + ring);
            for r in r0.max(0)..=r1.min(self.ny as i64 - 1) {
                if r == r0 || r == r1 {
                    for c in c0.max(0)..=c1.min(self.nx as i64 - 1) {
                        self.scan(c as usize, r as usize, anchor, k, &mut heap);
                    }
                } else {
                    if c0 >= 0 {
                        self.scan(c0 as usize, r as usize, anchor, k, &mut heap);
                    }
                    if c1 < self.nx as i64 {
                        self.scan(c1 as usize, r as usize, anchor, k, &mut heap);
                    }
                }
            }

            let covers_all = c0 <= 0 && r0 <= 0 && c1 >= self.nx as i64 - 1 && r1 >= self.ny as i64 - 1;
            if covers_all {
                break;
            }
            if heap.len() == k {
                // distance from the anchor to the nearest bucket not yet scanned
                let mut bound = f64::INFINITY;
                if c0 > 0 {
                    bound = bound.min(anchor.x - (self.origin.x + c0 as f64 * self.bucket));
                }
                if c1 < self.nx as i64 - 1 {
                    bound = bound.min(self.origin.x + (c1 + 1) as f64 * self.bucket - anchor.x);
                }
                if r0 > 0 {
                    bound = bound.min(anchor.y - (self.origin.y + r0 as f64 * self.bucket));
                }
                if r1 < self.ny as i64 - 1 {
                    bound = bound.min(self.origin.y + (r1 + 1) as f64 * self.bucket - anchor.y);
                }
                let bound = bound - slack;
                let kth = heap.peek().expect("heap holds k items").0;
                if bound > 0.0 && kth < bound * bound {
                    break;
                }
            }
            ring += 1;
        }
        let mut out: Vec<Neighbor> = heap
            .into_vec()
            .into_iter()
            .map(|Key(d2, i)| Neighbor { index: i, dist2: d2 })
            .collect();
        out.sort_by(|a, b| Key(a.dist2, a.index).cmp(&Key(b.dist2, b.index)));
        out
    }
}
