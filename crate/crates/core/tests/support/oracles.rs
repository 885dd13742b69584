//! Brute-force reference implementations used only by tests.
//!
//! Nothing here calls into the library's morphology, classification or
//! eigen-solver code paths.

#![allow(dead_code)]

use std::collections::VecDeque;

use granulom_core::imagecore::GreyImage;
use granulom_core::morphology::Family;

/// Unit neighbour offsets written out by hand, indexed by row parity.
fn unit_offsets(family: Family, y: i64) -> Vec<(i64, i64)> {
    match family {
        Family::Square => vec![(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
        Family::Diamond => vec![(0, -1), (-1, 0), (1, 0), (0, 1)],
        Family::Hexagon if y.rem_euclid(2) == 0 => {
            // E, W, NE, N, SE, S
            vec![(1, 0), (-1, 0), (1, -1), (0, -1), (1, 1), (0, 1)]
        }
        Family::Hexagon => vec![(1, 0), (-1, 0), (-1, -1), (0, -1), (-1, 1), (0, 1)],
    }
}

/// Ball of radius `r` around `(cx, cy)` on the unbounded grid, by breadth-first search.
pub fn ball(family: Family, cx: i64, cy: i64, r: usize) -> Vec<(i64, i64)> {
    let side = 2 * r as i64 + 1;
    let idx = |x: i64, y: i64| ((y - cy + r as i64) * side + (x - cx + r as i64)) as usize;
    let mut dist = vec![usize::MAX; (side * side) as usize];
    let mut queue = VecDeque::from([(cx, cy)]);
    dist[idx(cx, cy)] = 0;
    let mut out = Vec::new();
    while let Some((x, y)) = queue.pop_front() {
        let d = dist[idx(x, y)];
        out.push((x, y));
        if d == r {
            continue;
        }
        for (dx, dy) in unit_offsets(family, y) {
            let (nx, ny) = (x + dx, y + dy);
            if (nx - cx).abs() > r as i64 || (ny - cy).abs() > r as i64 {
                continue;
            }
            if dist[idx(nx, ny)] == usize::MAX {
                dist[idx(nx, ny)] = d + 1;
                queue.push_back((nx, ny));
            }
        }
    }
    out
}

/// Ball clipped to the image frame.
fn clipped_ball(family: Family, w: usize, h: usize, x: usize, y: usize, r: usize) -> Vec<(usize, usize)> {
    ball(family, x as i64, y as i64, r)
        .into_iter()
        .filter(|&(px, py)| px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h)
        .map(|(px, py)| (px as usize, py as usize))
        .collect()
}

/// Grey opening as the supremum of minima over every translate that covers a pixel.
pub fn open_by_translation(f: &GreyImage, family: Family, r: usize) -> GreyImage {
    let (w, h) = (f.width(), f.height());
    let mut out = GreyImage::filled(w, h, 0);
    for cy in 0..h {
        for cx in 0..w {
            let b = clipped_ball(family, w, h, cx, cy, r);
            let m = b.iter().map(|&(x, y)| f.get(x, y)).min().unwrap();
            for &(x, y) in &b {
                if out.get(x, y) < m {
                    out.set(x, y, m);
                }
            }
        }
    }
    out
}

/// Grey closing by duality with the translation opening.
pub fn close_by_translation(f: &GreyImage, family: Family, r: usize) -> GreyImage {
    open_by_translation(&f.complement(), family, r).complement()
}

/// Numerators `V[f] - V[open_r f]` of the opening granulometry for `r in 0..=r_max`.
pub fn granulometry_removed(f: &GreyImage, family: Family, r_max: usize) -> Vec<u64> {
    let v = |g: &GreyImage| g.data().iter().map(|&p| p as u64).sum::<u64>();
    let total = v(f);
    (0..=r_max).map(|r| total - v(&open_by_translation(f, family, r))).collect()
}

/// Area of the binary opening of `mask` by `B(r)`.
pub fn binary_opening_area(mask: &[bool], w: usize, h: usize, family: Family, r: usize) -> u64 {
    let mut covered = vec![false; w * h];
    for cy in 0..h {
        for cx in 0..w {
            let b = clipped_ball(family, w, h, cx, cy, r);
            if b.iter().all(|&(x, y)| mask[y * w + x]) {
                for (x, y) in b {
                    covered[y * w + x] = true;
                }
            }
        }
    }
    covered.iter().filter(|&&c| c).count() as u64
}

/// Size-intensity table by opening the umbra `{(x, z) : 1 <= z <= f(x)}` with
/// the cylinder `B(r) x {1..k}` and counting columns that keep any voxel.
/// Returned as `table[r][k - 1]`.
pub fn size_intensity_umbra(f: &GreyImage, family: Family, r_max: usize, k_max: u8) -> Vec<Vec<u64>> {
    let (w, h) = (f.width(), f.height());
    let top = *f.data().iter().max().unwrap() as usize;
    let z_max = top.max(k_max as usize);
    let inside = |x: usize, y: usize, z: usize| z >= 1 && z <= f.get(x, y) as usize;
    let mut table = Vec::new();
    for r in 0..=r_max {
        let mut row = Vec::new();
        for k in 1..=k_max as usize {
            let mut opened = vec![vec![false; z_max + 1]; w * h];
            for cy in 0..h {
                for cx in 0..w {
                    let b = clipped_ball(family, w, h, cx, cy, r);
                    for t in 0..=z_max.saturating_sub(k) {
                        let fits = b
                            .iter()
                            .all(|&(x, y)| (t + 1..=t + k).all(|z| inside(x, y, z)));
                        if fits {
                            for &(x, y) in &b {
                                for z in t + 1..=t + k {
                                    opened[y * w + x][z] = true;
                                }
                            }
                        }
                    }
                }
            }
            row.push(opened.iter().filter(|col| col.iter().any(|&v| v)).count() as u64);
        }
        table.push(row);
    }
    table
}

/// `|{x : f(x) >= k}|` for `k in 1..=k_max`.
pub fn survival_counts(f: &GreyImage, k_max: u8) -> Vec<u64> {
    (1..=k_max)
        .map(|k| f.data().iter().filter(|&&v| v >= k).count() as u64)
        .collect()
}

/// Labels of a brute-force k-NN: returns `(label, neighbour indices)`.
///
/// Neighbours are ordered by (squared distance, sample id); the vote is a
/// plurality, ties go to whichever tied class appears first in that order.
pub fn knn_brute(
    train: &[(String, String, Vec<f64>)],
    query: &[f64],
    k: usize,
    mask: &[bool],
) -> (String, Vec<usize>) {
    let mut scored: Vec<(f64, &str, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, (id, _, v))| {
            let mut d = 0.0;
            for j in 0..v.len() {
                if mask[j] {
                    d += (v[j] - query[j]) * (v[j] - query[j]);
                }
            }
            (d, id.as_str(), i)
        })
        .collect();
    // plain insertion sort keeps this independent of the library's ordering code
    for i in 1..scored.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (&scored[j - 1], &scored[j]);
            let swap = b.0 < a.0 || (b.0 == a.0 && b.1 < a.1);
            if !swap {
                break;
            }
            scored.swap(j - 1, j);
            j -= 1;
        }
    }
    let picked: Vec<usize> = scored[..k].iter().map(|s| s.2).collect();
    let labels: Vec<&str> = picked.iter().map(|&i| train[i].1.as_str()).collect();
    let mut best = labels[0];
    let mut best_votes = 0;
    for &l in &labels {
        let votes = labels.iter().filter(|&&m| m == l).count();
        if votes > best_votes {
            best = l;
            best_votes = votes;
        }
    }
    (best.to_owned(), picked)
}

/// Real roots of a symmetric matrix's characteristic polynomial.
///
/// The polynomial comes from Faddeev-LeVerrier; roots are bracketed by sign
/// changes on a fine grid inside the Gershgorin bound and refined by bisection.
pub fn eigenvalues_charpoly(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    // coefficients c[0..=n] of det(lambda I - A) = sum c[i] lambda^(n-i)
    let mut c = vec![0.0; n + 1];
    c[0] = 1.0;
    let mut m = vec![vec![0.0; n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{k-1} I ; c_k = -tr(A M_k) / k
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += a[i][l] * m[l][j];
                }
                next[i][j] = s + if i == j { c[k - 1] } else { 0.0 };
            }
        }
        m = next;
        let mut tr = 0.0;
        for i in 0..n {
            for l in 0..n {
                tr += a[i][l] * m[l][i];
            }
        }
        c[k] = -tr / k as f64;
    }
    let p = |x: f64| c.iter().fold(0.0, |acc, &ci| acc * x + ci);
    let bound = (0..n)
        .map(|i| a[i].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut x0 = -bound;
    let mut p0 = p(x0);
    for s in 1..=steps {
        let x1 = -bound + 2.0 * bound * s as f64 / steps as f64;
        let p1 = p(x1);
        if p0 == 0.0 {
            roots.push(x0);
        } else if p0.signum() != p1.signum() && p1 != 0.0 {
            let (mut lo, mut hi) = (x0, x1);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if p(mid).signum() == p(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        p0 = p1;
    }
    roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
    roots
}
