//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

/// Exhaustive Otsu: minimizes within-class variance using exact integer
/// arithmetic. `N * sigma_w^2 = sum_k (n_k * S2_k - S1_k^2) / n_k`, compared as
/// rationals. Returns the smallest minimizing background bin.
pub fn otsu_exhaustive(hist: &[u64]) -> Option<usize> {
    let class = |range: std::ops::Range<usize>| -> (i128, i128) {
        let (mut n, mut s1, mut s2) = (0i128, 0i128, 0i128);
        for i in range {
            let c = hist[i] as i128;
            let x = i as i128;
            n += c;
            s1 += c * x;
            s2 += c * x * x;
        }
        (n * s2 - s1 * s1, n)
    };
    let mut best: Option<(usize, (i128, i128))> = None;
    for t in 0..hist.len().saturating_sub(1) {
        let (a, b) = class(0..t + 1);
        let (c, d) = class(t + 1..hist.len());
        if b == 0 || d == 0 {
            continue;
        }
        // a/b + c/d as a single fraction
        let val = (a * d + c * b, b * d);
        match best {
            Some((_, (bn, bd))) if val.0 * bd >= bn * val.1 => {}
            _ => best = Some((t, val)),
        }
    }
    best.map(|(t, _)| t)
}

/// BFS flood fill over 8-neighbourhoods; labels in raster-scan discovery order.
pub fn flood_fill_labels(fg: &[bool], w: usize, h: usize) -> (Vec<u32>, u32) {
    let mut labels = vec![0u32; w * h];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !fg[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if fg[j] && labels[j] == 0 {
                        labels[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    (labels, next)
}

/// True when two labelings induce the same partition of the foreground.
pub fn same_partition(a: &[u32], b: &[u32]) -> bool {
    use std::collections::HashMap;
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        if (x == 0) != (y == 0) {
            return false;
        }
        x == 0 || (*fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
    })
}

/// Student t CDF by quadrature. With `x = sqrt(df) tan(theta)` the density
/// becomes proportional to `cos^(df-1)(theta)` on `(-pi/2, pi/2)`, so the CDF is
/// `1/2 + I(atan(t/sqrt(df))) / (2 I(pi/2))` with `I(u) = int_0^u cos^(df-1)`.
pub fn t_cdf_quadrature(t: f64, df: f64) -> f64 {
    let f = |th: f64| th.cos().max(0.0).powf(df - 1.0);
    let half = simpson(f, 0.0, std::f64::consts::FRAC_PI_2, 20_000);
    let u = (t / df.sqrt()).atan();
    0.5 + simpson(f, 0.0, u, 20_000) / (2.0 * half)
}

pub fn t_two_sided_quadrature(t: f64, df: f64) -> f64 {
    2.0 * (1.0 - t_cdf_quadrature(t.abs(), df))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Lattice points inside or on the convex hull of `pts`, by brute force: a
/// point is in the hull iff it lies in a triangle or on a segment of set points.
pub fn hull_lattice_count(pts: &[(i64, i64)]) -> usize {
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let on_segment = |p: (i64, i64), a: (i64, i64), b: (i64, i64)| {
        cross(a, b, p) == 0
            && p.0 >= a.0.min(b.0)
            && p.0 <= a.0.max(b.0)
            && p.1 >= a.1.min(b.1)
            && p.1 <= a.1.max(b.1)
    };
    let in_triangle = |p: (i64, i64), a, b, c| {
        let d1 = cross(a, b, p);
        let d2 = cross(b, c, p);
        let d3 = cross(c, a, p);
        let neg = d1 < 0 || d2 < 0 || d3 < 0;
        let pos = d1 > 0 || d2 > 0 || d3 > 0;
        !(neg && pos)
    };
    let (x0, x1) = (pts.iter().map(|p| p.0).min().unwrap(), pts.iter().map(|p| p.0).max().unwrap());
    let (y0, y1) = (pts.iter().map(|p| p.1).min().unwrap(), pts.iter().map(|p| p.1).max().unwrap());
    let mut count = 0;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let p = (x, y);
            let mut inside = pts.contains(&p);
            'outer: for i in 0..pts.len() {
                if inside {
                    break;
                }
                for j in i + 1..pts.len() {
                    if on_segment(p, pts[i], pts[j]) {
                        inside = true;
                        break 'outer;
                    }
                    for k in j + 1..pts.len() {
                        if cross(pts[i], pts[j], pts[k]) != 0 && in_triangle(p, pts[i], pts[j], pts[k]) {
                            inside = true;
                            break 'outer;
                        }
                    }
                }
            }
            count += inside as usize;
        }
    }
    count
}

/// Pixels of a filled axis-aligned ellipse with semi-axes `a`, `b`.
pub fn ellipse_pixels(a: f64, b: f64) -> Vec<(usize, usize)> {
    let (ra, rb) = (a.ceil() as i64, b.ceil() as i64);
    let mut px = Vec::new();
    for y in -rb..=rb {
        for x in -ra..=ra {
            let (fx, fy) = (x as f64 / a, y as f64 / b);
            if fx * fx + fy * fy <= 1.0 {
                px.push(((x + ra) as usize, (y + rb) as usize));
            }
        }
    }
    px
}
