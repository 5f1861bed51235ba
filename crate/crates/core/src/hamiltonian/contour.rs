//! Marching-squares level curves on a regular grid.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Result, RtmError};

/// Regular grid of `nx × ny` nodes spanning the two closed ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 < r.1;
        if !ok(x_range) || !ok(y_range) {
            return Err(RtmError::Invalid("grid ranges must be finite and increasing".into()));
        }
        if nx < 2 || ny < 2 {
            return Err(RtmError::Invalid("grid needs at least 2 nodes per axis".into()));
        }
        Ok(Self { x_range, y_range, nx, ny })
    }

    fn x(&self, i: usize) -> f64 {
        self.x_range.0 + (self.x_range.1 - self.x_range.0) * i as f64 / (self.nx - 1) as f64
    }

    fn y(&self, j: usize) -> f64 {
        self.y_range.0 + (self.y_range.1 - self.y_range.0) * j as f64 / (self.ny - 1) as f64
    }

    /// Node values in row-major order (`j` slow), rows evaluated in parallel.
    pub fn sample<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        (0..self.ny)
            .into_par_iter()
            .flat_map_iter(|j| {
                let y = self.y(j);
                (0..self.nx).map(move |i| (i, y))
            })
            .map(|(i, y)| f(self.x(i), y))
            .collect()
    }
}

/// One connected piece of a level set; closed when the first and last points coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub level: f64,
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

// Edge ids: horizontal edge from node (i,j) is 2k, vertical edge is 2k+1, k = j·nx + i.
fn h_edge(g: &Grid, i: usize, j: usize) -> usize {
    2 * (j * g.nx + i)
}

fn v_edge(g: &Grid, i: usize, j: usize) -> usize {
    2 * (j * g.nx + i) + 1
}

/// Level curves `f = level` of the sampled field.
///
/// Ambiguous saddle cells are split using the mean of the four corners.
/// The output order depends only on the grid, so it is deterministic.
pub fn contour_lines(grid: &Grid, values: &[f64], level: f64) -> Result<Vec<Polyline>> {
    if values.len() != grid.nx * grid.ny {
        return Err(RtmError::Invalid("value count does not match the grid".into()));
    }
    let v = |i: usize, j: usize| values[j * grid.nx + i] - level;
    let crossing = |e: usize| -> (f64, f64) {
        let k = e / 2;
        let (i, j) = (k % grid.nx, k / grid.nx);
        let (a, b, (x0, y0), (x1, y1)) = if e % 2 == 0 {
            (v(i, j), v(i + 1, j), (grid.x(i), grid.y(j)), (grid.x(i + 1), grid.y(j)))
        } else {
            (v(i, j), v(i, j + 1), (grid.x(i), grid.y(j)), (grid.x(i), grid.y(j + 1)))
        };
        let t = if a == b { 0.5 } else { a / (a - b) };
        (x0 + t * (x1 - x0), y0 + t * (y1 - y0))
    };

    let mut segments: Vec<(usize, usize)> = Vec::new();
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
            if c.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let code = c.iter().enumerate().fold(0u8, |acc, (k, &x)| acc | (((x > 0.0) as u8) << k));
            // edges: bottom, right, top, left
            let (b, r, t, l) = (h_edge(grid, i, j), v_edge(grid, i + 1, j), h_edge(grid, i, j + 1), v_edge(grid, i, j));
            let centre = 0.25 * c.iter().sum::<f64>();
            match code {
                0 | 15 => {}
                1 | 14 => segments.push((l, b)),
                2 | 13 => segments.push((b, r)),
                3 | 12 => segments.push((l, r)),
                4 | 11 => segments.push((r, t)),
                6 | 9 => segments.push((b, t)),
                7 | 8 => segments.push((l, t)),
                5 => {
                    if centre > 0.0 {
                        segments.push((l, t));
                        segments.push((b, r));
                    } else {
                        segments.push((l, b));
                        segments.push((r, t));
                    }
                }
                10 => {
                    if centre > 0.0 {
                        segments.push((l, b));
                        segments.push((r, t));
                    } else {
                        segments.push((l, t));
                        segments.push((b, r));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let mut incident: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        incident.entry(a).or_default().push(s);
        incident.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];

    let walk = |start_edge: usize, first: usize, used: &mut [bool]| -> Vec<usize> {
        let mut edges = vec![start_edge];
        let mut seg = first;
        let mut at = start_edge;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            edges.push(next);
            at = next;
            match incident[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        edges
    };

    let mut out = Vec::new();
    // open chains start at edges touched by a single segment
    let ends: Vec<usize> = incident.iter().filter(|(_, s)| s.len() == 1).map(|(&e, _)| e).collect();
    for e in ends {
        let s = incident[&e][0];
        if used[s] {
            continue;
        }
        let edges = walk(e, s, &mut used);
        out.push(Polyline { level, points: edges.into_iter().map(crossing).collect(), closed: false });
    }
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        let edges = walk(segments[s].0, s, &mut used);
        let closed = edges.first() == edges.last();
        out.push(Polyline { level, points: edges.into_iter().map(crossing).collect(), closed });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_is_one_closed_loop() {
        let g = Grid::new((-1.0, 1.0), (-1.0, 1.0), 201, 201).unwrap();
        let vals = g.sample(|x, y| x * x + y * y);
        let lines = contour_lines(&g, &vals, 0.25).unwrap();
        assert_eq!(lines.len(), 1);
        let l = &lines[0];
        assert!(l.closed);
        for &(x, y) in &l.points {
            assert!(((x * x + y * y).sqrt() - 0.5).abs() < 1e-3);
        }
        // shoelace area against pi r^2
        let a: f64 = l.points.windows(2).map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1).sum::<f64>() * 0.5;
        assert!((a.abs() - std::f64::consts::PI * 0.25).abs() < 1e-3);
    }

    #[test]
    fn line_crossing_the_box_is_open() {
        let g = Grid::new((0.0, 1.0), (0.0, 1.0), 11, 11).unwrap();
        let vals = g.sample(|x, y| x + 2.0 * y);
        let lines = contour_lines(&g, &vals, 1.0).unwrap();
        assert_eq!(lines.len(), 1);
        assert!(!lines[0].closed);
        for &(x, y) in &lines[0].points {
            assert!((x + 2.0 * y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_blobs_two_loops_and_no_level() {
        let g = Grid::new((-2.0, 2.0), (-1.0, 1.0), 161, 81).unwrap();
        let vals = g.sample(|x, y| ((x - 1.0).powi(2) + y * y).min((x + 1.0).powi(2) + y * y));
        assert_eq!(contour_lines(&g, &vals, 0.2).unwrap().len(), 2);
        assert!(contour_lines(&g, &vals, -1.0).unwrap().is_empty());
        assert!(contour_lines(&g, &vals[1..], 0.2).is_err());
        assert!(Grid::new((0.0, 0.0), (0.0, 1.0), 3, 3).is_err());
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let g = Grid::new((-1.0, 1.0), (-1.0, 1.0), 301, 301).unwrap();
        let f = |x: f64, y: f64| (3.0 * x).sin() * (2.0 * y).cos() + 0.1 * x * y;
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| contour_lines(&g, &g.sample(f), 0.3).unwrap());
        let b = three.install(|| contour_lines(&g, &g.sample(f), 0.3).unwrap());
        assert_eq!(a, b);
    }
}
