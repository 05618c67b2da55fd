//! Matrix grids and the lamination iteration for the rank-one convex
//! envelope.
//!
//! One sweep replaces every node value by the minimum, over the rank-one
//! directions, of the lower convex hull of the previous iterate along the
//! grid line through that node. Sweeps are Jacobi (double buffered), so the
//! result does not depend on line or direction order.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ymlab_core::transform::Integrand;

use crate::{ConvexityError, Mat2, Result};

/// Spatial point handed to `x`-independent integrands.
pub const X_REF: [f64; 2] = [0.5, 0.5];

/// Nodes per axis used when none is given.
pub const DEFAULT_NODES: usize = 33;

const MAX_NODES: usize = 4_000_000;

/// Integer step of a grid line, entries in `{-1, 0, 1}`.
pub type Direction = [i8; 4];

/// Dense scalar field on `center + [−H, H]^4`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGrid {
    center: Mat2,
    half_width: f64,
    n: usize,
    values: Vec<f64>,
}

impl MatrixGrid {
    pub fn from_values(center: Mat2, half_width: f64, n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 3 || n.is_multiple_of(2) {
            return Err(ConvexityError::Grid(format!("n_per_axis = {n} must be odd and >= 3")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(ConvexityError::Grid(format!("half width {half_width}")));
        }
        let count = n.pow(4);
        if count > MAX_NODES {
            return Err(ConvexityError::Grid(format!("{count} nodes exceeds {MAX_NODES}")));
        }
        if values.len() != count {
            return Err(ConvexityError::Grid(format!("{} values for {count} nodes", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ConvexityError::Grid(format!("non-finite value at node {i}")));
        }
        Ok(Self { center, half_width, n, values })
    }

    /// Samples `f` at every node.
    pub fn sample(f: &Integrand, center: Mat2, half_width: f64, n: usize) -> Result<Self> {
        if f.target_dim() != 4 {
            return Err(ConvexityError::NotMatrix(f.target_dim()));
        }
        let mut grid = Self::from_values(center, half_width, n, vec![0.0; n.pow(4)])?;
        let values: Vec<f64> = (0..grid.len()).into_par_iter().map(|i| f.eval(&X_REF, &grid.coords(i))).collect();
        grid.set_values(values)?;
        Ok(grid)
    }

    fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        *self = Self::from_values(self.center, self.half_width, self.n, values)?;
        Ok(())
    }

    pub fn center(&self) -> Mat2 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn center_index(&self) -> usize {
        let m = self.n / 2;
        self.index([m; 4])
    }

    pub fn index(&self, m: [usize; 4]) -> usize {
        m.iter().fold(0, |acc, &k| acc * self.n + k)
    }

    pub fn multi_index(&self, mut i: usize) -> [usize; 4] {
        let mut m = [0; 4];
        for k in (0..4).rev() {
            m[k] = i % self.n;
            i /= self.n;
        }
        m
    }

    pub fn coords(&self, i: usize) -> Mat2 {
        let m = self.multi_index(i);
        let h = self.step();
        std::array::from_fn(|k| self.center[k] - self.half_width + m[k] as f64 * h)
    }

    /// Node reached from `i` after `t` steps along `w`, if inside.
    pub fn shifted(&self, i: usize, w: Direction, t: isize) -> Option<usize> {
        let m = self.multi_index(i);
        let mut out = [0; 4];
        for k in 0..4 {
            let v = m[k] as isize + t * w[k] as isize;
            if v < 0 || v >= self.n as isize {
                return None;
            }
            out[k] = v as usize;
        }
        Some(self.index(out))
    }

    /// Multilinear interpolation, `None` outside the box.
    pub fn interpolate(&self, z: &[f64]) -> Option<f64> {
        let h = self.step();
        let mut base = [0usize; 4];
        let mut frac = [0.0; 4];
        for k in 0..4 {
            let u = (z[k] - self.center[k] + self.half_width) / h;
            if !(u >= -1e-12 && u <= (self.n - 1) as f64 + 1e-12) {
                return None;
            }
            let b = (u.floor().max(0.0) as usize).min(self.n - 2);
            base[k] = b;
            frac[k] = (u - b as f64).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        for corner in 0..16usize {
            let mut weight = 1.0;
            let mut m = base;
            for k in 0..4 {
                if corner >> k & 1 == 1 {
                    weight *= frac[k];
                    m[k] += 1;
                } else {
                    weight *= 1.0 - frac[k];
                }
            }
            if weight != 0.0 {
                acc += weight * self.values[self.index(m)];
            }
        }
        Some(acc)
    }
}

/// The sixteen directions `a⊗b` with `a, b ∈ {e1, e2, e1+e2, e1−e2}`, signed
/// so the first nonzero entry is positive.
pub fn rank_one_directions() -> Vec<Direction> {
    let vecs: [[i8; 2]; 4] = [[1, 0], [0, 1], [1, 1], [1, -1]];
    let mut out = Vec::with_capacity(16);
    for a in vecs {
        for b in vecs {
            let mut w = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]];
            if w.iter().find(|&&v| v != 0).is_some_and(|&v| v < 0) {
                w.iter_mut().for_each(|v| *v = -*v);
            }
            if !out.contains(&w) {
                out.push(w);
            }
        }
    }
    out
}

/// The four coordinate directions `e_i⊗e_j`.
pub fn axis_directions() -> Vec<Direction> {
    vec![[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
}

pub fn is_rank_one(w: Direction) -> bool {
    w.iter().any(|&v| v != 0) && (w[0] as i32 * w[3] as i32 == w[1] as i32 * w[2] as i32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub max_iters: usize,
    /// Stop once the largest node change in a sweep is at most this.
    pub tol_change: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self { max_iters: 64, tol_change: 0.0 }
    }
}

/// Fraction of updates above which the box is judged too small.
pub const CLAMP_WARNING_RATE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub iterations: usize,
    pub converged: bool,
    pub last_change: f64,
    /// Largest node change per sweep.
    pub changes: Vec<f64>,
    pub monotone: bool,
    pub updates: usize,
    /// Share of updates whose supporting hull segment ends on the box boundary.
    pub clamp_rate: f64,
    pub clamp_warning: bool,
}

struct Line {
    start: usize,
    len: usize,
}

fn lines(grid: &MatrixGrid, w: Direction) -> (isize, Vec<Line>) {
    let n = grid.n as isize;
    let stride = w.iter().fold(0isize, |acc, &v| acc * n + v as isize);
    let lines = (0..grid.len())
        .filter_map(|i| {
            if grid.shifted(i, w, -1).is_some() {
                return None;
            }
            let m = grid.multi_index(i);
            let len = (0..4)
                .filter_map(|k| match w[k] {
                    1 => Some(grid.n - m[k]),
                    -1 => Some(m[k] + 1),
                    _ => None,
                })
                .min()
                .unwrap_or(1);
            (len >= 3).then_some(Line { start: i, len })
        })
        .collect();
    (stride, lines)
}

/// Lower convex hull of `(t, v[t])` evaluated at every `t`, with a flag per
/// point telling whether its supporting segment touches either end.
fn lower_hull(v: &[f64], out: &mut Vec<(f64, bool)>) {
    let mut hull: Vec<usize> = Vec::with_capacity(v.len());
    for t in 0..v.len() {
        while let [.., a, b] = hull[..] {
            // drop b when it lies on or above the chord a–t
            if (v[b] - v[a]) * (t - a) as f64 >= (v[t] - v[a]) * (b - a) as f64 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(t);
    }
    out.clear();
    out.push((v[0], true));
    let last = v.len() - 1;
    for seg in hull.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let touches = a == 0 || b == last;
        for t in a + 1..=b {
            let h = if t == b { v[b] } else { v[a] + (v[b] - v[a]) * (t - a) as f64 / (b - a) as f64 };
            out.push((h, touches));
        }
    }
}

/// One Jacobi sweep. Returns `(next, max change, updates, clamped)`.
fn sweep(grid: &MatrixGrid, dirs: &[(isize, Vec<Line>)]) -> (Vec<f64>, f64, usize, usize) {
    let cur = &grid.values;
    let mut next = cur.clone();
    let (mut updates, mut clamped) = (0, 0);
    for (stride, lines) in dirs {
        let stride = *stride;
        let found: Vec<Vec<(usize, f64, bool)>> = lines
            .par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(vals, hull), line| {
                    vals.clear();
                    vals.extend((0..line.len).map(|t| cur[(line.start as isize + t as isize * stride) as usize]));
                    lower_hull(vals, hull);
                    hull.iter()
                        .enumerate()
                        .filter(|(t, (h, _))| *h < vals[*t] - 1e-14 * (1.0 + vals[*t].abs()))
                        .map(|(t, &(h, touches))| ((line.start as isize + t as isize * stride) as usize, h, touches))
                        .collect()
                },
            )
            .collect();
        for (i, h, touches) in found.into_iter().flatten() {
            updates += 1;
            clamped += touches as usize;
            if h < next[i] {
                next[i] = h;
            }
        }
    }
    let change = cur.iter().zip(&next).map(|(a, b)| a - b).fold(0.0, f64::max);
    (next, change, updates, clamped)
}

/// Lamination iteration on `f_grid` along `dirs` (rank-one, integer steps).
pub fn lamination_envelope(
    f_grid: &MatrixGrid,
    dirs: &[Direction],
    params: EnvelopeParams,
) -> Result<(MatrixGrid, EnvelopeReport)> {
    if let Some(w) = dirs.iter().find(|&&w| !is_rank_one(w) || w.iter().any(|v| v.abs() > 1)) {
        return Err(ConvexityError::Grid(format!("direction {w:?} is not a unit-step rank-one direction")));
    }
    let prepared: Vec<(isize, Vec<Line>)> = dirs.iter().map(|&w| lines(f_grid, w)).collect();
    let mut grid = f_grid.clone();
    let mut report = EnvelopeReport {
        iterations: 0,
        converged: false,
        last_change: 0.0,
        changes: Vec::new(),
        monotone: true,
        updates: 0,
        clamp_rate: 0.0,
        clamp_warning: false,
    };
    let mut clamped = 0;
    while report.iterations < params.max_iters {
        let (next, change, updates, clamps) = sweep(&grid, &prepared);
        report.monotone &= next.iter().zip(&grid.values).all(|(a, b)| a <= b);
        report.iterations += 1;
        report.updates += updates;
        report.changes.push(change);
        report.last_change = change;
        clamped += clamps;
        grid.values = next;
        if change <= params.tol_change {
            report.converged = true;
            break;
        }
    }
    if report.updates > 0 {
        report.clamp_rate = clamped as f64 / report.updates as f64;
    }
    report.clamp_warning = report.clamp_rate > CLAMP_WARNING_RATE;
    Ok((grid, report))
}

/// Largest violation of `g(z) ≤ t·g(z+(1−t)hw) + (1−t)·g(z−thw)` over all
/// nodes, directions and `t ∈ {¼, ½, ¾}`, with `h` four grid steps.
pub fn midpoint_violation(grid: &MatrixGrid, dirs: &[Direction]) -> f64 {
    const STENCILS: [(f64, isize, isize); 3] = [(0.25, 3, -1), (0.5, 2, -2), (0.75, 1, -3)];
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut worst = f64::NEG_INFINITY;
            for &w in dirs {
                for (t, up, down) in STENCILS {
                    if let (Some(a), Some(b)) = (grid.shifted(i, w, up), grid.shifted(i, w, down)) {
                        let rhs = t * grid.values[a] + (1.0 - t) * grid.values[b];
                        worst = worst.max(grid.values[i] - rhs);
                    }
                }
            }
            worst
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Per-node lower convex hull of `grid` along a single direction.
pub fn line_hull(grid: &MatrixGrid, w: Direction) -> Vec<f64> {
    let (stride, lines) = lines(grid, w);
    let mut out = grid.values.clone();
    let (mut vals, mut hull) = (Vec::new(), Vec::new());
    for line in lines {
        vals.clear();
        vals.extend((0..line.len).map(|t| grid.values[(line.start as isize + t as isize * stride) as usize]));
        lower_hull(&vals, &mut hull);
        for (t, (h, _)) in hull.iter().enumerate() {
            out[(line.start as isize + t as isize * stride) as usize] = *h;
        }
    }
    out
}

/// Header written next to the binary dump of an envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeHeader {
    #[serde(rename = "box")]
    pub bounds: [[f64; 2]; 4],
    pub n_per_axis: usize,
    pub k: Option<f64>,
    pub iters: usize,
    pub clamp_rate: f64,
}

impl EnvelopeHeader {
    pub fn new(grid: &MatrixGrid, k: Option<f64>, report: &EnvelopeReport) -> Self {
        let c = grid.center;
        let h = grid.half_width;
        Self {
            bounds: std::array::from_fn(|i| [c[i] - h, c[i] + h]),
            n_per_axis: grid.n,
            k,
            iters: report.iterations,
            clamp_rate: report.clamp_rate,
        }
    }
}

/// Writes `<stem>.bin` (little-endian `f64`, row-major node order) and
/// `<stem>.json`.
pub fn export(grid: &MatrixGrid, header: &EnvelopeHeader, stem: &Path) -> Result<()> {
    let bytes: Vec<u8> = grid.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(stem.with_extension("bin"), bytes)?;
    fs::write(stem.with_extension("json"), serde_json::to_string_pretty(header)?)?;
    Ok(())
}

pub fn import(stem: &Path) -> Result<(MatrixGrid, EnvelopeHeader)> {
    let header: EnvelopeHeader = serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
    let bytes = fs::read(stem.with_extension("bin"))?;
    if bytes.len() % 8 != 0 {
        return Err(ConvexityError::Grid("truncated binary grid".into()));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let center = header.bounds.map(|[lo, hi]| 0.5 * (lo + hi));
    let half_width = 0.5 * (header.bounds[0][1] - header.bounds[0][0]);
    let grid = MatrixGrid::from_values(center, half_width, header.n_per_axis, values)?;
    Ok((grid, header))
}

/// The envelope as an integrand: interpolated inside the box, `outside`
/// beyond it.
pub fn envelope_integrand(env: MatrixGrid, outside: Integrand, label: impl Into<String>) -> Result<Integrand> {
    let (p, c) = (outside.p(), outside.growth_c());
    Ok(Integrand::new(label, p, c, 4, move |x, z| match env.interpolate(z) {
        Some(v) => v,
        None => outside.eval(x, z),
    })?)
}

/// Envelope of `g_k` on `[−4k, 4k]^4`.
pub fn gk_envelope(k: f64, n: usize, params: EnvelopeParams) -> Result<(MatrixGrid, EnvelopeReport)> {
    let g = crate::integrands::muller_gk(k)?;
    let grid = MatrixGrid::sample(&g, [0.0; 4], 4.0 * k, n)?;
    lamination_envelope(&grid, &rank_one_directions(), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ymlab_core::transform::catalog;

    #[test]
    fn sixteen_rank_one_directions() {
        let dirs = rank_one_directions();
        assert_eq!(dirs.len(), 16);
        assert!(dirs.iter().all(|&w| is_rank_one(w)));
        assert!(!is_rank_one([1, 0, 0, 1]));
    }

    #[test]
    fn hull_of_concave_line_is_chord() {
        let v = [0.0, 3.0, 4.0, 3.0, 0.0];
        let mut out = Vec::new();
        lower_hull(&v, &mut out);
        assert!(out.iter().all(|(h, touches)| *h == 0.0 && *touches));
        let convex = [4.0, 1.0, 0.0, 1.0, 4.0];
        lower_hull(&convex, &mut out);
        assert_eq!(out.iter().map(|p| p.0).collect::<Vec<_>>(), convex);
    }

    #[test]
    fn indexing_round_trip_and_interpolation() {
        let f = catalog::affine(1.0, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let grid = MatrixGrid::sample(&f, [1.0, 0.0, 0.0, -1.0], 2.0, 5).unwrap();
        for i in [0, 17, 311, grid.len() - 1] {
            assert_eq!(grid.index(grid.multi_index(i)), i);
        }
        let z = [1.3, -0.7, 0.2, 0.4];
        let exact = f.eval(&X_REF, &z);
        assert!((grid.interpolate(&z).unwrap() - exact).abs() < 1e-12);
        assert!(grid.interpolate(&[4.0, 0.0, 0.0, 0.0]).is_none());
        assert_eq!(grid.coords(grid.center_index()), [1.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn convex_function_is_fixed() {
        let f = catalog::abs(4).unwrap();
        let grid = MatrixGrid::sample(&f, [0.0; 4], 1.0, 7).unwrap();
        let (env, report) = lamination_envelope(&grid, &rank_one_directions(), EnvelopeParams::default()).unwrap();
        assert!(report.converged);
        let diff = env.values().iter().zip(grid.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-6, "{diff}");
    }

    #[test]
    fn product_of_rank_one_coordinates_is_laminated_flat() {
        let f = Integrand::of_z("f11f12", 2.0, 1.0, 4, |z| z[0] * z[1]).unwrap();
        let grid = MatrixGrid::sample(&f, [0.0; 4], 1.0, 9).unwrap();
        let dirs = rank_one_directions();
        let (env, report) = lamination_envelope(&grid, &dirs, EnvelopeParams::default()).unwrap();
        assert!(report.monotone && report.converged);
        assert!(midpoint_violation(&env, &dirs) <= 1e-9);
        assert!(env.values().iter().zip(grid.values()).all(|(e, f)| e <= f));
    }

    #[test]
    fn export_round_trip() {
        let f = catalog::abs(4).unwrap();
        let grid = MatrixGrid::sample(&f, [0.0; 4], 1.0, 3).unwrap();
        let report = lamination_envelope(&grid, &axis_directions(), EnvelopeParams::default()).unwrap().1;
        let dir = std::env::temp_dir().join(format!("ymlab-env-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let stem = dir.join("abs");
        let header = EnvelopeHeader::new(&grid, None, &report);
        export(&grid, &header, &stem).unwrap();
        let (back, h2) = import(&stem).unwrap();
        assert_eq!(back, grid);
        assert_eq!(h2, header);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn rejects_bad_grids_and_directions() {
        assert!(MatrixGrid::from_values([0.0; 4], 1.0, 4, vec![0.0; 256]).is_err());
        assert!(MatrixGrid::from_values([0.0; 4], 1.0, 3, vec![0.0; 80]).is_err());
        let grid = MatrixGrid::from_values([0.0; 4], 1.0, 3, vec![0.0; 81]).unwrap();
        assert!(lamination_envelope(&grid, &[[1, 0, 0, 1]], EnvelopeParams::default()).is_err());
    }
}
