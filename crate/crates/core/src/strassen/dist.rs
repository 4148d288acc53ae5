//! Sup-norm distance from a piecewise-linear path to the ball
//! `{h : h(0) = 0, int |h'|^2 <= tr_d}`.
//!
//! Paths `h` live on the grid of `f` with `h_0 = 0`. Restricting to that grid
//! loses nothing: the difference of two piecewise-linear paths peaks at a
//! knot, and linear interpolation minimises energy between fixed knots.
//!
//! For a tube radius `delta` let `E*(delta)` be the least energy
//! `sum_i w_i |h_i - h_{i-1}|^2` (`w_i = 1 / (t_i - t_{i-1})`) subject to
//! `|h_i - f_i| <= delta` at every knot. `E*` is convex and nonincreasing, and
//! the distance is the smallest `delta` with `E*(delta) <= tr_d`.
//!
//! Each tube problem is solved by a log-barrier method whose Newton systems
//! are block tridiagonal, `O(m d^3)` per step. At barrier weight `t` the
//! central point is within `m / t` of `E*`, and its multipliers
//! `1 / (t s_i)` give the slope `dE*/d delta = -2 delta sum_i lambda_i`. The
//! outer search is Newton's method on `E*(delta) = tr_d` kept inside a
//! certified bracket; since `E*` is convex its Newton iterates approach the
//! root from below.

use serde::Serialize;

use super::path::{energy, PathFunction};
use crate::error::{Error, Result};
use crate::stats::norm;

/// Default absolute tolerance on the returned distance.
pub const DIST_TOL: f64 = 1e-6;

const MAX_NEWTON: usize = 200;
const MAX_BARRIER_T: f64 = 1e18;
const BARRIER_STEP: f64 = 20.0;
const MAX_PROBES: usize = 200;
/// Slack on the duality-gap bound for centring that stops short of exact.
const GAP_SAFETY: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KDistance {
    /// Midpoint of the final bracket.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// False when the bracket could not be narrowed to the tolerance.
    pub certified: bool,
}

impl KDistance {
    fn exact(v: f64) -> Self {
        Self { value: v, lower: v, upper: v, certified: true }
    }

    fn bracket(lower: f64, upper: f64, tol: f64) -> Self {
        Self { value: 0.5 * (lower + upper), lower, upper, certified: upper - lower <= tol }
    }
}

/// Distance in the sup norm from `f` to `sqrt(tr_d) K`, to within `tol`.
pub fn dist_to_k(f: &PathFunction, tr_d: f64, tol: f64) -> Result<KDistance> {
    if !(tr_d >= 0.0 && tr_d.is_finite()) {
        return Err(Error::InvalidArgument(format!("trace must be finite and >= 0, got {tr_d}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let knots = f.knots();
    let fmax = (1..knots).map(|i| norm(f.knot(i))).fold(0.0, f64::max);
    if fmax == 0.0 {
        return Ok(KDistance::exact(0.0));
    }
    let r = tr_d.sqrt();
    if r == 0.0 {
        return Ok(KDistance::exact(fmax));
    }
    let e_f = energy(f);
    if e_f <= tr_d {
        return Ok(KDistance::exact(0.0));
    }
    // Cauchy-Schwarz: every member satisfies |h(t)| <= r sqrt(t).
    let mut lo = (1..knots)
        .map(|i| norm(f.knot(i)) - r * f.times()[i].sqrt())
        .fold(0.0, f64::max);
    // The radial shrink of f onto the energy ball is a member.
    let mut hi = ((1.0 - r / e_f.sqrt()) * fmax).max(lo);

    let tube = Tube::new(f);
    let mut ws = Workspace::new(tube.grid.m, tube.grid.d);
    // The last central point probed from below stays strictly inside every
    // wider tube, so it warm-starts later probes.
    let mut warm: Option<(Vec<f64>, f64, f64)> = None;
    let mut queue = vec![lo + 0.5 * tol.min(hi - lo)];
    for _ in 0..MAX_PROBES {
        if hi - lo <= tol {
            break;
        }
        let delta = match queue.pop() {
            Some(x) if x > lo && x < hi => x,
            _ => 0.5 * (lo + hi),
        };
        let start = warm.as_ref().filter(|w| w.2 < delta).map(|w| (w.0.as_slice(), w.1));
        let probe = tube.solve(delta, Some((tr_d, tol)), start, &mut ws)?;
        let slope = probe.slope.abs().max(f64::MIN_POSITIVE);
        match probe.verdict {
            Some(true) => {
                // The iterate itself is a member, at distance max |h_i - f_i|.
                hi = tube.grid.max_offset(&ws.h).min(delta);
                // Newton from the right lands below the root.
                queue.push(delta - (tr_d - probe.mid()) / slope);
            }
            Some(false) => {
                lo = delta;
                let step = (probe.mid() - tr_d) / slope;
                // Once Newton steps drop below the tolerance, probe just past
                // the predicted root to close the bracket.
                queue.push(if step < 0.25 * tol { delta + step + 0.5 * tol } else { delta + step });
                warm = Some((ws.h.clone(), probe.t, delta));
            }
            None if probe.exhausted => break,
            None => {
                // E*(delta) is within the barrier gap of tr_d, so delta sits
                // within a fraction of the tolerance of the root.
                queue.clear();
                queue.push(delta - 0.4 * tol);
                queue.push(delta + 0.4 * tol);
            }
        }
    }
    Ok(KDistance::bracket(lo, hi, tol))
}

/// Bounds `(lower, upper)` on the least energy of a grid path `h` with
/// `h_0 = 0` and `|h_i - f_i| <= delta` at every knot.
pub fn min_energy_in_tube(f: &PathFunction, delta: f64) -> Result<(f64, f64)> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument("tube radius must be finite and >= 0".into()));
    }
    let tube = Tube::new(f);
    let mut ws = Workspace::new(tube.grid.m, tube.grid.d);
    let probe = tube.solve(delta, None, None, &mut ws)?;
    Ok((probe.lower, probe.upper))
}

/// Edge weights and knot targets shared by both programs; knot 0 is pinned
/// at the origin and excluded.
struct Grid<'a> {
    weights: Vec<f64>,
    targets: &'a [f64],
    m: usize,
    d: usize,
}

impl<'a> Grid<'a> {
    fn new(f: &'a PathFunction) -> Self {
        let d = f.dim();
        let weights = f.times().windows(2).map(|w| 1.0 / (w[1] - w[0])).collect();
        Self { weights, targets: &f.values()[d..], m: f.knots() - 1, d }
    }

    fn energy(&self, h: &[f64]) -> f64 {
        let d = self.d;
        let mut e = 0.0;
        for i in 0..self.m {
            let cur = &h[i * d..(i + 1) * d];
            let sq: f64 = if i == 0 {
                cur.iter().map(|x| x * x).sum()
            } else {
                cur.iter().zip(&h[(i - 1) * d..i * d]).map(|(a, b)| (a - b) * (a - b)).sum()
            };
            e += self.weights[i] * sq;
        }
        e
    }

    /// Gradient of the energy, `2 L h`.
    fn energy_grad(&self, h: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in 0..self.m {
            let w_next = if i + 1 < self.m { self.weights[i + 1] } else { 0.0 };
            for a in 0..d {
                let k = i * d + a;
                let prev = if i == 0 { 0.0 } else { h[k - d] };
                let next_diff = if i + 1 < self.m { h[k + d] - h[k] } else { 0.0 };
                out[k] = 2.0 * self.weights[i] * (h[k] - prev) - 2.0 * w_next * next_diff;
            }
        }
    }

    fn offset_sq(&self, h: &[f64], i: usize) -> f64 {
        let d = self.d;
        h[i * d..(i + 1) * d]
            .iter()
            .zip(&self.targets[i * d..(i + 1) * d])
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// `max_i |h_i - f_i|`.
    fn max_offset(&self, h: &[f64]) -> f64 {
        (0..self.m).map(|i| self.offset_sq(h, i)).fold(0.0, f64::max).sqrt()
    }
}

/// Block tridiagonal SPD solver for diagonal blocks `D_i` (`d x d`) coupled by
/// scalar multiples of the identity.
struct BlockTridiag {
    m: usize,
    d: usize,
    /// Inverse Schur complements.
    inv: Vec<f64>,
    off: Vec<f64>,
    scratch: Vec<f64>,
}

impl BlockTridiag {
    fn new(m: usize, d: usize) -> Self {
        Self { m, d, inv: vec![0.0; m * d * d], off: vec![0.0; m], scratch: vec![0.0; d * d] }
    }

    /// `blocks` holds the diagonal blocks row-major; `off[i]` couples knots
    /// `i - 1` and `i` (`off[0]` is ignored).
    fn factor(&mut self, blocks: &[f64], off: &[f64]) {
        let d2 = self.d * self.d;
        self.off.copy_from_slice(off);
        for i in 0..self.m {
            self.scratch.copy_from_slice(&blocks[i * d2..(i + 1) * d2]);
            if i > 0 {
                let c2 = off[i] * off[i];
                for k in 0..d2 {
                    self.scratch[k] -= c2 * self.inv[(i - 1) * d2 + k];
                }
            }
            invert(&self.scratch, self.d, &mut self.inv[i * d2..(i + 1) * d2]);
        }
    }

    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let (m, d) = (self.m, self.d);
        let d2 = d * d;
        let mut tmp = vec![0.0; d];
        for i in 0..m {
            let base = i * d;
            for a in 0..d {
                tmp[a] = rhs[base + a] - if i > 0 { self.off[i] * out[base - d + a] } else { 0.0 };
            }
            let inv = &self.inv[i * d2..(i + 1) * d2];
            for a in 0..d {
                out[base + a] = (0..d).map(|b| inv[a * d + b] * tmp[b]).sum();
            }
        }
        for i in (0..m.saturating_sub(1)).rev() {
            let base = i * d;
            let c = self.off[i + 1];
            let inv = &self.inv[i * d2..(i + 1) * d2];
            for a in 0..d {
                let corr: f64 = (0..d).map(|b| inv[a * d + b] * out[base + d + b]).sum();
                out[base + a] -= c * corr;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Workspace {
    h: Vec<f64>,
    grad: Vec<f64>,
    step: Vec<f64>,
    trial: Vec<f64>,
    blocks: Vec<f64>,
    off: Vec<f64>,
    solver: BlockTridiag,
}

impl Workspace {
    fn new(m: usize, d: usize) -> Self {
        let n = m * d;
        Self {
            h: vec![0.0; n],
            grad: vec![0.0; n],
            step: vec![0.0; n],
            trial: vec![0.0; n],
            blocks: vec![0.0; n * d],
            off: vec![0.0; m],
            solver: BlockTridiag::new(m, d),
        }
    }
}

/// Outcome of one tube solve.
struct Probe {
    lower: f64,
    upper: f64,
    /// Estimate of `dE*/d delta` from the barrier multipliers.
    slope: f64,
    t: f64,
    /// `Some(true)` if `E*(delta) <= tr_d` is certified, `Some(false)` if
    /// `E*(delta) > tr_d` is, `None` if neither.
    verdict: Option<bool>,
    /// The barrier weight reached its cap.
    exhausted: bool,
}

impl Probe {
    fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

struct Tube<'a> {
    grid: Grid<'a>,
}

impl<'a> Tube<'a> {
    fn new(f: &'a PathFunction) -> Self {
        Self { grid: Grid::new(f) }
    }

    fn barrier(&self, h: &[f64], t: f64, delta2: f64) -> Option<f64> {
        let mut logs = 0.0;
        for i in 0..self.grid.m {
            let s = delta2 - self.grid.offset_sq(h, i);
            if s.is_nan() || s <= 0.0 {
                return None;
            }
            logs += s.ln();
        }
        Some(t * self.grid.energy(h) - logs)
    }

    /// Follows the central path until the gap decides `E*(delta)` against
    /// `target.0` or is small enough that the slope pins `delta` within
    /// `target.1`; without a target, until the gap is negligible. The final
    /// iterate is left in `ws.h`.
    fn solve(
        &self,
        delta: f64,
        target: Option<(f64, f64)>,
        warm: Option<(&[f64], f64)>,
        ws: &mut Workspace,
    ) -> Result<Probe> {
        let m = self.grid.m;
        if delta == 0.0 {
            let e = self.grid.energy(self.grid.targets);
            ws.h.copy_from_slice(self.grid.targets);
            let verdict = target.map(|(r2, _)| e <= r2);
            return Ok(Probe { lower: e, upper: e, slope: 0.0, t: f64::INFINITY, verdict, exhausted: false });
        }
        let delta2 = delta * delta;
        let mut t = match warm {
            Some((h, t)) => {
                ws.h.copy_from_slice(h);
                t
            }
            None => {
                ws.h.copy_from_slice(self.grid.targets);
                (m as f64 / self.grid.energy(self.grid.targets).max(1e-12)).clamp(1e-8, 1e8)
            }
        };
        loop {
            self.center(t, delta2, ws)?;
            let upper = self.grid.energy(&ws.h);
            let gap = GAP_SAFETY * m as f64 / t;
            let lower = (upper - gap).max(0.0);
            let slope = -2.0 * delta
                * (0..m).map(|i| 1.0 / (t * (delta2 - self.grid.offset_sq(&ws.h, i)))).sum::<f64>();
            let exhausted = t >= MAX_BARRIER_T;
            let probe = |verdict| Probe { lower, upper, slope, t, verdict, exhausted };
            match target {
                Some((r2, tol)) => {
                    let resolved = gap <= 0.1 * tol * slope.abs() || exhausted;
                    // Keep going until the gap is small next to |E* - tr_d|,
                    // so that the caller's Newton step is accurate.
                    let sharp = gap <= 0.25 * (0.5 * (lower + upper) - r2).abs();
                    if upper <= r2 && (sharp || resolved) {
                        return Ok(probe(Some(true)));
                    }
                    if lower > r2 && (sharp || resolved) {
                        return Ok(probe(Some(false)));
                    }
                    if resolved {
                        return Ok(probe(None));
                    }
                }
                None => {
                    if gap <= 1e-13 * upper.max(1e-300) || exhausted {
                        return Ok(probe(None));
                    }
                }
            }
            t *= BARRIER_STEP;
        }
    }

    /// Damped Newton on `t E(h) - sum log(delta^2 - |h_i - f_i|^2)`.
    fn center(&self, t: f64, delta2: f64, ws: &mut Workspace) -> Result<()> {
        let n = ws.h.len();
        let mut phi = self
            .barrier(&ws.h, t, delta2)
            .ok_or(Error::NonConvergence { lower: f64::NAN, upper: f64::NAN })?;
        for _ in 0..MAX_NEWTON {
            self.newton_system(t, delta2, ws);
            ws.solver.factor(&ws.blocks, &ws.off);
            ws.solver.solve(&ws.grad, &mut ws.step);
            ws.step.iter_mut().for_each(|s| *s = -*s);
            let decrement = -dot(&ws.grad, &ws.step);
            // Below this the Armijo test is lost in the round-off of phi.
            if decrement.is_nan() || decrement <= 1e-10_f64.max(1e-13 * phi.abs()) {
                return Ok(());
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                for k in 0..n {
                    ws.trial[k] = ws.h[k] + alpha * ws.step[k];
                }
                if let Some(v) = self.barrier(&ws.trial, t, delta2) {
                    if v <= phi - 0.25 * alpha * decrement {
                        phi = v;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // Round-off floor of the barrier value.
                return Ok(());
            }
            std::mem::swap(&mut ws.h, &mut ws.trial);
        }
        Ok(())
    }

    /// Gradient (into `ws.grad`) and block tridiagonal Hessian of the barrier.
    fn newton_system(&self, t: f64, delta2: f64, ws: &mut Workspace) {
        let g = &self.grid;
        let (m, d) = (g.m, g.d);
        let d2 = d * d;
        let h = &ws.h;
        g.energy_grad(h, &mut ws.grad);
        for i in 0..m {
            let base = i * d;
            let s = delta2 - g.offset_sq(h, i);
            let w_next = if i + 1 < m { g.weights[i + 1] } else { 0.0 };
            let blk = &mut ws.blocks[i * d2..(i + 1) * d2];
            for a in 0..d {
                let ua = h[base + a] - g.targets[base + a];
                ws.grad[base + a] = t * ws.grad[base + a] + 2.0 * ua / s;
                for b in 0..d {
                    let ub = h[base + b] - g.targets[base + b];
                    blk[a * d + b] = 4.0 * ua * ub / (s * s);
                }
                blk[a * d + a] += 2.0 * t * (g.weights[i] + w_next) + 2.0 / s;
            }
            ws.off[i] = -2.0 * t * g.weights[i];
        }
    }
}

/// Inverse of a small SPD matrix by Gauss-Jordan elimination.
fn invert(a: &[f64], d: usize, out: &mut [f64]) {
    if d == 1 {
        out[0] = 1.0 / a[0];
        return;
    }
    let mut m = a.to_vec();
    out.fill(0.0);
    for i in 0..d {
        out[i * d + i] = 1.0;
    }
    for col in 0..d {
        let piv = (col..d)
            .max_by(|&x, &y| m[x * d + col].abs().total_cmp(&m[y * d + col].abs()))
            .unwrap();
        if piv != col {
            for k in 0..d {
                m.swap(col * d + k, piv * d + k);
                out.swap(col * d + k, piv * d + k);
            }
        }
        let p = m[col * d + col];
        for k in 0..d {
            m[col * d + k] /= p;
            out[col * d + k] /= p;
        }
        for r in 0..d {
            if r != col {
                let factor = m[r * d + col];
                if factor != 0.0 {
                    for k in 0..d {
                        m[r * d + k] -= factor * m[col * d + k];
                        out[r * d + k] -= factor * out[col * d + k];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_path_shrinks_radially() {
        let f = PathFunction::linear(&[2.0], 16);
        let d = dist_to_k(&f, 1.0, DIST_TOL).unwrap();
        assert!((d.value - 1.0).abs() <= DIST_TOL, "{d:?}");
        assert!(d.certified);
    }

    #[test]
    fn members_and_zero_path() {
        let f = PathFunction::linear(&[0.5, 0.5], 8);
        assert_eq!(dist_to_k(&f, 1.0, DIST_TOL).unwrap(), KDistance::exact(0.0));
        assert_eq!(dist_to_k(&PathFunction::zero(4, 2), 0.0, DIST_TOL).unwrap().value, 0.0);
    }

    #[test]
    fn block_solver_matches_dense() {
        let (m, d) = (4, 2);
        let blocks: Vec<f64> = (0..m).flat_map(|i| [4.0 + i as f64, 0.5, 0.5, 3.0]).collect();
        let off = vec![0.0, -1.0, -0.7, -1.2];
        let mut dense = nalgebra::DMatrix::<f64>::zeros(m * d, m * d);
        for i in 0..m {
            for a in 0..d {
                for b in 0..d {
                    dense[(i * d + a, i * d + b)] = blocks[i * 4 + a * d + b];
                }
                if i > 0 {
                    dense[(i * d + a, (i - 1) * d + a)] = off[i];
                    dense[((i - 1) * d + a, i * d + a)] = off[i];
                }
            }
        }
        let rhs: Vec<f64> = (0..m * d).map(|k| (k as f64).sin()).collect();
        let mut solver = BlockTridiag::new(m, d);
        solver.factor(&blocks, &off);
        let mut x = vec![0.0; m * d];
        solver.solve(&rhs, &mut x);
        let expect = dense.lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
        for k in 0..m * d {
            assert!((x[k] - expect[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn tube_energy_of_wide_tube_is_zero() {
        let f = PathFunction::uniform(vec![0.0, 0.3, -0.2], 1).unwrap();
        let (lo, hi) = min_energy_in_tube(&f, 0.5).unwrap();
        assert!(lo <= hi && hi < 1e-9);
        let (lo, hi) = min_energy_in_tube(&f, 0.0).unwrap();
        assert_eq!((lo, hi), (energy(&f), energy(&f)));
    }
}
