use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::{invariant_average_components, ErgodicConfig};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::sde::SlowFastSystem;

/// Uniformly spaced nodes on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || nodes == 0 || (nodes > 1 && !(hi > lo)) {
            return Err(Error::Parameter(format!("invalid grid axis [{lo}, {hi}] with {nodes} nodes")));
        }
        Ok(Self { lo, hi, nodes })
    }

    pub fn node(&self, i: usize) -> f64 {
        if self.nodes == 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.nodes - 1) as f64
        }
    }

    /// Left node index and weight of the right node, clamped to the axis.
    fn locate(&self, v: f64) -> (usize, f64) {
        if self.nodes == 1 {
            return (0, 0.0);
        }
        let s = ((v - self.lo) / (self.hi - self.lo) * (self.nodes - 1) as f64).clamp(0.0, (self.nodes - 1) as f64);
        let i = (s.floor() as usize).min(self.nodes - 2);
        (i, s - i as f64)
    }

    fn refined(&self) -> Self {
        Self { nodes: if self.nodes == 1 { 1 } else { 2 * self.nodes - 1 }, ..*self }
    }
}

/// Rectangular `(t, x)` grid; an autonomous system uses a single time node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingGrid {
    pub t: GridAxis,
    pub x: Vec<GridAxis>,
}

impl AveragingGrid {
    pub fn autonomous(x: Vec<GridAxis>) -> Self {
        Self { t: GridAxis { lo: 0.0, hi: 0.0, nodes: 1 }, x }
    }

    fn axes(&self) -> impl Iterator<Item = &GridAxis> {
        std::iter::once(&self.t).chain(&self.x)
    }

    pub fn len(&self) -> usize {
        self.axes().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn coords(&self, mut flat: usize) -> (f64, Vec<f64>) {
        let mut idx = Vec::with_capacity(self.x.len() + 1);
        for a in self.axes().collect::<Vec<_>>().iter().rev() {
            idx.push(flat % a.nodes);
            flat /= a.nodes;
        }
        idx.reverse();
        (self.t.node(idx[0]), self.x.iter().zip(&idx[1..]).map(|(a, &i)| a.node(i)).collect())
    }

    fn flat(&self, idx: &[usize]) -> usize {
        self.axes().zip(idx).fold(0, |acc, (a, &i)| acc * a.nodes + i)
    }

    /// Corner indices and multilinear weights around `(t, x)`.
    fn stencil(&self, t: f64, x: &[f64]) -> Vec<(usize, f64)> {
        let located: Vec<(usize, f64)> =
            std::iter::once(self.t.locate(t)).chain(self.x.iter().zip(x).map(|(a, &v)| a.locate(v))).collect();
        let k = located.len();
        let mut out = Vec::with_capacity(1 << k);
        for mask in 0..(1usize << k) {
            let mut w = 1.0;
            let mut idx = Vec::with_capacity(k);
            for (j, &(i, frac)) in located.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    w *= frac;
                    idx.push(i + 1);
                } else {
                    w *= 1.0 - frac;
                    idx.push(i);
                }
            }
            if w != 0.0 {
                out.push((self.flat(&idx), w));
            }
        }
        out
    }

    fn refined(&self) -> Self {
        Self { t: self.t.refined(), x: self.x.iter().map(GridAxis::refined).collect() }
    }
}

/// Lazily filled table of `(b̄, δ̄₁)` at grid nodes. Each node is computed once
/// with its own derived seed, so values do not depend on evaluation order.
pub struct AveragedTable<'s> {
    system: &'s SlowFastSystem,
    grid: AveragingGrid,
    cfg: ErgodicConfig,
    cache: RwLock<HashMap<usize, Arc<Vec<f64>>>>,
}

impl<'s> AveragedTable<'s> {
    pub fn new(system: &'s SlowFastSystem, grid: AveragingGrid, cfg: ErgodicConfig) -> Result<Self> {
        system.validate()?;
        cfg.validate()?;
        if grid.x.len() != system.d1 {
            return Err(Error::Parameter(format!("grid has {} x-axes, system has d1 = {}", grid.x.len(), system.d1)));
        }
        Ok(Self { system, grid, cfg, cache: RwLock::new(HashMap::new()) })
    }

    pub fn grid(&self) -> &AveragingGrid {
        &self.grid
    }

    fn width(&self) -> usize {
        self.system.d1 + self.system.d1 * self.system.d1
    }

    fn node(&self, flat: usize) -> Result<Arc<Vec<f64>>> {
        if let Some(v) = self.cache.read().expect("lock poisoned").get(&flat) {
            return Ok(Arc::clone(v));
        }
        let (t, x) = self.grid.coords(flat);
        let sys = self.system;
        let d = sys.d1;
        let g = |y: &[f64], out: &mut [f64]| {
            let (b, m) = out.split_at_mut(d);
            (sys.b)(t, &x, y, b);
            sys.delta1.eval(t, &x, y, m);
        };
        let cfg = ErgodicConfig { seed: derive_seed(self.cfg.seed, flat as u64), ..self.cfg.clone() };
        let est = invariant_average_components(sys, &x, self.width(), &g, &cfg)?;
        let values = Arc::new(est.iter().map(|e| e.value).collect::<Vec<_>>());
        let mut cache = self.cache.write().expect("lock poisoned");
        Ok(Arc::clone(cache.entry(flat).or_insert(values)))
    }

    /// Interpolated `b̄(t,x)` and row-major `δ̄₁(t,x)`; inputs outside the grid
    /// are clamped to its boundary.
    pub fn eval(&self, t: f64, x: &[f64], b_out: &mut [f64], delta_out: &mut [f64]) -> Result<()> {
        let d = self.system.d1;
        b_out.iter_mut().chain(delta_out.iter_mut()).for_each(|v| *v = 0.0);
        for (flat, w) in self.grid.stencil(t, x) {
            let v = self.node(flat)?;
            b_out.iter_mut().zip(&v[..d]).for_each(|(o, a)| *o += w * a);
            delta_out.iter_mut().zip(&v[d..]).for_each(|(o, a)| *o += w * a);
        }
        Ok(())
    }

    /// Compute every node and return an infallible dense interpolant.
    pub fn interpolant(&self) -> Result<Interpolant> {
        let nodes = (0..self.grid.len()).map(|i| self.node(i).map(|v| v.to_vec())).collect::<Result<Vec<_>>>()?;
        Ok(Interpolant { grid: self.grid.clone(), d1: self.system.d1, nodes })
    }

    /// Largest difference between this table and one on a twice-finer grid,
    /// measured at the refined nodes.
    pub fn refinement_gap(&self) -> Result<f64> {
        let fine = AveragedTable::new(self.system, self.grid.refined(), self.cfg.clone())?;
        let d = self.system.d1;
        let (mut b0, mut m0) = (vec![0.0; d], vec![0.0; d * d]);
        let mut gap: f64 = 0.0;
        for flat in 0..fine.grid.len() {
            let (t, x) = fine.grid.coords(flat);
            self.eval(t, &x, &mut b0, &mut m0)?;
            let v = fine.node(flat)?;
            for (a, b) in b0.iter().chain(&m0).zip(v.iter()) {
                gap = gap.max((a - b).abs());
            }
        }
        Ok(gap)
    }
}

/// Fully computed averaged coefficients on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpolant {
    grid: AveragingGrid,
    d1: usize,
    nodes: Vec<Vec<f64>>,
}

impl Interpolant {
    fn eval_part(&self, t: f64, x: &[f64], range: std::ops::Range<usize>, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (flat, w) in self.grid.stencil(t, x) {
            out.iter_mut().zip(&self.nodes[flat][range.clone()]).for_each(|(o, a)| *o += w * a);
        }
    }

    pub fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.eval_part(t, x, 0..self.d1, out)
    }

    pub fn noise(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.eval_part(t, x, self.d1..self.d1 + self.d1 * self.d1, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{d1, stable_ou_mean_cos};

    #[test]
    fn stencil_weights_sum_to_one() {
        let g = AveragingGrid { t: GridAxis::new(0.0, 1.0, 3).unwrap(), x: vec![GridAxis::new(-1.0, 1.0, 5).unwrap()] };
        for (t, x) in [(0.3, -0.2), (0.0, 1.0), (5.0, -7.0), (0.99, 0.49)] {
            let s: f64 = g.stencil(t, &[x]).iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(g.len(), 15);
        assert_eq!(g.coords(g.flat(&[2, 3])), (1.0, vec![0.5]));
    }

    #[test]
    fn table_matches_oracle_and_refines() {
        let sys = d1(1.5);
        let grid = AveragingGrid::autonomous(vec![GridAxis::new(-1.0, 1.0, 5).unwrap()]);
        let cfg = ErgodicConfig { horizon: 50.0, replicas: 100, seed: 4, ..Default::default() };
        let table = AveragedTable::new(&sys, grid, cfg).unwrap();
        let shift = stable_ou_mean_cos(1.0, 1.0, 1.5);
        let (mut b, mut m) = ([0.0], [0.0]);
        table.eval(0.0, &[0.25], &mut b, &mut m).unwrap();
        assert!((b[0] - (-0.25 + shift)).abs() < 0.03, "{b:?}");
        assert_eq!(m[0], 1.0);
        let interp = table.interpolant().unwrap();
        let mut b2 = [0.0];
        interp.drift(0.0, &[0.25], &mut b2);
        assert_eq!(b, b2);
        // b̄ is affine in x, so refinement only exposes Monte Carlo noise.
        assert!(table.refinement_gap().unwrap() < 0.05);
    }
}
