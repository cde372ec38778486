//! Forecast-producing procedures and adversarial action generators.
//!
//! * [`SimpleCalibeater`] — the deterministic procedure that forecasts the
//!   running average action of the current reference bin.  Its Brier score
//!   equals its online refinement by construction, which pins the gap over
//!   the offline refinement to `2|B|(ln t + 1)/t` for 1-Lipschitz rules.
//! * [`GridCalibeater`] — a stochastic forecaster over a finite δ-grid that
//!   hedges each period by solving a small zero-sum game per reference bin,
//!   driving the joint-binning calibration score to zero.
//! * [`Adversary`] — action generators (worst-case, periodic, i.i.d.) used
//!   to stress the guarantees.

use crate::binning::{BinId, PureBinning};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::sampling;
use crate::simplex::{ActionSet, Dist, VectorAverage};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Deterministic calibeating procedure: forecast the running average action
/// of the current reference bin, an arbitrary fixed seed on first visit.
#[derive(Clone, Debug)]
pub struct SimpleCalibeater<T: Scalar> {
    actions: ActionSet,
    seed_forecast: Dist<T>,
    bins: HashMap<BinId, VectorAverage<T>>,
}

impl<T: Scalar> SimpleCalibeater<T> {
    pub fn new(actions: &ActionSet, seed_forecast: Option<Dist<T>>) -> Self {
        SimpleCalibeater {
            actions: actions.clone(),
            seed_forecast: seed_forecast.unwrap_or_else(|| Dist::uniform(actions)),
            bins: HashMap::new(),
        }
    }

    /// Forecast for the announced reference bin: the average action over
    /// past periods of that bin (the seed forecast on a first visit).
    pub fn forecast(&self, bin: &BinId) -> Dist<T> {
        self.bins
            .get(bin)
            .and_then(|avg| avg.dist())
            .unwrap_or_else(|| self.seed_forecast.clone())
    }

    /// Record the revealed action for the period's bin.
    pub fn update(&mut self, bin: &BinId, action: usize) {
        self.bins
            .entry(bin.clone())
            .or_insert_with(|| VectorAverage::new(self.actions.clone(), self.actions.size()))
            .add_pure(action, &T::one());
    }

    /// Forecast for a tuple of reference bins (the joint bin): the average
    /// action over the past periods where the same combination appeared.
    pub fn forecast_tuple(&self, bins: &[BinId]) -> Dist<T> {
        self.forecast(&BinId::Tuple(bins.to_vec()))
    }

    pub fn update_tuple(&mut self, bins: &[BinId], action: usize) {
        self.update(&BinId::Tuple(bins.to_vec()), action);
    }

    pub fn bins_used(&self) -> usize {
        self.bins.len()
    }
}

/// Finite δ-grid of the simplex.
#[derive(Clone, Debug)]
pub struct Grid {
    pub delta: f64,
    pub points: Vec<Dist<f64>>,
}

impl Grid {
    /// Lattice `{k/n}` with `n` chosen so every simplex point lies within
    /// `delta` of a grid point.
    pub fn covering(actions: &ActionSet, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::GridMissing);
        }
        let dim = actions.size();
        let n = if dim == 2 {
            // scalar lattice: covering radius √2 / (2n)
            (2f64.sqrt() / (2.0 * delta)).ceil() as usize
        } else {
            // largest-remainder rounding lands within √dim / n
            ((dim as f64).sqrt() / delta).ceil() as usize
        }
        .max(1);
        let mut points = Vec::new();
        let mut coords = vec![0usize; dim];
        fill_lattice(actions, n, 0, n, &mut coords, &mut points);
        Ok(Grid { delta, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the closest grid point (ties to the lowest index).
    pub fn nearest(&self, d: &Dist<f64>) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let dist = crate::simplex::euclid_dist(d, p).unwrap_or(f64::INFINITY);
            if dist < best.1 {
                best = (i, dist);
            }
        }
        best
    }

    /// Covering check on seeded samples: every sampled simplex point must be
    /// within `delta` of the grid.
    pub fn covers(&self, actions: &ActionSet, samples: usize, seed: u64) -> bool {
        let mut rng = sampling::seeded_rng(seed);
        (0..samples).all(|_| {
            let d = sampling::sample_dist::<f64>(actions, &mut rng, false);
            self.nearest(&d).1 <= self.delta + 1e-12
        })
    }
}

fn fill_lattice(
    actions: &ActionSet,
    n: usize,
    coord: usize,
    remaining: usize,
    coords: &mut Vec<usize>,
    out: &mut Vec<Dist<f64>>,
) {
    let dim = actions.size();
    if coord == dim - 1 {
        coords[coord] = remaining;
        let w: Vec<f64> = coords.iter().map(|&k| k as f64 / n as f64).collect();
        out.push(Dist::new(actions, w).expect("lattice point is on the simplex"));
        return;
    }
    for k in 0..=remaining {
        coords[coord] = k;
        fill_lattice(actions, n, coord + 1, remaining - k, coords, out);
    }
}

/// Per-reference-bin hedging state: visit counts and cumulative bias
/// `S_g = Σ (1_{a_s} − x_g)` for each grid point.
#[derive(Clone, Debug)]
struct HedgeState {
    visits: Vec<f64>,
    bias: Vec<Vec<f64>>,
}

impl HedgeState {
    fn new(grid_len: usize, dim: usize) -> Self {
        HedgeState { visits: vec![0.0; grid_len], bias: vec![vec![0.0; dim]; grid_len] }
    }
}

/// Stochastic forecaster over a δ-grid that keeps the joint `(b, c)`-binning
/// calibrated: within each reference bin it plays a mixed forecast solving
/// the zero-sum game on the expected increments of the squared-bias
/// potential `Σ_g n_g ‖ā_g − x_g‖²`, so no action sequence can grow the
/// joint calibration score faster than `δ² + O(ln t / t)`.
#[derive(Clone, Debug)]
pub struct GridCalibeater {
    actions: ActionSet,
    grid: Grid,
    states: HashMap<BinId, HedgeState>,
    rng: ChaCha8Rng,
}

impl GridCalibeater {
    pub fn new(actions: &ActionSet, grid: Grid, seed: u64) -> Result<Self> {
        if grid.is_empty() || !grid.covers(actions, 200, seed ^ 0x9e3779b9) {
            return Err(Error::GridMissing);
        }
        Ok(GridCalibeater {
            actions: actions.clone(),
            grid,
            states: HashMap::new(),
            rng: sampling::seeded_rng(seed),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Mixed forecast over grid points for the announced reference bin.
    pub fn announce(&mut self, bin: &BinId) -> Vec<f64> {
        let dim = self.actions.size();
        let grid = &self.grid;
        let state = self
            .states
            .entry(bin.clone())
            .or_insert_with(|| HedgeState::new(grid.len(), dim));
        // payoff[g][a]: expected increment of ‖S_g‖²/n_g when forecasting g
        // and the action is a.
        let g_count = grid.len();
        let mut payoff = vec![vec![0.0f64; dim]; g_count];
        for g in 0..g_count {
            let n = state.visits[g];
            let x = self.grid.points[g].weights();
            let s = &state.bias[g];
            let s_dot_x: f64 = s.iter().zip(x).map(|(a, b)| a * b).sum();
            let x_sq: f64 = x.iter().map(|v| v * v).sum();
            let psi = if n > 0.0 { s.iter().map(|v| v * v).sum::<f64>() / n } else { 0.0 };
            for a in 0..dim {
                let bias_term = 2.0 * (s[a] - s_dot_x);
                let dist_term = 1.0 - 2.0 * x[a] + x_sq;
                payoff[g][a] = (bias_term + dist_term - psi) / (n + 1.0);
            }
        }
        solve_hedging_game(&payoff)
    }

    /// Mean of the announced mixture (what a mixture-observing adversary
    /// gets to see).
    pub fn mean_forecast(&self, sigma: &[f64]) -> Dist<f64> {
        let mut avg = VectorAverage::<f64>::new(self.actions.clone(), self.actions.size());
        for (w, p) in sigma.iter().zip(&self.grid.points) {
            avg.add(p, w);
        }
        avg.dist().unwrap_or_else(|| Dist::uniform(&self.actions))
    }

    /// Draw the realized grid index from the announced mixture.
    pub fn realize(&mut self, sigma: &[f64]) -> usize {
        let u: f64 = self.rng.random_range(0.0..1.0);
        let mut cum = 0.0;
        for (i, w) in sigma.iter().enumerate() {
            cum += w;
            if u < cum {
                return i;
            }
        }
        sigma.len() - 1
    }

    /// Record the revealed action for the realized grid forecast.
    pub fn update(&mut self, bin: &BinId, grid_index: usize, action: usize) {
        let state = self
            .states
            .get_mut(bin)
            .expect("announce() is called before update()");
        state.visits[grid_index] += 1.0;
        let x = self.grid.points[grid_index].weights();
        for (k, b) in state.bias[grid_index].iter_mut().enumerate() {
            *b += (if k == action { 1.0 } else { 0.0 }) - x[k];
        }
    }
}

/// Solve `min_σ max_a Σ_g σ(g) payoff[g][a]` for a matrix with few columns.
/// Two columns (binary actions) are solved exactly by scanning rows and row
/// pairs; more columns fall back to fictitious play.
fn solve_hedging_game(payoff: &[Vec<f64>]) -> Vec<f64> {
    let rows = payoff.len();
    let cols = payoff[0].len();
    let mut sigma = vec![0.0; rows];
    if cols == 2 {
        let mut best_val = f64::INFINITY;
        let mut best: (usize, usize, f64) = (0, 0, 1.0); // (g, h, λ on g)
        for g in 0..rows {
            let v = payoff[g][0].max(payoff[g][1]);
            if v < best_val {
                best_val = v;
                best = (g, g, 1.0);
            }
        }
        for g in 0..rows {
            let ug = payoff[g][0] - payoff[g][1];
            for h in (g + 1)..rows {
                let uh = payoff[h][0] - payoff[h][1];
                if (ug > 0.0) == (uh > 0.0) || ug == uh {
                    continue;
                }
                let lam = uh / (uh - ug);
                if !(0.0..=1.0).contains(&lam) {
                    continue;
                }
                let v = lam * payoff[g][0] + (1.0 - lam) * payoff[h][0];
                if v < best_val {
                    best_val = v;
                    best = (g, h, lam);
                }
            }
        }
        let (g, h, lam) = best;
        sigma[g] += lam;
        sigma[h] += 1.0 - lam;
    } else {
        // Fictitious play: adversary best-responds to the running forecast
        // mixture, the forecaster best-responds to the running action mix.
        let iters = 800;
        let mut col_counts = vec![1.0f64; cols];
        let mut row_counts = vec![0.0f64; rows];
        for _ in 0..iters {
            let total: f64 = col_counts.iter().sum();
            let mut best_row = 0usize;
            let mut best_val = f64::INFINITY;
            for g in 0..rows {
                let v: f64 =
                    (0..cols).map(|a| col_counts[a] / total * payoff[g][a]).sum();
                if v < best_val {
                    best_val = v;
                    best_row = g;
                }
            }
            row_counts[best_row] += 1.0;
            let rt: f64 = row_counts.iter().sum();
            let mut best_col = 0usize;
            let mut best_cv = f64::NEG_INFINITY;
            for a in 0..cols {
                let v: f64 = (0..rows).map(|g| row_counts[g] / rt * payoff[g][a]).sum();
                if v > best_cv {
                    best_cv = v;
                    best_col = a;
                }
            }
            col_counts[best_col] += 1.0;
        }
        let rt: f64 = row_counts.iter().sum();
        for (s, c) in sigma.iter_mut().zip(&row_counts) {
            *s = c / rt;
        }
    }
    sigma
}

/// Adversarial action generators.
#[derive(Clone, Debug)]
pub enum AdversaryKind {
    /// The action farthest from the current (mean) forecast, ties broken by
    /// the lowest index.
    FlipFarthest,
    /// Fixed periodic pattern of action indices.
    Pattern(Vec<usize>),
    /// Seeded i.i.d. draws from a fixed distribution.
    Stochastic(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct Adversary {
    kind: AdversaryKind,
    rng: ChaCha8Rng,
}

impl Adversary {
    pub fn new(kind: AdversaryKind, seed: u64) -> Self {
        Adversary { kind, rng: sampling::seeded_rng(seed ^ 0xAD5E_D0D0) }
    }

    /// Parse a strategy id: `flip_farthest`, `pattern:0101`,
    /// `stochastic:0.3,0.7`.
    pub fn parse(id: &str, seed: u64, actions: &ActionSet) -> Result<Self> {
        let kind = if id == "flip_farthest" {
            AdversaryKind::FlipFarthest
        } else if let Some(p) = id.strip_prefix("pattern:") {
            let pat: Option<Vec<usize>> =
                p.chars().map(|ch| ch.to_digit(10).map(|d| d as usize)).collect();
            let pat = pat.ok_or_else(|| Error::UnknownStrategy(id.to_string()))?;
            if pat.is_empty() || pat.iter().any(|&a| a >= actions.size()) {
                return Err(Error::UnknownStrategy(id.to_string()));
            }
            AdversaryKind::Pattern(pat)
        } else if let Some(p) = id.strip_prefix("stochastic:") {
            let weights: Option<Vec<f64>> = p.split(',').map(|w| w.parse().ok()).collect();
            let mut weights = weights.ok_or_else(|| Error::UnknownStrategy(id.to_string()))?;
            if weights.len() == 1 && actions.size() == 2 {
                // scalar shorthand: the probability of the action at index 1
                weights = vec![1.0 - weights[0], weights[0]];
            }
            if weights.len() != actions.size() || weights.iter().any(|w| *w < 0.0) {
                return Err(Error::UnknownStrategy(id.to_string()));
            }
            AdversaryKind::Stochastic(weights)
        } else {
            return Err(Error::UnknownStrategy(id.to_string()));
        };
        Ok(Adversary::new(kind, seed))
    }

    /// The period's action given the public forecast (for stochastic
    /// procedures: the announced mixture's mean, never the realization).
    pub fn next(&mut self, t: usize, public_forecast: &Dist<f64>) -> usize {
        match &self.kind {
            AdversaryKind::FlipFarthest => {
                let n = public_forecast.len();
                let mut best = (0usize, f64::NEG_INFINITY);
                for a in 0..n {
                    let pure = Dist::<f64>::pure(public_forecast.action_set(), a);
                    let d = crate::simplex::euclid_dist(&pure, public_forecast).unwrap();
                    if d > best.1 + 1e-15 {
                        best = (a, d);
                    }
                }
                best.0
            }
            AdversaryKind::Pattern(p) => p[t % p.len()],
            AdversaryKind::Stochastic(w) => {
                let total: f64 = w.iter().sum();
                let u: f64 = self.rng.random_range(0.0..total);
                let mut cum = 0.0;
                for (i, wi) in w.iter().enumerate() {
                    cum += wi;
                    if u < cum {
                        return i;
                    }
                }
                w.len() - 1
            }
        }
    }
}

/// Reference forecaster: the source of the announced bins `b_t`.
#[derive(Clone, Debug)]
pub enum ReferenceKind {
    Constant,
    /// Cycles through `k` bins.
    Cycle(usize),
    /// Seeded uniform draws over `k` bins.
    Random(usize),
}

#[derive(Clone, Debug)]
pub struct Reference {
    kind: ReferenceKind,
    rng: ChaCha8Rng,
}

impl Reference {
    pub fn new(kind: ReferenceKind, seed: u64) -> Self {
        Reference { kind, rng: sampling::seeded_rng(seed ^ 0x5EED_B175) }
    }

    /// Parse a reference id: `constant`, `cycle:K`, `random:K`.
    pub fn parse(id: &str, seed: u64) -> Result<Self> {
        let kind = if id == "constant" {
            ReferenceKind::Constant
        } else if let Some(k) = id.strip_prefix("cycle:") {
            ReferenceKind::Cycle(k.parse().map_err(|_| Error::UnknownStrategy(id.into()))?)
        } else if let Some(k) = id.strip_prefix("random:") {
            ReferenceKind::Random(k.parse().map_err(|_| Error::UnknownStrategy(id.into()))?)
        } else {
            return Err(Error::UnknownStrategy(id.to_string()));
        };
        Ok(Reference::new(kind, seed))
    }

    pub fn bins(&self) -> usize {
        match self.kind {
            ReferenceKind::Constant => 1,
            ReferenceKind::Cycle(k) | ReferenceKind::Random(k) => k.max(1),
        }
    }

    pub fn label(&mut self, t: usize) -> BinId {
        let k = match &self.kind {
            ReferenceKind::Constant => 0,
            ReferenceKind::Cycle(k) => t % (*k).max(1),
            ReferenceKind::Random(k) => self.rng.random_range(0..(*k).max(1)),
        };
        BinId::label(format!("b{k}"))
    }
}

/// Raw result of a sequential run.
#[derive(Clone, Debug)]
pub struct SimulationResult {
    pub action_set: ActionSet,
    pub actions: Vec<usize>,
    pub reference: PureBinning,
    pub forecasts: Vec<Dist<f64>>,
}

/// Run the simple calibeating procedure against an adversary for `t`
/// periods.  Deterministic given the seeds inside `reference`/`adversary`.
pub fn run_simple(
    actions: &ActionSet,
    mut reference: Reference,
    mut adversary: Adversary,
    t: usize,
    seed_forecast: Option<Dist<f64>>,
) -> SimulationResult {
    let mut proc = SimpleCalibeater::<f64>::new(actions, seed_forecast);
    let mut out_actions = Vec::with_capacity(t);
    let mut out_bins = Vec::with_capacity(t);
    let mut out_forecasts = Vec::with_capacity(t);
    for s in 0..t {
        let b = reference.label(s);
        let c = proc.forecast(&b);
        let a = adversary.next(s, &c);
        proc.update(&b, a);
        out_actions.push(a);
        out_bins.push(b);
        out_forecasts.push(c);
    }
    SimulationResult {
        action_set: actions.clone(),
        actions: out_actions,
        reference: PureBinning::new(out_bins),
        forecasts: out_forecasts,
    }
}

/// Run the simple procedure against several reference sequences at once by
/// averaging within joint bins.
pub fn run_multi_simple(
    actions: &ActionSet,
    mut references: Vec<Reference>,
    mut adversary: Adversary,
    t: usize,
    seed_forecast: Option<Dist<f64>>,
) -> (SimulationResult, Vec<PureBinning>) {
    let mut proc = SimpleCalibeater::<f64>::new(actions, seed_forecast);
    let n = references.len();
    let mut out_actions = Vec::with_capacity(t);
    let mut out_forecasts = Vec::with_capacity(t);
    let mut per_ref: Vec<Vec<BinId>> = vec![Vec::with_capacity(t); n];
    let mut joint_bins = Vec::with_capacity(t);
    for s in 0..t {
        let labels: Vec<BinId> = references.iter_mut().map(|r| r.label(s)).collect();
        let c = proc.forecast_tuple(&labels);
        let a = adversary.next(s, &c);
        proc.update_tuple(&labels, a);
        for (k, l) in labels.iter().enumerate() {
            per_ref[k].push(l.clone());
        }
        joint_bins.push(BinId::Tuple(labels));
        out_actions.push(a);
        out_forecasts.push(c);
    }
    (
        SimulationResult {
            action_set: actions.clone(),
            actions: out_actions,
            reference: PureBinning::new(joint_bins),
            forecasts: out_forecasts,
        },
        per_ref.into_iter().map(PureBinning::new).collect(),
    )
}

/// Run the stochastic grid forecaster.  The adversary sees the announced
/// mixture (its mean), never the period's realization.
pub fn run_grid(
    actions: &ActionSet,
    mut reference: Reference,
    mut adversary: Adversary,
    t: usize,
    delta: f64,
    seed: u64,
) -> Result<SimulationResult> {
    let grid = Grid::covering(actions, delta)?;
    let mut proc = GridCalibeater::new(actions, grid, seed)?;
    let mut out_actions = Vec::with_capacity(t);
    let mut out_bins = Vec::with_capacity(t);
    let mut out_forecasts = Vec::with_capacity(t);
    for s in 0..t {
        let b = reference.label(s);
        let sigma = proc.announce(&b);
        let mean = proc.mean_forecast(&sigma);
        let a = adversary.next(s, &mean);
        let gi = proc.realize(&sigma);
        proc.update(&b, gi, a);
        out_actions.push(a);
        out_bins.push(b);
        out_forecasts.push(proc.grid.points[gi].clone());
    }
    Ok(SimulationResult {
        action_set: actions.clone(),
        actions: out_actions,
        reference: PureBinning::new(out_bins),
        forecasts: out_forecasts,
    })
}
