//! Seeded, parallel Monte Carlo estimation of event probabilities.
//!
//! Each trial samples an independent window realisation from streams derived
//! from `(master_seed, trial_index)`, so success counts are bit-identical no
//! matter how trials are spread over workers. Coupled estimation evaluates a
//! list of specs on the same graph per trial and keeps the per-trial
//! indicator vectors, which turns event inclusions into hard assertions.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::connectivity::{crosses, EventSpec};
use crate::error::{Error, Result};
use crate::geometry::ball_volume;
use crate::model::ModelParams;
use crate::oracle::truncation_tail;
use crate::rng::{stream, trial_seed, StreamLabel};
use crate::sampler::{
    cell_grid::GridScratch, sample_edges_into, sample_vertices_into, EdgeStrategy, GraphParts,
    SampledGraph, DEFAULT_VERTEX_CAP,
};

/// 95% two-sided normal quantile, the Wilson default.
pub const WILSON_Z_95: f64 = 1.959964;

/// Points with fewer successes than this are excluded from slope fits; the
/// log of a tiny count is too unstable to weight sensibly.
pub const MIN_FIT_SUCCESSES: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliEstimate {
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub master_seed: u64,
}

impl BernoulliEstimate {
    pub fn new(trials: u64, successes: u64, master_seed: u64) -> Result<Self> {
        let (ci_low, ci_high) = wilson_interval(successes, trials, WILSON_Z_95)?;
        Ok(BernoulliEstimate {
            trials,
            successes,
            p_hat: successes as f64 / trials as f64,
            ci_low,
            ci_high,
            master_seed,
        })
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    if successes > trials {
        return Err(Error::invalid("successes cannot exceed trials"));
    }
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::invalid("z must be positive and finite"));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The interval endpoints are exactly 0 and 1 at the degenerate counts;
    // keep them free of rounding noise.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    pub trials: u64,
    pub master_seed: u64,
    /// Window radius per trial is `window_factor * max R`; must be >= 2.
    pub window_factor: f64,
    /// 0 means all available cores.
    pub workers: usize,
    /// `None` picks the cell grid automatically on large windows.
    pub strategy: Option<EdgeStrategy>,
    pub vertex_cap: f64,
}

impl EstimateOptions {
    pub fn new(trials: u64, master_seed: u64) -> Self {
        EstimateOptions {
            trials,
            master_seed,
            window_factor: 4.0,
            workers: 0,
            strategy: None,
            vertex_cap: DEFAULT_VERTEX_CAP,
        }
    }

    pub fn window_factor(mut self, f: f64) -> Self {
        self.window_factor = f;
        self
    }

    pub fn workers(mut self, w: usize) -> Self {
        self.workers = w;
        self
    }

    pub fn strategy(mut self, s: EdgeStrategy) -> Self {
        self.strategy = Some(s);
        self
    }
}

#[derive(Debug, Clone)]
pub struct EventEstimate {
    pub estimate: BernoulliEstimate,
    pub window_radius: f64,
    /// Upper bound on the per-trial probability that truncation at the window
    /// lost a root edge, computed for the planted mark (or mark 1).
    pub truncation_tail: f64,
}

#[derive(Debug, Clone)]
pub struct CoupledEstimates {
    pub estimates: Vec<BernoulliEstimate>,
    /// Per-trial indicator bitmasks, bit `s` for spec `s`.
    pub indicators: Vec<u64>,
    pub window_radius: f64,
    pub truncation_tail: f64,
}

struct TrialPlan<'a> {
    params: &'a ModelParams,
    specs: &'a [EventSpec],
    root_mark: Option<f64>,
    need_root: bool,
    /// Pair edges are skipped when every spec only looks at root edges
    /// (root-source, budget 1); root-edge draws come from their own stream,
    /// so results match the fully sampled graph bit for bit.
    need_pair_edges: bool,
    strategy: EdgeStrategy,
    window: f64,
    /// Pairs entirely outside this radius (the largest queried outer radius)
    /// cannot appear on a minimal witness path; see `sample_edges_pruned`.
    prune_radius: f64,
    master_seed: u64,
    cap: f64,
}

/// Per-worker reusable storage; all large per-trial vectors live here and
/// are recycled across trials.
#[derive(Default)]
struct WorkerScratch {
    parts: GraphParts,
    grid: GridScratch,
    origin: Vec<f64>,
}

impl TrialPlan<'_> {
    fn run(&self, trial: u64, scratch: &mut WorkerScratch) -> Result<u64> {
        let mut parts = std::mem::take(&mut scratch.parts);
        parts.edges.clear();
        let mut vrng = stream(self.master_seed, trial, StreamLabel::Vertices);
        sample_vertices_into(self.params, self.window, &mut vrng, self.cap, &mut parts.verts)?;
        if self.need_pair_edges {
            let mut erng = stream(self.master_seed, trial, StreamLabel::PairEdges);
            sample_edges_into(
                self.params,
                &parts.verts,
                &mut erng,
                self.strategy,
                Some(self.prune_radius),
                &mut scratch.grid,
                &mut parts.edges,
            );
        }
        let root_index = if self.need_root {
            let mark = match self.root_mark {
                Some(u) => u,
                None => {
                    let mut mrng = stream(self.master_seed, trial, StreamLabel::RootMark);
                    1.0 - mrng.random::<f64>()
                }
            };
            let mut rrng = stream(self.master_seed, trial, StreamLabel::RootEdges);
            let root = parts.verts.len() as u32;
            scratch.origin.clear();
            scratch.origin.resize(self.params.dim as usize, 0.0);
            for j in 0..parts.verts.len() {
                let p = self.params.connection_probability_sq(
                    crate::geometry::squared_distance(&scratch.origin, parts.verts.position(j)),
                    mark,
                    parts.verts.mark(j),
                );
                if rrng.random::<f64>() < p {
                    parts.edges.push((j as u32, root));
                }
            }
            parts.verts.push(&scratch.origin, mark);
            Some(root)
        } else {
            None
        };
        let graph = SampledGraph::assemble_from_parts(
            parts,
            self.window,
            root_index,
            trial_seed(self.master_seed, trial),
        );
        let mut bits = 0u64;
        let mut outcome = Ok(());
        for (s, spec) in self.specs.iter().enumerate() {
            match crosses(&graph, spec) {
                Ok(true) => bits |= 1 << s,
                Ok(false) => {}
                Err(e) => {
                    outcome = Err(e);
                    break;
                }
            }
        }
        scratch.parts = graph.into_parts();
        outcome.map(|_| bits)
    }
}

fn resolve_workers(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

fn run_trials(
    params: &ModelParams,
    specs: &[EventSpec],
    root_mark: Option<f64>,
    opts: &EstimateOptions,
    record_indicators: bool,
) -> Result<(Vec<u64>, Vec<u64>, f64, f64)> {
    params.validate()?;
    if specs.is_empty() || specs.len() > 64 {
        return Err(Error::invalid("between 1 and 64 event specs are required"));
    }
    for spec in specs {
        spec.validate()?;
    }
    if opts.trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    if !(opts.window_factor >= 2.0) {
        return Err(Error::invalid("window factor must be >= 2"));
    }
    if let Some(u) = root_mark {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::invalid("root mark must lie in (0, 1]"));
        }
        if !specs.iter().any(|s| s.is_root()) {
            return Err(Error::invalid("root mark given but no root-source spec"));
        }
    }
    let max_r = specs.iter().map(|s| s.outer_radius).fold(0.0, f64::max);
    let window = opts.window_factor * max_r;
    let expected = params.lambda * ball_volume(params.dim, window);
    if expected > opts.vertex_cap {
        return Err(Error::ResourceExhausted { expected, cap: opts.vertex_cap });
    }
    let need_root = specs.iter().any(|s| s.is_root());
    let need_pair_edges = specs
        .iter()
        .any(|s| !s.is_root() || s.edge_budget.at_least(2));
    let strategy = opts.strategy.unwrap_or(if expected > 3000.0 {
        EdgeStrategy::CellGrid
    } else {
        EdgeStrategy::Naive
    });
    let plan = TrialPlan {
        params,
        specs,
        root_mark,
        need_root,
        need_pair_edges,
        strategy,
        window,
        prune_radius: max_r,
        master_seed: opts.master_seed,
        cap: opts.vertex_cap,
    };

    let workers = resolve_workers(opts.workers).min(opts.trials as usize).max(1);
    let indicators: Vec<AtomicU64> = if record_indicators {
        (0..opts.trials).map(|_| AtomicU64::new(0)).collect()
    } else {
        Vec::new()
    };
    let counter = AtomicU64::new(0);
    let n_specs = specs.len();
    let trials = opts.trials;

    let totals: Result<Vec<Vec<u64>>> = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for _ in 0..workers {
            let plan = &plan;
            let counter = &counter;
            let indicators = &indicators;
            handles.push(scope.spawn(move || -> Result<Vec<u64>> {
                const BATCH: u64 = 32;
                let mut local = vec![0u64; n_specs];
                let mut scratch = WorkerScratch::default();
                loop {
                    let start = counter.fetch_add(BATCH, Ordering::Relaxed);
                    if start >= trials {
                        return Ok(local);
                    }
                    for trial in start..(start + BATCH).min(trials) {
                        let bits = plan.run(trial, &mut scratch)?;
                        for (s, count) in local.iter_mut().enumerate() {
                            *count += bits >> s & 1;
                        }
                        if record_indicators {
                            indicators[trial as usize].store(bits, Ordering::Relaxed);
                        }
                    }
                }
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("estimator worker panicked"))
            .collect()
    });
    let mut successes = vec![0u64; n_specs];
    for local in totals? {
        for (s, count) in local.into_iter().enumerate() {
            successes[s] += count;
        }
    }

    // Tail bound for the planted mark when it is fixed; mark 1 underestimates
    // stronger roots, so the fixed-mark value is the honest default.
    let tail = truncation_tail(params, root_mark.unwrap_or(1.0), window)?;
    let bits = indicators.into_iter().map(|a| a.into_inner()).collect();
    Ok((successes, bits, window, tail))
}

/// Monte Carlo estimate of a single crossing/escape event. For root-source
/// specs `root_mark` plants `(0, u)`; leaving it `None` plants the Palm root
/// `(0, U)` with `U` uniform.
pub fn estimate_event(
    params: &ModelParams,
    spec: &EventSpec,
    root_mark: Option<f64>,
    opts: &EstimateOptions,
) -> Result<EventEstimate> {
    let (successes, _, window, tail) =
        run_trials(params, std::slice::from_ref(spec), root_mark, opts, false)?;
    Ok(EventEstimate {
        estimate: BernoulliEstimate::new(opts.trials, successes[0], opts.master_seed)?,
        window_radius: window,
        truncation_tail: tail,
    })
}

/// Evaluate several specs on the same graph per trial, retaining the
/// indicator bitmask of every trial.
pub fn coupled_estimate(
    params: &ModelParams,
    specs: &[EventSpec],
    root_mark: Option<f64>,
    opts: &EstimateOptions,
) -> Result<CoupledEstimates> {
    let (successes, indicators, window, tail) =
        run_trials(params, specs, root_mark, opts, true)?;
    let estimates = successes
        .into_iter()
        .map(|s| BernoulliEstimate::new(opts.trials, s, opts.master_seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoupledEstimates { estimates, indicators, window_radius: window, truncation_tail: tail })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub points_used: usize,
}

/// Weighted least squares of `log p_hat` on `log scale`, with delta-method
/// weights `trials * p / (1 - p)`. Points with fewer than
/// [`MIN_FIT_SUCCESSES`] successes are dropped.
pub fn fit_log_slope(points: &[(f64, BernoulliEstimate)]) -> Result<SlopeFit> {
    fit_log_slope_with(points, MIN_FIT_SUCCESSES)
}

pub fn fit_log_slope_with(
    points: &[(f64, BernoulliEstimate)],
    min_successes: u64,
) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput("slope fits need at least 3 points".into()));
    }
    for (scale, est) in points {
        if !(*scale > 0.0) {
            return Err(Error::DegenerateInput("scales must be positive".into()));
        }
        if est.successes == 0 {
            return Err(Error::DegenerateInput(
                "zero-success points cannot enter a log fit".into(),
            ));
        }
    }
    let usable: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|(_, est)| est.successes >= min_successes)
        .map(|(scale, est)| {
            let w = est.trials as f64 * est.p_hat / (1.0 - est.p_hat).max(1e-12);
            (scale.ln(), est.p_hat.ln(), w)
        })
        .collect();
    if usable.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "only {} of {} points are well-resolved (need 3)",
            usable.len(),
            points.len()
        )));
    }
    let x_min = usable.iter().map(|(x, _, _)| *x).fold(f64::INFINITY, f64::min);
    let x_max = usable.iter().map(|(x, _, _)| *x).fold(f64::NEG_INFINITY, f64::max);
    if x_max - x_min < 1e-12 {
        return Err(Error::DegenerateInput("all scales are equal".into()));
    }
    let wsum: f64 = usable.iter().map(|(_, _, w)| w).sum();
    let xbar: f64 = usable.iter().map(|(x, _, w)| w * x).sum::<f64>() / wsum;
    let ybar: f64 = usable.iter().map(|(_, y, w)| w * y).sum::<f64>() / wsum;
    let sxx: f64 = usable.iter().map(|(x, _, w)| w * (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = usable.iter().map(|(x, y, w)| w * (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: ybar - slope * xbar,
        slope_stderr: (1.0 / sxx).sqrt(),
        points_used: usable.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::{EdgeBudget, EventSource};

    fn soft(d: u32, lambda: f64, gamma: f64, delta: f64) -> ModelParams {
        ModelParams::soft(d, lambda, gamma, delta).unwrap()
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100, 1.96).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 1.96 * 1.96 / (100.0 + 1.96 * 1.96)).abs() < 1e-12);
        assert!((hi - 0.03700).abs() < 5e-5);

        let (lo, hi) = wilson_interval(100, 100, 1.96).unwrap();
        assert_eq!(hi, 1.0);
        assert!((lo - 0.96300).abs() < 5e-5);

        // Direct evaluation of the score interval at p = 1/2.
        let z: f64 = 1.96;
        let n = 100.0;
        let denom = 1.0 + z * z / n;
        let center = (0.5 + z * z / (2.0 * n)) / denom;
        let half = z * (0.25 / n + z * z / (4.0 * n * n)).sqrt() / denom;
        let (lo, hi) = wilson_interval(50, 100, z).unwrap();
        assert!((lo - (center - half)).abs() < 1e-12);
        assert!((hi - (center + half)).abs() < 1e-12);
        assert!((lo - 0.40383).abs() < 5e-5 && (hi - 0.59617).abs() < 5e-5);

        assert!(wilson_interval(5, 0, 1.96).is_err());
        assert!(wilson_interval(5, 4, 1.96).is_err());
    }

    #[test]
    fn estimate_is_deterministic_across_worker_counts() {
        let params = soft(1, 0.5, 0.25, 3.0);
        let spec = EventSpec::root(4.0, EdgeBudget::Limited(2)).unwrap();
        let serial = estimate_event(
            &params,
            &spec,
            Some(0.5),
            &EstimateOptions::new(4000, 99).workers(1),
        )
        .unwrap();
        let parallel = estimate_event(
            &params,
            &spec,
            Some(0.5),
            &EstimateOptions::new(4000, 99).workers(8),
        )
        .unwrap();
        assert_eq!(serial.estimate.successes, parallel.estimate.successes);
        assert_eq!(serial.truncation_tail, parallel.truncation_tail);
    }

    #[test]
    fn estimate_matches_the_exact_oracle() {
        // Hard r0 = 1, gamma = 1/3, d = 1, lambda = 1, u = 1, R = 2, W = 32.
        let params = ModelParams::hard(1, 1.0, 1.0 / 3.0, 1.0).unwrap();
        let spec = EventSpec::root(2.0, EdgeBudget::Limited(1)).unwrap();
        let opts = EstimateOptions::new(40_000, 7).window_factor(16.0);
        let est = estimate_event(&params, &spec, Some(1.0), &opts).unwrap();
        let exact =
            crate::oracle::exact_one_edge_escape(&params, 1.0, 2.0, est.window_radius).unwrap();
        assert!((exact - 0.2205).abs() < 5e-4, "oracle sanity: {exact}");
        let sigma = (exact * (1.0 - exact) / opts.trials as f64).sqrt();
        assert!(
            (est.estimate.p_hat - exact).abs() < 3.0 * sigma,
            "p_hat {} vs exact {exact}",
            est.estimate.p_hat
        );
    }

    #[test]
    fn coupled_indicators_are_monotone_and_consistent() {
        let params = soft(2, 0.4, 0.3, 2.6);
        let specs = [
            EventSpec::ball(2.0, 6.0, EdgeBudget::Limited(1)).unwrap(),
            EventSpec::ball(2.0, 6.0, EdgeBudget::Limited(2)).unwrap(),
            EventSpec::ball(2.0, 6.0, EdgeBudget::Unbounded).unwrap(),
            EventSpec::ball(3.0, 6.0, EdgeBudget::Unbounded).unwrap(),
        ];
        let opts = EstimateOptions::new(1500, 41).window_factor(2.0);
        let coupled = coupled_estimate(&params, &specs, None, &opts).unwrap();
        for bits in &coupled.indicators {
            // Budget chain within (r, R), then inclusion into the wider ball.
            assert!(bits & 1 == 0 || bits & 2 != 0);
            assert!(bits & 2 == 0 || bits & 4 != 0);
            assert!(bits & 4 == 0 || bits & 8 != 0);
        }
        let s = &coupled.estimates;
        assert!(s[0].p_hat <= s[1].p_hat && s[1].p_hat <= s[2].p_hat);

        // A singleton coupled run reproduces estimate_event exactly.
        let single = coupled_estimate(&params, &specs[..1], None, &opts).unwrap();
        let direct = estimate_event(&params, &specs[0], None, &opts).unwrap();
        assert_eq!(single.estimates[0].successes, direct.estimate.successes);
    }

    #[test]
    fn root_only_fast_path_agrees_with_full_sampling() {
        // k = 1 root events ignore pair edges, so forcing the full graph must
        // reproduce the fast path bit for bit.
        let params = soft(1, 0.8, 0.25, 3.0);
        let spec = EventSpec::root(3.0, EdgeBudget::Limited(1)).unwrap();
        let fast = estimate_event(&params, &spec, Some(0.7), &EstimateOptions::new(2000, 5))
            .unwrap();
        let k2 = EventSpec::root(3.0, EdgeBudget::Limited(2)).unwrap();
        let full = coupled_estimate(
            &params,
            &[spec, k2],
            Some(0.7),
            &EstimateOptions::new(2000, 5),
        )
        .unwrap();
        assert_eq!(fast.estimate.successes, full.estimates[0].successes);
    }

    #[test]
    fn option_validation() {
        let params = soft(1, 0.5, 0.25, 3.0);
        let ball = EventSpec::ball(1.0, 4.0, EdgeBudget::Limited(1)).unwrap();
        let mut opts = EstimateOptions::new(10, 1);
        opts.window_factor = 1.5;
        assert!(estimate_event(&params, &ball, None, &opts).is_err());
        let opts = EstimateOptions::new(10, 1);
        assert!(estimate_event(&params, &ball, Some(0.5), &opts).is_err());
        assert!(estimate_event(&params, &ball, None, &EstimateOptions::new(0, 1)).is_err());
        let huge = EventSpec::ball(1.0, 1e6, EdgeBudget::Limited(1)).unwrap();
        let err = estimate_event(&soft(3, 10.0, 0.25, 3.0), &huge, None, &EstimateOptions::new(1, 1))
            .unwrap_err();
        assert!(matches!(err, Error::ResourceExhausted { .. }));
    }

    #[test]
    fn palm_specs_sample_the_root_mark() {
        let params = soft(1, 0.3, 0.3, 3.0);
        let spec = EventSpec { source: EventSource::Root, outer_radius: 3.0, edge_budget: EdgeBudget::Limited(1) };
        let a = estimate_event(&params, &spec, None, &EstimateOptions::new(5000, 3)).unwrap();
        let b = estimate_event(&params, &spec, Some(1.0), &EstimateOptions::new(5000, 3)).unwrap();
        // The palm average over marks strictly dominates the weakest mark.
        assert!(a.estimate.p_hat > b.estimate.p_hat);
    }

    #[test]
    fn slope_fit_examples() {
        // Exact power law p = c s^-2 with integral success counts.
        let trials = 1 << 16;
        let points: Vec<(f64, BernoulliEstimate)> = [4.0f64, 8.0, 16.0, 32.0]
            .iter()
            .map(|&s| {
                let p = 0.5 * s.powi(-2);
                let successes = (p * trials as f64).round() as u64;
                (s, BernoulliEstimate::new(trials, successes, 0).unwrap())
            })
            .collect();
        let fit = fit_log_slope(&points).unwrap();
        assert!((fit.slope - -2.0).abs() < 1e-12, "slope {}", fit.slope);
        assert_eq!(fit.points_used, 4);

        // Constant p gives slope 0.
        let flat: Vec<(f64, BernoulliEstimate)> = [2.0f64, 4.0, 8.0]
            .iter()
            .map(|&s| (s, BernoulliEstimate::new(1000, 100, 0).unwrap()))
            .collect();
        let fit = fit_log_slope(&flat).unwrap();
        assert!(fit.slope.abs() < 1e-12);

        // Degenerate inputs.
        assert!(fit_log_slope(&flat[..2]).is_err());
        let mut zeroed = flat.clone();
        zeroed[0].1 = BernoulliEstimate::new(1000, 0, 0).unwrap();
        assert!(fit_log_slope(&zeroed).is_err());
        let same: Vec<(f64, BernoulliEstimate)> =
            (0..3).map(|_| (4.0, BernoulliEstimate::new(1000, 100, 0).unwrap())).collect();
        assert!(fit_log_slope(&same).is_err());
    }

    #[test]
    fn slope_fit_recovers_a_synthetic_exponent() {
        // Binomial draws around p = s^-1.5.
        let mut rng = crate::rng::stream(2024, 0, StreamLabel::PairEdges);
        let trials = 1_000_000u64;
        let points: Vec<(f64, BernoulliEstimate)> = [4.0f64, 8.0, 16.0, 32.0]
            .iter()
            .map(|&s| {
                let p = s.powf(-1.5);
                // Normal approximation to the binomial is fine at these sizes.
                let mean = trials as f64 * p;
                let sd = (trials as f64 * p * (1.0 - p)).sqrt();
                let g: f64 = rand_distr::Distribution::sample(
                    &rand_distr::StandardNormal,
                    &mut rng,
                );
                let successes = (mean + sd * g).round().max(0.0) as u64;
                (s, BernoulliEstimate::new(trials, successes, 0).unwrap())
            })
            .collect();
        let fit = fit_log_slope(&points).unwrap();
        assert!(
            (fit.slope - -1.5).abs() < 3.0 * fit.slope_stderr,
            "slope {} +- {}",
            fit.slope,
            fit.slope_stderr
        );
    }

    #[test]
    fn low_quality_points_are_excluded() {
        let mut points: Vec<(f64, BernoulliEstimate)> = [2.0f64, 4.0, 8.0, 16.0]
            .iter()
            .map(|&s| (s, BernoulliEstimate::new(1000, 100, 0).unwrap()))
            .collect();
        points.push((32.0, BernoulliEstimate::new(1000, 3, 0).unwrap()));
        let fit = fit_log_slope(&points).unwrap();
        assert_eq!(fit.points_used, 4);
    }
}
