//! Deterministic parallel Monte Carlo simulation of the walks — the second
//! independent oracle against the closed forms.
//!
//! Every walk owns a counter-derived [`SplitMix64`] stream, so walk `i`
//! produces the same trajectory no matter which thread runs it or in which
//! order. All tallies are exact integers (visit counts, squared visit counts,
//! absorption counts, circumferential hop lengths) merged by integer
//! addition, which is associative, so the final estimate is bit-for-bit
//! reproducible across thread counts and work-stealing schedules. Floating
//! point only enters when the merged integer tallies are converted to means
//! and standard errors at the end.

use crate::closed_form::AbsorptionDistribution;
use crate::lattice::{LatticeKind, ValidatedSpec};
use crate::ExpectationField;
use rayon::prelude::*;

/// SplitMix64 pseudo-random generator: 64 bits of state, one output per
/// state increment. Small, fast, and splittable by construction — ideal for
/// one-stream-per-walk use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output scrambler (a bijection on 64-bit words).
fn scramble(z: u64) -> u64 {
    let z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    /// Stream with the given raw state.
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Decorrelated stream for one walk of one run: the walk id is spread by
    /// an odd multiplier and scrambled into the seed, so distinct walk ids
    /// always map to distinct stream states.
    pub fn for_walk(seed: u64, walk_id: u64) -> Self {
        SplitMix64 {
            state: scramble(seed ^ walk_id.wrapping_mul(0xD1B5_4A32_D192_ED03)),
        }
    }

    /// Next 64 uniformly distributed bits.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        scramble(self.state)
    }

    /// Uniform double in `[0, 1)` built from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Simulation size, seed and safety cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    /// Number of independent walks.
    pub walks: u64,
    /// Base seed; two runs with equal seed and walk count are identical.
    pub seed: u64,
    /// Hard per-walk step cap. Walks that reach it are tallied as truncated
    /// (their visits so far still count). The default of `10^8` is far beyond
    /// any realistic absorption time, so truncation normally never happens.
    pub max_steps: u64,
}

impl McConfig {
    pub fn new(walks: u64, seed: u64) -> Self {
        McConfig {
            walks,
            seed,
            max_steps: 100_000_000,
        }
    }
}

/// One hop kernel flattened for sampling: offsets plus cumulative
/// probability thresholds (last threshold exactly 1).
struct SamplingKernel {
    offsets: Vec<(i64, i64)>,
    thresholds: Vec<f64>,
}

impl SamplingKernel {
    fn new(weighted: &[(i64, i64, f64)]) -> Self {
        let total: f64 = weighted.iter().map(|w| w.2).sum();
        let mut acc = 0.0;
        let mut offsets = Vec::with_capacity(weighted.len());
        let mut thresholds = Vec::with_capacity(weighted.len());
        for &(dp, dq, w) in weighted {
            acc += w / total;
            offsets.push((dp, dq));
            thresholds.push(acc);
        }
        *thresholds.last_mut().expect("kernels are non-empty") = 1.0;
        SamplingKernel {
            offsets,
            thresholds,
        }
    }

    fn sample(&self, u: f64) -> (i64, i64) {
        let k = self
            .thresholds
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.thresholds.len() - 1);
        self.offsets[k]
    }
}

/// Exact integer tallies of one batch of walks. Merging two tallies is
/// integer addition per slot, so the grand total is independent of how the
/// walks were batched across threads.
struct Tally {
    visits: Vec<u64>,
    visits_sq: Vec<u128>,
    /// Walks absorbed at `(p, 0)`, indexed by `p`.
    left_counts: Vec<u64>,
    /// Walks absorbed at `(p, n+1)`, indexed by `p`.
    right_counts: Vec<u64>,
    truncated: u64,
    ring_steps: u64,
    /// Per-walk scratch: visit counts of the current walk and the list of
    /// touched slots (excluded from merging).
    scratch: Vec<u64>,
    touched: Vec<u32>,
}

impl Tally {
    fn new(slots: usize, columns: usize) -> Self {
        Tally {
            visits: vec![0; slots],
            visits_sq: vec![0; slots],
            left_counts: vec![0; columns],
            right_counts: vec![0; columns],
            truncated: 0,
            ring_steps: 0,
            scratch: vec![0; slots],
            touched: Vec::new(),
        }
    }

    fn touch(&mut self, slot: usize) {
        if self.scratch[slot] == 0 {
            self.touched.push(slot as u32);
        }
        self.scratch[slot] += 1;
    }

    /// Folds the current walk's scratch counts into the running sums and
    /// clears the scratch.
    fn commit_walk(&mut self) {
        for &slot in &self.touched {
            let slot = slot as usize;
            let c = self.scratch[slot];
            self.visits[slot] += c;
            self.visits_sq[slot] += (c as u128) * (c as u128);
            self.scratch[slot] = 0;
        }
        self.touched.clear();
    }

    fn merge(mut self, other: Tally) -> Tally {
        debug_assert!(self.touched.is_empty() && other.touched.is_empty());
        for (a, b) in self.visits.iter_mut().zip(&other.visits) {
            *a += b;
        }
        for (a, b) in self.visits_sq.iter_mut().zip(&other.visits_sq) {
            *a += b;
        }
        for (a, b) in self.left_counts.iter_mut().zip(&other.left_counts) {
            *a += b;
        }
        for (a, b) in self.right_counts.iter_mut().zip(&other.right_counts) {
            *a += b;
        }
        self.truncated += other.truncated;
        self.ring_steps += other.ring_steps;
        self
    }
}

/// Monte Carlo estimate of the expectation field with per-site standard
/// errors and absorption statistics.
#[derive(Debug, Clone)]
pub struct McEstimate {
    mean: ExpectationField,
    /// Standard error of each site mean, same grid layout as the field.
    se: Vec<f64>,
    /// Exact per-column absorption counts at `q = 0` and `q = n+1`.
    left_counts: Vec<u64>,
    right_counts: Vec<u64>,
    walks: u64,
    truncated: u64,
    mean_revolutions: f64,
}

impl McEstimate {
    /// Per-site sample means of interior visit counts as a field (absorbing
    /// rows and zero mesh hold exact zeros, like the analytic field).
    pub fn field(&self) -> &ExpectationField {
        &self.mean
    }

    /// Standard error of the mean at `(p, q)`. Zero on sites that no walk
    /// ever visited.
    pub fn se(&self, p: i64, q: i64) -> f64 {
        let spec = self.mean.spec();
        assert!(
            (0..=spec.n() + 1).contains(&q),
            "q = {q} outside 0..={}",
            spec.n() + 1
        );
        self.se[(spec.wrap_p(p) * (spec.n() + 2) + q) as usize]
    }

    pub fn walks(&self) -> u64 {
        self.walks
    }

    /// Walks that hit the step cap before being absorbed.
    pub fn truncated(&self) -> u64 {
        self.truncated
    }

    /// Exact number of walks absorbed at each site of the `q = 0` row,
    /// indexed by `p`.
    pub fn left_counts(&self) -> &[u64] {
        &self.left_counts
    }

    /// Exact number of walks absorbed at each site of the `q = n+1` row,
    /// indexed by `p`.
    pub fn right_counts(&self) -> &[u64] {
        &self.right_counts
    }

    pub fn absorbed_left(&self) -> u64 {
        self.left_counts.iter().sum()
    }

    pub fn absorbed_right(&self) -> u64 {
        self.right_counts.iter().sum()
    }

    /// The estimated absorption distribution (per-column counts divided by
    /// the number of walks).
    pub fn absorption(&self) -> AbsorptionDistribution {
        let w = self.walks as f64;
        AbsorptionDistribution::new(
            self.left_counts.iter().map(|&c| c as f64 / w).collect(),
            self.right_counts.iter().map(|&c| c as f64 / w).collect(),
        )
    }

    /// Estimated probability of leaving through `q = 0`.
    pub fn total_left(&self) -> f64 {
        self.absorbed_left() as f64 / self.walks as f64
    }

    /// Estimated probability of leaving through `q = n+1`.
    pub fn total_right(&self) -> f64 {
        self.absorbed_right() as f64 / self.walks as f64
    }

    /// Binomial standard error of [`Self::total_left`].
    pub fn total_left_se(&self) -> f64 {
        let p = self.total_left();
        (p * (1.0 - p) / self.walks as f64).sqrt()
    }

    /// Binomial standard error of [`Self::total_right`].
    pub fn total_right_se(&self) -> f64 {
        let p = self.total_right();
        (p * (1.0 - p) / self.walks as f64).sqrt()
    }

    /// Average circumferential distance travelled per walk, in full turns
    /// around the tube.
    pub fn mean_revolutions(&self) -> f64 {
        self.mean_revolutions
    }
}

/// Runs `config.walks` independent walks from the source and tallies visits
/// and absorptions. Deterministic for a fixed `(walks, seed, max_steps)`
/// regardless of thread count.
///
/// # Panics
/// If `config.walks` is zero.
pub fn simulate(spec: &ValidatedSpec, config: &McConfig) -> McEstimate {
    assert!(config.walks > 0, "need at least one walk");
    let (m, n) = (spec.m(), spec.n());
    let circ = spec.circumference();
    let slots = ((m + 1) * (n + 2)) as usize;
    let eta = spec.eta();

    // Flattened kernels. The honeycomb axial bond flips direction with the
    // parity of p+q; the other lattices use one kernel everywhere.
    let kernels: Vec<SamplingKernel> = match spec.kind() {
        LatticeKind::Square => vec![SamplingKernel::new(&[
            (-1, 0, 1.0),
            (1, 0, 1.0),
            (0, -1, eta),
            (0, 1, eta),
        ])],
        LatticeKind::Triangular => vec![SamplingKernel::new(&[
            (-2, 0, 1.0),
            (2, 0, 1.0),
            (-1, -1, eta),
            (-1, 1, eta),
            (1, -1, eta),
            (1, 1, eta),
        ])],
        LatticeKind::Honeycomb => vec![
            SamplingKernel::new(&[(-1, 0, 1.0), (1, 0, 1.0), (0, 1, eta)]),
            SamplingKernel::new(&[(-1, 0, 1.0), (1, 0, 1.0), (0, -1, eta)]),
        ],
    };
    let source_parity = (spec.a() + spec.b()).rem_euclid(2);
    let kernel_for = |p: i64, q: i64| -> &SamplingKernel {
        if kernels.len() == 1 || (p + q).rem_euclid(2) == source_parity {
            &kernels[0]
        } else {
            &kernels[1]
        }
    };

    let (a, b) = (spec.a(), spec.b());
    let bipartite = spec.kind() == LatticeKind::Honeycomb;
    let run_walk = |tally: &mut Tally, walk_id: u64| {
        let mut rng = SplitMix64::for_walk(config.seed, walk_id);
        let (mut p, mut q) = (a, b);
        tally.touch((p * (n + 2) + q) as usize);
        let mut absorbed = false;
        for _ in 0..config.max_steps {
            let (dp, dq) = kernel_for(p, q).sample(rng.next_f64());
            if bipartite {
                // Every honeycomb hop must flip the ⊢/⊣ orientation.
                debug_assert_eq!((dp + dq).rem_euclid(2), 1);
            }
            p += dp;
            if p < 0 {
                p += circ;
            } else if p >= circ {
                p -= circ;
            }
            q += dq;
            tally.ring_steps += dp.unsigned_abs();
            if q == 0 {
                tally.left_counts[p as usize] += 1;
                absorbed = true;
                break;
            }
            if q == n + 1 {
                tally.right_counts[p as usize] += 1;
                absorbed = true;
                break;
            }
            tally.touch((p * (n + 2) + q) as usize);
        }
        if !absorbed {
            tally.truncated += 1;
        }
        tally.commit_walk();
    };

    let columns = circ as usize;
    let tally = (0..config.walks)
        .into_par_iter()
        .fold(
            || Tally::new(slots, columns),
            |mut tally, walk_id| {
                run_walk(&mut tally, walk_id);
                tally
            },
        )
        .reduce(|| Tally::new(slots, columns), Tally::merge);

    let walks = config.walks as f64;
    let mut mean = Vec::with_capacity(slots);
    let mut se = Vec::with_capacity(slots);
    for i in 0..slots {
        let sum = tally.visits[i] as f64;
        let avg = sum / walks;
        mean.push(avg);
        if config.walks > 1 {
            // Sample variance from the exact integer moments.
            let var = ((tally.visits_sq[i] as f64) - sum * avg) / (walks - 1.0);
            se.push((var.max(0.0) / walks).sqrt());
        } else {
            se.push(0.0);
        }
    }
    McEstimate {
        mean: ExpectationField::from_values(spec.clone(), mean),
        se,
        left_counts: tally.left_counts,
        right_counts: tally.right_counts,
        walks: config.walks,
        truncated: tally.truncated,
        mean_revolutions: tally.ring_steps as f64 / (walks * circ as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TubeSpec;

    fn spec(kind: LatticeKind, m: i64, n: i64, eta: f64, a: i64, b: i64) -> ValidatedSpec {
        TubeSpec::new(kind, m, n, eta, a, b)
            .validate()
            .expect("test spec must validate")
    }

    #[test]
    fn splitmix_produces_known_sequence() {
        // Reference values for seed 1234567 (state increments of the golden
        // gamma followed by the standard output scrambler).
        let mut rng = SplitMix64::new(1234567);
        let first: Vec<u64> = (0..3).map(|_| rng.next_u64()).collect();
        assert_eq!(
            first,
            vec![
                6457827717110365317,
                3203168211198807973,
                9817491932198370423
            ]
        );
    }

    #[test]
    fn uniform_doubles_stay_in_unit_interval() {
        let mut rng = SplitMix64::new(42);
        let mut sum = 0.0;
        for _ in 0..10_000 {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        // Mean of 10^4 uniforms is 0.5 ± ~0.003; allow 6 sigma.
        assert!((sum / 10_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn walk_streams_differ_and_are_stable() {
        let a: Vec<u64> = {
            let mut rng = SplitMix64::for_walk(7, 0);
            (0..4).map(|_| rng.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut rng = SplitMix64::for_walk(7, 1);
            (0..4).map(|_| rng.next_u64()).collect()
        };
        assert_ne!(a, b);
        let a_again: Vec<u64> = {
            let mut rng = SplitMix64::for_walk(7, 0);
            (0..4).map(|_| rng.next_u64()).collect()
        };
        assert_eq!(a, a_again);
    }

    #[test]
    fn simulation_is_bit_for_bit_deterministic() {
        let s = spec(LatticeKind::Honeycomb, 5, 6, 1.3, 2, 3);
        let config = McConfig::new(20_000, 99);
        let one = simulate(&s, &config);
        let two = simulate(&s, &config);
        assert_eq!(one.field(), two.field());
        assert_eq!(one.absorbed_left(), two.absorbed_left());
        assert_eq!(one.absorbed_right(), two.absorbed_right());
        assert_eq!(one.mean_revolutions(), two.mean_revolutions());
    }

    #[test]
    fn determinism_holds_across_thread_counts() {
        let s = spec(LatticeKind::Square, 3, 5, 0.8, 1, 2);
        let config = McConfig::new(10_000, 7);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate(&s, &config));
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| simulate(&s, &config));
        assert_eq!(single.field(), multi.field());
        assert_eq!(single.absorbed_left(), multi.absorbed_left());
        assert_eq!(single.truncated(), multi.truncated());
    }

    #[test]
    fn estimates_track_the_exact_unit_tube_values() {
        // m=1, n=1, η=1 square tube: F(0,1)=4/3, F(1,1)=2/3, each end takes
        // exactly half the walks.
        let s = spec(LatticeKind::Square, 1, 1, 1.0, 0, 1);
        let est = simulate(&s, &McConfig::new(200_000, 2024));
        assert_eq!(est.truncated(), 0);
        assert_eq!(est.absorbed_left() + est.absorbed_right(), est.walks());
        for (p, q, exact) in [(0, 1, 4.0 / 3.0), (1, 1, 2.0 / 3.0)] {
            let err = (est.field().value(p, q) - exact).abs();
            let se = est.se(p, q);
            assert!(se > 0.0);
            assert!(err < 5.0 * se, "site ({p},{q}): err {err} vs se {se}");
        }
        // Per-site absorption estimates carry binomial standard errors.
        let g = est.absorption();
        let w = est.walks() as f64;
        for (got, exact) in [(g.left()[0], 1.0 / 3.0), (g.right()[1], 1.0 / 6.0)] {
            let se = (exact * (1.0 - exact) / w).sqrt();
            assert!(
                (got - exact).abs() < 5.0 * se,
                "end estimate {got} vs {exact}"
            );
        }
        assert!((est.total_left() - 0.5).abs() < 5.0 * est.total_left_se());
    }

    #[test]
    fn honeycomb_estimates_respect_orientation_structure() {
        // m=3, n=1, η=1: F(0,1)=7/5, F(2,1)=2/5, F(1,1)=F(3,1)=3/5; walks can
        // only exit left through ⊣ columns and right through ⊢ columns.
        let s = spec(LatticeKind::Honeycomb, 3, 1, 1.0, 0, 1);
        let est = simulate(&s, &McConfig::new(150_000, 11));
        for (p, q, exact) in [(0, 1, 1.4), (2, 1, 0.4), (1, 1, 0.6), (3, 1, 0.6)] {
            let err = (est.field().value(p, q) - exact).abs();
            assert!(err < 5.0 * est.se(p, q), "site ({p},{q})");
        }
        // ⊢ columns never absorb on the left; the field grid itself keeps
        // exact zeros on the absorbing rows.
        assert_eq!(est.left_counts()[0], 0);
        assert_eq!(est.left_counts()[2], 0);
        assert!(est.left_counts()[1] > 0);
        assert_eq!(est.field().value(1, 0), 0.0);
        assert!(est.mean_revolutions() > 0.0);
    }

    #[test]
    fn triangular_walks_never_leave_the_source_parity_class() {
        let s = spec(LatticeKind::Triangular, 5, 4, 1.5, 1, 2);
        let est = simulate(&s, &McConfig::new(5_000, 3));
        for (p, q, v) in est.field().iter() {
            if !s.parity_matches_source(p, q) {
                assert_eq!(v, 0.0, "zero-mesh site ({p},{q}) was visited");
            }
        }
    }

    #[test]
    fn step_cap_truncates_and_reports() {
        let s = spec(LatticeKind::Square, 3, 9, 0.1, 0, 5);
        let mut config = McConfig::new(2_000, 5);
        config.max_steps = 3;
        let est = simulate(&s, &config);
        assert!(est.truncated() > 0);
        assert_eq!(
            est.truncated() + est.absorbed_left() + est.absorbed_right(),
            est.walks()
        );
    }
}
