use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use turnover::luba::{
    distance_trend, exponential_prior, fit_chi, fit_chi_by_size, fit_chi_empirical,
    generate_synthetic, luba_nash, luba_payoffs, luba_turnover_equilibrium, per_auction_distances,
    AuctionDataset, EmpiricalAuction, FitOptions, LubaGame, LubaSolver, ProductIndex,
};
use turnover::SimplexDistribution;

/// Winner counts per bid (index `m` = no winner) when each bid value
/// receives a Poisson(`N x_j`) number of bids.
fn simulate_winners(n: f64, x: &[f64], samples: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<Option<Poisson<f64>>> = x
        .iter()
        .map(|&xi| (xi > 0.0).then(|| Poisson::new(n * xi).unwrap()))
        .collect();
    let mut counts = vec![0u64; x.len() + 1];
    for _ in 0..samples {
        let winner = dists
            .iter()
            .position(|d| d.as_ref().is_some_and(|d| d.sample(&mut rng) == 1.0))
            .unwrap_or(x.len());
        counts[winner] += 1;
    }
    counts
}

/// Chi-square z-score of observed winner counts against `N x_i pi_i`,
/// merging sparse bins.
fn winner_z(n: f64, x: &[f64], pi: &[f64], counts: &[u64], samples: usize) -> f64 {
    let s = samples as f64;
    let mut expected: Vec<f64> = x.iter().zip(pi).map(|(xi, p)| s * n * xi * p).collect();
    let none = s - expected.iter().sum::<f64>();
    expected.push(none.max(0.0));
    let (mut chi2, mut bins) = (0.0, 0usize);
    let (mut e_acc, mut o_acc) = (0.0, 0.0);
    for (e, &o) in expected.iter().zip(counts) {
        e_acc += e;
        o_acc += o as f64;
        if e_acc >= 5.0 {
            chi2 += (o_acc - e_acc).powi(2) / e_acc;
            bins += 1;
            e_acc = 0.0;
            o_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        chi2 += (o_acc - e_acc).powi(2) / e_acc.max(1e-300);
        bins += 1;
    }
    let df = (bins - 1) as f64;
    (chi2 - df) / (2.0 * df).sqrt()
}

#[test]
fn uniform_payoffs_match_winner_simulation() {
    let (n, m, samples) = (200.0, 100, 1_000_000);
    let x = vec![1.0 / m as f64; m];
    let mut pi = vec![0.0; m];
    luba_payoffs(n, &x, ProductIndex::Corrected, &mut pi);
    let counts = simulate_winners(n, &x, samples, 11);
    let z = winner_z(n, &x, &pi, &counts, samples);
    assert!(z < 3.0, "z = {z}");
    // the first bid by itself
    let se = (pi[0] * n * x[0] * (1.0 - pi[0] * n * x[0]) / samples as f64).sqrt();
    assert!((counts[0] as f64 / samples as f64 - n * x[0] * pi[0]).abs() < 3.0 * se);
}

#[test]
fn literal_index_disagrees_with_simulation() {
    let (n, samples) = (50.0, 1_000_000);
    let x = exponential_prior(0.15, 40).unwrap().into_vec();
    let counts = simulate_winners(n, &x, samples, 5);
    let mut pi = vec![0.0; x.len()];
    luba_payoffs(n, &x, ProductIndex::Corrected, &mut pi);
    assert!(winner_z(n, &x, &pi, &counts, samples) < 3.0);
    luba_payoffs(n, &x, ProductIndex::Literal, &mut pi);
    assert!(winner_z(n, &x, &pi, &counts, samples) > 10.0);
}

fn indifferent(game: &LubaGame, x: &SimplexDistribution, tol: f64) {
    let pi = game.payoffs(x).unwrap();
    let support: Vec<f64> = x
        .weights()
        .iter()
        .zip(&pi)
        .filter(|(w, _)| **w > 1e-6)
        .map(|(_, p)| *p)
        .collect();
    let hi = support.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = support.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi - lo <= tol, "spread {}", hi - lo);
    for (w, p) in x.weights().iter().zip(&pi) {
        if *w <= 1e-6 {
            assert!(*p <= hi + tol);
        }
    }
}

#[test]
fn small_auction_nash_is_indifferent() {
    let solver = LubaSolver::default();
    for (n, m) in [(5, 5), (1, 3), (1, 4), (3, 8)] {
        let game = LubaGame::new(n, m).unwrap();
        let nash = luba_nash(&game, &solver).unwrap();
        assert!((nash.distribution.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        indifferent(&game, &nash.distribution, 1e-6);
    }
}

#[test]
fn turnover_equilibrium_limits() {
    let solver = LubaSolver::default();
    let game = LubaGame::new(5, 5).unwrap();
    let strong = luba_turnover_equilibrium(&game, 1e4, 0.02, &solver).unwrap();
    let prior = exponential_prior(0.02, 5).unwrap();
    assert!(strong.distribution.distance_inf(&prior) < 1e-3);

    let weak = luba_turnover_equilibrium(&game, 1e-8, 0.02, &solver).unwrap();
    let nash = luba_nash(&game, &solver).unwrap();
    assert!(weak.distribution.distance_inf(&nash.distribution) < 1e-3);
}

fn fit_options() -> FitOptions {
    FitOptions {
        compute_nash: false,
        ..FitOptions::default()
    }
}

#[test]
fn exact_frequencies_recover_chi() {
    let chi = 0.0062;
    let opts = fit_options();
    let m = turnover::luba::default_max_bid(opts.beta_prior);
    let game = LubaGame::new(500, m).unwrap();
    let model = luba_turnover_equilibrium(&game, chi, opts.beta_prior, &opts.solver).unwrap();
    let empirical: Vec<EmpiricalAuction> = (0..3)
        .map(|k| EmpiricalAuction {
            id: format!("exact-{k}"),
            n_players: 500,
            frequencies: model.distribution.weights().to_vec(),
        })
        .collect();
    let fit = fit_chi_empirical(&empirical, &opts).unwrap();
    assert!(!fit.at_bound);
    assert!((fit.chi_hat / chi).ln().abs() < 2.0 * opts.rel_width, "chi_hat {}", fit.chi_hat);
    assert!(fit.d_turn < 1e-6);
}

#[test]
fn sampled_data_recover_chi() {
    let chi = 0.01;
    let opts = fit_options();
    let m = turnover::luba::default_max_bid(opts.beta_prior);
    let game = LubaGame::new(500, m).unwrap();
    let model = luba_turnover_equilibrium(&game, chi, opts.beta_prior, &opts.solver).unwrap();
    let data = generate_synthetic(&game, &model.distribution, 30, 7).unwrap();
    let fit = fit_chi(&data, &opts).unwrap();
    assert!((fit.chi_hat / chi - 1.0).abs() < 0.2, "chi_hat {}", fit.chi_hat);
    assert_eq!(fit.d_expected, 15_000.0);
    // a sampled dataset sits at the null distance scale
    assert!(fit.d_turn > 0.5 * fit.d_expected && fit.d_turn < 1.5 * fit.d_expected);
}

#[test]
fn model_sampled_distance_matches_null_expectation() {
    let (n, m, auctions, replicates) = (200u32, 120usize, 10usize, 200u64);
    let game = LubaGame::new(n, m).unwrap();
    let model = luba_turnover_equilibrium(&game, 0.01, 0.05, &LubaSolver::default()).unwrap();
    let x = model.distribution.weights();
    let mut models = std::collections::BTreeMap::new();
    models.insert(n, model.distribution.clone());

    let d: Vec<f64> = (0..replicates)
        .map(|r| {
            let data = generate_synthetic(&game, &model.distribution, auctions, 1000 + r).unwrap();
            per_auction_distances(&data.empirical(m), &models).unwrap().iter().sum()
        })
        .collect();
    let sum_n = (n as f64) * auctions as f64;
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
    let se = (var / d.len() as f64).sqrt();
    // multinomial sampling: E[d] = sum N (1 - sum x^2)
    let exact = sum_n * (1.0 - x.iter().map(|v| v * v).sum::<f64>());
    assert!((mean - exact).abs() < 3.0 * se, "mean {mean} exact {exact} se {se}");
    // each replicate within 3 sigma of sum N
    let inside = d.iter().filter(|v| (**v - sum_n).abs() < 3.0 * var.sqrt()).count();
    assert!(inside as f64 >= 0.95 * d.len() as f64, "{inside} of {}", d.len());
}

#[test]
fn stationary_sequences_show_no_trend() {
    let (n, m) = (30u32, 40usize);
    let game = LubaGame::new(n, m).unwrap();
    let nash = luba_nash(&game, &LubaSolver::default()).unwrap();
    let truth = exponential_prior(0.08, m).unwrap();
    let mut models = std::collections::BTreeMap::new();
    models.insert(n, nash.distribution.clone());
    let mut consistent = 0;
    for r in 0..100 {
        let data = generate_synthetic(&game, &truth, 20, 500 + r).unwrap();
        let d = per_auction_distances(&data.empirical(m), &models).unwrap();
        let t = distance_trend(&d).unwrap();
        if t.slope.abs() <= 2.0 * t.slope_stderr {
            consistent += 1;
        }
    }
    assert!(consistent >= 90, "{consistent} of 100");
}

#[test]
fn per_size_fits_rise_with_size() {
    let opts = fit_options();
    let m = turnover::luba::default_max_bid(opts.beta_prior);
    let mut auctions = Vec::new();
    for (k, (n, chi)) in [(100u32, 0.003), (250, 0.008), (500, 0.02)].into_iter().enumerate() {
        let game = LubaGame::new(n, m).unwrap();
        let model = luba_turnover_equilibrium(&game, chi, opts.beta_prior, &opts.solver).unwrap();
        let mut data = generate_synthetic(&game, &model.distribution, 20, 40 + k as u64).unwrap();
        for a in &mut data.auctions {
            a.id = format!("n{n}-{}", a.id);
        }
        auctions.extend(data.auctions);
    }
    let data = AuctionDataset { auctions };
    let fits = fit_chi_by_size(&data, &opts).unwrap();
    let chis: Vec<f64> = fits.iter().map(|(_, f)| f.chi_hat).collect();
    assert_eq!(fits.iter().map(|(n, _)| *n).collect::<Vec<_>>(), vec![100, 250, 500]);
    assert!(chis.windows(2).all(|w| w[1] > w[0]), "{chis:?}");
    let sizes: Vec<f64> = fits.iter().map(|(n, _)| *n as f64).collect();
    let trend = distance_trend(&chis).unwrap();
    assert!(trend.slope > 0.0, "{sizes:?} {chis:?}");
}

#[test]
fn fits_do_not_depend_on_worker_count() {
    let opts = fit_options();
    let m = 60;
    let mut auctions = Vec::new();
    for (k, n) in [20u32, 40, 60].into_iter().enumerate() {
        let game = LubaGame::new(n, m).unwrap();
        let prior = exponential_prior(0.05, m).unwrap();
        let mut data = generate_synthetic(&game, &prior, 4, k as u64).unwrap();
        for a in &mut data.auctions {
            a.id = format!("n{n}-{}", a.id);
        }
        auctions.extend(data.auctions);
    }
    let data = AuctionDataset { auctions };
    let base = FitOptions { beta_prior: 0.05, max_bid: Some(m), ..opts };
    let one = fit_chi(&data, &base).unwrap();
    let four = fit_chi(&data, &FitOptions { workers: 4, ..base }).unwrap();
    assert_eq!(one, four);
}

#[test]
fn sampling_stream_is_reproducible() {
    // guard against silent changes in the sampling stream
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a: f64 = rng.random();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b: f64 = rng.random();
    assert_eq!(a, b);
}
