mod common;

use mqwalk::unitary_avg::averaged_probability_matrix;
use mqwalk::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

/// Sample mean of `|U(t)[k,l]|^2` over `t` uniform in `[0, t_max]`, with
/// `U(t)` summed directly from the spectral data.
fn sampled_average(model: &SpectralModel, t_max: f64, samples: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = model.n();
    let q = model.weights();
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for _ in 0..samples {
        let t: f64 = rng.gen_range(0.0..t_max);
        let phases: Vec<C64> = model.energies().iter().map(|e| C64::from_polar(1.0, -e * t)).collect();
        for k in 0..n {
            for l in 0..n {
                let u: C64 = (0..n).map(|j| phases[j] * q[(k, j)] * q[(l, j)].conj()).sum();
                acc[(k, l)] += u.norm_sqr();
            }
        }
    }
    acc / samples as f64
}

#[test]
fn monte_carlo_time_average_matches_spectral_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut checked = 0;
    while checked < 12 {
        let n = rng.gen_range(2..=5);
        let model = random_model(n, &mut rng);
        let mut e = model.energies().to_vec();
        e.sort_by(f64::total_cmp);
        let gap = e.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if gap < 0.05 {
            continue;
        }
        let want = averaged_probability_matrix(&model, 0.0).unwrap().entries;
        let got = sampled_average(&model, 2000.0 / gap, 20_000, &mut rng);
        let dev = real_matrix_max(&(&got - &want));
        assert!(dev <= 2e-2, "n={n} gap={gap:.3}: deviation {dev:e}");
        checked += 1;
    }
}

#[test]
fn monte_carlo_confirms_coherent_degenerate_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // levels 2 and 3 coincide; draw until the interference term is sizable
    let (model, want, naive) = loop {
        let q = random_unitary(4, &mut rng);
        let model = SpectralModel::new(vec![0.0, 1.3, 1.3, 2.9], q, 1e-10).unwrap();
        let want = averaged_probability_matrix(&model, 1e-9).unwrap();
        let q = model.weights();
        let naive = DMatrix::from_fn(4, 4, |k, l| {
            (0..4).map(|j| (q[(k, j)] * q[(l, j)].conj()).norm_sqr()).sum::<f64>()
        });
        if real_matrix_max(&(&want.entries - &naive)) > 0.05 {
            break (model, want, naive);
        }
    };
    assert_eq!(want.degeneracy_classes, vec![vec![1], vec![2, 3], vec![4]]);
    let got = sampled_average(&model, 4000.0, 20_000, &mut rng);
    assert!(real_matrix_max(&(&got - &want.entries)) <= 2e-2);
    // summing the degenerate pair incoherently is measurably wrong
    assert!(real_matrix_max(&(&got - &naive)) > 3e-2);
    let rows: Vec<f64> = (0..4).map(|k| want.entries.row(k).iter().sum()).collect();
    assert!(rows.iter().all(|r| (r - 1.0).abs() <= 1e-10));
}

#[test]
fn amplitudes_match_definition_at_paper_size() {
    for basis in [BasisKind::Localized, BasisKind::PlaneWave] {
        let model = SpectralModel::linear(&basis, 10, 1.0).unwrap();
        for j_tau in [0.04, 1.0, std::f64::consts::FRAC_PI_2] {
            for (m, i) in [(5, 5), (5, 1), (5, 9), (1, 10), (10, 3)] {
                let fast = amplitude_matrix_power(&model, m, i, j_tau, 50).unwrap();
                let slow = oracle_amplitudes(&model, m, i, j_tau, 50);
                let dev = max_dev(&fast.values, &slow);
                assert!(dev <= 1e-9, "{} {j_tau} ({m},{i}): {dev:e}", basis.name());
            }
        }
    }
}

/// Transposed localized basis: graph state `M` has no weight on the energy
/// states above `M`.
fn transposed_localized(n: usize) -> SpectralModel {
    let q = build_localized_basis(n).unwrap().transpose();
    SpectralModel::new(linear_spectrum(n, 1.0), q, 1e-10).unwrap()
}

/// Largest deviation of `<E_k|T^(m-1)|E_l>` from `delta_kl z_k^(2(m-1))` over
/// `M < k, l <= N` and `m <= steps`.
fn dark_block_deviation(model: &SpectralModel, measured: usize, tau: f64, steps: usize) -> f64 {
    let n = model.n();
    let op = monitored_matrix(model, measured, tau).unwrap();
    let z2: Vec<C64> = op.phases.z.iter().map(|z| z * z).collect();
    let mut power = CMatrix::identity(n, n);
    let mut worst = 0.0f64;
    for m in 1..=steps {
        if m > 1 {
            power = &power * &op.matrix;
        }
        for k in measured..n {
            for l in measured..n {
                let want = if k == l { z2[k].powi(m as i32 - 1) } else { C64::new(0.0, 0.0) };
                worst = worst.max((power[(k, l)] - want).norm());
            }
        }
    }
    worst
}

#[test]
fn dark_block_claim_needs_transposed_basis() {
    let n = 10;
    let tau = 1.0;
    let rows = SpectralModel::linear(&BasisKind::Localized, n, 1.0).unwrap();
    let cols = transposed_localized(n);
    for measured in 2..n {
        // with graph states as rows, q[M,k] = 1/sqrt(k(k-1)) != 0 above M
        let k = kernel(&rows, measured).unwrap();
        let off = (measured..n).map(|j| (k[(j, j)] - C64::new(1.0, 0.0)).norm()).fold(0.0, f64::max);
        assert!(off > 1e-3, "M={measured}: kernel diagonal unexpectedly exact");
        assert!(dark_block_deviation(&rows, measured, tau, 12) > 1e-2);

        // with the transposed convention the block is untouched
        let kt = kernel(&cols, measured).unwrap();
        for a in measured..n {
            for b in 0..n {
                let want = if a == b { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                assert!((kt[(a, b)] - want).norm() <= 1e-15);
                assert!((kt[(b, a)] - want).norm() <= 1e-15);
            }
        }
        assert!(dark_block_deviation(&cols, measured, tau, 12) <= 1e-12);
    }
}

#[test]
fn equivalent_initial_states_share_series() {
    let model = SpectralModel::linear(&BasisKind::Localized, 10, 1.0).unwrap();
    for j_tau in [1.0, std::f64::consts::FRAC_PI_2] {
        let classes = monitored::equivalence_classes(&model, 5, j_tau, 1e-12).unwrap();
        assert_eq!(classes[0], vec![1, 2, 3, 4]);
        for class in classes {
            let lead = amplitude_matrix_power(&model, 5, class[0], j_tau, 300).unwrap();
            for &other in &class[1..] {
                let s = amplitude_matrix_power(&model, 5, other, j_tau, 300).unwrap();
                assert!(lead.max_deviation(&s) <= 1e-12);
            }
        }
    }
}
