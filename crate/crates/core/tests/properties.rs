mod common;

use gridseg::estimator::{regularized_means, soft_threshold};
use gridseg::grid::{quadrant_means, squared_loss};
use gridseg::segtree::{quarterly_segmentation, reconstruct_means, SegmentationConfig};
use gridseg::sim::{generate_grid, SimDesign};
use gridseg::{ChangePoint, DataGrid, QuadrantEstimate};
use proptest::prelude::*;

use common::{piecewise, quadrant_number};

fn grid_strategy(max_w: usize, max_h: usize, max_p: usize) -> impl Strategy<Value = DataGrid> {
    (2..=max_w, 2..=max_h, 1..=max_p).prop_flat_map(|(tw, th, p)| {
        prop::collection::vec(-3.0..3.0f64, tw * th * p).prop_map(move |v| DataGrid::new(tw, th, p, v).unwrap())
    })
}

fn grid_and_tau(max_w: usize, max_h: usize, max_p: usize) -> impl Strategy<Value = (DataGrid, ChangePoint)> {
    grid_strategy(max_w, max_h, max_p).prop_flat_map(|g| {
        let (tw, th) = (g.tw(), g.th());
        (Just(g), 1..tw, 1..th).prop_map(|(g, tau_w, tau_h)| (g, ChangePoint { tau_w, tau_h }))
    })
}

fn sample_means(g: &DataGrid, tau: ChangePoint) -> QuadrantEstimate {
    QuadrantEstimate::new(quadrant_means(g, tau).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn soft_threshold_composes(x in prop::collection::vec(-5.0..5.0f64, 1..12), a in 0.0..2.0f64, b in 0.0..2.0f64) {
        let twice = soft_threshold(&soft_threshold(&x, a).unwrap(), b).unwrap();
        let once = soft_threshold(&x, a + b).unwrap();
        for (u, v) in twice.iter().zip(&once) {
            prop_assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn soft_threshold_is_nonexpansive(x in prop::collection::vec(-5.0..5.0f64, 1..12), lambda in 0.0..3.0f64) {
        let y: Vec<f64> = x.iter().map(|v| v * 0.5 - 0.3).collect();
        let (kx, ky) = (soft_threshold(&x, lambda).unwrap(), soft_threshold(&y, lambda).unwrap());
        let d_in: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        let d_out: f64 = kx.iter().zip(&ky).map(|(a, b)| (a - b).powi(2)).sum();
        prop_assert!(d_out <= d_in + 1e-12);
    }

    #[test]
    fn thresholded_mean_solves_penalised_problem((g, tau) in grid_and_tau(6, 6, 3), lambda in 0.0..1.0f64, k in 0usize..3) {
        // k_lambda(m) minimises (m - t)^2 + 2 lambda |t| coordinatewise
        let est = regularized_means(&g, tau, [lambda; 4]).unwrap();
        let means = quadrant_means(&g, tau).unwrap();
        let k = k % g.p();
        for j in 0..4 {
            let (m, t) = (means[j].as_ref().unwrap()[k], est.theta()[j].as_ref().unwrap()[k]);
            let obj = |s: f64| (m - s).powi(2) + 2.0 * lambda * s.abs();
            for s in [t - 0.1, t + 0.1, t - 1e-3, t + 1e-3, 0.0, m] {
                prop_assert!(obj(t) <= obj(s) + 1e-12);
            }
        }
    }

    #[test]
    fn sample_means_minimise_the_loss((g, tau) in grid_and_tau(7, 7, 3), shift in -1.0..1.0f64, j in 0usize..4, k in 0usize..3) {
        let best = sample_means(&g, tau);
        let mut theta: [Vec<f64>; 4] = std::array::from_fn(|i| best.theta()[i].clone().unwrap());
        theta[j][k % g.p()] += shift;
        let moved = QuadrantEstimate::dense(theta).unwrap();
        prop_assert!(squared_loss(&g, tau, &best).unwrap() <= squared_loss(&g, tau, &moved).unwrap() + 1e-12);
    }

    #[test]
    fn loss_ignores_component_order((g, tau) in grid_and_tau(6, 6, 4), rot in 0usize..4) {
        let p = g.p();
        let perm = |v: &[f64]| -> Vec<f64> { (0..p).map(|k| v[(k + rot) % p]).collect() };
        let shuffled = DataGrid::from_fn(g.tw(), g.th(), p, |w, h| perm(g.cell(w, h).unwrap())).unwrap();
        let est = sample_means(&g, tau);
        let est_shuffled = QuadrantEstimate::dense(std::array::from_fn(|j| perm(est.theta()[j].as_ref().unwrap()))).unwrap();
        let (a, b) = (squared_loss(&g, tau, &est).unwrap(), squared_loss(&shuffled, tau, &est_shuffled).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn sample_means_match_accumulation((g, tau) in grid_and_tau(8, 8, 3)) {
        let means = quadrant_means(&g, tau).unwrap();
        let mut sums = [[0.0f64; 3]; 4];
        let mut counts = [0usize; 4];
        for w in 1..=g.tw() {
            for h in 1..=g.th() {
                let q = quadrant_number(w, h, tau) - 1;
                counts[q] += 1;
                for (s, x) in sums[q].iter_mut().zip(g.cell(w, h).unwrap()) {
                    *s += x;
                }
            }
        }
        for j in 0..4 {
            let m = means[j].as_ref().unwrap();
            for k in 0..g.p() {
                prop_assert!((m[k] - sums[j][k] / counts[j] as f64).abs() <= 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn segmentation_leaves_tile_the_grid(tw in 8usize..20, th in 8usize..20, fw in 0.2..0.8f64, fh in 0.2..0.8f64, seed in 0u64..1000) {
        use rand::SeedableRng;
        let tau = ChangePoint { tau_w: ((tw as f64 * fw) as usize).max(1), tau_h: ((th as f64 * fh) as usize).max(1) };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let clean = piecewise(tw, th, tau, &common::random_theta(&mut rng, 2, 2.0));
        let g = common::noisy(&mut rng, &clean, 0.3);
        let tree = quarterly_segmentation(&g, &SegmentationConfig::default()).unwrap();
        tree.validate().unwrap();

        let mut cover = vec![0u8; tw * th];
        for (_, leaf) in tree.leaves() {
            for w in leaf.domain.w_lo..=leaf.domain.w_hi {
                for h in leaf.domain.h_lo..=leaf.domain.h_hi {
                    cover[(w - 1) * th + (h - 1)] += 1;
                }
            }
        }
        prop_assert!(cover.iter().all(|&c| c == 1));

        // reconstruction preserves the grand total
        let rec = reconstruct_means(&g, &tree).unwrap();
        for k in 0..g.p() {
            let a: f64 = g.iter_cells().map(|(_, x)| x[k]).sum();
            let b: f64 = rec.iter_cells().map(|(_, x)| x[k]).sum();
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn generated_grids_are_reproducible(seed in any::<u64>(), rep in 0usize..50) {
        let design = SimDesign { tw: 10, th: 12, p: 4, s: 2, seed, ..SimDesign::reference() };
        let (a, tau_a, _) = generate_grid(&design, rep).unwrap();
        let (b, tau_b, _) = generate_grid(&design, rep).unwrap();
        prop_assert_eq!(tau_a, tau_b);
        prop_assert_eq!(a.as_slice(), b.as_slice());
        let (c, _, _) = generate_grid(&design, rep + 1).unwrap();
        prop_assert_ne!(a.as_slice(), c.as_slice());
    }
}
