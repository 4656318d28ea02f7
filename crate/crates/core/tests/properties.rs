use nalgebra::{DMatrix, DVector};
use nonlocal::glm::{fit_mle, log_likelihood, neg_hessian, score};
use nonlocal::modelspace::{count_models, enumerate_models, partition_ab, posterior_probs};
use nonlocal::numerics::{factor_logdet, make_stream, SpdMatrix};
use nonlocal::{Dataset, Execution, Family, ModelIndex, NonlocalPrior, PriorKind};
use proptest::prelude::*;

fn model_strategy(p: usize) -> impl Strategy<Value = ModelIndex> {
    proptest::collection::btree_set(0..p, 0..=p.min(4))
        .prop_map(|s| ModelIndex::new(s.into_iter().collect()).unwrap())
}

fn prior_strategy() -> impl Strategy<Value = NonlocalPrior> {
    (prop_oneof![Just(PriorKind::Pimom), Just(PriorKind::Spimom)], 1u32..4, 0.1f64..10.0)
        .prop_map(|(k, r, s)| NonlocalPrior::new(k, r as f64, s).unwrap())
}

fn dataset(family: Family, n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = make_stream(seed);
    let x = DMatrix::from_fn(n, p, |_, _| 0.7 * rng.standard_normal());
    let y = (0..n)
        .map(|i| {
            let eta = 0.4 * x[(i, 0)] - 0.3 * x[(i, p - 1)];
            match family {
                Family::Gaussian => eta + rng.standard_normal(),
                Family::Logistic => (rng.uniform() < family.mean(eta)) as u8 as f64,
                Family::Poisson => {
                    // inversion sampling keeps the draw inside the stream
                    let (mut k, mut prob, u) = (0.0, (-eta.exp()).exp(), rng.uniform());
                    let mut cdf = prob;
                    while u > cdf && k < 50.0 {
                        k += 1.0;
                        prob *= eta.exp() / k;
                        cdf += prob;
                    }
                    k
                }
            }
        })
        .collect();
    Dataset::new(y, x, family, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn model_index_serde_round_trips(m in model_strategy(12)) {
        let json = serde_json::to_string(&m).unwrap();
        let want = format!("[{}]", m.one_based().iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","));
        prop_assert_eq!(&json, &want);
        let back: ModelIndex = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn model_order_is_size_then_lexicographic(a in model_strategy(8), b in model_strategy(8)) {
        let expected = a.len().cmp(&b.len()).then_with(|| a.indices().cmp(b.indices()));
        prop_assert_eq!(a.cmp(&b), expected);
    }

    #[test]
    fn probabilities_partition_unity(
        lms in proptest::collection::vec(-50.0f64..50.0, 1..40),
        truth_pick in 0usize..40,
    ) {
        let models = enumerate_models(6, 3).unwrap();
        let entries: Vec<(ModelIndex, f64)> = models.iter().cloned().zip(lms.iter().cloned()).collect();
        let truth = entries[truth_pick % entries.len()].0.clone();
        let post = posterior_probs(entries.clone(), Some(&truth)).unwrap();
        prop_assert!((post.total_probability() - 1.0).abs() < 1e-12);
        let p0 = post.truth_probability.unwrap();
        prop_assert!((p0 + post.mass_a + post.mass_b - 1.0).abs() < 1e-12);
        let listed: Vec<ModelIndex> = entries.iter().map(|e| e.0.clone()).collect();
        let (a, b) = partition_ab(&listed, &truth);
        prop_assert_eq!(a.len() + b.len() + 1, listed.len());
        prop_assert!(a.iter().all(|m| m.is_strict_superset_of(&truth)));
        prop_assert!(b.iter().all(|m| !m.is_superset_of(&truth)));
        // shifting every log marginal leaves the probabilities unchanged
        let shifted: Vec<(ModelIndex, f64)> = entries.iter().map(|(m, l)| (m.clone(), l + 123.0)).collect();
        let post2 = posterior_probs(shifted, Some(&truth)).unwrap();
        for (x, y) in post.entries.iter().zip(&post2.entries) {
            prop_assert!((x.probability - y.probability).abs() < 1e-12);
        }
    }

    #[test]
    fn counts_match_enumeration(p in 0usize..9, q in 0usize..9) {
        let q = q.min(p);
        let all = enumerate_models(p, q).unwrap();
        prop_assert_eq!(count_models(p, q, u128::MAX) as usize, all.len());
        prop_assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn logdet_matches_eigenvalues(seed in 0u64..1000, dim in 1usize..8) {
        let mut rng = make_stream(seed);
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.standard_normal());
        let m = &a * a.transpose() + DMatrix::identity(dim, dim);
        let (l, logdet) = factor_logdet(&SpdMatrix::new(m.clone()).unwrap()).unwrap();
        let eig: f64 = m.clone().symmetric_eigen().eigenvalues.iter().map(|v| v.ln()).sum();
        prop_assert!((logdet - eig).abs() < 1e-9 * (1.0 + eig.abs()));
        prop_assert!((&l * l.transpose() - &m).amax() < 1e-10 * m.amax());
    }

    #[test]
    fn prior_is_nonlocal_and_symmetric(prior in prior_strategy(), b in 0.01f64..20.0) {
        prop_assert_eq!(prior.density_1d(0.0), 0.0);
        prop_assert_eq!(prior.density_1d(b), prior.density_1d(-b));
        prop_assert_eq!(prior.grad_1d(b), -prior.grad_1d(-b));
        let density = prior.density_1d(b);
        prop_assert!(density.is_finite() && density >= 0.0);
        let m = prior.mode_1d();
        prop_assert!(prior.grad_1d(m).abs() < 1e-9 * (1.0 + prior.grad_1d(2.0 * m).abs()));
    }

    #[test]
    fn prior_derivatives_match_differences(prior in prior_strategy(), b in 0.1f64..5.0, neg in any::<bool>()) {
        let b = if neg { -b } else { b };
        let h = 1e-6 * b.abs();
        let fd = (prior.log_density_1d(b + h) - prior.log_density_1d(b - h)) / (2.0 * h);
        let g = prior.grad_1d(b);
        prop_assert!((g - fd).abs() <= 1e-5 * g.abs().max(1.0), "{} vs {}", g, fd);
        let fdh = -(prior.grad_1d(b + h) - prior.grad_1d(b - h)) / (2.0 * h);
        let nh = prior.neg_hess_1d(b);
        prop_assert!((nh - fdh).abs() <= 1e-4 * nh.abs().max(1.0), "{} vs {}", nh, fdh);
    }

    #[test]
    fn glm_derivatives_match_differences(
        fam in prop_oneof![Just(Family::Gaussian), Just(Family::Logistic), Just(Family::Poisson)],
        seed in 0u64..50,
        raw in proptest::collection::vec(-1.0f64..1.0, 3),
    ) {
        let d = dataset(fam, 40, 3, seed);
        let m = ModelIndex::new(vec![0, 1, 2]).unwrap();
        let beta = DVector::from_vec(raw);
        let g = score(&d, &m, &beta).unwrap();
        let hm = neg_hessian(&d, &m, &beta).unwrap().into_inner();
        for k in 0..3 {
            let h = 1e-5;
            let mut up = beta.clone();
            let mut dn = beta.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (log_likelihood(&d, &m, &up).unwrap() - log_likelihood(&d, &m, &dn).unwrap()) / (2.0 * h);
            prop_assert!((g[k] - fd).abs() <= 1e-5 * g.amax().max(1.0));
            let fdh = -(score(&d, &m, &up).unwrap() - score(&d, &m, &dn).unwrap()) / (2.0 * h);
            prop_assert!((hm.column(k) - fdh).amax() <= 1e-4 * hm.amax().max(1.0));
        }
    }

    #[test]
    fn mle_is_stationary(fam in prop_oneof![Just(Family::Gaussian), Just(Family::Poisson)], seed in 0u64..50) {
        let d = dataset(fam, 80, 3, seed);
        let m = ModelIndex::new(vec![0, 2]).unwrap();
        let fit = fit_mle(&d, &m).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(score(&d, &m, &fit.beta_hat).unwrap().amax() < 1e-6);
    }

    #[test]
    fn derived_streams_depend_only_on_seed(seed in any::<u64>(), idx in any::<u64>()) {
        let a = make_stream(seed);
        let mut b = make_stream(seed);
        b.uniform();
        let (mut x, mut y) = (a.derive(idx), b.derive(idx));
        for _ in 0..4 {
            prop_assert_eq!(x.uniform().to_bits(), y.uniform().to_bits());
        }
    }

    #[test]
    fn execution_strategies_agree(values in proptest::collection::vec(-1e3f64..1e3, 0..200)) {
        let f = |v: &f64| (v.sin() * 1e3).exp().ln_1p();
        let s = Execution::Sequential.map(&values, f);
        let p = Execution::Parallel.map(&values, f);
        prop_assert_eq!(s.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), p.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}
