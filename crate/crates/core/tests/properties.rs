use proptest::prelude::*;
use tnn::hwmodel::{adder_width, latency, throughput, PipelineSpec};
use tnn::runtime::{step_activation, ternary_dot, PackedTernaryVec, TernaryLayer, TernaryMlp};
use tnn::teacher::{ternary_probs, TernaryDist};
use tnn::ternarizer::{
    kde_estimate, score_config, silverman_bandwidth, ternarize_weights, GridPolicy, NeuronTargets, ProbeInputs,
    StudentNeuron, WeightGrid,
};
use tnn::Activation;

fn ternary_vec(len: impl Into<proptest::collection::SizeRange>) -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(-1i8..=1, len)
}

fn spec(input: usize, layers: Vec<usize>) -> PipelineSpec {
    PipelineSpec {
        input_dim: input,
        layer_sizes: layers,
        clock_hz: 200e6,
        per_layer_overhead: 8.0,
        pipeline_fill_overhead: 42.0,
    }
}

proptest! {
    #[test]
    fn widening_weight_thresholds_only_adds_zeros(
        w in prop::collection::vec(-3.0f64..3.0, 1..50),
        lo in 0.0f64..3.0, hi in 0.0f64..3.0, grow in 0.0f64..1.0,
    ) {
        let a = ternarize_weights(&w, -lo, hi).unwrap();
        let b = ternarize_weights(&w, -lo - grow, hi + grow).unwrap();
        for ((x, y), v) in a.iter().zip(&b).zip(&w) {
            prop_assert!(*y == 0 || y == x);
            if *x != 0 {
                prop_assert_eq!(*x as f64, v.signum());
            }
        }
    }

    #[test]
    fn grid_cells_match_threshold_ternarization(w in prop::collection::vec(-3.0f64..3.0, 1..40)) {
        let g = WeightGrid::new(&w, GridPolicy::Full).unwrap();
        let (rows, cols) = g.shape();
        for a in 0..rows {
            for b in 0..cols {
                prop_assert_eq!(g.ternary(a, b), ternarize_weights(&w, g.t_lo(a), g.t_hi(b)).unwrap());
                prop_assert!(g.t_lo(a) <= 0.0 && g.t_hi(b) >= 0.0);
            }
            if a + 1 < rows {
                prop_assert!(g.neg_active(a) <= g.neg_active(a + 1));
            }
        }
    }

    #[test]
    fn firing_probabilities_sum_to_one(y in -20.0f64..20.0) {
        for act in [Activation::Tanh, Activation::HardTanh, Activation::SoftSign] {
            let d = ternary_probs(&[y], act)[0];
            prop_assert!(d.minus >= 0.0 && d.zero >= 0.0 && d.plus >= 0.0);
            prop_assert_eq!(d.minus + d.zero + d.plus, 1.0);
            prop_assert!(d.minus == 0.0 || d.plus == 0.0);
        }
    }

    #[test]
    fn most_likely_output_has_maximal_probability(rho in -1.0f64..=1.0) {
        let d = TernaryDist::from_rho(rho);
        let best = d.prob(d.most_likely());
        prop_assert!(best >= d.minus && best >= d.zero && best >= d.plus);
    }

    #[test]
    fn kde_is_a_density(s in prop::collection::vec(-5.0f64..5.0, 2..30)) {
        let h = silverman_bandwidth(&s).unwrap();
        prop_assert!(h >= tnn::ternarizer::MIN_BANDWIDTH);
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min) - 12.0 * h;
        let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 12.0 * h;
        let step = h / 16.0;
        let n = ((hi - lo) / step).ceil() as usize;
        prop_assume!(n < 2_000_000);
        let q: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * step).collect();
        let d = kde_estimate(&s, &q).unwrap();
        prop_assert!(d.iter().all(|&v| v >= 0.0));
        prop_assert!((d.iter().sum::<f64>() * step - 1.0).abs() < 1e-3);
    }

    #[test]
    fn step_activation_is_strict(y in -50i32..50, lo in -20i32..20, width in 0i32..20) {
        let hi = lo + width;
        let want = if y < lo { -1 } else if y > hi { 1 } else { 0 };
        prop_assert_eq!(step_activation(y, lo, hi), want);
    }

    #[test]
    fn pack_round_trips(v in ternary_vec(0..400)) {
        let p = PackedTernaryVec::pack(&v).unwrap();
        prop_assert_eq!(p.len(), v.len());
        prop_assert_eq!(p.nnz(), v.iter().filter(|&&x| x != 0).count());
        prop_assert_eq!(p.unpack(), v);
    }

    #[test]
    fn dot_is_symmetric_and_bounded((a, b) in (1usize..300).prop_flat_map(|n| (ternary_vec(n), ternary_vec(n)))) {
        let (pa, pb) = (PackedTernaryVec::pack(&a).unwrap(), PackedTernaryVec::pack(&b).unwrap());
        let d = ternary_dot(&pa, &pb).unwrap();
        prop_assert_eq!(d, ternary_dot(&pb, &pa).unwrap());
        prop_assert_eq!(d, a.iter().zip(&b).map(|(&x, &y)| x as i32 * y as i32).sum::<i32>());
        prop_assert!(d.abs() as usize <= pa.nnz().min(pb.nnz()));
    }

    #[test]
    fn student_transfer_stays_within_fan_in(w in ternary_vec(1..100), seed in any::<u64>()) {
        let mut rng = tnn::Rng::new(seed);
        let x: Vec<i8> = (0..w.len()).map(|_| rng.below(3) as i8 - 1).collect();
        let n = StudentNeuron::new(w.clone(), -1, 1).unwrap();
        let y = n.transfer(&x);
        prop_assert!(y.unsigned_abs() as usize <= w.len());
    }

    #[test]
    fn score_is_permutation_invariant(seed in any::<u64>()) {
        let mut rng = tnn::Rng::new(seed);
        let (n, dim) = (30, 6);
        let rows: Vec<i8> = (0..n * dim).map(|_| rng.below(3) as i8 - 1).collect();
        let y: Vec<f64> = (0..n).map(|_| 2.0 * rng.normal()).collect();
        let w: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let dists = ternary_probs(&y, Activation::Tanh);
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let prows: Vec<i8> = order.iter().flat_map(|&i| rows[i * dim..(i + 1) * dim].to_vec()).collect();
        let pdists: Vec<TernaryDist> = order.iter().map(|&i| dists[i]).collect();
        let s1 = score_config(&ProbeInputs::from_rows(n, dim, &rows).unwrap(), &NeuronTargets::from_dists(&dists), &w, -0.3, 0.3).unwrap();
        let s2 = score_config(&ProbeInputs::from_rows(n, dim, &prows).unwrap(), &NeuronTargets::from_dists(&pdists), &w, -0.3, 0.3).unwrap();
        prop_assert!((s1 - s2).abs() < 1e-9);
        prop_assert!(s1 >= 0.0 && s1 <= n as f64 + 1e-9);
    }

    #[test]
    fn adder_width_is_monotone(k in 1usize..1_000_000) {
        prop_assert!(adder_width(k).unwrap() <= adder_width(k + 1).unwrap());
        prop_assert!(1u64 << (adder_width(k).unwrap() - 1) >= k as u64);
    }

    #[test]
    fn wider_layers_never_raise_throughput(
        layers in prop::collection::vec(1usize..2000, 1..5), which in any::<prop::sample::Index>(), extra in 1usize..500,
    ) {
        let base = spec(784, layers.clone());
        let mut wider = layers;
        let i = which.index(wider.len());
        wider[i] += extra;
        prop_assert!(throughput(&spec(784, wider)) <= throughput(&base));
    }

    #[test]
    fn deeper_pipelines_take_longer(layers in prop::collection::vec(1usize..2000, 0..5), next in 1usize..2000) {
        let base = spec(784, layers.clone());
        let mut deeper = layers;
        deeper.push(next);
        prop_assert!(latency(&spec(784, deeper)) > latency(&base));
    }

    #[test]
    fn ternary_models_round_trip_through_bytes(seed in any::<u64>(), dims in prop::collection::vec(1usize..80, 2..5)) {
        let mut rng = tnn::Rng::new(seed);
        let layers = dims.windows(2).map(|w| {
            let rows: Vec<Vec<i8>> = (0..w[1]).map(|_| (0..w[0]).map(|_| rng.below(3) as i8 - 1).collect()).collect();
            let lo: Vec<i32> = (0..w[1]).map(|_| -(rng.below(5) as i32)).collect();
            let hi: Vec<i32> = lo.iter().map(|&l| l + rng.below(5) as i32).collect();
            TernaryLayer::from_rows(&rows, lo, hi).unwrap()
        }).collect();
        let mut m = TernaryMlp::new(layers).unwrap();
        m.set_meta("note", format!("seed {seed}"));
        let bytes = m.to_bytes();
        let back = TernaryMlp::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert_eq!(back.meta(), m.meta());
    }
}
