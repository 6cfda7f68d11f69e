use cimsim::acim::{acim_mac, AnalogConfig, AnalogMode, Converter, MacroInstance};
use cimsim::dcim::{dcim_mac, AdderTree, ApproxProfile, Preset};
use cimsim::hybrid::{hybrid_mac, ose_saliency, BoundaryPolicy, DomainAssignment, SaliencyScore};
use cimsim::quant::{dot_oracle, value_range, PartialGrid, QuantVector};
use cimsim::rng::stream_rng;
use proptest::prelude::*;

fn vector(n: usize, bits: u32, signed: bool) -> impl Strategy<Value = QuantVector> {
    let (lo, hi) = value_range(bits, signed);
    prop::collection::vec(lo..=hi, n).prop_map(move |v| QuantVector::new(v, bits, signed).unwrap())
}

/// Two operand vectors of a shared random length.
fn operands(max_n: usize, max_bits: u32) -> impl Strategy<Value = (QuantVector, QuantVector)> {
    (1..=max_n, 1..=max_bits, 1..=max_bits, any::<bool>(), any::<bool>())
        .prop_flat_map(|(n, m, p, sx, sw)| (vector(n, m, sx), vector(n, p, sw)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn planes_reconstruct_values(v in (1usize..40, 1u32..=16, any::<bool>()).prop_flat_map(|(n, b, s)| vector(n, b, s))) {
        let planes = v.bit_planes();
        for (i, &x) in v.values().iter().enumerate() {
            let rebuilt: i64 = planes.iter().map(|p| p.significance_weight() * p.bits()[i] as i64).sum();
            prop_assert_eq!(rebuilt, x);
        }
    }

    #[test]
    fn dcim_matches_oracle((x, w) in operands(64, 12)) {
        prop_assert_eq!(dcim_mac(&x, &w).unwrap(), dot_oracle(&x, &w).unwrap());
    }

    #[test]
    fn exact_grid_recombines((x, w) in operands(32, 8)) {
        let g = PartialGrid::exact(&x, &w).unwrap();
        let n = x.len() as i64;
        for (_, _, v) in g.entries().unwrap() {
            prop_assert!((0..=n).contains(&v));
        }
        prop_assert_eq!(
            g.recombine(&x.plane_weights(), &w.plane_weights()).unwrap(),
            dot_oracle(&x, &w).unwrap()
        );
    }

    #[test]
    fn exact_tree_is_popcount(bits in prop::collection::vec(any::<bool>(), 1..300)) {
        let t = AdderTree::exact(bits.len());
        prop_assert_eq!(t.eval(&bits).unwrap(), bits.iter().filter(|&&b| b).count() as u64);
    }

    #[test]
    fn approximations_only_cheapen(n in 2usize..300) {
        let exact = AdderTree::exact(n).transistor_count();
        let mid = AdderTree::preset(Preset::Mid, n).transistor_count();
        let aggr = AdderTree::preset(Preset::Aggressive, n).transistor_count();
        prop_assert!(aggr <= mid && mid <= exact);
        prop_assert!(ApproxProfile::preset(Preset::Mid, n).is_refined_by(&ApproxProfile::preset(Preset::Aggressive, n)));
    }

    #[test]
    fn noiseless_analog_is_exact(
        (x, w) in (1usize..48, 1u32..=6, 1u32..=6).prop_flat_map(|(n, m, p)| (vector(n, m, false), vector(n, p, false))),
        mode in prop_oneof![Just(AnalogMode::BitSerial), Just(AnalogMode::BitParallel), Just(AnalogMode::OneShotMultiBit)],
        seed in any::<u64>(),
    ) {
        let mut cfg = AnalogConfig::ideal(x.len()).with_mode(mode);
        cfg.dac_bits = 6;
        let inst = MacroInstance::new(cfg).unwrap();
        let r = acim_mac(&x, &w, &inst, &mut stream_rng(seed, &[])).unwrap();
        prop_assert_eq!(r.value, dot_oracle(&x, &w).unwrap());
    }

    #[test]
    fn mixed_hybrid_is_exact_when_noiseless((x, w) in operands(32, 6), b_da in 0u32..12, seed in any::<u64>()) {
        let inst = MacroInstance::new(AnalogConfig::ideal(x.len())).unwrap();
        let split = DomainAssignment::straight_split(x.bit_width(), w.bit_width(), b_da);
        let r = hybrid_mac(&x, &w, &split, &inst, &mut stream_rng(seed, &[])).unwrap();
        prop_assert_eq!(r.value, dot_oracle(&x, &w).unwrap());
        prop_assert_eq!(r.conversions as usize, split.analog_pairs());
    }

    #[test]
    fn reduced_codes_equal_full_codes(bits in 1u32..=12, rows in 1u64..2000, frac in 0.0f64..=1.0, pos in 0.0f64..=1.0) {
        let conv = Converter::for_range(bits, rows);
        let ones = (frac * rows as f64) as u64;
        let z = conv.known_zero_msbs(ones);
        let v = (pos * ones as f64).floor();
        prop_assert_eq!(conv.convert_reduced(v, z), conv.convert(v));
    }

    #[test]
    fn saliency_is_channel_order_invariant(
        chans in prop::collection::vec((vector(8, 4, true), vector(8, 4, false)), 1..6),
        s in 1u32..=16,
    ) {
        let (xs, ws): (Vec<_>, Vec<_>) = chans.iter().cloned().unzip();
        let fwd = ose_saliency(&xs, &ws, s).unwrap();
        let (mut rx, mut rw) = (xs.clone(), ws.clone());
        rx.reverse();
        rw.reverse();
        prop_assert_eq!(ose_saliency(&rx, &rw, s).unwrap(), fwd);
        let parts: u64 = xs.iter().zip(&ws)
            .map(|(x, w)| ose_saliency(std::slice::from_ref(x), std::slice::from_ref(w), s).unwrap().score)
            .sum();
        prop_assert_eq!(fwd.score, parts);
    }

    #[test]
    fn boundary_selection_is_monotone(thresholds in prop::collection::btree_set(0u64..1000, 0..5), a in 0u64..1200, b in 0u64..1200) {
        let thresholds: Vec<u64> = thresholds.into_iter().collect();
        let ladder: Vec<u32> = (0..=thresholds.len() as u32).map(|i| 2 * i).collect();
        let policy = BoundaryPolicy::new(thresholds, ladder).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        let pick = |v| policy.select(&SaliencyScore { score: v, s: 2 });
        // Larger B_DA means more analog; a higher score must not get more analog.
        prop_assert!(pick(hi) <= pick(lo));
    }
}
