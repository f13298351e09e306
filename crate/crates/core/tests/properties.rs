use std::sync::OnceLock;

use hyplab::hyptimes::{first_hyperbolic_time, first_hyperbolic_time_naive, first_passage_h, is_hyperbolic_time};
use hyplab::mc_engine::{sample_uniform, tail_fit, Obs, SampleConfig};
use hyplab::partition::{DEFAULT_EPS_FLOOR, DEFAULT_K_MAX};
use hyplab::{build_partition, derive_params, CutFunction, FactorMap, HypParams, Overrides, PartitionTable, Side};
use proptest::prelude::*;

struct World {
    map: FactorMap,
    table: PartitionTable,
    params: HypParams,
}

fn world(sym: bool) -> &'static World {
    static LIN: OnceLock<World> = OnceLock::new();
    static SYM: OnceLock<World> = OnceLock::new();
    let build = move || {
        let cut = if sym { CutFunction::symmetric_power(0.5).unwrap() } else { CutFunction::linear() };
        let map = FactorMap::new(cut).unwrap();
        let table = build_partition(&map, DEFAULT_EPS_FLOOR, DEFAULT_K_MAX).unwrap();
        let params = derive_params(&map, &table, 0.2, &Overrides::default()).unwrap();
        World { map, table, params }
    };
    if sym { SYM.get_or_init(build) } else { LIN.get_or_init(build) }
}

fn interior() -> impl Strategy<Value = f64> {
    (1e-9f64..1.0 - 1e-9).prop_filter("not a", |x| *x != 0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn preimages_split_lebesgue_measure(alpha in 0.1f64..1.0, y in 1e-6f64..1.0 - 1e-6) {
        let map = FactorMap::new(CutFunction::symmetric_power(alpha).unwrap()).unwrap();
        let xl = map.inverse_left(y).unwrap();
        let xr = map.inverse_right(y).unwrap();
        prop_assert!(xl < map.a() && xr > map.a());
        prop_assert!((xl + (xr - map.a()) - y).abs() < 1e-12);
        prop_assert!((map.eval(xl).unwrap() - y).abs() < 1e-12);
        prop_assert!((map.eval(xr).unwrap() - y).abs() < 1e-12);
    }

    #[test]
    fn map_is_increasing_on_each_branch(alpha in 0.1f64..1.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let map = FactorMap::new(CutFunction::symmetric_power(alpha).unwrap()).unwrap();
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let a = map.a();
        let (x, y) = (1e-6 + lo * (a - 2e-6), 1e-6 + hi * (a - 2e-6));
        if x < y {
            prop_assert!(map.eval(x).unwrap() <= map.eval(y).unwrap());
        }
    }

    #[test]
    fn power_family_identity(alpha in 0.3f64..1.0, ratio in 0.3f64..1.0, y in 1e-4f64..0.9999) {
        let map = FactorMap::new(CutFunction::power_family(alpha, alpha * ratio).unwrap()).unwrap();
        let xl = map.inverse_left(y).unwrap();
        let xr = map.inverse_right(y).unwrap();
        prop_assert!((xl + (xr - map.a()) - y).abs() < 1e-10);
    }

    #[test]
    fn symmetric_maps_commute_with_reflection(x in interior(), sym in any::<bool>()) {
        let w = world(sym);
        let fx = w.map.eval(x).unwrap();
        let fr = w.map.eval(1.0 - x).unwrap();
        prop_assert!((fr - (1.0 - fx)).abs() < 1e-12);
    }

    #[test]
    fn partition_intervals_shift_under_f(x in interior(), sym in any::<bool>()) {
        let w = world(sym);
        let id = w.table.locate(x).unwrap();
        let next = w.table.locate(w.map.eval(x).unwrap());
        if let (Side::J | Side::Jp, Some(k), Ok(n)) = (id.side, id.k, next) {
            if k >= 1 {
                // Interior points move one level down on the same side.
                prop_assert_eq!(n.side, id.side);
                prop_assert!(n.k.unwrap().abs_diff(k - 1) <= 1);
            }
        }
    }

    #[test]
    fn streaming_and_naive_first_hyperbolic_times_agree(x in interior(), sym in any::<bool>()) {
        let w = world(sym);
        let fast = first_hyperbolic_time(&w.map, &w.params, x, 300).unwrap();
        let slow = first_hyperbolic_time_naive(&w.map, &w.params, x, 300).unwrap();
        prop_assert_eq!(fast, slow);
        if let Some(h) = fast.found() {
            prop_assert!(is_hyperbolic_time(&w.map, &w.params, x, h as usize).unwrap());
            for n in 1..h as usize {
                prop_assert!(!is_hyperbolic_time(&w.map, &w.params, x, n).unwrap());
            }
        }
    }

    #[test]
    fn escape_time_bounds_first_hyperbolic_time(x in interior(), sym in any::<bool>()) {
        let w = world(sym);
        if let Some(big) = first_passage_h(&w.map, &w.params, x, 20_000).unwrap().found() {
            let n = big.max(1) as usize;
            prop_assert!(is_hyperbolic_time(&w.map, &w.params, x, n).unwrap());
            let h = first_hyperbolic_time(&w.map, &w.params, x, big + 1).unwrap();
            prop_assert!(h.found().is_some_and(|h| h <= big + 1));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampling_ignores_worker_count(seed in any::<u64>(), n in 1usize..20_000, workers in 1usize..5) {
        let cfg = SampleConfig::new(seed, n);
        let a = sample_uniform(&cfg.with_workers(1), 0.5);
        let b = sample_uniform(&cfg.with_workers(workers), 0.5);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn tail_fit_interval_contains_estimate(p in 0.5f64..3.0, seed in any::<u64>(), censor in any::<bool>()) {
        let cfg = SampleConfig::new(seed, 20_000);
        let obs: Vec<Obs> = sample_uniform(&cfg, 0.5)
            .into_iter()
            .map(|u| {
                let v = u.powf(-1.0 / p).floor().min(1e12) as u64;
                if censor && v > 500 { Obs::censored(500) } else { Obs::exact(v) }
            })
            .collect();
        if let Ok(t) = tail_fit(&obs, (2, 100), seed) {
            prop_assert!(t.ci_low <= t.exponent && t.exponent <= t.ci_high);
            prop_assert_eq!(t.n_samples, obs.len());
            prop_assert_eq!(t.n_censored, obs.iter().filter(|o| o.censored).count());
        }
    }
}
