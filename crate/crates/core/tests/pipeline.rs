//! End-to-end checks that tie the partition, the hyperbolic-time machinery
//! and the sampler together through independent routes.

use hyplab::hyptimes::DEFAULT_B;
use hyplab::mc_engine::{ensemble_birkhoff, sample_uniform, Observable, SampleConfig};
use hyplab::partition::{DEFAULT_EPS_FLOOR, DEFAULT_K_MAX};
use hyplab::tower_stats::{distortion_probe, return_time, tower_pushforward_check};
use hyplab::{build_partition, derive_params, CutFunction, FactorMap, HypParams, Overrides, PartitionTable};

fn setup(cut: CutFunction) -> (FactorMap, PartitionTable, HypParams) {
    let map = FactorMap::new(cut).unwrap();
    let table = build_partition(&map, DEFAULT_EPS_FLOOR, DEFAULT_K_MAX).unwrap();
    let params = derive_params(&map, &table, DEFAULT_B, &Overrides::default()).unwrap();
    (map, table, params)
}

#[test]
fn linear_params_end_to_end() {
    let (_, _, p) = setup(CutFunction::linear());
    assert_eq!((p.k0, p.k1, p.k_b), (17, 18, 670));
    assert!((p.lyapunov - 0.5).abs() < 1e-9);
    assert!(p.sigma < 1.0 && p.sigma > (-p.lyapunov).exp());
    assert!(p.mean_counter < 0.0);
}

#[test]
fn tower_and_uniform_escape_tails_agree() {
    let (map, table, params) = setup(CutFunction::linear());
    let cfg = SampleConfig::new(77, 40_000);
    let rows = tower_pushforward_check(&map, &params, &table, &cfg, &[1, 2, 5, 20, 100, 500], 5_000).unwrap();
    for r in &rows {
        assert!(r.z.abs() < 4.0, "{r:?}");
    }
    assert!(rows[0].uniform > rows.last().unwrap().uniform);
}

#[test]
fn indicator_averages_match_lebesgue_mass() {
    let (map, table, _) = setup(CutFunction::symmetric_power(0.5).unwrap());
    let j0 = (table.x(1), table.x(0));
    let jp0 = (table.y(0), table.y(1));
    let mass = (j0.1 - j0.0) + (jp0.1 - jp0.0);
    assert!((mass - (table.m_j(0) + table.m_jp(0))).abs() < 1e-12);
    let obs = Observable::Indicator(vec![j0, jp0]);
    let avg = ensemble_birkhoff(&map, &obs, &SampleConfig::new(5, 64), 200_000).unwrap();
    assert_eq!(avg.truncated, 0);
    assert!((avg.mean - mass).abs() < 4.0 * avg.stderr + 1e-3, "{} vs {mass} ± {}", avg.mean, avg.stderr);
}

#[test]
fn kac_sum_matches_sampled_mean_return() {
    let (map, table, _) = setup(CutFunction::symmetric_power(0.5).unwrap());
    let exact = table.kac_sum();
    assert!((exact - 1.0).abs() < 1e-6, "{exact}");
    let base = table.y0() - table.x0();
    let returns: Vec<f64> = sample_uniform(&SampleConfig::new(11, 400_000), map.a())
        .into_iter()
        .filter(|&x| x > table.x0() && x < table.y0())
        .map(|x| return_time(&map, &table, x).unwrap().r.unwrap() as f64)
        .collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let sd = (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let kac = mean * base;
    assert!((kac - 1.0).abs() < 5.0 * sd * base / n.sqrt(), "{kac}");
}

#[test]
fn log_distance_average_is_small() {
    let (map, _, params) = setup(CutFunction::linear());
    let d = params.delta;
    // Lebesgue integral of -ln dist over the δ-neighbourhoods of 0, a and 1.
    let oracle = 4.0 * d * (1.0 - d.ln());
    let obs = Observable::NegLogDistDelta { delta: d };
    let avg = ensemble_birkhoff(&map, &obs, &SampleConfig::new(3, 64), 200_000).unwrap();
    assert!(avg.mean >= 0.0);
    assert!((avg.mean - oracle).abs() < 5.0 * avg.stderr + 0.5 * oracle, "{} vs {oracle}", avg.mean);
}

#[test]
fn return_map_distortion_beats_stepwise_bound() {
    let (map, table, _) = setup(CutFunction::symmetric_power(0.5).unwrap());
    let rep = distortion_probe(&map, &table, 2_000, 9).unwrap();
    assert!(rep.max.is_finite() && rep.max < 5.0, "{rep:?}");
    assert!(rep.stepwise_sum >= rep.max);
}
