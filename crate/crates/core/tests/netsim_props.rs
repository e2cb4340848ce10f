mod common;

use coobs_core::assignment::{admm_run, AdmmConfig};
use coobs_core::netsim::{decode_log, encode_log, log_from_csv, log_to_csv, replay, run_network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn network_matches_centralized_iterates() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let config = AdmmConfig::default();
    for _ in 0..25 {
        let agents = rng.gen_range(1..=5);
        let online = rng.gen_range(0..=agents + 1);
        let w = common::geometric_instance(agents, online, &mut rng, &config);
        let g = common::random_connected(agents, &mut rng);
        let central = admm_run(&w, &g, &config, None, false).unwrap();
        let net = run_network(&g, &w, &config, None, false).unwrap();
        assert_eq!(central.converged, net.converged);
        assert_eq!(central.state.iteration, net.state.iteration);
        assert!(net.audit_ok);
        for i in 0..w.size() {
            for (a, b) in central.state.alpha.row(i).iter().zip(net.state.alpha.row(i)) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
        assert!(net.max_column_drift <= 1e-9);
    }
}

#[test]
fn message_count_is_two_per_edge_per_exchange() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let config = AdmmConfig::default();
    for _ in 0..10 {
        let n = rng.gen_range(2..=5);
        let w = common::geometric_instance(n, n - 1, &mut rng, &config);
        let g = common::random_connected(n, &mut rng);
        let net = run_network(&g, &w, &config, None, false).unwrap();
        let expected = 2 * g.edge_count() as u64 * config.inner_iterations as u64 * net.state.iteration as u64;
        assert_eq!(net.message_count, expected);
    }
}

#[test]
fn recorded_logs_replay_and_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let config = AdmmConfig { max_outer: 40, ..AdmmConfig::default() };
    for _ in 0..5 {
        let n = rng.gen_range(2..=4);
        let w = common::geometric_instance(n, n, &mut rng, &config);
        let g = common::random_connected(n, &mut rng);
        let run = run_network(&g, &w, &config, None, true).unwrap();
        assert!(!run.log.is_empty());
        assert_eq!(decode_log(&encode_log(&run.log)).unwrap(), run.log);
        assert_eq!(log_from_csv(&log_to_csv(&run.log)).unwrap(), run.log);
        let again = replay(&g, &w, &config, None, &run.log).unwrap();
        assert_eq!(again.state, run.state);

        let mut tampered = run.log.clone();
        tampered[0].payload[0] += 1e-3;
        assert!(replay(&g, &w, &config, None, &tampered).is_err());
    }
}
