mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wleng::topology::{NodeRole, Topology};
use wleng::{GBPS, MBPS};

fn roles(n: usize) -> Vec<(NodeRole, Option<u32>)> {
    (0..n)
        .map(|i| {
            if i % 3 == 0 {
                (NodeRole::Dc, Some(50))
            } else if i % 3 == 1 {
                (NodeRole::Access, None)
            } else {
                (NodeRole::Transit, None)
            }
        })
        .collect()
}

fn check_pair(topo: &Topology, s: usize, d: usize) {
    let ps = topo
        .compute_paths(topo.node(s).id(), topo.node(d).id())
        .unwrap();
    let (expected, latency) = common::min_latency_paths(topo, s, d);
    assert_eq!(ps.paths(), expected.as_slice(), "{s} -> {d}");
    assert_eq!(ps.latency_us(), latency);
}

#[test]
fn ecmp_matches_brute_force_on_small_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let n = rng.gen_range(2..=6);
        let p = rng.gen_range(0.0..0.8);
        let topo = common::random_graph(&mut rng, n, p, &[0, 1, 1, 2, 3], 10 * GBPS, &roles(n));
        for s in 0..n {
            for d in 0..n {
                if s != d {
                    check_pair(&topo, s, d);
                }
            }
        }
    }
}

#[test]
fn route_table_agrees_with_compute_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let n = rng.gen_range(2..=6);
        let topo = common::random_graph(&mut rng, n, 0.5, &[1, 2], 10 * GBPS, &roles(n));
        let routes = topo.route_table();
        for a in topo.access_nodes() {
            for dc in topo.dc_nodes() {
                match routes.route(a, dc) {
                    None => assert_eq!(a, dc),
                    Some(ps) => {
                        let direct = topo
                            .compute_paths(topo.node(a).id(), topo.node(dc).id())
                            .unwrap();
                        assert_eq!(ps, &direct);
                    }
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn ecmp_complete_up_to_eight_nodes(seed in any::<u64>(), n in 2usize..=8, p in 0.0f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = common::random_graph(&mut rng, n, p, &[0, 1, 2], 10 * GBPS, &roles(n));
        let s = rng.gen_range(0..n);
        let d = (s + rng.gen_range(1..n)) % n;
        check_pair(&topo, s, d);
    }

    #[test]
    fn utilization_monotone_in_demand(seed in any::<u64>(), d1 in 0u64..20_000, d2 in 0u64..20_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = common::random_graph(&mut rng, 5, 0.5, &[1, 2], 10 * GBPS, &roles(5));
        let ps = topo.compute_paths("n1", "n3").unwrap();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(
            topo.max_path_utilization(&ps, lo * MBPS) <= topo.max_path_utilization(&ps, hi * MBPS)
        );
    }

    #[test]
    fn split_conserves_demand(seed in any::<u64>(), demand in 0u64..100_000_000_007) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = common::random_graph(&mut rng, 6, 0.6, &[0, 1], 10 * GBPS, &roles(6));
        let ps = topo.compute_paths("n1", "n5").unwrap();
        let loads = ps.link_loads(demand);
        // total link load is the sum over paths of share * hops
        let n = ps.paths().len() as u64;
        let expected: u64 = ps
            .paths()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let share = demand / n + if i == 0 { demand % n } else { 0 };
                share * (p.len() as u64 - 1)
            })
            .sum();
        prop_assert_eq!(loads.iter().map(|&(_, b)| b).sum::<u64>(), expected);
        // the first hop out of the source carries the whole demand
        let out_of_src: u64 = loads
            .iter()
            .filter(|&&(l, _)| {
                let (a, b) = topo.link(l).endpoints();
                a == ps.src() || b == ps.src()
            })
            .map(|&(_, b)| b)
            .sum();
        prop_assert_eq!(out_of_src, demand);
    }

    #[test]
    fn reserve_then_release_restores_links(seed in any::<u64>(), ops in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut topo = common::random_graph(&mut rng, 6, 0.5, &[1, 2], 10 * GBPS, &roles(6));
        let before: Vec<u64> = topo.links().iter().map(|l| l.reserved()).collect();
        let mut handles = Vec::new();
        for _ in 0..ops {
            let s = rng.gen_range(0..6);
            let d = (s + rng.gen_range(1..6)) % 6;
            let ps = topo.compute_paths(&format!("n{s}"), &format!("n{d}")).unwrap();
            handles.push(topo.reserve(&ps, rng.gen_range(0..GBPS)));
        }
        while !handles.is_empty() {
            let h = handles.swap_remove(rng.gen_range(0..handles.len()));
            topo.release(&h).unwrap();
            prop_assert!(topo.release(&h).is_err());
        }
        let after: Vec<u64> = topo.links().iter().map(|l| l.reserved()).collect();
        prop_assert_eq!(before, after);
        prop_assert_eq!(topo.live_reservations(), 0);
    }
}
