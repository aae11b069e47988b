use proptest::prelude::*;
use surf::{make_dist, Forest};

/// Follows parents one at a time: returns (root, number of hops).
fn resolve(steps: &[u64], t: u64) -> (i64, u32) {
    let mut v = t as i64;
    let mut hops = 0;
    while v > 0 {
        v -= steps[v as usize - 1] as i64;
        hops += 1;
    }
    (v, hops)
}

fn check_against_resolver(f: &Forest) {
    let steps = f.steps();
    for t in 1..=f.horizon() {
        let (root, hops) = resolve(steps, t);
        assert_eq!(f.color(t), root, "color of {t}");
        assert_eq!(f.depth(t), hops, "depth of {t}");
        assert!(f.parent(t) < t as i64);
    }
}

/// Vertex t is deeper than k iff the k-term ancestral step sum stays below t.
fn deeper_than(steps: &[u64], t: u64, k: u32) -> bool {
    let mut v = t as i64;
    for _ in 0..k {
        if v <= 0 {
            return false;
        }
        v -= steps[v as usize - 1] as i64;
    }
    v > 0
}

fn check_stats(f: &Forest) {
    let s = f.stats();
    let n = f.horizon();
    assert_eq!(s.tree_sizes.values().sum::<u64>(), n);
    assert_eq!(s.num_trees, s.tree_sizes.values().filter(|&&x| x >= 1).count() as u64);
    assert!(s.num_trees <= s.root_hits);
    let hits = (1..=n).filter(|&t| f.steps()[t as usize - 1] >= t).count() as u64;
    assert_eq!(s.root_hits, hits);
    assert_eq!(s.root_degrees.values().map(|&d| d as u64).sum::<u64>(), hits);
    assert_eq!(s.profile_of_zero.iter().sum::<u64>(), s.size_of_zero());
    assert_eq!(s.height_of_zero as usize, s.profile_of_zero.len());
    assert!(s.profile_of_zero.last().is_none_or(|&x| x > 0));
    assert_eq!(s.height, f.depths().iter().copied().max().unwrap());
    let kmax = s.height_of_zero as usize + 2;
    let mut profile = f.profile(kmax);
    profile.truncate(s.profile_of_zero.len());
    assert_eq!(profile, s.profile_of_zero);
    assert_eq!(f.max_degree(), s.max_degree);

    // block chain and renewal time from the recursion
    let mut b = 1u32;
    for (idx, &z) in f.steps().iter().enumerate() {
        if idx > 0 {
            b = if z <= b as u64 { b + 1 } else { 1 };
        }
        assert_eq!(s.block_chain[idx], b);
    }
    let visits = s.block_chain.iter().filter(|&&x| x == 1).count() as u64;
    assert_eq!(s.renewal_visits, visits);
    assert_eq!(s.block_chain[s.last_renewal as usize - 1], 1);
    assert!(s.block_chain[s.last_renewal as usize..].iter().all(|&x| x > 1));

    // leaves of tree 0: color 0 and nobody attaches to them
    let mut has_child = vec![false; n as usize];
    for t in 1..=n {
        let p = f.parent(t);
        if p > 0 {
            has_child[p as usize - 1] = true;
        }
    }
    let leaves = (1..=n).filter(|&t| f.color(t) == 0 && !has_child[t as usize - 1]).count() as u64;
    assert_eq!(s.leaves_of_zero, leaves);
}

#[test]
fn random_forests_match_independent_resolver() {
    for (i, spec) in ["const:1", "table:1/3,1/3,1/3", "geom:0.5", "zipf:0.5", "logheavy"].iter().enumerate() {
        let d = make_dist(spec).unwrap();
        for rep in 0..5u64 {
            let f = Forest::build(&d, 10_000, 100 * i as u64 + rep).unwrap();
            check_against_resolver(&f);
            check_stats(&f);
        }
    }
}

#[test]
fn rebuild_is_bit_identical() {
    let d = make_dist("zipf:0.5").unwrap();
    let a = Forest::build(&d, 50_000, 42).unwrap();
    let b = Forest::build(&d, 50_000, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a.stats()).unwrap(), serde_json::to_string(&b.stats()).unwrap());
    let c = Forest::build(&d, 50_000, 43).unwrap();
    assert_ne!(a.steps(), c.steps());
}

#[test]
fn single_path_statistics() {
    let f = Forest::from_steps(vec![1; 7]).unwrap();
    let s = f.stats();
    assert_eq!((s.num_trees, s.root_hits, s.height, s.leaves_of_zero), (1, 1, 7, 1));
    assert_eq!(s.profile_of_zero, vec![1; 7]);
    assert_eq!(f.profile(5), vec![1; 5]);
}

#[test]
fn distinct_roots_have_no_positive_children() {
    let f = Forest::from_steps(vec![5; 5]).unwrap();
    let m = f.max_degree();
    assert_eq!((m.over_roots, m.over_positive), (1, 0));
}

proptest! {
    #[test]
    fn arbitrary_steps_satisfy_invariants(steps in proptest::collection::vec(1u64..12, 1..60)) {
        let f = Forest::from_steps(steps.clone()).unwrap();
        check_against_resolver(&f);
        check_stats(&f);
        for t in 1..=f.horizon() {
            for k in 0..=f.depth(t) + 1 {
                prop_assert_eq!(deeper_than(&steps, t, k), f.depth(t) > k);
            }
        }
    }

    #[test]
    fn huge_steps_go_to_sparse_roots(steps in proptest::collection::vec(1u64..1u64 << 40, 1..40)) {
        let f = Forest::from_steps(steps).unwrap();
        check_against_resolver(&f);
        check_stats(&f);
    }
}
