use proptest::prelude::*;

use trapwalk::laws::{BiasLaw, OffspringLaw};
use trapwalk::rng::{substream, Purpose};
use trapwalk::tree::{renewal_decompose, sample_trap, Role, TrapTree, VertexId, WeightedTree};
use trapwalk::walk::detect_regenerations;

fn build(edges: &[(u32, f64)]) -> WeightedTree {
    let mut t = WeightedTree::new(Role::Bud);
    for (i, &(sel, bias)) in edges.iter().enumerate() {
        t.add_child(VertexId(sel % (i as u32 + 1)), bias, Role::Trap);
    }
    t
}

fn tree_strategy(max: usize) -> impl Strategy<Value = WeightedTree> {
    prop::collection::vec((any::<u32>(), 1.1f64..4.0), 0..max).prop_map(|e| build(&e))
}

/// Cutpoints and components straight from the definitions.
fn brute_renewal(tree: &WeightedTree, root: VertexId) -> (Vec<VertexId>, Vec<Vec<VertexId>>) {
    let all = tree.descendants(root);
    let mut cuts: Vec<VertexId> = all
        .iter()
        .copied()
        .filter(|&v| {
            v != root
                && !tree.is_leaf(v)
                && all.iter().all(|&w| w == v || tree.depth(w) != tree.depth(v) || tree.is_leaf(w))
        })
        .collect();
    cuts.sort_by_key(|&v| tree.depth(v));
    let max_depth = all.iter().map(|&v| tree.depth(v)).max().unwrap();
    let mut tops = vec![root];
    tops.extend(&cuts);
    let comps = tops
        .iter()
        .enumerate()
        .map(|(i, &top)| {
            let lo = tree.depth(top);
            let hi = cuts.get(i).map_or(max_depth, |&c| tree.depth(c));
            let mut c: Vec<VertexId> = all
                .iter()
                .copied()
                .filter(|&v| tree.is_ancestor_or_self(top, v) && (lo..=hi).contains(&tree.depth(v)))
                .collect();
            c.sort();
            c
        })
        .collect();
    (cuts, comps)
}

#[test]
fn renewal_matches_brute_force_on_sampled_traps() {
    let h = OffspringLaw::from_pairs(&[(0, 0.75), (2, 0.25)]).unwrap();
    let bias = BiasLaw::atoms(vec![(2.0, 0.5), (3.0, 0.5)]).unwrap();
    let mut rng = substream(8, Purpose::Trap, 0);
    let mut checked = 0;
    let mut with_cuts = 0;
    while checked < 1000 {
        let trap = sample_trap(&h, &bias, &mut rng).unwrap();
        if trap.len() > 51 {
            continue;
        }
        let tree = trap.tree();
        let dec = renewal_decompose(tree, TrapTree::ENT);
        let (cuts, comps) = brute_renewal(tree, TrapTree::ENT);
        assert_eq!(dec.cutpoints, cuts);
        let mut sorted: Vec<Vec<VertexId>> = dec.components.clone();
        sorted.iter_mut().for_each(|c| c.sort());
        assert_eq!(sorted, comps);
        assert_eq!(dec.r(), cuts.len() + 1);
        with_cuts += usize::from(!cuts.is_empty());
        checked += 1;
    }
    assert!(with_cuts > 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn weight_recursion_and_path_products(tree in tree_strategy(60)) {
        let w = tree.subtree_weights();
        for x in tree.vertices() {
            let rec = 1.0 + tree.children(x).iter().map(|&c| tree.bias(c).unwrap() * w[c.index()]).sum::<f64>();
            prop_assert!((w[x.index()] - rec).abs() <= 1e-12 * rec);
            let direct: f64 = tree.descendants(x).iter().map(|&v| tree.path_weight(x, v).unwrap()).sum();
            prop_assert!((tree.weight(x) - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn renewal_matches_brute_force(tree in tree_strategy(50)) {
        let dec = renewal_decompose(&tree, tree.root());
        let (cuts, comps) = brute_renewal(&tree, tree.root());
        prop_assert_eq!(&dec.cutpoints, &cuts);
        let mut sorted = dec.components.clone();
        sorted.iter_mut().for_each(|c| c.sort());
        prop_assert_eq!(sorted, comps);
    }

    #[test]
    fn components_share_exactly_the_cutpoints(tree in tree_strategy(50)) {
        let dec = renewal_decompose(&tree, tree.root());
        for (i, w) in dec.components.windows(2).enumerate() {
            let shared: Vec<VertexId> = w[0].iter().copied().filter(|v| w[1].contains(v)).collect();
            prop_assert_eq!(shared, vec![dec.cutpoints[i]]);
        }
        // every edge lies in exactly one component
        for v in tree.vertices().skip(1) {
            let p = tree.parent(v).unwrap();
            let n = dec.components.iter().filter(|c| c.contains(&v) && c.contains(&p)).count();
            prop_assert_eq!(n, 1);
        }
    }

    #[test]
    fn suffix_of_the_decomposition(tree in tree_strategy(50)) {
        let dec = renewal_decompose(&tree, tree.root());
        for (k, &c) in dec.cutpoints.iter().enumerate() {
            let below = renewal_decompose(&tree, c);
            prop_assert_eq!(&below.cutpoints[..], &dec.cutpoints[k + 1..]);
            prop_assert_eq!(&below.components[..], &dec.components[k + 1..]);
        }
    }

    #[test]
    fn text_round_trip(tree in tree_strategy(40)) {
        let text = tree.to_text();
        let back = WeightedTree::from_text(&text).unwrap();
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn regenerations_by_definition(steps in prop::collection::vec((1u64..4, any::<bool>()), 1..80)) {
        let mut d: i64 = 0;
        let mut t = 0;
        let mut visits = Vec::new();
        for (dt, up) in steps {
            t += dt;
            d = (d + if up { 1 } else { -1 }).max(0);
            visits.push((t, d as u32));
        }
        let brute: Vec<u64> = (0..visits.len())
            .filter(|&i| (0..i).all(|j| visits[j].1 < visits[i].1) && (i + 1..visits.len()).all(|j| visits[j].1 > visits[i].1))
            .map(|i| visits[i].0)
            .collect();
        prop_assert_eq!(detect_regenerations(&visits, t, 0), brute);
    }
}
