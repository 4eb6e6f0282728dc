"""Dynamic program: enumeration, optimization, counting, sampling."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from oracles import (
    component_profile,
    consistent_subsets,
    joint_assignment_count,
    profile_optimum,
    random_instance,
    random_weights,
)
from scjlabel.core import Adjacency, Genome, WeightTable, chromosome_adjacencies
from scjlabel.dp import (
    JointLabel,
    branch_cost,
    count_cooptimal,
    enumerate_labels,
    evaluate_component_labeling,
    sample_component,
    solve_component,
)
from scjlabel.errors import CapacityExceeded, InputError
from scjlabel.formats import parse_newick
from scjlabel.graph import build_global_graph, candidate_adjacencies, connected_components


def genome_of(markers, *chromosomes):
    adjacencies = set()
    for chromosome in chromosomes:
        adjacencies |= chromosome_adjacencies(chromosome)
    return Genome(frozenset(adjacencies), frozenset(markers))


def components_of(tree, weights=None, threshold=0):
    weights = weights if weights is not None else WeightTable()
    graph = build_global_graph(
        tree, candidate_adjacencies(tree), weights, threshold
    )
    return connected_components(graph)


def three_leaf_instance():
    tree = parse_newick("((s1,s2)anc2,s3)anc1;")
    markers = {1, 2}
    return tree.with_genomes({
        "s1": genome_of(markers, (1, 2)),
        "s2": genome_of(markers, (1, 2)),
        "s3": genome_of(markers, (1,), (2,)),
    })


# ---------------------------------------------------------------------------
# Joint labels


class TestJointLabel:
    def test_from_matching_round_trips(self):
        a = Adjacency.of("1h", "2t")
        b = Adjacency.of("3h", "4t")
        vertices = [x for adj in (a, b) for x in adj.extremities]
        label = JointLabel.from_matching(vertices, [a])
        assert label.is_valid
        assert label.adjacencies == frozenset({a})
        assert label.choice(a.first) == a
        assert label.choice(b.first) is None

    def test_one_sided_choices_are_invalid(self):
        a = Adjacency.of("1h", "2t")
        label = JointLabel.from_choices({a.first: a, a.second: None})
        assert not label.is_valid
        assert label.adjacencies == frozenset()

    def test_unknown_extremity_is_rejected(self):
        label = JointLabel.from_choices({Adjacency.of("1h", "2t").first: None})
        with pytest.raises(InputError):
            label.choice(Adjacency.of("5h", "6t").first)


# ---------------------------------------------------------------------------
# Label enumeration


class TestEnumerateLabels:
    def test_empty_label_comes_first(self):
        tree = three_leaf_instance()
        component = components_of(tree)[0]
        labels = enumerate_labels(component, tree, tree.id_of("anc2"))
        assert labels[0].adjacencies == frozenset()
        assert [l.adjacencies for l in labels] == [
            frozenset(), frozenset({Adjacency.of("1h", "2t")}),
        ]

    def test_only_annotated_edges_are_offered(self):
        tree = three_leaf_instance()
        anc1, anc2 = tree.id_of("anc1"), tree.id_of("anc2")
        a = Adjacency.of("1h", "2t")
        weights = WeightTable()
        weights.set(anc2, a, "0.9")
        component = components_of(tree, weights, "0.5")[0]
        assert [l.adjacencies for l in enumerate_labels(component, tree, anc1)] == [
            frozenset(),
        ]
        assert len(enumerate_labels(component, tree, anc2)) == 2

    def test_labels_are_exactly_the_matchings(self):
        rng = random.Random(53)
        for _ in range(15):
            tree = random_instance(
                rng, n_leaves=rng.randint(2, 4), n_markers=4
            )
            for component in components_of(tree):
                for v in tree.internal_ids():
                    got = {
                        l.adjacencies for l in enumerate_labels(component, tree, v)
                    }
                    annotated = [
                        a for a in component.sorted_edges
                        if v in component.edges[a]
                    ]
                    assert got == set(consistent_subsets(annotated))

    def test_leaves_have_no_label_space(self):
        tree = three_leaf_instance()
        component = components_of(tree)[0]
        with pytest.raises(InputError):
            enumerate_labels(component, tree, tree.id_of("s1"))

    def test_max_labels_bounds_the_space(self):
        tree = three_leaf_instance()
        component = components_of(tree)[0]
        with pytest.raises(CapacityExceeded):
            enumerate_labels(component, tree, tree.id_of("anc2"), max_labels=1)


# ---------------------------------------------------------------------------
# Branch costs


class TestBranchCost:
    def test_mixes_changes_and_discarded_weight(self):
        tree = three_leaf_instance()
        anc2 = tree.id_of("anc2")
        a = Adjacency.of("1h", "2t")
        weights = WeightTable()
        weights.set(anc2, a, "0.8")
        component = components_of(tree, weights)[0]
        empty, full = enumerate_labels(component, tree, anc2)
        # child keeps a: no discard; one change against an empty parent
        assert branch_cost(empty, full, weights, "1/2", anc2, [a]) == Fraction(1, 2)
        # child drops a: discard 0.8, no change
        assert branch_cost(empty, empty, weights, "1/2", anc2, [a]) == Fraction(2, 5)
        assert branch_cost(full, empty, weights, 0, anc2, [a]) == 1

    def test_invalid_labels_cost_infinity(self):
        a = Adjacency.of("1h", "2t")
        good = JointLabel.from_matching(a.extremities, [a])
        bad = JointLabel.from_choices({a.first: a, a.second: None})
        assert branch_cost(good, bad, WeightTable(), "1/2", 0, [a]) == float("inf")


# ---------------------------------------------------------------------------
# Optimization


class TestSolveComponent:
    def test_hand_computed_three_leaf_instance(self):
        tree = three_leaf_instance()
        anc1, anc2 = tree.id_of("anc1"), tree.id_of("anc2")
        a = Adjacency.of("1h", "2t")
        weights = WeightTable()
        weights.set(anc1, a, "0.4")
        weights.set(anc2, a, "0.8")
        component = components_of(tree, weights)[0]

        solution, table = solve_component(component, tree, weights, "1/2")
        assert solution.objective == Fraction(1, 2)
        assert solution.scj_changes == 1
        assert solution.discarded_micro == 0
        assert solution.node_labels == {
            anc1: frozenset({a}), anc2: frozenset({a}),
        }
        assert count_cooptimal(table) == 1
        assert solution.objective_scaled == 10**6
        assert solution.scale == 2 * 10**6

    def test_alpha_extremes_on_the_same_instance(self):
        tree = three_leaf_instance()
        anc1, anc2 = tree.id_of("anc1"), tree.id_of("anc2")
        a = Adjacency.of("1h", "2t")
        weights = WeightTable()
        weights.set(anc1, a, "0.4")
        weights.set(anc2, a, "0.8")
        component = components_of(tree, weights)[0]

        solution, table = solve_component(component, tree, weights, 0)
        assert solution.objective == 1
        assert count_cooptimal(table) == 2
        solution, table = solve_component(component, tree, weights, 1)
        assert solution.objective == 0
        assert solution.discarded_micro == 0
        assert count_cooptimal(table) == 1

    def test_matches_full_enumeration(self):
        rng = random.Random(59)
        checked = 0
        while checked < 60:
            tree = random_instance(
                rng, n_leaves=rng.randint(2, 5), n_markers=4
            )
            weights = random_weights(rng, tree)
            for component in components_of(tree, weights, "0.2"):
                if joint_assignment_count(component, tree) > 20_000:
                    continue
                profile = component_profile(component, tree, weights)
                for alpha in ("0", "1/4", "1/2", "3/4", "1"):
                    want, want_count = profile_optimum(profile, alpha)
                    solution, table = solve_component(
                        component, tree, weights, alpha, explosion_cap=10**12
                    )
                    assert solution.objective == want
                    assert count_cooptimal(table) == want_count
                    checked += 1

    def test_oversized_label_spaces_are_refused(self):
        rng = random.Random(61)
        tree = random_instance(rng, n_leaves=6, n_markers=4)
        component = max(
            components_of(tree), key=lambda c: c.label_space_bound
        )
        with pytest.raises(CapacityExceeded):
            solve_component(component, tree, weights=WeightTable(),
                            alpha="1/2", explosion_cap=1)

    def test_needs_genomes(self):
        tree = three_leaf_instance()
        component = components_of(tree)[0]
        bare = parse_newick("((s1,s2)anc2,s3)anc1;")
        with pytest.raises(InputError):
            solve_component(component, bare, WeightTable(), "1/2")


# ---------------------------------------------------------------------------
# Counting and sampling


def cherry_gadget():
    """One adjacency present in one of two leaves: two co-optima."""
    tree = parse_newick("(s1,s2)anc1;")
    markers = {1, 2}
    return tree.with_genomes({
        "s1": genome_of(markers, (1, 2)),
        "s2": genome_of(markers, (1,), (2,)),
    })


def fork_gadget():
    """Two candidates sharing an extremity: three co-optimal labels."""
    tree = parse_newick("(s1,s2)anc1;")
    markers = {1, 2, 3}
    return tree.with_genomes({
        "s1": genome_of(markers, (1, 2), (3,)),
        "s2": genome_of(markers, (1, 3), (2,)),
    })


class TestCountingAndSampling:
    def test_cherry_has_two_cooptima(self):
        tree = cherry_gadget()
        component = components_of(tree)[0]
        solution, table = solve_component(component, tree, WeightTable(), "1/2")
        assert solution.objective == Fraction(1, 2)
        assert count_cooptimal(table) == 2

    def test_fork_has_three_cooptima(self):
        tree = fork_gadget()
        component = components_of(tree)[0]
        solution, table = solve_component(component, tree, WeightTable(), "1/2")
        assert count_cooptimal(table) == 3

    def test_samples_reevaluate_to_the_optimum(self):
        rng = random.Random(67)
        for _ in range(10):
            tree = random_instance(rng, n_leaves=3, n_markers=4)
            weights = random_weights(rng, tree)
            for component in components_of(tree, weights):
                if component.label_space_bound > 300:
                    continue
                solution, table = solve_component(
                    component, tree, weights, "1/2"
                )
                for sample in sample_component(
                    component, tree, weights, "1/2", 10, seed=3, table=table
                ):
                    scj, discarded = evaluate_component_labeling(
                        component, tree, weights, sample.node_labels
                    )
                    scaled = 10**6 * scj + 1 * discarded
                    assert scaled == solution.objective_scaled

    def test_sampling_is_fair_on_the_fork(self):
        tree = fork_gadget()
        component = components_of(tree)[0]
        anc1 = tree.id_of("anc1")
        n = 3000
        samples = sample_component(
            component, tree, WeightTable(), "1/2", n, seed=11
        )
        tallies: dict[frozenset, int] = {}
        for sample in samples:
            key = sample.node_labels[anc1]
            tallies[key] = tallies.get(key, 0) + 1
        assert len(tallies) == 3
        for count in tallies.values():
            assert abs(count / n - 1 / 3) < 0.05

    def test_same_seed_same_samples(self):
        tree = fork_gadget()
        component = components_of(tree)[0]
        first = sample_component(component, tree, WeightTable(), "1/2", 20, seed=9)
        second = sample_component(component, tree, WeightTable(), "1/2", 20, seed=9)
        assert [s.node_labels for s in first] == [s.node_labels for s in second]
        other = sample_component(component, tree, WeightTable(), "1/2", 20, seed=10)
        assert [s.node_labels for s in first] != [s.node_labels for s in other]

    def test_sample_bookkeeping(self):
        tree = cherry_gadget()
        component = components_of(tree)[0]
        samples = sample_component(component, tree, WeightTable(), "1/2", 5, seed=1)
        assert [s.sample_index for s in samples] == list(range(5))
        assert all(s.seed == 1 for s in samples)
        assert sample_component(
            component, tree, WeightTable(), "1/2", 0, seed=1
        ) == []
        with pytest.raises(InputError):
            sample_component(component, tree, WeightTable(), "1/2", -1, seed=1)


# ---------------------------------------------------------------------------
# Re-evaluation


class TestEvaluateLabeling:
    def test_hand_values(self):
        tree = three_leaf_instance()
        anc1, anc2 = tree.id_of("anc1"), tree.id_of("anc2")
        a = Adjacency.of("1h", "2t")
        weights = WeightTable()
        weights.set(anc1, a, "0.4")
        component = components_of(tree, weights)[0]
        scj, discarded = evaluate_component_labeling(
            component, tree, weights,
            {anc1: frozenset(), anc2: frozenset({a})},
        )
        assert scj == 1
        assert discarded == 400_000

    def test_rejects_missing_or_foreign_labels(self):
        tree = three_leaf_instance()
        anc1, anc2 = tree.id_of("anc1"), tree.id_of("anc2")
        component = components_of(tree)[0]
        with pytest.raises(InputError):
            evaluate_component_labeling(
                component, tree, WeightTable(), {anc1: frozenset()}
            )
        foreign = frozenset({Adjacency.of("1t", "2h")})
        with pytest.raises(InputError):
            evaluate_component_labeling(
                component, tree, WeightTable(),
                {anc1: foreign, anc2: frozenset()},
            )
