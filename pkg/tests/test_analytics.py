from __future__ import annotations

import math
import random

import numpy as np
import pytest
from scipy import stats

from polisim.analytics import religion, roles, social, taxes
from polisim.analytics.memes import extract_memes, meme_counts, region_of
from polisim.analytics.religion import (
    DIRECT,
    INDIRECT,
    PRIEST,
    classify_conversion,
    conversion_graph,
    keyword_level,
    union_disk_area,
)
from polisim.analytics.roles import (
    RoleAssignment,
    infer_role,
    normalize_two_pass,
    role_entropy,
)
from polisim.analytics.social import RegressionResult, ols_with_cis
from polisim.events import Event
from polisim.world import TownConfig


def utterance(tick, agent, text, recipients=(), x=0.0, z=0.0):
    return Event(tick=tick, agent=agent, module="talking", kind="utterance",
                 payload={"text": text, "recipients": list(recipients), "x": x, "z": z})


# -- role inference -------------------------------------------------------------


def test_farming_goals_label_farmer():
    goals = ["Focus on farming to keep a stable food supply for the village."] * 5
    assert infer_role(goals) == "Farmer"


def test_automated_farm_labels_engineer():
    goals = ["Focus on advanced farming with an automated or semi-automated farm."] * 5
    assert infer_role(goals) == "Engineer"


def test_role_flips_farmer_to_gatherer():
    farm = "Farm and breed animals for a reliable food supply."
    gather = "You should focus on gathering resources like wood and stone."
    w1 = [farm] * 5
    w2 = [farm] + [gather] * 4
    assert infer_role(w1) == "Farmer"
    assert infer_role(w2) in ("Farmer", "Gatherer")
    assert infer_role([gather] * 5) == "Gatherer"


def test_infer_role_needs_exactly_five():
    with pytest.raises(ValueError):
        infer_role(["x"] * 4)


# -- entropy ----------------------------------------------------------------------


def test_entropy_single_role_zero():
    assert role_entropy({f"a{i}": "Farmer" for i in range(30)}) == 0.0


def test_entropy_uniform_six_roles():
    labels = {f"a{i}": f"Role{i % 6}" for i in range(30)}
    assert role_entropy(labels) == pytest.approx(math.log(6), abs=1e-12)


def test_entropy_three_one_split():
    h = role_entropy(["Farmer", "Farmer", "Farmer", "Miner"])
    assert h == pytest.approx(0.5623351446188083, abs=1e-12)


def test_entropy_requires_assignment():
    with pytest.raises(ValueError):
        role_entropy({})


def test_entropy_bounds_random():
    rng = random.Random(0)
    for _ in range(50):
        labels = [f"R{rng.randint(0, 5)}" for _ in range(rng.randint(1, 40))]
        h = role_entropy(labels)
        assert -1e-12 <= h <= math.log(len(set(labels))) + 1e-12


# -- action matrix ------------------------------------------------------------------


def two_pass_oracle(m):
    """Independent reference: explicit loops, rows then columns."""
    m = [list(map(float, row)) for row in m]
    for row in m:
        s = sum(row)
        if s > 0:
            for j in range(len(row)):
                row[j] /= s
    for j in range(len(m[0])):
        s = sum(row[j] for row in m)
        if s > 0:
            for row in m:
                row[j] /= s
    return m


def test_single_cell_matrix():
    out = normalize_two_pass(np.array([[7.0]]))
    assert out.tolist() == [[1.0]]


def test_columns_sum_to_one():
    rng = np.random.default_rng(1)
    m = rng.integers(0, 20, size=(5, 8)).astype(float)
    out = normalize_two_pass(m)
    sums = out.sum(axis=0)
    for j, s in enumerate(sums):
        if m[:, j].sum() > 0:
            assert s == pytest.approx(1.0, abs=1e-9)


def test_two_pass_matches_oracle_on_random_matrices():
    rng = np.random.default_rng(7)
    for _ in range(50):
        m = rng.integers(0, 30, size=(rng.integers(1, 7), rng.integers(1, 9))).astype(float)
        ours = normalize_two_pass(m)
        ref = np.array(two_pass_oracle(m.tolist()))
        assert np.allclose(ours, ref, atol=1e-9)


def test_fisher_row_peaks_on_rods_and_boats():
    assignments = [RoleAssignment("F", 10, "Fisher"), RoleAssignment("G", 10, "Guard")]
    events = []
    t = 11
    for _ in range(6):
        events.append(Event(t, "F", "world", "action",
                            {"kind": "craft", "args": {"item": "fishing_rod"},
                             "status": "succeeded"}))
        events.append(Event(t + 1, "F", "world", "action",
                            {"kind": "craft", "args": {"item": "boat"}, "status": "succeeded"}))
        events.append(Event(t + 2, "G", "world", "action",
                            {"kind": "craft", "args": {"item": "oak_fence"},
                             "status": "succeeded"}))
        events.append(Event(t + 3, "G", "world", "action",
                            {"kind": "gather", "args": {"item": "oak_log"},
                             "status": "succeeded"}))
        t += 4
    role_names, kinds, matrix = roles.action_frequency_matrix(events, assignments)
    fisher = matrix[role_names.index("Fisher")]
    top = {kinds[j] for j in np.argsort(fisher)[-2:]}
    assert top == {"craft:fishing_rod", "craft:boat"}


# -- regression ------------------------------------------------------------------------


def normal_equations_oracle(x, y):
    """Solve [[n, Sx], [Sx, Sxx]] [a, b]^T = [Sy, Sxy]^T directly."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = len(x)
    A = np.array([[n, x.sum()], [x.sum(), (x * x).sum()]])
    b = np.array([y.sum(), (x * y).sum()])
    alpha, beta = np.linalg.solve(A, b)
    resid = y - (alpha + beta * x)
    r_num = n * (x * y).sum() - x.sum() * y.sum()
    r_den = math.sqrt(n * (x * x).sum() - x.sum() ** 2) * math.sqrt(
        n * (y * y).sum() - y.sum() ** 2
    )
    r = r_num / r_den if r_den else 1.0
    return beta, alpha, r


def test_perfect_line_recovers_exactly():
    x = np.arange(10, dtype=float)
    y = 0.5 * x + 2.0
    res = ols_with_cis(x, y)
    assert res.slope == pytest.approx(0.5, abs=1e-12)
    assert res.intercept == pytest.approx(2.0, abs=1e-12)
    assert res.r == pytest.approx(1.0, abs=1e-12)
    assert res.n == 10


def test_ols_matches_normal_equations_oracle():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(3, 60))
        x = rng.uniform(0, 10, size=n)
        y = rng.uniform(0, 10, size=n) + 0.3 * x
        if np.var(x) < 1e-9:
            continue
        res = ols_with_cis(x, y)
        beta, alpha, r = normal_equations_oracle(x, y)
        assert res.slope == pytest.approx(beta, abs=1e-9)
        assert res.intercept == pytest.approx(alpha, abs=1e-9)
        assert res.r == pytest.approx(r, abs=1e-9)


def test_ci_nesting_and_symmetry():
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 10, 40)
    y = 0.4 * x + rng.normal(0, 1, 40)
    res = ols_with_cis(x, y)
    assert res.ci68[0] > res.ci95[0] > res.ci99[0]
    assert res.ci68[1] < res.ci95[1] < res.ci99[1]
    for ci in (res.ci68, res.ci95, res.ci99):
        assert ci[0] <= res.slope <= ci[1]


def test_reference_report_schema():
    """Output-schema conformance against published regression numbers
    (k=5 observers row: r=0.807, n=31, beta=0.373)."""
    ref = RegressionResult(
        slope=0.373, intercept=4.328, r=0.807, n=31,
        ci68=(0.321, 0.424), ci95=(0.269, 0.476), ci99=(0.233, 0.512),
    )
    d = ref.to_dict()
    assert set(d) == {"slope", "intercept", "r", "n", "ci68", "ci95", "ci99"}
    # our t-based construction reproduces those interval widths to a few percent
    dof = ref.n - 2
    se = (ref.ci95[1] - ref.ci95[0]) / (2 * stats.t.ppf(0.975, dof))
    for level, ci in ((0.68, ref.ci68), (0.99, ref.ci99)):
        t = stats.t.ppf(0.5 + level / 2, dof)
        assert (ci[1] - ci[0]) / 2 == pytest.approx(t * se, rel=0.05)


def test_likeability_regression_threshold():
    edges = {}
    like = {}
    for i in range(8):
        node = f"n{i}"
        like[node] = float(i)
        observers = 6 if i % 2 == 0 else 2
        for j in range(observers):
            edges[(f"o{j}", node)] = 0.5 * i + 2.0
    graph = social.SocialGraph(edges=edges, true_likeability=like, true_extroversion={})
    res = social.likeability_regression(graph, min_observers=5)
    assert res.n == 4  # only even nodes have enough observers
    assert res.slope == pytest.approx(0.5, abs=1e-9)


def test_degree_extroversion_star():
    edges = {(f"o{i}", "center"): 5.0 for i in range(5)}
    graph = social.SocialGraph(
        edges=edges,
        true_likeability={},
        true_extroversion={"center": 9.0, "o0": 1.0},
    )
    data = dict((a, (d, e)) for a, d, e in social.degree_extroversion(graph))
    assert data["center"] == (5, 9.0)
    assert data["o0"] == (0, 1.0)


def test_sentiment_asymmetry_counts():
    edges = {("a", "b"): 7.0, ("b", "a"): 7.0, ("a", "c"): 10.0, ("c", "a"): 0.0,
             ("b", "c"): 4.0}
    graph = social.SocialGraph(edges=edges, true_likeability={}, true_extroversion={})
    bins = social.sentiment_asymmetry(graph)
    assert sum(bins) == 2  # only pairs with both directions
    assert bins[0] == 1  # |7-7| = 0
    assert bins[10] == 1  # |10-0| = 10, the maximum


# -- memes --------------------------------------------------------------------------


def test_extract_memes_from_themed_histories():
    histories = {
        "a": ["You should host pasta dinners for the town."] * 3,
        "b": ["You should plan a harmless prank."] * 2,
        "c": [],
    }
    vocab = extract_memes(histories)
    assert "pasta" in vocab
    assert "prank" in vocab


def test_extract_memes_empty():
    assert extract_memes({"a": []}) == []


def test_meme_counsearch_region_rules():
    towns = [TownConfig("Woodhaven", 100.0, 100.0, 50.0)]
    events = [
        utterance(5, "a", "let's go eco!", x=110.0, z=100.0),
        utterance(6, "b", "eco forever", x=400.0, z=400.0),
    ]
    counts = meme_counts(events, ["eco"], towns, window=120)
    assert counts[("eco", "Woodhaven", 0)] == 1
    assert counts[("eco", "rural", 0)] == 1
    assert region_of(110.0, 100.0, towns) == "Woodhaven"
    assert region_of(400.0, 400.0, towns) == "rural"


# -- religion -------------------------------------------------------------------------


def test_keyword_precedence():
    assert keyword_level("the spaghetti monster rules") == DIRECT
    assert keyword_level("I love spaghetti") == INDIRECT
    assert keyword_level("I am a Pastafarian now") == DIRECT
    assert keyword_level("pasta please") == INDIRECT
    assert keyword_level("hello world") == 0


def test_conversion_upward_only():
    events = [
        utterance(5, "a", "I love spaghetti"),
        utterance(9, "a", "join the Pastafarians"),
        utterance(12, "a", "pasta please"),
    ]
    series = classify_conversion(events, priests=[])
    assert series["a"] == [(5, INDIRECT), (9, DIRECT)]  # never downward


def test_direct_stays_direct():
    events = [
        utterance(3, "a", "Spaghetti Monster rules"),
        utterance(8, "a", "pasta please"),
    ]
    series = classify_conversion(events, priests=[])
    assert series["a"] == [(3, DIRECT)]


def test_priests_fixed_at_spawn():
    events = [utterance(3, "p", "hello")]
    series = classify_conversion(events, priests=["p"])
    assert series["p"] == [(0, PRIEST)]


def test_critical_edge_is_first_exposure():
    events = [
        utterance(5, "A", "pasta time", recipients=["h"]),
        utterance(9, "B", "pasta again", recipients=["h"]),
        utterance(9, "h", "I like pasta too"),
        utterance(11, "C", "pasta!", recipients=["x"]),  # x never converts
    ]
    conv = classify_conversion(events, priests=[])
    edges = conversion_graph(events, conv)
    crit = [e for e in edges if e.critical]
    assert len(crit) == 1
    assert (crit[0].speaker, crit[0].hearer, crit[0].tick) == ("A", "h", 5)
    x_edges = [e for e in edges if e.hearer == "x"]
    assert x_edges and not any(e.critical for e in x_edges)


# -- union area -----------------------------------------------------------------------


BOUNDS = (0.0, 1000.0, 0.0, 1000.0)


def mc_union_area(centers, radius, bounds, n=1_000_000, seed=0):
    """Monte-Carlo oracle over the bounding box of the disks clipped to bounds."""
    rng = np.random.default_rng(seed)
    cx = np.array([c[0] for c in centers])
    cz = np.array([c[1] for c in centers])
    x_lo = max(bounds[0], (cx - radius).min())
    x_hi = min(bounds[1], (cx + radius).max())
    z_lo = max(bounds[2], (cz - radius).min())
    z_hi = min(bounds[3], (cz + radius).max())
    xs = rng.uniform(x_lo, x_hi, n)
    zs = rng.uniform(z_lo, z_hi, n)
    inside = np.zeros(n, dtype=bool)
    for x0, z0 in centers:
        inside |= (xs - x0) ** 2 + (zs - z0) ** 2 <= radius**2
    return (x_hi - x_lo) * (z_hi - z_lo) * inside.mean()


def test_single_disk_matches_analytic():
    area = union_disk_area([(500.0, 500.0)], 30.0, BOUNDS)
    assert area == pytest.approx(math.pi * 900, rel=0.015)


def test_two_disjoint_disks():
    area = union_disk_area([(300.0, 300.0), (400.0, 300.0)], 30.0, BOUNDS)
    assert area == pytest.approx(2 * math.pi * 900, rel=0.015)


def test_two_overlapping_disks_match_monte_carlo():
    centers = [(500.0, 500.0), (520.0, 500.0)]
    area = union_disk_area(centers, 30.0, BOUNDS)
    ref = mc_union_area(centers, 30.0, BOUNDS)
    assert area == pytest.approx(ref, rel=0.02)


def test_union_area_matches_monte_carlo_on_random_layouts():
    rng = random.Random(9)
    for trial in range(20):
        k = rng.randint(1, 12)
        centers = [(rng.uniform(100, 900), rng.uniform(100, 900)) for _ in range(k)]
        area = union_disk_area(centers, 30.0, BOUNDS)
        ref = mc_union_area(centers, 30.0, BOUNDS, seed=trial)
        assert area == pytest.approx(ref, rel=0.02), f"layout {trial}"


def test_clipping_to_bounds():
    # disk centered on a corner: only a quarter lies inside
    area = union_disk_area([(0.0, 0.0)], 30.0, BOUNDS)
    assert area == pytest.approx(math.pi * 900 / 4, rel=0.05)


# -- tax compliance CI ------------------------------------------------------------------


def test_mean_ci_matches_bootstrap_oracle():
    rng = np.random.default_rng(2)
    for seed in range(5):
        values = (20 + rng.normal(0, 1.5, 25)).tolist()
        mean, (lo, hi) = taxes.mean_ci95(values)
        blo, bhi = taxes.bootstrap_mean_ci95(values, seed=seed)
        assert lo == pytest.approx(blo, abs=0.5)
        assert hi == pytest.approx(bhi, abs=0.5)


def test_compliance_curve_from_season_events():
    events = []
    for season, pct in ((1, 20.0), (2, 18.5)):
        events.append(Event(20 + 120 * (season - 1), "Mgr", "governance", "action",
                            {"action": "tax_season_end", "season": season, "rate": 0.2,
                             "pre_totals": {"a": 50, "b": 60},
                             "deposited": {"a": 10, "b": 12},
                             "percents": {"a": pct, "b": pct + 1.0}}))
    curve = taxes.tax_compliance_curve(events)
    assert curve.seasons == (1, 2)
    assert curve.mean[1] == pytest.approx(20.5)
    assert curve.per_agent["a"][2] == 18.5
