"""Builders, scrambling, and the word-rewriting invariant."""

import random

import pytest

from oracles import naive_mul
from sgbench.construct import (
    OCTAHEDRAL_B,
    SCRAMBLE_PRESETS,
    SL2_CATALOG,
    FreenessCapExceeded,
    Instance,
    ScrambleBudgetError,
    ScrambleMove,
    apply_move,
    build_family1,
    build_family2,
    build_family3,
    build_family4,
    build_family5,
    freeness_bfs,
    gamma_generators,
    invert_log,
    nielsen_scramble,
    replay_log,
    resolve_k_spec,
    rewrite_word_through_log,
    shear,
)
from sgbench.linalg import BigMatrix, ModMatrix, reduce_mod
from sgbench.words import evaluate_word, random_word


def closure_bruteforce(gens_rows, p):
    """Independent closure enumeration over row tuples mod p."""
    def norm(rows):
        return tuple(tuple(v % p for v in row) for row in rows)

    gens = [norm(r) for r in gens_rows]
    n = len(gens_rows[0])
    ident = tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n))
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for el in frontier:
            for g in gens:
                prod = norm(naive_mul(el, g))
                if prod not in seen:
                    seen.add(prod)
                    nxt.append(prod)
        frontier = nxt
    return len(seen)


# ---------------------------------------------------------------------------
# shears
# ---------------------------------------------------------------------------

def test_shear_entries():
    s = shear(7, 1, 3)
    assert s.rows == ((1, 0, 7), (0, 1, 0), (0, 0, 1))
    assert s.det() == 1


def test_shear_rejects_bad_indices():
    with pytest.raises(ValueError):
        shear(7, 2, 2)
    with pytest.raises(ValueError):
        shear(7, 0, 1)
    with pytest.raises(ValueError):
        shear(0, 1, 2)


def test_gamma_generators_are_the_six_shears():
    gens = gamma_generators(5)
    assert len(gens) == 6
    assert len({g.rows for g in gens}) == 6
    for g in gens:
        assert g.det() == 1
        offdiag = [g.rows[i][j] for i in range(3) for j in range(3) if i != j]
        assert sorted(offdiag) == [0, 0, 0, 0, 0, 5]


# ---------------------------------------------------------------------------
# scramble moves
# ---------------------------------------------------------------------------

def test_move_validation():
    with pytest.raises(ValueError):
        ScrambleMove(0, 0, 1, "right")
    with pytest.raises(ValueError):
        ScrambleMove(0, 1, 2, "right")
    with pytest.raises(ValueError):
        ScrambleMove(0, 1, 1, "up")


def test_apply_and_invert_move():
    gens = gamma_generators(3)
    move = ScrambleMove(0, 4, 1, "right")
    moved = apply_move(gens, move)
    assert moved[0].rows == (gens[0] * gens[4]).rows
    assert all(moved[k].rows == gens[k].rows for k in range(1, 6))
    back = apply_move(moved, move.inverted())
    assert all(back[k].rows == gens[k].rows for k in range(6))


def test_scramble_deterministic_and_within_budget():
    gens = gamma_generators(2)
    out1, log1 = nielsen_scramble(gens, depth=24, seed=7, entry_budget=12)
    out2, log2 = nielsen_scramble(gens, depth=24, seed=7, entry_budget=12)
    assert log1 == log2
    assert [g.rows for g in out1] == [g.rows for g in out2]
    assert len(log1) == 24
    assert all(g.max_abs() < 10 ** 12 for g in out1)
    assert all(g.det() == 1 for g in out1)


def test_scramble_replay_and_inverse():
    gens = gamma_generators(3)
    out, log = nielsen_scramble(gens, depth=18, seed=11, entry_budget=12)
    replayed = replay_log(gens, log)
    assert [g.rows for g in replayed] == [g.rows for g in out]
    restored = replay_log(out, invert_log(log))
    assert [g.rows for g in restored] == [g.rows for g in gens]


def test_scramble_budget_error_is_raised():
    # With two generators every move multiplies both, so entries of size
    # ~N^2 are forced and an 8-digit budget can never accept a move.
    big = 10 ** 5
    pair = [BigMatrix.elementary(3, 0, 1, big), BigMatrix.elementary(3, 1, 0, big)]
    with pytest.raises(ScrambleBudgetError):
        nielsen_scramble(pair, depth=5, seed=0, entry_budget=8, retry_cap=50)


def test_scramble_argument_errors():
    gens = gamma_generators(2)
    with pytest.raises(ValueError):
        nielsen_scramble(gens[:1], depth=3, seed=0)
    with pytest.raises(ValueError):
        nielsen_scramble(gens, depth=-1, seed=0)


def test_rewrite_word_through_log_preserves_value():
    base = gamma_generators(3)
    published, log = nielsen_scramble(base, depth=20, seed=3, entry_budget=12)
    rng = random.Random(5)
    for _ in range(12):
        w = random_word(rng, 6, rng.randrange(1, 9))
        rewritten = rewrite_word_through_log(w, log)
        assert evaluate_word(w, base).rows == evaluate_word(rewritten, published).rows


# ---------------------------------------------------------------------------
# K-spec resolution
# ---------------------------------------------------------------------------

def test_resolve_upper_unipotent_order_matches_closure():
    gens, order, label = resolve_k_spec("upper_unipotent", 3)
    assert label == "upper_unipotent"
    assert order == 27
    assert closure_bruteforce([g.rows for g in gens], 3) == 27


def test_resolve_octahedral_order_matches_closure():
    gens, order, label = resolve_k_spec("octahedral_s4", 5)
    assert label == "octahedral_s4"
    assert order == 24
    assert closure_bruteforce([g.rows for g in gens], 5) == 24


def test_resolve_octahedral_rejects_mod_2():
    with pytest.raises(ValueError):
        resolve_k_spec("octahedral_s4", 2)


def test_resolve_full_order_matches_closure():
    gens, order, label = resolve_k_spec("full", 2)
    assert label == "full"
    assert order == 168
    assert closure_bruteforce([g.rows for g in gens], 2) == 168


def test_resolve_raw_list():
    raw = [((1, 1, 0), (0, 1, 0), (0, 0, 1))]
    gens, order, label = resolve_k_spec(raw, 7)
    assert label == "raw"
    assert order is None
    assert gens[0].rows == ((1, 1, 0), (0, 1, 0), (0, 0, 1))
    with pytest.raises(ValueError):
        resolve_k_spec([ModMatrix(((1, 0), (0, 1)), 5)], 7)
    with pytest.raises(ValueError):
        resolve_k_spec("no_such_preset", 7)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def test_family1_structure_and_certificates():
    inst, secret = build_family1(11, seed=4, scramble="none")
    assert inst.family == "I"
    assert inst.question_kind == "membership_list"
    assert len(inst.generators) == 2
    assert len(inst.candidates) == 4
    bits = secret.params["membership_bits"]
    assert len(bits) == 4 and any(bits) and not all(bits)
    # scramble "none" publishes the base alphabet, so YES certificates
    # must evaluate to their candidate over the published generators
    for idx, is_member in enumerate(bits):
        cid = f"c{idx:02d}"
        if is_member:
            w = secret.word_certificates[cid]
            assert evaluate_word(w, list(inst.generators)).rows == inst.candidates[idx].rows
        else:
            assert cid not in secret.word_certificates
    for g in list(inst.generators) + list(inst.candidates):
        assert g.det() == 1


def test_family1_deterministic():
    a = build_family1(11, seed=9, scramble="desk")
    b = build_family1(11, seed=9, scramble="desk")
    assert [g.rows for g in a[0].generators] == [g.rows for g in b[0].generators]
    assert a[1].scramble_log == b[1].scramble_log
    c = build_family1(11, seed=10, scramble="desk")
    assert [g.rows for g in a[0].generators] != [g.rows for g in c[0].generators]


def test_family2_plants_an_invariant_form():
    inst, secret = build_family2(101, decoys=(7, 11), seed=2, scramble="none")
    assert inst.family == "II"
    assert sorted(inst.primes) == [7, 11, 101]
    assert secret.p_star == 101
    q = secret.planted_form
    for g in secret.base_gens:
        img = reduce_mod(g, 101)
        assert (img.transpose() * q * img).rows == q.rows
    assert int(secret.params["form_system_d_last"]) % 101 == 0


def test_family3_structure():
    inst, secret = build_family3(11, decoys=(2, 3), seed=1, scramble="desk")
    assert inst.family == "III"
    assert sorted(inst.primes) == [2, 3, 11]
    assert secret.N == 11
    assert secret.k_order == 11 ** 3
    assert len(secret.base_gens) == 8
    replayed = replay_log(list(secret.base_gens), secret.scramble_log)
    assert [g.rows for g in replayed] == [g.rows for g in inst.generators]


def test_family3_rejects_full_k():
    with pytest.raises(ValueError):
        build_family3(5, K_spec="full")


def test_family4_v1():
    inst, secret = build_family4("v1", seed=0, scramble="none")
    assert inst.family == "IV_v1"
    assert secret.N == 1 and secret.K_gens == ()
    assert [g.rows for g in secret.base_gens] == \
        [BigMatrix.elementary(3, 0, 1, 1).rows, OCTAHEDRAL_B.rows]


def test_family4_v2_defaults_to_unipotent():
    inst, secret = build_family4("v2", N=11, seed=5, scramble="desk")
    assert inst.family == "IV_v2"
    assert secret.k_order == 11 ** 3
    assert secret.params["k_spec"] == "upper_unipotent"
    assert inst.answer_grammar["abstain_token"] == "infinite_or_unknown"


def test_family4_v3_words_reproduce_base():
    inst, secret = build_family4("v3", N=3, seed=2, scramble="desk")
    assert inst.family == "IV_v3"
    shears = gamma_generators(3)
    g1 = evaluate_word(secret.word_certificates["g1"], shears)
    g2 = evaluate_word(secret.word_certificates["g2"], shears)
    assert [g1.rows, g2.rows] == [g.rows for g in secret.base_gens]
    assert freeness_bfs(secret.base_gens[0], secret.base_gens[1], 6)


def test_family4_bad_args():
    with pytest.raises(ValueError):
        build_family4("v9")
    with pytest.raises(ValueError):
        build_family4("v3", N=1)
    with pytest.raises(ValueError):
        build_family4("v2", N=11, K_spec="full")


def test_family5_catalog():
    items = build_family5()
    assert [inst.id for inst, _ in items] == [cid for cid, _ in SL2_CATALOG]
    assert [sec.N for _, sec in items] == [3, 2, 5, 7, 11]
    for inst, sec in items:
        assert inst.family == "V"
        assert sec.scramble_log == ()
        level = sec.N
        assert inst.generators[0].rows == ((1, level), (0, 1))
        assert inst.generators[1].rows == ((1, 0), (level, 1))


def test_instance_validation():
    with pytest.raises(ValueError):
        Instance(id="x", family="VI", question_kind="membership_list", generators=())
    with pytest.raises(ValueError):
        Instance(id="x", family="I", question_kind="riddle", generators=())


# ---------------------------------------------------------------------------
# freeness BFS
# ---------------------------------------------------------------------------

def test_freeness_sanov_pair_is_free():
    x = BigMatrix(((1, 2), (0, 1)))
    y = BigMatrix(((1, 0), (2, 1)))
    assert freeness_bfs(x, y, 6)


def test_freeness_commuting_pair_is_not_free():
    g1 = BigMatrix(((1, 2), (0, 1)))
    g2 = BigMatrix(((1, 3), (0, 1)))
    assert not freeness_bfs(g1, g2, 4)


def test_freeness_finite_order_collides_with_identity():
    s = BigMatrix(((0, -1), (1, 0)))
    t = BigMatrix(((1, 1), (0, 1)))
    assert not freeness_bfs(s, t, 4)


def test_freeness_node_cap():
    x = BigMatrix(((1, 2), (0, 1)))
    y = BigMatrix(((1, 0), (2, 1)))
    with pytest.raises(FreenessCapExceeded):
        freeness_bfs(x, y, 10, node_cap=50)


def test_scramble_presets_table():
    assert SCRAMBLE_PRESETS["none"].depth == 0
    assert SCRAMBLE_PRESETS["desk"].depth == 24
    assert SCRAMBLE_PRESETS["deep"].depth == 64
    assert SCRAMBLE_PRESETS["extreme"].depth == 72
