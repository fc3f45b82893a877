"""Acceptance gate: ten checks, one pass/fail line each under pytest -v.

Each test pins one advertised property of the suite at its stated
tolerance and prints the measured numbers, so a red line here means the
shipped behavior changed, not a unit regressed.  Run with
`pytest tests/test_acceptance.py -v -s`.
"""

import random
import time

from oracles import enumerate_sl3_order, random_transitive_action, schreier_stabilizer_words
from sgbench.analyze import (
    SL2_S,
    SL2_T,
    detect_invariant_form,
    detect_transvection,
    evaluate_syllables,
    nielsen_descent,
    nielsen_reduce_pair,
    sl2_word_decompose,
    solve_family5,
    stallings_fold,
)
from sgbench.cli import cli
from sgbench.construct import (
    build_family1,
    build_family2,
    build_family3,
    build_family4,
    build_family5,
    gamma_generators,
    nielsen_scramble,
)
from sgbench.harness import CELLS, aggregate, parse_answer, score
from sgbench.linalg import BigMatrix
from sgbench.verify import (
    INFINITE,
    VerificationError,
    ground_truth,
    sanity_mod_image,
    sl3_order,
    verify_instance,
)

X10_INDEX = 44762842929840316223040


def test_criterion_01_order_formula_against_enumeration():
    assert sl3_order(1009) == 24 * X10_INDEX
    assert sl3_order(2) == enumerate_sl3_order(2) == 168
    assert sl3_order(3) == enumerate_sl3_order(3) == 5616
    start = time.perf_counter()
    for _ in range(2000):
        sl3_order(1009)
    per_call = (time.perf_counter() - start) / 2000
    assert per_call < 50e-6
    print(f"criterion 1: formula == enumeration at 2 and 3;"
          f" {per_call * 1e6:.1f} us/call")


def test_criterion_02_large_index_reproduction():
    start = time.perf_counter()
    for seed in (0, 7, 12345):
        inst, secret = build_family4("v2", N=1009, K_spec="octahedral_s4",
                                     seed=seed, scramble="desk")
        truth = ground_truth(secret)
        assert truth.index_answer == X10_INDEX
        assert secret.k_order == 24
        report = sanity_mod_image(list(inst.generators), 1009, secret.K_gens)
        assert report.mod_image_ok is True and report.det_ok
    elapsed = time.perf_counter() - start
    assert elapsed <= 10.0
    print(f"criterion 2: index {X10_INDEX} on 3 seeds in {elapsed:.2f}s")


def test_criterion_03_congruence_instance_reproduction():
    start = time.perf_counter()
    inst, secret = build_family3(1009, K_spec="upper_unipotent",
                                 decoys=(97, 2003), seed=0, scramble="desk")
    truth = ground_truth(secret)
    by_prime = dict(zip(inst.primes, truth.prime_bits))
    assert by_prime[1009] is False
    assert by_prime[97] is True and by_prime[2003] is True
    found = detect_transvection(list(secret.base_gens))
    levels = [c for _, _, c in found]
    assert levels.count(1009) == 6
    elapsed = time.perf_counter() - start
    assert elapsed <= 10.0
    print(f"criterion 3: NO at 1009 only; transvection c=1009 x6 in {elapsed:.2f}s")


def test_criterion_04_form_plant_across_seeds():
    start = time.perf_counter()
    rng = random.Random(0)
    pool = [q for q in (3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47,
                        53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103,
                        107, 109, 113, 127, 131, 137, 139, 149)]
    planted_hits = 0
    probe_zero = 0
    for seed in range(100):
        inst, _ = build_family2(1009, seed=seed, scramble="desk")
        g1, g2 = inst.generators
        if detect_invariant_form(g1, g2, 1009).nullspace_dim >= 1:
            planted_hits += 1
        probe = pool[rng.randrange(len(pool))]
        if detect_invariant_form(g1, g2, probe).nullspace_dim == 0:
            probe_zero += 1
    elapsed = time.perf_counter() - start
    assert planted_hits == 100
    assert probe_zero >= 95
    assert elapsed <= 30.0
    print(f"criterion 4: planted {planted_hits}/100, probe zero-dim"
          f" {probe_zero}/100 in {elapsed:.2f}s")


def test_criterion_05_sl2_catalog_and_solver():
    start = time.perf_counter()
    items = build_family5()
    truths = {inst.id: ground_truth(secret).index_answer for inst, secret in items}
    assert truths["S2_02"] == 12
    for cid in ("S2_01", "S2_03", "S2_04", "S2_05"):
        assert truths[cid] is INFINITE
    # the solver sees only the published instance
    for inst, _ in items:
        assert solve_family5(inst) == truths[inst.id] or \
            (solve_family5(inst) is INFINITE and truths[inst.id] is INFINITE)
    elapsed = time.perf_counter() - start
    assert elapsed <= 5.0
    print(f"criterion 5: catalog + secret-free solver agree in {elapsed:.2f}s")


def test_criterion_06_rank1_toolkit_properties():
    rng = random.Random(42)
    failures = 0
    for _ in range(1000):
        m = BigMatrix.identity(2)
        for _ in range(rng.randrange(0, 51)):
            if rng.random() < 0.5:
                m = m * SL2_S
            else:
                m = m * (SL2_T ** rng.choice((-2, -1, 1, 2)))
        word, sign = sl2_word_decompose(m)
        got = evaluate_syllables(word)
        if got.rows != tuple(tuple(sign * e for e in row) for row in m.rows):
            failures += 1
    assert failures == 0

    fold_checked = 0
    for _ in range(30):
        k = rng.randrange(2, 13)
        sigma, tau = random_transitive_action(rng, k)
        graph = stallings_fold(schreier_stabilizer_words(sigma, tau))
        assert graph.complete and graph.states == k
        fold_checked += 1

    _, is_basis = nielsen_reduce_pair((1, 2), (2,))
    assert is_basis
    _, is_basis = nielsen_reduce_pair((1, 1), (2, 2))
    assert not is_basis
    print(f"criterion 6: 1000/1000 word round trips, {fold_checked}/30 folds"
          f" match the coset oracle, basis tests pass")


def test_criterion_07_scramble_descent_round_trip():
    base = gamma_generators(1009)
    base_max = max(g.max_abs() for g in base)
    wins = 0
    failed_seeds = []
    start = time.perf_counter()
    for seed in range(50):
        scrambled, _ = nielsen_scramble(base, depth=10, seed=seed,
                                        entry_budget=12)
        reduced, _ = nielsen_descent(scrambled, max_steps=2200,
                                     plateau_patience=550)
        if max(g.max_abs() for g in reduced) <= base_max:
            wins += 1
        else:
            failed_seeds.append(seed)
    elapsed = time.perf_counter() - start
    print(f"criterion 7: {wins}/50 recoveries in {elapsed:.1f}s;"
          f" failed seeds {failed_seeds}")
    assert wins >= 40
    assert elapsed <= 60.0


def test_criterion_08_bench_meets_one_millisecond(tmp_path):
    from sgbench.cli import bench_secrets

    secrets = bench_secrets(100)
    assert len(secrets) == 100
    start = time.perf_counter()
    for secret in secrets:
        ground_truth(secret)
    mean = (time.perf_counter() - start) / len(secrets)
    assert mean <= 1e-3
    assert cli(["bench", "--figures", str(tmp_path)]) == 0
    print(f"criterion 8: mean ground_truth {mean * 1e6:.1f} us over 100"
          f" prebuilt instances; bench exit 0")


def test_criterion_09_verifier_sanity_suite():
    builds = [
        build_family1(97, seed=0, scramble="desk"),
        build_family2(1245509, decoys=(97, 2003), seed=0, scramble="desk"),
        build_family3(1009, decoys=(97, 2003), seed=0, scramble="desk"),
        build_family4("v1", seed=0, scramble="desk"),
        build_family4("v2", N=1009, seed=0, scramble="desk"),
        build_family4("v3", N=3, seed=2, scramble="desk"),
    ] + build_family5(seed=0)
    for inst, secret in builds:
        assert verify_instance(inst, secret)
    perturbed = 0
    for inst, secret in builds:
        gens = list(inst.generators)
        rows = [list(r) for r in gens[0].rows]
        rows[0][0] += 1
        gens[0] = BigMatrix(tuple(tuple(r) for r in rows))
        import dataclasses
        broken = dataclasses.replace(inst, generators=tuple(gens))
        try:
            verify_instance(broken, secret)
        except VerificationError:
            perturbed += 1
        else:
            raise AssertionError(f"{inst.id} accepted a perturbed generator")
    print(f"criterion 9: {len(builds)} fresh instances verified;"
          f" {perturbed}/{len(builds)} perturbations rejected")


def test_criterion_10_four_way_scoring_golden_table():
    from sgbench.construct import GroundTruth

    big_truth = GroundTruth(family="IV_v2", index_answer=X10_INDEX)
    v3_truth = GroundTruth(family="IV_v3", index_answer=INFINITE,
                           accepted_abstain=True)
    list_truth = GroundTruth(family="III", prime_bits=(True, False, True))
    golden = [
        (str(X10_INDEX), "IV_v2", big_truth, "commit_correct"),
        (str(X10_INDEX + 1), "IV_v2", big_truth, "commit_wrong"),
        ("infinite_or_unknown", "IV_v2", big_truth, "abstain_wrong"),
        ("infinite_or_unknown", "IV_v3", v3_truth, "abstain_correct"),
        ("YES NO YES", "III", list_truth, "commit_correct"),
        ("NO NO NO", "III", list_truth, "commit_wrong"),
        ("I don't know", "III", list_truth, "commit_wrong"),
        ("", "III", list_truth, "commit_wrong"),
    ]
    outcomes = []
    for raw, family, truth, want in golden:
        outcome = score(parse_answer(raw, family), truth)
        assert outcome.cell == want, (raw, family, outcome)
        outcomes.append(outcome)
    card = aggregate(outcomes)
    lines = card.render_text().splitlines()
    assert lines[0].split() == ["family"] + list(CELLS) + ["n"]
    assert lines[-1].split()[0] == "overall"
    assert {row.split()[0] for row in lines[2:-1]} == {"III", "IV_v2", "IV_v3"}
    assert card.cells == {"commit_correct": 2, "commit_wrong": 4,
                          "abstain_correct": 1, "abstain_wrong": 1}
    print("criterion 10: golden table reproduces all four cells and the"
          " cross-tab layout")
