"""Command-line interface.

Subcommands cover the full life cycle: generate instance/secret pairs,
validate them, derive ground truth, render prompts, run the reference
solver, score an answers file, and time the scoring path.  The score
and bench commands write a CSV and a PNG figure next to each other.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
import time

from . import analyze, harness, verify
from .construct import (
    SCRAMBLE_PRESETS,
    build_family1,
    build_family2,
    build_family3,
    build_family4,
    build_family5,
)


def _parse_decoys(text):
    return tuple(int(tok) for tok in text.split(",") if tok.strip()) if text else ()


def _build(args):
    fam = args.family
    if fam == "I":
        pair = build_family1(args.p, planted=args.k_spec_or_default("octahedral_s4"),
                             n_candidates=args.candidates, seed=args.seed,
                             scramble=args.scramble)
        return [pair]
    if fam == "II":
        return [build_family2(args.p_star, decoys=_parse_decoys(args.decoys),
                              seed=args.seed, scramble=args.scramble)]
    if fam == "III":
        return [build_family3(args.N, K_spec=args.k_spec_or_default("upper_unipotent"),
                              decoys=_parse_decoys(args.decoys), seed=args.seed,
                              scramble=args.scramble)]
    if fam in ("IV_v1", "IV_v2", "IV_v3"):
        variant = fam.split("_")[1]
        k_spec = args.k_spec_or_default("upper_unipotent") if variant == "v2" else None
        return [build_family4(variant, N=args.N if variant != "v1" else None,
                              K_spec=k_spec, seed=args.seed, scramble=args.scramble)]
    if fam == "V":
        return build_family5(seed=args.seed, scramble=args.scramble)
    raise ValueError(f"unknown family {fam!r}")


def _cmd_generate(args) -> int:
    for instance, secret in _build(args):
        verify.verify_instance(instance, secret)
        paths = harness.write_instance(instance, secret, args.out)
        print(f"{instance.id}\t{paths['instance']}")
    return 0


def _instance_dirs(root):
    if os.path.isfile(os.path.join(root, "instance.json")):
        return [root]
    found = sorted(glob.glob(os.path.join(root, "*", "instance.json")))
    return [os.path.dirname(p) for p in found]


def _load_pair(directory):
    instance = harness.read_instance(os.path.join(directory, "instance.json"))
    secret_path = os.path.join(directory, "secret.json")
    secret = harness.read_secret(secret_path) if os.path.exists(secret_path) else None
    return instance, secret


def _cmd_validate(args) -> int:
    failures = 0
    dirs = _instance_dirs(args.dir)
    if not dirs:
        print(f"no instances under {args.dir}", file=sys.stderr)
        return 1
    for directory in dirs:
        instance, secret = _load_pair(directory)
        try:
            with open(os.path.join(directory, "instance.json"), encoding="utf-8") as fh:
                harness.audit_public_payload(json.load(fh))
            if secret is None:
                raise verify.VerificationError("missing secret sidecar")
            verify.verify_instance(instance, secret)
            print(f"{instance.id} OK")
        except Exception as exc:  # noqa: BLE001 - every failure must be reported
            failures += 1
            print(f"{instance.id} FAIL {exc}")
    return 1 if failures else 0


def _cmd_truth(args) -> int:
    status = 0
    for directory in _instance_dirs(args.dir):
        instance, secret = _load_pair(directory)
        if secret is None:
            print(f"{instance.id} FAIL missing secret sidecar", file=sys.stderr)
            status = 1
            continue
        payload = harness.truth_to_payload(verify.ground_truth(secret))
        out_path = os.path.join(directory, "truth.json")
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        print(json.dumps({"instance_id": instance.id, **payload}))
    return status


def _cmd_prompt(args) -> int:
    for directory in _instance_dirs(args.dir):
        instance, _ = _load_pair(directory)
        sys.stdout.write(harness.render_prompt(instance))
    return 0


def _cmd_solve(args) -> int:
    records = []
    for directory in _instance_dirs(args.dir):
        instance, _ = _load_pair(directory)
        answer, detail = analyze.solve_instance(instance)
        records.append(harness.AnswerRecord(instance.id, answer, None, False))
        print(f"{instance.id}\t{answer if answer else '(no answer)'}")
        if args.verbose and detail:
            print(f"  {json.dumps(detail, default=str)}", file=sys.stderr)
    harness.write_answers(records, args.out)
    print(f"answers written to {args.out}")
    return 0


def _cmd_score(args) -> int:
    from . import report

    answers = harness.read_answers(args.answers)
    outcomes = []
    rows = []
    for directory in _instance_dirs(args.dir):
        instance, secret = _load_pair(directory)
        if secret is None:
            print(f"{instance.id} FAIL missing secret sidecar", file=sys.stderr)
            return 1
        truth = verify.ground_truth(secret)
        record = harness.parse_answer(answers.get(instance.id, ""), instance.family,
                                      instance_id=instance.id)
        outcome = harness.score(record, truth, split_infinite=args.split_infinite)
        outcomes.append(outcome)
        rows.append((instance.id, instance.family, outcome.cell,
                     outcome.detail.get("reason", "")))
    if not outcomes:
        print(f"no instances under {args.dir}", file=sys.stderr)
        return 1
    card = harness.aggregate(outcomes)
    print(card.render_text())
    os.makedirs(args.figures, exist_ok=True)
    csv_path = os.path.join(args.figures, "scores.csv")
    fig_path = os.path.join(args.figures, "scorecard.png")
    report.write_scores_csv(rows, csv_path)
    report.render_scorecard_figure(card, fig_path)
    print(f"scores written to {csv_path}")
    print(f"figure written to {fig_path}")
    return 0


_BENCH_CASES = (
    ("parse_list", "YES NO YES NO", "III"),
    ("parse_index", "208", "IV_v2"),
    ("parse_abstain", "infinite_or_unknown", "IV_v3"),
    ("parse_garbage", "the subgroup is quite large", "V"),
)


def bench_secrets(n: int = 100):
    """A fast, deterministic mix of prebuilt secrets for timing."""
    secrets = []
    for instance, secret in build_family5():
        secrets.append(secret)
    seed = 0
    while len(secrets) < n:
        if len(secrets) % 2:
            secrets.append(build_family3(11, decoys=(2, 3), seed=seed)[1])
        else:
            secrets.append(build_family4("v2", N=11, seed=seed)[1])
        seed += 1
    return secrets[:n]


def _cmd_bench(args) -> int:
    from . import report
    from .construct import GroundTruth
    from .verify import INFINITE

    rows = []
    # the headline number: ground truth from a prebuilt secret, which must
    # stay O(1) because the subgroup order is memoized at build time
    secrets = bench_secrets(args.instances)
    start = time.perf_counter()
    for secret in secrets:
        verify.ground_truth(secret)
    total = time.perf_counter() - start
    truth_us = total / len(secrets) * 1e6
    rows.append(("ground_truth", len(secrets), f"{total:.6f}", f"{truth_us:.3f}"))
    print(f"ground_truth: {truth_us:.1f} us/call over {len(secrets)}"
          f" prebuilt instances")

    truths = {
        "III": GroundTruth(family="III", prime_bits=(True, False, True, False)),
        "IV_v2": GroundTruth(family="IV_v2", index_answer=208),
        "IV_v3": GroundTruth(family="IV_v3", index_answer=INFINITE,
                             accepted_abstain=True),
        "V": GroundTruth(family="V", index_answer=12),
    }
    worst_score_us = 0.0
    for label, raw, family in _BENCH_CASES:
        truth = truths[family]
        start = time.perf_counter()
        for _ in range(args.iterations):
            record = harness.parse_answer(raw, family)
            harness.score(record, truth)
        total = time.perf_counter() - start
        per_call_us = total / args.iterations * 1e6
        worst_score_us = max(worst_score_us, per_call_us)
        rows.append((label, args.iterations, f"{total:.6f}", f"{per_call_us:.3f}"))
        print(f"{label}: {per_call_us:.1f} us/call over {args.iterations} calls")
    os.makedirs(args.figures, exist_ok=True)
    report.write_bench_csv(rows, os.path.join(args.figures, "bench.csv"))
    report.render_bench_figure(rows, os.path.join(args.figures, "bench.png"))
    print(f"bench written to {args.figures}")
    if truth_us > 1000.0:
        print(f"FAIL ground_truth exceeded 1 ms per instance ({truth_us:.1f} us)",
              file=sys.stderr)
        return 1
    if worst_score_us > 1000.0:
        print(f"FAIL scoring exceeded 1 ms per call ({worst_score_us:.1f} us)",
              file=sys.stderr)
        return 1
    return 0


class _Args(argparse.Namespace):
    def k_spec_or_default(self, default):
        return self.k_spec if self.k_spec else default


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sgbench",
        description="Trapdoor subgroup benchmark for SL(3, Z) and SL(2, Z).")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="build instance/secret pairs")
    gen.add_argument("--family", required=True,
                     choices=["I", "II", "III", "IV_v1", "IV_v2", "IV_v3", "V"])
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="instances")
    gen.add_argument("--scramble", default="desk", choices=sorted(SCRAMBLE_PRESETS))
    gen.add_argument("--p", type=int, default=97, help="modulus for family I")
    gen.add_argument("--p-star", dest="p_star", type=int, default=1245509)
    gen.add_argument("--N", type=int, default=1009)
    gen.add_argument("--decoys", default="97,2003")
    gen.add_argument("--k-spec", dest="k_spec", default=None,
                     choices=["upper_unipotent", "octahedral_s4"])
    gen.add_argument("--candidates", type=int, default=4)
    gen.set_defaults(func=_cmd_generate)

    val = sub.add_parser("validate", help="verify instance/secret consistency")
    val.add_argument("--dir", default="instances")
    val.set_defaults(func=_cmd_validate)

    tru = sub.add_parser("truth", help="derive ground truth from secrets")
    tru.add_argument("--dir", default="instances")
    tru.set_defaults(func=_cmd_truth)

    pro = sub.add_parser("prompt", help="render instance prompts")
    pro.add_argument("--dir", default="instances")
    pro.set_defaults(func=_cmd_prompt)

    sol = sub.add_parser("solve", help="run the reference solver")
    sol.add_argument("--dir", default="instances")
    sol.add_argument("--out", default="answers.json")
    sol.add_argument("--verbose", action="store_true")
    sol.set_defaults(func=_cmd_solve)

    sco = sub.add_parser("score", help="score an answers file")
    sco.add_argument("--dir", default="instances")
    sco.add_argument("--answers", default="answers.json")
    sco.add_argument("--figures", default="report")
    sco.add_argument("--split-infinite", dest="split_infinite", action="store_true")
    sco.set_defaults(func=_cmd_score)

    ben = sub.add_parser("bench", help="time ground truth and scoring")
    ben.add_argument("--iterations", type=int, default=2000)
    ben.add_argument("--instances", type=int, default=100)
    ben.add_argument("--figures", default="report")
    ben.set_defaults(func=_cmd_bench)
    return parser


def cli(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv, namespace=_Args())
    try:
        return args.func(args)
    except (ValueError, OSError, verify.VerificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
