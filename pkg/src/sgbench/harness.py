"""Evaluation harness: files, prompts, answer parsing, and scoring.

Instances and secrets are stored as JSON sidecar pairs; matrix entries
are decimal strings so arbitrary-precision values survive any JSON
reader.  Scoring is four-way: a commitment is right or wrong, and so is
the decision to abstain.  Abstention exists only for the exact-index
families; on list questions it counts as a wrong commitment.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field

from .construct import GroundTruth, Instance, ScrambleMove, TrapdoorSecret
from .linalg import BigMatrix, ModMatrix
from .verify import INFINITE

INSTANCE_SCHEMA = "sgbench-instance/1"
SECRET_SCHEMA = "sgbench-secret/1"
TRUTH_SCHEMA = "sgbench-truth/1"
ANSWERS_SCHEMA = "sgbench-answers/1"

CELLS = ("commit_correct", "commit_wrong", "abstain_correct", "abstain_wrong")

ABSTAIN = "infinite_or_unknown"
ABSTAIN_TOKENS = (ABSTAIN, "don't know", "dont know", "unknown", "infinite")

# Key names that must never appear anywhere in a public payload.
_FORBIDDEN_PUBLIC_KEYS = frozenset({
    "N", "K", "K_gens", "p_star", "level", "secret", "k_order", "base_gens",
    "scramble_log", "word_certificates", "planted_form", "k_spec",
    "membership_bits", "catalog_id",
})
_PUBLIC_KEYS = frozenset({
    "schema", "id", "family", "question_kind", "generators", "candidates",
    "primes", "answer_grammar",
})
_GRAMMAR_KEYS = frozenset({"kind", "length", "tokens", "abstain_token"})


@dataclass(frozen=True)
class AnswerRecord:
    instance_id: str
    raw_text: str
    parsed: tuple | None
    parse_ok: bool


@dataclass(frozen=True)
class ScoreOutcome:
    cell: str
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cell not in CELLS:
            raise ValueError(f"unknown cell {self.cell!r}")


@dataclass(frozen=True)
class Scorecard:
    n: int
    cells: dict
    per_family: dict

    def rate(self, cell: str) -> float:
        return self.cells.get(cell, 0) / self.n if self.n else 0.0

    def render_text(self) -> str:
        """Fixed-width cross-tab of family by outcome cell."""
        rows = sorted(self.per_family)
        header = ["family"] + list(CELLS) + ["n"]
        table = [header]
        for fam in rows:
            counts = self.per_family[fam]
            table.append([fam] + [str(counts.get(c, 0)) for c in CELLS]
                         + [str(sum(counts.values()))])
        table.append(["overall"] + [str(self.cells.get(c, 0)) for c in CELLS]
                     + [str(self.n)])
        widths = [max(len(r[i]) for r in table) for i in range(len(header))]
        lines = []
        for idx, row in enumerate(table):
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
            if idx == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# matrix and dataclass serialization
# ---------------------------------------------------------------------------

def _matrix_to_json(mat):
    payload = {"rows": [[str(e) for e in row] for row in mat.rows]}
    if isinstance(mat, ModMatrix):
        payload["modulus"] = str(mat.modulus)
    return payload


def _matrix_from_json(payload):
    rows = tuple(tuple(int(e) for e in row) for row in payload["rows"])
    if "modulus" in payload:
        return ModMatrix(rows, int(payload["modulus"]))
    return BigMatrix(rows)


def instance_to_payload(instance: Instance) -> dict:
    return {
        "schema": INSTANCE_SCHEMA,
        "id": instance.id,
        "family": instance.family,
        "question_kind": instance.question_kind,
        "generators": [_matrix_to_json(g) for g in instance.generators],
        "candidates": [_matrix_to_json(c) for c in instance.candidates],
        "primes": [int(p) for p in instance.primes],
        "answer_grammar": dict(instance.answer_grammar),
    }


def payload_to_instance(payload: dict) -> Instance:
    if payload.get("schema") != INSTANCE_SCHEMA:
        raise ValueError(f"unexpected schema {payload.get('schema')!r}")
    return Instance(
        id=payload["id"],
        family=payload["family"],
        question_kind=payload["question_kind"],
        generators=tuple(_matrix_from_json(g) for g in payload["generators"]),
        candidates=tuple(_matrix_from_json(c) for c in payload["candidates"]),
        primes=tuple(int(p) for p in payload["primes"]),
        answer_grammar=dict(payload["answer_grammar"]),
    )


def secret_to_payload(secret: TrapdoorSecret) -> dict:
    return {
        "schema": SECRET_SCHEMA,
        "family": secret.family,
        "N": secret.N,
        "K_gens": [_matrix_to_json(k) for k in secret.K_gens],
        "p_star": secret.p_star,
        "planted_form": (_matrix_to_json(secret.planted_form)
                         if secret.planted_form is not None else None),
        "scramble_log": [[m.target, m.source, m.exponent, m.side]
                         for m in secret.scramble_log],
        "word_certificates": {k: list(w) for k, w in secret.word_certificates.items()},
        "seed": secret.seed,
        "base_gens": [_matrix_to_json(g) for g in secret.base_gens],
        "k_order": secret.k_order,
        "prng": secret.prng,
        "params": secret.params,
    }


def payload_to_secret(payload: dict) -> TrapdoorSecret:
    if payload.get("schema") != SECRET_SCHEMA:
        raise ValueError(f"unexpected schema {payload.get('schema')!r}")
    return TrapdoorSecret(
        family=payload["family"],
        N=int(payload["N"]),
        K_gens=tuple(_matrix_from_json(k) for k in payload["K_gens"]),
        p_star=None if payload["p_star"] is None else int(payload["p_star"]),
        planted_form=(None if payload["planted_form"] is None
                      else _matrix_from_json(payload["planted_form"])),
        scramble_log=tuple(ScrambleMove(m[0], m[1], m[2], m[3])
                           for m in payload["scramble_log"]),
        word_certificates={k: tuple(w) for k, w in payload["word_certificates"].items()},
        seed=int(payload["seed"]),
        base_gens=tuple(_matrix_from_json(g) for g in payload["base_gens"]),
        k_order=None if payload["k_order"] is None else int(payload["k_order"]),
        prng=payload["prng"],
        params=payload["params"],
    )


def truth_to_payload(truth: GroundTruth) -> dict:
    index = truth.index_answer
    if index is INFINITE:
        index = "INFINITE"
    return {
        "schema": TRUTH_SCHEMA,
        "family": truth.family,
        "membership_bits": (None if truth.membership_bits is None
                            else [bool(b) for b in truth.membership_bits]),
        "prime_bits": (None if truth.prime_bits is None
                       else [bool(b) for b in truth.prime_bits]),
        "index_answer": index,
        "accepted_abstain": truth.accepted_abstain,
    }


def payload_to_truth(payload: dict) -> GroundTruth:
    if payload.get("schema") != TRUTH_SCHEMA:
        raise ValueError(f"unexpected schema {payload.get('schema')!r}")
    index = payload["index_answer"]
    if index == "INFINITE":
        index = INFINITE
    elif index is not None:
        index = int(index)
    return GroundTruth(
        family=payload["family"],
        membership_bits=(None if payload["membership_bits"] is None
                         else tuple(payload["membership_bits"])),
        prime_bits=(None if payload["prime_bits"] is None
                    else tuple(payload["prime_bits"])),
        index_answer=index,
        accepted_abstain=bool(payload["accepted_abstain"]),
    )


def audit_public_payload(payload: dict) -> None:
    """Raise if a public payload carries construction-side keys."""
    if set(payload) != _PUBLIC_KEYS:
        raise ValueError(f"public payload keys must be exactly {sorted(_PUBLIC_KEYS)}")
    if not set(payload["answer_grammar"]) <= _GRAMMAR_KEYS:
        raise ValueError("answer grammar carries unexpected keys")

    def scan(node):
        if isinstance(node, dict):
            for key, value in node.items():
                if key in _FORBIDDEN_PUBLIC_KEYS:
                    raise ValueError(f"forbidden key {key!r} in public payload")
                scan(value)
        elif isinstance(node, (list, tuple)):
            for value in node:
                scan(value)

    scan(payload)


def write_instance(instance: Instance, secret: TrapdoorSecret, root) -> dict:
    """Write <root>/<id>/instance.json and secret.json; returns the paths."""
    payload = instance_to_payload(instance)
    audit_public_payload(payload)
    directory = os.path.join(str(root), instance.id)
    os.makedirs(directory, exist_ok=True)
    paths = {
        "instance": os.path.join(directory, "instance.json"),
        "secret": os.path.join(directory, "secret.json"),
    }
    with open(paths["instance"], "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    with open(paths["secret"], "w", encoding="utf-8") as fh:
        json.dump(secret_to_payload(secret), fh, indent=1)
        fh.write("\n")
    return paths


def read_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return payload_to_instance(json.load(fh))


def read_secret(path) -> TrapdoorSecret:
    with open(path, encoding="utf-8") as fh:
        return payload_to_secret(json.load(fh))


# ---------------------------------------------------------------------------
# prompt rendering
# ---------------------------------------------------------------------------

def _matrix_lines(name, mat):
    return [f"{name} = {list(list(row) for row in mat.rows)}"]

_QUESTION_TEXT = {
    "membership_list": (
        "For each candidate matrix below, decide whether it belongs to G.\n"
        "Answer with one word per candidate, YES or NO, in the given order,"
        " separated by spaces."),
    "prime_list_yesno_form": (
        "For each prime p below, decide whether there is a nonzero symmetric"
        " 3x3 matrix Q over the integers mod p with g^T Q g = Q (mod p) for"
        " every generator g of G.\n"
        "Answer with one word per prime, YES or NO, in the given order,"
        " separated by spaces."),
    "prime_list_yesno_image": (
        "For each prime p below, decide whether reducing the generators of G"
        " mod p yields the full group SL(3, Z/p).\n"
        "Answer with one word per prime, YES or NO, in the given order,"
        " separated by spaces."),
    "exact_index_or_unknown": (
        "Determine the index of G in SL({dim}, Z).\n"
        "Answer with the exact index as a decimal integer if it is finite and"
        " you can certify it; otherwise answer exactly"
        " 'infinite_or_unknown'."),
}


def render_prompt(instance: Instance) -> str:
    """Deterministic plain-text prompt built only from public fields."""
    dim = instance.generators[0].dim
    lines = [f"Consider the subgroup G of SL({dim}, Z) generated by the"
             f" following matrices:", ""]
    for idx, g in enumerate(instance.generators, start=1):
        lines.extend(_matrix_lines(f"g{idx}", g))
    lines.append("")
    kind = instance.question_kind
    if kind == "membership_list":
        lines.append("Candidate matrices:")
        for idx, c in enumerate(instance.candidates, start=1):
            lines.extend(_matrix_lines(f"c{idx}", c))
        lines.append("")
        lines.append(_QUESTION_TEXT[kind])
    elif kind == "prime_list_yesno":
        lines.append("Primes: " + ", ".join(str(p) for p in instance.primes))
        lines.append("")
        key = ("prime_list_yesno_form" if instance.family == "II"
               else "prime_list_yesno_image")
        lines.append(_QUESTION_TEXT[key])
    elif kind == "exact_index_or_unknown":
        lines.append(_QUESTION_TEXT[kind].format(dim=dim))
    else:
        raise ValueError(f"unknown question kind {kind!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# answer parsing
# ---------------------------------------------------------------------------

_YESNO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_INT_RE = re.compile(r"[+-]?\d+")


def _list_kind(family):
    return family in ("I", "II", "III")


def parse_answer(raw: str, family: str, instance_id: str = "") -> AnswerRecord:
    """Parse a raw answer string against the family's grammar.

    List families parse to a tuple of booleans; index families parse to
    an exact integer or an abstain token.  An abstain phrase on a list
    family is kept as parsed abstention so scoring can charge it as a
    wrong commitment.  Unparseable text yields parse_ok False.
    """
    text = (raw or "").strip()
    if not text:
        return AnswerRecord(instance_id, raw or "", None, False)
    lowered = text.lower()
    if _list_kind(family):
        tokens = _YESNO_RE.findall(text)
        if tokens:
            bits = tuple(tok.lower() == "yes" for tok in tokens)
            return AnswerRecord(instance_id, raw, ("bits", bits), True)
        for token in ABSTAIN_TOKENS:
            if token in lowered:
                return AnswerRecord(instance_id, raw, ("abstain", token), True)
        return AnswerRecord(instance_id, raw, None, False)
    # exact-index family
    for token in ABSTAIN_TOKENS:
        if lowered == token:
            return AnswerRecord(instance_id, raw, ("abstain", token), True)
    ints = _INT_RE.findall(text)
    if len(ints) == 1 and not any(t in lowered for t in ABSTAIN_TOKENS):
        return AnswerRecord(instance_id, raw, ("int", int(ints[0])), True)
    for token in ABSTAIN_TOKENS:
        if token in lowered:
            return AnswerRecord(instance_id, raw, ("abstain", token), True)
    return AnswerRecord(instance_id, raw, None, False)


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------

def _truth_bits(truth: GroundTruth):
    if truth.membership_bits is not None:
        return truth.membership_bits
    return truth.prime_bits


def score(answer: AnswerRecord, truth: GroundTruth,
          split_infinite: bool = False) -> ScoreOutcome:
    """Place one answer in the four-way commit/abstain grid.

    split_infinite treats a bare 'infinite' as a commitment to infinite
    index instead of an abstention, separating the model that asserts
    infiniteness from the one that gives up.
    """
    detail = {"family": truth.family}
    if not answer.parse_ok:
        detail["reason"] = "no-output" if not (answer.raw_text or "").strip() \
            else "unparseable"
        return ScoreOutcome("commit_wrong", detail)
    kind, value = answer.parsed[0], answer.parsed[1]
    bits = _truth_bits(truth)
    if bits is not None:
        if kind == "abstain":
            detail["reason"] = "abstention on a list question"
            return ScoreOutcome("commit_wrong", detail)
        if len(value) != len(bits):
            detail["reason"] = "wrong answer length"
            return ScoreOutcome("commit_wrong", detail)
        ok = tuple(value) == tuple(bool(b) for b in bits)
        detail["expected"] = [bool(b) for b in bits]
        return ScoreOutcome("commit_correct" if ok else "commit_wrong", detail)
    # exact-index question
    if kind == "abstain":
        if split_infinite and value == "infinite":
            ok = truth.index_answer is INFINITE
            detail["reason"] = "bare 'infinite' treated as a commitment"
            return ScoreOutcome("commit_correct" if ok else "commit_wrong", detail)
        ok = truth.index_answer is INFINITE or truth.accepted_abstain
        return ScoreOutcome("abstain_correct" if ok else "abstain_wrong", detail)
    ok = truth.index_answer is not INFINITE and truth.index_answer == value
    if truth.index_answer is not INFINITE:
        detail["expected"] = truth.index_answer
    return ScoreOutcome("commit_correct" if ok else "commit_wrong", detail)


def aggregate(outcomes) -> Scorecard:
    """Roll ScoreOutcomes into overall and per-family cell counts."""
    cells = {c: 0 for c in CELLS}
    per_family = {}
    n = 0
    for outcome in outcomes:
        n += 1
        cells[outcome.cell] += 1
        fam = outcome.detail.get("family", "?")
        per_family.setdefault(fam, {c: 0 for c in CELLS})[outcome.cell] += 1
    return Scorecard(n=n, cells=cells, per_family=per_family)


# ---------------------------------------------------------------------------
# answers files
# ---------------------------------------------------------------------------

def write_answers(records, path) -> None:
    payload = {
        "schema": ANSWERS_SCHEMA,
        "answers": [{"instance_id": r.instance_id, "raw_text": r.raw_text}
                    for r in records],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def read_answers(path) -> dict:
    """Map of instance_id -> raw answer text."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("schema") != ANSWERS_SCHEMA:
        raise ValueError(f"unexpected schema {payload.get('schema')!r}")
    return {entry["instance_id"]: entry["raw_text"] for entry in payload["answers"]}
