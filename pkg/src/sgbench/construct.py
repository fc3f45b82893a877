"""Instance builders for the five benchmark families.

Each builder turns construction-time secret data into a published
instance (matrices plus a question) and a secret sidecar that makes the
answer closed-form.  The common machinery is: level-N shears, integer
lifts of mod-N generators, and Nielsen scrambling with an entry-size
budget.  Everything is deterministic given (parameters, seed).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from sympy import isprime

from .linalg import BigMatrix, ModMatrix, lift_to_sl, reduce_mod, smith_normal_form
from .words import evaluate_word, free_reduce, random_word

FAMILIES = ("I", "II", "III", "IV_v1", "IV_v2", "IV_v3", "V")
QUESTION_KINDS = ("membership_list", "prime_list_yesno", "exact_index_or_unknown")

PRNG_NAME = "python-random-mt19937"

# Determinant-1 signed permutation pair generating the rotation group of
# the cube (order 24): a quarter turn and a coordinate 3-cycle.
OCTAHEDRAL_A = BigMatrix(((0, -1, 0), (1, 0, 0), (0, 0, 1)))
OCTAHEDRAL_B = BigMatrix(((0, 0, 1), (1, 0, 0), (0, 1, 0)))

# Classical 2-generator set of SL(3, Z): one unit transvection plus the
# cyclic permutation; conjugating the transvection around the cycle and
# commutating yields all six unit shears.
SL3Z_GEN_PAIR = (BigMatrix.elementary(3, 0, 1, 1), OCTAHEDRAL_B)

K_SPEC_PRESETS = ("upper_unipotent", "octahedral_s4", "full")


class ConstructionError(Exception):
    """A builder could not satisfy its postconditions."""


class ScrambleBudgetError(ConstructionError):
    """Entry budget unreachable after the rejection retry cap."""


class FreenessCapExceeded(ConstructionError):
    """The freeness BFS hit its node cap before reaching depth L."""


@dataclass(frozen=True)
class ScrambleMove:
    """One Nielsen move: generator `target` absorbs `source`^exponent."""

    target: int
    source: int
    exponent: int
    side: str

    def __post_init__(self):
        if self.target == self.source:
            raise ValueError("target and source must differ")
        if self.exponent not in (1, -1):
            raise ValueError("exponent must be +1 or -1")
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")

    def inverted(self) -> "ScrambleMove":
        return ScrambleMove(self.target, self.source, -self.exponent, self.side)


@dataclass(frozen=True)
class ScramblePreset:
    depth: int
    entry_budget: int  # max decimal digits per entry


SCRAMBLE_PRESETS = {
    "none": ScramblePreset(depth=0, entry_budget=8),
    "desk": ScramblePreset(depth=24, entry_budget=12),
    "deep": ScramblePreset(depth=64, entry_budget=32),
    "extreme": ScramblePreset(depth=72, entry_budget=36),
}


@dataclass(frozen=True)
class Instance:
    """Published side of a benchmark item: matrices and a question."""

    id: str
    family: str
    question_kind: str
    generators: tuple
    candidates: tuple = ()
    primes: tuple = ()
    answer_grammar: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.question_kind not in QUESTION_KINDS:
            raise ValueError(f"unknown question kind {self.question_kind!r}")


@dataclass(frozen=True)
class TrapdoorSecret:
    """Construction-time data that makes the ground truth closed-form.

    base_gens are the pre-scramble generators; replaying scramble_log on
    them reproduces the published generators exactly.  Word certificates
    are recorded over the base alphabet (letter k is base_gens[k-1]).
    k_order memoizes the planted subgroup order so verification never
    re-enumerates.  params carries family-specific closed-form data such
    as the published prime list and the candidate membership bits.
    """

    family: str
    N: int
    K_gens: tuple
    p_star: int | None
    planted_form: ModMatrix | None
    scramble_log: tuple
    word_certificates: dict
    seed: int
    base_gens: tuple
    k_order: int | None
    prng: str = PRNG_NAME
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GroundTruth:
    family: str
    membership_bits: tuple | None = None
    prime_bits: tuple | None = None
    index_answer: object = None
    accepted_abstain: bool = False


# ---------------------------------------------------------------------------
# shears and scrambling
# ---------------------------------------------------------------------------

def shear(N: int, i: int, j: int) -> BigMatrix:
    """I + N*E_ij with 1-based indices i != j."""
    if not (1 <= i <= 3 and 1 <= j <= 3):
        raise ValueError("indices must be in 1..3")
    if i == j:
        raise ValueError("shear needs i != j")
    if N < 1:
        raise ValueError("level must be positive")
    return BigMatrix.elementary(3, i - 1, j - 1, N)


def gamma_generators(N: int) -> list:
    """The six level-N shears I + N*E_ij over all i != j."""
    return [shear(N, i, j) for i in (1, 2, 3) for j in (1, 2, 3) if i != j]


def _apply_single(target: BigMatrix, source: BigMatrix, move: ScrambleMove) -> BigMatrix:
    factor = source if move.exponent == 1 else source.inv()
    return target * factor if move.side == "right" else factor * target


def apply_move(gens, move: ScrambleMove) -> list:
    out = list(gens)
    out[move.target] = _apply_single(out[move.target], out[move.source], move)
    return out


def replay_log(gens, log) -> list:
    out = list(gens)
    for move in log:
        out = apply_move(out, move)
    return out


def invert_log(log) -> tuple:
    return tuple(move.inverted() for move in reversed(log))


def rewrite_word_through_move(word, move: ScrambleMove) -> tuple:
    """Rewrite a word over the pre-move alphabet into the post-move one.

    A right move publishes g'_i = g_i g_j^e, so the old g_i reads back as
    g'_i g'_j^{-e}; the left move is symmetric.  Every other letter is
    unchanged because single Nielsen moves touch one generator.
    """
    i = move.target + 1
    j = move.source + 1
    e = move.exponent
    out = []
    for letter in word:
        if letter == i:
            out.extend((i, -e * j) if move.side == "right" else (-e * j, i))
        elif letter == -i:
            out.extend((e * j, -i) if move.side == "right" else (-i, e * j))
        else:
            out.append(letter)
    return free_reduce(out)


def rewrite_word_through_log(word, log) -> tuple:
    out = free_reduce(word)
    for move in log:
        out = rewrite_word_through_move(out, move)
    return out


def _digits(x: int) -> int:
    return len(str(abs(x)))


def nielsen_scramble(gens, depth: int, seed: int, entry_budget: int = 12,
                     retry_cap: int = 400):
    """Apply `depth` random Nielsen moves, rejecting ones that blow the budget.

    entry_budget caps every entry at that many decimal digits.  Rejected
    moves are resampled; `retry_cap` consecutive rejections raise, so a
    saturated budget is reported rather than silently truncated.
    Returns (scrambled list, move log).
    """
    if len(gens) < 2:
        raise ValueError("scrambling needs at least 2 generators")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    rng = random.Random(seed)
    cur = list(gens)
    n = len(cur)
    limit = 10 ** entry_budget
    log = []
    consecutive_rejects = 0
    while len(log) < depth:
        i = rng.randrange(n)
        j = rng.randrange(n - 1)
        if j >= i:
            j += 1
        move = ScrambleMove(i, j, rng.choice((1, -1)), rng.choice(("left", "right")))
        candidate = _apply_single(cur[i], cur[j], move)
        if candidate.max_abs() >= limit:
            consecutive_rejects += 1
            if consecutive_rejects > retry_cap:
                raise ScrambleBudgetError(
                    f"entry budget of {entry_budget} digits unreachable: "
                    f"{retry_cap} consecutive rejections after {len(log)}/{depth} moves")
            continue
        consecutive_rejects = 0
        cur[i] = candidate
        log.append(move)
    return cur, tuple(log)


def _resolve_scramble(scramble) -> ScramblePreset:
    if isinstance(scramble, ScramblePreset):
        return scramble
    if scramble is None:
        return SCRAMBLE_PRESETS["none"]
    try:
        return SCRAMBLE_PRESETS[scramble]
    except KeyError:
        raise ValueError(f"unknown scramble preset {scramble!r}") from None


def _scramble_base(base, preset: ScramblePreset, rng, depth=None, extra_headroom=8):
    """Scramble with the budget widened enough for the base entries.

    A move multiplies two generators, so digit counts add.  With only
    two generators every useful move involves the largest one and the
    budget must fit three base widths or the walk can only undo itself;
    with more generators it is enough that the two smallest fit and
    that the largest is not already over the line.
    """
    depth = preset.depth if depth is None else depth
    if depth == 0:
        return list(base), ()
    sizes = sorted(_digits(g.max_abs()) for g in base)
    if len(base) == 2:
        need = 3 * sizes[-1] + extra_headroom
    else:
        need = max(sizes[0] + sizes[1], sizes[-1]) + extra_headroom
    budget = max(preset.entry_budget, need)
    return nielsen_scramble(base, depth, seed=rng.getrandbits(63), entry_budget=budget)


# ---------------------------------------------------------------------------
# K-spec resolution
# ---------------------------------------------------------------------------

def resolve_k_spec(K_spec, N: int):
    """Resolve a planted-subgroup spec to (generators mod N, order, label).

    Presets have closed-form orders; a raw list of matrices gets order
    None and callers enumerate when they need it.
    """
    if K_spec == "upper_unipotent":
        # Heisenberg group mod N: [x12(a), x23(b)] = x13(ab) fills the
        # center, so the two superdiagonal shears generate all N^3 elements.
        gens = (ModMatrix(((1, 1, 0), (0, 1, 0), (0, 0, 1)), N),
                ModMatrix(((1, 0, 0), (0, 1, 1), (0, 0, 1)), N))
        return gens, N ** 3, "upper_unipotent"
    if K_spec == "octahedral_s4":
        if N < 3:
            raise ValueError("octahedral preset needs N >= 3 (signs collapse mod 2)")
        gens = (reduce_mod(OCTAHEDRAL_A, N), reduce_mod(OCTAHEDRAL_B, N))
        return gens, 24, "octahedral_s4"
    if K_spec == "full":
        gens = tuple(reduce_mod(g, N) for g in gamma_generators(1))
        from .verify import sl3_order
        return gens, sl3_order(N), "full"
    if isinstance(K_spec, str):
        raise ValueError(f"unknown K preset {K_spec!r}")
    gens = []
    for g in K_spec:
        if isinstance(g, ModMatrix):
            if g.modulus != N:
                raise ValueError("raw K generator has wrong modulus")
            gens.append(g)
        elif isinstance(g, BigMatrix):
            gens.append(reduce_mod(g, N))
        else:
            gens.append(ModMatrix(tuple(tuple(row) for row in g), N))
    return tuple(gens), None, "raw"


def _k_order_or_raise(K_gens, k_order, N, cap=200_000):
    if k_order is not None:
        return k_order
    from .verify import OVERFLOW, subgroup_closure
    order = subgroup_closure(list(K_gens), cap=cap)
    if order is OVERFLOW:
        raise ConstructionError(
            f"raw K spec exceeds the enumeration cap ({cap}); use a preset")
    return order


# ---------------------------------------------------------------------------
# family builders
# ---------------------------------------------------------------------------

def _require_prime(p, name):
    if not isprime(int(p)):
        raise ValueError(f"{name} must be prime, got {p}")
    return int(p)


def _prime_list(main, decoys):
    primes = [main]
    for q in decoys:
        q = _require_prime(q, "decoy")
        if q == main:
            raise ValueError("decoy equals the planted prime")
        if q in primes:
            raise ValueError(f"duplicate prime {q}")
        primes.append(q)
    return primes


def build_family1(p: int, planted="octahedral_s4", n_candidates: int = 4,
                  seed: int = 0, scramble="desk"):
    """Membership instance: two generators inside a planted mod-p subgroup.

    YES candidates are recorded words in the generators; NO candidates
    reduce outside the planted subgroup mod p, which certifies
    non-membership at build time.
    """
    p = _require_prime(p, "p")
    if n_candidates < 1:
        raise ValueError("need at least one candidate")
    rng = random.Random(seed)
    K_gens, k_order, label = resolve_k_spec(planted, p)
    from .verify import _closure_elements
    planted_set = _closure_elements(list(K_gens), cap=100_000)
    if planted_set is None:
        raise ConstructionError("planted subgroup too large to certify NO candidates")
    elements = sorted(planted_set, key=lambda mat: mat.rows)
    shears = gamma_generators(p)

    base = []
    for _ in range(2):
        image = rng.choice(elements)
        tail = evaluate_word(random_word(rng, 6, rng.randrange(2, 5)), shears)
        base.append(lift_to_sl(image) * tail)

    n_yes = rng.randrange(1, n_candidates) if n_candidates > 1 else 1
    flags = [True] * n_yes + [False] * (n_candidates - n_yes)
    rng.shuffle(flags)
    candidates = []
    certificates = {}
    seen = set()
    for idx, is_member in enumerate(flags):
        cid = f"c{idx:02d}"
        if is_member:
            while True:
                w = random_word(rng, 2, rng.randrange(3, 7))
                mat = evaluate_word(w, base)
                if mat.rows not in seen and not mat.is_identity():
                    break
            certificates[cid] = w
        else:
            for _ in range(40):
                w = random_word(rng, 6, rng.randrange(6, 11))
                mat = evaluate_word(w, gamma_generators(1))
                if reduce_mod(mat, p) not in planted_set and mat.rows not in seen:
                    break
            else:
                raise ConstructionError("could not sample a NO candidate outside the image")
        seen.add(mat.rows)
        candidates.append(mat)

    published, log = _scramble_base(base, _resolve_scramble(scramble), rng)
    instance = Instance(
        id=f"i-{seed:08x}",
        family="I",
        question_kind="membership_list",
        generators=tuple(published),
        candidates=tuple(candidates),
        answer_grammar={"kind": "membership_list", "length": n_candidates,
                        "tokens": ["YES", "NO"]},
    )
    secret = TrapdoorSecret(
        family="I", N=p, K_gens=tuple(K_gens), p_star=None, planted_form=None,
        scramble_log=log, word_certificates=certificates, seed=seed,
        base_gens=tuple(base), k_order=k_order if k_order else len(elements),
        params={"k_spec": label, "membership_bits": list(flags)},
    )
    return instance, secret


def _random_invertible(rng, p):
    while True:
        rows = tuple(tuple(rng.randrange(p) for _ in range(3)) for _ in range(3))
        mat = ModMatrix(rows, p)
        try:
            mat.inv()
            return mat
        except ValueError:
            continue


def _form_system_rows(mats):
    """Stacked linear system in the 6 entries of a symmetric form Q.

    For each matrix M the six upper-triangle equations of M^T Q M - Q = 0
    contribute one row block; unknown order is q11,q12,q13,q22,q23,q33.
    """
    unknowns = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    rows = []
    for mat in mats:
        m = mat.rows
        for (i, j) in unknowns:
            row = []
            for (a, b) in unknowns:
                v = m[a][i] * m[b][j]
                if a != b:
                    v += m[b][i] * m[a][j]
                if (a, b) == (i, j):
                    v -= 1
                row.append(v)
            rows.append(row)
    return rows


def form_from_vector(vec, p) -> ModMatrix:
    q11, q12, q13, q22, q23, q33 = [int(v) % p for v in vec]
    return ModMatrix(((q11, q12, q13), (q12, q22, q23), (q13, q23, q33)), p)


def build_family2(p_star: int, decoys=(), seed: int = 0, scramble="desk"):
    """Orthogonal-plant instance: a pair fixing a hidden form at p_star only.

    The pair is a random conjugate (mod p_star) of the octahedral
    rotation pair, lifted to SL(3, Z).  Conjugates of an orthogonal pair
    preserve Q' = C^{-T} C^{-1}, so the plant is exact at p_star; the
    Smith form of the integer form system certifies that no decoy prime
    admits an invariant form for this pair.
    """
    p_star = _require_prime(p_star, "p_star")
    if p_star == 2:
        raise ValueError("p_star must be odd")
    primes = _prime_list(p_star, decoys)
    rng = random.Random(seed)

    for _ in range(8):
        conj = _random_invertible(rng, p_star)
        conj_inv = conj.inv()
        a_img = conj * reduce_mod(OCTAHEDRAL_A, p_star) * conj_inv
        b_img = conj * reduce_mod(OCTAHEDRAL_B, p_star) * conj_inv
        planted = conj_inv.transpose() * conj_inv
        for g in (a_img, b_img):
            if (g.transpose() * planted * g).rows != planted.rows:
                raise ConstructionError("planted form is not invariant")
        base = [lift_to_sl(a_img), lift_to_sl(b_img)]
        factors = smith_normal_form(_form_system_rows(base))
        if 0 in factors:
            continue  # rationally degenerate pair; resample the conjugator
        d_last = factors[-1]
        if d_last % p_star != 0:
            raise ConstructionError("planted prime missing from the form system")
        if any(q != p_star and d_last % q == 0 for q in primes):
            continue  # a decoy admits a form for this pair; resample
        break
    else:
        raise ConstructionError("could not plant a form clean of the decoys")

    rng.shuffle(primes)
    published, log = _scramble_base(base, _resolve_scramble(scramble), rng)
    instance = Instance(
        id=f"ii-{seed:08x}",
        family="II",
        question_kind="prime_list_yesno",
        generators=tuple(published),
        primes=tuple(primes),
        answer_grammar={"kind": "prime_list_yesno", "length": len(primes),
                        "tokens": ["YES", "NO"]},
    )
    secret = TrapdoorSecret(
        family="II", N=1, K_gens=(), p_star=p_star, planted_form=planted,
        scramble_log=log, word_certificates={}, seed=seed,
        base_gens=tuple(base), k_order=24,
        params={"primes": [int(q) for q in primes],
                "form_system_d_last": str(d_last)},
    )
    return instance, secret


def build_family3(N: int, K_spec="upper_unipotent", decoys=(), seed: int = 0,
                  scramble="desk"):
    """Congruence-preimage instance: scrambled shears(N) plus K-lifts.

    The generated group contains all six level-N shears, hence the full
    congruence kernel, so reduction at any prime other than N is onto
    and the per-prime truth is NO exactly at N.
    """
    N = _require_prime(N, "N")
    K_gens, k_order, label = resolve_k_spec(K_spec, N)
    if label == "full":
        raise ValueError("K must be proper; the full group would make N a good prime")
    k_order = _k_order_or_raise(K_gens, k_order, N)
    from .verify import sl3_order
    if k_order >= sl3_order(N):
        raise ValueError("K resolves to the full group; N would not be a bad prime")
    primes = _prime_list(N, decoys)
    rng = random.Random(seed)
    rng.shuffle(primes)

    base = gamma_generators(N) + [lift_to_sl(k) for k in K_gens]
    published, log = _scramble_base(base, _resolve_scramble(scramble), rng)
    instance = Instance(
        id=f"iii-{seed:08x}",
        family="III",
        question_kind="prime_list_yesno",
        generators=tuple(published),
        primes=tuple(primes),
        answer_grammar={"kind": "prime_list_yesno", "length": len(primes),
                        "tokens": ["YES", "NO"]},
    )
    secret = TrapdoorSecret(
        family="III", N=N, K_gens=tuple(K_gens), p_star=None, planted_form=None,
        scramble_log=log, word_certificates={}, seed=seed,
        base_gens=tuple(base), k_order=k_order,
        params={"primes": [int(q) for q in primes], "k_spec": label},
    )
    return instance, secret


def build_family4(variant: str, N=None, K_spec=None, seed: int = 0, scramble="desk"):
    """Index instance: v1 full group, v2 finite congruence index, v3 free pair.

    v2 relies on the level-N shears generating the full congruence
    kernel in dimension 3 (taken as given here), so the subgroup is the
    exact preimage of K and its index is |SL(3, Z/N)| / |K|.
    """
    rng = random.Random(seed)
    preset = _resolve_scramble(scramble)

    if variant == "v1":
        base = list(SL3Z_GEN_PAIR)
        from .verify import sl3_order, subgroup_closure
        for p in (2, 3):
            if subgroup_closure([reduce_mod(g, p) for g in base], cap=10_000) != sl3_order(p):
                raise ConstructionError("v1 pair failed a small-prime surjectivity check")
        published, log = _scramble_base(base, preset, rng)
        N_out, K_gens, k_order, params = 1, (), None, {}
        certificates = {}
    elif variant == "v2":
        N_out = _require_prime(N, "N")
        K_gens, k_order, label = resolve_k_spec(K_spec or "upper_unipotent", N_out)
        if label == "full":
            raise ValueError("K must be proper for a nontrivial index")
        k_order = _k_order_or_raise(K_gens, k_order, N_out)
        from .verify import sl3_order
        if sl3_order(N_out) % k_order != 0:
            raise ConstructionError("planted order does not divide the group order")
        base = gamma_generators(N_out) + [lift_to_sl(k) for k in K_gens]
        published, log = _scramble_base(base, preset, rng)
        params = {"k_spec": label}
        certificates = {}
    elif variant == "v3":
        if N is None or int(N) < 2:
            raise ValueError("v3 needs N > 1")
        N_out = int(N)
        shears = gamma_generators(N_out)
        base = None
        for _ in range(8):
            w1 = random_word(rng, 6, rng.randrange(4, 7))
            w2 = random_word(rng, 6, rng.randrange(4, 7))
            if w1 == w2:
                continue
            pair = [evaluate_word(w1, shears), evaluate_word(w2, shears)]
            try:
                if freeness_bfs(pair[0], pair[1], 10):
                    base = pair
                    break
            except FreenessCapExceeded:
                continue
        if base is None:
            raise ConstructionError("freeness check failed after the retry cap")
        # The pair's entries start large, so the scramble runs shallow
        # with a wide budget instead of the preset's.
        depth = min(preset.depth, 4)
        widened = ScramblePreset(depth=depth, entry_budget=60)
        published, log = _scramble_base(base, widened, rng, extra_headroom=12)
        K_gens, k_order = (), None
        params = {"shear_words": [list(w1), list(w2)]}
        certificates = {"g1": w1, "g2": w2}
    else:
        raise ValueError(f"unknown variant {variant!r}")

    family = f"IV_{variant}"
    instance = Instance(
        id=f"iv-{variant}-{seed:08x}",
        family=family,
        question_kind="exact_index_or_unknown",
        generators=tuple(published),
        answer_grammar={"kind": "exact_index_or_unknown",
                        "abstain_token": "infinite_or_unknown"},
    )
    secret = TrapdoorSecret(
        family=family, N=N_out, K_gens=tuple(K_gens), p_star=None,
        planted_form=None, scramble_log=log, word_certificates=certificates,
        seed=seed, base_gens=tuple(base), k_order=k_order, params=params,
    )
    return instance, secret


SL2_CATALOG = (("S2_01", 3), ("S2_02", 2), ("S2_03", 5), ("S2_04", 7), ("S2_05", 11))


def build_family5(seed: int = 0, scramble="none"):
    """The fixed 2x2 catalog: one Sanov pair and four higher-level pairs."""
    rng = random.Random(seed)
    preset = _resolve_scramble(scramble)
    out = []
    for cid, level in SL2_CATALOG:
        base = [BigMatrix(((1, level), (0, 1))), BigMatrix(((1, 0), (level, 1)))]
        published, log = _scramble_base(base, preset, rng)
        instance = Instance(
            id=cid,
            family="V",
            question_kind="exact_index_or_unknown",
            generators=tuple(published),
            answer_grammar={"kind": "exact_index_or_unknown",
                            "abstain_token": "infinite_or_unknown"},
        )
        secret = TrapdoorSecret(
            family="V", N=level, K_gens=(), p_star=None, planted_form=None,
            scramble_log=log, word_certificates={}, seed=seed,
            base_gens=tuple(base), k_order=None,
            params={"catalog_id": cid},
        )
        out.append((instance, secret))
    return out


# ---------------------------------------------------------------------------
# freeness BFS
# ---------------------------------------------------------------------------

_FP_MOD = (1 << 61) - 1


def _fp_flat(mat: BigMatrix):
    return tuple(e % _FP_MOD for row in mat.rows for e in row)


def _fp_mul(a, b, n):
    q = _FP_MOD
    if n == 3:
        a0, a1, a2, a3, a4, a5, a6, a7, a8 = a
        b0, b1, b2, b3, b4, b5, b6, b7, b8 = b
        return ((a0 * b0 + a1 * b3 + a2 * b6) % q, (a0 * b1 + a1 * b4 + a2 * b7) % q,
                (a0 * b2 + a1 * b5 + a2 * b8) % q, (a3 * b0 + a4 * b3 + a5 * b6) % q,
                (a3 * b1 + a4 * b4 + a5 * b7) % q, (a3 * b2 + a4 * b5 + a5 * b8) % q,
                (a6 * b0 + a7 * b3 + a8 * b6) % q, (a6 * b1 + a7 * b4 + a8 * b7) % q,
                (a6 * b2 + a7 * b5 + a8 * b8) % q)
    a0, a1, a2, a3 = a
    b0, b1, b2, b3 = b
    return ((a0 * b0 + a1 * b2) % q, (a0 * b1 + a1 * b3) % q,
            (a2 * b0 + a3 * b2) % q, (a2 * b1 + a3 * b3) % q)


def freeness_bfs(g1: BigMatrix, g2: BigMatrix, L: int, node_cap: int = 500_000) -> bool:
    """True iff all reduced words of length <= L in g1, g2 are distinct.

    Words are enumerated as a non-backtracking BFS tree.  Matrices are
    compared through fingerprints mod a 61-bit prime; fingerprint hits
    are re-checked exactly by rebuilding the two words from their parent
    chains, so a hash collision can never produce a wrong verdict.
    Exceeding node_cap raises FreenessCapExceeded rather than returning
    a boolean, because out-of-memory is not evidence either way.
    """
    if L < 1:
        raise ValueError("depth must be >= 1")
    if g1.dim != g2.dim:
        raise ValueError("dimension mismatch")
    n = g1.dim
    letters = (1, -1, 2, -2)
    mats = {1: g1, -1: g1.inv(), 2: g2, -2: g2.inv()}
    fps = {letter: _fp_flat(mats[letter]) for letter in letters}

    # nodes: (fingerprint, parent index, letter); node 0 is the empty word
    ident_fp = _fp_flat(BigMatrix.identity(n))
    nodes = [(ident_fp, -1, 0)]
    buckets = {ident_fp: [0]}
    frontier = [0]

    def exact_word(idx):
        path = []
        while idx > 0:
            path.append(nodes[idx][2])
            idx = nodes[idx][1]
        out = BigMatrix.identity(n)
        for letter in reversed(path):
            out = out * mats[letter]
        return out

    for _ in range(L):
        nxt = []
        for idx in frontier:
            fp, _, last = nodes[idx]
            for letter in letters:
                if last != 0 and letter == -last:
                    continue
                if len(nodes) >= node_cap:
                    raise FreenessCapExceeded(
                        f"node cap {node_cap} reached before depth {L}")
                new_fp = _fp_mul(fp, fps[letter], n)
                new_idx = len(nodes)
                nodes.append((new_fp, idx, letter))
                hits = buckets.get(new_fp)
                if hits is not None:
                    candidate = exact_word(new_idx)
                    for other in hits:
                        if exact_word(other).rows == candidate.rows:
                            return False
                    hits.append(new_idx)
                else:
                    buckets[new_fp] = [new_idx]
                nxt.append(new_idx)
        frontier = nxt
    return True
