"""Words in a finitely generated group, stored as tuples of signed letters.

Letter k > 0 means the k-th generator (1-based), -k its inverse, so
inversion is a sign flip and free reduction is a single stack pass.
Evaluation works over any matrix type with __mul__ and inv().
"""

from __future__ import annotations


def free_reduce(word) -> tuple:
    out = []
    for letter in word:
        letter = int(letter)
        if letter == 0:
            raise ValueError("letter 0 is not a generator")
        if out and out[-1] == -letter:
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


def invert_word(word) -> tuple:
    return tuple(-int(letter) for letter in reversed(word))


def concat(*parts) -> tuple:
    flat = []
    for w in parts:
        flat.extend(w)
    return free_reduce(flat)


def syllables(word) -> tuple:
    """Run-length encoding: tuple of (generator index >= 1, signed exponent)."""
    out = []
    for letter in word:
        g = abs(letter)
        e = 1 if letter > 0 else -1
        if out and out[-1][0] == g and (out[-1][1] > 0) == (e > 0):
            out[-1] = (g, out[-1][1] + e)
        else:
            out.append((g, e))
    return tuple(out)


def evaluate_word(word, gens):
    """Product of gens[|letter|-1]^sign over the word; gens must be nonempty."""
    if not gens:
        raise ValueError("empty generator list")
    inverses = {}
    out = None
    for letter in word:
        idx = abs(letter) - 1
        if idx >= len(gens):
            raise ValueError(f"letter {letter} outside generator alphabet")
        if letter > 0:
            factor = gens[idx]
        else:
            if idx not in inverses:
                inverses[idx] = gens[idx].inv()
            factor = inverses[idx]
        out = factor if out is None else out * factor
    if out is None:
        first = gens[0]
        return type(first).identity(first.dim, first.modulus) if hasattr(first, "modulus") \
            else type(first).identity(first.dim)
    return out


def random_word(rng, n_letters: int, length: int) -> tuple:
    """Freely reduced random word, non-backtracking so the length is exact."""
    if n_letters < 1 or length < 0:
        raise ValueError("need at least one letter and nonnegative length")
    word = []
    for _ in range(length):
        choices = [s * k for k in range(1, n_letters + 1) for s in (1, -1)]
        if word:
            choices = [c for c in choices if c != -word[-1]]
        word.append(rng.choice(choices))
    return tuple(word)
