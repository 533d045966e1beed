"""Reference implementations the real code is checked against.

Everything here is written the slow, obvious way on purpose: explicit
filters, explicit argmax loops, central finite differences.  The tests
assert the fast implementations agree with these.
"""
import numpy as np

from roommem.memory import MemorySystem, Quadruple, strip_owner


def oracle_retrieve(question_head, episodic_entries, semantic_entries):
    """Filter-then-argmax answer lookup.

    Episodic candidates match the full owner-qualified head; the winner has
    the maximum timestamp, and among equal timestamps the one inserted last.
    Only if no episodic candidate exists, semantic candidates match the bare
    object, winner by maximum strength with the same last-inserted tie rule.
    """
    cands = [e for e in episodic_entries if e.head == question_head]
    if cands:
        best_val = max(e.value for e in cands)
        return [e for e in cands if e.value == best_val][-1]
    _, obj = strip_owner(question_head)
    cands = [e for e in semantic_entries if e.head == obj]
    if not cands:
        return None
    best_val = max(e.value for e in cands)
    return [e for e in cands if e.value == best_val][-1]


def random_memory_state(rng, max_size=64):
    """Random episodic/semantic systems with deliberately heavy value and
    head collisions so tie paths get exercised."""
    humans = [f"H{i}" for i in range(4)]
    objects = [f"obj{i}" for i in range(3)]
    locations = [f"loc{i}" for i in range(5)]
    m_e = MemorySystem("episodic", max_size)
    m_s = MemorySystem("semantic", max_size)
    n_e = int(rng.integers(0, max_size + 1))
    n_s = int(rng.integers(0, max_size + 1))
    for _ in range(n_e):
        head = f"{humans[rng.integers(4)]}'s {objects[rng.integers(3)]}"
        m_e.entries.append(Quadruple(
            head, "AtLocation", locations[rng.integers(5)], int(rng.integers(0, 6))))
    for _ in range(n_s):
        m_s.entries.append(Quadruple(
            objects[rng.integers(3)], "AtLocation",
            locations[rng.integers(5)], int(rng.integers(1, 5))))
    q_head = f"{humans[rng.integers(4)]}'s {objects[rng.integers(3)]}"
    return q_head, m_e, m_s


def fd_gradient(f, x, h=1e-5):
    """Central-difference gradient of scalar f at x, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def max_relative_error(analytic, numeric):
    """max |a - n| / max(1, |n|) over all elements; the denominator floor
    keeps near-zero entries from blowing up the ratio."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.abs(n))
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0
