"""Pure-Python twin of the compiled robustness kernel.

Same bitmask conventions as ``robust_cy``: in-neighbor masks, bit l for
node l+1. Used when the extension is not built (or forced via the
RESILIENT_OBSERVER_PURE_PY environment variable); orders of magnitude
slower on the exhaustive sweep but behaviourally identical.
"""


def peel_robust(masks, s_mask, r):
    """Peeling-closure check of strong r-robustness w.r.t. the source mask."""
    n = len(masks)
    full = (1 << n) - 1
    reached = s_mask
    changed = True
    while changed:
        changed = False
        for i in range(n):
            if not (reached >> i) & 1 and (masks[i] & reached).bit_count() >= r:
                reached |= 1 << i
                changed = True
    return reached == full


def brute_robust(masks, s_mask, r):
    """Exhaustive-subset check of strong r-robustness w.r.t. the source mask."""
    n = len(masks)
    full = (1 << n) - 1
    rest = full & ~s_mask
    c = rest
    while c:
        outside = full & ~c
        for i in range(n):
            if (c >> i) & 1 and (masks[i] & outside).bit_count() >= r:
                break
        else:
            return False
        c = (c - 1) & rest
    return True


def _expand_skip(v, i):
    # Spread an (n-1)-bit value over bit positions 0..n-1, skipping bit i.
    return (v & ((1 << i) - 1)) | ((v >> i) << (i + 1))


def exhaustive_agreement(n, r_values=(1, 2, 3), max_source_size=3):
    """Compare peeling vs brute force over all digraphs on n nodes.

    Returns (checks, disagreements). Practical in pure Python only for
    n <= 4; the compiled kernel handles n = 5 comfortably.
    """
    if n < 1 or n > 5:
        raise ValueError("exhaustive sweep supported for n in 1..5 only")
    full = (1 << n) - 1
    sub_mask = (1 << (n - 1)) - 1
    sources = [s for s in range(1, full + 1) if s.bit_count() <= max_source_size]
    checks = 0
    bad = 0
    masks = [0] * n
    for g in range(1 << (n * (n - 1))):
        for i in range(n):
            masks[i] = _expand_skip((g >> (i * (n - 1))) & sub_mask, i)
        for s in sources:
            for r in r_values:
                checks += 1
                if peel_robust(masks, s, r) != brute_robust(masks, s, r):
                    bad += 1
    return checks, bad
