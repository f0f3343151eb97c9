# cython: language_level=3
# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled bitmask kernels for graph robustness certification.

A digraph on n <= 32 nodes is a sequence of in-neighbor masks: bit l of
``masks[i]`` is set iff node l+1 can transmit to node i+1 (0-indexed bits
for 1-indexed nodes). Node sets are masks in the same convention.

Must stay behaviourally identical to ``robust_py``; the pure-Python module
is the import-time fallback and the two are cross-checked in the tests.
"""

from libc.stdint cimport uint32_t, uint64_t

cdef extern from *:
    """
    #if defined(__GNUC__) || defined(__clang__)
    #define RO_POPCOUNT(x) __builtin_popcount(x)
    #else
    static int RO_POPCOUNT(unsigned int x) {
        int c = 0;
        while (x) { c += (int)(x & 1u); x >>= 1; }
        return c;
    }
    #endif
    """
    int RO_POPCOUNT(unsigned int x) nogil


cdef bint _peel(const uint32_t* masks, int n, uint32_t s_mask, int r) nogil:
    # Iteratively absorb every node with >= r in-neighbors already absorbed.
    cdef uint32_t full = (1u << n) - 1u
    cdef uint32_t reached = s_mask
    cdef bint changed = True
    cdef int i
    while changed:
        changed = False
        for i in range(n):
            if not (reached >> i) & 1u and RO_POPCOUNT(masks[i] & reached) >= r:
                reached |= 1u << i
                changed = True
    return reached == full


cdef bint _brute(const uint32_t* masks, int n, uint32_t s_mask, int r) nogil:
    # Direct definition: every nonempty C subset of V\S must contain a node
    # with >= r in-neighbors outside C.
    cdef uint32_t full = (1u << n) - 1u
    cdef uint32_t rest = full & ~s_mask
    cdef uint32_t c = rest
    cdef uint32_t outside
    cdef bint ok
    cdef int i
    while c != 0:
        outside = full & ~c
        ok = False
        for i in range(n):
            if (c >> i) & 1u and RO_POPCOUNT(masks[i] & outside) >= r:
                ok = True
                break
        if not ok:
            return False
        c = (c - 1u) & rest
    return True


cdef inline uint32_t _expand_skip(uint32_t v, int i) nogil:
    # Spread an (n-1)-bit value over bit positions 0..n-1, skipping bit i.
    return (v & ((1u << i) - 1u)) | ((v >> i) << (i + 1))


def peel_robust(masks, unsigned int s_mask, int r):
    """Peeling-closure check of strong r-robustness w.r.t. the source mask."""
    cdef int n = len(masks)
    cdef uint32_t m[32]
    cdef int i
    if n < 1 or n > 32:
        raise ValueError("node count must be in 1..32")
    for i in range(n):
        m[i] = masks[i]
    return bool(_peel(m, n, s_mask, r))


def brute_robust(masks, unsigned int s_mask, int r):
    """Exhaustive-subset check of strong r-robustness w.r.t. the source mask."""
    cdef int n = len(masks)
    cdef uint32_t m[32]
    cdef int i
    if n < 1 or n > 32:
        raise ValueError("node count must be in 1..32")
    for i in range(n):
        m[i] = masks[i]
    return bool(_brute(m, n, s_mask, r))


def exhaustive_agreement(int n, r_values=(1, 2, 3), int max_source_size=3):
    """Compare peeling vs brute force over all digraphs on n nodes.

    Every in-neighbor assignment (2^(n(n-1)) digraphs), every nonempty
    source set of size <= max_source_size, every r in r_values. Returns
    (checks, disagreements).
    """
    if n < 1 or n > 5:
        raise ValueError("exhaustive sweep supported for n in 1..5 only")
    cdef uint64_t total = 1
    total <<= n * (n - 1)
    cdef uint32_t full = (1u << n) - 1u
    cdef uint32_t sub_mask = (1u << (n - 1)) - 1u if n > 1 else 0u

    cdef uint32_t sources[32]
    cdef int n_sources = 0
    cdef uint32_t s
    for s in range(1, full + 1):
        if RO_POPCOUNT(s) <= max_source_size:
            sources[n_sources] = s
            n_sources += 1

    cdef int rs[8]
    cdef int n_r = len(r_values)
    cdef int ri
    if n_r > 8:
        raise ValueError("at most 8 r values")
    for ri in range(n_r):
        rs[ri] = r_values[ri]

    cdef uint32_t masks[32]
    cdef uint64_t g, checks = 0, bad = 0
    cdef int i, si
    cdef bint a, b
    with nogil:
        for g in range(total):
            for i in range(n):
                masks[i] = _expand_skip(<uint32_t> ((g >> (i * (n - 1))) & sub_mask), i)
            for si in range(n_sources):
                for ri in range(n_r):
                    a = _peel(masks, n, sources[si], rs[ri])
                    b = _brute(masks, n, sources[si], rs[ri])
                    checks += 1
                    if a != b:
                        bad += 1
    return int(checks), int(bad)
