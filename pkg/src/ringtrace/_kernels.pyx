# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``ringtrace._fallback`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, uint8_t

cnp.import_array()

cdef uint64_t SIZE_SALT = 0x5BD1E9955BD1E995ULL


cdef inline uint64_t mix64(uint64_t x) nogil:
    cdef uint64_t z = x + 0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def leave_one_out_hashes(const int64_t[::1] ring_offsets, const int64_t[::1] ring_members):
    cdef Py_ssize_t n_rings = ring_offsets.shape[0] - 1
    out_arr = np.empty(ring_members.shape[0], dtype=np.uint64)
    cdef uint64_t[::1] out = out_arr
    cdef Py_ssize_t r, s, lo, hi
    cdef uint64_t total, salt
    with nogil:
        for r in range(n_rings):
            lo = ring_offsets[r]
            hi = ring_offsets[r + 1]
            total = 0
            for s in range(lo, hi):
                out[s] = mix64(<uint64_t>ring_members[s])
                total += out[s]
            salt = mix64(<uint64_t>(hi - lo) ^ SIZE_SALT)
            for s in range(lo, hi):
                out[s] = mix64((total - out[s]) ^ salt)
    return out_arr


def unique_age_slots(const int64_t[::1] ring_offsets, const int64_t[::1] ring_members,
                     const int64_t[::1] ring_height, const int64_t[::1] out_height,
                     int64_t target):
    cdef Py_ssize_t n_rings = ring_offsets.shape[0] - 1
    out_arr = np.full(n_rings, -1, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    cdef Py_ssize_t r, s
    cdef int64_t found, spend
    with nogil:
        for r in range(n_rings):
            spend = ring_height[r]
            found = -1
            for s in range(ring_offsets[r], ring_offsets[r + 1]):
                if spend - out_height[ring_members[s]] == target:
                    if found >= 0:
                        found = -1
                        break
                    found = s
            out[r] = found
    return out_arr


def reaction_fixpoint(const int64_t[::1] ring_offsets, const int64_t[::1] ring_members,
                      const int64_t[::1] ref_offsets, const int64_t[::1] ref_rings,
                      decoy, true_spend, shuffle_seed=None):
    cdef Py_ssize_t n_rings = ring_offsets.shape[0] - 1
    cdef Py_ssize_t n_out = ref_offsets.shape[0] - 1
    cdef Py_ssize_t n_slots = ring_members.shape[0]
    dec_arr = np.ascontiguousarray(decoy, dtype=np.uint8)
    ts_arr = np.array(true_spend, dtype=np.uint8, copy=True, order="C")
    contra_arr = np.zeros(n_rings, dtype=np.uint8)
    ts_out_arr = np.zeros(n_out, dtype=np.int64)
    ts_ring_arr = np.zeros(n_rings, dtype=np.int64)
    mark_arr = np.zeros(n_rings, dtype=np.uint8)
    frontier_arr = np.arange(n_rings, dtype=np.int64)
    next_arr = np.empty(n_rings, dtype=np.int64)
    promo_ring_arr = np.empty(n_rings, dtype=np.int64)
    promo_slot_arr = np.empty(n_rings, dtype=np.int64)
    cdef const uint8_t[::1] dec = dec_arr
    cdef uint8_t[::1] ts = ts_arr
    cdef uint8_t[::1] contra = contra_arr
    cdef int64_t[::1] ts_out = ts_out_arr
    cdef int64_t[::1] ts_ring = ts_ring_arr
    cdef uint8_t[::1] mark = mark_arr
    cdef int64_t[::1] frontier = frontier_arr
    cdef int64_t[::1] nxt = next_arr
    cdef int64_t[::1] promo_ring = promo_ring_arr
    cdef int64_t[::1] promo_slot = promo_slot_arr
    cdef int64_t[::1] tmp
    cdef Py_ssize_t n_front = n_rings, n_next, n_promo, i, j, r, s, last, live, y
    cdef int64_t own

    if dec_arr.shape[0] != n_slots or ts_arr.shape[0] != n_slots:
        raise ValueError("slot flag arrays must match ring_members")
    if shuffle_seed is not None:
        rng = np.random.default_rng(shuffle_seed)

    with nogil:
        for r in range(n_rings):
            for s in range(ring_offsets[r], ring_offsets[r + 1]):
                if ts[s]:
                    ts_out[ring_members[s]] += 1
                    ts_ring[r] += 1

    while n_front > 0:
        if shuffle_seed is not None:
            rng.shuffle(frontier_arr[:n_front])
        with nogil:
            n_promo = 0
            for i in range(n_front):
                r = frontier[i]
                live = 0
                last = -1
                for s in range(ring_offsets[r], ring_offsets[r + 1]):
                    own = ts[s]
                    if dec[s] or ts_out[ring_members[s]] - own > 0 or ts_ring[r] - own > 0:
                        continue
                    live += 1
                    last = s
                if live == 0:
                    contra[r] = 1
                elif live == 1 and not ts[last]:
                    promo_ring[n_promo] = r
                    promo_slot[n_promo] = last
                    n_promo += 1
            n_next = 0
            for i in range(n_promo):
                r = promo_ring[i]
                s = promo_slot[i]
                y = ring_members[s]
                ts[s] = 1
                ts_out[y] += 1
                ts_ring[r] += 1
                if not mark[r]:
                    mark[r] = 1
                    nxt[n_next] = r
                    n_next += 1
                for j in range(ref_offsets[y], ref_offsets[y + 1]):
                    if not mark[ref_rings[j]]:
                        mark[ref_rings[j]] = 1
                        nxt[n_next] = ref_rings[j]
                        n_next += 1
            for i in range(n_next):
                mark[nxt[i]] = 0
        tmp = frontier
        frontier = nxt
        nxt = tmp
        frontier_arr, next_arr = next_arr, frontier_arr
        n_front = n_next
    return ts_arr.astype(bool), contra_arr.astype(bool)
