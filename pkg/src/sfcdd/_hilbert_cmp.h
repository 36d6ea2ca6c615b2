// Early-exit Hilbert comparison and introsort over grid indices.
//
// Coordinates are left-aligned on the isotropic resolution `bits`. The
// comparison walks the 2^d-tree from the coarsest bit downward, applying
// the transpose-to-axes rotation of one level at a time, and stops at the
// first level where the two orthant digits differ.
#ifndef SFCDD_HILBERT_CMP_H
#define SFCDD_HILBERT_CMP_H

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <utility>
#include <vector>

namespace sfcdd {

// Returns -1, 0 or 1. `wa` and `wb` are scratch buffers of length d.
inline int hilbert_cmp(const uint64_t* a, const uint64_t* b, int d, int bits,
                       uint64_t* wa, uint64_t* wb) {
    std::memcpy(wa, a, sizeof(uint64_t) * d);
    std::memcpy(wb, b, sizeof(uint64_t) * d);
    unsigned ta = 0, tb = 0;
    for (int lvl = bits - 1; lvl >= 0; --lvl) {
        const uint64_t Q = uint64_t(1) << lvl;
        unsigned ga = 0, gb = 0;
        for (int i = 0; i < d; ++i) {
            ga ^= unsigned((wa[i] >> lvl) & 1u);
            gb ^= unsigned((wb[i] >> lvl) & 1u);
            unsigned da = ga ^ ta, db = gb ^ tb;
            if (da != db) return da < db ? -1 : 1;
        }
        if (lvl == 0) break;
        ta ^= ga;
        tb ^= gb;
        const uint64_t P = Q - 1;
        for (int i = 0; i < d; ++i) {
            if (wa[i] & Q) {
                wa[0] ^= P;
            } else {
                uint64_t t = (wa[0] ^ wa[i]) & P;
                wa[0] ^= t;
                wa[i] ^= t;
            }
            if (wb[i] & Q) {
                wb[0] ^= P;
            } else {
                uint64_t t = (wb[0] ^ wb[i]) & P;
                wb[0] ^= t;
                wb[i] ^= t;
            }
        }
    }
    return 0;
}

struct HilbertLess {
    const uint64_t* coords;
    int d;
    int bits;
    mutable std::vector<uint64_t> wa, wb;

    HilbertLess(const uint64_t* c, int d_, int bits_)
        : coords(c), d(d_), bits(bits_), wa(d_), wb(d_) {}
    HilbertLess(const HilbertLess& o)
        : coords(o.coords), d(o.d), bits(o.bits), wa(o.d), wb(o.d) {}

    bool operator()(int64_t i, int64_t j) const {
        return hilbert_cmp(coords + i * d, coords + j * d, d, bits,
                           wa.data(), wb.data()) < 0;
    }
};

// Packed Hilbert key for d * bits <= 64. Same walk as hilbert_cmp, but the
// orthant digits of every level are appended instead of compared.
inline uint64_t hilbert_key64(const uint64_t* a, int d, int bits, uint64_t* w) {
    std::memcpy(w, a, sizeof(uint64_t) * d);
    uint64_t key = 0;
    unsigned t = 0;
    for (int lvl = bits - 1; lvl >= 0; --lvl) {
        const uint64_t Q = uint64_t(1) << lvl;
        unsigned g = 0;
        for (int i = 0; i < d; ++i) {
            g ^= unsigned((w[i] >> lvl) & 1u);
            key = (key << 1) | uint64_t(g ^ t);
        }
        if (lvl == 0) break;
        t ^= g;
        const uint64_t P = Q - 1;
        for (int i = 0; i < d; ++i) {
            if (w[i] & Q) {
                w[0] ^= P;
            } else {
                uint64_t s = (w[0] ^ w[i]) & P;
                w[0] ^= s;
                w[i] ^= s;
            }
        }
    }
    return key;
}

// Short keys are packed once per point and sorted as (key, index) pairs.
// Longer keys fall back to std::sort with the early-exit comparison; both
// are O(n log n).
inline void hilbert_argsort(int64_t* perm, int64_t n, const uint64_t* coords,
                            int d, int bits) {
    if (int64_t(d) * bits <= 64) {
        std::vector<uint64_t> w(d);
        std::vector<std::pair<uint64_t, int64_t>> kv(n);
        for (int64_t i = 0; i < n; ++i)
            kv[i] = {hilbert_key64(coords + i * d, d, bits, w.data()), perm[i]};
        std::sort(kv.begin(), kv.end());
        for (int64_t i = 0; i < n; ++i) perm[i] = kv[i].second;
        return;
    }
    std::sort(perm, perm + n, HilbertLess(coords, d, bits));
}

// Comparison sort regardless of key width, for testing the comparison path.
inline void hilbert_argsort_cmp(int64_t* perm, int64_t n, const uint64_t* coords,
                                int d, int bits) {
    std::sort(perm, perm + n, HilbertLess(coords, d, bits));
}

}  // namespace sfcdd

#endif
