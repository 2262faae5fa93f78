#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "abc/symbolic.hpp"

namespace abc {

enum class Segment : uint8_t { Begin, Middle, End };
const char* to_string(Segment s);

struct TransectTrace {
    int64_t p = 1, q = 1, k = 1, l = 2;
    int64_t qp = 0, pp = 0;              // q' = klq^2, p' = pqkl + 1
    std::vector<int64_t> positions;      // i_t = t p' mod q'
    std::vector<int64_t> coarse;         // floor(i_t kq / q')
    std::vector<Segment> segments;
    std::vector<int64_t> level;          // place of the step inside w_j (dynamical order), middle steps
};

TransectTrace simulate_transect(int64_t p, int64_t q, int64_t k, int64_t l);

// letters[j] = w_j, each of length q.
Word transect_name(const TransectTrace& trace, const std::vector<Word>& letters);

void write_trace_csv(std::ostream& os, const TransectTrace& trace);

}  // namespace abc
