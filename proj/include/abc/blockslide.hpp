#pragma once

#include <cstdint>
#include <vector>

#include "abc/abc.hpp"
#include "abc/params.hpp"

namespace abc {

enum class Axis : uint8_t { H, V };

// 1/N-periodic step function on the uniform grid of K*N intervals of [0,1):
// value values[i mod K] on [i/(KN), (i+1)/(KN)).
struct StepFunction {
    int64_t N = 1;
    int64_t K = 1;
    std::vector<BigRatio> values{BigRatio(0)};

    static StepFunction constant(const BigRatio& v);
    static StepFunction cells(int64_t N, int64_t K, std::vector<BigRatio> values);

    BigRatio operator()(const BigRatio& t) const;
    bool is_zero() const;   // every value is an integer
    StepFunction negated() const;
    std::vector<BigRatio> breakpoints() const;   // one period
    BigRatio total_variation() const;            // sum of |jumps| over one period
};

// H(f): (x1, x2) -> (x1 + f(x2), x2);  V(f): (x1, x2) -> (x1, x2 + f(x1)), mod 1.
struct Slide {
    Axis axis = Axis::H;
    StepFunction f;
};

struct BlockSlideMap {
    std::vector<Slide> steps;   // applied left to right

    BlockSlideMap inverse() const;
    BlockSlideMap then(const BlockSlideMap& next) const;
    // merge consecutive slides on one axis, drop slides that act trivially
    void normalize();
    size_t size() const { return steps.size(); }
};

struct RatPoint {
    BigRatio x1, x2;
};

RatPoint apply(const BlockSlideMap& map, const RatPoint& pt);

// Image of every atom of the grid (cols = k*q, rows = s) under the map, as atom indices
// col + cols*row. Every sample point of an atom (its center, or refine^2 sub-centers) must land
// in one atom with a common translation; otherwise std::domain_error.
// col_limit > 0 keeps only columns [0, col_limit); the flat index then uses col_limit as row stride.
std::vector<int64_t> atom_images(const BlockSlideMap& map, const Grid& g, int refine = 1, int64_t col_limit = 0);

BlockSlideMap column_interchange(int64_t i, int64_t k, int64_t q);
BlockSlideMap double_two_cycle(int64_t k, int64_t q, int64_t s);
// swap atoms (0, s-1) and (i, j) of the first 1/q block, periodically
BlockSlideMap transposition(int64_t i, int64_t j, int64_t k, int64_t q, int64_t s);
// swap any two atoms of the first block, periodically
BlockSlideMap swap_cells(Cell a, Cell b, int64_t k, int64_t q, int64_t s);

BlockSlideMap permutation_to_blockslide(const GridPermutation& perm);

nlohmann::json to_json(const BlockSlideMap& m);
BlockSlideMap blockslide_from_json(const nlohmann::json& j);

}  // namespace abc
