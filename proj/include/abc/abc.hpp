#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "abc/params.hpp"
#include "abc/symbolic.hpp"

namespace abc {

struct Cell {
    int64_t col = 0;
    int64_t row = 0;
    bool operator==(const Cell& o) const { return col == o.col && row == o.row; }
};

// Grid of cols = k*q columns and s rows; atom (i,j) = [i/(kq),(i+1)/(kq)) x [j/s,(j+1)/s).
struct Grid {
    int64_t k = 1, q = 1, s = 1;
    int64_t cols() const { return k * q; }
    int64_t atoms() const { return k * q * s; }
};

// Permutation of grid atoms commuting with the 1/q rotation and preserving each
// width-1/q column block. Stored by its action on the first block.
class GridPermutation {
public:
    GridPermutation() = default;
    static GridPermutation identity(const Grid& g);
    // fundamental[c + k r] = c' + k r' for c, c' < k
    static GridPermutation from_fundamental(const Grid& g, std::vector<int32_t> fundamental);
    // full[col + cols*row] = col' + cols*row'; throws unless equivariant and untwisted
    static GridPermutation from_full(const Grid& g, const std::vector<int64_t>& full);

    const Grid& grid() const { return g_; }
    const std::vector<int32_t>& fundamental() const { return f_; }
    Cell apply(Cell c) const;
    Cell apply_inverse(Cell c) const;
    GridPermutation inverse() const;
    GridPermutation then(const GridPermutation& next) const;   // x -> next(this(x))
    std::vector<int64_t> to_full() const;
    bool is_identity() const;
    bool operator==(const GridPermutation& o) const;

private:
    Grid g_;
    std::vector<int32_t> f_, inv_;
};

// Lemma "generating": cells of column t, row s land in band tuples[s][t] of the coarse grid.
GridPermutation h_from_words(const std::vector<std::vector<int>>& tuples, int64_t k, int64_t q, int64_t s_prev);

struct RequirementsReport {
    bool r1 = true, r2 = true, r3 = true;
    std::vector<std::string> violations;
    bool ok() const { return r1 && r2 && r3; }
};
RequirementsReport requirements_check(const std::vector<StageParams>& params,
                                      const std::vector<std::vector<std::vector<int>>>& prescriptions);

struct AbcStage {
    StageParams params;
    GridPermutation h;                // h_n on grid (k_{n-1} q_{n-1}) x s_n; identity 1 x s_0 at n = 0
    std::vector<Word> tower_words;    // empty when not materialized
    bool materialized = false;
};

// H_n = h_0 o ... o h_n acting on the stage-n grid q_n x s_n.
Cell H_apply(const std::vector<AbcStage>& st, int n, Cell c);
Cell H_apply_inverse(const std::vector<AbcStage>& st, int n, Cell c);
// T_n = H_n R^{alpha_n} H_n^{-1}
Cell T_apply(const std::vector<AbcStage>& st, int n, Cell c);

class PeriodicProcess {
public:
    PeriodicProcess(int64_t cols, int64_t rows, std::vector<int64_t> next, std::vector<int64_t> bases);
    int64_t cols() const { return cols_; }
    int64_t rows() const { return rows_; }
    int64_t size() const { return cols_ * rows_; }
    int64_t height() const { return height_; }
    const std::vector<int64_t>& next() const { return next_; }
    const std::vector<int64_t>& bases() const { return bases_; }
    int64_t tower_of(int64_t atom) const { return tower_[atom]; }
    int64_t level_of(int64_t atom) const { return level_[atom]; }
    int64_t atom_at(int64_t tower, int64_t level) const { return by_level_[tower * height_ + level]; }

private:
    int64_t cols_, rows_, height_ = 0;
    std::vector<int64_t> next_, bases_, tower_, level_, by_level_;
};

PeriodicProcess stage_process(const std::vector<AbcStage>& st, int n);

struct EpsApproxResult {
    bool ok = false;
    BigRatio mass;          // measure of D
    int64_t d_atoms = 0;
    bool item1 = true, item2 = true, item3 = true;
};
EpsApproxResult epsilon_approximation_check(const PeriodicProcess& coarse, const PeriodicProcess& fine, double eps);

// Names of the stage-n towers read off the dynamics of T_n through the stage-(n-1) towers.
std::vector<Word> tower_names(const std::vector<AbcStage>& st, int n);

std::vector<AbcStage> drive_from_construction_sequence(const ConstructionSequence& seq, int64_t cap = 2000000);

struct RoundTripMismatch {
    int stage = 0;
    size_t word = 0;
    size_t position = 0;
};
std::optional<RoundTripMismatch> round_trip_check(const std::vector<AbcStage>& st, const ConstructionSequence& seq);

nlohmann::json to_json(const GridPermutation& h);
GridPermutation grid_permutation_from_json(const nlohmann::json& j);

}  // namespace abc
