#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "saht/envs/environment.hpp"

namespace saht {

/// Grid cell as (row, col).
struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

inline int manhattan(const Cell& a, const Cell& b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

struct ForagingLayout {
  int grid = 5;
  std::vector<int> player_levels;
  std::vector<Cell> player_start;
  std::vector<int> food_levels;
  std::vector<Cell> food_cells;
};

struct ForagingParams {
  int grid = 5;
  std::size_t players = 2;
  std::size_t foods = 2;
  std::size_t length = 25;
  std::uint64_t layout_seed = 0;
};

/// Random layout: player levels in {1,2}, food levels in {1,2,3} capped at the
/// team's total level so every food is collectable, all entities on distinct cells.
inline ForagingLayout random_foraging_layout(const ForagingParams& p) {
  if (p.grid < 2 || p.players < 1 || p.foods < 1)
    throw ConfigError("level_based_foraging: grid must be >= 2 with at least one player and one food");
  const std::size_t cells = static_cast<std::size_t>(p.grid * p.grid);
  if (p.players + p.foods > cells) throw ConfigError("level_based_foraging: grid too small for all entities");
  Rng rng(derive_seed(p.layout_seed, {0x1bf}));
  ForagingLayout lay;
  lay.grid = p.grid;
  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i + 1 < cells; ++i) std::swap(order[i], order[i + rng.below(cells - i)]);
  auto cell_of = [&](std::size_t idx) { return Cell{static_cast<int>(idx) / p.grid, static_cast<int>(idx) % p.grid}; };
  int total_level = 0;
  for (std::size_t i = 0; i < p.players; ++i) {
    lay.player_levels.push_back(1 + static_cast<int>(rng.below(2)));
    total_level += lay.player_levels.back();
    lay.player_start.push_back(cell_of(order[i]));
  }
  for (std::size_t j = 0; j < p.foods; ++j) {
    lay.food_levels.push_back(std::min(1 + static_cast<int>(rng.below(3)), total_level));
    lay.food_cells.push_back(cell_of(order[p.players + j]));
  }
  return lay;
}

/// Level-based foraging on a fixed layout. Actions: 0 up, 1 down, 2 left,
/// 3 right, 4 load. Players block each other and uncollected food; two players
/// aiming at the same cell both stay. A load succeeds on a food when the loading
/// players adjacent to it have total level >= the food level, paying the food
/// level. Each loading player tries its lowest-indexed adjacent food.
///
/// State layout: mask * cells^n + sum_i pos_i * cells^i, where mask has bit j
/// set while food j is still on the grid.
class LevelBasedForaging final : public Environment {
 public:
  static constexpr ActionId kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kLoad = 4;

  struct State {
    std::vector<Cell> players;
    unsigned mask = 0;
    bool operator==(const State&) const = default;
  };

  LevelBasedForaging(ForagingLayout layout, std::size_t length) : lay_(std::move(layout)) {
    const std::size_t n = lay_.player_levels.size();
    const std::size_t m = lay_.food_levels.size();
    if (n == 0 || m == 0 || lay_.player_start.size() != n || lay_.food_cells.size() != m)
      throw ConfigError("level_based_foraging: inconsistent layout");
    if (m > 16) throw ConfigError("level_based_foraging: at most 16 foods");
    if (length == 0) throw ConfigError("level_based_foraging: episode length must be positive");
    cells_ = static_cast<std::size_t>(lay_.grid * lay_.grid);
    std::vector<Cell> all = lay_.player_start;
    all.insert(all.end(), lay_.food_cells.begin(), lay_.food_cells.end());
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (!in_grid(all[i])) throw ConfigError("level_based_foraging: entity outside grid");
      for (std::size_t j = 0; j < i; ++j)
        if (all[i] == all[j]) throw ConfigError("level_based_foraging: overlapping entities");
    }
    for (int lvl : lay_.player_levels)
      if (lvl < 1) throw ConfigError("level_based_foraging: player levels must be positive");
    double rmax = 0.0;
    for (int lvl : lay_.food_levels) {
      if (lvl < 1) throw ConfigError("level_based_foraging: food levels must be positive");
      rmax += lvl;
    }
    sig_ = {"lbf", (std::size_t{1} << m) * int_pow(cells_, n), 5, n - 1, length, rmax};
  }

  const EnvSignature& signature() const override { return sig_; }
  const ForagingLayout& layout() const { return lay_; }

  bool in_grid(const Cell& c) const { return c.row >= 0 && c.col >= 0 && c.row < lay_.grid && c.col < lay_.grid; }

  StateId encode(const State& st) const {
    StateId code = st.mask;
    for (std::size_t i = st.players.size(); i-- > 0;)
      code = code * cells_ + static_cast<std::size_t>(st.players[i].row * lay_.grid + st.players[i].col);
    return code;
  }

  State decode(StateId s) const {
    if (s >= sig_.num_states) throw IndexError("lbf: state out of range");
    State st;
    for (std::size_t i = 0; i < lay_.player_levels.size(); ++i) {
      const int idx = static_cast<int>(s % cells_);
      st.players.push_back({idx / lay_.grid, idx % lay_.grid});
      s /= cells_;
    }
    st.mask = static_cast<unsigned>(s);
    return st;
  }

  StateId initial_state() const {
    return encode({lay_.player_start, (1u << lay_.food_levels.size()) - 1u});
  }

  StateId reset(Rng&) const override { return initial_state(); }

  bool food_at(const State& st, const Cell& c) const {
    for (std::size_t j = 0; j < lay_.food_cells.size(); ++j)
      if ((st.mask >> j & 1u) && lay_.food_cells[j] == c) return true;
    return false;
  }

  Transition step(StateId s, const ActionProfile& a, Rng&) const override {
    check_profile(s, a);
    State st = decode(s);
    const std::size_t n = st.players.size();
    auto action_of = [&](std::size_t i) { return i == 0 ? a.ego : a.teammates[i - 1]; };

    // Loading.
    double reward = 0.0;
    std::vector<int> load_sum(lay_.food_levels.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (action_of(i) != kLoad) continue;
      for (std::size_t j = 0; j < lay_.food_cells.size(); ++j) {
        if ((st.mask >> j & 1u) && manhattan(st.players[i], lay_.food_cells[j]) == 1) {
          load_sum[j] += lay_.player_levels[i];
          break;
        }
      }
    }
    unsigned mask = st.mask;
    for (std::size_t j = 0; j < load_sum.size(); ++j) {
      if (load_sum[j] > 0 && load_sum[j] >= lay_.food_levels[j]) {
        reward += lay_.food_levels[j];
        mask &= ~(1u << j);
      }
    }

    // Movement against the pre-step occupancy.
    std::vector<Cell> target = st.players;
    for (std::size_t i = 0; i < n; ++i) {
      Cell c = st.players[i];
      switch (action_of(i)) {
        case kUp: --c.row; break;
        case kDown: ++c.row; break;
        case kLeft: --c.col; break;
        case kRight: ++c.col; break;
        default: break;
      }
      if (in_grid(c) && !food_at(st, c)) target[i] = c;
    }
    std::vector<Cell> next = st.players;
    for (std::size_t i = 0; i < n; ++i) {
      if (target[i] == st.players[i]) continue;
      bool blocked = false;
      for (std::size_t j = 0; j < n && !blocked; ++j)
        if (j != i && (target[i] == st.players[j] || target[i] == target[j])) blocked = true;
      if (!blocked) next[i] = target[i];
    }
    st.players = std::move(next);
    st.mask = mask;
    return {encode(st), reward};
  }

  std::string describe_state(StateId s) const override {
    const State st = decode(s);
    std::string out;
    for (const auto& c : st.players) out += "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
    return out + " mask=" + std::to_string(st.mask);
  }

 private:
  ForagingLayout lay_;
  std::size_t cells_ = 0;
  EnvSignature sig_;
};

inline std::shared_ptr<const LevelBasedForaging> level_based_foraging(const ForagingParams& p) {
  return std::make_shared<const LevelBasedForaging>(random_foraging_layout(p), p.length);
}

inline std::shared_ptr<const LevelBasedForaging> level_based_foraging(ForagingLayout layout, std::size_t length) {
  return std::make_shared<const LevelBasedForaging>(std::move(layout), length);
}

/// The constraint is the per-step reward itself.
inline ConstraintSpec foraging_reward_constraint(const LevelBasedForaging& env, double delta, double threshold) {
  return ConstraintSpec::logged_reward("reward", env.signature().rmax, delta, threshold);
}

}  // namespace saht
