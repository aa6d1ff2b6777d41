#pragma once

#include <algorithm>
#include <array>

#include "saht/envs/environment.hpp"

namespace saht {

struct BlackjackParams {
  std::size_t turns = 10;           // L
  double mismatch_reward = 0.5;     // r
  double dealer_bust_reward = 5.0;  // R
  /// Payout when the team's best hand beats the dealer after the dealer plays.
  /// Ties and losses pay 0.
  double win_reward = 2.5;
};

/// A blackjack hand summarized by its best total and whether an ace counts 11.
struct Hand {
  int total = 0;
  bool soft = false;

  bool operator==(const Hand&) const = default;

  bool bust() const { return total > 21; }

  /// Adds a card value in 1..10 (ace = 1).
  Hand plus(int card) const {
    int hard = soft ? total - 10 : total;
    bool has_ace = soft || card == 1;
    hard += card;
    // A hard hand that already holds an ace counted 1 has hard >= 12 and can never turn soft.
    if (has_ace && hard + 10 <= 21 && (soft || card == 1)) return {hard + 10, true};
    return {hard, false};
  }
};

/// Two-player cooperative blackjack against a dealer on an infinite deck.
///
/// Both players (ego and one teammate) hold a hand; actions are 0 = stick,
/// 1 = hit. Matching hits deal one card to each player, and either player busting ends the
/// episode with reward 0. Matching sticks let the dealer play out to 17 and
/// settle. Mismatched actions skip the turn without drawing and pay r. After
/// the last turn the hands are settled the same way as a matching stick.
/// Terminal outcomes move to an absorbing state that pays nothing.
///
/// State layout: ((turn * 10 + dealer_up - 1) * 28 + ego_code) * 28 + mate_code,
/// with the absorbing state last. Hand codes: hard totals 4..21 map to 0..17,
/// soft totals 12..21 map to 18..27.
class BlackjackCoop final : public Environment {
 public:
  static constexpr ActionId kStick = 0;
  static constexpr ActionId kHit = 1;
  static constexpr std::size_t kHandCodes = 28;
  static constexpr std::size_t kDealerUp = 10;

  struct State {
    Hand ego;
    Hand mate;
    int dealer_up = 1;  // 1 = ace, 10 = any ten-valued card
    std::size_t turn = 0;
    bool operator==(const State&) const = default;
  };

  explicit BlackjackCoop(BlackjackParams params) : params_(params) {
    if (params_.turns < 1) throw ConfigError("blackjack_coop: need at least one turn");
    if (!(params_.mismatch_reward >= 0.0 && params_.dealer_bust_reward >= 0.0 && params_.win_reward >= 0.0))
      throw ConfigError("blackjack_coop: rewards must be nonnegative");
    sig_ = {"blackjack", params_.turns * kDealerUp * kHandCodes * kHandCodes + 1, 2, 1, params_.turns,
            params_.mismatch_reward + std::max(params_.dealer_bust_reward, params_.win_reward)};
  }

  const EnvSignature& signature() const override { return sig_; }
  const BlackjackParams& params() const { return params_; }

  StateId absorbing() const { return sig_.num_states - 1; }

  static std::size_t hand_code(const Hand& h) {
    if (h.soft) {
      if (h.total < 12 || h.total > 21) throw IndexError("blackjack: invalid soft total");
      return 18 + static_cast<std::size_t>(h.total - 12);
    }
    if (h.total < 4 || h.total > 21) throw IndexError("blackjack: invalid hard total");
    return static_cast<std::size_t>(h.total - 4);
  }

  static Hand hand_of(std::size_t code) {
    if (code >= 18) return {static_cast<int>(code - 18) + 12, true};
    return {static_cast<int>(code) + 4, false};
  }

  StateId encode(const State& st) const {
    if (st.turn >= params_.turns || st.dealer_up < 1 || st.dealer_up > 10) throw IndexError("blackjack: bad state");
    return ((st.turn * kDealerUp + static_cast<std::size_t>(st.dealer_up - 1)) * kHandCodes + hand_code(st.ego)) *
               kHandCodes +
           hand_code(st.mate);
  }

  State decode(StateId s) const {
    if (s >= absorbing()) throw IndexError("blackjack: absorbing or out-of-range state has no hands");
    State st;
    st.mate = hand_of(s % kHandCodes);
    s /= kHandCodes;
    st.ego = hand_of(s % kHandCodes);
    s /= kHandCodes;
    st.dealer_up = static_cast<int>(s % kDealerUp) + 1;
    st.turn = s / kDealerUp;
    return st;
  }

  static int draw_card(Rng& rng) { return std::min<int>(static_cast<int>(rng.below(13)) + 1, 10); }

  static Hand opening_hand(Rng& rng) { return Hand{}.plus(draw_card(rng)).plus(draw_card(rng)); }

  StateId reset(Rng& rng) const override {
    State st;
    st.ego = opening_hand(rng);
    st.mate = opening_hand(rng);
    st.dealer_up = draw_card(rng);
    return encode(st);
  }

  /// Dealer completes its hand from the up card and the team is paid.
  double settle(const State& st, Rng& rng) const {
    Hand dealer = Hand{}.plus(st.dealer_up).plus(draw_card(rng));
    while (dealer.total < 17) dealer = dealer.plus(draw_card(rng));
    if (dealer.bust()) return params_.dealer_bust_reward;
    const int team = std::max(st.ego.total, st.mate.total);
    return team > dealer.total ? params_.win_reward : 0.0;
  }

  Transition step(StateId s, const ActionProfile& a, Rng& rng) const override {
    check_profile(s, a);
    if (s == absorbing()) return {s, 0.0};
    State st = decode(s);
    const ActionId mate = a.teammates[0];

    if (a.ego != mate) {
      const double r = params_.mismatch_reward;
      if (st.turn + 1 == params_.turns) return {absorbing(), r + settle(st, rng)};
      ++st.turn;
      return {encode(st), r};
    }
    if (a.ego == kStick) return {absorbing(), settle(st, rng)};

    st.ego = st.ego.plus(draw_card(rng));
    st.mate = st.mate.plus(draw_card(rng));
    if (st.ego.bust() || st.mate.bust()) return {absorbing(), 0.0};
    if (st.turn + 1 == params_.turns) return {absorbing(), settle(st, rng)};
    ++st.turn;
    return {encode(st), 0.0};
  }

  std::string describe_state(StateId s) const override {
    if (s == absorbing()) return "absorbing";
    const State st = decode(s);
    auto hand = [](const Hand& h) { return (h.soft ? "soft" : "hard") + std::to_string(h.total); };
    return "turn=" + std::to_string(st.turn) + " ego=" + hand(st.ego) + " mate=" + hand(st.mate) +
           " dealer=" + std::to_string(st.dealer_up);
  }

 private:
  BlackjackParams params_;
  EnvSignature sig_;
};

inline std::shared_ptr<const BlackjackCoop> blackjack_coop(const BlackjackParams& params) {
  return std::make_shared<const BlackjackCoop>(params);
}

/// 1 when ego and teammate pick the same action, 0 otherwise and in the absorbing state.
inline ConstraintSpec blackjack_agreement(const BlackjackCoop& env, double delta, double threshold) {
  const StateId absorbing = env.absorbing();
  return ConstraintSpec::from_function(
      "agreement",
      [absorbing](StateId s, const ActionProfile& a) {
        return s != absorbing && a.ego == a.teammates[0] ? 1.0 : 0.0;
      },
      1.0, delta, threshold);
}

}  // namespace saht
