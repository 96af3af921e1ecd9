#pragma once

// One-dimensional convex piecewise-linear functions.
//
// Two representations are used by the solver:
//   MaxAffine   pointwise maximum of affine pieces (tangent scheme)
//   KnotInterp  chord interpolation on knots with an affine left extension
//               and a constant right tail (interpolation scheme)
//
// Subgradients always return the right derivative, i.e. the largest active
// slope at a kink. Right derivatives are additive and positively homogeneous,
// so probes of sums are sums of probes.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace convexmdp {

struct AffinePiece {
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double z) const { return slope * z + intercept; }
  bool operator==(const AffinePiece&) const = default;
};

/// Anything that can be evaluated and yields a subgradient at a point.
template <class F>
concept ConvexFunction = requires(const F& f, double z) {
  { f(z) } -> std::convertible_to<double>;
  { f.subgradient(z) } -> std::convertible_to<double>;
};

class MaxAffine {
 public:
  /// Pieces closer than this in both slope and intercept are merged.
  static constexpr double kMergeTol = 1e-12;

  /// The zero function.
  MaxAffine() : MaxAffine(std::vector<AffinePiece>{AffinePiece{}}) {}

  explicit MaxAffine(std::vector<AffinePiece> pieces) : pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw std::invalid_argument("MaxAffine needs at least one piece");
    for (const auto& p : pieces_) {
      if (!std::isfinite(p.slope) || !std::isfinite(p.intercept))
        throw std::invalid_argument("MaxAffine piece must be finite");
    }
    build_envelope();
  }

  MaxAffine(std::initializer_list<AffinePiece> pieces)
      : MaxAffine(std::vector<AffinePiece>(pieces)) {}

  /// Pieces as supplied, including dominated ones.
  const std::vector<AffinePiece>& pieces() const { return pieces_; }

  /// Non-dominated pieces ordered by increasing slope.
  const std::vector<AffinePiece>& envelope() const { return hull_; }

  double operator()(double z) const { return hull_[active_index(z)](z); }

  double subgradient(double z) const { return hull_[active_index(z)].slope; }

 private:
  // Index into hull_ of the piece attaining the max at z, preferring the
  // larger slope at breakpoints.
  std::size_t active_index(double z) const {
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), z);
    auto idx = static_cast<std::size_t>(it - breaks_.begin());
    while (idx > 0 && hull_[idx - 1](z) > hull_[idx](z)) --idx;
    while (idx + 1 < hull_.size() && hull_[idx + 1](z) >= hull_[idx](z)) ++idx;
    return idx;
  }

  void build_envelope() {
    std::vector<AffinePiece> sorted = pieces_;
    std::sort(sorted.begin(), sorted.end(), [](const AffinePiece& a, const AffinePiece& b) {
      return a.slope < b.slope || (a.slope == b.slope && a.intercept > b.intercept);
    });
    // Collapse (near-)parallel pieces onto the one with the largest intercept.
    std::vector<AffinePiece> uniq;
    uniq.reserve(sorted.size());
    for (const auto& p : sorted) {
      if (!uniq.empty() && std::abs(p.slope - uniq.back().slope) <= kMergeTol) {
        if (p.intercept > uniq.back().intercept) uniq.back() = p;
        continue;
      }
      uniq.push_back(p);
    }
    // Upper envelope, slopes ascending: the middle piece is useless when the
    // outer two cross no later than the first two.
    hull_.clear();
    for (const auto& p : uniq) {
      while (hull_.size() >= 2) {
        const auto& a = hull_[hull_.size() - 2];
        const auto& b = hull_.back();
        if (cross(a, p) <= cross(a, b)) {
          hull_.pop_back();
        } else {
          break;
        }
      }
      hull_.push_back(p);
    }
    breaks_.resize(hull_.size() - 1);
    for (std::size_t i = 0; i + 1 < hull_.size(); ++i) breaks_[i] = cross(hull_[i], hull_[i + 1]);
  }

  // Abscissa where b overtakes a (b.slope > a.slope).
  static double cross(const AffinePiece& a, const AffinePiece& b) {
    return (a.intercept - b.intercept) / (b.slope - a.slope);
  }

  std::vector<AffinePiece> pieces_;
  std::vector<AffinePiece> hull_;
  std::vector<double> breaks_;
};

/// Drops dominated pieces. Evaluation is unchanged.
inline MaxAffine simplify(const MaxAffine& f) { return MaxAffine(f.envelope()); }

/// Chord interpolation through (knots[i], values[i]); affine to the left of
/// the first knot, constant to the right of the last.
class KnotInterp {
 public:
  /// Relative slack allowed on chord-slope monotonicity.
  static constexpr double kConvexTol = 1e-9;

  KnotInterp(std::vector<double> knots, std::vector<double> values, AffinePiece left_ext,
             double right_ext_value)
      : knots_(std::move(knots)),
        values_(std::move(values)),
        left_ext_(left_ext),
        right_value_(right_ext_value) {
    if (knots_.size() < 2 || knots_.size() != values_.size())
      throw std::invalid_argument("KnotInterp needs at least two knots with matching values");
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
      if (!(knots_[i] < knots_[i + 1]))
        throw std::invalid_argument("KnotInterp knots must be strictly increasing");
    }
    slopes_.resize(knots_.size() - 1);
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i)
      slopes_[i] = (values_[i + 1] - values_[i]) / (knots_[i + 1] - knots_[i]);
    double scale = 1.0;
    for (double d : slopes_) scale = std::max(scale, std::abs(d));
    for (std::size_t i = 0; i + 1 < slopes_.size(); ++i) {
      if (slopes_[i + 1] < slopes_[i] - kConvexTol * scale)
        throw std::invalid_argument("input not convex on grid (chord slope decreases at knot " +
                                    std::to_string(i + 1) + ")");
    }
  }

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& chord_slopes() const { return slopes_; }
  const AffinePiece& left_ext() const { return left_ext_; }
  double right_ext_value() const { return right_value_; }

  double operator()(double z) const {
    if (z <= knots_.front()) return left_ext_(z);
    if (z > knots_.back()) return right_value_;
    const std::size_t i = segment(z);
    return values_[i] + slopes_[i] * (z - knots_[i]);
  }

  double subgradient(double z) const {
    if (z < knots_.front()) return left_ext_.slope;
    if (z >= knots_.back()) return 0.0;
    if (z == knots_.front()) return std::max(left_ext_.slope, slopes_.front());
    // Right derivative: a point on a knot belongs to the chord on its right.
    auto it = std::upper_bound(knots_.begin(), knots_.end(), z);
    return slopes_[static_cast<std::size_t>(it - knots_.begin()) - 1];
  }

 private:
  // i with knots[i] < z <= knots[i+1].
  std::size_t segment(double z) const {
    auto it = std::lower_bound(knots_.begin(), knots_.end(), z);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
  }

  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> slopes_;
  AffinePiece left_ext_;
  double right_value_;
};

/// Either representation; the scheme decides which one a summand holds.
using ConvexPwl = std::variant<MaxAffine, KnotInterp>;

inline double eval(const ConvexPwl& f, double z) {
  return std::visit([z](const auto& g) { return g(z); }, f);
}

inline double subgradient(const ConvexPwl& f, double z) {
  return std::visit([z](const auto& g) { return g.subgradient(z); }, f);
}

template <ConvexFunction F>
double eval(const F& f, double z) {
  return f(z);
}

template <ConvexFunction F>
double subgradient(const F& f, double z) {
  return f.subgradient(z);
}

/// Supporting line of f at z.
template <ConvexFunction F>
AffinePiece tangent_at(const F& f, double z) {
  const double slope = f.subgradient(z);
  return AffinePiece{slope, f(z) - slope * z};
}

/// One action's contribution at a discrete state:
/// reward_part(z) + discount * cont_part(z).
struct Summand {
  ConvexPwl reward_part;
  ConvexPwl cont_part;
  double discount = 0.0;

  double operator()(double z) const {
    return eval(reward_part, z) + discount * eval(cont_part, z);
  }
  double subgradient(double z) const {
    return convexmdp::subgradient(reward_part, z) +
           discount * convexmdp::subgradient(cont_part, z);
  }
};

/// Maximum over actions of two-term summands, per discrete state.
///
/// Optionally carries a per-state envelope: an approximation of the
/// maximised function itself. When present, evaluation uses the envelope and
/// the summands only decide which action is active.
class CompositeConvex {
 public:
  struct Active {
    std::size_t action = 0;
    double value = 0.0;
    double slope = 0.0;
  };

  /// View of a single discrete state as a ConvexFunction.
  class StateView {
   public:
    StateView(const CompositeConvex& f, std::size_t p) : f_(&f), p_(p) {}
    double operator()(double z) const { return (*f_)(p_, z); }
    double subgradient(double z) const { return f_->subgradient(p_, z); }

   private:
    const CompositeConvex* f_;
    std::size_t p_;
  };

  CompositeConvex() = default;

  explicit CompositeConvex(std::vector<std::vector<Summand>> by_state,
                           std::vector<ConvexPwl> envelope = {})
      : states_(std::move(by_state)), envelope_(std::move(envelope)) {
    for (const auto& s : states_) {
      if (s.empty()) throw std::invalid_argument("CompositeConvex state with no summands");
    }
    if (!envelope_.empty() && envelope_.size() != states_.size())
      throw std::invalid_argument("CompositeConvex envelope needs one entry per state");
  }

  std::size_t num_states() const { return states_.size(); }
  const std::vector<Summand>& summands(std::size_t p) const { return states_.at(p); }
  bool has_envelope() const { return !envelope_.empty(); }
  const ConvexPwl& envelope(std::size_t p) const { return envelope_.at(p); }

  /// Maximum of the summands at (p, z). Equal values resolve to the largest
  /// slope, then to the lowest action index.
  Active summand_max(std::size_t p, double z) const {
    const auto& s = states_[p];
    Active best{0, s[0](z), s[0].subgradient(z)};
    for (std::size_t a = 1; a < s.size(); ++a) {
      const double v = s[a](z);
      if (v > best.value) {
        best = {a, v, s[a].subgradient(z)};
      } else if (v == best.value) {
        const double g = s[a].subgradient(z);
        if (g > best.slope) best = {a, v, g};
      }
    }
    return best;
  }

  /// Active action with the function's value and right derivative at (p, z).
  Active active(std::size_t p, double z) const {
    if (envelope_.empty()) return summand_max(p, z);
    const auto& e = envelope_[p];
    return {summand_max(p, z).action, eval(e, z), convexmdp::subgradient(e, z)};
  }

  /// Value and right derivative at (p, z), without the action.
  std::pair<double, double> value_slope(std::size_t p, double z) const {
    if (envelope_.empty()) {
      const auto a = summand_max(p, z);
      return {a.value, a.slope};
    }
    const auto& e = envelope_[p];
    return {eval(e, z), convexmdp::subgradient(e, z)};
  }

  double operator()(std::size_t p, double z) const {
    if (!envelope_.empty()) return eval(envelope_[p], z);
    const auto& s = states_[p];
    double best = s[0](z);
    for (std::size_t a = 1; a < s.size(); ++a) best = std::max(best, s[a](z));
    return best;
  }

  double subgradient(std::size_t p, double z) const {
    if (!envelope_.empty()) return convexmdp::subgradient(envelope_[p], z);
    return summand_max(p, z).slope;
  }

  StateView state(std::size_t p) const { return StateView(*this, p); }

 private:
  std::vector<std::vector<Summand>> states_;
  std::vector<ConvexPwl> envelope_;
};

}  // namespace convexmdp
