#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "maxent/common.hpp"
#include "maxent/support.hpp"

namespace maxent {

enum class MeasurementKind {
  PowerMoment,
  NormPower,
  QuadraticForm,
  IndicatorComplement,
  LinearCombination,
  Callback,
};

inline const char* to_string(MeasurementKind k) {
  switch (k) {
    case MeasurementKind::PowerMoment: return "power-moment";
    case MeasurementKind::NormPower: return "norm-power";
    case MeasurementKind::QuadraticForm: return "quadratic-form";
    case MeasurementKind::IndicatorComplement: return "indicator-complement";
    case MeasurementKind::LinearCombination: return "linear-combination";
    case MeasurementKind::Callback: return "callback";
  }
  return "unknown";
}

// Structural declarations. For built-in kinds these are machine-derived and
// sound; for callbacks they are user assertions that the library validates by
// sampling, never proves.
struct MeasurementAttributes {
  double lower_bound = -kInf;
  bool is_convex = false;
  bool is_coercive = false;
  bool is_well_behaved = false;
  double well_behaved_radius = 0.0;
  // Growth scale c with phi(x) on the order of c*|x_i|^2 or faster along
  // covered axes; seeds the truncation radius, correctness never depends on it.
  double growth_coefficient = 1.0;
  std::vector<double> breakpoints;
};

// Immutable evaluation object. Copies share the implementation; evaluation is
// pure, so instances are safe to use from any thread.
class MeasurementFunction {
 public:
  using Fn = std::function<double(std::span<const double>)>;

  static MeasurementFunction power_moment(int dimension, int axis, double exponent,
                                          bool absolute) {
    return MeasurementFunction(
        std::make_shared<PowerMomentImpl>(dimension, axis, exponent, absolute));
  }

  static MeasurementFunction norm_power(int dimension, double exponent) {
    return MeasurementFunction(std::make_shared<NormPowerImpl>(dimension, exponent));
  }

  static MeasurementFunction quadratic_form(Eigen::MatrixXd q) {
    return MeasurementFunction(std::make_shared<QuadraticFormImpl>(std::move(q)));
  }

  static MeasurementFunction indicator_complement(SupportSet region) {
    return MeasurementFunction(
        std::make_shared<IndicatorComplementImpl>(std::move(region)));
  }

  static MeasurementFunction linear_combination(std::vector<double> weights,
                                                std::vector<MeasurementFunction> parts) {
    return MeasurementFunction(
        std::make_shared<LinearCombinationImpl>(std::move(weights), std::move(parts)));
  }

  static MeasurementFunction callback(int dimension, Fn fn,
                                      MeasurementAttributes attributes,
                                      std::string label) {
    return MeasurementFunction(std::make_shared<CallbackImpl>(
        dimension, std::move(fn), std::move(attributes), std::move(label)));
  }

  // -phi as an opaque function with a caller-declared lower bound (= -sup phi
  // over the intended support). Together with phi this encodes an equality
  // constraint as two inequalities.
  static MeasurementFunction negated(const MeasurementFunction& phi,
                                     double lower_bound) {
    MeasurementAttributes attrs;
    attrs.lower_bound = lower_bound;
    auto impl = phi.impl_;
    return callback(
        phi.dimension(),
        [impl](std::span<const double> x) { return -impl->value(x); }, attrs,
        "-(" + phi.label() + ")");
  }

  double operator()(std::span<const double> x) const {
    validate_point(x, dimension(), label().c_str());
    return impl_->value(x);
  }

  // Unchecked evaluation for quadrature inner loops.
  double value(std::span<const double> x) const { return impl_->value(x); }

  int dimension() const { return impl_->dimension; }
  MeasurementKind kind() const { return impl_->kind; }
  const MeasurementAttributes& attributes() const { return impl_->attributes; }
  const std::string& label() const { return impl_->label; }

  // Axes along which exp(-lambda*phi) decays uniformly in the remaining
  // coordinates. Truncation boxes grow from these; uncovered axes rely on
  // other exponent terms or on the support itself being bounded there.
  const std::vector<bool>& coercive_axes() const { return impl_->coercive_axes; }

  // Locations where the function or a low derivative is discontinuous;
  // adaptive quadrature splits cells here. Only meaningful for d = 1.
  std::vector<double> breakpoints_1d() const { return impl_->breakpoints_1d(); }

  // Greatest lower bound the kind can certify over the given support (>= the
  // global attributes().lower_bound; exact for coordinate-wise kinds on boxes).
  double support_lower_bound(const SupportSet& support) const {
    if (support.dimension() != dimension())
      throw std::invalid_argument("support_lower_bound: dimension mismatch");
    return impl_->support_lower_bound(support);
  }

 private:
  struct Impl {
    int dimension;
    MeasurementKind kind;
    MeasurementAttributes attributes;
    std::string label;
    std::vector<bool> coercive_axes;

    Impl(int dim, MeasurementKind k) : dimension(dim), kind(k) {
      if (dim < 1) throw std::invalid_argument("MeasurementFunction: dimension < 1");
      coercive_axes.assign(static_cast<size_t>(dim), false);
    }
    virtual ~Impl() = default;
    virtual double value(std::span<const double> x) const = 0;
    virtual std::vector<double> breakpoints_1d() const { return attributes.breakpoints; }
    virtual double support_lower_bound(const SupportSet&) const {
      return attributes.lower_bound;
    }
  };

  struct PowerMomentImpl : Impl {
    int axis;
    double exponent;
    bool absolute;

    PowerMomentImpl(int dim, int ax, double p, bool abs)
        : Impl(dim, MeasurementKind::PowerMoment), axis(ax), exponent(p), absolute(abs) {
      if (ax < 0 || ax >= dim)
        throw std::invalid_argument("power_moment: axis out of range");
      if (!(p > 0.0)) throw std::invalid_argument("power_moment: exponent must be > 0");
      if (!abs && p != std::round(p))
        throw std::invalid_argument("power_moment: signed form needs integer exponent");
      const bool even = !abs && std::fmod(p, 2.0) == 0.0;
      const bool signed_odd = !abs && !even;
      attributes.lower_bound = signed_odd ? -kInf : 0.0;
      // Signed odd powers are unbounded below and, past p = 1, non-convex.
      attributes.is_convex = p >= 1.0 && (!signed_odd || p == 1.0);
      attributes.is_coercive = !signed_odd && dim == 1;
      attributes.is_well_behaved = attributes.is_convex && attributes.is_coercive;
      if (!signed_odd) coercive_axes[static_cast<size_t>(ax)] = true;
      std::ostringstream os;
      if (abs)
        os << "|x_" << (ax + 1) << "|^" << p;
      else
        os << "x_" << (ax + 1) << "^" << p;
      label = os.str();
    }

    double value(std::span<const double> x) const override {
      const double t = x[static_cast<size_t>(axis)];
      if (absolute) return std::pow(std::abs(t), exponent);
      if (exponent == 1.0) return t;
      if (exponent == 2.0) return t * t;
      return std::pow(t, exponent);
    }

    std::vector<double> breakpoints_1d() const override {
      // |t|^p has a derivative kink at 0 for p < 2; harmless to split there
      // for every absolute form.
      if (absolute) return {0.0};
      return {};
    }

    double support_lower_bound(const SupportSet& s) const override {
      const double a = s.lower()[static_cast<size_t>(axis)];
      const double b = s.upper()[static_cast<size_t>(axis)];
      const bool even = !absolute && std::fmod(exponent, 2.0) == 0.0;
      if (absolute || even) {
        const double t = std::clamp(0.0, a, b);
        return std::pow(std::abs(t), exponent);
      }
      // Odd signed power is increasing; minimum at the left edge.
      return std::isfinite(a) ? std::pow(a, exponent) : -kInf;
    }
  };

  struct NormPowerImpl : Impl {
    double exponent;

    NormPowerImpl(int dim, double p)
        : Impl(dim, MeasurementKind::NormPower), exponent(p) {
      if (!(p > 0.0)) throw std::invalid_argument("norm_power: exponent must be > 0");
      attributes.lower_bound = 0.0;
      attributes.is_convex = p >= 1.0;
      attributes.is_coercive = true;
      attributes.is_well_behaved = attributes.is_convex;
      std::fill(coercive_axes.begin(), coercive_axes.end(), true);
      std::ostringstream os;
      os << "||x||^" << p;
      label = os.str();
    }

    double value(std::span<const double> x) const override {
      double s = 0.0;
      for (double v : x) s += v * v;
      if (exponent == 2.0) return s;
      return std::pow(std::sqrt(s), exponent);
    }

    std::vector<double> breakpoints_1d() const override { return {0.0}; }

    double support_lower_bound(const SupportSet& s) const override {
      double acc = 0.0;
      for (int i = 0; i < dimension; ++i) {
        const double t = std::clamp(0.0, s.lower()[static_cast<size_t>(i)],
                                    s.upper()[static_cast<size_t>(i)]);
        acc += t * t;
      }
      return std::pow(std::sqrt(acc), exponent);
    }
  };

  struct QuadraticFormImpl : Impl {
    Eigen::MatrixXd q;

    explicit QuadraticFormImpl(Eigen::MatrixXd m)
        : Impl(static_cast<int>(m.rows()), MeasurementKind::QuadraticForm),
          q(std::move(m)) {
      if (q.rows() != q.cols())
        throw std::invalid_argument("quadratic_form: matrix not square");
      if (!q.isApprox(q.transpose(), 1e-12))
        throw std::invalid_argument("quadratic_form: matrix not symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
      const double min_eig = es.eigenvalues().minCoeff();
      const double max_eig = es.eigenvalues().maxCoeff();
      if (min_eig < -1e-10 * std::max(1.0, max_eig))
        throw std::invalid_argument("quadratic_form: matrix not positive semidefinite");
      attributes.lower_bound = 0.0;
      attributes.is_convex = true;
      attributes.is_coercive = min_eig > 1e-10 * std::max(1.0, max_eig);
      attributes.is_well_behaved = attributes.is_coercive;
      attributes.growth_coefficient = std::max(min_eig, 0.0);
      if (attributes.is_coercive)
        std::fill(coercive_axes.begin(), coercive_axes.end(), true);
      label = "x'Qx";
    }

    double value(std::span<const double> x) const override {
      double acc = 0.0;
      for (int i = 0; i < dimension; ++i) {
        double row = 0.0;
        for (int j = 0; j < dimension; ++j)
          row += q(i, j) * x[static_cast<size_t>(j)];
        acc += x[static_cast<size_t>(i)] * row;
      }
      return acc;
    }

    double support_lower_bound(const SupportSet&) const override { return 0.0; }
  };

  struct IndicatorComplementImpl : Impl {
    SupportSet region;

    explicit IndicatorComplementImpl(SupportSet r)
        : Impl(r.dimension(), MeasurementKind::IndicatorComplement),
          region(std::move(r)) {
      attributes.lower_bound = 0.0;
      label = "1 - 1_A";
    }

    double value(std::span<const double> x) const override {
      return region.contains(x) ? 0.0 : 1.0;
    }

    std::vector<double> breakpoints_1d() const override {
      std::vector<double> out;
      if (dimension != 1) return out;
      if (std::isfinite(region.lower()[0])) out.push_back(region.lower()[0]);
      if (std::isfinite(region.upper()[0])) out.push_back(region.upper()[0]);
      return out;
    }

    double support_lower_bound(const SupportSet&) const override { return 0.0; }
  };

  struct LinearCombinationImpl : Impl {
    std::vector<double> weights;
    std::vector<MeasurementFunction> parts;

    LinearCombinationImpl(std::vector<double> w, std::vector<MeasurementFunction> p)
        : Impl(p.empty() ? 1 : p.front().dimension(),
               MeasurementKind::LinearCombination),
          weights(std::move(w)),
          parts(std::move(p)) {
      if (parts.empty())
        throw std::invalid_argument("linear_combination: no parts");
      if (weights.size() != parts.size())
        throw std::invalid_argument("linear_combination: weight count mismatch");
      double weight_sum = 0.0;
      for (double mu : weights) {
        if (!std::isfinite(mu) || mu < 0.0)
          throw std::invalid_argument("linear_combination: weights must be >= 0 and finite");
        weight_sum += mu;
      }
      if (weight_sum == 0.0)
        throw std::invalid_argument("linear_combination: all weights zero");
      for (const auto& part : parts)
        if (part.dimension() != dimension)
          throw std::invalid_argument("linear_combination: dimension mismatch");

      attributes.lower_bound = 0.0;
      attributes.is_convex = true;
      bool all_bounded = true;
      for (size_t i = 0; i < parts.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const auto& a = parts[i].attributes();
        if (std::isfinite(a.lower_bound))
          attributes.lower_bound += weights[i] * a.lower_bound;
        else
          all_bounded = false;
        if (!a.is_convex) attributes.is_convex = false;
      }
      if (!all_bounded) attributes.lower_bound = -kInf;
      // A coercive part plus bounded-below companions keeps the sum coercive.
      attributes.is_coercive = false;
      if (all_bounded) {
        for (size_t i = 0; i < parts.size(); ++i)
          if (weights[i] > 0.0 && parts[i].attributes().is_coercive)
            attributes.is_coercive = true;
      }
      attributes.is_well_behaved = attributes.is_convex && attributes.is_coercive;
      double c = kInf;
      for (size_t i = 0; i < parts.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        const auto& pa = parts[i].attributes();
        for (int ax = 0; ax < dimension; ++ax) {
          if (all_bounded && parts[i].coercive_axes()[static_cast<size_t>(ax)])
            coercive_axes[static_cast<size_t>(ax)] = true;
        }
        if (pa.is_coercive)
          c = std::min(c, weights[i] * pa.growth_coefficient);
      }
      attributes.growth_coefficient = std::isfinite(c) ? c : 1.0;
      std::ostringstream os;
      for (size_t i = 0; i < parts.size(); ++i) {
        if (i) os << " + ";
        os << weights[i] << "*" << parts[i].label();
      }
      label = os.str();
    }

    double value(std::span<const double> x) const override {
      double acc = 0.0;
      for (size_t i = 0; i < parts.size(); ++i)
        if (weights[i] != 0.0) acc += weights[i] * parts[i].value(x);
      return acc;
    }

    std::vector<double> breakpoints_1d() const override {
      std::vector<double> out;
      for (const auto& part : parts) {
        auto b = part.breakpoints_1d();
        out.insert(out.end(), b.begin(), b.end());
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    }

    double support_lower_bound(const SupportSet& s) const override {
      double acc = 0.0;
      for (size_t i = 0; i < parts.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const double lb = parts[i].support_lower_bound(s);
        if (!std::isfinite(lb)) return -kInf;
        acc += weights[i] * lb;
      }
      return acc;
    }
  };

  struct CallbackImpl : Impl {
    Fn fn;

    CallbackImpl(int dim, Fn f, MeasurementAttributes attrs, std::string name)
        : Impl(dim, MeasurementKind::Callback), fn(std::move(f)) {
      if (!fn) throw std::invalid_argument("callback: empty function");
      attributes = std::move(attrs);
      if (attributes.is_well_behaved && attributes.well_behaved_radius < 0.0)
        throw std::invalid_argument("callback: negative well-behaved radius");
      if (attributes.is_coercive)
        std::fill(coercive_axes.begin(), coercive_axes.end(), true);
      label = name.empty() ? "callback" : std::move(name);
    }

    double value(std::span<const double> x) const override { return fn(x); }
  };

  explicit MeasurementFunction(std::shared_ptr<const Impl> impl)
      : impl_(std::move(impl)) {}

  std::shared_ptr<const Impl> impl_;
};

}  // namespace maxent
